//! Parsing code-switched text with a bilingual tagger and parser.
//!
//! Sentences that mix two languages defeat monolingual models: half the
//! vocabulary is unknown. A tagger and parser trained on the merged
//! corpus handle the mix. The tagger must be trained on the same tag
//! column the parser expects, here the coarse universal column.
//!
//! Run with `cargo run --example code_switching`.

use treelace::synth::{generate, generate_code_switched, toy_language_a, toy_language_b};
use treelace::tagger::TagColumn;
use treelace::{
    merge_treebanks, score, tag_and_parse, train_parser, train_tagger, Result, TagConfig,
    TaggerParams, TrainParams,
};

fn main() -> Result<()> {
    let lang_a = toy_language_a();
    let lang_b = toy_language_b();
    let train_a = generate(&lang_a, 200, 41);
    let dev_a = generate(&lang_a, 40, 42);
    let train_b = generate(&lang_b, 200, 43);
    let dev_b = generate(&lang_b, 40, 44);
    let train = merge_treebanks(vec![
        ("xa".to_string(), train_a.clone()),
        ("xb".to_string(), train_b),
    ])?;
    let dev = merge_treebanks(vec![
        ("xa".to_string(), dev_a.clone()),
        ("xb".to_string(), dev_b),
    ])?;

    // Gold mixed-language sentences to measure against.
    let mixed = generate_code_switched(&lang_a, &lang_b, 50, 45);
    let first: Vec<&str> = mixed.sentences[0]
        .tokens
        .iter()
        .map(|t| t.form.as_str())
        .collect();
    println!("a code-switched sentence: {}", first.join(" "));

    let tagger_params = TaggerParams {
        epochs: 8,
        seed: 3,
        ..TaggerParams::default()
    };
    let parser_params = TrainParams {
        epochs: 8,
        seed: 3,
        tag_config: Some(TagConfig::universal()),
        ..TrainParams::default()
    };

    // The parser trains on universal tags, so the tagger learns the
    // cpostag column; a fine-tag tagger would feed it an alien inventory.
    let bilingual_tagger = train_tagger(&train, &dev, TagColumn::Cpostag, &tagger_params)?;
    let bilingual_parser = train_parser(&train, &dev, &parser_params)?;

    let monolingual_tagger = train_tagger(&train_a, &dev_a, TagColumn::Cpostag, &tagger_params)?;
    let monolingual_parser = train_parser(&train_a, &dev_a, &parser_params)?;

    // The pipeline predicts tags first, then heads and labels; the gold
    // trees in `mixed` are only used for scoring.
    let bilingual_out = tag_and_parse(&bilingual_tagger, &bilingual_parser, &mixed, None)?;
    let monolingual_out = tag_and_parse(&monolingual_tagger, &monolingual_parser, &mixed, None)?;

    let bilingual_las = score(&mixed, &bilingual_out, false)?.las;
    let monolingual_las = score(&mixed, &monolingual_out, false)?.las;
    println!(
        "LAS on mixed sentences: bilingual pipeline {:.2}, single-language pipeline {:.2}",
        bilingual_las, monolingual_las
    );

    let tagged: Vec<String> = bilingual_out.sentences[0]
        .tokens
        .iter()
        .map(|t| format!("{}/{}", t.form, t.cpostag))
        .collect();
    println!("bilingual tagging of that sentence: {}", tagged.join(" "));
    Ok(())
}
