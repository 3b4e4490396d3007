//! Merging treebanks from several languages into one training corpus.
//!
//! A merged corpus can keep each language's own fine-grained tagset apart
//! by prefixing tags with the language code, or drop the fine tags and
//! train on the shared coarse tags only. The shared-tag matrix shows how
//! much the tagsets overlap before deciding.
//!
//! Run with `cargo run --example merge_treebanks`.

use treelace::synth::{generate, toy_language_a, toy_language_b};
use treelace::treebank::shared_tag_report;
use treelace::{apply_tag_config, merge_treebanks, Result, TagConfig};

fn main() -> Result<()> {
    let bank_a = generate(&toy_language_a(), 30, 1);
    let bank_b = generate(&toy_language_b(), 30, 2);
    let parts = vec![("xa".to_string(), bank_a), ("xb".to_string(), bank_b)];

    // How many fine tags do the two languages share?
    let matrix = shared_tag_report(&parts)?;
    println!("shared fine tags before any transform:");
    println!("{}", matrix.to_tsv());

    let merged = merge_treebanks(parts)?;
    println!(
        "merged corpus: {} sentences, languages stamped per sentence",
        merged.sentences.len()
    );

    // Option 1: keep both tagsets, prefixed so they cannot collide.
    let prefixed = apply_tag_config(&merged, &TagConfig::treebank_dependent().with_prefixing())?;
    let sample = &prefixed.sentences[0].tokens[0];
    println!(
        "treebank-dependent tags with prefixing: {} / {}",
        sample.cpostag, sample.postag
    );

    // Option 2: train on the coarse universal tags that both sides share.
    let universal = apply_tag_config(&merged, &TagConfig::universal())?;
    let sample = &universal.sentences[0].tokens[0];
    println!("universal tags only: {} / {}", sample.cpostag, sample.postag);

    // Prefixing is idempotent, so configured corpora can be merged again.
    let twice = apply_tag_config(&prefixed, &TagConfig::treebank_dependent().with_prefixing())?;
    assert_eq!(prefixed.sentences, twice.sentences);
    println!("applying the same tag transform twice changes nothing");
    Ok(())
}
