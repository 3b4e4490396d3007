//! Training a parser and evaluating it: the core workflow.
//!
//! Run with `cargo run --example train_and_parse`.

use treelace::synth::{generate, toy_language_a};
use treelace::{score, train_parser, ParserModel, Result, TrainParams};

fn main() -> Result<()> {
    let language = toy_language_a();
    let train = generate(&language, 200, 11);
    let dev = generate(&language, 50, 12);
    let test = generate(&language, 50, 13);

    let params = TrainParams {
        epochs: 10,
        seed: 42,
        ..TrainParams::default()
    };
    let model = train_parser(&train, &dev, &params)?;
    let meta = model.metadata();
    println!(
        "trained {} epochs, kept the weights from epoch {} (dev LAS {:.2})",
        meta.epochs,
        meta.chosen_epoch,
        100.0 * meta.dev_correct as f64 / meta.dev_tokens as f64
    );

    // Parsing ignores the input's heads and labels; only forms and tags
    // matter. Scoring compares against the gold test set.
    let parsed = model.parse_treebank(&test)?;
    let report = score(&test, &parsed, false)?;
    println!(
        "test set: LAS {:.2}, UAS {:.2} over {} tokens",
        report.las, report.uas, report.scored_tokens
    );

    // Models are plain sorted text: saving, loading and saving again is
    // byte-identical, so artifacts can be diffed and version-controlled.
    let saved = model.save()?;
    let reloaded = ParserModel::load(&saved)?;
    assert_eq!(saved, reloaded.save()?);
    println!("model text round trips byte for byte ({} bytes)", saved.len());

    let reparsed = reloaded.parse_treebank(&test)?;
    let replayed = score(&test, &reparsed, false)?;
    assert_eq!(report.las, replayed.las);
    println!("reloaded model parses identically");
    Ok(())
}
