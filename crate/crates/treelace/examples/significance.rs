//! Deciding whether one parser is really better than another.
//!
//! A paired randomization test swaps the two systems' outputs sentence by
//! sentence: if random swaps often match the observed score difference,
//! the difference means nothing. Small test sets are enumerated exactly.
//! When many comparisons run at once, Benjamini-Hochberg keeps the false
//! discovery rate in check.
//!
//! Run with `cargo run --example significance`.

use treelace::synth::{generate, toy_language_a};
use treelace::transition::TransitionSystem;
use treelace::{
    benjamini_hochberg, randomized_comparator, score, train_parser, Metric, Result, TrainParams,
    Treebank,
};

fn main() -> Result<()> {
    let language = toy_language_a();
    let train = generate(&language, 200, 31);
    let dev = generate(&language, 40, 32);
    let test = generate(&language, 60, 33);

    // A fair fight: same data, same seed, different transition systems.
    let mut params = TrainParams {
        epochs: 8,
        seed: 5,
        ..TrainParams::default()
    };
    let eager = train_parser(&train, &dev, &params)?;
    params = params.with_system(TransitionSystem::ArcStandard);
    let standard = train_parser(&train, &dev, &params)?;

    // A starved challenger: trained only on sentences without objects,
    // so it fails systematically on the test set's transitive clauses.
    let intransitive: Vec<_> = train
        .sentences
        .iter()
        .filter(|s| s.tokens.iter().all(|t| t.deprel != "dobj"))
        .cloned()
        .collect();
    let starved_train = Treebank::new(intransitive, "starved");
    let starved = train_parser(&starved_train, &dev, &params)?;

    let report_for = |model: &treelace::ParserModel| -> Result<treelace::EvalReport> {
        score(&test, &model.parse_treebank(&test)?, false)
    };
    let eager_report = report_for(&eager)?;
    let standard_report = report_for(&standard)?;
    let starved_report = report_for(&starved)?;

    println!(
        "test LAS: arc-eager {:.2}, arc-standard {:.2}, starved {:.2}",
        eager_report.las, standard_report.las, starved_report.las
    );

    let close = randomized_comparator(&eager_report, &standard_report, Metric::Las, 10_000, 1)?;
    let clear = randomized_comparator(&standard_report, &starved_report, Metric::Las, 10_000, 1)?;
    for (label, result) in [
        ("arc-eager vs arc-standard", &close),
        ("arc-standard vs starved ", &clear),
    ] {
        let mode = if result.exact {
            "exact".to_string()
        } else {
            format!("{} shuffles", result.shuffles)
        };
        println!(
            "{label}: |diff| {:.2}, p = {:.6} ({mode})",
            result.observed_diff, result.p_value
        );
    }

    // Correct both p-values (plus some imaginary colleagues') together.
    // Note how 0.03 looks significant alone but does not survive the
    // correction at q = 0.05.
    let p_values = vec![close.p_value, clear.p_value, 0.03, 0.2, 0.9];
    let rejected = benjamini_hochberg(&p_values, 0.05)?;
    let shown: Vec<String> = p_values.iter().map(|p| format!("{p:.6}")).collect();
    println!("p-values going into the correction: [{}]", shown.join(", "));
    println!("indices still significant at q = 0.05: {rejected:?}");
    Ok(())
}
