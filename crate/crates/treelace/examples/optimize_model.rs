//! Automatic model selection: profile the data, pick the transition
//! system, then grow and prune the feature templates greedily.
//!
//! The corpus below stresses both phases. Half the sentences end in a
//! particle that decides the label of an earlier noun; a system that
//! delays attachments sees that particle at the moment of decision, a
//! system that commits early does not, so phase two has a real choice to
//! make. The other half hide their cue one token beyond the default
//! feature window, which only a deeper buffer template can reach, so the
//! phase-three search has something genuine to find.
//!
//! Run with `cargo run --example optimize_model`.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use treelace::features::{candidate_pool, default_templates};
use treelace::optimizer::{optimize, OptimizeParams};
use treelace::transition::TransitionSystem;
use treelace::{Result, Sentence, Token, Treebank};

fn pick(rng: &mut ChaCha8Rng, options: &[&str]) -> String {
    options.choose(rng).unwrap().to_string()
}

/// `verb noun w w w w particle`: the noun's label is `obj1` when the
/// final particle is "ma" and `obj2` otherwise. The noun has four
/// dependents, so its own attachment can be postponed until the
/// particle is close.
fn late_cue_sentence(rng: &mut ChaCha8Rng) -> Sentence {
    let particle = pick(rng, &["ma", "mo"]);
    let (ptag, noun_label) = if particle == "ma" {
        ("m1", "obj1")
    } else {
        ("m2", "obj2")
    };
    let mut tokens = vec![
        Token::new(1, pick(rng, &["va", "ve"]), "V", "V", 0, "root"),
        Token::new(2, pick(rng, &["na", "ne"]), "N", "N", 1, noun_label),
    ];
    for id in 3..=6 {
        tokens.push(Token::new(id, pick(rng, &["wa", "we", "wi"]), "W", "W", 2, "wmod"));
    }
    tokens.push(Token::new(7, particle, "M", ptag, 1, "mark"));
    Sentence::new(tokens, None)
}

/// `marker verb x x x cue`: the first token's label is `topic` when the
/// final cue is "kun" and `focus` otherwise. The marker must attach as
/// soon as the verb arrives, when the cue is still four tokens away,
/// one token beyond the default feature window.
fn deep_cue_sentence(rng: &mut ChaCha8Rng) -> Sentence {
    let cue = pick(rng, &["kun", "tor"]);
    let (ktag, marker_label) = if cue == "kun" {
        ("k1", "topic")
    } else {
        ("k2", "focus")
    };
    let mut tokens = vec![
        Token::new(1, pick(rng, &["ba", "bi"]), "B", "B", 2, marker_label),
        Token::new(2, pick(rng, &["runa", "rune"]), "V", "V", 0, "root"),
    ];
    for id in 3..=5 {
        tokens.push(Token::new(id, pick(rng, &["so", "su"]), "X", "X", 2, "xmod"));
    }
    tokens.push(Token::new(6, cue, "K", ktag, 2, "mark"));
    Sentence::new(tokens, None)
}

fn cue_corpus(n: usize, seed: u64) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let sentences = (0..n)
        .map(|i| {
            if i % 2 == 0 {
                late_cue_sentence(&mut rng)
            } else {
                deep_cue_sentence(&mut rng)
            }
        })
        .collect();
    Treebank::new(sentences, "cue")
}

fn main() -> Result<()> {
    let train = cue_corpus(160, 21);
    let dev = cue_corpus(60, 22);

    // The search pool must contain the default templates; anything beyond
    // them is offered to the greedy forward pass. The full pool works
    // too, it just searches longer, so this example trims it to the
    // candidates that look deeper into the buffer and stack.
    let defaults = default_templates(TransitionSystem::ArcEager);
    let mut pool = candidate_pool(TransitionSystem::ArcEager);
    pool.retain(|t| {
        let name = t.name();
        defaults.iter().any(|d| d.name() == name)
            || name.contains("B3")
            || name.contains("S2")
    });
    println!(
        "searching {} templates ({} defaults)",
        pool.len(),
        defaults.len()
    );

    let params = OptimizeParams {
        epochs: 6,
        seed: 7,
        ..OptimizeParams::default()
    };
    let (model, report) = optimize(&train, &dev, &pool, &params)?;

    println!("{}", report.to_text());

    let accepted: Vec<&str> = report
        .trials
        .iter()
        .filter(|t| t.accepted && t.step > 0)
        .map(|t| t.move_desc.as_str())
        .collect();
    if accepted.is_empty() {
        println!("the default templates were already optimal for this data");
    } else {
        println!("accepted moves: {}", accepted.join(", "));
    }
    println!(
        "final: {:?}, {} templates, dev LAS {:.2}",
        report.chosen_system,
        report.final_templates.len(),
        report.final_dev_las
    );

    let meta = model.metadata();
    println!(
        "winning model kept epoch {} of {}",
        meta.chosen_epoch, meta.epochs
    );
    Ok(())
}
