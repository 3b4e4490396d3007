//! Automatic parser configuration in three phases: profile the training
//! data, pick the transition system by development accuracy, then grow
//! and prune the feature-template set greedily.
//!
//! Every decision is driven by the development split alone, and every
//! candidate is trained with the same seed, so the whole search is a
//! deterministic function of its inputs. A move (adding or removing one
//! template) is accepted only when it improves development LAS by at
//! least 0.05, which guards against chasing noise.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use crate::conll::Treebank;
use crate::error::{Error, Result};
use crate::features::{default_templates, FeatureTemplate};
use crate::parser::{train_parser, ParserModel, TrainParams};
use crate::transition::TransitionSystem;
use crate::treebank::{is_projective, TagConfig};

/// Settings shared by all candidate trainings of one search.
#[derive(Debug, Clone)]
pub struct OptimizeParams {
    pub epochs: usize,
    pub seed: u64,
    pub tag_config: Option<TagConfig>,
}

impl Default for OptimizeParams {
    fn default() -> Self {
        OptimizeParams {
            epochs: 15,
            seed: 1,
            tag_config: None,
        }
    }
}

/// Summary statistics of a training treebank.
#[derive(Debug, Clone, PartialEq)]
pub struct DataProfile {
    pub sentences: usize,
    pub tokens: usize,
    /// Fraction of sentences with at least one crossing arc.
    pub nonprojective_rate: f64,
    pub label_set_size: usize,
    /// Sentence share per language code, `und` for unmarked sentences,
    /// sorted by code.
    pub language_proportions: Vec<(String, f64)>,
    pub coarse_tagset_size: usize,
    pub fine_tagset_size: usize,
}

impl DataProfile {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("sentences\t{}\n", self.sentences));
        out.push_str(&format!("tokens\t{}\n", self.tokens));
        out.push_str(&format!(
            "nonprojective-rate\t{:.4}\n",
            self.nonprojective_rate
        ));
        out.push_str(&format!("labels\t{}\n", self.label_set_size));
        out.push_str(&format!("coarse-tags\t{}\n", self.coarse_tagset_size));
        out.push_str(&format!("fine-tags\t{}\n", self.fine_tagset_size));
        for (lang, share) in &self.language_proportions {
            out.push_str(&format!("language:{lang}\t{share:.4}\n"));
        }
        out
    }
}

/// Profiles the training data: sizes, non-projectivity, inventories,
/// and language composition.
pub fn phase1_analyze(train: &Treebank) -> Result<DataProfile> {
    if train.is_empty() {
        return Err(Error::data("cannot profile an empty treebank"));
    }
    let mut labels = BTreeSet::new();
    let mut coarse = BTreeSet::new();
    let mut fine = BTreeSet::new();
    let mut by_lang: BTreeMap<String, usize> = BTreeMap::new();
    let mut nonprojective = 0usize;
    for sentence in &train.sentences {
        if !is_projective(sentence) {
            nonprojective += 1;
        }
        let lang = sentence.lang.clone().unwrap_or_else(|| "und".to_string());
        *by_lang.entry(lang).or_insert(0) += 1;
        for token in &sentence.tokens {
            labels.insert(token.deprel.clone());
            coarse.insert(token.cpostag.clone());
            fine.insert(token.postag.clone());
        }
    }
    let total = train.len() as f64;
    Ok(DataProfile {
        sentences: train.len(),
        tokens: train.token_count(),
        nonprojective_rate: nonprojective as f64 / total,
        label_set_size: labels.len(),
        language_proportions: by_lang
            .into_iter()
            .map(|(lang, count)| (lang, count as f64 / total))
            .collect(),
        coarse_tagset_size: coarse.len(),
        fine_tagset_size: fine.len(),
    })
}

/// One system's score in the algorithm-selection phase.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemTrial {
    pub system: TransitionSystem,
    pub dev_las: f64,
    pub dev_correct: usize,
    pub dev_tokens: usize,
}

fn las_percent(correct: usize, tokens: usize) -> f64 {
    100.0 * correct as f64 / tokens as f64
}

fn trial_train(
    train: &Treebank,
    dev: &Treebank,
    system: TransitionSystem,
    templates: &[FeatureTemplate],
    params: &OptimizeParams,
) -> Result<ParserModel> {
    train_parser(
        train,
        dev,
        &TrainParams {
            system,
            templates: templates.to_vec(),
            epochs: params.epochs,
            seed: params.seed,
            shuffle: true,
            tag_config: params.tag_config,
        },
    )
}

/// Trains one parser per transition system with the default templates
/// and returns the system with the higher development LAS. Ties go to
/// the arc-eager system. The two trainings run concurrently.
pub fn phase2_select_algorithm(
    train: &Treebank,
    dev: &Treebank,
    params: &OptimizeParams,
) -> Result<(TransitionSystem, Vec<SystemTrial>)> {
    let (eager, standard) = rayon::join(
        || {
            trial_train(
                train,
                dev,
                TransitionSystem::ArcEager,
                &default_templates(TransitionSystem::ArcEager),
                params,
            )
        },
        || {
            trial_train(
                train,
                dev,
                TransitionSystem::ArcStandard,
                &default_templates(TransitionSystem::ArcStandard),
                params,
            )
        },
    );
    let trials: Vec<SystemTrial> = [eager?, standard?]
        .iter()
        .map(|model| {
            let meta = model.metadata();
            SystemTrial {
                system: model.system(),
                dev_las: las_percent(meta.dev_correct, meta.dev_tokens),
                dev_correct: meta.dev_correct,
                dev_tokens: meta.dev_tokens,
            }
        })
        .collect();
    let chosen = if trials[1].dev_correct > trials[0].dev_correct {
        TransitionSystem::ArcStandard
    } else {
        TransitionSystem::ArcEager
    };
    Ok((chosen, trials))
}

/// One tried move of the feature search.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub step: usize,
    /// `baseline`, `+name` for an addition, `-name` for a removal.
    pub move_desc: String,
    pub dev_las: f64,
    pub accepted: bool,
}

/// True when going from `best` to `candidate` correct attachments gains
/// at least 0.05 LAS over `tokens` development tokens.
fn improves(candidate: usize, best: usize, tokens: usize) -> bool {
    2000 * candidate as i64 - 2000 * best as i64 >= tokens as i64
}

fn sorted_by_name(templates: &[FeatureTemplate]) -> Vec<FeatureTemplate> {
    let mut out = templates.to_vec();
    out.sort_by_key(|t| t.name());
    out.dedup_by_key(|t| t.name());
    out
}

/// Greedy feature-template search for a fixed transition system: one
/// forward sweep that tries adding each pool template not already in the
/// set, then one backward sweep that tries removing each member. Sweeps
/// visit templates in name order, and a move sticks only when it
/// improves development LAS by at least 0.05. Returns the final set,
/// the trial log, and the model trained with the final set.
pub fn phase3_feature_search(
    train: &Treebank,
    dev: &Treebank,
    system: TransitionSystem,
    pool: &[FeatureTemplate],
    params: &OptimizeParams,
) -> Result<(Vec<FeatureTemplate>, Vec<TrialRecord>, ParserModel)> {
    let mut current = sorted_by_name(&default_templates(system));
    let pool = sorted_by_name(pool);
    let pool_names: BTreeSet<String> = pool.iter().map(|t| t.name()).collect();
    for t in &current {
        if !pool_names.contains(&t.name()) {
            return Err(Error::data(format!(
                "the candidate pool must contain the default templates, '{}' is missing",
                t.name()
            )));
        }
    }

    let mut best_model = trial_train(train, dev, system, &current, params)?;
    let mut best_correct = best_model.metadata().dev_correct;
    let dev_tokens = best_model.metadata().dev_tokens;
    let mut trials = vec![TrialRecord {
        step: 0,
        move_desc: "baseline".to_string(),
        dev_las: las_percent(best_correct, dev_tokens),
        accepted: true,
    }];

    let current_names: BTreeSet<String> = current.iter().map(|t| t.name()).collect();
    let additions: Vec<FeatureTemplate> = pool
        .iter()
        .filter(|t| !current_names.contains(&t.name()))
        .cloned()
        .collect();

    for candidate in additions {
        let mut attempt = current.clone();
        attempt.push(candidate.clone());
        let attempt = sorted_by_name(&attempt);
        let model = trial_train(train, dev, system, &attempt, params)?;
        let correct = model.metadata().dev_correct;
        let accepted = improves(correct, best_correct, dev_tokens);
        trials.push(TrialRecord {
            step: trials.len(),
            move_desc: format!("+{}", candidate.name()),
            dev_las: las_percent(correct, dev_tokens),
            accepted,
        });
        if accepted {
            current = attempt;
            best_model = model;
            best_correct = correct;
        }
    }

    for name in current.iter().map(|t| t.name()).collect::<Vec<_>>() {
        if current.len() == 1 {
            break;
        }
        let attempt: Vec<FeatureTemplate> = current
            .iter()
            .filter(|t| t.name() != name)
            .cloned()
            .collect();
        let model = trial_train(train, dev, system, &attempt, params)?;
        let correct = model.metadata().dev_correct;
        let accepted = improves(correct, best_correct, dev_tokens);
        trials.push(TrialRecord {
            step: trials.len(),
            move_desc: format!("-{name}"),
            dev_las: las_percent(correct, dev_tokens),
            accepted,
        });
        if accepted {
            current = attempt;
            best_model = model;
            best_correct = correct;
        }
    }

    Ok((current, trials, best_model))
}

/// The full log of an optimization run.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationReport {
    pub profile: DataProfile,
    pub system_trials: Vec<SystemTrial>,
    pub chosen_system: TransitionSystem,
    pub trials: Vec<TrialRecord>,
    pub final_templates: Vec<FeatureTemplate>,
    pub final_dev_las: f64,
}

impl OptimizationReport {
    /// Machine-readable trial table.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("step\tmove\tdev-las\taccepted\n");
        for t in &self.trials {
            out.push_str(&format!(
                "{}\t{}\t{:.4}\t{}\n",
                t.step, t.move_desc, t.dev_las, t.accepted
            ));
        }
        out
    }

    /// Human-readable log of all three phases.
    pub fn to_text(&self) -> String {
        let mut out = String::from("data profile\n");
        for line in self.profile.to_tsv().lines() {
            let (key, value) = line.split_once('\t').unwrap_or((line, ""));
            out.push_str(&format!("  {key:<20} {value}\n"));
        }
        out.push_str("\nalgorithm selection\n");
        for trial in &self.system_trials {
            out.push_str(&format!(
                "  {:<14} dev LAS {:.2} ({}/{})\n",
                trial.system.name(),
                trial.dev_las,
                trial.dev_correct,
                trial.dev_tokens
            ));
        }
        out.push_str(&format!("  chosen: {}\n", self.chosen_system.name()));
        out.push_str("\nfeature search\n");
        for t in &self.trials {
            out.push_str(&format!(
                "  step {:>3}  {:<28} dev LAS {:>7.2}  {}\n",
                t.step,
                t.move_desc,
                t.dev_las,
                if t.accepted { "accepted" } else { "rejected" }
            ));
        }
        out.push_str(&format!("\nfinal dev LAS {:.2}\n", self.final_dev_las));
        out.push_str(&format!("final templates ({}):\n", self.final_templates.len()));
        for t in &self.final_templates {
            out.push_str(&format!("  {}\n", t.name()));
        }
        out
    }
}

/// Runs all three phases and returns the model trained with the chosen
/// system and template set, together with the full search log.
pub fn optimize(
    train: &Treebank,
    dev: &Treebank,
    pool: &[FeatureTemplate],
    params: &OptimizeParams,
) -> Result<(ParserModel, OptimizationReport)> {
    let profile = phase1_analyze(train)?;
    let (system, system_trials) = phase2_select_algorithm(train, dev, params)?;
    let (templates, trials, model) = phase3_feature_search(train, dev, system, pool, params)?;
    let meta = model.metadata();
    let report = OptimizationReport {
        profile,
        system_trials,
        chosen_system: system,
        trials,
        final_templates: templates,
        final_dev_las: las_percent(meta.dev_correct, meta.dev_tokens),
    };
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{Sentence, Token, Treebank};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pick<'a>(rng: &mut ChaCha8Rng, choices: &[&'a str]) -> &'a str {
        choices.choose(rng).copied().unwrap()
    }

    /// Verb-first sentences whose object label is revealed only by the
    /// final word. When the object is attached, the arc-eager system has
    /// the revealing word far beyond its feature window while the
    /// arc-standard system, attaching right dependents bottom-up, has it
    /// as the buffer front.
    fn late_cue_corpus(n: usize, seed: u64) -> Treebank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sentences = Vec::with_capacity(n);
        for _ in 0..n {
            let m = pick(&mut rng, &["ma", "mb"]);
            let obj = if m == "ma" { "obj1" } else { "obj2" };
            let mut tokens = vec![
                Token::new(1, pick(&mut rng, &["va", "ve"]), "V", "V", 0, "root"),
                Token::new(2, pick(&mut rng, &["na", "ne"]), "N", "N", 1, obj),
            ];
            for id in 3..=6 {
                tokens.push(Token::new(
                    id,
                    pick(&mut rng, &["wa", "we", "wi"]),
                    "W",
                    "W",
                    2,
                    "wmod",
                ));
            }
            tokens.push(Token::new(7, m, "M", "M", 1, "mdep"));
            sentences.push(Sentence::new(tokens, None));
        }
        Treebank::new(sentences, "late-cue")
    }

    /// Sentences whose first word's label is revealed by the fifth word,
    /// which sits at buffer position three when the first word is
    /// attached: invisible to the default templates, visible to a
    /// `B3.postag` template.
    fn deep_cue_corpus(n: usize, seed: u64) -> Treebank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sentences = Vec::with_capacity(n);
        for _ in 0..n {
            let c = pick(&mut rng, &["ca", "ce"]);
            let (ctag, xlabel) = if c == "ca" { ("c1", "p") } else { ("c2", "q") };
            let tokens = vec![
                Token::new(1, pick(&mut rng, &["xa", "xe"]), "X", "X", 2, xlabel),
                Token::new(2, pick(&mut rng, &["ya", "ye"]), "Y", "Y", 0, "root"),
                Token::new(3, pick(&mut rng, &["aa", "ae"]), "A", "A", 2, "amod"),
                Token::new(4, pick(&mut rng, &["ba", "be"]), "B", "B", 2, "bmod"),
                Token::new(5, c, "C", ctag, 2, "cmod"),
            ];
            sentences.push(Sentence::new(tokens, None));
        }
        Treebank::new(sentences, "deep-cue")
    }

    /// Three-token sentences both systems parse perfectly.
    fn easy_corpus(n: usize, seed: u64) -> Treebank {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sentences = Vec::with_capacity(n);
        for _ in 0..n {
            let tokens = vec![
                Token::new(1, pick(&mut rng, &["da", "de"]), "D", "D", 2, "det"),
                Token::new(2, pick(&mut rng, &["na", "ne"]), "N", "N", 3, "nsubj"),
                Token::new(3, pick(&mut rng, &["va", "ve"]), "V", "V", 0, "root"),
            ];
            sentences.push(Sentence::new(tokens, None));
        }
        Treebank::new(sentences, "easy")
    }

    fn quick_params() -> OptimizeParams {
        OptimizeParams {
            epochs: 6,
            seed: 1,
            tag_config: None,
        }
    }

    #[test]
    fn profile_counts_everything() {
        use crate::synth::{generate, toy_language_a, toy_language_b};
        use crate::treebank::merge_treebanks;
        let a = generate(&toy_language_a(), 30, 1);
        let b = generate(&toy_language_b(), 10, 2);
        let merged = merge_treebanks(vec![("xa".into(), a), ("xb".into(), b)]).unwrap();
        let profile = phase1_analyze(&merged).unwrap();
        assert_eq!(profile.sentences, 40);
        assert_eq!(profile.tokens, merged.token_count());
        assert_eq!(profile.nonprojective_rate, 0.0);
        let share: f64 = profile.language_proportions.iter().map(|(_, s)| s).sum();
        assert!((share - 1.0).abs() < 1e-12);
        assert_eq!(profile.language_proportions[0].0, "xa");
        assert!((profile.language_proportions[0].1 - 0.75).abs() < 1e-12);
        assert_eq!(profile.label_set_size, 5);
        assert_eq!(profile.coarse_tagset_size, 4);
        assert_eq!(profile.fine_tagset_size, 8);
    }

    #[test]
    fn profile_flags_crossing_arcs() {
        let crossing = Sentence::new(
            vec![
                Token::new(1, "a", "X", "x", 3, "dep"),
                Token::new(2, "b", "X", "x", 4, "dep"),
                Token::new(3, "c", "X", "x", 0, "root"),
                Token::new(4, "d", "X", "x", 3, "dep"),
            ],
            None,
        );
        let tb = Treebank::new(vec![crossing], "crossing");
        let profile = phase1_analyze(&tb).unwrap();
        assert_eq!(profile.nonprojective_rate, 1.0);
        assert_eq!(profile.language_proportions, vec![("und".to_string(), 1.0)]);
        assert!(phase1_analyze(&Treebank::new(vec![], "empty")).is_err());
    }

    #[test]
    fn algorithm_tie_goes_to_arc_eager() {
        let train = easy_corpus(40, 1);
        let dev = easy_corpus(15, 2);
        let (system, trials) = phase2_select_algorithm(&train, &dev, &quick_params()).unwrap();
        assert_eq!(trials.len(), 2);
        assert_eq!(trials[0].system, TransitionSystem::ArcEager);
        assert_eq!(trials[1].system, TransitionSystem::ArcStandard);
        assert_eq!(trials[0].dev_correct, trials[0].dev_tokens);
        assert_eq!(trials[1].dev_correct, trials[1].dev_tokens);
        assert_eq!(system, TransitionSystem::ArcEager);
    }

    #[test]
    fn late_cue_pattern_selects_arc_standard() {
        let train = late_cue_corpus(80, 3);
        let dev = late_cue_corpus(30, 4);
        let (system, trials) = phase2_select_algorithm(&train, &dev, &quick_params()).unwrap();
        assert_eq!(system, TransitionSystem::ArcStandard);
        assert!(trials[1].dev_correct > trials[0].dev_correct);
        assert!(trials[1].dev_las > 99.0);
        assert!(trials[0].dev_las < 98.0);
    }

    #[test]
    fn search_with_defaults_only_makes_no_moves() {
        let train = easy_corpus(40, 1);
        let dev = easy_corpus(15, 2);
        let system = TransitionSystem::ArcEager;
        let (templates, trials, _) = phase3_feature_search(
            &train,
            &dev,
            system,
            &default_templates(system),
            &quick_params(),
        )
        .unwrap();
        assert_eq!(trials.len(), 1 + default_templates(system).len());
        assert_eq!(trials[0].move_desc, "baseline");
        assert!(trials[1..].iter().all(|t| t.move_desc.starts_with('-')));
        assert!(trials[1..].iter().all(|t| !t.accepted));
        assert_eq!(
            templates
                .iter()
                .map(FeatureTemplate::name)
                .collect::<Vec<_>>(),
            sorted_by_name(&default_templates(system))
                .iter()
                .map(FeatureTemplate::name)
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn search_rejects_pool_without_defaults() {
        let train = easy_corpus(10, 1);
        let dev = easy_corpus(5, 2);
        let pool = vec![FeatureTemplate::parse("B3.postag").unwrap()];
        assert!(phase3_feature_search(
            &train,
            &dev,
            TransitionSystem::ArcEager,
            &pool,
            &quick_params()
        )
        .is_err());
    }

    #[test]
    fn deep_cue_template_is_accepted_in_forward_pass() {
        let train = deep_cue_corpus(60, 5);
        let dev = deep_cue_corpus(25, 6);
        let system = TransitionSystem::ArcEager;
        let mut pool = default_templates(system);
        pool.push(FeatureTemplate::parse("B3.postag").unwrap());
        let (templates, trials, model) =
            phase3_feature_search(&train, &dev, system, &pool, &quick_params()).unwrap();

        let addition = trials
            .iter()
            .find(|t| t.move_desc == "+B3.postag")
            .expect("the candidate must be tried");
        assert!(addition.accepted);
        assert!(templates.iter().any(|t| t.name() == "B3.postag"));
        let baseline = &trials[0];
        assert!(baseline.dev_las < 95.0);
        assert!(addition.dev_las > 99.0);
        assert!(model.metadata().dev_correct == model.metadata().dev_tokens);

        let accepted_las: Vec<f64> = trials
            .iter()
            .filter(|t| t.accepted && t.move_desc != "baseline")
            .map(|t| t.dev_las)
            .collect();
        assert!(accepted_las.iter().all(|&l| l >= baseline.dev_las + 0.05));
    }

    #[test]
    fn optimize_is_deterministic_and_never_worsens() {
        let train = late_cue_corpus(60, 7);
        let dev = late_cue_corpus(20, 8);
        let system = TransitionSystem::ArcStandard;
        let mut pool = default_templates(system);
        pool.push(FeatureTemplate::parse("B3.postag").unwrap());
        pool.push(FeatureTemplate::parse("S2.postag").unwrap());
        let params = quick_params();

        let (model1, report1) = optimize(&train, &dev, &pool, &params).unwrap();
        let (model2, report2) = optimize(&train, &dev, &pool, &params).unwrap();
        assert_eq!(report1, report2);
        assert_eq!(model1.save().unwrap(), model2.save().unwrap());

        assert_eq!(report1.chosen_system, TransitionSystem::ArcStandard);
        let chosen_phase2 = report1
            .system_trials
            .iter()
            .find(|t| t.system == report1.chosen_system)
            .unwrap();
        assert!(report1.final_dev_las >= chosen_phase2.dev_las);

        let mut last = f64::NEG_INFINITY;
        for t in report1.trials.iter().filter(|t| t.accepted) {
            assert!(t.dev_las > last, "accepted scores must strictly increase");
            last = t.dev_las;
        }

        let text = report1.to_text();
        assert!(text.contains("algorithm selection"));
        assert!(text.contains("chosen: arc-standard"));
        let tsv = report1.to_tsv();
        assert!(tsv.starts_with("step\tmove\tdev-las\taccepted\n"));
        assert!(tsv.lines().count() == report1.trials.len() + 1);
    }
}
