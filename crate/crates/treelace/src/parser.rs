//! Training and running lexicalized transition-based parsers.
//!
//! [`train_parser`] runs an averaged perceptron over oracle transition
//! sequences, takes an averaged snapshot after every epoch, and keeps the
//! snapshot with the best labeled accuracy on the development set (ties
//! go to the earlier epoch). Models carry everything needed to parse:
//! weights, feature strings, templates, the transition system, the label
//! inventory and the tag configuration they were trained under.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conll::{Sentence, Treebank};
use crate::error::{Error, Result};
use crate::features::{
    extract, extract_frozen, format_template_set, parse_template_set, FeatureTemplate, Interner,
};
use crate::learner::LinearModel;
use crate::transition::{
    extract_tree, static_oracle, Configuration, Transition, TransitionKind, TransitionSystem,
};
use crate::treebank::{apply_tag_config, projectivize, TagConfig, TagMode};

/// Hyperparameters for [`train_parser`].
#[derive(Debug, Clone)]
pub struct TrainParams {
    pub system: TransitionSystem,
    pub templates: Vec<FeatureTemplate>,
    /// Number of passes over the training data; a snapshot is evaluated
    /// after each.
    pub epochs: usize,
    /// Seed for the sentence-order shuffle. Identical data and seed give
    /// a byte-identical model.
    pub seed: u64,
    /// Shuffle sentence order each epoch. Disable for strictly
    /// order-dependent experiments.
    pub shuffle: bool,
    /// Tag configuration applied to the training and development sets
    /// before anything else, and recorded in the model.
    pub tag_config: Option<TagConfig>,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            system: TransitionSystem::ArcEager,
            templates: crate::features::default_templates(TransitionSystem::ArcEager),
            epochs: 15,
            seed: 1,
            shuffle: true,
            tag_config: None,
        }
    }
}

impl TrainParams {
    pub fn with_system(mut self, system: TransitionSystem) -> Self {
        self.system = system;
        self.templates = crate::features::default_templates(system);
        self
    }
}

/// How a model came to be: recorded at training time, stored in the
/// model file.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainMetadata {
    pub seed: u64,
    pub epochs: usize,
    /// 1-based epoch whose snapshot was kept.
    pub chosen_epoch: usize,
    /// Development LAS after each epoch, in percent.
    pub dev_las_by_epoch: Vec<f64>,
    /// Correct labeled attachments of the chosen snapshot on dev.
    pub dev_correct: usize,
    /// Scored dev tokens.
    pub dev_tokens: usize,
}

/// A trained, frozen parsing model.
#[derive(Debug, Clone)]
pub struct ParserModel {
    model: LinearModel,
    interner: Interner,
    system: TransitionSystem,
    templates: Vec<FeatureTemplate>,
    labels: Vec<String>,
    languages: Vec<String>,
    tag_config: Option<TagConfig>,
    metadata: TrainMetadata,
}

/// The class inventory for a system and label set, in a fixed order:
/// SHIFT, REDUCE (arc-eager only), left arcs per label, right arcs per
/// label.
fn build_classes(system: TransitionSystem, labels: &[String]) -> Vec<Transition> {
    let mut classes = vec![Transition::Shift];
    if system == TransitionSystem::ArcEager {
        classes.push(Transition::Reduce);
    }
    for l in labels {
        classes.push(Transition::LeftArc(l.clone()));
    }
    for l in labels {
        classes.push(Transition::RightArc(l.clone()));
    }
    classes
}

/// Greedy decode of one sentence with explicit model parts; shared by
/// training-time dev evaluation and [`ParserModel::parse`].
fn decode_sentence(
    model: &LinearModel,
    interner: &Interner,
    templates: &[FeatureTemplate],
    system: TransitionSystem,
    class_transitions: &[Transition],
    class_kinds: &[TransitionKind],
    sentence: &Sentence,
) -> Result<(Vec<usize>, Vec<String>)> {
    let mut config = Configuration::new(sentence.len());
    let mut steps = 0usize;
    let limit = 4 * sentence.len() + 4;
    while !config.is_terminal(system) {
        let features = extract_frozen(&config, sentence, templates, interner);
        let pick = model
            .argmax(&features, |k| config.kind_legal(system, class_kinds[k]))
            .ok_or_else(|| Error::internal("no legal transition in a non-terminal state"))?;
        config.apply(system, &class_transitions[pick])?;
        steps += 1;
        if steps > limit {
            return Err(Error::internal("decoder exceeded its step budget"));
        }
    }
    Ok(extract_tree(&config))
}

/// Counts labeled and unlabeled matches of a decode against the gold
/// sentence.
fn count_matches(gold: &Sentence, heads: &[usize], labels: &[String]) -> (usize, usize) {
    let mut unlabeled = 0usize;
    let mut labeled = 0usize;
    for (i, t) in gold.tokens.iter().enumerate() {
        if heads[i] == t.head {
            unlabeled += 1;
            if labels[i] == t.deprel {
                labeled += 1;
            }
        }
    }
    (unlabeled, labeled)
}

/// Trains a parser. The training treebank provides the label and feature
/// inventories; the development treebank only selects the epoch.
pub fn train_parser(
    train: &Treebank,
    dev: &Treebank,
    params: &TrainParams,
) -> Result<ParserModel> {
    if train.is_empty() {
        return Err(Error::data("training treebank is empty"));
    }
    if dev.is_empty() {
        return Err(Error::data("development treebank is empty"));
    }
    if params.epochs == 0 {
        return Err(Error::data("epochs must be at least 1"));
    }
    if params.templates.is_empty() {
        return Err(Error::data("template set is empty"));
    }

    let (train, dev) = match &params.tag_config {
        Some(cfg) => (apply_tag_config(train, cfg)?, apply_tag_config(dev, cfg)?),
        None => (train.clone(), dev.clone()),
    };
    for (i, s) in train.sentences.iter().chain(dev.sentences.iter()).enumerate() {
        s.validate()
            .map_err(|e| Error::data(format!("sentence {}: {e}", i + 1)))?;
        if s.is_empty() {
            return Err(Error::data(format!("sentence {} is empty", i + 1)));
        }
    }

    let mut labels: Vec<String> = train
        .sentences
        .iter()
        .flat_map(|s| s.tokens.iter().map(|t| t.deprel.clone()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if !labels.iter().any(|l| l == "root") {
        // The decoder labels never-attached tokens "root", so the class
        // inventory must include it.
        labels.push("root".to_string());
        labels.sort();
    }

    let class_transitions = build_classes(params.system, &labels);
    let class_kinds: Vec<TransitionKind> =
        class_transitions.iter().map(Transition::kind).collect();
    let class_names: Vec<String> = class_transitions
        .iter()
        .map(Transition::signature)
        .collect();
    let class_index: std::collections::HashMap<String, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();

    // Oracle sequences over projectivized copies of the training data,
    // stored as class indices.
    let projective: Vec<Sentence> = train.sentences.iter().map(projectivize).collect();
    let mut oracle: Vec<Vec<usize>> = Vec::with_capacity(projective.len());
    for (i, s) in projective.iter().enumerate() {
        let seq = static_oracle(s, params.system)
            .map_err(|e| Error::data(format!("training sentence {}: {e}", i + 1)))?;
        oracle.push(
            seq.iter()
                .map(|t| class_index[&t.signature()])
                .collect(),
        );
    }

    let mut model = LinearModel::new(class_names)?;
    let mut interner = Interner::new();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..projective.len()).collect();

    let dev_tokens = dev.token_count();
    let mut best: Option<(usize, usize, LinearModel)> = None;
    let mut dev_las_by_epoch = Vec::with_capacity(params.epochs);

    for epoch in 1..=params.epochs {
        if params.shuffle {
            order.shuffle(&mut rng);
        }
        for &si in &order {
            let sentence = &projective[si];
            let mut config = Configuration::new(sentence.len());
            for &gold in &oracle[si] {
                let features = extract(&config, sentence, &params.templates, &mut interner);
                let predicted = model
                    .argmax(&features, |k| config.kind_legal(params.system, class_kinds[k]))
                    .ok_or_else(|| {
                        Error::internal("no legal transition while replaying the oracle")
                    })?;
                if predicted == gold {
                    model.tick()?;
                } else {
                    model.update(&features, gold, predicted)?;
                }
                config.apply(params.system, &class_transitions[gold])?;
            }
        }

        let snapshot = model.averaged();
        let mut correct = 0usize;
        for s in &dev.sentences {
            let (heads, labels) = decode_sentence(
                &snapshot,
                &interner,
                &params.templates,
                params.system,
                &class_transitions,
                &class_kinds,
                s,
            )?;
            let (_, labeled) = count_matches(s, &heads, &labels);
            correct += labeled;
        }
        dev_las_by_epoch.push(100.0 * correct as f64 / dev_tokens as f64);
        let better = match &best {
            Some((best_correct, _, _)) => correct > *best_correct,
            None => true,
        };
        if better {
            best = Some((correct, epoch, snapshot));
        }
    }

    let (dev_correct, chosen_epoch, frozen) = best.expect("epochs >= 1 guarantees a snapshot");
    let languages: Vec<String> = train
        .sentences
        .iter()
        .filter_map(|s| s.lang.clone())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();

    Ok(ParserModel {
        model: frozen,
        interner,
        system: params.system,
        templates: params.templates.clone(),
        labels,
        languages,
        tag_config: params.tag_config,
        metadata: TrainMetadata {
            seed: params.seed,
            epochs: params.epochs,
            chosen_epoch,
            dev_las_by_epoch,
            dev_correct,
            dev_tokens,
        },
    })
}

impl ParserModel {
    pub fn system(&self) -> TransitionSystem {
        self.system
    }

    pub fn templates(&self) -> &[FeatureTemplate] {
        &self.templates
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Language codes seen during training, sorted.
    pub fn languages(&self) -> &[String] {
        &self.languages
    }

    pub fn tag_config(&self) -> Option<TagConfig> {
        self.tag_config
    }

    pub fn metadata(&self) -> &TrainMetadata {
        &self.metadata
    }

    /// Parses one sentence, returning a copy with predicted heads and
    /// labels. The input must carry tags consistent with the model's tag
    /// configuration; its head and label columns are ignored.
    pub fn parse(&self, sentence: &Sentence) -> Result<Sentence> {
        if sentence.is_empty() {
            return Err(Error::data("cannot parse an empty sentence"));
        }
        let class_transitions = build_classes(self.system, &self.labels);
        let class_kinds: Vec<TransitionKind> =
            class_transitions.iter().map(Transition::kind).collect();
        self.parse_with(sentence, &class_transitions, &class_kinds)
    }

    fn parse_with(
        &self,
        sentence: &Sentence,
        class_transitions: &[Transition],
        class_kinds: &[TransitionKind],
    ) -> Result<Sentence> {
        let (heads, labels) = decode_sentence(
            &self.model,
            &self.interner,
            &self.templates,
            self.system,
            class_transitions,
            class_kinds,
            sentence,
        )?;
        let mut out = sentence.clone();
        for (i, t) in out.tokens.iter_mut().enumerate() {
            t.head = heads[i];
            t.deprel = labels[i].clone();
        }
        Ok(out)
    }

    /// Parses every sentence of a treebank.
    pub fn parse_treebank(&self, treebank: &Treebank) -> Result<Treebank> {
        let class_transitions = build_classes(self.system, &self.labels);
        let class_kinds: Vec<TransitionKind> =
            class_transitions.iter().map(Transition::kind).collect();
        let mut sentences = Vec::with_capacity(treebank.len());
        for (i, s) in treebank.sentences.iter().enumerate() {
            if s.is_empty() {
                return Err(Error::data(format!("sentence {} is empty", i + 1)));
            }
            let parsed = self
                .parse_with(s, &class_transitions, &class_kinds)
                .map_err(|e| Error::data(format!("sentence {}: {e}", i + 1)))?;
            sentences.push(parsed);
        }
        Ok(Treebank::new(sentences, treebank.source.clone()))
    }

    /// Serializes the model to versioned flat text.
    pub fn save(&self) -> Result<String> {
        let mut meta: Vec<(String, String)> = vec![
            ("kind".into(), "parser".into()),
            ("system".into(), self.system.name().into()),
        ];
        match self.tag_config {
            Some(cfg) => {
                meta.push(("tag-mode".into(), cfg.mode.name().into()));
                meta.push(("prefix-language".into(), cfg.prefix_language.to_string()));
            }
            None => meta.push(("tag-mode".into(), "as-is".into())),
        }
        for l in &self.languages {
            meta.push(("language".into(), l.clone()));
        }
        for l in &self.labels {
            meta.push(("label".into(), l.clone()));
        }
        for t in &self.templates {
            meta.push(("template".into(), t.name()));
        }
        meta.push(("seed".into(), self.metadata.seed.to_string()));
        meta.push(("epochs".into(), self.metadata.epochs.to_string()));
        meta.push(("chosen-epoch".into(), self.metadata.chosen_epoch.to_string()));
        meta.push((
            "dev-las-by-epoch".into(),
            self.metadata
                .dev_las_by_epoch
                .iter()
                .map(|v| format!("{v:.4}"))
                .collect::<Vec<_>>()
                .join(" "),
        ));
        meta.push(("dev-correct".into(), self.metadata.dev_correct.to_string()));
        meta.push(("dev-tokens".into(), self.metadata.dev_tokens.to_string()));
        self.model.save(&self.interner, &meta)
    }

    /// Restores a model saved with [`ParserModel::save`].
    pub fn load(text: &str) -> Result<ParserModel> {
        let (model, interner, meta) = LinearModel::load(text)?;
        let get = |key: &str| -> Result<&str> {
            meta.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::model(format!("missing metadata key '{key}'")))
        };
        let all = |key: &str| -> Vec<String> {
            meta.iter()
                .filter(|(k, _)| k == key)
                .map(|(_, v)| v.clone())
                .collect()
        };

        let kind = get("kind")?;
        if kind != "parser" {
            return Err(Error::model(format!(
                "expected a parser model, found kind '{kind}'"
            )));
        }
        let system_name = get("system")?;
        let system = TransitionSystem::parse(system_name)
            .ok_or_else(|| Error::model(format!("unknown system '{system_name}'")))?;
        let tag_config = match get("tag-mode")? {
            "as-is" => None,
            mode => {
                let mode = TagMode::parse(mode)
                    .ok_or_else(|| Error::model(format!("unknown tag mode '{mode}'")))?;
                let prefix = get("prefix-language")? == "true";
                Some(TagConfig {
                    mode,
                    prefix_language: prefix,
                })
            }
        };
        let labels = all("label");
        if labels.is_empty() {
            return Err(Error::model("model stores no dependency labels"));
        }
        let templates = parse_template_set(&format_template_set(
            &all("template")
                .iter()
                .map(|t| FeatureTemplate::parse(t))
                .collect::<Result<Vec<_>>>()?,
        ))?;

        let metadata = TrainMetadata {
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::model("bad seed in metadata"))?,
            epochs: get("epochs")?
                .parse()
                .map_err(|_| Error::model("bad epochs in metadata"))?,
            chosen_epoch: get("chosen-epoch")?
                .parse()
                .map_err(|_| Error::model("bad chosen-epoch in metadata"))?,
            dev_las_by_epoch: get("dev-las-by-epoch")?
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::model("bad dev-las-by-epoch in metadata"))?,
            dev_correct: get("dev-correct")?
                .parse()
                .map_err(|_| Error::model("bad dev-correct in metadata"))?,
            dev_tokens: get("dev-tokens")?
                .parse()
                .map_err(|_| Error::model("bad dev-tokens in metadata"))?,
        };

        // Classes must be exactly the inventory implied by system and
        // labels; anything else means the file was edited.
        let expected: Vec<String> = build_classes(system, &labels)
            .iter()
            .map(Transition::signature)
            .collect();
        if model.classes() != expected.as_slice() {
            return Err(Error::model(
                "class inventory does not match the stored system and labels",
            ));
        }

        Ok(ParserModel {
            model,
            interner,
            system,
            templates,
            labels,
            languages: all("language"),
            tag_config,
            metadata,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, toy_language_a};

    fn small_setup() -> (Treebank, Treebank, Treebank) {
        let lang = toy_language_a();
        let train = generate(&lang, 120, 11);
        let dev = generate(&lang, 30, 12);
        let test = generate(&lang, 30, 13);
        (train, dev, test)
    }

    fn las(gold: &Treebank, pred: &Treebank) -> f64 {
        let mut correct = 0usize;
        let mut total = 0usize;
        for (g, p) in gold.sentences.iter().zip(&pred.sentences) {
            let (_, labeled) = count_matches(g, &p.heads(), &p.tokens.iter().map(|t| t.deprel.clone()).collect::<Vec<_>>());
            correct += labeled;
            total += g.len();
        }
        100.0 * correct as f64 / total as f64
    }

    #[test]
    fn learns_a_deterministic_toy_language() {
        let (train, dev, test) = small_setup();
        for system in [TransitionSystem::ArcEager, TransitionSystem::ArcStandard] {
            let params = TrainParams {
                epochs: 8,
                seed: 7,
                ..TrainParams::default().with_system(system)
            };
            let model = train_parser(&train, &dev, &params).unwrap();
            let parsed = model.parse_treebank(&test).unwrap();
            let score = las(&test, &parsed);
            assert!(
                score > 99.0,
                "{} should master the toy language, got {score}",
                system.name()
            );
        }
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let (train, dev, _) = small_setup();
        let params = TrainParams {
            epochs: 3,
            seed: 42,
            ..TrainParams::default()
        };
        let a = train_parser(&train, &dev, &params).unwrap().save().unwrap();
        let b = train_parser(&train, &dev, &params).unwrap().save().unwrap();
        assert_eq!(a, b);
        let other = TrainParams {
            epochs: 3,
            seed: 43,
            ..TrainParams::default()
        };
        let c = train_parser(&train, &dev, &other).unwrap().save().unwrap();
        assert_ne!(a, c, "different seeds should shuffle differently");
    }

    #[test]
    fn save_load_round_trip_parses_identically() {
        let (train, dev, test) = small_setup();
        let params = TrainParams {
            epochs: 4,
            seed: 5,
            ..TrainParams::default()
        };
        let model = train_parser(&train, &dev, &params).unwrap();
        let text = model.save().unwrap();
        let loaded = ParserModel::load(&text).unwrap();

        assert_eq!(loaded.system(), model.system());
        assert_eq!(loaded.labels(), model.labels());
        assert_eq!(loaded.templates(), model.templates());
        assert_eq!(loaded.metadata(), model.metadata());
        assert_eq!(loaded.languages(), model.languages());

        let a = model.parse_treebank(&test).unwrap();
        let b = loaded.parse_treebank(&test).unwrap();
        assert_eq!(a, b);

        // And the reload serializes back to the same bytes.
        assert_eq!(loaded.save().unwrap(), text);
    }

    #[test]
    fn rejects_degenerate_inputs() {
        let (train, dev, _) = small_setup();
        let empty = Treebank::default();
        assert!(train_parser(&empty, &dev, &TrainParams::default()).is_err());
        assert!(train_parser(&train, &empty, &TrainParams::default()).is_err());
        let params = TrainParams {
            epochs: 0,
            ..TrainParams::default()
        };
        assert!(train_parser(&train, &dev, &params).is_err());
    }

    #[test]
    fn non_projective_training_data_is_projectivized() {
        use crate::conll::{Sentence, Token};
        // One non-projective sentence plus filler; training must succeed.
        let npx = Sentence::new(
            vec![
                Token::new(1, "a", "X", "x", 3, "d1"),
                Token::new(2, "b", "X", "x", 4, "d2"),
                Token::new(3, "c", "X", "x", 0, "root"),
                Token::new(4, "d", "X", "x", 3, "d4"),
            ],
            None,
        );
        let filler = Sentence::new(
            vec![
                Token::new(1, "e", "X", "x", 2, "d1"),
                Token::new(2, "f", "X", "x", 0, "root"),
            ],
            None,
        );
        let train = Treebank::new(vec![npx, filler.clone()], "np");
        let dev = Treebank::new(vec![filler], "np");
        let params = TrainParams {
            epochs: 2,
            ..TrainParams::default()
        };
        let model = train_parser(&train, &dev, &params).unwrap();
        // Decoding still produces trees.
        let parsed = model.parse_treebank(&train).unwrap();
        for s in &parsed.sentences {
            s.validate().unwrap();
        }
    }

    #[test]
    fn model_records_tag_config_and_languages() {
        let (train, dev, _) = small_setup();
        let params = TrainParams {
            epochs: 2,
            tag_config: Some(TagConfig::universal().with_prefixing()),
            ..TrainParams::default()
        };
        let model = train_parser(&train, &dev, &params).unwrap();
        assert_eq!(model.languages(), &["xa".to_string()]);
        let cfg = model.tag_config().unwrap();
        assert_eq!(cfg.mode, TagMode::UniversalOnly);
        assert!(cfg.prefix_language);
        let text = model.save().unwrap();
        let loaded = ParserModel::load(&text).unwrap();
        assert_eq!(loaded.tag_config(), model.tag_config());
    }

    #[test]
    fn load_rejects_wrong_kind() {
        let err = ParserModel::load("treelace-model v1\nmeta\tkind\ttagger\nclasses\ta\nweights\t0\nend\n")
            .unwrap_err();
        assert!(err.to_string().contains("parser"), "{err}");
    }
}
