//! An averaged-perceptron part-of-speech tagger, and the tag-then-parse
//! pipeline used for text with no gold tags (code-switched input in
//! particular).
//!
//! The tagger is greedy left-to-right over per-token features: the form,
//! its lowercase, prefixes and suffixes of length one to three, the two
//! previously predicted tags, the neighbouring forms, and digit/hyphen
//! flags. Training uses the same epoch-snapshot selection as the parser,
//! picking the epoch with the best development accuracy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conll::{Sentence, Treebank};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, Interner};
use crate::learner::LinearModel;
use crate::parser::ParserModel;
use crate::treebank::apply_tag_config;

/// Which tag column the tagger learns and predicts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagColumn {
    Cpostag,
    Postag,
}

impl TagColumn {
    pub fn name(&self) -> &'static str {
        match self {
            TagColumn::Cpostag => "cpostag",
            TagColumn::Postag => "postag",
        }
    }

    pub fn parse(text: &str) -> Option<TagColumn> {
        match text {
            "cpostag" => Some(TagColumn::Cpostag),
            "postag" => Some(TagColumn::Postag),
            _ => None,
        }
    }

    fn of<'a>(&self, sentence: &'a Sentence, i: usize) -> &'a str {
        let t = &sentence.tokens[i];
        match self {
            TagColumn::Cpostag => &t.cpostag,
            TagColumn::Postag => &t.postag,
        }
    }
}

/// Hyperparameters for [`train_tagger`].
#[derive(Debug, Clone)]
pub struct TaggerParams {
    pub epochs: usize,
    pub seed: u64,
    pub shuffle: bool,
}

impl Default for TaggerParams {
    fn default() -> Self {
        TaggerParams {
            epochs: 15,
            seed: 1,
            shuffle: true,
        }
    }
}

/// Provenance of a trained tagger.
#[derive(Debug, Clone, PartialEq)]
pub struct TaggerMetadata {
    pub seed: u64,
    pub epochs: usize,
    pub chosen_epoch: usize,
    /// Development accuracy after each epoch, in percent.
    pub dev_accuracy_by_epoch: Vec<f64>,
    pub dev_correct: usize,
    pub dev_tokens: usize,
}

/// A trained, frozen tagging model.
#[derive(Debug, Clone)]
pub struct TaggerModel {
    model: LinearModel,
    interner: Interner,
    column: TagColumn,
    metadata: TaggerMetadata,
}

const START_TAG: &str = "<s>";
const START_TAG2: &str = "<s2>";
const START_WORD: &str = "<s>";
const END_WORD: &str = "</s>";

fn take_chars(word: &str, k: usize, from_end: bool) -> String {
    let chars: Vec<char> = word.chars().collect();
    let k = k.min(chars.len());
    if from_end {
        chars[chars.len() - k..].iter().collect()
    } else {
        chars[..k].iter().collect()
    }
}

/// The features describing position `i`, given the two previously
/// predicted tags.
fn token_features(forms: &[String], i: usize, prev: &str, prev2: &str) -> Vec<String> {
    let w = &forms[i];
    let mut out = Vec::with_capacity(14);
    out.push(format!("form={w}"));
    out.push(format!("lower={}", w.to_lowercase()));
    for k in 1..=3 {
        out.push(format!("pre{k}={}", take_chars(w, k, false)));
    }
    for k in 1..=3 {
        out.push(format!("suf{k}={}", take_chars(w, k, true)));
    }
    out.push(format!("ptag={prev}"));
    out.push(format!("pptag={prev2}"));
    out.push(format!(
        "pword={}",
        if i == 0 { START_WORD } else { &forms[i - 1] }
    ));
    out.push(format!(
        "nword={}",
        forms.get(i + 1).map(String::as_str).unwrap_or(END_WORD)
    ));
    out.push(format!("digit={}", w.chars().any(|c| c.is_ascii_digit())));
    out.push(format!("hyphen={}", w.contains('-')));
    out
}

fn forms_of(sentence: &Sentence) -> Vec<String> {
    sentence.tokens.iter().map(|t| t.form.clone()).collect()
}

fn greedy_tag(
    model: &LinearModel,
    interner: &Interner,
    forms: &[String],
) -> Vec<String> {
    let mut prev = START_TAG.to_string();
    let mut prev2 = START_TAG2.to_string();
    let mut out = Vec::with_capacity(forms.len());
    for i in 0..forms.len() {
        let ids: Vec<u32> = token_features(forms, i, &prev, &prev2)
            .iter()
            .filter_map(|f| interner.get(f))
            .collect();
        let fv = FeatureVector::from_ids(ids);
        let k = model
            .argmax(&fv, |_| true)
            .expect("taggers always have at least one class");
        let tag = model.classes()[k].clone();
        prev2 = std::mem::replace(&mut prev, tag.clone());
        out.push(tag);
    }
    out
}

/// Trains a tagger on the given column. The development treebank selects
/// the epoch, exactly as in parser training.
pub fn train_tagger(
    train: &Treebank,
    dev: &Treebank,
    column: TagColumn,
    params: &TaggerParams,
) -> Result<TaggerModel> {
    if train.is_empty() {
        return Err(Error::data("training treebank is empty"));
    }
    if dev.is_empty() {
        return Err(Error::data("development treebank is empty"));
    }
    if params.epochs == 0 {
        return Err(Error::data("epochs must be at least 1"));
    }
    for (i, s) in train.sentences.iter().chain(dev.sentences.iter()).enumerate() {
        if s.is_empty() {
            return Err(Error::data(format!("sentence {} is empty", i + 1)));
        }
    }

    let classes: Vec<String> = train
        .sentences
        .iter()
        .flat_map(|s| (0..s.len()).map(|i| column.of(s, i).to_string()))
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    if classes.iter().any(String::is_empty) {
        return Err(Error::data(format!(
            "training data has tokens with an empty {} value",
            column.name()
        )));
    }
    let class_index: std::collections::HashMap<String, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.clone(), i))
        .collect();

    let mut model = LinearModel::new(classes)?;
    let mut interner = Interner::new();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();

    let dev_tokens = dev.token_count();
    let mut best: Option<(usize, usize, LinearModel)> = None;
    let mut dev_accuracy_by_epoch = Vec::with_capacity(params.epochs);

    for epoch in 1..=params.epochs {
        if params.shuffle {
            order.shuffle(&mut rng);
        }
        for &si in &order {
            let sentence = &train.sentences[si];
            let forms = forms_of(sentence);
            let mut prev = START_TAG.to_string();
            let mut prev2 = START_TAG2.to_string();
            for i in 0..forms.len() {
                let ids: Vec<u32> = token_features(&forms, i, &prev, &prev2)
                    .iter()
                    .map(|f| interner.intern(f))
                    .collect();
                let fv = FeatureVector::from_ids(ids);
                let predicted = model.argmax(&fv, |_| true).expect("classes are non-empty");
                let gold = class_index[column.of(sentence, i)];
                if predicted == gold {
                    model.tick()?;
                } else {
                    model.update(&fv, gold, predicted)?;
                }
                // Greedy training conditions on the model's own history,
                // matching what it will see at tagging time.
                let tag = model.classes()[predicted].clone();
                prev2 = std::mem::replace(&mut prev, tag);
            }
        }

        let snapshot = model.averaged();
        let mut correct = 0usize;
        for s in &dev.sentences {
            let tags = greedy_tag(&snapshot, &interner, &forms_of(s));
            correct += tags
                .iter()
                .enumerate()
                .filter(|(i, tag)| tag.as_str() == column.of(s, *i))
                .count();
        }
        dev_accuracy_by_epoch.push(100.0 * correct as f64 / dev_tokens as f64);
        let better = match &best {
            Some((best_correct, _, _)) => correct > *best_correct,
            None => true,
        };
        if better {
            best = Some((correct, epoch, snapshot));
        }
    }

    let (dev_correct, chosen_epoch, frozen) = best.expect("epochs >= 1 guarantees a snapshot");
    Ok(TaggerModel {
        model: frozen,
        interner,
        column,
        metadata: TaggerMetadata {
            seed: params.seed,
            epochs: params.epochs,
            chosen_epoch,
            dev_accuracy_by_epoch,
            dev_correct,
            dev_tokens,
        },
    })
}

impl TaggerModel {
    pub fn column(&self) -> TagColumn {
        self.column
    }

    pub fn tagset(&self) -> &[String] {
        self.model.classes()
    }

    pub fn metadata(&self) -> &TaggerMetadata {
        &self.metadata
    }

    /// Tags a tokenized sentence.
    pub fn tag(&self, forms: &[String]) -> Result<Vec<String>> {
        if forms.is_empty() {
            return Err(Error::data("cannot tag an empty sentence"));
        }
        Ok(greedy_tag(&self.model, &self.interner, forms))
    }

    /// Returns a copy of the treebank with both tag columns replaced by
    /// this tagger's predictions.
    pub fn retag(&self, treebank: &Treebank) -> Result<Treebank> {
        let mut out = treebank.clone();
        for (i, s) in out.sentences.iter_mut().enumerate() {
            if s.is_empty() {
                return Err(Error::data(format!("sentence {} is empty", i + 1)));
            }
            let tags = self.tag(&forms_of(s))?;
            for (t, tag) in s.tokens.iter_mut().zip(tags) {
                t.cpostag = tag.clone();
                t.postag = tag;
            }
        }
        Ok(out)
    }

    /// Serializes the tagger to versioned flat text.
    pub fn save(&self) -> Result<String> {
        let meta: Vec<(String, String)> = vec![
            ("kind".into(), "tagger".into()),
            ("column".into(), self.column.name().into()),
            ("seed".into(), self.metadata.seed.to_string()),
            ("epochs".into(), self.metadata.epochs.to_string()),
            ("chosen-epoch".into(), self.metadata.chosen_epoch.to_string()),
            (
                "dev-accuracy-by-epoch".into(),
                self.metadata
                    .dev_accuracy_by_epoch
                    .iter()
                    .map(|v| format!("{v:.4}"))
                    .collect::<Vec<_>>()
                    .join(" "),
            ),
            ("dev-correct".into(), self.metadata.dev_correct.to_string()),
            ("dev-tokens".into(), self.metadata.dev_tokens.to_string()),
        ];
        self.model.save(&self.interner, &meta)
    }

    /// Restores a tagger saved with [`TaggerModel::save`].
    pub fn load(text: &str) -> Result<TaggerModel> {
        let (model, interner, meta) = LinearModel::load(text)?;
        let get = |key: &str| -> Result<&str> {
            meta.iter()
                .find(|(k, _)| k == key)
                .map(|(_, v)| v.as_str())
                .ok_or_else(|| Error::model(format!("missing metadata key '{key}'")))
        };
        let kind = get("kind")?;
        if kind != "tagger" {
            return Err(Error::model(format!(
                "expected a tagger model, found kind '{kind}'"
            )));
        }
        let column_name = get("column")?;
        let column = TagColumn::parse(column_name)
            .ok_or_else(|| Error::model(format!("unknown tag column '{column_name}'")))?;
        let metadata = TaggerMetadata {
            seed: get("seed")?
                .parse()
                .map_err(|_| Error::model("bad seed in metadata"))?,
            epochs: get("epochs")?
                .parse()
                .map_err(|_| Error::model("bad epochs in metadata"))?,
            chosen_epoch: get("chosen-epoch")?
                .parse()
                .map_err(|_| Error::model("bad chosen-epoch in metadata"))?,
            dev_accuracy_by_epoch: get("dev-accuracy-by-epoch")?
                .split_whitespace()
                .map(|v| v.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|_| Error::model("bad dev-accuracy-by-epoch in metadata"))?,
            dev_correct: get("dev-correct")?
                .parse()
                .map_err(|_| Error::model("bad dev-correct in metadata"))?,
            dev_tokens: get("dev-tokens")?
                .parse()
                .map_err(|_| Error::model("bad dev-tokens in metadata"))?,
        };
        Ok(TaggerModel {
            model,
            interner,
            column,
            metadata,
        })
    }
}

/// Accuracy of predicted tag sequences against a gold treebank, in
/// percent. `tags[i][j]` is the prediction for token `j` of sentence `i`.
pub fn tagging_accuracy(
    gold: &Treebank,
    tags: &[Vec<String>],
    column: TagColumn,
) -> Result<f64> {
    if gold.len() != tags.len() {
        return Err(Error::data(format!(
            "sentence count mismatch: gold has {}, predictions have {}",
            gold.len(),
            tags.len()
        )));
    }
    let mut correct = 0usize;
    let mut total = 0usize;
    for (i, (s, predicted)) in gold.sentences.iter().zip(tags).enumerate() {
        if s.len() != predicted.len() {
            return Err(Error::data(format!(
                "sentence {}: token count mismatch (gold {}, predicted {})",
                i + 1,
                s.len(),
                predicted.len()
            )));
        }
        for (j, tag) in predicted.iter().enumerate() {
            total += 1;
            if tag == column.of(s, j) {
                correct += 1;
            }
        }
    }
    if total == 0 {
        return Err(Error::data("no tokens to score"));
    }
    Ok(100.0 * correct as f64 / total as f64)
}

/// The full pipeline for raw or code-switched text: retag the input with
/// the tagger, apply the parser's tag configuration, and parse.
///
/// `lang` is attached to every sentence before the parser's tag
/// configuration runs; it is required when that configuration prefixes
/// tags with a language code. The result carries the predicted tags
/// (without any internal transformation) and the predicted tree.
pub fn tag_and_parse(
    tagger: &TaggerModel,
    parser: &ParserModel,
    treebank: &Treebank,
    lang: Option<&str>,
) -> Result<Treebank> {
    let mut retagged = tagger.retag(treebank)?;
    if let Some(l) = lang {
        for s in retagged.sentences.iter_mut() {
            s.lang = Some(l.to_string());
        }
    }
    let configured = match parser.tag_config() {
        Some(cfg) => apply_tag_config(&retagged, &cfg)?,
        None => retagged.clone(),
    };
    let parsed = parser.parse_treebank(&configured)?;
    for (out, tree) in retagged.sentences.iter_mut().zip(&parsed.sentences) {
        for (token, parsed_token) in out.tokens.iter_mut().zip(&tree.tokens) {
            token.head = parsed_token.head;
            token.deprel = parsed_token.deprel.clone();
        }
    }
    Ok(retagged)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, generate_code_switched, toy_language_a, toy_language_b};
    use crate::treebank::merge_treebanks;

    fn predictions(model: &TaggerModel, tb: &Treebank) -> Vec<Vec<String>> {
        tb.sentences
            .iter()
            .map(|s| model.tag(&forms_of(s)).unwrap())
            .collect()
    }

    #[test]
    fn learns_toy_tags_perfectly() {
        let lang = toy_language_a();
        let train = generate(&lang, 150, 21);
        let dev = generate(&lang, 40, 22);
        let test = generate(&lang, 40, 23);
        for column in [TagColumn::Cpostag, TagColumn::Postag] {
            let params = TaggerParams {
                epochs: 8,
                seed: 3,
                ..TaggerParams::default()
            };
            let model = train_tagger(&train, &dev, column, &params).unwrap();
            let acc = tagging_accuracy(&test, &predictions(&model, &test), column).unwrap();
            assert!(acc > 99.0, "column {} reached only {acc}", column.name());
        }
    }

    #[test]
    fn monolingual_tagger_fails_across_languages() {
        let a = toy_language_a();
        let b = toy_language_b();
        let train_a = generate(&a, 150, 31);
        let dev_a = generate(&a, 40, 32);
        let test_b = generate(&b, 60, 33);
        let params = TaggerParams {
            epochs: 8,
            seed: 3,
            ..TaggerParams::default()
        };
        let mono = train_tagger(&train_a, &dev_a, TagColumn::Cpostag, &params).unwrap();
        let acc_mono =
            tagging_accuracy(&test_b, &predictions(&mono, &test_b), TagColumn::Cpostag).unwrap();
        assert!(
            acc_mono < 70.0,
            "the suffix trap should break cross-language tagging, got {acc_mono}"
        );

        let merged_train = merge_treebanks(vec![
            ("xa".into(), generate(&a, 150, 31)),
            ("xb".into(), generate(&b, 150, 34)),
        ])
        .unwrap();
        let merged_dev = merge_treebanks(vec![
            ("xa".into(), generate(&a, 40, 32)),
            ("xb".into(), generate(&b, 40, 35)),
        ])
        .unwrap();
        let bi = train_tagger(&merged_train, &merged_dev, TagColumn::Cpostag, &params).unwrap();
        let acc_bi =
            tagging_accuracy(&test_b, &predictions(&bi, &test_b), TagColumn::Cpostag).unwrap();
        assert!(acc_bi > 95.0, "bilingual tagger should recover, got {acc_bi}");
    }

    #[test]
    fn save_load_round_trip_tags_identically() {
        let lang = toy_language_a();
        let train = generate(&lang, 100, 41);
        let dev = generate(&lang, 30, 42);
        let params = TaggerParams {
            epochs: 4,
            seed: 9,
            ..TaggerParams::default()
        };
        let model = train_tagger(&train, &dev, TagColumn::Postag, &params).unwrap();
        let text = model.save().unwrap();
        let loaded = TaggerModel::load(&text).unwrap();
        assert_eq!(loaded.column(), model.column());
        assert_eq!(loaded.metadata(), model.metadata());
        let test = generate(&lang, 30, 43);
        assert_eq!(predictions(&loaded, &test), predictions(&model, &test));
        assert_eq!(loaded.save().unwrap(), text);
    }

    #[test]
    fn training_is_deterministic_in_the_seed() {
        let lang = toy_language_b();
        let train = generate(&lang, 80, 51);
        let dev = generate(&lang, 20, 52);
        let params = TaggerParams {
            epochs: 3,
            seed: 11,
            ..TaggerParams::default()
        };
        let a = train_tagger(&train, &dev, TagColumn::Cpostag, &params)
            .unwrap()
            .save()
            .unwrap();
        let b = train_tagger(&train, &dev, TagColumn::Cpostag, &params)
            .unwrap()
            .save()
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn accuracy_validates_alignment() {
        let lang = toy_language_a();
        let tb = generate(&lang, 3, 61);
        assert!(tagging_accuracy(&tb, &[], TagColumn::Postag).is_err());
        let mut short: Vec<Vec<String>> = tb
            .sentences
            .iter()
            .map(|s| vec!["X".to_string(); s.len()])
            .collect();
        short[0].pop();
        assert!(tagging_accuracy(&tb, &short, TagColumn::Postag).is_err());
    }

    #[test]
    fn retag_overwrites_both_columns() {
        let lang = toy_language_a();
        let train = generate(&lang, 100, 71);
        let dev = generate(&lang, 30, 72);
        let model = train_tagger(
            &train,
            &dev,
            TagColumn::Cpostag,
            &TaggerParams {
                epochs: 5,
                ..TaggerParams::default()
            },
        )
        .unwrap();
        let test = generate(&lang, 10, 73);
        let retagged = model.retag(&test).unwrap();
        for s in &retagged.sentences {
            for t in &s.tokens {
                assert_eq!(t.cpostag, t.postag);
                assert!(model.tagset().contains(&t.cpostag));
            }
        }
    }

    #[test]
    fn code_switched_pipeline_beats_monolingual() {
        let a = toy_language_a();
        let b = toy_language_b();
        let train_a = generate(&a, 150, 81);
        let dev_a = generate(&a, 40, 82);
        let merged_train = merge_treebanks(vec![
            ("xa".into(), generate(&a, 150, 81)),
            ("xb".into(), generate(&b, 150, 83)),
        ])
        .unwrap();
        let merged_dev = merge_treebanks(vec![
            ("xa".into(), generate(&a, 40, 82)),
            ("xb".into(), generate(&b, 40, 84)),
        ])
        .unwrap();
        let cs_test = generate_code_switched(&a, &b, 80, 85);

        let tparams = TaggerParams {
            epochs: 8,
            seed: 3,
            ..TaggerParams::default()
        };
        let pparams = crate::parser::TrainParams {
            epochs: 8,
            seed: 3,
            tag_config: Some(crate::treebank::TagConfig::universal()),
            ..crate::parser::TrainParams::default()
        };

        let mono_tagger = train_tagger(&train_a, &dev_a, TagColumn::Cpostag, &tparams).unwrap();
        let mono_parser = crate::parser::train_parser(&train_a, &dev_a, &pparams).unwrap();
        let bi_tagger =
            train_tagger(&merged_train, &merged_dev, TagColumn::Cpostag, &tparams).unwrap();
        let bi_parser =
            crate::parser::train_parser(&merged_train, &merged_dev, &pparams).unwrap();

        let mono_out = tag_and_parse(&mono_tagger, &mono_parser, &cs_test, None).unwrap();
        let bi_out = tag_and_parse(&bi_tagger, &bi_parser, &cs_test, None).unwrap();

        let las = |pred: &Treebank| -> f64 {
            let mut correct = 0usize;
            let mut total = 0usize;
            for (g, p) in cs_test.sentences.iter().zip(&pred.sentences) {
                for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
                    total += 1;
                    if gt.head == pt.head && gt.deprel == pt.deprel {
                        correct += 1;
                    }
                }
            }
            100.0 * correct as f64 / total as f64
        };
        let mono_las = las(&mono_out);
        let bi_las = las(&bi_out);
        assert!(
            bi_las >= mono_las + 10.0,
            "bilingual pipeline should win clearly: mono {mono_las}, bilingual {bi_las}"
        );
        assert!(bi_las > 90.0, "bilingual pipeline should be strong: {bi_las}");
    }
}
