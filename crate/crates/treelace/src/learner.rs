//! A multiclass averaged perceptron over sparse binary features.
//!
//! Training keeps, per (feature, class) pair, the current weight and an
//! accumulator of tick-stamped deltas, so the averaged weights come out
//! in one pass: `avg = ((T + 1) * w - acc) / T` after `T` ticks. Every
//! training instance advances the tick, whether or not it caused an
//! update. Averaged weights are rounded to six decimals, which makes the
//! text serialization below exact: a saved and reloaded model scores
//! identically.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::features::{FeatureVector, Interner};

const FORMAT_HEADER: &str = "treelace-model v1";

#[derive(Debug, Clone)]
struct Cell {
    class: u32,
    weight: f64,
    acc: f64,
}

/// A linear multiclass model: weights per (feature id, class index).
#[derive(Debug, Clone)]
pub struct LinearModel {
    classes: Vec<String>,
    rows: HashMap<u32, Vec<Cell>>,
    ticks: u64,
    frozen: bool,
}

pub(crate) fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

impl LinearModel {
    /// Creates an empty trainable model over the given class inventory.
    pub fn new(classes: Vec<String>) -> Result<LinearModel> {
        if classes.is_empty() {
            return Err(Error::data("a model needs at least one class"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for c in &classes {
            if c.contains('\t') || c.contains('\n') {
                return Err(Error::data(format!("class name {c:?} contains a tab or newline")));
            }
            if !seen.insert(c.clone()) {
                return Err(Error::data(format!("duplicate class '{c}'")));
            }
        }
        Ok(LinearModel {
            classes,
            rows: HashMap::new(),
            ticks: 0,
            frozen: false,
        })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    /// Number of (feature, class) pairs with a stored weight.
    pub fn weight_count(&self) -> usize {
        self.rows.values().map(Vec::len).sum()
    }

    /// Scores every class for a feature vector.
    pub fn score(&self, features: &FeatureVector) -> Vec<f64> {
        let mut scores = vec![0.0; self.classes.len()];
        for id in features.ids() {
            if let Some(cells) = self.rows.get(id) {
                for cell in cells {
                    scores[cell.class as usize] += cell.weight;
                }
            }
        }
        scores
    }

    /// Returns the highest-scoring class among those `allowed`, breaking
    /// ties toward the lowest class index. `None` when nothing is allowed.
    pub fn argmax(
        &self,
        features: &FeatureVector,
        allowed: impl Fn(usize) -> bool,
    ) -> Option<usize> {
        let scores = self.score(features);
        let mut best: Option<usize> = None;
        for (k, &s) in scores.iter().enumerate() {
            if !allowed(k) {
                continue;
            }
            match best {
                Some(b) if scores[b] >= s => {}
                _ => best = Some(k),
            }
        }
        best
    }

    fn assert_trainable(&self) -> Result<()> {
        if self.frozen {
            return Err(Error::internal("cannot update an averaged model"));
        }
        Ok(())
    }

    /// Advances the tick without changing weights; call once per correctly
    /// predicted training instance.
    pub fn tick(&mut self) -> Result<()> {
        self.assert_trainable()?;
        self.ticks += 1;
        Ok(())
    }

    fn add_delta(&mut self, feature: u32, class: u32, delta: f64, t: f64) {
        let cells = self.rows.entry(feature).or_default();
        match cells.iter_mut().find(|c| c.class == class) {
            Some(cell) => {
                cell.weight += delta;
                cell.acc += t * delta;
            }
            None => cells.push(Cell {
                class,
                weight: delta,
                acc: t * delta,
            }),
        }
    }

    /// Perceptron update for a misclassified instance: the gold class
    /// gains each feature, the predicted class loses it. Advances the
    /// tick.
    pub fn update(&mut self, features: &FeatureVector, gold: usize, predicted: usize) -> Result<()> {
        self.assert_trainable()?;
        if gold >= self.classes.len() || predicted >= self.classes.len() {
            return Err(Error::internal(format!(
                "class index out of range (gold {gold}, predicted {predicted}, classes {})",
                self.classes.len()
            )));
        }
        self.ticks += 1;
        if gold == predicted {
            return Ok(());
        }
        let t = self.ticks as f64;
        for &f in features.ids() {
            self.add_delta(f, gold as u32, 1.0, t);
            self.add_delta(f, predicted as u32, -1.0, t);
        }
        Ok(())
    }

    /// Produces the averaged, frozen snapshot of the weights accumulated
    /// so far. The trainable model is left untouched, so training can
    /// continue afterwards.
    pub fn averaged(&self) -> LinearModel {
        let t = self.ticks as f64;
        let mut rows: HashMap<u32, Vec<Cell>> = HashMap::new();
        for (&feature, cells) in &self.rows {
            let mut averaged: Vec<Cell> = cells
                .iter()
                .map(|c| {
                    let w = if self.ticks == 0 {
                        c.weight
                    } else {
                        ((t + 1.0) * c.weight - c.acc) / t
                    };
                    Cell {
                        class: c.class,
                        weight: round6(w),
                        acc: 0.0,
                    }
                })
                .filter(|c| c.weight != 0.0)
                .collect();
            if !averaged.is_empty() {
                averaged.sort_by_key(|c| c.class);
                rows.insert(feature, averaged);
            }
        }
        LinearModel {
            classes: self.classes.clone(),
            rows,
            ticks: self.ticks,
            frozen: true,
        }
    }

    /// Serializes a frozen model to versioned flat text. `meta` key-value
    /// pairs are stored verbatim; keys and values must not contain tabs
    /// or newlines. Weight lines are sorted by feature string, then class,
    /// so equal models serialize identically.
    pub fn save(&self, interner: &Interner, meta: &[(String, String)]) -> Result<String> {
        if !self.frozen {
            return Err(Error::internal("average the model before saving"));
        }
        let mut out = String::from(FORMAT_HEADER);
        out.push('\n');
        for (k, v) in meta {
            if k.contains('\t') || k.contains('\n') || v.contains('\t') || v.contains('\n') {
                return Err(Error::data(format!("metadata entry '{k}' contains a tab or newline")));
            }
            out.push_str(&format!("meta\t{k}\t{v}\n"));
        }
        out.push_str("classes");
        for c in &self.classes {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');

        let mut lines: Vec<(String, &str, f64)> = Vec::with_capacity(self.weight_count());
        for (&feature, cells) in &self.rows {
            let text = interner.resolve(feature).ok_or_else(|| {
                Error::internal(format!("feature id {feature} missing from interner"))
            })?;
            for cell in cells {
                lines.push((
                    text.to_string(),
                    &self.classes[cell.class as usize],
                    cell.weight,
                ));
            }
        }
        lines.sort_by(|a, b| (a.0.as_str(), a.1).cmp(&(b.0.as_str(), b.1)));
        out.push_str(&format!("weights\t{}\n", lines.len()));
        for (feature, class, weight) in lines {
            out.push_str(&format!("{feature}\t{class}\t{weight:.6}\n"));
        }
        out.push_str("end\n");
        Ok(out)
    }

    /// Decodes a model saved by [`LinearModel::save`], returning the
    /// frozen model, an interner holding exactly its feature strings, and
    /// the stored metadata in file order.
    pub fn load(text: &str) -> Result<(LinearModel, Interner, Vec<(String, String)>)> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::model("empty model file"))?;
        if header != FORMAT_HEADER {
            return Err(Error::model(format!(
                "unsupported model header '{header}' (expected '{FORMAT_HEADER}')"
            )));
        }

        let mut meta = Vec::new();
        let mut classes: Option<Vec<String>> = None;
        let mut expected: Option<usize> = None;
        for (idx, line) in lines.by_ref() {
            if let Some(rest) = line.strip_prefix("meta\t") {
                let (k, v) = rest
                    .split_once('\t')
                    .ok_or_else(|| Error::model(format!("line {}: malformed meta line", idx + 1)))?;
                meta.push((k.to_string(), v.to_string()));
            } else if let Some(rest) = line.strip_prefix("classes\t") {
                classes = Some(rest.split('\t').map(str::to_string).collect());
            } else if let Some(rest) = line.strip_prefix("weights\t") {
                expected = Some(rest.parse().map_err(|_| {
                    Error::model(format!("line {}: bad weight count '{rest}'", idx + 1))
                })?);
                break;
            } else {
                return Err(Error::model(format!(
                    "line {}: unexpected line '{line}'",
                    idx + 1
                )));
            }
        }
        let classes = classes.ok_or_else(|| Error::model("missing classes line"))?;
        let expected = expected.ok_or_else(|| Error::model("missing weights line"))?;
        let mut model = LinearModel::new(classes)?;
        model.frozen = true;

        let class_index: HashMap<&str, u32> = model
            .classes
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i as u32))
            .collect();
        let mut interner = Interner::new();
        let mut count = 0usize;
        let mut finished = false;
        for (idx, line) in lines {
            if line == "end" {
                finished = true;
                if count != expected {
                    return Err(Error::model(format!(
                        "weight count mismatch: header said {expected}, found {count}"
                    )));
                }
                continue;
            }
            if finished {
                if line.trim().is_empty() {
                    continue;
                }
                return Err(Error::model(format!(
                    "line {}: content after end marker",
                    idx + 1
                )));
            }
            let mut parts = line.splitn(3, '\t');
            let (feature, class, weight) = match (parts.next(), parts.next(), parts.next()) {
                (Some(f), Some(c), Some(w)) => (f, c, w),
                _ => {
                    return Err(Error::model(format!(
                        "line {}: malformed weight line '{line}'",
                        idx + 1
                    )))
                }
            };
            let class = *class_index.get(class).ok_or_else(|| {
                Error::model(format!("line {}: unknown class '{class}'", idx + 1))
            })?;
            let weight: f64 = weight.parse().map_err(|_| {
                Error::model(format!("line {}: bad weight '{weight}'", idx + 1))
            })?;
            let id = interner.intern(feature);
            model.rows.entry(id).or_default().push(Cell {
                class,
                weight,
                acc: 0.0,
            });
            count += 1;
        }
        if !finished {
            return Err(Error::model("model file is truncated (missing end marker)"));
        }
        for cells in model.rows.values_mut() {
            cells.sort_by_key(|c| c.class);
        }
        Ok((model, interner, meta))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(ids: &[u32]) -> FeatureVector {
        FeatureVector::from_ids(ids.to_vec())
    }

    fn classes2() -> Vec<String> {
        vec!["a".to_string(), "b".to_string()]
    }

    #[test]
    fn rejects_empty_or_duplicate_classes() {
        assert!(LinearModel::new(vec![]).is_err());
        assert!(LinearModel::new(vec!["a".into(), "a".into()]).is_err());
    }

    #[test]
    fn update_moves_scores_toward_gold() {
        let mut m = LinearModel::new(classes2()).unwrap();
        let x = fv(&[0, 1]);
        m.update(&x, 0, 1).unwrap();
        let s = m.score(&x);
        assert_eq!(s, vec![2.0, -2.0]);
        assert_eq!(m.argmax(&x, |_| true), Some(0));
    }

    #[test]
    fn ties_break_toward_lowest_class_index() {
        let m = LinearModel::new(classes2()).unwrap();
        assert_eq!(m.argmax(&fv(&[0]), |_| true), Some(0));
        assert_eq!(m.argmax(&fv(&[0]), |k| k == 1), Some(1));
        assert_eq!(m.argmax(&fv(&[0]), |_| false), None);
    }

    #[test]
    fn averaging_matches_snapshot_average() {
        // Replays a fixed update schedule twice: once through the
        // accumulator trick, once by materializing the weight vector after
        // every instance and averaging those snapshots directly.
        let schedule: Vec<Option<(Vec<u32>, usize, usize)>> = vec![
            Some((vec![0, 1], 0, 1)),
            None,
            Some((vec![1, 2], 1, 0)),
            None,
            None,
            Some((vec![0], 0, 1)),
            Some((vec![2, 3], 1, 0)),
            None,
        ];
        let mut m = LinearModel::new(classes2()).unwrap();
        let mut naive: HashMap<(u32, usize), f64> = HashMap::new();
        let mut current: HashMap<(u32, usize), f64> = HashMap::new();
        let total = schedule.len() as f64;
        for step in &schedule {
            match step {
                Some((ids, gold, pred)) => {
                    m.update(&fv(ids), *gold, *pred).unwrap();
                    for &id in ids {
                        *current.entry((id, *gold)).or_default() += 1.0;
                        *current.entry((id, *pred)).or_default() -= 1.0;
                    }
                }
                None => m.tick().unwrap(),
            }
            for (&k, &w) in &current {
                *naive.entry(k).or_default() += w;
            }
        }
        let avg = m.averaged();
        assert!(avg.is_frozen());
        assert_eq!(avg.ticks(), schedule.len() as u64);
        for ((feature, class), sum) in naive {
            let expected = round6(sum / total);
            let got = avg
                .rows
                .get(&feature)
                .and_then(|cells| cells.iter().find(|c| c.class == class as u32))
                .map(|c| c.weight)
                .unwrap_or(0.0);
            assert_eq!(got, expected, "feature {feature} class {class}");
        }
    }

    #[test]
    fn averaged_model_rejects_updates() {
        let mut m = LinearModel::new(classes2()).unwrap();
        m.update(&fv(&[0]), 0, 1).unwrap();
        let mut avg = m.averaged();
        assert!(avg.update(&fv(&[0]), 0, 1).is_err());
        assert!(avg.tick().is_err());
        // The trainable model is still usable.
        m.update(&fv(&[0]), 1, 0).unwrap();
    }

    #[test]
    fn zero_tick_average_is_identity() {
        let m = LinearModel::new(classes2()).unwrap();
        let avg = m.averaged();
        assert_eq!(avg.weight_count(), 0);
    }

    fn trained_pair() -> (LinearModel, Interner) {
        let mut interner = Interner::new();
        let f = |s: &str, i: &mut Interner| i.intern(s);
        let mut m = LinearModel::new(classes2()).unwrap();
        let a = f("S0.form=la", &mut interner);
        let b = f("B0.form=kata", &mut interner);
        let c = f("S0.postag+B0.postag=dta|nna", &mut interner);
        m.update(&fv(&[a, b]), 0, 1).unwrap();
        m.tick().unwrap();
        m.update(&fv(&[b, c]), 1, 0).unwrap();
        m.update(&fv(&[a, c]), 0, 1).unwrap();
        (m.averaged(), interner)
    }

    #[test]
    fn save_load_round_trip_preserves_scores_and_bytes() {
        let (avg, interner) = trained_pair();
        let meta = vec![("kind".to_string(), "demo".to_string())];
        let text = avg.save(&interner, &meta).unwrap();
        assert!(text.starts_with("treelace-model v1\n"));
        assert!(text.ends_with("end\n"));

        let (loaded, loaded_interner, loaded_meta) = LinearModel::load(&text).unwrap();
        assert_eq!(loaded_meta, meta);
        assert_eq!(loaded.classes(), avg.classes());

        // Scores agree on every stored feature, via the string lookup.
        for s in ["S0.form=la", "B0.form=kata", "S0.postag+B0.postag=dta|nna"] {
            let orig = fv(&[interner.get(s).unwrap()]);
            let redo = fv(&[loaded_interner.get(s).unwrap()]);
            assert_eq!(avg.score(&orig), loaded.score(&redo), "feature {s}");
        }

        // Re-saving is byte-identical.
        let again = loaded.save(&loaded_interner, &loaded_meta).unwrap();
        assert_eq!(again, text);
    }

    #[test]
    fn unaveraged_model_refuses_to_save() {
        let m = LinearModel::new(classes2()).unwrap();
        assert!(m.save(&Interner::new(), &[]).is_err());
    }

    #[test]
    fn load_rejects_bad_input() {
        assert!(LinearModel::load("").is_err());
        assert!(LinearModel::load("some-other-format v9\n").is_err());

        let (avg, interner) = trained_pair();
        let text = avg.save(&interner, &[]).unwrap();

        // Truncation: drop the end marker and the last weight line.
        let mut lines: Vec<&str> = text.lines().collect();
        lines.pop();
        lines.pop();
        let truncated = lines.join("\n");
        let err = LinearModel::load(&truncated).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("truncated") || msg.contains("count"), "{msg}");

        // Corrupt the first weight line.
        let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
        let first_weight = lines
            .iter()
            .position(|l| l.starts_with("weights\t"))
            .unwrap()
            + 1;
        lines[first_weight] = "only\ttwo-columns".to_string();
        assert!(LinearModel::load(&lines.join("\n")).is_err());
        lines[first_weight] = "feat\ta\tnot-a-number".to_string();
        assert!(LinearModel::load(&lines.join("\n")).is_err());
    }
}
