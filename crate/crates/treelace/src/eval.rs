//! Parser evaluation: attachment scores, paired randomization tests, and
//! multiple-comparison correction across experiment grids.
//!
//! The significance test follows the paired shuffle scheme: the
//! per-sentence correct counts of two systems are swapped sentence-wise
//! at random, and the p-value is the fraction of shuffles whose absolute
//! score difference reaches the observed one, computed as
//! `(c + 1) / (N + 1)`. For small test sets (up to twelve sentences) all
//! `2^n` swap assignments are enumerated instead, making the p-value
//! exact.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::conll::Treebank;
use crate::error::{Error, Result};
use crate::parser::{train_parser, TrainParams};
use crate::transition::TransitionSystem;
use crate::treebank::{apply_tag_config, merge_treebanks, TagConfig};

/// Attachment metrics: labeled counts both the head and the label,
/// unlabeled the head alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Las,
    Uas,
}

impl Metric {
    pub fn name(&self) -> &'static str {
        match self {
            Metric::Las => "LAS",
            Metric::Uas => "UAS",
        }
    }

    pub fn parse(text: &str) -> Option<Metric> {
        match text.to_ascii_lowercase().as_str() {
            "las" => Some(Metric::Las),
            "uas" => Some(Metric::Uas),
            _ => None,
        }
    }
}

/// Per-sentence correct counts, the unit the randomization test swaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SentenceCounts {
    pub tokens: usize,
    pub correct_heads: usize,
    pub correct_labeled: usize,
}

/// The outcome of scoring one prediction against gold.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub scored_tokens: usize,
    pub correct_heads: usize,
    pub correct_labeled: usize,
    /// Labeled attachment score in percent.
    pub las: f64,
    /// Unlabeled attachment score in percent.
    pub uas: f64,
    pub per_sentence: Vec<SentenceCounts>,
    pub exclude_punct: bool,
}

impl EvalReport {
    pub fn metric(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Las => self.las,
            Metric::Uas => self.uas,
        }
    }

    fn correct_for(&self, counts: &SentenceCounts, metric: Metric) -> usize {
        match metric {
            Metric::Las => counts.correct_labeled,
            Metric::Uas => counts.correct_heads,
        }
    }

    /// Renders the report as two-column TSV.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("scored-tokens\t{}\n", self.scored_tokens));
        out.push_str(&format!("correct-heads\t{}\n", self.correct_heads));
        out.push_str(&format!("correct-labeled\t{}\n", self.correct_labeled));
        out.push_str(&format!("uas\t{:.2}\n", self.uas));
        out.push_str(&format!("las\t{:.2}\n", self.las));
        out.push_str(&format!("exclude-punct\t{}\n", self.exclude_punct));
        out
    }
}

/// True for tokens conventionally skipped under punctuation exclusion.
pub fn is_punctuation_tag(cpostag: &str) -> bool {
    cpostag == "." || cpostag == "PUNCT"
}

/// Scores predicted heads and labels against gold. The treebanks must be
/// aligned sentence by sentence and token by token; only heads and labels
/// of the prediction are consulted. With `exclude_punct`, tokens whose
/// gold coarse tag is punctuation are skipped.
pub fn score(gold: &Treebank, predicted: &Treebank, exclude_punct: bool) -> Result<EvalReport> {
    if gold.len() != predicted.len() {
        return Err(Error::data(format!(
            "sentence count mismatch: gold has {}, prediction has {}",
            gold.len(),
            predicted.len()
        )));
    }
    let mut per_sentence = Vec::with_capacity(gold.len());
    let mut scored_tokens = 0usize;
    let mut correct_heads = 0usize;
    let mut correct_labeled = 0usize;
    for (i, (g, p)) in gold.sentences.iter().zip(&predicted.sentences).enumerate() {
        if g.len() != p.len() {
            return Err(Error::data(format!(
                "sentence {}: token count mismatch (gold {}, prediction {})",
                i + 1,
                g.len(),
                p.len()
            )));
        }
        let mut counts = SentenceCounts {
            tokens: 0,
            correct_heads: 0,
            correct_labeled: 0,
        };
        for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
            if exclude_punct && is_punctuation_tag(&gt.cpostag) {
                continue;
            }
            counts.tokens += 1;
            if gt.head == pt.head {
                counts.correct_heads += 1;
                if gt.deprel == pt.deprel {
                    counts.correct_labeled += 1;
                }
            }
        }
        scored_tokens += counts.tokens;
        correct_heads += counts.correct_heads;
        correct_labeled += counts.correct_labeled;
        per_sentence.push(counts);
    }
    if scored_tokens == 0 {
        return Err(Error::data("no scored tokens (empty input or all punctuation)"));
    }
    Ok(EvalReport {
        scored_tokens,
        correct_heads,
        correct_labeled,
        las: 100.0 * correct_labeled as f64 / scored_tokens as f64,
        uas: 100.0 * correct_heads as f64 / scored_tokens as f64,
        per_sentence,
        exclude_punct,
    })
}

/// Result of the paired randomization comparison of two systems.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceResult {
    pub metric: Metric,
    pub score_a: f64,
    pub score_b: f64,
    /// Absolute score difference in percent.
    pub observed_diff: f64,
    pub p_value: f64,
    /// Number of shuffles entering the p-value denominator.
    pub shuffles: usize,
    /// True when every swap assignment was enumerated.
    pub exact: bool,
    pub seed: u64,
}

impl SignificanceResult {
    pub fn tsv_header() -> &'static str {
        "metric\tscore-a\tscore-b\tdiff\tp-value\tshuffles\texact\tseed"
    }

    pub fn to_tsv_row(&self) -> String {
        format!(
            "{}\t{:.2}\t{:.2}\t{:.2}\t{:.6}\t{}\t{}\t{}",
            self.metric.name(),
            self.score_a,
            self.score_b,
            self.observed_diff,
            self.p_value,
            self.shuffles,
            self.exact,
            self.seed
        )
    }
}

/// Largest test-set size for which the swap space is enumerated exactly.
const EXACT_LIMIT: usize = 12;

/// Compares two systems on the same test set with a paired randomization
/// test over per-sentence correct counts. `iterations` bounds the number
/// of sampled shuffles; test sets of up to twelve sentences are
/// enumerated exactly instead.
pub fn randomized_comparator(
    a: &EvalReport,
    b: &EvalReport,
    metric: Metric,
    iterations: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if iterations == 0 {
        return Err(Error::data("the comparator needs at least one shuffle"));
    }
    if a.per_sentence.len() != b.per_sentence.len() {
        return Err(Error::data(format!(
            "systems were scored on different test sets ({} vs {} sentences)",
            a.per_sentence.len(),
            b.per_sentence.len()
        )));
    }
    if a.exclude_punct != b.exclude_punct {
        return Err(Error::data(
            "systems were scored under different punctuation policies",
        ));
    }
    for (i, (ca, cb)) in a.per_sentence.iter().zip(&b.per_sentence).enumerate() {
        if ca.tokens != cb.tokens {
            return Err(Error::data(format!(
                "sentence {}: scored token counts differ ({} vs {})",
                i + 1,
                ca.tokens,
                cb.tokens
            )));
        }
    }

    let diffs: Vec<i64> = a
        .per_sentence
        .iter()
        .zip(&b.per_sentence)
        .map(|(ca, cb)| a.correct_for(ca, metric) as i64 - b.correct_for(cb, metric) as i64)
        .collect();
    let observed: i64 = diffs.iter().sum::<i64>().abs();
    let n = diffs.len();

    let (p_value, shuffles, exact) = if n <= EXACT_LIMIT {
        let total = 1u64 << n;
        let mut hits = 0u64;
        for mask in 0..total {
            let mut sum = 0i64;
            for (i, d) in diffs.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    sum -= d;
                } else {
                    sum += d;
                }
            }
            if sum.abs() >= observed {
                hits += 1;
            }
        }
        (hits as f64 / total as f64, (total - 1) as usize, true)
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hits = 0u64;
        for _ in 0..iterations {
            let mut sum = 0i64;
            for d in &diffs {
                if rng.gen_bool(0.5) {
                    sum -= d;
                } else {
                    sum += d;
                }
            }
            if sum.abs() >= observed {
                hits += 1;
            }
        }
        (
            (hits + 1) as f64 / (iterations + 1) as f64,
            iterations,
            false,
        )
    };

    Ok(SignificanceResult {
        metric,
        score_a: a.metric(metric),
        score_b: b.metric(metric),
        observed_diff: (a.metric(metric) - b.metric(metric)).abs(),
        p_value,
        shuffles,
        exact,
        seed,
    })
}

/// Benjamini-Hochberg step-up procedure: returns the indices of the
/// hypotheses rejected at false discovery rate `q`, in ascending order.
pub fn benjamini_hochberg(p_values: &[f64], q: f64) -> Result<Vec<usize>> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::data(format!(
            "false discovery rate must be in (0, 1), got {q}"
        )));
    }
    for (i, &p) in p_values.iter().enumerate() {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::data(format!("p-value {} at index {} is not in [0, 1]", p, i)));
        }
    }
    let m = p_values.len();
    let mut indexed: Vec<(f64, usize)> = p_values
        .iter()
        .copied()
        .enumerate()
        .map(|(i, p)| (p, i))
        .collect();
    indexed.sort_by(|a, b| a.partial_cmp(b).expect("NaN was rejected above"));
    let mut cutoff = 0usize;
    for (rank, (p, _)) in indexed.iter().enumerate() {
        if *p <= (rank + 1) as f64 * q / m as f64 {
            cutoff = rank + 1;
        }
    }
    let mut rejected: Vec<usize> = indexed[..cutoff].iter().map(|(_, i)| *i).collect();
    rejected.sort_unstable();
    Ok(rejected)
}

/// One cell of the experiment grid: scores of a parser on one test
/// language, and p-values against the monolingual baseline for that
/// language (absent on the diagonal, which is the baseline itself).
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub las: f64,
    pub uas: f64,
    pub p_las: Option<f64>,
    pub p_uas: Option<f64>,
}

/// Scores for every (test language, partner language) combination:
/// `cells[i][j]` is the parser trained on languages `i` and `j` evaluated
/// on the test set of language `i`; the diagonal holds the monolingual
/// baselines.
#[derive(Debug, Clone, PartialEq)]
pub struct GridReport {
    pub languages: Vec<String>,
    pub cells: Vec<Vec<GridCell>>,
}

/// Counters summarizing a grid against its baselines.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridSummary {
    /// Off-diagonal cells, i.e. (test, partner) pairs.
    pub pairs: usize,
    pub las_improved: usize,
    pub las_significant: usize,
    /// Significant improvements surviving Benjamini-Hochberg correction.
    pub las_bh_rejected: usize,
    pub uas_improved: usize,
    pub uas_significant: usize,
    pub uas_bh_rejected: usize,
}

impl GridReport {
    /// Annotation for a cell: `+`/`-` for a gain or loss against the
    /// monolingual baseline, doubled when significant at p < 0.05. The
    /// diagonal is unannotated.
    pub fn annotation(&self, test: usize, partner: usize, metric: Metric) -> &'static str {
        if test == partner {
            return "";
        }
        let cell = &self.cells[test][partner];
        let base = &self.cells[test][test];
        let (value, baseline, p) = match metric {
            Metric::Las => (cell.las, base.las, cell.p_las),
            Metric::Uas => (cell.uas, base.uas, cell.p_uas),
        };
        let significant = p.map(|p| p < 0.05).unwrap_or(false);
        match (value >= baseline, significant) {
            (true, true) => "++",
            (true, false) => "+",
            (false, true) => "--",
            (false, false) => "-",
        }
    }

    /// Human-readable matrix: one row per test language, LAS and UAS per
    /// cell, annotated against the baseline.
    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "Rows: test language. Columns: training partner (diagonal = monolingual baseline).\n\
             Cell: LAS/UAS; + gain, - loss vs the row's baseline, doubled when p < 0.05.\n\n",
        );
        let width = 18;
        out.push_str(&format!("{:<8}", "test"));
        for l in &self.languages {
            out.push_str(&format!("{:<width$}", format!("+{l}")));
        }
        out.push('\n');
        for (i, l) in self.languages.iter().enumerate() {
            out.push_str(&format!("{:<8}", l));
            for j in 0..self.languages.len() {
                let cell = &self.cells[i][j];
                let text = format!(
                    "{:.2}{}/{:.2}{}",
                    cell.las,
                    self.annotation(i, j, Metric::Las),
                    cell.uas,
                    self.annotation(i, j, Metric::Uas),
                );
                out.push_str(&format!("{text:<width$}"));
            }
            out.push('\n');
        }
        out
    }

    /// Machine-readable long form, one row per cell.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "test-lang\tpartner-lang\tlas\tuas\tp-las\tp-uas\tann-las\tann-uas\n",
        );
        let fmt_p = |p: Option<f64>| match p {
            Some(p) => format!("{p:.6}"),
            None => "-".to_string(),
        };
        for (i, test) in self.languages.iter().enumerate() {
            for (j, partner) in self.languages.iter().enumerate() {
                let cell = &self.cells[i][j];
                out.push_str(&format!(
                    "{}\t{}\t{:.2}\t{:.2}\t{}\t{}\t{}\t{}\n",
                    test,
                    partner,
                    cell.las,
                    cell.uas,
                    fmt_p(cell.p_las),
                    fmt_p(cell.p_uas),
                    self.annotation(i, j, Metric::Las),
                    self.annotation(i, j, Metric::Uas),
                ));
            }
        }
        out
    }

    /// Counts gains and significant gains, and applies Benjamini-Hochberg
    /// at rate `q` across each metric's off-diagonal p-values.
    pub fn summary(&self, q: f64) -> Result<GridSummary> {
        let n = self.languages.len();
        let mut pairs = 0usize;
        let mut las_improved = 0usize;
        let mut las_significant = 0usize;
        let mut uas_improved = 0usize;
        let mut uas_significant = 0usize;
        let mut p_las = Vec::new();
        let mut p_uas = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                pairs += 1;
                match self.annotation(i, j, Metric::Las) {
                    "++" => {
                        las_improved += 1;
                        las_significant += 1;
                    }
                    "+" => las_improved += 1,
                    "--" => las_significant += 1,
                    _ => {}
                }
                match self.annotation(i, j, Metric::Uas) {
                    "++" => {
                        uas_improved += 1;
                        uas_significant += 1;
                    }
                    "+" => uas_improved += 1,
                    "--" => uas_significant += 1,
                    _ => {}
                }
                if let Some(p) = self.cells[i][j].p_las {
                    p_las.push(p);
                }
                if let Some(p) = self.cells[i][j].p_uas {
                    p_uas.push(p);
                }
            }
        }
        Ok(GridSummary {
            pairs,
            las_improved,
            las_significant,
            las_bh_rejected: benjamini_hochberg(&p_las, q)?.len(),
            uas_improved,
            uas_significant,
            uas_bh_rejected: benjamini_hochberg(&p_uas, q)?.len(),
        })
    }
}

/// One language's data for a grid experiment.
#[derive(Debug, Clone)]
pub struct LanguageCorpus {
    pub lang: String,
    pub train: Treebank,
    pub dev: Treebank,
    pub test: Treebank,
}

/// Settings for [`run_grid`].
#[derive(Debug, Clone)]
pub struct GridParams {
    pub system: TransitionSystem,
    pub tag_config: Option<TagConfig>,
    pub epochs: usize,
    pub seed: u64,
    /// Shuffle budget for the randomization tests.
    pub iterations: usize,
    /// Worker threads; 0 picks the rayon default.
    pub jobs: usize,
    pub exclude_punct: bool,
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams {
            system: TransitionSystem::ArcEager,
            tag_config: None,
            epochs: 15,
            seed: 1,
            iterations: 1000,
            jobs: 0,
            exclude_punct: false,
        }
    }
}

fn with_lang(tb: &Treebank, lang: &str) -> Treebank {
    let mut out = tb.clone();
    for s in out.sentences.iter_mut() {
        s.lang = Some(lang.to_string());
    }
    out.source = lang.to_string();
    out
}

fn grid_train(
    train: &Treebank,
    dev: &Treebank,
    params: &GridParams,
) -> Result<crate::parser::ParserModel> {
    let tp = TrainParams {
        epochs: params.epochs,
        seed: params.seed,
        tag_config: params.tag_config,
        ..TrainParams::default().with_system(params.system)
    };
    train_parser(train, dev, &tp)
}

fn grid_eval(
    model: &crate::parser::ParserModel,
    test: &Treebank,
    params: &GridParams,
) -> Result<EvalReport> {
    let configured = match model.tag_config() {
        Some(cfg) => apply_tag_config(test, &cfg)?,
        None => test.clone(),
    };
    let parsed = model.parse_treebank(&configured)?;
    score(test, &parsed, params.exclude_punct)
}

/// Trains the full grid: one monolingual parser per language and one
/// bilingual parser per unordered pair, evaluating each bilingual parser
/// on both of its languages against the monolingual baselines.
///
/// Training and evaluation tasks run in parallel across `jobs` threads;
/// results are deterministic regardless of scheduling because every
/// training run is seeded independently of the others.
pub fn run_grid(corpora: &[LanguageCorpus], params: &GridParams) -> Result<GridReport> {
    if corpora.len() < 2 {
        return Err(Error::data("a grid needs at least two languages"));
    }
    let mut sorted: Vec<&LanguageCorpus> = corpora.iter().collect();
    sorted.sort_by(|a, b| a.lang.cmp(&b.lang));
    for w in sorted.windows(2) {
        if w[0].lang == w[1].lang {
            return Err(Error::data(format!("duplicate language '{}'", w[0].lang)));
        }
    }
    let n = sorted.len();
    let prepared: Vec<(String, Treebank, Treebank, Treebank)> = sorted
        .iter()
        .map(|c| {
            (
                c.lang.clone(),
                with_lang(&c.train, &c.lang),
                with_lang(&c.dev, &c.lang),
                with_lang(&c.test, &c.lang),
            )
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.jobs)
        .build()
        .map_err(|e| Error::internal(format!("could not build thread pool: {e}")))?;

    let (mono_reports, pair_reports) = pool.install(|| -> Result<_> {
        let monos: Vec<EvalReport> = prepared
            .par_iter()
            .map(|(_, train, dev, test)| {
                let model = grid_train(train, dev, params)?;
                grid_eval(&model, test, params)
            })
            .collect::<Result<_>>()?;

        let pairs: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .collect();
        let pair_results: Vec<((usize, usize), EvalReport, EvalReport)> = pairs
            .par_iter()
            .map(|&(i, j)| {
                let (li, train_i, dev_i, test_i) = &prepared[i];
                let (lj, train_j, dev_j, test_j) = &prepared[j];
                let train = merge_treebanks(vec![
                    (li.clone(), train_i.clone()),
                    (lj.clone(), train_j.clone()),
                ])?;
                let dev = merge_treebanks(vec![
                    (li.clone(), dev_i.clone()),
                    (lj.clone(), dev_j.clone()),
                ])?;
                let model = grid_train(&train, &dev, params)?;
                let report_i = grid_eval(&model, test_i, params)?;
                let report_j = grid_eval(&model, test_j, params)?;
                Ok(((i, j), report_i, report_j))
            })
            .collect::<Result<_>>()?;
        Ok((monos, pair_results))
    })?;

    let blank = GridCell {
        las: 0.0,
        uas: 0.0,
        p_las: None,
        p_uas: None,
    };
    let mut cells = vec![vec![blank; n]; n];
    for (i, report) in mono_reports.iter().enumerate() {
        cells[i][i] = GridCell {
            las: report.las,
            uas: report.uas,
            p_las: None,
            p_uas: None,
        };
    }
    for ((i, j), report_i, report_j) in &pair_reports {
        for (test_idx, report) in [(*i, report_i), (*j, report_j)] {
            let baseline = &mono_reports[test_idx];
            let p_las = randomized_comparator(
                baseline,
                report,
                Metric::Las,
                params.iterations,
                params.seed,
            )?
            .p_value;
            let p_uas = randomized_comparator(
                baseline,
                report,
                Metric::Uas,
                params.iterations,
                params.seed,
            )?
            .p_value;
            let partner = if test_idx == *i { *j } else { *i };
            cells[test_idx][partner] = GridCell {
                las: report.las,
                uas: report.uas,
                p_las: Some(p_las),
                p_uas: Some(p_uas),
            };
        }
    }

    Ok(GridReport {
        languages: prepared.into_iter().map(|(l, _, _, _)| l).collect(),
        cells,
    })
}
