//! Command-line workflow driver: one subcommand per experimental step,
//! from treebank merging through training, parsing, evaluation and the
//! full cross-lingual grid.
//!
//! Every artifact-producing run writes a manifest sidecar
//! (`<output>.manifest.tsv`) recording the toolkit version, the raw
//! argument vector, a SHA-256 digest of every input file, the resolved
//! seed, and the produced outputs. Manifests contain no timestamps, so
//! `rerun <manifest>` reproduces every artifact byte for byte, and the
//! rewritten manifest equals the original.
//!
//! Exit codes: 0 success, 1 usage error, 2 data or format error,
//! 3 violated internal invariant.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};

use crate::conll::{read_treebank_with, write_treebank, MultiRoot, ReadOptions, Treebank};
use crate::error::{Error, Result};
use crate::eval::{
    benjamini_hochberg, randomized_comparator, run_grid, score, GridParams, GridSummary,
    LanguageCorpus, Metric,
};
use crate::features::{candidate_pool, default_templates, parse_template_set};
use crate::optimizer::{optimize, OptimizeParams};
use crate::parser::{train_parser, ParserModel, TrainParams};
use crate::tagger::{tag_and_parse, train_tagger, TagColumn, TaggerModel, TaggerParams};
use crate::transition::TransitionSystem;
use crate::treebank::{apply_tag_config, merge_treebanks, shared_tag_report, TagConfig};

pub const EXIT_SUCCESS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Runs the command line given the full argument vector (including the
/// program name) and returns the process exit code.
pub fn run(argv: &[String]) -> i32 {
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_SUCCESS,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return code;
        }
    };
    let raw: Vec<String> = argv.iter().skip(1).cloned().collect();
    match dispatch(cli.command, &raw) {
        Ok(()) => EXIT_SUCCESS,
        Err(failure) => {
            eprintln!("error: {failure}");
            failure.code()
        }
    }
}

#[derive(Debug)]
enum RunFailure {
    Usage(String),
    Tool(Error),
}

impl std::fmt::Display for RunFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunFailure::Usage(m) => write!(f, "{m}"),
            RunFailure::Tool(e) => write!(f, "{e}"),
        }
    }
}

impl From<Error> for RunFailure {
    fn from(e: Error) -> Self {
        RunFailure::Tool(e)
    }
}

impl RunFailure {
    fn code(&self) -> i32 {
        match self {
            RunFailure::Usage(_) => EXIT_USAGE,
            RunFailure::Tool(e) => match e {
                Error::IllegalTransition(_) | Error::Internal(_) => EXIT_INTERNAL,
                _ => EXIT_DATA,
            },
        }
    }
}

type RunResult = std::result::Result<(), RunFailure>;

#[derive(Parser)]
#[command(
    name = "treelace",
    version,
    about = "Train, combine and evaluate multilingual dependency parsers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Merge treebanks of several languages into one training corpus.
    Merge(MergeArgs),
    /// Report how many fine-grained tags each pair of treebanks shares.
    AnalyzeTags(AnalyzeTagsArgs),
    /// Train a parsing model, optionally searching for its configuration.
    Train(TrainArgs),
    /// Parse a treebank with a trained model.
    Parse(ParseArgs),
    /// Score a parsed treebank against gold annotation.
    Eval(EvalArgs),
    /// Test whether two parsers differ significantly on one test set.
    Compare(CompareArgs),
    /// Apply the Benjamini-Hochberg correction to a list of p-values.
    Bh(BhArgs),
    /// Train a part-of-speech tagging model.
    TagTrain(TagTrainArgs),
    /// Tag plain text, one sentence per line.
    Tag(TagArgs),
    /// Train and evaluate all monolingual and bilingual combinations.
    Grid(GridArgs),
    /// Re-execute a run from its manifest, reproducing artifacts exactly.
    Rerun(RerunArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SystemArg {
    ArcEager,
    ArcStandard,
    Auto,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TagsArg {
    /// Keep the treebank-specific fine-grained tags.
    Fine,
    /// Replace fine-grained tags with the coarse universal ones.
    Universal,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MetricArg {
    Las,
    Uas,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ColumnArg {
    Postag,
    Cpostag,
}

fn tag_config_from(tags: TagsArg, prefix: bool) -> Option<TagConfig> {
    match (tags, prefix) {
        (TagsArg::Fine, false) => None,
        (TagsArg::Fine, true) => Some(TagConfig::treebank_dependent().with_prefixing()),
        (TagsArg::Universal, false) => Some(TagConfig::universal()),
        (TagsArg::Universal, true) => Some(TagConfig::universal().with_prefixing()),
    }
}

fn metric_from(metric: MetricArg) -> Metric {
    match metric {
        MetricArg::Las => Metric::Las,
        MetricArg::Uas => Metric::Uas,
    }
}

fn column_from(column: ColumnArg) -> TagColumn {
    match column {
        ColumnArg::Postag => TagColumn::Postag,
        ColumnArg::Cpostag => TagColumn::Cpostag,
    }
}

#[derive(Args)]
struct MergeArgs {
    /// Input treebanks, one file per language.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// Language code of each input, in the same order.
    #[arg(long = "lang", required = true)]
    langs: Vec<String>,
    #[arg(long, value_enum, default_value_t = TagsArg::Fine)]
    tags: TagsArg,
    /// Prefix every tag with its sentence's language code.
    #[arg(long)]
    prefix_tags: bool,
    /// Reattach extra root children instead of rejecting the sentence.
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AnalyzeTagsArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long = "lang", required = true)]
    langs: Vec<String>,
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Transition system; `auto` profiles the data, picks the system and
    /// searches the feature templates.
    #[arg(long, value_enum, default_value_t = SystemArg::ArcEager)]
    system: SystemArg,
    #[arg(long, value_enum, default_value_t = TagsArg::Fine)]
    tags: TagsArg,
    /// Prefix tags with each sentence's language code before training.
    #[arg(long)]
    prefix_lang: bool,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, env = "TREELACE_SEED", default_value_t = 1)]
    seed: u64,
    /// Feature template file, one template per line.
    #[arg(long)]
    templates: Option<PathBuf>,
    /// Language code stamped on every train and dev sentence.
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ParseArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    input: PathBuf,
    /// Tagging model; when given, tags are predicted before parsing and
    /// the output carries them.
    #[arg(long)]
    tagger: Option<PathBuf>,
    /// Language code stamped on every input sentence.
    #[arg(long)]
    lang: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred: PathBuf,
    /// Skip tokens whose gold coarse tag is punctuation.
    #[arg(long)]
    exclude_punct: bool,
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    pred_a: PathBuf,
    #[arg(long)]
    pred_b: PathBuf,
    #[arg(long, value_enum, default_value_t = MetricArg::Las)]
    metric: MetricArg,
    /// Shuffle budget; small test sets are enumerated exactly instead.
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long, env = "TREELACE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    exclude_punct: bool,
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BhArgs {
    /// File with one p-value per line.
    #[arg(long)]
    pvalues: PathBuf,
    /// False discovery rate.
    #[arg(long, default_value_t = 0.05)]
    q: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TagTrainArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    dev: PathBuf,
    /// Which tag column the model predicts.
    #[arg(long, value_enum, default_value_t = ColumnArg::Postag)]
    column: ColumnArg,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, env = "TREELACE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TagArgs {
    #[arg(long)]
    model: PathBuf,
    /// Plain text, one sentence per line, tokens separated by whitespace.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GridArgs {
    /// Directory with `<lang>-train.conll`, `<lang>-dev.conll` and
    /// `<lang>-test.conll` for every language.
    #[arg(long)]
    treebanks: PathBuf,
    /// Which bilingual combinations to train; only `all` is supported.
    #[arg(long, default_value = "all")]
    pairs: String,
    /// Worker threads; 0 picks a default.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    #[arg(long, value_enum, default_value_t = SystemArg::ArcEager)]
    system: SystemArg,
    #[arg(long, value_enum, default_value_t = TagsArg::Fine)]
    tags: TagsArg,
    #[arg(long)]
    prefix_lang: bool,
    #[arg(long, default_value_t = 15)]
    epochs: usize,
    #[arg(long, env = "TREELACE_SEED", default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1000)]
    iterations: usize,
    #[arg(long)]
    exclude_punct: bool,
    /// False discovery rate for the summary's corrected counts.
    #[arg(long, default_value_t = 0.2)]
    q: f64,
    #[arg(long)]
    repair_multi_root: bool,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct RerunArgs {
    /// Manifest file written by an earlier run.
    manifest: PathBuf,
}

fn dispatch(command: Command, raw: &[String]) -> RunResult {
    match command {
        Command::Merge(args) => run_merge(args, raw),
        Command::AnalyzeTags(args) => run_analyze_tags(args, raw),
        Command::Train(args) => run_train(args, raw),
        Command::Parse(args) => run_parse(args, raw),
        Command::Eval(args) => run_eval(args, raw),
        Command::Compare(args) => run_compare(args, raw),
        Command::Bh(args) => run_bh(args, raw),
        Command::TagTrain(args) => run_tag_train(args, raw),
        Command::Tag(args) => run_tag(args, raw),
        Command::Grid(args) => run_grid_command(args, raw),
        Command::Rerun(args) => run_rerun(args),
    }
}

struct Manifest {
    subcommand: &'static str,
    argv: Vec<String>,
    inputs: BTreeMap<String, String>,
    seed: Option<u64>,
    outputs: Vec<String>,
}

impl Manifest {
    fn new(subcommand: &'static str, argv: &[String]) -> Self {
        Manifest {
            subcommand,
            argv: argv.to_vec(),
            inputs: BTreeMap::new(),
            seed: None,
            outputs: Vec::new(),
        }
    }

    fn record_input(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs
            .insert(path.display().to_string(), sha256_hex(bytes));
    }

    fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    fn render(&self) -> String {
        let mut out = String::from("key\tvalue\n");
        let _ = writeln!(out, "toolkit-version\t{}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "subcommand\t{}", self.subcommand);
        for (i, arg) in self.argv.iter().enumerate() {
            let _ = writeln!(out, "argv.{i}\t{arg}");
        }
        for (path, digest) in &self.inputs {
            let _ = writeln!(out, "input.{path}\t{digest}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed\t{seed}");
        }
        for path in &self.outputs {
            let _ = writeln!(out, "output\t{path}");
        }
        out
    }

    /// Writes the manifest next to the primary output.
    fn write_beside(&self, primary: &Path) -> Result<()> {
        write_atomic(&manifest_path_for(primary), &self.render())
    }
}

/// The manifest sidecar path for an output: `<output>.manifest.tsv`.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_os_string();
    name.push(".manifest.tsv");
    PathBuf::from(name)
}

fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        let _ = write!(out, "{byte:02x}");
    }
    out
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::data(format!("cannot read {}: {e}", path.display())))
}

fn at_path(path: &Path, e: Error) -> Error {
    match e {
        Error::IllegalTransition(_) | Error::Internal(_) => e,
        other => Error::data(format!("{}: {other}", path.display())),
    }
}

fn read_treebank_file(
    path: &Path,
    lang: Option<&str>,
    options: &ReadOptions,
    manifest: &mut Manifest,
) -> Result<Treebank> {
    let text = read_text(path)?;
    manifest.record_input(path, text.as_bytes());
    read_treebank_with(&text, lang, options).map_err(|e| at_path(path, e))
}

fn gold_options(repair: bool) -> ReadOptions {
    ReadOptions {
        multi_root: if repair {
            MultiRoot::Repair
        } else {
            MultiRoot::Reject
        },
        ..ReadOptions::gold()
    }
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)
                .map_err(|e| Error::data(format!("cannot create {}: {e}", parent.display())))?;
        }
    }
    let mut tmp_name = path.as_os_str().to_os_string();
    tmp_name.push(".tmp");
    let tmp = PathBuf::from(tmp_name);
    fs::write(&tmp, content)
        .map_err(|e| Error::data(format!("cannot write {}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::data(format!("cannot write {}: {e}", path.display()))
    })
}

fn zipped_inputs<'a>(
    inputs: &'a [PathBuf],
    langs: &'a [String],
) -> std::result::Result<Vec<(&'a str, &'a Path)>, RunFailure> {
    if inputs.len() != langs.len() {
        return Err(RunFailure::Usage(format!(
            "{} input files but {} --lang values; give one --lang per input",
            inputs.len(),
            langs.len()
        )));
    }
    Ok(langs
        .iter()
        .map(String::as_str)
        .zip(inputs.iter().map(PathBuf::as_path))
        .collect())
}

fn keyed_tsv(body: &str) -> String {
    format!("key\tvalue\n{body}")
}

fn run_merge(args: MergeArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("merge", raw);
    let options = gold_options(args.repair_multi_root);
    let mut pairs = Vec::new();
    for (lang, path) in zipped_inputs(&args.inputs, &args.langs)? {
        let tb = read_treebank_file(path, Some(lang), &options, &mut manifest)?;
        pairs.push((lang.to_string(), tb));
    }
    let merged = merge_treebanks(pairs)?;
    let merged = match tag_config_from(args.tags, args.prefix_tags) {
        Some(cfg) => apply_tag_config(&merged, &cfg)?,
        None => merged,
    };
    write_atomic(&args.out, &write_treebank(&merged))?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!(
        "merged {} sentences from {} treebanks into {}",
        merged.len(),
        args.inputs.len(),
        args.out.display()
    );
    Ok(())
}

fn run_analyze_tags(args: AnalyzeTagsArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("analyze-tags", raw);
    let options = gold_options(args.repair_multi_root);
    let mut pairs = Vec::new();
    for (lang, path) in zipped_inputs(&args.inputs, &args.langs)? {
        let tb = read_treebank_file(path, Some(lang), &options, &mut manifest)?;
        pairs.push((lang.to_string(), tb));
    }
    let matrix = shared_tag_report(&pairs)?;
    let tsv = matrix.to_tsv();
    write_atomic(&args.out, &tsv)?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    print!("{tsv}");
    Ok(())
}

fn run_train(args: TrainArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("train", raw);
    manifest.seed = Some(args.seed);
    let options = gold_options(args.repair_multi_root);
    let lang = args.lang.as_deref();
    let train = read_treebank_file(&args.train, lang, &options, &mut manifest)?;
    let dev = read_treebank_file(&args.dev, lang, &options, &mut manifest)?;
    let tag_config = tag_config_from(args.tags, args.prefix_lang);

    let model = match args.system {
        SystemArg::Auto => {
            if args.templates.is_some() {
                return Err(RunFailure::Usage(
                    "--templates cannot be combined with --system auto; \
                     the search chooses the template set"
                        .to_string(),
                ));
            }
            let params = OptimizeParams {
                epochs: args.epochs,
                seed: args.seed,
                tag_config,
            };
            let pool = candidate_pool(TransitionSystem::ArcEager);
            let (model, report) = optimize(&train, &dev, &pool, &params)?;
            let tsv_path = report_path(&args.out, "report.tsv");
            let txt_path = report_path(&args.out, "report.txt");
            write_atomic(&tsv_path, &report.to_tsv())?;
            write_atomic(&txt_path, &report.to_text())?;
            manifest.record_output(&tsv_path);
            manifest.record_output(&txt_path);
            println!(
                "chose {} with {} templates, dev LAS {:.2}",
                report.chosen_system.name(),
                report.final_templates.len(),
                report.final_dev_las
            );
            model
        }
        system_arg => {
            let system = if system_arg == SystemArg::ArcStandard {
                TransitionSystem::ArcStandard
            } else {
                TransitionSystem::ArcEager
            };
            let templates = match &args.templates {
                Some(path) => {
                    let text = read_text(path)?;
                    manifest.record_input(path, text.as_bytes());
                    parse_template_set(&text).map_err(|e| at_path(path, e))?
                }
                None => default_templates(system),
            };
            let params = TrainParams {
                system,
                templates,
                epochs: args.epochs,
                seed: args.seed,
                shuffle: true,
                tag_config,
            };
            let model = train_parser(&train, &dev, &params)?;
            let meta = model.metadata();
            println!(
                "trained {} model, dev LAS {:.2} at epoch {}",
                system.name(),
                100.0 * meta.dev_correct as f64 / meta.dev_tokens as f64,
                meta.chosen_epoch
            );
            model
        }
    };

    write_atomic(&args.out, &model.save()?)?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!("wrote {}", args.out.display());
    Ok(())
}

fn report_path(model_out: &Path, suffix: &str) -> PathBuf {
    let mut name = model_out.as_os_str().to_os_string();
    name.push(".");
    name.push(suffix);
    PathBuf::from(name)
}

/// Copies predicted heads and labels onto an otherwise untouched copy of
/// the input, so parse output preserves the input's own columns.
fn graft_annotations(onto: &Treebank, parsed: &Treebank) -> Treebank {
    let mut out = onto.clone();
    for (sentence, tree) in out.sentences.iter_mut().zip(&parsed.sentences) {
        for (token, parsed_token) in sentence.tokens.iter_mut().zip(&tree.tokens) {
            token.head = parsed_token.head;
            token.deprel = parsed_token.deprel.clone();
        }
    }
    out
}

fn run_parse(args: ParseArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("parse", raw);
    let model_text = read_text(&args.model)?;
    manifest.record_input(&args.model, model_text.as_bytes());
    let model = ParserModel::load(&model_text).map_err(|e| at_path(&args.model, e))?;
    let input = read_treebank_file(
        &args.input,
        args.lang.as_deref(),
        &ReadOptions::bare(),
        &mut manifest,
    )?;

    let parsed = match &args.tagger {
        Some(tagger_path) => {
            let tagger_text = read_text(tagger_path)?;
            manifest.record_input(tagger_path, tagger_text.as_bytes());
            let tagger =
                TaggerModel::load(&tagger_text).map_err(|e| at_path(tagger_path, e))?;
            tag_and_parse(&tagger, &model, &input, args.lang.as_deref())?
        }
        None => {
            let configured = match model.tag_config() {
                Some(cfg) => apply_tag_config(&input, &cfg)?,
                None => input.clone(),
            };
            graft_annotations(&input, &model.parse_treebank(&configured)?)
        }
    };

    write_atomic(&args.out, &write_treebank(&parsed))?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!(
        "parsed {} sentences into {}",
        parsed.len(),
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("eval", raw);
    let gold = read_treebank_file(
        &args.gold,
        None,
        &gold_options(args.repair_multi_root),
        &mut manifest,
    )?;
    let pred = read_treebank_file(&args.pred, None, &ReadOptions::predictions(), &mut manifest)?;
    let report = score(&gold, &pred, args.exclude_punct)?;
    let tsv = keyed_tsv(&report.to_tsv());
    write_atomic(&args.out, &tsv)?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!("LAS {:.2}", report.las);
    println!("UAS {:.2}", report.uas);
    Ok(())
}

fn run_compare(args: CompareArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("compare", raw);
    manifest.seed = Some(args.seed);
    let gold = read_treebank_file(
        &args.gold,
        None,
        &gold_options(args.repair_multi_root),
        &mut manifest,
    )?;
    let options = ReadOptions::predictions();
    let pred_a = read_treebank_file(&args.pred_a, None, &options, &mut manifest)?;
    let pred_b = read_treebank_file(&args.pred_b, None, &options, &mut manifest)?;
    let report_a = score(&gold, &pred_a, args.exclude_punct)?;
    let report_b = score(&gold, &pred_b, args.exclude_punct)?;
    let result = randomized_comparator(
        &report_a,
        &report_b,
        metric_from(args.metric),
        args.iterations,
        args.seed,
    )?;
    let tsv = format!(
        "{}\n{}\n",
        crate::eval::SignificanceResult::tsv_header(),
        result.to_tsv_row()
    );
    write_atomic(&args.out, &tsv)?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!(
        "{} {:.2} vs {:.2}, p = {:.6} ({})",
        result.metric.name(),
        result.score_a,
        result.score_b,
        result.p_value,
        if result.exact {
            "exact".to_string()
        } else {
            format!("{} shuffles", result.shuffles)
        }
    );
    Ok(())
}

fn parse_pvalues(path: &Path, text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let p: f64 = line.parse().map_err(|_| {
            Error::data(format!(
                "{}: line {}: not a p-value: '{}'",
                path.display(),
                i + 1,
                line
            ))
        })?;
        out.push(p);
    }
    if out.is_empty() {
        return Err(Error::data(format!(
            "{}: no p-values found",
            path.display()
        )));
    }
    Ok(out)
}

fn run_bh(args: BhArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("bh", raw);
    let text = read_text(&args.pvalues)?;
    manifest.record_input(&args.pvalues, text.as_bytes());
    let p_values = parse_pvalues(&args.pvalues, &text)?;
    let rejected = benjamini_hochberg(&p_values, args.q)?;
    let mut tsv = String::from("index\tp-value\trejected\n");
    for (i, p) in p_values.iter().enumerate() {
        let _ = writeln!(tsv, "{i}\t{p}\t{}", rejected.contains(&i));
    }
    write_atomic(&args.out, &tsv)?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!(
        "rejected {} of {} hypotheses at q = {}",
        rejected.len(),
        p_values.len(),
        args.q
    );
    Ok(())
}

fn run_tag_train(args: TagTrainArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("tag-train", raw);
    manifest.seed = Some(args.seed);
    let options = gold_options(args.repair_multi_root);
    let train = read_treebank_file(&args.train, None, &options, &mut manifest)?;
    let dev = read_treebank_file(&args.dev, None, &options, &mut manifest)?;
    let params = TaggerParams {
        epochs: args.epochs,
        seed: args.seed,
        shuffle: true,
    };
    let model = train_tagger(&train, &dev, column_from(args.column), &params)?;
    let meta = model.metadata();
    write_atomic(&args.out, &model.save()?)?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!(
        "trained {} tagger, dev accuracy {:.2} at epoch {}",
        model.column().name(),
        100.0 * meta.dev_correct as f64 / meta.dev_tokens as f64,
        meta.chosen_epoch
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

/// Turns whitespace-tokenized plain text into a treebank skeleton whose
/// syntax columns are placeholders.
fn skeleton_from_text(path: &Path, text: &str) -> Result<Treebank> {
    use crate::conll::{Sentence, Token};
    let mut sentences = Vec::new();
    for line in text.lines() {
        let forms: Vec<&str> = line.split_whitespace().collect();
        if forms.is_empty() {
            continue;
        }
        let tokens = forms
            .iter()
            .enumerate()
            .map(|(i, form)| Token::new(i + 1, *form, "", "", 0, ""))
            .collect();
        sentences.push(Sentence::new(tokens, None));
    }
    if sentences.is_empty() {
        return Err(Error::data(format!(
            "{}: no sentences found",
            path.display()
        )));
    }
    Ok(Treebank::new(sentences, path.display().to_string()))
}

fn run_tag(args: TagArgs, raw: &[String]) -> RunResult {
    let mut manifest = Manifest::new("tag", raw);
    let model_text = read_text(&args.model)?;
    manifest.record_input(&args.model, model_text.as_bytes());
    let model = TaggerModel::load(&model_text).map_err(|e| at_path(&args.model, e))?;
    let text = read_text(&args.input)?;
    manifest.record_input(&args.input, text.as_bytes());
    let skeleton = skeleton_from_text(&args.input, &text)?;
    let tagged = model.retag(&skeleton)?;
    write_atomic(&args.out, &write_treebank(&tagged))?;
    manifest.record_output(&args.out);
    manifest.write_beside(&args.out)?;
    println!(
        "tagged {} sentences into {}",
        tagged.len(),
        args.out.display()
    );
    Ok(())
}

fn grid_summary_tsv(summary: &GridSummary, q: f64) -> String {
    let mut out = String::from("key\tvalue\n");
    let _ = writeln!(out, "pairs\t{}", summary.pairs);
    let _ = writeln!(out, "q\t{q}");
    let _ = writeln!(out, "las-improved\t{}", summary.las_improved);
    let _ = writeln!(out, "las-significant\t{}", summary.las_significant);
    let _ = writeln!(out, "las-bh-rejected\t{}", summary.las_bh_rejected);
    let _ = writeln!(out, "uas-improved\t{}", summary.uas_improved);
    let _ = writeln!(out, "uas-significant\t{}", summary.uas_significant);
    let _ = writeln!(out, "uas-bh-rejected\t{}", summary.uas_bh_rejected);
    out
}

fn discover_grid_corpora(dir: &Path) -> Result<Vec<(String, PathBuf, PathBuf, PathBuf)>> {
    let entries = fs::read_dir(dir)
        .map_err(|e| Error::data(format!("cannot read directory {}: {e}", dir.display())))?;
    let mut codes = Vec::new();
    for entry in entries {
        let entry =
            entry.map_err(|e| Error::data(format!("cannot read {}: {e}", dir.display())))?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(code) = name.strip_suffix("-train.conll") {
            codes.push(code.to_string());
        }
    }
    codes.sort();
    if codes.len() < 2 {
        return Err(Error::data(format!(
            "{}: a grid needs at least two languages with <lang>-train.conll files, found {}",
            dir.display(),
            codes.len()
        )));
    }
    let mut out = Vec::new();
    for code in codes {
        let triple = (
            dir.join(format!("{code}-train.conll")),
            dir.join(format!("{code}-dev.conll")),
            dir.join(format!("{code}-test.conll")),
        );
        for path in [&triple.1, &triple.2] {
            if !path.is_file() {
                return Err(Error::data(format!(
                    "language {code}: missing {}",
                    path.display()
                )));
            }
        }
        out.push((code, triple.0, triple.1, triple.2));
    }
    Ok(out)
}

fn run_grid_command(args: GridArgs, raw: &[String]) -> RunResult {
    if args.pairs != "all" {
        return Err(RunFailure::Usage(format!(
            "--pairs only supports 'all', got '{}'",
            args.pairs
        )));
    }
    let system = match args.system {
        SystemArg::ArcEager => TransitionSystem::ArcEager,
        SystemArg::ArcStandard => TransitionSystem::ArcStandard,
        SystemArg::Auto => {
            return Err(RunFailure::Usage(
                "--system auto is not supported by grid; pick arc-eager or arc-standard"
                    .to_string(),
            ))
        }
    };
    let mut manifest = Manifest::new("grid", raw);
    manifest.seed = Some(args.seed);
    let options = gold_options(args.repair_multi_root);
    let mut corpora = Vec::new();
    for (lang, train_path, dev_path, test_path) in discover_grid_corpora(&args.treebanks)? {
        corpora.push(LanguageCorpus {
            train: read_treebank_file(&train_path, Some(&lang), &options, &mut manifest)?,
            dev: read_treebank_file(&dev_path, Some(&lang), &options, &mut manifest)?,
            test: read_treebank_file(&test_path, Some(&lang), &options, &mut manifest)?,
            lang,
        });
    }
    let params = GridParams {
        system,
        tag_config: tag_config_from(args.tags, args.prefix_lang),
        epochs: args.epochs,
        seed: args.seed,
        iterations: args.iterations,
        jobs: args.jobs,
        exclude_punct: args.exclude_punct,
    };
    let report = run_grid(&corpora, &params)?;
    let summary = report.summary(args.q)?;

    let text_path = args.out_dir.join("grid.txt");
    let tsv_path = args.out_dir.join("grid.tsv");
    let summary_path = args.out_dir.join("summary.tsv");
    write_atomic(&text_path, &report.to_text())?;
    write_atomic(&tsv_path, &report.to_tsv())?;
    write_atomic(&summary_path, &grid_summary_tsv(&summary, args.q))?;
    manifest.record_output(&text_path);
    manifest.record_output(&tsv_path);
    manifest.record_output(&summary_path);
    write_atomic(&args.out_dir.join("grid.manifest.tsv"), &manifest.render())?;
    print!("{}", report.to_text());
    println!(
        "significant LAS gains after correction: {} of {} pairs",
        summary.las_bh_rejected, summary.pairs
    );
    Ok(())
}

fn parse_manifest(path: &Path, text: &str) -> Result<(Vec<String>, Option<String>, Vec<(String, String)>)> {
    let mut lines = text.lines();
    if lines.next() != Some("key\tvalue") {
        return Err(Error::data(format!(
            "{}: not a manifest (missing key/value header)",
            path.display()
        )));
    }
    let mut argv: Vec<(usize, String)> = Vec::new();
    let mut seed = None;
    let mut inputs = Vec::new();
    for (i, line) in lines.enumerate() {
        let Some((key, value)) = line.split_once('\t') else {
            return Err(Error::data(format!(
                "{}: line {}: expected key<TAB>value",
                path.display(),
                i + 2
            )));
        };
        if let Some(index) = key.strip_prefix("argv.") {
            let index: usize = index.parse().map_err(|_| {
                Error::data(format!(
                    "{}: line {}: bad argv index '{index}'",
                    path.display(),
                    i + 2
                ))
            })?;
            argv.push((index, value.to_string()));
        } else if key == "seed" {
            seed = Some(value.to_string());
        } else if let Some(input) = key.strip_prefix("input.") {
            inputs.push((input.to_string(), value.to_string()));
        }
    }
    if argv.is_empty() {
        return Err(Error::data(format!(
            "{}: manifest contains no argv entries",
            path.display()
        )));
    }
    argv.sort_by_key(|(i, _)| *i);
    Ok((
        argv.into_iter().map(|(_, a)| a).collect(),
        seed,
        inputs,
    ))
}

fn run_rerun(args: RerunArgs) -> RunResult {
    let text = read_text(&args.manifest)?;
    let (stored_argv, seed, inputs) = parse_manifest(&args.manifest, &text)?;

    for (input, recorded) in &inputs {
        let path = Path::new(input);
        let bytes = fs::read(path).map_err(|e| {
            Error::data(format!("recorded input {input} cannot be read: {e}"))
        })?;
        let digest = sha256_hex(&bytes);
        if digest != *recorded {
            return Err(RunFailure::Tool(Error::data(format!(
                "input {input} changed since the manifest was written \
                 (recorded {recorded}, found {digest})"
            ))));
        }
    }

    if stored_argv.first().map(String::as_str) == Some("rerun") {
        return Err(RunFailure::Tool(Error::data(format!(
            "{}: manifests of rerun itself cannot be rerun",
            args.manifest.display()
        ))));
    }

    let mut exec_argv = stored_argv.clone();
    let has_seed_flag = stored_argv
        .iter()
        .any(|a| a == "--seed" || a.starts_with("--seed="));
    if let Some(seed) = seed {
        if !has_seed_flag {
            exec_argv.push("--seed".to_string());
            exec_argv.push(seed);
        }
    }

    let full: Vec<String> = std::iter::once("treelace".to_string())
        .chain(exec_argv.iter().cloned())
        .collect();
    let cli = Cli::try_parse_from(&full).map_err(|e| {
        RunFailure::Tool(Error::data(format!(
            "{}: stored arguments do not parse: {e}",
            args.manifest.display()
        )))
    })?;
    dispatch(cli.command, &stored_argv)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trips_through_parser() {
        let argv = vec![
            "train".to_string(),
            "--train".to_string(),
            "a.conll".to_string(),
        ];
        let mut manifest = Manifest::new("train", &argv);
        manifest.record_input(Path::new("a.conll"), b"content");
        manifest.seed = Some(42);
        manifest.record_output(Path::new("out.model"));
        let rendered = manifest.render();
        assert!(rendered.starts_with("key\tvalue\n"));
        assert!(rendered.contains("subcommand\ttrain\n"));
        assert!(rendered.contains("argv.0\ttrain\n"));
        assert!(rendered.contains("seed\t42\n"));
        assert!(rendered.contains("output\tout.model\n"));
        assert!(!rendered.to_lowercase().contains("time"));

        let (argv_back, seed, inputs) =
            parse_manifest(Path::new("m.tsv"), &rendered).unwrap();
        assert_eq!(argv_back, argv);
        assert_eq!(seed.as_deref(), Some("42"));
        assert_eq!(inputs.len(), 1);
        assert_eq!(inputs[0].0, "a.conll");
        assert_eq!(inputs[0].1, sha256_hex(b"content"));
    }

    #[test]
    fn manifest_rejects_foreign_text() {
        assert!(parse_manifest(Path::new("m"), "not a manifest").is_err());
        assert!(parse_manifest(Path::new("m"), "key\tvalue\nbroken line").is_err());
        assert!(parse_manifest(Path::new("m"), "key\tvalue\nseed\t1\n").is_err());
    }

    #[test]
    fn sha256_matches_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn skeleton_splits_on_whitespace() {
        let tb = skeleton_from_text(Path::new("t"), "la kata runti\n\nle doma  kanti\n").unwrap();
        assert_eq!(tb.len(), 2);
        assert_eq!(tb.sentences[0].tokens[2].form, "runti");
        assert_eq!(tb.sentences[1].tokens.len(), 3);
        assert!(skeleton_from_text(Path::new("t"), "\n\n").is_err());
    }

    #[test]
    fn exit_codes_partition_the_error_space() {
        assert_eq!(RunFailure::Usage("x".into()).code(), EXIT_USAGE);
        assert_eq!(
            RunFailure::Tool(Error::data("x")).code(),
            EXIT_DATA
        );
        assert_eq!(
            RunFailure::Tool(Error::internal("x")).code(),
            EXIT_INTERNAL
        );
    }
}
