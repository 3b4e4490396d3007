//! Reading and writing dependency treebanks in the ten-column CoNLL format.
//!
//! A token line carries `ID FORM LEMMA CPOSTAG POSTAG FEATS HEAD DEPREL
//! PHEAD PDEPREL`, separated by tabs; sentences are separated by blank
//! lines. The projective head columns (PHEAD, PDEPREL) are accepted on
//! input and always written back as `_`.

use crate::error::{Error, Result};

/// Value written for an empty optional column.
const EMPTY: &str = "_";

/// One token of a sentence.
///
/// `lemma`, `feats` and `deprel` use the empty string where the file had
/// `_`; `form`, `cpostag` and `postag` are kept verbatim. `head` is the
/// 1-based id of the head token, or 0 for the artificial root.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub id: usize,
    pub form: String,
    pub lemma: String,
    pub cpostag: String,
    pub postag: String,
    pub feats: String,
    pub head: usize,
    pub deprel: String,
}

impl Token {
    /// Builds a fully annotated token.
    pub fn new(
        id: usize,
        form: impl Into<String>,
        cpostag: impl Into<String>,
        postag: impl Into<String>,
        head: usize,
        deprel: impl Into<String>,
    ) -> Self {
        Token {
            id,
            form: form.into(),
            lemma: String::new(),
            cpostag: cpostag.into(),
            postag: postag.into(),
            feats: String::new(),
            head,
            deprel: deprel.into(),
        }
    }
}

/// A sentence: tokens with ids `1..=len`, plus an optional language code
/// attached when the source treebank is known.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Sentence {
    pub tokens: Vec<Token>,
    pub lang: Option<String>,
}

impl Sentence {
    pub fn new(tokens: Vec<Token>, lang: Option<String>) -> Self {
        Sentence { tokens, lang }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Head ids indexed by dependent: element `i` is the head of token
    /// `i + 1`.
    pub fn heads(&self) -> Vec<usize> {
        self.tokens.iter().map(|t| t.head).collect()
    }

    /// Dependency labels in token order.
    pub fn labels(&self) -> Vec<&str> {
        self.tokens.iter().map(|t| t.deprel.as_str()).collect()
    }

    /// Checks ids are consecutive from 1, heads are in range and the head
    /// arcs form a single tree rooted at the artificial node 0.
    pub fn validate(&self) -> Result<()> {
        let n = self.len();
        for (i, t) in self.tokens.iter().enumerate() {
            if t.id != i + 1 {
                return Err(Error::data(format!(
                    "token id {} out of sequence (expected {})",
                    t.id,
                    i + 1
                )));
            }
            if t.head > n {
                return Err(Error::data(format!(
                    "head {} out of range for sentence of length {}",
                    t.head, n
                )));
            }
            if t.head == t.id {
                return Err(Error::data(format!("token {} is its own head", t.id)));
            }
        }
        if !is_single_tree(&self.heads()) {
            return Err(Error::data("head arcs contain a cycle".to_string()));
        }
        Ok(())
    }
}

/// Returns true when the head array describes a forest of arcs that all
/// reach node 0, i.e. a single tree over `{0, 1, ..., n}`.
///
/// `heads[i]` is the head of token `i + 1`; values must already be within
/// `0..=n`. Multiple children of node 0 are allowed.
pub fn is_single_tree(heads: &[usize]) -> bool {
    let n = heads.len();
    if heads.iter().any(|&h| h > n) {
        return false;
    }
    // 0 = unvisited, 1 = on the current chain, 2 = known to reach the root.
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut chain = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            chain.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            return false;
        }
        for v in chain {
            state[v] = 2;
        }
    }
    true
}

/// What to do with a sentence whose head array has several children of the
/// artificial root.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MultiRoot {
    /// Report an error. The right choice for gold training data.
    #[default]
    Reject,
    /// Reattach every root child after the first to the first one.
    Repair,
    /// Keep the sentence as is. Useful when reading parser output that is
    /// only required to be a tree, not single-rooted.
    Allow,
}

/// Options controlling how strictly token lines are interpreted.
#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    pub multi_root: MultiRoot,
    /// When set, every token must carry a numeric head and a non-empty
    /// dependency label. Disable to read unannotated or partially
    /// annotated input, where `_` heads become 0.
    pub require_annotation: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            multi_root: MultiRoot::Reject,
            require_annotation: true,
        }
    }
}

impl ReadOptions {
    /// Strict settings for gold-annotated treebanks.
    pub fn gold() -> Self {
        ReadOptions::default()
    }

    /// Settings for reading parser predictions: annotation is required but
    /// several root children are tolerated.
    pub fn predictions() -> Self {
        ReadOptions {
            multi_root: MultiRoot::Allow,
            require_annotation: true,
        }
    }

    /// Settings for raw text that has been tokenized into the CoNLL shape
    /// but carries no syntax yet.
    pub fn bare() -> Self {
        ReadOptions {
            multi_root: MultiRoot::Allow,
            require_annotation: false,
        }
    }
}

/// An ordered collection of sentences with a label describing where it
/// came from (a file name, a language code, or a synthetic source).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Treebank {
    pub sentences: Vec<Sentence>,
    pub source: String,
}

impl Treebank {
    pub fn new(sentences: Vec<Sentence>, source: impl Into<String>) -> Self {
        Treebank {
            sentences,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn token_count(&self) -> usize {
        self.sentences.iter().map(Sentence::len).sum()
    }
}

fn empty_to_blank(field: &str) -> String {
    if field == EMPTY {
        String::new()
    } else {
        field.to_string()
    }
}

struct PendingToken {
    token: Token,
    line: usize,
}

fn finish_sentence(
    pending: Vec<PendingToken>,
    lang: Option<&str>,
    options: &ReadOptions,
) -> Result<Sentence> {
    let n = pending.len();
    for p in &pending {
        if p.token.head > n {
            return Err(Error::conll(
                p.line,
                format!(
                    "head {} out of range for sentence of length {}",
                    p.token.head, n
                ),
            ));
        }
    }
    let mut tokens: Vec<Token> = pending.iter().map(|p| p.token.clone()).collect();
    let lines: Vec<usize> = pending.iter().map(|p| p.line).collect();

    if options.require_annotation {
        let heads: Vec<usize> = tokens.iter().map(|t| t.head).collect();
        if let Some(bad) = first_cycle_member(&heads) {
            return Err(Error::conll(lines[bad - 1], "head arcs contain a cycle"));
        }
        let roots: Vec<usize> = tokens.iter().filter(|t| t.head == 0).map(|t| t.id).collect();
        if roots.len() > 1 {
            match options.multi_root {
                MultiRoot::Reject => {
                    return Err(Error::conll(
                        lines[roots[1] - 1],
                        format!("sentence has {} root tokens; expected exactly 1", roots.len()),
                    ));
                }
                MultiRoot::Repair => {
                    let keep = roots[0];
                    for t in tokens.iter_mut() {
                        if t.head == 0 && t.id != keep {
                            t.head = keep;
                        }
                    }
                }
                MultiRoot::Allow => {}
            }
        }
    }

    Ok(Sentence::new(tokens, lang.map(str::to_string)))
}

/// Returns the smallest token id that lies on a head cycle, if any.
fn first_cycle_member(heads: &[usize]) -> Option<usize> {
    let n = heads.len();
    let mut state = vec![0u8; n + 1];
    state[0] = 2;
    for start in 1..=n {
        if state[start] != 0 {
            continue;
        }
        let mut chain = Vec::new();
        let mut node = start;
        while state[node] == 0 {
            state[node] = 1;
            chain.push(node);
            node = heads[node - 1];
        }
        if state[node] == 1 {
            let pos = chain.iter().position(|&c| c == node).unwrap();
            return chain[pos..].iter().copied().min();
        }
        for v in chain {
            state[v] = 2;
        }
    }
    None
}

/// Reads a treebank with default (strict gold) options.
///
/// `lang` is attached to every sentence; pass `None` for data of unknown
/// or mixed origin.
pub fn read_treebank(text: &str, lang: Option<&str>) -> Result<Treebank> {
    read_treebank_with(text, lang, &ReadOptions::default())
}

/// Reads a treebank, reporting malformed input with 1-based line numbers.
pub fn read_treebank_with(
    text: &str,
    lang: Option<&str>,
    options: &ReadOptions,
) -> Result<Treebank> {
    let mut sentences = Vec::new();
    let mut pending: Vec<PendingToken> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !pending.is_empty() {
                sentences.push(finish_sentence(std::mem::take(&mut pending), lang, options)?);
            }
            continue;
        }
        let cols: Vec<&str> = line.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::conll(
                line_no,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| Error::conll(line_no, format!("non-integer token id '{}'", cols[0])))?;
        if id == 0 {
            return Err(Error::conll(line_no, "token id must be at least 1"));
        }
        if id != pending.len() + 1 {
            return Err(Error::conll(
                line_no,
                format!("token id {} out of sequence (expected {})", id, pending.len() + 1),
            ));
        }
        if cols[1].is_empty() {
            return Err(Error::conll(line_no, "empty form field"));
        }
        let head = if options.require_annotation {
            cols[6].parse::<usize>().map_err(|_| {
                Error::conll(line_no, format!("non-integer head '{}'", cols[6]))
            })?
        } else if cols[6] == EMPTY || cols[6].is_empty() {
            0
        } else {
            cols[6].parse::<usize>().map_err(|_| {
                Error::conll(line_no, format!("non-integer head '{}'", cols[6]))
            })?
        };
        if head == id {
            return Err(Error::conll(line_no, format!("token {id} is its own head")));
        }
        let deprel = empty_to_blank(cols[7]);
        if options.require_annotation && deprel.is_empty() {
            return Err(Error::conll(line_no, "empty dependency label"));
        }
        pending.push(PendingToken {
            token: Token {
                id,
                form: cols[1].to_string(),
                lemma: empty_to_blank(cols[2]),
                cpostag: cols[3].to_string(),
                postag: cols[4].to_string(),
                feats: empty_to_blank(cols[5]),
                head,
                deprel,
            },
            line: line_no,
        });
    }
    if !pending.is_empty() {
        sentences.push(finish_sentence(pending, lang, options)?);
    }

    Ok(Treebank::new(sentences, lang.unwrap_or_default()))
}

fn blank_to_empty(field: &str) -> &str {
    if field.is_empty() {
        EMPTY
    } else {
        field
    }
}

/// Serializes a treebank back to CoNLL text.
///
/// The output is canonical: tabs between columns, one blank line after
/// every sentence, `_` for empty optional fields, and `_` in the
/// projective head columns. Language codes are not part of the format and
/// are therefore not written.
pub fn write_treebank(treebank: &Treebank) -> String {
    let mut out = String::new();
    for sentence in &treebank.sentences {
        for t in &sentence.tokens {
            out.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                t.id,
                blank_to_empty(&t.form),
                blank_to_empty(&t.lemma),
                blank_to_empty(&t.cpostag),
                blank_to_empty(&t.postag),
                blank_to_empty(&t.feats),
                t.head,
                blank_to_empty(&t.deprel),
                EMPTY,
                EMPTY,
            ));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> &'static str {
        "1\tHe\t_\tPRON\tPRP\t_\t2\tnsubj\t_\t_\n\
         2\tsleeps\t_\tVERB\tVBZ\t_\t0\troot\t_\t_\n\
         \n\
         1\tla\t_\tDET\tdta\t_\t2\tdet\t_\t_\n\
         2\tkata\t_\tNOUN\tnna\t_\t3\tnsubj\t_\t_\n\
         3\trunti\t_\tVERB\tvba\t_\t0\troot\t_\t_\n\n"
    }

    #[test]
    fn reads_two_sentences() {
        let tb = read_treebank(sample(), Some("en")).unwrap();
        assert_eq!(tb.len(), 2);
        assert_eq!(tb.token_count(), 5);
        assert_eq!(tb.sentences[0].tokens[0].form, "He");
        assert_eq!(tb.sentences[0].tokens[0].head, 2);
        assert_eq!(tb.sentences[0].tokens[1].deprel, "root");
        assert_eq!(tb.sentences[0].lang.as_deref(), Some("en"));
        assert_eq!(tb.sentences[1].heads(), vec![2, 3, 0]);
    }

    #[test]
    fn underscore_reads_as_empty_and_writes_back() {
        let tb = read_treebank(sample(), None).unwrap();
        assert_eq!(tb.sentences[0].tokens[0].lemma, "");
        assert_eq!(tb.sentences[0].tokens[0].feats, "");
        let text = write_treebank(&tb);
        assert_eq!(text, sample());
    }

    #[test]
    fn missing_trailing_blank_line_is_fine() {
        let text = "1\ta\t_\tX\tx\t_\t0\troot\t_\t_";
        let tb = read_treebank(text, None).unwrap();
        assert_eq!(tb.len(), 1);
    }

    #[test]
    fn wrong_column_count_reports_line() {
        let text = "1\ta\t_\tX\tx\t_\t0\troot\t_\t_\n\n1\tb\t_\tX\tx\t_\t0\n";
        let err = read_treebank(text, None).unwrap_err();
        assert!(err.to_string().starts_with("line 3:"), "{err}");
        assert!(err.to_string().contains("expected 10"), "{err}");
    }

    #[test]
    fn out_of_sequence_id_is_rejected() {
        let text = "1\ta\t_\tX\tx\t_\t0\troot\t_\t_\n3\tb\t_\tX\tx\t_\t1\tdep\t_\t_\n";
        let err = read_treebank(text, None).unwrap_err();
        assert!(err.to_string().contains("out of sequence"), "{err}");
    }

    #[test]
    fn head_out_of_range_is_rejected() {
        let text = "1\ta\t_\tX\tx\t_\t5\troot\t_\t_\n";
        let err = read_treebank(text, None).unwrap_err();
        assert!(err.to_string().contains("out of range"), "{err}");
    }

    #[test]
    fn cycle_is_rejected_with_line() {
        let text = "1\ta\t_\tX\tx\t_\t2\tdep\t_\t_\n2\tb\t_\tX\tx\t_\t1\tdep\t_\t_\n";
        let err = read_treebank(text, None).unwrap_err();
        assert!(err.to_string().contains("cycle"), "{err}");
        assert!(err.to_string().starts_with("line 1:"), "{err}");
    }

    #[test]
    fn self_head_is_rejected() {
        let text = "1\ta\t_\tX\tx\t_\t1\tdep\t_\t_\n";
        let err = read_treebank(text, None).unwrap_err();
        assert!(err.to_string().contains("its own head"), "{err}");
    }

    fn multi_root_text() -> &'static str {
        "1\ta\t_\tX\tx\t_\t0\troot\t_\t_\n2\tb\t_\tX\tx\t_\t0\troot\t_\t_\n"
    }

    #[test]
    fn multi_root_policies() {
        let err = read_treebank(multi_root_text(), None).unwrap_err();
        assert!(err.to_string().contains("root tokens"), "{err}");

        let repair = ReadOptions {
            multi_root: MultiRoot::Repair,
            ..ReadOptions::default()
        };
        let tb = read_treebank_with(multi_root_text(), None, &repair).unwrap();
        assert_eq!(tb.sentences[0].heads(), vec![0, 1]);

        let tb = read_treebank_with(multi_root_text(), None, &ReadOptions::predictions()).unwrap();
        assert_eq!(tb.sentences[0].heads(), vec![0, 0]);
    }

    #[test]
    fn bare_mode_accepts_unannotated_tokens() {
        let text = "1\thello\t_\t_\t_\t_\t_\t_\t_\t_\n2\tworld\t_\t_\t_\t_\t_\t_\t_\t_\n";
        let tb = read_treebank_with(text, None, &ReadOptions::bare()).unwrap();
        assert_eq!(tb.sentences[0].heads(), vec![0, 0]);
        assert_eq!(tb.sentences[0].tokens[1].deprel, "");
    }

    #[test]
    fn strict_mode_rejects_missing_annotation() {
        let text = "1\thello\t_\t_\t_\t_\t_\t_\t_\t_\n";
        assert!(read_treebank(text, None).is_err());
    }

    #[test]
    fn empty_input_gives_empty_treebank() {
        let tb = read_treebank("", None).unwrap();
        assert!(tb.is_empty());
        assert_eq!(write_treebank(&tb), "");
    }

    #[test]
    fn single_tree_check() {
        assert!(is_single_tree(&[0]));
        assert!(is_single_tree(&[2, 0, 2]));
        assert!(is_single_tree(&[0, 1, 0]));
        assert!(!is_single_tree(&[2, 1]));
        assert!(!is_single_tree(&[2, 3, 2]));
        assert!(is_single_tree(&[]));
    }

    #[test]
    fn validate_catches_bad_sentences() {
        let good = Sentence::new(
            vec![
                Token::new(1, "a", "X", "x", 2, "dep"),
                Token::new(2, "b", "X", "x", 0, "root"),
            ],
            None,
        );
        assert!(good.validate().is_ok());

        let cyclic = Sentence::new(
            vec![
                Token::new(1, "a", "X", "x", 2, "dep"),
                Token::new(2, "b", "X", "x", 1, "dep"),
            ],
            None,
        );
        assert!(cyclic.validate().is_err());
    }

    #[test]
    fn fixture_file_round_trips_byte_identically() {
        let text = std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/testdata/fixture.conll"
        ))
        .unwrap();
        let tb = read_treebank(&text, Some("xa")).unwrap();
        assert_eq!(tb.len(), 5);
        assert_eq!(write_treebank(&tb), text);
        for s in &tb.sentences {
            s.validate().unwrap();
        }
    }

    /// Random head arrays in `0..=n` that form a single tree.
    fn arb_tree() -> impl Strategy<Value = Vec<usize>> {
        (1usize..8)
            .prop_flat_map(|n| proptest::collection::vec(0usize..n + 1, n))
            .prop_filter("tree", |heads| {
                is_single_tree(heads) && heads.iter().enumerate().all(|(i, &h)| h != i + 1)
            })
    }

    proptest! {
        #[test]
        fn round_trip_preserves_random_trees(heads in arb_tree()) {
            let tokens: Vec<Token> = heads
                .iter()
                .enumerate()
                .map(|(i, &h)| Token::new(i + 1, format!("w{}", i + 1), "X", "x", h, "dep"))
                .collect();
            let tb = Treebank::new(vec![Sentence::new(tokens, None)], "t");
            let opts = ReadOptions::predictions();
            let back = read_treebank_with(&write_treebank(&tb), None, &opts).unwrap();
            prop_assert_eq!(back.sentences[0].heads(), heads);
        }
    }
}
