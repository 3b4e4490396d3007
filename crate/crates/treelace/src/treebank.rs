//! Operations on harmonized treebanks: merging several languages into one
//! training set, switching between coarse and fine tag inventories,
//! language-prefixing tags, measuring tagset overlap, and projectivizing
//! trees for transition systems that cannot produce crossing arcs.

use std::collections::BTreeSet;

use crate::conll::{Sentence, Treebank};
use crate::error::{Error, Result};

/// Which part-of-speech inventory the parser should see.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TagMode {
    /// Keep each treebank's own fine-grained POSTAG column.
    TreebankDependent,
    /// Overwrite POSTAG with CPOSTAG so only the shared coarse inventory
    /// remains. This removes fine distinctions but also removes accidental
    /// tag collisions between treebanks.
    UniversalOnly,
}

impl TagMode {
    pub fn name(&self) -> &'static str {
        match self {
            TagMode::TreebankDependent => "treebank-dependent",
            TagMode::UniversalOnly => "universal-only",
        }
    }

    pub fn parse(text: &str) -> Option<TagMode> {
        match text {
            "treebank-dependent" | "fine" => Some(TagMode::TreebankDependent),
            "universal-only" | "universal" => Some(TagMode::UniversalOnly),
            _ => None,
        }
    }
}

/// A tag configuration: the inventory choice plus optional language
/// prefixing, which rewrites every tag `T` of a sentence in language `l`
/// to `l_T` so that identical tag strings from different treebanks stop
/// sharing parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TagConfig {
    pub mode: TagMode,
    pub prefix_language: bool,
}

impl TagConfig {
    pub fn treebank_dependent() -> Self {
        TagConfig {
            mode: TagMode::TreebankDependent,
            prefix_language: false,
        }
    }

    pub fn universal() -> Self {
        TagConfig {
            mode: TagMode::UniversalOnly,
            prefix_language: false,
        }
    }

    pub fn with_prefixing(mut self) -> Self {
        self.prefix_language = true;
        self
    }
}

/// Concatenates per-language treebanks into one, attaching the language
/// code to every sentence. Parts are kept in the given order; sentence
/// order within a part is preserved.
pub fn merge_treebanks(parts: Vec<(String, Treebank)>) -> Result<Treebank> {
    if parts.is_empty() {
        return Err(Error::data("cannot merge an empty list of treebanks"));
    }
    let source = parts
        .iter()
        .map(|(lang, _)| lang.as_str())
        .collect::<Vec<_>>()
        .join("+");
    let mut sentences = Vec::new();
    for (lang, tb) in parts {
        if lang.is_empty() {
            return Err(Error::data("merge requires a non-empty language code per part"));
        }
        for mut s in tb.sentences {
            s.lang = Some(lang.clone());
            sentences.push(s);
        }
    }
    Ok(Treebank::new(sentences, source))
}

fn prefix_tag(tag: &str, lang: &str) -> String {
    if tag.is_empty() {
        return String::new();
    }
    let marker = format!("{lang}_");
    if tag.starts_with(&marker) {
        tag.to_string()
    } else {
        format!("{marker}{tag}")
    }
}

/// Applies a tag configuration, returning a rewritten copy.
///
/// Under [`TagMode::UniversalOnly`] the POSTAG column is overwritten with
/// CPOSTAG. With `prefix_language` set, both tag columns are prefixed with
/// the sentence's language code and an underscore; a tag that already
/// carries the prefix is left alone, so the operation is idempotent.
/// Prefixing a sentence with no language code is an error.
pub fn apply_tag_config(treebank: &Treebank, config: &TagConfig) -> Result<Treebank> {
    let mut out = treebank.clone();
    for (i, sentence) in out.sentences.iter_mut().enumerate() {
        if config.mode == TagMode::UniversalOnly {
            for t in sentence.tokens.iter_mut() {
                t.postag = t.cpostag.clone();
            }
        }
        if config.prefix_language {
            let lang = sentence.lang.clone().ok_or_else(|| {
                Error::data(format!(
                    "sentence {} has no language code; prefixing requires one",
                    i + 1
                ))
            })?;
            for t in sentence.tokens.iter_mut() {
                t.cpostag = prefix_tag(&t.cpostag, &lang);
                t.postag = prefix_tag(&t.postag, &lang);
            }
        }
    }
    Ok(out)
}

/// How many fine tags each pair of treebanks shares, along with each
/// treebank's own tagset size on the diagonal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SharedTagMatrix {
    pub languages: Vec<String>,
    /// `counts[i][j]` is the number of POSTAG values seen in both language
    /// `i` and language `j`; `counts[i][i]` is the tagset size of `i`.
    pub counts: Vec<Vec<usize>>,
}

impl SharedTagMatrix {
    /// Renders the matrix as a tab-separated table with a header row.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("lang");
        for l in &self.languages {
            out.push('\t');
            out.push_str(l);
        }
        out.push('\n');
        for (i, l) in self.languages.iter().enumerate() {
            out.push_str(l);
            for j in 0..self.languages.len() {
                out.push('\t');
                out.push_str(&self.counts[i][j].to_string());
            }
            out.push('\n');
        }
        out
    }
}

/// Computes the pairwise overlap of fine (POSTAG) inventories.
///
/// Useful before merging: inventories that overlap on tags with different
/// meanings are the main argument for prefixing or for the universal-only
/// mode.
pub fn shared_tag_report(parts: &[(String, Treebank)]) -> Result<SharedTagMatrix> {
    if parts.len() < 2 {
        return Err(Error::data("tag overlap needs at least two treebanks"));
    }
    let mut tagsets: Vec<BTreeSet<&str>> = Vec::with_capacity(parts.len());
    for (_, tb) in parts {
        let mut set = BTreeSet::new();
        for s in &tb.sentences {
            for t in &s.tokens {
                set.insert(t.postag.as_str());
            }
        }
        tagsets.push(set);
    }
    let languages: Vec<String> = parts.iter().map(|(l, _)| l.clone()).collect();
    let n = parts.len();
    let mut counts = vec![vec![0usize; n]; n];
    for i in 0..n {
        for j in 0..n {
            counts[i][j] = if i == j {
                tagsets[i].len()
            } else {
                tagsets[i].intersection(&tagsets[j]).count()
            };
        }
    }
    Ok(SharedTagMatrix { languages, counts })
}

/// Returns true when no two arcs of the head array cross.
///
/// An arc is the unordered span between a token and its head (the root
/// arc spans from 0). Two arcs cross when exactly one endpoint of one
/// lies strictly inside the span of the other.
pub fn is_projective_heads(heads: &[usize]) -> bool {
    find_crossing(heads).is_none()
}

/// Returns true when the sentence's tree is projective.
pub fn is_projective(sentence: &Sentence) -> bool {
    is_projective_heads(&sentence.heads())
}

fn spans_cross(a: (usize, usize), b: (usize, usize)) -> bool {
    let (a1, a2) = (a.0.min(a.1), a.0.max(a.1));
    let (b1, b2) = (b.0.min(b.1), b.0.max(b.1));
    (a1 < b1 && b1 < a2 && a2 < b2) || (b1 < a1 && a1 < b2 && b2 < a2)
}

/// Finds one pair of crossing arcs, identified by their dependents.
fn find_crossing(heads: &[usize]) -> Option<(usize, usize)> {
    let n = heads.len();
    for d1 in 1..=n {
        for d2 in d1 + 1..=n {
            if spans_cross((heads[d1 - 1], d1), (heads[d2 - 1], d2)) {
                return Some((d1, d2));
            }
        }
    }
    None
}

/// Rewrites a tree into a projective one by lifting: while a crossing
/// exists, the dependent of a shortest crossing arc is reattached to its
/// head's head. Labels are kept. Projective input is returned unchanged.
///
/// Lifts that would attach a new child to the artificial root are only
/// taken when no other crossing arc can be lifted, so a single-rooted
/// input stays single-rooted.
pub fn projectivize(sentence: &Sentence) -> Sentence {
    let mut heads = sentence.heads();
    let n = heads.len();
    loop {
        // Collect dependents of crossing arcs.
        let mut crossing = BTreeSet::new();
        for d1 in 1..=n {
            for d2 in d1 + 1..=n {
                if spans_cross((heads[d1 - 1], d1), (heads[d2 - 1], d2)) {
                    crossing.insert(d1);
                    crossing.insert(d2);
                }
            }
        }
        if crossing.is_empty() {
            break;
        }
        // Prefer arcs whose lift target is a real token; among those, the
        // shortest arc, breaking ties on the smaller dependent id.
        let pick = |safe_only: bool| -> Option<usize> {
            crossing
                .iter()
                .copied()
                .filter(|&d| {
                    let h = heads[d - 1];
                    h != 0 && (!safe_only || heads[h - 1] != 0)
                })
                .min_by_key(|&d| {
                    let h = heads[d - 1];
                    (h.abs_diff(d), d)
                })
        };
        let Some(d) = pick(true).or_else(|| pick(false)) else {
            // Every crossing arc hangs off the root; impossible for valid
            // trees because root arcs share an endpoint and cannot cross.
            break;
        };
        heads[d - 1] = heads[heads[d - 1] - 1];
    }
    let mut out = sentence.clone();
    for (i, t) in out.tokens.iter_mut().enumerate() {
        t.head = heads[i];
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::{is_single_tree, Token};
    use proptest::prelude::*;

    fn toy_sentence(lang: Option<&str>, specs: &[(&str, &str, &str, usize, &str)]) -> Sentence {
        let tokens = specs
            .iter()
            .enumerate()
            .map(|(i, (form, cpos, pos, head, rel))| {
                Token::new(i + 1, *form, *cpos, *pos, *head, *rel)
            })
            .collect();
        Sentence::new(tokens, lang.map(str::to_string))
    }

    fn bank(lang: &str, pos_tags: &[&str]) -> Treebank {
        let specs: Vec<(&str, &str, &str, usize, &str)> = pos_tags
            .iter()
            .map(|p| ("w", "X", *p, 0, "root"))
            .collect();
        let sentences = specs
            .iter()
            .map(|spec| toy_sentence(None, &[*spec]))
            .collect();
        Treebank::new(sentences, lang)
    }

    #[test]
    fn merge_tags_sentences_with_languages() {
        let a = bank("aa", &["na", "va"]);
        let b = bank("bb", &["nb"]);
        let merged = merge_treebanks(vec![("aa".into(), a), ("bb".into(), b)]).unwrap();
        assert_eq!(merged.len(), 3);
        assert_eq!(merged.source, "aa+bb");
        assert_eq!(merged.sentences[0].lang.as_deref(), Some("aa"));
        assert_eq!(merged.sentences[2].lang.as_deref(), Some("bb"));
    }

    #[test]
    fn merge_rejects_empty_input() {
        assert!(merge_treebanks(vec![]).is_err());
    }

    #[test]
    fn universal_mode_copies_coarse_over_fine() {
        let s = toy_sentence(Some("en"), &[("dog", "NOUN", "NN", 0, "root")]);
        let tb = Treebank::new(vec![s], "en");
        let out = apply_tag_config(&tb, &TagConfig::universal()).unwrap();
        assert_eq!(out.sentences[0].tokens[0].postag, "NOUN");
        assert_eq!(out.sentences[0].tokens[0].cpostag, "NOUN");
    }

    #[test]
    fn prefixing_is_idempotent() {
        let s = toy_sentence(Some("en"), &[("dog", "NOUN", "NN", 0, "root")]);
        let tb = Treebank::new(vec![s], "en");
        let cfg = TagConfig::treebank_dependent().with_prefixing();
        let once = apply_tag_config(&tb, &cfg).unwrap();
        assert_eq!(once.sentences[0].tokens[0].postag, "en_NN");
        assert_eq!(once.sentences[0].tokens[0].cpostag, "en_NOUN");
        let twice = apply_tag_config(&once, &cfg).unwrap();
        assert_eq!(twice, once);
    }

    #[test]
    fn prefixing_without_language_fails() {
        let s = toy_sentence(None, &[("dog", "NOUN", "NN", 0, "root")]);
        let tb = Treebank::new(vec![s], "");
        let cfg = TagConfig::universal().with_prefixing();
        assert!(apply_tag_config(&tb, &cfg).is_err());
    }

    #[test]
    fn tag_config_transforms_compose() {
        let s = toy_sentence(Some("en"), &[("dog", "NOUN", "NN", 0, "root")]);
        let tb = Treebank::new(vec![s], "en");
        let cfg = TagConfig::universal().with_prefixing();
        let out = apply_tag_config(&tb, &cfg).unwrap();
        assert_eq!(out.sentences[0].tokens[0].postag, "en_NOUN");
    }

    #[test]
    fn shared_tags_counts_intersections() {
        let a = bank("aa", &["N", "V", "D"]);
        let b = bank("bb", &["N", "V", "P", "Q"]);
        let m = shared_tag_report(&[("aa".into(), a), ("bb".into(), b)]).unwrap();
        assert_eq!(m.counts[0][0], 3);
        assert_eq!(m.counts[1][1], 4);
        assert_eq!(m.counts[0][1], 2);
        assert_eq!(m.counts[1][0], 2);
        let tsv = m.to_tsv();
        assert!(tsv.starts_with("lang\taa\tbb\n"));
    }

    #[test]
    fn projectivity_detection() {
        assert!(is_projective_heads(&[2, 0, 2]));
        assert!(is_projective_heads(&[0, 1, 1]));
        // Arc 2->4 crosses arc 0->3.
        assert!(!is_projective_heads(&[3, 4, 0, 3]));
        assert!(is_projective_heads(&[]));
    }

    #[test]
    fn projectivize_lifts_crossing_dependent() {
        let s = toy_sentence(
            None,
            &[
                ("a", "X", "x", 3, "d1"),
                ("b", "X", "x", 4, "d2"),
                ("c", "X", "x", 0, "root"),
                ("d", "X", "x", 3, "d4"),
            ],
        );
        let p = projectivize(&s);
        assert_eq!(p.heads(), vec![3, 3, 0, 3]);
        assert_eq!(p.labels(), vec!["d1", "d2", "root", "d4"]);
        assert!(is_projective(&p));
    }

    #[test]
    fn projectivize_keeps_projective_input() {
        let s = toy_sentence(
            None,
            &[("a", "X", "x", 2, "det"), ("b", "X", "x", 0, "root")],
        );
        assert_eq!(projectivize(&s).heads(), s.heads());
    }

    fn arb_tree(max: usize) -> impl Strategy<Value = Vec<usize>> {
        (1usize..max)
            .prop_flat_map(|n| proptest::collection::vec(0usize..n + 1, n))
            .prop_filter("single tree", |heads| {
                is_single_tree(heads) && heads.iter().enumerate().all(|(i, &h)| h != i + 1)
            })
    }

    proptest! {
        #[test]
        fn projectivize_yields_projective_tree(heads in arb_tree(10)) {
            let tokens: Vec<Token> = heads
                .iter()
                .enumerate()
                .map(|(i, &h)| Token::new(i + 1, format!("w{i}"), "X", "x", h, "dep"))
                .collect();
            let s = Sentence::new(tokens, None);
            let p = projectivize(&s);
            prop_assert!(is_projective(&p));
            prop_assert!(is_single_tree(&p.heads()));
            let roots_in = heads.iter().filter(|&&h| h == 0).count();
            let roots_out = p.heads().iter().filter(|&&h| h == 0).count();
            if roots_in == 1 {
                prop_assert_eq!(roots_out, 1);
            }
        }
    }
}
