//! Synthetic treebanks for tests, examples and experiments.
//!
//! Two small artificial languages share a harmonized annotation scheme
//! (coarse tags `DET`/`ADJ`/`NOUN`/`VERB`, labels `det`/`amod`/`nsubj`/
//! `dobj`/`root`) but differ in word order, fine tags and vocabulary:
//! `xa` is verb-medial, `xb` is verb-final. Their grammars never demand
//! different attachments in the same parser context, so a parser trained
//! on both can master both; their surface forms collide adversarially
//! (`xb` nouns end in `-ti` exactly like `xa` verbs), so a tagger trained
//! on one language systematically mis-tags the other.
//!
//! All generators are deterministic in the seed.

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::conll::{Sentence, Token, Treebank};

/// Word categories of the toy grammars, mapped one-to-one onto coarse
/// tags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Det,
    Adj,
    Noun,
    Verb,
}

impl Category {
    fn index(&self) -> usize {
        match self {
            Category::Det => 0,
            Category::Adj => 1,
            Category::Noun => 2,
            Category::Verb => 3,
        }
    }

    /// The coarse, language-independent tag.
    pub fn universal_tag(&self) -> &'static str {
        match self {
            Category::Det => "DET",
            Category::Adj => "ADJ",
            Category::Noun => "NOUN",
            Category::Verb => "VERB",
        }
    }
}

/// One sentence frame: per token its category, gold head (0 is the root)
/// and gold label.
pub type Frame = &'static [(Category, usize, &'static str)];

/// A toy language: vocabulary, fine tags and sentence frames.
#[derive(Debug, Clone)]
pub struct ToyLanguage {
    pub code: &'static str,
    words: [&'static [&'static str]; 4],
    fine_tags: [&'static str; 4],
    frames: Vec<Frame>,
}

impl ToyLanguage {
    /// The fine (treebank-dependent) tag of a category in this language.
    pub fn fine_tag(&self, category: Category) -> &'static str {
        self.fine_tags[category.index()]
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }
}

use Category::{Adj, Det, Noun, Verb};

/// Verb-medial language `xa`: subject before the verb, object after.
pub fn toy_language_a() -> ToyLanguage {
    ToyLanguage {
        code: "xa",
        words: [
            &["la", "le"],
            &["bonosa", "mirosa", "velosa"],
            &["kata", "doma", "riva", "luna", "vosa", "pela"],
            &["runti", "kanti", "salti", "vidti", "dormti"],
        ],
        fine_tags: ["dta", "aja", "nna", "vba"],
        frames: vec![
            &[(Det, 2, "det"), (Noun, 3, "nsubj"), (Verb, 0, "root")],
            &[
                (Det, 2, "det"),
                (Noun, 3, "nsubj"),
                (Verb, 0, "root"),
                (Det, 5, "det"),
                (Noun, 3, "dobj"),
            ],
            &[
                (Det, 3, "det"),
                (Adj, 3, "amod"),
                (Noun, 4, "nsubj"),
                (Verb, 0, "root"),
            ],
            &[
                (Det, 2, "det"),
                (Noun, 3, "nsubj"),
                (Verb, 0, "root"),
                (Det, 6, "det"),
                (Adj, 6, "amod"),
                (Noun, 3, "dobj"),
            ],
            &[(Noun, 2, "nsubj"), (Verb, 0, "root")],
            &[
                (Noun, 2, "nsubj"),
                (Verb, 0, "root"),
                (Det, 4, "det"),
                (Noun, 2, "dobj"),
            ],
        ],
    }
}

/// Verb-final language `xb`: both arguments precede the verb. Its nouns
/// end in `-ti`, the verb ending of `xa`.
pub fn toy_language_b() -> ToyLanguage {
    ToyLanguage {
        code: "xb",
        words: [
            &["po", "pa"],
            &["naruki", "seliki", "moruki"],
            &["kamuti", "dovati", "rinuti", "lesuti", "baruti", "seluti"],
            &["zuramu", "bokomu", "tirimu", "kelamu", "vorimu"],
        ],
        fine_tags: ["dtb", "ajb", "nnb", "vbb"],
        frames: vec![
            &[(Det, 2, "det"), (Noun, 3, "nsubj"), (Verb, 0, "root")],
            &[
                (Det, 2, "det"),
                (Noun, 5, "nsubj"),
                (Det, 4, "det"),
                (Noun, 5, "dobj"),
                (Verb, 0, "root"),
            ],
            &[
                (Det, 3, "det"),
                (Adj, 3, "amod"),
                (Noun, 4, "nsubj"),
                (Verb, 0, "root"),
            ],
            &[
                (Det, 2, "det"),
                (Noun, 6, "nsubj"),
                (Det, 5, "det"),
                (Adj, 5, "amod"),
                (Noun, 6, "dobj"),
                (Verb, 0, "root"),
            ],
            &[(Noun, 2, "nsubj"), (Verb, 0, "root")],
            &[(Noun, 3, "nsubj"), (Noun, 3, "dobj"), (Verb, 0, "root")],
        ],
    }
}

fn realize_token(
    id: usize,
    category: Category,
    head: usize,
    deprel: &str,
    source: &ToyLanguage,
    rng: &mut ChaCha8Rng,
) -> Token {
    let form = *source.words[category.index()]
        .choose(rng)
        .expect("toy lexicons are non-empty");
    Token::new(
        id,
        form,
        category.universal_tag(),
        source.fine_tag(category),
        head,
        deprel,
    )
}

/// Generates `n` monolingual sentences.
pub fn generate(language: &ToyLanguage, n: usize, seed: u64) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(n);
    for _ in 0..n {
        let frame = *language
            .frames
            .choose(&mut rng)
            .expect("toy grammars have frames");
        let tokens = frame
            .iter()
            .enumerate()
            .map(|(i, &(category, head, deprel))| {
                realize_token(i + 1, category, head, deprel, language, &mut rng)
            })
            .collect();
        sentences.push(Sentence::new(tokens, Some(language.code.to_string())));
    }
    Treebank::new(sentences, language.code)
}

/// Generates `n` code-switched sentences: each takes its frame from one
/// language and fills every slot from either lexicon with equal
/// probability, the way bilingual speakers mix within a sentence. Fine
/// tags follow the word's source language; sentences carry no single
/// language code.
pub fn generate_code_switched(
    a: &ToyLanguage,
    b: &ToyLanguage,
    n: usize,
    seed: u64,
) -> Treebank {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sentences = Vec::with_capacity(n);
    for _ in 0..n {
        let frame_lang = if rng.gen_bool(0.5) { a } else { b };
        let frame = *frame_lang
            .frames
            .choose(&mut rng)
            .expect("toy grammars have frames");
        let tokens = frame
            .iter()
            .enumerate()
            .map(|(i, &(category, head, deprel))| {
                let source = if rng.gen_bool(0.5) { a } else { b };
                realize_token(i + 1, category, head, deprel, source, &mut rng)
            })
            .collect();
        sentences.push(Sentence::new(tokens, None));
    }
    Treebank::new(sentences, format!("{}-{}", a.code, b.code))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::is_projective;

    #[test]
    fn generated_sentences_are_valid_projective_trees() {
        for lang in [toy_language_a(), toy_language_b()] {
            let tb = generate(&lang, 100, 3);
            assert_eq!(tb.len(), 100);
            for s in &tb.sentences {
                s.validate().unwrap();
                assert!(is_projective(s));
                assert_eq!(s.lang.as_deref(), Some(lang.code));
            }
        }
    }

    #[test]
    fn generation_is_deterministic_in_the_seed() {
        let lang = toy_language_a();
        assert_eq!(generate(&lang, 50, 9), generate(&lang, 50, 9));
        assert_ne!(generate(&lang, 50, 9), generate(&lang, 50, 10));
    }

    #[test]
    fn code_switched_text_mixes_both_lexicons() {
        let a = toy_language_a();
        let b = toy_language_b();
        let tb = generate_code_switched(&a, &b, 100, 4);
        assert_eq!(generate_code_switched(&a, &b, 100, 4), tb);
        let mut saw_a = false;
        let mut saw_b = false;
        let mut mixed_sentences = 0usize;
        for s in &tb.sentences {
            s.validate().unwrap();
            assert!(is_projective(s));
            assert!(s.lang.is_none());
            let mut a_here = false;
            let mut b_here = false;
            for t in &s.tokens {
                if t.postag.ends_with('a') {
                    saw_a = true;
                    a_here = true;
                }
                if t.postag.ends_with('b') {
                    saw_b = true;
                    b_here = true;
                }
            }
            if a_here && b_here {
                mixed_sentences += 1;
            }
        }
        assert!(saw_a && saw_b);
        assert!(
            mixed_sentences > 20,
            "expected plenty of intra-sentence mixing, got {mixed_sentences}"
        );
    }

    #[test]
    fn the_two_languages_disagree_on_word_order() {
        let a = toy_language_a();
        let b = toy_language_b();
        // xa has a frame with the object after the verb; xb never does.
        let object_after_verb = |frames: &[Frame]| {
            frames.iter().any(|f| {
                f.iter().enumerate().any(|(i, (_, head, rel))| {
                    *rel == "dobj" && *head > 0 && *head < i + 1
                })
            })
        };
        assert!(object_after_verb(a.frames()));
        assert!(!object_after_verb(b.frames()));
    }

    #[test]
    fn lexicons_are_disjoint_but_suffixes_collide() {
        let a = toy_language_a();
        let b = toy_language_b();
        let all = |l: &ToyLanguage| -> Vec<&'static str> {
            (0..4).flat_map(|c| l.words[c].iter().copied()).collect()
        };
        let wa = all(&a);
        for w in all(&b) {
            assert!(!wa.contains(&w), "shared word {w}");
        }
        // Every xb noun ends like an xa verb.
        for noun in b.words[Category::Noun.index()] {
            assert!(noun.ends_with("ti"));
        }
        for verb in a.words[Category::Verb.index()] {
            assert!(verb.ends_with("ti"));
        }
    }
}
