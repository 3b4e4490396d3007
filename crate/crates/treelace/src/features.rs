//! Feature templates and extraction for configuration scoring.
//!
//! A template names one or more (address, attribute) pairs; extraction
//! resolves each address against the current configuration, reads the
//! attribute off the sentence (or off the arcs built so far, for
//! dependency labels), and emits a single string feature per template,
//! e.g. `S0.postag+B0.postag=vba|nna`. Strings are interned to dense ids
//! so models store integers.

use std::collections::HashMap;
use std::fmt;

use crate::conll::Sentence;
use crate::error::{Error, Result};
use crate::transition::Configuration;

/// Value used when an address does not resolve or an attribute is empty.
pub const NULL_VALUE: &str = "<NULL>";
/// Value returned for word-level attributes of the artificial root.
pub const ROOT_VALUE: &str = "<ROOT>";

/// Positions in a configuration that a template can address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Address {
    /// Stack top.
    S0,
    /// Second stack item.
    S1,
    /// Third stack item.
    S2,
    /// Buffer front.
    B0,
    B1,
    B2,
    B3,
    /// Head of the stack top, if attached.
    HeadOfS0,
    /// Leftmost dependent of the stack top.
    LeftmostDepS0,
    /// Rightmost dependent of the stack top.
    RightmostDepS0,
    /// Leftmost dependent of the buffer front.
    LeftmostDepB0,
    /// Rightmost dependent of the buffer front.
    RightmostDepB0,
}

impl Address {
    pub const ALL: [Address; 12] = [
        Address::S0,
        Address::S1,
        Address::S2,
        Address::B0,
        Address::B1,
        Address::B2,
        Address::B3,
        Address::HeadOfS0,
        Address::LeftmostDepS0,
        Address::RightmostDepS0,
        Address::LeftmostDepB0,
        Address::RightmostDepB0,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Address::S0 => "S0",
            Address::S1 => "S1",
            Address::S2 => "S2",
            Address::B0 => "B0",
            Address::B1 => "B1",
            Address::B2 => "B2",
            Address::B3 => "B3",
            Address::HeadOfS0 => "S0h",
            Address::LeftmostDepS0 => "S0l",
            Address::RightmostDepS0 => "S0r",
            Address::LeftmostDepB0 => "B0l",
            Address::RightmostDepB0 => "B0r",
        }
    }

    pub fn parse(text: &str) -> Option<Address> {
        Address::ALL.iter().copied().find(|a| a.name() == text)
    }

    /// Resolves the address to a token id (0 is the root), if it exists in
    /// the configuration.
    pub fn resolve(&self, config: &Configuration) -> Option<usize> {
        match self {
            Address::S0 => config.stack_item(0),
            Address::S1 => config.stack_item(1),
            Address::S2 => config.stack_item(2),
            Address::B0 => config.buffer_item(0),
            Address::B1 => config.buffer_item(1),
            Address::B2 => config.buffer_item(2),
            Address::B3 => config.buffer_item(3),
            Address::HeadOfS0 => config.stack_item(0).and_then(|id| config.head_of(id)),
            Address::LeftmostDepS0 => config.stack_item(0).and_then(|id| config.leftmost_dep(id)),
            Address::RightmostDepS0 => {
                config.stack_item(0).and_then(|id| config.rightmost_dep(id))
            }
            Address::LeftmostDepB0 => config.buffer_item(0).and_then(|id| config.leftmost_dep(id)),
            Address::RightmostDepB0 => {
                config.buffer_item(0).and_then(|id| config.rightmost_dep(id))
            }
        }
    }
}

/// Token attributes a template can read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Attribute {
    Form,
    Cpostag,
    Postag,
    /// The label of the arc attaching the addressed token, among the arcs
    /// built so far.
    Deprel,
}

impl Attribute {
    pub fn name(&self) -> &'static str {
        match self {
            Attribute::Form => "form",
            Attribute::Cpostag => "cpostag",
            Attribute::Postag => "postag",
            Attribute::Deprel => "deprel",
        }
    }

    pub fn parse(text: &str) -> Option<Attribute> {
        match text {
            "form" => Some(Attribute::Form),
            "cpostag" => Some(Attribute::Cpostag),
            "postag" => Some(Attribute::Postag),
            "deprel" => Some(Attribute::Deprel),
            _ => None,
        }
    }
}

/// One feature template: a non-empty conjunction of (address, attribute)
/// atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FeatureTemplate {
    atoms: Vec<(Address, Attribute)>,
}

impl FeatureTemplate {
    /// Builds a template. Atoms are put into a canonical order (stack
    /// positions before buffer positions, then by attribute) and
    /// deduplicated, so two templates over the same atoms compare equal
    /// regardless of how they were written.
    pub fn new(mut atoms: Vec<(Address, Attribute)>) -> Result<FeatureTemplate> {
        if atoms.is_empty() {
            return Err(Error::data("a feature template needs at least one atom"));
        }
        atoms.sort();
        atoms.dedup();
        Ok(FeatureTemplate { atoms })
    }

    /// Shorthand for a single-atom template.
    pub fn single(address: Address, attribute: Attribute) -> FeatureTemplate {
        FeatureTemplate {
            atoms: vec![(address, attribute)],
        }
    }

    /// Shorthand for a two-atom conjunction.
    pub fn pair(
        a: (Address, Attribute),
        b: (Address, Attribute),
    ) -> FeatureTemplate {
        FeatureTemplate::new(vec![a, b]).expect("two atoms are never empty")
    }

    pub fn atoms(&self) -> &[(Address, Attribute)] {
        &self.atoms
    }

    /// Canonical name, e.g. `S0.postag+B0.form`.
    pub fn name(&self) -> String {
        self.atoms
            .iter()
            .map(|(addr, attr)| format!("{}.{}", addr.name(), attr.name()))
            .collect::<Vec<_>>()
            .join("+")
    }

    /// Parses a canonical name back into a template.
    pub fn parse(text: &str) -> Result<FeatureTemplate> {
        let mut atoms = Vec::new();
        for part in text.split('+') {
            let (addr, attr) = part.split_once('.').ok_or_else(|| {
                Error::data(format!("malformed template atom '{part}' (expected ADDR.attr)"))
            })?;
            let address = Address::parse(addr)
                .ok_or_else(|| Error::data(format!("unknown address '{addr}'")))?;
            let attribute = Attribute::parse(attr)
                .ok_or_else(|| Error::data(format!("unknown attribute '{attr}'")))?;
            atoms.push((address, attribute));
        }
        FeatureTemplate::new(atoms)
    }
}

impl fmt::Display for FeatureTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Parses a template set from text, one canonical name per line. Blank
/// lines and lines starting with `#` are skipped; duplicates are errors.
pub fn parse_template_set(text: &str) -> Result<Vec<FeatureTemplate>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let template = FeatureTemplate::parse(line)
            .map_err(|e| Error::data(format!("template line {}: {e}", idx + 1)))?;
        if !seen.insert(template.name()) {
            return Err(Error::data(format!(
                "duplicate template '{}' on line {}",
                template.name(),
                idx + 1
            )));
        }
        out.push(template);
    }
    if out.is_empty() {
        return Err(Error::data("template set is empty"));
    }
    Ok(out)
}

/// Renders a template set as text, one canonical name per line.
pub fn format_template_set(templates: &[FeatureTemplate]) -> String {
    let mut out = String::new();
    for t in templates {
        out.push_str(&t.name());
        out.push('\n');
    }
    out
}

/// Bidirectional map between feature strings and dense u32 ids.
#[derive(Debug, Clone, Default)]
pub struct Interner {
    ids: HashMap<String, u32>,
    strings: Vec<String>,
}

impl Interner {
    pub fn new() -> Interner {
        Interner::default()
    }

    /// Returns the id for `text`, allocating the next one when unseen.
    pub fn intern(&mut self, text: &str) -> u32 {
        if let Some(&id) = self.ids.get(text) {
            return id;
        }
        let id = self.strings.len() as u32;
        self.strings.push(text.to_string());
        self.ids.insert(text.to_string(), id);
        id
    }

    /// Looks an id up without allocating.
    pub fn get(&self, text: &str) -> Option<u32> {
        self.ids.get(text).copied()
    }

    pub fn resolve(&self, id: u32) -> Option<&str> {
        self.strings.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.strings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strings.is_empty()
    }
}

/// A sparse binary feature vector: sorted, deduplicated feature ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector(Vec<u32>);

impl FeatureVector {
    pub fn from_ids(mut ids: Vec<u32>) -> FeatureVector {
        ids.sort_unstable();
        ids.dedup();
        FeatureVector(ids)
    }

    pub fn ids(&self) -> &[u32] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn attribute_value<'a>(
    id: usize,
    attribute: Attribute,
    config: &'a Configuration,
    sentence: &'a Sentence,
) -> &'a str {
    match attribute {
        Attribute::Deprel => config.label_of(id).unwrap_or(NULL_VALUE),
        _ if id == 0 => ROOT_VALUE,
        Attribute::Form => non_empty(&sentence.tokens[id - 1].form),
        Attribute::Cpostag => non_empty(&sentence.tokens[id - 1].cpostag),
        Attribute::Postag => non_empty(&sentence.tokens[id - 1].postag),
    }
}

fn non_empty(value: &str) -> &str {
    if value.is_empty() {
        NULL_VALUE
    } else {
        value
    }
}

/// Computes the string feature a template produces in a configuration,
/// e.g. `S0.postag+B0.postag=vba|nna`. Unresolvable addresses and empty
/// attributes contribute `<NULL>`.
pub fn feature_string(
    template: &FeatureTemplate,
    config: &Configuration,
    sentence: &Sentence,
) -> String {
    let mut out = template.name();
    out.push('=');
    for (i, (address, attribute)) in template.atoms().iter().enumerate() {
        if i > 0 {
            out.push('|');
        }
        let value = match address.resolve(config) {
            Some(id) => attribute_value(id, *attribute, config, sentence),
            None => NULL_VALUE,
        };
        out.push_str(value);
    }
    out
}

/// Extracts the feature vector for a configuration, interning new feature
/// strings. Use during training.
pub fn extract(
    config: &Configuration,
    sentence: &Sentence,
    templates: &[FeatureTemplate],
    interner: &mut Interner,
) -> FeatureVector {
    let ids = templates
        .iter()
        .map(|t| interner.intern(&feature_string(t, config, sentence)))
        .collect();
    FeatureVector::from_ids(ids)
}

/// Extracts the feature vector against a frozen interner; feature strings
/// never seen during training are dropped. Use at parse time.
pub fn extract_frozen(
    config: &Configuration,
    sentence: &Sentence,
    templates: &[FeatureTemplate],
    interner: &Interner,
) -> FeatureVector {
    let ids = templates
        .iter()
        .filter_map(|t| interner.get(&feature_string(t, config, sentence)))
        .collect();
    FeatureVector::from_ids(ids)
}

/// The baseline template set used before any feature search.
///
/// Forms for the stack top and the first two buffer tokens, fine tags
/// over a wider window, coarse tags for the stack top and buffer front,
/// labels of the closest dependents built so far, and three conjunctions
/// over the stack-top/buffer-front pair.
pub fn default_templates(_system: crate::transition::TransitionSystem) -> Vec<FeatureTemplate> {
    use Address::*;
    use Attribute::*;
    vec![
        FeatureTemplate::single(S0, Form),
        FeatureTemplate::single(B0, Form),
        FeatureTemplate::single(B1, Form),
        FeatureTemplate::single(S0, Postag),
        FeatureTemplate::single(S1, Postag),
        FeatureTemplate::single(B0, Postag),
        FeatureTemplate::single(B1, Postag),
        FeatureTemplate::single(B2, Postag),
        FeatureTemplate::single(S0, Cpostag),
        FeatureTemplate::single(B0, Cpostag),
        FeatureTemplate::single(LeftmostDepS0, Deprel),
        FeatureTemplate::single(RightmostDepS0, Deprel),
        FeatureTemplate::single(LeftmostDepB0, Deprel),
        FeatureTemplate::pair((S0, Postag), (B0, Postag)),
        FeatureTemplate::pair((S0, Form), (B0, Postag)),
        FeatureTemplate::pair((S0, Postag), (B0, Form)),
    ]
}

/// The candidate pool searched during feature optimization: the default
/// templates, three further single tags reaching deeper into the stack,
/// buffer and arc structure, and every pairwise conjunction of the
/// singles.
pub fn candidate_pool(system: crate::transition::TransitionSystem) -> Vec<FeatureTemplate> {
    use Address::*;
    use Attribute::*;
    let singles = vec![
        FeatureTemplate::single(S0, Form),
        FeatureTemplate::single(B0, Form),
        FeatureTemplate::single(B1, Form),
        FeatureTemplate::single(S0, Postag),
        FeatureTemplate::single(S1, Postag),
        FeatureTemplate::single(S2, Postag),
        FeatureTemplate::single(B0, Postag),
        FeatureTemplate::single(B1, Postag),
        FeatureTemplate::single(B2, Postag),
        FeatureTemplate::single(B3, Postag),
        FeatureTemplate::single(HeadOfS0, Postag),
        FeatureTemplate::single(S0, Cpostag),
        FeatureTemplate::single(B0, Cpostag),
        FeatureTemplate::single(LeftmostDepS0, Deprel),
        FeatureTemplate::single(RightmostDepS0, Deprel),
        FeatureTemplate::single(LeftmostDepB0, Deprel),
    ];
    let mut pool = default_templates(system);
    let mut seen: std::collections::BTreeSet<String> =
        pool.iter().map(FeatureTemplate::name).collect();
    let mut push = |pool: &mut Vec<FeatureTemplate>, t: FeatureTemplate| {
        if seen.insert(t.name()) {
            pool.push(t);
        }
    };
    for s in &singles {
        push(&mut pool, s.clone());
    }
    for i in 0..singles.len() {
        for j in i + 1..singles.len() {
            let t = FeatureTemplate::pair(singles[i].atoms()[0], singles[j].atoms()[0]);
            push(&mut pool, t);
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conll::Token;
    use crate::transition::{Transition, TransitionSystem};

    fn toy() -> Sentence {
        Sentence::new(
            vec![
                Token::new(1, "la", "DET", "dta", 2, "det"),
                Token::new(2, "kata", "NOUN", "nna", 3, "nsubj"),
                Token::new(3, "runti", "VERB", "vba", 0, "root"),
            ],
            None,
        )
    }

    #[test]
    fn template_names_round_trip() {
        for t in candidate_pool(TransitionSystem::ArcEager) {
            let back = FeatureTemplate::parse(&t.name()).unwrap();
            assert_eq!(back, t);
        }
    }

    #[test]
    fn template_set_parses_and_formats() {
        let text = "# comment\nS0.postag\n\nS0.form+B0.postag\n";
        let set = parse_template_set(text).unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(format_template_set(&set), "S0.postag\nS0.form+B0.postag\n");
        assert!(parse_template_set("S0.form\nS0.form\n").is_err());
        assert!(parse_template_set("").is_err());
        assert!(parse_template_set("S9.form\n").is_err());
    }

    #[test]
    fn atom_order_is_canonical() {
        let a = FeatureTemplate::parse("B0.form+S0.postag").unwrap();
        let b = FeatureTemplate::parse("S0.postag+B0.form").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.name(), "S0.postag+B0.form");
        // Duplicate template spelled two ways is still caught.
        assert!(parse_template_set("B0.form+S0.postag\nS0.postag+B0.form\n").is_err());
    }

    #[test]
    fn default_set_has_sixteen_templates() {
        let defaults = default_templates(TransitionSystem::ArcEager);
        assert_eq!(defaults.len(), 16);
        let names: std::collections::BTreeSet<String> =
            defaults.iter().map(FeatureTemplate::name).collect();
        assert_eq!(names.len(), defaults.len());
        assert!(names.contains("S0.postag+B0.postag"));
        assert!(names.contains("B0l.deprel"));
    }

    #[test]
    fn candidate_pool_extends_defaults() {
        let pool = candidate_pool(TransitionSystem::ArcEager);
        let names: std::collections::BTreeSet<String> =
            pool.iter().map(FeatureTemplate::name).collect();
        assert_eq!(names.len(), pool.len(), "pool has duplicates");
        for t in default_templates(TransitionSystem::ArcEager) {
            assert!(names.contains(&t.name()));
        }
        assert!(names.contains("B3.postag"));
        assert!(names.contains("S0h.postag"));
        // 16 singles and their 120 pairings.
        assert_eq!(pool.len(), 136);
    }

    #[test]
    fn initial_configuration_features() {
        let s = toy();
        let c = crate::transition::initial_config(&s);
        assert_eq!(
            feature_string(&FeatureTemplate::single(Address::S0, Attribute::Form), &c, &s),
            "S0.form=<ROOT>"
        );
        assert_eq!(
            feature_string(&FeatureTemplate::single(Address::B0, Attribute::Postag), &c, &s),
            "B0.postag=dta"
        );
        assert_eq!(
            feature_string(&FeatureTemplate::single(Address::B3, Attribute::Form), &c, &s),
            "B3.form=<NULL>"
        );
        assert_eq!(
            feature_string(
                &FeatureTemplate::pair(
                    (Address::S0, Attribute::Postag),
                    (Address::B0, Attribute::Postag)
                ),
                &c,
                &s
            ),
            "S0.postag+B0.postag=<ROOT>|dta"
        );
    }

    #[test]
    fn deprel_features_read_built_arcs() {
        let s = toy();
        let mut c = crate::transition::initial_config(&s);
        let sys = TransitionSystem::ArcEager;
        c.apply(sys, &Transition::Shift).unwrap();
        c.apply(sys, &Transition::LeftArc("det".into())).unwrap();
        // Stack [0], buffer front is token 2 with a left dependent.
        let t = FeatureTemplate::single(Address::LeftmostDepB0, Attribute::Deprel);
        assert_eq!(feature_string(&t, &c, &s), "B0l.deprel=det");
        let t = FeatureTemplate::single(Address::LeftmostDepS0, Attribute::Deprel);
        assert_eq!(feature_string(&t, &c, &s), "S0l.deprel=<NULL>");
    }

    #[test]
    fn extraction_interns_and_frozen_lookup_drops_unseen() {
        let s = toy();
        let c = crate::transition::initial_config(&s);
        let templates = default_templates(TransitionSystem::ArcEager);
        let mut interner = Interner::new();
        let fv = extract(&c, &s, &templates, &mut interner);
        assert_eq!(fv.len(), templates.len());
        let ids = fv.ids();
        assert!(ids.windows(2).all(|w| w[0] < w[1]), "ids must be sorted unique");

        // Frozen extraction over the same configuration finds everything.
        let frozen = extract_frozen(&c, &s, &templates, &interner);
        assert_eq!(frozen, fv);

        // A fresh interner knows nothing, so every feature is dropped.
        let empty = extract_frozen(&c, &s, &templates, &Interner::new());
        assert!(empty.is_empty());
    }

    #[test]
    fn interner_is_stable() {
        let mut i = Interner::new();
        let a = i.intern("x");
        let b = i.intern("y");
        assert_eq!(i.intern("x"), a);
        assert_eq!(i.get("y"), Some(b));
        assert_eq!(i.resolve(a), Some("x"));
        assert_eq!(i.len(), 2);
    }
}
