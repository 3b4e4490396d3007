//! Transition systems for shift-reduce dependency parsing.
//!
//! A [`Configuration`] holds a stack, a buffer and the arcs built so far.
//! Two systems are provided: arc-eager, which can attach a token before
//! its right dependents are complete and uses an explicit `REDUCE`, and
//! arc-standard, which builds arcs only between the two topmost stack
//! items. Both produce exactly the projective trees; [`static_oracle`]
//! recovers a canonical transition sequence for any projective gold tree.

use crate::conll::Sentence;
use crate::error::{Error, Result};
use crate::treebank::is_projective;

/// The available transition systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionSystem {
    ArcEager,
    ArcStandard,
}

impl TransitionSystem {
    pub fn name(&self) -> &'static str {
        match self {
            TransitionSystem::ArcEager => "arc-eager",
            TransitionSystem::ArcStandard => "arc-standard",
        }
    }

    pub fn parse(text: &str) -> Option<TransitionSystem> {
        match text {
            "arc-eager" => Some(TransitionSystem::ArcEager),
            "arc-standard" => Some(TransitionSystem::ArcStandard),
            _ => None,
        }
    }
}

/// The shape of a transition, without its label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TransitionKind {
    Shift,
    Reduce,
    LeftArc,
    RightArc,
}

/// A parser action. Arc transitions carry the dependency label they
/// assign.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Transition {
    Shift,
    Reduce,
    LeftArc(String),
    RightArc(String),
}

impl Transition {
    pub fn kind(&self) -> TransitionKind {
        match self {
            Transition::Shift => TransitionKind::Shift,
            Transition::Reduce => TransitionKind::Reduce,
            Transition::LeftArc(_) => TransitionKind::LeftArc,
            Transition::RightArc(_) => TransitionKind::RightArc,
        }
    }

    /// Canonical text form: `SHIFT`, `REDUCE`, `LEFT_ARC:label`,
    /// `RIGHT_ARC:label`.
    pub fn signature(&self) -> String {
        match self {
            Transition::Shift => "SHIFT".to_string(),
            Transition::Reduce => "REDUCE".to_string(),
            Transition::LeftArc(l) => format!("LEFT_ARC:{l}"),
            Transition::RightArc(l) => format!("RIGHT_ARC:{l}"),
        }
    }

    pub fn from_signature(text: &str) -> Result<Transition> {
        match text {
            "SHIFT" => Ok(Transition::Shift),
            "REDUCE" => Ok(Transition::Reduce),
            _ => {
                if let Some(l) = text.strip_prefix("LEFT_ARC:") {
                    Ok(Transition::LeftArc(l.to_string()))
                } else if let Some(l) = text.strip_prefix("RIGHT_ARC:") {
                    Ok(Transition::RightArc(l.to_string()))
                } else {
                    Err(Error::model(format!("unknown transition '{text}'")))
                }
            }
        }
    }
}

/// A parser state over a sentence of `n` tokens: a stack of token ids
/// (0 is the artificial root, placed on the stack initially), a buffer of
/// ids still to be read, and the partial arc set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    n: usize,
    stack: Vec<usize>,
    /// Id of the first buffer token; the buffer is `buffer_front..=n`.
    buffer_front: usize,
    head_of: Vec<Option<usize>>,
    label_of: Vec<Option<String>>,
    leftmost_dep: Vec<Option<usize>>,
    rightmost_dep: Vec<Option<usize>>,
    dep_count: Vec<usize>,
}

impl Configuration {
    /// The initial configuration: stack `[0]`, all tokens in the buffer,
    /// no arcs.
    pub fn new(n: usize) -> Configuration {
        Configuration {
            n,
            stack: vec![0],
            buffer_front: 1,
            head_of: vec![None; n + 1],
            label_of: vec![None; n + 1],
            leftmost_dep: vec![None; n + 1],
            rightmost_dep: vec![None; n + 1],
            dep_count: vec![0; n + 1],
        }
    }

    pub fn sentence_len(&self) -> usize {
        self.n
    }

    /// Stack contents from bottom to top.
    pub fn stack(&self) -> &[usize] {
        &self.stack
    }

    /// The `k`-th stack item counted from the top (`0` is the top).
    pub fn stack_item(&self, k: usize) -> Option<usize> {
        if k < self.stack.len() {
            Some(self.stack[self.stack.len() - 1 - k])
        } else {
            None
        }
    }

    pub fn buffer_len(&self) -> usize {
        self.n + 1 - self.buffer_front
    }

    /// The `k`-th buffer item (`0` is the front).
    pub fn buffer_item(&self, k: usize) -> Option<usize> {
        let id = self.buffer_front + k;
        if id <= self.n {
            Some(id)
        } else {
            None
        }
    }

    pub fn head_of(&self, id: usize) -> Option<usize> {
        self.head_of.get(id).copied().flatten()
    }

    pub fn label_of(&self, id: usize) -> Option<&str> {
        self.label_of.get(id).and_then(|l| l.as_deref())
    }

    pub fn leftmost_dep(&self, id: usize) -> Option<usize> {
        self.leftmost_dep.get(id).copied().flatten()
    }

    pub fn rightmost_dep(&self, id: usize) -> Option<usize> {
        self.rightmost_dep.get(id).copied().flatten()
    }

    /// Number of dependents attached to `id` so far.
    pub fn dep_count(&self, id: usize) -> usize {
        self.dep_count.get(id).copied().unwrap_or(0)
    }

    /// Arcs built so far as `(head, dependent, label)`, sorted by
    /// dependent.
    pub fn arcs(&self) -> Vec<(usize, usize, String)> {
        (1..=self.n)
            .filter_map(|d| {
                self.head_of[d].map(|h| {
                    (h, d, self.label_of[d].clone().unwrap_or_default())
                })
            })
            .collect()
    }

    /// True when no further transition is legal: the buffer is exhausted
    /// (arc-eager) or the buffer is exhausted and only the root remains on
    /// the stack (arc-standard).
    pub fn is_terminal(&self, system: TransitionSystem) -> bool {
        match system {
            TransitionSystem::ArcEager => self.buffer_len() == 0,
            TransitionSystem::ArcStandard => self.buffer_len() == 0 && self.stack.len() == 1,
        }
    }

    /// Whether a transition of the given kind is legal here.
    pub fn kind_legal(&self, system: TransitionSystem, kind: TransitionKind) -> bool {
        if self.is_terminal(system) {
            return false;
        }
        match system {
            TransitionSystem::ArcEager => {
                let top = *self.stack.last().expect("stack always holds the root");
                match kind {
                    TransitionKind::Shift => self.buffer_len() > 0,
                    TransitionKind::Reduce => self.head_of[top].is_some(),
                    TransitionKind::LeftArc => {
                        top != 0 && self.head_of[top].is_none() && self.buffer_len() > 0
                    }
                    TransitionKind::RightArc => self.buffer_len() > 0,
                }
            }
            TransitionSystem::ArcStandard => match kind {
                TransitionKind::Shift => self.buffer_len() > 0,
                TransitionKind::Reduce => false,
                TransitionKind::LeftArc => {
                    self.stack.len() >= 2 && self.stack[self.stack.len() - 2] != 0
                }
                TransitionKind::RightArc => self.stack.len() >= 2,
            },
        }
    }

    fn add_arc(&mut self, head: usize, dep: usize, label: &str) {
        self.head_of[dep] = Some(head);
        self.label_of[dep] = Some(label.to_string());
        self.dep_count[head] += 1;
        match self.leftmost_dep[head] {
            Some(cur) if cur <= dep => {}
            _ => self.leftmost_dep[head] = Some(dep),
        }
        match self.rightmost_dep[head] {
            Some(cur) if cur >= dep => {}
            _ => self.rightmost_dep[head] = Some(dep),
        }
    }

    /// Applies a transition in place, or reports why it is illegal.
    pub fn apply(&mut self, system: TransitionSystem, transition: &Transition) -> Result<()> {
        if !self.kind_legal(system, transition.kind()) {
            return Err(Error::IllegalTransition(format!(
                "{} is not legal in the current {} configuration (stack {:?}, buffer length {})",
                transition.signature(),
                system.name(),
                self.stack,
                self.buffer_len()
            )));
        }
        match system {
            TransitionSystem::ArcEager => match transition {
                Transition::Shift => {
                    self.stack.push(self.buffer_front);
                    self.buffer_front += 1;
                }
                Transition::Reduce => {
                    self.stack.pop();
                }
                Transition::LeftArc(label) => {
                    let top = self.stack.pop().expect("legality guaranteed a top");
                    let front = self.buffer_front;
                    self.add_arc(front, top, label);
                }
                Transition::RightArc(label) => {
                    let top = *self.stack.last().expect("stack always holds the root");
                    let front = self.buffer_front;
                    self.add_arc(top, front, label);
                    self.stack.push(front);
                    self.buffer_front += 1;
                }
            },
            TransitionSystem::ArcStandard => match transition {
                Transition::Shift => {
                    self.stack.push(self.buffer_front);
                    self.buffer_front += 1;
                }
                Transition::Reduce => unreachable!("legality check rejects REDUCE"),
                Transition::LeftArc(label) => {
                    let top = self.stack.pop().expect("legality guaranteed two items");
                    let below = self.stack.pop().expect("legality guaranteed two items");
                    self.add_arc(top, below, label);
                    self.stack.push(top);
                }
                Transition::RightArc(label) => {
                    let top = self.stack.pop().expect("legality guaranteed two items");
                    let below = *self.stack.last().expect("legality guaranteed two items");
                    self.add_arc(below, top, label);
                }
            },
        }
        Ok(())
    }
}

/// Builds the initial configuration for a sentence.
pub fn initial_config(sentence: &Sentence) -> Configuration {
    Configuration::new(sentence.len())
}

/// Enumerates the legal transitions, instantiating arc transitions with
/// every label in `labels`. Order is fixed: `SHIFT`, `REDUCE`, then
/// `LEFT_ARC` per label, then `RIGHT_ARC` per label.
pub fn legal_transitions(
    config: &Configuration,
    system: TransitionSystem,
    labels: &[String],
) -> Vec<Transition> {
    let mut out = Vec::new();
    if config.kind_legal(system, TransitionKind::Shift) {
        out.push(Transition::Shift);
    }
    if config.kind_legal(system, TransitionKind::Reduce) {
        out.push(Transition::Reduce);
    }
    if config.kind_legal(system, TransitionKind::LeftArc) {
        for l in labels {
            out.push(Transition::LeftArc(l.clone()));
        }
    }
    if config.kind_legal(system, TransitionKind::RightArc) {
        for l in labels {
            out.push(Transition::RightArc(l.clone()));
        }
    }
    out
}

/// Reads the dependency tree out of a terminal configuration. Tokens that
/// never received a head are attached to the root with the label `root`,
/// which keeps the output a valid tree for any transition sequence.
pub fn extract_tree(config: &Configuration) -> (Vec<usize>, Vec<String>) {
    let mut heads = Vec::with_capacity(config.n);
    let mut labels = Vec::with_capacity(config.n);
    for d in 1..=config.n {
        match config.head_of[d] {
            Some(h) => {
                heads.push(h);
                labels.push(config.label_of[d].clone().unwrap_or_else(|| "root".to_string()));
            }
            None => {
                heads.push(0);
                labels.push("root".to_string());
            }
        }
    }
    (heads, labels)
}

/// Computes the canonical transition sequence that reproduces the gold
/// tree of a projective sentence. Fails on non-projective input.
pub fn static_oracle(sentence: &Sentence, system: TransitionSystem) -> Result<Vec<Transition>> {
    if !is_projective(sentence) {
        return Err(Error::data(
            "static oracle requires a projective tree; projectivize first",
        ));
    }
    let n = sentence.len();
    let mut gold_head = vec![0usize; n + 1];
    let mut gold_label: Vec<&str> = vec![""; n + 1];
    let mut gold_deps = vec![0usize; n + 1];
    for t in &sentence.tokens {
        gold_head[t.id] = t.head;
        gold_label[t.id] = &t.deprel;
        gold_deps[t.head] += 1;
    }

    let mut config = Configuration::new(n);
    let mut sequence = Vec::new();
    while !config.is_terminal(system) {
        let transition = match system {
            TransitionSystem::ArcEager => {
                let top = config.stack_item(0).expect("stack is never empty");
                let front = config.buffer_item(0).expect("non-terminal implies buffer");
                if top != 0 && gold_head[top] == front && config.head_of(top).is_none() {
                    Transition::LeftArc(gold_label[top].to_string())
                } else if gold_head[front] == top {
                    Transition::RightArc(gold_label[front].to_string())
                } else if config.head_of(top).is_some()
                    && config.dep_count(top) == gold_deps[top]
                {
                    Transition::Reduce
                } else {
                    Transition::Shift
                }
            }
            TransitionSystem::ArcStandard => {
                if config.stack().len() >= 2 {
                    let top = config.stack_item(0).expect("two items checked");
                    let below = config.stack_item(1).expect("two items checked");
                    if below != 0 && gold_head[below] == top {
                        Transition::LeftArc(gold_label[below].to_string())
                    } else if gold_head[top] == below && config.dep_count(top) == gold_deps[top] {
                        Transition::RightArc(gold_label[top].to_string())
                    } else if config.buffer_len() > 0 {
                        Transition::Shift
                    } else {
                        return Err(Error::internal(
                            "arc-standard oracle deadlocked on a projective tree",
                        ));
                    }
                } else {
                    Transition::Shift
                }
            }
        };
        config.apply(system, &transition)?;
        sequence.push(transition);
    }

    let (heads, labels) = extract_tree(&config);
    if heads != sentence.heads() || labels != sentence.labels() {
        return Err(Error::internal(
            "oracle sequence did not reproduce the gold tree",
        ));
    }
    Ok(sequence)
}

/// Runs a transition sequence from the initial configuration; useful in
/// tests and examples.
pub fn replay(
    n: usize,
    system: TransitionSystem,
    sequence: &[Transition],
) -> Result<Configuration> {
    let mut config = Configuration::new(n);
    for t in sequence {
        config.apply(system, t)?;
    }
    Ok(config)
}
