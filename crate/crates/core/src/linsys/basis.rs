use std::collections::HashMap;
use std::fmt;

use super::LinsysError;

/// A transition operator `|from⟩⟨to|` named by its two state ids.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Label {
    pub from: String,
    pub to: String,
}

impl Label {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Self { from: from.into(), to: to.into() }
    }

    pub fn is_population(&self) -> bool {
        self.from == self.to
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "σ[{},{}]", self.from, self.to)
    }
}

/// Ordered set of transition operators over a finite state set.
///
/// Products of basis operators follow `σ_ab σ_cd = δ_bc σ_ad`; a product
/// whose result is not itself in the basis is treated as the zero operator.
#[derive(Clone, Debug)]
pub struct OperatorBasis {
    states: Vec<String>,
    labels: Vec<Label>,
    // (from-state index, to-state index) per label
    pairs: Vec<(usize, usize)>,
    index: HashMap<(usize, usize), usize>,
}

impl OperatorBasis {
    pub fn new<S: Into<String>>(states: Vec<S>, labels: Vec<Label>) -> Result<Self, LinsysError> {
        let states: Vec<String> = states.into_iter().map(Into::into).collect();
        let state_index: HashMap<&str, usize> =
            states.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if state_index.len() != states.len() {
            return Err(LinsysError::InvalidBasis("duplicate state id".into()));
        }
        let mut pairs = Vec::with_capacity(labels.len());
        let mut index = HashMap::with_capacity(labels.len());
        for (k, label) in labels.iter().enumerate() {
            let lookup = |s: &str| {
                state_index
                    .get(s)
                    .copied()
                    .ok_or_else(|| LinsysError::InvalidBasis(format!("unknown state `{s}` in {label}")))
            };
            let pair = (lookup(&label.from)?, lookup(&label.to)?);
            if index.insert(pair, k).is_some() {
                return Err(LinsysError::InvalidBasis(format!("duplicate label {label}")));
            }
            pairs.push(pair);
        }
        Ok(Self { states, labels, pairs, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, k: usize) -> &Label {
        &self.labels[k]
    }

    pub fn is_population(&self, k: usize) -> bool {
        let (a, b) = self.pairs[k];
        a == b
    }

    pub fn population_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(|&k| self.is_population(k))
    }

    pub fn index_of(&self, label: &Label) -> Result<usize, LinsysError> {
        let pos = |s: &str| self.states.iter().position(|x| x == s);
        pos(&label.from)
            .zip(pos(&label.to))
            .and_then(|pair| self.index.get(&pair).copied())
            .ok_or_else(|| LinsysError::UnknownLabel(label.to_string()))
    }

    /// Index of `σ_k σ_l`, or `None` when the product vanishes or leaves the basis.
    pub fn product(&self, k: usize, l: usize) -> Option<usize> {
        let (a, b) = self.pairs[k];
        let (c, d) = self.pairs[l];
        if b != c {
            return None;
        }
        self.index.get(&(a, d)).copied()
    }
}
