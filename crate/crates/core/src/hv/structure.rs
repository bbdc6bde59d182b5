use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

use crate::error::{Error, Result};

/// Largest number of observables accepted (`2^n` assignments).
pub const MAX_OBSERVABLES: usize = 20;

/// A set of `n` two-outcome observables and the jointly measurable subsets
/// (contexts) among them.
///
/// Assignments `a in {-1,+1}^n` are indexed by bitmask with bit `i` set when
/// `a_i = -1`. Context outcomes are indexed with the first listed observable
/// as the most significant bit and bit value 1 meaning `+1`, so a pair context
/// orders its outcomes `--, -+, +-, ++`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "StructureJson", into = "StructureJson")]
pub struct ContextStructure {
    n: usize,
    contexts: Vec<Vec<usize>>,
    monomials: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct StructureJson {
    n: usize,
    contexts: Vec<Vec<usize>>,
}

impl TryFrom<StructureJson> for ContextStructure {
    type Error = Error;

    fn try_from(j: StructureJson) -> Result<Self> {
        ContextStructure::new(j.n, j.contexts)
    }
}

impl From<ContextStructure> for StructureJson {
    fn from(s: ContextStructure) -> Self {
        StructureJson {
            n: s.n,
            contexts: s.contexts,
        }
    }
}

impl ContextStructure {
    pub fn new(n: usize, contexts: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidStructure("no observables".into()));
        }
        if contexts.is_empty() {
            return Err(Error::InvalidStructure("no contexts".into()));
        }
        let mut seen = BTreeSet::new();
        let mut covered = vec![false; n];
        for (c, ctx) in contexts.iter().enumerate() {
            if ctx.is_empty() {
                return Err(Error::InvalidStructure(format!("context {c} is empty")));
            }
            let set: BTreeSet<usize> = ctx.iter().copied().collect();
            if set.len() != ctx.len() {
                return Err(Error::InvalidStructure(format!(
                    "context {c} repeats an observable"
                )));
            }
            if let Some(&bad) = set.iter().find(|&&i| i >= n) {
                return Err(Error::InvalidStructure(format!(
                    "context {c} references observable {bad} but n = {n}"
                )));
            }
            if !seen.insert(set.clone()) {
                return Err(Error::InvalidStructure(format!("context {c} is a duplicate")));
            }
            for i in set {
                covered[i] = true;
            }
        }
        if let Some(i) = covered.iter().position(|c| !c) {
            return Err(Error::InvalidStructure(format!(
                "observable {i} belongs to no context"
            )));
        }

        let mut monos: BTreeSet<(usize, Vec<usize>)> = BTreeSet::new();
        monos.insert((0, Vec::new()));
        for ctx in &contexts {
            let mut sorted = ctx.clone();
            sorted.sort_unstable();
            for mask in 1u32..(1 << sorted.len()) {
                let sub: Vec<usize> = sorted
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| mask & (1 << k) != 0)
                    .map(|(_, &i)| i)
                    .collect();
                monos.insert((sub.len(), sub));
            }
        }
        Ok(ContextStructure {
            n,
            contexts,
            monomials: monos.into_iter().map(|(_, m)| m).collect(),
        })
    }

    /// Five observables on a cycle, contexts `{i, i+1 mod 5}`.
    pub fn pentagram5() -> Self {
        Self::cycle(5).expect("valid cycle")
    }

    /// `n`-cycle with contexts `{i, i+1 mod n}`.
    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidStructure("cycles need n >= 3".into()));
        }
        Self::new(n, (0..n).map(|i| vec![i, (i + 1) % n]).collect())
    }

    /// Observables `A1, A2, B1, B2` as `0, 1, 2, 3`; contexts `{A_i, B_j}`.
    pub fn chsh() -> Self {
        Self::new(4, vec![vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3]]).expect("valid chsh")
    }

    /// Two observables measured together.
    pub fn single_pair() -> Self {
        Self::new(2, vec![vec![0, 1]]).expect("valid pair")
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "pentagram5" | "pentagram" => Some(Self::pentagram5()),
            "chsh" => Some(Self::chsh()),
            "pair" | "single_pair" => Some(Self::single_pair()),
            _ => name
                .strip_prefix("cycle")
                .and_then(|k| k.parse().ok())
                .and_then(|k| Self::cycle(k).ok()),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn contexts(&self) -> &[Vec<usize>] {
        &self.contexts
    }

    pub fn context(&self, c: usize) -> &[usize] {
        &self.contexts[c]
    }

    pub fn num_outcomes(&self, c: usize) -> usize {
        1 << self.contexts[c].len()
    }

    /// Monomial basis: the empty product first, then every nonempty subset of
    /// every context, ordered by size and then lexicographically.
    pub fn monomials(&self) -> &[Vec<usize>] {
        &self.monomials
    }

    pub fn monomial_index(&self, mono: &[usize]) -> Option<usize> {
        let mut m = mono.to_vec();
        m.sort_unstable();
        self.monomials.iter().position(|x| *x == m)
    }

    /// `"1"` or `"a0a1"`.
    pub fn monomial_name(&self, k: usize) -> String {
        monomial_name(&self.monomials[k])
    }

    pub fn parse_monomial(&self, name: &str) -> Option<usize> {
        if name == "1" {
            return Some(0);
        }
        let mut idx = Vec::new();
        for part in name.split('a').skip(1) {
            idx.push(part.parse::<usize>().ok()?);
        }
        if !name.starts_with('a') || idx.is_empty() {
            return None;
        }
        self.monomial_index(&idx)
    }

    /// First context containing every index of `mono`.
    pub fn context_of(&self, mono: &[usize]) -> Option<usize> {
        self.contexts
            .iter()
            .position(|ctx| mono.iter().all(|i| ctx.contains(i)))
    }

    pub fn check_scale(&self) -> Result<()> {
        if self.n > MAX_OBSERVABLES {
            Err(Error::ScaleGuard {
                n: self.n,
                max: MAX_OBSERVABLES,
            })
        } else {
            Ok(())
        }
    }

    pub fn num_assignments(&self) -> usize {
        1 << self.n
    }

    /// `+1` or `-1` for observable `i` under assignment `a`.
    pub fn value(a: usize, i: usize) -> i64 {
        if a & (1 << i) != 0 {
            -1
        } else {
            1
        }
    }

    /// Product of `a_i` over `mono`.
    pub fn character(a: usize, mono: &[usize]) -> i64 {
        let mask: usize = mono.iter().map(|i| 1usize << i).sum();
        if (a & mask).count_ones() % 2 == 0 {
            1
        } else {
            -1
        }
    }

    /// Outcome index of context `c` under assignment `a`.
    pub fn outcome_of(&self, c: usize, a: usize) -> usize {
        let ctx = &self.contexts[c];
        ctx.iter().fold(0, |acc, &i| (acc << 1) | usize::from(Self::value(a, i) > 0))
    }

    /// Value of observable `ctx[k]` in outcome `o` of context `c`.
    pub fn outcome_value(&self, c: usize, o: usize, k: usize) -> i64 {
        let len = self.contexts[c].len();
        if o & (1 << (len - 1 - k)) != 0 {
            1
        } else {
            -1
        }
    }

    /// `"-+"` style key of outcome `o` in context `c`.
    pub fn outcome_key(&self, c: usize, o: usize) -> String {
        (0..self.contexts[c].len())
            .map(|k| if self.outcome_value(c, o, k) > 0 { '+' } else { '-' })
            .collect()
    }

    pub fn parse_outcome_key(&self, c: usize, key: &str) -> Option<usize> {
        let len = self.contexts[c].len();
        if key.chars().count() != len {
            return None;
        }
        key.chars().try_fold(0usize, |acc, ch| match ch {
            '+' => Some((acc << 1) | 1),
            '-' => Some(acc << 1),
            _ => None,
        })
    }

    /// Product over `mono` (a subset of context `c`) evaluated at outcome `o`.
    pub fn outcome_character(&self, c: usize, o: usize, mono: &[usize]) -> i64 {
        let ctx = &self.contexts[c];
        mono.iter()
            .map(|i| {
                let k = ctx.iter().position(|x| x == i).expect("monomial inside context");
                self.outcome_value(c, o, k)
            })
            .product()
    }

    /// `"+-+++"` with character `k` giving `a_k`.
    pub fn assignment_key(&self, a: usize) -> String {
        (0..self.n)
            .map(|i| if Self::value(a, i) > 0 { '+' } else { '-' })
            .collect()
    }

    pub fn parse_assignment_key(&self, key: &str) -> Option<usize> {
        if key.chars().count() != self.n {
            return None;
        }
        key.chars().enumerate().try_fold(0usize, |acc, (i, ch)| match ch {
            '+' => Some(acc),
            '-' => Some(acc | (1 << i)),
            _ => None,
        })
    }

    /// Monomial evaluation matrix: row `a`, column `k` holds `chi_k(a)`.
    pub fn character_rows(&self) -> Vec<Vec<i64>> {
        (0..self.num_assignments())
            .map(|a| {
                self.monomials
                    .iter()
                    .map(|m| Self::character(a, m))
                    .collect()
            })
            .collect()
    }
}

pub fn monomial_name(mono: &[usize]) -> String {
    if mono.is_empty() {
        "1".to_string()
    } else {
        mono.iter().map(|i| format!("a{i}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins() {
        let p = ContextStructure::pentagram5();
        assert_eq!(p.monomials().len(), 11);
        assert_eq!(p.monomial_name(0), "1");
        assert_eq!(p.contexts()[4], vec![4, 0]);
        assert!(p.parse_monomial("a0a4").is_some());
        assert_eq!(p.parse_monomial("a4a0"), p.parse_monomial("a0a4"));
        assert!(p.parse_monomial("a0a2").is_none());
        let c = ContextStructure::chsh();
        assert_eq!(c.monomials().len(), 9);
        assert_eq!(ContextStructure::single_pair().monomials().len(), 4);
        assert_eq!(ContextStructure::builtin("cycle7").unwrap().n(), 7);
        assert!(ContextStructure::builtin("nope").is_none());
    }

    #[test]
    fn invalid_structures() {
        assert!(ContextStructure::new(3, vec![vec![0, 1]]).is_err());
        assert!(ContextStructure::new(2, vec![vec![0, 2]]).is_err());
        assert!(ContextStructure::new(2, vec![vec![0, 1], vec![1, 0]]).is_err());
        assert!(ContextStructure::new(2, vec![vec![0, 0]]).is_err());
        let big = ContextStructure::cycle(21).unwrap();
        assert!(matches!(big.check_scale(), Err(Error::ScaleGuard { .. })));
    }

    #[test]
    fn outcome_indexing() {
        let p = ContextStructure::pentagram5();
        assert_eq!(
            (0..4).map(|o| p.outcome_key(0, o)).collect::<Vec<_>>(),
            vec!["--", "-+", "+-", "++"]
        );
        // a0 = -1, others +1
        let a = 1;
        assert_eq!(p.outcome_of(0, a), 1);
        assert_eq!(p.outcome_of(4, a), 2);
        assert_eq!(p.assignment_key(a), "-++++");
        assert_eq!(p.parse_assignment_key("-++++"), Some(a));
        assert_eq!(p.parse_outcome_key(0, "+-"), Some(2));
        assert_eq!(p.outcome_character(4, 2, &[0]), -1);
        assert_eq!(p.outcome_character(4, 2, &[0, 4]), -1);
    }
}
