//! Words over `Σ ∪ {b, e}`, the circular operator and the checkers built on it.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::params::{j_table_u64, BigRatio, ParamsError, StageParams};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SymbolicError {
    #[error("word {index} has length {got}, expected {expected}")]
    Length { index: usize, got: usize, expected: usize },
    #[error("empty tuple")]
    EmptyTuple,
    #[error("l must be at least 2 (got {0})")]
    SmallL(u64),
    #[error(transparent)]
    Params(#[from] ParamsError),
    #[error("prescription for stage {stage} refers to word {index}, but only {available} exist")]
    BadIndex { stage: usize, index: usize, available: usize },
    #[error("stage {0} is not present")]
    MissingStage(usize),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// A single symbol. `Sym(i)` is the i-th letter of Σ.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Sym(u16),
    B,
    E,
    Star,
}

impl Letter {
    pub fn is_boundary(self) -> bool {
        matches!(self, Letter::B | Letter::E)
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Sym(i) => write!(f, "{i}"),
            Letter::B => f.write_str("b"),
            Letter::E => f.write_str("e"),
            Letter::Star => f.write_str("*"),
        }
    }
}

impl FromStr for Letter {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "b" => Ok(Letter::B),
            "e" => Ok(Letter::E),
            "*" | "∗" => Ok(Letter::Star),
            _ => s.parse::<u16>().map(Letter::Sym).map_err(|_| format!("unknown letter {s:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn from_syms(syms: &[u16]) -> Self {
        Word(syms.iter().map(|&s| Letter::Sym(s)).collect())
    }

    /// Compact form: digits for Σ (when |Σ| ≤ 10), `b`, `e`, `*`.
    pub fn compact(&self) -> String {
        self.0.iter().map(|l| l.to_string()).collect::<Vec<_>>().join("")
    }

    /// Parses the compact form where every character is one letter.
    pub fn parse_compact(s: &str) -> Result<Self, String> {
        s.chars().map(|c| c.to_string().parse::<Letter>()).collect::<Result<Vec<_>, _>>().map(Word)
    }

    pub fn count_boundary(&self) -> usize {
        self.0.iter().filter(|l| l.is_boundary()).count()
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{l}")?;
        }
        Ok(())
    }
}

/// `𝒞(w_0, …, w_{k−1})`: for `i` in `0..q`, for `j` in `0..k`, emit
/// `b^{q − j_i} w_j^{l−1} e^{j_i}`.
pub fn circular_op(tuple: &[Word], p: u64, q: u64, l: u64) -> Result<Word, SymbolicError> {
    if tuple.is_empty() {
        return Err(SymbolicError::EmptyTuple);
    }
    if l < 2 {
        return Err(SymbolicError::SmallL(l));
    }
    for (index, w) in tuple.iter().enumerate() {
        if w.len() as u64 != q {
            return Err(SymbolicError::Length { index, got: w.len(), expected: q as usize });
        }
    }
    let js = j_table_u64(p, q)?;
    let k = tuple.len() as u64;
    let mut out = Vec::with_capacity((k * l * q * q) as usize);
    for &j in &js {
        for w in tuple {
            out.extend(std::iter::repeat(Letter::B).take((q - j) as usize));
            for _ in 1..l {
                out.extend_from_slice(&w.0);
            }
            out.extend(std::iter::repeat(Letter::E).take(j as usize));
        }
    }
    Ok(Word(out))
}

/// Witness that `w` sits inside `u·v` at a nontrivial offset.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadabilityWitness {
    pub u: usize,
    pub v: usize,
    pub w: usize,
    pub offset: usize,
}

/// `None` when the family is uniquely readable.
pub fn unique_readability_check(words: &[Word]) -> Option<ReadabilityWitness> {
    let Some(first) = words.first() else { return None };
    let len = first.len();
    if len < 2 || words.iter().any(|w| w.len() != len) {
        return None;
    }
    let index: std::collections::HashMap<&[Letter], usize> =
        words.iter().enumerate().rev().map(|(i, w)| (w.letters(), i)).collect();
    let pairs: Vec<(usize, usize)> =
        (0..words.len()).flat_map(|u| (0..words.len()).map(move |v| (u, v))).collect();
    let found = par::map(&pairs, |&(u, v)| {
        let mut cat = Vec::with_capacity(2 * len);
        cat.extend_from_slice(words[u].letters());
        cat.extend_from_slice(words[v].letters());
        (1..len).find_map(|off| index.get(&cat[off..off + len]).map(|&w| ReadabilityWitness { u, v, w, offset: off }))
    });
    found.into_iter().flatten().next()
}

/// Stage families `𝒲_0 … 𝒲_N` with their prescriptions and parameters.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConstructionSequence {
    pub params: Vec<StageParams>,
    /// `prescriptions[n]` lists the tuples (indices into `𝒲_n`) that generate `𝒲_{n+1}`.
    pub prescriptions: Vec<Vec<Vec<usize>>>,
    pub stages: Vec<Vec<Word>>,
}

impl ConstructionSequence {
    /// `𝒲_0 = Σ`, then `𝒲_{n+1} = {𝒞(tuple) : tuple ∈ P_{n+1}}`.
    pub fn build(params: Vec<StageParams>, prescriptions: Vec<Vec<Vec<usize>>>) -> Result<Self, SymbolicError> {
        let s0 = params.first().map(|p| p.s).ok_or(SymbolicError::MissingStage(0))?;
        let mut stages = vec![(0..s0 as u16).map(|i| Word(vec![Letter::Sym(i)])).collect::<Vec<_>>()];
        for (n, tuples) in prescriptions.iter().enumerate() {
            let par_n = params.get(n).ok_or(SymbolicError::MissingStage(n))?;
            params.get(n + 1).ok_or(SymbolicError::MissingStage(n + 1))?;
            let (p, q) = (par_n.p_u64()?, par_n.q_u64()?);
            let l = par_n.l.ok_or(SymbolicError::MissingStage(n + 1))?;
            let prev = &stages[n];
            let mut next = Vec::with_capacity(tuples.len());
            for t in tuples {
                let ws = t
                    .iter()
                    .map(|&i| {
                        prev.get(i).cloned().ok_or(SymbolicError::BadIndex { stage: n, index: i, available: prev.len() })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                next.push(circular_op(&ws, p, q, l)?);
            }
            stages.push(next);
        }
        Ok(ConstructionSequence { params, prescriptions, stages })
    }

    pub fn depth(&self) -> usize {
        self.stages.len() - 1
    }
}

/// Occurrence counts of every stage-`n` word in every stage-`(n+1)` tuple.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub stage: usize,
    /// `counts[t][w]`: how many slots of tuple `t` hold word `w`.
    pub counts: Vec<Vec<usize>>,
    /// `d_n(w) = q_n · (copies of w in the parsing of a stage-(n+1) word) / q_{n+1}`, per tuple.
    pub d: Vec<Vec<String>>,
    pub expected_f: Option<usize>,
    pub strongly_uniform: bool,
    /// Largest |count − k/s| over all tuples and words.
    pub max_deviation: usize,
}

pub fn uniformity_check(seq: &ConstructionSequence, n: usize) -> Result<UniformityReport, SymbolicError> {
    let tuples = seq.prescriptions.get(n).ok_or(SymbolicError::MissingStage(n + 1))?;
    let words = seq.stages.get(n).ok_or(SymbolicError::MissingStage(n))?;
    let pn = &seq.params[n];
    let next = seq.params.get(n + 1).ok_or(SymbolicError::MissingStage(n + 1))?;
    let k = pn.k.unwrap_or(0) as usize;
    let expected_f = (words.len() > 0 && k % words.len() == 0).then(|| k / words.len());
    let mut counts = Vec::new();
    let mut d = Vec::new();
    let mut max_deviation = 0;
    let l = pn.l.unwrap_or(2);
    for t in tuples {
        let mut c = vec![0usize; words.len()];
        for &i in t {
            if let Some(slot) = c.get_mut(i) {
                *slot += 1;
            }
        }
        let f = expected_f.unwrap_or(usize::MAX);
        max_deviation = max_deviation.max(c.iter().map(|&x| x.abs_diff(f)).max().unwrap_or(0));
        d.push(
            c.iter()
                .map(|&x| {
                    let copies = BigInt::from(x) * BigInt::from(pn.q.clone()) * BigInt::from(l - 1);
                    BigRatio::new(copies * BigInt::from(pn.q.clone()), BigInt::from(next.q.clone())).to_string()
                })
                .collect(),
        );
        counts.push(c);
    }
    let strongly_uniform = expected_f.is_some() && max_deviation == 0;
    Ok(UniformityReport { stage: n, counts, d, expected_f, strongly_uniform, max_deviation })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Membership {
    /// Found inside word `word` of stage `stage` at `offset`.
    Yes { stage: usize, word: usize, offset: usize },
    /// Not a subword of any word at the deepest built stage.
    NotAtDepth { stage: usize },
    /// Longer than every built word.
    Indeterminate,
}

pub fn subshift_member(window: &Word, seq: &ConstructionSequence) -> Membership {
    let len = window.len();
    let start = seq
        .stages
        .iter()
        .enumerate()
        .position(|(n, ws)| {
            let prev = if n == 0 { 0 } else { seq.stages[n - 1].first().map_or(0, Word::len) };
            ws.first().map_or(false, |w| w.len() >= len + prev)
        })
        .or_else(|| seq.stages.iter().position(|ws| ws.first().map_or(false, |w| w.len() >= len)));
    let Some(start) = start else { return Membership::Indeterminate };
    for (n, ws) in seq.stages.iter().enumerate().skip(start) {
        for (wi, w) in ws.iter().enumerate() {
            if let Some(off) = find(w.letters(), window.letters()) {
                return Membership::Yes { stage: n, word: wi, offset: off };
            }
        }
    }
    Membership::NotAtDepth { stage: seq.depth() }
}

fn find(hay: &[Letter], needle: &[Letter]) -> Option<usize> {
    if needle.is_empty() {
        return Some(0);
    }
    hay.windows(needle.len()).position(|w| w == needle)
}

/// Overlapping occurrences of `w` in `host`, divided by `|host|`.
pub fn empirical_cylinder_frequency(w: &Word, host: &Word) -> BigRatio {
    let count = if w.is_empty() || w.len() > host.len() {
        0
    } else {
        host.letters().windows(w.len()).filter(|x| *x == w.letters()).count()
    };
    BigRatio::new(BigInt::from(count), BigInt::from(host.len().max(1)))
}

/// `π`: keep `b` and `e`, send every other letter to `∗`.
pub fn canonical_factor(x: &Word) -> Word {
    Word(x.0.iter().map(|&l| if l.is_boundary() { l } else { Letter::Star }).collect())
}

/// A stage's word list in the on-disk text format.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WordFamily {
    pub stage: usize,
    pub q: String,
    pub words: Vec<Word>,
}

impl WordFamily {
    pub fn to_text(&self) -> String {
        let mut s = format!("# stage {} q={}\n", self.stage, self.q);
        for w in &self.words {
            s.push_str(&w.to_string());
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self, SymbolicError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(SymbolicError::Parse { line: 1, msg: "empty file".into() })?;
        let bad_header = || SymbolicError::Parse { line: 1, msg: format!("bad header {header:?}") };
        let rest = header.trim().strip_prefix("# stage ").ok_or_else(bad_header)?;
        let (n, q) = rest.split_once(" q=").ok_or_else(bad_header)?;
        let stage = n.trim().parse().map_err(|_| bad_header())?;
        let q = q.trim().to_string();
        let qn: usize = q.parse().map_err(|_| bad_header())?;
        let mut words = Vec::new();
        for (i, line) in lines {
            let w = line
                .split_whitespace()
                .map(|t| t.parse::<Letter>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|msg| SymbolicError::Parse { line: i + 1, msg })?;
            if w.len() != qn {
                return Err(SymbolicError::Parse { line: i + 1, msg: format!("word has {} letters, header says q={qn}", w.len()) });
            }
            words.push(Word(w));
        }
        if words.is_empty() {
            return Err(SymbolicError::Parse { line: 2, msg: "no words".into() });
        }
        Ok(WordFamily { stage, q, words })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::schedule;

    fn w(s: &str) -> Word {
        Word::parse_compact(s).unwrap()
    }

    #[test]
    fn circular_examples() {
        let aa = Word::from_syms(&[0, 0]);
        assert_eq!(circular_op(&[aa], 1, 2, 2).unwrap().compact(), "bb00b00e");
        assert_eq!(circular_op(&[w("0")], 1, 1, 2).unwrap().compact(), "b0");
        assert!(matches!(circular_op(&[w("0"), w("01")], 1, 1, 2), Err(SymbolicError::Length { index: 1, .. })));
        assert!(circular_op(&[w("00")], 2, 2, 2).is_err());
    }

    #[test]
    fn readability_examples() {
        assert_eq!(unique_readability_check(&[w("b0")]), None);
        assert_eq!(unique_readability_check(&[w("00")]), Some(ReadabilityWitness { u: 0, v: 0, w: 0, offset: 1 }));
    }

    #[test]
    fn uniformity_examples() {
        let params = schedule(&[2], &[2], &[2, 2]).unwrap();
        let seq = ConstructionSequence::build(params.clone(), vec![vec![vec![0, 1], vec![1, 0]]]).unwrap();
        let rep = uniformity_check(&seq, 0).unwrap();
        assert!(rep.strongly_uniform);
        assert_eq!(rep.expected_f, Some(1));
        let bad = ConstructionSequence::build(params, vec![vec![vec![0, 0], vec![1, 0]]]).unwrap();
        let rep = uniformity_check(&bad, 0).unwrap();
        assert!(!rep.strongly_uniform);
        assert_eq!(rep.max_deviation, 1);
        let single = ConstructionSequence::build(schedule(&[2], &[2], &[1, 1]).unwrap(), vec![vec![vec![0, 0]]]).unwrap();
        assert!(uniformity_check(&single, 0).unwrap().strongly_uniform);
    }

    #[test]
    fn frequency_and_factor() {
        assert_eq!(empirical_cylinder_frequency(&w("0"), &w("0000")).to_string(), "1/1");
        assert_eq!(empirical_cylinder_frequency(&w("b"), &w("bb00b00e")).to_string(), "3/8");
        assert_eq!(canonical_factor(&w("bb00b00e")).compact(), "bb**b**e");
        let f = canonical_factor(&w("bbb"));
        assert_eq!(f, w("bbb"));
        assert_eq!(canonical_factor(&f), f);
    }

    #[test]
    fn membership() {
        let params = schedule(&[2, 2], &[2, 4], &[2, 2, 2]).unwrap();
        let seq = ConstructionSequence::build(params, vec![vec![vec![0, 1], vec![1, 0]]; 2]).unwrap();
        let top = seq.stages[2][1].clone();
        assert!(matches!(subshift_member(&top, &seq), Membership::Yes { stage: 2, .. }));
        let long = Word(vec![Letter::B; top.len() + 1]);
        assert_eq!(subshift_member(&long, &seq), Membership::Indeterminate);
        // `e` is always followed by `b` or by the end of a stage word, never by `e b e`.
        assert_eq!(subshift_member(&w("ebe"), &seq), Membership::NotAtDepth { stage: 2 });
        assert!(matches!(subshift_member(&w("eb"), &seq), Membership::Yes { .. }));
    }

    #[test]
    fn family_text_round_trip() {
        let fam = WordFamily { stage: 1, q: "4".into(), words: vec![w("b01e"), w("bb0e")] };
        let text = fam.to_text();
        assert_eq!(text, "# stage 1 q=4\nb 0 1 e\nb b 0 e\n");
        assert_eq!(WordFamily::parse(&text).unwrap(), fam);
        assert!(matches!(WordFamily::parse(""), Err(SymbolicError::Parse { line: 1, .. })));
        assert!(matches!(WordFamily::parse("# stage 1 q=4\nb 0 x e\n"), Err(SymbolicError::Parse { line: 2, .. })));
    }
}
