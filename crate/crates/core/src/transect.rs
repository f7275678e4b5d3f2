//! Rotation itineraries on the fine grid, read off as symbolic names.
//!
//! The fine interval `J = [0, 1/q')` is pushed around by `R^{p'/q'}`. Each
//! step lands in some cell of the `kq` grid; consecutive steps advance that
//! cell by exactly `p·k` until the fine offset carries, which cuts the orbit
//! into runs. Inside a run the column class `c mod k` is fixed and the
//! dynamical level `p^{-1}·(c div k) mod q` climbs by one per step. Steps
//! before the first return to level 0 are tagged begin, complete passes
//! through levels `0..q` are middle, and the leftover tail is end.
//!
//! Nothing here consults the closed-form circular operator; that is the
//! point of the module.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolic::{Letter, Word};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TransectError {
    #[error("p={p} is not invertible modulo q={q}")]
    NotCoprime { p: u64, q: u64 },
    #[error("parameters out of range: {0}")]
    Range(String),
    #[error("run starting at step {start} has length {len}, expected {expected}")]
    Run { start: usize, len: usize, expected: usize },
    #[error("need {expected} column words of length {q}, got {got}")]
    Letters { expected: usize, q: u64, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    Begin,
    Middle,
    End,
}

impl Segment {
    fn as_str(self) -> &'static str {
        match self {
            Segment::Begin => "begin",
            Segment::Middle => "middle",
            Segment::End => "end",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransectTrace {
    pub p: u64,
    pub q: u64,
    pub k: u64,
    pub l: u64,
    pub p_fine: u64,
    pub q_fine: u64,
    /// `i_t = t p' mod q'`.
    pub positions: Vec<u64>,
    /// Index of the `kq`-cell containing step `t`.
    pub coarse: Vec<u64>,
    /// Dynamical level of the `q`-cell containing step `t`.
    pub levels: Vec<u64>,
    pub tags: Vec<Segment>,
}

/// Brute-force modular inverse; `q` stays small wherever this is used.
pub fn brute_inverse(p: u64, q: u64) -> Option<u64> {
    if q == 1 {
        return Some(0);
    }
    (1..q).find(|&x| (p as u128 * x as u128) % q as u128 == 1)
}

/// Splits `cells` (one per step) into maximal runs advancing by `stride` mod `modulus`.
fn runs(cells: &[u64], stride: u64, modulus: u64) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for t in 1..=cells.len() {
        if t == cells.len() || cells[t] != (cells[t - 1] + stride) % modulus {
            out.push((start, t - start));
            start = t;
        }
    }
    out
}

/// Tags one run given the level of each of its steps.
fn tag_run(levels: &[u64], q: u64) -> Vec<Segment> {
    let first_zero = (1..levels.len()).find(|&i| levels[i] == 0).unwrap_or(levels.len());
    let last_top = levels.iter().rposition(|&d| d == q - 1).filter(|&i| i >= first_zero);
    (0..levels.len())
        .map(|i| match last_top {
            _ if i < first_zero => Segment::Begin,
            Some(top) if i <= top => Segment::Middle,
            _ => Segment::End,
        })
        .collect()
}

pub fn simulate_transect(p: u64, q: u64, k: u64, l: u64) -> Result<TransectTrace, TransectError> {
    if q == 0 || k == 0 || l < 2 {
        return Err(TransectError::Range(format!("q={q}, k={k}, l={l}")));
    }
    let q_fine = k
        .checked_mul(l)
        .and_then(|x| x.checked_mul(q))
        .and_then(|x| x.checked_mul(q))
        .filter(|&x| x <= 1 << 28)
        .ok_or_else(|| TransectError::Range("q' too large".into()))?;
    let p_fine = p * q * k * l + 1;
    let inv = brute_inverse(p % q, q).ok_or(TransectError::NotCoprime { p, q })?;
    let cell = l * q;
    let positions: Vec<u64> = (0..q_fine).map(|t| ((t as u128 * p_fine as u128) % q_fine as u128) as u64).collect();
    let coarse: Vec<u64> = positions.iter().map(|&i| i / cell).collect();
    let levels: Vec<u64> = coarse.iter().map(|&c| ((c / k) * inv) % q).collect();
    let mut tags = Vec::with_capacity(positions.len());
    for (start, len) in runs(&coarse, (p % q) * k, k * q) {
        if len as u64 != cell {
            return Err(TransectError::Run { start, len, expected: cell as usize });
        }
        tags.extend(tag_run(&levels[start..start + len], q));
    }
    Ok(TransectTrace { p, q, k, l, p_fine, q_fine, positions, coarse, levels, tags })
}

impl TransectTrace {
    /// Begin/middle/end lengths of each time block `[m klq, (m+1) klq)` read at
    /// resolution `q` (the coarse `q`-cell instead of the `kq`-cell).
    pub fn q_segments(&self) -> Result<Vec<(usize, usize, usize)>, TransectError> {
        let block = self.positions.len() / self.q as usize;
        let qcells: Vec<u64> = self.coarse.iter().map(|&c| c / self.k).collect();
        let inv = brute_inverse(self.p % self.q, self.q).ok_or(TransectError::NotCoprime { p: self.p, q: self.q })?;
        let mut out = Vec::new();
        for (start, len) in runs(&qcells, self.p % self.q, self.q) {
            if len != block {
                return Err(TransectError::Run { start, len, expected: block });
            }
            let lv: Vec<u64> = qcells[start..start + len].iter().map(|&a| (a * inv) % self.q).collect();
            let tags = tag_run(&lv, self.q);
            let count = |s| tags.iter().filter(|&&t| t == s).count();
            out.push((count(Segment::Begin), count(Segment::Middle), count(Segment::End)));
        }
        Ok(out)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,position,coarse_index,segment_tag\n");
        for t in 0..self.positions.len() {
            let _ = writeln!(s, "{t},{},{},{}", self.positions[t], self.coarse[t], self.tags[t].as_str());
        }
        s
    }
}

/// Emits `b` on begin steps, `e` on end steps and `w_j[level]` on middle steps,
/// where `j` is the column class of the step's `kq`-cell.
pub fn transect_name(trace: &TransectTrace, letters: &[Word]) -> Result<Word, TransectError> {
    if letters.len() as u64 != trace.k || letters.iter().any(|w| w.len() as u64 != trace.q) {
        return Err(TransectError::Letters { expected: trace.k as usize, q: trace.q, got: letters.len() });
    }
    let out = (0..trace.positions.len())
        .map(|t| match trace.tags[t] {
            Segment::Begin => Letter::B,
            Segment::End => Letter::E,
            Segment::Middle => letters[(trace.coarse[t] % trace.k) as usize].0[trace.levels[t] as usize],
        })
        .collect();
    Ok(Word(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_trace() {
        let tr = simulate_transect(1, 2, 1, 2).unwrap();
        assert_eq!((tr.q_fine, tr.p_fine), (8, 5));
        assert_eq!(tr.positions, vec![0, 5, 2, 7, 4, 1, 6, 3]);
        assert_eq!([tr.coarse[2], tr.coarse[3], tr.coarse[5], tr.coarse[6]], [0, 1, 0, 1]);
        let name = transect_name(&tr, &[Word::from_syms(&[0, 1])]).unwrap();
        assert_eq!(name.compact(), "bb01b01e");
    }

    #[test]
    fn degenerate_trace() {
        let tr = simulate_transect(1, 1, 1, 2).unwrap();
        assert_eq!((tr.q_fine, tr.p_fine), (2, 3));
        assert_eq!(tr.positions, vec![0, 1]);
        assert_eq!(transect_name(&tr, &[Word::from_syms(&[0])]).unwrap().compact(), "b0");
    }

    #[test]
    fn constant_columns_collapse_to_factor() {
        let tr = simulate_transect(2, 3, 2, 4).unwrap();
        let name = transect_name(&tr, &[Word::from_syms(&[1, 1, 1]), Word::from_syms(&[1, 1, 1])]).unwrap();
        let factor = crate::symbolic::canonical_factor(&name);
        let rebuilt: Vec<_> = factor.0.iter().map(|&l| if l == Letter::Star { Letter::Sym(1) } else { l }).collect();
        assert_eq!(rebuilt, name.0);
    }

    #[test]
    fn q_segments_add_up() {
        let tr = simulate_transect(3, 5, 2, 3).unwrap();
        let js = crate::params::j_table_u64(3, 5).unwrap();
        for (m, &(b, mid, e)) in tr.q_segments().unwrap().iter().enumerate() {
            assert_eq!(b + mid + e, 2 * 3 * 5);
            assert_eq!((b, mid, e), ((5 - js[m]) as usize, (2 * 3 - 1) * 5, js[m] as usize));
        }
        // After klq steps J sits at the start of the second q-cell.
        assert_eq!(tr.positions[2 * 3 * 5], 2 * 3 * 5);
    }

    #[test]
    fn csv_header() {
        let tr = simulate_transect(1, 2, 1, 2).unwrap();
        let csv = tr.to_csv();
        assert!(csv.starts_with("t,position,coarse_index,segment_tag\n0,0,0,begin\n"));
        assert_eq!(csv.lines().count(), 9);
    }

    #[test]
    fn rejects_non_coprime() {
        assert_eq!(simulate_transect(2, 4, 1, 2), Err(TransectError::NotCoprime { p: 2, q: 4 }));
    }
}
