//! `abc compare`: common prefix of two builds and `d_ρ` between their final maps.

use std::path::Path;

use serde::{Deserialize, Serialize};

use abc_circular::analytic::{conjugated_rotation, eps_schedule, strip_distance, GapEstimate};

use crate::build::compose_conjugacies;
use crate::report::Verdict;
use crate::verify::Build;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub stages_a: usize,
    pub stages_b: usize,
    /// Largest `M` with identical stage words `𝒲_1 … 𝒲_M`.
    pub common_prefix: usize,
    pub rho: f64,
    /// `d_ρ` between the final maps; `None` after an overflow.
    pub d_rho: Option<f64>,
    pub overflow: Option<String>,
    /// `ε_M`, present when `M ≥ 1`.
    pub threshold: Option<f64>,
    pub verdict: Verdict,
}

pub fn cmd_compare(a: &Path, b: &Path, rho: Option<f64>) -> Result<CompareReport, CliError> {
    let (ba, bb) = (Build::load(a)?, Build::load(b)?);
    if ba.config.sigma_size != bb.config.sigma_size {
        return Err(CliError::Incompatible(format!(
            "alphabets of size {} and {}",
            ba.config.sigma_size, bb.config.sigma_size
        )));
    }
    let common_prefix = (1..=ba.depth().min(bb.depth()))
        .take_while(|&n| ba.params[n] == bb.params[n] && ba.words[n].words == bb.words[n].words)
        .count();
    let rho = rho.unwrap_or(ba.config.rho);
    let final_map = |bd: &Build| -> Result<_, CliError> {
        let conj = compose_conjugacies(&bd.maps()?);
        Ok(conjugated_rotation(&conj, bd.params[bd.depth()].alpha()))
    };
    let (ta, tb) = (final_map(&ba)?, final_map(&bb)?);
    let gap = if ta == tb {
        Ok(0.0)
    } else {
        let est = GapEstimate::of(strip_distance(&ta, &tb, rho, ba.config.samples.strip_grid))
            .map_err(|e| CliError::Incompatible(e.to_string()))?;
        match est {
            GapEstimate::Finite(e) => Ok(e.value),
            GapEstimate::Overflow { message } => Err(message),
        }
    };
    let threshold = (common_prefix >= 1).then(|| eps_schedule(ba.config.eps0, common_prefix));
    let verdict = match (threshold, &gap) {
        (None, _) => Verdict::Skipped,
        (Some(t), Ok(d)) => Verdict::of(*d < t),
        (Some(_), Err(_)) => Verdict::Fail,
    };
    Ok(CompareReport {
        stages_a: ba.depth(),
        stages_b: bb.depth(),
        common_prefix,
        rho,
        d_rho: gap.as_ref().ok().copied(),
        overflow: gap.err(),
        threshold,
        verdict,
    })
}
