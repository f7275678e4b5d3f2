//! Report types and the checks shared by `build` and `verify`.

use serde::{Deserialize, Serialize};

use abc_circular::abc::{epsilon_approximation_check, AbcStage, GridPermutation, Grid, PeriodicProcess, RequirementsReport};
use abc_circular::analytic::{GapEstimate, LStarResult};
use abc_circular::params::StageParams;
use abc_circular::symbolic::{unique_readability_check, ReadabilityWitness, Word};
use abc_circular::transect::{simulate_transect, transect_name, TransectError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    /// The check ran but its premise does not hold, so the outcome is informational.
    OutsideHypothesis,
    Skipped,
}

impl Verdict {
    pub fn of(ok: bool) -> Self {
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }

    pub fn failed(self) -> bool {
        self == Verdict::Fail
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityReport {
    pub verdict: Verdict,
    /// Whether `q_(n-1) < l_(n-1) / 2`.
    pub hypothesis: bool,
    pub witness: Option<ReadabilityWitness>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub verdict: Verdict,
    pub expected_f: Option<usize>,
    pub max_deviation: usize,
}

/// First letter at which a stored word differs from the one recomputed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mismatch {
    pub word: usize,
    pub position: usize,
    pub expected: String,
    pub found: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub verdict: Verdict,
    pub words_checked: usize,
    pub mismatch: Option<Mismatch>,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsApproxReport {
    pub verdict: Verdict,
    pub mass: Option<f64>,
    pub threshold: f64,
    pub grid: (usize, usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoodSetReport {
    pub verdict: Verdict,
    pub fraction: f64,
    pub samples: usize,
    /// `1 − ε − 3σ` for a fraction with mean `1 − ε`.
    pub threshold: f64,
    pub exceptional_bound: f64,
    /// Tabulated against direct evaluation; cell counts are exact while this stays below the edge margin.
    pub tabulation_deviation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutationReport {
    pub verdict: Verdict,
    pub residual: f64,
    /// Plain double-precision residual, for reference.
    pub residual_direct: f64,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JacobianReport {
    pub verdict: Verdict,
    pub h_deviation: f64,
    pub t_deviation: f64,
    pub tolerance: f64,
}

/// `d_ρ(T_n, T_(n-1))`. `value` is `None` when evaluation overflowed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub value: Option<f64>,
    pub overflow: Option<String>,
    pub attained_at: Option<[(f64, f64); 2]>,
    /// `ε_(n-1) / 2`.
    pub target: f64,
    pub below_target: bool,
}

impl GapReport {
    pub fn new(gap: &GapEstimate, target: f64) -> Self {
        match gap {
            GapEstimate::Finite(e) => GapReport {
                value: Some(e.value),
                overflow: None,
                attained_at: Some(e.attained_at),
                target,
                below_target: e.value < target,
            },
            GapEstimate::Overflow { message } => {
                GapReport { value: None, overflow: Some(message.clone()), attained_at: None, target, below_target: false }
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalyticReport {
    pub eps: f64,
    pub shears: usize,
    pub max_degree: usize,
    pub good_set: GoodSetReport,
    pub commutation: CommutationReport,
    pub jacobian: JacobianReport,
    pub gap: GapReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NameReport {
    pub verdict: Verdict,
    pub fraction: Option<f64>,
    pub positions: usize,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LStarReport {
    pub l: u64,
    pub found: bool,
    /// `None` entries overflowed.
    pub gap: Option<f64>,
    pub scan: Vec<(u64, Option<f64>)>,
}

fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

impl From<&LStarResult> for LStarReport {
    fn from(r: &LStarResult) -> Self {
        LStarReport { l: r.l, found: r.found, gap: finite(r.gap), scan: r.scan.iter().map(|&(l, g)| (l, finite(g))).collect() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub n: usize,
    pub p: String,
    pub q: String,
    pub k: Option<u64>,
    pub l: Option<u64>,
    pub s: u64,
    pub word_count: usize,
    pub word_length: usize,
    pub readability: Option<ReadabilityReport>,
    pub uniformity: Option<UniformityReport>,
    pub oracle: Option<OracleReport>,
    pub eps_approximation: Option<EpsApproxReport>,
    pub analytic: Option<AnalyticReport>,
    pub names: Option<NameReport>,
    pub l_star: Option<LStarReport>,
}

impl StageReport {
    pub fn new(params: &StageParams, words: &[Word]) -> Self {
        StageReport {
            n: params.n,
            p: params.p.to_string(),
            q: params.q.to_string(),
            k: params.k,
            l: params.l,
            s: params.s,
            word_count: words.len(),
            word_length: words.first().map_or(0, Word::len),
            readability: None,
            uniformity: None,
            oracle: None,
            eps_approximation: None,
            analytic: None,
            names: None,
            l_star: None,
        }
    }

    /// `(check, verdict)` for every verdict in this stage.
    pub fn verdicts(&self) -> Vec<(&'static str, Verdict)> {
        let mut v = Vec::new();
        if let Some(r) = &self.readability {
            v.push(("readability", r.verdict));
        }
        if let Some(r) = &self.uniformity {
            v.push(("uniformity", r.verdict));
        }
        if let Some(r) = &self.oracle {
            v.push(("oracle", r.verdict));
        }
        if let Some(r) = &self.eps_approximation {
            v.push(("eps_approximation", r.verdict));
        }
        if let Some(a) = &self.analytic {
            v.push(("good_set", a.good_set.verdict));
            v.push(("commutation", a.commutation.verdict));
            v.push(("jacobian", a.jacobian.verdict));
        }
        if let Some(r) = &self.names {
            v.push(("name_agreement", r.verdict));
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoundTripReport {
    pub verdict: Verdict,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RequirementsVerdict {
    pub verdict: Verdict,
    pub report: RequirementsReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub sigma_size: u64,
    pub rho: f64,
    pub eps0: f64,
    pub seed: u64,
    pub stages: Vec<StageReport>,
    pub round_trip: RoundTripReport,
    pub requirements: RequirementsVerdict,
    pub failures: Vec<String>,
    pub verdict: Verdict,
}

impl RunReport {
    /// Fills `failures` and the overall verdict from the individual checks.
    pub fn conclude(&mut self) {
        let mut failures = Vec::new();
        for st in &self.stages {
            for (name, v) in st.verdicts() {
                if v.failed() {
                    failures.push(format!("stage {}: {name}", st.n));
                }
            }
        }
        if self.round_trip.verdict.failed() {
            failures.push("round_trip".into());
        }
        if self.requirements.verdict.failed() {
            failures.push("requirements".into());
        }
        self.verdict = Verdict::of(failures.is_empty());
        self.failures = failures;
    }
}

/// Persisted form of one combinatorial stage.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageDump {
    pub n: usize,
    pub params: StageParams,
    pub h: Option<GridPermutation>,
    /// Tuples of stage-`(n-1)` word indices that produced this stage.
    pub prescription: Option<Vec<Vec<usize>>>,
    pub names: Vec<String>,
}

impl StageDump {
    pub fn new(stage: &AbcStage, prescription: Option<Vec<Vec<usize>>>) -> Self {
        StageDump {
            n: stage.params.n,
            params: stage.params.clone(),
            h: stage.h.clone(),
            prescription,
            names: stage.names.iter().map(Word::to_string).collect(),
        }
    }
}

/// Readability of stage-`n` words built from `prev` (the stage `n − 1` parameters).
pub fn readability(words: &[Word], prev: &StageParams) -> ReadabilityReport {
    let hypothesis = match (prev.q_u64(), prev.l) {
        (Ok(q), Some(l)) => 2 * q < l,
        _ => false,
    };
    let witness = unique_readability_check(words);
    let verdict = match (&witness, hypothesis) {
        (None, _) => Verdict::Pass,
        (Some(_), true) => Verdict::Fail,
        (Some(_), false) => Verdict::OutsideHypothesis,
    };
    ReadabilityReport { verdict, hypothesis, witness }
}

pub fn first_mismatch(expected: &[Word], found: &[Word]) -> Option<Mismatch> {
    let show = |w: Option<&Word>, i: usize| w.and_then(|w| w.0.get(i)).map_or("<none>".to_string(), |l| l.to_string());
    (0..expected.len().max(found.len())).find_map(|wi| {
        let (e, f) = (expected.get(wi), found.get(wi));
        let len = e.map_or(0, Word::len).max(f.map_or(0, Word::len));
        (0..len)
            .find(|&i| e.and_then(|w| w.0.get(i)) != f.and_then(|w| w.0.get(i)))
            .map(|position| Mismatch { word: wi, position, expected: show(e, position), found: show(f, position) })
    })
}

/// Rebuilds each stage-`n` word from its tuple by following the rotation's
/// itinerary, then compares with `words`.
pub fn oracle(prev_words: &[Word], tuples: &[Vec<usize>], prev: &StageParams, words: &[Word]) -> OracleReport {
    let run = || -> Result<Vec<Word>, String> {
        let (p, q) = (prev.p_u64().map_err(|e| e.to_string())?, prev.q_u64().map_err(|e| e.to_string())?);
        let (k, l) = (prev.k.ok_or("missing k")?, prev.l.ok_or("missing l")?);
        let trace = simulate_transect(p, q, k, l).map_err(|e: TransectError| e.to_string())?;
        tuples
            .iter()
            .map(|t| {
                let letters = t.iter().map(|&i| prev_words.get(i).cloned().ok_or(format!("no word {i}"))).collect::<Result<Vec<_>, _>>()?;
                transect_name(&trace, &letters).map_err(|e| e.to_string())
            })
            .collect()
    };
    match run() {
        Ok(built) => {
            let mismatch = first_mismatch(&built, words);
            OracleReport { verdict: Verdict::of(mismatch.is_none()), words_checked: built.len(), mismatch, detail: None }
        }
        Err(msg) if msg.contains("too large") => {
            OracleReport { verdict: Verdict::Skipped, words_checked: 0, mismatch: None, detail: Some(msg) }
        }
        Err(msg) => OracleReport { verdict: Verdict::Fail, words_checked: 0, mismatch: None, detail: Some(msg) },
    }
}

/// Largest grid drawn for the ε-approximation check.
const EPS_GRID_CELLS: usize = 1 << 22;

/// Stage `n − 1` against stage `n` on the `q_n × s_n` grid, threshold `2 / l_(n-1)`.
pub fn eps_approximation(stages: &[AbcStage], n: usize) -> Result<EpsApproxReport, String> {
    let (prev, cur) = (&stages[n - 1].params, &stages[n].params);
    let threshold = 2.0 / prev.l.ok_or("missing l")? as f64;
    let cols = cur.q_u64().map_err(|e| e.to_string())? as usize;
    let rows = cur.s as usize;
    if cols.saturating_mul(rows) > EPS_GRID_CELLS {
        return Ok(EpsApproxReport { verdict: Verdict::Skipped, mass: None, threshold, grid: (cols, rows) });
    }
    let g = Grid::new(cols, rows);
    let coarse = PeriodicProcess::of_stage(stages, n - 1, g).map_err(|e| e.to_string())?;
    let fine = PeriodicProcess::of_stage(stages, n, g).map_err(|e| e.to_string())?;
    let r = epsilon_approximation_check(&coarse, &fine, threshold);
    Ok(EpsApproxReport { verdict: Verdict::of(r.passed), mass: Some(r.mass), threshold, grid: (cols, rows) })
}
