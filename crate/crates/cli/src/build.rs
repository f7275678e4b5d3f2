//! `abc build`: drives the whole pipeline from a [`RunConfig`] and writes the artifacts.

use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use abc_circular::abc::{drive_from_construction_sequence, h_from_words, requirements_check, round_trip};
use abc_circular::analytic::{
    approx_permutation, commutation_residual, commutation_residual_direct, eps_schedule, find_l_star, initial_stage,
    jacobian_deviation, name_agreement, stage_from_map, AnalyticMap, AnalyticStage, LStarContext,
};
use abc_circular::params::{advance, StageParams};
use abc_circular::symbolic::{uniformity_check, ConstructionSequence, WordFamily};

use crate::config::{LSchedule, RunConfig};
use crate::io::{self, Layout};
use crate::plot;
use crate::report::{
    self, AnalyticReport, CommutationReport, GapReport, GoodSetReport, JacobianReport, LStarReport, NameReport,
    RequirementsVerdict, RoundTripReport, RunReport, StageDump, StageReport, UniformityReport, Verdict,
};
use crate::CliError;

pub const COMMUTATION_TOL: f64 = 1e-12;
pub const JACOBIAN_TOL: f64 = 1e-6;
/// Name agreement is sampled only while `q_n` stays below this.
const NAME_Q_LIMIT: u64 = 128;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub phase: String,
    pub seconds: f64,
}

pub struct BuildOutcome {
    pub report: RunReport,
    pub timings: Vec<Timing>,
    pub analytic: Vec<AnalyticStage>,
}

struct Clock(Vec<Timing>);

impl Clock {
    fn time<R>(&mut self, phase: String, f: impl FnOnce() -> R) -> R {
        let t = Instant::now();
        let r = f();
        self.0.push(Timing { phase, seconds: t.elapsed().as_secs_f64() });
        r
    }
}

/// The first `count` tuples of length `k` over `0..s` with every index
/// occurring `k / s` times, in lexicographic order.
pub fn default_tuples(k: usize, s: usize, count: usize) -> Result<Vec<Vec<usize>>, String> {
    if s == 0 || k % s != 0 {
        return Err(format!("s = {s} does not divide k = {k}"));
    }
    let mut t: Vec<usize> = (0..k).map(|i| i / (k / s)).collect();
    let mut out = vec![t.clone()];
    while out.len() < count {
        // Next lexicographic permutation of the multiset.
        let Some(i) = (1..t.len()).rev().find(|&i| t[i - 1] < t[i]) else {
            return Err(format!("only {} strongly uniform {k}-tuples over {s} words, need {count}", out.len()));
        };
        let j = (i..t.len()).rev().find(|&j| t[j] > t[i - 1]).expect("a larger entry exists");
        t.swap(i - 1, j);
        t[i..].reverse();
        out.push(t.clone());
    }
    Ok(out)
}

fn good_set_threshold(eps: f64, samples: usize) -> f64 {
    1.0 - eps - 3.0 * (eps * (1.0 - eps) / samples.max(1) as f64).sqrt()
}

pub fn cmd_build(cfg: &RunConfig, out: &Path) -> Result<BuildOutcome, CliError> {
    let mut clock = Clock(Vec::new());
    let n_stages = cfg.stages;
    let sc = cfg.samples;
    let grid = sc.strip_grid;
    let stage_err = CliError::stage;

    let mut params = vec![StageParams::initial(cfg.s[0]).map_err(|e| stage_err(0)(&e))?];
    let mut analytic = vec![initial_stage(params[0].clone())];
    let mut tuples_all = Vec::new();
    let mut analytic_reports = Vec::new();
    let mut l_reports = Vec::new();

    for n in 0..n_stages {
        let err = stage_err(n + 1);
        let (k, s_next) = (cfg.k[n], cfg.s[n + 1]);
        let (q_n, s_n) = (params[n].q_u64().map_err(|e| err(&e))?, params[n].s);
        let tuples = match cfg.prescriptions.get(&n) {
            Some(t) => t.clone(),
            None => default_tuples(k as usize, s_n as usize, s_next as usize).map_err(|e| err(&e))?,
        };
        let perm = h_from_words(&tuples, k as usize, q_n as usize, s_n as usize).map_err(|e| err(&e))?;
        let eps = eps_schedule(cfg.eps0, n + 1);
        let (h, good) = clock
            .time(format!("stage {}: approximate h", n + 1), || approx_permutation(&perm, eps, sc.good_set, cfg.seed + n as u64 + 1))
            .map_err(|e| err(&e))?;

        let (l, l_star) = match &cfg.l {
            LSchedule::Fixed(ls) => (ls[n], None),
            LSchedule::Auto => {
                let ctx = LStarContext { prev: &analytic[n], candidates: vec![h.clone()], k, s_next };
                let r = clock
                    .time(format!("stage {}: l search", n + 1), || {
                        find_l_star(&ctx, cfg.rho, eps_schedule(cfg.eps0, n), &cfg.l_budget, grid)
                    })
                    .map_err(|e| err(&e))?;
                (r.l, Some(LStarReport::from(&r)))
            }
        };
        params[n] = params[n].clone().with_outgoing(k, l);
        let next = advance(&params[n], k, l, s_next).map_err(|e| err(&e))?;

        let good_report = GoodSetReport {
            verdict: Verdict::of(sc.good_set == 0 || good.fraction >= good_set_threshold(eps, sc.good_set)),
            fraction: good.fraction,
            samples: good.samples,
            threshold: good_set_threshold(eps, sc.good_set),
            exceptional_bound: good.exceptional_bound,
            tabulation_deviation: good.tabulation_deviation,
        };
        let stage = clock
            .time(format!("stage {}: assemble T and gap", n + 1), || {
                stage_from_map(&analytic[n], h, &next, Some(good), cfg.rho, grid)
            })
            .map_err(|e| err(&e))?;
        let seed = cfg.seed + 1000 * (n as u64 + 1);
        let (residual, residual_direct, h_dev, t_dev) = clock.time(format!("stage {}: map checks", n + 1), || {
            (
                commutation_residual(&stage.h, perm.period as u64, sc.commutation, seed),
                commutation_residual_direct(&stage.h, perm.period as u64, sc.commutation, seed),
                jacobian_deviation(&stage.h, sc.jacobian, seed + 1),
                jacobian_deviation(&stage.t, sc.jacobian, seed + 2),
            )
        });
        let gap = stage.gap.as_ref().expect("assembled stages carry a gap");
        analytic_reports.push(AnalyticReport {
            eps,
            shears: stage.h.shear_count(),
            max_degree: stage.h.max_degree(),
            good_set: good_report,
            commutation: CommutationReport {
                verdict: Verdict::of(residual <= COMMUTATION_TOL),
                residual,
                residual_direct,
                tolerance: COMMUTATION_TOL,
            },
            jacobian: JacobianReport {
                verdict: Verdict::of(h_dev.max(t_dev) <= JACOBIAN_TOL),
                h_deviation: h_dev,
                t_deviation: t_dev,
                tolerance: JACOBIAN_TOL,
            },
            gap: GapReport::new(gap, eps_schedule(cfg.eps0, n) / 2.0),
        });
        l_reports.push(l_star);
        tuples_all.push(tuples);
        params.push(next);
        analytic.push(stage);
    }

    let seq = ConstructionSequence::build(params.clone(), tuples_all.clone()).map_err(|e| stage_err(n_stages)(&e))?;
    let stages = clock
        .time("drive construction sequence".into(), || drive_from_construction_sequence(&seq))
        .map_err(|e| stage_err(n_stages)(&e))?;
    let rt = round_trip(&seq, &stages);
    let req = requirements_check(&stages).map_err(|e| stage_err(n_stages)(&e))?;

    let mut stage_reports = Vec::new();
    for n in 0..=n_stages {
        let mut sr = StageReport::new(&params[n], &seq.stages[n]);
        if n > 0 {
            let prev = &params[n - 1];
            let err = stage_err(n);
            sr.readability = Some(clock.time(format!("stage {n}: readability"), || report::readability(&seq.stages[n], prev)));
            let u = uniformity_check(&seq, n - 1).map_err(|e| err(&e))?;
            sr.uniformity = Some(UniformityReport {
                verdict: Verdict::of(u.strongly_uniform),
                expected_f: u.expected_f,
                max_deviation: u.max_deviation,
            });
            sr.oracle = Some(clock.time(format!("stage {n}: transect oracle"), || {
                report::oracle(&seq.stages[n - 1], &tuples_all[n - 1], prev, &seq.stages[n])
            }));
            sr.eps_approximation = Some(report::eps_approximation(&stages, n).map_err(|e| err(&e))?);
            sr.analytic = Some(analytic_reports[n - 1].clone());
            sr.l_star = l_reports[n - 1].clone();
            let threshold = 1.0 - 3.0 / prev.l.expect("outgoing l is set") as f64 - 0.05;
            sr.names = Some(if params[n].q_u64().map_or(false, |q| q <= NAME_Q_LIMIT) {
                let a = clock
                    .time(format!("stage {n}: name agreement"), || {
                        name_agreement(&analytic[n].conj, &params[n], &stages[n].names, cfg.sigma_size, sc.names, cfg.seed + n as u64)
                    })
                    .map_err(|e| err(&e))?;
                NameReport { verdict: Verdict::of(a.fraction >= threshold), fraction: Some(a.fraction), positions: a.positions, threshold }
            } else {
                NameReport { verdict: Verdict::Skipped, fraction: None, positions: 0, threshold }
            });
        }
        stage_reports.push(sr);
    }

    let mut report = RunReport {
        sigma_size: cfg.sigma_size,
        rho: cfg.rho,
        eps0: cfg.eps0,
        seed: cfg.seed,
        stages: stage_reports,
        round_trip: RoundTripReport { verdict: Verdict::of(rt.is_ok()), detail: rt.err().map(|e| e.to_string()) },
        requirements: RequirementsVerdict { verdict: Verdict::of(req.all_pass()), report: req },
        failures: Vec::new(),
        verdict: Verdict::Pass,
    };
    report.conclude();

    let layout = Layout::new(out);
    clock.time("write artifacts".into(), || -> Result<(), CliError> {
        io::write(&layout.config(), cfg.to_text())?;
        io::write_json(&layout.params(), &params)?;
        for n in 0..=n_stages {
            let fam = WordFamily { stage: n, q: params[n].q.to_string(), words: seq.stages[n].clone() };
            io::write(&layout.words(n), fam.to_text())?;
            let pres = (n > 0).then(|| tuples_all[n - 1].clone());
            io::write_json(&layout.stage(n), &StageDump::new(&stages[n], pres))?;
            if n > 0 {
                io::write(&layout.map(n), analytic[n].h.to_json())?;
            }
        }
        Ok(())
    })?;
    clock.time("plots".into(), || write_plots(&layout, &analytic, &report, sc.plot_size))?;
    io::write_json(&layout.report(), &report)?;
    io::write_json(&layout.timings(), &clock.0)?;
    Ok(BuildOutcome { report, timings: clock.0, analytic })
}

fn write_plots(layout: &Layout, analytic: &[AnalyticStage], report: &RunReport, size: usize) -> Result<(), CliError> {
    let save = |img: image::RgbImage, name: String| {
        let path = layout.plot(&name);
        io::write(&path, plot::png_bytes(&img).map_err(|msg| CliError::Parse { path: path.clone(), msg })?)
    };
    for st in analytic.iter().skip(1) {
        let n = st.params.n;
        let err = CliError::stage(n);
        save(plot::partition_image(&st.conj, &st.params, size).map_err(|e| err(&e))?, format!("partition_{n}.png"))?;
        save(plot::orbit_scatter(&st.conj, &st.params, 2 * size).map_err(|e| err(&e))?, format!("orbit_{n}.png"))?;
    }
    let gaps: Vec<(Option<f64>, f64)> =
        report.stages.iter().filter_map(|s| s.analytic.as_ref()).map(|a| (a.gap.value, a.gap.target)).collect();
    save(plot::gap_chart(&gaps, size), "gaps.png".into())
}

/// `H_n^(a)` rebuilt from persisted `h_1 … h_n` maps.
pub fn compose_conjugacies(hs: &[AnalyticMap]) -> AnalyticMap {
    hs.iter().fold(AnalyticMap::identity(), |conj, h| h.then(&conj))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_tuples_enumerate_multiset_permutations() {
        assert_eq!(default_tuples(2, 2, 2).unwrap(), vec![vec![0, 1], vec![1, 0]]);
        let all = default_tuples(4, 2, 6).unwrap();
        assert_eq!(all[0], vec![0, 0, 1, 1]);
        assert_eq!(all[5], vec![1, 1, 0, 0]);
        assert!(default_tuples(4, 2, 7).is_err());
        assert!(default_tuples(3, 2, 1).is_err());
    }

    #[test]
    fn thresholds() {
        assert!((good_set_threshold(0.05, 100_000) - (0.95 - 3.0 * (0.0475f64 / 1e5).sqrt())).abs() < 1e-15);
    }
}
