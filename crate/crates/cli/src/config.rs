//! The `key = value` run configuration.
//!
//! ```text
//! stages = 2
//! sigma_size = 2
//! k = 2, 2
//! l = auto            # or a list such as 2, 4
//! s = 2, 2, 2         # includes s_0 = sigma_size
//! prescription.1 = 0,1;1,0
//! ```
//!
//! Lists accept optional brackets. `prescription.n` gives the tuples (indices
//! into the stage-`n` words, tuples separated by `;`) that generate stage
//! `n + 1`; missing stages get the first `s_(n+1)` strongly uniform tuples in
//! lexicographic order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LSchedule {
    Fixed(Vec<u64>),
    Auto,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub good_set: usize,
    pub names: usize,
    pub commutation: usize,
    pub jacobian: usize,
    /// Lattice density of the strip estimates.
    pub strip_grid: usize,
    /// Side of the square partition image in pixels.
    pub plot_size: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        SampleCounts { good_set: 20_000, names: 1_000, commutation: 1_000, jacobian: 500, strip_grid: 8, plot_size: 96 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub stages: usize,
    pub k: Vec<u64>,
    pub l: LSchedule,
    pub s: Vec<u64>,
    pub sigma_size: u64,
    pub rho: f64,
    pub eps0: f64,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub samples: SampleCounts,
    /// Values of `l` tried by the automatic search.
    pub l_budget: Vec<u64>,
    pub prescriptions: BTreeMap<usize, Vec<Vec<usize>>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            stages: 1,
            k: vec![2],
            l: LSchedule::Fixed(vec![2]),
            s: vec![2, 2],
            sigma_size: 2,
            rho: 0.1,
            eps0: 0.1,
            seed: 1,
            output_dir: None,
            samples: SampleCounts::default(),
            l_budget: vec![2, 4, 8, 16],
            prescriptions: BTreeMap::new(),
        }
    }
}

/// Command-line values that replace configuration entries.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub stages: Option<usize>,
    pub rho: Option<f64>,
    pub l: Option<String>,
    pub out: Option<PathBuf>,
}

fn list<T: std::str::FromStr>(v: &str) -> Result<Vec<T>, String> {
    let v = v.trim().trim_start_matches('[').trim_end_matches(']');
    if v.trim().is_empty() {
        return Ok(Vec::new());
    }
    v.split(',').map(|x| x.trim().parse::<T>().map_err(|_| format!("bad list entry {:?}", x.trim()))).collect()
}

fn scalar<T: std::str::FromStr>(v: &str) -> Result<T, String> {
    v.trim().parse().map_err(|_| format!("bad value {:?}", v.trim()))
}

fn parse_l(v: &str) -> Result<LSchedule, String> {
    if v.trim() == "auto" {
        Ok(LSchedule::Auto)
    } else {
        list(v).map(LSchedule::Fixed)
    }
}

fn parse_tuples(v: &str) -> Result<Vec<Vec<usize>>, String> {
    v.split(';').filter(|t| !t.trim().is_empty()).map(list).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let mut seen_l = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |msg: String| CliError::Config { line: i + 1, msg };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key = value, got {line:?}")))?;
            let (key, value) = (key.trim(), value.trim());
            let sc = &mut cfg.samples;
            match key {
                "stages" => cfg.stages = scalar(value).map_err(err)?,
                "k" | "k_schedule" => cfg.k = list(value).map_err(err)?,
                "l" | "l_schedule" => {
                    cfg.l = parse_l(value).map_err(err)?;
                    seen_l = true;
                }
                "s" | "s_schedule" => cfg.s = list(value).map_err(err)?,
                "sigma_size" => cfg.sigma_size = scalar(value).map_err(err)?,
                "rho" => cfg.rho = scalar(value).map_err(err)?,
                "eps0" => cfg.eps0 = scalar(value).map_err(err)?,
                "seed" => cfg.seed = scalar(value).map_err(err)?,
                "output_dir" => cfg.output_dir = Some(PathBuf::from(value)),
                "l_budget" => cfg.l_budget = list(value).map_err(err)?,
                "samples.good_set" => sc.good_set = scalar(value).map_err(err)?,
                "samples.names" => sc.names = scalar(value).map_err(err)?,
                "samples.commutation" => sc.commutation = scalar(value).map_err(err)?,
                "samples.jacobian" => sc.jacobian = scalar(value).map_err(err)?,
                "samples.strip_grid" => sc.strip_grid = scalar(value).map_err(err)?,
                "samples.plot_size" => sc.plot_size = scalar(value).map_err(err)?,
                _ => match key.strip_prefix("prescription.") {
                    Some(n) => {
                        let n: usize = scalar(n).map_err(err)?;
                        cfg.prescriptions.insert(n, parse_tuples(value).map_err(err)?);
                    }
                    None => return Err(err(format!("unknown key {key:?}"))),
                },
            }
        }
        if !seen_l {
            return Err(CliError::Config { line: 0, msg: "missing l schedule".into() });
        }
        Ok(cfg)
    }

    /// Applies flag values, then trims schedules longer than `stages` and
    /// checks everything else.
    pub fn finish(mut self, o: &Overrides) -> Result<Self, CliError> {
        if let Some(n) = o.stages {
            self.stages = n;
        }
        if let Some(r) = o.rho {
            self.rho = r;
        }
        if let Some(l) = &o.l {
            self.l = parse_l(l).map_err(CliError::Usage)?;
        }
        if let Some(out) = &o.out {
            self.output_dir = Some(out.clone());
        }
        let n = self.stages;
        let bad = |msg: String| Err(CliError::Usage(msg));
        if n == 0 {
            return bad("stages must be at least 1".into());
        }
        if self.k.len() < n || self.s.len() < n + 1 {
            return bad(format!("{n} stages need {n} k values and {} s values, got {} and {}", n + 1, self.k.len(), self.s.len()));
        }
        if let LSchedule::Fixed(ls) = &mut self.l {
            if ls.len() < n {
                return bad(format!("{n} stages need {n} l values, got {}", ls.len()));
            }
            ls.truncate(n);
        }
        self.k.truncate(n);
        self.s.truncate(n + 1);
        self.prescriptions.retain(|&m, _| m < n);
        if self.s[0] != self.sigma_size {
            return bad(format!("s_0 = {} differs from sigma_size = {}", self.s[0], self.sigma_size));
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad(format!("rho must be positive, got {}", self.rho));
        }
        if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
            return bad(format!("eps0 must lie in (0, 1), got {}", self.eps0));
        }
        if self.l == LSchedule::Auto && self.l_budget.is_empty() {
            return bad("l = auto needs a nonempty l_budget".into());
        }
        Ok(self)
    }

    /// The effective configuration in the same format [`RunConfig::parse`] reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "stages = {}", self.stages);
        let _ = writeln!(s, "sigma_size = {}", self.sigma_size);
        let _ = writeln!(s, "k = {}", join(&self.k));
        match &self.l {
            LSchedule::Auto => s.push_str("l = auto\n"),
            LSchedule::Fixed(ls) => {
                let _ = writeln!(s, "l = {}", join(ls));
            }
        }
        let _ = writeln!(s, "s = {}", join(&self.s));
        let _ = writeln!(s, "rho = {:?}", self.rho);
        let _ = writeln!(s, "eps0 = {:?}", self.eps0);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "l_budget = {}", join(&self.l_budget));
        let c = &self.samples;
        let _ = writeln!(s, "samples.good_set = {}", c.good_set);
        let _ = writeln!(s, "samples.names = {}", c.names);
        let _ = writeln!(s, "samples.commutation = {}", c.commutation);
        let _ = writeln!(s, "samples.jacobian = {}", c.jacobian);
        let _ = writeln!(s, "samples.strip_grid = {}", c.strip_grid);
        let _ = writeln!(s, "samples.plot_size = {}", c.plot_size);
        for (n, tuples) in &self.prescriptions {
            let t: Vec<String> = tuples.iter().map(|t| t.iter().map(usize::to_string).collect::<Vec<_>>().join(",")).collect();
            let _ = writeln!(s, "prescription.{n} = {}", t.join(";"));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "stages = 1\nk = [2]\nl = [2]\ns = [2, 2]\nsigma_size = 2\n";

    #[test]
    fn minimal_parses_with_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap().finish(&Overrides::default()).unwrap();
        assert_eq!((c.stages, c.k.clone(), c.s.clone()), (1, vec![2], vec![2, 2]));
        assert_eq!(c.l, LSchedule::Fixed(vec![2]));
        assert_eq!(c.rho, 0.1);
    }

    #[test]
    fn flags_win_and_schedules_trim() {
        let text = "stages = 2\nk = 2,2\nl = 2,4\ns = 2,2,2\nsigma_size = 2\nprescription.1 = 0,1;1,0\n";
        let o = Overrides { stages: Some(1), rho: Some(0.5), l: Some("auto".into()), out: None };
        let c = RunConfig::parse(text).unwrap().finish(&o).unwrap();
        assert_eq!((c.stages, c.rho, c.l.clone()), (1, 0.5, LSchedule::Auto));
        assert_eq!((c.k.len(), c.s.len()), (1, 2));
        assert!(c.prescriptions.is_empty());
    }

    #[test]
    fn text_round_trip() {
        let text = "stages = 2\nk = 2,2\nl = auto\ns = 2,2,2\nsigma_size = 2\nprescription.0 = 1,0;0,1\nseed = 9\n";
        let c = RunConfig::parse(text).unwrap().finish(&Overrides::default()).unwrap();
        assert_eq!(RunConfig::parse(&c.to_text()).unwrap(), c);
    }

    #[test]
    fn errors_carry_line_numbers() {
        match RunConfig::parse("stages = 1\nk = 2\nbogus = 3\n") {
            Err(CliError::Config { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        match RunConfig::parse("stages = x\n") {
            Err(CliError::Config { line: 1, msg }) => assert!(msg.contains("\"x\"")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_schedules_are_rejected() {
        let c = RunConfig::parse("stages = 2\nk = 2\nl = 2\ns = 2,2\nsigma_size = 2\n").unwrap();
        assert!(matches!(c.finish(&Overrides::default()), Err(CliError::Usage(_))));
    }
}
