//! `abc verify`: recomputes every verdict from persisted artifacts.
//!
//! A build directory is checked as a whole. A single word file is checked on
//! its own, and also against its build when it sits in `<build>/words/`.
//! A `.json` file may be a stage dump or an analytic map.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use abc_circular::abc::{h_from_words, requirements_check, round_trip, tower_names, AbcStage};
use abc_circular::analytic::{
    commutation_residual, eps_schedule, good_set_fraction, jacobian_deviation, AnalyticMap,
};
use abc_circular::params::StageParams;
use abc_circular::symbolic::{uniformity_check, unique_readability_check, ConstructionSequence, Letter, Word, WordFamily};

use crate::build::{COMMUTATION_TOL, JACOBIAN_TOL};
use crate::config::RunConfig;
use crate::io::{self, Layout};
use crate::report::{self, first_mismatch, Mismatch, StageDump, Verdict};
use crate::CliError;

const MAP_SAMPLES: usize = 500;
const GOOD_SET_SAMPLES: usize = 2_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub subject: String,
    pub check: String,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    fn push(&mut self, subject: &str, check: &str, verdict: Verdict, detail: impl Into<String>) {
        self.checks.push(Check { subject: subject.into(), check: check.into(), verdict, detail: detail.into() });
    }

    pub fn passed(&self) -> bool {
        !self.checks.iter().any(|c| c.verdict.failed())
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| c.verdict.failed())
    }
}

fn describe(m: &Option<Mismatch>) -> String {
    match m {
        None => "all letters agree".into(),
        Some(m) => format!("word {} position {}: expected {} found {}", m.word, m.position, m.expected, m.found),
    }
}

fn parse_err(path: &Path) -> impl Fn(&dyn std::fmt::Display) -> CliError + '_ {
    move |e| CliError::Parse { path: path.to_path_buf(), msg: e.to_string() }
}

fn parse_words(path: &Path) -> Result<WordFamily, CliError> {
    WordFamily::parse(&io::read(path)?).map_err(|e| parse_err(path)(&e))
}

fn parse_name(path: &Path, s: &str) -> Result<Word, CliError> {
    s.split_whitespace().map(str::parse::<Letter>).collect::<Result<Vec<_>, _>>().map(Word).map_err(|e| parse_err(path)(&e))
}

/// Everything a build directory holds, parsed.
pub(crate) struct Build {
    pub config: RunConfig,
    pub params: Vec<StageParams>,
    pub dumps: Vec<StageDump>,
    pub words: Vec<WordFamily>,
    pub layout: Layout,
}

impl Build {
    pub(crate) fn load(dir: &Path) -> Result<Self, CliError> {
        let layout = Layout::new(dir);
        let config = RunConfig::parse(&io::read(&layout.config())?).map_err(|e| parse_err(&layout.config())(&e))?;
        let params: Vec<StageParams> = io::read_json(&layout.params())?;
        if params.is_empty() {
            return Err(CliError::Parse { path: layout.params(), msg: "no stages".into() });
        }
        let mut dumps = Vec::new();
        let mut words = Vec::new();
        for n in 0..params.len() {
            dumps.push(io::read_json::<StageDump>(&layout.stage(n))?);
            words.push(parse_words(&layout.words(n))?);
        }
        Ok(Build { config, params, dumps, words, layout })
    }

    pub(crate) fn depth(&self) -> usize {
        self.params.len() - 1
    }

    pub(crate) fn sequence(&self) -> Result<ConstructionSequence, CliError> {
        let pres = self.dumps.iter().skip(1).map(|d| d.prescription.clone().unwrap_or_default()).collect();
        ConstructionSequence::build(self.params.clone(), pres).map_err(|e| parse_err(&self.layout.params())(&e))
    }

    fn abc_stages(&self) -> Result<Vec<AbcStage>, CliError> {
        self.dumps
            .iter()
            .enumerate()
            .map(|(n, d)| {
                let path = self.layout.stage(n);
                let names = d.names.iter().map(|s| parse_name(&path, s)).collect::<Result<_, _>>()?;
                Ok(AbcStage { params: d.params.clone(), h: d.h.clone(), names })
            })
            .collect()
    }

    pub(crate) fn maps(&self) -> Result<Vec<AnalyticMap>, CliError> {
        (1..=self.depth())
            .map(|n| {
                let path = self.layout.map(n);
                AnalyticMap::from_json(&io::read(&path)?).map_err(|e| parse_err(&path)(&e))
            })
            .collect()
    }
}

pub fn cmd_verify(paths: &[PathBuf]) -> Result<VerifyReport, CliError> {
    if paths.is_empty() {
        return Err(CliError::Usage("verify needs at least one path".into()));
    }
    let mut rep = VerifyReport::default();
    for path in paths {
        if path.is_dir() {
            verify_build(path, &mut rep)?;
        } else if path.extension().is_some_and(|e| e == "json") {
            verify_json(path, &mut rep)?;
        } else {
            verify_word_file(path, &mut rep)?;
        }
    }
    Ok(rep)
}

fn verify_build(dir: &Path, rep: &mut VerifyReport) -> Result<(), CliError> {
    let b = Build::load(dir)?;
    let subject = dir.display().to_string();
    let seq = b.sequence()?;
    let stages = b.abc_stages()?;
    let maps = b.maps()?;
    for n in 1..=b.depth() {
        let sub = format!("{subject} stage {n}");
        let words = &b.words[n].words;
        let prev = &b.params[n - 1];
        let m = first_mismatch(&seq.stages[n], words);
        rep.push(&sub, "name_match", Verdict::of(m.is_none()), describe(&m));
        let m = first_mismatch(&seq.stages[n], &stages[n].names);
        rep.push(&sub, "dump_names", Verdict::of(m.is_none()), describe(&m));

        let dump = &b.dumps[n];
        let tuples = dump.prescription.clone().unwrap_or_default();
        match &dump.h {
            Some(h) => {
                let rebuilt = h_from_words(&tuples, prev.k.unwrap_or(0) as usize, prev.q_u64().unwrap_or(0) as usize, prev.s as usize);
                let ok = h.is_untwisted() && h.commutes_with_rotation() && rebuilt.as_ref() == Ok(h);
                rep.push(&sub, "h_permutation", Verdict::of(ok), format!("grid {}x{}, period {}", h.grid.cols, h.grid.rows, h.period));
                match tower_names(&stages[n - 1], h, &b.params[n]) {
                    Ok(names) => {
                        let m = first_mismatch(&names, words);
                        rep.push(&sub, "tower_names", Verdict::of(m.is_none()), describe(&m));
                    }
                    Err(e) => rep.push(&sub, "tower_names", Verdict::Fail, e.to_string()),
                }
                let map = &maps[n - 1];
                let eps = eps_schedule(b.config.eps0, n);
                let res = commutation_residual(map, h.period as u64, MAP_SAMPLES, 11);
                rep.push(&sub, "commutation", Verdict::of(res <= COMMUTATION_TOL), format!("residual {res:e}"));
                let dev = jacobian_deviation(map, MAP_SAMPLES, 12);
                rep.push(&sub, "jacobian", Verdict::of(dev <= JACOBIAN_TOL), format!("max |det - 1| = {dev:e}"));
                let frac = good_set_fraction(map, h, GOOD_SET_SAMPLES, 13);
                let sigma = (eps * (1.0 - eps) / GOOD_SET_SAMPLES as f64).sqrt();
                rep.push(&sub, "good_set", Verdict::of(frac >= 1.0 - eps - 3.0 * sigma), format!("fraction {frac} at eps {eps}"));
            }
            None => rep.push(&sub, "h_permutation", Verdict::Fail, "stage dump has no h"),
        }

        let r = report::readability(words, prev);
        rep.push(&sub, "readability", r.verdict, format!("{:?}", r.witness));
        let u = uniformity_check(&seq, n - 1).map_err(|e| parse_err(&b.layout.stage(n))(&e))?;
        rep.push(&sub, "uniformity", Verdict::of(u.strongly_uniform), format!("max deviation {}", u.max_deviation));
        let o = report::oracle(&b.words[n - 1].words, &tuples, prev, words);
        rep.push(&sub, "oracle", o.verdict, o.detail.unwrap_or_else(|| describe(&o.mismatch)));
        match report::eps_approximation(&stages, n) {
            Ok(e) => rep.push(&sub, "eps_approximation", e.verdict, format!("mass {:?} < {}", e.mass, e.threshold)),
            Err(msg) => rep.push(&sub, "eps_approximation", Verdict::Fail, msg),
        }
    }
    let rt = round_trip(&seq, &stages);
    rep.push(&subject, "round_trip", Verdict::of(rt.is_ok()), rt.err().map_or(String::new(), |e| e.to_string()));
    match requirements_check(&stages) {
        Ok(r) => rep.push(&subject, "requirements", Verdict::of(r.all_pass()), format!("{r:?}")),
        Err(e) => rep.push(&subject, "requirements", Verdict::Fail, e.to_string()),
    }
    Ok(())
}

fn verify_word_file(path: &Path, rep: &mut VerifyReport) -> Result<(), CliError> {
    let fam = parse_words(path)?;
    let subject = path.display().to_string();
    let root = path.parent().filter(|d| d.ends_with("words")).and_then(Path::parent);
    let build = root.filter(|r| Layout::new(r).params().exists()).map(Build::load).transpose()?;
    match build {
        Some(b) if fam.stage >= 1 && fam.stage <= b.depth() => {
            let seq = b.sequence()?;
            let m = first_mismatch(&seq.stages[fam.stage], &fam.words);
            rep.push(&subject, "name_match", Verdict::of(m.is_none()), describe(&m));
            let r = report::readability(&fam.words, &b.params[fam.stage - 1]);
            rep.push(&subject, "readability", r.verdict, format!("{:?}", r.witness));
        }
        _ => {
            let w = unique_readability_check(&fam.words);
            rep.push(&subject, "readability", Verdict::of(w.is_none()), format!("{w:?}"));
        }
    }
    Ok(())
}

fn verify_json(path: &Path, rep: &mut VerifyReport) -> Result<(), CliError> {
    let text = io::read(path)?;
    let subject = path.display().to_string();
    if let Ok(dump) = serde_json::from_str::<StageDump>(&text) {
        let names = dump.names.iter().map(|s| parse_name(path, s)).collect::<Result<Vec<_>, _>>()?;
        let q = dump.params.q_u64().unwrap_or(0) as usize;
        rep.push(&subject, "name_lengths", Verdict::of(names.iter().all(|w| w.len() == q)), format!("q = {q}"));
        if let Some(h) = &dump.h {
            let ok = h.is_untwisted() && h.commutes_with_rotation();
            rep.push(&subject, "h_permutation", Verdict::of(ok), format!("grid {}x{}", h.grid.cols, h.grid.rows));
        }
        return Ok(());
    }
    let map = AnalyticMap::from_json(&text).map_err(|e| parse_err(path)(&e))?;
    let dev = jacobian_deviation(&map, MAP_SAMPLES, 12);
    rep.push(&subject, "jacobian", Verdict::of(dev <= JACOBIAN_TOL), format!("max |det - 1| = {dev:e}"));
    Ok(())
}
