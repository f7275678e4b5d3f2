use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use abc_circular::par;
use abc_cli::{cmd_build, cmd_compare, cmd_verify, exit, CliError, Overrides, RunConfig, Verdict};

#[derive(Parser)]
#[command(name = "abc", version, about = "Finite-stage AbC constructions on the 2-torus")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build all stages from a config file and write artifacts to DIR.
    Build {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        stages: Option<usize>,
        #[arg(long)]
        rho: Option<f64>,
        /// `auto` or a comma-separated list.
        #[arg(long)]
        l: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute verdicts from build directories, word files or JSON dumps.
    Verify {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Common prefix and d_rho between the final maps of two builds.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        rho: Option<f64>,
    },
}

fn run(cli: Cli) -> Result<i32, CliError> {
    match cli.command {
        Command::Build { config, stages, rho, l, out } => {
            let text = std::fs::read_to_string(&config).map_err(|source| CliError::Io { path: config.clone(), source })?;
            let cfg = RunConfig::parse(&text)?.finish(&Overrides { stages, rho, l, out })?;
            let dir = cfg.output_dir.clone().ok_or_else(|| CliError::Usage("no output directory (--out)".into()))?;
            let outcome = cmd_build(&cfg, &dir)?;
            let r = &outcome.report;
            for st in &r.stages {
                let gap = st.analytic.as_ref().map(|a| match a.gap.value {
                    Some(v) => format!(" d_rho={v:e}"),
                    None => " d_rho=overflow".into(),
                });
                let l = st.l_star.as_ref().map(|x| format!(" l*={}", x.l)).unwrap_or_default();
                println!("stage {}: q={} words={}{}{}", st.n, st.q, st.word_count, gap.unwrap_or_default(), l);
            }
            for f in &r.failures {
                println!("FAIL {f}");
            }
            println!("report: {}", dir.join("report.json").display());
            Ok(if r.verdict == Verdict::Pass { exit::PASS } else { exit::VERDICT_FAILURE })
        }
        Command::Verify { paths } => {
            let rep = cmd_verify(&paths)?;
            for c in &rep.checks {
                println!("{:?} {} {}: {}", c.verdict, c.subject, c.check, c.detail);
            }
            Ok(if rep.passed() { exit::PASS } else { exit::VERDICT_FAILURE })
        }
        Command::Compare { a, b, rho } => {
            let rep = cmd_compare(&a, &b, rho)?;
            println!("{}", serde_json::to_string_pretty(&rep).expect("report serialises"));
            Ok(if rep.verdict.failed() { exit::VERDICT_FAILURE } else { exit::PASS })
        }
    }
}

fn main() -> ExitCode {
    let threads = std::env::var("ABC_THREADS").ok().and_then(|v| v.parse().ok());
    par::init_threads(threads);
    let cli = Cli::parse();
    let code = run(cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        exit::USAGE
    });
    ExitCode::from(code as u8)
}
