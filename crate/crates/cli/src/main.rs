use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fiberdim::dimension_oracle::{box_dimension_cloud, julia_ladder};
use fiberdim::experiments::{gap_scan, kink_scan, motion_speed_check, sandwich_report};
use fiberdim::orbits::{julia_cloud, Pullback};
use fiberdim::param_seq::GRAMMAR;
use fiberdim::pressure::{pressure_curve_with, NWindow, WindowSpectra, Which};
use fiberdim::verify::{run_suite, VerifyConfig};
use fiberdim::{export, Error, Sequence, SequenceSpec, SignSchedule};

use fiberdim_cli::config::{parse_pairs, Command, RunConfig, Scan};

/// Largest allowed distance between the box-counting slope and the lower
/// Bowen zero in `dimension --box-check`.
const BOX_AGREEMENT: f64 = 0.05;

#[derive(Parser)]
#[command(name = "fiberdim", version, about = "Pressure, Bowen zeros and perturbation experiments for non-autonomous quadratic Julia sets")]
#[command(after_help = GRAMMAR)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Depth-n preimage cloud as CSV (word,re,im,log_deriv)
    Julia(Flags),
    /// Finite-n pressure curves as CSV (n,t,a_n)
    Pressure(Flags),
    /// Lower/upper Bowen zeros, optionally cross-checked by box counting
    Dimension(Flags),
    /// Perturbation scans: kink, gap or sandwich
    Perturb(Flags),
    /// Holomorphic-motion speed check
    Motion(Flags),
    /// Run the invariant suite and print pass/fail per check
    Verify(Flags),
}

#[derive(Args)]
struct Flags {
    /// key=value file; flags given on the command line override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sequence spec, e.g. const:50 (see the grammar below)
    #[arg(long, allow_hyphen_values = true)]
    seq: Option<String>,
    /// Tree depth for julia, motion, verify and the box-count cloud [default: 18]
    #[arg(long)]
    depth: Option<String>,
    /// Fiber index j for julia and pressure [default: 0]
    #[arg(long)]
    fiber: Option<String>,
    /// t grid: start:stop:count or a comma list
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Depth range a:b [default: 1:20]
    #[arg(long)]
    n: Option<String>,
    /// Depth window a:b for windowed estimates [default: upper half of --n]
    #[arg(long)]
    window: Option<String>,
    /// x grid: start:stop:count or a comma list
    #[arg(long, allow_hyphen_values = true)]
    x: Option<String>,
    /// Sign blocks <initial>x<ratio> [default: 2x2]
    #[arg(long)]
    blocks: Option<String>,
    /// kink, gap or sandwich [default: kink]
    #[arg(long)]
    scan: Option<String>,
    /// Pullback anchor, a complex literal [default: 1]
    #[arg(long, allow_hyphen_values = true)]
    anchor: Option<String>,
    /// Root-finding tolerance [default: 1e-6]
    #[arg(long)]
    tol: Option<String>,
    /// planar or spherical derivatives [default: planar]
    #[arg(long)]
    metric: Option<String>,
    /// Cross-check the lower Bowen zero against box counting
    #[arg(long)]
    box_check: bool,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    workers: Option<String>,
    /// Replaces the seed of a random sequence spec
    #[arg(long)]
    seed: Option<String>,
    /// Output file [default: stdout]
    #[arg(long)]
    out: Option<String>,
    /// Print the resolved configuration in key=value form and exit
    #[arg(long)]
    print_config: bool,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields = [
            ("seq", &self.seq),
            ("depth", &self.depth),
            ("fiber", &self.fiber),
            ("t", &self.t),
            ("n", &self.n),
            ("window", &self.window),
            ("x", &self.x),
            ("blocks", &self.blocks),
            ("scan", &self.scan),
            ("anchor", &self.anchor),
            ("tol", &self.tol),
            ("metric", &self.metric),
            ("workers", &self.workers),
            ("seed", &self.seed),
            ("out", &self.out),
        ];
        let mut pairs: Vec<(String, String)> =
            fields.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect();
        if self.box_check {
            pairs.push(("box_check".into(), "true".into()));
        }
        pairs
    }
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Failure {
        match e {
            Error::InvalidSpec(_)
            | Error::PerturbationTooLarge { .. }
            | Error::Domain(_)
            | Error::DepthLimit { .. }
            | Error::Resolution { .. }
            | Error::Parse(_) => Failure::Usage(e.to_string()),
            Error::BracketFailure { .. } | Error::SandwichViolation { .. } | Error::Io(_) => {
                Failure::Runtime(e.to_string())
            }
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Failure {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<bool, Failure>;

fn resolve(command: Command, flags: &Flags) -> Result<RunConfig, String> {
    let mut pairs = match &flags.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
            parse_pairs(&text)?
        }
        None => Vec::new(),
    };
    pairs.extend(flags.pairs());
    RunConfig::from_pairs(command, &pairs)
}

fn output(cfg: &RunConfig) -> io::Result<Box<dyn Write>> {
    Ok(match &cfg.out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn base_and_schedule(cfg: &RunConfig) -> (SequenceSpec, SignSchedule) {
    match &cfg.seq {
        Sequence::Plain(s) => (s.clone(), cfg.blocks),
        Sequence::Perturbed(p) => (p.base().clone(), *p.schedule()),
    }
}

fn window(cfg: &RunConfig) -> NWindow {
    cfg.window.unwrap_or_else(|| NWindow::default_for(cfg.n_range.lo, cfg.n_range.hi))
}

fn julia(cfg: &RunConfig) -> Outcome {
    let pb = Pullback::new(&cfg.seq, cfg.fiber, cfg.depth, cfg.anchor)?;
    let mut out = output(cfg)?;
    export::write_cloud(&mut out, &pb)?;
    out.flush()?;
    Ok(true)
}

fn pressure(cfg: &RunConfig) -> Outcome {
    let seq_id = cfg.seq.to_string();
    let (n_min, n_max) = (cfg.n_range.lo, cfg.n_range.hi);
    let curve = pressure_curve_with(
        &cfg.seq,
        &seq_id,
        cfg.fiber,
        &cfg.t_grid.values(),
        n_min,
        n_max,
        cfg.anchor,
        cfg.window,
        cfg.metric,
    )?;
    let mut out = output(cfg)?;
    export::write_pressure(&mut out, &curve)?;
    out.flush()?;
    Ok(true)
}

fn dimension(cfg: &RunConfig) -> Outcome {
    let window = window(cfg);
    let spectra = WindowSpectra::new(&cfg.seq, window, cfg.anchor, cfg.metric)?;
    let lower = spectra.bowen_zero(Which::Lower, cfg.tol)?;
    let upper = spectra.bowen_zero(Which::Upper, cfg.tol)?;
    let mut out = output(cfg)?;
    export::write_roots(&mut out, &[lower, upper])?;
    out.flush()?;
    let mut ok = lower.t_star <= upper.t_star + lower.uncertainty + upper.uncertainty;
    eprintln!("# h_lower={} h_upper={} window={window}", export::float(lower.t_star), export::float(upper.t_star));
    if cfg.box_check {
        let cloud = julia_cloud(&cfg.seq, cfg.depth, cfg.anchor)?;
        let report = box_dimension_cloud(&cloud, &julia_ladder(&cloud)?)?;
        let diff = (report.slope - lower.t_star).abs();
        let agrees = diff <= BOX_AGREEMENT;
        eprintln!(
            "# box-count depth={} slope={} residual={} |slope - h_lower|={} {}",
            cfg.depth,
            export::float(report.slope),
            export::float(report.residual),
            export::float(diff),
            if agrees { "PASS" } else { "FAIL" }
        );
        ok &= agrees;
    }
    Ok(ok)
}

fn perturb(cfg: &RunConfig) -> Outcome {
    let (base, schedule) = base_and_schedule(cfg);
    let xs = cfg.x_grid.values();
    let ts = cfg.t_grid.values();
    let window = window(cfg);
    let mut out = output(cfg)?;
    let ok = match cfg.scan {
        Scan::Kink => {
            let scans = ts
                .iter()
                .map(|&t| kink_scan(&base, schedule, t, &xs, window, cfg.anchor))
                .collect::<Result<Vec<_>, _>>()?;
            export::write_kink(&mut out, &scans)?;
            let failing = scans.iter().flat_map(|s| &s.rows).filter(|r| !r.certified()).count();
            eprintln!("# kink window={window} oscillation={}", export::float(scans[0].oscillation()));
            eprintln!("{} sandwich band and spread certificate ({failing} failing rows)", pass(failing == 0));
            failing == 0
        }
        Scan::Gap => {
            let scan = gap_scan(&base, schedule, &xs, window, cfg.tol, cfg.anchor)?;
            export::write_gap(&mut out, &scan)?;
            let ordered = scan.rows.iter().all(|r| r.h_lower() <= r.h_upper());
            eprintln!(
                "# gap window={window} A_emp={} gamma_emp={}",
                export::float(scan.a_emp),
                export::float(scan.gamma_emp)
            );
            eprintln!("{} h_lower <= h_upper on every row", pass(ordered));
            ordered
        }
        Scan::Sandwich => {
            let reports = xs
                .iter()
                .map(|&x| sandwich_report(&base, schedule, x, &ts, cfg.n_range.lo, cfg.n_range.hi, cfg.anchor))
                .collect::<Result<Vec<_>, _>>()?;
            export::write_sandwich(&mut out, &reports)?;
            let violations: usize = reports.iter().map(|r| r.violations().count()).sum();
            eprintln!("{} sandwich inequality ({violations} violations)", pass(violations == 0));
            violations == 0
        }
    };
    out.flush()?;
    Ok(ok)
}

fn motion(cfg: &RunConfig) -> Outcome {
    let (base, schedule) = base_and_schedule(cfg);
    let reports = cfg
        .x_grid
        .values()
        .iter()
        .map(|&x| motion_speed_check(&base, schedule, x, cfg.depth, cfg.anchor))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = output(cfg)?;
    export::write_motion(&mut out, &reports)?;
    out.flush()?;
    let ok = reports.iter().all(|r| r.passed());
    eprintln!("{} motion bounds", pass(ok));
    Ok(ok)
}

fn verify(cfg: &RunConfig) -> Outcome {
    let t = cfg.t_grid.values()[0];
    if t <= 0.0 {
        return Err(Failure::Usage("verify needs t > 0".into()));
    }
    let vc = VerifyConfig { seq: cfg.seq.clone(), depth: cfg.depth, anchor: cfg.anchor, tol: cfg.tol, t };
    let checks = run_suite(&vc)?;
    let mut out = output(cfg)?;
    for c in &checks {
        writeln!(out, "{c}")?;
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {failed} failed", checks.len())?;
    out.flush()?;
    Ok(failed == 0)
}

fn pass(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

fn run(cfg: &RunConfig) -> Outcome {
    match cfg.command {
        Command::Julia => julia(cfg),
        Command::Pressure => pressure(cfg),
        Command::Dimension => dimension(cfg),
        Command::Perturb => perturb(cfg),
        Command::Motion => motion(cfg),
        Command::Verify => verify(cfg),
    }
}

fn usage_error(message: &str) -> ExitCode {
    eprintln!("error: {message}\n\n{GRAMMAR}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match &cli.command {
        Sub::Julia(f) => (Command::Julia, f),
        Sub::Pressure(f) => (Command::Pressure, f),
        Sub::Dimension(f) => (Command::Dimension, f),
        Sub::Perturb(f) => (Command::Perturb, f),
        Sub::Motion(f) => (Command::Motion, f),
        Sub::Verify(f) => (Command::Verify, f),
    };
    let cfg = match resolve(command, flags) {
        Ok(cfg) => cfg,
        Err(message) => return usage_error(&message),
    };
    if flags.print_config {
        print!("{}", cfg.to_config_string());
        return ExitCode::SUCCESS;
    }
    let result = match cfg.workers {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(&cfg)),
            Err(e) => Err(Failure::Runtime(e.to_string())),
        },
        None => run(&cfg),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Usage(message)) => usage_error(&message),
        Err(Failure::Runtime(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}
