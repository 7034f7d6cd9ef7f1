//! Run configuration: typed, validated, with a canonical `key=value` text
//! form. Values come from an optional config file overlaid by flags.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use fiberdim::orbits::Metric;
use fiberdim::param_seq::{format_complex, parse_complex};
use fiberdim::pressure::NWindow;
use fiberdim::{Complex64, PerturbedSequence, Sequence, SequenceSpec, SignSchedule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Julia,
    Pressure,
    Dimension,
    Perturb,
    Motion,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Julia => "julia",
            Command::Pressure => "pressure",
            Command::Dimension => "dimension",
            Command::Perturb => "perturb",
            Command::Motion => "motion",
            Command::Verify => "verify",
        }
    }
}

impl FromStr for Command {
    type Err = String;

    fn from_str(s: &str) -> Result<Command, String> {
        [Command::Julia, Command::Pressure, Command::Dimension, Command::Perturb, Command::Motion, Command::Verify]
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown command {s:?}"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scan {
    Kink,
    Gap,
    Sandwich,
}

impl fmt::Display for Scan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scan::Kink => "kink",
            Scan::Gap => "gap",
            Scan::Sandwich => "sandwich",
        })
    }
}

impl FromStr for Scan {
    type Err = String;

    fn from_str(s: &str) -> Result<Scan, String> {
        match s {
            "kink" => Ok(Scan::Kink),
            "gap" => Ok(Scan::Gap),
            "sandwich" => Ok(Scan::Sandwich),
            other => Err(format!("scan must be kink, gap or sandwich, got {other:?}")),
        }
    }
}

/// Either `start:stop:count` (inclusive, evenly spaced) or a comma list.
#[derive(Clone, Debug, PartialEq)]
pub enum Grid {
    Range { start: f64, stop: f64, count: usize },
    List(Vec<f64>),
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::Range { start, stop, count: 1 } if start == stop => vec![*start],
            Grid::Range { start, stop, count } => {
                let step = (stop - start) / (*count - 1) as f64;
                (0..*count).map(|i| if i + 1 == *count { *stop } else { start + step * i as f64 }).collect()
            }
            Grid::List(v) => v.clone(),
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("bad number {s:?}"))?;
    if !v.is_finite() {
        return Err(format!("number must be finite, got {s:?}"));
    }
    Ok(v)
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Grid, String> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            [start, stop, count] => {
                let count: usize = count.trim().parse().map_err(|_| format!("bad grid count {count:?}"))?;
                let (start, stop) = (parse_f64(start)?, parse_f64(stop)?);
                if count == 0 || (count == 1 && start != stop) {
                    return Err(format!("grid {s:?} needs count >= 2 (or count 1 with start = stop)"));
                }
                Ok(Grid::Range { start, stop, count })
            }
            [list] if !list.trim().is_empty() => Ok(Grid::List(list.split(',').map(parse_f64).collect::<Result<_, _>>()?)),
            _ => Err(format!("grid must be start:stop:count or a comma list, got {s:?}")),
        }
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grid::Range { start, stop, count } => write!(f, "{start}:{stop}:{count}"),
            Grid::List(v) => write!(f, "{}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
        }
    }
}

fn parse_range(s: &str) -> Result<NWindow, String> {
    s.parse::<NWindow>().map_err(|e| e.to_string())
}

pub fn metric_name(m: Metric) -> &'static str {
    match m {
        Metric::Planar => "planar",
        Metric::Spherical => "spherical",
    }
}

pub fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "planar" => Ok(Metric::Planar),
        "spherical" => Ok(Metric::Spherical),
        other => Err(format!("metric must be planar or spherical, got {other:?}")),
    }
}

/// Keys accepted in config files and as flags, in canonical order.
pub const KEYS: [&str; 17] = [
    "command", "seq", "depth", "fiber", "t", "n", "window", "x", "blocks", "scan", "anchor", "tol", "metric",
    "box_check", "workers", "seed", "out",
];

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub seq: Sequence,
    pub depth: usize,
    pub fiber: usize,
    pub t_grid: Grid,
    pub n_range: NWindow,
    pub window: Option<NWindow>,
    pub x_grid: Grid,
    pub blocks: SignSchedule,
    pub scan: Scan,
    pub anchor: Complex64,
    pub tol: f64,
    pub metric: Metric,
    pub box_check: bool,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

/// Replaces the seed of a random generator (directly or as a perturbation
/// base); other kinds are returned unchanged.
fn reseed(seq: Sequence, seed: u64) -> Result<Sequence, String> {
    let swap = |s: SequenceSpec| match s {
        SequenceSpec::RandomAnnulus { min_mod, max_mod, .. } => {
            SequenceSpec::random_annulus(seed, min_mod, max_mod).map_err(|e| e.to_string())
        }
        other => Ok(other),
    };
    Ok(match seq {
        Sequence::Plain(s) => Sequence::Plain(swap(s)?),
        Sequence::Perturbed(p) => Sequence::Perturbed(
            PerturbedSequence::new(swap(p.base().clone())?, *p.schedule(), p.x()).map_err(|e| e.to_string())?,
        ),
    })
}

impl RunConfig {
    /// Builds a config from `(key, value)` pairs; later pairs override
    /// earlier ones. Missing keys take per-command defaults.
    pub fn from_pairs(command: Command, pairs: &[(String, String)]) -> Result<RunConfig, String> {
        let mut map: Vec<(&str, &str)> = Vec::new();
        for (k, v) in pairs {
            let key = k.trim().replace('-', "_");
            let key = KEYS.iter().find(|known| **known == key).ok_or_else(|| format!("unknown key {k:?}"))?;
            map.retain(|(existing, _)| existing != key);
            map.push((key, v.trim()));
        }
        let get = |k: &str| map.iter().find(|(key, _)| *key == k).map(|(_, v)| *v);
        if let Some(c) = get("command") {
            if c.parse::<Command>()? != command {
                return Err(format!("config is for command {c:?}, not {:?}", command.name()));
            }
        }
        let defaults = |k: &str| -> &'static str {
            match (k, command) {
                ("depth", _) => "18",
                ("t", Command::Perturb | Command::Verify) => "0.18",
                ("t", _) => "0:1:21",
                ("n", _) => "1:20",
                ("x", Command::Motion) => "0.01,0.1",
                ("x", _) => "-0.1:0.1:5",
                ("tol", _) => "1e-6",
                _ => "",
            }
        };
        let value = |k: &str| get(k).unwrap_or_else(|| defaults(k));

        let seq_text = get("seq").ok_or("missing --seq")?;
        let mut seq: Sequence = seq_text.parse().map_err(|e: fiberdim::Error| e.to_string())?;
        let seed = get("seed").map(|s| s.parse::<u64>().map_err(|_| format!("bad seed {s:?}"))).transpose()?;
        if let Some(seed) = seed {
            seq = reseed(seq, seed)?;
        }
        let parse_usize = |k: &str| value(k).parse::<usize>().map_err(|_| format!("bad {k} {:?}", value(k)));
        let tol = parse_f64(value("tol"))?;
        if tol <= 0.0 {
            return Err(format!("tol must be positive, got {tol}"));
        }
        let workers = get("workers")
            .map(|w| match w.parse::<usize>() {
                Ok(n) if n > 0 => Ok(n),
                _ => Err(format!("workers must be a positive integer, got {w:?}")),
            })
            .transpose()?;
        let box_check = match get("box_check") {
            None | Some("false") => false,
            Some("true") | Some("") => true,
            Some(other) => return Err(format!("box_check must be true or false, got {other:?}")),
        };
        let cfg = RunConfig {
            command,
            seq,
            depth: parse_usize("depth")?,
            fiber: get("fiber").map(|_| parse_usize("fiber")).transpose()?.unwrap_or(0),
            t_grid: value("t").parse()?,
            n_range: parse_range(value("n"))?,
            window: get("window").map(parse_range).transpose()?,
            x_grid: value("x").parse()?,
            blocks: get("blocks").unwrap_or("2x2").parse().map_err(|e: fiberdim::Error| e.to_string())?,
            scan: get("scan").unwrap_or("kink").parse()?,
            anchor: get("anchor").map(parse_complex).transpose().map_err(|e| e.to_string())?.unwrap_or(Complex64::new(1.0, 0.0)),
            tol,
            metric: get("metric").map(parse_metric).transpose()?.unwrap_or_default(),
            box_check,
            workers,
            seed,
            out: get("out").filter(|o| !o.is_empty()).map(PathBuf::from),
        };
        if cfg.t_grid.values().iter().any(|t| *t < 0.0) {
            return Err("t values must be >= 0".into());
        }
        if let Some(w) = cfg.window {
            if command == Command::Pressure && (w.lo < cfg.n_range.lo || w.hi > cfg.n_range.hi) {
                return Err(format!("window {w} must lie inside n {}", cfg.n_range));
            }
        }
        Ok(cfg)
    }

    /// Parses the `key=value` text form; `#` starts a comment line.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let pairs = parse_pairs(text)?;
        let command = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "command")
            .ok_or("config text needs a command line")?
            .1
            .parse()?;
        RunConfig::from_pairs(command, &pairs)
    }

    /// Canonical text form; `parse` of it gives back an equal config.
    pub fn to_config_string(&self) -> String {
        let mut lines = vec![
            format!("command={}", self.command.name()),
            format!("seq={}", self.seq),
            format!("depth={}", self.depth),
            format!("fiber={}", self.fiber),
            format!("t={}", self.t_grid),
            format!("n={}", self.n_range),
        ];
        if let Some(w) = self.window {
            lines.push(format!("window={w}"));
        }
        lines.push(format!("x={}", self.x_grid));
        lines.push(format!("blocks={}x{}", self.blocks.initial_block_len(), self.blocks.growth_ratio()));
        lines.push(format!("scan={}", self.scan));
        lines.push(format!("anchor={}", format_complex(self.anchor)));
        lines.push(format!("tol={}", self.tol));
        lines.push(format!("metric={}", metric_name(self.metric)));
        lines.push(format!("box_check={}", self.box_check));
        if let Some(w) = self.workers {
            lines.push(format!("workers={w}"));
        }
        if let Some(s) = self.seed {
            lines.push(format!("seed={s}"));
        }
        if let Some(o) = &self.out {
            lines.push(format!("out={}", o.display()));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }
}

pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("config lines must be key=value, got {l:?}"))
        })
        .collect()
}
