//! Finite-n pressure `a_n(t) = (1/n) log L^n_{λ,t} 1(w)`, windowed
//! lower/upper estimates and their zeros (Bowen's formula).
//!
//! The lower and upper pressures are a liminf and a limsup in `n`; at finite
//! depth they are replaced by the min and max of `a_n(t)` over a window
//! `n ∈ [n_0, n_max]`. The full `a_n(t)` matrix is always kept so the
//! convergence in `n` can be inspected.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numeric::log_sum_exp_scaled;
use crate::orbits::{check_depth, Metric, Pullback};
use crate::param_seq::Parameters;
use crate::transfer::{check_t_grid, operator_sums_on};

/// One-step expansion floor on `closure(U)`: `|l z| >= 40 * 2/3`.
pub const EXPANSION_FLOOR: f64 = 80.0 / 3.0;

/// Inclusive range of depths `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NWindow {
    pub lo: usize,
    pub hi: usize,
}

impl NWindow {
    pub fn new(lo: usize, hi: usize) -> Result<NWindow> {
        if lo == 0 || lo > hi {
            return Err(Error::Domain(format!("window needs 1 <= lo <= hi, got [{lo}, {hi}]")));
        }
        Ok(NWindow { lo, hi })
    }

    /// `[max(n_min, n_max / 2), n_max]`.
    pub fn default_for(n_min: usize, n_max: usize) -> NWindow {
        NWindow { lo: n_min.max(n_max / 2).max(1), hi: n_max }
    }

    pub fn contains(&self, n: usize) -> bool {
        (self.lo..=self.hi).contains(&n)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.lo..=self.hi
    }
}

impl fmt::Display for NWindow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.lo, self.hi)
    }
}

impl FromStr for NWindow {
    type Err = Error;

    fn from_str(s: &str) -> Result<NWindow> {
        let (lo, hi) = s.split_once(':').ok_or_else(|| Error::Parse(format!("window must look like 12:20, got {s:?}")))?;
        let parse = |v: &str| v.trim().parse::<usize>().map_err(|_| Error::Parse(format!("bad depth {v:?}")));
        NWindow::new(parse(lo)?, parse(hi)?).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PressureCurve {
    pub seq_id: String,
    pub j: usize,
    pub t_grid: Vec<f64>,
    pub n_min: usize,
    pub n_max: usize,
    /// `values[n - n_min][i] = a_n(t_grid[i])`.
    pub values: Vec<Vec<f64>>,
    /// Extremes of the leaf log-derivatives per depth.
    pub min_log_deriv: Vec<f64>,
    pub max_log_deriv: Vec<f64>,
    pub anchor: Complex64,
    pub window: NWindow,
}

impl PressureCurve {
    pub fn row(&self, n: usize) -> &[f64] {
        &self.values[n - self.n_min]
    }

    pub fn depths(&self) -> impl Iterator<Item = usize> {
        self.n_min..=self.n_max
    }

    fn windowed(&self, pick: fn(f64, f64) -> f64, init: f64) -> Vec<f64> {
        (0..self.t_grid.len())
            .map(|i| self.window.iter().map(|n| self.row(n)[i]).fold(init, pick))
            .collect()
    }

    /// `min_{n ∈ window} a_n(t)` at each grid point.
    pub fn lower_estimate(&self) -> Vec<f64> {
        self.windowed(f64::min, f64::INFINITY)
    }

    /// `max_{n ∈ window} a_n(t)` at each grid point.
    pub fn upper_estimate(&self) -> Vec<f64> {
        self.windowed(f64::max, f64::NEG_INFINITY)
    }
}

fn check_sorted_grid(t_grid: &[f64]) -> Result<()> {
    check_t_grid(t_grid)?;
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain("t grid must be sorted".into()));
    }
    Ok(())
}

/// Pressure matrix for `n ∈ [n_min, n_max]` over fiber `j`; each depth is
/// one tree walk shared by the whole `t` grid. The window defaults to
/// `[max(n_min, n_max/2), n_max]`.
#[allow(clippy::too_many_arguments)]
pub fn pressure_curve_with<P: Parameters + ?Sized>(
    seq: &P,
    seq_id: &str,
    j: usize,
    t_grid: &[f64],
    n_min: usize,
    n_max: usize,
    anchor: Complex64,
    window: Option<NWindow>,
    metric: Metric,
) -> Result<PressureCurve> {
    check_sorted_grid(t_grid)?;
    if n_min == 0 || n_min > n_max {
        return Err(Error::Domain(format!("depth range needs 1 <= n_min <= n_max, got [{n_min}, {n_max}]")));
    }
    check_depth(n_max)?;
    let window = window.unwrap_or_else(|| NWindow::default_for(n_min, n_max));
    if window.lo < n_min || window.hi > n_max {
        return Err(Error::Domain(format!("window {window} outside the depth range [{n_min}, {n_max}]")));
    }
    let mut values = Vec::with_capacity(n_max - n_min + 1);
    let mut min_log_deriv = Vec::with_capacity(values.capacity());
    let mut max_log_deriv = Vec::with_capacity(values.capacity());
    for n in n_min..=n_max {
        let pb = Pullback::new(seq, j, n, anchor)?;
        let sums = operator_sums_on(&pb, t_grid, metric)?;
        values.push(sums.log_values.iter().map(|v| v / n as f64).collect());
        min_log_deriv.push(sums.stats.min_log_deriv);
        max_log_deriv.push(sums.stats.max_log_deriv);
    }
    Ok(PressureCurve {
        seq_id: seq_id.to_string(),
        j,
        t_grid: t_grid.to_vec(),
        n_min,
        n_max,
        values,
        min_log_deriv,
        max_log_deriv,
        anchor,
        window,
    })
}

pub fn pressure_curve<P: Parameters + ?Sized>(
    seq: &P,
    t_grid: &[f64],
    n_min: usize,
    n_max: usize,
    anchor: Complex64,
) -> Result<PressureCurve> {
    pressure_curve_with(seq, "", 0, t_grid, n_min, n_max, anchor, None, Metric::Planar)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Which {
    Lower,
    Upper,
}

impl fmt::Display for Which {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Which::Lower => "lower",
            Which::Upper => "upper",
        })
    }
}

impl FromStr for Which {
    type Err = Error;

    fn from_str(s: &str) -> Result<Which> {
        match s {
            "lower" => Ok(Which::Lower),
            "upper" => Ok(Which::Upper),
            other => Err(Error::Parse(format!("expected lower or upper, got {other:?}"))),
        }
    }
}

/// Leaf log-derivatives for every depth of a window, kept so the windowed
/// pressure can be re-evaluated at arbitrary `t` during root finding.
pub struct WindowSpectra {
    window: NWindow,
    depths: Vec<(usize, Vec<f64>)>,
    min_log_deriv: Vec<f64>,
    max_log_deriv: Vec<f64>,
}

impl WindowSpectra {
    pub fn new<P: Parameters + ?Sized>(seq: &P, window: NWindow, anchor: Complex64, metric: Metric) -> Result<Self> {
        check_depth(window.hi)?;
        let mut depths = Vec::new();
        let (mut min_log_deriv, mut max_log_deriv) = (Vec::new(), Vec::new());
        for n in window.iter() {
            let spectrum = Pullback::new(seq, 0, n, anchor)?.log_derivs(metric);
            min_log_deriv.push(spectrum.iter().copied().fold(f64::INFINITY, f64::min));
            max_log_deriv.push(spectrum.iter().copied().fold(f64::NEG_INFINITY, f64::max));
            depths.push((n, spectrum));
        }
        Ok(WindowSpectra { window, depths, min_log_deriv, max_log_deriv })
    }

    pub fn window(&self) -> NWindow {
        self.window
    }

    /// `a_n(t)` for one depth of the window.
    pub fn pressure(&self, n: usize, t: f64) -> f64 {
        let (_, spectrum) = &self.depths[n - self.window.lo];
        log_sum_exp_scaled(spectrum, -t) / n as f64
    }

    pub fn windowed(&self, which: Which, t: f64) -> f64 {
        let values = self.window.iter().map(|n| self.pressure(n, t));
        match which {
            Which::Lower => values.fold(f64::INFINITY, f64::min),
            Which::Upper => values.fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Bracket `[min_n n log2 / maxL_n, max_n n log2 / minL_n]`: every `a_n`
    /// is `>= 0` at the left end and `<= 0` at the right end.
    pub fn bracket(&self) -> (f64, f64) {
        let ln2 = std::f64::consts::LN_2;
        let lo = self
            .window
            .iter()
            .zip(&self.max_log_deriv)
            .map(|(n, m)| n as f64 * ln2 / m)
            .fold(f64::INFINITY, f64::min);
        let hi = self
            .window
            .iter()
            .zip(&self.min_log_deriv)
            .map(|(n, m)| n as f64 * ln2 / m)
            .fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }

    /// Smallest measured `minL_n / n`: every `a_n`, hence both windowed
    /// estimates, decreases at least this fast in `t`.
    pub fn slope_floor(&self) -> f64 {
        self.window
            .iter()
            .zip(&self.min_log_deriv)
            .map(|(n, m)| m / n as f64)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn bowen_zero(&self, which: Which, tol: f64) -> Result<BowenZero> {
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        let f = |t: f64| self.windowed(which, t);
        let (mut lo, mut hi) = self.bracket();
        let bracket = (lo, hi);
        let (f_lo, f_hi) = (f(lo), f(hi));
        // The bracket is exact up to rounding in the log-sums.
        if f_lo < -1e-12 || f_hi > 1e-12 {
            return Err(Error::BracketFailure { lo, hi, f_lo, f_hi });
        }
        let slope = self.slope_floor();
        let width_goal = tol / EXPANSION_FLOOR.ln();
        let mut t_star = 0.5 * (lo + hi);
        let mut residual = f(t_star);
        let mut iterations = 1;
        loop {
            if residual > 0.0 {
                lo = t_star;
            } else {
                hi = t_star;
            }
            if (residual.abs() <= tol && hi - lo <= width_goal) || iterations >= 200 {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            t_star = mid;
            residual = f(t_star);
            iterations += 1;
        }
        let uncertainty = (hi - lo).min(residual.abs() / slope);
        Ok(BowenZero { t_star, which, window: self.window, residual, bracket, uncertainty, iterations })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BowenZero {
    pub t_star: f64,
    pub which: Which,
    pub window: NWindow,
    /// Windowed pressure at `t_star`.
    pub residual: f64,
    /// Initial guaranteed bracket.
    pub bracket: (f64, f64),
    /// Bound on `|t_star - true zero of the windowed estimate|`.
    pub uncertainty: f64,
    pub iterations: usize,
}

pub fn bowen_zero_with<P: Parameters + ?Sized>(
    seq: &P,
    which: Which,
    window: NWindow,
    tol: f64,
    anchor: Complex64,
    metric: Metric,
) -> Result<BowenZero> {
    WindowSpectra::new(seq, window, anchor, metric)?.bowen_zero(which, tol)
}

/// Zero of the windowed lower (`Which::Lower`) or upper pressure estimate.
pub fn bowen_zero<P: Parameters + ?Sized>(
    seq: &P,
    which: Which,
    window: NWindow,
    tol: f64,
    anchor: Complex64,
) -> Result<BowenZero> {
    bowen_zero_with(seq, which, window, tol, anchor, Metric::Planar)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionPair {
    pub lower: BowenZero,
    pub upper: BowenZero,
}

impl DimensionPair {
    pub fn h_lower(&self) -> f64 {
        self.lower.t_star
    }

    pub fn h_upper(&self) -> f64 {
        self.upper.t_star
    }

    pub fn gap(&self) -> f64 {
        self.h_upper() - self.h_lower()
    }
}

/// `(zero of windowed-min pressure, zero of windowed-max pressure)`,
/// sharing one set of tree walks.
pub fn dimension_pair<P: Parameters + ?Sized>(
    seq: &P,
    window: NWindow,
    tol: f64,
    anchor: Complex64,
) -> Result<DimensionPair> {
    let spectra = WindowSpectra::new(seq, window, anchor, Metric::Planar)?;
    Ok(DimensionPair { lower: spectra.bowen_zero(Which::Lower, tol)?, upper: spectra.bowen_zero(Which::Upper, tol)? })
}
