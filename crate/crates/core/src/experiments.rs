//! Perturbation experiments around a base sequence `η`: the finite-n
//! pressure sandwich, holomorphic-motion speed, pressure kinks in `x` and
//! the lower/upper dimension gap.
//!
//! Every run pulls back the anchor `1`, which every map fixes, so the motion
//! image of the anchor is the anchor itself and base and perturbed trees are
//! compared word by word.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::logaddexp;
use crate::orbits::{Metric, Node, PairedPullback, Word};
use crate::param_seq::{delta, PerturbedSequence, SequenceSpec, SignSchedule};
use crate::pressure::{dimension_pair, DimensionPair, NWindow, WindowSpectra, Which};

/// Floating-point slack allowed on the sandwich inequality.
pub const SANDWICH_SLACK: f64 = 1e-9;

/// Slack allowed on the motion bounds.
pub const MOTION_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SandwichRecord {
    pub n: usize,
    pub t: f64,
    pub s_n: i64,
    pub cesaro: f64,
    pub a_base: f64,
    pub a_pert: f64,
    /// `a_base - t x S_n / n`.
    pub middle: f64,
    /// `|a_pert - middle| - t|x|/2`; nonpositive when the inequality holds.
    pub residual: f64,
    /// Worst per-leaf slack `|L_pert - L_base - x S_n| - n|x|/2` over all
    /// words of length `n`, and the word attaining it.
    pub leaf_residual: f64,
    pub leaf_word: Word,
}

impl SandwichRecord {
    pub fn holds(&self) -> bool {
        self.residual <= SANDWICH_SLACK && self.leaf_residual <= SANDWICH_SLACK * self.n as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationReport {
    pub base: SequenceSpec,
    pub schedule: SignSchedule,
    pub x: f64,
    pub delta: f64,
    pub records: Vec<SandwichRecord>,
    /// Largest `|z_pert - z_base|` over all compared leaves.
    pub max_displacement: f64,
    pub dimension_pairs: Vec<(NWindow, DimensionPair)>,
}

impl PerturbationReport {
    pub fn violations(&self) -> impl Iterator<Item = &SandwichRecord> {
        self.records.iter().filter(|r| !r.holds())
    }

    /// First failing record as an error.
    pub fn check(&self) -> Result<()> {
        match self.violations().next() {
            None => Ok(()),
            Some(r) => Err(Error::SandwichViolation {
                n: r.n,
                word: r.leaf_word.to_string(),
                residual: r.residual.max(r.leaf_residual),
            }),
        }
    }
}

struct PairAcc {
    lse_base: Vec<f64>,
    lse_pert: Vec<f64>,
    leaf_residual: f64,
    leaf_word: Word,
    displacement: f64,
}

/// Pressure sandwich records for every `n` in `n_min..=n_max` and every `t`.
/// Violations are recorded, not raised.
pub fn sandwich_report(
    base: &SequenceSpec,
    schedule: SignSchedule,
    x: f64,
    t_grid: &[f64],
    n_min: usize,
    n_max: usize,
    anchor: Complex64,
) -> Result<PerturbationReport> {
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Domain("sandwich needs t > 0".into()));
    }
    if n_min == 0 || n_min > n_max {
        return Err(Error::Domain(format!("depth range needs 1 <= n_min <= n_max, got [{n_min}, {n_max}]")));
    }
    let pert = PerturbedSequence::new(base.clone(), schedule, x)?;
    let mut records = Vec::new();
    let mut max_displacement: f64 = 0.0;
    for n in n_min..=n_max {
        let (s_n, cesaro) = schedule.cesaro_sum(n as u64);
        let shift = x * s_n as f64;
        let allowance = n as f64 * x.abs() / 2.0;
        let pair = PairedPullback::new(base, &pert, 0, n, anchor)?;
        let acc = pair.fold(
            Metric::Planar,
            |node: &Node<2>| {
                let [b, p] = node.lanes;
                PairAcc {
                    lse_base: t_grid.iter().map(|t| -t * b.log_deriv).collect(),
                    lse_pert: t_grid.iter().map(|t| -t * p.log_deriv).collect(),
                    leaf_residual: (p.log_deriv - b.log_deriv - shift).abs() - allowance,
                    leaf_word: node.word,
                    displacement: (p.point - b.point).norm(),
                }
            },
            |mut a, b| {
                for (u, v) in a.lse_base.iter_mut().zip(&b.lse_base) {
                    *u = logaddexp(*u, *v);
                }
                for (u, v) in a.lse_pert.iter_mut().zip(&b.lse_pert) {
                    *u = logaddexp(*u, *v);
                }
                if b.leaf_residual > a.leaf_residual {
                    a.leaf_residual = b.leaf_residual;
                    a.leaf_word = b.leaf_word;
                }
                a.displacement = a.displacement.max(b.displacement);
                a
            },
        );
        max_displacement = max_displacement.max(acc.displacement);
        for (i, &t) in t_grid.iter().enumerate() {
            let a_base = acc.lse_base[i] / n as f64;
            let a_pert = acc.lse_pert[i] / n as f64;
            let middle = a_base - t * x * cesaro;
            records.push(SandwichRecord {
                n,
                t,
                s_n,
                cesaro,
                a_base,
                a_pert,
                middle,
                residual: (a_pert - middle).abs() - t * x.abs() / 2.0,
                leaf_residual: acc.leaf_residual,
                leaf_word: acc.leaf_word,
            });
        }
    }
    Ok(PerturbationReport {
        base: base.clone(),
        schedule,
        x,
        delta: delta(x),
        records,
        max_displacement,
        dimension_pairs: Vec::new(),
    })
}

/// Checks `|a_n^pert(t) - (a_n^base(t) - t x S_n/n)| <= t|x|/2` for
/// `n = 1..=n_max`, together with the per-leaf derivative inequality on
/// every word. A failure is a `SandwichViolation`.
pub fn sandwich_check(
    base: &SequenceSpec,
    schedule: SignSchedule,
    x: f64,
    t: f64,
    n_max: usize,
    anchor: Complex64,
) -> Result<PerturbationReport> {
    let report = sandwich_report(base, schedule, x, &[t], 1, n_max, anchor)?;
    report.check()?;
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MotionReport {
    pub x: f64,
    pub delta: f64,
    pub depth: usize,
    pub max_displacement: f64,
    pub displacement_word: Word,
    /// Largest `|log(|z_pert| / |z_base|)|`.
    pub max_log_ratio: f64,
    pub ratio_word: Word,
}

impl MotionReport {
    /// `Δ / 9`.
    pub fn displacement_bound(&self) -> f64 {
        self.delta / 9.0
    }

    /// `Δ / 6`, the bound on the log of the modulus ratio.
    pub fn log_ratio_bound(&self) -> f64 {
        self.delta / 6.0
    }

    pub fn displacement_ok(&self) -> bool {
        self.max_displacement <= self.displacement_bound() + MOTION_SLACK
    }

    pub fn ratio_ok(&self) -> bool {
        self.max_log_ratio <= self.log_ratio_bound() + MOTION_SLACK
    }

    pub fn passed(&self) -> bool {
        self.displacement_ok() && self.ratio_ok()
    }
}

/// Maxima of the leaf displacement and modulus-ratio deviation over all
/// `2^depth` same-word leaf pairs.
pub fn motion_speed_check(
    base: &SequenceSpec,
    schedule: SignSchedule,
    x: f64,
    depth: usize,
    anchor: Complex64,
) -> Result<MotionReport> {
    let pert = PerturbedSequence::new(base.clone(), schedule, x)?;
    let pair = PairedPullback::new(base, &pert, 0, depth, anchor)?;
    let ((max_displacement, displacement_word), (max_log_ratio, ratio_word)) = pair.fold(
        Metric::Planar,
        |node| {
            let [b, p] = node.lanes;
            let disp = (p.point - b.point).norm();
            let ratio = (p.point.norm() / b.point.norm()).ln().abs();
            ((disp, node.word), (ratio, node.word))
        },
        |a, b| {
            let pick = |u: (f64, Word), v: (f64, Word)| if v.0 > u.0 { v } else { u };
            (pick(a.0, b.0), pick(a.1, b.1))
        },
    );
    Ok(MotionReport { x, delta: delta(x), depth, max_displacement, displacement_word, max_log_ratio, ratio_word })
}

fn check_symmetric(x_grid: &[f64]) -> Result<()> {
    let mut xs: Vec<f64> = x_grid.to_vec();
    let mut neg: Vec<f64> = x_grid.iter().map(|x| -x).collect();
    xs.sort_by(f64::total_cmp);
    neg.sort_by(f64::total_cmp);
    let symmetric = xs.iter().zip(&neg).all(|(a, b)| (a - b).abs() <= 1e-15 * (1.0 + a.abs()));
    if xs.is_empty() || !symmetric {
        return Err(Error::Domain("x grid must be nonempty and symmetric around 0".into()));
    }
    Ok(())
}

/// Extremes of `S_n / n` over a window: `(max, argmax, min, argmin)`.
pub fn cesaro_extremes(schedule: &SignSchedule, window: NWindow) -> (f64, usize, f64, usize) {
    let mut best = (f64::NEG_INFINITY, 0, f64::INFINITY, 0);
    for n in window.iter() {
        let c = schedule.cesaro_sum(n as u64).1;
        if c > best.0 {
            best.0 = c;
            best.1 = n;
        }
        if c < best.2 {
            best.2 = c;
            best.3 = n;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KinkRow {
    pub x: f64,
    /// Windowed min / max of `a_n^pert(t)`.
    pub p_lower: f64,
    pub p_upper: f64,
    pub base_lower: f64,
    pub base_upper: f64,
    /// V-shaped envelopes `P̲_base - t|x|/2` and `P̄_base + t|x|/2`.
    pub envelope_lower: f64,
    pub envelope_upper: f64,
    /// Worst slack of `|a_n^pert - (a_n^base - t x S_n/n)| <= t|x|/2` over
    /// the window.
    pub band_residual: f64,
    /// `t|x| · osc(S_n/n) - t|x| - base spread`, a lower bound for the
    /// spread `p_upper - p_lower`.
    pub spread_floor: f64,
}

impl KinkRow {
    pub fn spread(&self) -> f64 {
        self.p_upper - self.p_lower
    }

    pub fn certified(&self) -> bool {
        self.band_residual <= SANDWICH_SLACK && self.spread() >= self.spread_floor - SANDWICH_SLACK
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KinkScan {
    pub t: f64,
    pub window: NWindow,
    pub cesaro_max: f64,
    pub cesaro_min: f64,
    pub rows: Vec<KinkRow>,
}

impl KinkScan {
    /// Oscillation of `S_n / n` reachable inside the window.
    pub fn oscillation(&self) -> f64 {
        self.cesaro_max - self.cesaro_min
    }
}

/// Windowed pressure at fixed `t` across a symmetric grid of `x`.
pub fn kink_scan(
    base: &SequenceSpec,
    schedule: SignSchedule,
    t: f64,
    x_grid: &[f64],
    window: NWindow,
    anchor: Complex64,
) -> Result<KinkScan> {
    check_symmetric(x_grid)?;
    let (cesaro_max, _, cesaro_min, _) = cesaro_extremes(&schedule, window);
    let base_spectra = WindowSpectra::new(base, window, anchor, Metric::Planar)?;
    let base_row: Vec<f64> = window.iter().map(|n| base_spectra.pressure(n, t)).collect();
    let base_lower = base_row.iter().copied().fold(f64::INFINITY, f64::min);
    let base_upper = base_row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let rows = x_grid
        .par_iter()
        .map(|&x| {
            let pert = PerturbedSequence::new(base.clone(), schedule, x)?;
            let spectra = WindowSpectra::new(&pert, window, anchor, Metric::Planar)?;
            let row: Vec<f64> = window.iter().map(|n| spectra.pressure(n, t)).collect();
            let band_residual = window
                .iter()
                .zip(row.iter().zip(&base_row))
                .map(|(n, (p, b))| {
                    let cesaro = schedule.cesaro_sum(n as u64).1;
                    (p - (b - t * x * cesaro)).abs() - t * x.abs() / 2.0
                })
                .fold(f64::NEG_INFINITY, f64::max);
            Ok(KinkRow {
                x,
                p_lower: row.iter().copied().fold(f64::INFINITY, f64::min),
                p_upper: row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                base_lower,
                base_upper,
                envelope_lower: base_lower - t * x.abs() / 2.0,
                envelope_upper: base_upper + t * x.abs() / 2.0,
                band_residual,
                spread_floor: t * x.abs() * (cesaro_max - cesaro_min) - t * x.abs() - (base_upper - base_lower),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(KinkScan { t, window, cesaro_max, cesaro_min, rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapRow {
    pub x: f64,
    pub pair: DimensionPair,
    /// `h̲_η (1 - |x| / (2 log A_emp))`.
    pub envelope_lower: f64,
    /// `h̄_η (1 + |x| / (2 log γ_emp))`.
    pub envelope_upper: f64,
}

impl GapRow {
    pub fn h_lower(&self) -> f64 {
        self.pair.h_lower()
    }

    pub fn h_upper(&self) -> f64 {
        self.pair.h_upper()
    }

    pub fn gap(&self) -> f64 {
        self.pair.gap()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapScan {
    pub window: NWindow,
    pub tol: f64,
    pub base: DimensionPair,
    /// Measured extremes of the one-step derivative on the base tree.
    pub a_emp: f64,
    pub gamma_emp: f64,
    pub rows: Vec<GapRow>,
}

/// `h̲ (1 - |x| / (2 log A))`.
pub fn lower_envelope(h_lower: f64, x: f64, a: f64) -> f64 {
    h_lower * (1.0 - x.abs() / (2.0 * a.ln()))
}

/// `h̄ (1 + |x| / (2 log γ))`.
pub fn upper_envelope(h_upper: f64, x: f64, gamma: f64) -> f64 {
    h_upper * (1.0 + x.abs() / (2.0 * gamma.ln()))
}

/// Dimension pairs across `x`, with the predicted envelopes from the base
/// pair and the measured derivative extremes.
pub fn gap_scan(
    base: &SequenceSpec,
    schedule: SignSchedule,
    x_grid: &[f64],
    window: NWindow,
    tol: f64,
    anchor: Complex64,
) -> Result<GapScan> {
    if x_grid.is_empty() {
        return Err(Error::Domain("x grid is empty".into()));
    }
    let base_pair = dimension_pair(base, window, tol, anchor)?;
    let stats = crate::orbits::Pullback::new(base, 0, window.hi, anchor)?.stats(Metric::Planar);
    let (a_emp, gamma_emp) = (stats.max_step, stats.min_step);
    let rows = x_grid
        .par_iter()
        .map(|&x| {
            let pert = PerturbedSequence::new(base.clone(), schedule, x)?;
            let pair = dimension_pair(&pert, window, tol, anchor)?;
            Ok(GapRow {
                x,
                pair,
                envelope_lower: lower_envelope(base_pair.h_lower(), x, a_emp),
                envelope_upper: upper_envelope(base_pair.h_upper(), x, gamma_emp),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapScan { window, tol, base: base_pair, a_emp, gamma_emp, rows })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricRow {
    pub n: usize,
    pub planar: f64,
    pub spherical: f64,
}

impl MetricRow {
    pub fn difference(&self) -> f64 {
        (self.planar - self.spherical).abs()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    pub rows: Vec<MetricRow>,
}

impl MetricReport {
    /// Smallest `C` with `|planar - spherical| <= C / n` on every row.
    pub fn constant(&self) -> f64 {
        self.rows.iter().map(|r| r.n as f64 * r.difference()).fold(0.0, f64::max)
    }
}

/// Single-depth Bowen zeros with planar and spherical derivatives.
pub fn metric_comparison<P: crate::param_seq::Parameters + ?Sized>(
    seq: &P,
    depths: &[usize],
    tol: f64,
    anchor: Complex64,
) -> Result<MetricReport> {
    let rows = depths
        .iter()
        .map(|&n| {
            let window = NWindow::new(n, n)?;
            let zero = |metric| -> Result<f64> {
                Ok(WindowSpectra::new(seq, window, anchor, metric)?.bowen_zero(Which::Lower, tol)?.t_star)
            };
            Ok(MetricRow { n, planar: zero(Metric::Planar)?, spherical: zero(Metric::Spherical)? })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricReport { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param_seq::Sign;
    use approx::assert_relative_eq;

    const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

    fn c50() -> SequenceSpec {
        SequenceSpec::constant(Complex64::new(50.0, 0.0)).unwrap()
    }

    #[test]
    fn identity_perturbation_collapses() {
        let rep = sandwich_report(&c50(), SignSchedule::default(), 0.0, &[0.18, 1.0], 1, 10, ONE).unwrap();
        for r in &rep.records {
            assert_eq!(r.a_base, r.a_pert);
            assert_eq!(r.residual, 0.0);
            assert_eq!(r.leaf_residual, 0.0);
        }
        assert_eq!(rep.max_displacement, 0.0);
    }

    #[test]
    fn sandwich_holds_on_small_grid() {
        for x in [-0.1, -0.01, 0.05, 0.1] {
            let rep = sandwich_check(&c50(), SignSchedule::default(), x, 0.18, 12, ONE).unwrap();
            assert_eq!(rep.records.len(), 12);
            assert!(rep.max_displacement <= delta(x) / 9.0 + MOTION_SLACK);
        }
    }

    #[test]
    fn all_plus_signs_shift_by_tx() {
        let schedule = SignSchedule::new(u64::MAX / 4, 2, Sign::Plus).unwrap();
        let rep = sandwich_check(&c50(), schedule, 0.07, 0.5, 10, ONE).unwrap();
        for r in &rep.records {
            assert_eq!(r.cesaro, 1.0);
            assert_relative_eq!(r.middle, r.a_base - 0.5 * 0.07, epsilon = 1e-15);
        }
    }

    #[test]
    fn sandwich_at_depth_sixteen() {
        let rep = sandwich_report(&c50(), SignSchedule::default(), 0.05, &[0.18], 16, 16, ONE).unwrap();
        assert!(rep.records[0].residual <= 0.0);
        assert!(rep.check().is_ok());
    }

    #[test]
    fn violation_is_reported() {
        let mut rep = sandwich_report(&c50(), SignSchedule::default(), 0.05, &[0.18], 2, 3, ONE).unwrap();
        rep.records[1].residual = 1e-3;
        assert!(matches!(rep.check(), Err(Error::SandwichViolation { n: 3, .. })));
    }

    #[test]
    fn sandwich_rejects_bad_inputs() {
        assert!(sandwich_check(&c50(), SignSchedule::default(), 0.1, 0.0, 4, ONE).is_err());
        assert!(matches!(
            sandwich_check(&c50(), SignSchedule::default(), 0.3, 0.5, 4, ONE),
            Err(Error::PerturbationTooLarge { .. })
        ));
    }

    #[test]
    fn motion_bounds() {
        let zero = motion_speed_check(&c50(), SignSchedule::default(), 0.0, 10, ONE).unwrap();
        assert_eq!((zero.max_displacement, zero.max_log_ratio), (0.0, 0.0));
        for (x, bound) in [(0.01, 0.0011167), (0.1, 0.0116857)] {
            let rep = motion_speed_check(&c50(), SignSchedule::default(), x, 12, ONE).unwrap();
            assert_relative_eq!(rep.displacement_bound(), bound, max_relative = 1e-4);
            assert!(rep.passed());
            assert!(rep.max_displacement > 0.0);
        }
    }

    #[test]
    fn antisymmetry() {
        let s = SignSchedule::default();
        let a = sandwich_report(&c50(), s, 0.08, &[0.3], 1, 8, ONE).unwrap();
        let b = sandwich_report(&c50(), s.negated(), -0.08, &[0.3], 1, 8, ONE).unwrap();
        for (ra, rb) in a.records.iter().zip(&b.records) {
            assert_eq!(ra.a_pert, rb.a_pert);
            assert_eq!(ra.a_base, rb.a_base);
            assert_relative_eq!(ra.middle, rb.middle, epsilon = 1e-15);
        }
    }

    #[test]
    fn cesaro_extremes_for_default_blocks() {
        let (max, argmax, min, argmin) = cesaro_extremes(&SignSchedule::default(), NWindow::new(2, 18).unwrap());
        assert_eq!((max, argmax), (1.0, 2));
        assert_relative_eq!(min, -1.0 / 3.0);
        assert_eq!(argmin, 6);
    }

    #[test]
    fn kink_scan_certificates() {
        let xs = [-0.1, -0.05, 0.0, 0.05, 0.1];
        let scan = kink_scan(&c50(), SignSchedule::default(), 0.18, &xs, NWindow::new(2, 12).unwrap(), ONE).unwrap();
        assert_relative_eq!(scan.oscillation(), 4.0 / 3.0);
        for row in &scan.rows {
            assert!(row.certified(), "{row:?}");
        }
        let mid = scan.rows[2];
        assert_eq!(mid.p_lower, mid.base_lower);
        assert_eq!(mid.p_upper, mid.base_upper);
        assert!(kink_scan(&c50(), SignSchedule::default(), 0.18, &[0.0, 0.1], NWindow::new(2, 6).unwrap(), ONE).is_err());
    }

    #[test]
    fn envelope_arithmetic() {
        assert_relative_eq!(lower_envelope(0.18, 0.1, 200.0 / 3.0), 0.17786, max_relative = 1e-4);
        assert!(upper_envelope(0.18, -0.1, 80.0 / 3.0) > 0.18);
    }

    #[test]
    fn gap_scan_orders_pairs() {
        let scan = gap_scan(&c50(), SignSchedule::default(), &[0.0, 0.1], NWindow::new(6, 12).unwrap(), 1e-7, ONE).unwrap();
        for row in &scan.rows {
            assert!(row.h_lower() <= row.h_upper());
        }
        assert!(scan.rows[0].gap() <= scan.base.gap() + 2e-7);
        assert!(scan.gamma_emp <= scan.a_emp);
        assert!(scan.gamma_emp >= 80.0 / 3.0);
    }

    #[test]
    fn metric_constant_reported() {
        let rep = metric_comparison(&c50(), &[4, 8], 1e-9, ONE).unwrap();
        assert!(rep.constant() > 0.0);
        for r in &rep.rows {
            assert!(r.difference() <= rep.constant() / r.n as f64 + 1e-15);
        }
    }
}
