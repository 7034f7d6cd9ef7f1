//! The bundled invariant suite: one named pass/fail check per invariant of
//! the family, the preimage trees, the transfer operator, the pressure and
//! the perturbation experiments.

use std::fmt;
use std::f64::consts::LN_2;

use num_complex::Complex64;

use crate::error::Result;
use crate::experiments::{motion_speed_check, sandwich_report};
use crate::family::{self, BranchLabel, TRAP_RADIUS};
use crate::orbits::{check_depth, Metric, Pullback, Word};
use crate::param_seq::{Parameters, PerturbedSequence, Sequence, SequenceSpec, SignSchedule};
use crate::pressure::{pressure_curve_with, NWindow, WindowSpectra, Which};
use crate::transfer::{change_of_variables_check, conformal_atoms, operator_sums_on, rho_estimate};

#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub module: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "{status} {}::{} ({})", self.module, self.name, self.detail)
    }
}

#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub seq: Sequence,
    pub depth: usize,
    pub anchor: Complex64,
    /// Root-finding tolerance.
    pub tol: f64,
    pub t: f64,
}

impl VerifyConfig {
    pub fn new(seq: Sequence, depth: usize) -> VerifyConfig {
        VerifyConfig { seq, depth, anchor: Complex64::new(1.0, 0.0), tol: 1e-6, t: 0.18 }
    }
}

struct Suite {
    checks: Vec<Check>,
}

impl Suite {
    fn push(&mut self, module: &'static str, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check { module, name, passed, detail });
    }
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(f64::NEG_INFINITY, f64::max)
}

/// Base sequence, schedule and perturbation size used by the experiment
/// checks: a perturbed spec brings its own, a plain spec gets the default
/// blocks and `x = min(0.05, r/2)`.
fn perturbation_setup(seq: &Sequence) -> (SequenceSpec, SignSchedule, f64) {
    match seq {
        Sequence::Perturbed(p) if p.x() != 0.0 => (p.base().clone(), *p.schedule(), p.x()),
        Sequence::Perturbed(p) => {
            let base = p.base().clone();
            let x = (PerturbedSequence::admissible_radius(&base) / 2.0).min(0.05);
            (base, *p.schedule(), x)
        }
        Sequence::Plain(s) => {
            let x = (PerturbedSequence::admissible_radius(s) / 2.0).min(0.05);
            (s.clone(), SignSchedule::default(), x)
        }
    }
}

fn family_checks(params: &[Complex64], suite: &mut Suite) {
    let failed: Vec<String> = params
        .iter()
        .filter(|l| !family::trapping_certificate(**l).passed)
        .map(|l| l.to_string())
        .collect();
    suite.push("family", "trapping_certificate", failed.is_empty(), format!("{} parameters, failing: {failed:?}", params.len()));

    // Sample the closed trap on a polar grid around both centres.
    let mut samples = Vec::new();
    for centre in [BranchLabel::Zero.center(), BranchLabel::One.center()] {
        for i in 0..=4 {
            for k in 0..16 {
                let r = TRAP_RADIUS * i as f64 / 4.0;
                samples.push(centre + Complex64::from_polar(r, std::f64::consts::TAU * k as f64 / 16.0));
            }
        }
    }
    let mut round_trip: f64 = 0.0;
    let mut landing = true;
    let mut floor = true;
    for &l in params {
        for &w in &samples {
            for label in [BranchLabel::Zero, BranchLabel::One] {
                let z = family::inverse_branch_unchecked(l, w, label);
                round_trip = round_trip.max((family::apply(l, z) - w).norm() / (1.0 + w.norm()));
                landing &= (z - label.center()).norm() < TRAP_RADIUS;
            }
            floor &= family::derivative(l, w).norm() >= (2.0 / 3.0) * l.norm() * (1.0 - 1e-12);
        }
    }
    suite.push("family", "inverse_round_trip", round_trip <= 1e-12, format!("max relative residual {round_trip:.3e}"));
    suite.push("family", "branches_land_in_trap", landing, format!("{} samples per parameter", samples.len()));
    suite.push("family", "expansion_floor", floor, "|f'| >= (2/3)|l| on the closed trap".into());
}

fn orbit_checks(cfg: &VerifyConfig, pb: &Pullback, suite: &mut Suite) {
    let n = cfg.depth;
    let (count, trapped, itinerary, round_trip, min_step) = pb.fold(
        Metric::Planar,
        |node| {
            let lane = node.lanes[0];
            let label = family::trap_label(lane.point, 1e-12);
            let first = if n == 0 { None } else { Some(node.word.label(0)) };
            (1u64, label.is_some(), n == 0 || label == first, lane.round_trip, lane.step_min)
        },
        |a, b| (a.0 + b.0, a.1 && b.1, a.2 && b.2, a.3.max(b.3), a.4.min(b.4)),
    );
    suite.push("orbits", "leaf_count", count == 1u64 << n, format!("{count} leaves at depth {n}"));
    suite.push("orbits", "leaves_trapped", trapped, "every leaf in the closed trap".into());
    suite.push("orbits", "itinerary", itinerary, "leaf lies in the disk of its first symbol".into());
    suite.push("orbits", "stepwise_round_trip", round_trip <= 1e-9, format!("max |f(z_k) - z_(k-1)| = {round_trip:.3e}"));
    let inf = pb.params().iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    suite.push(
        "orbits",
        "step_expansion",
        n == 0 || min_step >= (2.0 / 3.0) * inf * (1.0 - 1e-12),
        format!("min one-step |f'| = {min_step:.6}"),
    );
    if cfg.anchor == Complex64::new(1.0, 0.0) {
        let leaf = pb.leaf(Word::zeros(n));
        let expected: f64 = pb.params().iter().map(|l| l.norm().ln()).sum();
        let ok = leaf.point == Complex64::new(1.0, 0.0) && (leaf.log_deriv - expected).abs() <= 1e-12 * (1.0 + expected);
        suite.push("orbits", "fixed_point_word", ok, format!("all-zeros leaf {} with log_deriv {}", leaf.point, leaf.log_deriv));
    }
}

fn transfer_checks(cfg: &VerifyConfig, pb: &Pullback, suite: &mut Suite) -> Result<()> {
    let n = cfg.depth;
    let sums = operator_sums_on(pb, &[0.0], Metric::Planar)?;
    let err = (sums.log_values[0] - n as f64 * LN_2).abs();
    suite.push("transfer", "counting_at_t0", err <= 1e-12 * (1.0 + n as f64), format!("|log L^n 1 - n log 2| = {err:.3e}"));

    if n >= 2 {
        let mut worst = String::new();
        let mut ok = true;
        for t in [0.0, 0.5, 1.0] {
            let rho = rho_estimate(&cfg.seq, 0, t, n, cfg.anchor)?;
            let (lo, hi) = rho.bounds();
            let inside = rho.value >= lo * (1.0 - 1e-12) && rho.value <= hi * (1.0 + 1e-12);
            let exact = t != 0.0 || (rho.value - 2.0).abs() <= 1e-12;
            if !(inside && exact) {
                ok = false;
                worst = format!("t={t}: {} outside [{lo}, {hi}]", rho.value);
            }
        }
        suite.push("transfer", "rho_bounds", ok, if ok { "t in {0, 0.5, 1}".into() } else { worst });

        let m = n.min(16);
        let atoms = conformal_atoms(&cfg.seq, 0, m, cfg.t, cfg.anchor)?;
        let mass = atoms.total_mass();
        suite.push("transfer", "probability_mass", (mass - 1.0).abs() <= 1e-12, format!("mass {mass} at N = {m}"));
        let residual = change_of_variables_check(&cfg.seq, 0, m, cfg.t, cfg.anchor)?;
        suite.push("transfer", "change_of_variables", residual <= 1e-9, format!("residual {residual:.3e} at N = {m}"));
    }
    Ok(())
}

fn pressure_checks(cfg: &VerifyConfig, params: &[Complex64], suite: &mut Suite) -> Result<()> {
    let n = cfg.depth;
    if n == 0 {
        return Ok(());
    }
    let t_grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let curve = pressure_curve_with(&cfg.seq, "", 0, &t_grid, 1, n, cfg.anchor, None, Metric::Planar)?;
    let (mut t0, mut decreasing, mut convex, mut slope) = (0.0f64, true, true, true);
    for m in curve.depths() {
        let row = curve.row(m);
        t0 = t0.max((row[0] - LN_2).abs());
        decreasing &= row.windows(2).all(|w| w[1] < w[0]);
        convex &= row.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-12);
        let (lo, hi) = (curve.min_log_deriv[m - 1] / m as f64, curve.max_log_deriv[m - 1] / m as f64);
        slope &= row.windows(2).zip(t_grid.windows(2)).all(|(a, t)| {
            let (d, dt) = (a[1] - a[0], t[1] - t[0]);
            d >= -dt * hi - 1e-12 && d <= -dt * lo + 1e-12
        });
    }
    suite.push("pressure", "log2_at_t0", t0 <= 1e-12, format!("max |a_n(0) - log 2| = {t0:.3e}"));
    suite.push("pressure", "strictly_decreasing", decreasing, "every row on a 21-point grid".into());
    suite.push("pressure", "convex", convex, "second differences >= -1e-12".into());
    suite.push("pressure", "slope_bracket", slope, "measured minL/n, maxL/n".into());

    let window = NWindow::default_for(1, n);
    let spectra = WindowSpectra::new(&cfg.seq, window, cfg.anchor, Metric::Planar)?;
    let lower = spectra.bowen_zero(Which::Lower, cfg.tol)?;
    let upper = spectra.bowen_zero(Which::Upper, cfg.tol)?;
    let sup = max_of(params.iter().map(|l| l.norm()));
    let inf = params.iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    let (lo, hi) = (LN_2 / ((4.0 / 3.0) * sup).ln(), LN_2 / ((2.0 / 3.0) * inf).ln());
    let in_bracket = [lower, upper].iter().all(|z| z.t_star >= lo - z.uncertainty && z.t_star <= hi + z.uncertainty);
    suite.push(
        "pressure",
        "bowen_bracket",
        in_bracket,
        format!("[{lo:.5}, {hi:.5}] contains {:.6} and {:.6}", lower.t_star, upper.t_star),
    );
    suite.push(
        "pressure",
        "bowen_residual",
        lower.residual.abs() <= cfg.tol && upper.residual.abs() <= cfg.tol,
        format!("residuals {:.3e}, {:.3e}", lower.residual, upper.residual),
    );
    suite.push(
        "pressure",
        "lower_below_upper",
        lower.t_star <= upper.t_star + lower.uncertainty + upper.uncertainty,
        format!("h_lower {:.8} h_upper {:.8}", lower.t_star, upper.t_star),
    );
    let fine = spectra.bowen_zero(Which::Lower, cfg.tol / 10.0)?;
    suite.push(
        "pressure",
        "bisection_uncertainty",
        (fine.t_star - lower.t_star).abs() <= lower.uncertainty + fine.uncertainty,
        format!(
            "|coarse - fine| = {:.3e}, bound {:.3e}",
            (fine.t_star - lower.t_star).abs(),
            lower.uncertainty + fine.uncertainty
        ),
    );
    if window.lo > 1 {
        let wide = WindowSpectra::new(&cfg.seq, NWindow::new(1, n)?, cfg.anchor, Metric::Planar)?;
        let ok = wide.bowen_zero(Which::Lower, cfg.tol)?.t_star <= lower.t_star + 2.0 * cfg.tol
            && wide.bowen_zero(Which::Upper, cfg.tol)?.t_star >= upper.t_star - 2.0 * cfg.tol;
        suite.push("pressure", "window_monotonicity", ok, format!("window {window} inside 1:{n}"));
    }
    Ok(())
}

fn experiment_checks(cfg: &VerifyConfig, suite: &mut Suite) -> Result<()> {
    let n = cfg.depth;
    if n < 2 {
        return Ok(());
    }
    let (base, schedule, x) = perturbation_setup(&cfg.seq);
    let n_max = n.min(16);
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut leaf_worst: f64 = f64::NEG_INFINITY;
    for x in [x, -x] {
        let rep = sandwich_report(&base, schedule, x, &[cfg.t, 2.0 * cfg.t], 2, n_max, cfg.anchor)?;
        worst = worst.max(max_of(rep.records.iter().map(|r| r.residual)));
        leaf_worst = leaf_worst.max(max_of(rep.records.iter().map(|r| r.leaf_residual)));
    }
    suite.push(
        "experiments",
        "sandwich",
        worst <= 1e-9 && leaf_worst <= 1e-9,
        format!("x = ±{x}, n in [2, {n_max}]: max residual {worst:.3e}, leaf {leaf_worst:.3e}"),
    );

    let motion = motion_speed_check(&base, schedule, x, n, cfg.anchor)?;
    suite.push(
        "experiments",
        "motion_speed",
        motion.passed(),
        format!(
            "x = {x}: displacement {:.6e} <= {:.6e}, log ratio {:.6e} <= {:.6e}",
            motion.max_displacement,
            motion.displacement_bound(),
            motion.max_log_ratio,
            motion.log_ratio_bound()
        ),
    );

    let a = PerturbedSequence::new(base.clone(), schedule, x)?;
    let b = PerturbedSequence::new(base, schedule.negated(), -x)?;
    let same = (1..=n as u64).all(|k| a.lambda(k).ok() == b.lambda(k).ok());
    suite.push("experiments", "antisymmetry", same, "(s, x) and (-s, -x) give the same parameters".into());
    Ok(())
}

/// Runs every check. Errors are reserved for invalid configurations; a
/// broken invariant is a failing [`Check`].
pub fn run_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    check_depth(cfg.depth)?;
    let pb = Pullback::new(&cfg.seq, 0, cfg.depth, cfg.anchor)?;
    let params = pb.params().to_vec();
    let mut suite = Suite { checks: Vec::new() };
    family_checks(&params, &mut suite);
    orbit_checks(cfg, &pb, &mut suite);
    transfer_checks(cfg, &pb, &mut suite)?;
    pressure_checks(cfg, &params, &mut suite)?;
    experiment_checks(cfg, &mut suite)?;
    Ok(suite.checks)
}
