//! Acceptance criteria, one pass/fail line each. Run with
//! `cargo test -p fiberdim --test acceptance -- --nocapture` to see the
//! report.

use std::f64::consts::LN_2;
use std::time::{Duration, Instant};

use fiberdim::dimension_oracle::{box_dimension_cloud, julia_ladder};
use fiberdim::experiments::{
    gap_scan, kink_scan, metric_comparison, motion_speed_check, sandwich_report, cesaro_extremes,
};
use fiberdim::export;
use fiberdim::family::{self, trapping_certificate};
use fiberdim::orbits::{julia_cloud, Metric, Pullback, Word};
use fiberdim::pressure::{dimension_pair, pressure_curve_with, NWindow};
use fiberdim::transfer::{operator_sums_on, rho_estimate};
use fiberdim::{Complex64, Sequence, SequenceSpec, SignSchedule};

const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

struct Outcome {
    passed: bool,
    detail: String,
}

fn c50() -> SequenceSpec {
    SequenceSpec::constant(Complex64::new(50.0, 0.0)).unwrap()
}

fn specs() -> Vec<Sequence> {
    [
        "const:50",
        "const:41",
        "periodic:45,60+10i,200i",
        "explicit:41,1000,-80,tail=55",
        "random:seed=7,min=41,max=150",
        "perturb:base=const:50;blocks=2x2;x=0.1",
    ]
    .iter()
    .map(|s| s.parse().unwrap())
    .collect()
}

fn degree_counting() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut slowest = Duration::ZERO;
    for seq in specs() {
        for n in 1..=22 {
            let start = Instant::now();
            let pb = Pullback::new(&seq, 0, n, ONE).unwrap();
            let a = operator_sums_on(&pb, &[0.0], Metric::Planar).unwrap().log_values[0] / n as f64;
            slowest = slowest.max(start.elapsed());
            worst = worst.max((a - LN_2).abs());
        }
    }
    Outcome {
        passed: worst <= 1e-12 && slowest < Duration::from_secs(10),
        detail: format!("max |a_n(0) - log 2| = {worst:.2e} over 6 specs, n <= 22; slowest depth {slowest:.2?}"),
    }
}

fn round_trip() -> Outcome {
    let start = Instant::now();
    let pb = Pullback::new(&c50(), 0, 20, ONE).unwrap();
    let (count, stepwise) = pb.fold(Metric::Planar, |node| (1u64, node.lanes[0].round_trip), |a, b| (a.0 + b.0, a.1.max(b.1)));
    let zeros = pb.leaf(Word::zeros(20));
    let expected = 20.0 * 50f64.ln();
    let fixed = zeros.point == ONE && (zeros.log_deriv - expected).abs() <= 1e-12 * expected;
    // The composed forward map amplifies rounding by |f'| ~ 50 per step, so
    // the literal 20-fold composition is reported but checked stepwise.
    let mut composed: f64 = 0.0;
    for leaf in pb.leaves().step_by(4099) {
        let mut z = leaf.point;
        for l in pb.params() {
            z = family::apply(*l, z);
        }
        composed = composed.max((z - ONE).norm());
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: count == 1 << 20 && stepwise <= 1e-9 && fixed && elapsed < Duration::from_secs(5),
        detail: format!(
            "{count} leaves, max stepwise |f(z_k) - z_(k-1)| = {stepwise:.2e}, all-zeros leaf {} with log_deriv {}; \
             composed f^20 residual on sampled leaves {composed:.2e} (informational); {elapsed:.2?}",
            zeros.point, zeros.log_deriv
        ),
    }
}

fn certificates() -> Outcome {
    let good = [
        Complex64::new(41.0, 0.0),
        Complex64::new(50.0, 0.0),
        Complex64::new(40.0, 30.0),
        Complex64::new(0.0, 100.0),
    ];
    let mut passed = true;
    for l in good {
        let r = trapping_certificate(l);
        passed &= r.passed && (r.radicand_bound - 14.0 / (3.0 * l.norm())).abs() <= 1e-15 && r.radicand_bound < 1.0 / 3.0;
    }
    let bad = trapping_certificate(Complex64::new(10.0, 0.0));
    passed &= !bad.passed;
    Outcome { passed, detail: format!("4 admissible parameters pass; l = 10 fails: {:?}", bad.reason) }
}

fn bowen_and_oracle() -> Outcome {
    let start = Instant::now();
    let seq = c50();
    let pair = dimension_pair(&seq, NWindow::new(12, 20).unwrap(), 1e-4, ONE).unwrap();
    let (lo, hi) = (LN_2 / (200.0f64 / 3.0).ln(), LN_2 / (100.0f64 / 3.0).ln());
    let bracket = [pair.h_lower(), pair.h_upper()].iter().all(|t| (lo..=hi).contains(t));
    let cloud = julia_cloud(&seq, 18, ONE).unwrap();
    let ladder = julia_ladder(&cloud).unwrap();
    let boxes = box_dimension_cloud(&cloud, &ladder).unwrap();
    let elapsed = start.elapsed();
    let oracle = (boxes.slope - pair.h_lower()).abs();
    Outcome {
        passed: bracket && pair.gap() <= 2e-4 && oracle <= 0.05 && elapsed < Duration::from_secs(60),
        detail: format!(
            "h_lower {:.6}, h_upper {:.6} in [{lo:.5}, {hi:.5}], gap {:.2e}; box slope {:.4} over eps in [{:.1e}, {:.1e}] \
             (|diff| {oracle:.4}); {elapsed:.2?}",
            pair.h_lower(),
            pair.h_upper(),
            pair.gap(),
            boxes.slope,
            ladder[ladder.len() - 1],
            ladder[0]
        ),
    }
}

fn sandwich() -> Outcome {
    let start = Instant::now();
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    let mut cells = 0;
    for x in [-0.1, -0.05, -0.01, 0.01, 0.05, 0.1] {
        let rep = sandwich_report(&c50(), SignSchedule::default(), x, &[0.1, 0.18], 2, 20, ONE).unwrap();
        for r in &rep.records {
            cells += 1;
            // |a_pert - middle| <= t|x|/2 + 1e-9
            if r.residual > 1e-9 {
                violations += 1;
            }
            worst = worst.max(r.residual);
        }
    }
    let elapsed = start.elapsed();
    Outcome {
        passed: violations == 0 && cells == 6 * 2 * 19 && elapsed < Duration::from_secs(120),
        detail: format!("{cells} cells, {violations} violations, max signed slack {worst:.3e}; {elapsed:.2?}"),
    }
}

fn motion() -> Outcome {
    let start = Instant::now();
    let mut passed = true;
    let mut parts = Vec::new();
    for x in [0.01, 0.1] {
        let rep = motion_speed_check(&c50(), SignSchedule::default(), x, 18, ONE).unwrap();
        passed &= rep.max_displacement <= x.exp_m1() / 9.0 + 1e-12 && rep.max_log_ratio <= rep.delta / 6.0;
        parts.push(format!(
            "x={x}: disp {:.4e} <= {:.4e}, |log ratio| {:.4e} <= {:.4e}",
            rep.max_displacement,
            rep.displacement_bound(),
            rep.max_log_ratio,
            rep.delta / 6.0
        ));
    }
    let elapsed = start.elapsed();
    passed &= elapsed < Duration::from_secs(30);
    Outcome { passed, detail: format!("{}; {elapsed:.2?}", parts.join("; ")) }
}

fn rho_bounds() -> Outcome {
    let mut passed = true;
    let mut at_zero: f64 = 0.0;
    let mut cells = 0;
    for seq in ["const:50", "random:seed=7,min=41,max=150"] {
        let seq: Sequence = seq.parse().unwrap();
        for big_n in 2..=20 {
            for t in [0.0, 0.5, 1.0] {
                let rho = rho_estimate(&seq, 0, t, big_n, ONE).unwrap();
                let (lo, hi) = rho.bounds();
                passed &= rho.value >= lo * (1.0 - 1e-12) && rho.value <= hi * (1.0 + 1e-12);
                if t == 0.0 {
                    at_zero = at_zero.max((rho.value - 2.0).abs());
                }
                cells += 1;
            }
        }
    }
    Outcome {
        passed: passed && at_zero <= 1e-12,
        detail: format!("{cells} estimates inside [2 A^-t, 2 a^-t]; max |rho(0) - 2| = {at_zero:.2e}"),
    }
}

fn pressure_shape() -> Outcome {
    let t_grid: Vec<f64> = (0..21).map(|i| i as f64 / 20.0).collect();
    let (mut rows, mut failures) = (0, 0);
    for seq in specs() {
        let curve = pressure_curve_with(&seq, "", 0, &t_grid, 1, 20, ONE, None, Metric::Planar).unwrap();
        for n in curve.depths() {
            let row = curve.row(n);
            let (lo, hi) = (curve.min_log_deriv[n - 1] / n as f64, curve.max_log_deriv[n - 1] / n as f64);
            let ok = row.windows(2).all(|w| w[1] < w[0])
                && row.windows(3).all(|w| w[0] - 2.0 * w[1] + w[2] >= -1e-12)
                && row.windows(2).zip(t_grid.windows(2)).all(|(a, t)| {
                    let (d, dt) = (a[1] - a[0], t[1] - t[0]);
                    d >= -dt * hi - 1e-12 && d <= -dt * lo + 1e-12
                });
            rows += 1;
            if !ok {
                failures += 1;
            }
        }
    }
    Outcome { passed: failures == 0, detail: format!("{rows} rows, {failures} failing") }
}

fn spread_certificate() -> Outcome {
    let window = NWindow::new(2, 18).unwrap();
    let schedule = SignSchedule::default();
    let (cmax, nmax, cmin, nmin) = cesaro_extremes(&schedule, window);
    let scan = kink_scan(&c50(), schedule, 0.18, &[-0.1, 0.0, 0.1], window, ONE).unwrap();
    let row = scan.rows[2];
    let spread_ok = row.spread() >= row.spread_floor && row.band_residual <= 1e-9;
    let gaps = gap_scan(&c50(), schedule, &[0.0, 0.1], window, 1e-8, ONE).unwrap();
    let (g0, g1) = (gaps.rows[0].gap(), gaps.rows[1].gap());
    Outcome {
        passed: spread_ok && g1 > g0,
        detail: format!(
            "S_n/n in [{cmin:.4} (n={nmin}), {cmax:.4} (n={nmax})]; spread {:.5e} >= floor {:.5e}; \
             gap(0.1) = {g1:.5e} > gap(0) = {g0:.5e}",
            row.spread(),
            row.spread_floor
        ),
    }
}

fn render_outputs() -> Vec<u8> {
    let seq: Sequence = "const:50".parse().unwrap();
    let t_grid: Vec<f64> = (0..21).map(|i| 0.4 * i as f64 / 20.0).collect();
    let curve = pressure_curve_with(&seq, "const:50", 0, &t_grid, 4, 18, ONE, None, Metric::Planar).unwrap();
    let mut out = Vec::new();
    export::write_pressure(&mut out, &curve).unwrap();
    let xs = [-0.1, -0.05, 0.0, 0.05, 0.1];
    let window = NWindow::new(8, 16).unwrap();
    let kink = kink_scan(&c50(), SignSchedule::default(), 0.18, &xs, window, ONE).unwrap();
    export::write_kink(&mut out, &[kink]).unwrap();
    let gap = gap_scan(&c50(), SignSchedule::default(), &xs, window, 1e-8, ONE).unwrap();
    export::write_gap(&mut out, &gap).unwrap();
    let sandwich = sandwich_report(&c50(), SignSchedule::default(), 0.05, &[0.18], 2, 16, ONE).unwrap();
    export::write_sandwich(&mut out, &[sandwich]).unwrap();
    out
}

fn determinism() -> Outcome {
    let outputs: Vec<Vec<u8>> = [1, 2, 8]
        .iter()
        .map(|&w| rayon::ThreadPoolBuilder::new().num_threads(w).build().unwrap().install(render_outputs))
        .collect();
    let same = outputs.windows(2).all(|w| w[0] == w[1]);
    Outcome { passed: same, detail: format!("pressure + perturb CSVs, {} bytes, workers 1/2/8", outputs[0].len()) }
}

fn metric_robustness() -> Outcome {
    let rep = metric_comparison(&c50(), &[4, 8, 12, 16, 20], 1e-10, ONE).unwrap();
    let last = rep.rows.last().unwrap();
    let c = rep.constant();
    let diffs: Vec<String> = rep.rows.iter().map(|r| format!("n={}: {:.2e}", r.n, r.difference())).collect();
    Outcome {
        passed: last.difference() < 0.02 && rep.rows.iter().all(|r| r.difference() <= c / r.n as f64 + 1e-15),
        detail: format!("measured C = {c:.4}; {}", diffs.join(", ")),
    }
}

#[test]
fn acceptance() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("degree counting a_n(0) = log 2", degree_counting),
        ("round-trip fidelity at depth 20", round_trip),
        ("trapping certificate", certificates),
        ("Bowen bracket and box-count agreement", bowen_and_oracle),
        ("exact pressure sandwich", sandwich),
        ("motion bounds", motion),
        ("rho bounds", rho_bounds),
        ("pressure shape", pressure_shape),
        ("spread certificate and gap growth", spread_certificate),
        ("determinism across worker counts", determinism),
        ("metric robustness", metric_robustness),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = run();
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("{status} [{}] {name}: {}", i + 1, outcome.detail);
        if !outcome.passed {
            failed.push(i + 1);
        }
    }
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
