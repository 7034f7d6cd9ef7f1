//! Box-counting dimension of a planar point cloud, used as an independent
//! check on Bowen zeros.

use std::collections::HashSet;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numeric::least_squares;
use crate::orbits::JuliaCloud;

pub const MIN_POINTS: usize = 1000;

/// Grids per scale; counts are averaged over these offsets.
pub const GRID_OFFSETS: usize = 4;

const OFFSET_SEED: u64 = 0x5eed_b0c5;

#[derive(Clone, Debug, PartialEq)]
pub struct BoxCountReport {
    pub epsilons: Vec<f64>,
    /// Occupied cells per scale, averaged over the grid offsets.
    pub counts: Vec<f64>,
    pub raw_counts: Vec<[u64; GRID_OFFSETS]>,
    /// Least-squares slope of `log N` against `log(1/ε)`.
    pub slope: f64,
    pub intercept: f64,
    /// RMS residual of the fit.
    pub residual: f64,
}

/// `count` scales from `eps_max` down to `eps_min`, equally spaced in log.
pub fn geometric_ladder(eps_max: f64, eps_min: f64, count: usize) -> Result<Vec<f64>> {
    if !(eps_min > 0.0 && eps_max > eps_min && eps_max.is_finite()) || count < 2 {
        return Err(Error::Domain(format!("bad ladder {eps_max}..{eps_min} x{count}")));
    }
    let ratio = (eps_min / eps_max).ln() / (count - 1) as f64;
    Ok((0..count).map(|i| eps_max * (ratio * i as f64).exp()).collect())
}

fn offsets() -> [(f64, f64); GRID_OFFSETS] {
    let mut rng = ChaCha8Rng::seed_from_u64(OFFSET_SEED);
    let mut out = [(0.0, 0.0); GRID_OFFSETS];
    for o in &mut out {
        *o = (rng.gen::<f64>(), rng.gen::<f64>());
    }
    out
}

fn occupied(points: &[Complex64], eps: f64, offset: (f64, f64)) -> u64 {
    let (ox, oy) = (offset.0 * eps, offset.1 * eps);
    let cells: HashSet<(i64, i64)> = points
        .iter()
        .map(|z| (((z.re - ox) / eps).floor() as i64, ((z.im - oy) / eps).floor() as i64))
        .collect();
    cells.len() as u64
}

/// Grid-occupancy counts on square grids of side `ε` for every rung of the
/// ladder. `resolution` is the scale below which the cloud no longer
/// represents the set; rungs under it are rejected.
pub fn box_dimension(points: &[Complex64], ladder: &[f64], resolution: f64) -> Result<BoxCountReport> {
    if points.len() < MIN_POINTS {
        return Err(Error::Domain(format!("need at least {MIN_POINTS} points, got {}", points.len())));
    }
    if points.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
        return Err(Error::Domain("point cloud contains non-finite values".into()));
    }
    if ladder.len() < 2 || ladder.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
        return Err(Error::Domain("ladder needs at least two positive scales".into()));
    }
    let hi = ladder.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = ladder.iter().copied().fold(f64::INFINITY, f64::min);
    if hi / lo < 100.0 {
        return Err(Error::Domain(format!("ladder spans {:.3} decades, need at least 2", (hi / lo).log10())));
    }
    if lo < resolution {
        return Err(Error::Resolution { eps: lo, resolution });
    }
    let offsets = offsets();
    let raw_counts: Vec<[u64; GRID_OFFSETS]> = ladder
        .par_iter()
        .map(|&eps| offsets.map(|o| occupied(points, eps, o)))
        .collect();
    let counts: Vec<f64> =
        raw_counts.iter().map(|c| c.iter().sum::<u64>() as f64 / GRID_OFFSETS as f64).collect();
    let xs: Vec<f64> = ladder.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.ln()).collect();
    let (slope, intercept, residual) = least_squares(&xs, &ys);
    Ok(BoxCountReport { epsilons: ladder.to_vec(), counts, raw_counts, slope, intercept, residual })
}

/// Scale under which a cloud cannot be trusted: the larger of its analytic
/// resolution bound and the floating-point spacing of its coordinates.
pub fn effective_resolution(cloud: &JuliaCloud) -> f64 {
    let scale = cloud.points.iter().map(|z| z.norm()).fold(1.0, f64::max);
    cloud.resolution.max(1024.0 * f64::EPSILON * scale)
}

pub fn box_dimension_cloud(cloud: &JuliaCloud, ladder: &[f64]) -> Result<BoxCountReport> {
    box_dimension(&cloud.points, ladder, effective_resolution(cloud))
}

/// Ladder used for Julia clouds: a fixed number of rungs per decade from
/// `0.1` down to the cloud's effective resolution (floored at `1e-12`).
pub fn julia_ladder(cloud: &JuliaCloud) -> Result<Vec<f64>> {
    let eps_min = effective_resolution(cloud).max(1e-12);
    let decades = (0.1 / eps_min).log10();
    geometric_ladder(0.1, eps_min, (decades * 8.0).round() as usize + 1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbits::julia_cloud;
    use crate::pressure::{bowen_zero, NWindow, Which};
    use crate::SequenceSpec;

    fn square(k: u32) -> Vec<Complex64> {
        let side = 1usize << k;
        (0..side * side)
            .map(|i| Complex64::new((i % side) as f64 / side as f64, (i / side) as f64 / side as f64))
            .collect()
    }

    /// Two-map IFS `z -> r z` and `z -> r z + (1 - r)` on the real line,
    /// expanded to `depth` levels.
    fn cantor(r: f64, depth: u32) -> Vec<Complex64> {
        (0..1u64 << depth)
            .map(|w| {
                let mut x = 0.0;
                let mut scale = 1.0;
                for i in 0..depth {
                    if (w >> i) & 1 == 1 {
                        x += scale * (1.0 - r);
                    }
                    scale *= r;
                }
                Complex64::new(x, 0.0)
            })
            .collect()
    }

    #[test]
    fn filled_square() {
        let pts = square(10);
        let ladder = geometric_ladder(0.2, 2.0 / 1024.0, 12).unwrap();
        let rep = box_dimension(&pts, &ladder, 1.0 / 1024.0).unwrap();
        assert!((rep.slope - 2.0).abs() < 0.1, "{}", rep.slope);
    }

    #[test]
    fn segment() {
        let pts: Vec<Complex64> = (0..100_000).map(|i| Complex64::new(i as f64 / 1e5, 0.5 * i as f64 / 1e5)).collect();
        let ladder = geometric_ladder(0.1, 1e-4, 13).unwrap();
        let rep = box_dimension(&pts, &ladder, 1e-5).unwrap();
        assert!((rep.slope - 1.0).abs() < 0.1, "{}", rep.slope);
        for w in rep.counts.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn synthetic_cantor_sets() {
        for (r, depth) in [(1.0 / 3.0, 14), (0.25, 12), (0.1, 10)] {
            let pts = cantor(r, depth);
            let resolution = r.powi(depth as i32);
            let ladder = geometric_ladder(0.5, resolution * 4.0, 40).unwrap();
            let rep = box_dimension(&pts, &ladder, resolution).unwrap();
            let expected = 2f64.ln() / (1.0 / r).ln();
            assert!((rep.slope - expected).abs() < 0.05, "r={r}: {} vs {expected}", rep.slope);
        }
    }

    #[test]
    fn translation_invariance() {
        let pts = cantor(1.0 / 3.0, 12);
        let ladder = geometric_ladder(0.5, 1e-5, 30).unwrap();
        let base = box_dimension(&pts, &ladder, 2e-6).unwrap().slope;
        for shift in [Complex64::new(0.123, -0.77), Complex64::new(-3.3, 2.0)] {
            let moved: Vec<Complex64> = pts.iter().map(|z| z + shift).collect();
            let s = box_dimension(&moved, &ladder, 2e-6).unwrap().slope;
            assert!((s - base).abs() <= 0.01, "{s} vs {base}");
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let pts = square(5);
        assert!(box_dimension(&pts[..999], &[0.1, 1e-3], 0.0).is_err());
        assert!(box_dimension(&pts, &[0.1, 0.01], 0.0).is_err());
        assert!(matches!(box_dimension(&pts, &[0.1, 1e-4], 1e-3), Err(Error::Resolution { .. })));
        assert!(geometric_ladder(1e-3, 0.1, 5).is_err());
    }

    #[test]
    fn deterministic() {
        let pts = cantor(0.25, 10);
        let ladder = geometric_ladder(0.5, 1e-5, 20).unwrap();
        assert_eq!(box_dimension(&pts, &ladder, 0.0).unwrap(), box_dimension(&pts, &ladder, 0.0).unwrap());
    }

    #[test]
    fn julia_cross_check() {
        let seq = SequenceSpec::constant(Complex64::new(50.0, 0.0)).unwrap();
        let cloud = julia_cloud(&seq, 14, Complex64::new(1.0, 0.0)).unwrap();
        let rep = box_dimension_cloud(&cloud, &julia_ladder(&cloud).unwrap()).unwrap();
        let t = bowen_zero(&seq, Which::Lower, NWindow::new(10, 14).unwrap(), 1e-6, Complex64::new(1.0, 0.0)).unwrap();
        assert!((rep.slope - t.t_star).abs() < 0.05, "{} vs {}", rep.slope, t.t_star);
    }
}
