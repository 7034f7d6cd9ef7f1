//! Transfer operators `L_t g(w) = Σ_{f(z) = w} |f'(z)|^{-t} g(z)` iterated
//! over the preimage tree, normalized pullbacks of point masses (finite-N
//! conformal measures) and the eigenvalue ratios `ρ̂`.
//!
//! Everything is carried in log-domain: at depth 20 and `t = 1` a single
//! leaf weight is about `50^{-20}`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::family;
use crate::numeric::logaddexp;
use crate::orbits::{Metric, Pullback, TreeStats, Word};
use crate::param_seq::Parameters;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorValue {
    pub t: f64,
    pub j: usize,
    pub n: usize,
    /// `log L^n_{σ^j λ, t} 1(anchor)`.
    pub log_value: f64,
    pub anchor: Complex64,
}

/// Log operator sums on a whole `t` grid plus the tree extremes, from one
/// traversal.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSums {
    pub log_values: Vec<f64>,
    pub stats: TreeStats,
}

pub(crate) fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if let Some(t) = t_grid.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
        return Err(Error::Domain(format!("t must be finite and >= 0, got {t}")));
    }
    Ok(())
}

struct Acc {
    lse: Vec<f64>,
    stats: TreeStats,
}

/// One shared tree walk for every `t` in the grid.
pub fn operator_sums_on(pb: &Pullback, t_grid: &[f64], metric: Metric) -> Result<OperatorSums> {
    check_t_grid(t_grid)?;
    let acc = pb.fold(
        metric,
        |node| {
            let lane = &node.lanes[0];
            Acc { lse: t_grid.iter().map(|t| -t * lane.log_deriv).collect(), stats: TreeStats::from_lane(lane) }
        },
        |mut a, b| {
            for (x, y) in a.lse.iter_mut().zip(&b.lse) {
                *x = logaddexp(*x, *y);
            }
            a.stats = TreeStats::merge(a.stats, b.stats);
            a
        },
    );
    Ok(OperatorSums { log_values: acc.lse, stats: acc.stats })
}

pub fn operator_sums<P: Parameters + ?Sized>(
    seq: &P,
    j: usize,
    n: usize,
    t_grid: &[f64],
    anchor: Complex64,
    metric: Metric,
) -> Result<OperatorSums> {
    check_t_grid(t_grid)?;
    operator_sums_on(&Pullback::new(seq, j, n, anchor)?, t_grid, metric)
}

/// `log L^n_{σ^j λ, t} 1(anchor)` for every `t` in the grid.
pub fn operator_power<P: Parameters + ?Sized>(
    seq: &P,
    j: usize,
    n: usize,
    t_grid: &[f64],
    anchor: Complex64,
) -> Result<Vec<OperatorValue>> {
    let sums = operator_sums(seq, j, n, t_grid, anchor, Metric::Planar)?;
    Ok(t_grid
        .iter()
        .zip(sums.log_values)
        .map(|(&t, log_value)| OperatorValue { t, j, n, log_value, anchor })
        .collect())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RhoEstimate {
    pub t: f64,
    pub j: usize,
    /// `L^{N-j}_{σ^j} 1(w) / L^{N-j-1}_{σ^{j+1}} 1(w)`.
    pub value: f64,
    pub big_n: usize,
    /// Extremes of the one-step `|f'|` over the depth-`(N-j)` tree.
    pub step_min: f64,
    pub step_max: f64,
}

impl RhoEstimate {
    /// `[2 A^{-t}, 2 a^{-t}]` with the measured step extremes `a`, `A`.
    pub fn bounds(&self) -> (f64, f64) {
        (2.0 * self.step_max.powf(-self.t), 2.0 * self.step_min.powf(-self.t))
    }
}

pub fn rho_estimate<P: Parameters + ?Sized>(
    seq: &P,
    j: usize,
    t: f64,
    big_n: usize,
    anchor: Complex64,
) -> Result<RhoEstimate> {
    if big_n < j + 2 {
        return Err(Error::Domain(format!("rho estimate needs N >= j + 2, got N = {big_n}, j = {j}")));
    }
    let outer = operator_sums(seq, j, big_n - j, &[t], anchor, Metric::Planar)?;
    let inner = operator_sums(seq, j + 1, big_n - j - 1, &[t], anchor, Metric::Planar)?;
    Ok(RhoEstimate {
        t,
        j,
        value: (outer.log_values[0] - inner.log_values[0]).exp(),
        big_n,
        step_min: outer.stats.min_step,
        step_max: outer.stats.max_step,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Atom {
    pub word: Word,
    pub point: Complex64,
    pub weight: f64,
    pub log_weight: f64,
}

/// `m_j^N = β_j^N (L^{N-j})^* δ_{w_N}`: atoms at the depth-`(N-j)` leaves,
/// in lexicographic word order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConformalAtoms {
    pub t: f64,
    pub j: usize,
    pub big_n: usize,
    pub anchor: Complex64,
    /// `log L^{N-j} 1(w_N)`, i.e. `-log β_j^N`.
    pub log_normalizer: f64,
    pub atoms: Vec<Atom>,
}

impl ConformalAtoms {
    pub fn total_mass(&self) -> f64 {
        crate::numeric::pairwise_sum(&self.atoms.iter().map(|a| a.weight).collect::<Vec<_>>())
    }
}

pub fn conformal_atoms<P: Parameters + ?Sized>(
    seq: &P,
    j: usize,
    big_n: usize,
    t: f64,
    anchor: Complex64,
) -> Result<ConformalAtoms> {
    if big_n < j {
        return Err(Error::Domain(format!("conformal atoms need N >= j, got N = {big_n}, j = {j}")));
    }
    check_t_grid(&[t])?;
    let pb = Pullback::new(seq, j, big_n - j, anchor)?;
    let log_normalizer = operator_sums_on(&pb, &[t], Metric::Planar)?.log_values[0];
    let atoms = pb
        .leaves()
        .map(|leaf| {
            let log_weight = -t * leaf.log_deriv - log_normalizer;
            Atom { word: leaf.word, point: leaf.point, weight: log_weight.exp(), log_weight }
        })
        .collect();
    Ok(ConformalAtoms { t, j, big_n, anchor, log_normalizer, atoms })
}

/// Mass of the closed planar disk `|z - center| <= radius`.
pub fn measure_ball(m: &ConformalAtoms, center: Complex64, radius: f64) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::Domain(format!("ball radius must be positive, got {radius}")));
    }
    Ok(m.atoms.iter().filter(|a| (a.point - center).norm() <= radius).map(|a| a.weight).sum())
}

/// Atom-wise check of `m_{j+1}(f(A)) = ρ ∫_A |f'|^t dm_j` on the finite-N
/// pullbacks: for each atom `z` of `m_j` the ratio
/// `weight_{j+1}(f(z)) / (ρ̂ |f'(z)|^t weight_j(z))` is formed, the best
/// single constant is factored out, and the largest remaining relative
/// deviation is returned.
pub fn change_of_variables_check<P: Parameters + ?Sized>(
    seq: &P,
    j: usize,
    big_n: usize,
    t: f64,
    anchor: Complex64,
) -> Result<f64> {
    if big_n < j + 2 {
        return Err(Error::Domain(format!("change of variables needs N - j >= 2, got N = {big_n}, j = {j}")));
    }
    let here = conformal_atoms(seq, j, big_n, t, anchor)?;
    let next = conformal_atoms(seq, j + 1, big_n, t, anchor)?;
    let log_rho = here.log_normalizer - next.log_normalizer;
    let l = seq.lambda(j as u64 + 1)?;
    let mask = (1u64 << (big_n - j - 1)) - 1;

    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for atom in &here.atoms {
        let image = &next.atoms[(atom.word.index() & mask) as usize];
        debug_assert_eq!(image.word, atom.word.tail());
        if (family::apply(l, atom.point) - image.point).norm() > 1e-9 {
            return Ok(f64::INFINITY);
        }
        let log_jac = t * family::derivative(l, atom.point).norm().ln();
        let log_ratio = image.log_weight - log_rho - log_jac - atom.log_weight;
        lo = lo.min(log_ratio);
        hi = hi.max(log_ratio);
    }
    // Minimax constant c = (r_min + r_max) / 2 leaves max |r/c - 1| equal to
    // (r_max - r_min) / (r_max + r_min) = tanh((log r_max - log r_min) / 2).
    Ok(((hi - lo) / 2.0).tanh())
}
