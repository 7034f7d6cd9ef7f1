//! Inverse-branch preimage trees.
//!
//! A [`Pullback`] fixes a fiber `j`, a depth `n` and an anchor `w` living in
//! fiber `j + n`. Its leaves are the `2^n` points `z_ω` with
//! `f_{λ_{j+n}} ∘ ... ∘ f_{λ_{j+1}}(z_ω) = w`, obtained by applying the
//! inverse branches of `λ_{j+n}, λ_{j+n-1}, ..., λ_{j+1}` in that order.
//!
//! Words are forward itineraries: symbol `i` of `ω` names the disk
//! `U_{ω_i}` containing the `i`-th forward image of `z_ω`, so a leaf whose
//! word starts with `b` lies in `U_b`. Leaf streams are lexicographic in
//! the word.
//!
//! Reductions ([`Pullback::fold`]) walk the tree depth first from the
//! anchor and combine sibling results pairwise (branch 0 on the left). The
//! combination tree is fixed by the depth alone, so results are bit-for-bit
//! independent of the number of rayon workers.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::family::{self, BranchLabel};
use crate::param_seq::Parameters;

pub const DEFAULT_DEPTH_LIMIT: usize = 26;

/// Words are packed into a `u64`.
const MAX_WORD_LEN: usize = 63;

/// Below this many remaining levels a subtree is walked on one thread.
const SEQUENTIAL_LEVELS: usize = 12;

/// Depth cap; `FIBERDIM_DEPTH_LIMIT` overrides the default of 26.
pub fn depth_limit() -> usize {
    std::env::var("FIBERDIM_DEPTH_LIMIT")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .map(|v| v.min(MAX_WORD_LEN))
        .unwrap_or(DEFAULT_DEPTH_LIMIT)
}

pub fn check_depth(depth: usize) -> Result<()> {
    let limit = depth_limit();
    if depth > limit {
        return Err(Error::DepthLimit { depth, limit });
    }
    Ok(())
}

pub fn check_anchor(anchor: Complex64) -> Result<()> {
    if !family::in_trap_closure(anchor, 1e-12) {
        return Err(Error::Domain(format!(
            "anchor {anchor} is not in the closed trapping disks around ±1"
        )));
    }
    Ok(())
}

/// A finite word over `{0, 1}`. Symbol 0 is the most significant bit of
/// [`Word::index`], so integer order is lexicographic order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Word {
    len: u8,
    bits: u64,
}

impl Word {
    pub fn new(index: u64, len: usize) -> Word {
        assert!(len <= MAX_WORD_LEN, "word length {len} too large");
        let mask = if len == 0 { 0 } else { u64::MAX >> (64 - len) };
        Word { len: len as u8, bits: index & mask }
    }

    pub fn zeros(len: usize) -> Word {
        Word::new(0, len)
    }

    pub fn from_symbols(symbols: &[u8]) -> Word {
        let index = symbols.iter().fold(0u64, |acc, &s| (acc << 1) | u64::from(s & 1));
        Word::new(index, symbols.len())
    }

    pub fn len(&self) -> usize {
        self.len as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Position in the lexicographic enumeration of words of this length.
    pub fn index(&self) -> u64 {
        self.bits
    }

    pub fn symbol(&self, i: usize) -> u8 {
        assert!(i < self.len(), "symbol {i} out of range for length {}", self.len);
        ((self.bits >> (self.len() - 1 - i)) & 1) as u8
    }

    pub fn label(&self, i: usize) -> BranchLabel {
        BranchLabel::from_bit(self.symbol(i))
    }

    /// The word with its first symbol removed: the itinerary of `f(z_ω)`.
    pub fn tail(&self) -> Word {
        assert!(!self.is_empty());
        Word::new(self.bits, self.len() - 1)
    }

    pub fn symbols(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len()).map(|i| self.symbol(i))
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in self.symbols() {
            f.write_str(if s == 0 { "0" } else { "1" })?;
        }
        Ok(())
    }
}

impl FromStr for Word {
    type Err = Error;

    fn from_str(s: &str) -> Result<Word> {
        let symbols = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("word symbols are 0/1, got {other:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        if symbols.len() > MAX_WORD_LEN {
            return Err(Error::Parse(format!("word longer than {MAX_WORD_LEN}")));
        }
        Ok(Word::from_symbols(&symbols))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CylinderLeaf {
    pub word: Word,
    pub point: Complex64,
    /// `log |(f^n_{σ^j λ})'(point)|`.
    pub log_deriv: f64,
    pub fiber: usize,
    pub depth: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Metric {
    #[default]
    Planar,
    Spherical,
}

/// One step of the walk: pull `w` back through `f_l` on `label`, returning
/// the new point and the metric derivative of `f_l` there.
#[inline]
fn pull(l: Complex64, w: Complex64, label: BranchLabel, metric: Metric) -> (Complex64, f64) {
    let z = family::inverse_branch_unchecked(l, w, label);
    let planar = (l * z).norm();
    let step = match metric {
        Metric::Planar => planar,
        Metric::Spherical => planar * (1.0 + z.norm_sqr()) / (1.0 + w.norm_sqr()),
    };
    (z, step)
}

/// Per-sequence state carried along a root-to-leaf path.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Lane {
    pub point: Complex64,
    pub log_deriv: f64,
    /// Smallest and largest one-step derivative modulus seen on the path.
    pub step_min: f64,
    pub step_max: f64,
    /// Largest `|f_{λ_k}(z_{k-1}) - z_k|` along the path: every forward step
    /// must land back on the orbit point it was pulled back from.
    pub round_trip: f64,
}

impl Lane {
    fn root(anchor: Complex64) -> Lane {
        Lane { point: anchor, log_deriv: 0.0, step_min: f64::INFINITY, step_max: 0.0, round_trip: 0.0 }
    }

    #[inline]
    fn child(&self, l: Complex64, label: BranchLabel, metric: Metric) -> Lane {
        let (z, step) = pull(l, self.point, label, metric);
        Lane {
            point: z,
            log_deriv: self.log_deriv + step.ln(),
            step_min: self.step_min.min(step),
            step_max: self.step_max.max(step),
            round_trip: self.round_trip.max((family::apply(l, z) - self.point).norm()),
        }
    }
}

/// A leaf as seen by [`Pullback::fold`]: one lane per sequence walked.
#[derive(Clone, Copy, Debug)]
pub struct Node<const K: usize> {
    pub word: Word,
    pub lanes: [Lane; K],
}

struct Walk<'a, const K: usize, F, C> {
    /// `params[i][lane] = λ_{j+1+i}` of that lane's sequence.
    params: &'a [[Complex64; K]],
    depth: usize,
    metric: Metric,
    leaf: &'a F,
    combine: &'a C,
}

impl<const K: usize, R, F, C> Walk<'_, K, F, C>
where
    R: Send,
    F: Fn(&Node<K>) -> R + Sync,
    C: Fn(R, R) -> R + Sync,
{
    fn run(&self, level: usize, bits: u64, lanes: [Lane; K]) -> R {
        if level == 0 {
            return (self.leaf)(&Node { word: Word::new(bits, self.depth), lanes });
        }
        let params = &self.params[level - 1];
        let shift = self.depth - level;
        let child = |label: BranchLabel| {
            let mut next = lanes;
            for (lane, l) in next.iter_mut().zip(params) {
                *lane = lane.child(*l, label, self.metric);
            }
            (bits | (u64::from(label.bit()) << shift), next)
        };
        let (b0, l0) = child(BranchLabel::Zero);
        let (b1, l1) = child(BranchLabel::One);
        let (left, right) = if level > SEQUENTIAL_LEVELS {
            rayon::join(|| self.run(level - 1, b0, l0), || self.run(level - 1, b1, l1))
        } else {
            (self.run(level - 1, b0, l0), self.run(level - 1, b1, l1))
        };
        (self.combine)(left, right)
    }

    fn fill(&self, level: usize, lane: Lane, out: &mut [f64]) {
        if level == 0 {
            out[0] = lane.log_deriv;
            return;
        }
        let l = self.params[level - 1][0];
        let (lo, hi) = out.split_at_mut(out.len() / 2);
        let c0 = lane.child(l, BranchLabel::Zero, self.metric);
        let c1 = lane.child(l, BranchLabel::One, self.metric);
        if level > SEQUENTIAL_LEVELS {
            rayon::join(|| self.fill(level - 1, c0, lo), || self.fill(level - 1, c1, hi));
        } else {
            self.fill(level - 1, c0, lo);
            self.fill(level - 1, c1, hi);
        }
    }
}

fn fold_lanes<const K: usize, R, F, C>(
    params: &[[Complex64; K]],
    anchors: [Complex64; K],
    metric: Metric,
    leaf: F,
    combine: C,
) -> R
where
    R: Send,
    F: Fn(&Node<K>) -> R + Sync,
    C: Fn(R, R) -> R + Sync,
{
    let walk = Walk { params, depth: params.len(), metric, leaf: &leaf, combine: &combine };
    walk.run(params.len(), 0, anchors.map(Lane::root))
}

/// The depth-`n` preimage tree of an anchor over fiber `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Pullback {
    fiber: usize,
    anchor: Complex64,
    /// `λ_{j+1}, ..., λ_{j+n}`.
    params: Vec<Complex64>,
}

impl Pullback {
    pub fn new<P: Parameters + ?Sized>(seq: &P, fiber: usize, depth: usize, anchor: Complex64) -> Result<Pullback> {
        check_depth(depth)?;
        check_anchor(anchor)?;
        let params = seq.window(fiber as u64 + 1, depth)?;
        Ok(Pullback { fiber, anchor, params })
    }

    pub fn fiber(&self) -> usize {
        self.fiber
    }

    pub fn depth(&self) -> usize {
        self.params.len()
    }

    pub fn anchor(&self) -> Complex64 {
        self.anchor
    }

    pub fn params(&self) -> &[Complex64] {
        &self.params
    }

    pub fn leaf_count(&self) -> u64 {
        1u64 << self.depth()
    }

    /// Leaf for one word, computed along its own path.
    pub fn leaf(&self, word: Word) -> CylinderLeaf {
        self.leaf_with_metric(word, Metric::Planar)
    }

    pub fn leaf_with_metric(&self, word: Word, metric: Metric) -> CylinderLeaf {
        let lane = self.lane(word, metric);
        CylinderLeaf { word, point: lane.point, log_deriv: lane.log_deriv, fiber: self.fiber, depth: self.depth() }
    }

    fn lane(&self, word: Word, metric: Metric) -> Lane {
        let n = self.depth();
        assert_eq!(word.len(), n, "word length must equal the pullback depth");
        let mut lane = Lane::root(self.anchor);
        for i in (0..n).rev() {
            lane = lane.child(self.params[i], word.label(i), metric);
        }
        lane
    }

    /// The orbit `z_ω = z_0, z_1, ..., z_n = anchor` as produced by the
    /// pullback, so `z_k` lives in fiber `j + k`.
    pub fn orbit(&self, word: Word) -> Vec<Complex64> {
        let n = self.depth();
        assert_eq!(word.len(), n, "word length must equal the pullback depth");
        let mut out = vec![self.anchor; n + 1];
        for i in (0..n).rev() {
            out[i] = family::inverse_branch_unchecked(self.params[i], out[i + 1], word.label(i));
        }
        out
    }

    /// Largest forward-step defect `|f_{λ_{j+k}}(z_{k-1}) - z_k|` along the
    /// orbit of one word.
    ///
    /// Composing all `n` forward maps on the rounded leaf instead would
    /// amplify its last-bit error by `|(f^n)'| ≈ |λ|^n`, so fidelity is
    /// checked one map at a time.
    pub fn round_trip_residual(&self, word: Word) -> f64 {
        self.lane(word, Metric::Planar).round_trip
    }

    /// All leaves in lexicographic word order; `O(n)` memory.
    pub fn leaves(&self) -> LeafIter<'_> {
        LeafIter { pullback: self, next: 0, end: self.leaf_count() }
    }

    /// Leaf points in lexicographic word order, computed in parallel chunks.
    pub fn points(&self) -> Vec<Complex64> {
        let n = self.depth();
        (0..self.leaf_count() as usize)
            .into_par_iter()
            .with_min_len(1 << 12)
            .map(|i| self.leaf(Word::new(i as u64, n)).point)
            .collect()
    }

    /// Leaf log-derivatives in walk order (bit-reversed words), for repeated
    /// evaluation of operator sums at many `t`.
    pub fn log_derivs(&self, metric: Metric) -> Vec<f64> {
        let mut out = vec![0.0; self.leaf_count() as usize];
        let params: Vec<[Complex64; 1]> = self.params.iter().map(|l| [*l]).collect();
        let noop_leaf = |_: &Node<1>| ();
        let noop_combine = |_: (), _: ()| ();
        let walk = Walk { params: &params, depth: params.len(), metric, leaf: &noop_leaf, combine: &noop_combine };
        walk.fill(params.len(), Lane::root(self.anchor), &mut out);
        out
    }

    /// Pairwise tree reduction over all leaves.
    pub fn fold<R, F, C>(&self, metric: Metric, leaf: F, combine: C) -> R
    where
        R: Send,
        F: Fn(&Node<1>) -> R + Sync,
        C: Fn(R, R) -> R + Sync,
    {
        let params: Vec<[Complex64; 1]> = self.params.iter().map(|l| [*l]).collect();
        fold_lanes(&params, [self.anchor], metric, leaf, combine)
    }

    /// Extremes of the leaf log-derivatives and of the one-step derivatives.
    pub fn stats(&self, metric: Metric) -> TreeStats {
        self.fold(metric, |node| TreeStats::from_lane(&node.lanes[0]), TreeStats::merge)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TreeStats {
    pub min_log_deriv: f64,
    pub max_log_deriv: f64,
    pub min_step: f64,
    pub max_step: f64,
}

impl TreeStats {
    pub fn from_lane(lane: &Lane) -> TreeStats {
        TreeStats {
            min_log_deriv: lane.log_deriv,
            max_log_deriv: lane.log_deriv,
            min_step: lane.step_min,
            max_step: lane.step_max,
        }
    }

    pub fn merge(a: TreeStats, b: TreeStats) -> TreeStats {
        TreeStats {
            min_log_deriv: a.min_log_deriv.min(b.min_log_deriv),
            max_log_deriv: a.max_log_deriv.max(b.max_log_deriv),
            min_step: a.min_step.min(b.min_step),
            max_step: a.max_step.max(b.max_step),
        }
    }
}

pub struct LeafIter<'a> {
    pullback: &'a Pullback,
    next: u64,
    end: u64,
}

impl Iterator for LeafIter<'_> {
    type Item = CylinderLeaf;

    fn next(&mut self) -> Option<CylinderLeaf> {
        if self.next >= self.end {
            return None;
        }
        let leaf = self.pullback.leaf(Word::new(self.next, self.pullback.depth()));
        self.next += 1;
        Some(leaf)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = (self.end - self.next) as usize;
        (left, Some(left))
    }
}

impl ExactSizeIterator for LeafIter<'_> {}

/// Stream of the `2^n` leaves over fiber `j`.
pub fn pullback_leaves<P: Parameters + ?Sized>(
    seq: &P,
    fiber: usize,
    depth: usize,
    anchor: Complex64,
) -> Result<impl ExactSizeIterator<Item = CylinderLeaf>> {
    let pb = Pullback::new(seq, fiber, depth, anchor)?;
    let n = pb.depth();
    Ok((0..pb.leaf_count() as usize).map(move |i| pb.leaf(Word::new(i as u64, n))))
}

#[derive(Clone, Debug, PartialEq)]
pub struct JuliaCloud {
    pub points: Vec<Complex64>,
    /// Every point of the fiber-0 Julia set is within this distance of some
    /// returned point: `(2/3) * (3 / (2 inf|λ_k|))^depth`.
    pub resolution: f64,
}

pub fn resolution_bound(inf_modulus: f64, depth: usize) -> f64 {
    (2.0 / 3.0) * (1.5 / inf_modulus).powi(depth as i32)
}

/// The depth-`n` leaf points over fiber 0. With the default anchor 1 every
/// point is exactly a Julia-set point.
pub fn julia_cloud<P: Parameters + ?Sized>(seq: &P, depth: usize, anchor: Complex64) -> Result<JuliaCloud> {
    let pb = Pullback::new(seq, 0, depth, anchor)?;
    let inf = pb.params().iter().map(|l| l.norm()).fold(f64::INFINITY, f64::min);
    let resolution = if depth == 0 { 2.0 / 3.0 } else { resolution_bound(inf, depth) };
    Ok(JuliaCloud { points: pb.points(), resolution })
}

/// Two pullback trees sharing fiber, depth and anchor, walked in lockstep so
/// the leaves with equal words are paired.
#[derive(Clone, Debug, PartialEq)]
pub struct PairedPullback {
    first: Pullback,
    second: Pullback,
}

impl PairedPullback {
    pub fn new<P: Parameters + ?Sized, Q: Parameters + ?Sized>(
        first: &P,
        second: &Q,
        fiber: usize,
        depth: usize,
        anchor: Complex64,
    ) -> Result<PairedPullback> {
        Ok(PairedPullback {
            first: Pullback::new(first, fiber, depth, anchor)?,
            second: Pullback::new(second, fiber, depth, anchor)?,
        })
    }

    pub fn first(&self) -> &Pullback {
        &self.first
    }

    pub fn second(&self) -> &Pullback {
        &self.second
    }

    pub fn fold<R, F, C>(&self, metric: Metric, leaf: F, combine: C) -> R
    where
        R: Send,
        F: Fn(&Node<2>) -> R + Sync,
        C: Fn(R, R) -> R + Sync,
    {
        let params: Vec<[Complex64; 2]> =
            self.first.params.iter().zip(&self.second.params).map(|(a, b)| [*a, *b]).collect();
        fold_lanes(&params, [self.first.anchor, self.second.anchor], metric, leaf, combine)
    }
}

/// Pulls the anchor back along one word under both sequences; this is the
/// holomorphic motion restricted to the leaf of that word.
pub fn motion_pair<P: Parameters + ?Sized, Q: Parameters + ?Sized>(
    word: Word,
    base: &P,
    perturbed: &Q,
    fiber: usize,
    anchor: Complex64,
) -> Result<(Complex64, Complex64)> {
    let pair = PairedPullback::new(base, perturbed, fiber, word.len(), anchor)?;
    Ok((pair.first.leaf(word).point, pair.second.leaf(word).point))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::param_seq::{PerturbedSequence, SequenceSpec, SignSchedule};
    use approx::assert_relative_eq;
    use std::collections::HashSet;

    const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

    fn c50() -> SequenceSpec {
        SequenceSpec::constant(Complex64::new(50.0, 0.0)).unwrap()
    }

    #[test]
    fn word_basics() {
        let w: Word = "0110".parse().unwrap();
        assert_eq!(w.len(), 4);
        assert_eq!(w.index(), 0b0110);
        assert_eq!(w.symbol(0), 0);
        assert_eq!(w.symbol(1), 1);
        assert_eq!(w.tail().to_string(), "110");
        assert_eq!(w.to_string(), "0110");
        assert!("012".parse::<Word>().is_err());
        assert!(Word::new(3, 2) > Word::new(1, 2));
    }

    #[test]
    fn depth_one_leaves() {
        let leaves: Vec<_> = pullback_leaves(&c50(), 0, 1, ONE).unwrap().collect();
        assert_eq!(leaves.len(), 2);
        assert_eq!(leaves[0].word.to_string(), "0");
        assert_eq!(leaves[0].point, ONE);
        assert_relative_eq!(leaves[0].log_deriv, 50f64.ln());
        assert_eq!(leaves[1].point, -ONE);
        assert_relative_eq!(leaves[1].log_deriv, 50f64.ln());
    }

    #[test]
    fn all_zero_word_stays_fixed() {
        let pb = Pullback::new(&c50(), 0, 3, ONE).unwrap();
        let leaf = pb.leaf(Word::zeros(3));
        assert_eq!(leaf.point, ONE);
        assert_relative_eq!(leaf.log_deriv, 3.0 * 50f64.ln(), max_relative = 1e-15);
    }

    /// Brute force: every z with f(f(z)) = 1, found by inverting twice with
    /// both labels, without the tree machinery.
    #[test]
    fn depth_two_matches_brute_force() {
        let l = Complex64::new(50.0, 0.0);
        let mut brute = Vec::new();
        for outer in [BranchLabel::Zero, BranchLabel::One] {
            let mid = family::inverse_branch(l, ONE, outer).unwrap();
            for inner in [BranchLabel::Zero, BranchLabel::One] {
                brute.push(family::inverse_branch(l, mid, inner).unwrap());
            }
        }
        let leaves: Vec<_> = pullback_leaves(&c50(), 0, 2, ONE).unwrap().collect();
        assert_eq!(leaves.len(), 4);
        for leaf in &leaves {
            assert!(brute.iter().any(|b| (b - leaf.point).norm() < 1e-15));
            let twice = family::apply(l, family::apply(l, leaf.point));
            assert!((twice - ONE).norm() < 1e-12);
        }
        let distinct: HashSet<_> = leaves.iter().map(|l| (l.point.re.to_bits(), l.point.im.to_bits())).collect();
        assert_eq!(distinct.len(), 4);
    }

    #[test]
    fn julia_cloud_depth_two_values() {
        let cloud = julia_cloud(&c50(), 2, ONE).unwrap();
        let r = 0.92f64.sqrt();
        let mut xs: Vec<f64> = cloud.points.iter().map(|p| p.re).collect();
        xs.sort_by(f64::total_cmp);
        assert_relative_eq!(xs[0], -1.0);
        assert_relative_eq!(xs[1], -r, max_relative = 1e-15);
        assert_relative_eq!(xs[2], r, max_relative = 1e-15);
        assert_relative_eq!(xs[3], 1.0);
        assert!(cloud.points.iter().all(|p| family::in_trap_closure(*p, 0.0)));
    }

    #[test]
    fn errors() {
        assert!(matches!(Pullback::new(&c50(), 0, 3, Complex64::new(0.0, 0.0)), Err(Error::Domain(_))));
        assert!(matches!(Pullback::new(&c50(), 0, 64, ONE), Err(Error::DepthLimit { .. })));
    }

    #[test]
    fn leaves_trap_round_trip_and_expand() {
        let seqs: Vec<Box<dyn Parameters>> = vec![
            Box::new(c50()),
            Box::new("periodic:50,60+10i,41".parse::<SequenceSpec>().unwrap()),
            Box::new(SequenceSpec::random_annulus(3, 41.0, 90.0).unwrap()),
        ];
        for seq in &seqs {
            for anchor in [ONE, Complex64::new(-1.2, 0.1)] {
                let pb = Pullback::new(seq.as_ref(), 2, 10, anchor).unwrap();
                let floor = 10.0 * (80.0f64 / 3.0).ln();
                let mut seen = HashSet::new();
                for leaf in pb.leaves() {
                    assert!(seen.insert(leaf.word));
                    assert_eq!(family::trap_label(leaf.point, 0.0), Some(leaf.word.label(0)));
                    assert!(leaf.log_deriv >= floor - 1e-9);
                    assert!(pb.round_trip_residual(leaf.word) <= 1e-9);
                    let orbit = pb.orbit(leaf.word);
                    assert_eq!(orbit[0], leaf.point);
                    assert_eq!(orbit[10], anchor);
                    for (i, z) in orbit[..10].iter().enumerate() {
                        assert_eq!(family::trap_label(*z, 0.0), Some(leaf.word.label(i)));
                        assert!((family::apply(pb.params()[i], *z) - orbit[i + 1]).norm() <= 1e-12);
                    }
                }
                assert_eq!(seen.len(), 1024);
            }
        }
    }

    #[test]
    fn stream_fold_and_fill_agree() {
        let seq = SequenceSpec::random_annulus(11, 45.0, 70.0).unwrap();
        let pb = Pullback::new(&seq, 1, 9, ONE).unwrap();
        let mut from_fold = pb.fold(Metric::Planar, |n| vec![(n.word, n.lanes[0].log_deriv)], |mut a, b| {
            a.extend(b);
            a
        });
        from_fold.sort_by_key(|(w, _)| *w);
        let from_fill = pb.log_derivs(Metric::Planar);
        for ((word, l), leaf) in from_fold.iter().zip(pb.leaves()) {
            assert_eq!(*word, leaf.word);
            assert_relative_eq!(*l, leaf.log_deriv, max_relative = 1e-14);
        }
        let mut a: Vec<f64> = from_fill.clone();
        let mut b: Vec<f64> = pb.leaves().map(|l| l.log_deriv).collect();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(*x, *y, max_relative = 1e-14);
        }
    }

    /// Distinct words give points farther apart than the resolution bound
    /// of the deeper refinement. Beyond depth ~9 neighbouring leaves of
    /// `const:50` are closer than one ulp of 1.0, so only shallow trees are
    /// resolvable in f64.
    #[test]
    fn leaves_are_separated() {
        for depth in [2usize, 4, 6, 8] {
            let cloud = julia_cloud(&c50(), depth, ONE).unwrap();
            let bound = resolution_bound(50.0, depth + 1);
            let mut pts = cloud.points.clone();
            pts.sort_by(|a, b| a.re.total_cmp(&b.re));
            for w in pts.windows(2) {
                assert!((w[1] - w[0]).norm() > bound);
            }
        }
    }

    #[test]
    fn motion_pair_examples() {
        let base = c50();
        let zero = PerturbedSequence::new(base.clone(), SignSchedule::default(), 0.0).unwrap();
        let word: Word = "1011".parse().unwrap();
        let (a, b) = motion_pair(word, &base, &zero, 0, ONE).unwrap();
        assert_eq!(a, b);

        let pert = PerturbedSequence::new(base.clone(), SignSchedule::default(), 0.07).unwrap();
        assert_eq!(motion_pair(Word::zeros(6), &base, &pert, 0, ONE).unwrap(), (ONE, ONE));

        let pert = PerturbedSequence::new(base.clone(), SignSchedule::default(), 0.01).unwrap();
        let bound = crate::param_seq::delta(0.01) / 9.0;
        // 10 pulls 1 back to 1 and then to -1 under every parameter.
        let (a, b) = motion_pair("10".parse().unwrap(), &base, &pert, 0, ONE).unwrap();
        assert_eq!((a, b), (-ONE, -ONE));
        let (a, b) = motion_pair("01".parse().unwrap(), &base, &pert, 0, ONE).unwrap();
        assert!((a - b).norm() <= bound);
        assert!((a - b).norm() > 0.0);
    }

    #[test]
    fn fold_is_worker_independent() {
        let seq = SequenceSpec::random_annulus(5, 41.0, 60.0).unwrap();
        let pb = Pullback::new(&seq, 0, 16, ONE).unwrap();
        let run = |threads| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| {
                pb.fold(
                    Metric::Planar,
                    |n| (-0.3 * n.lanes[0].log_deriv, n.lanes[0].point.re),
                    |a, b| (crate::numeric::logaddexp(a.0, b.0), a.1 + b.1),
                )
            })
        };
        let one = run(1);
        for threads in [2, 8] {
            let other = run(threads);
            assert_eq!(one.0.to_bits(), other.0.to_bits());
            assert_eq!(one.1.to_bits(), other.1.to_bits());
        }
    }
}
