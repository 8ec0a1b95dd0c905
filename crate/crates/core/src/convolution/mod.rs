//! Exact sparse convolution powers with certified truncation error.
//!
//! Measures are convolved in one of four internal representations: a generic
//! sorted sparse map (any group), dense line/grid arrays for Z and Z^2, and
//! an xy-indexed family of dense z-columns for the Heisenberg group. All
//! representations share the same bookkeeping: pruned mass is accumulated,
//! never silently lost, and every prune event records how far from the
//! identity it happened so return-series certificates can use tail bounds
//! instead of the blunt `value + dropped` interval.

mod grid;
mod heis;
mod line;
mod series;
mod walk;

pub use series::{
    fit_exponent, near_diagonal_check, return_series, CertifiedPower, FitWindow,
    NearDiagonalReport, ReturnEntry, ReturnSeries,
};
pub use walk::{exit_time_profile, exit_time_stats, simulate_walk, ExitTimeEstimate, WalkStats};

use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor, GroupKind};
use crate::measures::SparseMeasure;
use crate::scalar::Scalar;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Strategy {
    /// n-1 successive convolutions.
    Direct,
    /// Square-and-multiply on the binary expansion of n.
    RepeatedSquaring,
}

/// Knobs for convolution and power computations.
#[derive(Clone, Debug)]
pub struct ConvolutionPlan<F: Scalar> {
    /// Atoms below this mass are pruned (threshold-pruning engines).
    pub prune_threshold: F,
    /// Hard cap on retained support size (atoms or dense cells).
    pub max_support_size: usize,
    pub strategy: Strategy,
    /// Total tolerated forward-propagated prune mass for a squaring chain;
    /// dense engines size their boxes from this.
    pub cert_budget: F,
}

impl<F: Scalar> Default for ConvolutionPlan<F> {
    fn default() -> Self {
        ConvolutionPlan {
            prune_threshold: F::of_f64(1e-14),
            max_support_size: 5_000_000,
            strategy: Strategy::RepeatedSquaring,
            cert_budget: F::of_f64(1e-3),
        }
    }
}

/// One pruning event: `mass` removed from the power at `steps`, all of it at
/// word length >= `radius` (0 when no radius information is available).
#[derive(Clone, Copy, Debug)]
pub struct PruneEvent<F> {
    pub steps: u64,
    pub mass: F,
    pub radius: u64,
    /// largest single pruned atom
    pub max_atom: F,
}

/// Tail-sup profile: entry k bounds the maximum mass at word length >= 2^k.
/// Entry 0 is the global maximum.
#[derive(Clone, Debug)]
pub struct TailProfile<F> {
    pub sup_at: Vec<F>,
}

impl<F: Scalar> TailProfile<F> {
    pub const GRID: usize = 48;

    pub fn query(&self, radius: u64) -> F {
        if radius == 0 {
            return self.sup_at[0];
        }
        // largest power of two <= radius gives a valid (non-increasing) bound
        let k = (63 - radius.leading_zeros() as usize).min(Self::GRID - 1);
        self.sup_at[k]
    }
}

pub(crate) enum Repr<F> {
    Map(Vec<(Elem, F)>),
    Line(line::LineRepr<F>),
    Grid(grid::GridRepr<F>),
    Heis(heis::HeisRepr<F>),
}

impl<F: Scalar> Repr<F> {
    pub fn from_measure(mu: &SparseMeasure<F>) -> Repr<F> {
        match mu.group().kind() {
            GroupKind::FreeAbelian(1) => Repr::Line(line::LineRepr::from_measure(mu)),
            GroupKind::FreeAbelian(2) => Repr::Grid(grid::GridRepr::from_measure(mu)),
            GroupKind::Heisenberg => Repr::Heis(heis::HeisRepr::from_measure(mu)),
            _ => {
                let mut entries: Vec<(Elem, F)> =
                    mu.iter().map(|(g, &m)| (g.clone(), m)).collect();
                entries.sort_by(|a, b| a.0.cmp(&b.0));
                Repr::Map(entries)
            }
        }
    }

    pub fn atom_count(&self) -> usize {
        match self {
            Repr::Map(v) => v.len(),
            Repr::Line(l) => l.cells(),
            Repr::Grid(g) => g.cells(),
            Repr::Heis(h) => h.cells(),
        }
    }

    pub fn total_mass(&self) -> F {
        match self {
            Repr::Map(v) => v.iter().map(|e| e.1).sum(),
            Repr::Line(l) => l.total(),
            Repr::Grid(g) => g.total(),
            Repr::Heis(h) => h.total(),
        }
    }

    pub fn sum_squares(&self) -> F {
        match self {
            Repr::Map(v) => v.iter().map(|e| e.1 * e.1).sum(),
            Repr::Line(l) => l.sum_squares(),
            Repr::Grid(g) => g.sum_squares(),
            Repr::Heis(h) => h.sum_squares(),
        }
    }

    pub fn max_mass(&self) -> F {
        match self {
            Repr::Map(v) => v.iter().map(|e| e.1).fold(F::zero(), |a, b| a.max(b)),
            Repr::Line(l) => l.max_mass(),
            Repr::Grid(g) => g.max_mass(),
            Repr::Heis(h) => h.max_mass(),
        }
    }

    pub fn value_at(&self, g: &Elem) -> F {
        match self {
            Repr::Map(v) => v
                .binary_search_by(|e| e.0.cmp(g))
                .map(|i| v[i].1)
                .unwrap_or_else(|_| F::zero()),
            Repr::Line(l) => l.value_at(g.coords()[0]),
            Repr::Grid(gr) => gr.value_at(g.coords()[0], g.coords()[1]),
            Repr::Heis(h) => h.value_at(g.coords()),
        }
    }

    /// Tail-sup profile over dyadic radii, using a length upper bound so the
    /// reported sup dominates the true sup over {|g| >= radius}.
    pub fn tail_profile(&self, group: &GroupDescriptor) -> TailProfile<F> {
        let mut sup_at = vec![F::zero(); TailProfile::<F>::GRID];
        let mut feed = |len_upper: u64, v: F| {
            let top = if len_upper == 0 {
                0
            } else {
                (63 - len_upper.leading_zeros() as usize).min(TailProfile::<F>::GRID - 1)
            };
            // an atom with |g| <= len_upper contributes to radii <= len_upper
            for slot in sup_at.iter_mut().take(top + 1) {
                if v > *slot {
                    *slot = v;
                }
            }
        };
        match self {
            Repr::Map(vs) => {
                for (g, m) in vs {
                    feed(length_upper_bound(group, g.coords()), *m);
                }
            }
            Repr::Line(l) => l.feed_tail(&mut feed),
            Repr::Grid(gr) => gr.feed_tail(&mut feed),
            Repr::Heis(h) => h.feed_tail(&mut feed),
        }
        TailProfile { sup_at }
    }

    pub fn to_measure(
        &self,
        group: &GroupDescriptor,
        truncation_radius: u32,
        dropped: F,
        symmetric: bool,
    ) -> SparseMeasure<F> {
        let mut map: FxHashMap<Elem, F> = FxHashMap::default();
        match self {
            Repr::Map(v) => {
                for (g, m) in v {
                    map.insert(g.clone(), *m);
                }
            }
            Repr::Line(l) => l.fill_map(&mut map),
            Repr::Grid(g) => g.fill_map(&mut map),
            Repr::Heis(h) => h.fill_map(&mut map),
        }
        SparseMeasure::from_parts(group.clone(), map, truncation_radius, dropped, symmetric)
    }
}

/// Upper bound on the word length of an element, used by tail-sup scans.
/// Exact on Z^d and D_inf x Z; for the matrix groups it is the normal-form
/// decomposition bound with explicit commutator constants.
pub(crate) fn length_upper_bound(group: &GroupDescriptor, c: &[i64]) -> u64 {
    match group.kind() {
        GroupKind::FreeAbelian(_) => c.iter().map(|x| x.unsigned_abs()).sum(),
        GroupKind::DihedralTimesZ => group.length_lower_bound(&Elem::from_coords(c.to_vec())),
        GroupKind::Heisenberg => {
            // g = a^x b^y c^{z - xy}; c^w costs at most 8 sqrt(|w|) + 8
            let (x, y, z) = (c[0], c[1], c[2]);
            let w = (z - x * y).unsigned_abs();
            let base = x.unsigned_abs() + y.unsigned_abs();
            if w == 0 {
                base
            } else {
                base + 8 * int_sqrt(w) + 8
            }
        }
        _ => {
            // normal-form bound: sum over slots of the cost of each power,
            // with commutator slots priced by iterated-bracket roots
            c.iter()
                .map(|x| {
                    let v = x.unsigned_abs();
                    if v == 0 {
                        0
                    } else {
                        8 * int_sqrt(v) + 8 + v.min(1 << 20)
                    }
                })
                .sum()
        }
    }
}

fn int_sqrt(v: u64) -> u64 {
    if v == 0 {
        return 0;
    }
    let mut r = (v as f64).sqrt() as u64 + 1;
    while r * r > v {
        r -= 1;
    }
    r + 1 // round up
}

/// Deterministic dot product with a 4-way accumulator split.
pub(crate) fn dot<F: Scalar>(a: &[F], b: &[F]) -> F {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 4;
    let mut s0 = F::zero();
    let mut s1 = F::zero();
    let mut s2 = F::zero();
    let mut s3 = F::zero();
    for i in 0..chunks {
        let k = 4 * i;
        s0 += a[k] * b[k];
        s1 += a[k + 1] * b[k + 1];
        s2 += a[k + 2] * b[k + 2];
        s3 += a[k + 3] * b[k + 3];
    }
    let mut rest = F::zero();
    for i in 4 * chunks..n {
        rest += a[i] * b[i];
    }
    ((s0 + s1) + (s2 + s3)) + rest
}

/// out[k] = sum_i a[i] * b_rev[len_b - 1 - (k - i)]; b_rev is b reversed.
/// Accumulating full convolution, one output cell at a time.
pub(crate) fn conv_add_row<F: Scalar>(a: &[F], b_rev: &[F], out: &mut [F]) {
    let la = a.len();
    let lb = b_rev.len();
    debug_assert_eq!(out.len(), la + lb - 1);
    for (k, slot) in out.iter_mut().enumerate() {
        let i0 = k.saturating_sub(lb - 1);
        let i1 = (la - 1).min(k);
        if i0 > i1 {
            continue;
        }
        let j0 = lb - 1 + i0 - k;
        *slot += dot(&a[i0..=i1], &b_rev[j0..=j0 + (i1 - i0)]);
    }
}

/// Exact product-sum over supports, then threshold pruning; pruned mass goes
/// to dropped_mass. Mixed representations fall back to the generic engine.
pub fn convolve<F: Scalar>(
    mu: &SparseMeasure<F>,
    nu: &SparseMeasure<F>,
    plan: &ConvolutionPlan<F>,
) -> Result<SparseMeasure<F>> {
    if mu.group().name() != nu.group().name() {
        return Err(Error::usage("convolution of measures on different groups"));
    }
    let a = Repr::from_measure(mu);
    let b = Repr::from_measure(nu);
    let (out, event) = convolve_repr(mu.group(), &a, &b, plan, F::zero())?;
    let dropped = F::one()
        - (F::one() - mu.dropped_mass()) * (F::one() - nu.dropped_mass())
        + event.mass;
    let symmetric = false;
    let mut m = out.to_measure(
        mu.group(),
        mu.truncation_radius() + nu.truncation_radius(),
        dropped,
        symmetric,
    );
    if mu.symmetric() && nu.symmetric() && std::ptr::eq(mu, nu) {
        m.symmetrize_exact();
    }
    Ok(m)
}

/// mu^(n) by the plan's strategy; the cumulative dropped mass d certifies
/// that every true point mass lies in [computed, computed + d].
pub fn power<F: Scalar>(
    mu: &SparseMeasure<F>,
    n: u64,
    plan: &ConvolutionPlan<F>,
) -> Result<SparseMeasure<F>> {
    if n == 0 {
        return Err(Error::usage("power needs n >= 1"));
    }
    let cp = series::CertifiedPower::compute(mu, n, plan)?;
    Ok(cp.into_measure())
}

/// Generic and dispatched convolution on representations. `budget` only
/// guides dense box sizing; threshold engines use plan.prune_threshold.
pub(crate) fn convolve_repr<F: Scalar>(
    group: &GroupDescriptor,
    a: &Repr<F>,
    b: &Repr<F>,
    plan: &ConvolutionPlan<F>,
    budget: F,
) -> Result<(Repr<F>, PruneEvent<F>)> {
    match (a, b) {
        (Repr::Line(x), Repr::Line(y)) => {
            let (r, e) = line::convolve(x, y, plan, budget);
            Ok((Repr::Line(r), e))
        }
        (Repr::Grid(x), Repr::Grid(y)) => {
            let (r, e) = grid::convolve(x, y, plan, budget);
            Ok((Repr::Grid(r), e))
        }
        (Repr::Heis(x), Repr::Heis(y)) => {
            let (r, e) = heis::convolve(x, y, group, plan)?;
            Ok((Repr::Heis(r), e))
        }
        (Repr::Map(x), Repr::Map(y)) => {
            let (r, e) = map_convolve(group, x, y, plan)?;
            Ok((Repr::Map(r), e))
        }
        _ => Err(Error::usage("mixed convolution representations")),
    }
}

/// Sorted-entry sparse convolution: deterministic chunked accumulation.
fn map_convolve<F: Scalar>(
    group: &GroupDescriptor,
    a: &[(Elem, F)],
    b: &[(Elem, F)],
    plan: &ConvolutionPlan<F>,
) -> Result<(Vec<(Elem, F)>, PruneEvent<F>)> {
    let nchunks = 64usize.min(a.len().max(1));
    let chunk = a.len().div_ceil(nchunks);
    let partials: Vec<FxHashMap<Elem, F>> = (0..nchunks)
        .into_par_iter()
        .map(|ci| {
            let mut local: FxHashMap<Elem, F> = FxHashMap::default();
            let lo = (ci * chunk).min(a.len());
            let hi = ((ci + 1) * chunk).min(a.len());
            for (g1, m1) in &a[lo..hi] {
                for (g2, m2) in b {
                    let g = group.mul_unchecked(g1, g2);
                    *local.entry(g).or_insert_with(F::zero) += *m1 * *m2;
                }
            }
            local
        })
        .collect();
    let mut out: FxHashMap<Elem, F> = FxHashMap::default();
    for local in partials {
        let mut entries: Vec<(Elem, F)> = local.into_iter().collect();
        entries.sort_by(|x, y| x.0.cmp(&y.0));
        for (g, m) in entries {
            *out.entry(g).or_insert_with(F::zero) += m;
        }
    }
    // threshold pruning; overflow past the cap aborts with diagnostics
    let threshold = plan.prune_threshold;
    let mut pruned_mass = F::zero();
    let mut pruned_radius = u64::MAX;
    let mut pruned_max = F::zero();
    let mut kept: Vec<(Elem, F)> = Vec::with_capacity(out.len());
    for (g, m) in out {
        if m >= threshold || m <= F::zero() {
            if m > F::zero() {
                kept.push((g, m));
            }
        } else {
            pruned_mass += m;
            pruned_max = pruned_max.max(m);
            pruned_radius = pruned_radius.min(group.length_lower_bound(&g));
        }
    }
    if kept.len() > plan.max_support_size {
        return Err(Error::Budget {
            what: "convolution support",
            used: kept.len() as u64,
            limit: plan.max_support_size as u64,
        });
    }
    kept.sort_by(|x, y| x.0.cmp(&y.0));
    let radius = if pruned_radius == u64::MAX {
        0
    } else {
        pruned_radius
    };
    Ok((
        kept,
        PruneEvent {
            steps: 0,
            mass: pruned_mass,
            radius,
            max_atom: pruned_max,
        },
    ))
}
