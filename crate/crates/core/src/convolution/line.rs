//! Dense convolution on Z: measures become contiguous f-arrays indexed by
//! position. Symmetric inputs only pay for half of the output.

use super::{dot, ConvolutionPlan, PruneEvent};
use crate::group::Elem;
use crate::measures::SparseMeasure;
use crate::scalar::Scalar;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

pub(crate) struct LineRepr<F> {
    pub lo: i64,
    pub vals: Vec<F>,
    /// centered and mirror-exact
    pub symmetric: bool,
}

impl<F: Scalar> LineRepr<F> {
    pub fn from_measure(mu: &SparseMeasure<F>) -> LineRepr<F> {
        let mut lo = i64::MAX;
        let mut hi = i64::MIN;
        for (g, _) in mu.iter() {
            let z = g.coords()[0];
            lo = lo.min(z);
            hi = hi.max(z);
        }
        if lo > hi {
            return LineRepr {
                lo: 0,
                vals: vec![F::zero()],
                symmetric: true,
            };
        }
        let mut vals = vec![F::zero(); (hi - lo + 1) as usize];
        for (g, &m) in mu.iter() {
            vals[(g.coords()[0] - lo) as usize] = m;
        }
        let mut r = LineRepr {
            lo,
            vals,
            symmetric: false,
        };
        r.symmetric = r.check_symmetric();
        r
    }

    fn check_symmetric(&self) -> bool {
        let n = self.vals.len();
        if self.lo != -((n as i64 - 1) / 2) || n % 2 == 0 {
            return false;
        }
        (0..n / 2).all(|i| self.vals[i] == self.vals[n - 1 - i])
    }

    pub fn cells(&self) -> usize {
        self.vals.len()
    }

    pub fn total(&self) -> F {
        // fixed-order chunked sum
        self.vals.iter().copied().sum()
    }

    pub fn sum_squares(&self) -> F {
        dot(&self.vals, &self.vals)
    }

    pub fn max_mass(&self) -> F {
        self.vals.iter().copied().fold(F::zero(), |a, b| a.max(b))
    }

    pub fn value_at(&self, z: i64) -> F {
        let idx = z - self.lo;
        if idx < 0 || idx >= self.vals.len() as i64 {
            F::zero()
        } else {
            self.vals[idx as usize]
        }
    }

    pub fn fill_map(&self, map: &mut FxHashMap<Elem, F>) {
        for (i, &v) in self.vals.iter().enumerate() {
            if v > F::zero() {
                map.insert(Elem::from_coords(vec![self.lo + i as i64]), v);
            }
        }
    }

    pub fn feed_tail(&self, feed: &mut impl FnMut(u64, F)) {
        for (i, &v) in self.vals.iter().enumerate() {
            if v > F::zero() {
                feed((self.lo + i as i64).unsigned_abs(), v);
            }
        }
    }
}

/// Full dense convolution, then prune back to the smallest centered box
/// whose outside mass fits the budget (and the cell cap).
pub(crate) fn convolve<F: Scalar>(
    a: &LineRepr<F>,
    b: &LineRepr<F>,
    plan: &ConvolutionPlan<F>,
    budget: F,
) -> (LineRepr<F>, PruneEvent<F>) {
    let la = a.vals.len();
    let lb = b.vals.len();
    let out_lo = a.lo + b.lo;
    let out_len = la + lb - 1;
    let mut out = vec![F::zero(); out_len];

    let symmetric = a.symmetric && b.symmetric && std::ptr::eq(a, b);
    let b_rev: Vec<F> = b.vals.iter().rev().copied().collect();

    if symmetric {
        // compute the right half (center included), mirror the rest
        let center = out_len / 2;
        let chunk = 4096;
        let slots: Vec<(usize, F)> = (center..out_len)
            .into_par_iter()
            .with_min_len(chunk)
            .map(|k| {
                let i0 = k.saturating_sub(lb - 1);
                let i1 = (la - 1).min(k);
                let j0 = lb - 1 + i0 - k;
                (k, dot(&a.vals[i0..=i1], &b_rev[j0..=j0 + (i1 - i0)]))
            })
            .collect();
        for (k, v) in slots {
            out[k] = v;
            out[out_len - 1 - k] = v;
        }
    } else {
        let chunk = 4096;
        let slots: Vec<(usize, F)> = (0..out_len)
            .into_par_iter()
            .with_min_len(chunk)
            .map(|k| {
                let i0 = k.saturating_sub(lb - 1);
                let i1 = (la - 1).min(k);
                let j0 = lb - 1 + i0 - k;
                (k, dot(&a.vals[i0..=i1], &b_rev[j0..=j0 + (i1 - i0)]))
            })
            .collect();
        for (k, v) in slots {
            out[k] = v;
        }
    }

    prune_line(out, out_lo, plan, budget, symmetric)
}

fn prune_line<F: Scalar>(
    vals: Vec<F>,
    lo: i64,
    plan: &ConvolutionPlan<F>,
    budget: F,
    symmetric: bool,
) -> (LineRepr<F>, PruneEvent<F>) {
    let n = vals.len();
    // trim both ends: cut the largest tails that stay under the budget,
    // then enforce the cell cap
    let mut left = 0usize;
    let mut right = n; // exclusive
    let mut dropped = F::zero();
    let mut max_atom = F::zero();
    let mut radius = u64::MAX;
    let budget = budget.max(F::zero());

    // trim the ends (mirror pairs in the symmetric case) while forced by the
    // cell cap, or while the trimmed mass is sub-threshold or fits the budget
    loop {
        let width = right - left;
        if width <= if symmetric { 2 } else { 1 } {
            break;
        }
        let l = vals[left];
        let r = vals[right - 1];
        let v = if symmetric {
            l + r
        } else if l <= r {
            l
        } else {
            r
        };
        let forced = width > plan.max_support_size;
        let allowed = v < plan.prune_threshold || dropped + v <= budget;
        if !forced && !allowed {
            break;
        }
        dropped += v;
        if symmetric {
            max_atom = max_atom.max(l).max(r);
            radius = radius
                .min((lo + left as i64).unsigned_abs())
                .min((lo + right as i64 - 1).unsigned_abs());
            left += 1;
            right -= 1;
        } else if l <= r {
            max_atom = max_atom.max(l);
            radius = radius.min((lo + left as i64).unsigned_abs());
            left += 1;
        } else {
            max_atom = max_atom.max(r);
            radius = radius.min((lo + right as i64 - 1).unsigned_abs());
            right -= 1;
        }
    }
    let vals: Vec<F> = vals[left..right].to_vec();
    let repr = LineRepr {
        lo: lo + left as i64,
        vals,
        symmetric,
    };
    (
        repr,
        PruneEvent {
            steps: 0,
            mass: dropped,
            radius: if radius == u64::MAX { 0 } else { radius },
            max_atom,
        },
    )
}
