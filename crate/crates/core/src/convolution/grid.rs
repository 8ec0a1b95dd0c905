//! Dense convolution on Z^2: row-major grids, convolved row-pair by
//! row-pair with the shared 1D kernel. Centrally symmetric inputs only
//! compute the upper half of the output.

use super::{conv_add_row, dot, ConvolutionPlan, PruneEvent};
use crate::group::Elem;
use crate::measures::SparseMeasure;
use crate::scalar::Scalar;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

pub(crate) struct GridRepr<F> {
    pub x0: i64,
    pub y0: i64,
    pub w: usize,
    pub h: usize,
    pub vals: Vec<F>, // row-major, rows indexed by y
    pub symmetric: bool,
}

impl<F: Scalar> GridRepr<F> {
    pub fn from_measure(mu: &SparseMeasure<F>) -> GridRepr<F> {
        let mut x0 = i64::MAX;
        let mut x1 = i64::MIN;
        let mut y0 = i64::MAX;
        let mut y1 = i64::MIN;
        for (g, _) in mu.iter() {
            let c = g.coords();
            x0 = x0.min(c[0]);
            x1 = x1.max(c[0]);
            y0 = y0.min(c[1]);
            y1 = y1.max(c[1]);
        }
        if x0 > x1 {
            return GridRepr {
                x0: 0,
                y0: 0,
                w: 1,
                h: 1,
                vals: vec![F::zero()],
                symmetric: true,
            };
        }
        let w = (x1 - x0 + 1) as usize;
        let h = (y1 - y0 + 1) as usize;
        let mut vals = vec![F::zero(); w * h];
        for (g, &m) in mu.iter() {
            let c = g.coords();
            vals[(c[1] - y0) as usize * w + (c[0] - x0) as usize] = m;
        }
        let mut r = GridRepr {
            x0,
            y0,
            w,
            h,
            vals,
            symmetric: false,
        };
        r.symmetric = r.check_symmetric();
        r
    }

    /// centered with vals(v) == vals(-v)
    fn check_symmetric(&self) -> bool {
        if self.w % 2 == 0 || self.h % 2 == 0 {
            return false;
        }
        if self.x0 != -((self.w as i64 - 1) / 2) || self.y0 != -((self.h as i64 - 1) / 2) {
            return false;
        }
        let n = self.vals.len();
        (0..n / 2).all(|i| self.vals[i] == self.vals[n - 1 - i])
    }

    pub fn cells(&self) -> usize {
        self.vals.len()
    }
    pub fn total(&self) -> F {
        self.vals.iter().copied().sum()
    }
    pub fn sum_squares(&self) -> F {
        dot(&self.vals, &self.vals)
    }
    pub fn max_mass(&self) -> F {
        self.vals.iter().copied().fold(F::zero(), |a, b| a.max(b))
    }

    pub fn value_at(&self, x: i64, y: i64) -> F {
        let ix = x - self.x0;
        let iy = y - self.y0;
        if ix < 0 || iy < 0 || ix >= self.w as i64 || iy >= self.h as i64 {
            F::zero()
        } else {
            self.vals[iy as usize * self.w + ix as usize]
        }
    }

    pub fn fill_map(&self, map: &mut FxHashMap<Elem, F>) {
        for iy in 0..self.h {
            for ix in 0..self.w {
                let v = self.vals[iy * self.w + ix];
                if v > F::zero() {
                    map.insert(
                        Elem::from_coords(vec![self.x0 + ix as i64, self.y0 + iy as i64]),
                        v,
                    );
                }
            }
        }
    }

    pub fn feed_tail(&self, feed: &mut impl FnMut(u64, F)) {
        for iy in 0..self.h {
            let y = self.y0 + iy as i64;
            for ix in 0..self.w {
                let v = self.vals[iy * self.w + ix];
                if v > F::zero() {
                    let x = self.x0 + ix as i64;
                    feed(x.unsigned_abs() + y.unsigned_abs(), v);
                }
            }
        }
    }

    /// Mass strictly outside the centered l-infinity box of radius t.
    fn outside_box_mass(&self, t: i64) -> F {
        let mut s = F::zero();
        for iy in 0..self.h {
            let y = self.y0 + iy as i64;
            let row = &self.vals[iy * self.w..(iy + 1) * self.w];
            if y.abs() > t {
                s += row.iter().copied().sum::<F>();
            } else {
                for (ix, &v) in row.iter().enumerate() {
                    if (self.x0 + ix as i64).abs() > t {
                        s += v;
                    }
                }
            }
        }
        s
    }
}

pub(crate) fn convolve<F: Scalar>(
    a: &GridRepr<F>,
    b: &GridRepr<F>,
    plan: &ConvolutionPlan<F>,
    budget: F,
) -> (GridRepr<F>, PruneEvent<F>) {
    let ow = a.w + b.w - 1;
    let oh = a.h + b.h - 1;
    let symmetric = a.symmetric && b.symmetric && std::ptr::eq(a, b);
    // reversed rows of b, ready for the 1D kernel
    let b_rev_rows: Vec<Vec<F>> = (0..b.h)
        .map(|iy| b.vals[iy * b.w..(iy + 1) * b.w].iter().rev().copied().collect())
        .collect();

    let row_range: Vec<usize> = if symmetric {
        (oh / 2..oh).collect()
    } else {
        (0..oh).collect()
    };
    let rows: Vec<(usize, Vec<F>)> = row_range
        .into_par_iter()
        .map(|oy| {
            let mut row = vec![F::zero(); ow];
            let ya0 = oy.saturating_sub(b.h - 1);
            let ya1 = (a.h - 1).min(oy);
            for ya in ya0..=ya1 {
                let yb = oy - ya;
                conv_add_row(
                    &a.vals[ya * a.w..(ya + 1) * a.w],
                    &b_rev_rows[yb],
                    &mut row,
                );
            }
            (oy, row)
        })
        .collect();

    let mut vals = vec![F::zero(); ow * oh];
    for (oy, row) in rows {
        vals[oy * ow..(oy + 1) * ow].copy_from_slice(&row);
        if symmetric {
            // mirror: out(-v) = out(v)
            let my = oh - 1 - oy;
            if my != oy {
                for (ix, &v) in row.iter().enumerate() {
                    vals[my * ow + (ow - 1 - ix)] = v;
                }
            }
        }
    }
    let out = GridRepr {
        x0: a.x0 + b.x0,
        y0: a.y0 + b.y0,
        w: ow,
        h: oh,
        vals,
        symmetric,
    };
    prune_grid(out, plan, budget)
}

/// Shrinks to the smallest centered box meeting the budget and cell cap.
/// Only implemented for centered (symmetric) grids; asymmetric grids are
/// trimmed by threshold per edge.
fn prune_grid<F: Scalar>(
    g: GridRepr<F>,
    plan: &ConvolutionPlan<F>,
    budget: F,
) -> (GridRepr<F>, PruneEvent<F>) {
    if !g.symmetric {
        // keep everything; generic grids stay exact (only used at small n)
        return (
            g,
            PruneEvent {
                steps: 0,
                mass: F::zero(),
                radius: 0,
                max_atom: F::zero(),
            },
        );
    }
    let half_w = (g.w as i64 - 1) / 2;
    let half_h = (g.h as i64 - 1) / 2;
    let t_full = half_w.max(half_h);
    // find the smallest t with outside mass <= budget
    let mut lo = 0i64;
    let mut hi = t_full;
    // outside(t) is non-increasing in t
    while lo < hi {
        let mid = (lo + hi) / 2;
        if g.outside_box_mass(mid) <= budget {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    let mut t = lo;
    // enforce the cell cap
    let cap_side = (plan.max_support_size as f64).sqrt() as i64;
    let t_cap = ((cap_side - 1) / 2).max(1);
    t = t.min(t_cap).min(t_full);
    if 2 * t + 1 != g.w as i64 || 2 * t + 1 != g.h as i64 {
        // crop to [-t, t]^2
        let dropped = g.outside_box_mass(t);
        let side = (2 * t + 1) as usize;
        let mut vals = vec![F::zero(); side * side];
        let mut max_atom = F::zero();
        for iy in 0..g.h {
            let y = g.y0 + iy as i64;
            for ix in 0..g.w {
                let v = g.vals[iy * g.w + ix];
                if v <= F::zero() {
                    continue;
                }
                let x = g.x0 + ix as i64;
                if x.abs() <= t && y.abs() <= t {
                    vals[(y + t) as usize * side + (x + t) as usize] = v;
                } else if v > max_atom {
                    max_atom = v;
                }
            }
        }
        let out = GridRepr {
            x0: -t,
            y0: -t,
            w: side,
            h: side,
            vals,
            symmetric: true,
        };
        let event = PruneEvent {
            steps: 0,
            mass: dropped,
            radius: if dropped > F::zero() { t as u64 + 1 } else { 0 },
            max_atom,
        };
        (out, event)
    } else {
        (
            g,
            PruneEvent {
                steps: 0,
                mass: F::zero(),
                radius: 0,
                max_atom: F::zero(),
            },
        )
    }
}
