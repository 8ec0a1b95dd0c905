//! Convolution on the discrete Heisenberg group: measures are stored as an
//! (x, y)-indexed family of dense z-columns. The group law
//! (x,y,z)(x',y',z') = (x+x', y+y', z+z'+x y') makes each cell pair a 1D
//! column convolution written at a shifted offset, so the inner loops stay
//! contiguous.

use super::{conv_add_row, dot, ConvolutionPlan, PruneEvent};
use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor};
use crate::measures::SparseMeasure;
use crate::scalar::Scalar;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

#[derive(Clone)]
pub(crate) struct Column<F> {
    pub z0: i64,
    pub vals: Vec<F>,
}

pub(crate) struct HeisRepr<F> {
    /// sorted by (x, y)
    pub cells: Vec<((i32, i32), Column<F>)>,
}

impl<F: Scalar> HeisRepr<F> {
    pub fn from_measure(mu: &SparseMeasure<F>) -> HeisRepr<F> {
        let mut ranges: FxHashMap<(i32, i32), (i64, i64)> = FxHashMap::default();
        for (g, _) in mu.iter() {
            let c = g.coords();
            let key = (c[0] as i32, c[1] as i32);
            let e = ranges.entry(key).or_insert((c[2], c[2]));
            e.0 = e.0.min(c[2]);
            e.1 = e.1.max(c[2]);
        }
        let mut cells: Vec<((i32, i32), Column<F>)> = ranges
            .into_iter()
            .map(|(k, (z0, z1))| {
                (
                    k,
                    Column {
                        z0,
                        vals: vec![F::zero(); (z1 - z0 + 1) as usize],
                    },
                )
            })
            .collect();
        cells.sort_by_key(|e| e.0);
        let index: FxHashMap<(i32, i32), usize> =
            cells.iter().enumerate().map(|(i, e)| (e.0, i)).collect();
        for (g, &m) in mu.iter() {
            let c = g.coords();
            let key = (c[0] as i32, c[1] as i32);
            let i = index[&key];
            let col = &mut cells[i].1;
            col.vals[(c[2] - col.z0) as usize] = m;
        }
        HeisRepr { cells }
    }

    pub fn cells(&self) -> usize {
        self.cells.iter().map(|c| c.1.vals.len()).sum()
    }

    pub fn total(&self) -> F {
        self.cells
            .iter()
            .map(|c| c.1.vals.iter().copied().sum::<F>())
            .sum()
    }

    pub fn sum_squares(&self) -> F {
        self.cells.iter().map(|c| dot(&c.1.vals, &c.1.vals)).sum()
    }

    pub fn max_mass(&self) -> F {
        self.cells
            .iter()
            .map(|c| c.1.vals.iter().copied().fold(F::zero(), |a, b| a.max(b)))
            .fold(F::zero(), |a, b| a.max(b))
    }

    pub fn value_at(&self, coords: &[i64]) -> F {
        let key = (coords[0] as i32, coords[1] as i32);
        match self.cells.binary_search_by_key(&key, |e| e.0) {
            Ok(i) => {
                let col = &self.cells[i].1;
                let idx = coords[2] - col.z0;
                if idx < 0 || idx >= col.vals.len() as i64 {
                    F::zero()
                } else {
                    col.vals[idx as usize]
                }
            }
            Err(_) => F::zero(),
        }
    }

    pub fn fill_map(&self, map: &mut FxHashMap<Elem, F>) {
        for ((x, y), col) in &self.cells {
            for (i, &v) in col.vals.iter().enumerate() {
                if v > F::zero() {
                    map.insert(
                        Elem::from_coords(vec![*x as i64, *y as i64, col.z0 + i as i64]),
                        v,
                    );
                }
            }
        }
    }

    pub fn feed_tail(&self, feed: &mut impl FnMut(u64, F)) {
        for ((x, y), col) in &self.cells {
            let base = x.unsigned_abs() as u64 + y.unsigned_abs() as u64;
            for (i, &v) in col.vals.iter().enumerate() {
                if v > F::zero() {
                    let z = col.z0 + i as i64;
                    let w = (z - *x as i64 * *y as i64).unsigned_abs();
                    let up = if w == 0 {
                        base
                    } else {
                        base + 8 * ((w as f64).sqrt() as u64 + 1) + 8
                    };
                    feed(up, v);
                }
            }
        }
    }
}

pub(crate) fn convolve<F: Scalar>(
    a: &HeisRepr<F>,
    b: &HeisRepr<F>,
    group: &GroupDescriptor,
    plan: &ConvolutionPlan<F>,
) -> Result<(HeisRepr<F>, PruneEvent<F>)> {
    // output cell set: all (xa+xb, ya+yb)
    let mut out_keys: Vec<(i32, i32)> = Vec::new();
    {
        let mut seen: FxHashMap<(i32, i32), ()> = FxHashMap::default();
        for (ka, _) in &a.cells {
            for (kb, _) in &b.cells {
                seen.entry((ka.0 + kb.0, ka.1 + kb.1)).or_insert(());
            }
        }
        out_keys.extend(seen.keys().copied());
        out_keys.sort();
    }
    let b_index: FxHashMap<(i32, i32), usize> =
        b.cells.iter().enumerate().map(|(i, e)| (e.0, i)).collect();
    let b_rev: Vec<Vec<F>> = b
        .cells
        .iter()
        .map(|(_, col)| col.vals.iter().rev().copied().collect())
        .collect();

    let out_cells: Vec<((i32, i32), Column<F>)> = out_keys
        .into_par_iter()
        .map(|key| {
            // z-extent of the output column
            let mut z_lo = i64::MAX;
            let mut z_hi = i64::MIN;
            for (ka, ca) in &a.cells {
                let kb = (key.0 - ka.0, key.1 - ka.1);
                if let Some(&bi) = b_index.get(&kb) {
                    let cb = &b.cells[bi].1;
                    // z_out = za + zb + xa * yb
                    let shift = ka.0 as i64 * kb.1 as i64;
                    z_lo = z_lo.min(ca.z0 + cb.z0 + shift);
                    z_hi = z_hi.max(
                        ca.z0 + ca.vals.len() as i64 - 1 + cb.z0 + cb.vals.len() as i64 - 1
                            + shift,
                    );
                }
            }
            if z_lo > z_hi {
                return (key, Column { z0: 0, vals: Vec::new() });
            }
            let mut vals = vec![F::zero(); (z_hi - z_lo + 1) as usize];
            for (ka, ca) in &a.cells {
                let kb = (key.0 - ka.0, key.1 - ka.1);
                if let Some(&bi) = b_index.get(&kb) {
                    let cb = &b.cells[bi].1;
                    let shift = ka.0 as i64 * kb.1 as i64;
                    let base = (ca.z0 + cb.z0 + shift - z_lo) as usize;
                    let seg = ca.vals.len() + cb.vals.len() - 1;
                    conv_add_row(&ca.vals, &b_rev[bi], &mut vals[base..base + seg]);
                }
            }
            (key, Column { z0: z_lo, vals })
        })
        .collect();

    let mut out = HeisRepr {
        cells: out_cells.into_iter().filter(|c| !c.1.vals.is_empty()).collect(),
    };
    out.cells.sort_by_key(|e| e.0);
    let event = prune_heis(&mut out, group, plan)?;
    Ok((out, event))
}

/// Threshold pruning with cap escalation: trims column ends below the
/// threshold, drops empty cells, and raises the threshold until the support
/// fits the cap. Interior sub-threshold values are kept (columns stay
/// contiguous).
fn prune_heis<F: Scalar>(
    r: &mut HeisRepr<F>,
    group: &GroupDescriptor,
    plan: &ConvolutionPlan<F>,
) -> Result<PruneEvent<F>> {
    let mut threshold = plan.prune_threshold;
    let mut dropped = F::zero();
    let mut max_atom = F::zero();
    let mut radius = u64::MAX;
    for _ in 0..60 {
        for (key, col) in r.cells.iter_mut() {
            let mut start = 0usize;
            let mut end = col.vals.len();
            while start < end && col.vals[start] < threshold {
                let v = col.vals[start];
                if v > F::zero() {
                    dropped += v;
                    max_atom = max_atom.max(v);
                    let z = col.z0 + start as i64;
                    radius = radius.min(group.length_lower_bound(&Elem::from_coords(vec![
                        key.0 as i64,
                        key.1 as i64,
                        z,
                    ])));
                }
                start += 1;
            }
            while end > start && col.vals[end - 1] < threshold {
                let v = col.vals[end - 1];
                if v > F::zero() {
                    dropped += v;
                    max_atom = max_atom.max(v);
                    let z = col.z0 + end as i64 - 1;
                    radius = radius.min(group.length_lower_bound(&Elem::from_coords(vec![
                        key.0 as i64,
                        key.1 as i64,
                        z,
                    ])));
                }
                end -= 1;
            }
            if start > 0 || end < col.vals.len() {
                col.vals = col.vals[start..end].to_vec();
                col.z0 += start as i64;
            }
        }
        r.cells.retain(|c| !c.1.vals.is_empty());
        if r.cells() <= plan.max_support_size {
            let radius = if radius == u64::MAX { 0 } else { radius };
            return Ok(PruneEvent {
                steps: 0,
                mass: dropped,
                radius,
                max_atom,
            });
        }
        threshold = threshold * F::of_f64(8.0);
    }
    Err(Error::Budget {
        what: "Heisenberg convolution support",
        used: r.cells() as u64,
        limit: plan.max_support_size as u64,
    })
}

/// Enforce exact symmetry: average each column against the inverse cell.
/// (x,y,z)^{-1} = (-x,-y,-z+xy).
pub(crate) fn symmetrize_exact<F: Scalar>(r: &mut HeisRepr<F>) {
    let index: FxHashMap<(i32, i32), usize> =
        r.cells.iter().enumerate().map(|(i, e)| (e.0, i)).collect();
    let half = F::of_f64(0.5);
    let n = r.cells.len();
    for i in 0..n {
        let (key, _) = r.cells[i];
        let ikey = (-key.0, -key.1);
        let Some(&j) = index.get(&ikey) else { continue };
        if j < i {
            continue;
        }
        // z ranges must be aligned through the inversion map
        let xy = key.0 as i64 * key.1 as i64;
        let (ci, cj) = if i == j {
            (r.cells[i].1.clone(), r.cells[i].1.clone())
        } else {
            (r.cells[i].1.clone(), r.cells[j].1.clone())
        };
        // inverse of (x,y,z) has z' = -z + xy: mirror cj into ci's frame
        let mut z_lo = ci.z0;
        let mut z_hi = ci.z0 + ci.vals.len() as i64 - 1;
        let cj_hi = xy - cj.z0;
        let cj_lo = xy - (cj.z0 + cj.vals.len() as i64 - 1);
        z_lo = z_lo.min(cj_lo);
        z_hi = z_hi.max(cj_hi);
        let len = (z_hi - z_lo + 1) as usize;
        let mut merged = vec![F::zero(); len];
        for (k, &v) in ci.vals.iter().enumerate() {
            merged[(ci.z0 + k as i64 - z_lo) as usize] += half * v;
        }
        for (k, &v) in cj.vals.iter().enumerate() {
            let z_here = xy - (cj.z0 + k as i64);
            merged[(z_here - z_lo) as usize] += half * v;
        }
        // write both columns, mirrored
        r.cells[i].1 = Column {
            z0: z_lo,
            vals: merged.clone(),
        };
        if i != j {
            let mut mirrored = vec![F::zero(); len];
            for (k, &v) in merged.iter().enumerate() {
                let z = z_lo + k as i64;
                let zm = xy - z;
                mirrored[(zm - (xy - z_hi)) as usize] = v;
            }
            r.cells[j].1 = Column {
                z0: xy - z_hi,
                vals: mirrored,
            };
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::measures::SparseMeasure;

    fn small_measure(g: &GroupDescriptor) -> SparseMeasure<f64> {
        let mut entries = Vec::new();
        let mut state = 0x7777u64;
        let mut next = move || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            (state % 5) as i64 - 2
        };
        for _ in 0..12 {
            entries.push((
                Elem::from_coords(vec![next(), next(), next()]),
                1.0 + (next() + 3) as f64,
            ));
        }
        let mut m = SparseMeasure::from_table(g, &entries).unwrap();
        m.symmetrize_exact();
        m
    }

    #[test]
    fn heis_conv_matches_direct_double_sum() {
        let g = GroupDescriptor::heisenberg();
        let mu = small_measure(&g);
        let a = HeisRepr::from_measure(&mu);
        let plan = ConvolutionPlan {
            prune_threshold: 0.0,
            ..Default::default()
        };
        let (out, ev) = convolve(&a, &a, &g, &plan).unwrap();
        assert_eq!(ev.mass, 0.0);
        let mut oracle: FxHashMap<Elem, f64> = FxHashMap::default();
        for (x, &mx) in mu.iter() {
            for (y, &my) in mu.iter() {
                *oracle.entry(g.mul_unchecked(x, y)).or_insert(0.0) += mx * my;
            }
        }
        for (e, &v) in &oracle {
            let got = out.value_at(e.coords());
            assert!((got - v).abs() < 1e-15, "{e:?}: {got} vs {v}");
        }
        // total conservation
        assert!((out.total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn symmetrize_is_exact() {
        let g = GroupDescriptor::heisenberg();
        let mu = small_measure(&g);
        let a = HeisRepr::from_measure(&mu);
        let plan = ConvolutionPlan {
            prune_threshold: 0.0,
            ..Default::default()
        };
        let (mut out, _) = convolve(&a, &a, &g, &plan).unwrap();
        let before = out.total();
        symmetrize_exact(&mut out);
        let after = out.total();
        assert!((before - after).abs() < 1e-14);
        // exact pointwise symmetry
        let mut map: FxHashMap<Elem, f64> = FxHashMap::default();
        out.fill_map(&mut map);
        for (e, &v) in &map {
            let inv = g.inv_unchecked(e);
            assert_eq!(map.get(&inv).copied().unwrap_or(0.0), v, "{e:?}");
        }
    }

    #[test]
    fn threshold_prune_accounts_mass() {
        let g = GroupDescriptor::heisenberg();
        let mu = small_measure(&g);
        let a = HeisRepr::from_measure(&mu);
        let plan = ConvolutionPlan {
            prune_threshold: 1e-3,
            ..Default::default()
        };
        let (out, ev) = convolve(&a, &a, &g, &plan).unwrap();
        assert!((out.total() + ev.mass - 1.0).abs() < 1e-12);
    }
}
