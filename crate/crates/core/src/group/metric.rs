//! Word metrics: BFS ball enumeration over the Cayley graph, with closed-form
//! fast paths for Z^d and D_inf x Z where the word length is explicit.

use super::{Elem, GroupDescriptor, GroupKind};
use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use rustc_hash::FxHashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LengthStatus {
    Reached(u32),
    /// Not found within the enumerated radius cap; distinct from
    /// "not in the group".
    Unreached,
}

impl LengthStatus {
    pub fn expect_reached(self, cap: u32) -> Result<u32> {
        match self {
            LengthStatus::Reached(l) => Ok(l),
            LengthStatus::Unreached => Err(Error::Unreached { cap }),
        }
    }
}

enum Backend {
    /// BFS layers: layers[r] = elements of exact word length r.
    Bfs {
        layers: Vec<Vec<Elem>>,
        index: FxHashMap<Elem, u32>,
    },
    /// Closed-form word length; layers are materialized on demand.
    Analytic,
}

/// Word metric over the descriptor's symmetric generating set, enumerated up
/// to `radius_cap`.
pub struct WordMetric {
    descriptor: GroupDescriptor,
    backend: Backend,
    radius_cap: u32,
}

impl WordMetric {
    /// Build a metric with the given cap. Z^d and D_inf x Z use the exact
    /// closed-form length; other groups run BFS (memory ~ |B(cap)|).
    pub fn new(descriptor: &GroupDescriptor, radius_cap: u32) -> Result<WordMetric> {
        match descriptor.kind() {
            GroupKind::FreeAbelian(_) | GroupKind::DihedralTimesZ => Ok(WordMetric {
                descriptor: descriptor.clone(),
                backend: Backend::Analytic,
                radius_cap,
            }),
            _ => Self::bfs(descriptor, radius_cap, 20_000_000),
        }
    }

    /// Force a BFS enumeration (all groups), with an element budget.
    pub fn bfs(
        descriptor: &GroupDescriptor,
        radius_cap: u32,
        budget: usize,
    ) -> Result<WordMetric> {
        let mut layers: Vec<Vec<Elem>> = vec![vec![descriptor.identity()]];
        let mut index: FxHashMap<Elem, u32> = FxHashMap::default();
        index.insert(descriptor.identity(), 0);
        let gens = descriptor.generators().to_vec();
        for r in 0..radius_cap {
            let mut next = Vec::new();
            for g in &layers[r as usize] {
                for s in &gens {
                    let h = descriptor.mul_unchecked(g, s);
                    if !index.contains_key(&h) {
                        index.insert(h.clone(), r + 1);
                        next.push(h);
                    }
                }
            }
            if index.len() > budget {
                return Err(Error::Budget {
                    what: "BFS ball enumeration",
                    used: index.len() as u64,
                    limit: budget as u64,
                });
            }
            if next.is_empty() {
                break;
            }
            layers.push(next);
        }
        Ok(WordMetric {
            descriptor: descriptor.clone(),
            backend: Backend::Bfs { layers, index },
            radius_cap,
        })
    }

    pub fn descriptor(&self) -> &GroupDescriptor {
        &self.descriptor
    }

    pub fn radius_cap(&self) -> u32 {
        self.radius_cap
    }

    fn analytic_length(&self, g: &Elem) -> u64 {
        // exact for the analytic backends
        self.descriptor.length_lower_bound(g)
    }

    /// Exact BFS distance from the identity, or Unreached past the cap.
    pub fn word_length(&self, g: &Elem) -> LengthStatus {
        match &self.backend {
            Backend::Analytic => {
                let l = self.analytic_length(g);
                if l <= self.radius_cap as u64 {
                    LengthStatus::Reached(l as u32)
                } else {
                    LengthStatus::Unreached
                }
            }
            Backend::Bfs { index, .. } => match index.get(g) {
                Some(&l) => LengthStatus::Reached(l),
                None => LengthStatus::Unreached,
            },
        }
    }

    /// Elements of exact word length r.
    pub fn sphere(&self, r: u32) -> Result<Vec<Elem>> {
        if r > self.radius_cap {
            return Err(Error::usage(format!(
                "radius {r} beyond cap {}",
                self.radius_cap
            )));
        }
        match &self.backend {
            Backend::Bfs { layers, .. } => Ok(layers
                .get(r as usize)
                .cloned()
                .unwrap_or_default()),
            Backend::Analytic => Ok(self.enumerate_sphere(r)),
        }
    }

    /// The ball {g : |g| <= r}.
    pub fn ball(&self, r: u32) -> Result<Vec<Elem>> {
        let mut out = Vec::new();
        for k in 0..=r {
            out.extend(self.sphere(k)?);
        }
        Ok(out)
    }

    /// |B(r)| without materializing elements where a closed form exists.
    pub fn ball_size(&self, r: u32) -> Result<u64> {
        if r > self.radius_cap {
            return Err(Error::usage(format!(
                "radius {r} beyond cap {}",
                self.radius_cap
            )));
        }
        match &self.backend {
            Backend::Bfs { layers, .. } => Ok(layers
                .iter()
                .take(r as usize + 1)
                .map(|l| l.len() as u64)
                .sum()),
            Backend::Analytic => Ok((0..=r).map(|k| self.sphere_size(k)).sum()),
        }
    }

    fn sphere_size(&self, r: u32) -> u64 {
        match self.descriptor.kind() {
            GroupKind::FreeAbelian(d) => l1_sphere_count(*d, r),
            GroupKind::DihedralTimesZ => {
                // |(k,f,z)| = dihedral_len(k,f) + |z|
                (0..=r)
                    .map(|dl| dihedral_sphere_count(dl) * z_sphere_count(r - dl))
                    .sum()
            }
            _ => unreachable!("analytic backend only for Z^d and dihedral"),
        }
    }

    fn enumerate_sphere(&self, r: u32) -> Vec<Elem> {
        match self.descriptor.kind() {
            GroupKind::FreeAbelian(d) => {
                let mut out = Vec::new();
                let mut point = vec![0i64; *d];
                enumerate_l1(*d, r as i64, 0, &mut point, &mut out);
                out
            }
            GroupKind::DihedralTimesZ => {
                let mut out = Vec::new();
                for dl in 0..=r {
                    let zl = (r - dl) as i64;
                    let zs: Vec<i64> = if zl == 0 { vec![0] } else { vec![zl, -zl] };
                    for (k, f) in dihedral_sphere(dl) {
                        for &z in &zs {
                            out.push(Elem(vec![k, f, z]));
                        }
                    }
                }
                out
            }
            _ => unreachable!(),
        }
    }

    /// OLS slope of log |B(r)| against log r over r in [r_min, r_max].
    pub fn growth_degree_fit(&self, r_min: u32, r_max: u32) -> Result<f64> {
        if r_min < 2 || r_max <= r_min || r_max > self.radius_cap {
            return Err(Error::usage(
                "growth fit window must satisfy 2 <= r_min < r_max <= radius_cap",
            ));
        }
        let rs: Vec<f64> = (r_min..=r_max).map(|r| r as f64).collect();
        let vs: Result<Vec<f64>> = (r_min..=r_max)
            .map(|r| self.ball_size(r).map(|v| v as f64))
            .collect();
        let (slope, _) = loglog_fit(&rs, &vs?);
        Ok(slope)
    }
}

/// Number of points of Z^d with l1 norm exactly r.
fn l1_sphere_count(d: usize, r: u32) -> u64 {
    if r == 0 {
        return 1;
    }
    // sum over number k of nonzero coordinates: C(d,k) * 2^k * C(r-1, k-1)
    let r = r as u64;
    let mut total = 0u64;
    for k in 1..=(d as u64).min(r) {
        total += binomial(d as u64, k) * (1u64 << k) * binomial(r - 1, k - 1);
    }
    total
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc = 1u64;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

fn z_sphere_count(r: u32) -> u64 {
    if r == 0 {
        1
    } else {
        2
    }
}

/// Number of elements of D_inf with word length exactly l over {u, v}.
fn dihedral_sphere_count(l: u32) -> u64 {
    if l == 0 {
        1
    } else {
        2
    }
}

/// Elements (k, f) of D_inf with word length exactly l: the two alternating
/// words of length l (starting with u or with v).
fn dihedral_sphere(l: u32) -> Vec<(i64, i64)> {
    if l == 0 {
        return vec![(0, 0)];
    }
    let l = l as i64;
    if l % 2 == 0 {
        // (uv)^{l/2} and (vu)^{l/2} = t^{-l/2}
        vec![(l / 2, 0), (-l / 2, 0)]
    } else {
        // t^k u with 2k+1 = l, and t^{-k'} u with 2k'-1 = l
        vec![((l - 1) / 2, 1), (-(l + 1) / 2, 1)]
    }
}

fn enumerate_l1(d: usize, remaining: i64, pos: usize, point: &mut Vec<i64>, out: &mut Vec<Elem>) {
    if pos == d - 1 {
        if remaining == 0 {
            point[pos] = 0;
            out.push(Elem(point.clone()));
        } else {
            for s in [remaining, -remaining] {
                point[pos] = s;
                out.push(Elem(point.clone()));
            }
        }
        return;
    }
    for v in -remaining..=remaining {
        point[pos] = v;
        enumerate_l1(d, remaining - v.abs(), pos + 1, point, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_has_length_zero() {
        for g in [
            GroupDescriptor::free_abelian(2),
            GroupDescriptor::heisenberg(),
            GroupDescriptor::dihedral_times_z(),
        ] {
            let m = WordMetric::new(&g, 8).unwrap();
            assert_eq!(
                m.word_length(&g.identity()),
                LengthStatus::Reached(0)
            );
        }
    }

    #[test]
    fn z2_length_is_l1() {
        let g = GroupDescriptor::free_abelian(2);
        let m = WordMetric::new(&g, 100).unwrap();
        assert_eq!(
            m.word_length(&Elem(vec![3, -2])),
            LengthStatus::Reached(5)
        );
    }

    #[test]
    fn z1_ball_counts() {
        let g = GroupDescriptor::free_abelian(1);
        let m = WordMetric::new(&g, 10).unwrap();
        assert_eq!(m.ball_size(3).unwrap(), 7);
        assert_eq!(m.ball(0).unwrap(), vec![g.identity()]);
    }

    #[test]
    fn analytic_matches_bfs() {
        // cross-check closed forms against plain BFS
        for g in [
            GroupDescriptor::free_abelian(1),
            GroupDescriptor::free_abelian(2),
            GroupDescriptor::free_abelian(3),
            GroupDescriptor::dihedral_times_z(),
        ] {
            let fast = WordMetric::new(&g, 8).unwrap();
            let slow = WordMetric::bfs(&g, 8, 10_000_000).unwrap();
            for r in 0..=8 {
                assert_eq!(
                    fast.ball_size(r).unwrap(),
                    slow.ball_size(r).unwrap(),
                    "{} at r={r}",
                    g.name()
                );
                let mut a = fast.sphere(r).unwrap();
                let mut b = slow.sphere(r).unwrap();
                a.sort();
                b.sort();
                assert_eq!(a, b, "{} sphere {r}", g.name());
            }
        }
    }

    #[test]
    fn heisenberg_commutator_length_four() {
        let g = GroupDescriptor::heisenberg();
        let m = WordMetric::new(&g, 6).unwrap();
        let a = &g.generators()[0];
        let b = &g.generators()[2];
        let comm = g.commutator(a, b).unwrap();
        // abelianization forces even length >= 4; BFS confirms exactly 4
        assert_eq!(m.word_length(&comm), LengthStatus::Reached(4));
    }

    #[test]
    fn unreached_is_distinct() {
        let g = GroupDescriptor::free_abelian(1);
        let m = WordMetric::new(&g, 5).unwrap();
        assert_eq!(m.word_length(&Elem(vec![9])), LengthStatus::Unreached);
        assert!(matches!(
            m.word_length(&Elem(vec![9])).expect_reached(5),
            Err(Error::Unreached { cap: 5 })
        ));
    }

    #[test]
    fn sphere_beyond_cap_is_usage_error() {
        let g = GroupDescriptor::free_abelian(1);
        let m = WordMetric::new(&g, 5).unwrap();
        assert!(m.ball(6).is_err());
    }

    #[test]
    fn length_symmetry_under_inversion() {
        let g = GroupDescriptor::heisenberg();
        let m = WordMetric::new(&g, 6).unwrap();
        for r in 0..=6 {
            for e in m.sphere(r).unwrap() {
                let inv = g.invert(&e).unwrap();
                assert_eq!(m.word_length(&inv), LengthStatus::Reached(r));
            }
        }
    }

    #[test]
    fn growth_fits() {
        let z1 = GroupDescriptor::free_abelian(1);
        let m1 = WordMetric::new(&z1, 64).unwrap();
        let s1 = m1.growth_degree_fit(8, 64).unwrap();
        assert!((0.9..=1.1).contains(&s1), "Z slope {s1}");

        let z2 = GroupDescriptor::free_abelian(2);
        let m2 = WordMetric::new(&z2, 64).unwrap();
        let s2 = m2.growth_degree_fit(8, 64).unwrap();
        assert!((1.8..=2.2).contains(&s2), "Z^2 slope {s2}");

        let dz = GroupDescriptor::dihedral_times_z();
        let md = WordMetric::new(&dz, 64).unwrap();
        let sd = md.growth_degree_fit(8, 64).unwrap();
        assert!((1.8..=2.2).contains(&sd), "DxZ slope {sd}");
    }

    #[test]
    fn heisenberg_growth_degree_four() {
        let g = GroupDescriptor::heisenberg();
        let m = WordMetric::new(&g, 16).unwrap();
        let s = m.growth_degree_fit(8, 16).unwrap();
        assert!((3.5..=4.5).contains(&s), "Heisenberg slope {s}");
    }

    #[test]
    fn ball_submultiplicativity() {
        let g = GroupDescriptor::heisenberg();
        let m = WordMetric::new(&g, 10).unwrap();
        for r in 1..=5u32 {
            for s in 1..=5u32 {
                let brs = m.ball_size(r + s).unwrap();
                let br = m.ball_size(r).unwrap();
                let bs = m.ball_size(s).unwrap();
                assert!(brs <= br * bs, "r={r} s={s}");
            }
        }
    }

    #[test]
    fn bfs_layers_are_products_of_previous() {
        let g = GroupDescriptor::heisenberg();
        let m = WordMetric::new(&g, 5).unwrap();
        for r in 1..=5u32 {
            for e in m.sphere(r).unwrap() {
                // e = f * s for some f in sphere(r-1), s generator
                let mut ok = false;
                for s in g.generators() {
                    let f = g.mul_unchecked(&e, &g.inv_unchecked(s));
                    if m.word_length(&f) == LengthStatus::Reached(r - 1) {
                        ok = true;
                        break;
                    }
                }
                assert!(ok);
            }
        }
    }
}
