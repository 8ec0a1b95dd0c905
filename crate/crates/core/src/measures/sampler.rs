//! Seeded samplers: Vose alias tables over finite supports, and the
//! coordinate-wise sampler that draws a box exponent vector, maps it through
//! pi_S and inverts with probability 1/2.

use super::{LatticePsi, SparseMeasure};
use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor};
use crate::scalar::Scalar;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Vose alias table for O(1) discrete sampling.
pub struct AliasTable {
    prob: Vec<f64>,
    alias: Vec<u32>,
}

impl AliasTable {
    pub fn new(weights: &[f64]) -> Result<AliasTable> {
        let n = weights.len();
        if n == 0 {
            return Err(Error::usage("alias table of empty weight vector"));
        }
        if weights.iter().any(|w| *w < 0.0 || !w.is_finite()) {
            return Err(Error::usage("alias weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::usage("alias weights sum to zero"));
        }
        let scale = n as f64 / total;
        let mut prob: Vec<f64> = weights.iter().map(|w| w * scale).collect();
        let mut alias = vec![0u32; n];
        let mut small: Vec<u32> = Vec::new();
        let mut large: Vec<u32> = Vec::new();
        for (i, &p) in prob.iter().enumerate() {
            if p < 1.0 {
                small.push(i as u32);
            } else {
                large.push(i as u32);
            }
        }
        while let (Some(&s), Some(&l)) = (small.last(), large.last()) {
            small.pop();
            alias[s as usize] = l;
            prob[l as usize] = (prob[l as usize] + prob[s as usize]) - 1.0;
            if prob[l as usize] < 1.0 {
                large.pop();
                small.push(l);
            }
        }
        for &l in &large {
            prob[l as usize] = 1.0;
        }
        for &s in &small {
            prob[s as usize] = 1.0;
        }
        Ok(AliasTable { prob, alias })
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }
    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let i = rng.gen_range(0..self.prob.len());
        if rng.gen::<f64>() < self.prob[i] {
            i
        } else {
            self.alias[i] as usize
        }
    }
}

enum SamplerKind {
    Support {
        atoms: Vec<Elem>,
        alias: AliasTable,
    },
    Coordinatewise {
        group: GroupDescriptor,
        /// powers[i][a + R] = s_i^a
        powers: Vec<Vec<Elem>>,
        radius: i64,
        dimension: usize,
        alias: AliasTable,
    },
}

/// Deterministic seeded sampler of group elements.
pub struct Sampler {
    kind: SamplerKind,
    seed: u64,
    /// bound on the sampling bias from the rejected psi tail
    bias_bound: f64,
}

impl Sampler {
    /// Alias sampler over the support of a measure.
    pub fn from_measure<F: Scalar>(mu: &SparseMeasure<F>, seed: u64) -> Result<Sampler> {
        let mut entries: Vec<(Elem, f64)> = mu
            .iter()
            .map(|(g, &m)| (g.clone(), m.as_f64()))
            .collect();
        // fixed iteration order so the alias layout is seed-reproducible
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let weights: Vec<f64> = entries.iter().map(|e| e.1).collect();
        let atoms: Vec<Elem> = entries.into_iter().map(|e| e.0).collect();
        Ok(Sampler {
            kind: SamplerKind::Support {
                atoms,
                alias: AliasTable::new(&weights)?,
            },
            seed,
            bias_bound: mu.dropped_mass().as_f64(),
        })
    }

    /// Coordinate-wise sampler: a ~ boxed psi, then pi_S(a), inverted with
    /// probability 1/2. Draws outside the box never happen (the alias is
    /// box-conditional); the induced bias is bounded by psi's tail mass.
    pub fn coordinatewise<F: Scalar>(
        group: &GroupDescriptor,
        psi: &LatticePsi<F>,
        tuple: &[Elem],
        seed: u64,
    ) -> Result<Sampler> {
        if psi.dimension() != tuple.len() {
            return Err(Error::usage("tuple length must match psi dimension"));
        }
        let mut weights = Vec::with_capacity(psi.cells());
        psi.for_each(|_, w| weights.push(w.as_f64()));
        let radius = psi.box_radius() as i64;
        let mut powers = Vec::with_capacity(tuple.len());
        for s in tuple {
            let mut row = Vec::with_capacity((2 * radius + 1) as usize);
            for a in -radius..=radius {
                row.push(group.pow(s, a)?);
            }
            powers.push(row);
        }
        Ok(Sampler {
            kind: SamplerKind::Coordinatewise {
                group: group.clone(),
                powers,
                radius,
                dimension: psi.dimension(),
                alias: AliasTable::new(&weights)?,
            },
            seed,
            bias_bound: psi.tail_mass().as_f64(),
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
    pub fn bias_bound(&self) -> f64 {
        self.bias_bound
    }

    /// A fresh RNG for a worker; trial-indexed so results do not depend on
    /// the worker count.
    pub fn rng_for(&self, trial: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(splitmix(self.seed ^ splitmix(trial)))
    }

    pub fn draw<R: Rng>(&self, rng: &mut R) -> Elem {
        match &self.kind {
            SamplerKind::Support { atoms, alias } => atoms[alias.sample(rng)].clone(),
            SamplerKind::Coordinatewise {
                group,
                powers,
                radius,
                dimension,
                alias,
            } => {
                let mut flat = alias.sample(rng);
                let side = (2 * radius + 1) as usize;
                let mut acc = group.identity();
                // decode the flat box index (last coordinate fastest)
                let mut coords = vec![0i64; *dimension];
                for pos in (0..*dimension).rev() {
                    coords[pos] = (flat % side) as i64 - radius;
                    flat /= side;
                }
                for (i, &a) in coords.iter().enumerate() {
                    if a != 0 {
                        acc = group.mul_unchecked(&acc, &powers[i][(a + radius) as usize]);
                    }
                }
                if rng.gen::<bool>() {
                    group.inv_unchecked(&acc)
                } else {
                    acc
                }
            }
        }
    }
}

pub(crate) fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use rustc_hash::FxHashMap;

    #[test]
    fn alias_chi_square_sanity() {
        // empirical frequencies converge to masses: chi-square at 1e6 draws
        let weights = [0.05, 0.1, 0.15, 0.3, 0.4];
        let table = AliasTable::new(&weights).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12345);
        let n = 1_000_000usize;
        let mut counts = [0u64; 5];
        for _ in 0..n {
            counts[table.sample(&mut rng)] += 1;
        }
        let mut chi2 = 0.0;
        for (i, &c) in counts.iter().enumerate() {
            let expected = weights[i] * n as f64;
            let d = c as f64 - expected;
            chi2 += d * d / expected;
        }
        // df = 4; 18.47 is the 99.9% quantile
        assert!(chi2 < 18.47, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn support_sampler_deterministic() {
        let g = GroupDescriptor::free_abelian(1);
        let mu: SparseMeasure<f64> = SparseMeasure::from_table(
            &g,
            &[
                (Elem::from_coords(vec![1]), 0.5),
                (Elem::from_coords(vec![-1]), 0.5),
            ],
        )
        .unwrap();
        let s1 = Sampler::from_measure(&mu, 7).unwrap();
        let s2 = Sampler::from_measure(&mu, 7).unwrap();
        let mut r1 = s1.rng_for(0);
        let mut r2 = s2.rng_for(0);
        for _ in 0..1000 {
            assert_eq!(s1.draw(&mut r1), s2.draw(&mut r2));
        }
    }

    #[test]
    fn coordinatewise_sampler_matches_measure() {
        // frequencies of the coordinatewise sampler track nu_{psi,S}
        let g = GroupDescriptor::free_abelian(1);
        let psi: LatticePsi<f64> = LatticePsi::build(1, 1.0, 8).unwrap();
        let psi = psi.renormalized();
        let tuple = vec![Elem::from_coords(vec![1])];
        let nu = crate::measures::build_coordinatewise(&g, &psi, &tuple).unwrap();
        let sampler = Sampler::coordinatewise(&g, &psi, &tuple, 99).unwrap();
        let mut rng = sampler.rng_for(0);
        let n = 200_000usize;
        let mut counts: FxHashMap<Elem, u64> = FxHashMap::default();
        for _ in 0..n {
            *counts.entry(sampler.draw(&mut rng)).or_insert(0) += 1;
        }
        for (e, &m) in nu.iter() {
            let freq = counts.get(e).copied().unwrap_or(0) as f64 / n as f64;
            let se = (m * (1.0 - m) / n as f64).sqrt();
            assert!(
                (freq - m).abs() < 5.0 * se + 1e-4,
                "{e:?}: freq {freq} vs mass {m}"
            );
        }
        assert_eq!(sampler.bias_bound(), 0.0);
    }
}
