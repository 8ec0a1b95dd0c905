//! Lattice profiles psi(a) ~ (1 + |a|_2)^{-alpha-k} on Z^k, truncated to a
//! box, with a certified upper estimate of the mass left outside.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone)]
pub struct LatticePsi<F: Scalar> {
    dimension: usize,
    alpha: f64,
    box_radius: u32,
    /// row-major masses over [-R, R]^k
    masses: Vec<F>,
    normalization: F,
    tail_mass: F,
}

impl<F: Scalar> LatticePsi<F> {
    /// Normalized psi on the box [-R, R]^k: psi(a) = c (1+|a|_2)^{-alpha-k}.
    /// The normalization c makes box mass + estimated tail equal 1; the tail
    /// estimate is an upper bound by unit-cube volume comparison.
    pub fn build(dimension: usize, alpha: f64, box_radius: u32) -> Result<LatticePsi<F>> {
        if !(0.0 < alpha && alpha < 2.0) {
            return Err(Error::usage(format!("alpha must be in (0,2), got {alpha}")));
        }
        if dimension == 0 {
            return Err(Error::usage("psi needs dimension >= 1"));
        }
        let side = 2 * box_radius as usize + 1;
        let cells = side.checked_pow(dimension as u32).ok_or(Error::Budget {
            what: "psi box",
            used: u64::MAX,
            limit: 100_000_000,
        })?;
        if cells > 100_000_000 {
            return Err(Error::Budget {
                what: "psi box",
                used: cells as u64,
                limit: 100_000_000,
            });
        }
        let k = dimension;
        let exponent = -(alpha + k as f64);
        let mut masses = vec![F::zero(); cells];
        let mut box_sum = 0.0f64;
        let r = box_radius as i64;
        let mut idx = vec![-r; k];
        'outer: loop {
            let norm2: f64 = idx.iter().map(|&x| (x * x) as f64).sum();
            let w = (1.0 + norm2.sqrt()).powf(exponent);
            masses[Self::flat_index_of(&idx, r)] = F::of_f64(w);
            box_sum += w;
            // odometer
            for pos in 0..k {
                idx[pos] += 1;
                if idx[pos] <= r {
                    continue 'outer;
                }
                idx[pos] = -r;
            }
            break;
        }
        let tail_upper = tail_upper_bound(k, alpha, box_radius);
        let c = 1.0 / (box_sum + tail_upper);
        let cf = F::of_f64(c);
        for m in masses.iter_mut() {
            *m = *m * cf;
        }
        Ok(LatticePsi {
            dimension,
            alpha,
            box_radius,
            masses,
            normalization: cf,
            tail_mass: F::of_f64(c * tail_upper),
        })
    }

    /// Box-conditional version: all mass inside the box, tail_mass = 0.
    pub fn renormalized(&self) -> LatticePsi<F> {
        let total: F = self.masses.iter().copied().sum();
        let mut out = self.clone();
        for m in out.masses.iter_mut() {
            *m = *m / total;
        }
        out.normalization = self.normalization / total;
        out.tail_mass = F::zero();
        out
    }

    fn flat_index_of(a: &[i64], r: i64) -> usize {
        let side = (2 * r + 1) as usize;
        let mut idx = 0usize;
        for &x in a {
            idx = idx * side + (x + r) as usize;
        }
        idx
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn box_radius(&self) -> u32 {
        self.box_radius
    }
    pub fn tail_mass(&self) -> F {
        self.tail_mass
    }
    pub fn normalization(&self) -> F {
        self.normalization
    }
    pub fn cells(&self) -> usize {
        self.masses.len()
    }

    pub fn mass(&self, a: &[i64]) -> F {
        let r = self.box_radius as i64;
        if a.len() != self.dimension || a.iter().any(|&x| x.abs() > r) {
            return F::zero();
        }
        self.masses[Self::flat_index_of(a, r)]
    }

    /// Visits every box cell with its mass.
    pub fn for_each(&self, mut f: impl FnMut(&[i64], F)) {
        let r = self.box_radius as i64;
        let k = self.dimension;
        let mut idx = vec![-r; k];
        let mut flat = 0usize;
        'outer: loop {
            f(&idx, self.masses[flat]);
            flat += 1;
            for pos in (0..k).rev() {
                idx[pos] += 1;
                if idx[pos] <= r {
                    continue 'outer;
                }
                idx[pos] = -r;
            }
            break;
        }
    }

    /// Direct tail sum over the box: sum of psi(a) for |a|_2 >= t.
    pub fn box_tail(&self, t: f64) -> F {
        let mut total = F::zero();
        self.for_each(|a, w| {
            let n2: f64 = a.iter().map(|&x| (x * x) as f64).sum();
            if n2.sqrt() >= t {
                total += w;
            }
        });
        total
    }
}

/// Upper bound on sum over a outside [-R,R]^k of (1+|a|_2)^{-alpha-k}: every
/// such point has |a|_2 >= R+1; lattice points with |a|_2 in [s, s+1) have
/// disjoint unit cubes inside the annulus of radii s -+ sqrt(k)/2.
fn tail_upper_bound(k: usize, alpha: f64, box_radius: u32) -> f64 {
    let vk = unit_ball_volume(k);
    let hk = (k as f64).sqrt() / 2.0;
    let exponent = -(alpha + k as f64);
    let s0 = (box_radius + 1) as f64;
    let s_max = (s0 * 16.0).max(65536.0);
    let mut total = 0.0;
    let mut s = s0;
    while s < s_max {
        let outer = (s + 1.0 + hk).powi(k as i32);
        let inner = (s - hk).max(0.0).powi(k as i32);
        total += vk * (outer - inner) * (1.0 + s).powf(exponent);
        s += 1.0;
    }
    // analytic remainder: shell count <= vk * k * (1.5 s)^{k-1} (1 + 2 hk)
    // for s >= s_max, so the remainder is bounded by a constant times
    // integral of s^{-alpha-1}
    let c = vk * k as f64 * 1.5f64.powi(k as i32 - 1) * (1.0 + 2.0 * hk);
    total + c * (s_max - 1.0).powf(-alpha) / alpha
}

fn unit_ball_volume(k: usize) -> f64 {
    // V_k = pi^{k/2} / Gamma(k/2 + 1)
    let half = k as f64 / 2.0;
    std::f64::consts::PI.powf(half) / gamma_half_integer(k)
}

/// Gamma(k/2 + 1) for integer k >= 0.
fn gamma_half_integer(k: usize) -> f64 {
    if k % 2 == 0 {
        // (k/2)!
        (1..=k / 2).map(|i| i as f64).product()
    } else {
        // Gamma(1/2) = sqrt(pi), Gamma(x+1) = x Gamma(x)
        let mut acc = std::f64::consts::PI.sqrt();
        let mut x = 0.5;
        for _ in 0..(k + 1) / 2 {
            acc *= x;
            x += 1.0;
        }
        acc
    }
}
