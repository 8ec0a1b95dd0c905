//! Verifiers for the defining conditions of the measure families: weak
//! alpha-moments, the ball and subset lower-bound conditions, the tail and
//! truncated-second-moment upper condition, and the one-dimensional
//! K/G/Q profile with its inverse scale a_n.

use super::SparseMeasure;
use crate::error::{Error, Result};
use crate::group::{Elem, GroupKind, LengthStatus, WordMetric};
use crate::scalar::Scalar;

/// sup over t in 1..=t_max of t^alpha * mu({|g| >= t}), with dropped mass
/// added to every tail.
pub fn weak_moment_stat<F: Scalar>(
    mu: &SparseMeasure<F>,
    metric: &WordMetric,
    alpha: f64,
) -> Result<F> {
    let mut lengths: Vec<(u32, F)> = Vec::with_capacity(mu.len());
    let mut max_len = 0u32;
    for (g, &m) in mu.iter() {
        match metric.word_length(g) {
            LengthStatus::Reached(l) => {
                max_len = max_len.max(l);
                lengths.push((l, m));
            }
            LengthStatus::Unreached => {
                return Err(Error::usage(
                    "measure support exceeds the enumerated metric range",
                ));
            }
        }
    }
    let t_max = max_len.max(mu.truncation_radius()).max(1);
    let mut tail = vec![F::zero(); t_max as usize + 2];
    for (l, m) in lengths {
        tail[l as usize] += m;
    }
    // suffix sums: tail[t] = mass at length >= t
    for t in (0..=t_max as usize).rev() {
        let next = tail[t + 1];
        tail[t] += next;
    }
    let mut best = F::zero();
    for t in 1..=t_max {
        let stat = F::of_f64((t as f64).powf(alpha)) * (tail[t as usize] + mu.dropped_mass());
        best = best.max(stat);
    }
    Ok(best)
}

/// One scale of a lower-bound condition check.
#[derive(Clone, Debug)]
pub struct ScaleVerdict<F> {
    pub k: usize,
    pub passed: bool,
    /// minimum observed mass over the required set (union with inverses)
    pub min_mass: F,
    /// the required lower bound eps * A^{-k(alpha+d)}
    pub required: F,
    pub notes: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct ConditionReport<F> {
    pub condition: &'static str,
    pub per_scale: Vec<ScaleVerdict<F>>,
    /// set when the scale list was empty: a vacuous pass
    pub vacuous: bool,
}

impl<F> ConditionReport<F> {
    pub fn passed(&self) -> bool {
        self.per_scale.iter().all(|s| s.passed)
    }
}

#[derive(Clone, Debug)]
pub struct BallSpec {
    pub center: Elem,
    pub radius: u32,
}

/// (BL_alpha): per k, mu >= eps A^{-k(alpha+d)} on B_{g_k}(r_k) and its
/// inverse set, |g_k| <= A^k, and r_k within [c_lo A^k, c_hi A^k].
#[allow(clippy::too_many_arguments)]
pub fn check_ball_lower<F: Scalar>(
    mu: &SparseMeasure<F>,
    metric: &WordMetric,
    alpha: f64,
    a_base: f64,
    eps: F,
    balls: &[BallSpec],
    c_lo: f64,
    c_hi: f64,
) -> Result<ConditionReport<F>> {
    let d = metric
        .descriptor()
        .known_growth_degree()
        .ok_or_else(|| Error::usage("(BL) check needs a known growth degree"))?
        as f64;
    let mut per_scale = Vec::new();
    for (i, spec) in balls.iter().enumerate() {
        let k = i + 1;
        let ak = a_base.powi(k as i32);
        let required = eps * F::of_f64(ak.powf(-(alpha + d)));
        let mut notes = Vec::new();
        let mut passed = true;
        match metric.word_length(&spec.center) {
            LengthStatus::Reached(l) => {
                if (l as f64) > ak {
                    passed = false;
                    notes.push(format!("center length {l} exceeds A^k = {ak:.2}"));
                }
            }
            LengthStatus::Unreached => {
                passed = false;
                notes.push("center beyond enumerated range".into());
            }
        }
        let r = spec.radius as f64;
        if r < c_lo * ak || r > c_hi * ak {
            passed = false;
            notes.push(format!(
                "radius {r} outside [{:.2}, {:.2}]",
                c_lo * ak,
                c_hi * ak
            ));
        }
        let ball = metric.ball(spec.radius)?;
        let mut min_mass = F::infinity();
        let desc = metric.descriptor();
        for y in &ball {
            let g = desc.mul_unchecked(&spec.center, y);
            let gi = desc.inv_unchecked(&g);
            for e in [g, gi] {
                let m = mu.mass(&e);
                min_mass = min_mass.min(m);
            }
        }
        if min_mass < required {
            passed = false;
        }
        per_scale.push(ScaleVerdict {
            k,
            passed,
            min_mass,
            required,
            notes,
        });
    }
    Ok(ConditionReport {
        condition: "(BL_alpha)",
        per_scale,
        vacuous: balls.is_empty(),
    })
}

/// (L_alpha) with user-supplied witness sets M_k: card(M_k) >= c_card A^{kd},
/// |g| within [c_lo A^k, c_hi A^k] on M_k, and the mass lower bound on
/// M_k and M_k^{-1}.
#[allow(clippy::too_many_arguments)]
pub fn check_lower<F: Scalar>(
    mu: &SparseMeasure<F>,
    metric: &WordMetric,
    alpha: f64,
    a_base: f64,
    eps: F,
    sets: &[Vec<Elem>],
    c_card: f64,
    c_lo: f64,
    c_hi: f64,
) -> Result<ConditionReport<F>> {
    let d = metric
        .descriptor()
        .known_growth_degree()
        .ok_or_else(|| Error::usage("(L) check needs a known growth degree"))?
        as f64;
    let desc = metric.descriptor();
    let mut per_scale = Vec::new();
    for (i, set) in sets.iter().enumerate() {
        let k = i + 1;
        let ak = a_base.powi(k as i32);
        let required = eps * F::of_f64(ak.powf(-(alpha + d)));
        let mut notes = Vec::new();
        let mut passed = true;
        let need_card = c_card * ak.powf(d);
        if (set.len() as f64) < need_card {
            passed = false;
            notes.push(format!("card {} < {:.1}", set.len(), need_card));
        }
        let mut min_mass = F::infinity();
        for g in set {
            match metric.word_length(g) {
                LengthStatus::Reached(l) => {
                    let lf = l as f64;
                    if lf < c_lo * ak || lf > c_hi * ak {
                        passed = false;
                        notes.push(format!("element length {lf} outside comparability window"));
                    }
                }
                LengthStatus::Unreached => {
                    passed = false;
                    notes.push("set element beyond enumerated range".into());
                }
            }
            let gi = desc.inv_unchecked(g);
            min_mass = min_mass.min(mu.mass(g));
            min_mass = min_mass.min(mu.mass(&gi));
        }
        if min_mass < required {
            passed = false;
        }
        per_scale.push(ScaleVerdict {
            k,
            passed,
            min_mass,
            required,
            notes,
        });
    }
    Ok(ConditionReport {
        condition: "(L_alpha)",
        per_scale,
        vacuous: sets.is_empty(),
    })
}

/// Report for the tail / truncated-second-moment condition (U_{Sigma,alpha}).
#[derive(Clone, Debug)]
pub struct UpperMomentReport<F> {
    /// max over t of t^alpha * tail(t) and the maximizing t
    pub tail_stat: (u32, F),
    /// max over t of t^{alpha-2} * sum_{|h|<=t} |h|^2 nu(h)
    pub second_moment_stat: (u32, F),
    /// an element of the support that escaped the subgroup enumeration
    pub escaped: Option<Elem>,
}

impl<F> UpperMomentReport<F> {
    pub fn passed(&self) -> bool {
        self.escaped.is_none()
    }
}

/// (U_{Sigma,alpha}) over the subgroup metric: both statistics are reported
/// as empirical constants; an element outside the enumerated subgroup range
/// fails the check with a witness.
pub fn check_upper<F: Scalar>(
    nu: &SparseMeasure<F>,
    sub_metric: &WordMetric,
    alpha: f64,
) -> UpperMomentReport<F> {
    let mut lengths: Vec<(u32, F)> = Vec::with_capacity(nu.len());
    let mut max_len = 1u32;
    for (g, &m) in nu.iter() {
        match sub_metric.word_length(g) {
            LengthStatus::Reached(l) => {
                max_len = max_len.max(l);
                lengths.push((l, m));
            }
            LengthStatus::Unreached => {
                return UpperMomentReport {
                    tail_stat: (0, F::zero()),
                    second_moment_stat: (0, F::zero()),
                    escaped: Some(g.clone()),
                };
            }
        }
    }
    let n = max_len as usize;
    let mut tail = vec![F::zero(); n + 2];
    let mut second = vec![F::zero(); n + 1];
    for (l, m) in lengths {
        tail[l as usize] += m;
        second[l as usize] += F::of_f64((l as f64) * (l as f64)) * m;
    }
    for t in (0..=n).rev() {
        let nx = tail[t + 1];
        tail[t] += nx;
    }
    let mut cum2 = F::zero();
    let mut best_tail = (1u32, F::zero());
    let mut best_second = (1u32, F::zero());
    for t in 1..=n {
        cum2 += second[t];
        let tf = t as f64;
        let ts = F::of_f64(tf.powf(alpha)) * tail[t];
        if ts > best_tail.1 {
            best_tail = (t as u32, ts);
        }
        let ss = F::of_f64(tf.powf(alpha - 2.0)) * cum2;
        if ss > best_second.1 {
            best_second = (t as u32, ss);
        }
    }
    UpperMomentReport {
        tail_stat: best_tail,
        second_moment_stat: best_second,
        escaped: None,
    }
}

/// The K/G/Q tables of a measure on Z and the inverse scale a_n.
#[derive(Clone, Debug)]
pub struct GjpProfile<F> {
    /// K(m) = m^{-2} sum_{|z|<=m} z^2 nu(z), 1-indexed by m
    pub k: Vec<F>,
    /// G(m) = sum_{|z|>=m} nu(z)
    pub g: Vec<F>,
    /// Q = K + G
    pub q: Vec<F>,
}

impl<F: Scalar> GjpProfile<F> {
    pub fn m_max(&self) -> u32 {
        self.k.len() as u32
    }

    pub fn k_at(&self, m: u32) -> F {
        self.k[(m - 1) as usize]
    }
    pub fn g_at(&self, m: u32) -> F {
        self.g[(m - 1) as usize]
    }
    pub fn q_at(&self, m: u32) -> F {
        self.q[(m - 1) as usize]
    }

    /// a_n = least m with Q(m) <= 1/n (the discrete inverse convention);
    /// None when Q stays above 1/n on the tabulated range.
    pub fn a_n(&self, n: u64) -> Option<u32> {
        let target = F::of_f64(1.0 / n as f64);
        // Q is non-increasing for the built examples; a linear scan keeps the
        // least-m convention honest even if Q wobbles.
        self.q
            .iter()
            .position(|&q| q <= target)
            .map(|i| i as u32 + 1)
    }
}

/// K, G, Q tables for a measure supported on Z.
pub fn gjp_profile<F: Scalar>(nu: &SparseMeasure<F>, m_max: u32) -> Result<GjpProfile<F>> {
    match nu.group().kind() {
        GroupKind::FreeAbelian(1) => {}
        _ => return Err(Error::usage("gjp_profile needs a measure on Z")),
    }
    let mm = m_max as usize;
    // histogram over |z|, capped at m_max; everything above lands in the
    // overflow bucket and counts toward every tail
    let mut mass_at = vec![F::zero(); mm + 1];
    let mut weighted2 = vec![F::zero(); mm + 1];
    let mut overflow = F::zero();
    for (g, &m) in nu.iter() {
        let z = g.coords()[0].unsigned_abs();
        if z <= m_max as u64 {
            mass_at[z as usize] += m;
            weighted2[z as usize] += F::of_f64((z * z) as f64) * m;
        } else {
            overflow += m;
        }
    }
    let mut k = Vec::with_capacity(mm);
    let mut g = Vec::with_capacity(mm);
    let mut cum2 = weighted2[0];
    let mut tail_from = vec![F::zero(); mm + 2];
    tail_from[mm + 1] = overflow;
    for t in (0..=mm).rev() {
        let nx = tail_from[t + 1];
        tail_from[t] = mass_at[t] + nx;
    }
    for m in 1..=mm {
        cum2 += weighted2[m];
        let mf = m as f64;
        k.push(cum2 / F::of_f64(mf * mf));
        g.push(tail_from[m]);
    }
    let q: Vec<F> = k.iter().zip(&g).map(|(&a, &b)| a + b).collect();
    Ok(GjpProfile { k, g, q })
}
