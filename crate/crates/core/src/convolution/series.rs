//! Certified convolution powers and return-probability series.
//!
//! Powers are computed by repeated squaring. The chain tracks, per level:
//! the computed sub-probability measure, the exact dropped mass, an upper
//! bound on the sup-norm of the missing measure, and a dyadic tail-sup
//! profile. Series entries at time 2n are evaluated as sum of squares of the
//! half-time power (exact for symmetric measures); their upper error bars
//! use the prune-event radii: mass dropped at word length >= r can only
//! re-enter the diagonal through factors that are large far from the
//! identity, so each event contributes
//!     2 * mass * 2^{levels since} * (pieces * tailsup(r / pieces))
//! instead of the blunt 2 * dropped * max.

use super::{convolve_repr, heis, ConvolutionPlan, PruneEvent, Repr, TailProfile};
use crate::error::{Error, Result};
use crate::fit::linear_fit;
use crate::group::{Elem, GroupDescriptor, WordMetric};
use crate::measures::SparseMeasure;
use crate::scalar::Scalar;

struct LevelInfo<F> {
    profile: TailProfile<F>,
    rho_inf: F,
    max_mass: F,
    dropped: F,
}

struct Chain<F: Scalar> {
    group: GroupDescriptor,
    plan: ConvolutionPlan<F>,
    repr: Repr<F>,
    level: usize,
    /// prune events, each tagged with the level it happened at
    events: Vec<(usize, PruneEvent<F>)>,
    levels: Vec<LevelInfo<F>>,
    symmetric: bool,
}

impl<F: Scalar> Chain<F> {
    fn start(mu: &SparseMeasure<F>, plan: &ConvolutionPlan<F>) -> Chain<F> {
        let repr = Repr::from_measure(mu);
        let d0 = mu.dropped_mass().max(F::zero());
        let mut events = Vec::new();
        if d0 > F::zero() {
            events.push((
                0usize,
                PruneEvent {
                    steps: 1,
                    mass: d0,
                    radius: 0,
                    max_atom: d0,
                },
            ));
        }
        let level0 = LevelInfo {
            profile: repr.tail_profile(mu.group()),
            rho_inf: d0,
            max_mass: repr.max_mass(),
            dropped: d0,
        };
        Chain {
            group: mu.group().clone(),
            plan: plan.clone(),
            repr,
            level: 0,
            events,
            levels: vec![level0],
            symmetric: mu.symmetric(),
        }
    }

    fn dropped(&self) -> F {
        self.levels[self.level].dropped
    }

    /// One squaring step. Pruning is threshold- and cap-driven only: the
    /// budget is zero, so dense boxes are never trimmed below the cell cap.
    /// Early trims at small radii would poison the sharp certificates.
    fn square(&mut self) -> Result<()> {
        let (mut out, event) =
            convolve_repr(&self.group, &self.repr, &self.repr, &self.plan, F::zero())?;
        if self.symmetric {
            if let Repr::Heis(h) = &mut out {
                heis::symmetrize_exact(h);
            } else if let Repr::Map(entries) = &mut out {
                map_symmetrize(&self.group, entries);
            }
        }
        let prev = &self.levels[self.level];
        let d_prev = prev.dropped;
        let tau = event.max_atom;
        let rho_inf_next =
            F::of_f64(2.0) * (prev.max_mass + prev.rho_inf) * d_prev + tau;
        self.level += 1;
        if event.mass > F::zero() {
            self.events.push((self.level, event));
        }
        let total = out.total_mass();
        let dropped = (F::one() - total).max(F::zero());
        self.levels.push(LevelInfo {
            profile: out.tail_profile(&self.group),
            rho_inf: rho_inf_next,
            max_mass: out.max_mass(),
            dropped,
        });
        self.repr = out;
        Ok(())
    }

    /// max over levels <= j of the certified true tail-sup at radius s.
    fn tail_sup_true(&self, upto: usize, radius: u64) -> F {
        let mut best = F::zero();
        for info in self.levels.iter().take(upto + 1) {
            let v = info.profile.query(radius) + info.rho_inf;
            best = best.max(v);
        }
        best
    }

    /// Certified upper addition for the series entry at time 2 * 2^level.
    fn series_upper_extra(&self) -> F {
        let j = self.level;
        let info = &self.levels[j];
        let d = info.dropped;
        let m = info.max_mass;
        let crude = F::of_f64(2.0) * d * m + d * info.rho_inf.min(m + d);
        let mut cross = F::zero();
        for (lev, ev) in &self.events {
            let gap = (j - lev) as f64;
            let weight = F::of_f64(2f64.powf(gap)) * ev.mass;
            let pieces = (j - lev) as u64 + 1;
            let r = ev.radius / pieces.max(1);
            let ts_factors = self.tail_sup_true(j, r) * F::of_f64(gap);
            let ts_final = info.profile.query(r);
            cross += weight * (ts_factors + ts_final);
        }
        let sharp = F::of_f64(2.0) * cross + d * info.rho_inf;
        let extra = sharp.min(crude);
        // float-summation slack
        extra * F::of_f64(1.0 + 1e-6) + F::of_f64(1e-300)
    }
}

fn map_symmetrize<F: Scalar>(group: &GroupDescriptor, entries: &mut Vec<(Elem, F)>) {
    use rustc_hash::FxHashMap;
    let index: FxHashMap<Elem, usize> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.0.clone(), i))
        .collect();
    let half = F::of_f64(0.5);
    for i in 0..entries.len() {
        let inv = group.inv_unchecked(&entries[i].0);
        if let Some(&k) = index.get(&inv) {
            if k > i {
                let avg = (entries[i].1 + entries[k].1) * half;
                entries[i].1 = avg;
                entries[k].1 = avg;
            }
        }
    }
}

/// A computed power with its certification data.
pub struct CertifiedPower<F: Scalar> {
    group: GroupDescriptor,
    repr: Repr<F>,
    steps: u64,
    dropped: F,
    truncation_radius: u32,
    symmetric: bool,
}

impl<F: Scalar> CertifiedPower<F> {
    /// mu^(n) by repeated squaring on the binary expansion of n.
    pub fn compute(
        mu: &SparseMeasure<F>,
        n: u64,
        plan: &ConvolutionPlan<F>,
    ) -> Result<CertifiedPower<F>> {
        if n == 0 {
            return Err(Error::usage("power needs n >= 1"));
        }
        if plan.strategy == super::Strategy::Direct {
            return Self::compute_direct(mu, n, plan);
        }
        let top_level = 63 - n.leading_zeros() as usize;
        let mut chain = Chain::start(mu, plan);
        let mut partial: Option<(Repr<F>, F)> = None; // (repr, dropped)
        let levels = top_level.max(1);
        for level in 0..=top_level {
            if n & (1 << level) != 0 && n.count_ones() > 1 {
                partial = Some(match partial {
                    None => {
                        let d = chain.dropped();
                        let r = clone_repr(&chain.repr);
                        (r, d)
                    }
                    Some((p, dp)) => {
                        let budget = plan.cert_budget / F::of_usize(levels * 4);
                        let (out, ev) =
                            convolve_repr(&chain.group, &p, &chain.repr, plan, budget)?;
                        let dc = chain.dropped();
                        let d = F::one() - (F::one() - dp) * (F::one() - dc) + ev.mass;
                        (out, d)
                    }
                });
            }
            if level < top_level {
                chain.square()?;
            }
        }
        let (repr, dropped) = if n.count_ones() == 1 {
            let d = chain.dropped();
            (chain.repr, d)
        } else {
            let p = partial.expect("composed power");
            (p.0, p.1)
        };
        let dropped = dropped.max(F::zero());
        Ok(CertifiedPower {
            group: mu.group().clone(),
            repr,
            steps: n,
            dropped,
            truncation_radius: mu.truncation_radius() * n as u32,
            symmetric: mu.symmetric() && n % 2 == 0,
        })
    }

    fn compute_direct(
        mu: &SparseMeasure<F>,
        n: u64,
        plan: &ConvolutionPlan<F>,
    ) -> Result<CertifiedPower<F>> {
        let base = Repr::from_measure(mu);
        let mut acc = clone_repr(&base);
        let mut dropped = mu.dropped_mass();
        for _ in 1..n {
            let (out, ev) = convolve_repr(mu.group(), &acc, &base, plan, F::zero())?;
            dropped = F::one()
                - (F::one() - dropped) * (F::one() - mu.dropped_mass())
                + ev.mass;
            acc = out;
        }
        Ok(CertifiedPower {
            group: mu.group().clone(),
            repr: acc,
            steps: n,
            dropped: dropped.max(F::zero()),
            truncation_radius: mu.truncation_radius() * n as u32,
            symmetric: false,
        })
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }
    pub fn dropped(&self) -> F {
        self.dropped
    }
    pub fn value_at(&self, g: &Elem) -> F {
        self.repr.value_at(g)
    }
    pub fn max_mass(&self) -> F {
        self.repr.max_mass()
    }
    pub fn support_size(&self) -> usize {
        self.repr.atom_count()
    }

    pub fn into_measure(self) -> SparseMeasure<F> {
        let mut m = self.repr.to_measure(
            &self.group,
            self.truncation_radius,
            self.dropped,
            false,
        );
        if self.symmetric && !m.is_symmetric_exact() {
            m.symmetrize_exact();
        } else if self.symmetric {
            m.symmetrize_exact();
        }
        m
    }
}

fn clone_repr<F: Scalar>(r: &Repr<F>) -> Repr<F> {
    match r {
        Repr::Map(v) => Repr::Map(v.clone()),
        Repr::Line(l) => Repr::Line(super::line::LineRepr {
            lo: l.lo,
            vals: l.vals.clone(),
            symmetric: l.symmetric,
        }),
        Repr::Grid(g) => Repr::Grid(super::grid::GridRepr {
            x0: g.x0,
            y0: g.y0,
            w: g.w,
            h: g.h,
            vals: g.vals.clone(),
            symmetric: g.symmetric,
        }),
        Repr::Heis(h) => Repr::Heis(super::heis::HeisRepr {
            cells: h.cells.clone(),
        }),
    }
}

/// One return-series entry: the walk has run `time` steps (an even count).
#[derive(Clone, Copy, Debug)]
pub struct ReturnEntry<F> {
    pub time: u64,
    pub value: F,
    pub lower: F,
    pub upper: F,
}

impl<F: Scalar> ReturnEntry<F> {
    /// (upper - lower) / value
    pub fn relative_error(&self) -> F {
        if self.value <= F::zero() {
            F::infinity()
        } else {
            (self.upper - self.lower) / self.value
        }
    }
}

#[derive(Clone, Debug)]
pub struct ReturnSeries<F> {
    pub label: String,
    pub entries: Vec<ReturnEntry<F>>,
}

impl<F: Scalar> ReturnSeries<F> {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,value,lo,hi\n");
        for e in &self.entries {
            out.push_str(&format!("{},{},{},{}\n", e.time, e.value, e.lower, e.upper));
        }
        out
    }
}

/// Return probabilities mu^(2n)(e) for the even times in `times`, each
/// computed as the sum of squares of the half-time power. Requires a
/// symmetric measure; symmetrize non-symmetric inputs with
/// `symmetrize_multiplicative` first.
pub fn return_series<F: Scalar>(
    mu: &SparseMeasure<F>,
    times: &[u64],
    plan: &ConvolutionPlan<F>,
) -> Result<ReturnSeries<F>> {
    if !mu.symmetric() {
        return Err(Error::usage(
            "return_series needs a symmetric measure; apply symmetrize_multiplicative first",
        ));
    }
    if times.is_empty() {
        return Err(Error::usage("empty time list"));
    }
    let mut times = times.to_vec();
    times.sort_unstable();
    times.dedup();
    if times.iter().any(|t| t % 2 != 0 || *t == 0) {
        return Err(Error::usage("return series times must be positive and even"));
    }
    let halves: Vec<u64> = times.iter().map(|t| t / 2).collect();
    let top_level = 63 - halves.last().unwrap().leading_zeros() as usize;
    let mut chain = Chain::start(mu, plan);
    let mut entries = Vec::with_capacity(times.len());
    // non-dyadic half-times: binary-composed partial products
    let mut pending: Vec<(u64, Option<(Repr<F>, F)>)> = halves
        .iter()
        .filter(|h| h.count_ones() > 1)
        .map(|&h| (h, None))
        .collect();
    let levels = top_level.max(1);
    for level in 0..=top_level {
        let n_here = 1u64 << level;
        if halves.contains(&n_here) {
            let value = chain.repr.sum_squares();
            let extra = chain.series_upper_extra();
            entries.push(ReturnEntry {
                time: 2 * n_here,
                value,
                lower: value,
                upper: value + extra,
            });
        }
        for (h, slot) in pending.iter_mut() {
            if *h & n_here != 0 {
                *slot = Some(match slot.take() {
                    None => (clone_repr(&chain.repr), chain.dropped()),
                    Some((p, dp)) => {
                        let budget = plan.cert_budget / F::of_usize(levels * 4);
                        let (out, ev) =
                            convolve_repr(&chain.group, &p, &chain.repr, plan, budget)?;
                        let dc = chain.dropped();
                        let d = F::one() - (F::one() - dp) * (F::one() - dc) + ev.mass;
                        (out, d)
                    }
                });
            }
        }
        if level < top_level {
            chain.square()?;
        }
    }
    for (h, slot) in pending {
        let (repr, dropped) = slot.expect("pending product completed");
        let value = repr.sum_squares();
        // crude certificate for composed powers
        let m = repr.max_mass();
        let extra = (F::of_f64(2.0) * dropped * m + dropped * (m + dropped))
            * F::of_f64(1.0 + 1e-6);
        entries.push(ReturnEntry {
            time: 2 * h,
            value,
            lower: value,
            upper: value + extra,
        });
    }
    entries.sort_by_key(|e| e.time);
    Ok(ReturnSeries {
        label: format!("{} series", mu.group().name()),
        entries,
    })
}

/// Fit window for the return-exponent estimate.
#[derive(Clone, Copy, Debug)]
pub enum FitWindow {
    /// times in [lo, hi]
    Range(u64, u64),
    /// every entry whose certified relative error is below the fit threshold
    Certified,
}

/// OLS slope of log value against log time over the window. Refuses when
/// fewer than 4 points qualify or when any selected point carries a
/// certified relative error of 10% or more.
pub fn fit_exponent<F: Scalar>(
    series: &ReturnSeries<F>,
    window: FitWindow,
) -> Result<(F, F)> {
    let max_rel = F::of_f64(0.1);
    let selected: Vec<&ReturnEntry<F>> = match window {
        FitWindow::Range(lo, hi) => series
            .entries
            .iter()
            .filter(|e| e.time >= lo && e.time <= hi)
            .collect(),
        FitWindow::Certified => series
            .entries
            .iter()
            .filter(|e| e.relative_error() < max_rel)
            .collect(),
    };
    if selected.len() < 4 {
        return Err(Error::usage(format!(
            "fit window holds {} points; need at least 4",
            selected.len()
        )));
    }
    if let FitWindow::Range(..) = window {
        for e in &selected {
            let rel = e.relative_error();
            if rel >= max_rel {
                return Err(Error::IntervalsTooWide(format!(
                    "entry at time {} has relative error {:.3}",
                    e.time,
                    rel.as_f64()
                )));
            }
        }
    }
    let xs: Vec<F> = selected.iter().map(|e| F::of_f64(e.time as f64).ln()).collect();
    let ys: Vec<F> = selected.iter().map(|e| e.value.ln()).collect();
    let (slope, _, stderr) = linear_fit(&xs, &ys);
    Ok((slope, stderr))
}

#[derive(Clone, Debug)]
pub struct NearDiagonalRow<F> {
    pub element: Vec<i64>,
    pub length: u32,
    pub value: F,
    pub scaled: F,
}

#[derive(Clone, Debug)]
pub struct NearDiagonalReport<F> {
    pub steps: u64,
    pub eta: f64,
    pub rows: Vec<NearDiagonalRow<F>>,
    pub min_scaled: F,
    pub max_scaled: F,
    /// dropped mass relative to the smallest tabulated value
    pub max_relative_error: F,
}

impl<F: Scalar> NearDiagonalReport<F> {
    pub fn ratio(&self) -> F {
        if self.min_scaled > F::zero() {
            self.max_scaled / self.min_scaled
        } else {
            F::infinity()
        }
    }
}

/// Tabulates mu^(n)(g) * n^{d/alpha} over {g : |g|^alpha <= eta n}.
pub fn near_diagonal_check<F: Scalar>(
    mu: &SparseMeasure<F>,
    metric: &WordMetric,
    n: u64,
    eta: f64,
    alpha: f64,
    plan: &ConvolutionPlan<F>,
) -> Result<NearDiagonalReport<F>> {
    let d = metric
        .descriptor()
        .known_growth_degree()
        .ok_or_else(|| Error::usage("near-diagonal check needs a growth degree"))?
        as f64;
    let power = CertifiedPower::compute(mu, n, plan)?;
    let r_max = ((eta * n as f64).powf(1.0 / alpha)).floor() as u32;
    let scale = F::of_f64((n as f64).powf(d / alpha));
    let mut rows = Vec::new();
    let mut min_scaled = F::infinity();
    let mut max_scaled = F::zero();
    for r in 0..=r_max.min(metric.radius_cap()) {
        for g in metric.sphere(r)? {
            let v = power.value_at(&g);
            let s = v * scale;
            min_scaled = min_scaled.min(s);
            max_scaled = max_scaled.max(s);
            rows.push(NearDiagonalRow {
                element: g.coords().to_vec(),
                length: r,
                value: v,
                scaled: s,
            });
        }
    }
    let min_value = rows
        .iter()
        .map(|r| r.value)
        .fold(F::infinity(), |a, b| a.min(b));
    let max_relative_error = if min_value > F::zero() {
        power.dropped() / min_value
    } else {
        F::infinity()
    };
    Ok(NearDiagonalReport {
        steps: n,
        eta,
        rows,
        min_scaled,
        max_scaled,
        max_relative_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::measures::{build_mu_alpha, SparseMeasure};

    fn simple_walk() -> SparseMeasure<f64> {
        let g = GroupDescriptor::free_abelian(1);
        SparseMeasure::from_table(
            &g,
            &[
                (Elem::from_coords(vec![1]), 0.5),
                (Elem::from_coords(vec![-1]), 0.5),
            ],
        )
        .unwrap()
    }

    #[test]
    fn simple_walk_series_values() {
        let plan = ConvolutionPlan::default();
        let s = return_series(&simple_walk(), &[2, 4], &plan).unwrap();
        assert_eq!(s.entries[0].time, 2);
        assert!((s.entries[0].value - 0.5).abs() < 1e-15);
        assert!((s.entries[1].value - 0.375).abs() < 1e-15);
        for e in &s.entries {
            assert!(e.lower <= e.value && e.value <= e.upper);
            assert!(e.relative_error() < 1e-9);
        }
    }

    #[test]
    fn delta_series_is_constant_one() {
        let g = GroupDescriptor::free_abelian(1);
        let delta: SparseMeasure<f64> = SparseMeasure::delta_identity(&g);
        let plan = ConvolutionPlan::default();
        let s = return_series(&delta, &[2, 4, 8, 16], &plan).unwrap();
        for e in &s.entries {
            assert!((e.value - 1.0).abs() < 1e-15);
        }
        let (slope, _) = fit_exponent(&s, FitWindow::Range(2, 16)).unwrap();
        assert!(slope.abs() < 1e-9);
    }

    #[test]
    fn non_symmetric_rejected() {
        let g = GroupDescriptor::free_abelian(1);
        let mu: SparseMeasure<f64> = SparseMeasure::from_table(
            &g,
            &[
                (Elem::from_coords(vec![1]), 0.7),
                (Elem::from_coords(vec![-1]), 0.3),
            ],
        )
        .unwrap();
        let plan = ConvolutionPlan::default();
        assert!(matches!(
            return_series(&mu, &[2, 4], &plan),
            Err(Error::Usage(_))
        ));
    }

    /// Dense no-pruning stepping oracle: returns mu^(2n)(0) for 2n in times.
    fn dense_stepping_oracle(
        mu: &SparseMeasure<f64>,
        radius: i64,
        times: &[u64],
    ) -> Vec<f64> {
        let max_steps = *times.iter().max().unwrap();
        let box_r = radius * max_steps as i64 + 1;
        let mut base = vec![0.0f64; (2 * radius + 1) as usize];
        for (e, &m) in mu.iter() {
            base[(e.coords()[0] + radius) as usize] = m;
        }
        let mut cur = vec![0.0f64; (2 * box_r + 1) as usize];
        cur[box_r as usize] = 1.0;
        let mut values = Vec::new();
        for t in 1..=max_steps {
            let mut next = vec![0.0f64; cur.len()];
            for (i, &v) in cur.iter().enumerate() {
                if v == 0.0 {
                    continue;
                }
                for (j, &w) in base.iter().enumerate() {
                    if w == 0.0 {
                        continue;
                    }
                    let k = i + j - radius as usize;
                    next[k] += v * w;
                }
            }
            cur = next;
            if times.contains(&t) {
                values.push(cur[box_r as usize]);
            }
        }
        values
    }

    #[test]
    fn series_matches_dense_oracle_on_mu_alpha() {
        // direct dense stepping oracle; long horizon at R = 10^3 plus a
        // short-horizon check at the heavier R = 10^4 truncation
        let g = GroupDescriptor::free_abelian(1);
        for (radius, times) in [
            (1000u32, vec![2u64, 4, 8, 16, 32]),
            (10_000, vec![2, 4]),
        ] {
            let metric = crate::WordMetric::new(&g, radius).unwrap();
            let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, radius).unwrap();
            let plan = ConvolutionPlan {
                max_support_size: 400_000,
                cert_budget: 1e-3,
                ..Default::default()
            };
            let s = return_series(&mu, &times, &plan).unwrap();
            let oracle = dense_stepping_oracle(&mu, radius as i64, &times);
            for (e, want) in s.entries.iter().zip(oracle) {
                assert!(
                    e.lower <= want + 1e-13 && want <= e.upper + 1e-13,
                    "R={radius} time {}: certified [{}, {}] vs oracle {want}",
                    e.time,
                    e.lower,
                    e.upper
                );
                assert!(
                    (e.value - want).abs() / want < 1e-4,
                    "R={radius} time {}: {} vs {want}",
                    e.time,
                    e.value
                );
            }
        }
    }

    #[test]
    fn lazy_walk_slope_is_half() {
        // delta-mixture lazy simple walk: slope -1/2 over 2n in [2^6, 2^12]
        let g = GroupDescriptor::free_abelian(1);
        let mu: SparseMeasure<f64> = SparseMeasure::from_table(
            &g,
            &[
                (Elem::from_coords(vec![0]), 0.5),
                (Elem::from_coords(vec![1]), 0.25),
                (Elem::from_coords(vec![-1]), 0.25),
            ],
        )
        .unwrap();
        let plan = ConvolutionPlan {
            max_support_size: 100_000,
            ..Default::default()
        };
        let times: Vec<u64> = (6..=12).map(|e| 1u64 << e).collect();
        let s = return_series(&mu, &times, &plan).unwrap();
        let (slope, _) = fit_exponent(&s, FitWindow::Range(64, 4096)).unwrap();
        assert!(
            (slope + 0.5).abs() < 0.1,
            "lazy walk slope {slope}, want -0.5 +- 0.1"
        );
    }

    #[test]
    fn monotone_even_values() {
        let g = GroupDescriptor::free_abelian(1);
        let metric = crate::WordMetric::new(&g, 300).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 300).unwrap();
        let plan = ConvolutionPlan {
            max_support_size: 100_000,
            ..Default::default()
        };
        let times: Vec<u64> = (1..=8).map(|e| 1u64 << e).collect();
        let s = return_series(&mu, &times, &plan).unwrap();
        for w in s.entries.windows(2) {
            assert!(
                w[1].value <= w[0].upper,
                "series must be non-increasing within certified error"
            );
        }
    }

    #[test]
    fn squaring_consistency() {
        // power(mu, 2n)(e) equals sum_x power(mu, n)(x)^2 within certificates
        let g = GroupDescriptor::free_abelian(1);
        let metric = crate::WordMetric::new(&g, 500).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 500).unwrap();
        let plan = ConvolutionPlan::default();
        let p8 = CertifiedPower::compute(&mu, 8, &plan).unwrap().into_measure();
        let p16 = CertifiedPower::compute(&mu, 16, &plan)
            .unwrap()
            .into_measure();
        let sum_sq: f64 = p8.iter().map(|(_, &v)| v * v).sum();
        let direct = p16.mass(&g.identity());
        let d = p16.dropped_mass() + p8.dropped_mass();
        assert!((sum_sq - direct).abs() <= d + 1e-12);
    }

    #[test]
    fn non_dyadic_times() {
        let plan = ConvolutionPlan::default();
        let s = return_series(&simple_walk(), &[2, 4, 6, 12], &plan).unwrap();
        // 2n = 6: mu^(3) then sum of squares... binomial C(6,3)/2^6 = 20/64
        let e6 = s.entries.iter().find(|e| e.time == 6).unwrap();
        assert!((e6.value - 20.0 / 64.0).abs() < 1e-15);
        let e12 = s.entries.iter().find(|e| e.time == 12).unwrap();
        // C(12,6)/2^12 = 924/4096
        assert!((e12.value - 924.0 / 4096.0).abs() < 1e-15);
    }

    #[test]
    fn fit_refuses_wide_intervals() {
        let series = ReturnSeries {
            label: "test".into(),
            entries: (1..=6u64)
                .map(|k| ReturnEntry {
                    time: 2 * k,
                    value: 1.0 / k as f64,
                    lower: 1.0 / k as f64,
                    upper: 1.0 / k as f64 * 1.5,
                })
                .collect(),
        };
        assert!(matches!(
            fit_exponent(&series, FitWindow::Range(2, 12)),
            Err(Error::IntervalsTooWide(_))
        ));
    }

    #[test]
    fn near_diagonal_lazy_walk() {
        // lazy simple walk on Z with alpha replaced by 2: ratios within a
        // factor-4 bracket over |g| <= sqrt(eta n)
        let g = GroupDescriptor::free_abelian(1);
        let metric = crate::WordMetric::new(&g, 4000).unwrap();
        let mu: SparseMeasure<f64> = SparseMeasure::from_table(
            &g,
            &[
                (Elem::from_coords(vec![0]), 0.5),
                (Elem::from_coords(vec![1]), 0.25),
                (Elem::from_coords(vec![-1]), 0.25),
            ],
        )
        .unwrap();
        let plan = ConvolutionPlan {
            max_support_size: 100_000,
            ..Default::default()
        };
        let rep = near_diagonal_check(&mu, &metric, 1024, 1.0, 2.0, &plan).unwrap();
        assert!(rep.max_relative_error < 0.1);
        assert!(rep.ratio() < 4.0, "ratio {}", rep.ratio());
        // g = e is included and matches the diagonal value
        let diag = rep.rows.iter().find(|r| r.length == 0).unwrap();
        let p = CertifiedPower::compute(&mu, 1024, &plan).unwrap();
        assert_eq!(diag.value, p.value_at(&g.identity()));
    }
}
