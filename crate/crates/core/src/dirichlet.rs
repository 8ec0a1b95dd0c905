//! Dirichlet forms, shift energies, pseudo-Poincare ratio scans, spectral
//! profile upper bounds and Dirichlet-form comparisons.

use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor, LengthStatus, WordMetric};
use crate::measures::SparseMeasure;
use crate::scalar::Scalar;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustc_hash::FxHashMap;

/// A finitely supported real test function on the group.
#[derive(Clone)]
pub struct TestFunction<F: Scalar> {
    pub label: String,
    values: FxHashMap<Elem, F>,
}

impl<F: Scalar> TestFunction<F> {
    pub fn from_entries(label: impl Into<String>, entries: Vec<(Elem, F)>) -> Self {
        let mut values = FxHashMap::default();
        for (g, v) in entries {
            if v != F::zero() {
                values.insert(g, v);
            }
        }
        TestFunction {
            label: label.into(),
            values,
        }
    }

    pub fn indicator(metric: &WordMetric, r: u32) -> Result<Self> {
        let entries = metric
            .ball(r)?
            .into_iter()
            .map(|g| (g, F::one()))
            .collect();
        Ok(Self::from_entries(format!("indicator_B({r})"), entries))
    }

    /// Tent (R - |x|)_+ in the word metric.
    pub fn tent(metric: &WordMetric, r: u32) -> Result<Self> {
        let mut entries = Vec::new();
        for k in 0..r {
            for g in metric.sphere(k)? {
                entries.push((g, F::of_f64((r - k) as f64)));
            }
        }
        Ok(Self::from_entries(format!("tent({r})"), entries))
    }

    /// zeta_R(g) = (R - ||g||^w*)_+ for a caller-supplied norm. The
    /// candidate set must cover {norm^w* < R}; the outermost candidates are
    /// required to lie outside the support as a completeness check.
    pub fn zeta<N>(
        metric: &WordMetric,
        norm: N,
        w_star: f64,
        r: f64,
    ) -> Result<Self>
    where
        N: Fn(&Elem) -> f64,
    {
        let cap = metric.radius_cap();
        for g in metric.sphere(cap)? {
            if norm(&g).powf(w_star) < r {
                return Err(Error::usage(
                    "zeta support may exceed the enumerated range; enlarge the radius cap",
                ));
            }
        }
        let mut entries = Vec::new();
        for k in 0..=cap {
            for g in metric.sphere(k)? {
                let v = r - norm(&g).powf(w_star);
                if v > 0.0 {
                    entries.push((g, F::of_f64(v)));
                }
            }
        }
        Ok(Self::from_entries(format!("zeta({r})"), entries))
    }

    /// Seeded random +-1 functions on the ball B(r).
    pub fn random_signs(
        metric: &WordMetric,
        r: u32,
        count: usize,
        seed: u64,
    ) -> Result<Vec<Self>> {
        let mut ball = metric.ball(r)?;
        ball.sort();
        let mut out = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
            let entries: Vec<(Elem, F)> = ball
                .iter()
                .map(|g| {
                    let s = if rng.gen::<bool>() { F::one() } else { -F::one() };
                    (g.clone(), s)
                })
                .collect();
            out.push(Self::from_entries(format!("random_signs#{i}(B{r})"), entries));
        }
        Ok(out)
    }

    pub fn support_size(&self) -> usize {
        self.values.len()
    }
    pub fn is_zero(&self) -> bool {
        self.values.is_empty()
    }
    pub fn value(&self, g: &Elem) -> F {
        self.values.get(g).copied().unwrap_or_else(F::zero)
    }
    pub fn norm_sq(&self) -> F {
        self.values.values().map(|v| *v * *v).sum()
    }
    pub fn scale(&self, c: F) -> Self {
        TestFunction {
            label: format!("{}*{}", c, self.label),
            values: self.values.iter().map(|(g, &v)| (g.clone(), c * v)).collect(),
        }
    }
    pub fn iter(&self) -> impl Iterator<Item = (&Elem, &F)> {
        self.values.iter()
    }
}

/// E_mu(f,f) = 1/2 sum_{x,y} |f(xy) - f(x)|^2 mu(y), computed exactly over
/// the supports as total_mass * ||f||^2 - sum_{x,z} f(x) f(z) mu(x^{-1} z).
pub fn dirichlet_form<F: Scalar>(mu: &SparseMeasure<F>, f: &TestFunction<F>) -> F {
    let group = mu.group();
    let m = mu.total_mass();
    let nf = f.norm_sq();
    let mut cross = F::zero();
    if f.support_size() * f.support_size() <= f.support_size() * mu.len() {
        // pair route over supp(f)^2
        for (x, &fx) in f.iter() {
            let xi = group.inv_unchecked(x);
            for (z, &fz) in f.iter() {
                let y = group.mul_unchecked(&xi, z);
                let w = mu.mass(&y);
                if w > F::zero() {
                    cross += fx * fz * w;
                }
            }
        }
    } else {
        for (x, &fx) in f.iter() {
            for (y, &w) in mu.iter() {
                let xy = group.mul_unchecked(x, y);
                let fxy = f.value(&xy);
                if fxy != F::zero() {
                    cross += fx * fxy * w;
                }
            }
        }
    }
    (m * nf - cross).max(F::zero())
}

/// sum_x |f(xh) - f(x)|^2, exactly: 2 ||f||^2 - 2 <f, f(.h)>.
pub fn shift_energy<F: Scalar>(
    group: &GroupDescriptor,
    f: &TestFunction<F>,
    h: &Elem,
) -> F {
    if group.is_identity(h) {
        return F::zero();
    }
    let mut cross = F::zero();
    for (x, &fx) in f.iter() {
        let xh = group.mul_unchecked(x, h);
        let v = f.value(&xh);
        if v != F::zero() {
            cross += fx * v;
        }
    }
    (F::of_f64(2.0) * (f.norm_sq() - cross)).max(F::zero())
}

#[derive(Clone, Debug)]
pub struct PPRow<F> {
    pub h: Vec<i64>,
    /// max over the family of shift_energy(f,h) / E_mu(f,f)
    pub best_ratio: F,
    pub normalizer: F,
    /// best_ratio / normalizer
    pub constant: F,
    /// a 0/0 was recorded as 0 for some family member
    pub zero_over_zero: bool,
}

#[derive(Clone, Debug)]
pub struct PPReport<F> {
    pub rows: Vec<PPRow<F>>,
    /// the empirical pseudo-Poincare constant: max over rows of `constant`
    pub max_constant: F,
}

/// Scans shift_energy(f,h) / (normalizer(h) * E_mu(f,f)) over the family and
/// the shift set. A zero Dirichlet form with nonzero shift energy is a data
/// error (the measure does not generate) and is reported as such.
pub fn pp_scan<F: Scalar, N>(
    mu: &SparseMeasure<F>,
    family: &[TestFunction<F>],
    shifts: &[Elem],
    normalizer: N,
) -> Result<PPReport<F>>
where
    N: Fn(&Elem) -> F,
{
    if family.is_empty() || shifts.is_empty() {
        return Err(Error::usage("pp_scan needs a nonempty family and shift set"));
    }
    let group = mu.group();
    let energies: Vec<F> = family.iter().map(|f| dirichlet_form(mu, f)).collect();
    let mut rows = Vec::with_capacity(shifts.len());
    let mut max_constant = F::zero();
    for h in shifts {
        let mut best = F::zero();
        let mut zz = false;
        for (f, &e) in family.iter().zip(&energies) {
            let s = shift_energy(group, f, h);
            if e <= F::zero() {
                if s > F::zero() {
                    return Err(Error::domain(format!(
                        "zero Dirichlet energy with nonzero shift energy for {}",
                        f.label
                    )));
                }
                zz = true;
                continue;
            }
            best = best.max(s / e);
        }
        let nrm = normalizer(h);
        let constant = if nrm > F::zero() { best / nrm } else { F::zero() };
        max_constant = max_constant.max(constant);
        rows.push(PPRow {
            h: h.coords().to_vec(),
            best_ratio: best,
            normalizer: nrm,
            constant,
            zero_over_zero: zz,
        });
    }
    Ok(PPReport { rows, max_constant })
}

/// One bucket of the spectral-profile upper bound.
#[derive(Clone, Debug)]
pub struct ProfilePoint<F> {
    pub support_size: usize,
    pub rayleigh: F,
    pub witness: String,
}

/// For each f the pair (#supp f, E/||f||^2); returns running minima over
/// support-size buckets, a certified upper bound for the spectral profile.
pub fn spectral_profile_upper<F: Scalar>(
    mu: &SparseMeasure<F>,
    family: &[TestFunction<F>],
) -> Result<Vec<ProfilePoint<F>>> {
    if family.is_empty() {
        return Err(Error::usage("spectral profile needs a nonempty family"));
    }
    let mut pts: Vec<ProfilePoint<F>> = Vec::new();
    for f in family {
        if f.is_zero() {
            continue;
        }
        let e = dirichlet_form(mu, f);
        let n2 = f.norm_sq();
        pts.push(ProfilePoint {
            support_size: f.support_size(),
            rayleigh: e / n2,
            witness: f.label.clone(),
        });
    }
    pts.sort_by(|a, b| {
        a.support_size
            .cmp(&b.support_size)
            .then(a.rayleigh.partial_cmp(&b.rayleigh).unwrap())
    });
    // running minimum: the bound at size v is the best member of size <= v
    let mut out: Vec<ProfilePoint<F>> = Vec::new();
    for p in pts {
        match out.last() {
            Some(last) if last.support_size == p.support_size => continue,
            Some(last) if p.rayleigh >= last.rayleigh => {
                let mut q = p.clone();
                q.rayleigh = last.rayleigh;
                q.witness = last.witness.clone();
                out.push(q);
            }
            _ => out.push(p),
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ZetaRow<F> {
    pub r: f64,
    pub part: usize,
    pub rayleigh: F,
    /// rayleigh * R^{1/w*}: bounded across R when the profile bound holds
    pub product: F,
}

/// The zeta_R test-function probe: for each R and each part nu_i, the ratio
/// E_{nu_i}(zeta_R)/||zeta_R||^2 and its product with R^{1/w*}.
pub fn zeta_test<F: Scalar, N>(
    parts: &[SparseMeasure<F>],
    metric: &WordMetric,
    norm: N,
    w_star: f64,
    r_list: &[f64],
) -> Result<Vec<ZetaRow<F>>>
where
    N: Fn(&Elem) -> f64,
{
    if parts.is_empty() {
        return Err(Error::usage("zeta test needs at least one measure part"));
    }
    let mut rows = Vec::new();
    for &r in r_list {
        let zeta: TestFunction<F> = TestFunction::zeta(metric, &norm, w_star, r)?;
        let n2 = zeta.norm_sq();
        for (i, nu) in parts.iter().enumerate() {
            let e = dirichlet_form(nu, &zeta);
            let ray = e / n2;
            rows.push(ZetaRow {
                r,
                part: i,
                rayleigh: ray,
                product: ray * F::of_f64(r.powf(1.0 / w_star)),
            });
        }
    }
    Ok(rows)
}

#[derive(Clone, Debug)]
pub struct FormComparison<F> {
    pub min_ratio: F,
    pub max_ratio: F,
    pub excluded_zero_denominators: usize,
}

/// [min, max] over the family of E_{mu1}(f,f) / E_{mu2}(f,f).
pub fn form_comparison<F: Scalar>(
    mu1: &SparseMeasure<F>,
    mu2: &SparseMeasure<F>,
    family: &[TestFunction<F>],
) -> Result<FormComparison<F>> {
    if mu1.group().name() != mu2.group().name() {
        return Err(Error::usage("form comparison across different groups"));
    }
    let mut min_ratio = F::infinity();
    let mut max_ratio = F::zero();
    let mut excluded = 0usize;
    for f in family {
        let e2 = dirichlet_form(mu2, f);
        if e2 <= F::zero() {
            excluded += 1;
            continue;
        }
        let e1 = dirichlet_form(mu1, f);
        let ratio = e1 / e2;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    if !min_ratio.is_finite() {
        return Err(Error::usage(
            "form comparison: every family member had zero denominator energy",
        ));
    }
    Ok(FormComparison {
        min_ratio,
        max_ratio,
        excluded_zero_denominators: excluded,
    })
}

/// The default probe family: ball indicators, tents, and seeded random sign
/// functions.
pub fn default_family<F: Scalar>(
    metric: &WordMetric,
    max_r: u32,
    random_count: usize,
    seed: u64,
) -> Result<Vec<TestFunction<F>>> {
    let mut family = Vec::new();
    let mut r = 0u32;
    while r <= max_r {
        family.push(TestFunction::indicator(metric, r)?);
        r = if r == 0 { 1 } else { r * 2 };
    }
    let mut t = 2u32;
    while t <= 2 * max_r.max(1) && t <= metric.radius_cap() {
        family.push(TestFunction::tent(metric, t)?);
        t *= 2;
    }
    let rb = max_r.min(64);
    family.extend(TestFunction::random_signs(metric, rb, random_count, seed)?);
    Ok(family)
}

/// Word lengths needed by pp_scan normalizers.
pub fn word_length_pow<F: Scalar>(metric: &WordMetric, alpha: f64) -> impl Fn(&Elem) -> F + '_ {
    move |h: &Elem| match metric.word_length(h) {
        LengthStatus::Reached(l) => F::of_f64((l as f64).powf(alpha)),
        LengthStatus::Unreached => F::infinity(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::GroupDescriptor;
    use crate::measures::build_mu_alpha;

    fn z() -> GroupDescriptor {
        GroupDescriptor::free_abelian(1)
    }

    fn simple_walk() -> SparseMeasure<f64> {
        SparseMeasure::from_table(
            &z(),
            &[
                (Elem::from_coords(vec![1]), 0.5),
                (Elem::from_coords(vec![-1]), 0.5),
            ],
        )
        .unwrap()
    }

    fn delta_at_zero() -> TestFunction<f64> {
        TestFunction::from_entries("1_0", vec![(Elem::from_coords(vec![0]), 1.0)])
    }

    #[test]
    fn zero_function_has_zero_energy() {
        let f: TestFunction<f64> = TestFunction::from_entries("zero", vec![]);
        assert_eq!(dirichlet_form(&simple_walk(), &f), 0.0);
    }

    #[test]
    fn simple_walk_point_energy_is_one() {
        // direct summation over the nonzero terms gives exactly 1
        let e = dirichlet_form(&simple_walk(), &delta_at_zero());
        assert!((e - 1.0).abs() < 1e-15, "E = {e}");
    }

    #[test]
    fn energy_is_quadratic_and_linear_in_measure() {
        let g = z();
        let metric = WordMetric::new(&g, 100).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 100).unwrap();
        let nu = simple_walk();
        let f = TestFunction::tent(&metric, 8).unwrap();
        let e_mu = dirichlet_form(&mu, &f);
        let e_nu = dirichlet_form(&nu, &f);
        assert!(e_mu >= 0.0);
        // E(cf) = c^2 E(f)
        let cf = f.scale(3.0);
        assert!((dirichlet_form(&mu, &cf) - 9.0 * e_mu).abs() < 1e-10 * e_mu.max(1.0));
        // E_{a mu + b nu} = a E_mu + b E_nu
        let mix = crate::measures::convex_combination(&[(0.5, mu), (0.5, nu)]).unwrap();
        let e_mix = dirichlet_form(&mix, &f);
        assert!((e_mix - 0.5 * e_mu - 0.5 * e_nu).abs() < 1e-12 * e_mix.max(1.0));
    }

    #[test]
    fn shift_energy_identities() {
        let g = z();
        let f = delta_at_zero();
        // h = e -> 0
        assert_eq!(shift_energy(&g, &f, &g.identity()), 0.0);
        // f = 1_0, h = 1 -> two boundary terms
        let s = shift_energy(&g, &f, &Elem::from_coords(vec![1]));
        assert!((s - 2.0).abs() < 1e-15);
        // h vs h^{-1}
        let metric = WordMetric::new(&g, 64).unwrap();
        let tent: TestFunction<f64> = TestFunction::tent(&metric, 16).unwrap();
        for h in [3i64, 7, 12] {
            let a = shift_energy(&g, &tent, &Elem::from_coords(vec![h]));
            let b = shift_energy(&g, &tent, &Elem::from_coords(vec![-h]));
            assert!((a - b).abs() < 1e-12, "h={h}");
        }
    }

    #[test]
    fn factorization_inequality() {
        // shift(f, h) <= k sum_i shift(f, h_i) for h = h_1 ... h_k
        let g = GroupDescriptor::heisenberg();
        let metric = WordMetric::new(&g, 6).unwrap();
        let f = TestFunction::<f64>::tent(&metric, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let ball = metric.ball(2).unwrap();
        for _ in 0..100 {
            let k = rng.gen_range(2..=4usize);
            let parts: Vec<Elem> = (0..k)
                .map(|_| ball[rng.gen_range(0..ball.len())].clone())
                .collect();
            let mut h = g.identity();
            for p in &parts {
                h = g.mul_unchecked(&h, p);
            }
            let lhs = shift_energy(&g, &f, &h);
            let rhs: f64 = parts.iter().map(|p| shift_energy(&g, &f, p)).sum();
            assert!(
                lhs <= k as f64 * rhs + 1e-9,
                "lhs {lhs} > {k} * {rhs}"
            );
        }
    }

    #[test]
    fn tent_ratio_bounded_independent_of_r() {
        let g = z();
        let h = Elem::from_coords(vec![1]);
        let mu = simple_walk();
        let mut ratios = Vec::new();
        for r in [8u32, 16, 32, 64, 128] {
            let metric = WordMetric::new(&g, 2 * r).unwrap();
            let tent = TestFunction::<f64>::tent(&metric, r).unwrap();
            let e = dirichlet_form(&mu, &tent);
            let s = shift_energy(&g, &tent, &h);
            ratios.push(s / e);
        }
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 1.5, "tent ratios {ratios:?}");
    }

    #[test]
    fn pp_scan_on_mu_alpha() {
        // the truncation radius matters at the large-h end: far-tail mass
        // adds Dirichlet energy that transports nothing at scale h
        let g = z();
        let metric = WordMetric::new(&g, 1024).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 256).unwrap();
        let family = default_family::<f64>(&metric, 128, 100, 7).unwrap();
        let shifts: Vec<Elem> = (0..=6)
            .map(|e| Elem::from_coords(vec![1i64 << e]))
            .collect();
        let norm = word_length_pow::<f64>(&metric, 1.0);
        let rep = pp_scan(&mu, &family, &shifts, norm).unwrap();
        assert_eq!(rep.rows.len(), 7);
        let consts: Vec<f64> = rep.rows.iter().map(|r| r.constant).collect();
        let max = consts.iter().cloned().fold(0.0, f64::max);
        let min = consts.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(
            max / min < 4.0,
            "pp constants vary by more than 4x: {consts:?}"
        );
        // identity shift has ratio 0
        let rep0 = pp_scan(&mu, &family, &[g.identity()], |_| 1.0f64).unwrap();
        assert_eq!(rep0.rows[0].best_ratio, 0.0);
    }

    #[test]
    fn spectral_profile_monotone_and_point_value() {
        let g = z();
        let metric = WordMetric::new(&g, 200).unwrap();
        let mu = simple_walk();
        let family = default_family::<f64>(&metric, 32, 10, 3).unwrap();
        let profile = spectral_profile_upper(&mu, &family).unwrap();
        // f = 1_e appears: Lambda(1) <= 1 for the simple walk
        let first = profile.iter().find(|p| p.support_size == 1).unwrap();
        assert!((first.rayleigh - 1.0).abs() < 1e-12);
        for w in profile.windows(2) {
            assert!(w[1].rayleigh <= w[0].rayleigh + 1e-15);
        }
    }

    #[test]
    fn zeta_rows_bounded_on_z() {
        // single letter at alpha = 1: w* = 1, the norm is |x| and zeta is a
        // tent; products must stay in a tight bracket across R
        let g = z();
        let metric = WordMetric::new(&g, 2000).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 2000).unwrap();
        let rows = zeta_test(
            std::slice::from_ref(&mu),
            &metric,
            |h: &Elem| h.coords()[0].unsigned_abs() as f64,
            1.0,
            &[8.0, 16.0, 32.0, 64.0],
        )
        .unwrap();
        let prods: Vec<f64> = rows.iter().map(|r| r.product).collect();
        let max = prods.iter().cloned().fold(0.0, f64::max);
        let min = prods.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(max / min < 4.0, "zeta products {prods:?}");
    }

    #[test]
    fn zeta_degenerate_r_is_point_mass() {
        let g = z();
        let metric = WordMetric::new(&g, 100).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 100).unwrap();
        let zeta: TestFunction<f64> =
            TestFunction::zeta(&metric, |h| h.coords()[0].unsigned_abs() as f64, 1.0, 0.5)
                .unwrap();
        assert_eq!(zeta.support_size(), 1);
        let ray = dirichlet_form(&mu, &zeta) / zeta.norm_sq();
        let want: f64 = 1.0 - mu.mass(&g.identity());
        assert!((ray - want).abs() < 1e-12);
    }

    #[test]
    fn zeta_norm_lower_bound() {
        // ||zeta_R||^2 >= (R/2)^2 #{g : norm^{w*} <= R/2}
        let g = z();
        let metric = WordMetric::new(&g, 300).unwrap();
        let norm = |h: &Elem| h.coords()[0].unsigned_abs() as f64;
        for r in [8.0f64, 32.0, 64.0] {
            let zeta: TestFunction<f64> = TestFunction::zeta(&metric, norm, 1.0, r).unwrap();
            let count = metric.ball((r / 2.0) as u32).unwrap().len() as f64;
            assert!(zeta.norm_sq() >= (r / 2.0) * (r / 2.0) * count * 0.999);
        }
    }

    #[test]
    fn form_comparison_identities() {
        let g = z();
        let metric = WordMetric::new(&g, 100).unwrap();
        let mu: SparseMeasure<f64> = build_mu_alpha(&metric, 1.0, 100).unwrap();
        let family = default_family::<f64>(&metric, 16, 10, 11).unwrap();
        let same = form_comparison(&mu, &mu, &family).unwrap();
        assert!((same.min_ratio - 1.0).abs() < 1e-12);
        assert!((same.max_ratio - 1.0).abs() < 1e-12);

        // mu1 = 1/2 mu + 1/2 delta_e: delta contributes zero energy
        let delta: SparseMeasure<f64> = SparseMeasure::delta_identity(&g);
        let mix =
            crate::measures::convex_combination(&[(0.5, mu.clone()), (0.5, delta)]).unwrap();
        let half = form_comparison(&mix, &mu, &family).unwrap();
        assert!((half.min_ratio - 0.5).abs() < 1e-12);
        assert!((half.max_ratio - 0.5).abs() < 1e-12);
    }
}
