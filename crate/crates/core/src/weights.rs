//! Weight systems on generating letters, effective weights on adapted
//! Mal'cev bases, the volume exponent gamma, weighted quasi-norm upper
//! bounds, and weighted-ball counting.
//!
//! Letters from the plain generating set carry weight 1/2; letters from the
//! heavy parts carry 1/alpha_i. Weights propagate along commutators by
//! w([c1,c2]) = w(c1) + w(c2), and each basis slot of the nilpotent part
//! takes the maximum over all routes that reach it. All weight arithmetic is
//! exact rational.

use crate::error::{Error, Result};
use crate::fit::loglog_fit;
use crate::group::{Elem, GroupDescriptor, GroupKind};
use crate::polycyclic::MalcevBasis;
use num_rational::Ratio;

pub type Weight = Ratio<i64>;

/// Parses "p/q", "p", or a short decimal like "0.5" into an exact rational.
pub fn parse_ratio(s: &str) -> Result<Weight> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: i64 = p
            .trim()
            .parse()
            .map_err(|_| Error::usage(format!("bad rational {s:?}")))?;
        let q: i64 = q
            .trim()
            .parse()
            .map_err(|_| Error::usage(format!("bad rational {s:?}")))?;
        if q == 0 {
            return Err(Error::usage("zero denominator"));
        }
        return Ok(Ratio::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let digits = frac.len() as u32;
        if digits > 9 {
            return Err(Error::usage("decimal too long for an exact rational"));
        }
        let scale = 10i64.pow(digits);
        let int: i64 = if int.is_empty() {
            0
        } else {
            int.parse()
                .map_err(|_| Error::usage(format!("bad decimal {s:?}")))?
        };
        let frac: i64 = if frac.is_empty() {
            0
        } else {
            frac.parse()
                .map_err(|_| Error::usage(format!("bad decimal {s:?}")))?
        };
        let sign = if s.starts_with('-') { -1 } else { 1 };
        return Ok(Ratio::new(int * scale + sign * frac, scale));
    }
    let p: i64 = s
        .parse()
        .map_err(|_| Error::usage(format!("bad rational {s:?}")))?;
    Ok(Ratio::from_integer(p))
}

#[derive(Clone, Debug)]
pub struct Letter {
    pub elem: Elem,
    pub weight: Weight,
    /// None for the plain generating set S0
    pub part: Option<usize>,
    pub label: String,
}

/// The formal union of S0 (weight 1/2) with the heavy parts S_i
/// (weight 1/alpha_i). Repetitions are allowed and harmless.
#[derive(Clone, Debug)]
pub struct WeightSystem {
    pub group: GroupDescriptor,
    pub letters: Vec<Letter>,
}

impl WeightSystem {
    /// Largest letter weight (the w* of the zeta test scaling).
    pub fn w_star(&self) -> Weight {
        self.letters
            .iter()
            .map(|l| l.weight)
            .max()
            .unwrap_or_else(|| Ratio::new(1, 2))
    }
}

/// Weights 1/2 on S0 and 1/alpha_i on each part; alphas must be in (0,2).
pub fn build_weight_system(
    group: &GroupDescriptor,
    s0: &[Elem],
    parts: &[(Vec<Elem>, Weight)],
) -> Result<WeightSystem> {
    let half = Ratio::new(1, 2);
    let mut letters = Vec::new();
    for (i, e) in s0.iter().enumerate() {
        letters.push(Letter {
            elem: e.clone(),
            weight: half,
            part: None,
            label: format!("s0#{i}"),
        });
    }
    for (pi, (tuple, alpha)) in parts.iter().enumerate() {
        if *alpha <= Ratio::new(0, 1) || *alpha >= Ratio::new(2, 1) {
            return Err(Error::usage(format!(
                "alpha must be in (0,2), got {alpha}"
            )));
        }
        let w = alpha.recip();
        for (i, e) in tuple.iter().enumerate() {
            letters.push(Letter {
                elem: e.clone(),
                weight: w,
                part: Some(pi),
                label: format!("part{pi}#{i}"),
            });
        }
    }
    Ok(WeightSystem {
        group: group.clone(),
        letters,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// reached by a letter of the weight system
    Letter(String),
    /// reached only through commutators of other slots
    Commutator(usize, usize),
    /// reached only by the nilpotent part's own generating set at weight 1/2
    Baseline,
}

/// Effective weight per Mal'cev-basis slot of the nilpotent part: the
/// fixpoint of max-propagation over letters, the baseline 1/2 from the
/// N-generating set, and the commutator rule.
#[derive(Clone, Debug)]
pub struct EffectiveWeights {
    pub slot_weights: Vec<Weight>,
    pub provenance: Vec<Provenance>,
    pub basis_labels: Vec<String>,
}

/// Central-series depth per slot, for the adaptedness check.
fn slot_levels(group: &GroupDescriptor, n_slots: usize) -> Vec<u32> {
    match group.kind() {
        GroupKind::FreeAbelian(_) | GroupKind::DihedralTimesZ => vec![1; n_slots],
        GroupKind::Heisenberg => vec![1, 1, 2],
        // basis order (M14, M24, M34, M13, M23, M12)
        GroupKind::Unipotent4 => vec![3, 2, 1, 2, 1, 1],
        GroupKind::FreeNilpotent(nb) => {
            nb.slot_lengths().iter().map(|&l| l as u32).collect()
        }
    }
}

/// The adapted Mal'cev data of the nilpotent part N: its basis, commutator
/// table and slot levels. For D_inf x Z, N = <uv> x Z.
pub struct AdaptedStructure {
    pub group: GroupDescriptor,
    pub basis: MalcevBasis,
    pub levels: Vec<u32>,
}

impl AdaptedStructure {
    pub fn for_group(group: &GroupDescriptor) -> Result<AdaptedStructure> {
        let basis = MalcevBasis::for_group(group)?;
        let levels = slot_levels(group, basis.len());
        Ok(AdaptedStructure {
            group: group.clone(),
            basis,
            levels,
        })
    }

    /// The slot fed by a letter: letters must be (powers of) single basis
    /// elements of N. Letters outside N contribute through their square when
    /// it lands in N (index-two cosets, e.g. the dihedral reflections);
    /// letters of finite order contribute nothing.
    fn letter_slot(&self, e: &Elem) -> Result<Option<usize>> {
        if self.group.is_identity(e) {
            return Ok(None);
        }
        match self.basis.coordinates(e) {
            Ok(coords) => match single_slot(&coords) {
                Some(k) => Ok(Some(k)),
                None => Err(Error::usage(
                    "non-adapted letter: its Mal'cev coordinates mix basis slots",
                )),
            },
            Err(_) => {
                // outside N: reduce through the square
                let sq = self.group.mul_unchecked(e, e);
                if self.group.is_identity(&sq) {
                    return Ok(None); // finite order: no N contribution
                }
                match self.basis.coordinates(&sq) {
                    Ok(coords) => match single_slot(&coords) {
                        Some(k) => Ok(Some(k)),
                        None => Err(Error::usage(
                            "non-adapted letter: square mixes basis slots",
                        )),
                    },
                    Err(_) => Err(Error::usage(
                        "letter neither lies in N nor squares into it",
                    )),
                }
            }
        }
    }
}

fn single_slot(coords: &[i64]) -> Option<usize> {
    let mut slot = None;
    for (k, &c) in coords.iter().enumerate() {
        if c != 0 {
            if slot.is_some() {
                return None;
            }
            slot = Some(k);
        }
    }
    slot
}

/// Fixpoint of the weight propagation. Refuses non-adapted bases with a
/// certificate naming the escaping commutator.
pub fn propagate_weights(
    ws: &WeightSystem,
    adapted: &AdaptedStructure,
) -> Result<EffectiveWeights> {
    let n = adapted.basis.len();
    let half = Ratio::new(1i64, 2);
    // adaptedness: level([u_i, u_j]) must exceed both factor levels
    for ((i, j), coords) in adapted.basis.commutator_table() {
        for (k, &c) in coords.iter().enumerate() {
            if c != 0 && adapted.levels[k] < adapted.levels[*i] + adapted.levels[*j] {
                return Err(Error::usage(format!(
                    "non-adapted basis: [{}, {}] escapes into slot {} of level {}",
                    adapted.basis.labels()[*i],
                    adapted.basis.labels()[*j],
                    adapted.basis.labels()[k],
                    adapted.levels[k],
                )));
            }
        }
    }
    // baseline: the nilpotent part's own generators at weight 1/2
    let mut w: Vec<Weight> = vec![half; n];
    let mut prov: Vec<Provenance> = vec![Provenance::Baseline; n];
    for letter in &ws.letters {
        if let Some(k) = adapted.letter_slot(&letter.elem)? {
            if letter.weight > w[k] {
                w[k] = letter.weight;
                prov[k] = Provenance::Letter(letter.label.clone());
            }
        }
    }
    // commutator fixpoint
    loop {
        let mut changed = false;
        for ((i, j), coords) in adapted.basis.commutator_table() {
            let cand = w[*i] + w[*j];
            for (k, &c) in coords.iter().enumerate() {
                if c != 0 && cand > w[k] {
                    w[k] = cand;
                    prov[k] = Provenance::Commutator(*i, *j);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    Ok(EffectiveWeights {
        slot_weights: w,
        provenance: prov,
        basis_labels: adapted.basis.labels().to_vec(),
    })
}

/// The exponent gamma = sum of slot weights = sum over the achievable-weight
/// ladder of w_i * r_i.
#[derive(Clone, Debug)]
pub struct GammaReport {
    /// (weight, torsion-free rank at that weight), ascending
    pub ladder: Vec<(Weight, u32)>,
    pub gamma: Weight,
    pub slot_weights: Vec<Weight>,
}

impl GammaReport {
    pub fn gamma_f64(&self) -> f64 {
        *self.gamma.numer() as f64 / *self.gamma.denom() as f64
    }

    /// JSON with exact rationals as numerator/denominator pairs.
    pub fn to_json(&self) -> String {
        let ladder: Vec<String> = self
            .ladder
            .iter()
            .map(|(w, r)| {
                format!(
                    "{{\"weight\":[{},{}],\"rank\":{}}}",
                    w.numer(),
                    w.denom(),
                    r
                )
            })
            .collect();
        let slots: Vec<String> = self
            .slot_weights
            .iter()
            .map(|w| format!("[{},{}]", w.numer(), w.denom()))
            .collect();
        format!(
            "{{\"gamma\":[{},{}],\"ladder\":[{}],\"slot_weights\":[{}]}}",
            self.gamma.numer(),
            self.gamma.denom(),
            ladder.join(","),
            slots.join(",")
        )
    }
}

pub fn gamma(eff: &EffectiveWeights) -> GammaReport {
    let mut gamma = Ratio::new(0i64, 1);
    for w in &eff.slot_weights {
        gamma += *w;
    }
    let mut ladder: Vec<(Weight, u32)> = Vec::new();
    let mut sorted = eff.slot_weights.clone();
    sorted.sort();
    for w in sorted {
        match ladder.last_mut() {
            Some((lw, r)) if *lw == w => *r += 1,
            _ => ladder.push((w, 1)),
        }
    }
    GammaReport {
        ladder,
        gamma,
        slot_weights: eff.slot_weights.clone(),
    }
}

/// Upper bound on the weighted quasi-norm via the adapted decomposition
/// g = u_1^{x_1} ... u_n^{x_n}: max_i |x_i|^{1/w_i}. Elements outside N
/// (dihedral coset) pay one extra unit for the coset representative.
pub fn weighted_norm_upper(
    g: &Elem,
    adapted: &AdaptedStructure,
    eff: &EffectiveWeights,
) -> Result<f64> {
    let (coords, coset_extra) = match adapted.basis.coordinates(g) {
        Ok(c) => (c, 0.0),
        Err(_) => {
            // strip the dihedral reflection: g = n * u with n in N
            if let GroupKind::DihedralTimesZ = adapted.group.kind() {
                let c = g.coords();
                let n_part = Elem::from_coords(vec![c[0], 0, c[2]]);
                (adapted.basis.coordinates(&n_part)?, 1.0)
            } else {
                return Err(Error::domain("element outside the coordinatizable range"));
            }
        }
    };
    let mut best = 0.0f64;
    for (k, &x) in coords.iter().enumerate() {
        if x != 0 {
            let w = &eff.slot_weights[k];
            let exponent = *w.denom() as f64 / *w.numer() as f64;
            best = best.max((x.abs() as f64).powf(exponent));
        }
    }
    Ok(best + coset_extra)
}

/// floor(r^{p/q}) for integer r >= 0, exactly.
fn floor_pow(r: u64, w: Weight) -> u64 {
    let p = *w.numer();
    let q = *w.denom();
    assert!(p > 0 && q > 0);
    if r == 0 {
        return 0;
    }
    let target = (r as u128).pow(p as u32);
    // integer q-th root of target
    let mut x = (target as f64).powf(1.0 / q as f64) as u128 + 2;
    while x.pow(q as u32) > target {
        x -= 1;
    }
    x as u64
}

/// Exact count of distinct elements u_1^{x_1} ... u_n^{x_n} with
/// |x_i| <= R^{w_i}: the adapted-box model of the weighted ball. Mal'cev
/// normal forms are unique, so the count is a product of ranges.
pub fn weighted_ball_count(
    r: f64,
    eff: &EffectiveWeights,
    budget: u64,
) -> Result<u64> {
    if r < 1.0 {
        return Ok(1);
    }
    let mut count: u64 = 1;
    let whole = r.floor() as u64;
    let exact_integer = (r - whole as f64).abs() < 1e-12;
    for w in &eff.slot_weights {
        let range = if exact_integer {
            floor_pow(whole, *w)
        } else {
            r.powf(*w.numer() as f64 / *w.denom() as f64).floor() as u64
        };
        count = count
            .checked_mul(2 * range + 1)
            .filter(|c| *c <= budget)
            .ok_or(Error::Budget {
                what: "weighted ball enumeration",
                used: u64::MAX,
                limit: budget,
            })?;
    }
    Ok(count)
}

/// OLS slope of log count against log R over the given radii.
pub fn volume_exponent_fit(
    radii: &[f64],
    eff: &EffectiveWeights,
    budget: u64,
) -> Result<f64> {
    if radii.len() < 4 {
        return Err(Error::usage("volume fit needs at least 4 radii"));
    }
    let counts: Result<Vec<f64>> = radii
        .iter()
        .map(|&r| weighted_ball_count(r, eff, budget).map(|c| c as f64))
        .collect();
    let (slope, _) = loglog_fit(radii, &counts?);
    Ok(slope)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ratio(p: i64, q: i64) -> Weight {
        Ratio::new(p, q)
    }

    #[test]
    fn parse_ratios() {
        assert_eq!(parse_ratio("1/2").unwrap(), ratio(1, 2));
        assert_eq!(parse_ratio("3").unwrap(), ratio(3, 1));
        assert_eq!(parse_ratio("0.5").unwrap(), ratio(1, 2));
        assert_eq!(parse_ratio("1.5").unwrap(), ratio(3, 2));
        assert!(parse_ratio("x").is_err());
        assert!(parse_ratio("1/0").is_err());
    }

    #[test]
    fn weight_system_basics() {
        let g = GroupDescriptor::free_abelian(2);
        let gens = g.generators().to_vec();
        // single part at alpha = 1: all part letters weight 1
        let ws = build_weight_system(&g, &[], &[(gens.clone(), ratio(1, 1))]).unwrap();
        assert!(ws.letters.iter().all(|l| l.weight == ratio(1, 1)));
        // alpha near 2 gives weights near 1/2
        let ws = build_weight_system(&g, &[], &[(gens.clone(), ratio(19, 10))]).unwrap();
        assert!(ws.letters.iter().all(|l| l.weight == ratio(10, 19)));
        // out of range
        assert!(build_weight_system(&g, &[], &[(gens, ratio(2, 1))]).is_err());
    }

    #[test]
    fn abelian_effective_weights_are_letter_weights() {
        let g = GroupDescriptor::free_abelian(3);
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let gens = g.generators().to_vec();
        let ws = build_weight_system(&g, &[], &[(gens, ratio(4, 3))]).unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        assert!(eff.slot_weights.iter().all(|w| *w == ratio(3, 4)));
        let rep = gamma(&eff);
        assert_eq!(rep.gamma, ratio(9, 4)); // k / alpha = 3 / (4/3)
    }

    #[test]
    fn heisenberg_propagation_and_gamma() {
        let g = GroupDescriptor::heisenberg();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let basis = adapted.basis.basis().to_vec();
        for alpha in [ratio(1, 2), ratio(1, 1), ratio(3, 2)] {
            let ws = build_weight_system(&g, &[], &[(basis.clone(), alpha)]).unwrap();
            let eff = propagate_weights(&ws, &adapted).unwrap();
            let w = alpha.recip();
            assert_eq!(eff.slot_weights[0], w);
            assert_eq!(eff.slot_weights[1], w);
            assert_eq!(eff.slot_weights[2], w + w, "central slot gets 2/alpha");
            assert_eq!(
                eff.provenance[2],
                Provenance::Commutator(0, 1),
                "{:?}",
                eff.provenance
            );
            let rep = gamma(&eff);
            assert_eq!(rep.gamma, ratio(4, 1) / alpha, "gamma = 4/alpha");
        }
    }

    #[test]
    fn dihedral_gamma_is_half_plus_inverse_alpha() {
        let g = GroupDescriptor::dihedral_times_z();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let u = g.generators()[0].clone();
        let v = g.generators()[1].clone();
        let z = g.generators()[2].clone();
        for alpha in [ratio(1, 2), ratio(1, 1), ratio(3, 2)] {
            let ws = build_weight_system(
                &g,
                &[u.clone(), v.clone(), z.clone()],
                &[
                    (vec![u.clone()], alpha),
                    (vec![v.clone()], alpha),
                    (vec![z.clone()], alpha),
                ],
            )
            .unwrap();
            let eff = propagate_weights(&ws, &adapted).unwrap();
            // slot uv: only the baseline reaches it; slot z: the part letter
            assert_eq!(eff.slot_weights[0], ratio(1, 2));
            assert_eq!(eff.provenance[0], Provenance::Baseline);
            assert_eq!(eff.slot_weights[1], alpha.recip());
            let rep = gamma(&eff);
            assert_eq!(rep.gamma, ratio(1, 2) + alpha.recip());
        }
        // alpha = 1: exactly 3/2
        let ws = build_weight_system(&g, &[u.clone(), v.clone(), z.clone()], &[
            (vec![u], ratio(1, 1)),
            (vec![v], ratio(1, 1)),
            (vec![z], ratio(1, 1)),
        ])
        .unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        assert_eq!(gamma(&eff).gamma, ratio(3, 2));
    }

    #[test]
    fn gamma_invariances() {
        let g = GroupDescriptor::heisenberg();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let basis = adapted.basis.basis().to_vec();
        let alpha = ratio(5, 4);
        let base = {
            let ws = build_weight_system(&g, &[], &[(basis.clone(), alpha)]).unwrap();
            gamma(&propagate_weights(&ws, &adapted).unwrap()).gamma
        };
        // permuting letters of equal weight
        let mut permuted = basis.clone();
        permuted.swap(0, 1);
        let ws = build_weight_system(&g, &[], &[(permuted, alpha)]).unwrap();
        assert_eq!(gamma(&propagate_weights(&ws, &adapted).unwrap()).gamma, base);
        // duplicating a letter
        let mut dup = basis.clone();
        dup.push(basis[0].clone());
        let ws = build_weight_system(&g, &[], &[(dup, alpha)]).unwrap();
        assert_eq!(gamma(&propagate_weights(&ws, &adapted).unwrap()).gamma, base);
        // monotonicity: larger alpha never increases gamma
        let ws = build_weight_system(&g, &[], &[(basis, ratio(3, 2))]).unwrap();
        let higher = gamma(&propagate_weights(&ws, &adapted).unwrap()).gamma;
        assert!(higher <= base);
    }

    #[test]
    fn norm_upper_bounds() {
        // Z, single letter weight 1/alpha: ||s^a|| = |a|^alpha exactly
        let g = GroupDescriptor::free_abelian(1);
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let s = Elem::from_coords(vec![1]);
        let ws = build_weight_system(&g, &[], &[(vec![s], ratio(4, 3))]).unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        let e = Elem::from_coords(vec![9]);
        let got = weighted_norm_upper(&e, &adapted, &eff).unwrap();
        assert!((got - 9.0f64.powf(4.0 / 3.0)).abs() < 1e-9);
        assert_eq!(
            weighted_norm_upper(&g.identity(), &adapted, &eff).unwrap(),
            0.0
        );
    }

    #[test]
    fn heisenberg_central_norm_scaling() {
        // central element [a,b]^m: coordinates (0,0,m), slot weight 2/alpha
        let g = GroupDescriptor::heisenberg();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let basis = adapted.basis.basis().to_vec();
        let ws = build_weight_system(&g, &[], &[(basis, ratio(1, 1))]).unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        for m in [4i64, 9, 25, 100] {
            let c = Elem::from_coords(vec![0, 0, m]);
            let got = weighted_norm_upper(&c, &adapted, &eff).unwrap();
            assert!(
                (got - (m as f64).sqrt()).abs() < 1e-9,
                "m={m}: {got}"
            );
        }
    }

    #[test]
    fn norm_upper_dominates_exhaustive_search() {
        // tiny exhaustive word search: words over the letters with per-letter
        // degree budget <= 3
        let g = GroupDescriptor::heisenberg();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let basis = adapted.basis.basis().to_vec();
        let alpha = ratio(1, 1);
        let ws = build_weight_system(&g, &[], &[(basis.clone(), alpha)]).unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();

        // enumerate products of letters (and inverses) with total length <= 4
        use rustc_hash::FxHashMap;
        let mut letters = Vec::new();
        for b in &basis {
            letters.push((b.clone(), b.clone()));
            letters.push((g.inv_unchecked(b), b.clone()));
        }
        let mut best: FxHashMap<Elem, f64> = FxHashMap::default();
        let mut frontier = vec![(g.identity(), vec![0usize; basis.len()])];
        best.insert(g.identity(), 0.0);
        for _ in 0..4 {
            let mut next = Vec::new();
            for (e, degs) in &frontier {
                for (li, (l, orig)) in letters.iter().enumerate() {
                    let mut nd = degs.clone();
                    nd[basis.iter().position(|b| b == orig).unwrap()] += 1;
                    let _ = li;
                    let ne = g.mul_unchecked(e, l);
                    let cost = nd
                        .iter()
                        .enumerate()
                        .map(|(k, &dv)| {
                            let w = eff.slot_weights[k];
                            (dv as f64).powf(*w.denom() as f64 / *w.numer() as f64)
                        })
                        .fold(0.0f64, f64::max);
                    let cur = best.get(&ne).copied().unwrap_or(f64::INFINITY);
                    if cost < cur {
                        best.insert(ne.clone(), cost);
                        next.push((ne, nd));
                    }
                }
            }
            frontier = next;
        }
        for (e, true_norm) in &best {
            let upper = weighted_norm_upper(e, &adapted, &eff).unwrap();
            assert!(
                upper + 1e-9 >= *true_norm,
                "{e:?}: upper {upper} < true {true_norm}"
            );
        }
    }

    #[test]
    fn ball_counts() {
        // Z^k at alpha: count = prod (2 floor(R^{1/alpha}) + 1)
        let g = GroupDescriptor::free_abelian(2);
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let gens: Vec<Elem> = adapted.basis.basis().to_vec();
        let ws = build_weight_system(&g, &[], &[(gens, ratio(1, 1))]).unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        assert_eq!(weighted_ball_count(0.5, &eff, 1 << 40).unwrap(), 1);
        assert_eq!(
            weighted_ball_count(7.0, &eff, 1 << 40).unwrap(),
            15 * 15
        );
        let slope = volume_exponent_fit(
            &[8.0, 16.0, 32.0, 64.0, 128.0],
            &eff,
            1 << 40,
        )
        .unwrap();
        assert!((slope - 2.0).abs() < 0.1, "Z^2 slope {slope}");
    }

    #[test]
    fn exact_integer_power_ranges() {
        assert_eq!(floor_pow(16, ratio(1, 2)), 4);
        assert_eq!(floor_pow(15, ratio(1, 2)), 3);
        assert_eq!(floor_pow(8, ratio(2, 3)), 4);
        assert_eq!(floor_pow(7, ratio(2, 3)), 3);
        assert_eq!(floor_pow(5, ratio(2, 1)), 25);
    }

    #[test]
    fn dihedral_volume_slope() {
        let g = GroupDescriptor::dihedral_times_z();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let u = g.generators()[0].clone();
        let v = g.generators()[1].clone();
        let z = g.generators()[2].clone();
        let ws = build_weight_system(
            &g,
            &[u.clone(), v.clone(), z.clone()],
            &[
                (vec![u], ratio(1, 1)),
                (vec![v], ratio(1, 1)),
                (vec![z], ratio(1, 1)),
            ],
        )
        .unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        let radii: Vec<f64> = [16u32, 32, 64, 128, 256].iter().map(|r| *r as f64).collect();
        let slope = volume_exponent_fit(&radii, &eff, 1 << 40).unwrap();
        assert!(
            (slope - 1.5).abs() < 0.1,
            "D x Z volume slope {slope}, want 1.5 +- 0.1"
        );
    }

    #[test]
    fn heisenberg_volume_slope_alpha_one() {
        let g = GroupDescriptor::heisenberg();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let basis = adapted.basis.basis().to_vec();
        let ws = build_weight_system(&g, &[], &[(basis, ratio(1, 1))]).unwrap();
        let eff = propagate_weights(&ws, &adapted).unwrap();
        let radii: Vec<f64> = [4u32, 8, 16, 32].iter().map(|r| *r as f64).collect();
        let slope = volume_exponent_fit(&radii, &eff, 1 << 50).unwrap();
        assert!((slope - 4.0).abs() < 0.5, "Heisenberg volume slope {slope}");
        // counts agree with a brute-force distinct-element enumeration at
        // tiny radii
        use rustc_hash::FxHashMap;
        for r in [1.0f64, 2.0, 3.0] {
            let count = weighted_ball_count(r, &eff, 1 << 30).unwrap();
            let mut seen: FxHashMap<Elem, ()> = FxHashMap::default();
            let rx = r as i64;
            let rz = (r * r) as i64;
            for x in -rx..=rx {
                for y in -rx..=rx {
                    for zc in -rz..=rz {
                        let e = adapted.basis.compose(&[x, y, zc]).unwrap();
                        seen.insert(e, ());
                    }
                }
            }
            assert_eq!(count, seen.len() as u64, "r={r}");
        }
    }

    #[test]
    fn monotone_in_alpha() {
        let g = GroupDescriptor::heisenberg();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let basis = adapted.basis.basis().to_vec();
        let mut prev = ratio(100, 1);
        for alpha in [ratio(1, 2), ratio(3, 4), ratio(1, 1), ratio(3, 2), ratio(9, 5)] {
            let ws = build_weight_system(&g, &[], &[(basis.clone(), alpha)]).unwrap();
            let rep = gamma(&propagate_weights(&ws, &adapted).unwrap());
            assert!(rep.gamma <= prev);
            prev = rep.gamma;
        }
    }

    #[test]
    fn gamma_report_json() {
        let g = GroupDescriptor::dihedral_times_z();
        let adapted = AdaptedStructure::for_group(&g).unwrap();
        let z = g.generators()[2].clone();
        let ws = build_weight_system(&g, g.generators(), &[(vec![z], ratio(1, 1))]).unwrap();
        let rep = gamma(&propagate_weights(&ws, &adapted).unwrap());
        let json = rep.to_json();
        assert!(json.contains("\"gamma\":[3,2]"), "{json}");
    }
}
