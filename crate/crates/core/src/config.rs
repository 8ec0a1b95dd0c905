//! Declarative experiment configuration: one structured file per run.

use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor};
use crate::weights::{parse_ratio, Weight};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub group: GroupSection,
    #[serde(default)]
    pub measure: Option<MeasureSection>,
    #[serde(default)]
    pub measure2: Option<MeasureSection>,
    #[serde(default)]
    pub weights: Option<WeightsSection>,
    #[serde(default)]
    pub params: ParamsSection,
    #[serde(default)]
    pub budget: BudgetSection,
    #[serde(default)]
    pub assert: Option<AssertSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub kind: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSection {
    pub name: String,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSection {
    pub kind: String,
    #[serde(default)]
    pub alpha: Option<toml::Value>,
    #[serde(default)]
    pub radius: Option<u32>,
    #[serde(default)]
    pub tuple: Option<Vec<String>>,
    /// coordinatewise only: condition psi on its box (tail mass zero)
    #[serde(default)]
    pub renormalize_psi: Option<bool>,
    /// table measures: (coordinates, weight) entries
    #[serde(default)]
    pub entries: Option<Vec<TableEntry>>,
    /// convex combinations
    #[serde(default)]
    pub parts: Option<Vec<ConvexPart>>,
}

#[derive(Clone, Debug, Deserialize)]
pub struct TableEntry {
    pub coords: Vec<i64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Deserialize)]
pub struct ConvexPart {
    pub weight: f64,
    pub measure: Box<MeasureSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightsSection {
    #[serde(default)]
    pub s0: Vec<String>,
    pub parts: Vec<WeightPartSection>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightPartSection {
    pub letters: Vec<String>,
    pub alpha: toml::Value,
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    /// return series times (even step counts)
    #[serde(default)]
    pub times: Option<Vec<u64>>,
    #[serde(default)]
    pub fit_lo: Option<u64>,
    #[serde(default)]
    pub fit_hi: Option<u64>,
    /// fit over all certified points instead of a fixed window
    #[serde(default)]
    pub fit_certified: Option<bool>,
    /// volume-exponent radii
    #[serde(default)]
    pub radii: Option<Vec<f64>>,
    /// gjp profile extent and a_n fit points
    #[serde(default)]
    pub m_max: Option<u32>,
    #[serde(default)]
    pub n_list: Option<Vec<u64>>,
    /// walks
    #[serde(default)]
    pub horizon: Option<u64>,
    #[serde(default)]
    pub trials: Option<u64>,
    #[serde(default)]
    pub gammas: Option<Vec<f64>>,
    /// near-diagonal
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub steps: Option<u64>,
    /// pp-scan shifts as coordinate vectors
    #[serde(default)]
    pub shifts: Option<Vec<Vec<i64>>>,
    /// probe family parameters
    #[serde(default)]
    pub family_max_r: Option<u32>,
    #[serde(default)]
    pub family_random: Option<usize>,
    #[serde(default)]
    pub family_ball: Option<u32>,
    /// zeta test radii
    #[serde(default)]
    pub r_list: Option<Vec<f64>>,
    /// moment / pp / walk exponent
    #[serde(default)]
    pub alpha: Option<toml::Value>,
    #[serde(default)]
    pub metric_cap: Option<u32>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetSection {
    #[serde(default = "default_max_support")]
    pub max_support: usize,
    #[serde(default = "default_prune_threshold")]
    pub prune_threshold: f64,
    #[serde(default = "default_cert_budget")]
    pub cert_budget: f64,
    #[serde(default = "default_mem_elements")]
    pub mem_elements: u64,
}

fn default_max_support() -> usize {
    5_000_000
}
fn default_prune_threshold() -> f64 {
    1e-14
}
fn default_cert_budget() -> f64 {
    1e-3
}
fn default_mem_elements() -> u64 {
    10_000_000
}

impl Default for BudgetSection {
    fn default() -> Self {
        BudgetSection {
            max_support: default_max_support(),
            prune_threshold: default_prune_threshold(),
            cert_budget: default_cert_budget(),
            mem_elements: default_mem_elements(),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AssertSection {
    #[serde(default)]
    pub slope: Option<f64>,
    #[serde(default)]
    pub slope_tol: Option<f64>,
    /// exact rational match for the gamma report, e.g. "3/2"
    #[serde(default)]
    pub gamma: Option<String>,
    #[serde(default)]
    pub max_rel_err: Option<f64>,
    /// max/min factor bracket over the reported table
    #[serde(default)]
    pub bracket: Option<f64>,
    /// form-compare: the ratio interval must land inside [low, high]
    #[serde(default)]
    pub ratio_low: Option<f64>,
    #[serde(default)]
    pub ratio_high: Option<f64>,
    /// walk-exit: the estimate at the last gamma must stay below this
    #[serde(default)]
    pub max_estimate: Option<f64>,
    #[serde(default)]
    pub monotone: Option<bool>,
    #[serde(default)]
    pub max_seconds: Option<f64>,
}

pub const EXPERIMENT_KINDS: &[&str] = &[
    "return-exponent",
    "volume-exponent",
    "pp-scan",
    "zeta-test",
    "gjp",
    "moment-check",
    "walk-exit",
    "form-compare",
    "near-diagonal",
];

pub const MEASURE_KINDS: &[&str] = &["mu_alpha", "coordinatewise", "axis", "convex", "table"];

const STOCHASTIC_KINDS: &[&str] = &["walk-exit"];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<ExperimentConfig> {
        toml::from_str(text).map_err(|e| Error::usage(format!("config parse error: {e}")))
    }

    pub fn alpha_of(v: &toml::Value) -> Result<Weight> {
        match v {
            toml::Value::String(s) => parse_ratio(s),
            toml::Value::Integer(i) => Ok(Weight::from_integer(*i)),
            toml::Value::Float(f) => parse_ratio(&format!("{f}")),
            _ => Err(Error::usage("alpha must be a number or a rational string")),
        }
    }

    /// Exhaustive, order-stable diagnostics; empty iff runnable.
    pub fn validate(&self) -> Vec<String> {
        let mut diags = Vec::new();
        let kind = self.experiment.kind.as_str();
        if !EXPERIMENT_KINDS.contains(&kind) {
            diags.push(format!(
                "experiment.kind: unknown kind {kind:?}; expected one of {EXPERIMENT_KINDS:?}"
            ));
        }
        let group = match GroupDescriptor::by_name(&self.group.name) {
            Ok(g) => Some(g),
            Err(_) => {
                diags.push(format!("group.name: unknown group {:?}", self.group.name));
                None
            }
        };
        if STOCHASTIC_KINDS.contains(&kind) && self.experiment.seed.is_none() {
            diags.push("experiment.seed: mandatory for stochastic kinds".into());
        }
        if let Some(m) = &self.measure {
            self.validate_measure(m, "measure", group.as_ref(), &mut diags);
        }
        if let Some(m) = &self.measure2 {
            self.validate_measure(m, "measure2", group.as_ref(), &mut diags);
        }
        if let Some(w) = &self.weights {
            for (i, p) in w.parts.iter().enumerate() {
                match Self::alpha_of(&p.alpha) {
                    Ok(a) => {
                        if a <= Weight::from_integer(0) || a >= Weight::from_integer(2) {
                            diags.push(format!(
                                "weights.parts[{i}].alpha: {a} outside the open interval (0,2)"
                            ));
                        }
                    }
                    Err(e) => diags.push(format!("weights.parts[{i}].alpha: {e}")),
                }
                if let Some(g) = &group {
                    for l in &p.letters {
                        if g.element_by_name(l).is_err() {
                            diags.push(format!(
                                "weights.parts[{i}].letters: unknown element {l:?}"
                            ));
                        }
                    }
                }
            }
            if let Some(g) = &group {
                for l in &w.s0 {
                    if g.element_by_name(l).is_err() {
                        diags.push(format!("weights.s0: unknown element {l:?}"));
                    }
                }
            }
        }
        // kind-specific requirements
        match kind {
            "return-exponent" | "gjp" => {
                if self.measure.is_none() {
                    diags.push(format!("{kind}: missing [measure] section"));
                }
                match &self.params.times {
                    None => diags.push("params.times: required".into()),
                    Some(t) if t.is_empty() => {
                        diags.push("params.times: must be nonempty".into())
                    }
                    Some(t) => {
                        if t.iter().any(|x| *x == 0 || x % 2 != 0) {
                            diags.push("params.times: entries must be positive and even".into());
                        }
                    }
                }
            }
            "volume-exponent" => {
                if self.weights.is_none() {
                    diags.push("volume-exponent: missing [weights] section".into());
                }
                match &self.params.radii {
                    None => diags.push("params.radii: required".into()),
                    Some(r) if r.len() < 4 => {
                        diags.push("params.radii: need at least 4 radii".into())
                    }
                    _ => {}
                }
            }
            "pp-scan" => {
                if self.measure.is_none() {
                    diags.push("pp-scan: missing [measure] section".into());
                }
                if self.params.shifts.as_ref().is_none_or(|s| s.is_empty()) {
                    diags.push("params.shifts: required and nonempty".into());
                }
            }
            "zeta-test" => {
                if self.measure.is_none() {
                    diags.push("zeta-test: missing [measure] section".into());
                }
                if self.weights.is_none() {
                    diags.push("zeta-test: missing [weights] section".into());
                }
                if self.params.r_list.as_ref().is_none_or(|r| r.is_empty()) {
                    diags.push("params.r_list: required and nonempty".into());
                }
            }
            "moment-check" | "near-diagonal" => {
                if self.measure.is_none() {
                    diags.push(format!("{kind}: missing [measure] section"));
                }
            }
            "walk-exit" => {
                if self.measure.is_none() {
                    diags.push("walk-exit: missing [measure] section".into());
                }
                if self.params.horizon.is_none() {
                    diags.push("params.horizon: required".into());
                }
                if self.params.trials.is_none() {
                    diags.push("params.trials: required".into());
                }
                if self.params.gammas.as_ref().is_none_or(|g| g.is_empty()) {
                    diags.push("params.gammas: required and nonempty".into());
                }
            }
            "form-compare" => {
                if self.measure.is_none() || self.measure2.is_none() {
                    diags.push(
                        "form-compare: needs both [measure] and [measure2] sections".into(),
                    );
                }
            }
            _ => {}
        }
        if self.budget.max_support == 0 {
            diags.push("budget.max_support: must be positive".into());
        }
        if self.budget.mem_elements == 0 {
            diags.push("budget.mem_elements: must be positive".into());
        }
        diags
    }

    fn validate_measure(
        &self,
        m: &MeasureSection,
        field: &str,
        group: Option<&GroupDescriptor>,
        diags: &mut Vec<String>,
    ) {
        if !MEASURE_KINDS.contains(&m.kind.as_str()) {
            diags.push(format!(
                "{field}.kind: unknown measure kind {:?}; expected one of {MEASURE_KINDS:?}",
                m.kind
            ));
        }
        match m.kind.as_str() {
            "mu_alpha" | "coordinatewise" | "axis" => {
                match &m.alpha {
                    None => diags.push(format!("{field}.alpha: required")),
                    Some(v) => match Self::alpha_of(v) {
                        Ok(a) => {
                            if a <= Weight::from_integer(0) || a >= Weight::from_integer(2) {
                                diags.push(format!(
                                    "{field}.alpha: {a} outside the open interval (0,2)"
                                ));
                            }
                        }
                        Err(e) => diags.push(format!("{field}.alpha: {e}")),
                    },
                }
                if m.radius.is_none() {
                    diags.push(format!("{field}.radius: required"));
                }
            }
            "table" => {
                if m.entries.as_ref().is_none_or(|e| e.is_empty()) {
                    diags.push(format!("{field}.entries: required and nonempty"));
                }
            }
            "convex" => {
                if m.parts.as_ref().is_none_or(|p| p.is_empty()) {
                    diags.push(format!("{field}.parts: required and nonempty"));
                } else if let Some(parts) = &m.parts {
                    let total: f64 = parts.iter().map(|p| p.weight).sum();
                    if (total - 1.0).abs() > 1e-9 {
                        diags.push(format!("{field}.parts: weights sum to {total}, not 1"));
                    }
                    for (i, p) in parts.iter().enumerate() {
                        self.validate_measure(
                            &p.measure,
                            &format!("{field}.parts[{i}]"),
                            group,
                            diags,
                        );
                    }
                }
            }
            _ => {}
        }
        if matches!(m.kind.as_str(), "coordinatewise" | "axis") {
            match (&m.tuple, group) {
                (None, _) => diags.push(format!("{field}.tuple: required")),
                (Some(t), Some(g)) => {
                    for name in t {
                        if resolve_tuple_name(g, name).is_err() {
                            diags.push(format!("{field}.tuple: unknown element {name:?}"));
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

/// Tuple entries are element names or "basis:<index>" into the group's
/// canonical Mal'cev basis.
pub fn resolve_tuple_name(group: &GroupDescriptor, name: &str) -> Result<Elem> {
    if let Some(idx) = name.strip_prefix("basis:") {
        let i: usize = idx
            .parse()
            .map_err(|_| Error::usage(format!("bad basis index {name:?}")))?;
        let basis = crate::polycyclic::MalcevBasis::for_group(group)?;
        return basis
            .basis()
            .get(i)
            .cloned()
            .ok_or_else(|| Error::usage(format!("basis index {i} out of range")));
    }
    group.element_by_name(name)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
[experiment]
kind = "return-exponent"
seed = 1

[group]
name = "Z^1"

[measure]
kind = "mu_alpha"
alpha = "1"
radius = 100

[params]
times = [8, 16, 32, 64]
fit_lo = 8
fit_hi = 64
"#;

    #[test]
    fn valid_config_has_no_diagnostics() {
        let cfg = ExperimentConfig::parse(GOOD).unwrap();
        assert!(cfg.validate().is_empty(), "{:?}", cfg.validate());
    }

    #[test]
    fn unknown_group_named_in_diagnostic() {
        let cfg = ExperimentConfig::parse(&GOOD.replace("Z^1", "so3")).unwrap();
        let d = cfg.validate();
        assert_eq!(d.len(), 1);
        assert!(d[0].contains("group.name"), "{d:?}");
    }

    #[test]
    fn alpha_out_of_range_cites_interval() {
        let cfg = ExperimentConfig::parse(&GOOD.replace("\"1\"", "2.5")).unwrap();
        let d = cfg.validate();
        assert!(d.iter().any(|m| m.contains("(0,2)")), "{d:?}");
    }

    #[test]
    fn odd_times_rejected() {
        let cfg = ExperimentConfig::parse(&GOOD.replace("[8, 16, 32, 64]", "[3, 8]")).unwrap();
        let d = cfg.validate();
        assert!(d.iter().any(|m| m.contains("even")), "{d:?}");
    }

    #[test]
    fn diagnostics_are_order_stable() {
        let bad = GOOD.replace("Z^1", "so3").replace("\"1\"", "2.5");
        let cfg = ExperimentConfig::parse(&bad).unwrap();
        assert_eq!(cfg.validate(), cfg.validate());
    }

    #[test]
    fn stochastic_kind_requires_seed() {
        let text = r#"
[experiment]
kind = "walk-exit"

[group]
name = "Z^1"

[measure]
kind = "mu_alpha"
alpha = "1"
radius = 100

[params]
horizon = 100
trials = 10
gammas = [1.0]
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let d = cfg.validate();
        assert!(d.iter().any(|m| m.contains("seed")), "{d:?}");
    }
}
