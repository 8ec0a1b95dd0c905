//! Executes a validated experiment configuration: builds the group and
//! measures, dispatches on the experiment kind, writes CSV/JSON artifacts
//! and returns a run manifest with provenance and pass/fail status.

use crate::config::{resolve_tuple_name, AssertSection, ExperimentConfig, MeasureSection};
use crate::convolution::{
    exit_time_stats, fit_exponent, near_diagonal_check, return_series, ConvolutionPlan,
    FitWindow, Strategy,
};
use crate::dirichlet::{
    default_family, form_comparison, pp_scan, word_length_pow, zeta_test, TestFunction,
};
use crate::error::{Error, Result};
use crate::group::{Elem, GroupDescriptor, GroupKind, WordMetric};
use crate::measures::{
    build_axis_measure, build_coordinatewise, build_mu_alpha, check_upper, convex_combination,
    gjp_profile, weak_moment_stat, LatticePsi, Sampler, SparseMeasure,
};
use crate::weights::{
    build_weight_system, gamma, propagate_weights, volume_exponent_fit, weighted_ball_count,
    weighted_norm_upper, AdaptedStructure, parse_ratio,
};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Pass,
    Fail,
    Unasserted,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub manifest_path: PathBuf,
    pub failures: Vec<String>,
}

/// FNV-1a over the raw config text: a stable provenance hash.
pub fn config_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn plan_of(cfg: &ExperimentConfig) -> ConvolutionPlan<f64> {
    ConvolutionPlan {
        prune_threshold: cfg.budget.prune_threshold,
        max_support_size: cfg.budget.max_support,
        strategy: Strategy::RepeatedSquaring,
        cert_budget: cfg.budget.cert_budget,
    }
}

fn alpha_f64(v: &Option<toml::Value>, field: &str) -> Result<f64> {
    let v = v
        .as_ref()
        .ok_or_else(|| Error::usage(format!("{field}: missing alpha")))?;
    let r = ExperimentConfig::alpha_of(v)?;
    Ok(*r.numer() as f64 / *r.denom() as f64)
}

/// A metric suitable for the group: closed-form backends get a huge cap for
/// free; BFS groups use the configured cap under the element budget.
fn metric_for(
    group: &GroupDescriptor,
    cfg: &ExperimentConfig,
    wanted: u32,
) -> Result<WordMetric> {
    match group.kind() {
        GroupKind::FreeAbelian(_) | GroupKind::DihedralTimesZ => {
            WordMetric::new(group, wanted.max(1 << 24))
        }
        _ => {
            let cap = cfg.params.metric_cap.unwrap_or(wanted.max(4));
            WordMetric::bfs(group, cap, cfg.budget.mem_elements as usize)
        }
    }
}

fn build_measure(
    group: &GroupDescriptor,
    section: &MeasureSection,
    cfg: &ExperimentConfig,
) -> Result<SparseMeasure<f64>> {
    match section.kind.as_str() {
        "mu_alpha" => {
            let radius = section
                .radius
                .ok_or_else(|| Error::usage("mu_alpha needs a radius"))?;
            let alpha = alpha_f64(&section.alpha, "measure.alpha")?;
            let metric = metric_for(group, cfg, radius)?;
            build_mu_alpha(&metric, alpha, radius)
        }
        "coordinatewise" => {
            let radius = section
                .radius
                .ok_or_else(|| Error::usage("coordinatewise needs a psi box radius"))?;
            let alpha = alpha_f64(&section.alpha, "measure.alpha")?;
            let tuple = resolve_tuple(group, section)?;
            let psi: LatticePsi<f64> = LatticePsi::build(tuple.len(), alpha, radius)?;
            let psi = if section.renormalize_psi.unwrap_or(false) {
                psi.renormalized()
            } else {
                psi
            };
            build_coordinatewise(group, &psi, &tuple)
        }
        "axis" => {
            let radius = section
                .radius
                .ok_or_else(|| Error::usage("axis measure needs a radius"))?;
            let alpha = alpha_f64(&section.alpha, "measure.alpha")?;
            let tuple = resolve_tuple(group, section)?;
            build_axis_measure(group, &tuple, alpha, radius)
        }
        "table" => {
            let entries = section
                .entries
                .as_ref()
                .ok_or_else(|| Error::usage("table measure needs entries"))?;
            let rows: Vec<(Elem, f64)> = entries
                .iter()
                .map(|e| (Elem::from_coords(e.coords.clone()), e.weight))
                .collect();
            SparseMeasure::from_table(group, &rows)
        }
        "convex" => {
            let parts = section
                .parts
                .as_ref()
                .ok_or_else(|| Error::usage("convex measure needs parts"))?;
            let built: Result<Vec<(f64, SparseMeasure<f64>)>> = parts
                .iter()
                .map(|p| build_measure(group, &p.measure, cfg).map(|m| (p.weight, m)))
                .collect();
            convex_combination(&built?)
        }
        other => Err(Error::usage(format!("unknown measure kind {other:?}"))),
    }
}

fn resolve_tuple(group: &GroupDescriptor, section: &MeasureSection) -> Result<Vec<Elem>> {
    section
        .tuple
        .as_ref()
        .ok_or_else(|| Error::usage("measure needs a tuple"))?
        .iter()
        .map(|n| resolve_tuple_name(group, n))
        .collect()
}

fn write_file(out_dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| Error::usage(format!("cannot create {out_dir:?}: {e}")))?;
    let path = out_dir.join(name);
    std::fs::write(&path, content)
        .map_err(|e| Error::usage(format!("cannot write {path:?}: {e}")))?;
    Ok(path)
}

struct AssertChecker<'a> {
    section: Option<&'a AssertSection>,
    failures: Vec<String>,
}

impl<'a> AssertChecker<'a> {
    fn new(section: Option<&'a AssertSection>) -> Self {
        AssertChecker {
            section,
            failures: Vec::new(),
        }
    }

    fn slope(&mut self, got: Option<f64>) {
        if let Some(a) = self.section {
            if let (Some(want), Some(tol)) = (a.slope, a.slope_tol) {
                match got {
                    Some(g) if (g - want).abs() <= tol => {}
                    Some(g) => self.failures.push(format!(
                        "slope {g:.4} outside {want} +- {tol}"
                    )),
                    None => self
                        .failures
                        .push("slope unavailable (fit refused)".into()),
                }
            }
        }
    }

    fn gamma(&mut self, got: &str) {
        if let Some(a) = self.section {
            if let Some(want) = &a.gamma {
                let canon = |s: &str| parse_ratio(s).ok();
                if canon(want) != canon(got) {
                    self.failures
                        .push(format!("gamma {got} != expected {want}"));
                }
            }
        }
    }

    fn max_rel_err(&mut self, got: f64) {
        if let Some(a) = self.section {
            if let Some(lim) = a.max_rel_err {
                if !(got < lim) {
                    self.failures
                        .push(format!("certified relative error {got:.4} >= {lim}"));
                }
            }
        }
    }

    fn bracket(&mut self, min: f64, max: f64) {
        if let Some(a) = self.section {
            if let Some(lim) = a.bracket {
                let factor = if min > 0.0 { max / min } else { f64::INFINITY };
                if !(factor < lim) {
                    self.failures.push(format!(
                        "bracket factor {factor:.3} >= {lim} (range [{min:.4e}, {max:.4e}])"
                    ));
                }
            }
        }
    }

    fn ratio_interval(&mut self, min: f64, max: f64) {
        if let Some(a) = self.section {
            if let (Some(lo), Some(hi)) = (a.ratio_low, a.ratio_high) {
                if min < lo || max > hi {
                    self.failures.push(format!(
                        "ratio interval [{min:.4}, {max:.4}] escapes [{lo}, {hi}]"
                    ));
                }
            }
        }
    }

    fn max_estimate(&mut self, got: f64) {
        if let Some(a) = self.section {
            if let Some(lim) = a.max_estimate {
                if !(got < lim) {
                    self.failures
                        .push(format!("estimate {got:.4} >= limit {lim}"));
                }
            }
        }
    }

    fn monotone(&mut self, ok: bool) {
        if let Some(a) = self.section {
            if a.monotone == Some(true) && !ok {
                self.failures.push("profile is not monotone".into());
            }
        }
    }

    fn elapsed(&mut self, seconds: f64) {
        if let Some(a) = self.section {
            if let Some(lim) = a.max_seconds {
                if seconds > lim {
                    self.failures
                        .push(format!("runtime {seconds:.1}s exceeds {lim}s"));
                }
            }
        }
    }
}

/// Runs a validated config; writes outputs and the manifest into `out_dir`.
pub fn run(cfg: &ExperimentConfig, raw_text: &str, out_dir: &Path) -> Result<RunOutcome> {
    let diags = cfg.validate();
    if !diags.is_empty() {
        return Err(Error::usage(format!(
            "config does not validate:\n{}",
            diags.join("\n")
        )));
    }
    let group = GroupDescriptor::by_name(&cfg.group.name)?;
    let stem = cfg
        .experiment
        .label
        .clone()
        .unwrap_or_else(|| cfg.experiment.kind.replace('-', "_"));
    let started = Instant::now();
    let mut outputs: Vec<PathBuf> = Vec::new();
    let mut checker = AssertChecker::new(cfg.assert.as_ref());

    let summary: Value = match cfg.experiment.kind.as_str() {
        "return-exponent" => run_return_exponent(
            cfg, &group, &stem, out_dir, &mut outputs, &mut checker,
        )?,
        "volume-exponent" => {
            run_volume_exponent(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?
        }
        "pp-scan" => run_pp_scan(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?,
        "zeta-test" => run_zeta(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?,
        "gjp" => run_gjp(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?,
        "moment-check" => {
            run_moment_check(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?
        }
        "walk-exit" => run_walk_exit(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?,
        "form-compare" => {
            run_form_compare(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?
        }
        "near-diagonal" => {
            run_near_diagonal(cfg, &group, &stem, out_dir, &mut outputs, &mut checker)?
        }
        other => return Err(Error::usage(format!("unknown experiment kind {other:?}"))),
    };

    let elapsed = started.elapsed().as_secs_f64();
    checker.elapsed(elapsed);

    let status = match (&cfg.assert, checker.failures.is_empty()) {
        (None, _) => RunStatus::Unasserted,
        (Some(_), true) => RunStatus::Pass,
        (Some(_), false) => RunStatus::Fail,
    };
    let manifest = json!({
        "config_hash": format!("{:016x}", config_hash(raw_text)),
        "kind": cfg.experiment.kind,
        "label": stem,
        "seed": cfg.experiment.seed,
        "elapsed_seconds": elapsed,
        "outputs": outputs.iter().map(|p| p.file_name().unwrap().to_string_lossy().to_string()).collect::<Vec<_>>(),
        "summary": summary,
        "status": match status { RunStatus::Pass => "pass", RunStatus::Fail => "fail", RunStatus::Unasserted => "unasserted" },
        "assert_failures": checker.failures,
        "version": env!("CARGO_PKG_VERSION"),
    });
    let manifest_path = write_file(
        out_dir,
        &format!("{stem}_manifest.json"),
        &serde_json::to_string_pretty(&manifest).unwrap(),
    )?;
    Ok(RunOutcome {
        status,
        manifest_path,
        failures: checker.failures,
    })
}

fn run_return_exponent(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let mu = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let plan = plan_of(cfg);
    let times = cfg.params.times.clone().unwrap();
    let series = return_series(&mu, &times, &plan)?;
    outputs.push(write_file(
        out_dir,
        &format!("{stem}_series.csv"),
        &series.to_csv(),
    )?);
    let window = if cfg.params.fit_certified.unwrap_or(false) {
        FitWindow::Certified
    } else {
        let lo = cfg.params.fit_lo.unwrap_or(*times.iter().min().unwrap());
        let hi = cfg.params.fit_hi.unwrap_or(*times.iter().max().unwrap());
        FitWindow::Range(lo, hi)
    };
    let fit = fit_exponent(&series, window);
    let max_rel = series
        .entries
        .iter()
        .map(|e| e.relative_error())
        .fold(0.0f64, f64::max);
    let (slope, stderr, refusal) = match fit {
        Ok((s, se)) => (Some(s), Some(se), None),
        Err(Error::IntervalsTooWide(d)) | Err(Error::Usage(d)) => (None, None, Some(d)),
        Err(e) => return Err(e),
    };
    checker.slope(slope);
    checker.max_rel_err(max_rel);
    Ok(json!({
        "slope": slope,
        "stderr": stderr,
        "refusal": refusal,
        "max_relative_error": max_rel,
        "points": series.entries.len(),
        "dropped_mass_at_build": mu.dropped_mass(),
    }))
}

fn weights_of(cfg: &ExperimentConfig, group: &GroupDescriptor) -> Result<crate::weights::WeightSystem> {
    let w = cfg
        .weights
        .as_ref()
        .ok_or_else(|| Error::usage("missing [weights] section"))?;
    let s0: Result<Vec<Elem>> = w.s0.iter().map(|n| group.element_by_name(n)).collect();
    let parts: Result<Vec<(Vec<Elem>, crate::weights::Weight)>> = w
        .parts
        .iter()
        .map(|p| {
            let letters: Result<Vec<Elem>> = p
                .letters
                .iter()
                .map(|n| resolve_tuple_name(group, n))
                .collect();
            Ok((letters?, ExperimentConfig::alpha_of(&p.alpha)?))
        })
        .collect();
    build_weight_system(group, &s0?, &parts?)
}

fn run_volume_exponent(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let ws = weights_of(cfg, group)?;
    let adapted = AdaptedStructure::for_group(group)?;
    let eff = propagate_weights(&ws, &adapted)?;
    let report = gamma(&eff);
    let radii = cfg.params.radii.clone().unwrap();
    let budget = cfg.budget.mem_elements.max(1 << 40);
    let slope = volume_exponent_fit(&radii, &eff, budget)?;
    let mut csv = String::from("R,count\n");
    for &r in &radii {
        csv.push_str(&format!("{},{}\n", r, weighted_ball_count(r, &eff, budget)?));
    }
    outputs.push(write_file(out_dir, &format!("{stem}_counts.csv"), &csv)?);
    outputs.push(write_file(
        out_dir,
        &format!("{stem}_gamma.json"),
        &report.to_json(),
    )?);
    let gamma_str = format!("{}/{}", report.gamma.numer(), report.gamma.denom());
    checker.slope(Some(slope));
    checker.gamma(&gamma_str);
    Ok(json!({
        "slope": slope,
        "gamma": gamma_str,
        "gamma_value": report.gamma_f64(),
        "ladder": report.ladder.iter().map(|(w, r)| json!({
            "weight": format!("{}/{}", w.numer(), w.denom()),
            "rank": r,
        })).collect::<Vec<_>>(),
    }))
}

fn run_pp_scan(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let mu = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let alpha = alpha_f64(&cfg.params.alpha, "params.alpha")?;
    let max_r = cfg.params.family_max_r.unwrap_or(64);
    let metric = metric_for(group, cfg, 8 * max_r)?;
    let family = default_family::<f64>(
        &metric,
        max_r,
        cfg.params.family_random.unwrap_or(100),
        cfg.experiment.seed.unwrap_or(7),
    )?;
    let shifts: Vec<Elem> = cfg
        .params
        .shifts
        .clone()
        .unwrap()
        .into_iter()
        .map(Elem::from_coords)
        .collect();
    let norm = word_length_pow::<f64>(&metric, alpha);
    let report = pp_scan(&mu, &family, &shifts, norm)?;
    let mut csv = String::from("h,best_ratio,normalizer,constant,zero_over_zero\n");
    for row in &report.rows {
        let h: Vec<String> = row.h.iter().map(|c| c.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            h.join(";"),
            row.best_ratio,
            row.normalizer,
            row.constant,
            row.zero_over_zero
        ));
    }
    outputs.push(write_file(out_dir, &format!("{stem}_ppscan.csv"), &csv)?);
    let consts: Vec<f64> = report.rows.iter().map(|r| r.constant).collect();
    let max = consts.iter().cloned().fold(0.0, f64::max);
    let min = consts.iter().cloned().fold(f64::INFINITY, f64::min);
    checker.bracket(min, max);
    Ok(json!({
        "max_constant": report.max_constant,
        "constants": consts,
        "spread": if min > 0.0 { max / min } else { f64::INFINITY },
    }))
}

fn run_zeta(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let mu = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let ws = weights_of(cfg, group)?;
    let adapted = AdaptedStructure::for_group(group)?;
    let eff = propagate_weights(&ws, &adapted)?;
    let w_star = ws.w_star();
    let w_star_f = *w_star.numer() as f64 / *w_star.denom() as f64;
    let r_list = cfg.params.r_list.clone().unwrap();
    let max_r = r_list.iter().cloned().fold(0.0f64, f64::max);
    let cap = cfg
        .params
        .metric_cap
        .unwrap_or((max_r.powf(1.0 / w_star_f) * 4.0) as u32 + 8);
    let metric = metric_for(group, cfg, cap)?;
    // the weighted norm upper bound drives the zeta support
    let norm = |g: &Elem| weighted_norm_upper(g, &adapted, &eff).unwrap_or(f64::INFINITY);
    let rows = zeta_test(std::slice::from_ref(&mu), &metric, norm, w_star_f, &r_list)?;
    let mut csv = String::from("R,part,rayleigh,product\n");
    for r in &rows {
        csv.push_str(&format!("{},{},{},{}\n", r.r, r.part, r.rayleigh, r.product));
    }
    outputs.push(write_file(out_dir, &format!("{stem}_zeta.csv"), &csv)?);
    let prods: Vec<f64> = rows.iter().map(|r| r.product).collect();
    let max = prods.iter().cloned().fold(0.0, f64::max);
    let min = prods.iter().cloned().fold(f64::INFINITY, f64::min);
    checker.bracket(min, max);
    Ok(json!({
        "w_star": format!("{}/{}", w_star.numer(), w_star.denom()),
        "min_product": min,
        "max_product": max,
        "bracket": if min > 0.0 { max / min } else { f64::INFINITY },
    }))
}

fn run_gjp(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let mu = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let m_max = cfg.params.m_max.unwrap_or(mu.truncation_radius().max(100));
    let profile = gjp_profile(&mu, m_max)?;
    let mut csv = String::from("m,K,G,Q\n");
    for m in 1..=profile.m_max() {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            m,
            profile.k_at(m),
            profile.g_at(m),
            profile.q_at(m)
        ));
    }
    outputs.push(write_file(out_dir, &format!("{stem}_gjp.csv"), &csv)?);

    let n_list = cfg
        .params
        .n_list
        .clone()
        .unwrap_or_else(|| (7..=13).map(|e| 1u64 << e).collect());
    let mut an_csv = String::from("n,a_n\n");
    let mut ns = Vec::new();
    let mut avals = Vec::new();
    for &n in &n_list {
        let a = profile.a_n(n).ok_or_else(|| {
            Error::usage(format!("a_n undefined for n={n} within m_max={m_max}"))
        })?;
        an_csv.push_str(&format!("{n},{a}\n"));
        ns.push(n as f64);
        avals.push(a as f64);
    }
    outputs.push(write_file(out_dir, &format!("{stem}_an.csv"), &an_csv)?);
    let (a_slope, _) = crate::fit::loglog_fit(&ns, &avals);
    checker.slope(Some(a_slope));

    // return series and the ratio nu^(2n)(0) * a_{2n}
    let mut bracket = json!(null);
    if let Some(times) = &cfg.params.times {
        let plan = plan_of(cfg);
        let series = return_series(&mu, times, &plan)?;
        outputs.push(write_file(
            out_dir,
            &format!("{stem}_series.csv"),
            &series.to_csv(),
        )?);
        let mut ratios = Vec::new();
        let mut rat_csv = String::from("n,value,a_n,ratio\n");
        for e in &series.entries {
            let a = profile.a_n(e.time).ok_or_else(|| {
                Error::usage(format!("a_n undefined for n={} within m_max", e.time))
            })? as f64;
            let ratio = e.value * a;
            ratios.push(ratio);
            rat_csv.push_str(&format!("{},{},{},{}\n", e.time, e.value, a, ratio));
        }
        outputs.push(write_file(out_dir, &format!("{stem}_ratio.csv"), &rat_csv)?);
        let max = ratios.iter().cloned().fold(0.0, f64::max);
        let min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        checker.bracket(min, max);
        bracket = json!({
            "min": min,
            "max": max,
            "factor": if min > 0.0 { max / min } else { f64::INFINITY },
        });
    }
    Ok(json!({
        "a_slope": a_slope,
        "ratio_bracket": bracket,
    }))
}

fn run_moment_check(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    _checker: &mut AssertChecker,
) -> Result<Value> {
    let mu = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let alpha = alpha_f64(&cfg.params.alpha, "params.alpha")?;
    let metric = metric_for(group, cfg, 4 * mu.truncation_radius().max(16))?;
    let stat = weak_moment_stat(&mu, &metric, alpha)?;
    let upper = check_upper(&mu, &metric, alpha);
    let summary = json!({
        "weak_moment": stat,
        "tail_stat": { "t": upper.tail_stat.0, "value": upper.tail_stat.1 },
        "second_moment_stat": { "t": upper.second_moment_stat.0, "value": upper.second_moment_stat.1 },
        "escaped": upper.escaped.as_ref().map(|e| e.coords().to_vec()),
    });
    outputs.push(write_file(
        out_dir,
        &format!("{stem}_moments.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?);
    Ok(summary)
}

fn run_walk_exit(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let section = cfg.measure.as_ref().unwrap();
    let seed = cfg.experiment.seed.unwrap();
    let alpha = alpha_f64(&cfg.params.alpha, "params.alpha")?;
    let horizon = cfg.params.horizon.unwrap();
    let trials = cfg.params.trials.unwrap();
    // coordinatewise measures get the box sampler; everything else samples
    // its finite support directly
    let sampler = if section.kind == "coordinatewise" {
        let radius = section.radius.unwrap();
        let a = alpha_f64(&section.alpha, "measure.alpha")?;
        let tuple = resolve_tuple(group, section)?;
        let psi: LatticePsi<f64> = LatticePsi::build(tuple.len(), a, radius)?;
        Sampler::coordinatewise(group, &psi, &tuple, seed)?
    } else {
        let mu = build_measure(group, section, cfg)?;
        Sampler::from_measure(&mu, seed)?
    };
    let metric = metric_for(group, cfg, (1 << 24).max(horizon as u32))?;
    let stats = crate::convolution::simulate_walk(&sampler, &metric, horizon, trials)?;
    outputs.push(write_file(
        out_dir,
        &format!("{stem}_walks.csv"),
        &stats.to_csv(),
    )?);
    let gammas = cfg.params.gammas.clone().unwrap();
    let mut csv = String::from("gamma,threshold,estimate,ci_low,ci_high,exceed,censored\n");
    let mut estimates = Vec::new();
    for &g in &gammas {
        let est = exit_time_stats(&stats, g, alpha)?;
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            g,
            est.threshold,
            est.estimate,
            est.ci_low,
            est.ci_high,
            est.exceed_count,
            est.censored_as_exceed
        ));
        estimates.push(est.estimate);
    }
    outputs.push(write_file(out_dir, &format!("{stem}_exit.csv"), &csv)?);
    let monotone = estimates.windows(2).all(|w| w[1] <= w[0]);
    checker.monotone(monotone);
    checker.max_estimate(*estimates.last().unwrap());
    Ok(json!({
        "estimates": estimates,
        "monotone_nonincreasing": monotone,
        "censored": stats.censored_count(),
        "sampler_bias_bound": sampler.bias_bound(),
    }))
}

fn run_form_compare(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let mu1 = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let mu2 = build_measure(group, cfg.measure2.as_ref().unwrap(), cfg)?;
    let ball = cfg.params.family_ball.unwrap_or(6);
    let count = cfg.params.family_random.unwrap_or(100);
    let metric = metric_for(group, cfg, ball)?;
    let family: Vec<TestFunction<f64>> = TestFunction::random_signs(
        &metric,
        ball,
        count,
        cfg.experiment.seed.unwrap_or(1),
    )?;
    let cmp = form_comparison(&mu1, &mu2, &family)?;
    checker.ratio_interval(cmp.min_ratio, cmp.max_ratio);
    let summary = json!({
        "min_ratio": cmp.min_ratio,
        "max_ratio": cmp.max_ratio,
        "excluded_zero_denominators": cmp.excluded_zero_denominators,
        "family_size": count,
        "ball_radius": ball,
    });
    outputs.push(write_file(
        out_dir,
        &format!("{stem}_compare.json"),
        &serde_json::to_string_pretty(&summary).unwrap(),
    )?);
    Ok(summary)
}

fn run_near_diagonal(
    cfg: &ExperimentConfig,
    group: &GroupDescriptor,
    stem: &str,
    out_dir: &Path,
    outputs: &mut Vec<PathBuf>,
    checker: &mut AssertChecker,
) -> Result<Value> {
    let mu = build_measure(group, cfg.measure.as_ref().unwrap(), cfg)?;
    let alpha = alpha_f64(&cfg.params.alpha, "params.alpha")?;
    let n = cfg
        .params
        .steps
        .ok_or_else(|| Error::usage("params.steps: required"))?;
    let eta = cfg.params.eta.unwrap_or(0.5);
    let r_needed = ((eta * n as f64).powf(1.0 / alpha)) as u32 + 2;
    let metric = metric_for(group, cfg, r_needed)?;
    let plan = plan_of(cfg);
    let report = near_diagonal_check(&mu, &metric, n, eta, alpha, &plan)?;
    let mut csv = String::from("element,length,value,scaled\n");
    for row in &report.rows {
        let c: Vec<String> = row.element.iter().map(|x| x.to_string()).collect();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            c.join(";"),
            row.length,
            row.value,
            row.scaled
        ));
    }
    outputs.push(write_file(out_dir, &format!("{stem}_near_diagonal.csv"), &csv)?);
    checker.bracket(report.min_scaled, report.max_scaled);
    checker.max_rel_err(report.max_relative_error);
    Ok(json!({
        "min_scaled": report.min_scaled,
        "max_scaled": report.max_scaled,
        "ratio": report.ratio(),
        "max_relative_error": report.max_relative_error,
        "rows": report.rows.len(),
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable() {
        assert_eq!(config_hash("abc"), config_hash("abc"));
        assert_ne!(config_hash("abc"), config_hash("abd"));
    }

    #[test]
    fn run_return_exponent_end_to_end() {
        let text = r#"
[experiment]
kind = "return-exponent"
seed = 1
label = "lazy"

[group]
name = "Z^1"

[measure]
kind = "table"
entries = [
  { coords = [0], weight = 0.5 },
  { coords = [1], weight = 0.25 },
  { coords = [-1], weight = 0.25 },
]

[params]
times = [64, 128, 256, 512, 1024]

[assert]
slope = -0.5
slope_tol = 0.1
max_rel_err = 0.1
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let dir = std::env::temp_dir().join("stablewalk_test_run");
        let _ = std::fs::remove_dir_all(&dir);
        let outcome = run(&cfg, text, &dir).unwrap();
        assert_eq!(outcome.status, RunStatus::Pass, "{:?}", outcome.failures);
        let manifest = std::fs::read_to_string(outcome.manifest_path).unwrap();
        assert!(manifest.contains("\"status\": \"pass\""));
        assert!(dir.join("lazy_series.csv").exists());
    }

    #[test]
    fn deterministic_outputs() {
        let text = r#"
[experiment]
kind = "walk-exit"
seed = 99
label = "det"

[group]
name = "Z^1"

[measure]
kind = "coordinatewise"
alpha = "1"
radius = 500
tuple = ["e1"]

[params]
horizon = 50
trials = 200
gammas = [1.0, 2.0, 4.0]
alpha = "1"
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let d1 = std::env::temp_dir().join("stablewalk_det1");
        let d2 = std::env::temp_dir().join("stablewalk_det2");
        let _ = std::fs::remove_dir_all(&d1);
        let _ = std::fs::remove_dir_all(&d2);
        run(&cfg, text, &d1).unwrap();
        run(&cfg, text, &d2).unwrap();
        for f in ["det_walks.csv", "det_exit.csv"] {
            let a = std::fs::read(d1.join(f)).unwrap();
            let b = std::fs::read(d2.join(f)).unwrap();
            assert_eq!(a, b, "{f} not byte-identical");
        }
    }

    #[test]
    fn invalid_config_is_refused() {
        let text = r#"
[experiment]
kind = "return-exponent"

[group]
name = "so3"

[params]
times = [2]
"#;
        let cfg = ExperimentConfig::parse(text).unwrap();
        let out = run(&cfg, text, &std::env::temp_dir().join("stablewalk_bad"));
        assert!(out.is_err());
    }
}
