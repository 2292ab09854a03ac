//! Command executors. Each returns the process exit status:
//!
//! ```text
//! 0  pass / success verdict
//! 1  certificate failure, small-gain failure, simulated blow-up, or a
//!    falsification run where the claimed estimate held
//! 2  configuration errors (reported as Err and mapped by the entry point)
//! ```

use std::path::Path;

use gaincert_core::certificates::{
    alpha_integrable_to_l2, iiss_to_nonlinear_l2, iss_to_linear_l2, l2_to_alpha_integrable,
    linear_l2_to_iss, max_to_sum, nonlinear_l2_to_iiss, sum_to_max,
};
use gaincert_core::gainfn::EvalCache;
use gaincert_core::interconnect::{
    cascade_iiss_direct, cascade_iiss_via_nl2, cascade_nl2, feedback_iiss_direct,
    feedback_iiss_no_input, feedback_iiss_with_input, feedback_iss_via_linear, feedback_nl2_max,
    feedback_nl2_no_input, feedback_nl2_sum,
};
use gaincert_core::simulate::{
    integrate, map_trajectory, trapezoid_prefix, truncated_l2_sq, verify_certificate,
};
use gaincert_core::transforms::BoundsProvenance;
use gaincert_core::{
    Certificate, CombineMode, CoordinateTransform, GainError, InputSignal, Outcome, ScalarGainFn,
    SectorConstants, SmallGainParams, SystemModel, Trajectory, TransformedCertificate,
};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::artifacts::{
    self, BatchReport, CounterexampleDoc, DrawRow, FailureDoc, SimulateSummary, SmallgainReport,
    TargetHeldDoc, VerifyReport,
};
use crate::config::{
    apply_transform_cert, composed_doc, resolve_fn, transformed_doc, ComposeTask, ConfigDoc,
    ConfigError, EquivTask, Registry, Settings,
};

/// Shared execution context: parsed document, resolved names, output
/// directory, verbosity.
pub struct Ctx<'a> {
    pub doc: &'a ConfigDoc,
    pub reg: &'a Registry,
    pub out: &'a Path,
    pub quiet: bool,
}

impl Ctx<'_> {
    fn say(&self, line: &str) {
        if !self.quiet {
            println!("{line}");
        }
    }
}

fn missing_task(cmd: &str) -> ConfigError {
    ConfigError(format!("config has no {cmd:?} task section"))
}

fn need<T: Copy>(slot: Option<T>, field: &str, op: &str) -> Result<T, ConfigError> {
    slot.ok_or_else(|| ConfigError(format!("compose op {op:?} requires field {field:?}")))
}

/// Integrates the model named in a task with an optional named signal.
fn run_model(
    ctx: &Ctx,
    model: &SystemModel,
    x0: &[f64],
    signal: Option<&str>,
) -> Result<Result<Trajectory, f64>, ConfigError> {
    let input = match signal {
        Some(name) => ctx.reg.signal(name)?.clone(),
        None => InputSignal::Zero,
    };
    let s = &ctx.doc.settings;
    match integrate(model, x0, &input, s.t_end, s.dt) {
        Ok(traj) => Ok(Ok(traj)),
        Err(GainError::Diverged { t }) => Ok(Err(t)),
        Err(e) => Err(e.into()),
    }
}

pub fn run_simulate(ctx: &Ctx) -> Result<i32, ConfigError> {
    let task = ctx.doc.simulate.as_ref().ok_or_else(|| missing_task("simulate"))?;
    let model = ctx.reg.model(&task.model)?;
    let s = &ctx.doc.settings;
    match run_model(ctx, model, &task.x0, task.signal.as_deref())? {
        Ok(traj) => {
            artifacts::write_trajectory_csv(&ctx.out.join("trajectory.csv"), &traj)?;
            let summary = SimulateSummary {
                model: model.name().to_string(),
                state_dim: traj.state_dim(),
                input_dim: traj.input_dim(),
                dt: traj.dt(),
                t_end: s.t_end,
                steps: traj.steps(),
                diverged: false,
                diverged_at: None,
                final_state: Some(traj.state(traj.steps()).to_vec()),
                truncated_l2_sq: Some(truncated_l2_sq(&traj)),
            };
            artifacts::write_json(&ctx.out.join("summary.json"), &summary)?;
            ctx.say(&format!(
                "simulate: {} steps of {:?}, ∫|x|² = {:.6e}",
                traj.steps(),
                model.name(),
                summary.truncated_l2_sq.unwrap()
            ));
            Ok(0)
        }
        Err(t) => {
            let summary = SimulateSummary {
                model: model.name().to_string(),
                state_dim: model.state_dim(),
                input_dim: model.input_dim(),
                dt: s.dt,
                t_end: s.t_end,
                steps: 0,
                diverged: true,
                diverged_at: Some(t),
                final_state: None,
                truncated_l2_sq: None,
            };
            artifacts::write_json(&ctx.out.join("summary.json"), &summary)?;
            ctx.say(&format!("simulate: {:?} diverged at t = {t}", model.name()));
            Ok(1)
        }
    }
}

/// Recomputes the per-point verification ledger for `estimate.csv`: `lhs` is
/// the running state integral, `rhs` the certified bound at the same time.
fn estimate_rows(cert: &Certificate, traj: &Trajectory) -> Vec<(f64, f64, f64)> {
    let mut cache = EvalCache::new();
    let x_norms = traj.state_norms();
    let state_vals: Vec<f64> = x_norms
        .iter()
        .map(|&v| cert.state_integrand_cached(v, &mut cache))
        .collect();
    let lhs = trapezoid_prefix(&state_vals, traj.dt());
    let beta0 = cert.beta().eval_cached(x_norms[0], &mut cache);
    let rhs: Vec<f64> = if !cert.kind().has_input() {
        vec![beta0; traj.len()]
    } else {
        let w_norms = traj.input_norms();
        let input_vals: Vec<f64> = w_norms
            .iter()
            .map(|&v| cert.input_integrand_cached(v, &mut cache))
            .collect();
        let input_integral = trapezoid_prefix(&input_vals, traj.dt());
        input_integral
            .iter()
            .map(|&i| {
                let term = cert.input_term_cached(i, &mut cache);
                match cert.mode() {
                    CombineMode::Max => beta0.max(term),
                    CombineMode::Sum => beta0 + term,
                }
            })
            .collect()
    };
    (0..traj.len())
        .map(|k| (traj.time(k), lhs[k], rhs[k]))
        .collect()
}

/// Draws the seeded random batch for a model: initial-state coordinates
/// uniform on `x0_range`; for forced models a piecewise-constant input with
/// `switches` uniform switch times and values uniform on `amplitude`.
pub fn sample_draw(model: &SystemModel, s: &Settings, index: usize) -> (u64, Vec<f64>, InputSignal) {
    let seed = s.seed.wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.state_dim();
    let m = model.input_dim();

    let mut x0 = Vec::with_capacity(n);
    for _ in 0..n {
        x0.push(rng.gen_range(s.x0_range[0]..=s.x0_range[1]));
    }
    let input = if m == 0 {
        InputSignal::Zero
    } else {
        let mut times: Vec<f64> = (0..s.switches).map(|_| rng.gen_range(0.0..s.t_end)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite switch times"));
        times.dedup();
        times.retain(|&t| t > 0.0);
        let mut values = Vec::with_capacity(times.len() + 1);
        for _ in 0..=times.len() {
            let mut v = Vec::with_capacity(m);
            for _ in 0..m {
                v.push(rng.gen_range(s.amplitude[0]..=s.amplitude[1]));
            }
            values.push(v);
        }
        InputSignal::PiecewiseConstant { switch_times: times, values }
    };
    (seed, x0, input)
}

/// Seeded random-batch verification with optional coordinate mapping of each
/// trajectory before the check. Deterministic in the settings alone.
pub fn batch_verify(
    model: &SystemModel,
    cert: &Certificate,
    state_t: Option<&CoordinateTransform>,
    input_t: Option<&CoordinateTransform>,
    s: &Settings,
) -> Result<(BatchReport, Vec<DrawRow>), GainError> {
    let mut rows = Vec::with_capacity(s.trajectories);
    let mut passed = 0usize;
    let mut worst_margin = f64::INFINITY;
    let mut worst_seed = None;
    let mut failing_seeds = Vec::new();
    let mut diverged_seeds = Vec::new();

    for i in 0..s.trajectories {
        let (seed, x0, input) = sample_draw(model, s, i);
        match integrate(model, &x0, &input, s.t_end, s.dt) {
            Ok(traj) => {
                let checked = match state_t {
                    Some(t) => map_trajectory(&traj, t, input_t)?,
                    None => traj,
                };
                let report = verify_certificate(cert, &checked, s.tolerance)?;
                if report.worst_margin < worst_margin {
                    worst_margin = report.worst_margin;
                    worst_seed = Some(seed);
                }
                if report.pass {
                    passed += 1;
                } else {
                    failing_seeds.push(seed);
                }
                rows.push(DrawRow {
                    draw: i,
                    seed,
                    outcome: if report.pass { "pass" } else { "fail" },
                    worst_margin: report.worst_margin,
                });
            }
            Err(GainError::Diverged { .. }) => {
                diverged_seeds.push(seed);
                rows.push(DrawRow { draw: i, seed, outcome: "diverged", worst_margin: f64::NAN });
            }
            Err(e) => return Err(e),
        }
    }

    let total = s.trajectories;
    let report = BatchReport {
        certificate: String::new(),
        model: model.name().to_string(),
        total,
        passed,
        pass_rate: if total == 0 { 0.0 } else { passed as f64 / total as f64 },
        worst_margin,
        worst_seed,
        failing_seeds,
        diverged_seeds,
        tolerance: s.tolerance,
    };
    Ok((report, rows))
}

pub fn run_verify(ctx: &Ctx) -> Result<i32, ConfigError> {
    let task = ctx.doc.verify.as_ref().ok_or_else(|| missing_task("verify"))?;
    let cert = ctx.reg.certificate(&task.certificate)?;
    let model = ctx.reg.model(&task.model)?;
    let state_t = match &task.state_transform {
        Some(name) => Some(ctx.reg.transform(name)?),
        None => None,
    };
    let input_t = match &task.input_transform {
        Some(name) => Some(ctx.reg.transform(name)?),
        None => None,
    };
    if input_t.is_some() && state_t.is_none() {
        return Err(ConfigError(
            "verify: input_transform requires state_transform".to_string(),
        ));
    }
    let s = &ctx.doc.settings;

    if let Some(x0) = &task.x0 {
        let traj = match run_model(ctx, model, x0, task.signal.as_deref())? {
            Ok(traj) => traj,
            Err(t) => {
                ctx.say(&format!("verify: trajectory diverged at t = {t}; bound unfalsifiable here"));
                artifacts::write_json(
                    &ctx.out.join("report.json"),
                    &TargetHeldDoc {
                        held: false,
                        detail: format!("trajectory diverged at t = {t}"),
                    },
                )?;
                return Ok(1);
            }
        };
        let checked = match state_t {
            Some(t) => map_trajectory(&traj, t, input_t)?,
            None => traj,
        };
        let report = verify_certificate(cert, &checked, s.tolerance)?;
        artifacts::write_estimate_csv(
            &ctx.out.join("estimate.csv"),
            estimate_rows(cert, &checked).into_iter(),
        )?;
        artifacts::write_json(
            &ctx.out.join("report.json"),
            &VerifyReport {
                certificate: task.certificate.clone(),
                model: task.model.clone(),
                pass: report.pass,
                worst_margin: report.worst_margin,
                worst_time: report.worst_time,
                lhs_at_worst: report.lhs_at_worst,
                rhs_at_worst: report.rhs_at_worst,
                tolerance: report.tol,
                samples: report.samples,
            },
        )?;
        ctx.say(&format!(
            "verify: {} (worst margin {:.6e} at t = {})",
            if report.pass { "PASS" } else { "FAIL" },
            report.worst_margin,
            report.worst_time
        ));
        Ok(if report.pass { 0 } else { 1 })
    } else {
        if task.signal.is_some() {
            return Err(ConfigError(
                "verify: a fixed signal requires a fixed x0; omit both for a random batch"
                    .to_string(),
            ));
        }
        let (mut report, rows) = batch_verify(model, cert, state_t, input_t, s)?;
        report.certificate = task.certificate.clone();
        artifacts::write_draws_csv(&ctx.out.join("draws.csv"), &rows)?;
        let pass = report.total > 0
            && report.passed == report.total
            && report.diverged_seeds.is_empty();
        artifacts::write_json(&ctx.out.join("report.json"), &report)?;
        ctx.say(&format!(
            "verify: {}/{} draws passed (worst margin {:.6e})",
            report.passed, report.total, report.worst_margin
        ));
        Ok(if pass { 0 } else { 1 })
    }
}

fn small_gain_params(
    doc: &ConfigDoc,
    spec: Option<&crate::config::SmallGainSpec>,
) -> Result<SmallGainParams, ConfigError> {
    let mut p = SmallGainParams::default();
    if let Some(s) = spec {
        if let Some(r) = &s.rho1 {
            p.rho1 = resolve_fn(doc, r)?;
        }
        if let Some(r) = &s.rho2 {
            p.rho2 = resolve_fn(doc, r)?;
        }
        if let Some(e) = s.eps1 {
            p.eps1 = e;
        }
        if let Some(e) = s.eps2 {
            p.eps2 = e;
        }
    }
    Ok(p)
}

fn sector_constants(spec: Option<&crate::config::SectorSpec>) -> SectorConstants {
    let mut k = SectorConstants::default();
    if let Some(s) = spec {
        k.c = s.c.or(k.c);
        k.c1 = s.c1.or(k.c1);
        k.c2 = s.c2.or(k.c2);
        k.c_s1 = s.c_s1.or(k.c_s1);
        k.c_s2 = s.c_s2.or(k.c_s2);
        k.c_t1 = s.c_t1.or(k.c_t1);
        k.c_t2 = s.c_t2.or(k.c_t2);
        if let Some(n) = s.samples {
            k.samples = n;
        }
    }
    k
}

pub fn run_compose(ctx: &Ctx) -> Result<i32, ConfigError> {
    let task = ctx.doc.compose.as_ref().ok_or_else(|| missing_task("compose"))?;
    let c1 = ctx.reg.certificate(&task.first)?;
    let c2 = ctx.reg.certificate(&task.second)?;
    let outcome = dispatch_compose(ctx.doc, task, c1, c2)?;
    match outcome {
        Outcome::Certified(composed) => {
            let name = task.output_name.as_deref().unwrap_or("composed");
            let doc = composed_doc(name, &composed.certificate, &composed.derivation);
            artifacts::write_json(&ctx.out.join("certificate.json"), &doc)?;
            for line in &composed.derivation {
                ctx.say(&format!("  {line}"));
            }
            ctx.say(&format!("compose: certified {:?} via {}", name, task.op));
            Ok(0)
        }
        Outcome::Failed(f) => {
            artifacts::write_json(
                &ctx.out.join("failure.json"),
                &FailureDoc { condition: f.condition.clone(), detail: f.detail.clone() },
            )?;
            ctx.say(&format!("compose: FAILED, {f}"));
            Ok(1)
        }
    }
}

fn dispatch_compose(
    doc: &ConfigDoc,
    task: &ComposeTask,
    c1: &Certificate,
    c2: &Certificate,
) -> Result<Outcome, ConfigError> {
    let op = task.op.as_str();
    let p = small_gain_params(doc, task.small_gain.as_ref())?;
    let k = sector_constants(task.sector.as_ref());
    Ok(match op {
        "cascade_nl2" => cascade_nl2(c1, c2)?,
        "feedback_nl2_no_input" => feedback_nl2_no_input(c1, c2)?,
        "feedback_nl2_max" => feedback_nl2_max(c1, c2, &p)?,
        "feedback_nl2_sum" => feedback_nl2_sum(c1, c2, &p)?,
        "feedback_iss_via_linear" => feedback_iss_via_linear(
            c1,
            c2,
            need(task.n1, "n1", op)?,
            need(task.n2, "n2", op)?,
            &k,
            &p,
        )?,
        "cascade_iiss_via_nl2" => cascade_iiss_via_nl2(
            c1,
            c2,
            need(task.n1, "n1", op)?,
            need(task.n2, "n2", op)?,
            need(task.m2, "m2", op)?,
            &k,
        )?,
        "cascade_iiss_direct" => cascade_iiss_direct(c1, c2, need(task.c, "c", op)?)?,
        "feedback_iiss_no_input" => feedback_iiss_no_input(
            c1,
            c2,
            need(task.n1, "n1", op)?,
            need(task.n2, "n2", op)?,
            &k,
        )?,
        "feedback_iiss_with_input" => feedback_iiss_with_input(
            c1,
            c2,
            need(task.n1, "n1", op)?,
            need(task.n2, "n2", op)?,
            &k,
            &p,
        )?,
        "feedback_iiss_direct" => {
            let rho1 = task
                .rho1
                .as_ref()
                .ok_or_else(|| ConfigError(format!("compose op {op:?} requires field \"rho1\"")))?;
            let rho2 = task
                .rho2
                .as_ref()
                .ok_or_else(|| ConfigError(format!("compose op {op:?} requires field \"rho2\"")))?;
            let rho = task
                .rho
                .as_ref()
                .ok_or_else(|| ConfigError(format!("compose op {op:?} requires field \"rho\"")))?;
            feedback_iiss_direct(
                c1,
                c2,
                &resolve_fn(doc, rho1)?,
                &resolve_fn(doc, rho2)?,
                &resolve_fn(doc, rho)?,
                need(task.k1, "k1", op)?,
                need(task.k2, "k2", op)?,
            )?
        }
        other => {
            return Err(ConfigError(format!(
                "unknown compose op {other:?}; available: cascade_nl2, \
                 feedback_nl2_no_input, feedback_nl2_max, feedback_nl2_sum, \
                 feedback_iss_via_linear, cascade_iiss_via_nl2, cascade_iiss_direct, \
                 feedback_iiss_no_input, feedback_iiss_with_input, feedback_iiss_direct"
            )))
        }
    })
}

pub fn run_smallgain(ctx: &Ctx) -> Result<i32, ConfigError> {
    let task = ctx.doc.smallgain.as_ref().ok_or_else(|| missing_task("smallgain"))?;
    let g1 = resolve_fn(ctx.doc, &task.gamma1)?;
    let g2 = resolve_fn(ctx.doc, &task.gamma2)?;
    let residual = ScalarGainFn::residual(ScalarGainFn::compose(g1, g2));
    let report = residual.certify_default();
    let pass = report.verdict();
    let detail = if pass {
        "small-gain condition holds: id - gamma1∘gamma2 certifies as class K-infinity".to_string()
    } else {
        format!(
            "residual not K∞: zero_at_zero = {}, monotone_on_grid = {}, unbounded = {}",
            report.zero_at_zero, report.monotone_on_grid, report.unbounded_advisory
        )
    };
    artifacts::write_json(
        &ctx.out.join("smallgain.json"),
        &SmallgainReport {
            pass,
            zero_at_zero: report.zero_at_zero,
            monotone_on_grid: report.monotone_on_grid,
            unbounded_advisory: report.unbounded_advisory,
            detail: detail.clone(),
        },
    )?;
    ctx.say(&format!("smallgain: {}", detail));
    Ok(if pass { 0 } else { 1 })
}

enum Produced {
    Plain(Certificate),
    Transformed(TransformedCertificate),
}

pub fn run_equiv(ctx: &Ctx) -> Result<i32, ConfigError> {
    let task = ctx.doc.equiv.as_ref().ok_or_else(|| missing_task("equiv"))?;
    let cert = ctx.reg.certificate(&task.certificate)?;
    let op = task.op.as_str();
    let produced = dispatch_equiv(ctx, task, cert)?;
    let name = task.output_name.as_deref().unwrap_or("equivalent");

    let doc = match &produced {
        Produced::Plain(c) => {
            let derivation = vec![format!(
                "equivalence {op}: {:?} certificate {:?} rebuilt as {:?}",
                cert.kind(),
                task.certificate,
                c.kind()
            )];
            composed_doc(name, c, &derivation)
        }
        Produced::Transformed(tc) => {
            let mut derivation = vec![format!(
                "equivalence {op}: {:?} certificate {:?} rebuilt as {:?} in new coordinates",
                cert.kind(),
                task.certificate,
                tc.certificate.kind()
            )];
            derivation.push(format!(
                "state envelope bounds: {}",
                provenance_label(tc.state_bounds.provenance)
            ));
            if let Some(b) = &tc.input_bounds {
                derivation.push(format!(
                    "input envelope bounds: {}",
                    provenance_label(b.provenance)
                ));
            }
            derivation.push(format!(
                "verify against trajectories mapped through transforms \
                 {name}_state{}",
                if tc.input_transform.is_some() {
                    format!(" and {name}_input")
                } else {
                    String::new()
                }
            ));
            transformed_doc(name, tc, &derivation)?
        }
    };
    artifacts::write_json(&ctx.out.join("certificate.json"), &doc)?;
    for line in &doc.derivation {
        ctx.say(&format!("  {line}"));
    }
    ctx.say(&format!("equiv: emitted {:?} via {op}", name));
    Ok(0)
}

fn provenance_label(p: BoundsProvenance) -> &'static str {
    match p {
        BoundsProvenance::Analytic => "analytic (exact at every radius)",
        BoundsProvenance::Sampled => "sampled (valid at grid resolution)",
    }
}

fn dispatch_equiv(ctx: &Ctx, task: &EquivTask, cert: &Certificate) -> Result<Produced, ConfigError> {
    let op = task.op.as_str();
    let needs = |slot: Option<usize>, field: &str| -> Result<usize, ConfigError> {
        slot.ok_or_else(|| ConfigError(format!("equiv op {op:?} requires field {field:?}")))
    };
    Ok(match op {
        "l2_to_alpha_integrable" => Produced::Plain(l2_to_alpha_integrable(cert)?),
        "alpha_integrable_to_l2" => {
            Produced::Transformed(alpha_integrable_to_l2(cert, needs(task.state_dim, "state_dim")?)?)
        }
        "linear_l2_to_iss" => Produced::Plain(linear_l2_to_iss(cert)?),
        "iss_to_linear_l2" => {
            let gain = task
                .gain
                .ok_or_else(|| ConfigError(format!("equiv op {op:?} requires field \"gain\"")))?;
            Produced::Transformed(iss_to_linear_l2(
                cert,
                gain,
                needs(task.state_dim, "state_dim")?,
                needs(task.input_dim, "input_dim")?,
            )?)
        }
        "nonlinear_l2_to_iiss" => Produced::Plain(nonlinear_l2_to_iiss(cert)?),
        "iiss_to_nonlinear_l2" => {
            let lambda = task
                .lambda
                .ok_or_else(|| ConfigError(format!("equiv op {op:?} requires field \"lambda\"")))?;
            Produced::Transformed(iiss_to_nonlinear_l2(
                cert,
                lambda,
                needs(task.state_dim, "state_dim")?,
                needs(task.input_dim, "input_dim")?,
            )?)
        }
        "max_to_sum" => Produced::Plain(max_to_sum(cert)?),
        "sum_to_max" => Produced::Plain(sum_to_max(cert)?),
        "transform_cert" => {
            let st_name = task.state_transform.as_ref().ok_or_else(|| {
                ConfigError(format!("equiv op {op:?} requires field \"state_transform\""))
            })?;
            let st = ctx.reg.transform(st_name)?.clone();
            let it = match &task.input_transform {
                Some(name) => Some(ctx.reg.transform(name)?.clone()),
                None => None,
            };
            Produced::Transformed(apply_transform_cert(cert, st, it)?)
        }
        other => {
            return Err(ConfigError(format!(
                "unknown equiv op {other:?}; available: l2_to_alpha_integrable, \
                 alpha_integrable_to_l2, linear_l2_to_iss, iss_to_linear_l2, \
                 nonlinear_l2_to_iiss, iiss_to_nonlinear_l2, max_to_sum, sum_to_max, \
                 transform_cert"
            )))
        }
    })
}

pub fn run_falsify(ctx: &Ctx) -> Result<i32, ConfigError> {
    let task = ctx.doc.falsify.as_ref().ok_or_else(|| missing_task("falsify"))?;
    let beta_hat = resolve_fn(ctx.doc, &task.beta_hat)?;
    let s = &ctx.doc.settings;
    match gaincert_core::simulate::falsify_linear_l2_bilinear(&beta_hat, task.gamma_bar, s.dt) {
        Ok(cx) => {
            artifacts::write_json(
                &ctx.out.join("counterexample.json"),
                &CounterexampleDoc {
                    x0: cx.x0,
                    t_star: cx.t_star,
                    input_value: cx.input_value,
                    lhs: cx.lhs,
                    rhs: cx.rhs,
                    margin_ratio: cx.lhs / cx.rhs - 1.0,
                },
            )?;
            artifacts::write_trajectory_csv(&ctx.out.join("witness.csv"), &cx.trajectory)?;
            ctx.say(&format!(
                "falsify: counterexample at t* = {} with ∫|x|² = {:.6e} > claimed {:.6e}",
                cx.t_star, cx.lhs, cx.rhs
            ));
            Ok(0)
        }
        Err(GainError::Range(detail)) => {
            artifacts::write_json(
                &ctx.out.join("target_held.json"),
                &TargetHeldDoc { held: true, detail: detail.clone() },
            )?;
            ctx.say(&format!("falsify: {detail}"));
            Ok(1)
        }
        Err(e) => Err(e.into()),
    }
}

pub fn run_selftest(out: &Path, quiet: bool) -> Result<i32, ConfigError> {
    let results = crate::acceptance::run_all(quiet);
    let pass = results.iter().all(|c| c.pass);
    let doc = artifacts::AcceptanceDoc {
        pass,
        criteria: results
            .into_iter()
            .map(|c| artifacts::CriterionDoc {
                index: c.index,
                name: c.name.to_string(),
                pass: c.pass,
                detail: c.detail,
                seconds: c.seconds,
            })
            .collect(),
    };
    artifacts::write_json(&out.join("acceptance.json"), &doc)?;
    Ok(if pass { 0 } else { 1 })
}
