//! The four subcommands.

use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use masterop::defect::{defect_estimate, DefectSchedule};
use masterop::families::{phi_family, psi_family, w_family, FamilyParams, SpatialRegime};
use masterop::funcdsl::{compile_text, DslContext};
use masterop::kernel::{decay_sweep, DecayGrid};
use masterop::operators::{fractional_laplacian, marchaud, master_op};
use masterop::regions::{
    c1_schedule, partition_check_step1, partition_check_step2, seeded_rng, verify_ratio_c2_c3,
    verify_ratio_step2, EnvelopeReport,
};
use masterop::{FunctionHandle, Horizon, SpaceTimePoint};

use crate::config::{resolve, Format, GlobalArgs, RunConfig};
use crate::output::{num, write_csv, write_json};
use crate::CliError;

fn with_pool<T: Send>(cfg: &RunConfig, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match cfg.jobs {
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| CliError::Usage(format!("cannot start {j} workers: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// `x1,x2,...:t`; missing trailing coordinates are zero.
fn parse_point(text: &str, n: usize) -> Result<SpaceTimePoint, CliError> {
    let bad = || CliError::Usage(format!("point '{text}' must look like x1[,x2,..]:t"));
    let (xs, t) = text.split_once(':').ok_or_else(bad)?;
    let mut x: Vec<f64> = xs
        .split(',')
        .filter(|c| !c.trim().is_empty())
        .map(|c| c.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_, _>>()?;
    if x.len() > n {
        return Err(CliError::Usage(format!("point '{text}' has {} coordinates, n = {n}", x.len())));
    }
    x.resize(n, 0.0);
    let t = t.trim().parse::<f64>().map_err(|_| bad())?;
    Ok(SpaceTimePoint::new(x, t))
}

fn point_label(p: &SpaceTimePoint) -> String {
    let xs: Vec<String> = p.x.iter().map(|v| format!("{v}")).collect();
    format!("{}:{}", xs.join(","), p.t)
}

fn dsl(cfg: &RunConfig) -> DslContext {
    DslContext { dim: cfg.n, s: cfg.s, normalization: cfg.normalization }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OpKind {
    Master,
    Flap,
    Marchaud,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Expression for u(x, t).
    pub expr: String,
    #[arg(long, value_enum, default_value = "master")]
    pub op: OpKind,
    /// Spatial point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x: Vec<f64>,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub t: f64,
}

#[derive(Serialize)]
struct EvalOut {
    value: f64,
    err_estimate: f64,
    nodes_used: usize,
    truncation_flag: bool,
}

pub fn eval(a: &EvalArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let mut cfg = resolve(g, Format::Json)?;
    if let Some(t) = cfg.tol {
        cfg.quad.rel_tol = t;
        cfg.quad.validate()?;
    }
    let u = compile_text(&a.expr, &dsl(&cfg))?;
    let p = cfg.params()?;
    let mut x = a.x.clone();
    if x.len() > cfg.n {
        return Err(CliError::Usage(format!("--x has {} coordinates, n = {}", x.len(), cfg.n)));
    }
    x.resize(cfg.n, 0.0);
    let at = SpaceTimePoint::new(x, a.t);
    let r = with_pool(&cfg, || match a.op {
        OpKind::Master => master_op(&u, &at, &p, &cfg.quad),
        OpKind::Flap => fractional_laplacian(&u, &at.x, &p, &cfg.quad),
        OpKind::Marchaud => marchaud(&u, at.t, &p, &cfg.quad),
    })??;
    let out = EvalOut {
        value: r.value,
        err_estimate: r.err_estimate,
        nodes_used: r.nodes_used,
        truncation_flag: r.truncation_flag,
    };
    match cfg.format {
        Format::Json => write_json(&cfg.out, &out),
        Format::Csv => write_csv(
            &cfg.out,
            &["value", "err_estimate", "nodes_used", "truncation_flag"],
            &[vec![num(out.value), num(out.err_estimate), out.nodes_used.to_string(), out.truncation_flag.to_string()]],
        ),
    }
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// 1: spatial family, 2: temporal family, 3: space-time family.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub which: u8,
    #[arg(long = "j", value_delimiter = ',', default_value = "2,4,8,16")]
    pub j: Vec<u32>,
    /// Amplitude exponent; defaults to the critical value (2 beta s or beta s).
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Probe `x1[,x2..]:t`, repeatable.
    #[arg(long = "probe", allow_hyphen_values = true)]
    pub probes: Vec<String>,
}

#[derive(Serialize)]
struct CounterRow {
    j: u32,
    probe: String,
    value: f64,
    target: f64,
    abs_err: f64,
    /// Set on the last row of each probe.
    converged: Option<bool>,
}

pub fn counterexample(a: &CounterexampleArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let cfg = resolve(g, Format::Csv)?;
    let p = cfg.params()?;
    if a.j.is_empty() || a.j.windows(2).any(|w| w[0] >= w[1]) || a.j[0] == 0 {
        return Err(CliError::Usage("--j must be a strictly increasing list of positive integers".into()));
    }
    let s = cfg.s;
    let alpha = a.alpha.unwrap_or(match a.which {
        1 => 2.0 * a.beta * s,
        2 => a.beta * s,
        _ => 2.0 * s,
    });
    let fam = FamilyParams::new(1, alpha, a.beta, a.gamma, s, cfg.n, cfg.normalization)?;
    let (target, default_tol) = match a.which {
        1 => match fam.regime() {
            SpatialRegime::Critical => (-fam.c0, 0.02 * fam.c0),
            SpatialRegime::Vanishing => (0.0, 1e-3),
            SpatialRegime::Divergent => (f64::NEG_INFINITY, 0.0),
        },
        2 => {
            let crit = a.beta * s;
            if (alpha - crit).abs() <= 1e-12 * crit {
                (-fam.c1, 0.02 * fam.c1)
            } else if alpha < crit {
                (0.0, 1e-3)
            } else {
                (f64::NEG_INFINITY, 0.0)
            }
        }
        _ => {
            fam.check_growth_constraint()?;
            (-1.0, 5e-2)
        }
    };
    let tol = cfg.tol.unwrap_or(default_tol);
    let probes: Vec<SpaceTimePoint> = if a.probes.is_empty() {
        let defaults: &[&str] = if a.which == 3 { &["0:0", "1:1", "-1:0.5"] } else { &["0:0"] };
        defaults.iter().map(|t| parse_point(t, cfg.n)).collect::<Result<_, _>>()?
    } else {
        a.probes.iter().map(|t| parse_point(t, cfg.n)).collect::<Result<_, _>>()?
    };
    let grid: Vec<(usize, u32)> =
        (0..probes.len()).flat_map(|i| a.j.iter().map(move |&j| (i, j))).collect();
    let values: Vec<f64> = with_pool(&cfg, || {
        grid.par_iter()
            .map(|&(i, j)| {
                let at = &probes[i];
                let r = match a.which {
                    1 => fractional_laplacian(&phi_family(j, alpha, a.beta), &at.x, &p, &cfg.quad)?,
                    2 => marchaud(&psi_family(j, alpha, a.beta), at.t, &p, &cfg.quad)?,
                    _ => master_op(&w_family(j, a.gamma, s, cfg.n, cfg.normalization)?, at, &p, &cfg.quad)?,
                };
                Ok(r.value)
            })
            .collect::<masterop::Result<Vec<f64>>>()
    })??;
    let last_j = *a.j.last().unwrap_or(&0);
    let rows: Vec<CounterRow> = grid
        .iter()
        .zip(&values)
        .map(|(&(i, j), &value)| {
            let abs_err = (value - target).abs();
            CounterRow {
                j,
                probe: point_label(&probes[i]),
                value,
                target,
                abs_err,
                converged: (j == last_j).then_some(abs_err <= tol),
            }
        })
        .collect();
    match cfg.format {
        Format::Json => write_json(&cfg.out, &rows),
        Format::Csv => {
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    vec![
                        r.j.to_string(),
                        r.probe.clone(),
                        num(r.value),
                        num(r.target),
                        num(r.abs_err),
                        r.converged.map(|c| c.to_string()).unwrap_or_default(),
                    ]
                })
                .collect();
            write_csv(&cfg.out, &["j", "probe", "value", "target", "abs_err", "converged"], &body)
        }
    }
}

#[derive(Debug, Args)]
pub struct DefectArgs {
    /// `w`, `phi`, `psi`, or an expression used for every j.
    #[arg(long, default_value = "w", allow_hyphen_values = true)]
    pub family: String,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    /// Expression for the pointwise limit of the family.
    #[arg(long, default_value = "0", allow_hyphen_values = true)]
    pub limit: String,
    #[arg(long = "r", value_delimiter = ',', default_value = "10,20,40")]
    pub r: Vec<f64>,
    #[arg(long = "j", value_delimiter = ',', default_value = "32,64,128")]
    pub j: Vec<u32>,
    /// Probe `x1[,x2..]:t`, repeatable; five points in `Q_{R/3}` by default.
    #[arg(long = "probe", allow_hyphen_values = true)]
    pub probes: Vec<String>,
}

pub fn defect(a: &DefectArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let cfg = resolve(g, Format::Csv)?;
    let p = cfg.params()?;
    let (n, s, mode, beta, gamma) = (cfg.n, cfg.s, cfg.normalization, a.beta, a.gamma);
    let ctx = dsl(&cfg);
    let family: Box<dyn Fn(u32) -> masterop::Result<FunctionHandle> + Sync> = match a.family.as_str() {
        "w" => {
            if gamma <= s || gamma.is_nan() {
                return Err(masterop::Error::Constraint(format!("gamma = {gamma} must exceed s = {s}")).into());
            }
            Box::new(move |j| w_family(j, gamma, s, n, mode))
        }
        "phi" => {
            let alpha = a.alpha.unwrap_or(2.0 * beta * s);
            Box::new(move |j| Ok(phi_family(j, alpha, beta)))
        }
        "psi" => {
            let alpha = a.alpha.unwrap_or(beta * s);
            Box::new(move |j| Ok(psi_family(j, alpha, beta)))
        }
        text => {
            let h = compile_text(text, &ctx)?;
            Box::new(move |_| Ok(h.clone()))
        }
    };
    let limit = compile_text(&a.limit, &ctx)?;
    let mut sched = DefectSchedule::with_default_probes(n, a.r.clone(), a.j.clone());
    if !a.probes.is_empty() {
        sched.probes = a.probes.iter().map(|t| parse_point(t, n)).collect::<Result<_, _>>()?;
    }
    if let Some(t) = cfg.tol {
        sched.tol = t;
    }
    let report = with_pool(&cfg, || defect_estimate(family.as_ref(), &limit, &sched, &p, &cfg.quad))??;
    match cfg.format {
        Format::Json => write_json(&cfg.out, &report),
        Format::Csv => {
            let body: Vec<Vec<String>> = report
                .samples
                .iter()
                .map(|r| {
                    let px: Vec<String> = r.at.x.iter().map(|v| num(*v)).collect();
                    vec![r.j.to_string(), num(r.r), px.join(" "), num(r.at.t), num(r.f_value), num(r.err)]
                })
                .collect();
            write_csv(&cfg.out, &["j", "R", "px", "pt", "F", "err"], &body)?;
            let summary = json!({
                "b_estimate": report.b_estimate,
                "b_spread": report.b_spread,
                "monotone_ok": report.monotone_ok,
                "converged": report.converged,
                "liminf_bound_M": report.liminf_bound_m,
                "N_threshold": report.n_threshold,
            });
            eprintln!("{summary}");
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CheckKind {
    Partition1,
    Partition2,
    C1,
    C2c3,
    Step2,
    Decay,
    Reductions,
    All,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Checks to run.
    #[arg(value_enum, default_value = "all")]
    pub what: Vec<CheckKind>,
    #[arg(long = "r", value_delimiter = ',', default_value = "100,1000,10000")]
    pub r: Vec<f64>,
    /// Samples per check; defaults to 100000 for partitions and 1000 for ratios.
    #[arg(long)]
    pub samples: Option<usize>,
}

#[derive(Debug, Serialize)]
struct CheckOut {
    check: String,
    #[serde(rename = "R", skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    region: Option<String>,
    pass: bool,
    max_violation: f64,
    envelope: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    fitted_c: Option<f64>,
    samples: usize,
}

fn from_envelope(check: &str, e: &EnvelopeReport) -> CheckOut {
    CheckOut {
        check: check.into(),
        r: Some(e.r),
        region: Some(e.region.name().into()),
        pass: e.pass,
        max_violation: e.max_observed,
        envelope: e.envelope,
        fitted_c: Some(e.fitted_c),
        samples: e.samples,
    }
}

pub fn verify(a: &VerifyArgs, g: &GlobalArgs) -> Result<(), CliError> {
    let cfg = resolve(g, Format::Json)?;
    let p = cfg.params()?;
    if a.samples == Some(0) {
        return Err(CliError::Usage("--samples must be at least 1".into()));
    }
    if a.r.iter().any(|r| r.is_nan() || *r <= 0.0) || a.r.is_empty() {
        return Err(CliError::Usage("--r must list positive radii".into()));
    }
    let all = a.what.contains(&CheckKind::All);
    let want = |k: CheckKind| all || a.what.contains(&k);
    let part_n = a.samples.unwrap_or(100_000);
    let ratio_n = a.samples.unwrap_or(1_000);
    let n = cfg.n;
    let mut rng = seeded_rng(cfg.seed);
    let mut out: Vec<CheckOut> = Vec::new();

    let partition = |name: &str, rep: masterop::regions::PartitionReport| CheckOut {
        check: name.into(),
        r: None,
        region: None,
        pass: rep.pass,
        max_violation: (rep.double_assigned + rep.unassigned) as f64,
        envelope: 0.0,
        fitted_c: None,
        samples: rep.samples,
    };
    let origin = vec![0.0; n];
    if want(CheckKind::Partition1) {
        for &r in &a.r {
            let mut c = partition("partition1", partition_check_step1(&origin, 0.0, r, part_n, &mut rng)?);
            c.r = Some(r);
            out.push(c);
        }
    }
    if want(CheckKind::Partition2) {
        for &r in &a.r {
            let mut c = partition("partition2", partition_check_step2(n, 0.0, r, part_n, &mut rng)?);
            c.r = Some(r);
            out.push(c);
        }
    }
    if want(CheckKind::C1) {
        let (reps, decreasing) = c1_schedule(&origin, 0.0, &a.r, ratio_n, &mut rng)?;
        out.extend(reps.iter().map(|e| from_envelope("c1", e)));
        let first = reps.first().map_or(0.0, |e| e.max_observed);
        let last = reps.last().map_or(0.0, |e| e.max_observed);
        out.push(CheckOut {
            check: "c1_decreasing".into(),
            r: None,
            region: None,
            pass: decreasing,
            max_violation: last,
            envelope: first,
            fitted_c: None,
            samples: reps.iter().map(|e| e.samples).sum(),
        });
    }
    if want(CheckKind::C2c3) {
        let mut x = vec![0.0; n];
        x[0] = 1.0;
        for &r in &a.r {
            let (b, c) = verify_ratio_c2_c3(&x, 0.0, r, ratio_n, &mut rng)?;
            out.push(from_envelope("c2", &b));
            out.push(from_envelope("c3", &c));
        }
    }
    if want(CheckKind::Step2) {
        for &r in &a.r {
            for e in verify_ratio_step2(&p, 1.0, r, ratio_n, &mut rng)? {
                out.push(from_envelope("step2", &e));
            }
        }
    }
    if want(CheckKind::Decay) {
        let sweep = decay_sweep(&p, &DecayGrid::check_default())?;
        out.push(CheckOut {
            check: "decay".into(),
            r: None,
            region: None,
            pass: sweep.violations == 0,
            max_violation: sweep.max_ratio,
            envelope: 1.0,
            fitted_c: Some(sweep.lambda),
            samples: sweep.points,
        });
    }
    if want(CheckKind::Reductions) {
        let tol = cfg.tol.unwrap_or(1e-4);
        let ctx = dsl(&cfg);
        let cos = compile_text("cos(x1)", &ctx)?;
        let mut x = vec![0.0; n];
        x[0] = 0.3;
        // cos(x1) has no bounded support, so the master route needs a finite horizon
        let mut quad = cfg.quad.clone();
        if quad.horizon == Horizon::Auto {
            quad.horizon = Horizon::Finite(200.0);
        }
        let m = master_op(&cos, &SpaceTimePoint::new(x.clone(), 0.0), &p, &quad)?;
        let f = fractional_laplacian(&cos, &x, &p, &cfg.quad)?;
        let rel = (m.value - f.value).abs() / f.value.abs().max(1e-300);
        out.push(CheckOut {
            check: "reduction_flap".into(),
            r: None,
            region: None,
            pass: rel <= tol,
            max_violation: rel,
            envelope: tol,
            fitted_c: None,
            samples: m.nodes_used + f.nodes_used,
        });
        let et = compile_text("exp(t)", &ctx)?;
        let m = master_op(&et, &SpaceTimePoint::new(vec![0.0; n], 0.2), &p, &cfg.quad)?;
        let d = marchaud(&et, 0.2, &p, &cfg.quad)?;
        let rel = (m.value - d.value).abs() / d.value.abs().max(1e-300);
        out.push(CheckOut {
            check: "reduction_marchaud".into(),
            r: None,
            region: None,
            pass: rel <= tol,
            max_violation: rel,
            envelope: tol,
            fitted_c: None,
            samples: m.nodes_used + d.nodes_used,
        });
    }
    let all_pass = out.iter().all(|c| c.pass);
    match cfg.format {
        Format::Json => write_json(&cfg.out, &json!({ "pass": all_pass, "checks": out }))?,
        Format::Csv => {
            let body: Vec<Vec<String>> = out
                .iter()
                .map(|c| {
                    vec![
                        c.check.clone(),
                        c.r.map(num).unwrap_or_default(),
                        c.region.clone().unwrap_or_default(),
                        c.pass.to_string(),
                        num(c.max_violation),
                        num(c.envelope),
                        c.fitted_c.map(num).unwrap_or_default(),
                        c.samples.to_string(),
                    ]
                })
                .collect();
            write_csv(
                &cfg.out,
                &["check", "R", "region", "pass", "max_violation", "envelope", "fitted_c", "samples"],
                &body,
            )?;
        }
    }
    if all_pass {
        Ok(())
    } else {
        Err(CliError::ChecksFailed)
    }
}
