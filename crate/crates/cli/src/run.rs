//! The six pipelines. Each returns an [`Outcome`]; nothing touches the disk here.

use std::sync::Arc;

use hypdim::bowen::{bowen_dimension, default_bases, dimension_table, lyapunov_exponent, pressure_curve, Lyapunov};
use hypdim::catalog::MapDescriptor;
use hypdim::export::{fmt17, Table};
use hypdim::julia::backward_orbit_sample;
use hypdim::measure::{build_nu_s, conformality_residual, euclidean_residual, holder_test_functions, MeasureSummary};
use hypdim::nevanlinna::{
    borel_from_counting, characteristic, counting_function, divergence_check, fmt_constant, profile_table,
    sharp_smt_fit, uniform_borel_bound,
};
use hypdim::pipeline::{julia_seeds, verify, GateFailure};
use hypdim::sigma::SigmaMetric;
use hypdim::sweep::dimension_sweep;
use hypdim::transfer::{invariant_density, iterate_pressure, PivotGraph, TailMode};
use hypdim::{Error, Result};
use num_complex::Complex;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Pipeline, RunConfig};
use crate::report::{Artifacts, Status};

type C = Complex<f64>;

pub struct Outcome {
    pub status: Status,
    pub h: Option<f64>,
    pub gates: Option<Value>,
    pub failures: Vec<GateFailure>,
    pub results: Value,
    pub artifacts: Artifacts,
}

impl Outcome {
    pub fn empty() -> Self {
        Self {
            status: Status::Ok,
            h: None,
            gates: None,
            failures: Vec::new(),
            results: Value::Null,
            artifacts: Artifacts::default(),
        }
    }
}

fn value<S: Serialize>(x: &S) -> Value {
    serde_json::to_value(x).unwrap_or(Value::Null)
}

pub fn execute(pipeline: Pipeline, cfg: &RunConfig) -> Result<Outcome> {
    let mut out = Outcome::empty();
    match pipeline {
        Pipeline::Verify => run_verify(cfg, &mut out)?,
        Pipeline::Pressure => run_pressure(cfg, &mut out)?,
        Pipeline::Dimension => run_dimension(cfg, &mut out)?,
        Pipeline::Sweep => run_sweep(cfg, &mut out)?,
        Pipeline::Nevanlinna => run_nevanlinna(cfg, &mut out)?,
        Pipeline::Measure => run_measure(cfg, &mut out)?,
    }
    Ok(out)
}

fn map(cfg: &RunConfig) -> Result<&MapDescriptor<f64>> {
    cfg.map().map_err(|e| Error::Config(e.0))
}

/// Runs the gates; on success returns the normalized map and the sample seeds.
fn gated(cfg: &RunConfig, out: &mut Outcome) -> Result<Option<(MapDescriptor<f64>, Vec<C>)>> {
    let v = verify(map(cfg)?, &cfg.gates)?;
    out.gates = Some(value(&v.report));
    out.failures = v.report.failures.clone();
    if !v.report.passed() {
        out.status = Status::GateFailure;
        return Ok(None);
    }
    let seeds = v.sample.map(|s| s.seeds).unwrap_or_default();
    Ok(Some((v.normalized, seeds)))
}

fn graph_for(cfg: &RunConfig, desc: &MapDescriptor<f64>, seeds: &[C]) -> Result<Arc<PivotGraph<f64>>> {
    let metric = SigmaMetric::for_map(desc);
    let g = PivotGraph::build(desc, &metric, seeds, &cfg.grid)?;
    if !g.closed {
        log::warn!("pivot closure stopped at the cap of {} pivots", cfg.grid.max_pivots);
    }
    Ok(Arc::new(g))
}

fn graph_info(g: &PivotGraph<f64>) -> Value {
    json!({
        "pivots": g.len(),
        "edges": g.edge_count(),
        "closed": g.closed,
        "truncation_radius": g.truncation_radius,
        "cell_width": g.cell_width,
    })
}

fn run_verify(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let passed = gated(cfg, out)?.is_some();
    out.results = json!({ "passed": passed });
    Ok(())
}

fn run_pressure(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let Some((desc, seeds)) = gated(cfg, out)? else {
        return Ok(());
    };
    let ts = cfg.t_grid().map_err(|e| Error::Config(e.0))?;
    let graph = graph_for(cfg, &desc, &seeds)?;
    let curve = pressure_curve(&graph, &ts, &default_bases(&graph), &cfg.dimension.pressure)?;
    let mut trace = Table::new(&["t", "n", "log_ratio"]);
    for s in &curve.samples {
        for (n, r) in s.trace.iter().enumerate() {
            trace.push(vec![fmt17(s.t), (n + 1).to_string(), fmt17(*r)]);
        }
    }
    out.artifacts.table("curves/pressure.csv", &curve.to_table());
    out.artifacts.table("curves/pressure_trace.csv", &trace);
    let samples: Vec<Value> = curve
        .samples
        .iter()
        .map(|s| {
            json!({
                "t": s.t, "p": s.p, "stderr": s.stderr, "n_used": s.n_used,
                "base_point_spread": s.base_point_spread, "per_base": s.per_base, "converged": s.converged,
            })
        })
        .collect();
    out.results = json!({
        "graph": graph_info(&graph),
        "t_min": curve.t_min,
        "samples": samples,
        "second_differences": curve.second_differences(),
        "shape_flags": curve.shape_flags,
        "inconclusive": curve.inconclusive,
    });
    if curve.inconclusive {
        out.status = Status::NumericFailure;
    }
    Ok(())
}

#[derive(Serialize)]
struct MeasureRun {
    s: f64,
    summary: MeasureSummary<f64>,
    eigen_residuals: Vec<Option<f64>>,
    euclidean_residuals: Vec<Option<f64>>,
    max_residual: Option<f64>,
    multiplicativity_defect: f64,
    level_shift_defect: f64,
}

struct MeasureStage {
    p_drop: f64,
    runs: Vec<MeasureRun>,
    tail_profile: Vec<(f64, f64)>,
    fitted_tail_exponent: Option<f64>,
    density: Value,
    lyapunov: Lyapunov<f64>,
    atoms: Table,
    density_table: Table,
}

/// `ν_s` at each gap above `P_drop(t)`, the residuals, then `ψ` and the Lyapunov exponent.
fn measure_stage(cfg: &RunConfig, graph: &Arc<PivotGraph<f64>>, t: f64) -> Result<MeasureStage> {
    let k = &cfg.measure;
    let bases = default_bases(graph);
    let p = iterate_pressure(graph, t, &bases, &cfg.drop_pressure())?.p;
    let tests = holder_test_functions(graph);
    let mut runs = Vec::new();
    let mut last = None;
    for &gap in &k.s_gaps {
        let nu = build_nu_s(graph, t, p + gap, graph.points[0], &k.config)?;
        let rep = conformality_residual(&nu, p, &tests);
        runs.push(MeasureRun {
            s: p + gap,
            summary: nu.summary(),
            max_residual: rep.max_residual(),
            eigen_residuals: rep.eigen_residuals,
            euclidean_residuals: euclidean_residual(&nu, p, &tests),
            multiplicativity_defect: nu.multiplicativity_defect(),
            level_shift_defect: nu.level_shift_defect(),
        });
        last = Some((nu, rep.tail_profile, rep.fitted_tail_exponent));
    }
    let (nu, tail_profile, fitted_tail_exponent) = last.expect("at least one gap");
    let dens = invariant_density(graph, t, p, k.density_iterations, TailMode::Drop, Some(&nu.weighted_points()))?;
    let lyapunov = lyapunov_exponent(&nu, Some(&dens.psi))?;
    let mut density_table = Table::new(&["re", "im", "psi"]);
    for (z, v) in graph.points.iter().zip(&dens.psi.values) {
        density_table.push_floats(&[z.re, z.im, *v]);
    }
    Ok(MeasureStage {
        p_drop: p,
        runs,
        tail_profile,
        fitted_tail_exponent,
        density: json!({
            "iterations": k.density_iterations,
            "fixed_point_residual": dens.fixed_point_residual,
            "lower": dens.lower,
            "upper": dens.upper,
        }),
        lyapunov,
        atoms: nu.to_table(),
        density_table,
    })
}

fn run_dimension(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let Some((desc, seeds)) = gated(cfg, out)? else {
        return Ok(());
    };
    let graph = graph_for(cfg, &desc, &seeds)?;
    let mut res = bowen_dimension(&graph, &default_bases(&graph), &cfg.dimension)?;
    let stage = measure_stage(cfg, &graph, res.h);
    let (measure, lyap_error) = match stage {
        Ok(st) => {
            res.lyapunov = Some(st.lyapunov);
            let last = st.runs.last().map(|r| value(&r.summary));
            (last, None)
        }
        Err(e) => (None, Some(e.to_string())),
    };
    out.artifacts.table("curves/dimension.csv", &dimension_table(&res));
    out.h = Some(res.h);
    out.results = json!({
        "graph": graph_info(&graph),
        "h": res.h,
        "bracket": res.bracket,
        "bounds_ok": res.bounds_ok,
        "bisection_steps": res.steps.len() - 1,
        "pressure_evaluations": res.evaluations.len(),
        "lyapunov": res.lyapunov,
        "lyapunov_error": lyap_error,
        "measure": measure,
    });
    if !res.bounds_ok {
        out.status = Status::NumericFailure;
    }
    Ok(())
}

fn run_measure(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let Some((desc, seeds)) = gated(cfg, out)? else {
        return Ok(());
    };
    let graph = graph_for(cfg, &desc, &seeds)?;
    let t = match cfg.measure.t {
        Some(t) => t,
        None => {
            let h = bowen_dimension(&graph, &default_bases(&graph), &cfg.dimension)?.h;
            out.h = Some(h);
            h
        }
    };
    let st = measure_stage(cfg, &graph, t)?;
    let mut tail = Table::new(&["R", "mass"]);
    for &(r, m) in &st.tail_profile {
        tail.push_floats(&[r, m]);
    }
    let mut res = Table::new(&["s", "test", "sigma_residual", "euclidean_residual"]);
    for run in &st.runs {
        for (i, (a, b)) in run.eigen_residuals.iter().zip(&run.euclidean_residuals).enumerate() {
            res.push(vec![
                fmt17(run.s),
                i.to_string(),
                fmt17(a.unwrap_or(f64::NAN)),
                fmt17(b.unwrap_or(f64::NAN)),
            ]);
        }
    }
    out.artifacts.table("atoms/atoms.csv", &st.atoms);
    out.artifacts.table("curves/tail.csv", &tail);
    out.artifacts.table("curves/residuals.csv", &res);
    out.artifacts.table("curves/density.csv", &st.density_table);
    let maxes: Vec<Option<f64>> = st.runs.iter().map(|r| r.max_residual).collect();
    let decreasing = maxes.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if b < a));
    out.results = json!({
        "graph": graph_info(&graph),
        "t": t,
        "p_drop": st.p_drop,
        "runs": st.runs,
        "residuals_decrease": decreasing,
        "tail_profile": st.tail_profile,
        "fitted_tail_exponent": st.fitted_tail_exponent,
        "density": st.density,
        "lyapunov": st.lyapunov,
    });
    Ok(())
}

fn run_sweep(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let spec = cfg
        .family
        .as_ref()
        .ok_or_else(|| Error::Config("the sweep pipeline needs a `family`".into()))?;
    let res = dimension_sweep(spec, &cfg.sweep_config())?;
    out.artifacts.table("curves/sweep.csv", &res.to_table());
    out.failures = res.entries.iter().flat_map(|e| e.failures.iter().cloned()).collect();
    if !out.failures.is_empty() {
        out.status = Status::GateFailure;
    } else if res.entries.iter().any(|e| e.error.is_some() || e.h.is_none()) {
        out.status = Status::NumericFailure;
    }
    if let [e] = res.entries.as_slice() {
        out.h = e.h;
    }
    out.results = value(&res);
    Ok(())
}

fn run_nevanlinna(cfg: &RunConfig, out: &mut Outcome) -> Result<()> {
    let desc = map(cfg)?;
    let k = &cfg.nevanlinna;
    let exps = desc.growth_exponents();
    let rho = exps.order_rho;
    let targets: Vec<C> = match &k.targets {
        Some(t) => t.clone(),
        None => {
            let seeds = julia_seeds(desc, cfg.gates.seed_radius, cfg.gates.seed_grid);
            if seeds.is_empty() {
                return Err(Error::Numeric("no repelling fixed point to seed Julia targets".into()));
            }
            let sample = backward_orbit_sample(desc, &seeds[..1], &cfg.gates.sampler)?;
            sample.points.iter().take(k.n_targets).copied().collect()
        }
    };
    let uniform = uniform_borel_bound(desc, k.u, &targets, k.radius)?;

    let r_max = k.r_max.unwrap_or_else(|| 100f64.powf(1.0 / rho.max(0.5)).max(10.0));
    let n = k.r_points;
    let ch_grid: Vec<f64> = (0..n).map(|i| r_max.powf(i as f64 / (n - 1) as f64)).collect();
    let ch = characteristic(desc, &ch_grid, &cfg.gates.characteristic)?;
    let count_grid: Vec<f64> = (0..n).map(|i| k.radius.powf(i as f64 / (n - 1) as f64)).collect();
    let profiles = targets
        .iter()
        .map(|&a| counting_function(desc, a, &count_grid, None))
        .collect::<Result<Vec<_>>>()?;

    let mut borel = Table::new(&[
        "target_re", "target_im", "partial_sum", "tail_bound", "tail_estimate", "count", "from_counting",
    ]);
    let mut cross = Vec::new();
    for (s, prof) in uniform.per_target.iter().zip(&profiles) {
        let q = borel_from_counting(prof, k.u, k.radius, s.tail_estimate);
        cross.push(json!({
            "target": s.target,
            "series": s.value(),
            "from_counting": q.value,
            "relative_gap": (q.value - s.value()).abs() / s.value().abs().max(f64::MIN_POSITIVE),
            "converged": q.converged,
        }));
        borel.push(vec![
            fmt17(s.target.re),
            fmt17(s.target.im),
            fmt17(s.partial_sum),
            fmt17(s.tail_bound),
            fmt17(s.tail_estimate),
            s.count.to_string(),
            fmt17(q.value),
        ]);
    }
    let mut ch_table = Table::new(&["r", "T"]);
    for &(r, t) in &ch.grid {
        ch_table.push_floats(&[r, t]);
    }
    out.artifacts.table("curves/borel.csv", &borel);
    out.artifacts.table("curves/characteristic.csv", &ch_table);
    for (i, prof) in profiles.iter().enumerate() {
        out.artifacts.table(&format!("curves/counting_{i:02}.csv"), &profile_table(prof, &ch));
    }
    let divergence = divergence_check(&ch, rho, cfg.gates.divergence_a, cfg.gates.divergence_b);
    out.results = json!({
        "exponents": exps,
        "u": k.u,
        "radius": k.radius,
        "targets": targets,
        "borel": uniform.per_target,
        "borel_from_counting": cross,
        "uniform_bound": {
            "m_u": uniform.m_u,
            "a_u": uniform.a_u,
            "references": uniform.references,
            "triangle_holds": uniform.triangle_holds,
            "diverges": uniform.diverges,
        },
        "characteristic": {
            "r_max": r_max,
            "converged": ch.converged,
            "nondecreasing": ch.is_nondecreasing(),
            "fitted_order": ch.fitted_order(r_max / 10.0, r_max),
        },
        "fmt_constant": fmt_constant(&profiles, &ch),
        "sharp_smt": sharp_smt_fit(&profiles, &ch, rho, k.smt_delta),
        "divergence": divergence,
        "complete": profiles.iter().all(|p| p.complete) && uniform.per_target.iter().all(|s| s.complete),
    });
    if !ch.converged || uniform.diverges {
        out.status = Status::NumericFailure;
    }
    Ok(())
}
