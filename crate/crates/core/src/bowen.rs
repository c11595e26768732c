//! Pressure curve, its shape checks, the Bowen zero and the Lyapunov exponent.

use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::MapDescriptor;
use crate::error::{Error, Result};
use crate::export::{fmt17, Table};
use crate::measure::AtomicMeasure;
use crate::scalar::Real;
use crate::sigma::SigmaMetric;
use crate::transfer::{iterate_pressure, GridConfig, PivotGraph, PivotGrid, PressureConfig, PressureEstimate, CRITICAL_MARGIN};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ShapeFlags {
    pub convex_ok: bool,
    pub decreasing_ok: bool,
    pub positive_near_critical_ok: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PressureCurve<T: Real> {
    pub samples: Vec<PressureEstimate<T>>,
    pub t_min: T,
    pub shape_flags: ShapeFlags,
    /// Some estimate failed to stabilize.
    pub inconclusive: bool,
}

impl<T: Real> PressureCurve<T> {
    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["t", "P", "stderr"]);
        for s in &self.samples {
            t.push_floats(&[s.t.as_f64(), s.p.as_f64(), s.stderr.as_f64()]);
        }
        t
    }

    /// `2·(chord − P)` at each interior node; equals the second difference on uniform grids.
    pub fn second_differences(&self) -> Vec<T> {
        self.samples
            .windows(3)
            .map(|w| {
                let (a, b, c) = (&w[0], &w[1], &w[2]);
                let lam = (c.t - b.t) / (c.t - a.t);
                let chord = lam * a.p + (T::one() - lam) * c.p;
                T::lit(2.0) * (chord - b.p)
            })
            .collect()
    }
}

/// Discrete tolerance on convexity.
pub const SHAPE_TOL: f64 = 0.02;

fn shape<T: Real>(samples: &[PressureEstimate<T>], second: &[T]) -> ShapeFlags {
    ShapeFlags {
        convex_ok: second.iter().all(|&d| d >= -T::lit(SHAPE_TOL)),
        decreasing_ok: samples.windows(2).all(|w| w[1].p - w[0].p < -(w[0].stderr + w[1].stderr)),
        positive_near_critical_ok: samples.first().map_or(true, |s| s.p > s.stderr),
    }
}

/// `P(t)` on each grid value, all from the same operator configuration.
pub fn pressure_curve<T: Real>(
    graph: &PivotGraph<T>,
    t_grid: &[T],
    bases: &[Complex<T>],
    cfg: &PressureConfig<T>,
) -> Result<PressureCurve<T>> {
    if t_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Domain("t grid must be strictly increasing".into()));
    }
    let samples: Vec<PressureEstimate<T>> = t_grid
        .par_iter()
        .map(|&t| iterate_pressure(graph, t, bases, cfg))
        .collect::<Result<_>>()?;
    let mut curve = PressureCurve {
        inconclusive: samples.iter().any(|s| !s.converged),
        t_min: graph.exponents().critical_t() + T::lit(CRITICAL_MARGIN),
        shape_flags: ShapeFlags {
            convex_ok: true,
            decreasing_ok: true,
            positive_near_critical_ok: true,
        },
        samples,
    };
    curve.shape_flags = shape(&curve.samples, &curve.second_differences());
    Ok(curve)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct DimensionConfig<T: Real> {
    pub tol: T,
    pub margin: T,
    /// Search extends to `2 + slack`.
    pub slack: T,
    pub max_steps: usize,
    pub pressure: PressureConfig<T>,
}

impl<T: Real> Default for DimensionConfig<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(0.01),
            margin: T::lit(CRITICAL_MARGIN),
            slack: T::lit(0.2),
            max_steps: 60,
            pressure: PressureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DimensionResult<T: Real> {
    pub h: T,
    pub bracket: (T, T),
    /// Brackets after each bisection step, starting with the initial one.
    pub steps: Vec<(T, T)>,
    /// Every pressure evaluation, in order.
    pub evaluations: Vec<PressureEstimate<T>>,
    pub lyapunov: Option<Lyapunov<T>>,
    /// `ρ/α < h < 2`
    pub bounds_ok: bool,
}

/// Sign of `P(t)` if it is decided beyond the standard error.
fn sign<T: Real>(e: &PressureEstimate<T>) -> Option<bool> {
    if e.p > e.stderr {
        Some(true)
    } else if e.p < -e.stderr {
        Some(false)
    } else {
        None
    }
}

/// Bisection for the zero of `P` on `[ρ/α + margin, 2 + slack]`.
pub fn bowen_dimension<T: Real>(graph: &PivotGraph<T>, bases: &[Complex<T>], cfg: &DimensionConfig<T>) -> Result<DimensionResult<T>> {
    let crit = graph.exponents().critical_t();
    let mut lo = crit + cfg.margin;
    let mut hi = T::lit(2.0) + cfg.slack;
    let e_lo = iterate_pressure(graph, lo, bases, &cfg.pressure)?;
    let e_hi = iterate_pressure(graph, hi, bases, &cfg.pressure)?;
    if sign(&e_lo) != Some(true) || sign(&e_hi) != Some(false) {
        return Err(Error::NoConvergence(format!(
            "no sign change of P on [{lo}, {hi}]: P({lo}) = {} ± {}, P({hi}) = {} ± {}",
            e_lo.p, e_lo.stderr, e_hi.p, e_hi.stderr
        )));
    }
    let mut evaluations = vec![e_lo, e_hi];
    let mut steps = vec![(lo, hi)];
    while hi - lo > cfg.tol && steps.len() <= cfg.max_steps {
        let mid = (lo + hi) / T::lit(2.0);
        let e = iterate_pressure(graph, mid, bases, &cfg.pressure)?;
        match sign(&e) {
            Some(true) => lo = mid,
            Some(false) => hi = mid,
            None => {
                lo = mid;
                hi = mid;
            }
        }
        evaluations.push(e);
        steps.push((lo, hi));
    }
    let h = (lo + hi) / T::lit(2.0);
    Ok(DimensionResult {
        h,
        bracket: (lo, hi),
        steps,
        evaluations,
        lyapunov: None,
        bounds_ok: h > crit && h < T::lit(2.0),
    })
}

/// Three base points spread through the pivot set.
pub fn default_bases<T: Real>(graph: &PivotGraph<T>) -> Vec<Complex<T>> {
    let n = graph.len();
    let mut idx = vec![0, n / 3, (2 * n) / 3];
    idx.dedup();
    idx.into_iter().map(|i| graph.points[i]).collect()
}

/// Pivot graph seeded by repelling fixed points, then `bowen_dimension` on it.
pub fn dimension_of<T: Real>(
    desc: &MapDescriptor<T>,
    seeds: &[Complex<T>],
    grid: &GridConfig<T>,
    cfg: &DimensionConfig<T>,
) -> Result<(Arc<PivotGraph<T>>, DimensionResult<T>)> {
    let metric = SigmaMetric::for_map(desc);
    let graph = Arc::new(PivotGraph::build(desc, &metric, seeds, grid)?);
    let res = bowen_dimension(&graph, &default_bases(&graph), cfg)?;
    Ok((graph, res))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Lyapunov<T: Real> {
    /// `∫ log|f′| dμ`
    pub chi: T,
    /// `∫ log|f′|_σ dμ`
    pub chi_sigma: T,
    /// Mass dropped for atoms near poles or with overflowing images.
    pub excluded_mass: T,
}

impl<T: Real> Lyapunov<T> {
    pub fn relative_gap(&self) -> T {
        (self.chi - self.chi_sigma).abs() / self.chi.abs().max(self.chi_sigma.abs())
    }
}

/// Averages of `log|f′|` and `log|f′|_σ` against `μ = ψ·ν`, taken over the operator
/// edges: the edge from pivot `i` to a preimage `z` in cell `j` carries
/// `|f′(z)|_σ^{-t}·ν_i·ψ_j`, which is `μ` restricted to that branch when `ν` is conformal.
pub fn lyapunov_exponent<T: Real>(measure: &AtomicMeasure<T>, psi: Option<&PivotGrid<T>>) -> Result<Lyapunov<T>> {
    let graph = &measure.graph;
    let desc = graph.descriptor();
    let pole_tol = desc.tolerances().pole_tol;
    let nu = measure.pivot_masses();
    let t = measure.t;
    let (mut w_tot, mut e_sum, mut s_sum, mut excluded) = (T::zero(), T::zero(), T::zero(), T::zero());
    for (i, j, ls, le) in graph.edges() {
        if nu[i] == T::zero() {
            continue;
        }
        let mu = (-t * ls).exp() * nu[i] * psi.map_or(T::one(), |p| p.values[j]);
        let near_pole = desc.pole_distance(graph.points[j]).map_or(false, |d| d <= pole_tol);
        if near_pole || !ls.is_finite() || !le.is_finite() {
            excluded += mu;
            continue;
        }
        w_tot += mu;
        e_sum += mu * le;
        s_sum += mu * ls;
    }
    if !(w_tot > T::zero()) {
        return Err(Error::Numeric("no usable atoms for the Lyapunov average".into()));
    }
    if excluded > T::zero() {
        log::info!("Lyapunov average: excluded mass {excluded} renormalized away");
    }
    Ok(Lyapunov {
        chi: e_sum / w_tot,
        chi_sigma: s_sum / w_tot,
        excluded_mass: excluded / (w_tot + excluded),
    })
}

pub fn dimension_table<T: Real>(res: &DimensionResult<T>) -> Table {
    let mut t = Table::new(&["step", "t_lo", "t_hi"]);
    for (k, &(a, b)) in res.steps.iter().enumerate() {
        t.push(vec![k.to_string(), fmt17(a.as_f64()), fmt17(b.as_f64())]);
    }
    t
}
