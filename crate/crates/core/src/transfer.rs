//! Truncated σ transfer operator on a pivot grid, pressure and invariant density.
//!
//! Pivots are the closure of a Julia seed set under inverse branches inside the
//! truncation disk, one representative per log-polar cell. Edge log-weights
//! `ln|f′(z)|_σ` are independent of `t`, so one graph serves a whole pressure curve.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{GrowthExponents, MapDescriptor};
use crate::error::{Error, Result};
use crate::export::{fmt17, Table};
use crate::scalar::Real;
use crate::sigma::SigmaMetric;

/// How the mass of preimages beyond the truncation radius is handled.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailMode {
    /// Plain truncated sum.
    Drop,
    /// Outer shell `(R/2, R]` weighted by `1 + q/(1−q)`, `q = 2^{ρ−αt}`: the
    /// geometric continuation of the shell mass over all further dyadic shells.
    ShellExtrapolate,
}

/// Smallest admissible gap `t − ρ/α`.
pub const CRITICAL_MARGIN: f64 = 0.05;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct OperatorConfig<T: Real> {
    pub t: T,
    pub truncation_radius: T,
    /// `γ = (t − ρ/α)/2`
    pub tail_gamma: T,
    /// `C` in the tail bound `C/R^{αγ}`; measured as `κ^t M_{ρ+αγ}` when known.
    pub tail_constant: Option<T>,
    pub target_tail_eps: T,
    pub tail_mode: TailMode,
}

impl<T: Real> OperatorConfig<T> {
    pub fn new(exps: &GrowthExponents<T>, t: T, truncation_radius: T, tail_mode: TailMode) -> Result<Self> {
        let crit = exps.critical_t();
        if !(t > crit) {
            return Err(Error::Domain(format!("t = {t} must exceed ρ/α = {crit}")));
        }
        if !(truncation_radius > T::zero()) {
            return Err(Error::Domain("truncation radius must be positive".into()));
        }
        Ok(Self {
            t,
            truncation_radius,
            tail_gamma: (t - crit) / T::lit(2.0),
            tail_constant: None,
            target_tail_eps: T::lit(1e-3),
            tail_mode,
        })
    }

    /// `C = κ^t·M_{ρ+αγ}`.
    pub fn with_tail_constant(mut self, kappa: T, m_borel: T) -> Self {
        self.tail_constant = Some(kappa.powf(self.t) * m_borel);
        self
    }

    /// `C/R^{αγ}` per unit sup-norm of the test function.
    pub fn tail_bound(&self, alpha: T) -> Option<T> {
        self.tail_constant
            .map(|c| c / self.truncation_radius.powf(alpha * self.tail_gamma))
    }

    /// Radius at which `C/R^{αγ}` reaches the target.
    pub fn required_radius(&self, alpha: T) -> Option<T> {
        self.tail_constant
            .map(|c| (c / self.target_tail_eps).powf(T::one() / (alpha * self.tail_gamma)))
    }
}

/// `1 + q/(1−q)` with `q = 2^{ρ−αt}`.
pub fn shell_factor<T: Real>(exps: &GrowthExponents<T>, t: T) -> T {
    let q = T::lit(2.0).powf(exps.order_rho - exps.alpha * t);
    T::one() + q / (T::one() - q)
}

type CellKey = (i64, i64);

#[derive(Clone, Debug)]
pub struct PivotGraph<T: Real> {
    desc: MapDescriptor<T>,
    metric: SigmaMetric<T>,
    exps: GrowthExponents<T>,
    pub points: Vec<Complex<T>>,
    cells: HashMap<CellKey, usize>,
    pub cell_width: T,
    pub truncation_radius: T,
    row_start: Vec<usize>,
    col: Vec<u32>,
    log_sigma: Vec<T>,
    /// `ln|f′(z)|` per edge, for the Euclidean operator.
    log_euclid: Vec<T>,
    shell: Vec<bool>,
    /// Closure finished before hitting the pivot cap.
    pub closed: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct GridConfig<T: Real> {
    pub truncation_radius: T,
    /// Log-polar cell width Δ (both `ln r` and angle).
    pub cell_width: T,
    pub max_pivots: usize,
}

impl<T: Real> Default for GridConfig<T> {
    fn default() -> Self {
        Self {
            truncation_radius: T::lit(800.0),
            cell_width: T::lit(0.1),
            max_pivots: 200_000,
        }
    }
}

fn cell_key<T: Real>(z: Complex<T>, width: T) -> CellKey {
    let r = (z.norm().ln() / width).floor().to_i64().unwrap_or(i64::MIN);
    let a = ((z.arg() + T::PI()) / width).floor().to_i64().unwrap_or(0);
    (r, a)
}

struct Edge<T> {
    point: Complex<T>,
    log_sigma: T,
    log_euclid: T,
    shell: bool,
}

impl<T: Real> PivotGraph<T> {
    /// Closure of `seeds` under inverse branches inside the truncation disk.
    pub fn build(
        desc: &MapDescriptor<T>,
        metric: &SigmaMetric<T>,
        seeds: &[Complex<T>],
        cfg: &GridConfig<T>,
    ) -> Result<Self> {
        if seeds.is_empty() {
            return Err(Error::Domain("pivot closure needs at least one seed".into()));
        }
        let mut g = PivotGraph {
            desc: desc.clone(),
            metric: *metric,
            exps: desc.growth_exponents(),
            points: Vec::new(),
            cells: HashMap::new(),
            cell_width: cfg.cell_width,
            truncation_radius: cfg.truncation_radius,
            row_start: vec![0],
            col: Vec::new(),
            log_sigma: Vec::new(),
            log_euclid: Vec::new(),
            shell: Vec::new(),
            closed: true,
        };
        for &s in seeds {
            let k = cell_key(s, cfg.cell_width);
            if !g.cells.contains_key(&k) {
                g.cells.insert(k, g.points.len());
                g.points.push(s);
            }
        }
        let mut done = 0;
        let mut rows: Vec<Vec<Edge<T>>> = Vec::new();
        while done < g.points.len() {
            let wave: Vec<Complex<T>> = g.points[done..].to_vec();
            let lists: Vec<Result<Vec<Edge<T>>>> = wave.par_iter().map(|&w| g.edges_of(w)).collect();
            for list in lists {
                let list = list?;
                for e in &list {
                    let k = cell_key(e.point, cfg.cell_width);
                    if !g.cells.contains_key(&k) {
                        if g.points.len() >= cfg.max_pivots {
                            g.closed = false;
                            continue;
                        }
                        g.cells.insert(k, g.points.len());
                        g.points.push(e.point);
                    }
                }
                rows.push(list);
            }
            done += wave.len();
        }
        for list in rows {
            for e in list {
                let j = g.locate(e.point).ok_or_else(|| Error::Coverage {
                    point: format!("{}", e.point),
                    branch: -1,
                })?;
                g.col.push(j as u32);
                g.log_sigma.push(e.log_sigma);
                g.log_euclid.push(e.log_euclid);
                g.shell.push(e.shell);
            }
            g.row_start.push(g.col.len());
        }
        if !g.closed {
            log::warn!("pivot closure stopped at the cap of {} pivots", cfg.max_pivots);
        }
        Ok(g)
    }

    fn edges_of(&self, w: Complex<T>) -> Result<Vec<Edge<T>>> {
        let r = self.truncation_radius;
        let half = r / T::lit(2.0);
        let list = self.desc.preimages(w, r)?;
        list.branches
            .iter()
            .map(|b| {
                Ok(Edge {
                    point: b.point,
                    log_sigma: self.metric.log_factor(b.point, w, b.derivative),
                    log_euclid: b.derivative.norm().ln(),
                    shell: b.point.norm() > half,
                })
            })
            .collect()
    }

    pub fn descriptor(&self) -> &MapDescriptor<T> {
        &self.desc
    }

    pub fn metric(&self) -> &SigmaMetric<T> {
        &self.metric
    }

    pub fn exponents(&self) -> &GrowthExponents<T> {
        &self.exps
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn edge_count(&self) -> usize {
        self.col.len()
    }

    /// σ-diameter bound of a cell (exact for `α₂ = 1`).
    pub fn interpolation_radius(&self) -> T {
        self.cell_width * T::SQRT_2()
    }

    /// Pivot of the cell containing `z`, or the nearest pivot of the neighbouring cells.
    pub fn locate(&self, z: Complex<T>) -> Option<usize> {
        let (kr, ka) = cell_key(z, self.cell_width);
        if let Some(&i) = self.cells.get(&(kr, ka)) {
            return Some(i);
        }
        let n_ang = (T::TAU() / self.cell_width).ceil().to_i64().unwrap_or(1).max(1);
        for reach in 1..=2i64 {
            let mut best: Option<(T, usize)> = None;
            for dr in -reach..=reach {
                for da in -reach..=reach {
                    let a = (ka + da).rem_euclid(n_ang);
                    if let Some(&i) = self.cells.get(&(kr + dr, a)) {
                        let d = (self.points[i] - z).norm();
                        if best.map_or(true, |(bd, _)| d < bd) {
                            best = Some((d, i));
                        }
                    }
                }
            }
            if let Some((_, i)) = best {
                return Some(i);
            }
        }
        None
    }

    /// Edge weights `|f′|_σ^{-t}`, with the shell boost in extrapolating mode.
    pub fn weights(&self, t: T, mode: TailMode) -> Vec<T> {
        let boost = match mode {
            TailMode::Drop => T::one(),
            TailMode::ShellExtrapolate => shell_factor(&self.exps, t),
        };
        self.log_sigma
            .par_iter()
            .zip(self.shell.par_iter())
            .map(|(&l, &s)| {
                let w = (-t * l).exp();
                if s {
                    w * boost
                } else {
                    w
                }
            })
            .collect()
    }

    /// Edge weights `|f′|^{-t}` of the Euclidean operator, no tail handling.
    pub fn euclidean_weights(&self, t: T) -> Vec<T> {
        self.log_euclid.par_iter().map(|&l| (-t * l).exp()).collect()
    }

    /// `(Mv)_i = Σ_edges w·v_j`: the operator applied to a function on the pivots.
    pub fn mat_vec(&self, weights: &[T], v: &[T]) -> Vec<T> {
        (0..self.len())
            .into_par_iter()
            .map(|i| {
                let (a, b) = (self.row_start[i], self.row_start[i + 1]);
                let mut s = T::zero();
                for k in a..b {
                    s += weights[k] * v[self.col[k] as usize];
                }
                s
            })
            .collect()
    }

    /// `(i, j, ln|f′(z)|_σ, ln|f′(z)|)` per edge: pivot `i` is the image, `z` lies in cell `j`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, T, T)> + '_ {
        (0..self.len()).flat_map(move |i| {
            (self.row_start[i]..self.row_start[i + 1])
                .map(move |k| (i, self.col[k] as usize, self.log_sigma[k], self.log_euclid[k]))
        })
    }

    /// `(Mᵀa)_j = Σ_edges w·a_i`: the dual operator applied to pivot masses.
    pub fn adjoint(&self, weights: &[T], a: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        for i in 0..self.len() {
            if a[i] == T::zero() {
                continue;
            }
            for k in self.row_start[i]..self.row_start[i + 1] {
                out[self.col[k] as usize] += weights[k] * a[i];
            }
        }
        out
    }

    /// Row of the operator at an arbitrary point: `(pivot, weight)` per preimage.
    pub fn row_at(&self, w: Complex<T>, t: T, mode: TailMode) -> Result<Vec<(usize, T)>> {
        let boost = shell_factor(&self.exps, t);
        self.edges_of(w)?
            .into_iter()
            .map(|e| {
                let j = self.locate(e.point).ok_or_else(|| Error::Coverage {
                    point: format!("{}", e.point),
                    branch: -1,
                })?;
                let mut wt = (-t * e.log_sigma).exp();
                if e.shell && mode == TailMode::ShellExtrapolate {
                    wt *= boost;
                }
                Ok((j, wt))
            })
            .collect()
    }

    /// `L_t^n 1` on the pivots for `n = 0..=n`, each generation normalized by its max;
    /// returns the final vector and `ln` of the accumulated scale.
    pub fn iterate_ones(&self, t: T, mode: TailMode, n: usize) -> (Vec<T>, T) {
        let w = self.weights(t, mode);
        let mut v = vec![T::one(); self.len()];
        let mut log_scale = T::zero();
        for _ in 0..n {
            let nv = self.mat_vec(&w, &v);
            let m = nv.iter().copied().fold(T::zero(), T::max);
            if !(m > T::zero()) {
                return (nv, T::neg_infinity());
            }
            v = nv.into_iter().map(|x| x / m).collect();
            log_scale += m.ln();
        }
        (v, log_scale)
    }
}

/// Piecewise-constant function on the pivots of a graph.
#[derive(Clone, Debug)]
pub struct PivotGrid<T: Real> {
    pub graph: Arc<PivotGraph<T>>,
    pub values: Vec<T>,
    pub interpolation_radius: T,
    /// Hölder exponent τ assumed for the interpolation error.
    pub holder_exponent: T,
}

impl<T: Real> PivotGrid<T> {
    pub fn constant(graph: Arc<PivotGraph<T>>, c: T) -> Self {
        let n = graph.len();
        Self::from_values(graph, vec![c; n])
    }

    pub fn from_values(graph: Arc<PivotGraph<T>>, values: Vec<T>) -> Self {
        let r = graph.interpolation_radius();
        Self {
            graph,
            values,
            interpolation_radius: r,
            holder_exponent: T::one(),
        }
    }

    pub fn from_fn<F: Fn(Complex<T>) -> T>(graph: Arc<PivotGraph<T>>, f: F) -> Self {
        let values = graph.points.iter().map(|&z| f(z)).collect();
        Self::from_values(graph, values)
    }

    /// Nearest-pivot lookup.
    pub fn value_at(&self, z: Complex<T>) -> Option<T> {
        self.graph.locate(z).map(|i| self.values[i])
    }

    pub fn sup(&self) -> T {
        self.values.iter().map(|v| v.abs()).fold(T::zero(), T::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ApplyResult<T: Real> {
    pub value: T,
    /// `C/R^{αγ}·sup|g|`, when the tail constant is known.
    pub tail_bound: Option<T>,
    /// `(preimage, |f′|_σ^{-t}·g)` per branch, in branch order.
    pub terms: Vec<(Complex<T>, T)>,
}

/// `L_t g(w)` by direct preimage enumeration inside `R_tr`.
pub fn apply<T: Real>(
    desc: &MapDescriptor<T>,
    metric: &SigmaMetric<T>,
    config: &OperatorConfig<T>,
    g: &PivotGrid<T>,
    w: Complex<T>,
) -> Result<ApplyResult<T>> {
    let exps = desc.growth_exponents();
    let list = desc.preimages(w, config.truncation_radius)?;
    let half = config.truncation_radius / T::lit(2.0);
    let boost = shell_factor(&exps, config.t);
    let mut terms = Vec::with_capacity(list.len());
    let mut value = T::zero();
    for b in &list.branches {
        let gv = g.value_at(b.point).ok_or_else(|| {
            log::warn!("preimage {} of {w} outside the pivot region", b.point);
            Error::Coverage {
                point: format!("{}", b.point),
                branch: b.branch_index,
            }
        })?;
        let mut s = metric.factor(b.point, w, b.derivative)?.powf(-config.t) * gv;
        if config.tail_mode == TailMode::ShellExtrapolate && b.point.norm() > half {
            s *= boost;
        }
        value += s;
        terms.push((b.point, s));
    }
    Ok(ApplyResult {
        value,
        tail_bound: config.tail_bound(exps.alpha).map(|b| b * g.sup()),
        terms,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct PressureEstimate<T: Real> {
    pub t: T,
    pub p: T,
    pub stderr: T,
    pub n_used: usize,
    pub base_point_spread: T,
    pub per_base: Vec<T>,
    pub converged: bool,
    /// `ln(L^{n+1}1(x)/L^n 1(x))` at the first base, by `n`.
    pub trace: Vec<T>,
    pub tail_mode: TailMode,
}

impl<T: Real> PressureEstimate<T> {
    pub fn trace_table(&self) -> Table {
        let mut t = Table::new(&["n", "log_ratio"]);
        for (n, r) in self.trace.iter().enumerate() {
            t.push(vec![(n + 1).to_string(), fmt17(r.as_f64())]);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct PressureConfig<T: Real> {
    pub n_max: usize,
    pub n_min: usize,
    /// Successive log ratios must agree to this for `stable_steps` steps.
    pub tol: T,
    pub stable_steps: usize,
    pub tail_mode: TailMode,
}

impl<T: Real> Default for PressureConfig<T> {
    fn default() -> Self {
        Self {
            n_max: 400,
            n_min: 8,
            tol: T::tol(1e-10),
            stable_steps: 3,
            tail_mode: TailMode::ShellExtrapolate,
        }
    }
}

/// Aitken Δ² on the last three terms, falling back to the last term.
fn aitken<T: Real>(x: &[T]) -> T {
    let n = x.len();
    if n < 3 {
        return x[n - 1];
    }
    let (a, b, c) = (x[n - 3], x[n - 2], x[n - 1]);
    let den = c - b * T::lit(2.0) + a;
    let step = (c - b) * (c - b) / den;
    if den.abs() > T::epsilon() * c.abs().max(T::one()) && step.abs() < (c - b).abs() * T::lit(100.0) {
        c - step
    } else {
        c
    }
}

/// `P(t)` from successive ratios `L^{n+1}1(x)/L^n 1(x)` at each base point.
pub fn iterate_pressure<T: Real>(
    graph: &PivotGraph<T>,
    t: T,
    bases: &[Complex<T>],
    cfg: &PressureConfig<T>,
) -> Result<PressureEstimate<T>> {
    let crit = graph.exps.critical_t();
    if !(t >= crit + T::lit(CRITICAL_MARGIN) - T::epsilon() * T::lit(16.0)) {
        return Err(Error::Domain(format!(
            "t = {t} is within {CRITICAL_MARGIN} of the critical exponent {crit}"
        )));
    }
    if bases.is_empty() {
        return Err(Error::Domain("no base points".into()));
    }
    let rows: Vec<Vec<(usize, T)>> = bases
        .iter()
        .map(|&x| graph.row_at(x, t, cfg.tail_mode))
        .collect::<Result<_>>()?;
    let dot = |row: &[(usize, T)], v: &[T]| row.iter().map(|&(j, w)| w * v[j]).sum::<T>();
    let weights = graph.weights(t, cfg.tail_mode);
    let mut v = vec![T::one(); graph.len()];
    let mut prev: Vec<T> = rows.iter().map(|r| dot(r, &v)).collect();
    let mut hist: Vec<Vec<T>> = vec![Vec::new(); bases.len()];
    let mut stable = 0;
    let mut converged = false;
    let mut n_used = 0;
    for n in 1..=cfg.n_max {
        let nv = graph.mat_vec(&weights, &v);
        let m = nv.iter().copied().fold(T::zero(), T::max);
        if !(m > T::zero()) || !m.is_finite() {
            return Err(Error::Numeric(format!("operator iterate degenerated at step {n}")));
        }
        v = nv.into_iter().map(|x| x / m).collect();
        let cur: Vec<T> = rows.iter().map(|r| dot(r, &v)).collect();
        let mut delta = T::zero();
        for b in 0..bases.len() {
            let r = cur[b].ln() - prev[b].ln() + m.ln();
            if let Some(&last) = hist[b].last() {
                delta = delta.max((r - last).abs());
            } else {
                delta = T::infinity();
            }
            hist[b].push(r);
        }
        prev = cur;
        n_used = n;
        if delta <= cfg.tol {
            stable += 1;
        } else {
            stable = 0;
        }
        if n >= cfg.n_min && stable >= cfg.stable_steps {
            converged = true;
            break;
        }
    }
    let per_base: Vec<T> = hist.iter().map(|h| aitken(h)).collect();
    let k = T::from_usize_lossy(per_base.len());
    let p = per_base.iter().copied().sum::<T>() / k;
    let spread = per_base.iter().copied().fold(T::neg_infinity(), T::max)
        - per_base.iter().copied().fold(T::infinity(), T::min);
    // dispersion of the last few ratios plus the n versus n+2 gap
    let mut stderr = T::zero();
    for h in &hist {
        let n = h.len();
        let tail = &h[n.saturating_sub(5)..];
        let mean = tail.iter().copied().sum::<T>() / T::from_usize_lossy(tail.len());
        let var = tail.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / T::from_usize_lossy(tail.len());
        stderr = stderr.max(var.sqrt());
        if n >= 3 {
            stderr = stderr.max((h[n - 1] - h[n - 3]).abs() / T::lit(2.0));
        }
    }
    stderr = stderr.max(T::epsilon() * T::lit(64.0) * p.abs().max(T::one()));
    if !converged {
        log::warn!("pressure ratios at t = {t} did not stabilize within {} steps", cfg.n_max);
    }
    Ok(PressureEstimate {
        t,
        p,
        stderr,
        n_used,
        base_point_spread: spread,
        per_base,
        converged,
        trace: hist.swap_remove(0),
        tail_mode: cfg.tail_mode,
    })
}

#[derive(Clone, Debug)]
pub struct DensityResult<T: Real> {
    pub psi: PivotGrid<T>,
    /// `sup|L̂ψ − ψ| / sup ψ`
    pub fixed_point_residual: T,
    /// Extremes of `L̂^n 1` over the pivots and `n ≤ n_max`.
    pub lower: T,
    pub upper: T,
}

/// Cesàro average of `L̂^k 1 = e^{-kP} L^k 1`, `k = 1..=n`, optionally normalized to
/// unit integral against weighted atoms.
pub fn invariant_density<T: Real>(
    graph: &Arc<PivotGraph<T>>,
    t: T,
    p: T,
    n: usize,
    mode: TailMode,
    atoms: Option<&[(Complex<T>, T)]>,
) -> Result<DensityResult<T>> {
    if n == 0 {
        return Err(Error::Domain("need at least one iterate".into()));
    }
    let w = graph.weights(t, mode);
    let ep = (-p).exp();
    let mut u = vec![T::one(); graph.len()];
    let mut acc = vec![T::zero(); graph.len()];
    let mut lower = T::infinity();
    let mut upper = T::zero();
    for _ in 0..n {
        u = graph.mat_vec(&w, &u).into_iter().map(|x| x * ep).collect();
        for (a, &x) in acc.iter_mut().zip(&u) {
            *a += x;
            lower = lower.min(x);
            upper = upper.max(x);
        }
    }
    let nf = T::from_usize_lossy(n);
    let mut psi: Vec<T> = acc.into_iter().map(|a| a / nf).collect();
    if let Some(atoms) = atoms {
        let mut integral = T::zero();
        for &(z, m) in atoms {
            if let Some(i) = graph.locate(z) {
                integral += m * psi[i];
            }
        }
        if !(integral > T::min_positive_value()) {
            return Err(Error::Numeric(format!("density normalization integral {integral} underflows")));
        }
        for x in psi.iter_mut() {
            *x /= integral;
        }
    }
    let lpsi: Vec<T> = graph.mat_vec(&w, &psi).into_iter().map(|x| x * ep).collect();
    let sup = psi.iter().copied().fold(T::zero(), T::max);
    let res = lpsi
        .iter()
        .zip(&psi)
        .map(|(a, b)| (*a - *b).abs())
        .fold(T::zero(), T::max)
        / sup;
    Ok(DensityResult {
        psi: PivotGrid::from_values(graph.clone(), psi),
        fixed_point_residual: res,
        lower,
        upper,
    })
}

/// `max L_t 1(w)` over pivots with `|w| > W`, for each `W`.
pub fn decay_profile<T: Real>(graph: &PivotGraph<T>, t: T, thresholds: &[T]) -> Vec<(T, T)> {
    let w = graph.weights(t, TailMode::Drop);
    let l1 = graph.mat_vec(&w, &vec![T::one(); graph.len()]);
    thresholds
        .iter()
        .map(|&th| {
            let m = graph
                .points
                .iter()
                .zip(&l1)
                .filter(|(z, _)| z.norm() > th)
                .map(|(_, &v)| v)
                .fold(T::zero(), T::max);
            (th, m)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct RefinedDecay<T: Real> {
    pub epsilon: T,
    pub kappa_eps: T,
    pub m_alpha_t: T,
    /// Largest `L_t1(w)·|w|^{tε} / (κ_ε^t M_{αt})` over the pivots; `≤ 1` when the bound holds.
    pub worst_ratio: T,
}

/// Checks `L_t1(w) ≤ κ_ε^t M_{αt}/|w|^{tε}` on every pivot.
pub fn refined_decay_check<T: Real>(graph: &PivotGraph<T>, t: T, epsilon: T, kappa_eps: T, m_alpha_t: T) -> RefinedDecay<T> {
    let w = graph.weights(t, TailMode::Drop);
    let l1 = graph.mat_vec(&w, &vec![T::one(); graph.len()]);
    let bound = kappa_eps.powf(t) * m_alpha_t;
    let worst = graph
        .points
        .iter()
        .zip(&l1)
        .map(|(z, &v)| v * z.norm().powf(t * epsilon) / bound)
        .fold(T::zero(), T::max);
    RefinedDecay {
        epsilon,
        kappa_eps,
        m_alpha_t,
        worst_ratio: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    fn real_repelling() -> f64 {
        let mut x = 3.0f64;
        for _ in 0..100 {
            x -= (0.2 * x.exp() - x) / (0.2 * x.exp() - 1.0);
        }
        x
    }

    fn graph(r: f64) -> PivotGraph<f64> {
        let f = MapDescriptor::exponential(c(0.2, 0.0)).unwrap();
        let m = SigmaMetric::for_map(&f);
        let cfg = GridConfig {
            truncation_radius: r,
            ..GridConfig::default()
        };
        PivotGraph::build(&f, &m, &[c(real_repelling(), 0.0)], &cfg).unwrap()
    }

    #[test]
    fn closure_is_closed_and_covered() {
        let g = graph(200.0);
        assert!(g.closed);
        assert!(g.len() > 50);
        for &p in &g.points {
            assert!(g.locate(p).is_some());
        }
    }

    #[test]
    fn pressure_is_base_independent_and_decreasing() {
        let g = graph(200.0);
        let bases = [g.points[0], g.points[g.len() / 2], g.points[g.len() - 1]];
        let cfg = PressureConfig::default();
        let p1 = iterate_pressure(&g, 1.3, &bases, &cfg).unwrap();
        let p2 = iterate_pressure(&g, 1.6, &bases, &cfg).unwrap();
        assert!(p1.converged && p2.converged);
        assert!(p1.base_point_spread < 1e-8);
        assert!(p2.p < p1.p);
    }

    #[test]
    fn shell_extrapolation_adds_mass() {
        let g = graph(200.0);
        let drop = PressureConfig {
            tail_mode: TailMode::Drop,
            ..PressureConfig::default()
        };
        let pd = iterate_pressure(&g, 1.3, &[g.points[0]], &drop).unwrap();
        let ps = iterate_pressure(&g, 1.3, &[g.points[0]], &PressureConfig::default()).unwrap();
        assert!(ps.p > pd.p + 0.1, "{} {}", ps.p, pd.p);
        assert!(shell_factor(g.exponents(), 1.3) > 1.0);
    }

    #[test]
    fn rejects_near_critical_t() {
        let g = graph(100.0);
        assert!(iterate_pressure(&g, 1.01, &[g.points[0]], &PressureConfig::default()).is_err());
    }

    #[test]
    fn tail_bound_monotone_in_radius() {
        let f = MapDescriptor::exponential(c(0.2, 0.0)).unwrap();
        let e = f.growth_exponents();
        let mut last = f64::INFINITY;
        for r in [100.0, 200.0, 400.0, 800.0] {
            let cfg = OperatorConfig::new(&e, 1.5, r, TailMode::Drop).unwrap().with_tail_constant(1.0, 3.0);
            let b = cfg.tail_bound(e.alpha).unwrap();
            assert!(b < last);
            last = b;
        }
    }

    #[test]
    fn density_is_a_fixed_point() {
        let g = Arc::new(graph(200.0));
        let cfg = PressureConfig {
            tail_mode: TailMode::Drop,
            ..PressureConfig::default()
        };
        let p = iterate_pressure(&g, 1.5, &[g.points[0]], &cfg).unwrap();
        let d = invariant_density(&g, 1.5, p.p, 200, TailMode::Drop, None).unwrap();
        assert!(d.fixed_point_residual < 0.05);
        assert!(d.lower > 0.0 && d.upper.is_finite());
    }
}
