//! Atomic approximations `ν_s` of the conformal measure and their checks.
//!
//! Atoms live on the pivots of a [`PivotGraph`]: level `n` is `e^{-s}Mᵀ` applied to
//! level `n−1`, starting from the preimages of the base point. Preimages falling in
//! the same cell are merged, so no per-level pruning is needed.

use std::sync::Arc;

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::export::{fmt17, Table};
use crate::nevanlinna::least_squares_slope;
use crate::scalar::Real;
use crate::transfer::{shell_factor, PivotGraph, PivotGrid, TailMode};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct MeasureConfig<T: Real> {
    /// Stop once a level carries less than this fraction of the accumulated mass.
    pub level_eps: T,
    pub depth_max: usize,
    /// Estimated discarded fraction above which the measure is flagged.
    pub discard_eps: T,
}

impl<T: Real> Default for MeasureConfig<T> {
    fn default() -> Self {
        Self {
            level_eps: T::tol(1e-9),
            depth_max: 50_000,
            discard_eps: T::lit(0.05),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Atom<T: Real> {
    pub point: Complex<T>,
    pub weight: T,
    pub level: usize,
    pub pivot: usize,
}

#[derive(Clone, Debug)]
pub struct AtomicMeasure<T: Real> {
    pub graph: Arc<PivotGraph<T>>,
    pub atoms: Vec<Atom<T>>,
    pub t: T,
    pub s: T,
    pub base_x: Complex<T>,
    pub total_mass: T,
    /// `Σ_s = Σ_n e^{-ns}|L^{*n}δ_x|` before normalization.
    pub normalizer: T,
    /// Unnormalized mass of each level, from level 1.
    pub level_mass: Vec<T>,
    /// Unnormalized level vectors; the last entry is the first level not included.
    levels: Vec<Vec<T>>,
    /// Geometric estimate of the levels beyond the last one, relative to `Σ_s`.
    pub series_tail: T,
    /// Shell-based estimate of the mass beyond the truncation radius, relative to `Σ_s`.
    pub radial_tail: T,
    pub flagged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct MeasureSummary<T: Real> {
    pub t: T,
    pub s: T,
    pub base_x: Complex<T>,
    pub atoms: usize,
    pub levels: usize,
    pub total_mass: T,
    pub normalizer: T,
    pub series_tail: T,
    pub radial_tail: T,
    pub flagged: bool,
}

/// `ν_s = (1/Σ_s) Σ_n e^{-ns}(L_t^n)^*δ_x` on the pivots of `graph`, truncated at its radius.
pub fn build_nu_s<T: Real>(
    graph: &Arc<PivotGraph<T>>,
    t: T,
    s: T,
    x: Complex<T>,
    cfg: &MeasureConfig<T>,
) -> Result<AtomicMeasure<T>> {
    let weights = graph.weights(t, TailMode::Drop);
    let es = (-s).exp();
    let mut first = vec![T::zero(); graph.len()];
    for (j, w) in graph.row_at(x, t, TailMode::Drop)? {
        first[j] += w * es;
    }
    let mut levels = vec![first];
    let mut level_mass = Vec::new();
    let mut acc = T::zero();
    loop {
        let cur = levels.last().expect("nonempty");
        let m: T = cur.iter().copied().sum();
        if !m.is_finite() {
            return Err(Error::Numeric(format!("level mass overflow at level {}", levels.len())));
        }
        level_mass.push(m);
        acc += m;
        if m <= cfg.level_eps * acc || levels.len() >= cfg.depth_max {
            break;
        }
        let next: Vec<T> = graph.adjoint(&weights, cur).into_iter().map(|v| v * es).collect();
        levels.push(next);
    }
    let n = level_mass.len();
    if n >= cfg.depth_max && n >= 2 && level_mass[n - 1] >= level_mass[n - 2] {
        return Err(Error::NoConvergence(format!(
            "level masses still growing at depth {n}: s = {s} is not above P(t)"
        )));
    }
    if !(acc > T::min_positive_value()) {
        return Err(Error::Numeric("measure has no mass".into()));
    }
    // the level that would come next closes the shift identity
    let next: Vec<T> = graph
        .adjoint(&weights, levels.last().expect("nonempty"))
        .into_iter()
        .map(|v| v * es)
        .collect();
    levels.push(next);

    let ratio = if n >= 2 { level_mass[n - 1] / level_mass[n - 2] } else { T::zero() };
    let series_tail = if ratio < T::one() {
        level_mass[n - 1] * ratio / (T::one() - ratio) / acc
    } else {
        T::infinity()
    };
    let exps = graph.exponents();
    let q = shell_factor(exps, t) - T::one();
    let half = graph.truncation_radius / T::lit(2.0);
    let mut shell = T::zero();
    let mut atoms = Vec::new();
    for (lvl, v) in levels[..n].iter().enumerate() {
        for (i, &w) in v.iter().enumerate() {
            if w > T::zero() {
                let point = graph.points[i];
                if point.norm() > half {
                    shell += w;
                }
                atoms.push(Atom {
                    point,
                    weight: w / acc,
                    level: lvl + 1,
                    pivot: i,
                });
            }
        }
    }
    let radial_tail = shell * q / acc;
    let total_mass = atoms.iter().map(|a| a.weight).sum();
    let flagged = series_tail + radial_tail > cfg.discard_eps;
    if flagged {
        log::warn!("ν_s at s = {s}: estimated discarded mass {} exceeds {}", series_tail + radial_tail, cfg.discard_eps);
    }
    Ok(AtomicMeasure {
        graph: graph.clone(),
        atoms,
        t,
        s,
        base_x: x,
        total_mass,
        normalizer: acc,
        level_mass,
        levels,
        series_tail,
        radial_tail,
        flagged,
    })
}

impl<T: Real> AtomicMeasure<T> {
    pub fn levels(&self) -> usize {
        self.level_mass.len()
    }

    /// Normalized mass per pivot, summed over levels.
    pub fn pivot_masses(&self) -> Vec<T> {
        let mut out = vec![T::zero(); self.graph.len()];
        for a in &self.atoms {
            out[a.pivot] += a.weight;
        }
        out
    }

    /// `(point, mass)` per pivot with positive mass.
    pub fn weighted_points(&self) -> Vec<(Complex<T>, T)> {
        self.pivot_masses()
            .into_iter()
            .enumerate()
            .filter(|(_, m)| *m > T::zero())
            .map(|(i, m)| (self.graph.points[i], m))
            .collect()
    }

    pub fn integrate(&self, g: &[T]) -> T {
        self.pivot_masses().iter().zip(g).map(|(&m, &v)| m * v).sum()
    }

    /// Largest relative gap between a level and `e^{-s}Mᵀ` of the previous one.
    pub fn multiplicativity_defect(&self) -> T {
        let w = self.graph.weights(self.t, TailMode::Drop);
        let es = (-self.s).exp();
        let mut worst = T::zero();
        for k in 1..self.levels.len() {
            let pred = self.graph.adjoint(&w, &self.levels[k - 1]);
            let scale = self.levels[k].iter().copied().fold(T::zero(), T::max);
            if scale == T::zero() {
                continue;
            }
            for (p, &v) in pred.iter().zip(&self.levels[k]) {
                worst = worst.max((*p * es - v).abs() / scale);
            }
        }
        worst
    }

    /// `sup |e^{-s}L^*ν − ν + e^{-s}L^*δ_x/Σ − e^{-(N+1)s}L^{*(N+1)}δ_x/Σ|` relative to `sup ν`.
    pub fn level_shift_defect(&self) -> T {
        let w = self.graph.weights(self.t, TailMode::Drop);
        let es = (-self.s).exp();
        let nu = self.pivot_masses();
        let pushed = self.graph.adjoint(&w, &nu);
        let n = self.levels();
        let sup = nu.iter().copied().fold(T::zero(), T::max);
        let mut worst = T::zero();
        for i in 0..nu.len() {
            let lhs = pushed[i] * es;
            let rhs = nu[i] - self.levels[0][i] / self.normalizer + self.levels[n][i] / self.normalizer;
            worst = worst.max((lhs - rhs).abs() / sup);
        }
        worst
    }

    /// `ν(U_R)` for each `R`, with `U_R = {|z| > R}`.
    pub fn tail_profile(&self, radii: &[T]) -> Vec<(T, T)> {
        radii
            .iter()
            .map(|&r| {
                let m = self
                    .atoms
                    .iter()
                    .filter(|a| a.point.norm() > r)
                    .map(|a| a.weight)
                    .sum();
                (r, m)
            })
            .collect()
    }

    /// `R_tr/64 · 2^k`, `k = 0..=4`.
    pub fn default_tail_radii(&self) -> Vec<T> {
        let r0 = self.graph.truncation_radius / T::lit(64.0);
        (0..5).map(|k| r0 * T::lit(2f64.powi(k))).collect()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["re", "im", "weight", "level"]);
        for a in &self.atoms {
            t.push(vec![
                fmt17(a.point.re.as_f64()),
                fmt17(a.point.im.as_f64()),
                fmt17(a.weight.as_f64()),
                a.level.to_string(),
            ]);
        }
        t
    }

    pub fn summary(&self) -> MeasureSummary<T> {
        MeasureSummary {
            t: self.t,
            s: self.s,
            base_x: self.base_x,
            atoms: self.atoms.len(),
            levels: self.levels(),
            total_mass: self.total_mass,
            normalizer: self.normalizer,
            series_tail: self.series_tail,
            radial_tail: self.radial_tail,
            flagged: self.flagged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ConformalityReport<T: Real> {
    /// `|∫L_t g dν − e^P∫g dν| / (e^P∫|g|dν)`; `None` when `g` vanishes on the atoms.
    pub eigen_residuals: Vec<Option<T>>,
    pub tail_profile: Vec<(T, T)>,
    /// `−slope` of `log ν(U_R)` against `log R`.
    pub fitted_tail_exponent: Option<T>,
}

impl<T: Real> ConformalityReport<T> {
    pub fn max_residual(&self) -> Option<T> {
        self.eigen_residuals.iter().flatten().copied().reduce(T::max)
    }
}

fn residuals<T: Real>(nu: &[T], weights: &[T], graph: &PivotGraph<T>, p: T, tests: &[PivotGrid<T>]) -> Vec<Option<T>> {
    let ep = p.exp();
    tests
        .iter()
        .map(|g| {
            let lg = graph.mat_vec(weights, &g.values);
            let int_lg: T = nu.iter().zip(&lg).map(|(&m, &v)| m * v).sum();
            let int_g: T = nu.iter().zip(&g.values).map(|(&m, &v)| m * v).sum();
            let int_abs: T = nu.iter().zip(&g.values).map(|(&m, &v)| m * v.abs()).sum();
            (int_abs > T::zero()).then(|| (int_lg - ep * int_g).abs() / (ep * int_abs))
        })
        .collect()
}

fn fit_tail<T: Real>(profile: &[(T, T)]) -> Option<T> {
    let pts: Vec<(T, T)> = profile
        .iter()
        .filter(|p| p.1 > T::zero())
        .map(|p| (p.0.ln(), p.1.ln()))
        .collect();
    (pts.len() >= 2).then(|| -least_squares_slope(&pts))
}

/// Five bounded Lipschitz functions on the pivots: a constant, two bumps, a
/// slow oscillation and a capped radial profile.
pub fn holder_test_functions<T: Real>(graph: &Arc<PivotGraph<T>>) -> Vec<PivotGrid<T>> {
    let two = T::lit(2.0);
    vec![
        PivotGrid::constant(graph.clone(), T::one()),
        PivotGrid::from_fn(graph.clone(), |z| T::one() / (T::one() + z.norm())),
        PivotGrid::from_fn(graph.clone(), |z| (T::lit(0.3) * z.im).cos() + two),
        PivotGrid::from_fn(graph.clone(), |z| T::one() / (T::one() + (z.re - two).powi(2))),
        PivotGrid::from_fn(graph.clone(), |z| z.norm().sqrt().min(T::lit(5.0))),
    ]
}

/// Eigen-equation residuals `∫L_t g dν` against `e^P∫g dν` for each test function.
pub fn conformality_residual<T: Real>(measure: &AtomicMeasure<T>, p: T, tests: &[PivotGrid<T>]) -> ConformalityReport<T> {
    let graph = &measure.graph;
    let w = graph.weights(measure.t, TailMode::Drop);
    let nu = measure.pivot_masses();
    let tail_profile = measure.tail_profile(&measure.default_tail_radii());
    ConformalityReport {
        eigen_residuals: residuals(&nu, &w, graph, p, tests),
        fitted_tail_exponent: fit_tail(&tail_profile),
        tail_profile,
    }
}

/// The same residuals for `dm^e = |z|^{α₂t}dm` against the Euclidean operator.
pub fn euclidean_residual<T: Real>(measure: &AtomicMeasure<T>, p: T, tests: &[PivotGrid<T>]) -> Vec<Option<T>> {
    let graph = &measure.graph;
    let a2t = graph.metric().alpha2() * measure.t;
    let nu = measure.pivot_masses();
    let raw: Vec<T> = nu
        .iter()
        .zip(&graph.points)
        .map(|(&m, z)| m * z.norm().powf(a2t))
        .collect();
    let total: T = raw.iter().copied().sum();
    let nu_e: Vec<T> = raw.into_iter().map(|m| m / total).collect();
    residuals(&nu_e, &graph.euclidean_weights(measure.t), graph, p, tests)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::MapDescriptor;
    use crate::sigma::SigmaMetric;
    use crate::transfer::{iterate_pressure, GridConfig, PressureConfig};

    fn setup() -> (Arc<PivotGraph<f64>>, f64) {
        let f = MapDescriptor::exponential(Complex::new(0.2, 0.0)).unwrap();
        let m = SigmaMetric::for_map(&f);
        let cfg = GridConfig {
            truncation_radius: 200.0,
            ..GridConfig::default()
        };
        let g = Arc::new(PivotGraph::build(&f, &m, &[Complex::new(2.5426, 0.0)], &cfg).unwrap());
        let pc = PressureConfig {
            tail_mode: TailMode::Drop,
            ..PressureConfig::default()
        };
        let p = iterate_pressure(&g, 1.3, &[g.points[0]], &pc).unwrap().p;
        (g, p)
    }

    #[test]
    fn bookkeeping_identities_hold() {
        let (g, p) = setup();
        let nu = build_nu_s(&g, 1.3, p + 0.1, g.points[0], &MeasureConfig::default()).unwrap();
        assert!((nu.total_mass - 1.0).abs() < 1e-12);
        assert!(nu.multiplicativity_defect() < 1e-12);
        assert!(nu.level_shift_defect() < 1e-10);
        let prof = nu.tail_profile(&nu.default_tail_radii());
        assert!(prof.windows(2).all(|w| w[1].1 <= w[0].1));
    }

    #[test]
    fn residual_shrinks_toward_pressure() {
        let (g, p) = setup();
        let one = PivotGrid::constant(g.clone(), 1.0);
        let mut last = f64::INFINITY;
        for j in 1..=4 {
            let nu = build_nu_s(&g, 1.3, p + 0.5f64.powi(j), g.points[0], &MeasureConfig::default()).unwrap();
            let r = conformality_residual(&nu, p, std::slice::from_ref(&one)).eigen_residuals[0].unwrap();
            assert!(r < last, "j = {j}: {r} vs {last}");
            last = r;
        }
    }

    #[test]
    fn below_pressure_does_not_converge() {
        let (g, p) = setup();
        let cfg = MeasureConfig {
            depth_max: 200,
            ..MeasureConfig::default()
        };
        assert!(build_nu_s(&g, 1.3, p - 0.2, g.points[0], &cfg).is_err());
    }
}
