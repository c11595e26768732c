//! Dimension over parameter grids of precomposed families `f(λ_d z^d + … + λ_0)`.

use num_complex::Complex;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bowen::{dimension_of, DimensionConfig};
use crate::catalog::{Family, FamilyTag, MapDescriptor};
use crate::error::{Error, Result};
use crate::export::{fmt17, Table};
use crate::julia::{JuliaSample, Verdict};
use crate::pipeline::{verify, GateConfig, GateFailure};
use crate::poly::Polynomial;
use crate::scalar::Real;
use crate::transfer::GridConfig;

/// Closed complex rectangle `[lo.re, hi.re] × [lo.im, hi.im]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ComplexBox<T: Real> {
    pub lo: Complex<T>,
    pub hi: Complex<T>,
}

impl<T: Real> ComplexBox<T> {
    pub fn point(z: Complex<T>) -> Self {
        Self { lo: z, hi: z }
    }

    fn contains_zero(&self) -> bool {
        self.lo.re <= T::zero() && self.hi.re >= T::zero() && self.lo.im <= T::zero() && self.hi.im >= T::zero()
    }

    fn axis(lo: T, hi: T, n: usize) -> Vec<T> {
        if lo == hi || n <= 1 {
            return vec![lo];
        }
        (0..n)
            .map(|k| lo + (hi - lo) * T::from_usize_lossy(k) / T::from_usize_lossy(n - 1))
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct FamilySpec<T: Real> {
    pub base: MapDescriptor<T>,
    pub degree: usize,
    /// `λ_box[j]` bounds the coefficient `λ_j`, `j = 0..=d`.
    pub lambda_box: Vec<ComplexBox<T>>,
    /// Grid points per real axis of each box that is not degenerate along it.
    pub grid_density: usize,
}

impl<T: Real> FamilySpec<T> {
    pub fn new(base: MapDescriptor<T>, lambda_box: Vec<ComplexBox<T>>, grid_density: usize) -> Result<Self> {
        let spec = Self {
            degree: lambda_box.len().saturating_sub(1),
            base,
            lambda_box,
            grid_density,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 || self.lambda_box.len() != self.degree + 1 {
            return Err(Error::Config("a family needs boxes for λ_0..λ_d with d ≥ 1".into()));
        }
        if self.lambda_box[self.degree].contains_zero() {
            return Err(Error::Config("the box of the leading coefficient contains 0".into()));
        }
        if matches!(self.base.family(), Family::Precomposed { .. }) || self.base.shift() != Complex::zero() {
            return Err(Error::Config("the base map must be an unshifted catalog family".into()));
        }
        if self.base.growth_exponents().alpha1 < T::zero() {
            return Err(Error::Config(format!(
                "{} has α₁ < 0; the bounded deformation argument needs α₁ ≥ 0",
                self.base.tag().name()
            )));
        }
        Ok(())
    }

    /// Per coefficient, the grid values along the real and imaginary axes.
    fn axes(&self) -> Vec<Vec<T>> {
        self.lambda_box
            .iter()
            .flat_map(|b| {
                [
                    ComplexBox::axis(b.lo.re, b.hi.re, self.grid_density),
                    ComplexBox::axis(b.lo.im, b.hi.im, self.grid_density),
                ]
            })
            .collect()
    }

    /// Grid points with their multi-indices, last axis fastest.
    pub fn grid(&self) -> Vec<(Vec<usize>, Vec<Complex<T>>)> {
        let axes = self.axes();
        let mut out = vec![(Vec::new(), Vec::new())];
        for ax in &axes {
            let mut next = Vec::with_capacity(out.len() * ax.len());
            for (idx, vals) in &out {
                for (k, &v) in ax.iter().enumerate() {
                    let mut i: Vec<usize> = idx.clone();
                    i.push(k);
                    let mut x: Vec<T> = vals.clone();
                    x.push(v);
                    next.push((i, x));
                }
            }
            out = next;
        }
        out.into_iter()
            .map(|(i, x)| {
                let lam = x.chunks(2).map(|c| Complex::new(c[0], c[1])).collect();
                (i, lam)
            })
            .collect()
    }

    /// `f_λ = f∘P_λ` as a descriptor.
    pub fn map_at(&self, lambda: &[Complex<T>]) -> Result<MapDescriptor<T>> {
        let coeffs: Vec<Complex<T>> = lambda.iter().rev().copied().collect();
        MapDescriptor::precomposed(self.base.clone(), Polynomial::new(coeffs))
    }
}

#[derive(Clone, Debug)]
pub struct Normalized<T: Real> {
    /// `g_γ = γ_d·f∘Q_γ`, or the equivalent catalog map when one exists.
    pub g: MapDescriptor<T>,
    /// `γ_d = λ_d^{1/d}` (principal root), `γ_j = λ_j` otherwise.
    pub gamma: Vec<Complex<T>>,
    /// Largest relative gap of `T∘g∘T⁻¹ = f_λ` over the check points.
    pub conjugacy_error: T,
}

impl<T: Real> Normalized<T> {
    /// `T(z) = z/γ_d`
    pub fn to_lambda_plane(&self, zeta: Complex<T>) -> Complex<T> {
        zeta / self.gamma[self.gamma.len() - 1]
    }
}

/// Monic rescaled form of `f∘P_λ`, with the conjugacy checked at 100 points.
pub fn coordinate_normalization<T: Real>(spec: &FamilySpec<T>, lambda: &[Complex<T>]) -> Result<Normalized<T>> {
    let d = spec.degree;
    if lambda.len() != d + 1 {
        return Err(Error::Config(format!("expected {} coefficients, got {}", d + 1, lambda.len())));
    }
    if lambda[d].is_zero() {
        return Err(Error::Config("λ_d = 0".into()));
    }
    let gd = lambda[d].powf(T::one() / T::from_usize_lossy(d));
    let mut gamma = lambda.to_vec();
    gamma[d] = gd;
    // Q(z) = z^d + Σ_{j<d} λ_j γ_d^{-j} z^j, highest degree first
    let mut q = vec![Complex::one()];
    for j in (0..d).rev() {
        q.push(lambda[j] * gd.powi(-(j as i32)));
    }
    let g = match (spec.base.family(), d) {
        // γ·μ·e^{z + c₀} is again an exponential map
        (Family::Exponential { lambda: mu }, 1) => MapDescriptor::exponential(gd * *mu * q[1].exp())?,
        _ => MapDescriptor::precomposed_scaled(spec.base.clone(), Polynomial::new(q), gd)?,
    };
    let f = spec.map_at(lambda)?;
    let mut err = T::zero();
    for k in 0..100 {
        // golden-angle spiral in |z| ≤ 3
        let r = T::lit(3.0) * (T::from_usize_lossy(k) + T::lit(0.5)).sqrt() / T::lit(10.0);
        let z = Complex::from_polar(r, T::from_usize_lossy(k) * T::lit(2.399_963_229_728_653));
        let (Some(a), Some(b)) = (f.evaluate(z).finite(), g.evaluate(gd * z).finite()) else {
            continue;
        };
        err = err.max((b / gd - a).norm() / a.norm().max(T::one()));
    }
    Ok(Normalized {
        g,
        gamma,
        conjugacy_error: err,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DeformationReport<T: Real> {
    /// `max_j max_z |∂f_λ/∂λ_j| / |f′_λ|`
    pub m: T,
    pub per_coefficient: Vec<T>,
    pub skipped: usize,
}

/// `|∂f_λ/∂λ_j| / |f′_λ| = |z|^j/|P_λ′(z)|` over a sample of the normalized map,
/// mapped back by `z = (ζ + shift)/γ_d`.
pub fn bounded_deformation_check<T: Real>(norm: &Normalized<T>, lambda: &[Complex<T>], sample: &JuliaSample<T>) -> DeformationReport<T> {
    let coeffs: Vec<Complex<T>> = lambda.iter().rev().copied().collect();
    let dp = Polynomial::new(coeffs).derivative();
    let shift = norm.g.shift();
    let pole_tol = norm.g.tolerances().pole_tol;
    let mut per = vec![T::zero(); lambda.len()];
    let mut skipped = 0;
    for &zeta in &sample.points {
        if norm.g.pole_distance(zeta).map_or(false, |d| d <= pole_tol) {
            skipped += 1;
            continue;
        }
        let z = norm.to_lambda_plane(zeta + shift);
        let den = dp.eval(z).norm();
        if !(den > T::zero()) {
            skipped += 1;
            continue;
        }
        let r = z.norm();
        for (j, p) in per.iter_mut().enumerate() {
            *p = p.max(r.powi(j as i32) / den);
        }
    }
    DeformationReport {
        m: per.iter().copied().fold(T::zero(), T::max),
        per_coefficient: per,
        skipped,
    }
}

/// `|f_λ(z)| / (|λ||f′_λ(z)|)` for the outer scaling family `λ·f`.
pub fn scaling_deformation<T: Real>(scaled: &MapDescriptor<T>, lambda: Complex<T>, sample: &[Complex<T>]) -> T {
    sample
        .iter()
        .filter_map(|&z| scaled.eval_with_derivative(z))
        .map(|(w, d)| w.norm() / (lambda.norm() * d.norm()))
        .fold(T::zero(), T::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct SweepConfig<T: Real> {
    pub gates: GateConfig<T>,
    pub grid: GridConfig<T>,
    pub dimension: DimensionConfig<T>,
}

impl<T: Real> Default for SweepConfig<T> {
    fn default() -> Self {
        Self {
            gates: GateConfig::default(),
            grid: GridConfig::default(),
            dimension: DimensionConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SweepEntry<T: Real> {
    pub index: Vec<usize>,
    pub lambda: Vec<Complex<T>>,
    pub h: Option<T>,
    pub verdict: Verdict,
    pub bracket: Option<(T, T)>,
    pub deformation_m: Option<T>,
    pub conjugacy_error: T,
    pub pivots: usize,
    pub failures: Vec<GateFailure>,
    pub error: Option<String>,
}

/// `h` at one parameter, through normalization, gates and the Bowen zero.
pub fn dimension_at<T: Real>(spec: &FamilySpec<T>, index: Vec<usize>, lambda: &[Complex<T>], cfg: &SweepConfig<T>) -> Result<SweepEntry<T>> {
    let norm = coordinate_normalization(spec, lambda)?;
    let ver = verify(&norm.g, &cfg.gates)?;
    let mut entry = SweepEntry {
        index,
        lambda: lambda.to_vec(),
        h: None,
        verdict: ver.report.hyperbolicity.verdict,
        bracket: None,
        deformation_m: None,
        conjugacy_error: norm.conjugacy_error,
        pivots: 0,
        failures: ver.report.failures.clone(),
        error: None,
    };
    let Some(sample) = &ver.sample else {
        return Ok(entry);
    };
    entry.deformation_m = Some(bounded_deformation_check(&norm, lambda, sample).m);
    if !ver.report.passed() {
        return Ok(entry);
    }
    match dimension_of(&ver.normalized, &sample.seeds, &cfg.grid, &cfg.dimension) {
        Ok((graph, res)) => {
            entry.h = Some(res.h);
            entry.bracket = Some(res.bracket);
            entry.pivots = graph.len();
        }
        Err(e) => entry.error = Some(e.to_string()),
    }
    Ok(entry)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SweepResult<T: Real> {
    pub entries: Vec<SweepEntry<T>>,
    pub deformation_m: T,
    /// Largest `|h(λ+δ) − 2h(λ) + h(λ−δ)|` along grid axes.
    pub smoothness: T,
    /// Largest `|h(λ+δ) − h(λ)|` between grid neighbours.
    pub max_neighbor_jump: T,
}

impl<T: Real> SweepResult<T> {
    pub fn to_table(&self) -> Table {
        let d = self.entries.first().map_or(0, |e| e.lambda.len());
        let mut header: Vec<String> = Vec::new();
        for j in 0..d {
            header.push(format!("lambda{j}_re"));
            header.push(format!("lambda{j}_im"));
        }
        header.push("h".into());
        header.push("verdict".into());
        let refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
        let mut t = Table::new(&refs);
        for e in &self.entries {
            let mut row: Vec<String> = e
                .lambda
                .iter()
                .flat_map(|z| [fmt17(z.re.as_f64()), fmt17(z.im.as_f64())])
                .collect();
            row.push(e.h.map_or_else(String::new, |h| fmt17(h.as_f64())));
            row.push(format!("{:?}", e.verdict));
            t.push(row);
        }
        t
    }
}

/// `h` over the whole grid; grid points are independent runs.
pub fn dimension_sweep<T: Real>(spec: &FamilySpec<T>, cfg: &SweepConfig<T>) -> Result<SweepResult<T>> {
    spec.validate()?;
    if spec.base.tag() == FamilyTag::CosineRoot {
        return Err(Error::Config("cosine-root sweeps are excluded (α₁ < 0)".into()));
    }
    let entries: Vec<SweepEntry<T>> = spec
        .grid()
        .into_par_iter()
        .map(|(idx, lam)| dimension_at(spec, idx, &lam, cfg))
        .collect::<Result<_>>()?;
    let deformation_m = entries.iter().filter_map(|e| e.deformation_m).fold(T::zero(), T::max);
    let (smoothness, jump) = grid_differences(&entries);
    Ok(SweepResult {
        entries,
        deformation_m,
        smoothness,
        max_neighbor_jump: jump,
    })
}

fn grid_differences<T: Real>(entries: &[SweepEntry<T>]) -> (T, T) {
    use std::collections::HashMap;
    let by_index: HashMap<&[usize], T> = entries
        .iter()
        .filter_map(|e| e.h.map(|h| (e.index.as_slice(), h)))
        .collect();
    let mut second = T::zero();
    let mut jump = T::zero();
    for e in entries {
        let Some(h) = e.h else { continue };
        for ax in 0..e.index.len() {
            let mut up = e.index.clone();
            up[ax] += 1;
            if let Some(&hu) = by_index.get(up.as_slice()) {
                jump = jump.max((hu - h).abs());
                if e.index[ax] > 0 {
                    let mut dn = e.index.clone();
                    dn[ax] -= 1;
                    if let Some(&hd) = by_index.get(dn.as_slice()) {
                        second = second.max((hu - h * T::lit(2.0) + hd).abs());
                    }
                }
            }
        }
    }
    (second, jump)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn identity_parameters_leave_the_map() {
        let s = MapDescriptor::sine(c(0.5, 0.0), c(0.0, 0.0)).unwrap();
        let spec = FamilySpec::new(s.clone(), vec![ComplexBox::point(c(0.0, 0.0)), ComplexBox::point(c(1.0, 0.0))], 1).unwrap();
        let n = coordinate_normalization(&spec, &[c(0.0, 0.0), c(1.0, 0.0)]).unwrap();
        for k in 0..20 {
            let z = c(0.3 * k as f64 - 2.0, 0.1 * k as f64);
            assert!((n.g.evaluate(z).finite().unwrap() - s.evaluate(z).finite().unwrap()).norm() < 1e-14);
        }
    }

    #[test]
    fn conjugacy_holds_for_quadratic_precomposition() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let spec = FamilySpec::new(
            e,
            vec![ComplexBox::point(c(0.1, 0.0)), ComplexBox::point(c(0.0, 0.2)), ComplexBox::point(c(0.3, 0.1))],
            1,
        )
        .unwrap();
        let n = coordinate_normalization(&spec, &[c(0.1, 0.0), c(0.0, 0.2), c(0.3, 0.1)]).unwrap();
        assert!(n.conjugacy_error < 1e-10, "{}", n.conjugacy_error);
    }

    #[test]
    fn linear_exponential_reduces_to_catalog_map() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let spec = FamilySpec::new(e, vec![ComplexBox::point(c(0.0, 0.0)), ComplexBox::point(c(0.2, 0.0))], 1).unwrap();
        let n = coordinate_normalization(&spec, &[c(0.0, 0.0), c(0.2, 0.0)]).unwrap();
        assert_eq!(n.g.tag(), FamilyTag::Exponential);
        assert!((n.g.params()[0] - c(0.2, 0.0)).norm() < 1e-15);
        assert!(n.conjugacy_error < 1e-12);
    }

    #[test]
    fn leading_box_through_zero_is_rejected() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let b = ComplexBox { lo: c(-0.1, 0.0), hi: c(0.1, 0.0) };
        assert!(FamilySpec::new(e, vec![ComplexBox::point(c(0.0, 0.0)), b], 3).is_err());
    }

    #[test]
    fn degenerating_leading_coefficient_blows_up_deformation() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let sample = JuliaSample {
            seeds: vec![c(1.0, 1.0)],
            points: vec![c(1.0, 1.0), c(2.0, -3.0), c(-0.5, 4.0)],
            provenance: Vec::new(),
            log_derivative: Vec::new(),
            modulus_cap: 10.0,
            exhausted: false,
        };
        let mut last = 0.0;
        for l1 in [0.2, 0.02, 0.002] {
            let spec = FamilySpec::new(e.clone(), vec![ComplexBox::point(c(0.0, 0.0)), ComplexBox::point(c(l1, 0.0))], 1).unwrap();
            let n = coordinate_normalization(&spec, &[c(0.0, 0.0), c(l1, 0.0)]).unwrap();
            let m = bounded_deformation_check(&n, &[c(0.0, 0.0), c(l1, 0.0)], &sample).m;
            assert!(m > 5.0 * last);
            last = m;
        }
    }

    #[test]
    fn scaling_family_ratio_is_inverse_lambda() {
        let f = MapDescriptor::exponential(c(0.2, 0.0)).unwrap();
        let m = scaling_deformation(&f, c(0.2, 0.0), &[c(1.0, 2.0), c(-3.0, 0.5)]);
        assert!((m - 5.0).abs() < 1e-12);
    }
}
