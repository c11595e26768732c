//! Supported meromorphic families: evaluation, derivatives, inverse branches,
//! singular values and growth exponents.
//!
//! Every descriptor carries a normalization shift `s`; the map actually studied is
//! the conjugate `g(ζ) = f(ζ + s) − s`, which puts a Fatou point at the origin.

mod growth;
mod preimages;
pub mod weierstrass;

use std::collections::BTreeSet;
use std::fmt;

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::Polynomial;
use crate::scalar::{is_finite_c, Real};

pub use growth::{pole_structure, verify_balanced_growth, BalancedGrowthReport, GrowthViolation, PoleStructure};
pub use preimages::{Branch, PreimageList};
pub use weierstrass::Lattice;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyTag {
    Exponential,
    Sine,
    Tangent,
    CosineRoot,
    WeierstrassP,
    PolyExp,
    Precomposed,
}

impl FamilyTag {
    pub fn name(self) -> &'static str {
        match self {
            FamilyTag::Exponential => "exponential",
            FamilyTag::Sine => "sine",
            FamilyTag::Tangent => "tangent",
            FamilyTag::CosineRoot => "cosine_root",
            FamilyTag::WeierstrassP => "weierstrass_p",
            FamilyTag::PolyExp => "poly_exp",
            FamilyTag::Precomposed => "precomposed",
        }
    }
}

impl fmt::Display for FamilyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family<T: Real> {
    /// `λ e^z`
    Exponential { lambda: Complex<T> },
    /// `sin(az + b)`
    Sine { a: Complex<T>, b: Complex<T> },
    /// `λ tan z`
    Tangent { lambda: Complex<T> },
    /// `cos(√(az + b))`
    CosineRoot { a: Complex<T>, b: Complex<T> },
    WeierstrassP(Box<Lattice<T>>),
    /// `P(z) e^{Q(z)}`
    PolyExp { p: Polynomial<T>, q: Polynomial<T> },
    /// `f(P(z))` for an unshifted base family `f`.
    /// `scale·base(poly(z))`
    Precomposed { base: Box<MapDescriptor<T>>, poly: Polynomial<T>, scale: Complex<T> },
}

impl<T: Real> Family<T> {
    pub fn tag(&self) -> FamilyTag {
        match self {
            Family::Exponential { .. } => FamilyTag::Exponential,
            Family::Sine { .. } => FamilyTag::Sine,
            Family::Tangent { .. } => FamilyTag::Tangent,
            Family::CosineRoot { .. } => FamilyTag::CosineRoot,
            Family::WeierstrassP(_) => FamilyTag::WeierstrassP,
            Family::PolyExp { .. } => FamilyTag::PolyExp,
            Family::Precomposed { .. } => FamilyTag::Precomposed,
        }
    }
}

/// Numerical tolerances, in native units of the coordinate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Tolerances<T: Real> {
    /// Residual allowed in `|f(z) − w|`, relative to `max(1, |w|)`, on top of the
    /// round-off floor `8ε|z||f′(z)|`.
    pub eval_tol: T,
    pub separation_tol: T,
    pub pole_tol: T,
    pub newton_tol: T,
    pub newton_max_iter: u32,
    /// Seeds per axis for lattice families.
    pub seed_grid: u32,
}

impl<T: Real> Default for Tolerances<T> {
    fn default() -> Self {
        Self {
            eval_tol: T::tol(1e-9),
            separation_tol: T::tol(1e-8),
            pole_tol: T::tol(1e-6),
            newton_tol: T::tol(1e-12),
            newton_max_iter: 50,
            seed_grid: 64,
        }
    }
}

/// Result of evaluating a meromorphic map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MapValue<T> {
    Finite(Complex<T>),
    Pole,
    /// Value beyond the floating point range.
    Overflow,
}

impl<T: Real> MapValue<T> {
    pub fn finite(self) -> Option<Complex<T>> {
        match self {
            MapValue::Finite(z) => Some(z),
            _ => None,
        }
    }

    fn from_raw(z: Complex<T>) -> Self {
        if is_finite_c(z) {
            MapValue::Finite(z)
        } else {
            MapValue::Overflow
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SingularKind {
    Critical,
    Asymptotic,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SingularValue<T> {
    pub value: Complex<T>,
    pub kind: SingularKind,
    /// Omitted by the map (never attained).
    pub omitted: bool,
}

/// `(α₁, α₂, ρ)` with `α = α₁ + α₂`; `κ` when known exactly.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct GrowthExponents<T: Real> {
    pub alpha1: T,
    pub alpha2: T,
    pub alpha: T,
    pub order_rho: T,
    pub kappa: Option<T>,
}

impl<T: Real> GrowthExponents<T> {
    pub fn new(alpha1: T, alpha2: T, order_rho: T) -> Self {
        Self {
            alpha1,
            alpha2,
            alpha: alpha1 + alpha2,
            order_rho,
            kappa: None,
        }
    }

    /// `α₂ > max(0, −α₁)` and `ρ > 0`.
    pub fn is_admissible(&self) -> bool {
        self.alpha2 > T::zero() && self.alpha2 > -self.alpha1 && self.order_rho > T::zero()
    }

    /// Critical exponent `ρ/α`.
    pub fn critical_t(&self) -> T {
        self.order_rho / self.alpha
    }
}

/// A concrete map from the catalog together with its normalization shift.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDescriptor<T>", into = "RawDescriptor<T>", bound = "T: Real")]
pub struct MapDescriptor<T: Real> {
    family: Family<T>,
    shift: Complex<T>,
    tolerances: Tolerances<T>,
}

impl<T: Real> MapDescriptor<T> {
    pub fn exponential(lambda: Complex<T>) -> Result<Self> {
        nonzero(lambda, "exponential", "λ")?;
        Ok(Self::from_family(Family::Exponential { lambda }))
    }

    pub fn sine(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        nonzero(a, "sine", "a")?;
        Ok(Self::from_family(Family::Sine { a, b }))
    }

    pub fn tangent(lambda: Complex<T>) -> Result<Self> {
        nonzero(lambda, "tangent", "λ")?;
        Ok(Self::from_family(Family::Tangent { lambda }))
    }

    pub fn cosine_root(a: Complex<T>, b: Complex<T>) -> Result<Self> {
        nonzero(a, "cosine_root", "a")?;
        Ok(Self::from_family(Family::CosineRoot { a, b }))
    }

    pub fn weierstrass(omega1: Complex<T>, omega2: Complex<T>) -> Result<Self> {
        let lattice = Lattice::new(omega1, omega2)?;
        Ok(Self::from_family(Family::WeierstrassP(Box::new(lattice))))
    }

    pub fn poly_exp(p: Polynomial<T>, q: Polynomial<T>) -> Result<Self> {
        if p.leading().is_zero() {
            return Err(invalid("poly_exp", "P is the zero polynomial"));
        }
        if q.degree() == 0 {
            return Err(invalid("poly_exp", "Q must have positive degree"));
        }
        Ok(Self::from_family(Family::PolyExp { p, q }))
    }

    /// `f(λ_d z^d + … + λ_0)`; coefficients highest degree first.
    pub fn precomposed(base: MapDescriptor<T>, poly: Polynomial<T>) -> Result<Self> {
        Self::precomposed_scaled(base, poly, Complex::one())
    }

    /// `c·f(λ_d z^d + … + λ_0)`.
    pub fn precomposed_scaled(base: MapDescriptor<T>, poly: Polynomial<T>, scale: Complex<T>) -> Result<Self> {
        if scale.is_zero() || !is_finite_c(scale) {
            return Err(invalid("precomposed", "outer scale must be finite and nonzero"));
        }
        if matches!(base.family, Family::Precomposed { .. }) {
            return Err(invalid("precomposed", "base must not itself be precomposed"));
        }
        if !base.shift.is_zero() {
            return Err(invalid("precomposed", "base must be unshifted"));
        }
        if poly.degree() == 0 || poly.leading().is_zero() {
            return Err(invalid("precomposed", "λ_d must be nonzero and d ≥ 1"));
        }
        Ok(Self::from_family(Family::Precomposed {
            base: Box::new(base),
            poly,
            scale,
        }))
    }

    fn from_family(family: Family<T>) -> Self {
        Self {
            family,
            shift: Complex::zero(),
            tolerances: Tolerances::default(),
        }
    }

    pub fn with_shift(mut self, shift: Complex<T>) -> Self {
        self.shift = shift;
        self
    }

    pub fn with_tolerances(mut self, tolerances: Tolerances<T>) -> Self {
        self.tolerances = tolerances;
        self
    }

    pub fn family(&self) -> &Family<T> {
        &self.family
    }

    pub fn tag(&self) -> FamilyTag {
        self.family.tag()
    }

    pub fn shift(&self) -> Complex<T> {
        self.shift
    }

    pub fn tolerances(&self) -> &Tolerances<T> {
        &self.tolerances
    }

    /// Parameter vector in the serialized layout.
    pub fn params(&self) -> Vec<Complex<T>> {
        RawDescriptor::from(self.clone()).params
    }

    /// `f` in original (unshifted) coordinates.
    pub fn eval_raw(&self, z: Complex<T>) -> MapValue<T> {
        let pole_tol = self.tolerances.pole_tol;
        match &self.family {
            Family::Exponential { lambda } => MapValue::from_raw(*lambda * z.exp()),
            Family::Sine { a, b } => MapValue::from_raw((*a * z + *b).sin()),
            Family::Tangent { lambda } => {
                if tan_pole_distance(z) <= pole_tol {
                    MapValue::Pole
                } else {
                    MapValue::from_raw(*lambda * z.tan())
                }
            }
            Family::CosineRoot { a, b } => MapValue::from_raw((*a * z + *b).sqrt().cos()),
            Family::WeierstrassP(lat) => {
                if lat.distance_to_lattice(z) <= pole_tol {
                    MapValue::Pole
                } else {
                    MapValue::from_raw(lat.value(z))
                }
            }
            Family::PolyExp { p, q } => MapValue::from_raw(p.eval(z) * q.eval(z).exp()),
            Family::Precomposed { base, poly, scale } => {
                let u = poly.eval(z);
                if !is_finite_c(u) {
                    return MapValue::Overflow;
                }
                match base.eval_raw(u) {
                    MapValue::Finite(w) => MapValue::from_raw(*scale * w),
                    other => other,
                }
            }
        }
    }

    /// `f′` in original coordinates.
    pub fn derivative_raw(&self, z: Complex<T>) -> Result<Complex<T>> {
        let pole = || Error::PoleProximity(format!("{z}"));
        let d = match &self.family {
            Family::Exponential { lambda } => *lambda * z.exp(),
            Family::Sine { a, b } => *a * (*a * z + *b).cos(),
            Family::Tangent { lambda } => {
                if tan_pole_distance(z) <= self.tolerances.pole_tol {
                    return Err(pole());
                }
                let c = z.cos();
                *lambda / (c * c)
            }
            Family::CosineRoot { a, b } => {
                let s = (*a * z + *b).sqrt();
                -*a * T::lit(0.5) * sinc(s)
            }
            Family::WeierstrassP(lat) => {
                if lat.distance_to_lattice(z) <= self.tolerances.pole_tol {
                    return Err(pole());
                }
                lat.value_and_derivative(z).1
            }
            Family::PolyExp { p, q } => {
                let (pv, dp) = p.eval_d(z);
                let (qv, dq) = q.eval_d(z);
                (dp + pv * dq) * qv.exp()
            }
            Family::Precomposed { base, poly, scale } => {
                let (u, du) = poly.eval_d(z);
                *scale * base.derivative_raw(u)? * du
            }
        };
        Ok(d)
    }

    /// Value of the normalized map `g(ζ) = f(ζ + s) − s`.
    pub fn evaluate(&self, z: Complex<T>) -> MapValue<T> {
        match self.eval_raw(z + self.shift) {
            MapValue::Finite(w) => MapValue::from_raw(w - self.shift),
            other => other,
        }
    }

    /// `g′(ζ) = f′(ζ + s)`.
    pub fn derivative(&self, z: Complex<T>) -> Result<Complex<T>> {
        let d = self.derivative_raw(z + self.shift)?;
        if !is_finite_c(d) {
            return Err(Error::Numeric(format!("derivative overflow at {z}")));
        }
        Ok(d)
    }

    /// Value and derivative together; `None` at poles or on overflow.
    pub fn eval_with_derivative(&self, z: Complex<T>) -> Option<(Complex<T>, Complex<T>)> {
        let w = self.evaluate(z).finite()?;
        let d = self.derivative(z).ok()?;
        Some((w, d))
    }

    /// Catalog exponents `(α₁, α₂, ρ)`; `κ = 1` is exact for the exponential family.
    pub fn growth_exponents(&self) -> GrowthExponents<T> {
        let h = T::lit(0.5);
        match &self.family {
            Family::Exponential { .. } => {
                let mut g = GrowthExponents::new(T::zero(), T::one(), T::one());
                g.kappa = Some(T::one());
                g
            }
            Family::Sine { .. } => GrowthExponents::new(T::zero(), T::one(), T::one()),
            Family::Tangent { .. } => GrowthExponents::new(T::zero(), T::lit(2.0), T::one()),
            Family::CosineRoot { .. } => GrowthExponents::new(-h, T::one(), h),
            Family::WeierstrassP(_) => GrowthExponents::new(T::zero(), T::lit(1.5), T::lit(2.0)),
            Family::PolyExp { q, .. } => {
                let m = T::from_usize_lossy(q.degree());
                GrowthExponents::new(m - T::one(), T::one(), m)
            }
            Family::Precomposed { base, poly, .. } => {
                let b = base.growth_exponents();
                let d = T::from_usize_lossy(poly.degree());
                GrowthExponents::new(d * (b.alpha1 + T::one()) - T::one(), b.alpha2, d * b.order_rho)
            }
        }
    }

    /// Singular values of the normalized map, in closed form.
    pub fn singular_values(&self) -> Vec<SingularValue<T>> {
        let mut out = self.singular_values_raw();
        for sv in &mut out {
            sv.value -= self.shift;
        }
        out
    }

    fn singular_values_raw(&self) -> Vec<SingularValue<T>> {
        let crit = |v: Complex<T>| SingularValue {
            value: v,
            kind: SingularKind::Critical,
            omitted: false,
        };
        let one = Complex::<T>::one();
        match &self.family {
            Family::Exponential { .. } => vec![SingularValue {
                value: Complex::zero(),
                kind: SingularKind::Asymptotic,
                omitted: true,
            }],
            Family::Sine { .. } | Family::CosineRoot { .. } => vec![crit(one), crit(-one)],
            Family::Tangent { lambda } => {
                let i = Complex::<T>::i();
                [i, -i]
                    .into_iter()
                    .map(|u| SingularValue {
                        value: *lambda * u,
                        kind: SingularKind::Asymptotic,
                        omitted: true,
                    })
                    .collect()
            }
            Family::WeierstrassP(lat) => lat.e.iter().map(|&e| crit(e)).collect(),
            Family::PolyExp { p, q } => {
                // critical points solve P′ + P Q′ = 0
                let dp = p.derivative();
                let pdq = poly_mul(p, &q.derivative());
                let eq = poly_add(&dp, &pdq);
                let mut out: Vec<_> = eq
                    .roots()
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(|c| self.eval_raw(c).finite())
                    .map(crit)
                    .collect();
                out.push(SingularValue {
                    value: Complex::zero(),
                    kind: SingularKind::Asymptotic,
                    omitted: p.degree() == 0,
                });
                out
            }
            Family::Precomposed { base, poly, scale } => {
                // c·f∘P omits exactly c times what f omits
                let mut out = base.singular_values_raw();
                for c in poly.derivative().roots().unwrap_or_default() {
                    if let MapValue::Finite(v) = base.eval_raw(poly.eval(c)) {
                        out.push(crit(v));
                    }
                }
                for sv in &mut out {
                    sv.value *= *scale;
                }
                out
            }
        }
    }

    /// Values never attained by the normalized map.
    pub fn omitted_values(&self) -> Vec<Complex<T>> {
        self.singular_values()
            .into_iter()
            .filter(|s| s.omitted)
            .map(|s| s.value)
            .collect()
    }

    pub(crate) fn is_omitted(&self, w: Complex<T>) -> bool {
        let tol = self.tolerances.separation_tol;
        self.omitted_values()
            .iter()
            .any(|&o| (o - w).norm() <= tol * T::one().max(o.norm()))
    }

    /// Distance (in the normalized coordinate) to the nearest pole, when poles exist.
    pub fn pole_distance(&self, z: Complex<T>) -> Option<T> {
        let x = z + self.shift;
        match &self.family {
            Family::Tangent { .. } => Some(tan_pole_distance(x)),
            Family::WeierstrassP(lat) => Some(lat.distance_to_lattice(x)),
            Family::Precomposed { base, poly, .. } => {
                let (u, du) = poly.eval_d(x);
                let d = base.pole_distance(u)?;
                let s = du.norm();
                Some(if s > T::zero() { d / s } else { T::zero() })
            }
            _ => None,
        }
    }

    /// Inverse branch number `index` of the normalized map at `w`, for the families
    /// with explicit branches.
    pub fn inverse_branch(&self, w: Complex<T>, index: i64) -> Result<Complex<T>> {
        let z = preimages::explicit_branch(self, w + self.shift, index)?;
        Ok(z - self.shift)
    }
}

/// Polynomial product (coefficients highest degree first).
pub(crate) fn poly_mul<T: Real>(a: &Polynomial<T>, b: &Polynomial<T>) -> Polynomial<T> {
    let (ac, bc) = (a.coeffs(), b.coeffs());
    let mut out = vec![Complex::zero(); ac.len() + bc.len() - 1];
    for (i, &x) in ac.iter().enumerate() {
        for (j, &y) in bc.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    Polynomial::new(out)
}

pub(crate) fn poly_add<T: Real>(a: &Polynomial<T>, b: &Polynomial<T>) -> Polynomial<T> {
    let n = a.coeffs().len().max(b.coeffs().len());
    let pad = |p: &Polynomial<T>| {
        let mut v = vec![Complex::zero(); n - p.coeffs().len()];
        v.extend_from_slice(p.coeffs());
        v
    };
    let (x, y) = (pad(a), pad(b));
    Polynomial::new(x.iter().zip(&y).map(|(&p, &q)| p + q).collect())
}

/// `sin(s)/s`, continuous at 0.
fn sinc<T: Real>(s: Complex<T>) -> Complex<T> {
    if s.norm() < T::lit(1e-3) {
        let s2 = s * s;
        Complex::<T>::one() - s2 / T::lit(6.0) + s2 * s2 / T::lit(120.0)
    } else {
        s.sin() / s
    }
}

fn tan_pole_distance<T: Real>(z: Complex<T>) -> T {
    let half_pi = T::FRAC_PI_2();
    let k = ((z.re - half_pi) / T::PI()).round();
    let pole = half_pi + k * T::PI();
    Complex::new(z.re - pole, z.im).norm()
}

fn nonzero<T: Real>(v: Complex<T>, family: &'static str, name: &str) -> Result<()> {
    if v.is_zero() || !is_finite_c(v) {
        Err(invalid(family, &format!("{name} must be finite and nonzero")))
    } else {
        Ok(())
    }
}

fn invalid(family: &'static str, reason: &str) -> Error {
    Error::InvalidParams {
        family,
        reason: reason.to_string(),
    }
}

/// Serialized layout: `{family, params, shift}` plus `base` / `p_degree` where needed.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "T: Real", deny_unknown_fields)]
pub struct RawDescriptor<T: Real> {
    pub family: FamilyTag,
    pub params: Vec<Complex<T>>,
    #[serde(default = "Complex::zero")]
    pub shift: Complex<T>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<Box<RawDescriptor<T>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_degree: Option<usize>,
    /// Outer factor of a precomposed map; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<Complex<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances<T>>,
}

impl<T: Real> TryFrom<RawDescriptor<T>> for MapDescriptor<T> {
    type Error = Error;

    fn try_from(raw: RawDescriptor<T>) -> Result<Self> {
        let fam = raw.family.name();
        let need = |n: usize| -> Result<()> {
            if raw.params.len() != n {
                Err(invalid(fam, &format!("expected {n} params, got {}", raw.params.len())))
            } else {
                Ok(())
            }
        };
        let p = &raw.params;
        let desc = match raw.family {
            FamilyTag::Exponential => {
                need(1)?;
                Self::exponential(p[0])?
            }
            FamilyTag::Sine => {
                need(2)?;
                Self::sine(p[0], p[1])?
            }
            FamilyTag::Tangent => {
                need(1)?;
                Self::tangent(p[0])?
            }
            FamilyTag::CosineRoot => {
                need(2)?;
                Self::cosine_root(p[0], p[1])?
            }
            FamilyTag::WeierstrassP => {
                need(2)?;
                Self::weierstrass(p[0], p[1])?
            }
            FamilyTag::PolyExp => {
                let dp = raw
                    .p_degree
                    .ok_or_else(|| invalid(fam, "p_degree is required"))?;
                if p.len() < dp + 3 {
                    return Err(invalid(fam, "params must hold P (p_degree+1 coefficients) then Q (degree ≥ 1)"));
                }
                Self::poly_exp(
                    Polynomial::new(p[..=dp].to_vec()),
                    Polynomial::new(p[dp + 1..].to_vec()),
                )?
            }
            FamilyTag::Precomposed => {
                let base = raw.base.ok_or_else(|| invalid(fam, "base descriptor is required"))?;
                let base = MapDescriptor::try_from(*base)?;
                if p.len() < 2 {
                    return Err(invalid(fam, "polynomial needs degree ≥ 1"));
                }
                if p[0].is_zero() {
                    return Err(invalid(fam, "λ_d must be nonzero"));
                }
                Self::precomposed_scaled(base, Polynomial::new(p.clone()), raw.scale.unwrap_or_else(Complex::one))?
            }
        };
        let mut desc = desc.with_shift(raw.shift);
        if let Some(t) = raw.tolerances {
            desc = desc.with_tolerances(t);
        }
        Ok(desc)
    }
}

impl<T: Real> From<MapDescriptor<T>> for RawDescriptor<T> {
    fn from(d: MapDescriptor<T>) -> Self {
        let mut raw = RawDescriptor {
            family: d.tag(),
            params: Vec::new(),
            shift: d.shift,
            base: None,
            p_degree: None,
            scale: None,
            tolerances: if d.tolerances == Tolerances::default() {
                None
            } else {
                Some(d.tolerances)
            },
        };
        match d.family {
            Family::Exponential { lambda } | Family::Tangent { lambda } => raw.params = vec![lambda],
            Family::Sine { a, b } | Family::CosineRoot { a, b } => raw.params = vec![a, b],
            Family::WeierstrassP(lat) => raw.params = vec![lat.omega1, lat.omega2],
            Family::PolyExp { p, q } => {
                raw.p_degree = Some(p.degree());
                raw.params = p.coeffs().iter().chain(q.coeffs()).copied().collect();
            }
            Family::Precomposed { base, poly, scale } => {
                raw.params = poly.coeffs().to_vec();
                if scale != Complex::one() {
                    raw.scale = Some(scale);
                }
                raw.base = Some(Box::new(RawDescriptor::from(*base)));
            }
        }
        raw
    }
}

/// All distinct pole multiplicities, or `None` for entire maps.
pub(crate) fn pole_multiplicities<T: Real>(desc: &MapDescriptor<T>) -> Option<BTreeSet<u32>> {
    match desc.family() {
        Family::Tangent { .. } => Some([1].into()),
        Family::WeierstrassP(_) => Some([2].into()),
        Family::Precomposed { base, poly, .. } => {
            let base_set = pole_multiplicities(base)?;
            let mut out = base_set.clone();
            // Critical points of P landing on a pole raise the local multiplicity.
            let dpoly = poly.derivative();
            if let Some(crit) = dpoly.roots() {
                for c in crit {
                    let u = poly.eval(c);
                    if base.pole_distance(u).is_some_and(|d| d <= base.tolerances.pole_tol) {
                        let order = 1 + critical_order(poly, c);
                        for &m in &base_set {
                            out.insert(m * order);
                        }
                    }
                }
            }
            Some(out)
        }
        _ => None,
    }
}

/// Number of successive derivatives of `p` vanishing at `c` (beyond the first).
fn critical_order<T: Real>(p: &Polynomial<T>, c: Complex<T>) -> u32 {
    let mut d = p.derivative();
    let mut order = 0;
    let tol = T::tol(1e-8);
    while d.degree() > 0 || !d.leading().is_zero() {
        if d.eval(c).norm() > tol * T::one().max(d.modulus_bound(c.norm())) {
            break;
        }
        order += 1;
        d = d.derivative();
        if d.degree() == 0 && d.leading().is_zero() {
            break;
        }
    }
    order
}
