//! The σ metric `|z|^{-α₂}|dz|` (or its regularized form) and σ-derivatives.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::catalog::{MapDescriptor, MapValue};
use crate::error::{Error, Result};
use crate::quadrature::adaptive_simpson;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricVariant {
    /// `|z|^{-α₂}|dz|`
    Punctured,
    /// `(1 + |z|^{α₂})^{-1}|dz|`
    Regularized,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SigmaMetric<T: Real> {
    alpha2: T,
    variant: MetricVariant,
}

impl<T: Real> SigmaMetric<T> {
    pub fn new(alpha2: T, variant: MetricVariant) -> Result<Self> {
        if !(alpha2 > T::zero()) || !alpha2.is_finite() {
            return Err(Error::Domain(format!("α₂ must be positive, got {alpha2}")));
        }
        Ok(Self { alpha2, variant })
    }

    pub fn punctured(alpha2: T) -> Result<Self> {
        Self::new(alpha2, MetricVariant::Punctured)
    }

    /// The punctured metric from the catalog exponent of `desc`.
    pub fn for_map(desc: &MapDescriptor<T>) -> Self {
        Self {
            alpha2: desc.growth_exponents().alpha2,
            variant: MetricVariant::Punctured,
        }
    }

    /// `α₂ = 0` limit of the punctured variant: the Euclidean metric.
    pub fn euclidean() -> Self {
        Self {
            alpha2: T::zero(),
            variant: MetricVariant::Punctured,
        }
    }

    pub fn alpha2(&self) -> T {
        self.alpha2
    }

    pub fn variant(&self) -> MetricVariant {
        self.variant
    }

    fn is_euclidean(&self) -> bool {
        self.alpha2 == T::zero()
    }

    /// Density γ(z).
    pub fn density(&self, z: Complex<T>) -> T {
        if self.is_euclidean() {
            return T::one();
        }
        let r = z.norm();
        match self.variant {
            MetricVariant::Punctured => r.powf(-self.alpha2),
            MetricVariant::Regularized => T::one() / (T::one() + r.powf(self.alpha2)),
        }
    }

    /// `ln γ(z)`, finite for very large `|z|`.
    pub fn log_density(&self, z: Complex<T>) -> T {
        if self.is_euclidean() {
            return T::zero();
        }
        let lr = z.norm().ln();
        match self.variant {
            MetricVariant::Punctured => -self.alpha2 * lr,
            MetricVariant::Regularized => {
                let a = self.alpha2 * lr;
                // -ln(1 + e^a)
                if a > T::zero() {
                    -a - (-a).exp().ln_1p()
                } else {
                    -a.exp().ln_1p()
                }
            }
        }
    }

    /// `|f′(z)|·γ(w)/γ(z)` from a precomputed image `w = f(z)` and derivative `d = f′(z)`.
    pub fn factor(&self, z: Complex<T>, w: Complex<T>, d: Complex<T>) -> Result<T> {
        if self.is_euclidean() {
            return Ok(d.norm());
        }
        if self.variant == MetricVariant::Punctured {
            if z.norm() == T::zero() {
                return Err(Error::Domain("σ-derivative at the puncture z = 0".into()));
            }
            if w.norm() == T::zero() {
                return Err(Error::Domain(format!("f({z}) = 0 lies on the puncture")));
            }
            let a = self.alpha2;
            let direct = d.norm() / w.norm().powf(a) * z.norm().powf(a);
            if direct.is_finite() && direct > T::zero() {
                return Ok(direct);
            }
        }
        Ok(self.log_factor(z, w, d).exp())
    }

    /// `ln(|f′(z)|·γ(w)/γ(z))`.
    pub fn log_factor(&self, z: Complex<T>, w: Complex<T>, d: Complex<T>) -> T {
        d.norm().ln() + self.log_density(w) - self.log_density(z)
    }
}

/// `|f′(z)|_σ` for the normalized map.
pub fn sigma_derivative<T: Real>(desc: &MapDescriptor<T>, metric: &SigmaMetric<T>, z: Complex<T>) -> Result<T> {
    let w = match desc.evaluate(z) {
        MapValue::Finite(w) => w,
        MapValue::Pole => return Err(Error::PoleProximity(format!("{z}"))),
        MapValue::Overflow => return Err(Error::Numeric(format!("f({z}) overflows"))),
    };
    let d = desc.derivative(z)?;
    metric.factor(z, w, d)
}

/// `ln |(f^n)′(z)|_σ` along the forward orbit of `z`.
pub fn log_sigma_derivative_iterate<T: Real>(
    desc: &MapDescriptor<T>,
    metric: &SigmaMetric<T>,
    z: Complex<T>,
    n: usize,
) -> Result<T> {
    let mut acc = T::zero();
    let mut x = z;
    for _ in 0..n {
        let w = desc
            .evaluate(x)
            .finite()
            .ok_or_else(|| Error::PoleProximity(format!("{x}")))?;
        let d = desc.derivative(x)?;
        if metric.variant == MetricVariant::Punctured && (x.norm() == T::zero() || w.norm() == T::zero()) {
            return Err(Error::Domain(format!("orbit meets the puncture at {x}")));
        }
        acc += metric.log_factor(x, w, d);
        x = w;
    }
    Ok(acc)
}

/// Integral of the density along the segment `[a, b]`; symmetric in `a`, `b` bit for bit.
pub fn sigma_distance<T: Real>(metric: &SigmaMetric<T>, a: Complex<T>, b: Complex<T>) -> Result<T> {
    let (a, b) = if (a.re, a.im) <= (b.re, b.im) { (a, b) } else { (b, a) };
    let len = (b - a).norm();
    if len == T::zero() {
        return Ok(T::zero());
    }
    if metric.is_euclidean() {
        return Ok(len);
    }
    if metric.variant == MetricVariant::Punctured {
        // distance from 0 to the segment
        let d = b - a;
        let s = (-(a.conj() * d).re / d.norm_sqr()).max(T::zero()).min(T::one());
        let closest = a + d * s;
        if closest.norm() <= T::epsilon() * len {
            return Err(Error::Domain("segment passes through the puncture".into()));
        }
    }
    let q = adaptive_simpson(
        |s: T| metric.density(a + (b - a) * s) * len,
        T::zero(),
        T::one(),
        T::tol(1e-10),
        T::zero(),
        48,
    );
    if !q.converged {
        log::debug!("σ-distance quadrature hit its depth cap (error {})", q.error);
    }
    Ok(q.value)
}

/// Empirical σ-Koebe constant on a σ-ball of radius `radius` around `w`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DistortionReport<T: Real> {
    pub measured_k_sigma: T,
    pub branch_count: usize,
    pub radius: T,
}

#[derive(Clone, Copy, Debug)]
pub struct KoebeConfig<T> {
    /// Preimages farther than this are not followed.
    pub modulus_cap: T,
    /// Branches of `f^{-n}` examined, smallest modulus first.
    pub max_branches: usize,
    /// Sample points in the ball (center included).
    pub ball_points: usize,
    /// Continuation substeps from `w` to each sample point.
    pub substeps: usize,
}

impl<T: Real> Default for KoebeConfig<T> {
    fn default() -> Self {
        Self {
            modulus_cap: T::lit(200.0),
            max_branches: 64,
            ball_points: 24,
            substeps: 8,
        }
    }
}

/// Continues the chain `z₁, …, z_n` (with `f(z₁) = w`, `f(z_{k+1}) = z_k`) from `w` to `y`.
fn continue_chain<T: Real>(
    desc: &MapDescriptor<T>,
    chain: &[Complex<T>],
    w: Complex<T>,
    y: Complex<T>,
    substeps: usize,
) -> Option<Vec<Complex<T>>> {
    let tol = desc.tolerances();
    let mut cur = chain.to_vec();
    for j in 1..=substeps {
        let mut target = w + (y - w) * T::lit(j as f64 / substeps as f64);
        for z in cur.iter_mut() {
            let mut x = *z;
            let mut ok = false;
            for _ in 0..tol.newton_max_iter {
                let (v, d) = desc.eval_with_derivative(x)?;
                let step = (v - target) / d;
                x = x - step;
                if step.norm() <= tol.newton_tol * T::one().max(x.norm()) {
                    ok = true;
                    break;
                }
            }
            if !ok {
                return None;
            }
            *z = x;
            target = x;
        }
    }
    Some(cur)
}

/// Ratio extremes of `|(f^{-n})′|_σ` over a σ-ball around `w`, across inverse branches.
pub fn koebe_check<T: Real>(
    desc: &MapDescriptor<T>,
    metric: &SigmaMetric<T>,
    w: Complex<T>,
    depth: usize,
    radius: T,
    cfg: &KoebeConfig<T>,
) -> Result<DistortionReport<T>> {
    if depth == 0 {
        return Ok(DistortionReport {
            measured_k_sigma: T::one(),
            branch_count: 1,
            radius,
        });
    }
    // chains at w, breadth first, smallest modulus first
    let mut chains: Vec<Vec<Complex<T>>> = vec![Vec::new()];
    for _ in 0..depth {
        let mut next = Vec::new();
        for c in &chains {
            let tip = c.last().copied().unwrap_or(w);
            let mut pre = desc.preimages(tip, cfg.modulus_cap)?.branches;
            pre.sort_by(|a, b| a.point.norm().partial_cmp(&b.point.norm()).unwrap_or(std::cmp::Ordering::Equal));
            for b in pre.into_iter().take(cfg.max_branches) {
                let mut nc = c.clone();
                nc.push(b.point);
                next.push(nc);
            }
        }
        next.sort_by(|a, b| {
            let ka = a.last().map(|z| z.norm()).unwrap_or(T::zero());
            let kb = b.last().map(|z| z.norm()).unwrap_or(T::zero());
            ka.partial_cmp(&kb).unwrap_or(std::cmp::Ordering::Equal)
        });
        next.truncate(cfg.max_branches);
        chains = next;
    }
    // σ-radius to Euclidean radius at w
    let r_e = radius / metric.density(w);
    let mut ys = vec![w];
    let m = cfg.ball_points.max(2) - 1;
    for k in 0..m {
        let frac = T::lit(((k % 3) + 1) as f64 / 3.0);
        let th = T::TAU() * T::lit(k as f64 / m as f64);
        ys.push(w + Complex::from_polar(r_e * frac, th));
    }
    let mut k_sigma = T::one();
    for chain in &chains {
        let mut lo = T::infinity();
        let mut hi = T::neg_infinity();
        for &y in &ys {
            let zs = continue_chain(desc, chain, w, y, cfg.substeps)
                .ok_or_else(|| Error::NoConvergence(format!("branch continuation to {y}")))?;
            if zs.iter().any(|z| z.norm() > cfg.modulus_cap * T::lit(2.0)) {
                return Err(Error::Domain("inverse branch left the preimage radius bound".into()));
            }
            let tip = *zs.last().unwrap_or(&y);
            // |(f^{-n})′(y)|_σ = 1/|(f^n)′(tip)|_σ
            let l = -log_sigma_derivative_iterate(desc, metric, tip, depth)?;
            lo = lo.min(l);
            hi = hi.max(l);
        }
        k_sigma = k_sigma.max((hi - lo).exp());
    }
    Ok(DistortionReport {
        measured_k_sigma: k_sigma,
        branch_count: chains.len(),
        radius,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn exponential_sigma_derivative_is_modulus() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let m = SigmaMetric::punctured(1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let z = c(rng.gen_range(-5.0..5.0), rng.gen_range(-30.0..30.0));
            let s = sigma_derivative(&e, &m, z).unwrap();
            assert!((s - z.norm()).abs() <= 4.0 * f64::EPSILON * z.norm());
        }
    }

    #[test]
    fn euclidean_limit() {
        let s = MapDescriptor::sine(c(1.0, 0.0), c(0.3, 0.0)).unwrap();
        let z = c(0.4, 0.9);
        let v = sigma_derivative(&s, &SigmaMetric::euclidean(), z).unwrap();
        assert_eq!(v, s.derivative(z).unwrap().norm());
        let d = sigma_distance(&SigmaMetric::euclidean(), c(1.0, 1.0), c(4.0, 5.0)).unwrap();
        assert_eq!(d, 5.0);
    }

    #[test]
    fn chain_rule() {
        let s = MapDescriptor::sine(c(0.5, 0.0), c(0.0, 0.0)).unwrap();
        let m = SigmaMetric::punctured(1.0).unwrap();
        let z = c(1.3, 2.1);
        let fz = s.evaluate(z).finite().unwrap();
        let two = log_sigma_derivative_iterate(&s, &m, z, 2).unwrap().exp();
        let prod = sigma_derivative(&s, &m, z).unwrap() * sigma_derivative(&s, &m, fz).unwrap();
        assert!((two - prod).abs() <= 1e-10 * prod);
    }

    #[test]
    fn radial_distance_is_log_ratio() {
        let m = SigmaMetric::punctured(1.0).unwrap();
        let d = sigma_distance(&m, c(2.0, 0.0), c(7.0, 0.0)).unwrap();
        assert!((d - (3.5f64).ln()).abs() < 1e-9);
        let a = c(0.3, -1.2);
        let b = c(-2.0, 0.7);
        assert_eq!(sigma_distance(&m, a, b).unwrap(), sigma_distance(&m, b, a).unwrap());
        assert!(sigma_distance(&m, c(-1.0, 0.0), c(1.0, 0.0)).is_err());
    }

    #[test]
    fn variants_within_factor_two() {
        let p = SigmaMetric::new(1.5, MetricVariant::Punctured).unwrap();
        let r = SigmaMetric::new(1.5, MetricVariant::Regularized).unwrap();
        for k in 0..50 {
            let z = Complex::from_polar(1.0 + k as f64, 0.3 * k as f64);
            let q = p.density(z) / r.density(z);
            assert!(q > 1.0 && q <= 2.0 + 1e-12);
            assert!((r.log_density(z) - r.density(z).ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn koebe_depth_zero_and_radius_trend() {
        let e = MapDescriptor::exponential(c(0.2, 0.0)).unwrap();
        let m = SigmaMetric::for_map(&e);
        let w = c(2.542_641_357_773_527, 0.0);
        let cfg = KoebeConfig::default();
        assert_eq!(koebe_check(&e, &m, w, 0, 0.1, &cfg).unwrap().measured_k_sigma, 1.0);
        let k1 = koebe_check(&e, &m, w, 3, 0.1, &cfg).unwrap().measured_k_sigma;
        let k2 = koebe_check(&e, &m, w, 3, 0.05, &cfg).unwrap().measured_k_sigma;
        assert!(k1 < 2.0 && k2 <= k1 && k2 >= 1.0, "{k1} {k2}");
    }
}
