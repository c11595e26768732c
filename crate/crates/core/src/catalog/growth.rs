//! Empirical balanced-growth constant κ and pole structure.

use num_complex::Complex;
use serde::Serialize;

use super::{pole_multiplicities, MapDescriptor};
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PoleStructure {
    Entire,
    Uniform(u32),
    /// Poles of unequal multiplicity; never of balanced growth.
    Mixed(Vec<u32>),
}

pub fn pole_structure<T: Real>(desc: &MapDescriptor<T>) -> PoleStructure {
    match pole_multiplicities(desc) {
        None => PoleStructure::Entire,
        Some(set) if set.len() == 1 => PoleStructure::Uniform(*set.iter().next().unwrap_or(&1)),
        Some(set) => PoleStructure::Mixed(set.into_iter().collect()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct GrowthViolation<T: Real> {
    pub point: Complex<T>,
    /// `|f′(z)| / (|z|^{α₁}|f(z)|^{α₂})`
    pub ratio: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct BalancedGrowthReport<T: Real> {
    /// Smallest κ with `κ⁻¹ ≤ ratio ≤ κ` over the points used. Empirical.
    pub kappa: T,
    pub kappa_cap: T,
    pub used: usize,
    /// Points within pole tolerance or with `f(z) = 0` / `z = 0`.
    pub skipped: usize,
    pub violations: Vec<GrowthViolation<T>>,
}

impl<T: Real> BalancedGrowthReport<T> {
    pub fn accepted(&self) -> bool {
        self.violations.is_empty() && self.used > 0
    }
}

/// Measures κ on `sample` for the normalized map.
///
/// Maps with poles of unequal multiplicity are rejected outright.
pub fn verify_balanced_growth<T: Real>(
    desc: &MapDescriptor<T>,
    sample: &[Complex<T>],
    kappa_cap: T,
) -> Result<BalancedGrowthReport<T>> {
    if sample.is_empty() {
        return Err(Error::Domain("empty sample".into()));
    }
    if let PoleStructure::Mixed(m) = pole_structure(desc) {
        return Err(Error::NotBalanced(format!("poles of unequal multiplicities {m:?}")));
    }
    let g = desc.growth_exponents();
    let mut kappa = T::one();
    let mut used = 0;
    let mut skipped = 0;
    let mut violations = Vec::new();
    for &z in sample {
        let Some((w, d)) = desc.eval_with_derivative(z) else {
            skipped += 1;
            continue;
        };
        let (zn, wn) = (z.norm(), w.norm());
        if zn == T::zero() || wn == T::zero() {
            skipped += 1;
            continue;
        }
        // in logs to survive large |f|
        let log_ratio = d.norm().ln() - g.alpha1 * zn.ln() - g.alpha2 * wn.ln();
        let ratio = log_ratio.exp();
        used += 1;
        let k = log_ratio.abs().exp();
        if k > kappa {
            kappa = k;
        }
        if k > kappa_cap {
            violations.push(GrowthViolation { point: z, ratio });
        }
    }
    Ok(BalancedGrowthReport {
        kappa,
        kappa_cap,
        used,
        skipped,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn exponential_kappa_is_one() {
        let e = MapDescriptor::exponential(c(0.2, 0.0)).unwrap();
        let pts: Vec<_> = (0..50).map(|k| c(0.1 * k as f64 - 2.0, 0.37 * k as f64)).collect();
        let r = verify_balanced_growth(&e, &pts, 10.0).unwrap();
        assert_eq!(r.kappa, 1.0);
        assert!(r.accepted());
    }

    #[test]
    fn mixed_poles_rejected() {
        let wp = MapDescriptor::weierstrass(c(1.0, 0.0), c(0.0, 1.0)).unwrap();
        let f = MapDescriptor::precomposed(wp, Polynomial::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]))
            .unwrap();
        assert!(matches!(
            verify_balanced_growth(&f, &[c(0.3, 0.2)], 10.0),
            Err(Error::NotBalanced(_))
        ));
    }
}
