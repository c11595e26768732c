//! Dense complex polynomials and simultaneous root finding.

use num_complex::Complex;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// Coefficients stored highest degree first: `c[0] z^d + ... + c[d]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Polynomial<T: Real> {
    coeffs: Vec<Complex<T>>,
}

impl<T: Real> Polynomial<T> {
    /// Leading zero coefficients are stripped. An empty list is the zero polynomial.
    pub fn new(mut coeffs: Vec<Complex<T>>) -> Self {
        while coeffs.len() > 1 && coeffs[0].is_zero() {
            coeffs.remove(0);
        }
        if coeffs.is_empty() {
            coeffs.push(Complex::zero());
        }
        Self { coeffs }
    }

    pub fn identity() -> Self {
        Self::new(vec![Complex::one(), Complex::zero()])
    }

    pub fn coeffs(&self) -> &[Complex<T>] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> Complex<T> {
        self.coeffs[0]
    }

    pub fn eval(&self, z: Complex<T>) -> Complex<T> {
        self.coeffs
            .iter()
            .fold(Complex::zero(), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner.
    pub fn eval_d(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let mut p = Complex::zero();
        let mut dp = Complex::zero();
        for &c in &self.coeffs {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    pub fn derivative(&self) -> Self {
        let d = self.degree();
        if d == 0 {
            return Self::new(vec![Complex::zero()]);
        }
        let coeffs = self.coeffs[..d]
            .iter()
            .enumerate()
            .map(|(i, &c)| c * T::from_usize_lossy(d - i))
            .collect();
        Self::new(coeffs)
    }

    /// Sum of coefficient moduli weighted by `r^j`, an upper bound for `|p(z)|` on `|z| <= r`.
    pub fn modulus_bound(&self, r: T) -> T {
        self.coeffs
            .iter()
            .fold(T::zero(), |acc, c| acc * r + c.norm())
    }

    /// Roots of `p(z) = target` by Aberth–Ehrlich iteration followed by Newton polishing.
    /// Returns `None` if the iteration fails to settle.
    pub fn roots_of_value(&self, target: Complex<T>) -> Option<Vec<Complex<T>>> {
        let mut shifted = self.coeffs.clone();
        let last = shifted.len() - 1;
        shifted[last] -= target;
        Polynomial::new(shifted).roots()
    }

    pub fn roots(&self) -> Option<Vec<Complex<T>>> {
        let d = self.degree();
        if d == 0 {
            return Some(Vec::new());
        }
        let lead = self.leading();
        if d == 1 {
            return Some(vec![-self.coeffs[1] / lead]);
        }
        if d == 2 {
            let (a, b, c) = (lead, self.coeffs[1], self.coeffs[2]);
            let disc = (b * b - a * c * T::lit(4.0)).sqrt();
            // Pick the sign avoiding cancellation.
            let q = if (b.conj() * disc).re >= T::zero() {
                -(b + disc) * T::lit(0.5)
            } else {
                -(b - disc) * T::lit(0.5)
            };
            if q.is_zero() {
                return Some(vec![Complex::zero(), Complex::zero()]);
            }
            return Some(vec![q / a, c / q]);
        }
        // Cauchy-type radius for initial guesses on a rotated circle.
        let radius = self.coeffs[1..]
            .iter()
            .enumerate()
            .map(|(k, c)| (c.norm() / lead.norm()).powf(T::one() / T::from_usize_lossy(k + 1)))
            .fold(T::zero(), T::max)
            .max(T::lit(1e-3));
        let two_pi = T::TAU();
        let mut zs: Vec<Complex<T>> = (0..d)
            .map(|k| {
                let theta = two_pi * T::from_usize_lossy(k) / T::from_usize_lossy(d) + T::lit(0.4);
                Complex::from_polar(radius, theta)
            })
            .collect();
        let dp = self.derivative();
        let tol = T::tol(1e-14);
        for _ in 0..500 {
            let mut max_step = T::zero();
            for i in 0..d {
                let zi = zs[i];
                let p = self.eval(zi);
                if p.is_zero() {
                    continue;
                }
                let ratio = p / dp.eval(zi);
                let s: Complex<T> = zs
                    .iter()
                    .enumerate()
                    .filter(|&(j, _)| j != i)
                    .map(|(_, &zj)| Complex::<T>::one() / (zi - zj))
                    .fold(Complex::zero(), |a, b| a + b);
                let step = ratio / (Complex::<T>::one() - ratio * s);
                if !(step.re.is_finite() && step.im.is_finite()) {
                    continue;
                }
                zs[i] = zi - step;
                let rel = step.norm() / zi.norm().max(T::one());
                if rel > max_step {
                    max_step = rel;
                }
            }
            if max_step < tol {
                return Some(zs);
            }
        }
        // Accept if residuals are small anyway.
        let scale = self.modulus_bound(radius.max(T::one()));
        if zs
            .iter()
            .all(|&z| self.eval(z).norm() <= T::tol(1e-9) * scale)
        {
            Some(zs)
        } else {
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn horner_and_derivative() {
        // 2z^2 - 3z + 1
        let p = Polynomial::new(vec![c(2.0, 0.0), c(-3.0, 0.0), c(1.0, 0.0)]);
        let (v, d) = p.eval_d(c(2.0, 0.0));
        assert_eq!(v, c(3.0, 0.0));
        assert_eq!(d, c(5.0, 0.0));
        assert_eq!(p.derivative().coeffs(), &[c(4.0, 0.0), c(-3.0, 0.0)]);
    }

    #[test]
    fn leading_zeros_stripped() {
        let p = Polynomial::new(vec![c(0.0, 0.0), c(1.0, 0.0), c(5.0, 0.0)]);
        assert_eq!(p.degree(), 1);
    }

    #[test]
    fn cubic_roots() {
        // (z-1)(z+2)(z-i)
        let roots = [c(1.0, 0.0), c(-2.0, 0.0), c(0.0, 1.0)];
        let p = Polynomial::new(vec![
            c(1.0, 0.0),
            -(roots[0] + roots[1] + roots[2]),
            roots[0] * roots[1] + roots[0] * roots[2] + roots[1] * roots[2],
            -(roots[0] * roots[1] * roots[2]),
        ]);
        let found = p.roots().unwrap();
        for r in roots {
            assert!(found.iter().any(|z| (z - r).norm() < 1e-10), "missing {r}");
        }
    }

    #[test]
    fn roots_of_value_quadratic() {
        let p = Polynomial::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        let rs = p.roots_of_value(c(-4.0, 0.0)).unwrap();
        for r in rs {
            assert!((r * r + c(4.0, 0.0)).norm() < 1e-12);
        }
    }
}
