//! Weierstrass ℘ via Jacobi theta functions on a reduced lattice basis.

use num_complex::Complex;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Period lattice `ω₁ℤ + ω₂ℤ` together with cached theta constants.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice<T: Real> {
    /// Periods as supplied by the caller.
    pub omega1: Complex<T>,
    pub omega2: Complex<T>,
    /// Reduced basis: `τ = w2/w1` in the standard fundamental domain.
    w1: Complex<T>,
    w2: Complex<T>,
    tau: Complex<T>,
    /// `exp(iπτ)`
    nome: Complex<T>,
    theta2_0: Complex<T>,
    theta3_0: Complex<T>,
    /// Critical values `℘(ω₁/2), ℘(ω₂/2), ℘((ω₁+ω₂)/2)`.
    pub e: [Complex<T>; 3],
}

impl<T: Real> Lattice<T> {
    pub fn new(omega1: Complex<T>, omega2: Complex<T>) -> Result<Self> {
        if omega1.norm() == T::zero() || omega2.norm() == T::zero() {
            return Err(Error::InvalidParams {
                family: "weierstrass_p",
                reason: "zero period".into(),
            });
        }
        let ratio = omega2 / omega1;
        if ratio.im.abs() <= T::tol(1e-12) {
            return Err(Error::InvalidParams {
                family: "weierstrass_p",
                reason: "degenerate lattice: Im(ω₂/ω₁) = 0".into(),
            });
        }
        let (mut w1, mut w2) = (omega1, if ratio.im < T::zero() { -omega2 } else { omega2 });
        for _ in 0..100 {
            let tau = w2 / w1;
            let k = tau.re.round();
            w2 = w2 - w1 * k;
            let tau = w2 / w1;
            if tau.norm_sqr() < T::one() - T::epsilon() * T::lit(16.0) {
                let old = w1;
                w1 = w2;
                w2 = -old;
            } else {
                break;
            }
        }
        let tau = w2 / w1;
        let i_pi = Complex::new(T::zero(), T::PI());
        let nome = (i_pi * tau).exp();
        let mut lat = Lattice {
            omega1,
            omega2,
            w1,
            w2,
            tau,
            nome,
            theta2_0: Complex::zero(),
            theta3_0: Complex::zero(),
            e: [Complex::zero(); 3],
        };
        lat.theta2_0 = lat.theta2(Complex::zero());
        lat.theta3_0 = lat.theta3(Complex::zero());
        let half = T::lit(0.5);
        let e1 = lat.value(omega1 * half);
        let e2 = lat.value(omega2 * half);
        let e3 = lat.value((omega1 + omega2) * half);
        lat.e = [e1, e2, e3];
        Ok(lat)
    }

    pub fn reduced_basis(&self) -> (Complex<T>, Complex<T>) {
        (self.w1, self.w2)
    }

    /// Invariants `g₂ = -4(e₁e₂+e₁e₃+e₂e₃)`, `g₃ = 4e₁e₂e₃`.
    pub fn invariants(&self) -> (Complex<T>, Complex<T>) {
        let [a, b, c] = self.e;
        let four = T::lit(4.0);
        (-(a * b + a * c + b * c) * four, a * b * c * four)
    }

    /// Coordinates of `z` in the reduced basis: `z = x·w1 + y·w2`.
    pub fn coords(&self, z: Complex<T>) -> (T, T) {
        let v = z / self.w1;
        let y = v.im / self.tau.im;
        let x = v.re - y * self.tau.re;
        (x, y)
    }

    /// Representative of `z` modulo the lattice with both coordinates in `[-1/2, 1/2]`.
    pub fn reduce(&self, z: Complex<T>) -> (Complex<T>, i64, i64) {
        let (x, y) = self.coords(z);
        let (m, n) = (x.round(), y.round());
        let r = z - self.w1 * m - self.w2 * n;
        (r, m.to_i64().unwrap_or(0), n.to_i64().unwrap_or(0))
    }

    /// Distance from `z` to the nearest lattice point.
    pub fn distance_to_lattice(&self, z: Complex<T>) -> T {
        let (r, _, _) = self.reduce(z);
        let mut best = r.norm();
        for dm in -1i32..=1 {
            for dn in -1i32..=1 {
                let p = r - self.w1 * T::lit(dm as f64) - self.w2 * T::lit(dn as f64);
                best = best.min(p.norm());
            }
        }
        best
    }

    /// Lattice point `m·w1 + n·w2` in the reduced basis.
    pub fn point(&self, m: i64, n: i64) -> Complex<T> {
        self.w1 * T::lit(m as f64) + self.w2 * T::lit(n as f64)
    }

    /// Bounds on `|m|`, `|n|` for reduced-basis lattice points of modulus at most `r`.
    pub fn index_bounds(&self, r: T) -> (i64, i64) {
        // component of w1 orthogonal to w2 and vice versa
        let cross = (self.w1.conj() * self.w2).im.abs();
        let h1 = cross / self.w2.norm();
        let h2 = cross / self.w1.norm();
        let m = (r / h1).floor().to_i64().unwrap_or(i64::MAX / 4) + 1;
        let n = (r / h2).floor().to_i64().unwrap_or(i64::MAX / 4) + 1;
        (m, n)
    }

    fn series_terms(&self) -> usize {
        40
    }

    fn theta1_d(&self, u: Complex<T>) -> (Complex<T>, Complex<T>) {
        let i_pi = Complex::new(T::zero(), T::PI());
        let mut s = Complex::zero();
        let mut ds = Complex::zero();
        for n in 0..self.series_terms() {
            let nh = T::lit(n as f64 + 0.5);
            let qn = (i_pi * self.tau * nh * nh).exp();
            let k = T::lit((2 * n + 1) as f64);
            let sign = if n % 2 == 0 { T::one() } else { -T::one() };
            let term = qn * (u * k).sin() * sign;
            let dterm = qn * (u * k).cos() * (sign * k);
            s += term;
            ds += dterm;
            if qn.norm() < T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        let two = T::lit(2.0);
        (s * two, ds * two)
    }

    fn theta2(&self, u: Complex<T>) -> Complex<T> {
        let i_pi = Complex::new(T::zero(), T::PI());
        let mut s = Complex::zero();
        for n in 0..self.series_terms() {
            let nh = T::lit(n as f64 + 0.5);
            let qn = (i_pi * self.tau * nh * nh).exp();
            s += qn * (u * T::lit((2 * n + 1) as f64)).cos();
            if qn.norm() < T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        s * T::lit(2.0)
    }

    fn theta3(&self, u: Complex<T>) -> Complex<T> {
        let i_pi = Complex::new(T::zero(), T::PI());
        let mut s = Complex::one();
        for n in 1..self.series_terms() {
            let qn = (i_pi * self.tau * T::lit((n * n) as f64)).exp();
            s += qn * (u * T::lit((2 * n) as f64)).cos() * T::lit(2.0);
            if qn.norm() < T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        s
    }

    fn theta4_d(&self, u: Complex<T>) -> (Complex<T>, Complex<T>) {
        let i_pi = Complex::new(T::zero(), T::PI());
        let mut s = Complex::one();
        let mut ds = Complex::zero();
        for n in 1..self.series_terms() {
            let nn = T::lit((n * n) as f64);
            let qn = (i_pi * self.tau * nn).exp();
            let sign = if n % 2 == 0 { T::one() } else { -T::one() };
            let k = T::lit((2 * n) as f64);
            s += qn * (u * k).cos() * (sign * T::lit(2.0));
            ds -= qn * (u * k).sin() * (sign * T::lit(2.0) * k);
            if qn.norm() < T::epsilon() * T::lit(1e-3) {
                break;
            }
        }
        (s, ds)
    }

    /// `(℘(z), ℘′(z))` for `z` off the lattice.
    pub fn value_and_derivative(&self, z: Complex<T>) -> (Complex<T>, Complex<T>) {
        let (r, _, _) = self.reduce(z);
        let scale = Complex::new(T::PI(), T::zero()) / self.w1;
        let u = r * scale;
        let (t1, dt1) = self.theta1_d(u);
        let (t4, dt4) = self.theta4_d(u);
        let a = t4 / t1;
        let da = (dt4 * t1 - t4 * dt1) / (t1 * t1);
        let k = self.theta2_0 * self.theta3_0;
        let k2 = k * k;
        let s2 = scale * scale;
        let t2_4 = self.theta2_0.powi(4);
        let t3_4 = self.theta3_0.powi(4);
        let p = s2 * (k2 * a * a - (t2_4 + t3_4) / T::lit(3.0));
        let dp = s2 * k2 * a * da * T::lit(2.0) * scale;
        (p, dp)
    }

    pub fn value(&self, z: Complex<T>) -> Complex<T> {
        self.value_and_derivative(z).0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type C64 = Complex<f64>;

    fn square() -> Lattice<f64> {
        Lattice::new(C64::new(2.0, 0.0), C64::new(0.0, 2.0)).unwrap()
    }

    /// Direct truncated lattice sum, independent of the theta route.
    fn brute_wp(z: C64, w1: C64, w2: C64, n: i64) -> C64 {
        let mut s = C64::new(1.0, 0.0) / (z * z);
        for m in -n..=n {
            for k in -n..=n {
                if m == 0 && k == 0 {
                    continue;
                }
                let w = w1 * m as f64 + w2 * k as f64;
                s += C64::new(1.0, 0.0) / ((z - w) * (z - w)) - C64::new(1.0, 0.0) / (w * w);
            }
        }
        s
    }

    #[test]
    fn degenerate_lattice_rejected() {
        assert!(Lattice::new(C64::new(1.0, 0.0), C64::new(3.0, 0.0)).is_err());
    }

    #[test]
    fn matches_lattice_sum() {
        let lat = square();
        let z = C64::new(0.3, 0.45);
        // Symmetric partial sums converge slowly, like 1/N; the square lattice
        // symmetric sum converges to ℘ since the conditionally convergent
        // correction vanishes by symmetry.
        let b = brute_wp(z, lat.omega1, lat.omega2, 400);
        let p = lat.value(z);
        assert!((b - p).norm() / p.norm() < 1e-4, "{b} vs {p}");
    }

    #[test]
    fn periodic_and_even() {
        let lat = Lattice::new(C64::new(1.0, 0.2), C64::new(0.3, 1.7)).unwrap();
        let z = C64::new(0.21, -0.37);
        let p = lat.value(z);
        assert!((lat.value(z + lat.omega1) - p).norm() < 1e-9 * p.norm());
        assert!((lat.value(z - lat.omega2 * 3.0) - p).norm() < 1e-9 * p.norm());
        assert!((lat.value(-z) - p).norm() < 1e-9 * p.norm());
    }

    #[test]
    fn differential_equation() {
        let lat = Lattice::new(C64::new(1.0, 0.2), C64::new(0.3, 1.7)).unwrap();
        let [e1, e2, e3] = lat.e;
        for &z in &[C64::new(0.21, -0.37), C64::new(0.05, 0.6), C64::new(1.4, 2.9)] {
            let (p, dp) = lat.value_and_derivative(z);
            let rhs = (p - e1) * (p - e2) * (p - e3) * 4.0;
            assert!((dp * dp - rhs).norm() / rhs.norm() < 1e-9);
        }
        assert!((e1 + e2 + e3).norm() < 1e-9 * e1.norm());
    }
}
