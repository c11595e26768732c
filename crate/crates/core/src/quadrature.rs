//! Adaptive Simpson quadrature.

use crate::scalar::Real;

#[derive(Clone, Copy, Debug)]
pub struct Quadrature<T> {
    pub value: T,
    /// Sum of the local Richardson error estimates.
    pub error: T,
    pub evaluations: usize,
    /// `false` when the depth cap was hit before the tolerance was met.
    pub converged: bool,
}

/// Integrates `f` over `[a, b]` to absolute tolerance `abs_tol` or relative `rel_tol`,
/// whichever is looser, with recursion depth capped at `max_depth`.
pub fn adaptive_simpson<T, F>(f: F, a: T, b: T, abs_tol: T, rel_tol: T, max_depth: u32) -> Quadrature<T>
where
    T: Real,
    F: Fn(T) -> T,
{
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = simpson(a, b, fa, fm, fb);
    let mut out = Quadrature {
        value: T::zero(),
        error: T::zero(),
        evaluations: 3,
        converged: true,
    };
    // Coarse relative target from the initial estimate; refined as we go.
    let tol = abs_tol.max(rel_tol * whole.abs());
    recurse(&f, a, b, fa, fm, fb, whole, tol, max_depth, &mut out);
    out
}

#[inline]
fn simpson<T: Real>(a: T, b: T, fa: T, fm: T, fb: T) -> T {
    (b - a) / T::lit(6.0) * (fa + T::lit(4.0) * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn recurse<T: Real, F: Fn(T) -> T>(
    f: &F,
    a: T,
    b: T,
    fa: T,
    fm: T,
    fb: T,
    whole: T,
    tol: T,
    depth: u32,
    out: &mut Quadrature<T>,
) {
    let half = T::lit(0.5);
    let m = (a + b) * half;
    let lm = (a + m) * half;
    let rm = (m + b) * half;
    let flm = f(lm);
    let frm = f(rm);
    out.evaluations += 2;
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= T::lit(15.0) * tol || !(delta.is_finite()) {
        if depth == 0 && delta.abs() > T::lit(15.0) * tol {
            out.converged = false;
        }
        out.value += left + right + delta / T::lit(15.0);
        out.error += delta.abs() / T::lit(15.0);
        return;
    }
    recurse(f, a, m, fa, flm, fm, left, tol * half, depth - 1, out);
    recurse(f, m, b, fm, frm, fb, right, tol * half, depth - 1, out);
}

/// Periodic trapezoid rule on `n` equispaced nodes of `[0, 2π)`.
pub fn periodic_trapezoid<T: Real, F: Fn(T) -> T>(f: F, n: usize) -> T {
    let h = T::TAU() / T::from_usize_lossy(n);
    let s: T = (0..n).map(|k| f(h * T::from_usize_lossy(k))).sum();
    s * h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_exact() {
        let q = adaptive_simpson(|x: f64| x * x * x - 2.0 * x, 0.0, 2.0, 1e-12, 0.0, 20);
        assert!((q.value - 0.0).abs() < 1e-12);
        assert!(q.converged);
    }

    #[test]
    fn log_integral() {
        let q = adaptive_simpson(|x: f64| 1.0 / x, 1.0, 10.0, 1e-10, 0.0, 40);
        assert!((q.value - 10f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn trapezoid_spectral() {
        // ∫ e^{cos θ} dθ = 2π I0(1)
        let v = periodic_trapezoid(|t: f64| t.cos().exp(), 32);
        assert!((v - 2.0 * std::f64::consts::PI * 1.266_065_877_752_008_4).abs() < 1e-12);
    }

    #[test]
    fn works_in_f32() {
        let q = adaptive_simpson(|x: f32| x.sin(), 0.0, std::f32::consts::PI, 1e-5, 0.0, 30);
        assert!((q.value - 2.0).abs() < 1e-4);
    }
}
