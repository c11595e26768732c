//! Value distribution: Borel series, counting functions, the Ahlfors–Shimizu
//! characteristic and the checks built on them.

use num_complex::Complex;
use rayon::prelude::*;
use serde::Serialize;

use crate::catalog::{MapDescriptor, MapValue};
use crate::error::{Error, Result};
use crate::export::{fmt17, Table};
use crate::quadrature::{adaptive_simpson, periodic_trapezoid};
use crate::scalar::Real;

/// Inflation applied to the fitted counting slope before it is used as a bound.
const SLOPE_INFLATION: f64 = 1e-3;
/// Minimum number of preimages in the fit window `[R/2, R]`.
const MIN_FIT_POINTS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct BorelSeries<T: Real> {
    pub u: T,
    pub target: Complex<T>,
    pub radius: T,
    /// `Σ_{|z|≤R} |z|^{-u}`
    pub partial_sum: T,
    /// Upper bound for the remainder from the fitted counting envelope.
    pub tail_bound: T,
    /// Remainder from the fitted growth rate alone (no offset, no inflation).
    pub tail_estimate: T,
    pub count: usize,
    /// Counting envelope `n(t) ≤ a t^ρ + b` on the fit window.
    pub envelope: (T, T),
    pub fitted_order: Option<T>,
    /// `u ≤ ρ`: the series diverges and the sums are not meaningful.
    pub diverges: bool,
    pub complete: bool,
}

impl<T: Real> BorelSeries<T> {
    pub fn value(&self) -> T {
        self.partial_sum + self.tail_estimate
    }

    pub fn upper(&self) -> T {
        self.partial_sum + self.tail_bound
    }
}

/// Preimage moduli of `a` sorted ascending, with the enumeration flag.
fn moduli<T: Real>(desc: &MapDescriptor<T>, a: Complex<T>, r: T) -> Result<(Vec<T>, bool)> {
    let list = desc.preimages(a, r)?;
    let mut m: Vec<T> = list.branches.iter().map(|b| b.point.norm()).collect();
    m.sort_by(|x, y| x.partial_cmp(y).unwrap_or(std::cmp::Ordering::Equal));
    Ok((m, list.complete))
}

fn count_le<T: Real>(sorted: &[T], r: T) -> usize {
    sorted.partition_point(|&x| x <= r)
}

/// `n(t) ≤ a t^ρ + b` for the jumps in `(lo, hi]`: least squares slope, inflated,
/// then the smallest offset that makes it an envelope.
fn fit_envelope<T: Real>(sorted: &[T], lo: T, hi: T, rho: T) -> (T, T) {
    let i0 = count_le(sorted, lo);
    let i1 = count_le(sorted, hi);
    let pts: Vec<(T, T)> = (i0..i1)
        .map(|i| (sorted[i].powf(rho), T::from_usize_lossy(i + 1)))
        .collect();
    if pts.len() < 2 {
        let n = T::from_usize_lossy(i1);
        return (n / hi.powf(rho), T::zero());
    }
    let k = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
    let my = pts.iter().map(|p| p.1).sum::<T>() / k;
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let a = (sxy / sxx).max(T::zero()) * (T::one() + T::lit(SLOPE_INFLATION));
    let b = pts.iter().map(|&(x, y)| y - a * x).fold(T::neg_infinity(), T::max);
    // n is also evaluated just below each jump and at the window edge
    let edge = T::from_usize_lossy(i1) - a * hi.powf(rho);
    (a, b.max(edge))
}

/// Slope of `log n` against `log r` over the jumps in `(lo, hi]`.
fn fit_order<T: Real>(sorted: &[T], lo: T, hi: T) -> Option<T> {
    let i0 = count_le(sorted, lo);
    let i1 = count_le(sorted, hi);
    if i1 < i0 + MIN_FIT_POINTS || i0 == 0 {
        return None;
    }
    let pts: Vec<(T, T)> = (i0..i1)
        .map(|i| (sorted[i].ln(), T::from_usize_lossy(i + 1).ln()))
        .collect();
    Some(least_squares_slope(&pts))
}

pub(crate) fn least_squares_slope<T: Real>(pts: &[(T, T)]) -> T {
    let k = T::from_usize_lossy(pts.len());
    let mx = pts.iter().map(|p| p.0).sum::<T>() / k;
    let my = pts.iter().map(|p| p.1).sum::<T>() / k;
    let sxy = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    let sxx = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    sxy / sxx
}

/// `|z|^{-u}` per preimage of `a` inside `R`, in branch order.
pub fn borel_terms<T: Real>(desc: &MapDescriptor<T>, u: T, a: Complex<T>, r: T) -> Result<Vec<(Complex<T>, T)>> {
    Ok(desc
        .preimages(a, r)?
        .branches
        .iter()
        .map(|b| (b.point, b.point.norm().powf(-u)))
        .collect())
}

/// `Σ_{f(z)=a} |z|^{-u}` truncated at `R`, with a remainder bound.
pub fn borel_series<T: Real>(desc: &MapDescriptor<T>, u: T, a: Complex<T>, r: T) -> Result<BorelSeries<T>> {
    if !(u > T::zero()) {
        return Err(Error::Domain(format!("Borel exponent u = {u} must be positive")));
    }
    let rho = desc.growth_exponents().order_rho;
    let (m, mut complete) = moduli(desc, a, r)?;
    let partial_sum: T = m.iter().map(|&x| x.powf(-u)).sum();
    let count = m.len();

    // widen the fit window until it holds enough jumps
    let mut r_fit = r;
    let mut ext = m.clone();
    for _ in 0..24 {
        let i0 = count_le(&ext, r_fit / T::lit(2.0));
        if count_le(&ext, r_fit) >= i0 + MIN_FIT_POINTS {
            break;
        }
        r_fit *= T::lit(2.0);
        let (e, c) = moduli(desc, a, r_fit)?;
        ext = e;
        complete &= c;
    }
    let (ea, eb) = fit_envelope(&ext, r_fit / T::lit(2.0), r_fit, rho);
    let diverges = u <= rho;
    let (tail_bound, tail_estimate) = if diverges {
        (T::infinity(), T::infinity())
    } else {
        let between: T = ext[count_le(&ext, r)..count_le(&ext, r_fit)]
            .iter()
            .map(|&x| x.powf(-u))
            .sum();
        let n_fit = T::from_usize_lossy(count_le(&ext, r_fit));
        let gap = u - rho;
        let bound = between
            + ea * u * r_fit.powf(rho - u) / gap
            + (eb - n_fit) * r_fit.powf(-u);
        let estimate = between + ea * rho * r_fit.powf(rho - u) / gap;
        (bound.max(T::zero()), estimate.max(T::zero()))
    };
    Ok(BorelSeries {
        u,
        target: a,
        radius: r,
        partial_sum,
        tail_bound,
        tail_estimate,
        count,
        envelope: (ea, eb),
        fitted_order: fit_order(&ext, r_fit / T::lit(8.0), r_fit),
        diverges,
        complete,
    })
}

/// Counting data of one target, exact for radii up to `radius`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct CountingProfile<T: Real> {
    pub target: Complex<T>,
    /// `(r, n(r), N(r))`
    pub grid: Vec<(T, usize, T)>,
    pub t_floor: T,
    pub radius: T,
    pub moduli: Vec<T>,
    pub complete: bool,
}

impl<T: Real> CountingProfile<T> {
    pub fn n_at(&self, r: T) -> usize {
        count_le(&self.moduli, r)
    }

    /// `N(r) = Σ_{|z|≤r} log(r/max(|z|, T))`, so points inside `T` count from `T`.
    pub fn big_n_at(&self, r: T) -> T {
        if r <= self.t_floor {
            return T::zero();
        }
        let k = count_le(&self.moduli, r);
        self.moduli[..k]
            .iter()
            .map(|&x| (r / x.max(self.t_floor)).ln())
            .sum()
    }

    /// `N(r)` by integrating the step function `n(t)/t` between jumps.
    pub fn big_n_steps(&self, r: T) -> T {
        if r <= self.t_floor {
            return T::zero();
        }
        let mut acc = T::zero();
        let mut t = self.t_floor;
        let mut n = count_le(&self.moduli, t);
        for &x in &self.moduli[n..] {
            if x > r {
                break;
            }
            acc += T::from_usize_lossy(n) * (x / t).ln();
            t = x;
            n += 1;
        }
        acc + T::from_usize_lossy(n) * (r / t).ln()
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["r", "n", "N"]);
        for &(r, n, nn) in &self.grid {
            t.push(vec![fmt17(r.as_f64()), n.to_string(), fmt17(nn.as_f64())]);
        }
        t
    }
}

/// `n(r,a)` and `N(r,a)` on `r_grid`. `t_floor` defaults to half the smallest modulus.
pub fn counting_function<T: Real>(
    desc: &MapDescriptor<T>,
    a: Complex<T>,
    r_grid: &[T],
    t_floor: Option<T>,
) -> Result<CountingProfile<T>> {
    let r_max = r_grid.iter().copied().fold(T::zero(), T::max);
    let (m, complete) = moduli(desc, a, r_max)?;
    let t_floor = t_floor.unwrap_or_else(|| match m.first() {
        Some(&x) => x / T::lit(2.0),
        None => T::one(),
    });
    let mut prof = CountingProfile {
        target: a,
        grid: Vec::new(),
        t_floor,
        radius: r_max,
        moduli: m,
        complete,
    };
    prof.grid = r_grid
        .iter()
        .map(|&r| (r, prof.n_at(r), prof.big_n_at(r)))
        .collect();
    Ok(prof)
}

/// `Σ_{|z|≤R}|z|^{-u}` rebuilt from `N` by parts, plus the extrapolated remainder:
/// `u²∫_T^R N/t^{u+1} + R^{-u}(n(R) + uN(R)) + tail`.
pub fn borel_from_counting<T: Real>(prof: &CountingProfile<T>, u: T, r: T, tail_estimate: T) -> Quadratured<T> {
    let mut knots: Vec<T> = vec![prof.t_floor];
    knots.extend(prof.moduli.iter().copied().filter(|&x| x > prof.t_floor && x < r));
    knots.push(r);
    let pieces: Vec<(T, bool)> = knots
        .par_windows(2)
        .map(|w| {
            // between jumps N(t) = N(t₀) + n(t₀)·log(t/t₀); integrate in s = ln t
            let (n0, nn0) = (T::from_usize_lossy(prof.n_at(w[0])), prof.big_n_at(w[0]));
            let q = adaptive_simpson(
                |s: T| {
                    let t = s.exp();
                    (nn0 + n0 * (t / w[0]).ln()) * t.powf(-u)
                },
                w[0].ln(),
                w[1].ln(),
                T::tol(1e-14),
                T::tol(1e-10),
                30,
            );
            (q.value, q.converged)
        })
        .collect();
    let integral: T = pieces.iter().map(|p| p.0).sum();
    let converged = pieces.iter().all(|p| p.1);
    let n_r = T::from_usize_lossy(prof.n_at(r));
    let value = u * u * integral + r.powf(-u) * (n_r + u * prof.big_n_at(r)) + tail_estimate;
    Quadratured { value, converged }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Quadratured<T: Real> {
    pub value: T,
    pub converged: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Deserialize, Serialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct CharacteristicConfig<T: Real> {
    pub angular_nodes: usize,
    pub rel_tol: T,
    pub max_depth: u32,
}

impl<T: Real> Default for CharacteristicConfig<T> {
    fn default() -> Self {
        Self {
            angular_nodes: 512,
            rel_tol: T::tol(1e-8),
            max_depth: 24,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Characteristic<T: Real> {
    /// `(r, T(r))`, increasing in `r`.
    pub grid: Vec<(T, T)>,
    /// `false` when some radial quadrature hit its depth cap.
    pub converged: bool,
}

impl<T: Real> Characteristic<T> {
    pub fn from_grid(grid: Vec<(T, T)>) -> Self {
        Self { grid, converged: true }
    }

    /// Linear interpolation in `log r`; `None` outside the grid.
    pub fn at(&self, r: T) -> Option<T> {
        let g = &self.grid;
        if g.is_empty() || r < g[0].0 || r > g[g.len() - 1].0 {
            return None;
        }
        let i = g.partition_point(|p| p.0 < r);
        if i == 0 {
            return Some(g[0].1);
        }
        let (r0, t0) = g[i - 1];
        let (r1, t1) = g[i];
        let w = (r / r0).ln() / (r1 / r0).ln();
        Some(t0 + (t1 - t0) * w)
    }

    pub fn is_nondecreasing(&self) -> bool {
        self.grid.windows(2).all(|w| w[1].1 >= w[0].1)
    }

    /// Slope of `log T` against `log r` over the grid points in `[lo, hi]`.
    pub fn fitted_order(&self, lo: T, hi: T) -> Option<T> {
        let pts: Vec<(T, T)> = self
            .grid
            .iter()
            .filter(|p| p.0 >= lo && p.0 <= hi && p.1 > T::zero())
            .map(|p| (p.0.ln(), p.1.ln()))
            .collect();
        (pts.len() >= 2).then(|| least_squares_slope(&pts))
    }
}

/// Spherical derivative `|f′|/(1+|f|²)`, finite across poles and overflow.
pub fn spherical_derivative<T: Real>(desc: &MapDescriptor<T>, z: Complex<T>) -> T {
    let mut z = z;
    for _ in 0..4 {
        match desc.evaluate(z) {
            MapValue::Overflow => return T::zero(),
            MapValue::Finite(w) => {
                if let Ok(d) = desc.derivative(z) {
                    let m = w.norm();
                    let dn = d.norm();
                    if !dn.is_finite() {
                        return T::zero();
                    }
                    return if m > T::one() {
                        (dn / m) / (m + T::one() / m)
                    } else {
                        dn / (T::one() + m * m)
                    };
                }
            }
            MapValue::Pole => {}
        }
        // nudge off the pole; f^# is continuous there
        z += Complex::new(desc.tolerances().pole_tol * T::lit(4.0), T::zero());
    }
    T::zero()
}

/// `S(u) = ∫_0^{2π} f^#(u e^{iθ})² dθ`.
fn circle_mass<T: Real>(desc: &MapDescriptor<T>, u: T, nodes: usize) -> T {
    periodic_trapezoid(
        |th: T| {
            let s = spherical_derivative(desc, Complex::from_polar(u, th));
            s * s
        },
        nodes,
    )
}

/// Ahlfors–Shimizu characteristic `T(r) = (1/π)∫_0^r S(u)·u·log(r/u) du + log√(1+|f(0)|²)`.
pub fn characteristic<T: Real>(desc: &MapDescriptor<T>, r_grid: &[T], cfg: &CharacteristicConfig<T>) -> Result<Characteristic<T>> {
    if r_grid.windows(2).any(|w| !(w[1] > w[0])) || r_grid.first().map_or(false, |&r| !(r > T::zero())) {
        return Err(Error::Domain("characteristic grid must be positive and increasing".into()));
    }
    let f0 = desc.evaluate(Complex::new(T::zero(), T::zero())).finite().map_or(T::zero(), |w| {
        (T::one() + w.norm_sqr()).ln() / T::lit(2.0)
    });
    let nodes = cfg.angular_nodes;
    let mut knots = vec![T::zero()];
    knots.extend_from_slice(r_grid);
    // segments independent; accumulate ∫S u du and ∫S u log u du afterwards
    let segs: Vec<(T, T, bool)> = knots
        .par_windows(2)
        .map(|w| {
            let f1 = |u: T| circle_mass(desc, u, nodes) * u;
            let q1 = adaptive_simpson(f1, w[0], w[1], T::tol(1e-13), cfg.rel_tol, cfg.max_depth);
            let f2 = |u: T| {
                if u > T::zero() {
                    circle_mass(desc, u, nodes) * u * u.ln()
                } else {
                    T::zero()
                }
            };
            let q2 = adaptive_simpson(f2, w[0], w[1], T::tol(1e-13), cfg.rel_tol, cfg.max_depth);
            (q1.value, q2.value, q1.converged && q2.converged)
        })
        .collect();
    let mut i1 = T::zero();
    let mut i2 = T::zero();
    let mut converged = true;
    let mut grid = Vec::with_capacity(r_grid.len());
    for (&r, &(a, b, c)) in r_grid.iter().zip(&segs) {
        i1 += a;
        i2 += b;
        converged &= c;
        grid.push((r, (r.ln() * i1 - i2) / T::PI() + f0));
    }
    if !converged {
        log::warn!("characteristic quadrature hit its refinement cap");
    }
    Ok(Characteristic { grid, converged })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct DivergenceCheck<T: Real> {
    pub satisfied: bool,
    pub r_witness: Option<T>,
    /// Largest value of the left-hand side minus `A` seen on the grid.
    pub best_margin: T,
    /// The grid ran out before a witness was found.
    pub inconclusive: bool,
}

/// Smallest grid `R` with `∫_{log R}^R T(r)/r^{ρ+1} dr − B(log R)^{1−ρ} ≥ A`.
pub fn divergence_check<T: Real>(ch: &Characteristic<T>, rho: T, a: T, b: T) -> DivergenceCheck<T> {
    let mut best = T::neg_infinity();
    for &(r, _) in &ch.grid {
        let lo = r.ln();
        if !(lo > T::zero()) || ch.at(lo).is_none() || lo >= r {
            continue;
        }
        let q = adaptive_simpson(
            |s: T| {
                let t = s.exp();
                ch.at(t).unwrap_or(T::zero()) * t.powf(-rho)
            },
            lo.ln(),
            r.ln(),
            T::tol(1e-12),
            T::tol(1e-9),
            24,
        );
        let lhs = q.value - b * lo.powf(T::one() - rho);
        best = best.max(lhs - a);
        if lhs >= a {
            return DivergenceCheck {
                satisfied: true,
                r_witness: Some(r),
                best_margin: lhs - a,
                inconclusive: false,
            };
        }
    }
    DivergenceCheck {
        satisfied: false,
        r_witness: None,
        best_margin: best,
        inconclusive: true,
    }
}

/// `Ξ = max (N(r,a) − T(r))` over profiles and their grid radii.
pub fn fmt_constant<T: Real>(profiles: &[CountingProfile<T>], ch: &Characteristic<T>) -> T {
    profiles
        .iter()
        .flat_map(|p| p.grid.iter().filter_map(move |&(r, _, n)| ch.at(r).map(|t| n - t)))
        .fold(T::neg_infinity(), T::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct SmtFit<T: Real> {
    pub delta: T,
    pub c1: T,
    pub c2: T,
    pub samples: usize,
}

/// Smallest `C₁, C₂ ≥ 0` (on a grid in `C₂`) with
/// `4N(R+Δ,a) ≥ T(R) − (3ρ+1)log R − C₁ − C₂ log|a|` on every sample.
pub fn sharp_smt_fit<T: Real>(profiles: &[CountingProfile<T>], ch: &Characteristic<T>, rho: T, delta: T) -> SmtFit<T> {
    let mut rows: Vec<(T, T)> = Vec::new();
    for p in profiles {
        let la = p.target.norm().ln();
        for &(r, _, _) in &p.grid {
            if r + delta > p.radius {
                continue;
            }
            if let Some(t) = ch.at(r) {
                let deficit = t - (T::lit(3.0) * rho + T::one()) * r.ln() - T::lit(4.0) * p.big_n_at(r + delta);
                rows.push((la, deficit));
            }
        }
    }
    let c1_for = |c2: T| {
        rows.iter()
            .map(|&(la, d)| d - c2 * la)
            .fold(T::zero(), T::max)
    };
    let scale = rows.iter().map(|r| r.0.max(T::zero())).fold(T::zero(), T::max);
    let max_c2 = rows
        .iter()
        .filter(|r| r.0 > T::zero())
        .map(|r| r.1.max(T::zero()) / r.0)
        .fold(T::zero(), T::max);
    let mut best = (c1_for(T::zero()), T::zero());
    for k in 1..=200 {
        let c2 = max_c2 * T::from_usize_lossy(k) / T::lit(200.0);
        let c1 = c1_for(c2);
        if c1 + c2 * scale < best.0 + best.1 * scale {
            best = (c1, c2);
        }
    }
    SmtFit {
        delta,
        c1: best.0,
        c2: best.1,
        samples: rows.len(),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct UniformBorel<T: Real> {
    pub u: T,
    pub radius: T,
    /// `max_a (partial + tail bound)`
    pub m_u: T,
    pub per_target: Vec<BorelSeries<T>>,
    pub references: [Complex<T>; 3],
    /// Fitted `A_u` in `Σ(u,a) ≤ Σ(u,a₁)+Σ(u,a₂)+Σ(u,a₃)+u²A_u`.
    pub a_u: T,
    pub triangle_holds: bool,
    pub diverges: bool,
}

/// Supremum of the Borel series over Julia targets, with the three-point bound.
pub fn uniform_borel_bound<T: Real>(desc: &MapDescriptor<T>, u: T, targets: &[Complex<T>], r: T) -> Result<UniformBorel<T>> {
    if targets.is_empty() {
        return Err(Error::Domain("uniform Borel bound needs targets".into()));
    }
    let per_target: Vec<BorelSeries<T>> = targets
        .par_iter()
        .map(|&a| borel_series(desc, u, a, r))
        .collect::<Result<_>>()?;
    let diverges = per_target.iter().any(|s| s.diverges);
    let m_u = per_target.iter().map(|s| s.upper()).fold(T::zero(), T::max);
    let refs = [0usize, 1, 2].map(|i| per_target[i.min(per_target.len() - 1)].target);
    let sigma3: T = [0usize, 1, 2]
        .iter()
        .map(|&i| per_target[i.min(per_target.len() - 1)].value())
        .sum();
    let a_u = per_target
        .iter()
        .map(|s| (s.value() - sigma3) / (u * u))
        .fold(T::zero(), T::max);
    let triangle_holds = per_target
        .iter()
        .all(|s| s.value() <= sigma3 + u * u * a_u * (T::one() + T::epsilon() * T::lit(16.0)));
    Ok(UniformBorel {
        u,
        radius: r,
        m_u,
        per_target,
        references: refs,
        a_u,
        triangle_holds,
        diverges,
    })
}

/// CSV of `(r, n, N, T)` for one target.
pub fn profile_table<T: Real>(prof: &CountingProfile<T>, ch: &Characteristic<T>) -> Table {
    let mut t = Table::new(&["r", "n", "N", "T"]);
    for &(r, n, nn) in &prof.grid {
        let tv = ch.at(r).map_or(f64::NAN, |v| v.as_f64());
        t.push(vec![fmt17(r.as_f64()), n.to_string(), fmt17(nn.as_f64()), fmt17(tv)]);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp1() -> MapDescriptor<f64> {
        MapDescriptor::exponential(Complex::new(1.0, 0.0)).unwrap()
    }

    fn e() -> Complex<f64> {
        Complex::new(std::f64::consts::E, 0.0)
    }

    #[test]
    fn lattice_count_closed_form() {
        let f = exp1();
        let grid: Vec<f64> = (1..60).map(|k| 0.7 + k as f64 * 1.37).collect();
        let p = counting_function(&f, e(), &grid, None).unwrap();
        for &(r, n, _) in &p.grid {
            let expect = if r < 1.0 {
                0
            } else {
                1 + 2 * (((r * r - 1.0).sqrt()) / (2.0 * std::f64::consts::PI)).floor() as usize
            };
            assert_eq!(n, expect, "r = {r}");
        }
    }

    #[test]
    fn counting_two_ways() {
        let f = exp1();
        let p = counting_function(&f, e(), &[3.0, 40.0, 400.0], Some(0.5)).unwrap();
        for &r in &[0.3, 3.0, 17.0, 40.0, 399.0] {
            assert!((p.big_n_at(r) - p.big_n_steps(r)).abs() < 1e-8 * p.big_n_at(r).max(1.0));
        }
        assert_eq!(p.big_n_at(0.4), 0.0);
    }

    #[test]
    fn partial_sums_monotone_in_radius() {
        let f = exp1();
        let mut last = 0.0;
        for r in [0.5, 2.0, 10.0, 100.0, 1000.0] {
            let s = borel_series(&f, 2.0, e(), r).unwrap();
            assert!(s.partial_sum >= last);
            assert!(s.tail_bound > 0.0);
            last = s.partial_sum;
        }
        assert_eq!(borel_series(&f, 2.0, e(), 0.5).unwrap().partial_sum, 0.0);
    }

    #[test]
    fn divergent_exponent_is_flagged() {
        let s = borel_series(&exp1(), 1.0, e(), 100.0).unwrap();
        assert!(s.diverges);
    }

    #[test]
    fn synthetic_log_profile_fails_divergence() {
        let grid: Vec<(f64, f64)> = (0..200).map(|k| {
            let r = 1.5f64 * 1.1f64.powi(k);
            (r, r.ln())
        }).collect();
        let ch = Characteristic::from_grid(grid);
        assert!(!divergence_check(&ch, 1.0, 5.0, 0.0).satisfied);
        let lin = Characteristic::from_grid((0..200).map(|k| {
            let r = 1.5f64 * 1.1f64.powi(k);
            (r, r / std::f64::consts::PI)
        }).collect());
        assert!(divergence_check(&lin, 1.0, 0.0, 0.0).satisfied);
    }
}
