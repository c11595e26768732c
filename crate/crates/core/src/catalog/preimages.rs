//! Preimage enumeration through explicit inverse branches.

use num_complex::Complex;
use num_traits::Zero;
use rayon::prelude::*;

use super::{Family, MapDescriptor, MapValue};
use crate::error::{Error, Result};
use crate::scalar::{is_finite_c, Real};

/// One solution of `f(z) = w`, with `f′(z)` attached.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Branch<T> {
    pub point: Complex<T>,
    pub derivative: Complex<T>,
    pub branch_index: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PreimageList<T> {
    pub target: Complex<T>,
    pub radius_bound: T,
    /// Sorted by `branch_index`.
    pub branches: Vec<Branch<T>>,
    /// `false` when some seed or polishing step failed, so branches may be missing.
    pub complete: bool,
}

impl<T> PreimageList<T> {
    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }
}

/// Index ranges beyond this are enumerated in parallel.
const PAR_THRESHOLD: i64 = 2048;

impl<T: Real> MapDescriptor<T> {
    /// All solutions of `g(ζ) = w` with `|ζ| ≤ radius_bound` for the normalized map.
    pub fn preimages(&self, w: Complex<T>, radius_bound: T) -> Result<PreimageList<T>> {
        if !is_finite_c(w) {
            return Err(Error::Domain(format!("target {w} is not finite")));
        }
        if !(radius_bound > T::zero()) {
            return Err(Error::Domain("radius bound must be positive".into()));
        }
        if self.is_omitted(w) {
            return Err(Error::OmittedValue(format!("{w}")));
        }
        let s = self.shift;
        let target = w + s;
        let raw_radius = radius_bound + s.norm();
        let (cands, mut complete) = raw_candidates(self, target, raw_radius)?;
        let mut branches = Vec::with_capacity(cands.len());
        for (z, idx) in cands {
            let zeta = z - s;
            if zeta.norm() > radius_bound {
                continue;
            }
            match self.verified(z, target) {
                Some((z, d)) => branches.push(Branch {
                    point: z - s,
                    derivative: d,
                    branch_index: idx,
                }),
                None => complete = false,
            }
        }
        branches.sort_by_key(|b| b.branch_index);
        if !dedupe(&mut branches, self.tolerances.separation_tol) {
            log::debug!("merged coincident preimages of {w} (critical value)");
        }
        Ok(PreimageList {
            target: w,
            radius_bound,
            branches,
            complete,
        })
    }

    /// Residual check in raw coordinates, with a few Newton steps if needed.
    fn verified(&self, mut z: Complex<T>, target: Complex<T>) -> Option<(Complex<T>, Complex<T>)> {
        for _ in 0..4 {
            let v = match self.eval_raw(z) {
                MapValue::Finite(v) => v,
                _ => return None,
            };
            let d = self.derivative_raw(z).ok()?;
            let res = (v - target).norm();
            let floor = T::lit(8.0) * T::epsilon() * z.norm().max(T::one()) * d.norm();
            if res <= self.tolerances.eval_tol * T::one().max(target.norm()) + floor {
                return Some((z, d));
            }
            if d.is_zero() {
                return None;
            }
            z = z - (v - target) / d;
        }
        None
    }
}

/// Drops branches closer than `tol` to an earlier one. Returns `true` if none were dropped.
fn dedupe<T: Real>(branches: &mut Vec<Branch<T>>, tol: T) -> bool {
    let n0 = branches.len();
    let mut kept: Vec<Branch<T>> = Vec::with_capacity(n0);
    for b in branches.drain(..) {
        let scale = T::one().max(b.point.norm());
        if !kept.iter().any(|k| (k.point - b.point).norm() <= tol * scale) {
            kept.push(b);
        }
    }
    *branches = kept;
    branches.len() == n0
}

/// `k` with `|re + 2πk·step| ≤ m`, padded by one on each side.
fn index_range<T: Real>(re: T, period: T, m: T) -> (i64, i64) {
    let lo = ((-m - re) / period).floor().to_i64().unwrap_or(i64::MIN / 4) - 1;
    let hi = ((m - re) / period).ceil().to_i64().unwrap_or(i64::MAX / 4) + 1;
    (lo, hi)
}

fn collect_range<T, F>(lo: i64, hi: i64, f: F) -> Vec<(Complex<T>, i64)>
where
    T: Real,
    F: Fn(i64) -> Vec<(Complex<T>, i64)> + Sync,
{
    if hi < lo {
        return Vec::new();
    }
    if hi - lo > PAR_THRESHOLD {
        (lo..=hi).into_par_iter().flat_map_iter(&f).collect()
    } else {
        (lo..=hi).flat_map(f).collect()
    }
}

/// Candidate raw preimages of `target` in `|z| ≤ r` (plus some outside, filtered later).
fn raw_candidates<T: Real>(
    desc: &MapDescriptor<T>,
    target: Complex<T>,
    r: T,
) -> Result<(Vec<(Complex<T>, i64)>, bool)> {
    let two_pi = T::TAU();
    let pi = T::PI();
    match desc.family() {
        Family::Exponential { lambda } => {
            let l = (target / *lambda).ln();
            if l.re.abs() > r {
                return Ok((Vec::new(), true));
            }
            let (lo, hi) = index_range(l.im, two_pi, r);
            let i = Complex::<T>::i();
            Ok((
                collect_range(lo, hi, |k| vec![(l + i * (two_pi * T::lit(k as f64)), k)]),
                true,
            ))
        }
        Family::Sine { a, b } => {
            let asin = target.asin();
            let m = a.norm() * r + b.norm();
            // both branch families are centred within 2π of each other
            let (lo, hi) = index_range(asin.re, two_pi, m + two_pi);
            let (a, b) = (*a, *b);
            Ok((
                collect_range(lo, hi, |k| {
                    let shift = Complex::from(two_pi * T::lit(k as f64));
                    let u1 = asin + shift;
                    let u2 = Complex::from(pi) - asin + shift;
                    vec![((u1 - b) / a, 2 * k), ((u2 - b) / a, 2 * k + 1)]
                }),
                true,
            ))
        }
        Family::Tangent { lambda } => {
            let u = target / *lambda;
            let at = u.atan();
            if !is_finite_c(at) {
                return Err(Error::OmittedValue(format!("{target}")));
            }
            let (lo, hi) = index_range(at.re, pi, r);
            Ok((collect_range(lo, hi, |k| vec![(at + Complex::from(pi * T::lit(k as f64)), k)]), true))
        }
        Family::CosineRoot { a, b } => {
            let ac = target.acos();
            let m = (a.norm() * r + b.norm()).sqrt();
            let (lo, hi) = index_range(ac.re, two_pi, m);
            let (a, b) = (*a, *b);
            Ok((
                collect_range(lo, hi, |k| {
                    let v = ac + Complex::from(two_pi * T::lit(k as f64));
                    vec![((v * v - b) / a, k)]
                }),
                true,
            ))
        }
        Family::WeierstrassP(lat) => weierstrass_candidates(desc, lat, target, r),
        Family::PolyExp { p, q } => {
            if p.degree() == 0 {
                let c = p.leading();
                let l = (target / c).ln();
                let qmax = q.modulus_bound(r);
                let (lo, hi) = index_range(l.im, two_pi, qmax);
                let d = q.degree() as i64;
                let mut ok = true;
                let mut out = Vec::new();
                for k in lo..=hi {
                    let v = l + Complex::new(T::zero(), two_pi * T::lit(k as f64));
                    match q.roots_of_value(v) {
                        Some(mut rs) => {
                            sort_points(&mut rs);
                            out.extend(rs.into_iter().enumerate().map(|(j, z)| (z, k * d + j as i64)));
                        }
                        None => ok = false,
                    }
                }
                Ok((out, ok))
            } else {
                Ok((newton_search(desc, target, r), false))
            }
        }
        Family::Precomposed { base, poly, scale } => {
            let bound = poly.modulus_bound(r);
            let base_list = base.preimages(target / *scale, bound)?;
            let d = poly.degree() as i64;
            let mut ok = base_list.complete;
            let mut out = Vec::new();
            for br in &base_list.branches {
                match poly.roots_of_value(br.point) {
                    Some(mut rs) => {
                        for z in &mut rs {
                            // polish against P(z) = u
                            for _ in 0..3 {
                                let (v, dv) = poly.eval_d(*z);
                                if dv.is_zero() {
                                    break;
                                }
                                *z = *z - (v - br.point) / dv;
                            }
                        }
                        sort_points(&mut rs);
                        out.extend(
                            rs.into_iter()
                                .enumerate()
                                .map(|(j, z)| (z, br.branch_index * d + j as i64)),
                        );
                    }
                    None => ok = false,
                }
            }
            Ok((out, ok))
        }
    }
}

fn sort_points<T: Real>(v: &mut [Complex<T>]) {
    v.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
}

fn zigzag(n: i64) -> i64 {
    if n >= 0 {
        2 * n
    } else {
        -2 * n - 1
    }
}

/// Szudzik pairing of two integers, times two, plus a sign bit.
fn lattice_index(m: i64, n: i64, sign: i64) -> i64 {
    let (a, b) = (zigzag(m), zigzag(n));
    let p = if a >= b { a * a + a + b } else { b * b + a };
    2 * p + sign
}

fn weierstrass_candidates<T: Real>(
    desc: &MapDescriptor<T>,
    lat: &super::Lattice<T>,
    target: Complex<T>,
    r: T,
) -> Result<(Vec<(Complex<T>, i64)>, bool)> {
    let tol = &desc.tolerances;
    let (w1, w2) = lat.reduced_basis();
    let n = tol.seed_grid.max(2) as usize;
    let mut root = None;
    'seeds: for i in 0..n {
        for j in 0..n {
            let x = T::lit((i as f64 + 0.5) / n as f64 - 0.5);
            let y = T::lit((j as f64 + 0.5) / n as f64 - 0.5);
            let mut z = w1 * x + w2 * y;
            for _ in 0..tol.newton_max_iter {
                if lat.distance_to_lattice(z) <= tol.pole_tol {
                    break;
                }
                let (p, dp) = lat.value_and_derivative(z);
                if dp.is_zero() || !is_finite_c(dp) {
                    break;
                }
                let step = (p - target) / dp;
                z = z - step;
                if step.norm() <= tol.newton_tol * T::one().max(z.norm()) {
                    root = Some(z);
                    break 'seeds;
                }
            }
        }
    }
    let Some(z0) = root else {
        log::warn!("no seed of the weierstrass grid converged for target {target}");
        return Ok((Vec::new(), false));
    };
    let (z0, _, _) = lat.reduce(z0);
    let mut reps = vec![(z0, 0)];
    let (neg, _, _) = lat.reduce(-z0);
    if lat.distance_to_lattice(z0 * T::lit(2.0)) > tol.separation_tol {
        reps.push((neg, 1));
    }
    let (mb, nb) = lat.index_bounds(r + w1.norm() + w2.norm());
    let mut out = Vec::new();
    for m in -mb..=mb {
        for k in -nb..=nb {
            let p = lat.point(m, k);
            for &(z, sign) in &reps {
                let c = z + p;
                if c.norm() <= r {
                    out.push((c, lattice_index(m, k, sign)));
                }
            }
        }
    }
    Ok((out, true))
}

/// Damped Newton from a square seed grid; the result is never certified complete.
fn newton_search<T: Real>(desc: &MapDescriptor<T>, target: Complex<T>, r: T) -> Vec<(Complex<T>, i64)> {
    let tol = &desc.tolerances;
    let n = tol.seed_grid.max(2) as usize;
    let mut found: Vec<Complex<T>> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let x = r * T::lit(2.0 * (i as f64 + 0.5) / n as f64 - 1.0);
            let y = r * T::lit(2.0 * (j as f64 + 0.5) / n as f64 - 1.0);
            let mut z = Complex::new(x, y);
            for _ in 0..tol.newton_max_iter {
                let (Some(v), Ok(d)) = (desc.eval_raw(z).finite(), desc.derivative_raw(z)) else {
                    break;
                };
                if d.is_zero() {
                    break;
                }
                let step = (v - target) / d;
                z = z - step;
                if step.norm() <= tol.newton_tol * T::one().max(z.norm()) {
                    if z.norm() <= r
                        && !found
                            .iter()
                            .any(|f| (*f - z).norm() <= tol.separation_tol * T::one().max(z.norm()))
                    {
                        found.push(z);
                    }
                    break;
                }
            }
        }
    }
    sort_points(&mut found);
    found.into_iter().enumerate().map(|(i, z)| (z, i as i64)).collect()
}

/// Explicit inverse branch in raw coordinates, same indexing as `preimages`.
pub(super) fn explicit_branch<T: Real>(desc: &MapDescriptor<T>, w: Complex<T>, index: i64) -> Result<Complex<T>> {
    let two_pi = T::TAU();
    let k = |i: i64| T::lit(i as f64);
    match desc.family() {
        Family::Exponential { lambda } => {
            Ok((w / *lambda).ln() + Complex::new(T::zero(), two_pi * k(index)))
        }
        Family::Sine { a, b } => {
            let kk = index.div_euclid(2);
            let asin = w.asin();
            let u = if index.rem_euclid(2) == 0 {
                asin
            } else {
                Complex::from(T::PI()) - asin
            } + Complex::from(two_pi * k(kk));
            Ok((u - *b) / *a)
        }
        Family::Tangent { lambda } => {
            let at = (w / *lambda).atan();
            if !is_finite_c(at) {
                return Err(Error::OmittedValue(format!("{w}")));
            }
            Ok(at + Complex::from(T::PI() * k(index)))
        }
        Family::CosineRoot { a, b } => {
            let v = w.acos() + Complex::from(two_pi * k(index));
            Ok((v * v - *b) / *a)
        }
        _ => Err(Error::Unsupported {
            family: desc.tag().name(),
            what: "closed-form inverse branch".into(),
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::Polynomial;

    type C64 = Complex<f64>;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn has(list: &PreimageList<f64>, z: C64) -> bool {
        list.branches.iter().any(|b| (b.point - z).norm() < 1e-9)
    }

    #[test]
    fn exponential_unit_target() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let l = e.preimages(c(1.0, 0.0), 10.0).unwrap();
        assert_eq!(l.len(), 3);
        for z in [c(0.0, 0.0), c(0.0, 2.0 * std::f64::consts::PI), c(0.0, -2.0 * std::f64::consts::PI)] {
            assert!(has(&l, z));
        }
        assert!(l.complete);
    }

    #[test]
    fn sine_zeros() {
        let s = MapDescriptor::sine(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let l = s.preimages(c(0.0, 0.0), 10.0).unwrap();
        assert_eq!(l.len(), 7);
        for k in -3..=3 {
            assert!(has(&l, c(k as f64 * std::f64::consts::PI, 0.0)));
        }
    }

    #[test]
    fn omitted_target_rejected() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        assert!(matches!(e.preimages(c(0.0, 0.0), 10.0), Err(Error::OmittedValue(_))));
    }

    #[test]
    fn cosine_root_critical_value_deduplicated() {
        // cos(√z) = 1 at z = (2πk)², with k and -k coinciding
        let f = MapDescriptor::cosine_root(c(1.0, 0.0), c(0.0, 0.0)).unwrap();
        let l = f.preimages(c(1.0, 0.0), 200.0).unwrap();
        let expect: Vec<f64> = (0..=2).map(|k| (2.0 * std::f64::consts::PI * k as f64).powi(2)).collect();
        assert_eq!(l.len(), expect.len());
        for x in expect {
            assert!(has(&l, c(x, 0.0)));
        }
    }

    #[test]
    fn tangent_branches_residual() {
        let f = MapDescriptor::tangent(c(0.5, 0.0)).unwrap();
        let w = c(0.3, 0.7);
        let l = f.preimages(w, 50.0).unwrap();
        assert_eq!(l.len(), 32);
        for b in &l.branches {
            assert!((f.evaluate(b.point).finite().unwrap() - w).norm() < 1e-9);
        }
    }

    #[test]
    fn weierstrass_translates() {
        let f = MapDescriptor::weierstrass(c(1.0, 0.0), c(0.2, 1.1)).unwrap();
        let w = c(0.7, -0.4);
        let n1 = f.preimages(w, 6.0).unwrap();
        let n2 = f.preimages(w, 12.0).unwrap();
        for b in &n2.branches {
            assert!((f.evaluate(b.point).finite().unwrap() - w).norm() <= 1e-9 * w.norm().max(1.0));
        }
        let ratio = n2.len() as f64 / n1.len() as f64;
        assert!((ratio - 4.0).abs() < 0.6, "count ratio {ratio}");
        // two roots per period cell of area 1.1
        let expect = 2.0 * std::f64::consts::PI * 144.0 / 1.1;
        assert!((n2.len() as f64 / expect - 1.0).abs() < 0.1);
    }

    #[test]
    fn precomposed_preimages() {
        let e = MapDescriptor::exponential(c(1.0, 0.0)).unwrap();
        let f = MapDescriptor::precomposed(e, Polynomial::new(vec![c(1.0, 0.0), c(0.0, 0.0), c(0.5, 0.0)]))
            .unwrap();
        let w = c(2.0, 1.0);
        let l = f.preimages(w, 8.0).unwrap();
        assert!(l.complete);
        for b in &l.branches {
            assert!((f.evaluate(b.point).finite().unwrap() - w).norm() < 1e-9 * w.norm());
            assert!(b.point.norm() <= 8.0);
        }
        // z^2 + 0.5 = log w + 2πik within |z|<=8 means |log w + 2πik - 0.5| <= 64
        let lw = w.ln();
        let count = (-20..=20)
            .map(|k| {
                let u = lw + c(0.0, 2.0 * std::f64::consts::PI * k as f64) - c(0.5, 0.0);
                let s = u.sqrt();
                [s, -s].iter().filter(|z| z.norm() <= 8.0).count()
            })
            .sum::<usize>();
        assert_eq!(l.len(), count);
    }

    #[test]
    fn explicit_branch_matches_enumeration() {
        let s = MapDescriptor::sine(c(0.5, 0.1), c(0.2, 0.0)).unwrap();
        let w = c(0.4, 0.3);
        let l = s.preimages(w, 30.0).unwrap();
        for b in &l.branches {
            let z = s.inverse_branch(w, b.branch_index).unwrap();
            assert!((z - b.point).norm() < 1e-12);
        }
    }
}
