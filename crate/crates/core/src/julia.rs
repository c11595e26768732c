//! Julia-set samples by backward iteration, singular-orbit classification and
//! expansion estimates.

use num_complex::Complex;
use num_traits::Zero;
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{MapDescriptor, MapValue, SingularValue};
use crate::error::{Error, Result};
use crate::export::{fmt17, Table};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Provenance {
    pub seed: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub branch: i64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct JuliaSample<T: Real> {
    pub seeds: Vec<Complex<T>>,
    pub points: Vec<Complex<T>>,
    pub provenance: Vec<Provenance>,
    /// `ln |(f^depth)′(z)|`, accumulated down the parent chain.
    pub log_derivative: Vec<T>,
    pub modulus_cap: T,
    /// The preimage tree ran out before the budget was filled.
    pub exhausted: bool,
}

impl<T: Real> JuliaSample<T> {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Branch indices from the seed down to point `i`.
    pub fn word(&self, i: usize) -> Vec<i64> {
        let mut w = Vec::new();
        let mut cur = Some(i);
        while let Some(k) = cur {
            let p = &self.provenance[k];
            if p.parent.is_some() {
                w.push(p.branch);
            }
            cur = p.parent;
        }
        w.reverse();
        w
    }

    /// Ancestor `n` levels above point `i`.
    pub fn ancestor(&self, i: usize, n: usize) -> Option<usize> {
        let mut k = i;
        for _ in 0..n {
            k = self.provenance[k].parent?;
        }
        Some(k)
    }

    /// Same sample in coordinates translated by `-shift`.
    pub fn translated(&self, shift: Complex<T>) -> Self {
        let mut s = self.clone();
        for z in s.points.iter_mut().chain(s.seeds.iter_mut()) {
            *z -= shift;
        }
        s
    }

    pub fn to_table(&self) -> Table {
        let mut t = Table::new(&["re", "im", "depth"]);
        for (z, p) in self.points.iter().zip(&self.provenance) {
            t.push(vec![fmt17(z.re.as_f64()), fmt17(z.im.as_f64()), p.depth.to_string()]);
        }
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct SamplerConfig<T: Real> {
    pub depth: usize,
    pub budget: usize,
    pub modulus_cap: T,
    /// Points closer than this to the origin are dropped (Fatou disk).
    pub min_modulus: T,
    /// Share of each level kept by largest `|(f^n)′|^{-t₀}`; the rest is uniform.
    pub heavy_fraction: T,
    pub t0: T,
    pub rng_seed: u64,
}

impl<T: Real> Default for SamplerConfig<T> {
    fn default() -> Self {
        Self {
            depth: 6,
            budget: 2000,
            modulus_cap: T::lit(100.0),
            min_modulus: T::zero(),
            heavy_fraction: T::lit(0.5),
            t0: T::one(),
            rng_seed: 0,
        }
    }
}

struct Candidate<T> {
    point: Complex<T>,
    parent: usize,
    branch: i64,
    logd: T,
}

/// Points of the backward orbit tree of `seeds`, up to `cfg.budget` of them.
pub fn backward_orbit_sample<T: Real>(
    desc: &MapDescriptor<T>,
    seeds: &[Complex<T>],
    cfg: &SamplerConfig<T>,
) -> Result<JuliaSample<T>> {
    if seeds.is_empty() {
        return Err(Error::Domain("no seeds".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let mut out = JuliaSample {
        seeds: seeds.to_vec(),
        points: seeds.to_vec(),
        provenance: (0..seeds.len())
            .map(|i| Provenance {
                seed: i,
                parent: None,
                depth: 0,
                branch: 0,
            })
            .collect(),
        log_derivative: vec![T::zero(); seeds.len()],
        modulus_cap: cfg.modulus_cap,
        exhausted: false,
    };
    let mut frontier: Vec<usize> = (0..seeds.len()).collect();
    for level in 1..=cfg.depth {
        let remaining = cfg.budget.saturating_sub(out.points.len());
        if remaining == 0 {
            break;
        }
        let beam = remaining / (cfg.depth - level + 1).max(1);
        let beam = beam.max(1);
        let expanded: Vec<Result<Vec<Candidate<T>>>> = frontier
            .par_iter()
            .map(|&i| {
                let w = out.points[i];
                let list = match desc.preimages(w, cfg.modulus_cap) {
                    Ok(l) => l,
                    Err(Error::OmittedValue(_)) => return Ok(Vec::new()),
                    Err(e) => return Err(e),
                };
                Ok(list
                    .branches
                    .into_iter()
                    .filter(|b| b.point.norm() >= cfg.min_modulus)
                    .map(|b| Candidate {
                        point: b.point,
                        parent: i,
                        branch: b.branch_index,
                        logd: out.log_derivative[i] + b.derivative.norm().ln(),
                    })
                    .collect())
            })
            .collect();
        let mut cands = Vec::new();
        for e in expanded {
            cands.extend(e?);
        }
        if cands.is_empty() {
            out.exhausted = true;
            break;
        }
        let chosen: Vec<usize> = if cands.len() <= beam {
            (0..cands.len()).collect()
        } else {
            let heavy_n = (T::from_usize_lossy(beam) * cfg.heavy_fraction)
                .to_usize()
                .unwrap_or(0)
                .min(beam);
            let mut order: Vec<usize> = (0..cands.len()).collect();
            // heaviest first: smallest ln|(f^n)′| when t₀ > 0
            order.sort_by(|&a, &b| {
                (cands[a].logd * cfg.t0)
                    .partial_cmp(&(cands[b].logd * cfg.t0))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let mut pick: Vec<usize> = order[..heavy_n].to_vec();
            let rest = &order[heavy_n..];
            let extra = beam - heavy_n;
            pick.extend(sample_indices(&mut rng, rest.len(), extra.min(rest.len())).into_iter().map(|k| rest[k]));
            pick.sort_unstable();
            pick
        };
        let mut next = Vec::with_capacity(chosen.len());
        for k in chosen {
            let c = &cands[k];
            out.points.push(c.point);
            out.provenance.push(Provenance {
                seed: out.provenance[c.parent].seed,
                parent: Some(c.parent),
                depth: level,
                branch: c.branch,
            });
            out.log_derivative.push(c.logd);
            next.push(out.points.len() - 1);
        }
        frontier = next;
    }
    if out.points.len() < cfg.budget && !out.exhausted && frontier.is_empty() {
        out.exhausted = true;
    }
    if out.exhausted {
        log::warn!("backward orbit tree exhausted at {} of {} points", out.points.len(), cfg.budget);
    }
    Ok(out)
}

/// Forward-iterates point `i` back to its seed; returns the final distance.
pub fn replay_error<T: Real>(desc: &MapDescriptor<T>, sample: &JuliaSample<T>, i: usize) -> Option<T> {
    let p = sample.provenance[i];
    let mut z = sample.points[i];
    for _ in 0..p.depth {
        z = desc.evaluate(z).finite()?;
    }
    Some((z - sample.seeds[p.seed]).norm())
}

/// Hausdorff distance between two finite point sets.
pub fn hausdorff_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    let one_sided = |x: &[Complex<T>], y: &[Complex<T>]| {
        x.par_iter()
            .map(|p| y.iter().map(|q| (*p - *q).norm()).fold(T::infinity(), T::min))
            .reduce(|| T::zero(), T::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}

/// Repelling fixed points of the normalized map found by Newton on `g(z) − z`
/// from a square grid of half-width `radius`, sorted by modulus.
pub fn repelling_fixed_points<T: Real>(desc: &MapDescriptor<T>, radius: T, grid: usize) -> Vec<(Complex<T>, Complex<T>)> {
    let tol = desc.tolerances();
    let mut found: Vec<(Complex<T>, Complex<T>)> = Vec::new();
    for i in 0..grid {
        for j in 0..grid {
            let x = radius * T::lit(2.0 * (i as f64 + 0.5) / grid as f64 - 1.0);
            let y = radius * T::lit(2.0 * (j as f64 + 0.5) / grid as f64 - 1.0);
            let mut z = Complex::new(x, y);
            for _ in 0..tol.newton_max_iter {
                let Some((v, d)) = desc.eval_with_derivative(z) else { break };
                let den = d - Complex::from(T::one());
                if den.is_zero() {
                    break;
                }
                let step = (v - z) / den;
                z -= step;
                if step.norm() <= tol.newton_tol * T::one().max(z.norm()) {
                    if let Ok(m) = desc.derivative(z) {
                        if m.norm() > T::one()
                            && !found
                                .iter()
                                .any(|(f, _)| (*f - z).norm() <= tol.separation_tol * T::one().max(z.norm()))
                        {
                            found.push((z, m));
                        }
                    }
                    break;
                }
            }
        }
    }
    found.sort_by(|a, b| {
        a.0.norm()
            .partial_cmp(&b.0.norm())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.im.partial_cmp(&b.0.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    found
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct Cycle<T: Real> {
    pub points: Vec<Complex<T>>,
    pub multiplier: Complex<T>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Hyperbolic,
    NotHyperbolic,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OrbitFate {
    Attracted { cycle: usize },
    Escaped,
    /// Lands on a pole, so the singular value is a prepole.
    Prepole,
    /// Lands on a repelling or indifferent cycle.
    NonAttractingCycle,
    Undecided,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct HyperbolicityReport<T: Real> {
    pub attracting_cycles: Vec<Cycle<T>>,
    pub singular_values: Vec<Complex<T>>,
    pub fates: Vec<OrbitFate>,
    /// Orbit points of every singular value, cycles included.
    pub postcritical: Vec<Complex<T>>,
    pub delta_f: Option<T>,
    /// Fatou disk radius `δ/2`.
    pub t_radius: Option<T>,
    pub expansion_c: Option<T>,
    pub expansion_lambda: Option<T>,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct ClassifyConfig<T: Real> {
    pub max_iter: usize,
    pub tol: T,
    pub max_period: usize,
    pub escape_radius: T,
}

impl<T: Real> Default for ClassifyConfig<T> {
    fn default() -> Self {
        Self {
            max_iter: 10_000,
            tol: T::tol(1e-10),
            max_period: 64,
            escape_radius: T::lit(1e12),
        }
    }
}

/// Iterates every singular orbit and sorts out where it goes.
pub fn classify_singular_orbits<T: Real>(desc: &MapDescriptor<T>, cfg: &ClassifyConfig<T>) -> HyperbolicityReport<T> {
    let svs: Vec<SingularValue<T>> = desc.singular_values();
    let mut report = HyperbolicityReport {
        attracting_cycles: Vec::new(),
        singular_values: svs.iter().map(|s| s.value).collect(),
        fates: Vec::new(),
        postcritical: Vec::new(),
        delta_f: None,
        t_radius: None,
        expansion_c: None,
        expansion_lambda: None,
        verdict: Verdict::Hyperbolic,
        notes: Vec::new(),
    };
    for sv in &svs {
        let (fate, orbit) = follow_orbit(desc, sv.value, cfg, &mut report.attracting_cycles);
        report.postcritical.extend(orbit);
        match fate {
            OrbitFate::Attracted { .. } => {}
            OrbitFate::Escaped | OrbitFate::Prepole | OrbitFate::NonAttractingCycle => {
                report.verdict = Verdict::NotHyperbolic;
                report.notes.push(format!("singular value {} : {:?}", sv.value, fate));
            }
            OrbitFate::Undecided => {
                if report.verdict == Verdict::Hyperbolic {
                    report.verdict = Verdict::Inconclusive;
                }
                report.notes.push(format!("singular value {} undecided after {} steps", sv.value, cfg.max_iter));
            }
        }
        report.fates.push(fate);
    }
    for c in &report.attracting_cycles {
        report.postcritical.extend(c.points.iter().copied());
    }
    report
}

fn follow_orbit<T: Real>(
    desc: &MapDescriptor<T>,
    start: Complex<T>,
    cfg: &ClassifyConfig<T>,
    cycles: &mut Vec<Cycle<T>>,
) -> (OrbitFate, Vec<Complex<T>>) {
    let mut orbit = vec![start];
    let mut z = start;
    for _ in 0..cfg.max_iter {
        z = match desc.evaluate(z) {
            MapValue::Finite(w) => w,
            MapValue::Pole => return (OrbitFate::Prepole, orbit),
            MapValue::Overflow => return (OrbitFate::Escaped, orbit),
        };
        if z.norm() > cfg.escape_radius {
            return (OrbitFate::Escaped, orbit);
        }
        let k = orbit.len();
        for p in 1..=cfg.max_period.min(k) {
            let prev = orbit[k - p];
            if (z - prev).norm() <= cfg.tol * T::one().max(z.norm()) {
                // orbit stores the last `p` points of the cycle ending at `prev`
                let fate = register_cycle(desc, z, p, cycles);
                return (fate, orbit);
            }
        }
        orbit.push(z);
    }
    (OrbitFate::Undecided, orbit)
}

fn register_cycle<T: Real>(desc: &MapDescriptor<T>, z0: Complex<T>, p: usize, cycles: &mut Vec<Cycle<T>>) -> OrbitFate {
    // Newton on g^p(z) − z
    let mut z = z0;
    for _ in 0..20 {
        let mut w = z;
        let mut d = Complex::from(T::one());
        let mut ok = true;
        for _ in 0..p {
            match desc.eval_with_derivative(w) {
                Some((v, dv)) => {
                    d *= dv;
                    w = v;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let den = d - Complex::from(T::one());
        if den.is_zero() {
            break;
        }
        let step = (w - z) / den;
        z -= step;
        if step.norm() <= T::epsilon() * T::lit(4.0) * T::one().max(z.norm()) {
            break;
        }
    }
    let mut points = Vec::with_capacity(p);
    let mut mult = Complex::from(T::one());
    let mut w = z;
    for _ in 0..p {
        points.push(w);
        match desc.eval_with_derivative(w) {
            Some((v, dv)) => {
                mult *= dv;
                w = v;
            }
            None => return OrbitFate::Undecided,
        }
    }
    if mult.norm() >= T::one() {
        return OrbitFate::NonAttractingCycle;
    }
    let tol = T::tol(1e-8);
    for (i, c) in cycles.iter().enumerate() {
        if c.points.len() == p && c.points.iter().any(|q| (*q - z).norm() <= tol * T::one().max(z.norm())) {
            return OrbitFate::Attracted { cycle: i };
        }
    }
    cycles.push(Cycle { points, multiplier: mult });
    OrbitFate::Attracted { cycle: cycles.len() - 1 }
}

/// Least distance between two point sets.
fn set_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    a.par_iter()
        .map(|p| b.iter().map(|q| (*p - *q).norm()).fold(T::infinity(), T::min))
        .reduce(|| T::infinity(), T::min)
}

impl<T: Real> HyperbolicityReport<T> {
    /// Fills `δ(f) = ¼·dist(J, P_f)` and `T = δ/2` from a Julia sample.
    pub fn attach_sample(&mut self, sample: &JuliaSample<T>) {
        let d = set_distance(&sample.points, &self.postcritical);
        let delta = d / T::lit(4.0);
        self.delta_f = Some(delta);
        self.t_radius = Some(delta / T::lit(2.0));
        if !(delta > T::zero()) && self.verdict == Verdict::Hyperbolic {
            self.verdict = Verdict::NotHyperbolic;
            self.notes.push("Julia sample meets the postcritical set".into());
        }
    }

    pub fn attach_expansion(&mut self, fit: &ExpansionFit<T>, alpha1: T) {
        self.expansion_c = Some(fit.c);
        self.expansion_lambda = Some(fit.lambda);
        if self.verdict == Verdict::Hyperbolic && !(fit.lambda > T::one()) {
            self.verdict = Verdict::Inconclusive;
            if alpha1 >= T::zero() {
                self.notes
                    .push("fitted expansion λ ≤ 1 although α₁ ≥ 0 forces expansion".into());
            }
        }
    }

    /// Translation putting a Fatou point at the origin: zero when `D(0, T)` already
    /// misses the sample, otherwise the attracting cycle point farthest from it.
    pub fn normalization_shift(&self, sample: &JuliaSample<T>) -> Option<Complex<T>> {
        let t = self.t_radius?;
        let origin = [Complex::zero()];
        if set_distance(&origin, &sample.points) > t {
            return Some(Complex::zero());
        }
        self.attracting_cycles
            .iter()
            .flat_map(|c| c.points.iter().copied())
            .map(|p| (p, set_distance(&[p], &sample.points)))
            .filter(|(_, d)| *d > t)
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
            .map(|(p, _)| p)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct ExpansionFit<T: Real> {
    pub c: T,
    pub lambda: T,
    /// `min ln|(f^n)′|` over the sample, `n = 0, 1, …`.
    pub minima: Vec<T>,
    pub points_used: usize,
    pub skipped: usize,
}

/// Lower envelope `ln c + n ln λ` of `ln|(f^n)′(z)|` over the sample, using the
/// derivative products stored along parent chains.
pub fn expansion_estimate<T: Real>(sample: &JuliaSample<T>, n_max: usize) -> ExpansionFit<T> {
    let mut minima = vec![T::zero()];
    let mut used = 0;
    let mut skipped = 0;
    for n in 1..=n_max {
        let mut m = T::infinity();
        for i in 0..sample.len() {
            if let Some(a) = sample.ancestor(i, n) {
                let y = sample.log_derivative[i] - sample.log_derivative[a];
                m = m.min(y);
            }
        }
        if !m.is_finite() {
            break;
        }
        minima.push(m);
    }
    for p in &sample.provenance {
        if p.depth == 0 {
            skipped += 1;
        } else {
            used += 1;
        }
    }
    let k = minima.len();
    let slope = if k >= 2 {
        let nf: Vec<T> = (0..k).map(|n| T::from_usize_lossy(n)).collect();
        let mx = nf.iter().copied().sum::<T>() / T::from_usize_lossy(k);
        let my = minima.iter().copied().sum::<T>() / T::from_usize_lossy(k);
        let sxy: T = nf.iter().zip(&minima).map(|(&x, &y)| (x - mx) * (y - my)).sum();
        let sxx: T = nf.iter().map(|&x| (x - mx) * (x - mx)).sum();
        sxy / sxx
    } else {
        T::zero()
    };
    let intercept = minima
        .iter()
        .enumerate()
        .map(|(n, &m)| m - slope * T::from_usize_lossy(n))
        .fold(T::infinity(), T::min);
    ExpansionFit {
        c: intercept.exp(),
        lambda: slope.exp(),
        minima,
        points_used: used,
        skipped,
    }
}
