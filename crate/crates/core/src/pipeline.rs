//! Regularity gates shared by the dimension, sweep and measure runs.

use num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::catalog::{verify_balanced_growth, BalancedGrowthReport, MapDescriptor};
use crate::error::{Error, Result};
use crate::julia::{
    backward_orbit_sample, classify_singular_orbits, expansion_estimate, repelling_fixed_points, ClassifyConfig,
    HyperbolicityReport, JuliaSample, SamplerConfig, Verdict,
};
use crate::nevanlinna::{characteristic, divergence_check, CharacteristicConfig, DivergenceCheck};
use crate::scalar::Real;

/// The regularity conditions a map must satisfy before its dimension is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gate {
    AdmissibleExponents,
    TopologicalHyperbolicity,
    Expansion,
    BalancedGrowth,
    DivergenceType,
}

impl Gate {
    /// The condition violated, spelled out for reports.
    pub fn condition(self) -> &'static str {
        match self {
            Gate::AdmissibleExponents => "admissible growth exponents: α = α₁ + α₂ > 0 and ρ/α < 2",
            Gate::TopologicalHyperbolicity => {
                "topological hyperbolicity: the postcritical set stays a positive distance from the Julia set"
            }
            Gate::Expansion => "expansion: |(f^n)′| ≥ c·λ^n on the Julia set with λ > 1",
            Gate::BalancedGrowth => {
                "balanced growth: κ⁻¹|z|^{α₁}|f(z)|^{α₂} ≤ |f′(z)| ≤ κ|z|^{α₁}|f(z)|^{α₂} on the Julia set"
            }
            Gate::DivergenceType => {
                "divergence type: ∫_{log R}^R T(r)/r^{ρ+1} dr − B(log R)^{1−ρ} ≥ A for some R"
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateFailure {
    pub gate: Gate,
    pub condition: &'static str,
    pub detail: String,
}

impl GateFailure {
    fn new(gate: Gate, detail: String) -> Self {
        Self {
            gate,
            condition: gate.condition(),
            detail,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default, deny_unknown_fields)]
pub struct GateConfig<T: Real> {
    pub classify: ClassifyConfig<T>,
    pub sampler: SamplerConfig<T>,
    pub kappa_cap: T,
    pub expansion_depth: usize,
    pub divergence_a: T,
    pub divergence_b: T,
    pub characteristic: CharacteristicConfig<T>,
    /// Radius and grid of the fixed point search that seeds the sample.
    pub seed_radius: T,
    pub seed_grid: usize,
}

impl<T: Real> Default for GateConfig<T> {
    fn default() -> Self {
        Self {
            classify: ClassifyConfig::default(),
            sampler: SamplerConfig::default(),
            kappa_cap: T::lit(50.0),
            expansion_depth: 4,
            divergence_a: T::lit(0.05),
            divergence_b: T::zero(),
            characteristic: CharacteristicConfig::default(),
            seed_radius: T::lit(20.0),
            seed_grid: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "T: Real")]
pub struct VerifyReport<T: Real> {
    pub hyperbolicity: HyperbolicityReport<T>,
    pub balanced_growth: Option<BalancedGrowthReport<T>>,
    pub divergence: Option<DivergenceCheck<T>>,
    pub seeds: Vec<Complex<T>>,
    pub sample_points: usize,
    pub normalization_shift: Option<Complex<T>>,
    pub failures: Vec<GateFailure>,
}

impl<T: Real> VerifyReport<T> {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Everything a verified map hands on to the numerical stages.
#[derive(Clone, Debug)]
pub struct Verified<T: Real> {
    pub report: VerifyReport<T>,
    /// The map translated so that the origin is a Fatou point.
    pub normalized: MapDescriptor<T>,
    pub sample: Option<JuliaSample<T>>,
}

/// Repelling fixed points, nearest the origin first.
pub fn julia_seeds<T: Real>(desc: &MapDescriptor<T>, radius: T, grid: usize) -> Vec<Complex<T>> {
    let mut s: Vec<Complex<T>> = repelling_fixed_points(desc, radius, grid).into_iter().map(|p| p.0).collect();
    s.sort_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Runs the gates in order; later gates are skipped once hyperbolicity fails.
pub fn verify<T: Real>(desc: &MapDescriptor<T>, cfg: &GateConfig<T>) -> Result<Verified<T>> {
    let exps = desc.growth_exponents();
    let mut failures = Vec::new();
    if !exps.is_admissible() {
        failures.push(GateFailure::new(
            Gate::AdmissibleExponents,
            format!("α₁ = {}, α₂ = {}, ρ = {}", exps.alpha1, exps.alpha2, exps.order_rho),
        ));
    }
    let mut hyp = classify_singular_orbits(desc, &cfg.classify);
    let mut report = VerifyReport {
        hyperbolicity: hyp.clone(),
        balanced_growth: None,
        divergence: None,
        seeds: Vec::new(),
        sample_points: 0,
        normalization_shift: None,
        failures: Vec::new(),
    };
    if hyp.verdict != Verdict::Hyperbolic {
        failures.push(GateFailure::new(
            Gate::TopologicalHyperbolicity,
            format!("verdict {:?}; {}", hyp.verdict, hyp.notes.join("; ")),
        ));
        report.failures = failures;
        return Ok(Verified {
            report,
            normalized: desc.clone(),
            sample: None,
        });
    }

    let seeds = julia_seeds(desc, cfg.seed_radius, cfg.seed_grid);
    if seeds.is_empty() {
        return Err(Error::Numeric("no repelling fixed point found to seed the Julia sample".into()));
    }
    let sample = backward_orbit_sample(desc, &seeds[..1], &cfg.sampler)?;
    hyp.attach_sample(&sample);
    let fit = expansion_estimate(&sample, cfg.expansion_depth);
    hyp.attach_expansion(&fit, exps.alpha1);
    match hyp.verdict {
        Verdict::Hyperbolic => {}
        Verdict::NotHyperbolic => failures.push(GateFailure::new(Gate::TopologicalHyperbolicity, hyp.notes.join("; "))),
        Verdict::Inconclusive => failures.push(GateFailure::new(
            Gate::Expansion,
            format!("fitted λ = {}; {}", fit.lambda, hyp.notes.join("; ")),
        )),
    }
    let shift = hyp.normalization_shift(&sample);
    report.sample_points = sample.len();
    report.seeds = seeds;
    report.normalization_shift = shift;

    match verify_balanced_growth(desc, &sample.points, cfg.kappa_cap) {
        Ok(bg) => {
            if !bg.accepted() {
                failures.push(GateFailure::new(
                    Gate::BalancedGrowth,
                    format!("κ = {} exceeds cap {} at {} points", bg.kappa, bg.kappa_cap, bg.violations.len()),
                ));
            }
            report.balanced_growth = Some(bg);
        }
        Err(e) => failures.push(GateFailure::new(Gate::BalancedGrowth, e.to_string())),
    }

    // the angular rule loses accuracy once T(r) grows like r^ρ beyond a few hundred
    let r_max = T::lit(100.0).powf(T::one() / exps.order_rho.max(T::lit(0.5))).max(T::lit(10.0));
    let grid: Vec<T> = (0..=48)
        .map(|k| r_max.powf(T::from_usize_lossy(k) / T::lit(48.0)))
        .collect();
    let ch = characteristic(desc, &grid, &cfg.characteristic)?;
    let div = divergence_check(&ch, exps.order_rho, cfg.divergence_a, cfg.divergence_b);
    if !div.satisfied {
        failures.push(GateFailure::new(
            Gate::DivergenceType,
            format!("no witness up to R = {r_max}; best margin {}", div.best_margin),
        ));
    }
    report.divergence = Some(div);
    report.hyperbolicity = hyp;
    report.failures = failures;

    let (normalized, sample) = match shift {
        Some(s) if s != Complex::new(T::zero(), T::zero()) => (desc.clone().with_shift(desc.shift() + s), sample.translated(s)),
        _ => (desc.clone(), sample),
    };
    Ok(Verified {
        report,
        normalized,
        sample: Some(sample),
    })
}
