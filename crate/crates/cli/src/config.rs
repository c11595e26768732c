//! Run configuration: JSON, versioned, validated before anything is written.

use std::path::Path;

use hypdim::bowen::DimensionConfig;
use hypdim::catalog::{FamilyTag, MapDescriptor};
use hypdim::measure::MeasureConfig;
use hypdim::pipeline::GateConfig;
use hypdim::sweep::{FamilySpec, SweepConfig};
use hypdim::transfer::{GridConfig, PressureConfig, CRITICAL_MARGIN};
use num_complex::Complex;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    Verify,
    Pressure,
    Dimension,
    Sweep,
    Nevanlinna,
    Measure,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::Verify => "verify",
            Pipeline::Pressure => "pressure",
            Pipeline::Dimension => "dimension",
            Pipeline::Sweep => "sweep",
            Pipeline::Nevanlinna => "nevanlinna",
            Pipeline::Measure => "measure",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PressureKnobs {
    /// Explicit `t` values; otherwise `t_count` points from `ρ/α + 0.1` to `t_max`.
    pub t_grid: Option<Vec<f64>>,
    pub t_count: usize,
    pub t_max: f64,
}

impl Default for PressureKnobs {
    fn default() -> Self {
        Self {
            t_grid: None,
            t_count: 8,
            t_max: 2.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeasureKnobs {
    /// Exponent of the measure; the Bowen zero when absent.
    pub t: Option<f64>,
    /// Offsets `s − P(t)`, largest first.
    pub s_gaps: Vec<f64>,
    pub density_iterations: usize,
    pub config: MeasureConfig<f64>,
}

impl Default for MeasureKnobs {
    fn default() -> Self {
        Self {
            t: None,
            s_gaps: vec![0.05, 0.025],
            density_iterations: 300,
            config: MeasureConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NevanlinnaKnobs {
    pub u: f64,
    /// Enumeration radius for preimages.
    pub radius: f64,
    /// Borel targets; Julia sample points when absent.
    pub targets: Option<Vec<Complex<f64>>>,
    pub n_targets: usize,
    /// Largest radius of the characteristic grid; `max(10, 100^{1/ρ})` when absent.
    pub r_max: Option<f64>,
    pub r_points: usize,
    pub smt_delta: f64,
}

impl Default for NevanlinnaKnobs {
    fn default() -> Self {
        Self {
            u: 2.0,
            radius: 1e3,
            targets: None,
            n_targets: 10,
            r_max: None,
            r_points: 48,
            smt_delta: 0.125,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub pipeline: Option<Pipeline>,
    #[serde(default)]
    pub map: Option<MapDescriptor<f64>>,
    #[serde(default)]
    pub family: Option<FamilySpec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub gates: GateConfig<f64>,
    #[serde(default)]
    pub grid: GridConfig<f64>,
    #[serde(default)]
    pub dimension: DimensionConfig<f64>,
    #[serde(default)]
    pub pressure: PressureKnobs,
    #[serde(default)]
    pub measure: MeasureKnobs,
    #[serde(default)]
    pub nevanlinna: NevanlinnaKnobs,
}

#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

fn bad<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

fn positive(name: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        bad(format!("{name} must be positive and finite, got {x}"))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError(format!("config: {e}")))
    }

    pub fn map(&self) -> Result<&MapDescriptor<f64>, ConfigError> {
        self.map.as_ref().ok_or_else(|| ConfigError("this pipeline needs a `map`".into()))
    }

    pub fn sweep_config(&self) -> SweepConfig<f64> {
        SweepConfig {
            gates: self.gates,
            grid: self.grid,
            dimension: self.dimension,
        }
    }

    pub fn drop_pressure(&self) -> PressureConfig<f64> {
        PressureConfig {
            tail_mode: hypdim::transfer::TailMode::Drop,
            ..self.dimension.pressure
        }
    }

    /// The pressure grid, explicit or default.
    pub fn t_grid(&self) -> Result<Vec<f64>, ConfigError> {
        let crit = self.map()?.growth_exponents().critical_t();
        if let Some(g) = &self.pressure.t_grid {
            return Ok(g.clone());
        }
        let lo = crit + 2.0 * CRITICAL_MARGIN;
        let n = self.pressure.t_count;
        if n == 1 {
            return Ok(vec![lo]);
        }
        Ok((0..n)
            .map(|k| lo + (self.pressure.t_max - lo) * k as f64 / (n - 1) as f64)
            .collect())
    }

    pub fn validate(&self, pipeline: Pipeline) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if let Some(p) = self.pipeline {
            if p != pipeline {
                return bad(format!("config is for `{}` but `{}` was requested", p.name(), pipeline.name()));
            }
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        let g = &self.grid;
        positive("grid.truncation_radius", g.truncation_radius)?;
        positive("grid.cell_width", g.cell_width)?;
        if g.cell_width > 1.0 || g.max_pivots == 0 {
            return bad("grid.cell_width must be ≤ 1 and grid.max_pivots ≥ 1");
        }
        let d = &self.dimension;
        positive("dimension.tol", d.tol)?;
        positive("dimension.margin", d.margin)?;
        if !(d.slack >= 0.0) || d.max_steps == 0 {
            return bad("dimension.slack must be ≥ 0 and dimension.max_steps ≥ 1");
        }
        let p = &d.pressure;
        positive("dimension.pressure.tol", p.tol)?;
        if p.n_max < p.n_min || p.n_min < 3 || p.stable_steps == 0 {
            return bad("pressure iteration needs 3 ≤ n_min ≤ n_max and stable_steps ≥ 1");
        }
        let gt = &self.gates;
        positive("gates.kappa_cap", gt.kappa_cap)?;
        positive("gates.seed_radius", gt.seed_radius)?;
        if gt.seed_grid == 0 || gt.sampler.budget == 0 || gt.sampler.depth == 0 {
            return bad("gates.seed_grid, gates.sampler.budget and gates.sampler.depth must be ≥ 1");
        }
        if !(0.0..=1.0).contains(&gt.sampler.heavy_fraction) {
            return bad("gates.sampler.heavy_fraction must lie in [0, 1]");
        }

        if pipeline == Pipeline::Sweep {
            let Some(fam) = &self.family else {
                return bad("the sweep pipeline needs a `family`");
            };
            if self.map.is_some() {
                return bad("the sweep pipeline takes a `family`, not a `map`");
            }
            fam.validate().map_err(|e| ConfigError(e.to_string()))?;
            if fam.base.tag() == FamilyTag::CosineRoot {
                return bad("cosine-root families cannot be swept (α₁ < 0)");
            }
            if fam.grid_density == 0 {
                return bad("family.grid_density must be ≥ 1");
            }
            return Ok(());
        }
        if self.family.is_some() {
            return bad(format!("`family` is only used by the sweep pipeline, not `{}`", pipeline.name()));
        }
        let map = self.map()?;
        let crit = map.growth_exponents().critical_t();
        match pipeline {
            Pipeline::Pressure => {
                let k = &self.pressure;
                if k.t_grid.is_none() && (k.t_count == 0 || !(k.t_max > crit + 2.0 * CRITICAL_MARGIN)) {
                    return bad("pressure.t_count must be ≥ 1 and pressure.t_max above ρ/α + 0.1");
                }
                let ts = self.t_grid()?;
                if ts.is_empty() || ts.windows(2).any(|w| !(w[1] > w[0])) {
                    return bad("pressure.t_grid must be nonempty and strictly increasing");
                }
                if ts.iter().any(|&t| !(t >= crit + CRITICAL_MARGIN)) {
                    return bad(format!("every t must be at least ρ/α + {CRITICAL_MARGIN} = {}", crit + CRITICAL_MARGIN));
                }
            }
            Pipeline::Measure | Pipeline::Dimension => {
                let m = &self.measure;
                if let Some(t) = m.t {
                    if !(t >= crit + CRITICAL_MARGIN) {
                        return bad(format!("measure.t must be at least {}", crit + CRITICAL_MARGIN));
                    }
                }
                if m.s_gaps.is_empty() || m.s_gaps.iter().any(|&s| !(s > 0.0)) {
                    return bad("measure.s_gaps must be nonempty and positive");
                }
                if m.s_gaps.windows(2).any(|w| !(w[1] < w[0])) {
                    return bad("measure.s_gaps must be strictly decreasing");
                }
                positive("measure.config.level_eps", m.config.level_eps)?;
                positive("measure.config.discard_eps", m.config.discard_eps)?;
                if m.density_iterations == 0 || m.config.depth_max == 0 {
                    return bad("measure.density_iterations and measure.config.depth_max must be ≥ 1");
                }
            }
            Pipeline::Nevanlinna => {
                let n = &self.nevanlinna;
                positive("nevanlinna.u", n.u)?;
                positive("nevanlinna.smt_delta", n.smt_delta)?;
                if !(n.radius > 1.0) || !n.radius.is_finite() {
                    return bad("nevanlinna.radius must exceed 1");
                }
                if let Some(r) = n.r_max {
                    if !(r > 1.0) || !r.is_finite() {
                        return bad("nevanlinna.r_max must exceed 1");
                    }
                }
                if n.r_points < 2 || n.n_targets == 0 {
                    return bad("nevanlinna.r_points must be ≥ 2 and nevanlinna.n_targets ≥ 1");
                }
                if let Some(ts) = &n.targets {
                    if ts.is_empty() || ts.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
                        return bad("nevanlinna.targets must be nonempty and finite");
                    }
                    if let Some(z) = ts.iter().find(|z| map.omitted_values().contains(z)) {
                        return bad(format!("target {z} is an omitted value of the map"));
                    }
                }
            }
            Pipeline::Verify | Pipeline::Sweep => {}
        }
        Ok(())
    }
}
