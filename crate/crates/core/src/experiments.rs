//! Initial conditions, preset scenarios and one-parameter sweeps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mesh::{Bounds, Diagonal, StructuredTriMesh};
use crate::metrics::DEFAULT_THRESHOLD;
use crate::model::{DimensionlessParameters, ParamName};
use crate::solver::{run, RunOutput, SimulationState, SolverConfig};

/// Rates held fixed in the ring-width study; also the defaults everywhere.
pub const DEFAULT_PARAMS: DimensionlessParameters = DimensionlessParameters {
    kappa1: 55.0,
    alpha: 45.0,
    beta1: 27.5,
    beta2: 2.55,
    gamma: 0.255,
    delta: 2.55,
};

/// `(min, default, max)` of each rate's study range.
pub const fn param_range(name: ParamName) -> (f64, f64, f64) {
    match name {
        ParamName::Kappa1 => (10.0, 55.0, 100.0),
        ParamName::Alpha => (10.0, 45.0, 100.0),
        ParamName::Beta1 => (5.0, 27.5, 50.0),
        ParamName::Beta2 => (0.1, 2.55, 5.0),
        ParamName::Gamma => (0.01, 0.255, 0.5),
        ParamName::Delta => (0.1, 2.55, 5.0),
    }
}

/// Rates varied in the ring-width study; the rest stay at their defaults.
pub const RING_SWEEP_PARAMS: [ParamName; 3] =
    [ParamName::Kappa1, ParamName::Alpha, ParamName::Beta1];

/// Default three-point grid for a sweep: range minimum, default, range maximum.
pub fn default_sweep_values(name: ParamName) -> Vec<f64> {
    let (lo, mid, hi) = param_range(name);
    vec![lo, mid, hi]
}

pub const DOMAIN_HALF_WIDTH: f64 = 9.0;
pub const DEFAULT_SUBDIVISIONS: usize = 45;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeshSpec {
    pub bounds: Bounds,
    pub n_sub: usize,
    pub diagonal: Diagonal,
}

impl Default for MeshSpec {
    fn default() -> Self {
        Self {
            bounds: Bounds::centered_square(DOMAIN_HALF_WIDTH),
            n_sub: DEFAULT_SUBDIVISIONS,
            diagonal: Diagonal::Forward,
        }
    }
}

/// Truncated Gaussian bump: `peak * exp(-r² / (2 (radius/3)²))` inside `radius`, 0 outside.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TumorBump {
    pub center: [f64; 2],
    pub radius: f64,
    pub peak: f64,
}

impl Default for TumorBump {
    fn default() -> Self {
        Self {
            center: [0.0, 0.0],
            radius: 3.0,
            peak: 0.5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZoneSpec {
    pub center: [f64; 2],
    pub radius: f64,
    pub level: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum VasculatureIc {
    Uniform(f64),
    /// `base` everywhere, overridden inside each disc; later zones win on overlap.
    Zones {
        base: f64,
        zones: Vec<ZoneSpec>,
    },
}

pub const DEFAULT_UNIFORM_VASCULATURE: f64 = 0.5;

pub fn default_zones() -> VasculatureIc {
    VasculatureIc::Zones {
        base: 0.1,
        zones: vec![
            ZoneSpec {
                center: [-4.5, 0.0],
                radius: 3.0,
                level: 0.8,
            },
            ZoneSpec {
                center: [4.5, 3.0],
                radius: 3.0,
                level: 0.5,
            },
            ZoneSpec {
                center: [2.0, -4.5],
                radius: 3.0,
                level: 0.2,
            },
        ],
    }
}

fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::param(name, format!("must lie in [0, 1], got {v}")))
    }
}

pub fn ic_tumor_bump(
    mesh: &StructuredTriMesh,
    center: [f64; 2],
    radius: f64,
    peak: f64,
) -> Result<Vec<f64>> {
    if !(peak > 0.0 && peak <= 1.0) {
        return Err(Error::param(
            "tumor peak",
            format!("must lie in (0, 1], got {peak}"),
        ));
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(
            "tumor radius",
            format!("must be > 0, got {radius}"),
        ));
    }
    if !mesh.bounds().contains(center) {
        return Err(Error::param(
            "tumor center",
            format!("{center:?} lies outside the domain"),
        ));
    }
    let sigma = radius / 3.0;
    Ok(mesh
        .vertices()
        .iter()
        .map(|p| {
            let r2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            if r2 <= radius * radius {
                peak * (-r2 / (2.0 * sigma * sigma)).exp()
            } else {
                0.0
            }
        })
        .collect())
}

pub fn ic_vasculature_uniform(mesh: &StructuredTriMesh, level: f64) -> Result<Vec<f64>> {
    check_unit("vasculature level", level)?;
    Ok(vec![level; mesh.n_vertices()])
}

pub fn ic_vasculature_zones(
    mesh: &StructuredTriMesh,
    base_level: f64,
    zones: &[ZoneSpec],
) -> Result<Vec<f64>> {
    check_unit("vasculature base level", base_level)?;
    for z in zones {
        check_unit("zone level", z.level)?;
        if !(z.radius > 0.0) {
            return Err(Error::param(
                "zone radius",
                format!("must be > 0, got {}", z.radius),
            ));
        }
    }
    Ok(mesh
        .vertices()
        .iter()
        .map(|p| {
            zones
                .iter()
                .rev()
                .find(|z| (p[0] - z.center[0]).hypot(p[1] - z.center[1]) <= z.radius)
                .map_or(base_level, |z| z.level)
        })
        .collect())
}

/// Everything needed to reproduce one simulation.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub mesh: MeshSpec,
    pub params: DimensionlessParameters,
    pub tumor_ic: TumorBump,
    pub vasculature_ic: VasculatureIc,
    pub necrosis_ic: f64,
    pub solver: SolverConfig,
    /// Density level defining the tumor region for area / SQ.
    pub threshold: f64,
}

impl Default for Scenario {
    fn default() -> Self {
        scenario_ring_width(&[])
    }
}

impl Scenario {
    pub fn with_overrides(mut self, overrides: &[(ParamName, f64)]) -> Self {
        for &(name, value) in overrides {
            self.params.set(name, value);
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.solver.validate()?;
        check_unit("necrosis level", self.necrosis_ic)?;
        check_unit("tumor peak", self.tumor_ic.peak)?;
        if !(self.threshold > 0.0) {
            return Err(Error::param(
                "threshold",
                format!("must be > 0, got {}", self.threshold),
            ));
        }
        let b = self.mesh.bounds;
        match &self.vasculature_ic {
            VasculatureIc::Uniform(level) => check_unit("vasculature level", *level)?,
            VasculatureIc::Zones { base, zones } => {
                check_unit("vasculature base level", *base)?;
                for z in zones {
                    let inside = z.center[0] - z.radius >= b.xmin
                        && z.center[0] + z.radius <= b.xmax
                        && z.center[1] - z.radius >= b.ymin
                        && z.center[1] + z.radius <= b.ymax;
                    if !inside {
                        return Err(Error::param(
                            "zone",
                            format!("disc {z:?} leaves the domain"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<StructuredTriMesh> {
        StructuredTriMesh::with_diagonal(self.mesh.bounds, self.mesh.n_sub, self.mesh.diagonal)
    }

    pub fn initial_state(&self, mesh: &StructuredTriMesh) -> Result<SimulationState> {
        self.validate()?;
        let t = ic_tumor_bump(
            mesh,
            self.tumor_ic.center,
            self.tumor_ic.radius,
            self.tumor_ic.peak,
        )?;
        let phi = match &self.vasculature_ic {
            VasculatureIc::Uniform(level) => ic_vasculature_uniform(mesh, *level)?,
            VasculatureIc::Zones { base, zones } => ic_vasculature_zones(mesh, *base, zones)?,
        };
        SimulationState::new(0.0, t, vec![self.necrosis_ic; mesh.n_vertices()], phi)
    }

    /// Run with the scenario's own solver settings.
    pub fn run(&self) -> Result<RunOutput> {
        run(self, &self.solver)
    }
}

/// Uniform vasculature, ring-width defaults.
pub fn scenario_ring_width(overrides: &[(ParamName, f64)]) -> Scenario {
    Scenario {
        mesh: MeshSpec::default(),
        params: DEFAULT_PARAMS,
        tumor_ic: TumorBump::default(),
        vasculature_ic: VasculatureIc::Uniform(DEFAULT_UNIFORM_VASCULATURE),
        necrosis_ic: 0.0,
        solver: SolverConfig::default(),
        threshold: DEFAULT_THRESHOLD,
    }
    .with_overrides(overrides)
}

/// Zoned vasculature, surface-regularity defaults.
pub fn scenario_surface_regularity(overrides: &[(ParamName, f64)]) -> Scenario {
    Scenario {
        vasculature_ic: default_zones(),
        ..scenario_ring_width(overrides)
    }
}

#[derive(Debug)]
pub struct SweepEntry {
    pub value: f64,
    pub output: RunOutput,
}

#[derive(Debug)]
pub struct SweepResult {
    pub param: ParamName,
    /// One entry per requested value, in request order.
    pub entries: Vec<SweepEntry>,
}

impl SweepResult {
    pub fn get(&self, value: f64) -> Option<&RunOutput> {
        self.entries
            .iter()
            .find(|e| e.value == value)
            .map(|e| &e.output)
    }
}

/// Run one independent simulation per value of `param`, everything else fixed.
pub fn sweep(scenario: &Scenario, param: ParamName, values: &[f64]) -> Result<SweepResult> {
    if values.is_empty() {
        return Err(Error::param("values", "sweep needs at least one value"));
    }
    let entries = values
        .par_iter()
        .map(|&value| {
            let mut s = scenario.clone();
            s.params.set(param, value);
            s.run().map(|output| SweepEntry { value, output })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepResult { param, entries })
}

/// Like [`sweep`] but with the parameter given by name.
pub fn sweep_by_name(scenario: &Scenario, param: &str, values: &[f64]) -> Result<SweepResult> {
    sweep(scenario, param.parse()?, values)
}
