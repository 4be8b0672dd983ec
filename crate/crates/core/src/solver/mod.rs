//! Uncoupled, linear IMEX time stepping for the dimensionless system.
//!
//! One step, with `P`, `sqrt(1 - P²)` and `S = T + N + Phi` frozen at the old level:
//!
//! 1. tumor: `(M/dt + A(kappa1 P + 1) + M c) T' = M (T/dt + g)` with the sink
//!    `c = alpha sqrt(1-P²) + beta1 N + P (1-S)-` and gain `g = T P (1-S)+`;
//! 2. vasculature, pointwise, gains explicit and losses implicit in `Phi'`;
//! 3. necrosis, pointwise, receiving exactly the tumor and vasculature losses.
//!
//! Every gain is nonnegative and every loss implicit, and the tumor matrix is
//! an M-matrix on the structured mesh, so nonnegative data stays nonnegative.

mod cg;

pub use cg::{solve_spd, solve_spd_into, CgStats, CgWorkspace};

use log::warn;

use crate::error::{check_len, Error, Result};
use crate::experiments::Scenario;
use crate::mesh::{SparseSymmetricMatrix, StructuredTriMesh};
use crate::metrics::{self, MetricsSample};
use crate::model::{
    hypoxia_from_fraction, vascular_fraction, DimensionlessParameters, FieldTriple,
};

/// Lower tolerance of the bound monitor for every field.
pub const MONITOR_LOWER: f64 = -1e-9;
/// Upper tolerance of the bound monitor for `T` and `Phi`.
pub const MONITOR_UPPER: f64 = 1.0 + 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub time: f64,
    pub t_field: Vec<f64>,
    pub n_field: Vec<f64>,
    pub phi_field: Vec<f64>,
}

impl SimulationState {
    pub fn new(
        time: f64,
        t_field: Vec<f64>,
        n_field: Vec<f64>,
        phi_field: Vec<f64>,
    ) -> Result<Self> {
        check_len(t_field.len(), n_field.len())?;
        check_len(t_field.len(), phi_field.len())?;
        Ok(Self {
            time,
            t_field,
            n_field,
            phi_field,
        })
    }

    /// Spatially uniform state on `n` vertices.
    pub fn uniform(n: usize, value: FieldTriple) -> Self {
        Self {
            time: 0.0,
            t_field: vec![value.t_density; n],
            n_field: vec![value.n_density; n],
            phi_field: vec![value.phi_density; n],
        }
    }

    pub fn len(&self) -> usize {
        self.t_field.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_field.is_empty()
    }

    pub fn at(&self, v: usize) -> FieldTriple {
        FieldTriple::new(self.t_field[v], self.n_field[v], self.phi_field[v])
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    pub cg_tolerance: f64,
    pub cg_max_iterations: usize,
    /// Steps between stored field snapshots.
    pub snapshot_every: usize,
    /// Steps between metric samples.
    pub metrics_every: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_final: 500.0,
            cg_tolerance: 1e-10,
            cg_max_iterations: 1000,
            snapshot_every: 10_000,
            metrics_every: 100,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::param("dt", format!("must be > 0, got {}", self.dt)));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return Err(Error::param(
                "t_final",
                format!("must be >= 0, got {}", self.t_final),
            ));
        }
        if !(self.cg_tolerance > 0.0 && self.cg_tolerance < 1.0) {
            return Err(Error::param(
                "cg_tolerance",
                format!("must lie in (0, 1), got {}", self.cg_tolerance),
            ));
        }
        if self.cg_max_iterations == 0 {
            return Err(Error::param("cg_max_iterations", "must be >= 1"));
        }
        if self.snapshot_every == 0 {
            return Err(Error::param("snapshot_every", "must be >= 1"));
        }
        if self.metrics_every == 0 {
            return Err(Error::param("metrics_every", "must be >= 1"));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Old-level quantities shared by the three substeps at one vertex.
#[derive(Clone, Copy, Debug)]
struct Frozen {
    frac: f64,
    hypoxia: f64,
    /// `(1 - S)+`
    room: f64,
    /// `(1 - S)-` as a nonnegative magnitude
    crowding: f64,
}

impl Frozen {
    #[inline]
    fn at(s: FieldTriple) -> Self {
        let frac = vascular_fraction(s.phi_density, s.t_density);
        let logistic = 1.0 - s.occupancy();
        Self {
            frac,
            hypoxia: hypoxia_from_fraction(frac),
            room: logistic.max(0.0),
            crowding: (-logistic).max(0.0),
        }
    }

    #[inline]
    fn tumor_sink(&self, n: f64, p: &DimensionlessParameters) -> f64 {
        p.alpha * self.hypoxia + p.beta1 * n + self.frac * self.crowding
    }

    #[inline]
    fn tumor_gain(&self, t: f64) -> f64 {
        t * self.frac * self.room
    }

    #[inline]
    fn vasculature(
        &self,
        old: FieldTriple,
        t_new: f64,
        p: &DimensionlessParameters,
        dt: f64,
    ) -> f64 {
        let growth = p.gamma * t_new * self.hypoxia;
        (old.phi_density + dt * growth * old.phi_density * self.room)
            / (1.0 + dt * (p.delta * t_new + p.beta2 * old.n_density + growth * self.crowding))
    }

    #[inline]
    fn necrosis_gain(
        &self,
        n_old: f64,
        t_new: f64,
        phi_new: f64,
        p: &DimensionlessParameters,
    ) -> f64 {
        p.alpha * self.hypoxia * t_new
            + p.beta1 * n_old * t_new
            + p.delta * t_new * phi_new
            + p.beta2 * n_old * phi_new
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepReport {
    pub cg: CgStats,
}

/// Reusable stepper bound to one mesh and parameter set.
pub struct Stepper<'m> {
    mesh: &'m StructuredTriMesh,
    params: DimensionlessParameters,
    dt: f64,
    cg_tolerance: f64,
    cg_max_iterations: usize,
    matrix: SparseSymmetricMatrix,
    frozen: Vec<Frozen>,
    diffusivity: Vec<f64>,
    shift: Vec<f64>,
    rhs: Vec<f64>,
    next_t: Vec<f64>,
    ws: CgWorkspace,
}

impl<'m> Stepper<'m> {
    pub fn new(
        mesh: &'m StructuredTriMesh,
        params: DimensionlessParameters,
        config: &SolverConfig,
    ) -> Result<Self> {
        params.validate()?;
        config.validate()?;
        let n = mesh.n_vertices();
        Ok(Self {
            mesh,
            params,
            dt: config.dt,
            cg_tolerance: config.cg_tolerance,
            cg_max_iterations: config.cg_max_iterations,
            matrix: mesh.zero_matrix(),
            frozen: Vec::with_capacity(n),
            diffusivity: vec![0.0; n],
            shift: vec![0.0; n],
            rhs: vec![0.0; n],
            next_t: vec![0.0; n],
            ws: CgWorkspace::default(),
        })
    }

    pub fn params(&self) -> &DimensionlessParameters {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance `state` by one step. `step_index` is the index of the step being
    /// taken (1-based) and sets the new time to `step_index * dt`.
    #[allow(clippy::needless_range_loop)]
    pub fn step(&mut self, state: &mut SimulationState, step_index: usize) -> Result<StepReport> {
        let n = self.mesh.n_vertices();
        check_len(n, state.len())?;
        let (p, dt) = (self.params, self.dt);
        let weights = self.mesh.lumped_weights();

        self.frozen.clear();
        self.frozen.extend((0..n).map(|v| Frozen::at(state.at(v))));
        for v in 0..n {
            let fz = &self.frozen[v];
            self.diffusivity[v] = p.diffusivity(fz.frac);
            self.shift[v] = weights[v] * (1.0 / dt + fz.tumor_sink(state.n_field[v], &p));
            self.rhs[v] = weights[v] * (state.t_field[v] / dt + fz.tumor_gain(state.t_field[v]));
        }
        self.mesh
            .assemble_stiffness_into(&self.diffusivity, &mut self.matrix)?;
        self.matrix.add_to_diagonal(&self.shift)?;

        self.next_t.copy_from_slice(&state.t_field);
        let cg = solve_spd_into(
            &self.matrix,
            &self.rhs,
            &mut self.next_t,
            self.cg_tolerance,
            self.cg_max_iterations,
            &mut self.ws,
        )
        .map_err(|e| match e {
            Error::SolverFailure {
                iterations,
                residual,
                ..
            } => Error::SolverFailure {
                step: step_index,
                iterations,
                residual,
            },
            other => other,
        })?;

        for v in 0..n {
            let fz = self.frozen[v];
            let old = state.at(v);
            let t_new = self.next_t[v];
            let phi_new = fz.vasculature(old, t_new, &p, dt);
            let n_new = old.n_density + dt * fz.necrosis_gain(old.n_density, t_new, phi_new, &p);
            state.t_field[v] = t_new;
            state.phi_field[v] = phi_new;
            state.n_field[v] = n_new;
        }
        state.time = step_index as f64 * dt;

        for (name, field) in [
            ("T", &state.t_field),
            ("N", &state.n_field),
            ("Phi", &state.phi_field),
        ] {
            if field.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFinite {
                    field: name,
                    step: step_index,
                });
            }
        }
        Ok(StepReport { cg })
    }
}

/// One step with default solver tolerances.
pub fn step(
    state: &SimulationState,
    params: &DimensionlessParameters,
    mesh: &StructuredTriMesh,
    dt: f64,
) -> Result<SimulationState> {
    let config = SolverConfig {
        dt,
        ..SolverConfig::default()
    };
    let mut stepper = Stepper::new(mesh, *params, &config)?;
    let mut next = state.clone();
    let index = (state.time / dt).round() as usize + 1;
    stepper.step(&mut next, index)?;
    next.time = state.time + dt;
    Ok(next)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundViolation {
    pub step: usize,
    pub field: &'static str,
    pub vertex: usize,
    pub value: f64,
}

/// Running extremes of the fields, checked after every accepted step.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundSummary {
    pub min_value: f64,
    pub max_t: f64,
    pub max_phi: f64,
    pub max_n: f64,
    /// Largest pointwise decrease of `N` over one step (0 when `N` never decreases).
    pub max_necrosis_drop: f64,
    pub violations: usize,
    pub first_violation: Option<BoundViolation>,
}

impl BoundSummary {
    fn new(state: &SimulationState) -> Self {
        let mut s = Self {
            min_value: f64::INFINITY,
            max_t: f64::NEG_INFINITY,
            max_phi: f64::NEG_INFINITY,
            max_n: f64::NEG_INFINITY,
            max_necrosis_drop: 0.0,
            violations: 0,
            first_violation: None,
        };
        s.observe(0, None, state);
        s
    }

    pub fn is_clean(&self) -> bool {
        self.violations == 0
    }

    fn flag(&mut self, violation: BoundViolation) {
        if self.violations == 0 {
            warn!(
                "bound violation at step {}: {}[{}] = {:e}",
                violation.step, violation.field, violation.vertex, violation.value
            );
            self.first_violation = Some(violation);
        }
        self.violations += 1;
    }

    fn observe(&mut self, step: usize, previous_n: Option<&[f64]>, state: &SimulationState) {
        for (field, values, upper) in [
            ("T", &state.t_field, MONITOR_UPPER),
            ("Phi", &state.phi_field, MONITOR_UPPER),
            ("N", &state.n_field, f64::INFINITY),
        ] {
            for (vertex, &value) in values.iter().enumerate() {
                self.min_value = self.min_value.min(value);
                if !(MONITOR_LOWER..=upper).contains(&value) {
                    self.flag(BoundViolation {
                        step,
                        field,
                        vertex,
                        value,
                    });
                }
            }
        }
        self.max_t = state.t_field.iter().copied().fold(self.max_t, f64::max);
        self.max_phi = state.phi_field.iter().copied().fold(self.max_phi, f64::max);
        self.max_n = state.n_field.iter().copied().fold(self.max_n, f64::max);
        if let Some(prev) = previous_n {
            for (a, b) in prev.iter().zip(&state.n_field) {
                self.max_necrosis_drop = self.max_necrosis_drop.max(a - b);
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub metrics: Vec<MetricsSample>,
    pub snapshots: Vec<SimulationState>,
    pub final_state: SimulationState,
    pub bounds: BoundSummary,
    pub steps: usize,
    pub cg_iterations: usize,
}

/// Integrate from `initial` to `config.t_final` on a fixed mesh.
pub fn simulate(
    mesh: &StructuredTriMesh,
    params: &DimensionlessParameters,
    initial: SimulationState,
    config: &SolverConfig,
    threshold: f64,
) -> Result<RunOutput> {
    let mut stepper = Stepper::new(mesh, *params, config)?;
    let mut state = initial;
    check_len(mesh.n_vertices(), state.len())?;
    state.time = 0.0;

    let n_steps = config.n_steps();
    let mut bounds = BoundSummary::new(&state);
    let mut metrics_series = vec![metrics::sample(&state, mesh, threshold)?];
    let mut snapshots = vec![state.clone()];
    let mut previous_n = state.n_field.clone();
    let mut cg_iterations = 0;

    for k in 1..=n_steps {
        previous_n.copy_from_slice(&state.n_field);
        let report = stepper.step(&mut state, k)?;
        cg_iterations += report.cg.iterations;
        bounds.observe(k, Some(&previous_n), &state);
        if k % config.metrics_every == 0 || k == n_steps {
            metrics_series.push(metrics::sample(&state, mesh, threshold)?);
        }
        if k % config.snapshot_every == 0 || k == n_steps {
            snapshots.push(state.clone());
        }
    }

    Ok(RunOutput {
        metrics: metrics_series,
        snapshots,
        final_state: state,
        bounds,
        steps: n_steps,
        cg_iterations,
    })
}

/// Run a scenario with the given solver settings (the scenario's own are ignored).
pub fn run(scenario: &Scenario, config: &SolverConfig) -> Result<RunOutput> {
    let mesh = scenario.build_mesh()?;
    let initial = scenario.initial_state(&mesh)?;
    simulate(&mesh, &scenario.params, initial, config, scenario.threshold)
}

/// Spatially homogeneous reduction: the same update as [`Stepper::step`]
/// without diffusion. The trajectory holds the initial value and one entry per step.
pub fn run_homogeneous(
    initial: FieldTriple,
    params: &DimensionlessParameters,
    dt: f64,
    t_final: f64,
) -> Result<Vec<FieldTriple>> {
    params.validate()?;
    let config = SolverConfig {
        dt,
        t_final,
        ..SolverConfig::default()
    };
    config.validate()?;
    let n_steps = config.n_steps();
    let mut out = Vec::with_capacity(n_steps + 1);
    let mut s = initial;
    out.push(s);
    for k in 1..=n_steps {
        s = homogeneous_step(s, params, dt);
        if !(s.t_density.is_finite() && s.n_density.is_finite() && s.phi_density.is_finite()) {
            return Err(Error::NonFinite {
                field: "homogeneous state",
                step: k,
            });
        }
        out.push(s);
    }
    Ok(out)
}

fn homogeneous_step(s: FieldTriple, p: &DimensionlessParameters, dt: f64) -> FieldTriple {
    let fz = Frozen::at(s);
    let t_new = (s.t_density / dt + fz.tumor_gain(s.t_density))
        / (1.0 / dt + fz.tumor_sink(s.n_density, p));
    let phi_new = fz.vasculature(s, t_new, p, dt);
    let n_new = s.n_density + dt * fz.necrosis_gain(s.n_density, t_new, phi_new, p);
    FieldTriple::new(t_new, n_new, phi_new)
}
