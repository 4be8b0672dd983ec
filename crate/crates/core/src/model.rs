//! Pointwise kinetics of the dimensionless tumor / necrosis / vasculature system.
//!
//! All densities are normalized by the carrying capacity, time by the
//! proliferation rate and length by the isotropic diffusion length, so the
//! kinetics below are written with `K = rho = kappa0 = 1`.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Physical parameters before adimensionalization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionalParameters {
    /// Anisotropic (vasculature-driven) diffusion speed, cm²/day.
    pub kappa1: f64,
    /// Isotropic diffusion speed, cm²/day.
    pub kappa0: f64,
    /// Tumor proliferation rate, 1/day.
    pub rho: f64,
    /// Hypoxic death rate.
    pub alpha: f64,
    /// Tumor to necrosis conversion rate.
    pub beta1: f64,
    /// Vasculature to necrosis conversion rate.
    pub beta2: f64,
    /// Vasculature proliferation rate.
    pub gamma: f64,
    /// Vasculature destruction by tumor.
    pub delta: f64,
    /// Carrying capacity, cell/cm³.
    pub capacity: f64,
}

/// The six rates that drive the dimensionless system.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionlessParameters {
    pub kappa1: f64,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub gamma: f64,
    pub delta: f64,
}

impl DimensionlessParameters {
    pub fn validate(&self) -> Result<()> {
        for name in ParamName::ALL {
            let v = self.get(name);
            if !v.is_finite() || v < 0.0 {
                return Err(Error::param(
                    name.as_str(),
                    format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: ParamName) -> f64 {
        match name {
            ParamName::Kappa1 => self.kappa1,
            ParamName::Alpha => self.alpha,
            ParamName::Beta1 => self.beta1,
            ParamName::Beta2 => self.beta2,
            ParamName::Gamma => self.gamma,
            ParamName::Delta => self.delta,
        }
    }

    pub fn set(&mut self, name: ParamName, value: f64) {
        match name {
            ParamName::Kappa1 => self.kappa1 = value,
            ParamName::Alpha => self.alpha = value,
            ParamName::Beta1 => self.beta1 = value,
            ParamName::Beta2 => self.beta2 = value,
            ParamName::Gamma => self.gamma = value,
            ParamName::Delta => self.delta = value,
        }
    }

    pub fn with(mut self, name: ParamName, value: f64) -> Self {
        self.set(name, value);
        self
    }

    /// Total diffusivity `kappa1 * P + 1` for a given vascular fraction.
    #[inline]
    pub fn diffusivity(&self, p: f64) -> f64 {
        self.kappa1 * p + 1.0
    }
}

/// Name of one of the six sweepable rates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamName {
    Kappa1,
    Alpha,
    Beta1,
    Beta2,
    Gamma,
    Delta,
}

impl ParamName {
    pub const ALL: [ParamName; 6] = [
        ParamName::Kappa1,
        ParamName::Alpha,
        ParamName::Beta1,
        ParamName::Beta2,
        ParamName::Gamma,
        ParamName::Delta,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Kappa1 => "kappa1",
            ParamName::Alpha => "alpha",
            ParamName::Beta1 => "beta1",
            ParamName::Beta2 => "beta2",
            ParamName::Gamma => "gamma",
            ParamName::Delta => "delta",
        }
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::UnknownParameter(s.to_string()))
    }
}

/// Pointwise state `(T, N, Phi)`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct FieldTriple {
    pub t_density: f64,
    pub n_density: f64,
    pub phi_density: f64,
}

impl FieldTriple {
    pub fn new(t_density: f64, n_density: f64, phi_density: f64) -> Self {
        Self {
            t_density,
            n_density,
            phi_density,
        }
    }

    /// `T + N + Phi`, the occupied volume.
    #[inline]
    pub fn occupancy(&self) -> f64 {
        self.t_density + self.n_density + self.phi_density
    }
}

/// Vasculature volume fraction `Phi+ / ((Phi+ + 1)/2 + T+)`, clamped to `[0, 1]`.
#[inline]
pub fn vascular_fraction(phi: f64, t: f64) -> f64 {
    let phi = phi.max(0.0);
    if phi == 0.0 {
        return 0.0;
    }
    let t = t.max(0.0);
    (phi / (0.5 * (phi + 1.0) + t)).clamp(0.0, 1.0)
}

/// Lack-of-vasculature factor `sqrt(1 - P^2)`.
#[inline]
pub fn hypoxia_factor(phi: f64, t: f64) -> f64 {
    hypoxia_from_fraction(vascular_fraction(phi, t))
}

#[inline]
pub(crate) fn hypoxia_from_fraction(p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    (1.0 - p * p).sqrt()
}

pub fn reaction_tumor(state: FieldTriple, p: &DimensionlessParameters) -> f64 {
    let FieldTriple {
        t_density: t,
        n_density: n,
        phi_density: phi,
    } = state;
    let frac = vascular_fraction(phi, t);
    t * frac * (1.0 - state.occupancy())
        - p.alpha * t * hypoxia_from_fraction(frac)
        - p.beta1 * n * t
}

/// Necrosis source. Every term is a loss of the tumor or vasculature equations.
pub fn reaction_necrosis(state: FieldTriple, p: &DimensionlessParameters) -> f64 {
    let FieldTriple {
        t_density: t,
        n_density: n,
        phi_density: phi,
    } = state;
    let h = hypoxia_factor(phi, t);
    p.alpha * t * h + p.beta1 * n * t + p.delta * t * phi + p.beta2 * n * phi
}

pub fn reaction_vasculature(state: FieldTriple, p: &DimensionlessParameters) -> f64 {
    let FieldTriple {
        t_density: t,
        n_density: n,
        phi_density: phi,
    } = state;
    let h = hypoxia_factor(phi, t);
    p.gamma * t * h * phi * (1.0 - state.occupancy()) - p.delta * t * phi - p.beta2 * n * phi
}

fn require_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be > 0, got {v}")))
    }
}

/// Map physical parameters onto the six dimensionless rates.
pub fn nondimensionalize(p: &DimensionalParameters) -> Result<DimensionlessParameters> {
    require_positive("kappa0", p.kappa0)?;
    require_positive("rho", p.rho)?;
    require_positive("capacity", p.capacity)?;
    let out = DimensionlessParameters {
        kappa1: p.kappa1 / p.kappa0,
        alpha: p.alpha / p.rho,
        beta1: p.capacity * p.beta1 / p.rho,
        beta2: p.capacity * p.beta2 / p.rho,
        gamma: p.gamma / p.rho,
        delta: p.capacity * p.delta / p.rho,
    };
    out.validate()?;
    Ok(out)
}

/// Rescale a physical point `(x [cm], t [day])` to `(y, s)`.
pub fn rescale_spacetime(x: f64, t: f64, kappa0: f64, rho: f64) -> Result<(f64, f64)> {
    require_positive("kappa0", kappa0)?;
    require_positive("rho", rho)?;
    Ok(((rho / kappa0).sqrt() * x, rho * t))
}
