//! Model parameters and their invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Token propagation and potential parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagationParams {
    /// Number of aging labels; tokens travel at most `z - 1` hops.
    pub z: usize,
    /// Upper label of the activator sum.
    pub x: usize,
    /// Upper label of the inhibitor sum.
    pub y: usize,
    /// Inhibitor weight.
    pub w: f64,
    /// Fraction of last step's accumulated tokens carried into the new seed.
    pub k: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            z: 20,
            x: 8,
            y: 16,
            w: 0.470,
            k: 0.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<()> {
        if self.z < 2 {
            return Err(Error::param("Z", format!("Z must be >= 2, got {}", self.z)));
        }
        if self.x < 1 {
            return Err(Error::param("X", format!("X must be >= 1, got {}", self.x)));
        }
        if self.x >= self.y {
            return Err(Error::param(
                "X",
                format!("constraint X < Y violated (X = {}, Y = {})", self.x, self.y),
            ));
        }
        if self.y > self.z {
            return Err(Error::param(
                "Y",
                format!(
                    "constraint Y <= Z violated (Y = {}, Z = {})",
                    self.y, self.z
                ),
            ));
        }
        if !(self.w >= 0.0) || !self.w.is_finite() {
            return Err(Error::param(
                "w",
                format!("w must be finite and >= 0, got {}", self.w),
            ));
        }
        if !(0.0..=1.0).contains(&self.k) {
            return Err(Error::param(
                "k",
                format!("k must lie in [0, 1], got {}", self.k),
            ));
        }
        Ok(())
    }
}

/// Which boundary cells may grow, and into which empty cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum GrowthScope {
    /// Only cells touching the exterior empty region grow, and only into it.
    #[default]
    BoundaryOnly,
    /// Cells facing any empty cell grow, including enclosed voids.
    IncludeInternal,
}

impl std::str::FromStr for GrowthScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "boundaryonly" | "boundary" => Ok(GrowthScope::BoundaryOnly),
            "includeinternal" | "internal" => Ok(GrowthScope::IncludeInternal),
            _ => Err(Error::param(
                "scope",
                format!("expected boundary_only or include_internal, got `{s}`"),
            )),
        }
    }
}

impl std::fmt::Display for GrowthScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GrowthScope::BoundaryOnly => "boundary_only",
            GrowthScope::IncludeInternal => "include_internal",
        })
    }
}

/// Which active cells the death rule examines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DeathScope {
    /// Cells with at least one empty neighbour, exterior or void. A cell
    /// buried in the body keeps whatever potential it has.
    #[default]
    Boundary,
    /// Every active cell.
    All,
}

impl std::str::FromStr for DeathScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "boundary" => Ok(DeathScope::Boundary),
            "all" => Ok(DeathScope::All),
            _ => Err(Error::param(
                "death_scope",
                format!("expected boundary or all, got `{s}`"),
            )),
        }
    }
}

impl std::fmt::Display for DeathScope {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DeathScope::Boundary => "boundary",
            DeathScope::All => "all",
        })
    }
}

/// Death and growth thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorphParams {
    /// Growth threshold: boundary cells with P >= G grow.
    pub g: f64,
    /// Cells with P <= r_surv die.
    pub r_surv: f64,
    /// Cells with P >= r_over die.
    pub r_over: f64,
    pub scope: GrowthScope,
    #[serde(default)]
    pub death_scope: DeathScope,
}

impl Default for MorphParams {
    fn default() -> Self {
        Self {
            g: 1.40,
            r_surv: 1.27,
            r_over: 50.0,
            scope: GrowthScope::BoundaryOnly,
            death_scope: DeathScope::Boundary,
        }
    }
}

impl MorphParams {
    pub fn validate(&self) -> Result<()> {
        for (key, v) in [("G", self.g), ("R", self.r_surv), ("Ro", self.r_over)] {
            if !v.is_finite() {
                return Err(Error::param(key, format!("{key} must be finite, got {v}")));
            }
        }
        if self.r_surv >= self.r_over {
            return Err(Error::param(
                "R",
                format!(
                    "constraint R < Ro violated (R = {}, Ro = {})",
                    self.r_surv, self.r_over
                ),
            ));
        }
        Ok(())
    }
}

/// Every parameter that influences a simulation step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelParams {
    pub propagation: PropagationParams,
    pub morph: MorphParams,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        self.propagation.validate()?;
        self.morph.validate()
    }
}
