//! The fringe engine: Talbot coefficients, environmental reduction factors, the
//! far-field density after the second free flight, and its visibility.

mod coefficients;
mod environment;
mod pattern;
mod visibility;

pub use coefficients::{
    general_coefficient, talbot_coefficients_closed_form, talbot_coefficients_general, CoefficientMode, GratingKernel,
    TalbotCoefficients,
};
pub use environment::{
    blackbody_scattering_channel, combined_reduction, environmental_reduction, gas_collision_channel, NITROGEN_MASS,
};
pub use pattern::{
    fringe_pattern, harmonic_argument, ChannelRecord, FringeOptions, FringePattern, Grid, PatternInputs,
    PatternMetadata, DEFAULT_ORDER, MAX_ORDER,
};
pub use visibility::{visibility, VisibilityMethod, VisibilityResult};

use serde::{Deserialize, Serialize};

/// Quantum near-field prediction or the classical ballistic shadow of the same grating.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Quantum,
    Classical,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Quantum => "quantum",
            Mode::Classical => "classical",
        }
    }
}

/// Fringe period D = d (t1 + t2) / t1.
pub fn fringe_period(grating_period: f64, t1: f64, t2: f64) -> f64 {
    grating_period * (t1 + t2) / t1
}
