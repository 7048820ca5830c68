//! The spectrally positive 3/2-stable Lévy process `U`: density and ratio,
//! Fourier oracle, increment and jump samplers, and the bridge jump
//! functionals.

mod bridge;
mod cdf;
mod density;
mod fourier;
mod sampler;

pub use bridge::{
    bridge_check, increment_integral, truncated_jump_sum_conditional, BridgeConfig, BridgeEstimate,
    Functional,
};
pub use cdf::{stable_cdf, StableCdf};
pub use density::{ln_p1, p1, p1_prime, p_t, p_t_prime, ratio_r, StableDensityModel, SIXTH_ROOT};
pub use fourier::{ln_p1_fourier, p1_fourier};
pub use sampler::{sample_increment, sample_jumps_above, JumpSet};

use serde::{Deserialize, Serialize};

/// `c₀ = 1/√3`, the scale in `Ψ(u) = c₀|u|^{3/2}(1 + i sgn u)`.
pub const C0: f64 = 0.577_350_269_189_625_8;
/// `c₁ = √(3/(8π))`; the Lévy measure is `c₁ z^{-5/2} dz` on `z > 0`.
pub const C1: f64 = 0.345_494_149_471_335_5;
pub const ALPHA_INDEX: f64 = 1.5;
/// `ψ(λ) = √(2/3) λ^{3/2}`.
pub const PSI_COEFF: f64 = 0.816_496_580_927_726;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableConstants {
    pub c0: f64,
    pub c1: f64,
    pub alpha_index: f64,
    pub psi_coeff: f64,
}

impl Default for StableConstants {
    fn default() -> Self {
        Self {
            c0: C0,
            c1: C1,
            alpha_index: ALPHA_INDEX,
            psi_coeff: PSI_COEFF,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_match_definitions() {
        assert!((C0 - 1.0 / 3f64.sqrt()).abs() < 1e-16);
        assert!((C1 - (3.0 / (8.0 * std::f64::consts::PI)).sqrt()).abs() < 1e-16);
        assert!((PSI_COEFF - (2.0f64 / 3.0).sqrt()).abs() < 1e-16);
        // ψ(λ) = c₁ Γ(−3/2) λ^{3/2} with Γ(−3/2) = 4√π/3, and c₀ = ψ-coefficient/√2.
        let gamma_m32 = 4.0 * std::f64::consts::PI.sqrt() / 3.0;
        assert!((C1 * gamma_m32 - PSI_COEFF).abs() < 1e-15);
        assert!((PSI_COEFF / 2f64.sqrt() - C0).abs() < 1e-15);
        assert!((C1 - 0.3454941).abs() < 1e-7 && (C0 - 0.5773503).abs() < 1e-7);
    }
}
