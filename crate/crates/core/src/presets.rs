//! Parameter sets of the reference experiment.

use crate::measurement::{MeasurementPolicy, Scheme};
use crate::source::{BiasSign, SourceParams};

pub const N_PULSES: usize = 10048;
pub const GAMMA_ERR: f64 = 0.094;
pub const E_MAX: f64 = 0.062550;
pub const BETA_PB: f64 = 0.001360;
pub const BETA_PS: f64 = 0.001120;
pub const BETA_E: f64 = 1e-5;
pub const THETA_DEG: f64 = 5.115515;
pub const P_THETA: f64 = 0.027;
pub const P_NOQUB: f64 = 4.9e-5;
pub const NU_COR: f64 = 0.457643134;
pub const NU_UNF: f64 = 0.037547677;
pub const P_BOUND: f64 = 0.884130;
pub const P_WRONG: f64 = 2.6e-12;
pub const K_COR: u32 = 7;
pub const K_UNF: u32 = 6;

/// Average measured matched-basis error rates, ordered (0,0), (0,1), (1,0), (1,1).
pub const MEAN_ERROR_RATES: [f64; 4] = [0.059206911, 0.061025469, 0.060733498, 0.061109707];

/// Source used for honest end-to-end runs: measured mean error rates and the
/// bounded imperfections at their worst-case values.
pub fn experiment_source() -> SourceParams {
    SourceParams {
        beta_pb: BETA_PB,
        beta_ps: BETA_PS,
        theta: THETA_DEG.to_radians(),
        p_theta: P_THETA,
        p_noqub: P_NOQUB,
        error_rates: MEAN_ERROR_RATES,
        bias_sign_pb: BiasSign::Plus,
        bias_sign_ps: BiasSign::Plus,
    }
}

pub fn experiment_policy() -> MeasurementPolicy {
    MeasurementPolicy {
        scheme: Scheme::Qt2,
        beta_e: BETA_E,
        ..MeasurementPolicy::default()
    }
}
