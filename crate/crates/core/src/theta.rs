//! Preparation uncertainty angle from intensity contrasts and optics
//! imperfections.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{round_up, SIGMAS};

/// Measured preparation angles for states 0, 1, +, −, in degrees.
pub const DEFAULT_ALPHAS: [f64; 4] = [2.231222, 3.429185, 2.769766, 2.088437];
pub const DEFAULT_DELTA_RM: f64 = 0.1;
pub const DEFAULT_P_THETA: f64 = 0.027;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThetaError {
    #[error("contrast must be positive, got {0}")]
    NonPositiveContrast(f64),
    #[error("contrast confidence interval crosses zero (mean {mean}, sigma {sigma})")]
    IntervalCrossesZero { mean: f64, sigma: f64 },
    #[error("invalid optics input: {0}")]
    Invalid(String),
}

/// Intensity contrast `I_max/I_min` over repeated measurements.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContrastStats {
    pub mean_c: f64,
    pub sigma_c: f64,
    pub n_samples: u64,
}

impl ContrastStats {
    pub fn new(mean_c: f64, sigma_c: f64, n_samples: u64) -> Result<Self, ThetaError> {
        let s = ContrastStats {
            mean_c,
            sigma_c,
            n_samples,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), ThetaError> {
        if !(self.mean_c > 0.0) {
            return Err(ThetaError::NonPositiveContrast(self.mean_c));
        }
        if !(self.sigma_c >= 0.0) {
            return Err(ThetaError::Invalid(format!(
                "sigma_c = {} must be ≥ 0",
                self.sigma_c
            )));
        }
        Ok(())
    }

    /// `mean − 7σ`, the worst contrast kept.
    pub fn lower7(&self) -> Result<f64, ThetaError> {
        self.validate()?;
        let c = self.mean_c - SIGMAS * self.sigma_c;
        if c > 0.0 {
            Ok(c)
        } else {
            Err(ThetaError::IntervalCrossesZero {
                mean: self.mean_c,
                sigma: self.sigma_c,
            })
        }
    }
}

/// Deviation angle in degrees implied by a contrast. Infinite contrast is 0°.
pub fn angle_from_contrast(c: f64) -> Result<f64, ThetaError> {
    if !(c > 0.0) {
        return Err(ThetaError::NonPositiveContrast(c));
    }
    // 1 − 1/(1+C) = C/(1+C); arcsin of the complement keeps precision at large C.
    let s = (1.0 / (1.0 + c)).sqrt();
    Ok(2.0 * s.asin().to_degrees())
}

/// Largest per-pulse angle over a list of contrasts.
pub fn alpha_from_contrasts(contrasts: &[f64]) -> Result<f64, ThetaError> {
    if contrasts.is_empty() {
        return Err(ThetaError::Invalid("empty contrast list".into()));
    }
    contrasts
        .iter()
        .try_fold(0.0f64, |m, &c| Ok(m.max(angle_from_contrast(c)?)))
}

/// Probability that `n` independent pulses all fall inside a bound that
/// fails with probability `p_alpha`.
pub fn alpha_confidence(n: u64, p_alpha: f64) -> f64 {
    (n as f64 * (-p_alpha).ln_1p()).exp()
}

/// Optics contributions, all in degrees.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OpticsError {
    pub delta_pbs: f64,
    pub beta_01: f64,
    pub beta_pm: f64,
    pub delta_rm: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThetaReport {
    pub optics: OpticsError,
    /// States 0, 1, +, −.
    pub theta_per_state: [f64; 4],
    pub theta: f64,
}

/// `hwp` holds the 0°-setting contrast first, then the 22.5° one.
pub fn compose_theta(
    alphas: [f64; 4],
    hwp: [ContrastStats; 2],
    pbs: ContrastStats,
    delta_rm: f64,
) -> Result<ThetaReport, ThetaError> {
    if alphas.iter().any(|a| !(*a >= 0.0)) || !(delta_rm >= 0.0) {
        return Err(ThetaError::Invalid("angles must be ≥ 0".into()));
    }
    // Each component angle is rounded up at six decimals before summing.
    let bound = |c: &ContrastStats| -> Result<f64, ThetaError> {
        Ok(round_up(angle_from_contrast(c.lower7()?)?, 6))
    };
    let delta_pbs = bound(&pbs)?;
    let beta_01 = delta_pbs + bound(&hwp[0])?;
    let beta_pm = delta_pbs + bound(&hwp[1])?;
    let mut theta_per_state = [0.0; 4];
    for (i, a) in alphas.iter().enumerate() {
        let beta = if i < 2 { beta_01 } else { beta_pm };
        theta_per_state[i] = a + beta + delta_pbs + 6.0 * delta_rm;
    }
    let theta = theta_per_state.iter().copied().fold(0.0, f64::max);
    Ok(ThetaReport {
        optics: OpticsError {
            delta_pbs,
            beta_01,
            beta_pm,
            delta_rm,
        },
        theta_per_state,
        theta,
    })
}

/// The measured contrasts: PBS, then HWP at 0° and at 22.5°.
pub mod reference {
    use super::ContrastStats;

    pub fn pbs() -> ContrastStats {
        ContrastStats {
            mean_c: 161_448.0,
            sigma_c: 1700.0,
            n_samples: 10,
        }
    }

    pub fn hwp() -> [ContrastStats; 2] {
        [
            ContrastStats {
                mean_c: 145_551.0,
                sigma_c: 1700.0,
                n_samples: 10,
            },
            ContrastStats {
                mean_c: 9973.0,
                sigma_c: 14.0,
                n_samples: 10,
            },
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::estimation::{round_nearest, round_up};
    use crate::quantum::{bb84_state, deviate_on_cone, measure_prob, Bb84Label};
    use proptest::prelude::*;

    fn perfect() -> ContrastStats {
        ContrastStats {
            mean_c: f64::INFINITY,
            sigma_c: 0.0,
            n_samples: 1,
        }
    }

    #[test]
    fn contrast_examples() {
        // 2·asin(1e-6) rad is 1.146e-4°; the limit is reached as C grows.
        assert!((angle_from_contrast(1e12).unwrap() - 2e-6f64.to_degrees()).abs() < 1e-12);
        assert!(angle_from_contrast(1e14).unwrap() < 1e-4);
        assert!((angle_from_contrast(1.0).unwrap() - 90.0).abs() < 1e-12);
        assert_eq!(
            round_up(angle_from_contrast(149_548.0).unwrap(), 6),
            0.296321
        );
        assert_eq!(angle_from_contrast(f64::INFINITY).unwrap(), 0.0);
        assert!(angle_from_contrast(0.0).is_err());
        assert!(angle_from_contrast(-3.0).is_err());
    }

    #[test]
    fn confidence_examples() {
        assert!((alpha_confidence(1000, 0.027) / 1.2967e-12 - 1.0).abs() < 1e-4);
        assert_eq!(alpha_confidence(17, 0.0), 1.0);
        assert_eq!(alpha_confidence(1, 0.5), 0.5);
    }

    #[test]
    fn reference_chain() {
        let r = compose_theta(
            DEFAULT_ALPHAS,
            reference::hwp(),
            reference::pbs(),
            DEFAULT_DELTA_RM,
        )
        .unwrap();
        assert_eq!(reference::pbs().lower7().unwrap(), 149_548.0);
        assert_eq!(round_nearest(r.optics.delta_pbs, 6), 0.296321);
        assert_eq!(round_nearest(r.optics.beta_01, 6), 0.609769);
        assert_eq!(round_nearest(r.optics.beta_pm, 6), 1.449428);
        let rounded = r.theta_per_state.map(|t| round_nearest(t, 6));
        assert_eq!(rounded, [3.737312, 4.935275, 5.115515, 4.434186]);
        assert_eq!(round_nearest(r.theta, 6), 5.115515);
    }

    #[test]
    fn perfect_optics_give_zero() {
        let r = compose_theta([0.0; 4], [perfect(), perfect()], perfect(), 0.0).unwrap();
        assert_eq!(r.theta, 0.0);
    }

    #[test]
    fn crossing_interval_is_rejected() {
        let bad = ContrastStats {
            mean_c: 100.0,
            sigma_c: 20.0,
            n_samples: 10,
        };
        let e = compose_theta(DEFAULT_ALPHAS, reference::hwp(), bad, 0.1).unwrap_err();
        assert!(e
            .to_string()
            .contains("contrast confidence interval crosses zero"));
    }

    #[test]
    fn per_pulse_alpha() {
        let a = alpha_from_contrasts(&[2000.0, 500.0, 8000.0]).unwrap();
        assert_eq!(a, angle_from_contrast(500.0).unwrap());
        assert!(alpha_from_contrasts(&[]).is_err());
    }

    proptest! {
        #[test]
        fn born_rule_inversion(alpha in 0.01f64..30.0, az in 0.0f64..std::f64::consts::TAU, idx in 0usize..4) {
            let label = Bb84Label::from_index(idx);
            let target = bb84_state(label);
            let state = deviate_on_cone(&target, alpha.to_radians(), az).unwrap();
            let p_max = measure_prob(&state, label.u, label.t);
            let p_min = 1.0 - p_max;
            let c = p_max / p_min;
            let half = (alpha / 2.0).to_radians();
            prop_assert!((c / (half.cos().powi(2) / half.sin().powi(2)) - 1.0).abs() < 1e-8);
            prop_assert!((angle_from_contrast(c).unwrap() - alpha).abs() < 1e-9);
        }

        #[test]
        fn monotone_in_inputs(
            a in prop::array::uniform4(0.0f64..5.0),
            bump in 0.0f64..1.0,
            which in 0usize..4,
            rm in 0.0f64..0.5,
            scale in 1.0f64..3.0,
        ) {
            let base = compose_theta(a, reference::hwp(), reference::pbs(), rm).unwrap().theta;
            let mut a2 = a;
            a2[which] += bump;
            prop_assert!(compose_theta(a2, reference::hwp(), reference::pbs(), rm).unwrap().theta >= base);
            prop_assert!(compose_theta(a, reference::hwp(), reference::pbs(), rm + bump).unwrap().theta >= base);
            let mut pbs = reference::pbs();
            pbs.mean_c *= scale;
            prop_assert!(compose_theta(a, reference::hwp(), pbs, rm).unwrap().theta <= base);
            let mut hwp = reference::hwp();
            hwp[which % 2].mean_c *= scale;
            prop_assert!(compose_theta(a, hwp, reference::pbs(), rm).unwrap().theta <= base);
        }
    }
}
