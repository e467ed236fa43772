//! Security bounds: robustness, correctness, unforgeability, privacy, and
//! their confidence and multi-node adjustments.

pub mod pbound;
pub mod tails;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::presets;
use crate::quantum::QuantumError;

pub use pbound::{
    build_ensemble, p_bound_ideal, p_bound_optimize, Ensemble, PBoundOptions, PBoundResult,
};
pub use tails::{binomial_cdf, chernoff_high, chernoff_low, ln_binomial_cdf};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BoundError {
    #[error("constraint violated: {0}")]
    Constraint(String),
    #[error("unforgeability precondition violated: P_bound = {0} is not below 1")]
    PBoundNotBelowOne(f64),
    #[error("invalid ensemble: {0}")]
    Ensemble(String),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
}

fn require(ok: bool, what: impl FnOnce() -> String) -> Result<(), BoundError> {
    if ok {
        Ok(())
    } else {
        Err(BoundError::Constraint(what()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeParams {
    /// Number of pulses N.
    pub n_pulses: u64,
    /// Number of reported detections n = |Λ|.
    pub n_kept: u64,
    pub gamma_err: f64,
    pub gamma_det: f64,
    pub nu_cor: f64,
    pub nu_unf: f64,
    pub p_det: f64,
    pub e_max: f64,
    pub beta_pb: f64,
    pub beta_ps: f64,
    pub beta_e: f64,
    pub p_noqub: f64,
    pub p_theta: f64,
    /// Cone half-angle, radians.
    pub theta: f64,
}

impl SchemeParams {
    /// The experiment's no-loss-reporting configuration.
    pub fn experiment() -> Self {
        SchemeParams {
            n_pulses: presets::N_PULSES as u64,
            n_kept: presets::N_PULSES as u64,
            gamma_err: presets::GAMMA_ERR,
            gamma_det: 1.0,
            nu_cor: presets::NU_COR,
            nu_unf: presets::NU_UNF,
            p_det: 1.0,
            e_max: presets::E_MAX,
            beta_pb: presets::BETA_PB,
            beta_ps: presets::BETA_PS,
            beta_e: presets::BETA_E,
            p_noqub: presets::P_NOQUB,
            p_theta: presets::P_THETA,
            theta: presets::THETA_DEG.to_radians(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Terms {
    pub term1: f64,
    pub term2: f64,
    pub total: f64,
}

impl Terms {
    fn new(term1: f64, term2: f64) -> Self {
        Terms {
            term1,
            term2,
            total: term1 + term2,
        }
    }
}

pub fn epsilon_rob(params: &SchemeParams) -> Result<f64, BoundError> {
    if params.p_det == 1.0 && params.gamma_det == 1.0 {
        return Ok(0.0);
    }
    require(params.gamma_det > 0.0, || {
        format!("0 < gamma_det (got {})", params.gamma_det)
    })?;
    require(params.gamma_det < params.p_det, || {
        format!(
            "gamma_det < P_det ({} vs {})",
            params.gamma_det, params.p_det
        )
    })?;
    chernoff_low(params.n_pulses as f64, params.p_det, params.gamma_det)
}

pub fn epsilon_cor(params: &SchemeParams) -> Result<Terms, BoundError> {
    let n = params.n_pulses as f64;
    let p1 = params.p_det * (1.0 - 2.0 * params.beta_pb) / 2.0;
    require(params.nu_cor > 0.0 && params.nu_cor < p1, || {
        format!(
            "0 < nu_cor < P_det(1 − 2 beta_PB)/2 (nu_cor = {}, bound = {p1})",
            params.nu_cor
        )
    })?;
    require(
        params.e_max > 0.0 && params.e_max < params.gamma_err,
        || {
            format!(
                "0 < E < gamma_err (E = {}, gamma_err = {})",
                params.e_max, params.gamma_err
            )
        },
    )?;
    require(params.gamma_err < 1.0, || {
        format!("gamma_err = {} must be < 1", params.gamma_err)
    })?;
    let term1 = chernoff_low(n, p1, params.nu_cor)?;
    let term2 = chernoff_high(n * params.nu_cor, params.e_max, params.gamma_err)?;
    Ok(Terms::new(term1, term2))
}

/// `1 − (1 − P_noqub)(1 − P_θ)`.
pub fn p_noqub_theta(p_noqub: f64, p_theta: f64) -> f64 {
    1.0 - (1.0 - p_noqub) * (1.0 - p_theta)
}

pub fn epsilon_unf(params: &SchemeParams, p_bound: f64) -> Result<Terms, BoundError> {
    let (big_n, n) = (params.n_pulses, params.n_kept);
    let pnt = p_noqub_theta(params.p_noqub, params.p_theta);
    let nu = params.nu_unf;
    if !(p_bound < 1.0) {
        return Err(BoundError::PBoundNotBelowOne(p_bound));
    }
    require(p_bound > 0.0, || {
        format!("P_bound = {p_bound} must be positive")
    })?;
    require(
        params.gamma_det * big_n as f64 <= n as f64 && n <= big_n,
        || {
            format!(
                "N gamma_det ≤ n ≤ N (N = {big_n}, n = {n}, gamma_det = {})",
                params.gamma_det
            )
        },
    )?;
    require((0.0..nu).contains(&pnt), || {
        format!("0 ≤ P_noqub,θ < nu_unf ({pnt} vs {nu})")
    })?;
    let cap = params.gamma_det * (1.0 - params.gamma_err / (1.0 - p_bound));
    require(nu < cap, || {
        format!("nu_unf < gamma_det(1 − gamma_err/(1 − P_bound)) ({nu} vs {cap})")
    })?;

    let k1 = (big_n as f64 * (1.0 - nu)).floor() as u64;
    let term1 = binomial_cdf(big_n, 1.0 - pnt, k1);
    let lost = (big_n as f64 * nu).floor() as u64;
    require(n > lost, || {
        format!("n = {n} must exceed floor(N nu_unf) = {lost}")
    })?;
    let k2 = (n as f64 * params.gamma_err).floor() as u64;
    let term2 = binomial_cdf(n - lost, 1.0 - p_bound, k2);
    Ok(Terms::new(term1, term2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfidenceParams {
    pub p_wrong: f64,
    pub k_cor: u32,
    pub k_unf: u32,
}

impl Default for ConfidenceParams {
    fn default() -> Self {
        ConfidenceParams {
            p_wrong: presets::P_WRONG,
            k_cor: presets::K_COR,
            k_unf: presets::K_UNF,
        }
    }
}

/// `1 − (1 − P_w)^K + ε(1 − P_w)^K`.
pub fn adjust_confidence(eps: f64, k: u32, p_wrong: f64) -> f64 {
    let ln_keep = k as f64 * (-p_wrong).ln_1p();
    -ln_keep.exp_m1() + eps * ln_keep.exp()
}

pub fn epsilon_priv(beta_e: f64) -> Result<f64, BoundError> {
    require((0.0..0.5).contains(&beta_e), || {
        format!("beta_E = {beta_e} outside [0, 1/2)")
    })?;
    Ok(beta_e)
}

/// Bias of the XOR of independent bits with the given biases.
pub fn xor_bias(biases: &[f64]) -> f64 {
    biases.iter().map(|b| 2.0 * b).product::<f64>() / 2.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MultiNode {
    pub m: u32,
    pub eps_priv: f64,
    pub eps_cor: f64,
    pub forge_bound: f64,
}

pub fn multi_node(
    m: u32,
    eps_priv: f64,
    eps_cor: f64,
    eps_unf: f64,
) -> Result<MultiNode, BoundError> {
    require(m >= 1, || "M must be at least 1".into())?;
    let sites = 2f64.powi(m as i32);
    Ok(MultiNode {
        m,
        eps_priv: (m as f64 * (2.0 * eps_priv).ln_1p()).exp_m1() / sites,
        eps_cor: m as f64 * eps_cor,
        forge_bound: 0.5 * sites * (sites - 1.0) * eps_unf,
    })
}

/// A probability with its base-10 logarithm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Prob {
    pub value: f64,
    pub log10: f64,
}

impl From<f64> for Prob {
    fn from(value: f64) -> Self {
        Prob {
            value,
            log10: value.log10(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TermsReport {
    pub term1: Prob,
    pub term2: Prob,
    pub total: Prob,
}

impl From<Terms> for TermsReport {
    fn from(t: Terms) -> Self {
        TermsReport {
            term1: t.term1.into(),
            term2: t.term2.into(),
            total: t.total.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub inputs: SchemeParams,
    pub confidence: ConfidenceParams,
    pub p_bound: f64,
    pub p_noqub_theta: f64,
    pub eps_priv: Prob,
    pub eps_rob: Prob,
    pub eps_cor: TermsReport,
    pub eps_unf: TermsReport,
    pub eps_cor_prime: Prob,
    pub eps_unf_prime: Prob,
}

pub fn bound_report(
    params: &SchemeParams,
    p_bound: f64,
    confidence: &ConfidenceParams,
) -> Result<BoundReport, BoundError> {
    let cor = epsilon_cor(params)?;
    let unf = epsilon_unf(params, p_bound)?;
    Ok(BoundReport {
        inputs: params.clone(),
        confidence: *confidence,
        p_bound,
        p_noqub_theta: p_noqub_theta(params.p_noqub, params.p_theta),
        eps_priv: epsilon_priv(params.beta_e)?.into(),
        eps_rob: epsilon_rob(params)?.into(),
        eps_cor: cor.into(),
        eps_unf: unf.into(),
        eps_cor_prime: adjust_confidence(cor.total, confidence.k_cor, confidence.p_wrong).into(),
        eps_unf_prime: adjust_confidence(unf.total, confidence.k_unf, confidence.p_wrong).into(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn correctness_terms_at_experiment_parameters() {
        let t = epsilon_cor(&SchemeParams::experiment()).unwrap();
        assert!(rel(t.term1, 2.05304e-15) < 1e-5, "{}", t.term1);
        assert!(rel(t.term2, 1.89154e-15) < 1e-5, "{}", t.term2);
        assert!(rel(t.total, 3.94458e-15) < 1e-5, "{}", t.total);
    }

    #[test]
    fn correctness_degrades_near_threshold() {
        let p = SchemeParams {
            n_pulses: 20,
            e_max: 0.999 * 0.094,
            ..SchemeParams::experiment()
        };
        assert!(epsilon_cor(&p).unwrap().term2 > 0.9);
    }

    #[test]
    fn correctness_decreases_with_n() {
        let at = |n| {
            epsilon_cor(&SchemeParams {
                n_pulses: n,
                ..SchemeParams::experiment()
            })
            .unwrap()
            .total
        };
        assert!(at(1000) > at(5000) && at(5000) > at(10000));
    }

    #[test]
    fn correctness_constraints_are_named() {
        let p = SchemeParams {
            e_max: 0.1,
            ..SchemeParams::experiment()
        };
        assert!(epsilon_cor(&p)
            .unwrap_err()
            .to_string()
            .contains("E < gamma_err"));
        let p = SchemeParams {
            nu_cor: 0.5,
            ..SchemeParams::experiment()
        };
        assert!(epsilon_cor(&p).unwrap_err().to_string().contains("nu_cor"));
    }

    #[test]
    fn unforgeability_terms_at_experiment_parameters() {
        let t = epsilon_unf(&SchemeParams::experiment(), presets::P_BOUND).unwrap();
        assert!(rel(t.term1, 3.72375e-10) < 1e-4, "{}", t.term1);
        assert!(rel(t.term2, 5.11874e-9) < 1e-4, "{}", t.term2);
        assert!(rel(t.total, 5.49112e-9) < 1e-4, "{}", t.total);
    }

    #[test]
    fn unforgeability_without_imperfect_pulses_has_no_first_term() {
        let p = SchemeParams {
            p_noqub: 0.0,
            p_theta: 0.0,
            ..SchemeParams::experiment()
        };
        assert_eq!(epsilon_unf(&p, presets::P_BOUND).unwrap().term1, 0.0);
    }

    #[test]
    fn unforgeability_decreases_with_n() {
        let at = |n| {
            let p = SchemeParams {
                n_pulses: n,
                n_kept: n,
                ..SchemeParams::experiment()
            };
            epsilon_unf(&p, presets::P_BOUND).unwrap().total
        };
        let v: Vec<f64> = [2000, 5000, 10000, 20000].into_iter().map(at).collect();
        assert!(v.windows(2).all(|w| w[1] < w[0]), "{v:?}");
    }

    #[test]
    fn unforgeability_constraints() {
        let p = SchemeParams::experiment();
        assert_eq!(
            epsilon_unf(&p, 1.0),
            Err(BoundError::PBoundNotBelowOne(1.0))
        );
        let e = epsilon_unf(&p, 0.95).unwrap_err().to_string();
        assert!(e.contains("nu_unf < gamma_det"), "{e}");
        let low = SchemeParams {
            nu_unf: 0.02,
            ..SchemeParams::experiment()
        };
        assert!(epsilon_unf(&low, 0.88)
            .unwrap_err()
            .to_string()
            .contains("P_noqub,θ < nu_unf"));
        let lossy = SchemeParams {
            n_kept: 9000,
            gamma_det: 0.95,
            ..SchemeParams::experiment()
        };
        assert!(epsilon_unf(&lossy, 0.88)
            .unwrap_err()
            .to_string()
            .contains("N gamma_det"));
    }

    #[test]
    fn p_noqub_theta_values() {
        assert_eq!(p_noqub_theta(0.0, 0.0), 0.0);
        assert!((p_noqub_theta(4.9e-5, 0.027) - 0.027047677).abs() < 1e-9);
        assert_eq!(p_noqub_theta(1.0, 0.3), 1.0);
    }

    #[test]
    fn robustness() {
        assert_eq!(epsilon_rob(&SchemeParams::experiment()).unwrap(), 0.0);
        let at = |n| {
            let p = SchemeParams {
                n_pulses: n,
                p_det: 0.9,
                gamma_det: 0.5,
                ..SchemeParams::experiment()
            };
            epsilon_rob(&p).unwrap()
        };
        // Exact Pr[Bin(100, 0.9) < 50] = Pr[X ≤ 49].
        assert!(at(100) >= binomial_cdf(100, 0.9, 49));
        assert!(at(100) > at(200) && at(200) > at(400));
        let bad = SchemeParams {
            p_det: 0.5,
            gamma_det: 0.6,
            ..SchemeParams::experiment()
        };
        assert!(epsilon_rob(&bad).is_err());
    }

    #[test]
    fn confidence_adjustment() {
        assert_eq!(adjust_confidence(0.3, 7, 0.0), 0.3);
        let cor = adjust_confidence(3.94458e-15, 7, 2.6e-12);
        assert!(rel(cor, 7.0 * 2.6e-12 + 3.94458e-15) < 1e-9);
        let unf = adjust_confidence(5.49112e-9, 6, 2.6e-12);
        assert!(rel(unf, 5.49112e-9 + 6.0 * 2.6e-12 * (1.0 - 5.49112e-9)) < 1e-9);
    }

    #[test]
    fn privacy_and_piling_up() {
        assert_eq!(epsilon_priv(1e-5).unwrap(), 1e-5);
        assert_eq!(epsilon_priv(0.0).unwrap(), 0.0);
        assert!(epsilon_priv(0.5).is_err());
        // Enumerate all eight inputs for three bits with Pr[0] = 0.6.
        let mut p_zero = 0.0;
        for bits in 0u32..8 {
            let w: f64 = (0..3)
                .map(|i| if bits >> i & 1 == 0 { 0.6 } else { 0.4 })
                .product();
            if bits.count_ones() % 2 == 0 {
                p_zero += w;
            }
        }
        assert!((p_zero - 0.5 - 0.004).abs() < 1e-15);
        assert!((xor_bias(&[0.1; 3]) - 0.004).abs() < 1e-15);
    }

    #[test]
    fn multi_node_scaling() {
        let m = multi_node(7, 1e-5, 2.1e-11, 5.52e-9).unwrap();
        assert!((m.eps_cor - 1.47e-10).abs() < 1e-15);
        assert!((m.forge_bound - 4.486656e-5).abs() < 1e-12);
        let one = multi_node(1, 1e-5, 2.1e-11, 5.52e-9).unwrap();
        assert!((one.eps_priv - 1e-5).abs() < 1e-18);
        assert_eq!(one.eps_cor, 2.1e-11);
        assert_eq!(one.forge_bound, 5.52e-9);
        assert!(multi_node(0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn report_terms_sum() {
        let r = bound_report(
            &SchemeParams::experiment(),
            presets::P_BOUND,
            &ConfidenceParams::default(),
        )
        .unwrap();
        for t in [r.eps_cor, r.eps_unf] {
            assert!(rel(t.term1.value + t.term2.value, t.total.value) < 1e-12);
        }
        assert!((r.eps_cor.total.log10 - 3.94458e-15f64.log10()).abs() < 1e-4);
        let json = serde_json::to_value(&r).unwrap();
        assert!(json["eps_unf"]["total"]["log10"].is_number());
    }
}
