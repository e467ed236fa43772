//! Parameter estimation from count records, with first-order error
//! propagation and seven-sigma bounds.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SIGMAS: f64 = 7.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("{0} is zero")]
    ZeroDenominator(&'static str),
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("μ bound derivation inapplicable; check μ < 0.005 assumption ({0})")]
    MuBoundInapplicable(String),
}

/// Rounds `x` up at the given number of decimals.
pub fn round_up(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    // Guard against representation noise pushing an exact value up a step.
    let y = x * s;
    let r = y.round();
    if (y - r).abs() < 1e-9 {
        r / s
    } else {
        y.ceil() / s
    }
}

pub fn round_nearest(x: f64, decimals: i32) -> f64 {
    let s = 10f64.powi(decimals);
    (x * s).round() / s
}

/// A point estimate, its standard deviation, and a seven-sigma bound on the
/// conservative side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub sigma: f64,
    pub bound7: f64,
}

impl Estimate {
    pub fn upper(value: f64, sigma: f64) -> Self {
        Estimate {
            value,
            sigma,
            bound7: value + SIGMAS * sigma,
        }
    }

    pub fn lower(value: f64, sigma: f64) -> Self {
        Estimate {
            value,
            sigma,
            bound7: value - SIGMAS * sigma,
        }
    }
}

/// `σ_y` from partial derivatives and input sigmas.
pub fn propagate(terms: &[(f64, f64)]) -> f64 {
    terms
        .iter()
        .map(|(d, s)| (d * s).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CountRecord {
    #[serde(rename = "t_exp_s")]
    pub t_exp: f64,
    #[serde(rename = "f_sys_hz")]
    pub f_sys: f64,
    pub n_b: u64,
    pub n_u0: u64,
    pub n_t0: u64,
    pub n_tu: [u64; 4],
    pub n_err_tu: [u64; 4],
    pub n0: u64,
    pub n1: u64,
    pub n2: u64,
}

impl CountRecord {
    pub fn validate(&self) -> Result<(), EstimationError> {
        let bad = |m: String| Err(EstimationError::InvalidRecord(m));
        if self.n_u0 > self.n_b || self.n_t0 > self.n_b {
            return bad(format!("basis/bit counts exceed n_b = {}", self.n_b));
        }
        for i in 0..4 {
            if self.n_err_tu[i] > self.n_tu[i] {
                return bad(format!(
                    "n_err_tu[{i}] = {} exceeds n_tu[{i}] = {}",
                    self.n_err_tu[i], self.n_tu[i]
                ));
            }
        }
        if self.n0 + self.n1 + self.n2 != self.n_b {
            return bad(format!(
                "n0 + n1 + n2 = {} differs from n_b = {}",
                self.n0 + self.n1 + self.n2,
                self.n_b
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DarkRecord {
    #[serde(rename = "t_d_s")]
    pub t_d: f64,
    pub n_db: u64,
    pub n_da0: u64,
    pub n_da1: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoincidenceRecord {
    pub n_a: u64,
    pub n_b: u64,
    pub n_c: u64,
}

impl CoincidenceRecord {
    pub fn validate(&self) -> Result<(), EstimationError> {
        if self.n_c > self.n_a.min(self.n_b) {
            return Err(EstimationError::InvalidRecord(format!(
                "n_c = {} exceeds min(n_a, n_b) = {}",
                self.n_c,
                self.n_a.min(self.n_b)
            )));
        }
        Ok(())
    }
}

/// Bias bounds. The bound adds the mean and seven sigmas after rounding
/// each up at the sixth decimal.
pub fn estimate_biases(rec: &CountRecord) -> Result<(Estimate, Estimate), EstimationError> {
    if rec.n_b == 0 {
        return Err(EstimationError::ZeroDenominator("n_b"));
    }
    let nb = rec.n_b as f64;
    let sigma = 0.5 / nb.sqrt();
    let one = |n: u64| {
        let mean = (n as f64 / nb - 0.5).abs();
        Estimate {
            value: mean,
            sigma,
            bound7: round_up(mean, 6) + SIGMAS * round_up(sigma, 6),
        }
    };
    Ok((one(rec.n_u0), one(rec.n_t0)))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorTable {
    /// Rows ordered (0,0), (0,1), (1,0), (1,1).
    pub rows: [Estimate; 4],
    /// Largest bound, rounded up at the sixth decimal.
    pub e_max: f64,
}

pub fn estimate_error_rates(rec: &CountRecord) -> Result<ErrorTable, EstimationError> {
    let mut rows = [Estimate::upper(0.0, 0.0); 4];
    for i in 0..4 {
        if rec.n_tu[i] == 0 {
            return Err(EstimationError::ZeroDenominator("n_tu"));
        }
        let n = rec.n_tu[i] as f64;
        let e = rec.n_err_tu[i] as f64 / n;
        rows[i] = Estimate::upper(e, (e * (1.0 - e) / n).sqrt());
    }
    let e_max = round_up(rows.iter().map(|r| r.bound7).fold(0.0, f64::max), 6);
    Ok(ErrorTable { rows, e_max })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DarkEstimates {
    pub d_a0: Estimate,
    pub d_a1: Estimate,
    pub d_a: Estimate,
    pub d_b: Estimate,
}

pub fn d_a_of(d_a0: f64, d_a1: f64) -> f64 {
    d_a0 + d_a1 - d_a0 * d_a1
}

pub fn estimate_dark(rec: &DarkRecord, f_sys: f64) -> Result<DarkEstimates, EstimationError> {
    let nd = rec.t_d * f_sys;
    if !(nd >= 1.0) {
        return Err(EstimationError::InvalidRecord(format!(
            "t_d·f_sys = {nd} must be at least 1"
        )));
    }
    let rate = |n: u64| Estimate::upper(n as f64 / nd, (n as f64).sqrt() / nd);
    let (d_a0, d_a1, d_b) = (rate(rec.n_da0), rate(rec.n_da1), rate(rec.n_db));
    let sigma = propagate(&[
        (1.0 - d_a1.value, d_a0.sigma),
        (1.0 - d_a0.value, d_a1.sigma),
    ]);
    let d_a = Estimate::upper(d_a_of(d_a0.value, d_a1.value), sigma);
    Ok(DarkEstimates {
        d_a0,
        d_a1,
        d_a,
        d_b,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DetectionEstimates {
    pub p_a: Estimate,
    pub p_b: Estimate,
    pub p_c: Estimate,
}

pub fn estimate_detection(
    rec: &CoincidenceRecord,
    t_exp: f64,
    f_sys: f64,
) -> Result<DetectionEstimates, EstimationError> {
    rec.validate()?;
    let n = t_exp * f_sys;
    if !(n > 0.0) {
        return Err(EstimationError::ZeroDenominator("t_exp·f_sys"));
    }
    let p = |k: u64| Estimate::upper(k as f64 / n, (k as f64).sqrt() / n);
    Ok(DetectionEstimates {
        p_a: p(rec.n_a),
        p_b: p(rec.n_b),
        p_c: p(rec.n_c),
    })
}

pub fn x_a_of(p_a: f64, d_a: f64) -> f64 {
    (p_a - d_a) / (1.0 - d_a)
}

pub fn x_b_of(p_b: f64, d_b: f64) -> f64 {
    (-d_b).ln_1p() - (-p_b).ln_1p()
}

pub fn x_c_of(p_c: f64, d_a: f64, d_b: f64) -> f64 {
    (p_c - d_a - d_b + d_a * d_b) / ((1.0 - d_a) * (1.0 - d_b))
}

fn mu_discriminant(x_a: f64, x_b: f64, x_c: f64) -> f64 {
    1e4 * x_c * x_c - 200.0 * x_a * x_b
}

pub fn mu_u_of(x_a: f64, x_b: f64, x_c: f64) -> f64 {
    100.0 * x_c - mu_discriminant(x_a, x_b, x_c).sqrt()
}

/// Gradient of `μᵁ` with respect to `(x_A, x_B, x_C)`.
pub fn mu_u_gradient(x_a: f64, x_b: f64, x_c: f64) -> [f64; 3] {
    let inv = 1.0 / mu_discriminant(x_a, x_b, x_c).sqrt();
    [
        100.0 * x_b * inv,
        100.0 * x_a * inv,
        100.0 - 1e4 * x_c * inv,
    ]
}

fn noqub_denominator(x_b: f64, d_b: f64) -> f64 {
    d_b + (1.0 - d_b) * (-(-x_b).exp_m1())
}

pub fn p_noqub_u_of(mu: f64, x_b: f64, d_b: f64) -> f64 {
    // Written as (D − e^{−μ}·num)/D with the cancellation done analytically.
    let num = d_b * (1.0 + mu) + (1.0 - d_b) * x_b;
    let d_minus_num = -d_b * mu - (1.0 - d_b) * ((-x_b).exp_m1() + x_b);
    (d_minus_num - (-mu).exp_m1() * num) / noqub_denominator(x_b, d_b)
}

/// Gradient of `P_noqubᵁ` with respect to `(μᵁ, x_B, d_B)`.
pub fn p_noqub_u_gradient(mu: f64, x_b: f64, d_b: f64) -> [f64; 3] {
    let den = noqub_denominator(x_b, d_b);
    let em = (-mu).exp();
    let ex = (-x_b).exp();
    [
        em * (d_b * mu + (1.0 - d_b) * x_b) / den,
        -em * (1.0 - d_b) * (1.0 - ex * (1.0 + d_b * mu + (1.0 - d_b) * x_b)) / (den * den),
        -em * (1.0 + mu - x_b - ex * (1.0 + mu)) / (den * den),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NoqubReport {
    pub x_a: Estimate,
    pub x_b: Estimate,
    pub x_c: Estimate,
    pub mu_u: Estimate,
    /// `100 x_C + √disc`, which must reach 0.005.
    pub mu_root_sum: f64,
    pub p_noqub_u: Estimate,
    /// Seven-sigma bound rounded to six decimals.
    pub p_noqub_max: f64,
}

pub fn derive_noqub_bound(
    dark: &DarkEstimates,
    det: &DetectionEstimates,
) -> Result<NoqubReport, EstimationError> {
    let (da, db) = (dark.d_a, dark.d_b);
    let (pa, pb, pc) = (det.p_a, det.p_b, det.p_c);

    let x_a = Estimate::upper(
        x_a_of(pa.value, da.value),
        propagate(&[
            ((pa.value - 1.0) / (1.0 - da.value).powi(2), da.sigma),
            (1.0 / (1.0 - da.value), pa.sigma),
        ]),
    );
    let x_b = Estimate::upper(
        x_b_of(pb.value, db.value),
        propagate(&[
            (1.0 / (1.0 - db.value), db.sigma),
            (1.0 / (1.0 - pb.value), pb.sigma),
        ]),
    );
    let qa = 1.0 - da.value;
    let qb = 1.0 - db.value;
    let x_c = Estimate::upper(
        x_c_of(pc.value, da.value, db.value),
        propagate(&[
            (1.0 / (qa * qb), pc.sigma),
            ((pc.value - 1.0) / (qa * qa * qb), da.sigma),
            ((pc.value - 1.0) / (qa * qb * qb), db.sigma),
        ]),
    );

    let disc = mu_discriminant(x_a.value, x_b.value, x_c.value);
    if !(disc >= 0.0) {
        return Err(EstimationError::MuBoundInapplicable(format!(
            "negative discriminant {disc:e}"
        )));
    }
    let mu_root_sum = 100.0 * x_c.value + disc.sqrt();
    if !(mu_root_sum >= 0.005) {
        return Err(EstimationError::MuBoundInapplicable(format!(
            "100 x_C + √disc = {mu_root_sum:e} below 0.005"
        )));
    }
    let g = mu_u_gradient(x_a.value, x_b.value, x_c.value);
    let mu_u = Estimate::upper(
        mu_u_of(x_a.value, x_b.value, x_c.value),
        propagate(&[(g[0], x_a.sigma), (g[1], x_b.sigma), (g[2], x_c.sigma)]),
    );

    let g = p_noqub_u_gradient(mu_u.value, x_b.value, db.value);
    let p_noqub_u = Estimate::upper(
        p_noqub_u_of(mu_u.value, x_b.value, db.value),
        propagate(&[(g[0], mu_u.sigma), (g[1], x_b.sigma), (g[2], db.sigma)]),
    );
    Ok(NoqubReport {
        x_a,
        x_b,
        x_c,
        mu_u,
        mu_root_sum,
        p_noqub_u,
        p_noqub_max: round_nearest(p_noqub_u.bound7, 6),
    })
}

pub fn eta_a_l_of(x_a: f64, mu: f64) -> f64 {
    x_a / mu - mu
}

pub fn eta_b_l_of(x_b: f64, mu: f64) -> f64 {
    x_b / mu
}

/// Lower bounds on the detection efficiencies; their `bound7` subtracts.
pub fn eta_lower_bounds(
    x_a: &Estimate,
    x_b: &Estimate,
    mu_u: &Estimate,
) -> Result<(Estimate, Estimate), EstimationError> {
    let mu = mu_u.value;
    if !(mu > 0.0) {
        return Err(EstimationError::InvalidRecord(format!(
            "μᵁ = {mu} must be positive"
        )));
    }
    // d/dμ (x_A/μ − μ) = −(x_A/μ² + 1).
    let eta_a = Estimate::lower(
        eta_a_l_of(x_a.value, mu),
        propagate(&[
            (1.0 / mu, x_a.sigma),
            (x_a.value / (mu * mu) + 1.0, mu_u.sigma),
        ]),
    );
    let eta_b = Estimate::lower(
        eta_b_l_of(x_b.value, mu),
        propagate(&[(1.0 / mu, x_b.sigma), (x_b.value / (mu * mu), mu_u.sigma)]),
    );
    Ok((eta_a, eta_b))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MuCheck {
    /// `50 (x_B + 7σ)`, an upper bound on μ when η_B > 0.02.
    pub mu_bound: f64,
    pub holds: bool,
}

pub fn check_mu_assumption(x_b: &Estimate) -> MuCheck {
    let mu_bound = 50.0 * (x_b.value + SIGMAS * x_b.sigma);
    MuCheck {
        mu_bound,
        holds: mu_bound < 0.005,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PipelineReport {
    pub beta_pb: Estimate,
    pub beta_ps: Estimate,
    pub error_table: ErrorTable,
    pub dark: DarkEstimates,
    pub detection: DetectionEstimates,
    pub noqub: NoqubReport,
    pub eta_a_l: Estimate,
    pub eta_b_l: Estimate,
    pub mu_check: MuCheck,
}

pub fn run_pipeline(
    counts: &CountRecord,
    dark: &DarkRecord,
    coincidence: &CoincidenceRecord,
) -> Result<PipelineReport, EstimationError> {
    counts.validate()?;
    let (beta_pb, beta_ps) = estimate_biases(counts)?;
    let error_table = estimate_error_rates(counts)?;
    let dark = estimate_dark(dark, counts.f_sys)?;
    let detection = estimate_detection(coincidence, counts.t_exp, counts.f_sys)?;
    let noqub = derive_noqub_bound(&dark, &detection)?;
    let (eta_a_l, eta_b_l) = eta_lower_bounds(&noqub.x_a, &noqub.x_b, &noqub.mu_u)?;
    let mu_check = check_mu_assumption(&noqub.x_b);
    Ok(PipelineReport {
        beta_pb,
        beta_ps,
        error_table,
        dark,
        detection,
        noqub,
        eta_a_l,
        eta_b_l,
        mu_check,
    })
}

/// The experiment's raw records.
pub mod reference {
    use super::*;

    pub fn counts() -> CountRecord {
        CountRecord {
            t_exp: 331_465.0,
            f_sys: 5e5,
            n_b: 11_467_415,
            n_u0: 5_737_415,
            n_t0: 5_732_749,
            n_tu: [1_508_557, 1_507_895, 1_358_476, 1_356_953],
            n_err_tu: [89_317, 92_020, 82_505, 82_923],
            n0: 1_348_725,
            n1: 10_118_574,
            n2: 116,
        }
    }

    pub fn dark() -> DarkRecord {
        DarkRecord {
            t_d: 75_906.0,
            n_db: 17_111,
            n_da0: 12_985,
            n_da1: 13_354,
        }
    }

    pub fn coincidence() -> CoincidenceRecord {
        CoincidenceRecord {
            n_a: 12_021_392,
            n_b: 11_467_415,
            n_c: 10_118_690,
        }
    }
}
