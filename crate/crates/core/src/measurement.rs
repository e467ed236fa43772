//! Alice's measurement of the received pulses.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{bb84_state, measure_prob};
use crate::source::{BiasSign, PreparedPulse, SourceParams};

/// Fill-in counts from the coincidence record: no click and double click out
/// of all heralded pulses.
pub const DEFAULT_P_NO_CLICK: f64 = 1_348_725.0 / 11_467_415.0;
pub const DEFAULT_P_DOUBLE_CLICK: f64 = 116.0 / 11_467_415.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasurementError {
    #[error("no pulses to measure")]
    NoPulses,
    #[error("invalid measurement policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Scheme {
    /// One random basis per pulse.
    Qt1,
    /// One random basis `z` for the whole token.
    Qt2,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementPolicy {
    pub scheme: Scheme,
    pub beta_e: f64,
    #[serde(default)]
    pub bias_sign_e: BiasSign,
    pub report_losses: bool,
    /// Minimum detected fraction; only consulted when losses are reported.
    pub gamma_det: f64,
    pub p_no_click: f64,
    pub p_double_click: f64,
}

impl Default for MeasurementPolicy {
    fn default() -> Self {
        MeasurementPolicy {
            scheme: Scheme::Qt2,
            beta_e: 0.0,
            bias_sign_e: BiasSign::Plus,
            report_losses: false,
            gamma_det: 1.0,
            p_no_click: DEFAULT_P_NO_CLICK,
            p_double_click: DEFAULT_P_DOUBLE_CLICK,
        }
    }
}

impl MeasurementPolicy {
    pub fn validate(&self) -> Result<(), MeasurementError> {
        let bad = |m: String| Err(MeasurementError::InvalidPolicy(m));
        if !(0.0..0.5).contains(&self.beta_e) {
            return bad(format!("beta_e = {} outside [0, 1/2)", self.beta_e));
        }
        if !(self.gamma_det > 0.0 && self.gamma_det <= 1.0) {
            return bad(format!("gamma_det = {} outside (0, 1]", self.gamma_det));
        }
        let (a, b) = (self.p_no_click, self.p_double_click);
        if !(a >= 0.0 && b >= 0.0 && a + b <= 1.0) {
            return bad(format!(
                "click probabilities {a}, {b} must be nonnegative with sum at most 1"
            ));
        }
        Ok(())
    }

    pub fn prob_basis0(&self) -> f64 {
        0.5 + self.bias_sign_e.factor() * self.beta_e
    }

    /// Share of kept pulses that receive a fair-coin outcome.
    fn kept_fill_fraction(&self) -> f64 {
        if self.report_losses {
            if self.p_no_click >= 1.0 {
                return 0.0;
            }
            self.p_double_click / (1.0 - self.p_no_click)
        } else {
            self.p_no_click + self.p_double_click
        }
    }

    /// Error probability on properly detected pulses chosen so that the total
    /// matched-basis error over kept pulses, fill-ins included, equals `e_tu`.
    pub fn detected_error_rate(&self, e_tu: f64) -> f64 {
        let f = self.kept_fill_fraction();
        ((e_tu - f / 2.0) / (1.0 - f)).clamp(0.0, 1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct MeasuredPulse {
    pub x: bool,
    pub detected: bool,
    pub assigned_random: bool,
}

/// Measures one pulse in `basis` (false = computational, true = Hadamard).
pub fn measure_pulse<R: Rng + ?Sized>(
    pulse: &PreparedPulse,
    basis: bool,
    source: &SourceParams,
    policy: &MeasurementPolicy,
    rng: &mut R,
) -> MeasuredPulse {
    let r: f64 = rng.random();
    if r < policy.p_no_click {
        return MeasuredPulse {
            x: rng.random(),
            detected: false,
            assigned_random: true,
        };
    }
    if r < policy.p_no_click + policy.p_double_click {
        return MeasuredPulse {
            x: rng.random(),
            detected: true,
            assigned_random: true,
        };
    }
    let label = pulse.label;
    let x = if basis == label.u {
        let e = policy.detected_error_rate(source.error_rates[label.index()]);
        label.t ^ rng.random_bool(e)
    } else {
        let state = if pulse.is_multiphoton {
            bb84_state(label)
        } else {
            pulse.state
        };
        let p1 = measure_prob(&state, basis, true).clamp(0.0, 1.0);
        rng.random_bool(p1)
    };
    MeasuredPulse {
        x,
        detected: true,
        assigned_random: false,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bases {
    Single(bool),
    PerPulse(Vec<bool>),
}

impl Bases {
    pub fn at(&self, k: usize) -> bool {
        match self {
            Bases::Single(z) => *z,
            Bases::PerPulse(v) => v[k],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementRun {
    pub bases: Bases,
    pub outcomes: Vec<MeasuredPulse>,
    /// Indices of pulses Alice keeps, ascending.
    pub lambda: Vec<usize>,
    /// Set when losses are reported and `|Λ| < γ_det·N`.
    pub abort_eligible: bool,
}

pub fn run_measurement_phase<R: Rng + ?Sized>(
    pulses: &[PreparedPulse],
    policy: &MeasurementPolicy,
    source: &SourceParams,
    rng: &mut R,
) -> Result<MeasurementRun, MeasurementError> {
    if pulses.is_empty() {
        return Err(MeasurementError::NoPulses);
    }
    policy.validate()?;
    let p0 = policy.prob_basis0();
    let bases = match policy.scheme {
        Scheme::Qt2 => Bases::Single(!rng.random_bool(p0)),
        Scheme::Qt1 => Bases::PerPulse((0..pulses.len()).map(|_| !rng.random_bool(p0)).collect()),
    };
    let outcomes: Vec<MeasuredPulse> = pulses
        .iter()
        .enumerate()
        .map(|(k, p)| measure_pulse(p, bases.at(k), source, policy, rng))
        .collect();
    let lambda: Vec<usize> = if policy.report_losses {
        (0..pulses.len())
            .filter(|&k| outcomes[k].detected)
            .collect()
    } else {
        (0..pulses.len()).collect()
    };
    let abort_eligible =
        policy.report_losses && (lambda.len() as f64) < policy.gamma_det * pulses.len() as f64;
    Ok(MeasurementRun {
        bases,
        outcomes,
        lambda,
        abort_eligible,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Bb84Label;
    use crate::rng::stream;
    use crate::source::sample_pulse;

    fn no_fill() -> MeasurementPolicy {
        MeasurementPolicy {
            p_no_click: 0.0,
            p_double_click: 0.0,
            ..Default::default()
        }
    }

    fn pulse(t: bool, u: bool) -> PreparedPulse {
        let label = Bb84Label::new(t, u);
        PreparedPulse {
            label,
            state: bb84_state(label),
            is_multiphoton: false,
            deviation_angle: 0.0,
            in_tail: false,
        }
    }

    #[test]
    fn ideal_matching_basis_returns_bit() {
        let mut rng = stream(1, 0);
        let src = SourceParams::ideal();
        for t in [false, true] {
            for u in [false, true] {
                for _ in 0..1000 {
                    let m = measure_pulse(&pulse(t, u), u, &src, &no_fill(), &mut rng);
                    assert_eq!(m.x, t);
                    assert!(m.detected && !m.assigned_random);
                }
            }
        }
    }

    #[test]
    fn mismatched_basis_is_fair() {
        let mut rng = stream(2, 0);
        let src = SourceParams::ideal();
        let n = 100_000;
        let ones = (0..n)
            .filter(|_| measure_pulse(&pulse(false, false), true, &src, &no_fill(), &mut rng).x)
            .count();
        let sigma = (0.25 * n as f64).sqrt();
        assert!((ones as f64 - n as f64 / 2.0).abs() < 3.0 * sigma);
    }

    #[test]
    fn matched_basis_error_tracks_table_rate() {
        let mut rng = stream(3, 0);
        let e00 = 0.059206911;
        let src = SourceParams {
            error_rates: [e00, 0.0, 0.0, 0.0],
            ..SourceParams::ideal()
        };
        let policy = MeasurementPolicy::default();
        let n = 1_000_000;
        let errs = (0..n)
            .filter(|_| measure_pulse(&pulse(false, false), false, &src, &policy, &mut rng).x)
            .count();
        let sigma = (e00 * (1.0 - e00) * n as f64).sqrt();
        assert!(
            (errs as f64 - e00 * n as f64).abs() < 3.0 * sigma,
            "errors {errs}"
        );
    }

    #[test]
    fn fill_ins_are_errors_half_the_time() {
        let mut rng = stream(4, 0);
        let src = SourceParams::ideal();
        let policy = MeasurementPolicy {
            p_no_click: 0.3,
            p_double_click: 0.1,
            ..Default::default()
        };
        let (mut fills, mut wrong) = (0u64, 0u64);
        for _ in 0..200_000 {
            let m = measure_pulse(&pulse(true, false), false, &src, &policy, &mut rng);
            if m.assigned_random {
                fills += 1;
                wrong += (!m.x) as u64;
            }
        }
        let sigma = (fills as f64 * 0.25).sqrt();
        assert!((wrong as f64 - fills as f64 / 2.0).abs() < 5.0 * sigma);
    }

    #[test]
    fn loss_set_without_reporting_is_everything() {
        let mut rng = stream(5, 0);
        let src = SourceParams::ideal();
        let pulses: Vec<_> = (0..10048).map(|_| sample_pulse(&src, &mut rng)).collect();
        let run =
            run_measurement_phase(&pulses, &MeasurementPolicy::default(), &src, &mut rng).unwrap();
        assert_eq!(run.lambda.len(), 10048);
        assert!(!run.abort_eligible);
    }

    #[test]
    fn total_loss_is_abort_eligible() {
        let mut rng = stream(6, 0);
        let src = SourceParams::ideal();
        let pulses: Vec<_> = (0..100).map(|_| sample_pulse(&src, &mut rng)).collect();
        let policy = MeasurementPolicy {
            report_losses: true,
            gamma_det: 0.5,
            p_no_click: 1.0,
            p_double_click: 0.0,
            ..Default::default()
        };
        let run = run_measurement_phase(&pulses, &policy, &src, &mut rng).unwrap();
        assert!(run.lambda.is_empty());
        assert!(run.abort_eligible);
    }

    #[test]
    fn empty_pulse_list_is_an_error() {
        let mut rng = stream(7, 0);
        let err = run_measurement_phase(
            &[],
            &MeasurementPolicy::default(),
            &SourceParams::ideal(),
            &mut rng,
        );
        assert_eq!(err, Err(MeasurementError::NoPulses));
    }

    #[test]
    fn qt2_basis_bias() {
        let policy = MeasurementPolicy {
            beta_e: 1e-5,
            ..Default::default()
        };
        let src = SourceParams::ideal();
        let one = [pulse(false, false)];
        let n = 1_000_000u64;
        let mut rng = stream(8, 0);
        let zeros = (0..n)
            .filter(|_| {
                run_measurement_phase(&one, &policy, &src, &mut rng)
                    .unwrap()
                    .bases
                    == Bases::Single(false)
            })
            .count() as f64;
        let sigma = (0.25 * n as f64).sqrt();
        assert!((zeros - n as f64 * policy.prob_basis0()).abs() < 5.0 * sigma);
    }

    #[test]
    fn qt2_is_deterministic_per_seed() {
        let src = SourceParams {
            error_rates: [0.06; 4],
            ..SourceParams::ideal()
        };
        let run = |seed| {
            let mut rng = stream(seed, 0);
            let pulses: Vec<_> = (0..500).map(|_| sample_pulse(&src, &mut rng)).collect();
            run_measurement_phase(&pulses, &MeasurementPolicy::default(), &src, &mut rng).unwrap()
        };
        assert_eq!(run(11), run(11));
    }

    #[test]
    fn qt1_draws_a_basis_per_pulse() {
        let mut rng = stream(9, 0);
        let src = SourceParams::ideal();
        let pulses: Vec<_> = (0..2000).map(|_| sample_pulse(&src, &mut rng)).collect();
        let policy = MeasurementPolicy {
            scheme: Scheme::Qt1,
            ..no_fill()
        };
        let run = run_measurement_phase(&pulses, &policy, &src, &mut rng).unwrap();
        let Bases::PerPulse(b) = &run.bases else {
            panic!("expected per-pulse bases")
        };
        let ones = b.iter().filter(|&&x| x).count();
        assert!(ones > 800 && ones < 1200);
        for (k, p) in pulses.iter().enumerate() {
            if b[k] == p.label.u {
                assert_eq!(run.outcomes[k].x, p.label.t);
            }
        }
    }

    #[test]
    fn detected_rate_inverts_fill_in_dilution() {
        let p = MeasurementPolicy::default();
        let f = DEFAULT_P_NO_CLICK + DEFAULT_P_DOUBLE_CLICK;
        let e = p.detected_error_rate(0.06);
        assert!((f / 2.0 + (1.0 - f) * e - 0.06).abs() < 1e-15);
    }
}
