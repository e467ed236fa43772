//! Token lifecycle: quantum phase, transaction, validation, and the classical
//! cross-checking baseline.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::measurement::{run_measurement_phase, Bases, MeasurementError, MeasurementPolicy};
use crate::netsim::{simulate_transaction, EventQueue, NetsimError, TimingRow, TimingTopology};
use crate::source::{sample_pulse, SourceError, SourceParams};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("token length must be at least 1")]
    EmptyToken,
    #[error("no matched-basis positions")]
    NoMatchedPositions,
    #[error("presented token has length {got}, expected {expected}")]
    LengthMismatch { got: usize, expected: usize },
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Measurement(#[from] MeasurementError),
    #[error(transparent)]
    Netsim(#[from] NetsimError),
}

/// Structured transcript record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TranscriptEvent {
    pub event: String,
    pub agent: String,
    pub t_ns: u64,
    pub digest: String,
}

impl TranscriptEvent {
    pub fn new(event: &str, agent: &str, t_ns: u64, payload: &str) -> Self {
        let mut h = DefaultHasher::new();
        payload.hash(&mut h);
        TranscriptEvent {
            event: event.into(),
            agent: agent.into(),
            t_ns,
            digest: format!("{:016x}", h.finish()),
        }
    }
}

/// Everything the two parties hold after the quantum phase.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TokenRecord {
    pub t: Vec<bool>,
    pub u: Vec<bool>,
    pub bases: Bases,
    pub x: Vec<bool>,
    pub x_dummy: Vec<bool>,
    pub lambda: Vec<usize>,
}

impl TokenRecord {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum QuantumPhaseOutcome {
    Token(TokenRecord),
    /// Bob aborts because too few detections were reported.
    Abort {
        detected: usize,
        required: f64,
    },
}

impl QuantumPhaseOutcome {
    pub fn token(self) -> Option<TokenRecord> {
        match self {
            QuantumPhaseOutcome::Token(r) => Some(r),
            QuantumPhaseOutcome::Abort { .. } => None,
        }
    }
}

pub fn quantum_phase<R: Rng + ?Sized>(
    n: usize,
    source: &SourceParams,
    policy: &MeasurementPolicy,
    rng: &mut R,
) -> Result<QuantumPhaseOutcome, ProtocolError> {
    if n == 0 {
        return Err(ProtocolError::EmptyToken);
    }
    source.validate()?;
    let pulses: Vec<_> = (0..n).map(|_| sample_pulse(source, rng)).collect();
    let run = run_measurement_phase(&pulses, policy, source, rng)?;
    if run.abort_eligible {
        return Ok(QuantumPhaseOutcome::Abort {
            detected: run.lambda.len(),
            required: policy.gamma_det * n as f64,
        });
    }
    let x_dummy = (0..n).map(|_| rng.random()).collect();
    Ok(QuantumPhaseOutcome::Token(TokenRecord {
        t: pulses.iter().map(|p| p.label.t).collect(),
        u: pulses.iter().map(|p| p.label.u).collect(),
        bases: run.bases,
        x: run.outcomes.iter().map(|m| m.x).collect(),
        x_dummy,
        lambda: run.lambda,
    }))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ValidationResult {
    pub accepted: bool,
    pub n_errors: usize,
    pub n_i: usize,
    pub error_rate: f64,
}

/// Validation over `Δ = {k ∈ Λ | u_k = d_k}` with a per-position `d`.
pub fn validate_positions(
    presented: &[bool],
    record: &TokenRecord,
    d: impl Fn(usize) -> bool,
    gamma_err: f64,
) -> Result<ValidationResult, ProtocolError> {
    if presented.len() != record.len() {
        return Err(ProtocolError::LengthMismatch {
            got: presented.len(),
            expected: record.len(),
        });
    }
    let (mut n_i, mut n_errors) = (0usize, 0usize);
    for &k in &record.lambda {
        if record.u[k] == d(k) {
            n_i += 1;
            n_errors += (presented[k] != record.t[k]) as usize;
        }
    }
    if n_i == 0 {
        return Err(ProtocolError::NoMatchedPositions);
    }
    // Accept iff n_errors / n_i ≤ γ_err, compared without division.
    let accepted = (n_errors as f64) <= gamma_err * n_i as f64;
    Ok(ValidationResult {
        accepted,
        n_errors,
        n_i,
        error_rate: n_errors as f64 / n_i as f64,
    })
}

pub fn validate(
    presented: &[bool],
    record: &TokenRecord,
    d_i: bool,
    gamma_err: f64,
) -> Result<ValidationResult, ProtocolError> {
    validate_positions(presented, record, |_| d_i, gamma_err)
}

/// Presents the real token at `L_b` and the dummy at the other site.
/// Returns `(result at L_b, result at L_{b⊕1})`.
pub fn run_token_transaction(
    record: &TokenRecord,
    b: bool,
    gamma_err: f64,
) -> Result<(ValidationResult, ValidationResult), ProtocolError> {
    // c = b ⊕ z, per position under QT₁; B_i then uses d_i = c ⊕ i.
    let c = |k: usize| record.bases.at(k) ^ b;
    let at = |i: bool, presented: &[bool]| {
        validate_positions(presented, record, |k| c(k) ^ i, gamma_err)
    };
    Ok((at(b, &record.x)?, at(!b, &record.x_dummy)?))
}

/// Outcome of one honest end-to-end run.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialOutcome {
    pub row: TimingRow,
    /// `None` when Bob aborted the quantum phase.
    pub at_b: Option<ValidationResult>,
    pub at_other: Option<ValidationResult>,
}

/// Quantum phase, a transaction towards a random `b`, and its timing.
/// `row.z` is Alice's basis, taken at the first pulse under QT₁.
pub fn simulate_token_trial<R: Rng + ?Sized>(
    trial: usize,
    n: usize,
    source: &SourceParams,
    policy: &MeasurementPolicy,
    topology: &TimingTopology,
    gamma_err: f64,
    rng: &mut R,
) -> Result<TrialOutcome, ProtocolError> {
    let timing = simulate_transaction(topology)?;
    let b: bool = rng.random();
    let dt_tran_us = timing.dt_tran_ns() as f64 / 1e3;
    match quantum_phase(n, source, policy, rng)? {
        QuantumPhaseOutcome::Abort { .. } => Ok(TrialOutcome {
            row: TimingRow {
                trial,
                b: b as u8,
                z: 0,
                dt_tran_us,
                error_rate_pct: f64::NAN,
            },
            at_b: None,
            at_other: None,
        }),
        QuantumPhaseOutcome::Token(record) => {
            let (at_b, at_other) = run_token_transaction(&record, b, gamma_err)?;
            Ok(TrialOutcome {
                row: TimingRow {
                    trial,
                    b: b as u8,
                    z: record.bases.at(0) as u8,
                    dt_tran_us,
                    error_rate_pct: 100.0 * at_b.error_rate,
                },
                at_b: Some(at_b),
                at_other: Some(at_other),
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosscheckConfig {
    pub password_len: usize,
    /// Presentation window ΔT, nanoseconds.
    pub delta_t_ns: u64,
    /// Present the password at both sites (double-spend attempt).
    pub present_both: bool,
}

impl Default for CrosscheckConfig {
    fn default() -> Self {
        CrosscheckConfig {
            password_len: 128,
            delta_t_ns: 0,
            present_both: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CrosscheckOutcome {
    pub transcript: Vec<TranscriptEvent>,
    pub validated: [bool; 2],
    pub t_begin_ns: u64,
    pub t_end_ns: u64,
}

impl CrosscheckOutcome {
    pub fn dt_tran_ns(&self) -> u64 {
        self.t_end_ns - self.t_begin_ns
    }
}

#[derive(Debug)]
enum CEvent {
    Begin,
    PasswordAt(usize),
    Present,
    SendFlags,
    FlagAt(usize, bool),
    Validate,
}

fn bits_string(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Classical cross-checking scheme over the fibre channel.
pub fn run_crosscheck_protocol<R: Rng + ?Sized>(
    topology: &TimingTopology,
    b: bool,
    cfg: &CrosscheckConfig,
    rng: &mut R,
) -> Result<CrosscheckOutcome, ProtocolError> {
    if cfg.password_len == 0 {
        return Err(ProtocolError::EmptyToken);
    }
    topology.validate()?;
    let comm = topology.dt_comm_ns();
    let password: Vec<bool> = (0..cfg.password_len).map(|_| rng.random()).collect();
    let pw = bits_string(&password);
    let bi = b as usize;

    let mut q = EventQueue::new();
    let mut tr = Vec::new();
    let mut holds = [false; 2];
    let mut presented = [false; 2];
    let mut remote_flag: [Option<bool>; 2] = [None, None];
    let mut validated = [false; 2];
    let (mut t_begin, mut t_end) = (0, 0);

    tr.push(TranscriptEvent::new(
        "password_distributed",
        "B0/B1/A0",
        0,
        &pw,
    ));
    q.schedule(0, CEvent::Begin)?;
    while let Some((now, ev)) = q.pop() {
        match ev {
            CEvent::Begin => {
                t_begin = now;
                tr.push(TranscriptEvent::new(
                    "b_obtained",
                    "A0",
                    now,
                    if b { "1" } else { "0" },
                ));
                tr.push(TranscriptEvent::new("t_bit", "A0", now, ""));
                holds[0] = true;
                if cfg.present_both || b {
                    q.send(comm, CEvent::PasswordAt(1))?;
                }
                q.send(comm, CEvent::Present)?;
            }
            CEvent::PasswordAt(i) => {
                holds[i] = true;
                tr.push(TranscriptEvent::new(
                    "password_received",
                    &format!("A{i}"),
                    now,
                    &pw,
                ));
            }
            CEvent::Present => {
                for i in 0..2 {
                    if i == bi || cfg.present_both {
                        if !holds[i] {
                            return Err(NetsimError::Causality(format!(
                                "A{i} presents before receiving"
                            ))
                            .into());
                        }
                        presented[i] = true;
                        tr.push(TranscriptEvent::new("present", &format!("A{i}"), now, &pw));
                    }
                }
                q.send(cfg.delta_t_ns, CEvent::SendFlags)?;
            }
            CEvent::SendFlags => {
                for i in 0..2 {
                    tr.push(TranscriptEvent::new(
                        "send_r",
                        &format!("B{i}"),
                        now,
                        &(presented[i] as u8).to_string(),
                    ));
                    q.send(comm, CEvent::FlagAt(1 - i, presented[i]))?;
                }
                q.send(comm, CEvent::Validate)?;
            }
            CEvent::FlagAt(i, r) => {
                remote_flag[i] = Some(r);
                tr.push(TranscriptEvent::new(
                    "recv_r",
                    &format!("B{i}"),
                    now,
                    &(r as u8).to_string(),
                ));
            }
            CEvent::Validate => {
                t_end = now;
                for i in 0..2 {
                    let other = remote_flag[i].ok_or_else(|| {
                        NetsimError::Causality(format!("B{i} validates before r arrived"))
                    })?;
                    validated[i] = presented[i] && !other;
                    tr.push(TranscriptEvent::new(
                        "validate",
                        &format!("B{i}"),
                        now,
                        if validated[i] { "accept" } else { "reject" },
                    ));
                }
            }
        }
    }
    Ok(CrosscheckOutcome {
        transcript: tr,
        validated,
        t_begin_ns: t_begin,
        t_end_ns: t_end,
    })
}
