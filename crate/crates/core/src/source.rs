//! Statistical model of Bob's heralded source.
//!
//! Two separate models live here. [`SourceParams`] drives the qubit-level
//! token simulation: biased basis/bit choices, Bloch-cone misalignment and a
//! multiphoton fraction. [`PoissonSourceParams`] is the photon-pair model used
//! to synthesise detector count records for the estimation pipeline.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::quantum::{bb84_state, deviate_on_cone, Bb84Label, DensityMatrix2};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SourceError {
    #[error("{name} = {value} outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
}

fn check(name: &'static str, value: f64, ok: bool, range: &'static str) -> Result<(), SourceError> {
    if ok && value.is_finite() {
        Ok(())
    } else {
        Err(SourceError::OutOfRange { name, value, range })
    }
}

fn unit(name: &'static str, value: f64) -> Result<(), SourceError> {
    check(name, value, (0.0..=1.0).contains(&value), "[0, 1]")
}

fn bias(name: &'static str, value: f64) -> Result<(), SourceError> {
    check(name, value, (0.0..0.5).contains(&value), "[0, 1/2)")
}

/// Direction in which a configured bias pushes the probability of a 0.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasSign {
    #[default]
    Plus,
    Minus,
}

impl BiasSign {
    pub fn factor(self) -> f64 {
        match self {
            BiasSign::Plus => 1.0,
            BiasSign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceParams {
    /// Basis-choice bias: `|Pr[u = 0] − 1/2| ≤ beta_pb`.
    pub beta_pb: f64,
    /// Bit-choice bias: `|Pr[t = 0] − 1/2| ≤ beta_ps`.
    pub beta_ps: f64,
    /// Cone half-angle on the Bloch sphere, radians.
    pub theta: f64,
    /// Probability that a pulse deviates by more than `theta`.
    pub p_theta: f64,
    /// Probability that a heralded pulse is multiphoton.
    pub p_noqub: f64,
    /// Matched-basis error probabilities indexed like [`Bb84Label::index`].
    pub error_rates: [f64; 4],
    #[serde(default)]
    pub bias_sign_pb: BiasSign,
    #[serde(default)]
    pub bias_sign_ps: BiasSign,
}

impl SourceParams {
    pub fn ideal() -> Self {
        SourceParams {
            beta_pb: 0.0,
            beta_ps: 0.0,
            theta: 0.0,
            p_theta: 0.0,
            p_noqub: 0.0,
            error_rates: [0.0; 4],
            bias_sign_pb: BiasSign::Plus,
            bias_sign_ps: BiasSign::Plus,
        }
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        bias("beta_pb", self.beta_pb)?;
        bias("beta_ps", self.beta_ps)?;
        check(
            "theta",
            self.theta,
            (0.0..=PI / 2.0).contains(&self.theta),
            "[0, pi/2]",
        )?;
        unit("p_theta", self.p_theta)?;
        unit("p_noqub", self.p_noqub)?;
        for e in self.error_rates {
            check("error_rate", e, (0.0..1.0).contains(&e), "[0, 1)")?;
        }
        Ok(())
    }

    /// `E = max_tu E_tu`.
    pub fn max_error_rate(&self) -> f64 {
        self.error_rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn prob_u0(&self) -> f64 {
        0.5 + self.bias_sign_pb.factor() * self.beta_pb
    }

    pub fn prob_t0(&self) -> f64 {
        0.5 + self.bias_sign_ps.factor() * self.beta_ps
    }
}

/// One pulse as prepared by Bob.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PreparedPulse {
    pub label: Bb84Label,
    /// The qubit state actually emitted. Multiphoton pulses carry the ideal
    /// BB84 state here; downstream models decide how to treat them.
    pub state: DensityMatrix2,
    pub is_multiphoton: bool,
    pub deviation_angle: f64,
    /// Whether the deviation was drawn from the tail beyond `theta`.
    pub in_tail: bool,
}

/// Draws one prepared pulse.
///
/// Deviation model: with probability `1 − p_theta` the polar angle is uniform
/// on `[0, θ]`, otherwise uniform on `(θ, 2θ]`; the azimuth is always uniform.
pub fn sample_pulse<R: Rng + ?Sized>(params: &SourceParams, rng: &mut R) -> PreparedPulse {
    let u = !rng.random_bool(params.prob_u0());
    let t = !rng.random_bool(params.prob_t0());
    let label = Bb84Label::new(t, u);
    let ideal = bb84_state(label);
    if params.p_noqub > 0.0 && rng.random_bool(params.p_noqub) {
        return PreparedPulse {
            label,
            state: ideal,
            is_multiphoton: true,
            deviation_angle: 0.0,
            in_tail: false,
        };
    }
    let in_tail = params.p_theta > 0.0 && rng.random_bool(params.p_theta);
    let theta = params.theta;
    let polar = if in_tail {
        // (θ, 2θ]
        theta + theta * (1.0 - rng.random::<f64>())
    } else {
        theta * rng.random::<f64>()
    };
    let polar = polar.min(PI);
    if polar == 0.0 {
        return PreparedPulse {
            label,
            state: ideal,
            is_multiphoton: false,
            deviation_angle: 0.0,
            in_tail,
        };
    }
    let azimuth = rng.random_range(0.0..2.0 * PI);
    let state = deviate_on_cone(&ideal, polar, azimuth).expect("BB84 states are pure");
    PreparedPulse {
        label,
        state,
        is_multiphoton: false,
        deviation_angle: polar,
        in_tail,
    }
}

/// Poissonian photon-pair source with threshold detectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoissonSourceParams {
    /// Mean pair number per pulse.
    pub mu: f64,
    pub eta_a0: f64,
    pub eta_a1: f64,
    pub eta_b: f64,
    pub d_a0: f64,
    pub d_a1: f64,
    pub d_b: f64,
    /// Probability that Alice's photon is routed to her detector 0.
    pub q_split: f64,
    /// Pulse rate, Hz.
    pub f_sys: f64,
}

impl PoissonSourceParams {
    pub fn validate(&self) -> Result<(), SourceError> {
        check("mu", self.mu, self.mu > 0.0, "(0, inf)")?;
        for (name, v) in [
            ("eta_a0", self.eta_a0),
            ("eta_a1", self.eta_a1),
            ("eta_b", self.eta_b),
            ("d_a0", self.d_a0),
            ("d_a1", self.d_a1),
            ("d_b", self.d_b),
            ("q_split", self.q_split),
        ] {
            unit(name, v)?;
        }
        check("f_sys", self.f_sys, self.f_sys > 0.0, "(0, inf)")
    }

    /// Combined dark-count probability of Alice's two detectors.
    pub fn d_a(&self) -> f64 {
        1.0 - (1.0 - self.d_a0) * (1.0 - self.d_a1)
    }

    /// Closed-form herald probability `d_B + (1 − d_B)(1 − e^{−μη_B})`.
    pub fn herald_probability(&self) -> f64 {
        self.d_b + (1.0 - self.d_b) * (-(-self.mu * self.eta_b).exp_m1())
    }

    /// Probability that a heralded pulse contains two or more pairs.
    pub fn multiphoton_given_herald(&self) -> f64 {
        let mu = self.mu;
        let db = self.d_b;
        1.0 - (-mu).exp() * (db * (1.0 + mu) + (1.0 - db) * mu * self.eta_b)
            / self.herald_probability()
    }
}

/// Detector response to one pulse.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct DetectionEvent {
    pub pairs: u64,
    pub heralded: bool,
    pub alice_click0: bool,
    pub alice_click1: bool,
}

impl DetectionEvent {
    pub fn alice_click(&self) -> bool {
        self.alice_click0 || self.alice_click1
    }
}

fn respond<R: Rng + ?Sized>(
    params: &PoissonSourceParams,
    pairs: u64,
    rng: &mut R,
) -> DetectionEvent {
    let mut heralded = rng.random_bool(params.d_b);
    let mut click0 = rng.random_bool(params.d_a0);
    let mut click1 = rng.random_bool(params.d_a1);
    for _ in 0..pairs {
        heralded |= rng.random_bool(params.eta_b);
        if rng.random_bool(params.q_split) {
            click0 |= rng.random_bool(params.eta_a0);
        } else {
            click1 |= rng.random_bool(params.eta_a1);
        }
    }
    DetectionEvent {
        pairs,
        heralded,
        alice_click0: click0,
        alice_click1: click1,
    }
}

pub fn sample_detection_event<R: Rng + ?Sized>(
    params: &PoissonSourceParams,
    rng: &mut R,
) -> DetectionEvent {
    let pairs = Poisson::new(params.mu).expect("mu > 0").sample(rng) as u64;
    respond(params, pairs, rng)
}

/// Aggregate counts over many pulses, in the shape of a coincidence record.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SimulatedCounts {
    pub pulses: u64,
    pub n_a: u64,
    pub n_b: u64,
    pub n_c: u64,
    /// Heralded pulses that carried two or more pairs.
    pub n_b_multiphoton: u64,
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> u64 {
    if n == 0 || p <= 0.0 {
        return 0;
    }
    Binomial::new(n, p.min(1.0))
        .expect("valid binomial")
        .sample(rng)
}

/// Pair number conditioned on being at least one, by inversion.
fn sample_nonzero_pairs<R: Rng + ?Sized>(mu: f64, rng: &mut R) -> u64 {
    let norm = -(-mu).exp_m1();
    let target = rng.random::<f64>() * norm;
    let mut k = 1u64;
    let mut pmf = mu * (-mu).exp();
    let mut cdf = pmf;
    while cdf < target && k < 1000 {
        k += 1;
        pmf *= mu / k as f64;
        cdf += pmf;
    }
    k
}

/// Simulates `pulses` pulses and returns aggregate counts.
///
/// Distributionally identical to calling [`sample_detection_event`] for every
/// pulse, but pulses with no pairs are handled in bulk with binomial draws.
pub fn simulate_counts<R: Rng + ?Sized>(
    params: &PoissonSourceParams,
    pulses: u64,
    rng: &mut R,
) -> SimulatedCounts {
    let with_pairs = binomial(pulses, -(-params.mu).exp_m1(), rng);
    let empty = pulses - with_pairs;
    let d_a = params.d_a();

    let dark_heralds = binomial(empty, params.d_b, rng);
    let dark_coinc = binomial(dark_heralds, d_a, rng);
    let dark_alice_only = binomial(empty - dark_heralds, d_a, rng);
    let mut counts = SimulatedCounts {
        pulses,
        n_a: dark_coinc + dark_alice_only,
        n_b: dark_heralds,
        n_c: dark_coinc,
        n_b_multiphoton: 0,
    };
    for _ in 0..with_pairs {
        let pairs = sample_nonzero_pairs(params.mu, rng);
        let ev = respond(params, pairs, rng);
        counts.n_a += ev.alice_click() as u64;
        counts.n_b += ev.heralded as u64;
        counts.n_c += (ev.heralded && ev.alice_click()) as u64;
        counts.n_b_multiphoton += (ev.heralded && pairs >= 2) as u64;
    }
    counts
}
