//! Forging strategies, Monte-Carlo forging experiments and exact coin-toss
//! oracles used to check the unforgeability bound empirically.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::measurement::Bases;
use crate::protocol::{validate, ProtocolError, TokenRecord};
use crate::quantum::{bb84_state, max_confidence, Bb84Label, DensityMatrix2, Mat2, QuantumError};
use crate::rng::stream;
use crate::security::pbound::{build_ensemble, Ensemble};
use crate::security::tails::binomial_cdf;
use crate::security::{epsilon_unf, BoundError, SchemeParams};
use crate::source::{sample_pulse, SourceError, SourceParams};

#[derive(Debug, Error)]
pub enum AdversaryError {
    #[error(transparent)]
    Bound(#[from] BoundError),
    #[error(transparent)]
    Quantum(#[from] QuantumError),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("invalid forging setup: {0}")]
    Invalid(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForgingStrategy {
    /// Per-pulse measurement built from the pair max-confidence operators.
    PerPulseMaxConfidence,
    /// Independent fair coins for both presented tokens.
    RandomGuess,
    /// Measure in a fixed basis, or a fresh random basis per pulse when
    /// `basis` is `None`, and present the outcome at both sites.
    MeasureOneBasis { basis: Option<bool> },
}

impl ForgingStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            ForgingStrategy::PerPulseMaxConfidence => "per_pulse_max_confidence",
            ForgingStrategy::RandomGuess => "random_guess",
            ForgingStrategy::MeasureOneBasis { .. } => "measure_one_basis",
        }
    }
}

/// Bits presented at `(L₀, L₁)` for pair guess `g`. Pair `g` covers
/// states `g` and `g + 1` (mod 4) indexed as `2t + u`.
pub fn pair_guess(g: usize) -> (bool, bool) {
    match g % 4 {
        0 => (false, false),
        1 => (true, false),
        2 => (true, true),
        _ => (false, true),
    }
}

/// A four-outcome POVM whose outcome `g` means "guess pair `g`".
#[derive(Clone, Debug, PartialEq)]
pub struct OptimalGuesser {
    pub effects: [Mat2; 4],
}

fn sigma_pairs(states: &[DensityMatrix2; 4], q: [f64; 4]) -> [Mat2; 4] {
    std::array::from_fn(|g| {
        let h = (g + 1) % 4;
        states[g].matrix().scale(q[g]) + states[h].matrix().scale(q[h])
    })
}

fn real_trace(m: &Mat2) -> f64 {
    m.trace().re
}

impl OptimalGuesser {
    /// Builds candidate measurements from the max-confidence operators and
    /// keeps the one with the highest exact pair-guess success.
    pub fn new(states: &[DensityMatrix2; 4], q: [f64; 4]) -> Result<Self, AdversaryError> {
        let ens = build_ensemble(states, q)?;
        let ops: Vec<Mat2> = (0..4)
            .map(|j| max_confidence(ens.priors[j], &ens.chis[j], &ens.rho).map(|m| m.operator))
            .collect::<Result<_, _>>()?;
        let sigmas = sigma_pairs(states, q);

        let mut candidates = vec![Self::completed(&ops)?];
        for op in &ops {
            let p = op.top_eigenprojector();
            let mut effects = [Mat2::ZERO; 4];
            for e in [p, Mat2::IDENTITY - p] {
                let best = (0..4)
                    .max_by(|&a, &b| {
                        real_trace(&(e * sigmas[a])).total_cmp(&real_trace(&(e * sigmas[b])))
                    })
                    .unwrap();
                effects[best] = effects[best] + e;
            }
            candidates.push(OptimalGuesser { effects });
        }
        let score = |c: &OptimalGuesser| c.success_from_sigmas(&sigmas);
        Ok(candidates
            .into_iter()
            .max_by(|a, b| score(a).total_cmp(&score(b)))
            .unwrap())
    }

    /// `E_j = c·Q_j + w_j (I − c·S)` with `S = Σ Q_j`, `c = 1/λ_max(S)` and
    /// weights proportional to `tr Q_j`.
    fn completed(ops: &[Mat2]) -> Result<Self, AdversaryError> {
        let s = ops.iter().fold(Mat2::ZERO, |acc, q| acc + *q);
        let (_, top) = s.hermitian_eigenvalues();
        if !(top > 0.0) {
            return Err(AdversaryError::Invalid(
                "max-confidence operators vanish".into(),
            ));
        }
        let c = 1.0 / top;
        let deficit = Mat2::IDENTITY - s.scale(c);
        let total: f64 = ops.iter().map(real_trace).sum();
        Ok(OptimalGuesser {
            effects: std::array::from_fn(|j| {
                ops[j].scale(c) + deficit.scale(real_trace(&ops[j]) / total)
            }),
        })
    }

    fn success_from_sigmas(&self, sigmas: &[Mat2; 4]) -> f64 {
        (0..4)
            .map(|g| real_trace(&(self.effects[g] * sigmas[g])))
            .sum()
    }

    /// Exact `Pr[true state ∈ pair(g)]` for states drawn with priors `q`.
    pub fn success_probability(&self, states: &[DensityMatrix2; 4], q: [f64; 4]) -> f64 {
        self.success_from_sigmas(&sigma_pairs(states, q))
    }

    /// Exact success of the same measurement discriminating `{r_g, χ_g}`.
    pub fn discrimination_success(&self, ens: &Ensemble) -> f64 {
        (0..4)
            .map(|g| ens.priors[g] * ens.chis[g].expectation(&self.effects[g]))
            .sum()
    }

    pub fn outcome_probabilities(&self, state: &DensityMatrix2) -> [f64; 4] {
        let mut p = self.effects.map(|e| state.expectation(&e).max(0.0));
        let total: f64 = p.iter().sum();
        p.iter_mut().for_each(|x| *x /= total);
        p
    }
}

/// Samples the guesser's outcome on `state`.
pub fn optimal_pulse_guess<R: Rng + ?Sized>(
    guesser: &OptimalGuesser,
    state: &DensityMatrix2,
    rng: &mut R,
) -> usize {
    let p = guesser.outcome_probabilities(state);
    let mut x: f64 = rng.random();
    for (g, pg) in p.iter().enumerate() {
        if x < *pg {
            return g;
        }
        x -= pg;
    }
    3
}

/// Preparation priors indexed as `2t + u`.
pub fn source_priors(source: &SourceParams) -> [f64; 4] {
    let (pt0, pu0) = (source.prob_t0(), source.prob_u0());
    std::array::from_fn(|i| {
        let l = Bb84Label::from_index(i);
        (if l.t { 1.0 - pt0 } else { pt0 }) * (if l.u { 1.0 - pu0 } else { pu0 })
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForgeConfig {
    pub n_pulses: usize,
    pub gamma_err: f64,
    pub source: SourceParams,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ForgeTrialResult {
    pub accepted_at_0: bool,
    pub accepted_at_1: bool,
    pub errors_0: usize,
    pub errors_1: usize,
    pub n_0: usize,
    pub n_1: usize,
}

impl ForgeTrialResult {
    pub fn forged(&self) -> bool {
        self.accepted_at_0 && self.accepted_at_1
    }
}

enum Prepared {
    Optimal(OptimalGuesser),
    Random,
    Measure(Option<bool>),
}

fn prepare(cfg: &ForgeConfig, strategy: ForgingStrategy) -> Result<Prepared, AdversaryError> {
    cfg.source.validate()?;
    if cfg.n_pulses == 0 {
        return Err(AdversaryError::Invalid("n_pulses must be positive".into()));
    }
    if !(0.0..=1.0).contains(&cfg.gamma_err) {
        return Err(AdversaryError::Invalid(format!(
            "gamma_err = {} outside [0, 1]",
            cfg.gamma_err
        )));
    }
    Ok(match strategy {
        ForgingStrategy::PerPulseMaxConfidence => {
            // The forger only knows the nominal states.
            let states = Bb84Label::all().map(bb84_state);
            Prepared::Optimal(OptimalGuesser::new(&states, source_priors(&cfg.source))?)
        }
        ForgingStrategy::RandomGuess => Prepared::Random,
        ForgingStrategy::MeasureOneBasis { basis } => Prepared::Measure(basis),
    })
}

fn run_trial<R: Rng + ?Sized>(
    cfg: &ForgeConfig,
    strategy: &Prepared,
    rng: &mut R,
) -> Result<ForgeTrialResult, AdversaryError> {
    let n = cfg.n_pulses;
    let (mut t, mut u) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut at0, mut at1) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let pulse = sample_pulse(&cfg.source, rng);
        let (a, b) = if pulse.is_multiphoton {
            // The extra photons reveal the bit.
            (pulse.label.t, pulse.label.t)
        } else {
            match strategy {
                Prepared::Optimal(g) => pair_guess(optimal_pulse_guess(g, &pulse.state, rng)),
                Prepared::Random => (rng.random(), rng.random()),
                Prepared::Measure(basis) => {
                    let z = basis.unwrap_or_else(|| rng.random());
                    let p1 = crate::quantum::measure_prob(&pulse.state, z, true);
                    let x = rng.random_bool(p1);
                    (x, x)
                }
            }
        };
        t.push(pulse.label.t);
        u.push(pulse.label.u);
        at0.push(a);
        at1.push(b);
    }
    // The forger claims every pulse was detected and uses c = 0, so L₀
    // checks u = 0 positions and L₁ checks u = 1 positions.
    let record = TokenRecord {
        t,
        u,
        bases: Bases::Single(false),
        x: at0.clone(),
        x_dummy: at1.clone(),
        lambda: (0..n).collect(),
    };
    let check = |presented: &[bool], d: bool| match validate(presented, &record, d, cfg.gamma_err) {
        Ok(v) => Ok((v.accepted, v.n_errors, v.n_i)),
        Err(ProtocolError::NoMatchedPositions) => Ok((false, 0, 0)),
        Err(e) => Err(e),
    };
    let (accepted_at_0, errors_0, n_0) = check(&at0, false)?;
    let (accepted_at_1, errors_1, n_1) = check(&at1, true)?;
    Ok(ForgeTrialResult {
        accepted_at_0,
        accepted_at_1,
        errors_0,
        errors_1,
        n_0,
        n_1,
    })
}

/// One forging attempt.
pub fn forge_trial<R: Rng + ?Sized>(
    cfg: &ForgeConfig,
    strategy: ForgingStrategy,
    rng: &mut R,
) -> Result<ForgeTrialResult, AdversaryError> {
    run_trial(cfg, &prepare(cfg, strategy)?, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ForgeEstimate {
    pub trials: u64,
    pub successes: u64,
    pub estimate: f64,
    /// Binomial standard error of the estimate.
    pub sigma: f64,
    /// 99% Wilson score interval.
    pub ci99: [f64; 2],
}

impl ForgeEstimate {
    pub fn from_counts(successes: u64, trials: u64) -> Self {
        let n = trials as f64;
        let p = successes as f64 / n;
        let z = Normal::standard().inverse_cdf(0.995);
        let denom = 1.0 + z * z / n;
        let centre = (p + z * z / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z * z / (4.0 * n * n)).sqrt() / denom;
        ForgeEstimate {
            trials,
            successes,
            estimate: p,
            sigma: (p * (1.0 - p) / n).sqrt(),
            ci99: [(centre - half).max(0.0), (centre + half).min(1.0)],
        }
    }
}

/// Runs `trials` independent forging attempts, trial `k` on stream `k` of `seed`.
pub fn monte_carlo_forge(
    cfg: &ForgeConfig,
    strategy: ForgingStrategy,
    trials: u64,
    seed: u64,
) -> Result<ForgeEstimate, AdversaryError> {
    if trials == 0 {
        return Err(AdversaryError::Invalid(
            "at least one trial required".into(),
        ));
    }
    let prepared = prepare(cfg, strategy)?;
    let successes = (0..trials)
        .into_par_iter()
        .map(|k| run_trial(cfg, &prepared, &mut stream(seed, k)).map(|r| r.forged() as u64))
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    Ok(ForgeEstimate::from_counts(successes, trials))
}

/// Scheme parameters matching a forging experiment in which every pulse is
/// claimed as detected. `nu_unf` must exceed the source's `P_noqub,θ`.
pub fn matching_scheme_params(cfg: &ForgeConfig, nu_unf: f64) -> SchemeParams {
    let n = cfg.n_pulses as u64;
    SchemeParams {
        n_pulses: n,
        n_kept: n,
        gamma_err: cfg.gamma_err,
        gamma_det: 1.0,
        nu_unf,
        p_noqub: cfg.source.p_noqub,
        p_theta: cfg.source.p_theta,
        theta: cfg.source.theta,
        beta_pb: cfg.source.beta_pb,
        beta_ps: cfg.source.beta_ps,
        ..SchemeParams::experiment()
    }
}

/// The unforgeability bound at the experiment's matching parameters.
pub fn theorem_bound(cfg: &ForgeConfig, p_bound: f64, nu_unf: f64) -> Result<f64, AdversaryError> {
    Ok(epsilon_unf(&matching_scheme_params(cfg, nu_unf), p_bound)?.total)
}

/// Exact forging probability of [`ForgingStrategy::RandomGuess`] against an
/// ideal source whose basis choice is 0 with probability `prob_u0`.
pub fn random_guess_forge_probability(n: u64, gamma_err: f64, prob_u0: f64) -> f64 {
    let accept = |m: u64| {
        if m == 0 {
            0.0
        } else {
            binomial_cdf(m, 0.5, (gamma_err * m as f64).floor() as u64)
        }
    };
    let ln_p = prob_u0.ln();
    let ln_q = (-prob_u0).ln_1p();
    (0..=n)
        .map(|n0| {
            let w = (statrs::function::factorial::ln_binomial(n, n0)
                + n0 as f64 * ln_p
                + (n - n0) as f64 * ln_q)
                .exp();
            w * accept(n0) * accept(n - n0)
        })
        .sum()
}

/// `Pr[at most n failures]` for independent coins with the given success
/// probabilities, by dynamic programming over the failure count.
pub fn coin_bound_oracle(n: usize, probs: &[f64]) -> f64 {
    let mut dist = vec![0.0f64; probs.len() + 1];
    dist[0] = 1.0;
    for (i, &p) in probs.iter().enumerate() {
        for f in (0..=i + 1).rev() {
            let stay = dist[f] * p;
            let fail = if f > 0 { dist[f - 1] * (1.0 - p) } else { 0.0 };
            dist[f] = stay + fail;
        }
    }
    dist.iter().take(n + 1).sum::<f64>().min(1.0)
}
