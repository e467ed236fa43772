//! Pair-discrimination ensembles and the P_bound search.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::BoundError;
use crate::quantum::{
    bb84_state, deviate_on_cone, max_confidence_value, Bb84Label, DensityMatrix2,
};
use crate::rng::stream;

#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub priors: [f64; 4],
    pub chis: [DensityMatrix2; 4],
    pub rho: DensityMatrix2,
}

impl Ensemble {
    /// `P_MC(χ_j)` for each pair.
    pub fn max_confidences(&self) -> Result<[f64; 4], BoundError> {
        let mut out = [0.0; 4];
        for j in 0..4 {
            out[j] = max_confidence_value(self.priors[j], &self.chis[j], &self.rho)?;
        }
        Ok(out)
    }

    /// `2·max_j P_MC(χ_j)`.
    pub fn forging_bound(&self) -> Result<f64, BoundError> {
        Ok(2.0 * self.max_confidences()?.into_iter().fold(0.0, f64::max))
    }
}

/// Builds the pair ensemble from the four prepared states and their priors,
/// both indexed like [`Bb84Label::index`]. Pair `i` merges states `i` and
/// `i + 1` with the index wrapping after the last.
pub fn build_ensemble(states: &[DensityMatrix2; 4], q: [f64; 4]) -> Result<Ensemble, BoundError> {
    if q.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (q.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
        return Err(BoundError::Ensemble(format!(
            "priors {q:?} must be probabilities summing to 1"
        )));
    }
    let mut priors = [0.0; 4];
    let mut chis = [DensityMatrix2::maximally_mixed(); 4];
    for i in 0..4 {
        let next = (i + 1) % 4;
        let w = q[i] + q[next];
        if w <= 0.0 {
            return Err(BoundError::Ensemble(format!("pair {i} has zero weight")));
        }
        priors[i] = w / 2.0;
        chis[i] = DensityMatrix2::mixture(&[(q[i] / w, states[i]), (q[next] / w, states[next])])?;
    }
    let parts: Vec<_> = (0..4).map(|i| (priors[i], chis[i])).collect();
    let rho = DensityMatrix2::mixture(&parts)?;
    Ok(Ensemble { priors, chis, rho })
}

fn ideal_states() -> [DensityMatrix2; 4] {
    Bb84Label::all().map(bb84_state)
}

/// Bound for exact BB84 states with unbiased preparation.
pub fn p_bound_ideal() -> f64 {
    build_ensemble(&ideal_states(), [0.25; 4])
        .and_then(|e| e.forging_bound())
        .expect("ideal ensemble is well formed")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PBoundOptions {
    /// Random restarts per pair.
    pub starts: usize,
    pub seed: u64,
    /// Added to the best value found before the `< 1` check.
    pub margin: f64,
    pub max_iter: usize,
}

impl Default for PBoundOptions {
    fn default() -> Self {
        PBoundOptions {
            starts: 32,
            seed: 0x5eed,
            margin: 0.0,
            max_iter: 4000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PBoundResult {
    /// Best value plus margin.
    pub value: f64,
    pub raw: f64,
    /// Pair index achieving the maximum.
    pub pair: usize,
    /// Per state: (polar, azimuth) in radians.
    pub deviations: [(f64, f64); 4],
    /// Bias directions in [−1, 1] for basis and bit choice.
    pub bias_signs: (f64, f64),
}

const DIM: usize = 10;

struct Problem {
    theta: f64,
    beta_pb: f64,
    beta_ps: f64,
}

impl Problem {
    fn decode(&self, x: &[f64; DIM]) -> ([(f64, f64); 4], (f64, f64)) {
        let mut dev = [(0.0, 0.0); 4];
        for (i, d) in dev.iter_mut().enumerate() {
            *d = (self.theta * x[2 * i], 2.0 * PI * x[2 * i + 1]);
        }
        (dev, (2.0 * x[8] - 1.0, 2.0 * x[9] - 1.0))
    }

    fn ensemble(&self, x: &[f64; DIM]) -> Result<Ensemble, BoundError> {
        let (dev, (s_pb, s_ps)) = self.decode(x);
        let mut states = ideal_states();
        for (i, s) in states.iter_mut().enumerate() {
            if dev[i].0 > 0.0 {
                *s = deviate_on_cone(s, dev[i].0, dev[i].1)?;
            }
        }
        let pu0 = 0.5 + s_pb * self.beta_pb;
        let pt0 = 0.5 + s_ps * self.beta_ps;
        let q = Bb84Label::all().map(|l| {
            let pt = if l.t { 1.0 - pt0 } else { pt0 };
            let pu = if l.u { 1.0 - pu0 } else { pu0 };
            pt * pu
        });
        // Renormalise away rounding so the sum check is exact.
        let s: f64 = q.iter().sum();
        build_ensemble(&states, q.map(|v| v / s))
    }

    fn pair_value(&self, x: &[f64; DIM], pair: usize) -> f64 {
        self.ensemble(x)
            .and_then(|e| Ok(2.0 * max_confidence_value(e.priors[pair], &e.chis[pair], &e.rho)?))
            .unwrap_or(0.0)
    }
}

fn clamp_box(x: &mut [f64; DIM]) {
    for v in x.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
}

/// Nelder–Mead minimisation with projection onto the unit box.
fn nelder_mead(
    f: &impl Fn(&[f64; DIM]) -> f64,
    x0: [f64; DIM],
    step: f64,
    max_iter: usize,
) -> ([f64; DIM], f64) {
    let mut simplex: Vec<([f64; DIM], f64)> = Vec::with_capacity(DIM + 1);
    simplex.push((x0, f(&x0)));
    for i in 0..DIM {
        let mut x = x0;
        x[i] += if x[i] + step <= 1.0 { step } else { -step };
        clamp_box(&mut x);
        simplex.push((x, f(&x)));
    }
    let point = |c: &[f64; DIM], d: &[f64; DIM], t: f64| {
        let mut x = [0.0; DIM];
        for k in 0..DIM {
            x[k] = c[k] + t * (d[k] - c[k]);
        }
        clamp_box(&mut x);
        x
    };
    for _ in 0..max_iter {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if (simplex[DIM].1 - simplex[0].1).abs() < 1e-14 {
            break;
        }
        let mut c = [0.0; DIM];
        for (x, _) in &simplex[..DIM] {
            for k in 0..DIM {
                c[k] += x[k] / DIM as f64;
            }
        }
        let worst = simplex[DIM];
        let xr = point(&c, &worst.0, -1.0);
        let fr = f(&xr);
        if fr < simplex[0].1 {
            let xe = point(&c, &worst.0, -2.0);
            let fe = f(&xe);
            simplex[DIM] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[DIM - 1].1 {
            simplex[DIM] = (xr, fr);
        } else {
            let xc = if fr < worst.1 {
                point(&c, &xr, 0.5)
            } else {
                point(&c, &worst.0, 0.5)
            };
            let fc = f(&xc);
            if fc < worst.1.min(fr) {
                simplex[DIM] = (xc, fc);
            } else {
                let best = simplex[0].0;
                for s in simplex.iter_mut().skip(1) {
                    s.0 = point(&best, &s.0, 0.5);
                    s.1 = f(&s.0);
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex[0]
}

/// Coordinate descent with shrinking steps, used to polish a local optimum.
fn coordinate_descent(
    f: &impl Fn(&[f64; DIM]) -> f64,
    mut x: [f64; DIM],
    mut fx: f64,
) -> ([f64; DIM], f64) {
    let mut step = 0.05;
    while step > 1e-10 {
        let mut improved = false;
        for k in 0..DIM {
            for dir in [1.0, -1.0] {
                let mut y = x;
                y[k] = (y[k] + dir * step).clamp(0.0, 1.0);
                let fy = f(&y);
                if fy < fx {
                    x = y;
                    fx = fy;
                    improved = true;
                }
            }
        }
        if !improved {
            step /= 2.0;
        }
    }
    (x, fx)
}

/// Maximises `2·max_j P_MC(χ_j)` over states deviated within a cone of
/// half-angle `theta` and preparation biases bounded by `beta_pb`, `beta_ps`.
pub fn p_bound_optimize(
    theta: f64,
    beta_pb: f64,
    beta_ps: f64,
    opts: &PBoundOptions,
) -> Result<PBoundResult, BoundError> {
    if !(0.0..PI / 4.0).contains(&theta) {
        return Err(BoundError::Constraint(format!(
            "theta = {theta} outside [0, pi/4)"
        )));
    }
    for (name, b) in [("beta_PB", beta_pb), ("beta_PS", beta_ps)] {
        if !(0.0..0.5).contains(&b) {
            return Err(BoundError::Constraint(format!(
                "{name} = {b} outside [0, 1/2)"
            )));
        }
    }
    let problem = Problem {
        theta,
        beta_pb,
        beta_ps,
    };
    let jobs: Vec<(usize, usize)> = (0..4)
        .flat_map(|j| (0..opts.starts.max(1)).map(move |s| (j, s)))
        .collect();
    let best = jobs
        .into_par_iter()
        .map(|(pair, start)| {
            let f = |x: &[f64; DIM]| -problem.pair_value(x, pair);
            let mut x0 = [0.0; DIM];
            if start == 0 {
                // Full deviation, unbiased, as a deterministic anchor.
                x0 = [1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.5];
            } else {
                let mut rng = stream(opts.seed, (pair * opts.starts + start) as u64);
                for v in x0.iter_mut() {
                    *v = rng.random();
                }
            }
            let (x, fx) = nelder_mead(&f, x0, 0.2, opts.max_iter);
            let (x, fx) = coordinate_descent(&f, x, fx);
            (pair, x, -fx)
        })
        .reduce_with(|a, b| if b.2 > a.2 { b } else { a })
        .expect("at least one start");
    let (pair, x, raw) = best;
    let (deviations, bias_signs) = problem.decode(&x);
    let value = raw + opts.margin;
    if !(value < 1.0) {
        return Err(BoundError::PBoundNotBelowOne(value));
    }
    Ok(PBoundResult {
        value,
        raw,
        pair,
        deviations,
        bias_signs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::Mat2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_pure(rng: &mut impl Rng) -> DensityMatrix2 {
        let z: f64 = rng.random_range(-1.0..1.0);
        let phi: f64 = rng.random_range(0.0..2.0 * PI);
        let s = (1.0 - z * z).sqrt();
        let b = crate::quantum::BlochVector::new(s * phi.cos(), s * phi.sin(), z).unwrap();
        DensityMatrix2::from_bloch(b).unwrap()
    }

    #[test]
    fn ideal_uniform_ensemble() {
        let e = build_ensemble(&ideal_states(), [0.25; 4]).unwrap();
        assert!(e.rho.matrix().max_abs_diff(&Mat2::IDENTITY.scale(0.5)) < 1e-15);
        assert!(e.priors.iter().all(|&r| (r - 0.25).abs() < 1e-15));
        let s = ideal_states();
        let chi1 = (*s[0].matrix() + *s[1].matrix()).scale(0.5);
        assert!(e.chis[0].matrix().max_abs_diff(&chi1) < 1e-15);
    }

    #[test]
    fn mixture_identity_for_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for _ in 0..100 {
            let states = [0; 4].map(|_| random_pure(&mut rng));
            let mut q = [0.0; 4].map(|_: f64| rng.random_range(0.01..1.0));
            let s: f64 = q.iter().sum();
            q.iter_mut().for_each(|v| *v /= s);
            let e = build_ensemble(&states, q).unwrap();
            assert!((e.priors.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let direct =
                DensityMatrix2::mixture(&(0..4).map(|i| (q[i], states[i])).collect::<Vec<_>>())
                    .unwrap();
            assert!(e.rho.matrix().max_abs_diff(direct.matrix()) < 1e-12);
            let mcs = e.max_confidences().unwrap();
            for j in 0..4 {
                assert!(mcs[j] >= e.priors[j] - 1e-12 && mcs[j] <= 1.0 + 1e-12);
            }
        }
    }

    #[test]
    fn degenerate_priors_are_rejected() {
        assert!(build_ensemble(&ideal_states(), [0.5, 0.0, 0.5, 0.0]).is_ok());
        assert!(build_ensemble(&ideal_states(), [1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(build_ensemble(&ideal_states(), [0.0, 0.0, 0.5, 0.5]).is_err());
        assert!(build_ensemble(&ideal_states(), [0.3, 0.3, 0.3, 0.3]).is_err());
    }

    #[test]
    fn ideal_bound_closed_form() {
        let v = p_bound_ideal();
        assert!((v - (2.0 + 2f64.sqrt()) / 4.0).abs() < 1e-12);
        assert!(v < 1.0);
    }

    #[test]
    fn optimizer_recovers_ideal_case() {
        let r = p_bound_optimize(
            0.0,
            0.0,
            0.0,
            &PBoundOptions {
                starts: 4,
                ..Default::default()
            },
        )
        .unwrap();
        assert!((r.value - p_bound_ideal()).abs() < 1e-9);
    }

    #[test]
    fn optimizer_monotone_in_theta() {
        let opts = PBoundOptions {
            starts: 6,
            ..Default::default()
        };
        let vals: Vec<f64> = [0.0f64, 2.0, 4.0, 6.0]
            .iter()
            .map(|d| {
                p_bound_optimize(d.to_radians(), 0.0, 0.0, &opts)
                    .unwrap()
                    .value
            })
            .collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-9), "{vals:?}");
        assert!(vals[3] > vals[0]);
    }

    #[test]
    fn optimizer_rejects_out_of_range_inputs() {
        assert!(p_bound_optimize(PI / 4.0, 0.0, 0.0, &PBoundOptions::default()).is_err());
        assert!(p_bound_optimize(0.1, 0.5, 0.0, &PBoundOptions::default()).is_err());
    }

    #[test]
    fn margin_can_trip_the_precondition() {
        let opts = PBoundOptions {
            starts: 2,
            margin: 0.2,
            ..Default::default()
        };
        assert!(matches!(
            p_bound_optimize(0.0, 0.0, 0.0, &opts),
            Err(BoundError::PBoundNotBelowOne(_))
        ));
    }

    #[test]
    fn reported_optimum_is_reproducible_from_its_parameters() {
        let opts = PBoundOptions {
            starts: 4,
            ..Default::default()
        };
        let (theta, bpb, bps) = (3f64.to_radians(), 0.002, 0.001);
        let r = p_bound_optimize(theta, bpb, bps, &opts).unwrap();
        let mut states = ideal_states();
        for i in 0..4 {
            let (polar, az) = r.deviations[i];
            assert!(polar <= theta + 1e-15);
            if polar > 0.0 {
                states[i] = deviate_on_cone(&states[i], polar, az).unwrap();
            }
        }
        let (s_pb, s_ps) = r.bias_signs;
        let (pu0, pt0) = (0.5 + s_pb * bpb, 0.5 + s_ps * bps);
        let q = [
            pt0 * pu0,
            pt0 * (1.0 - pu0),
            (1.0 - pt0) * pu0,
            (1.0 - pt0) * (1.0 - pu0),
        ];
        let s: f64 = q.iter().sum();
        let e = build_ensemble(&states, q.map(|v| v / s)).unwrap();
        assert!((e.forging_bound().unwrap() - r.raw).abs() < 1e-12);
    }
}
