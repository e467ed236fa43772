//! Binomial tails and Chernoff bounds in the log domain.

use statrs::function::factorial::ln_binomial;

use super::BoundError;

/// `ln Σ exp(terms)`.
fn log_sum_exp(terms: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// `ln Pr[Bin(n, p) ≤ k]`.
pub fn ln_binomial_cdf(n: u64, p: f64, k: u64) -> f64 {
    if k >= n {
        return 0.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let (lp, lq) = (p.ln(), (-p).ln_1p());
    log_sum_exp((0..=k).map(move |l| ln_binomial(n, l) + l as f64 * lp + (n - l) as f64 * lq))
}

/// `Pr[Bin(n, p) ≤ k]`.
pub fn binomial_cdf(n: u64, p: f64, k: u64) -> f64 {
    ln_binomial_cdf(n, p, k).exp()
}

/// `N·[t ln(p/t) + (1−t) ln((1−p)/(1−t))]`, the log of both Chernoff forms.
fn ln_chernoff(n: f64, p: f64, t: f64) -> f64 {
    let a = if t == 0.0 { 0.0 } else { t * (p / t).ln() };
    let b = if t == 1.0 {
        0.0
    } else {
        (1.0 - t) * ((1.0 - p) / (1.0 - t)).ln()
    };
    n * (a + b)
}

/// Upper bound on `Pr[X ≤ tN]` for `X ~ Bin(N, p)`, requiring `0 < t < p ≤ 1`.
/// `N` may be fractional where a bound is applied to a scaled count.
pub fn chernoff_low(n: f64, p: f64, t: f64) -> Result<f64, BoundError> {
    if !(t > 0.0) {
        return Err(BoundError::Constraint(format!("threshold {t} must be > 0")));
    }
    if !(t < p) {
        return Err(BoundError::Constraint(format!(
            "threshold {t} must be < p = {p}"
        )));
    }
    if !(p <= 1.0) {
        return Err(BoundError::Constraint(format!("p = {p} must be ≤ 1")));
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    Ok(ln_chernoff(n, p, t).exp())
}

/// Upper bound on `Pr[X ≥ tN]` for `X ~ Bin(N, p)`, requiring `0 < p < t < 1`.
pub fn chernoff_high(n: f64, p: f64, t: f64) -> Result<f64, BoundError> {
    if !(p > 0.0) {
        return Err(BoundError::Constraint(format!("p = {p} must be > 0")));
    }
    if !(p < t) {
        return Err(BoundError::Constraint(format!(
            "threshold {t} must exceed p = {p}"
        )));
    }
    if !(t < 1.0) {
        return Err(BoundError::Constraint(format!("threshold {t} must be < 1")));
    }
    Ok(ln_chernoff(n, p, t).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use num_rational::BigRational;
    use num_traits::{One, ToPrimitive, Zero};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exact `Pr[Bin(n, p) ≤ k]` with `p` taken as the exact rational of the f64.
    fn exact_cdf(n: u64, p: f64, k: u64) -> f64 {
        let p = BigRational::from_float(p).unwrap();
        let q = BigRational::one() - &p;
        let mut total = BigRational::zero();
        let mut binom = BigInt::one();
        for l in 0..=k.min(n) {
            if l > 0 {
                binom = binom * BigInt::from(n - l + 1) / BigInt::from(l);
            }
            let term = BigRational::from_integer(binom.clone())
                * num_traits::pow(p.clone(), l as usize)
                * num_traits::pow(q.clone(), (n - l) as usize);
            total += term;
        }
        total.to_f64().unwrap()
    }

    #[test]
    fn chernoff_low_examples() {
        assert_eq!(chernoff_low(50.0, 1.0, 0.3).unwrap(), 0.0);
        let v = chernoff_low(1.0, 0.5, 0.25).unwrap();
        let expected = 2f64.powf(0.25) * (0.5f64 / 0.75).powf(0.75);
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.8774).abs() < 1e-4);
        assert!(v >= 0.5);
    }

    #[test]
    fn chernoff_preconditions() {
        assert!(chernoff_low(10.0, 0.5, 0.6).is_err());
        assert!(chernoff_low(10.0, 0.5, 0.0).is_err());
        assert!(chernoff_high(10.0, 0.5, 0.4).is_err());
        assert!(chernoff_high(10.0, 0.5, 1.0).is_err());
        let msg = chernoff_low(10.0, 0.5, 0.6).unwrap_err().to_string();
        assert!(msg.contains("< p"), "{msg}");
    }

    #[test]
    fn chernoff_forms_dominate_exact_cdfs() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..200 {
            let n: u64 = rng.random_range(1..=50);
            let p: f64 = rng.random_range(0.02..0.98);
            let lo: f64 = rng.random_range(0.001..p);
            let bound = chernoff_low(n as f64, p, lo).unwrap();
            let k = (lo * n as f64).floor() as u64;
            assert!(
                bound >= exact_cdf(n, p, k) * (1.0 - 1e-12),
                "low n={n} p={p} t={lo}"
            );

            let hi: f64 = rng.random_range(p..0.999);
            if hi <= p {
                continue;
            }
            let bound = chernoff_high(n as f64, p, hi).unwrap();
            let k = (hi * n as f64).ceil() as u64;
            let upper_tail = if k == 0 {
                1.0
            } else {
                1.0 - exact_cdf(n, p, k - 1)
            };
            assert!(
                bound >= upper_tail * (1.0 - 1e-12) - 1e-15,
                "high n={n} p={p} t={hi}"
            );
        }
    }

    #[test]
    fn log_domain_tail_matches_exact_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        for _ in 0..300 {
            let n: u64 = rng.random_range(1..=60);
            let p: f64 = rng.random_range(0.001..0.999);
            let k: u64 = rng.random_range(0..=n);
            let exact = exact_cdf(n, p, k);
            let ours = binomial_cdf(n, p, k);
            assert!(
                (ours - exact).abs() <= 1e-10 * exact,
                "n={n} p={p} k={k}: {ours} vs {exact}"
            );
        }
    }

    #[test]
    fn tail_edge_cases() {
        assert_eq!(binomial_cdf(10, 0.0, 0), 1.0);
        assert_eq!(binomial_cdf(10, 1.0, 9), 0.0);
        assert_eq!(binomial_cdf(10, 1.0, 10), 1.0);
        assert_eq!(binomial_cdf(10, 0.3, 12), 1.0);
    }

    #[test]
    fn deep_tails_do_not_underflow() {
        // Pr[Bin(10048, 0.5) ≤ 100] is around 1e-2800; its log must stay finite.
        let l = ln_binomial_cdf(10048, 0.5, 100);
        assert!(l.is_finite() && l < -6000.0);
    }

    proptest! {
        #[test]
        fn cdf_is_monotone_in_k(n in 1u64..200, p in 0.01f64..0.99, k in 0u64..199) {
            let k = k.min(n - 1);
            prop_assert!(binomial_cdf(n, p, k) <= binomial_cdf(n, p, k + 1) * (1.0 + 1e-12));
        }

        #[test]
        fn chernoff_decreases_with_n(n in 1.0f64..1e4, p in 0.05f64..0.95, frac in 0.05f64..0.95) {
            let t = p * frac;
            prop_assert!(chernoff_low(2.0 * n, p, t).unwrap() <= chernoff_low(n, p, t).unwrap());
        }
    }
}
