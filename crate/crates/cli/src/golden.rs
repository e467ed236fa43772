//! Reference values and their tolerances. Report rows that reproduce one of
//! these carry its id in the `golden_ref` column; `check` recomputes all of
//! them.

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Tolerance {
    Rel(f64),
    Abs(f64),
    /// Equal after rounding to this many significant figures.
    SigFigs(u32),
}

impl Tolerance {
    pub fn accepts(self, computed: f64, expected: f64) -> bool {
        if !computed.is_finite() {
            return false;
        }
        match self {
            Tolerance::Rel(r) => ((computed - expected) / expected).abs() <= r,
            Tolerance::Abs(a) => (computed - expected).abs() <= a,
            Tolerance::SigFigs(n) => {
                let rounded = round_sig(computed, n);
                (rounded - expected).abs() <= 1e-9 * expected.abs()
            }
        }
    }

    pub fn describe(self) -> String {
        match self {
            Tolerance::Rel(r) => format!("rel {r:e}"),
            Tolerance::Abs(a) => format!("abs {a:e}"),
            Tolerance::SigFigs(n) => format!("{n} sig. figs"),
        }
    }
}

pub fn round_sig(x: f64, n: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let e = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(n as i32 - 1 - e);
    (x * scale).round() / scale
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Golden {
    pub id: &'static str,
    pub expected: f64,
    pub tolerance: Tolerance,
    pub unit: &'static str,
}

const fn g(id: &'static str, expected: f64, tolerance: Tolerance, unit: &'static str) -> Golden {
    Golden {
        id,
        expected,
        tolerance,
        unit,
    }
}

use Tolerance::{Abs, Rel, SigFigs};

pub const GOLDEN: &[Golden] = &[
    g("eps_cor.term1", 2.05304e-15, Rel(1e-3), "1"),
    g("eps_cor.term2", 1.89154e-15, Rel(1e-3), "1"),
    g("eps_cor.total", 3.94458e-15, Rel(1e-3), "1"),
    g("eps_unf.term1", 3.72375e-10, Rel(1e-2), "1"),
    g("eps_unf.term2", 5.11874e-9, Rel(1e-2), "1"),
    g("eps_unf.total", 5.49112e-9, Rel(1e-2), "1"),
    g("eps_cor_prime", 2.1e-11, SigFigs(2), "1"),
    g("eps_unf_prime", 5.52e-9, SigFigs(3), "1"),
    g("p_bound.experiment", 0.884130, Abs(0.003), "1"),
    // cos²(π/8)
    g("p_bound.ideal", 0.853_553_390_593_273_8, Abs(1e-6), "1"),
    g("advantage.jinan.qa", 12.324, Abs(5e-4), "us"),
    g("advantage.yiyuan_mazhan.ca", 39.798, Abs(5e-4), "us"),
    g("threshold.qa_length", 0.3, SigFigs(2), "km"),
    g("threshold.ca_distance", 0.9, SigFigs(2), "km"),
    g("transaction.jinan.dt_tran", 15.336, Abs(5e-4), "us"),
    g("transaction.yiyuan_mazhan.dt_tran", 304.2, Abs(0.05), "us"),
    g("error_rate.00.mean", 5.9206911, Abs(5e-7), "pct"),
    g("error_rate.00.sigma", 0.0192155, Abs(5e-7), "pct"),
    g("error_rate.00.bound", 6.0551998, Abs(5e-7), "pct"),
    g("error_rate.01.mean", 6.1025469, Abs(5e-7), "pct"),
    g("error_rate.01.sigma", 0.0194938, Abs(5e-7), "pct"),
    g("error_rate.01.bound", 6.2390037, Abs(5e-7), "pct"),
    g("error_rate.10.mean", 6.0733498, Abs(5e-7), "pct"),
    g("error_rate.10.sigma", 0.0204919, Abs(5e-7), "pct"),
    g("error_rate.10.bound", 6.2167933, Abs(5e-7), "pct"),
    g("error_rate.11.mean", 6.1109707, Abs(5e-7), "pct"),
    g("error_rate.11.sigma", 0.0205627, Abs(5e-7), "pct"),
    g("error_rate.11.bound", 6.2549096, Abs(5e-7), "pct"),
    g("e_max", 0.062550, Abs(5e-7), "1"),
    g("beta_pb", 0.001360, Abs(5e-7), "1"),
    g("beta_ps", 0.001120, Abs(5e-7), "1"),
    g("dark.d_a0", 3.42134e-7, SigFigs(6), "1"),
    g("dark.d_a1", 3.51856e-7, SigFigs(6), "1"),
    g("dark.d_b", 4.50847e-7, SigFigs(6), "1"),
    g("dark.d_a", 6.9399e-7, SigFigs(6), "1"),
    g("mu_u", 8.30097e-5, SigFigs(6), "1"),
    g("eta_a_l", 0.865369, Abs(5e-7), "1"),
    g("eta_b_l", 0.828142, Abs(5e-7), "1"),
    g("p_noqub_max", 4.9e-5, Abs(1e-12), "1"),
    g("theta.delta_pbs", 0.296321, Abs(1e-4), "deg"),
    g("theta.beta_01", 0.609769, Abs(1e-4), "deg"),
    g("theta.beta_pm", 1.449428, Abs(1e-4), "deg"),
    g("theta", 5.115515, Abs(1e-4), "deg"),
    g("alpha_confidence", 1.2967e-12, Rel(1e-3), "1"),
    g("multinode.eps_cor", 1.5e-10, SigFigs(2), "1"),
    g("multinode.forge_bound", 4.5e-5, SigFigs(2), "1"),
];

pub fn lookup(id: &str) -> Option<&'static Golden> {
    GOLDEN.iter().find(|g| g.id == id)
}

/// `golden:<id>` for the report column; panics on unknown ids so typos
/// surface in tests.
pub fn tag(id: &str) -> String {
    assert!(lookup(id).is_some(), "unknown golden id {id}");
    format!("golden:{id}")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_unique() {
        let mut ids: Vec<_> = GOLDEN.iter().map(|g| g.id).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), GOLDEN.len());
    }

    #[test]
    fn sig_figs() {
        assert_eq!(round_sig(1.8199e-11, 2), 1.8e-11);
        assert!(SigFigs(2).accepts(2.08e-11, 2.1e-11));
        assert!(!SigFigs(2).accepts(1.82e-11, 2.1e-11));
        assert!(SigFigs(3).accepts(5.5201e-9, 5.52e-9));
        assert!(!Rel(1e-3).accepts(f64::NAN, 1.0));
    }

    #[test]
    fn ideal_p_bound_is_cos2_pi_8() {
        let c = (std::f64::consts::PI / 8.0).cos().powi(2);
        assert!((lookup("p_bound.ideal").unwrap().expected - c).abs() < 1e-15);
    }
}
