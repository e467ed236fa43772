use rand_distr::{Binomial, Distribution};
use stoken::estimation::{
    derive_noqub_bound, estimate_dark, estimate_detection, CoincidenceRecord, DarkRecord,
};
use stoken::rng::stream;
use stoken::source::{simulate_counts, PoissonSourceParams};

const PULSES: u64 = 100_000_000;
const REPS: u64 = 50;

fn params() -> PoissonSourceParams {
    PoissonSourceParams {
        mu: 8e-5,
        eta_a0: 0.87,
        eta_a1: 0.86,
        eta_b: 0.83,
        d_a0: 3.42e-7,
        d_a1: 3.52e-7,
        d_b: 4.51e-7,
        q_split: 0.5,
        f_sys: 5e5,
    }
}

#[test]
fn pipeline_recovers_conservative_bounds_from_simulated_counts() {
    let p = params();
    p.validate().unwrap();
    let truth = p.multiphoton_given_herald();
    let t_exp = PULSES as f64 / p.f_sys;
    let t_d = 75_906.0;
    let dark_trials = (t_d * p.f_sys) as u64;

    let mut mu_ok = 0;
    let mut noqub_ok = 0;
    for rep in 0..REPS {
        let mut rng = stream(0x7a11, rep);
        let c = simulate_counts(&p, PULSES, &mut rng);
        let mut dark = |d: f64| Binomial::new(dark_trials, d).unwrap().sample(&mut rng);
        let dark_rec = DarkRecord {
            t_d,
            n_db: dark(p.d_b),
            n_da0: dark(p.d_a0),
            n_da1: dark(p.d_a1),
        };
        let coinc = CoincidenceRecord {
            n_a: c.n_a,
            n_b: c.n_b,
            n_c: c.n_c,
        };

        let d = estimate_dark(&dark_rec, p.f_sys).unwrap();
        let det = estimate_detection(&coinc, t_exp, p.f_sys).unwrap();
        let r = derive_noqub_bound(&d, &det).unwrap();
        if r.mu_u.value >= p.mu {
            mu_ok += 1;
        }
        if r.p_noqub_u.bound7 >= truth {
            noqub_ok += 1;
        }
        println!(
            "rep {rep}: mu_u/mu = {:.4}, bound/true = {:.4}",
            r.mu_u.value / p.mu,
            r.p_noqub_u.bound7 / truth
        );
    }
    println!("mu_u >= mu in {mu_ok}/{REPS}; P_noqub bound >= truth in {noqub_ok}/{REPS}");
    assert!(
        mu_ok * 100 >= 99 * REPS,
        "mu_u >= mu only in {mu_ok}/{REPS}"
    );
    assert!(
        noqub_ok * 100 >= 99 * REPS,
        "P_noqub bound holds only in {noqub_ok}/{REPS}"
    );
}
