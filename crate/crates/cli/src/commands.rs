//! One function per subcommand. Each returns the tables of its report.

use std::path::PathBuf;

use stoken::adversary::{monte_carlo_forge, theorem_bound, AdversaryError, ForgeConfig};
use stoken::estimation::reference as est_ref;
use stoken::estimation::PipelineReport;
use stoken::netsim::{
    advantage, ca_threshold_distance, qa_threshold_length, simulate_transaction, TimingTopology,
    C_FIBRE, C_VAC,
};
use stoken::presets;
use stoken::protocol::simulate_token_trial;
use stoken::records::{
    parse_records, reference_counts_text, reference_optics_text, run_estimation, InputRecord,
    OpticalElement, ThetaSummary,
};
use stoken::rng::stream;
use stoken::security::{
    bound_report, multi_node, p_bound_ideal, p_bound_optimize, ConfidenceParams, PBoundOptions,
    SchemeParams,
};
use stoken::source::SourceParams;
use stoken::theta::{alpha_confidence, reference as theta_ref, DEFAULT_ALPHAS, DEFAULT_DELTA_RM};

use crate::config::{ResolvedScheme, RunConfig, TopologyPreset};
use crate::error::CliError;
use crate::golden::{self, tag, GOLDEN};
use crate::output::{Cell, Table};

/// Published confidence-adjusted values used as multi-node inputs.
pub const EPS_COR_PRIME_REF: f64 = 2.1e-11;
pub const EPS_UNF_PRIME_REF: f64 = 5.52e-9;
pub const DEFAULT_NODES: u32 = 7;

fn quantity_table(name: &str) -> Table {
    Table::new(name, &["quantity", "unit", "value", "golden_ref"])
}

fn push_q(t: &mut Table, quantity: &str, unit: &str, value: impl Into<Cell>, golden: Option<&str>) {
    t.push(vec![
        quantity.into(),
        unit.into(),
        value.into(),
        golden.map(tag).unwrap_or_default().into(),
    ]);
}

fn no_imperfections(theta: f64, beta_pb: f64, beta_ps: f64) -> bool {
    theta == 0.0 && beta_pb == 0.0 && beta_ps == 0.0
}

/// Pinned P_bound, or the optimizer's value at the given imperfections.
/// The golden id is set when the inputs are a reference case.
fn resolve_p_bound(
    pinned: Option<f64>,
    theta: f64,
    beta_pb: f64,
    beta_ps: f64,
    starts: Option<usize>,
    seed: u64,
) -> Result<(f64, Option<&'static str>), CliError> {
    if let Some(p) = pinned {
        return Ok((p, None));
    }
    if no_imperfections(theta, beta_pb, beta_ps) {
        return Ok((p_bound_ideal(), Some("p_bound.ideal")));
    }
    let d = PBoundOptions::default();
    let opts = PBoundOptions {
        starts: starts.unwrap_or(d.starts),
        seed,
        ..d
    };
    let r = p_bound_optimize(theta, beta_pb, beta_ps, &opts)?;
    let reference = theta == presets::THETA_DEG.to_radians()
        && beta_pb == presets::BETA_PB
        && beta_ps == presets::BETA_PS;
    Ok((r.value, reference.then_some("p_bound.experiment")))
}

struct Chain {
    eps_cor_prime: f64,
    eps_unf_prime: f64,
}

fn bound_chain(
    s: &ResolvedScheme,
    seed: u64,
    table: Option<&mut Table>,
) -> Result<Chain, CliError> {
    let p = &s.params;
    let (p_bound, p_tag) = resolve_p_bound(
        s.p_bound,
        p.theta,
        p.beta_pb,
        p.beta_ps,
        s.pbound_starts,
        seed,
    )?;
    let r = bound_report(p, p_bound, &s.confidence)?;
    if let Some(t) = table {
        let reference = *p == SchemeParams::experiment()
            && s.confidence == ConfidenceParams::default()
            && p_bound == presets::P_BOUND;
        let g = |id: &'static str| reference.then_some(id);
        push_q(t, "p_bound", "1", p_bound, p_tag);
        push_q(t, "p_bound_pinned", "bool", s.p_bound.is_some(), None);
        push_q(t, "p_noqub_theta", "1", r.p_noqub_theta, None);
        push_q(t, "eps_priv", "1", r.eps_priv.value, None);
        push_q(t, "eps_rob", "1", r.eps_rob.value, None);
        push_q(
            t,
            "eps_cor.term1",
            "1",
            r.eps_cor.term1.value,
            g("eps_cor.term1"),
        );
        push_q(
            t,
            "eps_cor.term2",
            "1",
            r.eps_cor.term2.value,
            g("eps_cor.term2"),
        );
        push_q(
            t,
            "eps_cor.total",
            "1",
            r.eps_cor.total.value,
            g("eps_cor.total"),
        );
        push_q(
            t,
            "eps_unf.term1",
            "1",
            r.eps_unf.term1.value,
            g("eps_unf.term1"),
        );
        push_q(
            t,
            "eps_unf.term2",
            "1",
            r.eps_unf.term2.value,
            g("eps_unf.term2"),
        );
        push_q(
            t,
            "eps_unf.total",
            "1",
            r.eps_unf.total.value,
            g("eps_unf.total"),
        );
        push_q(
            t,
            "eps_cor_prime",
            "1",
            r.eps_cor_prime.value,
            g("eps_cor_prime"),
        );
        push_q(
            t,
            "eps_unf_prime",
            "1",
            r.eps_unf_prime.value,
            g("eps_unf_prime"),
        );
    }
    Ok(Chain {
        eps_cor_prime: r.eps_cor_prime.value,
        eps_unf_prime: r.eps_unf_prime.value,
    })
}

fn push_multinode(
    t: &mut Table,
    m: u32,
    eps_priv: f64,
    eps_cor: f64,
    eps_unf: f64,
) -> Result<(), CliError> {
    let mn = multi_node(m, eps_priv, eps_cor, eps_unf)?;
    let reference =
        m == DEFAULT_NODES && eps_cor == EPS_COR_PRIME_REF && eps_unf == EPS_UNF_PRIME_REF;
    let g = |id: &'static str| reference.then_some(id);
    push_q(t, "multinode.m", "nodes", m, None);
    push_q(t, "multinode.eps_priv", "1", mn.eps_priv, None);
    push_q(
        t,
        "multinode.eps_cor",
        "1",
        mn.eps_cor,
        g("multinode.eps_cor"),
    );
    push_q(
        t,
        "multinode.forge_bound",
        "1",
        mn.forge_bound,
        g("multinode.forge_bound"),
    );
    Ok(())
}

pub fn bounds(cfg: &RunConfig, seed: u64) -> Result<Vec<Table>, CliError> {
    let s = cfg.scheme.resolve()?;
    let mut t = quantity_table("bound_report");
    let chain = bound_chain(&s, seed, Some(&mut t))?;
    if let Some(m) = s.multi_node_m {
        push_multinode(
            &mut t,
            m,
            s.params.beta_e,
            chain.eps_cor_prime,
            chain.eps_unf_prime,
        )?;
    }
    Ok(vec![t])
}

fn preset_name(t: &TimingTopology) -> Option<&'static str> {
    if *t == TimingTopology::jinan() {
        Some("jinan")
    } else if *t == TimingTopology::yiyuan_mazhan() {
        Some("yiyuan_mazhan")
    } else {
        None
    }
}

fn configured_topology(cfg: &RunConfig) -> Result<TimingTopology, CliError> {
    cfg.topology
        .as_ref()
        .map(|t| t.resolve())
        .transpose()
        .map(|t| t.unwrap_or_else(TimingTopology::jinan))
}

pub fn simulate(cfg: &RunConfig, seed: u64, trials: Option<usize>) -> Result<Vec<Table>, CliError> {
    let source = cfg.source.resolve()?;
    let policy = cfg.measurement.resolve()?;
    let s = cfg.scheme.resolve()?;
    let topology = configured_topology(cfg)?;
    let trials = trials.unwrap_or(s.simulate_trials);
    if trials == 0 {
        return Err(CliError::Config(
            "simulate: at least one trial required".into(),
        ));
    }
    let n = s.params.n_pulses as usize;

    let mut rows = Table::new(
        "transaction_table",
        &[
            "trial",
            "b",
            "z",
            "dt_tran_us",
            "error_rate_pct",
            "accepted_at_b",
            "accepted_at_other",
        ],
    );
    let (mut sum, mut max, mut accepted, mut completed) = (0.0, 0.0f64, 0usize, 0usize);
    for k in 0..trials {
        let mut rng = stream(seed, k as u64);
        let o = simulate_token_trial(
            k,
            n,
            &source,
            &policy,
            &topology,
            s.params.gamma_err,
            &mut rng,
        )
        .map_err(|e| CliError::Runtime(e.to_string()))?;
        let flag = |v: &Option<stoken::protocol::ValidationResult>| match v {
            Some(v) => Cell::Bool(v.accepted),
            None => Cell::Str("aborted".into()),
        };
        if let Some(v) = &o.at_b {
            completed += 1;
            accepted += v.accepted as usize;
            sum += o.row.error_rate_pct;
            max = max.max(o.row.error_rate_pct);
        }
        rows.push(vec![
            o.row.trial.into(),
            o.row.b.into(),
            o.row.z.into(),
            o.row.dt_tran_us.into(),
            o.row.error_rate_pct.into(),
            flag(&o.at_b),
            flag(&o.at_other),
        ]);
    }

    let mut summary = quantity_table("timing_report");
    let dt_tran = simulate_transaction(&topology)
        .map_err(|e| CliError::Config(e.to_string()))?
        .dt_tran_ns() as f64
        / 1e3;
    let dt_golden = preset_name(&topology).map(|p| {
        if p == "jinan" {
            "transaction.jinan.dt_tran"
        } else {
            "transaction.yiyuan_mazhan.dt_tran"
        }
    });
    push_q(&mut summary, "trials", "count", trials, None);
    push_q(&mut summary, "completed", "count", completed, None);
    push_q(&mut summary, "accepted_at_b", "count", accepted, None);
    push_q(
        &mut summary,
        "mean_error_rate",
        "pct",
        if completed > 0 {
            sum / completed as f64
        } else {
            f64::NAN
        },
        None,
    );
    push_q(
        &mut summary,
        "max_error_rate",
        "pct",
        if completed > 0 { max } else { f64::NAN },
        None,
    );
    push_q(&mut summary, "dt_tran", "us", dt_tran, dt_golden);
    Ok(vec![rows, summary])
}

fn read_records(paths: &[PathBuf]) -> Result<Vec<InputRecord>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Input("no estimation input files given".into()));
    }
    let mut all = Vec::new();
    for p in paths {
        let text = std::fs::read_to_string(p)
            .map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?;
        all.extend(
            parse_records(&text).map_err(|e| CliError::Input(format!("{}: {e}", p.display())))?,
        );
    }
    Ok(all)
}

fn push_counts(t: &mut Table, r: &PipelineReport, reference: bool) {
    let g = |id: &'static str| reference.then_some(id);
    push_q(t, "beta_pb.mean", "1", r.beta_pb.value, None);
    push_q(t, "beta_pb.sigma", "1", r.beta_pb.sigma, None);
    push_q(t, "beta_pb", "1", r.beta_pb.bound7, g("beta_pb"));
    push_q(t, "beta_ps.mean", "1", r.beta_ps.value, None);
    push_q(t, "beta_ps.sigma", "1", r.beta_ps.sigma, None);
    push_q(t, "beta_ps", "1", r.beta_ps.bound7, g("beta_ps"));
    const ROWS: [&str; 4] = ["00", "01", "10", "11"];
    const IDS: [[&str; 3]; 4] = [
        [
            "error_rate.00.mean",
            "error_rate.00.sigma",
            "error_rate.00.bound",
        ],
        [
            "error_rate.01.mean",
            "error_rate.01.sigma",
            "error_rate.01.bound",
        ],
        [
            "error_rate.10.mean",
            "error_rate.10.sigma",
            "error_rate.10.bound",
        ],
        [
            "error_rate.11.mean",
            "error_rate.11.sigma",
            "error_rate.11.bound",
        ],
    ];
    for ((label, ids), e) in ROWS.iter().zip(IDS).zip(&r.error_table.rows) {
        push_q(
            t,
            &format!("error_rate.{label}.mean"),
            "pct",
            100.0 * e.value,
            g(ids[0]),
        );
        push_q(
            t,
            &format!("error_rate.{label}.sigma"),
            "pct",
            100.0 * e.sigma,
            g(ids[1]),
        );
        push_q(
            t,
            &format!("error_rate.{label}.bound"),
            "pct",
            100.0 * e.bound7,
            g(ids[2]),
        );
    }
    push_q(t, "e_max", "1", r.error_table.e_max, g("e_max"));
    let d = &r.dark;
    for (name, id, e) in [
        ("dark.d_a0", "dark.d_a0", d.d_a0),
        ("dark.d_a1", "dark.d_a1", d.d_a1),
        ("dark.d_a", "dark.d_a", d.d_a),
        ("dark.d_b", "dark.d_b", d.d_b),
    ] {
        push_q(t, name, "per_pulse", e.value, g(id));
        push_q(t, &format!("{name}.sigma"), "per_pulse", e.sigma, None);
    }
    for (name, e) in [
        ("detection.p_a", r.detection.p_a),
        ("detection.p_b", r.detection.p_b),
        ("detection.p_c", r.detection.p_c),
    ] {
        push_q(t, name, "per_pulse", e.value, None);
        push_q(t, &format!("{name}.sigma"), "per_pulse", e.sigma, None);
    }
    let n = &r.noqub;
    push_q(t, "x_a", "1", n.x_a.value, None);
    push_q(t, "x_b", "1", n.x_b.value, None);
    push_q(t, "x_c", "1", n.x_c.value, None);
    push_q(t, "mu_u", "photons_per_pulse", n.mu_u.value, g("mu_u"));
    push_q(t, "mu_u.sigma", "photons_per_pulse", n.mu_u.sigma, None);
    push_q(t, "mu_u.bound", "photons_per_pulse", n.mu_u.bound7, None);
    push_q(t, "p_noqub_u", "1", n.p_noqub_u.value, None);
    push_q(t, "p_noqub_u.sigma", "1", n.p_noqub_u.sigma, None);
    push_q(t, "p_noqub_max", "1", n.p_noqub_max, g("p_noqub_max"));
    push_q(t, "eta_a_l", "1", r.eta_a_l.value, g("eta_a_l"));
    push_q(t, "eta_a_l.sigma", "1", r.eta_a_l.sigma, None);
    push_q(t, "eta_b_l", "1", r.eta_b_l.value, g("eta_b_l"));
    push_q(t, "eta_b_l.sigma", "1", r.eta_b_l.sigma, None);
    push_q(
        t,
        "mu_bound",
        "photons_per_pulse",
        r.mu_check.mu_bound,
        None,
    );
    push_q(t, "mu_assumption_holds", "bool", r.mu_check.holds, None);
}

fn push_theta(t: &mut Table, s: &ThetaSummary, reference: bool) {
    let g = |id: &'static str| reference.then_some(id);
    for (label, a) in ["0", "1", "plus", "minus"].iter().zip(s.alphas_deg) {
        push_q(t, &format!("theta.alpha.{label}"), "deg", a, None);
    }
    let o = &s.report.optics;
    push_q(
        t,
        "theta.delta_pbs",
        "deg",
        o.delta_pbs,
        g("theta.delta_pbs"),
    );
    push_q(t, "theta.beta_01", "deg", o.beta_01, g("theta.beta_01"));
    push_q(t, "theta.beta_pm", "deg", o.beta_pm, g("theta.beta_pm"));
    push_q(t, "theta.delta_rm", "deg", o.delta_rm, None);
    for (label, a) in ["0", "1", "plus", "minus"]
        .iter()
        .zip(s.report.theta_per_state)
    {
        push_q(t, &format!("theta.state.{label}"), "deg", a, None);
    }
    push_q(t, "theta", "deg", s.report.theta, g("theta"));
    push_q(t, "p_theta", "1", s.p_theta, None);
}

fn is_reference_counts(recs: &[InputRecord]) -> bool {
    recs.iter().all(|r| match r {
        InputRecord::Counts(c) => *c == est_ref::counts(),
        InputRecord::Dark(d) => *d == est_ref::dark(),
        InputRecord::Coincidence(c) => *c == est_ref::coincidence(),
        _ => true,
    })
}

fn is_reference_optics(recs: &[InputRecord]) -> bool {
    let [h0, h1] = theta_ref::hwp();
    recs.iter().all(|r| match r {
        InputRecord::Contrast {
            element,
            mean_c,
            sigma_c,
            n_samples,
        } => {
            let want = match element {
                OpticalElement::Pbs => theta_ref::pbs(),
                OpticalElement::Hwp01 => h0,
                OpticalElement::HwpPm => h1,
            };
            (want.mean_c, want.sigma_c, want.n_samples) == (*mean_c, *sigma_c, *n_samples)
        }
        InputRecord::Optics {
            alphas_deg,
            delta_rm_deg,
            ..
        } => *alphas_deg == DEFAULT_ALPHAS && *delta_rm_deg == DEFAULT_DELTA_RM,
        InputRecord::PulseContrasts { .. } => false,
        _ => true,
    })
}

pub fn estimate(cfg: &RunConfig, inputs: &[PathBuf]) -> Result<Vec<Table>, CliError> {
    let paths = if inputs.is_empty() {
        cfg.estimation_paths()
    } else {
        inputs.to_vec()
    };
    let recs = read_records(&paths)?;
    let report = run_estimation(&recs).map_err(|e| CliError::Input(e.to_string()))?;
    let mut t = quantity_table("estimation_report");
    if let Some(c) = &report.counts {
        push_counts(&mut t, c, is_reference_counts(&recs));
    }
    if let Some(th) = &report.theta {
        push_theta(&mut t, th, is_reference_optics(&recs));
    }
    Ok(vec![t])
}

pub const VERDICT_HOLDS: &str = "bound holds";
pub const VERDICT_VIOLATED: &str = "bound violated";

/// Unforgeability bound for a forging cell, capped at 1. When its
/// preconditions fail the trivial bound 1 is reported with the reason.
fn forge_bound(fc: &ForgeConfig, p_bound: f64, nu_unf: f64) -> Result<(f64, String), CliError> {
    match theorem_bound(fc, p_bound, nu_unf) {
        Ok(b) if b > 1.0 => Ok((1.0, "capped at 1".into())),
        Ok(b) => Ok((b, String::new())),
        Err(AdversaryError::Bound(e)) => Ok((1.0, format!("trivial: {e}"))),
        Err(e) => Err(e.into()),
    }
}

pub fn forge(cfg: &RunConfig, seed: u64, trials: Option<u64>) -> Result<Vec<Table>, CliError> {
    let adv = &cfg.adversary;
    let source: SourceParams = adv.source.resolve()?;
    let trials = trials.unwrap_or(adv.trials);
    let (p_bound, _) = resolve_p_bound(
        None,
        source.theta,
        source.beta_pb,
        source.beta_ps,
        None,
        seed,
    )?;
    let mut t = Table::new(
        "forge_report",
        &[
            "gamma_err",
            "strategy",
            "n_pulses",
            "trials",
            "successes",
            "estimate",
            "sigma",
            "ci99_low",
            "ci99_high",
            "bound",
            "bound_note",
            "verdict",
        ],
    );
    let mut cell = 0u64;
    for &gamma_err in &adv.gamma_errs {
        for strategy in &adv.strategies {
            let fc = ForgeConfig {
                n_pulses: adv.n_pulses,
                gamma_err,
                source: source.clone(),
            };
            let cell_seed = seed ^ cell.wrapping_mul(0x9e37_79b9_7f4a_7c15);
            cell += 1;
            let est = monte_carlo_forge(&fc, *strategy, trials, cell_seed)?;
            let (bound, note) = forge_bound(&fc, p_bound, adv.nu_unf)?;
            let verdict = if est.estimate + 3.0 * est.sigma <= bound {
                VERDICT_HOLDS
            } else {
                VERDICT_VIOLATED
            };
            t.push(vec![
                gamma_err.into(),
                strategy.name().into(),
                adv.n_pulses.into(),
                est.trials.into(),
                est.successes.into(),
                est.estimate.into(),
                est.sigma.into(),
                est.ci99[0].into(),
                est.ci99[1].into(),
                bound.into(),
                note.into(),
                verdict.into(),
            ]);
        }
    }
    Ok(vec![t])
}

fn advantage_row(t: &mut Table, name: &str, top: &TimingTopology) -> Result<(), CliError> {
    let a = advantage(top).map_err(|e| CliError::Config(e.to_string()))?;
    let golden = match preset_name(top) {
        Some("jinan") => tag("advantage.jinan.qa"),
        Some(_) => tag("advantage.yiyuan_mazhan.ca"),
        None => String::new(),
    };
    t.push(vec![
        name.into(),
        top.l_fibre.into(),
        top.d_direct.into(),
        (top.dt_proc * 1e6).into(),
        (a.dt_tran_ns as f64 / 1e3).into(),
        (a.dt_tran_c_ns as f64 / 1e3).into(),
        (a.dt_tran_cf_ns as f64 / 1e3).into(),
        a.qa_us().into(),
        a.ca_us().into(),
        qa_threshold_length(top.dt_proc, top.c_fibre).into(),
        ca_threshold_distance(top.dt_proc, top.c_fibre, top.c_vac).into(),
        golden.into(),
    ]);
    Ok(())
}

pub fn advantage_cmd(cfg: &RunConfig) -> Result<Vec<Table>, CliError> {
    let mut t = Table::new(
        "timing_report",
        &[
            "topology",
            "l_fibre_m",
            "d_direct_m",
            "dt_proc_us",
            "dt_tran_us",
            "dt_tran_c_us",
            "dt_tran_cf_us",
            "qa_us",
            "ca_us",
            "qa_threshold_length_m",
            "ca_threshold_distance_m",
            "golden_ref",
        ],
    );
    match &cfg.topology {
        Some(section) => {
            let top = section.resolve()?;
            let name = match (preset_name(&top), section.preset) {
                (Some(p), _) => p,
                (None, Some(_)) => "modified_preset",
                (None, None) => "custom",
            };
            advantage_row(&mut t, name, &top)?;
        }
        None => {
            for (p, top) in [
                (TopologyPreset::Jinan, TimingTopology::jinan()),
                (
                    TopologyPreset::YiyuanMazhan,
                    TimingTopology::yiyuan_mazhan(),
                ),
            ] {
                let name = if p == TopologyPreset::Jinan {
                    "jinan"
                } else {
                    "yiyuan_mazhan"
                };
                advantage_row(&mut t, name, &top)?;
            }
        }
    }
    Ok(vec![t])
}

/// Confidence-adjusted inputs come from the bound chain unless given.
pub fn multinode(
    cfg: &RunConfig,
    seed: u64,
    nodes: Option<u32>,
    eps_cor_prime: Option<f64>,
    eps_unf_prime: Option<f64>,
) -> Result<Vec<Table>, CliError> {
    let s = cfg.scheme.resolve()?;
    let m = nodes.or(s.multi_node_m).unwrap_or(DEFAULT_NODES);
    let (cor, unf) = match (eps_cor_prime, eps_unf_prime) {
        (Some(c), Some(u)) => (c, u),
        (c, u) => {
            let chain = bound_chain(&s, seed, None)?;
            (
                c.unwrap_or(chain.eps_cor_prime),
                u.unwrap_or(chain.eps_unf_prime),
            )
        }
    };
    for (name, v) in [("eps_cor_prime", cor), ("eps_unf_prime", unf)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(CliError::Config(format!("{name} = {v} outside [0, 1]")));
        }
    }
    let mut t = quantity_table("multinode_report");
    push_q(&mut t, "eps_cor_prime", "1", cor, None);
    push_q(&mut t, "eps_unf_prime", "1", unf, None);
    push_multinode(&mut t, m, s.params.beta_e, cor, unf)?;
    Ok(vec![t])
}

/// Recomputes every golden value from the reference inputs.
pub fn golden_values(seed: u64) -> Result<Vec<(&'static str, f64)>, CliError> {
    let mut out: Vec<(&'static str, f64)> = Vec::new();
    let exp = SchemeParams::experiment();
    let r = bound_report(&exp, presets::P_BOUND, &ConfidenceParams::default())?;
    out.extend([
        ("eps_cor.term1", r.eps_cor.term1.value),
        ("eps_cor.term2", r.eps_cor.term2.value),
        ("eps_cor.total", r.eps_cor.total.value),
        ("eps_unf.term1", r.eps_unf.term1.value),
        ("eps_unf.term2", r.eps_unf.term2.value),
        ("eps_unf.total", r.eps_unf.total.value),
        ("eps_cor_prime", r.eps_cor_prime.value),
        ("eps_unf_prime", r.eps_unf_prime.value),
    ]);
    let opts = PBoundOptions {
        seed,
        ..PBoundOptions::default()
    };
    out.push((
        "p_bound.experiment",
        p_bound_optimize(exp.theta, exp.beta_pb, exp.beta_ps, &opts)?.value,
    ));
    out.push((
        "p_bound.ideal",
        p_bound_optimize(0.0, 0.0, 0.0, &opts)?.value,
    ));

    let timing = |t: &TimingTopology| advantage(t).map_err(|e| CliError::Runtime(e.to_string()));
    let (jinan, inter) = (TimingTopology::jinan(), TimingTopology::yiyuan_mazhan());
    out.push(("advantage.jinan.qa", timing(&jinan)?.qa_us()));
    out.push(("advantage.yiyuan_mazhan.ca", timing(&inter)?.ca_us()));
    out.push((
        "threshold.qa_length",
        qa_threshold_length(1.5e-6, C_FIBRE) / 1e3,
    ));
    out.push((
        "threshold.ca_distance",
        ca_threshold_distance(1.5e-6, C_FIBRE, C_VAC) / 1e3,
    ));
    out.push((
        "transaction.jinan.dt_tran",
        timing(&jinan)?.dt_tran_ns as f64 / 1e3,
    ));
    out.push((
        "transaction.yiyuan_mazhan.dt_tran",
        timing(&inter)?.dt_tran_ns as f64 / 1e3,
    ));

    let input = |text: String| {
        parse_records(&text)
            .and_then(|r| run_estimation(&r))
            .map_err(|e| CliError::Runtime(e.to_string()))
    };
    let counts = input(reference_counts_text())?
        .counts
        .ok_or_else(|| CliError::Runtime("no count report".into()))?;
    const IDS: [[&str; 3]; 4] = [
        [
            "error_rate.00.mean",
            "error_rate.00.sigma",
            "error_rate.00.bound",
        ],
        [
            "error_rate.01.mean",
            "error_rate.01.sigma",
            "error_rate.01.bound",
        ],
        [
            "error_rate.10.mean",
            "error_rate.10.sigma",
            "error_rate.10.bound",
        ],
        [
            "error_rate.11.mean",
            "error_rate.11.sigma",
            "error_rate.11.bound",
        ],
    ];
    for (ids, e) in IDS.iter().zip(&counts.error_table.rows) {
        out.extend([
            (ids[0], 100.0 * e.value),
            (ids[1], 100.0 * e.sigma),
            (ids[2], 100.0 * e.bound7),
        ]);
    }
    out.extend([
        ("e_max", counts.error_table.e_max),
        ("beta_pb", counts.beta_pb.bound7),
        ("beta_ps", counts.beta_ps.bound7),
        ("dark.d_a0", counts.dark.d_a0.value),
        ("dark.d_a1", counts.dark.d_a1.value),
        ("dark.d_b", counts.dark.d_b.value),
        ("dark.d_a", counts.dark.d_a.value),
        ("mu_u", counts.noqub.mu_u.value),
        ("eta_a_l", counts.eta_a_l.value),
        ("eta_b_l", counts.eta_b_l.value),
        ("p_noqub_max", counts.noqub.p_noqub_max),
    ]);
    let th = input(reference_optics_text())?
        .theta
        .ok_or_else(|| CliError::Runtime("no angle report".into()))?;
    out.extend([
        ("theta.delta_pbs", th.report.optics.delta_pbs),
        ("theta.beta_01", th.report.optics.beta_01),
        ("theta.beta_pm", th.report.optics.beta_pm),
        ("theta", th.report.theta),
        ("alpha_confidence", alpha_confidence(1000, 0.027)),
    ]);
    let mn = multi_node(
        DEFAULT_NODES,
        presets::BETA_E,
        EPS_COR_PRIME_REF,
        EPS_UNF_PRIME_REF,
    )?;
    out.extend([
        ("multinode.eps_cor", mn.eps_cor),
        ("multinode.forge_bound", mn.forge_bound),
    ]);
    Ok(out)
}

/// The golden table and the number of rows out of tolerance.
pub fn check(seed: u64) -> Result<(Vec<Table>, usize), CliError> {
    let values = golden_values(seed)?;
    let mut t = Table::new(
        "golden_check",
        &["id", "unit", "expected", "computed", "tolerance", "status"],
    );
    let mut failures = 0;
    for g in GOLDEN {
        let computed = values
            .iter()
            .find(|(id, _)| *id == g.id)
            .map(|(_, v)| *v)
            .unwrap_or(f64::NAN);
        let ok = g.tolerance.accepts(computed, g.expected);
        failures += !ok as usize;
        t.push(vec![
            g.id.into(),
            g.unit.into(),
            g.expected.into(),
            computed.into(),
            g.tolerance.describe().into(),
            if ok { "pass" } else { "FAIL" }.into(),
        ]);
    }
    debug_assert!(values.iter().all(|(id, _)| golden::lookup(id).is_some()));
    Ok((vec![t], failures))
}
