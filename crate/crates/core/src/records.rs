//! Line-oriented input records for the estimation chains. Each non-blank
//! line is one JSON object tagged by `record`; lines starting with `#` are
//! comments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::estimation::{
    run_pipeline, CoincidenceRecord, CountRecord, DarkRecord, EstimationError, PipelineReport,
};
use crate::theta::{
    alpha_from_contrasts, compose_theta, ContrastStats, ThetaError, ThetaReport, DEFAULT_ALPHAS,
    DEFAULT_DELTA_RM, DEFAULT_P_THETA,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecordError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("input contains no records")]
    Empty,
    #[error("duplicate {0} record")]
    Duplicate(&'static str),
    #[error("incomplete input: {0}")]
    Incomplete(String),
    #[error(transparent)]
    Estimation(#[from] EstimationError),
    #[error(transparent)]
    Theta(#[from] ThetaError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OpticalElement {
    Pbs,
    /// Half-wave plate at its 0° setting.
    Hwp01,
    /// Half-wave plate at its 22.5° setting.
    HwpPm,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum InputRecord {
    Counts(CountRecord),
    Dark(DarkRecord),
    Coincidence(CoincidenceRecord),
    Contrast {
        element: OpticalElement,
        mean_c: f64,
        sigma_c: f64,
        n_samples: u64,
    },
    /// Preparation angles for states 0, 1, +, − and the rotation-mount error.
    Optics {
        alphas_deg: [f64; 4],
        #[serde(default = "default_delta_rm")]
        delta_rm_deg: f64,
        #[serde(default = "default_p_theta")]
        p_theta: f64,
    },
    /// Per-pulse contrasts for one state; replaces that state's angle.
    PulseContrasts {
        state: usize,
        contrasts: Vec<f64>,
    },
}

fn default_delta_rm() -> f64 {
    DEFAULT_DELTA_RM
}
fn default_p_theta() -> f64 {
    DEFAULT_P_THETA
}

pub fn parse_records(text: &str) -> Result<Vec<InputRecord>, RecordError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let rec = serde_json::from_str(line).map_err(|e| RecordError::Parse {
            line: i + 1,
            message: e.to_string(),
        })?;
        out.push(rec);
    }
    if out.is_empty() {
        return Err(RecordError::Empty);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThetaSummary {
    pub alphas_deg: [f64; 4],
    pub report: ThetaReport,
    pub p_theta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EstimationReport {
    pub counts: Option<PipelineReport>,
    pub theta: Option<ThetaSummary>,
}

fn set_once<T>(slot: &mut Option<T>, v: T, name: &'static str) -> Result<(), RecordError> {
    if slot.replace(v).is_some() {
        return Err(RecordError::Duplicate(name));
    }
    Ok(())
}

/// Runs whichever chains the records support. Count, dark and coincidence
/// records go together; the angle chain needs all three contrast records.
pub fn run_estimation(records: &[InputRecord]) -> Result<EstimationReport, RecordError> {
    let (mut counts, mut dark, mut coinc) = (None, None, None);
    let (mut pbs, mut hwp01, mut hwppm, mut optics) = (None, None, None, None);
    let mut pulse: [Option<f64>; 4] = [None; 4];
    for r in records {
        match r {
            InputRecord::Counts(c) => set_once(&mut counts, c.clone(), "counts")?,
            InputRecord::Dark(d) => set_once(&mut dark, d.clone(), "dark")?,
            InputRecord::Coincidence(c) => set_once(&mut coinc, c.clone(), "coincidence")?,
            InputRecord::Contrast {
                element,
                mean_c,
                sigma_c,
                n_samples,
            } => {
                let stats = ContrastStats::new(*mean_c, *sigma_c, *n_samples)?;
                match element {
                    OpticalElement::Pbs => set_once(&mut pbs, stats, "pbs contrast")?,
                    OpticalElement::Hwp01 => set_once(&mut hwp01, stats, "hwp_01 contrast")?,
                    OpticalElement::HwpPm => set_once(&mut hwppm, stats, "hwp_pm contrast")?,
                }
            }
            InputRecord::Optics {
                alphas_deg,
                delta_rm_deg,
                p_theta,
            } => set_once(
                &mut optics,
                (*alphas_deg, *delta_rm_deg, *p_theta),
                "optics",
            )?,
            InputRecord::PulseContrasts { state, contrasts } => {
                if *state > 3 {
                    return Err(RecordError::Incomplete(format!(
                        "pulse_contrasts state {state} outside 0..=3"
                    )));
                }
                set_once(
                    &mut pulse[*state],
                    alpha_from_contrasts(contrasts)?,
                    "pulse_contrasts",
                )?;
            }
        }
    }

    let counts_report = match (counts, dark, coinc) {
        (Some(c), Some(d), Some(k)) => Some(run_pipeline(&c, &d, &k)?),
        (None, None, None) => None,
        _ => {
            return Err(RecordError::Incomplete(
                "counts, dark and coincidence records must appear together".into(),
            ))
        }
    };

    let any_optics = pbs.is_some()
        || hwp01.is_some()
        || hwppm.is_some()
        || optics.is_some()
        || pulse.iter().any(Option::is_some);
    let theta = match (pbs, hwp01, hwppm) {
        (Some(pbs), Some(h0), Some(h1)) => {
            let (mut alphas, delta_rm, p_theta) =
                optics.unwrap_or((DEFAULT_ALPHAS, DEFAULT_DELTA_RM, DEFAULT_P_THETA));
            for (a, p) in alphas.iter_mut().zip(pulse) {
                if let Some(p) = p {
                    *a = p;
                }
            }
            Some(ThetaSummary {
                alphas_deg: alphas,
                report: compose_theta(alphas, [h0, h1], pbs, delta_rm)?,
                p_theta,
            })
        }
        _ if any_optics => {
            return Err(RecordError::Incomplete(
                "pbs, hwp_01 and hwp_pm contrast records are all required".into(),
            ))
        }
        _ => None,
    };
    Ok(EstimationReport {
        counts: counts_report,
        theta,
    })
}

/// The reference inputs in record form.
pub fn reference_counts_text() -> String {
    use crate::estimation::reference;
    [
        InputRecord::Counts(reference::counts()),
        InputRecord::Dark(reference::dark()),
        InputRecord::Coincidence(reference::coincidence()),
    ]
    .iter()
    .map(|r| serde_json::to_string(r).expect("records serialize"))
    .collect::<Vec<_>>()
    .join("\n")
}

pub fn reference_optics_text() -> String {
    use crate::theta::reference;
    let contrast = |element, s: ContrastStats| InputRecord::Contrast {
        element,
        mean_c: s.mean_c,
        sigma_c: s.sigma_c,
        n_samples: s.n_samples,
    };
    let [h0, h1] = reference::hwp();
    [
        InputRecord::Optics {
            alphas_deg: DEFAULT_ALPHAS,
            delta_rm_deg: DEFAULT_DELTA_RM,
            p_theta: DEFAULT_P_THETA,
        },
        contrast(OpticalElement::Pbs, reference::pbs()),
        contrast(OpticalElement::Hwp01, h0),
        contrast(OpticalElement::HwpPm, h1),
    ]
    .iter()
    .map(|r| serde_json::to_string(r).expect("records serialize"))
    .collect::<Vec<_>>()
    .join("\n")
}
