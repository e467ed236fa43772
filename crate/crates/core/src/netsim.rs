//! Two-site timing simulation on an integer-nanosecond clock.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::protocol::TranscriptEvent;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetsimError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("causality violated: {0}")]
    Causality(String),
}

pub const C_FIBRE: f64 = 2e8;
pub const C_VAC: f64 = 3e8;

/// Seconds to whole nanoseconds, rounded to nearest.
pub fn to_ns(seconds: f64) -> u64 {
    (seconds * 1e9).round() as u64
}

pub fn ns_to_us(ns: u64) -> f64 {
    ns as f64 / 1e3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimingTopology {
    /// Fibre length between the two sites, metres.
    pub l_fibre: f64,
    /// Straight-line distance between the sites, metres.
    pub d_direct: f64,
    #[serde(default = "default_c_fibre")]
    pub c_fibre: f64,
    #[serde(default = "default_c_vac")]
    pub c_vac: f64,
    /// Lumped processing latency, seconds.
    #[serde(default = "default_dt_proc")]
    pub dt_proc: f64,
    /// Gap between T_begin and T_bit, seconds.
    #[serde(default)]
    pub dt_begin_gap: f64,
}

fn default_c_fibre() -> f64 {
    C_FIBRE
}
fn default_c_vac() -> f64 {
    C_VAC
}
fn default_dt_proc() -> f64 {
    1.5e-6
}

impl TimingTopology {
    pub fn new(l_fibre: f64, d_direct: f64, dt_proc: f64) -> Self {
        TimingTopology {
            l_fibre,
            d_direct,
            c_fibre: C_FIBRE,
            c_vac: C_VAC,
            dt_proc,
            dt_begin_gap: 0.0,
        }
    }

    /// Jinan intra-city link.
    pub fn jinan() -> Self {
        // Only the fibre length matters for QA; direct distance set equal.
        TimingTopology::new(2766.0, 2766.0, 1.506e-6)
    }

    /// Yiyuan–Mazhan inter-city link.
    pub fn yiyuan_mazhan() -> Self {
        TimingTopology::new(60540.0, 51600.0, 1.5e-6)
    }

    pub fn validate(&self) -> Result<(), NetsimError> {
        let bad = |m: String| Err(NetsimError::InvalidTopology(m));
        let degenerate = self.l_fibre == 0.0 && self.d_direct == 0.0;
        if !(self.d_direct > 0.0 || degenerate) {
            return bad(format!("d_direct = {} must be positive", self.d_direct));
        }
        if self.l_fibre < self.d_direct {
            return bad(format!(
                "l_fibre = {} shorter than d_direct = {}",
                self.l_fibre, self.d_direct
            ));
        }
        if !(self.c_fibre > 0.0 && self.c_vac > 0.0) {
            return bad("speeds must be positive".into());
        }
        if self.c_fibre >= self.c_vac {
            return bad(format!(
                "c_fibre = {} must be below c_vac = {}",
                self.c_fibre, self.c_vac
            ));
        }
        if self.dt_proc < 0.0 || self.dt_begin_gap < 0.0 {
            return bad("latencies must be nonnegative".into());
        }
        Ok(())
    }

    /// One-way fibre latency ΔT_comm, seconds.
    pub fn dt_comm(&self) -> f64 {
        self.l_fibre / self.c_fibre
    }

    pub fn dt_comm_ns(&self) -> u64 {
        to_ns(self.dt_comm())
    }

    pub fn dt_proc_ns(&self) -> u64 {
        to_ns(self.dt_proc)
    }
}

/// Deterministic discrete-event queue. Ties are broken by insertion order.
#[derive(Debug)]
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<(u64, u64)>>,
    payloads: Vec<Option<E>>,
    now: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            payloads: Vec::new(),
            now: 0,
        }
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    /// Schedules `event` at absolute time `at`; scheduling in the past is a
    /// causality error.
    pub fn schedule(&mut self, at: u64, event: E) -> Result<(), NetsimError> {
        if at < self.now {
            return Err(NetsimError::Causality(format!(
                "event at {at} ns scheduled at {} ns",
                self.now
            )));
        }
        let seq = self.payloads.len() as u64;
        self.payloads.push(Some(event));
        self.heap.push(Reverse((at, seq)));
        Ok(())
    }

    /// Message delivery over a channel with the given latency.
    pub fn send(&mut self, latency_ns: u64, event: E) -> Result<(), NetsimError> {
        self.schedule(self.now + latency_ns, event)
    }

    pub fn pop(&mut self) -> Option<(u64, E)> {
        let Reverse((at, seq)) = self.heap.pop()?;
        debug_assert!(at >= self.now);
        self.now = at;
        let ev = self.payloads[seq as usize]
            .take()
            .expect("each event is popped once");
        Some((at, ev))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TransactionTiming {
    pub t_begin_ns: u64,
    pub t_bit_ns: u64,
    pub t_arrive_ns: u64,
    pub t_end_ns: u64,
}

impl TransactionTiming {
    pub fn dt_tran_ns(&self) -> u64 {
        self.t_end_ns - self.t_begin_ns
    }

    pub fn dt_tran(&self) -> f64 {
        self.dt_tran_ns() as f64 * 1e-9
    }
}

#[derive(Debug)]
enum QEvent {
    Begin,
    Bit,
    /// b reaches A_1, c reaches B_1.
    RemoteDelivered,
    Present,
    Validated,
}

/// Runs steps 3–6 of the quantum scheme through the event loop and returns
/// the timing together with the event transcript.
pub fn simulate_transaction_traced(
    topology: &TimingTopology,
) -> Result<(TransactionTiming, Vec<TranscriptEvent>), NetsimError> {
    topology.validate()?;
    let comm = topology.dt_comm_ns();
    let proc_ns = topology.dt_proc_ns();
    let mut q = EventQueue::new();
    let mut trace = Vec::new();
    let mut timing = TransactionTiming {
        t_begin_ns: 0,
        t_bit_ns: 0,
        t_arrive_ns: 0,
        t_end_ns: 0,
    };
    let mut remote_at = None;
    q.schedule(0, QEvent::Begin)?;
    while let Some((now, ev)) = q.pop() {
        match ev {
            QEvent::Begin => {
                timing.t_begin_ns = now;
                trace.push(TranscriptEvent::new("begin", "A0", now, ""));
                q.send(to_ns(topology.dt_begin_gap), QEvent::Bit)?;
            }
            QEvent::Bit => {
                timing.t_bit_ns = now;
                trace.push(TranscriptEvent::new("send_b_and_c", "A0", now, ""));
                q.send(comm, QEvent::RemoteDelivered)?;
                // Presentation happens at the agreed time T = T_bit + ΔT_comm.
                q.send(comm, QEvent::Present)?;
            }
            QEvent::RemoteDelivered => {
                remote_at = Some(now);
                trace.push(TranscriptEvent::new("b_c_delivered", "A1/B1", now, ""));
            }
            QEvent::Present => {
                match remote_at {
                    Some(t) if t <= now => {}
                    _ => {
                        return Err(NetsimError::Causality(
                            "presentation before b and c arrived".into(),
                        ))
                    }
                }
                timing.t_arrive_ns = now;
                trace.push(TranscriptEvent::new("present", "A0/A1", now, ""));
                q.send(proc_ns, QEvent::Validated)?;
            }
            QEvent::Validated => {
                timing.t_end_ns = now;
                trace.push(TranscriptEvent::new("validated", "B0/B1", now, ""));
            }
        }
    }
    Ok((timing, trace))
}

pub fn simulate_transaction(topology: &TimingTopology) -> Result<TransactionTiming, NetsimError> {
    simulate_transaction_traced(topology).map(|(t, _)| t)
}

/// `(ΔT_tran,C, ΔT_tran,CF)` in nanoseconds.
pub fn classical_times_ns(topology: &TimingTopology) -> (u64, u64) {
    (
        to_ns(2.0 * topology.l_fibre / topology.c_fibre),
        to_ns(2.0 * topology.d_direct / topology.c_vac),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AdvantageReport {
    pub dt_tran_ns: u64,
    pub dt_tran_c_ns: u64,
    pub dt_tran_cf_ns: u64,
    pub qa_ns: i64,
    pub ca_ns: i64,
}

impl AdvantageReport {
    pub fn qa_us(&self) -> f64 {
        self.qa_ns as f64 / 1e3
    }

    pub fn ca_us(&self) -> f64 {
        self.ca_ns as f64 / 1e3
    }
}

pub fn advantage(topology: &TimingTopology) -> Result<AdvantageReport, NetsimError> {
    let timing = simulate_transaction(topology)?;
    let (c, cf) = classical_times_ns(topology);
    let tran = timing.dt_tran_ns();
    Ok(AdvantageReport {
        dt_tran_ns: tran,
        dt_tran_c_ns: c,
        dt_tran_cf_ns: cf,
        qa_ns: c as i64 - tran as i64,
        ca_ns: cf as i64 - tran as i64,
    })
}

/// Fibre length at which QA vanishes: `ΔT_proc·c_f`.
pub fn qa_threshold_length(dt_proc: f64, c_fibre: f64) -> f64 {
    dt_proc * c_fibre
}

/// Site separation at which CA vanishes for straight fibre (`L = D`):
/// `ΔT_proc / (2/c − 1/c_f)`. Infinite when fibre is too slow for any CA.
pub fn ca_threshold_distance(dt_proc: f64, c_fibre: f64, c_vac: f64) -> f64 {
    let rate = 2.0 / c_vac - 1.0 / c_fibre;
    if rate <= 0.0 {
        f64::INFINITY
    } else {
        dt_proc / rate
    }
}

/// One row of a timing report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TimingRow {
    pub trial: usize,
    pub b: u8,
    pub z: u8,
    pub dt_tran_us: f64,
    pub error_rate_pct: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn jinan_transaction_and_advantage() {
        let top = TimingTopology::jinan();
        let t = simulate_transaction(&top).unwrap();
        assert_eq!(t.dt_tran_ns(), 15_336);
        let a = advantage(&top).unwrap();
        assert_eq!(a.dt_tran_c_ns, 27_660);
        assert_eq!(a.qa_ns, 12_324);
    }

    #[test]
    fn zero_fibre_costs_only_processing() {
        let top = TimingTopology {
            l_fibre: 0.0,
            d_direct: 0.0,
            ..TimingTopology::new(0.0, 0.0, 1.5e-6)
        };
        assert_eq!(simulate_transaction(&top).unwrap().dt_tran_ns(), 1500);
    }

    #[test]
    fn inter_city_times() {
        let top = TimingTopology::yiyuan_mazhan();
        let a = advantage(&top).unwrap();
        assert_eq!(a.dt_tran_ns, 304_200);
        assert_eq!(a.dt_tran_cf_ns, 344_000);
        let tuned = TimingTopology {
            dt_proc: 1.502e-6,
            ..top
        };
        assert_eq!(advantage(&tuned).unwrap().dt_tran_ns, 304_202);
    }

    #[test]
    fn equal_speeds_equal_classical_times() {
        let top = TimingTopology {
            c_fibre: C_VAC,
            ..TimingTopology::new(1000.0, 1000.0, 0.0)
        };
        let (c, cf) = classical_times_ns(&top);
        assert_eq!(c, cf);
    }

    #[test]
    fn thresholds() {
        assert!((qa_threshold_length(1.5e-6, C_FIBRE) - 300.0).abs() < 1e-9);
        assert!((ca_threshold_distance(1.5e-6, C_FIBRE, C_VAC) - 900.0).abs() < 1e-6);
        let top = TimingTopology::new(300.0, 300.0, 1.5e-6);
        assert_eq!(advantage(&top).unwrap().qa_ns, 0);
        let top = TimingTopology::new(900.0, 900.0, 1.5e-6);
        assert_eq!(advantage(&top).unwrap().ca_ns, 0);
    }

    #[test]
    fn topology_validation() {
        assert!(TimingTopology::new(100.0, 200.0, 1e-6).validate().is_err());
        assert!(TimingTopology {
            c_fibre: 4e8,
            ..TimingTopology::jinan()
        }
        .validate()
        .is_err());
        assert!(TimingTopology::new(100.0, 100.0, -1.0).validate().is_err());
    }

    #[test]
    fn queue_orders_ties_by_insertion_and_rejects_the_past() {
        let mut q = EventQueue::new();
        q.schedule(5, "b").unwrap();
        q.schedule(5, "c").unwrap();
        q.schedule(1, "a").unwrap();
        let order: Vec<_> = std::iter::from_fn(|| q.pop()).collect();
        assert_eq!(order, vec![(1, "a"), (5, "b"), (5, "c")]);
        assert!(q.schedule(4, "late").is_err());
    }

    #[test]
    fn trace_is_deterministic_and_monotone() {
        let (t1, a) = simulate_transaction_traced(&TimingTopology::jinan()).unwrap();
        let (t2, b) = simulate_transaction_traced(&TimingTopology::jinan()).unwrap();
        assert_eq!(t1, t2);
        assert_eq!(a, b);
        assert!(a.windows(2).all(|w| w[0].t_ns <= w[1].t_ns));
    }

    proptest! {
        #[test]
        fn qa_dominates_ca(d in 1.0f64..1e6, extra in 0.0f64..1e5, proc_ns in 0u64..10_000) {
            let top = TimingTopology::new(d + extra, d, proc_ns as f64 * 1e-9);
            let a = advantage(&top).unwrap();
            prop_assert!(a.qa_ns >= a.ca_ns);
        }

        #[test]
        fn timing_is_monotone(l in 0.0f64..1e6, gap in 0u64..5000, proc_ns in 0u64..10_000) {
            let top = TimingTopology {
                dt_begin_gap: gap as f64 * 1e-9,
                ..TimingTopology::new(l.max(1.0), l.max(1.0), proc_ns as f64 * 1e-9)
            };
            let t = simulate_transaction(&top).unwrap();
            prop_assert!(t.t_begin_ns <= t.t_bit_ns && t.t_bit_ns <= t.t_arrive_ns && t.t_arrive_ns <= t.t_end_ns);
            prop_assert_eq!(t.t_arrive_ns, t.t_bit_ns + top.dt_comm_ns());
        }
    }
}
