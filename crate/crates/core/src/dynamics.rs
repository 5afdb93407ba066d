//! Nonlinear exploration: bifurcation diagrams over `α`, the largest
//! Lyapunov exponent, attractor typing and phase portraits.

use std::collections::VecDeque;

use serde::Serialize;

use crate::equilibria::positive_equilibrium;
use crate::error::{Error, Result};
use crate::model::{advance_unchecked, tangent_into, HistoryState, DEFAULT_BLOWUP};
use crate::params::{DelayConfig, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum InitialPolicy {
    /// Every `α` starts from the constant history at `E+`, with the public
    /// output raised by the perturbation.
    FreshPerturbed,
    /// Each `α` starts where the previous one ended (the first starts fresh).
    Continued,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub alpha_lo: f64,
    pub alpha_hi: f64,
    pub points: usize,
    pub transient: usize,
    pub samples: usize,
    pub policy: InitialPolicy,
    pub perturbation: f64,
    pub lle_transient: usize,
    pub lle_iterations: usize,
    pub blowup: f64,
    pub period_tol: f64,
}

impl SweepSpec {
    pub fn new(alpha_lo: f64, alpha_hi: f64, points: usize) -> Self {
        SweepSpec {
            alpha_lo,
            alpha_hi,
            points,
            transient: 2000,
            samples: 200,
            policy: InitialPolicy::FreshPerturbed,
            perturbation: 1e-2,
            lle_transient: 1000,
            lle_iterations: 20000,
            blowup: DEFAULT_BLOWUP,
            period_tol: PERIOD_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.points < 2 {
            return bad(format!("grid needs at least 2 points, got {}", self.points));
        }
        if self.transient < 1 || self.samples < 1 {
            return bad("transient and samples must be at least 1".into());
        }
        if !(self.alpha_lo.is_finite()
            && self.alpha_hi.is_finite()
            && self.alpha_lo >= 0.0
            && self.alpha_hi > self.alpha_lo)
        {
            return bad(format!("alpha range [{}, {}]", self.alpha_lo, self.alpha_hi));
        }
        if self.lle_iterations <= self.lle_transient {
            return bad("lle_iterations must exceed lle_transient".into());
        }
        if !(self.perturbation.is_finite() && self.blowup > 0.0 && self.period_tol > 0.0) {
            return bad("perturbation, blowup and period_tol must be finite and positive".into());
        }
        Ok(())
    }

    pub fn alpha_at(&self, k: usize) -> f64 {
        if k + 1 == self.points {
            return self.alpha_hi;
        }
        self.alpha_lo + (self.alpha_hi - self.alpha_lo) * k as f64 / (self.points - 1) as f64
    }

    pub fn alphas(&self) -> Vec<f64> {
        (0..self.points).map(|k| self.alpha_at(k)).collect()
    }
}

/// Constant history at `E+` with `perturbation` added to the public output.
pub fn perturbed_start(p: &MarketParams, d: &DelayConfig, perturbation: f64) -> Result<HistoryState> {
    let mut q = positive_equilibrium(p)?.point;
    q.0[0] += perturbation;
    Ok(HistoryState::constant(q, d.depth()))
}

pub const PERIOD_TOL: f64 = 1e-6;
pub const MAX_PERIOD: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AttractorType {
    FixedPoint,
    Period(usize),
    AperiodicOrQuasiperiodic,
    Divergent,
}

impl std::fmt::Display for AttractorType {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AttractorType::FixedPoint => f.write_str("FixedPoint"),
            AttractorType::Period(k) => write!(f, "Period{k}"),
            AttractorType::AperiodicOrQuasiperiodic => f.write_str("AperiodicOrQuasiperiodic"),
            AttractorType::Divergent => f.write_str("Divergent"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttractorSummary {
    pub kind: AttractorType,
    pub samples: Vec<f64>,
}

impl AttractorSummary {
    pub fn period(&self) -> Option<usize> {
        match self.kind {
            AttractorType::FixedPoint => Some(1),
            AttractorType::Period(k) => Some(k),
            _ => None,
        }
    }

    /// Sorted sample values with near-duplicates (within `tol`) merged.
    pub fn distinct_values(&self, tol: f64) -> Vec<f64> {
        distinct(&self.samples, tol)
    }
}

pub fn distinct(samples: &[f64], tol: f64) -> Vec<f64> {
    let mut v: Vec<f64> = samples.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out: Vec<f64> = Vec::new();
    for x in v {
        if out.last().is_none_or(|&l| x - l > tol) {
            out.push(x);
        }
    }
    out
}

/// Types a sampled orbit: fixed point if all samples agree within `tol`,
/// period `k` for the smallest lag `k <= 64` at which every sample recurs
/// within `tol`, aperiodic otherwise.
pub fn classify_attractor(samples: &[f64], tol: f64, diverged: bool) -> AttractorSummary {
    classify_attractor_with(samples, tol, diverged, MAX_PERIOD)
}

pub fn classify_attractor_with(samples: &[f64], tol: f64, diverged: bool, k_max: usize) -> AttractorSummary {
    let summary = |kind| AttractorSummary {
        kind,
        samples: samples.to_vec(),
    };
    if diverged || samples.iter().any(|x| !x.is_finite()) {
        return summary(AttractorType::Divergent);
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| (l.min(x), h.max(x)));
    if hi - lo <= tol {
        return summary(AttractorType::FixedPoint);
    }
    for k in 2..=k_max.min(samples.len().saturating_sub(1)) {
        if samples.iter().zip(&samples[k..]).all(|(a, b)| (a - b).abs() <= tol) {
            return summary(AttractorType::Period(k));
        }
    }
    summary(AttractorType::AperiodicOrQuasiperiodic)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LyapunovEstimate {
    /// Nats per iteration.
    pub lle: f64,
    pub transient: usize,
    pub iterations: usize,
    pub renormalization: usize,
}

/// Largest Lyapunov exponent along the orbit from `init`.
///
/// A unit tangent vector in the delay-embedded space is pushed through the
/// exact derivative of the map; its norm is reset every step and the log
/// growth factors after the first `transient` of `iterations` steps are
/// averaged.
pub fn largest_lyapunov(
    p: &MarketParams,
    d: &DelayConfig,
    init: &HistoryState,
    iterations: usize,
    transient: usize,
) -> Result<LyapunovEstimate> {
    largest_lyapunov_with(p, d, init, iterations, transient, 1, DEFAULT_BLOWUP)
}

pub fn largest_lyapunov_with(
    p: &MarketParams,
    d: &DelayConfig,
    init: &HistoryState,
    iterations: usize,
    transient: usize,
    renormalization: usize,
    blowup: f64,
) -> Result<LyapunovEstimate> {
    if iterations <= transient {
        return Err(Error::InvalidSpec(format!(
            "iterations ({iterations}) must exceed transient ({transient})"
        )));
    }
    if renormalization == 0 {
        return Err(Error::InvalidSpec("renormalization interval must be positive".into()));
    }
    let mut history = init.clone();
    history.check(p, d)?;
    let width = p.firms();
    let depth = d.depth();
    let unit = 1.0 / ((width * depth) as f64).sqrt();
    let mut tangent: VecDeque<Vec<f64>> = (0..depth).map(|_| vec![unit; width]).collect();
    let mut next = vec![0.0; width];
    let mut log_sum = 0.0;

    for step in 1..=iterations {
        tangent_into(&history, &tangent, p, d, &mut next);
        advance_unchecked(&mut history, p, d);
        let current = history.current();
        if !(current.max_abs() <= blowup) {
            return Err(Error::Divergent { step });
        }
        let mut slot = tangent.pop_front().expect("non-empty window");
        std::mem::swap(&mut slot, &mut next);
        tangent.push_back(slot);

        if step % renormalization == 0 || step == transient || step == iterations {
            let norm = tangent.iter().flatten().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm.is_finite() && norm > 0.0) {
                return Err(Error::Divergent { step });
            }
            if step > transient {
                log_sum += norm.ln();
            }
            let inv = 1.0 / norm;
            tangent.iter_mut().flatten().for_each(|x| *x *= inv);
        }
    }
    Ok(LyapunovEstimate {
        lle: log_sum / (iterations - transient) as f64,
        transient,
        iterations,
        renormalization,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagramRow {
    pub alpha: f64,
    pub attractor: AttractorSummary,
    /// Absent for divergent cells.
    pub lle: Option<f64>,
}

/// One diagram cell: transient, then `samples` recorded public outputs,
/// then the Lyapunov exponent from the post-transient state. Also returns
/// the final history, for continuation.
pub fn diagram_row(
    template: &MarketParams,
    d: &DelayConfig,
    alpha: f64,
    spec: &SweepSpec,
    init: &HistoryState,
) -> Result<(DiagramRow, Option<HistoryState>)> {
    let p = template.with_alpha(alpha)?;
    let divergent = || DiagramRow {
        alpha,
        attractor: classify_attractor(&[], spec.period_tol, true),
        lle: None,
    };
    let mut history = init.clone();
    history.check(&p, d)?;
    for _ in 0..spec.transient {
        advance_unchecked(&mut history, &p, d);
        if !(history.current().max_abs() <= spec.blowup) {
            return Ok((divergent(), None));
        }
    }
    let mut samples = Vec::with_capacity(spec.samples);
    for _ in 0..spec.samples {
        advance_unchecked(&mut history, &p, d);
        let q = history.current();
        if !(q.max_abs() <= spec.blowup) {
            return Ok((divergent(), None));
        }
        samples.push(q.public());
    }
    let lle = match largest_lyapunov_with(&p, d, &history, spec.lle_iterations, spec.lle_transient, 1, spec.blowup) {
        Ok(est) => est.lle,
        Err(Error::Divergent { .. }) => return Ok((divergent(), None)),
        Err(e) => return Err(e),
    };
    let row = DiagramRow {
        alpha,
        attractor: classify_attractor(&samples, spec.period_tol, false),
        lle: Some(lle),
    };
    Ok((row, Some(history)))
}

/// Sweeps `α` over the grid of `spec`, in grid order.
pub fn bifurcation_diagram(template: &MarketParams, d: &DelayConfig, spec: &SweepSpec) -> Result<Vec<DiagramRow>> {
    spec.validate()?;
    let mut rows = Vec::with_capacity(spec.points);
    let mut carried: Option<HistoryState> = None;
    for alpha in spec.alphas() {
        let p = template.with_alpha(alpha)?;
        let init = match (spec.policy, carried.take()) {
            (InitialPolicy::Continued, Some(h)) => h,
            _ => perturbed_start(&p, d, spec.perturbation)?,
        };
        let (row, last) = diagram_row(template, d, alpha, spec, &init)?;
        carried = last;
        rows.push(row);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePoint {
    pub t: i64,
    pub q0: f64,
    pub q1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasePortrait {
    pub points: Vec<PhasePoint>,
    pub diverged: bool,
}

/// Post-transient projection `(q0(t), q1(t))` of the orbit from the
/// perturbed start, `spec.samples` points long.
pub fn phase_portrait(template: &MarketParams, d: &DelayConfig, alpha: f64, spec: &SweepSpec) -> Result<PhasePortrait> {
    let p = template.with_alpha(alpha)?;
    let init = perturbed_start(&p, d, spec.perturbation)?;
    let traj = crate::model::simulate(&p, d, &init, spec.transient + spec.samples, spec.blowup)?;
    let points = traj
        .states
        .iter()
        .enumerate()
        .skip(spec.transient)
        .map(|(i, q)| PhasePoint {
            t: traj.start + i as i64,
            q0: q[0],
            q1: q[1],
        })
        .collect();
    Ok(PhasePortrait {
        points,
        diverged: traj.diverged,
    })
}
