//! The delayed Cournot map, its linearization and the economic read-outs.
//!
//! The public firm (index 0) climbs its marginal social surplus with speed
//! `α` while reading private outputs `τ1` steps old. Each private firm plays
//! a naive best response to the public output `τ0` steps old and to the
//! other private outputs `τ2` steps old:
//!
//! ```text
//! q0(t+1) = q0(t) + α q0(t) [a0 - b q0(t) - bδ Σ_i qi(t-τ1)]
//! qj(t+1) = a1/(2b) - (δ/2) q0(t-τ0) - (δ/2) Σ_{i≠j} qi(t-τ2)
//! ```
//!
//! The state of the map is the window of the last `tau_max + 1` output
//! vectors ([`HistoryState`]).

use std::collections::VecDeque;
use std::ops::{Deref, DerefMut};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{DelayConfig, MarketParams};

/// Outputs of all firms at one instant, index 0 being the public firm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputVector(pub Vec<f64>);

impl OutputVector {
    /// Public output followed by `n` identical private outputs.
    pub fn symmetric(q0: f64, q1: f64, n: usize) -> Self {
        let mut q = vec![q1; n + 1];
        q[0] = q0;
        OutputVector(q)
    }

    pub fn public(&self) -> f64 {
        self.0[0]
    }

    pub fn private_sum(&self) -> f64 {
        self.0[1..].iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl Deref for OutputVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for OutputVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for OutputVector {
    fn from(v: Vec<f64>) -> Self {
        OutputVector(v)
    }
}

/// Rolling window of past outputs, oldest first, most recent last.
#[derive(Debug, Clone)]
pub struct HistoryState {
    window: VecDeque<OutputVector>,
    time: i64,
    scratch: Vec<f64>,
}

impl PartialEq for HistoryState {
    fn eq(&self, other: &Self) -> bool {
        self.window == other.window && self.time == other.time
    }
}

impl HistoryState {
    /// Window with every entry equal to `q`, logical time 0.
    pub fn constant(q: OutputVector, depth: usize) -> Self {
        let depth = depth.max(1);
        HistoryState {
            window: std::iter::repeat_n(q, depth).collect(),
            time: 0,
            scratch: Vec::new(),
        }
    }

    /// Window from explicit entries, oldest first.
    pub fn from_entries(entries: Vec<OutputVector>) -> Result<Self> {
        let width = entries
            .first()
            .map(|q| q.len())
            .ok_or(Error::DimensionMismatch { expected: 1, found: 0 })?;
        if let Some(bad) = entries.iter().find(|q| q.len() != width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        Ok(HistoryState {
            window: entries.into(),
            time: 0,
            scratch: Vec::new(),
        })
    }

    pub fn depth(&self) -> usize {
        self.window.len()
    }

    pub fn width(&self) -> usize {
        self.window[0].len()
    }

    pub fn time(&self) -> i64 {
        self.time
    }

    /// Output vector `k` steps in the past; `lookback(0)` is the current one.
    pub fn lookback(&self, k: usize) -> &OutputVector {
        &self.window[self.window.len() - 1 - k]
    }

    pub fn current(&self) -> &OutputVector {
        self.lookback(0)
    }

    pub fn entries(&self) -> impl Iterator<Item = &OutputVector> {
        self.window.iter()
    }

    /// Appends `q` as the newest entry, dropping the oldest.
    pub fn push(&mut self, q: OutputVector) {
        self.window.pop_front();
        self.window.push_back(q);
        self.time += 1;
    }

    /// Stacked state `(y(t), y(t-1), …, y(t-τmax))`.
    pub fn stacked(&self) -> DVector<f64> {
        let width = self.width();
        let mut v = DVector::zeros(width * self.depth());
        for k in 0..self.depth() {
            v.rows_mut(k * width, width).copy_from_slice(self.lookback(k));
        }
        v
    }

    pub(crate) fn check(&self, p: &MarketParams, d: &DelayConfig) -> Result<()> {
        if self.depth() != d.depth() {
            return Err(Error::DimensionMismatch {
                expected: d.depth(),
                found: self.depth(),
            });
        }
        if self.width() != p.firms() {
            return Err(Error::DimensionMismatch {
                expected: p.firms(),
                found: self.width(),
            });
        }
        Ok(())
    }
}

/// Recorded orbit segment.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Logical time of `states[0]`.
    pub start: i64,
    pub states: Vec<OutputVector>,
    /// Set iff some recorded coordinate left the blow-up bound (or became non-finite).
    pub diverged: bool,
}

pub const DEFAULT_BLOWUP: f64 = 1.0e6;

fn next_into(history: &HistoryState, p: &MarketParams, d: &DelayConfig, out: &mut [f64]) {
    let (a0, a1, b, delta, alpha) = (p.a0(), p.a1(), p.b(), p.delta(), p.alpha());
    let q0 = history.current().public();
    let seen_by_public = history.lookback(d.tau1).private_sum();
    out[0] = q0 + alpha * q0 * (a0 - b * q0 - b * delta * seen_by_public);

    let public_lagged = history.lookback(d.tau0).public();
    let rivals = history.lookback(d.tau2);
    let rivals_sum = rivals.private_sum();
    let base = a1 / (2.0 * b) - 0.5 * delta * public_lagged;
    for j in 1..out.len() {
        out[j] = base - 0.5 * delta * (rivals_sum - rivals[j]);
    }
}

/// One iteration of the map: returns `q(t+1)` without touching the history.
pub fn step(history: &HistoryState, p: &MarketParams, d: &DelayConfig) -> Result<OutputVector> {
    history.check(p, d)?;
    let mut out = vec![0.0; p.firms()];
    next_into(history, p, d, &mut out);
    Ok(OutputVector(out))
}

/// Advances `history` in place by one step, reusing the dropped entry's storage.
pub fn advance(history: &mut HistoryState, p: &MarketParams, d: &DelayConfig) -> Result<()> {
    history.check(p, d)?;
    advance_unchecked(history, p, d);
    Ok(())
}

pub(crate) fn advance_unchecked(history: &mut HistoryState, p: &MarketParams, d: &DelayConfig) {
    let mut next = std::mem::take(&mut history.scratch);
    next.resize(p.firms(), 0.0);
    next_into(history, p, d, &mut next);
    let mut slot = history.window.pop_front().expect("non-empty window");
    std::mem::swap(&mut slot.0, &mut next);
    history.window.push_back(slot);
    history.scratch = next;
    history.time += 1;
}

/// Iterates the map `steps` times from `init`.
///
/// Stops early, with `diverged` set, as soon as a coordinate exceeds
/// `blowup` in absolute value or becomes non-finite; the offending state is
/// recorded. Identical inputs give bit-identical trajectories.
pub fn simulate(
    p: &MarketParams,
    d: &DelayConfig,
    init: &HistoryState,
    steps: usize,
    blowup: f64,
) -> Result<Trajectory> {
    init.check(p, d)?;
    let mut history = init.clone();
    let mut states = Vec::with_capacity(steps);
    let mut diverged = false;
    for _ in 0..steps {
        advance_unchecked(&mut history, p, d);
        let q = history.current();
        states.push(q.clone());
        if !(q.max_abs() <= blowup) {
            diverged = true;
            break;
        }
    }
    Ok(Trajectory {
        start: init.time() + 1,
        states,
        diverged,
    })
}

/// Coefficient matrices of the linearization at the current point, with
/// the sign convention
///
/// `y(t+1) = A y(t) - B0 y(t-τ0) - B1 y(t-τ1) - B2 y(t-τ2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianBlocks {
    pub a: DMatrix<f64>,
    pub b0: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
}

pub fn jacobian_blocks(point: &HistoryState, p: &MarketParams, d: &DelayConfig) -> Result<JacobianBlocks> {
    point.check(p, d)?;
    let m = p.firms();
    let (a0, b, delta, alpha) = (p.a0(), p.b(), p.delta(), p.alpha());
    let q0 = point.current().public();
    let seen = point.lookback(d.tau1).private_sum();

    let mut a = DMatrix::zeros(m, m);
    a[(0, 0)] = 1.0 + alpha * (a0 - 2.0 * b * q0 - b * delta * seen);

    let mut b1 = DMatrix::zeros(m, m);
    for i in 1..m {
        b1[(0, i)] = b * alpha * delta * q0;
    }

    let mut b0 = DMatrix::zeros(m, m);
    let mut b2 = DMatrix::zeros(m, m);
    for j in 1..m {
        b0[(j, 0)] = 0.5 * delta;
        for i in 1..m {
            if i != j {
                b2[(j, i)] = 0.5 * delta;
            }
        }
    }
    Ok(JacobianBlocks { a, b0, b1, b2 })
}

impl JacobianBlocks {
    /// Applies the linearization to a window of tangent vectors
    /// (`lags[k]` holds `y(t-k)`), returning `y(t+1)`.
    pub fn apply(&self, lags: &[DVector<f64>], d: &DelayConfig) -> DVector<f64> {
        &self.a * &lags[0] - &self.b0 * &lags[d.tau0] - &self.b1 * &lags[d.tau1] - &self.b2 * &lags[d.tau2]
    }
}

/// Block-companion matrix of the linearization acting on the stacked
/// vector `(y(t), …, y(t-τmax))`; its size is `(n+1)(τmax+1)`.
pub fn embedded_jacobian(point: &HistoryState, p: &MarketParams, d: &DelayConfig) -> Result<DMatrix<f64>> {
    let blocks = jacobian_blocks(point, p, d)?;
    Ok(embed(&blocks, d))
}

pub fn embed(blocks: &JacobianBlocks, d: &DelayConfig) -> DMatrix<f64> {
    let m = blocks.a.nrows();
    let depth = d.depth();
    let mut j = DMatrix::zeros(m * depth, m * depth);
    let mut top = |lag: usize, block: &DMatrix<f64>, sign: f64| {
        let mut view = j.view_mut((0, lag * m), (m, m));
        view += block * sign;
    };
    top(0, &blocks.a, 1.0);
    top(d.tau0, &blocks.b0, -1.0);
    top(d.tau1, &blocks.b1, -1.0);
    top(d.tau2, &blocks.b2, -1.0);
    for k in 1..depth {
        for i in 0..m {
            j[(k * m + i, (k - 1) * m + i)] = 1.0;
        }
    }
    j
}

/// Tangent propagation along an orbit, using the exact derivative of the
/// map. Only the public row depends on the state.
pub(crate) fn tangent_into(
    history: &HistoryState,
    tangent: &VecDeque<Vec<f64>>,
    p: &MarketParams,
    d: &DelayConfig,
    out: &mut [f64],
) {
    let (a0, b, delta, alpha) = (p.a0(), p.b(), p.delta(), p.alpha());
    let last = tangent.len() - 1;
    let lag = |k: usize| &tangent[last - k];
    let q0 = history.current().public();
    let seen = history.lookback(d.tau1).private_sum();
    let own = 1.0 + alpha * (a0 - 2.0 * b * q0 - b * delta * seen);
    let cross = b * alpha * delta * q0;
    let v1: f64 = lag(d.tau1)[1..].iter().sum();
    out[0] = own * lag(0)[0] - cross * v1;

    let v0 = lag(d.tau0)[0];
    let rivals = lag(d.tau2);
    let rivals_sum: f64 = rivals[1..].iter().sum();
    for j in 1..out.len() {
        out[j] = -0.5 * delta * v0 - 0.5 * delta * (rivals_sum - rivals[j]);
    }
}

/// Prices, profits and social surplus at one output vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EconomicReport {
    pub prices: Vec<f64>,
    pub profits: Vec<f64>,
    pub social_surplus: f64,
}

/// Consumer utility `U(q) = aΣq - (b/2)(Σq² + δ Σ_i Σ_{j≠i} qi qj)`.
pub fn utility(q: &[f64], a: f64, b: f64, delta: f64) -> f64 {
    let sum: f64 = q.iter().sum();
    let squares: f64 = q.iter().map(|x| x * x).sum();
    let cross = sum * sum - squares;
    a * sum - 0.5 * b * (squares + delta * cross)
}

pub fn economic_report(q: &OutputVector, p: &MarketParams) -> Result<EconomicReport> {
    let prim = p.primitives().ok_or(Error::MissingPrimitives)?;
    if q.len() != p.firms() {
        return Err(Error::DimensionMismatch {
            expected: p.firms(),
            found: q.len(),
        });
    }
    let (b, delta) = (p.b(), p.delta());
    let total: f64 = q.iter().sum();
    let prices: Vec<f64> = q.iter().map(|&qi| prim.a - b * qi - b * delta * (total - qi)).collect();
    let profits: Vec<f64> = q
        .iter()
        .zip(&prices)
        .enumerate()
        .map(|(i, (&qi, &pi))| {
            let cost = if i == 0 { prim.c0 } else { prim.c };
            (pi - cost) * qi
        })
        .collect();
    let spending: f64 = q.iter().zip(&prices).map(|(qi, pi)| qi * pi).sum();
    let social_surplus = utility(q, prim.a, b, delta) - spending + profits.iter().sum::<f64>();
    Ok(EconomicReport {
        prices,
        profits,
        social_surplus,
    })
}

/// One step of the private-firm subsystem with the public firm absent:
/// `qj(t+1) = a1/(2b) - (δ/2) Σ_{i≠j} qi(t-τ2)`. Entries are private outputs only.
pub fn step_without_public_firm(history: &HistoryState, p: &MarketParams, tau2: usize) -> Result<OutputVector> {
    if history.depth() != tau2 + 1 {
        return Err(Error::DimensionMismatch {
            expected: tau2 + 1,
            found: history.depth(),
        });
    }
    if history.width() != p.n() {
        return Err(Error::DimensionMismatch {
            expected: p.n(),
            found: history.width(),
        });
    }
    let (a1, b, delta) = (p.a1(), p.b(), p.delta());
    let rivals = history.lookback(tau2);
    let sum: f64 = rivals.iter().sum();
    Ok(OutputVector(
        rivals
            .iter()
            .map(|&qj| a1 / (2.0 * b) - 0.5 * delta * (sum - qj))
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section4(alpha: f64) -> MarketParams {
        MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.4, alpha, 4).unwrap()
    }

    fn e_plus() -> OutputVector {
        OutputVector::symmetric(0.9375, 0.6640625, 4)
    }

    #[test]
    fn hand_evaluated_step() {
        let p = section4(1.0);
        let d = DelayConfig::NONE;
        let h = HistoryState::constant(OutputVector::symmetric(1.0, 0.5, 4), 1);
        let q = step(&h, &p, &d).unwrap();
        assert!((q[0] - 1.2).abs() < 1e-14);
        for j in 1..5 {
            assert!((q[j] - 0.75).abs() < 1e-15);
        }
    }

    #[test]
    fn positive_equilibrium_is_fixed() {
        let p = section4(1.0);
        let d = DelayConfig::new(2, 4, 8);
        let h = HistoryState::constant(e_plus(), d.depth());
        let q = step(&h, &p, &d).unwrap();
        assert_eq!(q, e_plus());
    }

    #[test]
    fn boundary_equilibrium_is_fixed() {
        let p = section4(1.3);
        let d = DelayConfig::new(5, 3, 3);
        let e0 = OutputVector::symmetric(0.0, 0.78125, 4);
        let h = HistoryState::constant(e0.clone(), d.depth());
        assert_eq!(step(&h, &p, &d).unwrap(), e0);
    }

    #[test]
    fn frozen_public_firm() {
        let p = section4(0.0);
        let d = DelayConfig::new(1, 2, 0);
        let h = HistoryState::from_entries(vec![
            OutputVector(vec![0.3, 0.1, 0.2, 0.3, 0.4]),
            OutputVector(vec![0.7, 0.5, 0.6, 0.7, 0.8]),
            OutputVector(vec![1.1, 0.9, 1.0, 1.1, 1.2]),
        ])
        .unwrap();
        assert_eq!(step(&h, &p, &d).unwrap()[0], 1.1);
    }

    #[test]
    fn window_length_is_checked() {
        let p = section4(1.0);
        let d = DelayConfig::new(0, 0, 3);
        let h = HistoryState::constant(e_plus(), 2);
        assert_eq!(
            step(&h, &p, &d),
            Err(Error::DimensionMismatch { expected: 4, found: 2 })
        );
        let h = HistoryState::constant(OutputVector::symmetric(1.0, 1.0, 2), 4);
        assert!(step(&h, &p, &d).is_err());
    }

    #[test]
    fn advance_matches_step() {
        let p = section4(1.4);
        for d in [DelayConfig::NONE, DelayConfig::new(2, 0, 1), DelayConfig::new(3, 5, 5)] {
            let mut h = HistoryState::constant(OutputVector::symmetric(0.95, 0.66, 4), d.depth());
            for _ in 0..50 {
                let expected = step(&h, &p, &d).unwrap();
                let mut manual = h.clone();
                manual.push(expected.clone());
                advance(&mut h, &p, &d).unwrap();
                assert_eq!(h, manual);
            }
        }
    }

    #[test]
    fn simulate_constant_at_equilibrium() {
        let p = section4(1.5);
        let d = DelayConfig::new(9, 7, 5);
        let h = HistoryState::constant(e_plus(), d.depth());
        let tr = simulate(&p, &d, &h, 100, DEFAULT_BLOWUP).unwrap();
        assert!(!tr.diverged);
        assert_eq!(tr.start, 1);
        assert!(tr.states.iter().all(|q| *q == e_plus()));
    }

    #[test]
    fn simulate_flags_divergence() {
        let p = section4(1.0);
        let d = DelayConfig::NONE;
        let h = HistoryState::constant(OutputVector::symmetric(-1.0, 0.6, 4), 1);
        let tr = simulate(&p, &d, &h, 1000, DEFAULT_BLOWUP).unwrap();
        assert!(tr.diverged);
        assert!(tr.states.len() < 1000);
        assert!(!(tr.states.last().unwrap().max_abs() <= DEFAULT_BLOWUP));
    }

    #[test]
    fn jacobian_at_positive_equilibrium() {
        let p = section4(1.0);
        let d = DelayConfig::new(1, 2, 3);
        let h = HistoryState::constant(e_plus(), d.depth());
        let jb = jacobian_blocks(&h, &p, &d).unwrap();
        assert!((jb.a[(0, 0)] - 0.0625).abs() < 1e-14);
        for i in 1..5 {
            assert!((jb.b1[(0, i)] - 0.375).abs() < 1e-15);
            assert_eq!(jb.b0[(i, 0)], 0.2);
        }
        assert!(jb.b0.row(0).iter().all(|&x| x == 0.0));
        assert!(jb.b1.rows(1, 4).iter().all(|&x| x == 0.0));
    }

    #[test]
    fn jacobian_at_boundary_has_no_cross_term() {
        let p = section4(1.0);
        let d = DelayConfig::new(1, 2, 3);
        let h = HistoryState::constant(OutputVector::symmetric(0.0, 0.78125, 4), d.depth());
        let jb = jacobian_blocks(&h, &p, &d).unwrap();
        assert!(jb.b1.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn embedded_size_and_collapse() {
        let p = section4(1.0);
        let d = DelayConfig::new(2, 4, 8);
        let h = HistoryState::constant(e_plus(), d.depth());
        assert_eq!(embedded_jacobian(&h, &p, &d).unwrap().nrows(), 45);

        let d0 = DelayConfig::NONE;
        let h0 = HistoryState::constant(e_plus(), 1);
        let jb = jacobian_blocks(&h0, &p, &d0).unwrap();
        let j = embedded_jacobian(&h0, &p, &d0).unwrap();
        assert_eq!(j, &jb.a - &jb.b0 - &jb.b1 - &jb.b2);
    }

    #[test]
    fn embedded_matches_block_action() {
        let p = section4(1.3);
        let d = DelayConfig::new(2, 1, 3);
        let entries: Vec<_> = (0..4)
            .map(|k| OutputVector((0..5).map(|i| 0.5 + 0.1 * (i as f64) - 0.07 * k as f64).collect()))
            .collect();
        let h = HistoryState::from_entries(entries).unwrap();
        let jb = jacobian_blocks(&h, &p, &d).unwrap();
        let j = embed(&jb, &d);
        let y = DVector::from_fn(20, |i, _| ((i * 7 % 11) as f64 - 5.0) / 3.0);
        let lags: Vec<DVector<f64>> = (0..4).map(|k| y.rows(5 * k, 5).into_owned()).collect();
        let top = jb.apply(&lags, &d);
        let full = &j * &y;
        assert!((full.rows(0, 5) - top).amax() < 1e-14);
        assert_eq!(full.rows(5, 15), y.rows(0, 15));
    }

    #[test]
    fn economic_zero_output() {
        let p = MarketParams::from_primitives(3.0, 1.0, 0.5, 1.0, 0.4, 1.0, 4).unwrap();
        let r = economic_report(&OutputVector(vec![0.0; 5]), &p).unwrap();
        assert!(r.prices.iter().all(|&x| x == 3.0));
        assert!(r.profits.iter().all(|&x| x == 0.0));
        assert_eq!(r.social_surplus, 0.0);
    }

    #[test]
    fn economic_duopoly_hand_values() {
        let p = MarketParams::from_primitives(3.0, 1.0, 1.0, 1.0, 0.5, 1.0, 1).unwrap();
        let r = economic_report(&OutputVector(vec![1.0, 1.0]), &p).unwrap();
        assert_eq!(r.prices, vec![1.5, 1.5]);
        assert_eq!(r.profits, vec![0.5, 0.5]);
    }

    #[test]
    fn private_first_order_condition_at_equilibrium() {
        let p = MarketParams::from_primitives(3.0, 1.0, 0.5, 1.0, 0.4, 1.0, 4).unwrap();
        let q = e_plus();
        let r = economic_report(&q, &p).unwrap();
        for i in 1..5 {
            assert!((r.prices[i] - 0.5 - q[i]).abs() < 1e-12);
        }
        // the public firm's marginal surplus vanishes as well
        assert!((2.0 - q[0] - 0.4 * q.private_sum()).abs() < 1e-12);
    }

    #[test]
    fn economic_needs_primitives() {
        let p = section4(1.0);
        assert_eq!(economic_report(&e_plus(), &p), Err(Error::MissingPrimitives));
    }

    #[test]
    fn reduced_system_step() {
        let p = section4(1.0);
        let h = HistoryState::constant(OutputVector(vec![0.78125; 4]), 3);
        let q = step_without_public_firm(&h, &p, 2).unwrap();
        for x in q.iter() {
            assert!((x - 0.78125).abs() < 1e-15);
        }
        assert!(step_without_public_firm(&h, &p, 1).is_err());
    }
}
