//! Closed-form equilibria and the positivity assumptions.

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{step, step_without_public_firm, HistoryState, OutputVector};
use crate::params::{DelayConfig, MarketParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Assumption {
    /// `[2+(n-1)δ]a0 > nδa1`
    A1,
    /// `a1 > δa0`
    A2,
}

impl fmt::Display for Assumption {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Assumption::A1 => f.write_str("A.1 ([2+(n-1)delta]a0 > n delta a1)"),
            Assumption::A2 => f.write_str("A.2 (a1 > delta a0)"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub a1_holds: bool,
    pub a2_holds: bool,
    /// Signed gaps (left minus right) of A.1 and A.2.
    pub a1_margin: f64,
    pub a2_margin: f64,
}

impl AssumptionReport {
    pub fn both_hold(&self) -> bool {
        self.a1_holds && self.a2_holds
    }

    /// First failing assumption, as an error.
    pub fn require(&self) -> Result<()> {
        if !self.a1_holds {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::A1,
                margin: self.a1_margin,
            });
        }
        if !self.a2_holds {
            return Err(Error::AssumptionViolated {
                assumption: Assumption::A2,
                margin: self.a2_margin,
            });
        }
        Ok(())
    }

    pub fn require_a1(&self) -> Result<()> {
        if self.a1_holds {
            Ok(())
        } else {
            Err(Error::AssumptionViolated {
                assumption: Assumption::A1,
                margin: self.a1_margin,
            })
        }
    }
}

impl AssumptionReport {
    /// Both inequalities are strict: a zero margin fails.
    pub fn from_margins(a1_margin: f64, a2_margin: f64) -> Self {
        AssumptionReport {
            a1_holds: a1_margin > 0.0,
            a2_holds: a2_margin > 0.0,
            a1_margin,
            a2_margin,
        }
    }
}

/// Note that A.2 already follows from `a1 >= a0` (i.e. `c0 >= c`) and `δ < 1`.
pub fn check_assumptions(p: &MarketParams) -> AssumptionReport {
    AssumptionReport::from_margins(p.a1_margin(), p.a2_margin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumKind {
    Boundary,
    Positive,
    ReducedSymmetric,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub kind: EquilibriumKind,
    pub point: OutputVector,
    /// Max-norm fixed-point defect of the map at `point`.
    pub residual: f64,
}

impl Equilibrium {
    /// Constant history sitting at the equilibrium.
    pub fn history(&self, d: &DelayConfig) -> HistoryState {
        HistoryState::constant(self.point.clone(), d.depth())
    }
}

fn defect(p: &MarketParams, q: &OutputVector) -> f64 {
    let h = HistoryState::constant(q.clone(), 1);
    let next = step(&h, p, &DelayConfig::NONE).expect("dimensions match by construction");
    next.iter()
        .zip(q.iter())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
}

/// `E0 = (0, q*, …, q*)` with `q* = a1 / (b[2+(n-1)δ])`.
pub fn boundary_equilibrium(p: &MarketParams) -> Equilibrium {
    let q_star = p.a1() / (p.b() * p.spread());
    let point = OutputVector::symmetric(0.0, q_star, p.n());
    let residual = defect(p, &point);
    Equilibrium {
        kind: EquilibriumKind::Boundary,
        point,
        residual,
    }
}

/// The interior equilibrium `E+`; requires A.1 and A.2.
pub fn positive_equilibrium(p: &MarketParams) -> Result<Equilibrium> {
    check_assumptions(p).require()?;
    let den = p.b() * p.denominator();
    let q0 = p.a1_margin() / den;
    let q1 = p.a2_margin() / den;
    let point = OutputVector::symmetric(q0, q1, p.n());
    let residual = defect(p, &point);
    Ok(Equilibrium {
        kind: EquilibriumKind::Positive,
        point,
        residual,
    })
}

/// Fixed point of the private-firm subsystem without the public firm.
///
/// The subsystem is affine with coefficient matrix `I + (δ/2)(J - I)`,
/// nonsingular for `δ ∈ (0, 1)`, so the symmetric point is the only one.
pub fn reduced_fixed_point(p: &MarketParams) -> Result<Equilibrium> {
    if p.n() < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "the subsystem without a public firm needs n >= 2".into(),
        });
    }
    let x = p.a1() / (p.b() * p.spread());
    let point = OutputVector(vec![x; p.n()]);
    let h = HistoryState::constant(point.clone(), 1);
    let next = step_without_public_firm(&h, p, 0)?;
    let residual = next.iter().fold(0.0_f64, |m, y| m.max((y - x).abs()));
    Ok(Equilibrium {
        kind: EquilibriumKind::ReducedSymmetric,
        point,
        residual,
    })
}
