//! Market parameters and delay configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Demand intercept and marginal costs, kept when the caller supplies them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitives {
    pub a: f64,
    pub c0: f64,
    pub c: f64,
}

/// Economic parameters of the mixed oligopoly: one public firm (index 0)
/// and `n` symmetric private firms.
///
/// The dynamics only depend on the intercept gaps `a0 = a - c0` and
/// `a1 = a - c`; the primitive triple is optional and only needed for
/// prices, profits and surplus.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    a0: f64,
    a1: f64,
    b: f64,
    delta: f64,
    alpha: f64,
    n: usize,
    primitives: Option<Primitives>,
}

fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl MarketParams {
    pub fn from_intercepts(a0: f64, a1: f64, b: f64, delta: f64, alpha: f64, n: usize) -> Result<Self> {
        let p = MarketParams {
            a0,
            a1,
            b,
            delta,
            alpha,
            n,
            primitives: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn from_primitives(a: f64, c0: f64, c: f64, b: f64, delta: f64, alpha: f64, n: usize) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(invalid("c", format!("must be >= 0, got {c}")));
        }
        if !(c0 >= c) {
            return Err(invalid("c0", format!("must satisfy c0 >= c, got c0={c0}, c={c}")));
        }
        if !(a > c0) {
            return Err(invalid("a", format!("must exceed c0, got a={a}, c0={c0}")));
        }
        let p = MarketParams {
            a0: a - c0,
            a1: a - c,
            b,
            delta,
            alpha,
            n,
            primitives: Some(Primitives { a, c0, c }),
        };
        p.validate()?;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(invalid("b", format!("must be > 0, got {}", self.b)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta", format!("must lie in (0, 1), got {}", self.delta)));
        }
        // alpha = 0 is allowed for the frozen public firm; negative speeds are not
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(invalid("alpha", format!("must be >= 0, got {}", self.alpha)));
        }
        if self.n < 1 {
            return Err(invalid("n", "needs at least one private firm"));
        }
        if !(self.a0.is_finite() && self.a0 > 0.0) {
            return Err(invalid("a0", format!("must be > 0, got {}", self.a0)));
        }
        if !(self.a1.is_finite() && self.a1 >= self.a0) {
            return Err(invalid(
                "a1",
                format!("must satisfy a1 >= a0 (c0 >= c), got a0={}, a1={}", self.a0, self.a1),
            ));
        }
        Ok(())
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn primitives(&self) -> Option<Primitives> {
        self.primitives
    }

    /// Number of firms including the public one.
    pub fn firms(&self) -> usize {
        self.n + 1
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        let p = MarketParams { alpha, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        let p = MarketParams { delta, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_n(&self, n: usize) -> Result<Self> {
        let p = MarketParams { n, ..*self };
        p.validate()?;
        Ok(p)
    }

    /// `2 + (n-1)δ`
    pub fn spread(&self) -> f64 {
        2.0 + (self.n as f64 - 1.0) * self.delta
    }

    /// `2 + (n-1)δ - nδ² = 2 - δ + nδ(1-δ)`, positive for every admissible `(n, δ)`.
    pub fn denominator(&self) -> f64 {
        let n = self.n as f64;
        2.0 - self.delta + n * self.delta * (1.0 - self.delta)
    }

    /// Left-minus-right gap of assumption A.1: `[2+(n-1)δ]a0 - nδa1`.
    pub fn a1_margin(&self) -> f64 {
        self.spread() * self.a0 - self.n as f64 * self.delta * self.a1
    }

    /// Left-minus-right gap of assumption A.2: `a1 - δa0`.
    pub fn a2_margin(&self) -> f64 {
        self.a1 - self.delta * self.a0
    }

    /// The gain `K` with `ε1 + 1 = αK`. Equals `b q0*` at the positive equilibrium.
    pub fn adjustment_gain(&self) -> f64 {
        self.a1_margin() / self.denominator()
    }

    /// Growth rate `M` of public output near the boundary equilibrium:
    /// the unstable root there is `1 + αM`.
    pub fn boundary_growth(&self) -> f64 {
        self.a1_margin() / self.spread()
    }
}

/// The three information delays of the map, in time steps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DelayConfig {
    /// Lag with which private firms observe the public firm.
    pub tau0: usize,
    /// Lag with which the public firm observes private firms.
    pub tau1: usize,
    /// Lag with which private firms observe each other.
    pub tau2: usize,
}

impl DelayConfig {
    pub const NONE: DelayConfig = DelayConfig {
        tau0: 0,
        tau1: 0,
        tau2: 0,
    };

    pub fn new(tau0: usize, tau1: usize, tau2: usize) -> Self {
        DelayConfig { tau0, tau1, tau2 }
    }

    /// Deepest lag, which fixes the history length `tau_max + 1`.
    pub fn tau_max(&self) -> usize {
        self.tau0.max(self.tau1).max(self.tau2)
    }

    /// Combined lag `τ0 + τ1` of the public-private feedback loop.
    pub fn tau_sum(&self) -> usize {
        self.tau0 + self.tau1
    }

    pub fn depth(&self) -> usize {
        self.tau_max() + 1
    }
}

impl std::fmt::Display for DelayConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({}, {}, {})", self.tau0, self.tau1, self.tau2)
    }
}
