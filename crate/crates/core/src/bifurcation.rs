//! Flip and Neimark-Sacker boundaries of the positive equilibrium, the
//! numerically detected stability loss, and the delay-independent
//! stability region in the `(δ, α)` plane.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::equilibria::check_assumptions;
use crate::error::{Error, Result};
use crate::params::{DelayConfig, MarketParams};
use crate::spectral::{
    alpha_for_eps1, delay_free_threshold, epsilon_triple, reduced_equation, reduced_polynomial, EpsilonTriple,
};

/// Signs `(-1)^{τ0+τ1}` and `(-1)^{τ2}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ParityCase {
    pub sum_even: bool,
    pub tau2_even: bool,
}

impl ParityCase {
    pub fn of(d: &DelayConfig) -> Self {
        ParityCase {
            sum_even: d.tau_sum().is_multiple_of(2),
            tau2_even: d.tau2.is_multiple_of(2),
        }
    }

    pub fn sum_sign(&self) -> f64 {
        if self.sum_even {
            1.0
        } else {
            -1.0
        }
    }

    pub fn tau2_sign(&self) -> f64 {
        if self.tau2_even {
            1.0
        } else {
            -1.0
        }
    }

    /// 1: both even, 2: both odd, 3: even sum and odd `τ2`, 4: odd sum and even `τ2`.
    pub fn case_number(&self) -> u8 {
        match (self.sum_even, self.tau2_even) {
            (true, true) => 1,
            (false, false) => 2,
            (true, false) => 3,
            (false, true) => 4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BifurcationKind {
    Flip,
    NeimarkSacker,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BifurcationPoint {
    pub alpha: f64,
    pub kind: BifurcationKind,
    /// Argument of the crossing root in `[0, π]`.
    pub theta: f64,
    pub eps1: f64,
    /// `|reduced equation|` at the crossing root.
    pub residual: f64,
}

/// `ε1` at which `λ = -1` solves the reduced equation.
pub fn flip_eps1(eps: &EpsilonTriple, d: &DelayConfig) -> Result<f64> {
    let case = ParityCase::of(d);
    let (s, r) = (case.sum_sign(), case.tau2_sign());
    let den = 1.0 - r * eps.eps2 + s * eps.eps0;
    if den.abs() < 1e-14 {
        return Err(Error::DegenerateDenominator);
    }
    Ok((1.0 - r * eps.eps2 - s * eps.eps0) / den)
}

/// Closed-form flip candidate for the parity class of `d`.
pub fn flip_boundary(p: &MarketParams, d: &DelayConfig) -> Result<BifurcationPoint> {
    check_assumptions(p).require_a1()?;
    let eps = epsilon_triple(p);
    let eps1 = flip_eps1(&eps, d)?;
    let alpha = alpha_for_eps1(p, eps1);
    if !(alpha > 0.0) {
        return Err(Error::NonPositiveAlpha(alpha));
    }
    let at = EpsilonTriple { eps1, ..eps };
    Ok(BifurcationPoint {
        alpha,
        kind: BifurcationKind::Flip,
        theta: PI,
        eps1,
        residual: reduced_equation(&at, d, Complex64::new(-1.0, 0.0)).norm(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleScan {
    pub points: usize,
    /// Width of the excluded neighbourhoods of `0` and `π`.
    pub theta_min: f64,
    pub theta_tol: f64,
}

impl Default for AngleScan {
    fn default() -> Self {
        AngleScan {
            points: 4096,
            theta_min: 1e-3,
            theta_tol: 1e-10,
        }
    }
}

/// Imaginary-part condition: zero exactly when the `ε1` solving the reduced
/// equation at `λ = e^{iθ}` is real.
pub fn ns_angle_condition(eps: &EpsilonTriple, d: &DelayConfig, theta: f64) -> f64 {
    let t = d.tau_sum() as f64;
    let t2 = d.tau2 as f64;
    let (e0, e2) = (eps.eps0, eps.eps2);
    e0 * (((t + 1.5) * theta).cos() + e2 * ((t - t2 + 0.5) * theta).cos())
        - (0.5 * theta).cos() * (1.0 + e2 * e2 + 2.0 * e2 * ((t2 + 1.0) * theta).cos())
}

/// `ε1 = (λH - ε0)/(ε0 - H)` with `H = λ^T(λ + ε2 λ^{-τ2})`, `λ = e^{iθ}`,
/// `T = τ0 + τ1`. Only `ε0` and `ε2` of `eps` are used.
pub fn eps1_ratio(eps: &EpsilonTriple, d: &DelayConfig, theta: f64) -> Complex64 {
    let lambda = Complex64::from_polar(1.0, theta);
    let h = lambda.powi(d.tau_sum() as i32) * (lambda + eps.eps2 * lambda.powi(-(d.tau2 as i32)));
    (lambda * h - eps.eps0) / (eps.eps0 - h)
}

/// Real part of [`eps1_ratio`] in closed form.
pub fn ns_eps1(eps: &EpsilonTriple, d: &DelayConfig, theta: f64) -> f64 {
    let t = d.tau_sum() as f64;
    let t2 = d.tau2 as f64;
    let (e0, e2) = (eps.eps0, eps.eps2);
    let ring = 1.0 + e2 * e2 + 2.0 * e2 * ((t2 + 1.0) * theta).cos();
    let num = 2.0 * (0.5 * theta).cos() * e0 * (((t + 1.5) * theta).cos() + e2 * ((t - t2 + 0.5) * theta).cos())
        - theta.cos() * ring
        - e0 * e0;
    let den = e0 * e0 + ring - 2.0 * e0 * ((t + 1.0) * theta).cos() - 2.0 * e0 * e2 * ((t - t2) * theta).cos();
    num / den
}

/// Tolerance on the imaginary part of the `ε1` ratio and on the residual.
pub const NS_TOL: f64 = 1e-8;

/// Neimark-Sacker candidates: every interior angle solving the
/// imaginary-part condition, mapped to `α`, with nonpositive `α` dropped
/// and each point checked in the reduced equation. Sorted by angle.
pub fn ns_boundary(p: &MarketParams, d: &DelayConfig) -> Result<Vec<BifurcationPoint>> {
    ns_boundary_with(p, d, &AngleScan::default())
}

pub fn ns_boundary_with(p: &MarketParams, d: &DelayConfig, scan: &AngleScan) -> Result<Vec<BifurcationPoint>> {
    check_assumptions(p).require_a1()?;
    let eps = epsilon_triple(p);
    let g = |th: f64| ns_angle_condition(&eps, d, th);
    let lo = scan.theta_min;
    let hi = PI - scan.theta_min;
    let steps = scan.points.max(2) - 1;
    let grid = |k: usize| lo + (hi - lo) * k as f64 / steps as f64;

    let mut out = Vec::new();
    let mut a = grid(0);
    let mut ga = g(a);
    for k in 1..=steps {
        let b = grid(k);
        let gb = g(b);
        let root = if ga == 0.0 {
            Some(a)
        } else if ga * gb < 0.0 {
            Some(bisect(&g, a, b, ga, scan.theta_tol))
        } else {
            None
        };
        if let Some(theta) = root {
            if let Some(pt) = ns_point(p, &eps, d, theta) {
                out.push(pt);
            }
        }
        a = b;
        ga = gb;
    }
    if ga == 0.0 {
        if let Some(pt) = ns_point(p, &eps, d, a) {
            out.push(pt);
        }
    }
    Ok(out)
}

fn ns_point(p: &MarketParams, eps: &EpsilonTriple, d: &DelayConfig, theta: f64) -> Option<BifurcationPoint> {
    let ratio = eps1_ratio(eps, d, theta);
    if !(ratio.im.abs() < NS_TOL) {
        return None;
    }
    let eps1 = ns_eps1(eps, d, theta);
    let alpha = alpha_for_eps1(p, eps1);
    if !(alpha > 0.0) {
        return None;
    }
    let at = EpsilonTriple { eps1, ..*eps };
    let residual = reduced_equation(&at, d, Complex64::from_polar(1.0, theta)).norm();
    (residual < NS_TOL).then_some(BifurcationPoint {
        alpha,
        kind: BifurcationKind::NeimarkSacker,
        theta,
        eps1,
        residual,
    })
}

fn bisect(g: &impl Fn(f64) -> f64, mut a: f64, mut b: f64, mut ga: f64, tol: f64) -> f64 {
    while b - a > tol {
        let m = 0.5 * (a + b);
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if ga * gm < 0.0 {
            b = m;
        } else {
            a = m;
            ga = gm;
        }
    }
    0.5 * (a + b)
}

/// Largest modulus among the nonzero roots of the reduced polynomial, and
/// the root attaining it.
pub fn dominant_reduced_root(p: &MarketParams, d: &DelayConfig) -> Result<Complex64> {
    let poly = reduced_polynomial(&epsilon_triple(p), d);
    let roots = poly.roots()?;
    Ok(roots
        .into_iter()
        .filter(|z| z.norm() > 0.0)
        .fold(
            Complex64::new(0.0, 0.0),
            |best, z| if z.norm() > best.norm() { z } else { best },
        ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaScan {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
    pub alpha_tol: f64,
    /// `|θ - π|` below this counts as a flip.
    pub flip_tol: f64,
}

impl AlphaScan {
    pub fn new(lo: f64, hi: f64) -> Self {
        AlphaScan {
            lo,
            hi,
            points: 200,
            alpha_tol: 1e-4,
            flip_tol: 1e-3,
        }
    }
}

/// First `α` in the range where a nonzero root of the reduced polynomial
/// reaches the unit circle.
pub fn critical_alpha(p: &MarketParams, d: &DelayConfig, lo: f64, hi: f64) -> Result<BifurcationPoint> {
    critical_alpha_with(p, d, &AlphaScan::new(lo, hi))
}

pub fn critical_alpha_with(p: &MarketParams, d: &DelayConfig, scan: &AlphaScan) -> Result<BifurcationPoint> {
    check_assumptions(p).require()?;
    if !(scan.lo >= 0.0 && scan.hi > scan.lo && scan.points >= 2) {
        return Err(Error::InvalidSpec(format!(
            "alpha range [{}, {}] with {} points",
            scan.lo, scan.hi, scan.points
        )));
    }
    let modulus = |alpha: f64| -> Result<(f64, Complex64)> {
        let z = dominant_reduced_root(&p.with_alpha(alpha)?, d)?;
        Ok((z.norm(), z))
    };
    let (m0, _) = modulus(scan.lo)?;
    if !(m0 < 1.0) {
        return Err(Error::NotStableAtStart {
            alpha: scan.lo,
            modulus: m0,
        });
    }
    let steps = scan.points - 1;
    let mut a = scan.lo;
    for k in 1..=steps {
        let b = scan.lo + (scan.hi - scan.lo) * k as f64 / steps as f64;
        let (mb, _) = modulus(b)?;
        if mb >= 1.0 {
            let (mut lo, mut hi) = (a, b);
            while hi - lo > scan.alpha_tol {
                let mid = 0.5 * (lo + hi);
                if modulus(mid)?.0 >= 1.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let alpha = 0.5 * (lo + hi);
            let (_, root) = modulus(hi)?;
            let theta = root.arg().abs();
            let at = p.with_alpha(alpha)?;
            let eps = epsilon_triple(&at);
            let kind = if (theta - PI).abs() < scan.flip_tol {
                BifurcationKind::Flip
            } else {
                BifurcationKind::NeimarkSacker
            };
            let poly = reduced_polynomial(&epsilon_triple(&p.with_alpha(hi)?), d);
            let residual = poly.eval(root).norm();
            return Ok(BifurcationPoint {
                alpha,
                kind,
                theta,
                eps1: eps.eps1,
                residual,
            });
        }
        a = b;
    }
    Err(Error::NoCrossing {
        lo: scan.lo,
        hi: scan.hi,
    })
}

/// The three stability-loss numbers side by side: the delay-free
/// threshold, the closed-form flip value for the parity class of the
/// delays, and the numerically detected first crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityLoss {
    pub delay_free_alpha: Option<f64>,
    pub flip_candidate: Option<BifurcationPoint>,
    pub detected: BifurcationPoint,
    /// Whether the closed-form flip coincides (to `1e-3`) with the detected crossing.
    pub flip_is_first: bool,
}

pub fn stability_loss(p: &MarketParams, d: &DelayConfig, lo: f64, hi: f64) -> Result<StabilityLoss> {
    stability_loss_with(p, d, &AlphaScan::new(lo, hi))
}

pub fn stability_loss_with(p: &MarketParams, d: &DelayConfig, scan: &AlphaScan) -> Result<StabilityLoss> {
    let detected = critical_alpha_with(p, d, scan)?;
    let flip_candidate = flip_boundary(p, d).ok();
    let flip_is_first = flip_candidate
        .is_some_and(|f| detected.kind == BifurcationKind::Flip && (f.alpha - detected.alpha).abs() < 1e-3);
    Ok(StabilityLoss {
        delay_free_alpha: delay_free_threshold(p),
        flip_candidate,
        detected,
        flip_is_first,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RegionRow {
    pub delta: f64,
    /// Upper end of the delay-independent stable range of `α`; absent when
    /// `(n-1)δ/2 >= 1` or the equilibrium does not exist.
    pub alpha_max: Option<f64>,
    /// Both positivity assumptions hold at this `δ`.
    pub feasible: bool,
}

/// Boundary `α_max(δ)` of the delay-free stability region over a `δ` grid,
/// using the intercepts and `b` of `template` with `n` private firms.
pub fn stability_region(template: &MarketParams, n: usize, deltas: &[f64]) -> Vec<RegionRow> {
    deltas
        .iter()
        .map(|&delta| {
            let p = template.with_n(n).and_then(|p| p.with_delta(delta));
            match p {
                Ok(p) => {
                    let feasible = check_assumptions(&p).both_hold();
                    RegionRow {
                        delta,
                        alpha_max: if feasible { delay_free_threshold(&p) } else { None },
                        feasible,
                    }
                }
                Err(_) => RegionRow {
                    delta,
                    alpha_max: None,
                    feasible: false,
                },
            }
        })
        .collect()
}
