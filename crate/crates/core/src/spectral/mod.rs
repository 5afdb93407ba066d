//! Characteristic polynomials of the linearized map and the stability tests
//! built on them.
//!
//! At the positive equilibrium the characteristic equation factors into
//! `(λ - (δ/2)λ^{-τ2})^{n-1}`, whose roots always lie inside the unit disk,
//! times the *reduced* equation
//!
//! ```text
//! ε0(ε1+1) λ^{-(τ0+τ1)} - (λ + ε1)(λ + ε2 λ^{-τ2}) = 0
//! ```
//!
//! with `ε0 = nδ²/2`, `ε1 = αK - 1` and `ε2 = (n-1)δ/2`. Polynomials here are
//! the equations multiplied through by the largest negative power, which
//! adds roots at `λ = 0`; those are kept and reported as exact zeros.

pub mod linalg;
pub mod poly;

use num_complex::Complex64;
use serde::Serialize;

pub use poly::Polynomial;

use crate::equilibria::check_assumptions;
use crate::error::{Error, Result};
use crate::params::{DelayConfig, MarketParams};

/// Default half-width of the band around `|λ| = 1` counted as "on the circle".
pub const ON_CIRCLE_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonTriple {
    pub eps0: f64,
    pub eps1: f64,
    pub eps2: f64,
}

impl EpsilonTriple {
    pub fn new(eps0: f64, eps1: f64, eps2: f64) -> Self {
        EpsilonTriple { eps0, eps1, eps2 }
    }
}

/// `ε0 = nδ²/2`, `ε1 = αK - 1`, `ε2 = (n-1)δ/2`. `ε1 + 1 > 0` needs A.1.
pub fn epsilon_triple(p: &MarketParams) -> EpsilonTriple {
    let n = p.n() as f64;
    let delta = p.delta();
    EpsilonTriple {
        eps0: 0.5 * n * delta * delta,
        eps1: p.alpha() * p.adjustment_gain() - 1.0,
        eps2: 0.5 * (n - 1.0) * delta,
    }
}

/// The adjustment speed at which `ε1` takes the given value.
pub fn alpha_for_eps1(p: &MarketParams, eps1: f64) -> f64 {
    (eps1 + 1.0) / p.adjustment_gain()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum PolyKind {
    Reduced,
    FullPositive,
    Boundary,
    NoPublicFirm,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Factor {
    pub poly: Polynomial,
    pub multiplicity: usize,
}

/// A characteristic polynomial together with the factorization it was built
/// from. Roots are taken factor by factor, so repeated factors give exactly
/// repeated roots.
#[derive(Debug, Clone, PartialEq)]
pub struct CharPoly {
    pub kind: PolyKind,
    pub delays: DelayConfig,
    factors: Vec<Factor>,
    expanded: Polynomial,
}

impl CharPoly {
    fn from_factors(kind: PolyKind, delays: DelayConfig, factors: Vec<Factor>) -> Self {
        let factors: Vec<Factor> = factors.into_iter().filter(|f| f.multiplicity > 0).collect();
        let expanded = factors
            .iter()
            .fold(Polynomial::one(), |acc, f| acc.mul(&f.poly.pow(f.multiplicity)));
        CharPoly {
            kind,
            delays,
            factors,
            expanded,
        }
    }

    /// Ascending coefficients of the expanded polynomial.
    pub fn coefficients(&self) -> &[f64] {
        self.expanded.coeffs()
    }

    pub fn polynomial(&self) -> &Polynomial {
        &self.expanded
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn degree(&self) -> usize {
        self.expanded.degree()
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.expanded.eval(z)
    }
}

/// `λ^{τ2+1} + c`
fn lagged_binomial(tau2: usize, c: f64) -> Polynomial {
    Polynomial::monomial(tau2 + 1, 1.0).add(&Polynomial::new(vec![c]))
}

/// Reduced equation multiplied through by `λ^{τ0+τ1+τ2}`:
/// `ε0(ε1+1)λ^{τ2} - (λ+ε1)(λ^{τ2+1}+ε2)λ^{τ0+τ1}`, leading coefficient `-1`.
pub fn reduced_polynomial(eps: &EpsilonTriple, d: &DelayConfig) -> Polynomial {
    let tau = d.tau_sum();
    let t2 = d.tau2;
    let mut c = vec![0.0; tau + t2 + 3];
    c[t2] += eps.eps0 * (eps.eps1 + 1.0);
    c[tau + t2 + 2] -= 1.0;
    c[tau + t2 + 1] -= eps.eps1;
    c[tau + 1] -= eps.eps2;
    c[tau] -= eps.eps1 * eps.eps2;
    Polynomial::new(c)
}

pub fn reduced_char_poly(eps: &EpsilonTriple, d: &DelayConfig) -> CharPoly {
    CharPoly::from_factors(
        PolyKind::Reduced,
        *d,
        vec![Factor {
            poly: reduced_polynomial(eps, d),
            multiplicity: 1,
        }],
    )
}

/// Left-hand side of the reduced equation in its original form, with
/// negative powers of `λ`.
pub fn reduced_equation(eps: &EpsilonTriple, d: &DelayConfig, lambda: Complex64) -> Complex64 {
    let tau = d.tau_sum() as i32;
    let t2 = d.tau2 as i32;
    eps.eps0 * (eps.eps1 + 1.0) * lambda.powi(-tau) - (lambda + eps.eps1) * (lambda + eps.eps2 * lambda.powi(-t2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum EquilibriumChoice {
    Boundary,
    Positive,
}

/// Full characteristic polynomial at one of the two equilibria.
///
/// Positive: `(λ^{τ2+1} - δ/2)^{n-1}` times the reduced polynomial.
/// Boundary: `(λ^{τ2+1} - δ/2)^{n-1} (λ - 1 - αM)(λ^{τ2+1} + (n-1)δ/2)`.
pub fn full_char_poly(p: &MarketParams, d: &DelayConfig, which: EquilibriumChoice) -> Result<CharPoly> {
    let report = check_assumptions(p);
    let delta = p.delta();
    let private = Factor {
        poly: lagged_binomial(d.tau2, -0.5 * delta),
        multiplicity: p.n() - 1,
    };
    match which {
        EquilibriumChoice::Positive => {
            report.require()?;
            let eps = epsilon_triple(p);
            Ok(CharPoly::from_factors(
                PolyKind::FullPositive,
                *d,
                vec![
                    private,
                    Factor {
                        poly: reduced_polynomial(&eps, d),
                        multiplicity: 1,
                    },
                ],
            ))
        }
        EquilibriumChoice::Boundary => {
            report.require_a1()?;
            let growth = Polynomial::new(vec![-1.0 - p.alpha() * p.boundary_growth(), 1.0]);
            let symmetric = lagged_binomial(d.tau2, 0.5 * (p.n() as f64 - 1.0) * delta);
            Ok(CharPoly::from_factors(
                PolyKind::Boundary,
                *d,
                vec![
                    private,
                    Factor {
                        poly: growth,
                        multiplicity: 1,
                    },
                    Factor {
                        poly: symmetric,
                        multiplicity: 1,
                    },
                ],
            ))
        }
    }
}

/// Characteristic polynomial of the private-firm subsystem without the
/// public firm: `(λ^{τ2+1} - δ/2)^{n-1}(λ^{τ2+1} + (n-1)δ/2)`.
pub fn no_public_firm_poly(p: &MarketParams, tau2: usize) -> Result<CharPoly> {
    if p.n() < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            reason: "the subsystem without a public firm needs n >= 2".into(),
        });
    }
    let delta = p.delta();
    Ok(CharPoly::from_factors(
        PolyKind::NoPublicFirm,
        DelayConfig::new(0, 0, tau2),
        vec![
            Factor {
                poly: lagged_binomial(tau2, -0.5 * delta),
                multiplicity: p.n() - 1,
            },
            Factor {
                poly: lagged_binomial(tau2, 0.5 * (p.n() as f64 - 1.0) * delta),
                multiplicity: 1,
            },
        ],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Classification {
    AsymptoticallyStable,
    NonHyperbolic,
    Unstable,
    Saddle,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub roots: Vec<Complex64>,
    pub max_modulus: f64,
    /// Largest modulus among roots that are not exactly zero.
    pub max_nonzero_modulus: f64,
    pub on_circle_count: usize,
    pub classification: Classification,
    pub tolerance: f64,
}

impl SpectrumReport {
    pub fn from_roots(roots: Vec<Complex64>, tol: f64) -> Self {
        let moduli: Vec<f64> = roots.iter().map(|z| z.norm()).collect();
        let max_modulus = moduli.iter().copied().fold(0.0, f64::max);
        let max_nonzero_modulus = moduli.iter().copied().filter(|&m| m > 0.0).fold(0.0, f64::max);
        let on_circle_count = moduli.iter().filter(|&&m| (m - 1.0).abs() < tol).count();
        let outside = moduli.iter().any(|&m| m > 1.0 + tol);
        let inside = moduli.iter().any(|&m| m < 1.0 - tol);
        let classification = if max_modulus < 1.0 - tol {
            Classification::AsymptoticallyStable
        } else if outside && inside && on_circle_count == 0 {
            Classification::Saddle
        } else if outside {
            Classification::Unstable
        } else {
            Classification::NonHyperbolic
        };
        SpectrumReport {
            roots,
            max_modulus,
            max_nonzero_modulus,
            on_circle_count,
            classification,
            tolerance: tol,
        }
    }

    /// Root of largest modulus (first one on ties).
    pub fn dominant(&self) -> Option<Complex64> {
        self.roots
            .iter()
            .copied()
            .fold(None, |best: Option<Complex64>, z| match best {
                Some(b) if b.norm() >= z.norm() => Some(b),
                _ => Some(z),
            })
    }

    pub fn moduli(&self) -> Vec<f64> {
        self.roots.iter().map(|z| z.norm()).collect()
    }
}

/// All roots of `cp` with multiplicity, classified with the default tolerance.
pub fn poly_roots(cp: &CharPoly) -> Result<SpectrumReport> {
    poly_roots_with_tol(cp, ON_CIRCLE_TOL)
}

pub fn poly_roots_with_tol(cp: &CharPoly, tol: f64) -> Result<SpectrumReport> {
    if cp.degree() == 0 {
        return Err(Error::DegreeZero);
    }
    let mut roots = Vec::with_capacity(cp.degree());
    for f in cp.factors() {
        if f.poly.degree() == 0 {
            continue;
        }
        let r = f.poly.roots()?;
        for _ in 0..f.multiplicity {
            roots.extend_from_slice(&r);
        }
    }
    Ok(SpectrumReport::from_roots(roots, tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DelayFreeVerdict {
    pub stable: bool,
    /// `1 - ε2`
    pub eps2_margin: f64,
    /// `(1-ε2-ε0)/(1-ε2+ε0) - ε1`
    pub eps1_margin: f64,
}

/// Schur-Cohn region of the undelayed reduced equation:
/// `ε2 < 1` and `ε1 < (1-ε2-ε0)/(1-ε2+ε0)`.
pub fn delay_free_stable(eps: &EpsilonTriple) -> DelayFreeVerdict {
    let eps2_margin = 1.0 - eps.eps2;
    let bound = (1.0 - eps.eps2 - eps.eps0) / (1.0 - eps.eps2 + eps.eps0);
    let eps1_margin = bound - eps.eps1;
    DelayFreeVerdict {
        stable: eps2_margin > 0.0 && eps1_margin > 0.0,
        eps2_margin,
        eps1_margin,
    }
}

/// Adjustment speed where the delay-free region ends, if `ε2 < 1`.
pub fn delay_free_threshold(p: &MarketParams) -> Option<f64> {
    let eps = epsilon_triple(p);
    if eps.eps2 >= 1.0 {
        return None;
    }
    let bound = (1.0 - eps.eps2 - eps.eps0) / (1.0 - eps.eps2 + eps.eps0);
    Some(alpha_for_eps1(p, bound))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DelayIndependence {
    /// The delays fall under one of the delay-independent results and the
    /// delay-free region holds: asymptotically stable for these delays.
    Stable,
    /// Covered delays but outside the delay-free region: the results give
    /// sufficiency only, so nothing follows.
    Unknown,
    NotApplicable,
}

/// Applies the delay-independent sufficient conditions, valid when `τ2 = 0`
/// or `τ0 + τ1 = τ2`.
pub fn delay_independent_verdict(eps: &EpsilonTriple, d: &DelayConfig) -> DelayIndependence {
    if d.tau2 != 0 && d.tau_sum() != d.tau2 {
        return DelayIndependence::NotApplicable;
    }
    if delay_free_stable(eps).stable {
        DelayIndependence::Stable
    } else {
        DelayIndependence::Unknown
    }
}

/// Spectrum of the private-firm subsystem; stable iff `(n-1)δ/2 < 1`.
pub fn no_public_firm_spectrum(p: &MarketParams, tau2: usize) -> Result<SpectrumReport> {
    poly_roots(&no_public_firm_poly(p, tau2)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn section4(alpha: f64) -> MarketParams {
        MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.4, alpha, 4).unwrap()
    }

    fn has_root(report: &SpectrumReport, z: Complex64, tol: f64) -> usize {
        report.roots.iter().filter(|r| (*r - z).norm() < tol).count()
    }

    #[test]
    fn epsilons_at_section4() {
        let e = epsilon_triple(&section4(1.0));
        assert!((e.eps0 - 0.32).abs() < 1e-15);
        assert!((e.eps2 - 0.6).abs() < 1e-15);
        assert!((e.eps1 + 0.0625).abs() < 1e-15);
        let single = MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.4, 1.0, 1).unwrap();
        assert_eq!(epsilon_triple(&single).eps2, 0.0);
        let p = section4(1.0 / 0.9375);
        assert!(epsilon_triple(&p).eps1.abs() < 1e-15);
    }

    #[test]
    fn undelayed_reduced_quadratic() {
        let e = EpsilonTriple::new(0.32, -0.0625, 0.6);
        let cp = reduced_char_poly(&e, &DelayConfig::NONE);
        let c = cp.coefficients();
        assert_eq!(c.len(), 3);
        assert_eq!(c[2], -1.0);
        assert!((c[1] + (e.eps1 + e.eps2)).abs() < 1e-15);
        assert!((c[0] + (e.eps1 * e.eps2 - e.eps0 * (e.eps1 + 1.0))).abs() < 1e-15);

        // quadratic formula on λ² + 0.5375λ - 0.3375
        let (bq, cq) = (e.eps1 + e.eps2, e.eps1 * e.eps2 - e.eps0 * (e.eps1 + 1.0));
        let disc = (bq * bq - 4.0 * cq).sqrt();
        let r1 = (-bq + disc) / 2.0;
        let r2 = (-bq - disc) / 2.0;
        assert!((r1 - 0.3713).abs() < 1e-4 && (r2 + 0.9089).abs() < 1e-4);
        let rep = poly_roots(&cp).unwrap();
        assert_eq!(has_root(&rep, Complex64::new(r1, 0.0), 1e-14), 1);
        assert_eq!(has_root(&rep, Complex64::new(r2, 0.0), 1e-14), 1);
        assert_eq!(rep.classification, Classification::AsymptoticallyStable);
    }

    #[test]
    fn reduced_degree() {
        let e = epsilon_triple(&section4(1.0));
        assert_eq!(reduced_char_poly(&e, &DelayConfig::new(2, 4, 8)).degree(), 16);
    }

    #[test]
    fn reduced_polynomial_matches_equation() {
        let e = EpsilonTriple::new(0.32, 0.3, 0.6);
        let d = DelayConfig::new(3, 2, 4);
        let poly = reduced_polynomial(&e, &d);
        for z in [
            Complex64::new(0.3, 0.7),
            Complex64::new(-1.1, 0.2),
            Complex64::new(0.9, 0.0),
        ] {
            let lhs = poly.eval(z);
            let rhs = reduced_equation(&e, &d, z) * z.powi(9);
            assert!((lhs - rhs).norm() < 1e-13);
        }
    }

    #[test]
    fn boundary_roots() {
        let cp = full_char_poly(&section4(1.0), &DelayConfig::NONE, EquilibriumChoice::Boundary).unwrap();
        let rep = poly_roots(&cp).unwrap();
        assert_eq!(rep.roots.len(), 5);
        assert_eq!(has_root(&rep, Complex64::new(1.75, 0.0), 1e-13), 1);
        assert_eq!(has_root(&rep, Complex64::new(0.2, 0.0), 1e-13), 3);
        assert_eq!(has_root(&rep, Complex64::new(-0.6, 0.0), 1e-13), 1);
        assert_eq!(rep.classification, Classification::Saddle);
    }

    #[test]
    fn boundary_requires_a1() {
        let p = MarketParams::from_intercepts(1.0, 2.5, 1.0, 0.4, 1.0, 4).unwrap();
        assert!(matches!(
            full_char_poly(&p, &DelayConfig::NONE, EquilibriumChoice::Boundary),
            Err(Error::AssumptionViolated { .. })
        ));
    }

    #[test]
    fn positive_full_with_single_private_firm_is_reduced() {
        let p = MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.4, 1.3, 1).unwrap();
        let d = DelayConfig::new(2, 1, 3);
        let full = full_char_poly(&p, &d, EquilibriumChoice::Positive).unwrap();
        let red = reduced_char_poly(&epsilon_triple(&p), &d);
        assert_eq!(full.coefficients(), red.coefficients());
    }

    #[test]
    fn positive_full_has_private_roots() {
        let cp = full_char_poly(&section4(1.0), &DelayConfig::new(1, 1, 0), EquilibriumChoice::Positive).unwrap();
        let rep = poly_roots(&cp).unwrap();
        assert_eq!(has_root(&rep, Complex64::new(0.2, 0.0), 1e-13), 3);
    }

    #[test]
    fn unit_circle_roots_are_non_hyperbolic() {
        let cp = CharPoly::from_factors(
            PolyKind::Reduced,
            DelayConfig::NONE,
            vec![Factor {
                poly: Polynomial::new(vec![-1.0, 0.0, 1.0]),
                multiplicity: 1,
            }],
        );
        assert_eq!(poly_roots(&cp).unwrap().classification, Classification::NonHyperbolic);
    }

    #[test]
    fn classification_rules() {
        let c = |v: &[f64]| {
            SpectrumReport::from_roots(v.iter().map(|&x| Complex64::new(x, 0.0)).collect(), 1e-7).classification
        };
        assert_eq!(c(&[0.5, -0.9]), Classification::AsymptoticallyStable);
        assert_eq!(c(&[1.5, 0.5]), Classification::Saddle);
        assert_eq!(c(&[1.5, 1.2]), Classification::Unstable);
        assert_eq!(c(&[1.5, 1.0, 0.2]), Classification::Unstable);
        assert_eq!(c(&[1.0, 0.2]), Classification::NonHyperbolic);
        assert_eq!(c(&[0.0, 2.0]), Classification::Saddle);
    }

    #[test]
    fn delay_free_region_at_section4() {
        let v = delay_free_stable(&epsilon_triple(&section4(1.0)));
        assert!(v.stable);
        assert!((v.eps1_margin - (0.08 / 0.72 + 0.0625)).abs() < 1e-14);
        assert!((v.eps2_margin - 0.4).abs() < 1e-15);
        let v = delay_free_stable(&epsilon_triple(&section4(1.3)));
        assert!(!v.stable);
        assert!((epsilon_triple(&section4(1.3)).eps1 - 0.21875).abs() < 1e-14);

        let threshold = delay_free_threshold(&section4(1.0)).unwrap();
        assert!((threshold - 1.185).abs() < 5e-4);
        assert!(delay_free_stable(&epsilon_triple(&section4(threshold - 1e-9))).stable);
        assert!(!delay_free_stable(&epsilon_triple(&section4(threshold + 1e-9))).stable);
    }

    #[test]
    fn delay_independent_cases() {
        let inside = epsilon_triple(&section4(1.0));
        let outside = epsilon_triple(&section4(1.3));
        assert_eq!(
            delay_independent_verdict(&inside, &DelayConfig::new(3, 5, 8)),
            DelayIndependence::Stable
        );
        assert_eq!(
            delay_independent_verdict(&inside, &DelayConfig::new(7, 2, 0)),
            DelayIndependence::Stable
        );
        assert_eq!(
            delay_independent_verdict(&outside, &DelayConfig::new(7, 2, 0)),
            DelayIndependence::Unknown
        );
        assert_eq!(
            delay_independent_verdict(&inside, &DelayConfig::new(5, 3, 3)),
            DelayIndependence::NotApplicable
        );
    }

    #[test]
    fn no_public_firm_cases() {
        let rep = no_public_firm_spectrum(&section4(1.0), 0).unwrap();
        assert_eq!(has_root(&rep, Complex64::new(0.2, 0.0), 1e-14), 3);
        assert_eq!(has_root(&rep, Complex64::new(-0.6, 0.0), 1e-14), 1);
        assert_eq!(rep.classification, Classification::AsymptoticallyStable);

        let p = MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.5, 1.0, 6).unwrap();
        let rep = no_public_firm_spectrum(&p, 0).unwrap();
        assert_eq!(has_root(&rep, Complex64::new(-1.25, 0.0), 1e-14), 1);
        assert_eq!(rep.classification, Classification::Saddle);

        let rep = no_public_firm_spectrum(&section4(1.0), 1).unwrap();
        let (a, b) = (0.2_f64.sqrt(), 0.6_f64.sqrt());
        assert!(rep
            .moduli()
            .iter()
            .all(|m| (m - a).abs() < 1e-14 || (m - b).abs() < 1e-14));

        let single = MarketParams::from_intercepts(2.0, 2.5, 1.0, 0.5, 1.0, 1).unwrap();
        assert!(no_public_firm_spectrum(&single, 0).is_err());
    }

    #[test]
    fn jacobian_eigenvalue_beside_a_defective_zero() {
        // deep delays put a simple root at -0.0242 next to a large nilpotent block
        let p = MarketParams::from_intercepts(
            0.6636664149541861,
            0.8957087291465341,
            1.7890167382872548,
            0.8340826303526087,
            0.15910418774341134,
            3,
        )
        .unwrap();
        let d = DelayConfig::new(6, 3, 8);
        let e = crate::positive_equilibrium(&p).unwrap();
        let j = crate::model::embedded_jacobian(&e.history(&d), &p, &d).unwrap();
        let root = poly_roots(&full_char_poly(&p, &d, EquilibriumChoice::Positive).unwrap())
            .unwrap()
            .roots
            .into_iter()
            .find(|z| (z.re + 0.0242).abs() < 1e-3)
            .unwrap();
        let raw = linalg::eigenvalues(&j).unwrap();
        assert!(raw.iter().all(|z| (z - root).norm() > 1e-6));
        let ev = linalg::eigenvalues_polished(&j).unwrap();
        assert!(ev.iter().any(|z| (z - root).norm() < 1e-12), "{root}");
    }
}
