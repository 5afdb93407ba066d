//! Real polynomials in ascending-coefficient form and their complex roots.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::linalg;
use crate::error::{Error, Result};

/// `coeffs[k]` multiplies `λ^k`. Trailing (high-degree) zeros are trimmed
/// on construction, so the last coefficient is the leading one.
#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial {
    coeffs: Vec<f64>,
}

impl Polynomial {
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.len() > 1 && *coeffs.last().unwrap() == 0.0 {
            coeffs.pop();
        }
        if coeffs.is_empty() {
            coeffs.push(0.0);
        }
        Polynomial { coeffs }
    }

    pub fn monomial(power: usize, coeff: f64) -> Self {
        let mut c = vec![0.0; power + 1];
        c[power] = coeff;
        Polynomial::new(c)
    }

    pub fn one() -> Self {
        Polynomial { coeffs: vec![1.0] }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn leading(&self) -> f64 {
        *self.coeffs.last().unwrap()
    }

    /// Number of exactly-zero low-order coefficients, i.e. the multiplicity of the root at 0.
    pub fn zero_root_multiplicity(&self) -> usize {
        if self.coeffs.iter().all(|&c| c == 0.0) {
            return 0;
        }
        self.coeffs.iter().take_while(|&&c| c == 0.0).count()
    }

    pub fn mul(&self, other: &Polynomial) -> Polynomial {
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        Polynomial::new(out)
    }

    pub fn pow(&self, k: usize) -> Polynomial {
        (0..k).fold(Polynomial::one(), |acc, _| acc.mul(self))
    }

    pub fn add(&self, other: &Polynomial) -> Polynomial {
        let len = self.coeffs.len().max(other.coeffs.len());
        let c = (0..len)
            .map(|k| self.coeffs.get(k).unwrap_or(&0.0) + other.coeffs.get(k).unwrap_or(&0.0))
            .collect();
        Polynomial::new(c)
    }

    pub fn scale(&self, s: f64) -> Polynomial {
        Polynomial::new(self.coeffs.iter().map(|c| c * s).collect())
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        self.coeffs
            .iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * z + c)
    }

    /// Value and first derivative by Horner's scheme.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let mut p = Complex64::new(0.0, 0.0);
        let mut dp = Complex64::new(0.0, 0.0);
        for &c in self.coeffs.iter().rev() {
            dp = dp * z + p;
            p = p * z + c;
        }
        (p, dp)
    }

    /// Sum of absolute coefficients weighted by `|z|^k`; a natural scale for residuals.
    pub fn magnitude_at(&self, r: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c.abs())
    }

    /// Frobenius companion matrix of the polynomial with its exact zero
    /// roots removed (subdiagonal ones, last column `-c_k / c_n`).
    pub fn companion(&self) -> DMatrix<f64> {
        let z = self.zero_root_multiplicity();
        let c = &self.coeffs[z..];
        let n = c.len() - 1;
        let lead = c[n];
        let mut m = DMatrix::zeros(n, n);
        for i in 1..n {
            m[(i, i - 1)] = 1.0;
        }
        for i in 0..n {
            m[(i, n - 1)] = -c[i] / lead;
        }
        m
    }

    /// All roots with multiplicity. Exactly-zero low coefficients are
    /// stripped first and reported as roots at 0; the rest come from the
    /// eigenvalues of the balanced companion matrix, each refined by a
    /// guarded Newton step.
    pub fn roots(&self) -> Result<Vec<Complex64>> {
        if self.degree() == 0 {
            return Err(Error::DegreeZero);
        }
        let zeros = self.zero_root_multiplicity();
        let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
        if self.degree() > zeros {
            let eig = linalg::eigenvalues(&self.companion())?;
            roots.extend(eig.into_iter().map(|r| self.newton_polish(r)));
        }
        Ok(roots)
    }

    fn newton_polish(&self, mut z: Complex64) -> Complex64 {
        let (mut p, _) = self.eval_with_derivative(z);
        let limit = 1e-6 * (1.0 + z.norm());
        let start = z;
        for _ in 0..3 {
            let (_, dp) = self.eval_with_derivative(z);
            if dp.norm() == 0.0 {
                break;
            }
            let next = z - p / dp;
            let (pn, _) = self.eval_with_derivative(next);
            if pn.norm() < p.norm() && (next - start).norm() < limit {
                z = next;
                p = pn;
            } else {
                break;
            }
        }
        // conjugate pairs of a real polynomial: keep real roots real
        if z.im.abs() < 1e-14 * (1.0 + z.re.abs()) {
            let real = Complex64::new(z.re, 0.0);
            if self.eval(real).norm() <= p.norm() {
                return real;
            }
        }
        z
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    #[test]
    fn trims_and_multiplies() {
        let p = Polynomial::new(vec![1.0, 2.0, 0.0, 0.0]);
        assert_eq!(p.degree(), 1);
        let q = Polynomial::new(vec![-1.0, 1.0]);
        assert_eq!(p.mul(&q).coeffs(), &[-1.0, -1.0, 2.0]);
        assert_eq!(q.pow(2).coeffs(), &[1.0, -2.0, 1.0]);
        assert_eq!(q.pow(0).coeffs(), &[1.0]);
    }

    #[test]
    fn unit_roots() {
        let p = Polynomial::new(vec![-1.0, 0.0, 1.0]);
        let mut r = p.roots().unwrap();
        r.sort_by(|a, b| a.re.partial_cmp(&b.re).unwrap());
        assert!(close(r[0], Complex64::new(-1.0, 0.0), 1e-14));
        assert!(close(r[1], Complex64::new(1.0, 0.0), 1e-14));
    }

    #[test]
    fn zero_roots_are_exact() {
        // λ^3 (λ - 0.5)
        let p = Polynomial::new(vec![0.0, 0.0, 0.0, -0.5, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.iter().filter(|z| z.norm() == 0.0).count(), 3);
        assert!(r.iter().any(|z| close(*z, Complex64::new(0.5, 0.0), 1e-15)));
    }

    #[test]
    fn degree_zero_is_an_error() {
        assert_eq!(Polynomial::new(vec![3.0]).roots(), Err(Error::DegreeZero));
    }

    #[test]
    fn roots_of_unity() {
        let p = Polynomial::new(vec![-1.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 5);
        for z in r {
            assert!((z.norm() - 1.0).abs() < 1e-14);
            assert!(p.eval(z).norm() < 1e-14);
        }
    }

    #[test]
    fn rotation_symmetric_companions() {
        // λ^4 - 0.2: zero diagonal and a spectrum invariant under λ -> iλ
        let p = Polynomial::new(vec![-0.2, 0.0, 0.0, 0.0, 1.0]);
        for z in p.roots().unwrap() {
            assert!((z.norm() - 0.2_f64.powf(0.25)).abs() < 1e-14);
        }
        let mut c = vec![0.0; 17];
        c[0] = 0.07997050297168357;
        c[14] = 0.8775215960574819;
        c[15] = 0.004391752254672587;
        c[16] = -1.0;
        let p = Polynomial::new(c);
        let r = p.roots().unwrap();
        assert_eq!(r.len(), 16);
        assert!(r.iter().all(|z| p.eval(*z).norm() < 1e-13));
    }

    #[test]
    fn derivative_by_horner() {
        let p = Polynomial::new(vec![1.0, -3.0, 0.0, 2.0]);
        let (v, dv) = p.eval_with_derivative(Complex64::new(2.0, 0.0));
        assert_eq!(v.re, 11.0);
        assert_eq!(dv.re, 21.0);
    }
}
