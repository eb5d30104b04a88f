//! Finite fractional power series Σ_j C_j (t - t0)^{γ_j - 1} with matrix
//! coefficients, closed under the Riemann-Liouville integral and derivative.
//!
//! Both operators act termwise through the power rule
//!
//!   J^a (t-t0)^{γ-1} = Γ(γ)/Γ(γ+a) (t-t0)^{γ+a-1},
//!   D^a (t-t0)^{γ-1} = Γ(γ)/Γ(γ-a) (t-t0)^{γ-a-1},
//!
//! so every operation in this module is exact up to floating-point rounding.
//! A derivative that lands an exponent on a pole of Γ annihilates the term;
//! that is how D^α kills the kernel (t-t0)^{α-1}/Γ(α).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::specfun::{beta, gamma, recip_gamma, POLE_TOLERANCE};

/// Exponents closer than this merge into a single term.
pub const EXPONENT_MERGE_TOL: f64 = 1e-12;

/// One term C (t - t0)^{γ - 1}; `exponent` stores γ.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTerm {
    pub exponent: f64,
    pub coeff: DMatrix<f64>,
}

/// A finite sum of fractional powers anchored at `origin`, with matrix
/// coefficients of a common shape. Invariants after construction: exponents
/// are finite, strictly positive, strictly increasing, and no coefficient is
/// the zero matrix. Column vectors are series with `cols == 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct FracPowerSeries {
    origin: f64,
    rows: usize,
    cols: usize,
    terms: Vec<SeriesTerm>,
}

fn validate_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch("series coefficients must be non-empty matrices".into()));
    }
    Ok(())
}

impl FracPowerSeries {
    /// Builds a series from (γ, C) pairs, sorting by exponent, merging
    /// exponents within [`EXPONENT_MERGE_TOL`] and dropping zero coefficients.
    pub fn new(origin: f64, rows: usize, cols: usize, terms: Vec<(f64, DMatrix<f64>)>) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidParameter(format!("series origin {origin} is not finite")));
        }
        validate_shape(rows, cols)?;
        let mut collected = Vec::with_capacity(terms.len());
        for (exponent, coeff) in terms {
            if !exponent.is_finite() || exponent <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "series exponent γ must be finite and > 0, got {exponent}"
                )));
            }
            if coeff.nrows() != rows || coeff.ncols() != cols {
                return Err(Error::DimensionMismatch(format!(
                    "series coefficient is {}x{}, expected {rows}x{cols}",
                    coeff.nrows(),
                    coeff.ncols()
                )));
            }
            collected.push(SeriesTerm { exponent, coeff });
        }
        collected.sort_by(|a, b| a.exponent.total_cmp(&b.exponent));
        let mut merged: Vec<SeriesTerm> = Vec::with_capacity(collected.len());
        for term in collected {
            match merged.last_mut() {
                Some(last) if (term.exponent - last.exponent).abs() <= EXPONENT_MERGE_TOL => {
                    last.coeff += &term.coeff;
                }
                _ => merged.push(term),
            }
        }
        merged.retain(|t| t.coeff.amax() > 0.0);
        Ok(Self { origin, rows, cols, terms: merged })
    }

    /// The empty series (identically zero).
    pub fn zero(origin: f64, rows: usize, cols: usize) -> Self {
        Self { origin, rows, cols, terms: Vec::new() }
    }

    /// A constant function: single term with γ = 1.
    pub fn constant(origin: f64, coeff: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = coeff.shape();
        Self::new(origin, rows, cols, vec![(1.0, coeff)])
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn terms(&self) -> &[SeriesTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest exponent γ, i.e. the leading behaviour near the origin.
    pub fn min_exponent(&self) -> Option<f64> {
        self.terms.first().map(|t| t.exponent)
    }

    /// Evaluates the series at t. Requires t > origin; t = origin is also
    /// accepted when every exponent satisfies γ >= 1, where terms with γ > 1
    /// vanish and terms with γ = 1 contribute their coefficient.
    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        if !t.is_finite() {
            return Err(Error::Domain(format!("evaluation point {t} is not finite")));
        }
        if t < self.origin {
            return Err(Error::Domain(format!(
                "evaluation point {t} lies before the series origin {}",
                self.origin
            )));
        }
        let mut acc = DMatrix::zeros(self.rows, self.cols);
        if t == self.origin {
            for term in &self.terms {
                let p = term.exponent - 1.0;
                if p < -EXPONENT_MERGE_TOL {
                    return Err(Error::Domain(format!(
                        "series is singular at its origin (exponent γ = {} < 1)",
                        term.exponent
                    )));
                }
                if p.abs() <= EXPONENT_MERGE_TOL {
                    acc += &term.coeff;
                }
            }
            return Ok(acc);
        }
        let d = t - self.origin;
        for term in &self.terms {
            acc += &term.coeff * d.powf(term.exponent - 1.0);
        }
        Ok(acc)
    }

    /// Riemann-Liouville integral of order a > 0, termwise power rule.
    pub fn rl_integral(&self, a: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(Error::InvalidParameter(format!("integral order must be positive, got {a}")));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let factor = gamma(term.exponent)? * recip_gamma(term.exponent + a);
            terms.push((term.exponent + a, &term.coeff * factor));
        }
        Self::new(self.origin, self.rows, self.cols, terms)
    }

    /// Riemann-Liouville derivative of order a ∈ (0, 1), termwise power rule.
    ///
    /// A term whose shifted exponent γ - a lands on a pole of Γ (within
    /// [`POLE_TOLERANCE`] of a non-positive integer) is annihilated. A shifted
    /// exponent that is negative without being a pole would leave a power
    /// that is not locally integrable, which is outside the type's domain and
    /// an error.
    pub fn rl_derivative(&self, a: f64) -> Result<Self> {
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "derivative order must lie in (0, 1), got {a}"
            )));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for term in &self.terms {
            let shifted = term.exponent - a;
            let pole = shifted <= POLE_TOLERANCE && (shifted - shifted.round()).abs() < POLE_TOLERANCE;
            if pole {
                continue;
            }
            if shifted < 0.0 {
                return Err(Error::NotIntegrable { exponent: shifted });
            }
            let factor = gamma(term.exponent)? * recip_gamma(shifted);
            terms.push((shifted, &term.coeff * factor));
        }
        Self::new(self.origin, self.rows, self.cols, terms)
    }

    /// Multiplies every term by the scalar c.
    pub fn scale(&self, c: f64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|t| SeriesTerm { exponent: t.exponent, coeff: &t.coeff * c })
            .filter(|t| t.coeff.amax() > 0.0)
            .collect();
        Self { origin: self.origin, rows: self.rows, cols: self.cols, terms }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.origin != other.origin {
            return Err(Error::OriginMismatch { left: self.origin, right: other.origin });
        }
        if self.rows != other.rows || self.cols != other.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} series to {}x{} series",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        let mut terms: Vec<(f64, DMatrix<f64>)> =
            self.terms.iter().map(|t| (t.exponent, t.coeff.clone())).collect();
        terms.extend(other.terms.iter().map(|t| (t.exponent, t.coeff.clone())));
        Self::new(self.origin, self.rows, self.cols, terms)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    /// Multiplies by the monomial (t - t0)^p, shifting every exponent by p.
    /// Each shifted exponent must stay positive.
    pub fn shift_exponents(&self, p: f64) -> Result<Self> {
        let terms = self
            .terms
            .iter()
            .map(|t| (t.exponent + p, t.coeff.clone()))
            .collect();
        Self::new(self.origin, self.rows, self.cols, terms)
    }

    /// Right-multiplies every coefficient: self(t) · m.
    pub fn mul_right_matrix(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != self.cols {
            return Err(Error::DimensionMismatch(format!(
                "cannot right-multiply {}x{} series by {}x{} matrix",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        let terms = self.terms.iter().map(|t| (t.exponent, &t.coeff * m)).collect();
        Self::new(self.origin, self.rows, m.ncols(), terms)
    }

    /// Left-multiplies every coefficient: m · self(t).
    pub fn mul_left_matrix(&self, m: &DMatrix<f64>) -> Result<Self> {
        if m.ncols() != self.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot left-multiply {}x{} series by {}x{} matrix",
                self.rows,
                self.cols,
                m.nrows(),
                m.ncols()
            )));
        }
        let terms = self.terms.iter().map(|t| (t.exponent, m * &t.coeff)).collect();
        Self::new(self.origin, m.nrows(), self.cols, terms)
    }

    /// Convolution ∫_{t0}^{t} self(t - τ) other(τ) dτ where this series is
    /// read as a kernel in powers of (t - τ) (its stored origin is ignored)
    /// and `other` is anchored at t0. Termwise Beta identity:
    ///
    ///   ∫_{t0}^t (t-τ)^{a-1} (τ-t0)^{b-1} dτ = B(a, b) (t-t0)^{a+b-1}.
    pub fn power_convolve(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot convolve {}x{} kernel with {}x{} series",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for kt in &self.terms {
            for gt in &other.terms {
                let b = beta(kt.exponent, gt.exponent)?;
                terms.push((kt.exponent + gt.exponent, (&kt.coeff * &gt.coeff) * b));
            }
        }
        Self::new(other.origin, self.rows, other.cols, terms)
    }

    /// Largest max-norm over the coefficient matrices.
    pub fn max_coeff_norm(&self) -> f64 {
        self.terms.iter().map(|t| t.coeff.amax()).fold(0.0, f64::max)
    }

    /// Truncation measure over (origin, origin + span]: the coefficient
    /// max-norm, scaled by span^{γ-1} for γ >= 1. Terms with γ < 1 are
    /// unbounded at the origin, so only their regular factor is counted.
    pub fn sup_measure(&self, span: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let scale = if t.exponent >= 1.0 { span.powf(t.exponent - 1.0) } else { 1.0 };
                t.coeff.amax() * scale
            })
            .sum()
    }

    /// Sup over the union of exponents of the coefficient difference
    /// (max-norm); exponents are matched within 1e-9. Used by residual and
    /// equality checks.
    pub fn term_distance(&self, other: &Self) -> f64 {
        let mut worst = 0.0f64;
        let mut i = 0;
        let mut j = 0;
        while i < self.terms.len() && j < other.terms.len() {
            let a = &self.terms[i];
            let b = &other.terms[j];
            if (a.exponent - b.exponent).abs() <= 1e-9 {
                worst = worst.max((&a.coeff - &b.coeff).amax());
                i += 1;
                j += 1;
            } else if a.exponent < b.exponent {
                worst = worst.max(a.coeff.amax());
                i += 1;
            } else {
                worst = worst.max(b.coeff.amax());
                j += 1;
            }
        }
        for t in &self.terms[i..] {
            worst = worst.max(t.coeff.amax());
        }
        for t in &other.terms[j..] {
            worst = worst.max(t.coeff.amax());
        }
        worst
    }
}

/// Matrix polynomial Σ_m A_m (t - t0)^m with integer powers, used for
/// coefficient matrices A(t). Powers are sorted and distinct; zero
/// coefficients are dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPolynomial {
    origin: f64,
    dim: usize,
    coeffs: Vec<(u32, DMatrix<f64>)>,
}

impl MatrixPolynomial {
    pub fn new(origin: f64, dim: usize, coeffs: Vec<(u32, DMatrix<f64>)>) -> Result<Self> {
        if !origin.is_finite() {
            return Err(Error::InvalidParameter(format!("polynomial origin {origin} is not finite")));
        }
        if dim == 0 {
            return Err(Error::DimensionMismatch("polynomial dimension must be positive".into()));
        }
        let mut collected = coeffs;
        for (_, a) in &collected {
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "polynomial coefficient is {}x{}, expected {dim}x{dim}",
                    a.nrows(),
                    a.ncols()
                )));
            }
        }
        collected.sort_by_key(|(m, _)| *m);
        let mut merged: Vec<(u32, DMatrix<f64>)> = Vec::with_capacity(collected.len());
        for (m, a) in collected {
            match merged.last_mut() {
                Some((last_m, last_a)) if *last_m == m => *last_a += &a,
                _ => merged.push((m, a)),
            }
        }
        merged.retain(|(_, a)| a.amax() > 0.0);
        Ok(Self { origin, dim, coeffs: merged })
    }

    pub fn zero(origin: f64, dim: usize) -> Self {
        Self { origin, dim, coeffs: Vec::new() }
    }

    pub fn constant(origin: f64, a: DMatrix<f64>) -> Result<Self> {
        let dim = a.nrows();
        Self::new(origin, dim, vec![(0, a)])
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeffs(&self) -> &[(u32, DMatrix<f64>)] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<u32> {
        self.coeffs.last().map(|(m, _)| *m)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        let d = t - self.origin;
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        for (m, a) in &self.coeffs {
            acc += a * d.powi(*m as i32);
        }
        acc
    }

    /// Re-expands the polynomial about a new origin s via the binomial
    /// theorem: Σ_m A_m ((t-s) + (s-t0))^m.
    pub fn reanchored(&self, s: f64) -> Result<Self> {
        if !s.is_finite() {
            return Err(Error::InvalidParameter(format!("new origin {s} is not finite")));
        }
        let shift = s - self.origin;
        let max_m = self.degree().unwrap_or(0) as usize;
        let mut new_coeffs: Vec<(u32, DMatrix<f64>)> = Vec::new();
        for j in 0..=max_m {
            let mut acc = DMatrix::zeros(self.dim, self.dim);
            let mut nonzero = false;
            for (m, a) in &self.coeffs {
                let m = *m as usize;
                if m < j {
                    continue;
                }
                acc += a * (binomial(m, j) * shift.powi((m - j) as i32));
                nonzero = true;
            }
            if nonzero {
                new_coeffs.push((j as u32, acc));
            }
        }
        Self::new(s, self.dim, new_coeffs)
    }

    /// A(t) · f(t): every polynomial coefficient left-multiplies every series
    /// coefficient, with exponents shifted by the integer power:
    /// (m, A_m) × (γ, C) → (γ + m, A_m C).
    pub fn mul_series(&self, f: &FracPowerSeries) -> Result<FracPowerSeries> {
        if self.origin != f.origin() {
            return Err(Error::OriginMismatch { left: self.origin, right: f.origin() });
        }
        if self.dim != f.rows() {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {0}x{0} polynomial by {1}x{2} series",
                self.dim,
                f.rows(),
                f.cols()
            )));
        }
        let mut terms = Vec::with_capacity(self.coeffs.len() * f.terms().len());
        for (m, a) in &self.coeffs {
            for t in f.terms() {
                terms.push((t.exponent + *m as f64, a * &t.coeff));
            }
        }
        FracPowerSeries::new(self.origin, self.dim, f.cols(), terms)
    }
}

pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k.min(n));
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn scalar_series(origin: f64, terms: &[(f64, f64)]) -> FracPowerSeries {
        FracPowerSeries::new(
            origin,
            1,
            1,
            terms.iter().map(|&(g, c)| (g, DMatrix::from_element(1, 1, c))).collect(),
        )
        .unwrap()
    }

    fn kernel_series(origin: f64, alpha: f64, n: usize) -> FracPowerSeries {
        // (t - t0)^{α-1}/Γ(α) · I
        FracPowerSeries::new(
            origin,
            n,
            n,
            vec![(alpha, DMatrix::identity(n, n) * recip_gamma(alpha))],
        )
        .unwrap()
    }

    #[test]
    fn construction_sorts_merges_and_drops_zeros() {
        let f = scalar_series(0.0, &[(2.0, 1.0), (0.5, 3.0), (2.0 + 5e-13, -1.0), (1.0, 0.0)]);
        let exps: Vec<f64> = f.terms().iter().map(|t| t.exponent).collect();
        assert_eq!(exps, vec![0.5]);
        assert_relative_eq!(f.terms()[0].coeff[(0, 0)], 3.0);
    }

    #[test]
    fn construction_rejects_nonpositive_exponents_and_bad_shapes() {
        assert!(FracPowerSeries::new(0.0, 1, 1, vec![(0.0, DMatrix::identity(1, 1))]).is_err());
        assert!(FracPowerSeries::new(0.0, 1, 1, vec![(-0.5, DMatrix::identity(1, 1))]).is_err());
        assert!(FracPowerSeries::new(0.0, 2, 2, vec![(1.0, DMatrix::identity(3, 3))]).is_err());
    }

    #[test]
    fn eval_empty_series_is_zero() {
        let f = FracPowerSeries::zero(0.0, 2, 1);
        assert_eq!(f.eval(0.5).unwrap(), DMatrix::zeros(2, 1));
    }

    #[test]
    fn eval_kernel_term() {
        let alpha = 0.5;
        let f = kernel_series(0.0, alpha, 1);
        let t: f64 = 0.25;
        let want = t.powf(alpha - 1.0) * recip_gamma(alpha);
        assert_relative_eq!(f.eval(t).unwrap()[(0, 0)], want, max_relative = 1e-14);
    }

    #[test]
    fn eval_domain_rules_at_origin() {
        let singular = scalar_series(1.0, &[(0.5, 1.0)]);
        assert!(matches!(singular.eval(0.5), Err(Error::Domain(_))));
        assert!(matches!(singular.eval(1.0), Err(Error::Domain(_))));
        // All exponents >= 1: evaluation at the origin picks out the γ = 1 terms.
        let regular = scalar_series(1.0, &[(1.0, 2.5), (2.0, 7.0)]);
        assert_relative_eq!(regular.eval(1.0).unwrap()[(0, 0)], 2.5);
    }

    #[test]
    fn integral_power_rule_single_term() {
        // J^0.5 of the constant 1 is t^{1/2}/Γ(3/2).
        let f = scalar_series(0.0, &[(1.0, 1.0)]);
        let g = f.rl_integral(0.5).unwrap();
        assert_eq!(g.terms().len(), 1);
        assert_relative_eq!(g.terms()[0].exponent, 1.5);
        assert_relative_eq!(
            g.terms()[0].coeff[(0, 0)],
            1.0 / 0.88622692545275801365,
            max_relative = 1e-13
        );
    }

    #[test]
    fn integral_normalizes_kernel_to_one() {
        // J^{1-α} (t-t0)^{α-1}/Γ(α) = 1.
        for alpha in [0.3, 0.5, 0.7] {
            let f = kernel_series(2.0, alpha, 2);
            let g = f.rl_integral(1.0 - alpha).unwrap();
            assert_eq!(g.terms().len(), 1);
            assert_relative_eq!(g.terms()[0].exponent, 1.0, epsilon = 1e-14);
            let diff = (&g.terms()[0].coeff - DMatrix::identity(2, 2)).amax();
            assert!(diff <= 1e-14, "kernel normalization off by {diff}");
        }
    }

    #[test]
    fn derivative_annihilates_kernel() {
        // D^α (t-t0)^{α-1}/Γ(α) = 0: the shifted exponent hits the Γ pole at 0.
        for alpha in [0.3, 0.5, 0.7] {
            let f = kernel_series(0.0, alpha, 2);
            let g = f.rl_derivative(alpha).unwrap();
            assert!(g.is_zero());
        }
    }

    #[test]
    fn derivative_power_rule_matches_hand_value() {
        // D^α [α t^{2α}/Γ(2α+1)] = t^α/Γ(α) · t^0 ... exponent 2α+1 → α+1.
        let alpha = 0.5f64;
        let c = alpha * recip_gamma(2.0 * alpha + 1.0);
        let f = scalar_series(0.0, &[(2.0 * alpha + 1.0, c)]);
        let g = f.rl_derivative(alpha).unwrap();
        assert_eq!(g.terms().len(), 1);
        assert_relative_eq!(g.terms()[0].exponent, alpha + 1.0, epsilon = 1e-12);
        assert_relative_eq!(g.terms()[0].coeff[(0, 0)], recip_gamma(alpha), max_relative = 1e-13);
    }

    #[test]
    fn derivative_rejects_nonintegrable_results() {
        let f = scalar_series(0.0, &[(0.3, 1.0)]);
        assert!(matches!(f.rl_derivative(0.5), Err(Error::NotIntegrable { .. })));
    }

    #[test]
    fn derivative_inverts_integral_spot() {
        let f = scalar_series(0.0, &[(0.7, 2.0), (1.9, -0.4), (3.1, 1.25)]);
        for a in [0.25, 0.5, 0.75] {
            let back = f.rl_integral(a).unwrap().rl_derivative(a).unwrap();
            assert!(back.term_distance(&f) <= 1e-13 * f.max_coeff_norm());
        }
    }

    #[test]
    fn integral_semigroup_spot() {
        let f = scalar_series(0.0, &[(0.4, 1.0), (2.2, 3.0)]);
        let lhs = f.rl_integral(0.3).unwrap().rl_integral(0.45).unwrap();
        let rhs = f.rl_integral(0.75).unwrap();
        assert!(lhs.term_distance(&rhs) <= 1e-13 * rhs.max_coeff_norm());
    }

    #[test]
    fn mul_series_shifts_exponents_by_integer_powers() {
        // A(t) = [[0, t],[0, 0]] times the 2x2 kernel: single term at γ = α+1.
        let alpha = 0.5;
        let a = MatrixPolynomial::new(
            0.0,
            2,
            vec![(1, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]))],
        )
        .unwrap();
        let base = kernel_series(0.0, alpha, 2);
        let prod = a.mul_series(&base).unwrap();
        assert_eq!(prod.terms().len(), 1);
        assert_relative_eq!(prod.terms()[0].exponent, alpha + 1.0);
        assert_relative_eq!(prod.terms()[0].coeff[(0, 1)], recip_gamma(alpha), max_relative = 1e-14);
        assert_eq!(prod.terms()[0].coeff[(1, 1)], 0.0);
    }

    #[test]
    fn mul_series_checks_origin_and_dimension() {
        let a = MatrixPolynomial::constant(0.0, DMatrix::identity(2, 2)).unwrap();
        let f_wrong_origin = kernel_series(1.0, 0.5, 2);
        assert!(matches!(a.mul_series(&f_wrong_origin), Err(Error::OriginMismatch { .. })));
        let f_wrong_dim = kernel_series(0.0, 0.5, 3);
        assert!(matches!(a.mul_series(&f_wrong_dim), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn power_convolve_kernel_with_constant_input() {
        // ∫ (t-τ)^{α-1}/Γ(α) · u dτ with u = (1, 0)ᵀ gives t^α/Γ(α+1) e1.
        let alpha = 0.5f64;
        let kernel = kernel_series(0.0, alpha, 2);
        let u = FracPowerSeries::constant(0.0, DMatrix::from_column_slice(2, 1, &[1.0, 0.0])).unwrap();
        let conv = kernel.power_convolve(&u).unwrap();
        assert_eq!(conv.terms().len(), 1);
        assert_relative_eq!(conv.terms()[0].exponent, alpha + 1.0);
        assert_relative_eq!(
            conv.terms()[0].coeff[(0, 0)],
            recip_gamma(alpha + 1.0),
            max_relative = 1e-13
        );
        assert_eq!(conv.terms()[0].coeff[(1, 0)], 0.0);
    }

    #[test]
    fn power_convolve_zero_operand_gives_zero() {
        let kernel = kernel_series(0.0, 0.5, 2);
        let z = FracPowerSeries::zero(0.0, 2, 1);
        assert!(kernel.power_convolve(&z).unwrap().is_zero());
    }

    #[test]
    fn shift_exponents_multiplies_by_monomial() {
        let f = scalar_series(0.0, &[(0.5, 2.0)]);
        let g = f.shift_exponents(1.0).unwrap();
        let t = 0.8f64;
        assert_relative_eq!(
            g.eval(t).unwrap()[(0, 0)],
            t * f.eval(t).unwrap()[(0, 0)],
            max_relative = 1e-14
        );
    }

    #[test]
    fn reanchored_polynomial_evaluates_identically() {
        let a0 = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.0]);
        let a2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 2.0, -1.5]);
        let p = MatrixPolynomial::new(0.25, 2, vec![(0, a0), (2, a2)]).unwrap();
        let q = p.reanchored(1.1).unwrap();
        assert_eq!(q.origin(), 1.1);
        for t in [0.3, 0.9, 1.4, 2.0] {
            let diff = (p.eval(t) - q.eval(t)).amax();
            assert!(diff <= 1e-12, "re-anchored polynomial differs by {diff} at t = {t}");
        }
    }

    #[test]
    fn sup_measure_scales_masses_by_horizon_power() {
        let f = scalar_series(0.0, &[(0.5, 2.0), (3.0, 4.0)]);
        // γ < 1 contributes its coefficient; γ = 3 contributes 4·span².
        assert_relative_eq!(f.sup_measure(2.0), 2.0 + 16.0);
    }
}
