//! State-transition matrices Φ(t, t0) for D^α x = A(t) x, built as the
//! iterated-integral series
//!
//!   Φ(t, t0) = Σ_k term_k,   term_0 = (t−t0)^{α−1}/Γ(α) · I,
//!   term_{k+1} = J^α (A(t) · term_k),
//!
//! which satisfies D^α Φ = A Φ with the weighted initial value
//! J^{1−α} Φ(t, t0)|_{t→t0} = I. For polynomial A the recursion is carried
//! out exactly on the fractional power-series algebra; for sampled A the same
//! recursion runs through the grid operators. A companion two-variable form
//! Φ(t, τ) keeps its coefficients polynomial in (τ − t0), which is what the
//! inhomogeneous solution formula integrates against.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{grid_rl_integral_with, ProductWeights, SampledMatrixFunction};
use crate::series::{binomial, FracPowerSeries, MatrixPolynomial};
use crate::specfun::{beta, gamma, recip_gamma};

/// Truncation controls for the series construction.
#[derive(Debug, Clone, Copy)]
pub struct TransitionConfig {
    /// Stop once a term's sup measure over the horizon falls below this.
    pub tol: f64,
    /// Hard cap on the number of kept terms.
    pub max_terms: usize,
}

impl Default for TransitionConfig {
    fn default() -> Self {
        Self { tol: 1e-12, max_terms: 64 }
    }
}

impl TransitionConfig {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "truncation tolerance must be positive, got {}",
                self.tol
            )));
        }
        if self.max_terms == 0 {
            return Err(Error::InvalidParameter("max_terms must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converging,
    Inconclusive,
    Diverging,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Verdict::Converging => "converging",
            Verdict::Inconclusive => "inconclusive",
            Verdict::Diverging => "diverging",
        };
        f.write_str(s)
    }
}

/// Per-term sup measures over the horizon, their consecutive ratios, and a
/// heuristic verdict. The verdict is `Converging` only when the decay is
/// actually observed (exact termination, or the last three ratios all < 1);
/// it is a checkable surrogate for uniform convergence, not a proof.
#[derive(Debug, Clone)]
pub struct ConvergenceReport {
    pub term_measures: Vec<f64>,
    pub ratios: Vec<f64>,
    pub verdict: Verdict,
}

impl ConvergenceReport {
    fn from_measures(term_measures: Vec<f64>, terminated_exactly: bool) -> Self {
        let ratios: Vec<f64> = term_measures
            .windows(2)
            .filter(|w| w[0] > 0.0)
            .map(|w| w[1] / w[0])
            .collect();
        let verdict = if terminated_exactly {
            Verdict::Converging
        } else if ratios.len() >= 3 && ratios.iter().rev().take(3).all(|r| *r < 1.0) {
            Verdict::Converging
        } else if ratios.last().is_some_and(|r| *r >= 1.0) {
            Verdict::Diverging
        } else {
            Verdict::Inconclusive
        };
        Self { term_measures, ratios, verdict }
    }

    pub fn last_measure(&self) -> f64 {
        self.term_measures.last().copied().unwrap_or(0.0)
    }
}

impl fmt::Display for ConvergenceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} after {} terms, last term measure {:.3e}",
            self.verdict,
            self.term_measures.len(),
            self.last_measure()
        )
    }
}

/// Truncated Φ(t, t0) as a fractional power series plus truncation metadata.
#[derive(Debug, Clone)]
pub struct TransitionMatrix {
    series: FracPowerSeries,
    term_series: Vec<FracPowerSeries>,
    alpha: f64,
    horizon: f64,
    terms_used: usize,
    terminated_exactly: bool,
    tail_estimate: f64,
    report: ConvergenceReport,
}

impl TransitionMatrix {
    /// The assembled series Σ_{k<K} term_k.
    pub fn series(&self) -> &FracPowerSeries {
        &self.series
    }

    /// The individual kept terms; `term(0)` is the singular base term.
    pub fn term(&self, k: usize) -> Option<&FracPowerSeries> {
        self.term_series.get(k)
    }

    pub fn terms(&self) -> &[FracPowerSeries] {
        &self.term_series
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn origin(&self) -> f64 {
        self.series.origin()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.series.rows()
    }

    /// Number of kept terms K (the base term counts).
    pub fn terms_used(&self) -> usize {
        self.terms_used
    }

    /// True when the first omitted term is identically zero, i.e. the series
    /// is the exact Φ (nilpotent-type coefficients).
    pub fn terminated_exactly(&self) -> bool {
        self.terminated_exactly
    }

    /// Sup-measure bound over [t0, T] covering both the first omitted term
    /// and the equation residual it induces (the max of the two measures, so
    /// ‖D^α Φ − A Φ‖ stays below it as well).
    pub fn tail_estimate(&self) -> f64 {
        self.tail_estimate
    }

    pub fn report(&self) -> &ConvergenceReport {
        &self.report
    }

    pub fn eval(&self, t: f64) -> Result<DMatrix<f64>> {
        self.series.eval(t)
    }

    /// Symbolic residual of the initial value problem Φ solves: the defect of
    /// D^α Φ − A Φ against its analytic value −A·term_{K−1} (pure
    /// telescoping cancellation, so it should sit at rounding level), the sup
    /// measure of that tail residual, and the deviation of
    /// J^{1−α} Φ at t → t0+ from the identity.
    pub fn residual_report(&self, a: &MatrixPolynomial) -> Result<TransitionResidualReport> {
        let span = self.horizon - self.origin();
        let deriv = self.series.rl_derivative(self.alpha)?;
        let ax = a.mul_series(&self.series)?;
        let residual = deriv.sub(&ax)?;
        let expected = if self.terminated_exactly {
            FracPowerSeries::zero(self.origin(), self.dim(), self.dim())
        } else {
            let last = self.term_series.last().expect("at least the base term is kept");
            a.mul_series(last)?.scale(-1.0)
        };
        let telescoping_defect = residual.term_distance(&expected);
        let tail_residual_measure = expected.sup_measure(span);
        let weighted = self.series.rl_integral(1.0 - self.alpha)?;
        let at_origin = weighted.eval(self.origin())?;
        let init_defect = (at_origin - DMatrix::identity(self.dim(), self.dim())).amax();
        Ok(TransitionResidualReport {
            telescoping_defect,
            tail_residual_measure,
            tail_estimate: self.tail_estimate,
            init_defect,
        })
    }
}

/// Report of `TransitionMatrix::residual_report`.
#[derive(Debug, Clone)]
pub struct TransitionResidualReport {
    /// Distance between the symbolic residual D^αΦ − AΦ and its analytic
    /// value −A·term_{K−1}; nonzero only through rounding.
    pub telescoping_defect: f64,
    /// Sup measure of the analytic residual over the horizon.
    pub tail_residual_measure: f64,
    /// The builder's truncation bound; `tail_residual_measure` never exceeds it.
    pub tail_estimate: f64,
    /// ‖J^{1−α}Φ|_{t0} − I‖_max.
    pub init_defect: f64,
}

fn validate_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must lie in (0, 1), got {alpha}"
        )));
    }
    Ok(())
}

fn base_term(origin: f64, dim: usize, alpha: f64) -> Result<FracPowerSeries> {
    FracPowerSeries::new(
        origin,
        dim,
        dim,
        vec![(alpha, DMatrix::identity(dim, dim) * recip_gamma(alpha))],
    )
}

/// On hitting the term cap: diverge loudly if the measures are still
/// growing, otherwise let the caller return the truncated result.
fn cap_outcome(report: &ConvergenceReport) -> Result<()> {
    if report.verdict == Verdict::Diverging {
        return Err(Error::Diverged { report: report.clone() });
    }
    Ok(())
}

/// Builds Φ(t, t0) exactly over the series algebra for polynomial A.
///
/// Terms are kept until one is identically zero (exact termination), its sup
/// measure over (t0, T] drops below `config.tol`, or `config.max_terms` is
/// reached; in the last case the construction fails if the term measures are
/// still growing.
pub fn peano_baker_exact(
    a: &MatrixPolynomial,
    alpha: f64,
    horizon: f64,
    config: &TransitionConfig,
) -> Result<TransitionMatrix> {
    validate_alpha(alpha)?;
    config.validate()?;
    let origin = a.origin();
    if !(horizon > origin) || !horizon.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "horizon {horizon} must lie beyond the origin {origin}"
        )));
    }
    let span = horizon - origin;
    let dim = a.dim();
    let base = base_term(origin, dim, alpha)?;
    let mut measures = vec![base.sup_measure(span)];
    let mut kept = vec![base];
    let mut terminated_exactly = false;
    let tail_estimate;
    loop {
        let product = a.mul_series(kept.last().expect("base term is always kept"))?;
        let candidate = product.rl_integral(alpha)?;
        let m = candidate.sup_measure(span);
        if candidate.is_zero() {
            terminated_exactly = true;
            tail_estimate = 0.0;
            measures.push(0.0);
            break;
        }
        measures.push(m);
        if m < config.tol {
            tail_estimate = m.max(product.sup_measure(span));
            break;
        }
        if kept.len() >= config.max_terms {
            let report = ConvergenceReport::from_measures(measures.clone(), false);
            cap_outcome(&report)?;
            tail_estimate = m.max(product.sup_measure(span));
            break;
        }
        kept.push(candidate);
    }
    let report = ConvergenceReport::from_measures(measures, terminated_exactly);
    let mut series = FracPowerSeries::zero(origin, dim, dim);
    for term in &kept {
        series = series.add(term)?;
    }
    Ok(TransitionMatrix {
        series,
        terms_used: kept.len(),
        term_series: kept,
        alpha,
        horizon,
        terminated_exactly,
        tail_estimate,
        report,
    })
}

/// Same recursion on grid samples for general continuous A (given at the
/// nodes, no left singularity). The result carries the base term's left
/// exponent α; term sizes are measured on the interior nodes.
pub fn peano_baker_grid(
    a: &SampledMatrixFunction,
    alpha: f64,
    config: &TransitionConfig,
) -> Result<(SampledMatrixFunction, ConvergenceReport)> {
    peano_baker_grid_with(a, alpha, config, &mut Vec::new())
}

/// Grid recursion with caller-owned weight tables. The table for step k
/// (order α, left exponent (k+1)α) only depends on the interval count, so a
/// caller running many sub-horizon builds on the same spacing — the
/// inhomogeneous solver does one per source node — amortizes the
/// continued-fraction work across all of them.
pub(crate) fn peano_baker_grid_with(
    a: &SampledMatrixFunction,
    alpha: f64,
    config: &TransitionConfig,
    tables: &mut Vec<ProductWeights>,
) -> Result<(SampledMatrixFunction, ConvergenceReport)> {
    validate_alpha(alpha)?;
    config.validate()?;
    if a.rows() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "coefficient samples must be square, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    if a.left_exponent().is_some() {
        return Err(Error::InvalidParameter(
            "coefficient samples must be regular (no left singularity)".into(),
        ));
    }
    let dim = a.rows();
    let n = a.grid().n();
    let base = SampledMatrixFunction::singular_from_fn(a.grid().clone(), alpha, |_| {
        DMatrix::identity(dim, dim) * recip_gamma(alpha)
    })?;
    let mut measures = vec![base.max_value_norm_interior()];
    let mut sum = base.clone();
    let mut term = base;
    let mut kept = 1usize;
    let mut terminated_exactly = false;
    loop {
        let k = kept - 1;
        let sigma_k = (k as f64 + 1.0) * alpha;
        if tables.get(k).is_none_or(|w| w.max_intervals() < n) {
            let w = ProductWeights::new(alpha, sigma_k, n)?;
            if k < tables.len() {
                tables[k] = w;
            } else {
                tables.push(w);
            }
        }
        let candidate =
            grid_rl_integral_with(&a.pointwise_product(&term)?, alpha, &tables[k])?;
        let m = candidate.max_value_norm_interior();
        if m == 0.0 {
            terminated_exactly = true;
            measures.push(0.0);
            break;
        }
        measures.push(m);
        if m < config.tol {
            break;
        }
        if kept >= config.max_terms {
            let report = ConvergenceReport::from_measures(measures.clone(), false);
            cap_outcome(&report)?;
            break;
        }
        sum = sum.add(&candidate)?;
        term = candidate;
        kept += 1;
    }
    let report = ConvergenceReport::from_measures(measures, terminated_exactly);
    Ok((sum, report))
}

/// Φ(t, s) for a single (s, t) pair: re-expands A about s by the binomial
/// theorem (the J-operators are s-anchored while A is not) and evaluates the
/// re-anchored series at t.
pub fn two_point_phi(
    a: &MatrixPolynomial,
    alpha: f64,
    s: f64,
    t: f64,
    config: &TransitionConfig,
) -> Result<DMatrix<f64>> {
    if !(t > s) {
        return Err(Error::Domain(format!("two-point evaluation needs t > s, got t = {t}, s = {s}")));
    }
    if s < a.origin() {
        return Err(Error::Domain(format!(
            "anchor s = {s} lies before the domain start {}",
            a.origin()
        )));
    }
    let re = a.reanchored(s)?;
    let phi = peano_baker_exact(&re, alpha, t, config)?;
    phi.eval(t)
}

/// One exponent slot of the two-variable series: the matrix polynomial
/// Σ_p C_p (τ − t0)^p multiplying (t − τ)^{γ−1}.
#[derive(Debug, Clone)]
pub struct TwoPointTerm {
    pub exponent: f64,
    pub coeffs: Vec<(u32, DMatrix<f64>)>,
}

/// The transition kernel Φ(t, τ) as a series in (t − τ) powers whose
/// coefficients stay polynomial in (τ − t0):
///
///   Φ(t, τ) = Σ_γ [ Σ_p C_{γ,p} (τ − t0)^p ] (t − τ)^{γ−1}.
///
/// The recursion expands A's powers of (r − t0) binomially about τ, so the
/// τ-anchored J^α applies termwise. Evaluating at τ = t0 recovers the
/// one-variable Φ(t, t0); integrating against an input series in τ is the
/// inhomogeneous part of the solution formula.
#[derive(Debug, Clone)]
pub struct TwoPointSeries {
    origin: f64,
    alpha: f64,
    dim: usize,
    horizon: f64,
    terms: Vec<TwoPointTerm>,
    /// Flattened (γ, p, C) triples of the last kept generation; the residual
    /// of anything built on the truncated kernel telescopes down to this.
    last_generation: Vec<(f64, u32, DMatrix<f64>)>,
    terms_used: usize,
    terminated_exactly: bool,
}

const EXP_MERGE_TOL: f64 = 1e-12;

/// Raw (γ, p, C) triples → sorted, merged, zero-free term list.
fn normalize_two_point(raw: Vec<(f64, u32, DMatrix<f64>)>) -> Vec<TwoPointTerm> {
    let mut raw = raw;
    raw.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut out: Vec<TwoPointTerm> = Vec::new();
    for (g, p, c) in raw {
        if c.amax() == 0.0 {
            continue;
        }
        match out.last_mut() {
            Some(t) if (g - t.exponent).abs() <= EXP_MERGE_TOL => {
                match t.coeffs.last_mut() {
                    Some((lp, lc)) if *lp == p => *lc += &c,
                    _ => t.coeffs.push((p, c)),
                }
            }
            _ => out.push(TwoPointTerm { exponent: g, coeffs: vec![(p, c)] }),
        }
    }
    for t in &mut out {
        t.coeffs.retain(|(_, c)| c.amax() > 0.0);
    }
    out.retain(|t| !t.coeffs.is_empty());
    out
}

impl TwoPointSeries {
    pub fn new(
        a: &MatrixPolynomial,
        alpha: f64,
        horizon: f64,
        config: &TransitionConfig,
    ) -> Result<Self> {
        validate_alpha(alpha)?;
        config.validate()?;
        let origin = a.origin();
        if !(horizon > origin) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} must lie beyond the origin {origin}"
            )));
        }
        let span = horizon - origin;
        let dim = a.dim();
        let base: Vec<(f64, u32, DMatrix<f64>)> =
            vec![(alpha, 0, DMatrix::identity(dim, dim) * recip_gamma(alpha))];
        let measure = |terms: &[(f64, u32, DMatrix<f64>)]| -> f64 {
            terms
                .iter()
                .map(|(g, p, c)| {
                    let gpow = if *g >= 1.0 { span.powf(g - 1.0) } else { 1.0 };
                    c.amax() * span.powi(*p as i32) * gpow
                })
                .sum()
        };
        let mut all: Vec<(f64, u32, DMatrix<f64>)> = base.clone();
        let mut measures = vec![measure(&base)];
        let mut last = base;
        let mut kept = 1usize;
        let mut terminated_exactly = false;
        loop {
            let mut next: Vec<(f64, u32, DMatrix<f64>)> = Vec::new();
            for (m, am) in a.coeffs() {
                let m = *m as usize;
                for q in 0..=m {
                    let bq = binomial(m, q);
                    for (g, p, c) in &last {
                        let gq = g + q as f64;
                        let factor = bq * gamma(gq)? * recip_gamma(gq + alpha);
                        next.push((gq + alpha, p + (m - q) as u32, (am * c) * factor));
                    }
                }
            }
            // Re-normalize through the shared merge so duplicate (γ, p)
            // slots collapse before measuring.
            let merged = normalize_two_point(next);
            let flat: Vec<(f64, u32, DMatrix<f64>)> = merged
                .into_iter()
                .flat_map(|t| {
                    let g = t.exponent;
                    t.coeffs.into_iter().map(move |(p, c)| (g, p, c))
                })
                .collect();
            let m = measure(&flat);
            if flat.is_empty() {
                terminated_exactly = true;
                measures.push(0.0);
                break;
            }
            measures.push(m);
            if m < config.tol {
                break;
            }
            if kept >= config.max_terms {
                let report = ConvergenceReport::from_measures(measures.clone(), false);
                cap_outcome(&report)?;
                break;
            }
            all.extend(flat.iter().map(|(g, p, c)| (*g, *p, c.clone())));
            last = flat;
            kept += 1;
        }
        Ok(Self {
            origin,
            alpha,
            dim,
            horizon,
            terms: normalize_two_point(all),
            last_generation: last,
            terms_used: kept,
            terminated_exactly,
        })
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn terms(&self) -> &[TwoPointTerm] {
        &self.terms
    }

    pub fn terms_used(&self) -> usize {
        self.terms_used
    }

    pub fn terminated_exactly(&self) -> bool {
        self.terminated_exactly
    }

    /// Φ(t, τ) for t0 ≤ τ < t.
    pub fn eval(&self, t: f64, tau: f64) -> Result<DMatrix<f64>> {
        if !(t > tau) || tau < self.origin {
            return Err(Error::Domain(format!(
                "kernel evaluation needs t0 ≤ τ < t, got τ = {tau}, t = {t}"
            )));
        }
        let dt = t - tau;
        let ds = tau - self.origin;
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            let w = dt.powf(term.exponent - 1.0);
            for (p, c) in &term.coeffs {
                acc += c * (w * ds.powi(*p as i32));
            }
        }
        Ok(acc)
    }

    fn check_convolve_input(&self, u: &FracPowerSeries) -> Result<()> {
        if u.origin() != self.origin {
            return Err(Error::OriginMismatch { left: self.origin, right: u.origin() });
        }
        if u.rows() != self.dim {
            return Err(Error::DimensionMismatch(format!(
                "cannot convolve {0}x{0} kernel with {1}x{2} series",
                self.dim,
                u.rows(),
                u.cols()
            )));
        }
        Ok(())
    }

    fn convolve_triples<'a>(
        &self,
        triples: impl Iterator<Item = (f64, u32, &'a DMatrix<f64>)>,
        u: &FracPowerSeries,
    ) -> Result<FracPowerSeries> {
        let mut out = Vec::new();
        for (g, p, c) in triples {
            for ut in u.terms() {
                let b = ut.exponent + p as f64;
                let w = beta(g, b)?;
                out.push((g + b, (c * &ut.coeff) * w));
            }
        }
        FracPowerSeries::new(self.origin, self.dim, u.cols(), out)
    }

    /// ∫_{t0}^{t} Φ(t, τ) u(τ) dτ for an input series u anchored at t0,
    /// termwise through the Beta identity
    /// ∫ (t−τ)^{γ−1}(τ−t0)^{p+b−1} dτ = B(γ, p+b)(t−t0)^{γ+p+b−1}.
    pub fn convolve(&self, u: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.check_convolve_input(u)?;
        let triples = self.terms.iter().flat_map(|t| {
            t.coeffs.iter().map(move |(p, c)| (t.exponent, *p, c))
        });
        self.convolve_triples(triples, u)
    }

    /// The last kept generation alone convolved with u. The truncated
    /// inhomogeneous term C = Σ_k C_k obeys D^α C − A·C − u = −A·C_last,
    /// which is what this feeds (identically zero for terminating kernels,
    /// since then A·(last generation) already vanished).
    pub fn convolve_last_generation(&self, u: &FracPowerSeries) -> Result<FracPowerSeries> {
        self.check_convolve_input(u)?;
        self.convolve_triples(
            self.last_generation.iter().map(|(g, p, c)| (*g, *p, c)),
            u,
        )
    }

    /// J^{1−α}_τ Φ(t, ·) evaluated at τ = t − eps: tends to the identity as
    /// eps → 0 (the weighted-initial-value normalization of the kernel).
    pub fn weighted_initial_factor(&self, t: f64, eps: f64) -> Result<DMatrix<f64>> {
        if !(eps > 0.0) || t - eps < self.origin {
            return Err(Error::Domain(format!(
                "needs 0 < eps ≤ t − t0, got eps = {eps}, t = {t}"
            )));
        }
        let ds = t - eps - self.origin;
        let mut acc = DMatrix::zeros(self.dim, self.dim);
        for term in &self.terms {
            let g = term.exponent;
            let w = gamma(g)? * recip_gamma(g + 1.0 - self.alpha) * eps.powf(g - self.alpha);
            for (p, c) in &term.coeffs {
                acc += c * (w * ds.powi(*p as i32));
            }
        }
        Ok(acc)
    }
}
