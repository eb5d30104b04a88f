//! Grid-based Riemann-Liouville operators for sampled matrix functions.
//!
//! The quadrature is product integration: the regular factor of the integrand
//! is interpolated piecewise-linearly on a uniform grid while the weight
//! (t_i - τ)^{a-1} (τ - t0)^{σ-1} is integrated in closed form per interval.
//! In unit coordinates (τ = t0 + s·h) the interval moments
//!
//!   M_p(i, j) = ∫_j^{j+1} (i - s)^{a-1} s^{σ+p-1} ds,   p ∈ {0, 1},
//!
//! reduce to elementary power differences when σ = 1 and to incomplete-beta
//! differences M_p = i^{a+σ+p-1} [B_{(j+1)/i} - B_{j/i}](σ+p, a) otherwise.
//! All node assembly is h-free: the h powers cancel against the stored
//! singular factor, which keeps the scheme well conditioned at small h.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::specfun::{beta, gamma, recip_gamma, POLE_TOLERANCE};

const SIGMA_ONE_TOL: f64 = 1e-12;

/// Uniform grid t_i = t0 + i·h on [t0, t_end] with N intervals.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    t0: f64,
    t_end: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(t0: f64, t_end: f64, n: usize) -> Result<Self> {
        if n < 4 {
            return Err(Error::InvalidParameter(format!(
                "grid needs at least 4 intervals, got {n}"
            )));
        }
        Self::relaxed(t0, t_end, n)
    }

    /// Internal constructor without the N ≥ 4 floor, for the shrinking
    /// subgrids of the two-variable checker.
    pub(crate) fn relaxed(t0: f64, t_end: f64, n: usize) -> Result<Self> {
        if !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "grid endpoints must be finite, got [{t0}, {t_end}]"
            )));
        }
        if !(t_end > t0) {
            return Err(Error::InvalidParameter(format!(
                "grid needs t_end > t0, got [{t0}, {t_end}]"
            )));
        }
        if n == 0 {
            return Err(Error::InvalidParameter("grid needs at least 1 interval".into()));
        }
        let h = (t_end - t0) / n as f64;
        Ok(Self { t0, t_end, n, h })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Number of intervals N (there are N + 1 nodes).
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn node(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.h
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.n).map(|i| self.node(i))
    }
}

/// Matrix-valued samples on a grid with an explicit left singularity:
/// f(t) = g(t)·(t − t0)^{σ−1} where the stored `values` are the regular
/// factor g at the nodes. `left_exponent = None` means σ = 1, i.e. the
/// samples are the function itself. Keeping the singularity symbolic is what
/// lets the kernel identities hold to near machine precision on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledMatrixFunction {
    grid: Grid,
    rows: usize,
    cols: usize,
    left_exponent: Option<f64>,
    values: Vec<DMatrix<f64>>,
}

fn normalize_exponent(sigma: f64) -> Option<f64> {
    if (sigma - 1.0).abs() <= SIGMA_ONE_TOL {
        None
    } else {
        Some(sigma)
    }
}

impl SampledMatrixFunction {
    pub fn from_values(
        grid: Grid,
        left_exponent: Option<f64>,
        values: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        if let Some(sigma) = left_exponent {
            if !sigma.is_finite() || sigma <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "left exponent σ must be finite and > 0, got {sigma}"
                )));
            }
        }
        if values.len() != grid.n() + 1 {
            return Err(Error::DimensionMismatch(format!(
                "expected {} samples, got {}",
                grid.n() + 1,
                values.len()
            )));
        }
        let (rows, cols) = values[0].shape();
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch("samples must be non-empty matrices".into()));
        }
        if values.iter().any(|v| v.shape() != (rows, cols)) {
            return Err(Error::DimensionMismatch("samples must share one shape".into()));
        }
        let left_exponent = left_exponent.and_then(normalize_exponent);
        Ok(Self { grid, rows, cols, left_exponent, values })
    }

    /// Samples a regular (σ = 1) function at the nodes.
    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> DMatrix<f64>) -> Result<Self> {
        Self::singular_from_fn(grid, 1.0, f)
    }

    /// Samples the regular factor g of f(t) = g(t)·(t − t0)^{σ−1}.
    pub fn singular_from_fn(
        grid: Grid,
        sigma: f64,
        g: impl Fn(f64) -> DMatrix<f64>,
    ) -> Result<Self> {
        let values: Vec<DMatrix<f64>> = grid.nodes().map(g).collect();
        Self::from_values(grid, Some(sigma), values)
    }

    pub fn zeros(grid: Grid, rows: usize, cols: usize) -> Result<Self> {
        let n = grid.n();
        Self::from_values(grid, None, vec![DMatrix::zeros(rows, cols); n + 1])
    }

    pub fn grid(&self) -> &Grid {
        self.grid_ref()
    }

    fn grid_ref(&self) -> &Grid {
        &self.grid
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn left_exponent(&self) -> Option<f64> {
        self.left_exponent
    }

    pub fn sigma(&self) -> f64 {
        self.left_exponent.unwrap_or(1.0)
    }

    /// Regular-factor sample at node i.
    pub fn regular(&self, i: usize) -> &DMatrix<f64> {
        &self.values[i]
    }

    pub fn regular_values(&self) -> &[DMatrix<f64>] {
        &self.values
    }

    /// The function value at node i. At the left endpoint this is zero for
    /// σ > 1, the regular factor for σ = 1, and an error for σ < 1 (the
    /// sample is infinite; the singularity lives in the exponent).
    pub fn value(&self, i: usize) -> Result<DMatrix<f64>> {
        if i > self.grid.n() {
            return Err(Error::Domain(format!(
                "node index {i} outside grid of {} intervals",
                self.grid.n()
            )));
        }
        let sigma = self.sigma();
        if i == 0 {
            return if self.left_exponent.is_none() {
                Ok(self.values[0].clone())
            } else if sigma > 1.0 {
                Ok(DMatrix::zeros(self.rows, self.cols))
            } else {
                Err(Error::Domain(format!(
                    "sample is singular at the left endpoint (σ = {sigma} < 1)"
                )))
            };
        }
        match self.left_exponent {
            None => Ok(self.values[i].clone()),
            Some(sigma) => {
                let d = i as f64 * self.grid.h();
                Ok(&self.values[i] * d.powf(sigma - 1.0))
            }
        }
    }

    /// Like `value` but marks an unavailable left endpoint with NaN instead
    /// of failing; used by the finite-difference stage.
    fn value_or_nan(&self, i: usize) -> DMatrix<f64> {
        self.value(i)
            .unwrap_or_else(|_| DMatrix::from_element(self.rows, self.cols, f64::NAN))
    }

    /// Rewrites the samples against a smaller left exponent; the regular
    /// factor absorbs (t − t0)^{σ − σ_new} ≥ 0 powers.
    pub fn reexpressed_to(&self, new_sigma: f64) -> Result<Self> {
        let sigma = self.sigma();
        if !new_sigma.is_finite() || new_sigma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "left exponent σ must be finite and > 0, got {new_sigma}"
            )));
        }
        if new_sigma > sigma + SIGMA_ONE_TOL {
            return Err(Error::InvalidParameter(format!(
                "cannot re-express σ = {sigma} against the larger exponent {new_sigma}"
            )));
        }
        if (new_sigma - sigma).abs() <= SIGMA_ONE_TOL {
            return Ok(self.clone());
        }
        let p = sigma - new_sigma;
        let mut values = Vec::with_capacity(self.values.len());
        values.push(DMatrix::zeros(self.rows, self.cols));
        for i in 1..self.values.len() {
            let d = i as f64 * self.grid.h();
            values.push(&self.values[i] * d.powf(p));
        }
        Self::from_values(self.grid.clone(), Some(new_sigma), values)
    }

    pub fn scale(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| v * c).collect();
        Self { values, ..self.clone() }
    }

    /// Pointwise sum; mismatched singular exponents are reconciled by
    /// re-expressing both operands against the smaller σ.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("cannot add samples on different grids".into()));
        }
        if (self.rows, self.cols) != (other.rows, other.cols) {
            return Err(Error::DimensionMismatch(format!(
                "cannot add {}x{} samples to {}x{} samples",
                other.rows, other.cols, self.rows, self.cols
            )));
        }
        let target = self.sigma().min(other.sigma());
        let a = self.reexpressed_to(target)?;
        let b = other.reexpressed_to(target)?;
        let values = a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x + y)
            .collect();
        Self::from_values(self.grid.clone(), Some(target), values)
    }

    /// Pointwise matrix product self(t)·other(t); singular factors multiply,
    /// so the exponents combine as σ = σ_a + σ_b − 1.
    pub fn pointwise_product(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch(
                "cannot multiply samples on different grids".into(),
            ));
        }
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch(format!(
                "cannot multiply {}x{} samples by {}x{} samples",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let sigma = self.sigma() + other.sigma() - 1.0;
        if sigma <= 0.0 {
            return Err(Error::NotIntegrable { exponent: sigma });
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .collect();
        Self::from_values(self.grid.clone(), Some(sigma), values)
    }

    /// Max of ‖f(t_i)‖_max over the interior nodes i ≥ 1 (the left endpoint
    /// may be singular and is excluded).
    pub fn max_value_norm_interior(&self) -> f64 {
        (1..=self.grid.n())
            .map(|i| self.value(i).expect("interior values are finite").amax())
            .fold(0.0, f64::max)
    }

    /// Max over interior nodes of ‖self(t_i) − other(t_i)‖_max, comparing
    /// function values regardless of how the singular factors are stored.
    pub fn max_value_diff_interior(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::DimensionMismatch("cannot compare samples on different grids".into()));
        }
        let mut worst = 0.0f64;
        for i in 1..=self.grid.n() {
            worst = worst.max((self.value(i)? - other.value(i)?).amax());
        }
        Ok(worst)
    }
}

/// Per-interval moment tables for one (order a, left exponent σ) pair on
/// grids of up to `n` intervals in unit coordinates. Shareable across
/// subgrids of a common parent grid because the moments are h-free.
pub(crate) struct ProductWeights {
    order: f64,
    sigma: f64,
    n: usize,
    kind: WeightKind,
}

enum WeightKind {
    /// σ = 1: M_0, M_1 from power differences of d = i − j.
    Elementary { pow_a: Vec<f64>, pow_a1: Vec<f64> },
    /// General σ: precomputed triangular tables, rows i = 1..=n.
    Table { m0: Vec<f64>, m1: Vec<f64> },
}

fn tri_offset(i: usize) -> usize {
    (i - 1) * i / 2
}

impl ProductWeights {
    pub(crate) fn new(order: f64, sigma: f64, n: usize) -> Result<Self> {
        if !(order > 0.0) || !order.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight order must be positive, got {order}"
            )));
        }
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "weight left exponent must be positive, got {sigma}"
            )));
        }
        let kind = if (sigma - 1.0).abs() <= SIGMA_ONE_TOL {
            let pow_a: Vec<f64> = (0..=n).map(|d| (d as f64).powf(order)).collect();
            let pow_a1: Vec<f64> = (0..=n).map(|d| (d as f64).powf(order + 1.0)).collect();
            WeightKind::Elementary { pow_a, pow_a1 }
        } else {
            let mut m0 = vec![0.0; tri_offset(n + 1)];
            let mut m1 = vec![0.0; tri_offset(n + 1)];
            let mut brow = Vec::with_capacity(n + 1);
            for (p, table) in [&mut m0, &mut m1].into_iter().enumerate() {
                let pp = sigma + p as f64;
                let full = beta(pp, order)?;
                for i in 1..=n {
                    let fi = i as f64;
                    brow.clear();
                    brow.push(0.0);
                    for j in 1..i {
                        brow.push(inc_beta_lower(pp, order, j as f64 / fi, (i - j) as f64 / fi, full));
                    }
                    brow.push(full);
                    let scale = fi.powf(order + pp - 1.0);
                    let off = tri_offset(i);
                    for j in 0..i {
                        table[off + j] = scale * (brow[j + 1] - brow[j]);
                    }
                }
            }
            WeightKind::Table { m0, m1 }
        };
        Ok(Self { order, sigma, n, kind })
    }

    pub(crate) fn order(&self) -> f64 {
        self.order
    }

    pub(crate) fn sigma(&self) -> f64 {
        self.sigma
    }

    pub(crate) fn max_intervals(&self) -> usize {
        self.n
    }

    /// (M_0, M_1) over the unit interval [j, j+1] for target node i.
    fn moments(&self, i: usize, j: usize) -> (f64, f64) {
        debug_assert!(j < i && i <= self.n);
        match &self.kind {
            WeightKind::Elementary { pow_a, pow_a1 } => {
                let d = i - j;
                let m0 = (pow_a[d] - pow_a[d - 1]) / self.order;
                let m1 =
                    i as f64 * m0 - (pow_a1[d] - pow_a1[d - 1]) / (self.order + 1.0);
                (m0, m1)
            }
            WeightKind::Table { m0, m1 } => {
                let idx = tri_offset(i) + j;
                (m0[idx], m1[idx])
            }
        }
    }
}

/// Node weights w_k with Σ_k w_k·g_k = ∫_0^{j_end} (i−s)^{a−1} s^{σ−1}
/// pwlin(g)(s) ds in unit coordinates.
pub(crate) fn node_weights(w: &ProductWeights, i: usize, j_end: usize, out: &mut Vec<f64>) {
    out.clear();
    out.resize(j_end + 1, 0.0);
    for j in 0..j_end {
        let (m0, m1) = w.moments(i, j);
        let jf = j as f64;
        out[j] += (jf + 1.0) * m0 - m1;
        out[j + 1] += m1 - jf * m0;
    }
}

fn accumulate_scaled(acc: &mut DMatrix<f64>, m: &DMatrix<f64>, w: f64) {
    if w != 0.0 {
        acc.iter_mut().zip(m.iter()).for_each(|(a, &g)| *a += w * g);
    }
}

/// Lower incomplete beta B_x(p, q) = ∫_0^x u^{p−1}(1−u)^{q−1} du
/// (non-regularized). `cx` must be 1 − x computed without cancellation and
/// `full` the complete B(p, q). Continued fraction on whichever tail keeps
/// the argument ≤ 1/2, so adjacent-gridpoint differences stay well
/// conditioned on both ends.
fn inc_beta_lower(p: f64, q: f64, x: f64, cx: f64, full: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if cx <= 0.0 {
        return full;
    }
    let front = |a: f64, b: f64, xa: f64, xb: f64| (a * xa.ln() + b * xb.ln()).exp();
    if x <= 0.5 {
        front(p, q, x, cx) * beta_cf(p, q, x) / p
    } else {
        full - front(q, p, cx, x) * beta_cf(q, p, cx) / q
    }
}

/// Continued fraction for the incomplete beta (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const FPMIN: f64 = 1e-300;
    const EPS: f64 = 3e-16;
    const MAX_IT: usize = 1000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_IT {
        let mf = m as f64;
        let m2 = 2.0 * mf;
        let aa = mf * (b - mf) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + mf) * (qab + mf) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if c.abs() < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Riemann-Liouville integral of order a on the grid:
/// (J^a f)(t_i) = Γ(a)^{-1} ∫_{t0}^{t_i} (t_i−τ)^{a−1} f(τ) dτ with the
/// regular factor interpolated piecewise-linearly and the doubly singular
/// weight integrated exactly. The result carries left exponent σ + a; its
/// left-endpoint regular factor is the power-rule limit g(t0)·Γ(σ)/Γ(σ+a).
pub fn grid_rl_integral(f: &SampledMatrixFunction, a: f64) -> Result<SampledMatrixFunction> {
    let w = ProductWeights::new(a, f.sigma(), f.grid().n())?;
    grid_rl_integral_with(f, a, &w)
}

pub(crate) fn grid_rl_integral_with(
    f: &SampledMatrixFunction,
    a: f64,
    w: &ProductWeights,
) -> Result<SampledMatrixFunction> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integral order must be positive, got {a}"
        )));
    }
    let sigma = f.sigma();
    debug_assert!(w.order() == a && (w.sigma() - sigma).abs() <= SIGMA_ONE_TOL);
    let n = f.grid().n();
    if w.max_intervals() < n {
        return Err(Error::DimensionMismatch(format!(
            "weight table covers {} intervals, grid has {n}",
            w.max_intervals()
        )));
    }
    let recip_a = recip_gamma(a);
    let mut values = Vec::with_capacity(n + 1);
    values.push(f.regular(0) * (gamma(sigma)? * recip_gamma(sigma + a)));
    let mut wbuf = Vec::new();
    for i in 1..=n {
        node_weights(w, i, i, &mut wbuf);
        let mut acc = DMatrix::zeros(f.rows(), f.cols());
        for (k, &wk) in wbuf.iter().enumerate() {
            accumulate_scaled(&mut acc, f.regular(k), wk);
        }
        acc *= (i as f64).powf(1.0 - sigma - a) * recip_a;
        values.push(acc);
    }
    SampledMatrixFunction::from_values(f.grid().clone(), Some(sigma + a), values)
}

/// Central differences in the interior, 3-point one-sided at the right
/// endpoint, NaN at node 0 (a Riemann-Liouville derivative is generally
/// unbounded there).
///
/// At the first interior node the sampled function behaves like the exponent
/// ladder t^μ, t^{μ+1}, … with μ = σ − 1 known from the stored left
/// exponent, so a plain central difference there carries an O(h^{μ})
/// boundary-layer error. The node-1 stencil is instead made exact on
/// {1, t^μ, t^{μ+1}}:
///
///   G'(h) ≈ [(μ−1)(G(h) − G(0)) + 2^{−μ}(G(2h) − G(0))] / h,
///
/// which reduces to the central difference when μ = 1.
fn derivative_samples(g: &SampledMatrixFunction) -> Result<Vec<DMatrix<f64>>> {
    let n = g.grid().n();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "finite differences need at least 2 intervals".into(),
        ));
    }
    let h = g.grid().h();
    let vals: Vec<DMatrix<f64>> = (0..=n).map(|i| g.value_or_nan(i)).collect();
    let mut out = Vec::with_capacity(n + 1);
    out.push(DMatrix::from_element(g.rows(), g.cols(), f64::NAN));
    let mu = g.sigma() - 1.0;
    if mu > 1e-9 {
        let d1 = &vals[1] - &vals[0];
        let d2 = &vals[2] - &vals[0];
        out.push((d1 * (mu - 1.0) + d2 * 2.0f64.powf(-mu)) / h);
    } else {
        out.push((&vals[2] - &vals[0]) / (2.0 * h));
    }
    for i in 2..n {
        out.push((&vals[i + 1] - &vals[i - 1]) / (2.0 * h));
    }
    out.push((&vals[n] * 3.0 - &vals[n - 1] * 4.0 + &vals[n - 2]) / (2.0 * h));
    Ok(out)
}

/// Riemann-Liouville derivative D^a f = (d/dt) J^{1−a} f on the grid. The
/// result is stored as plain node values; the left endpoint is unavailable
/// (NaN) and the first interior node carries the largest discretization
/// error (the integrand's derivative is unbounded at t0).
pub fn grid_rl_derivative(f: &SampledMatrixFunction, a: f64) -> Result<SampledMatrixFunction> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must lie in (0, 1), got {a}"
        )));
    }
    let j = grid_rl_integral(f, 1.0 - a)?;
    let values = derivative_samples(&j)?;
    SampledMatrixFunction::from_values(f.grid().clone(), None, values)
}

/// Samples of a two-variable kernel φ(t, s) on the triangle t0 ≤ s ≤ t ≤ T:
/// φ(t, s) = r(t, s)·(t − s)^{c−1} with the regular factor r stored at node
/// pairs (t_i, s_j), j ≤ i. `right_exponent = None` means c = 1.
#[derive(Debug, Clone)]
pub struct BivariateSamples {
    grid: Grid,
    rows: usize,
    cols: usize,
    right_exponent: Option<f64>,
    values: Vec<DMatrix<f64>>,
}

fn pair_index(i: usize, j: usize) -> usize {
    i * (i + 1) / 2 + j
}

impl BivariateSamples {
    pub fn from_fn(
        grid: Grid,
        right_exponent: Option<f64>,
        r: impl Fn(f64, f64) -> DMatrix<f64>,
    ) -> Result<Self> {
        if let Some(c) = right_exponent {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::InvalidParameter(format!(
                    "right exponent must be finite and > 0, got {c}"
                )));
            }
        }
        let n = grid.n();
        let mut values = Vec::with_capacity(pair_index(n, 0) + n + 1);
        let mut shape = None;
        for i in 0..=n {
            let t = grid.node(i);
            for j in 0..=i {
                let m = r(t, grid.node(j));
                match shape {
                    None => {
                        if m.nrows() == 0 || m.ncols() == 0 {
                            return Err(Error::DimensionMismatch(
                                "kernel samples must be non-empty matrices".into(),
                            ));
                        }
                        shape = Some(m.shape());
                    }
                    Some(s) => {
                        if m.shape() != s {
                            return Err(Error::DimensionMismatch(
                                "kernel samples must share one shape".into(),
                            ));
                        }
                    }
                }
                values.push(m);
            }
        }
        let (rows, cols) = shape.expect("grid has at least one node");
        let right_exponent = right_exponent.and_then(normalize_exponent);
        Ok(Self { grid, rows, cols, right_exponent, values })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn right_exponent(&self) -> Option<f64> {
        self.right_exponent
    }

    pub fn c(&self) -> f64 {
        self.right_exponent.unwrap_or(1.0)
    }

    /// Regular-factor sample r(t_i, s_j), j ≤ i.
    pub fn regular(&self, i: usize, j: usize) -> &DMatrix<f64> {
        &self.values[pair_index(i, j)]
    }

    /// φ(·, s_j) as a one-variable sampled function on the subgrid
    /// [s_j, T]; the (t − s_j)^{c−1} factor becomes its left exponent.
    fn section(&self, j: usize) -> Result<SampledMatrixFunction> {
        let sub = Grid::relaxed(self.grid.node(j), self.grid.t_end(), self.grid.n() - j)?;
        let values = (j..=self.grid.n()).map(|i| self.regular(i, j).clone()).collect();
        SampledMatrixFunction::from_values(sub, Some(self.c()), values)
    }
}

/// Residual report for the differentiation-under-the-integral identity.
#[derive(Debug, Clone)]
pub struct DiffUnderIntegralReport {
    /// ‖LHS − RHS‖_max per node; NaN at the endpoints where a side is
    /// undefined (node 0 and node N).
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    pub argmax_node: usize,
    pub h: f64,
}

/// Checks D^a ∫_{t0}^t φ(t,s) ds = ∫_{t0}^t D^a_s φ(t,s) ds + lim_{s→t−0}
/// J^{1−a}_s φ(t,s) at the interior nodes, where the partial operators are
/// anchored at s.
///
/// The s-integral on the right is truncated at t − h and the limit term is
/// evaluated at s = t − h; for kernels of convolution type the two
/// truncation defects cancel exactly, which is what makes the one-step limit
/// approximation consistent. The integrand D^a_s φ inherits a right-end
/// singularity (t−s)^{c−a−1}; its regular factor is integrated by the same
/// product rule, except when c − a hits a Γ-pole (then the true integrand is
/// the annihilated, regular remainder and plain piecewise-linear quadrature
/// is used).
pub fn check_diff_under_integral(
    phi: &BivariateSamples,
    a: f64,
) -> Result<DiffUnderIntegralReport> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "derivative order must lie in (0, 1), got {a}"
        )));
    }
    let c = phi.c();
    let c_shift = c - a;
    let pole = c_shift <= POLE_TOLERANCE && (c_shift - c_shift.round()).abs() < POLE_TOLERANCE;
    if !pole && c_shift <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "kernel right exponent {c} must be ≥ the derivative order {a} (or land on the annihilating pole)"
        )));
    }
    let grid = phi.grid();
    let n = grid.n();
    if n < 4 {
        return Err(Error::InvalidParameter("checker needs at least 4 intervals".into()));
    }
    let h = grid.h();
    let (rows, cols) = (phi.rows, phi.cols);

    // Per-anchor s_j: J^{1−a}_{s_j} φ(·, s_j) on the subgrid, and its nodewise
    // derivative D^a_{s_j} φ. The unit-coordinate weight tables are h-free and
    // shared across all subgrids.
    let w_sub = ProductWeights::new(1.0 - a, c, n)?;
    let mut d_sections: Vec<Vec<DMatrix<f64>>> = Vec::with_capacity(n - 1);
    let mut j_at_node1: Vec<DMatrix<f64>> = Vec::with_capacity(n - 1);
    for j in 0..=n - 2 {
        let section = phi.section(j)?;
        let jint = grid_rl_integral_with(&section, 1.0 - a, &w_sub)?;
        j_at_node1.push(jint.value(1)?);
        d_sections.push(derivative_samples(&jint)?);
    }

    // Left side: Ψ(t) = ∫_{t0}^t φ(t,s) ds by product integration in s
    // (weight (t−s)^{c−1}, regular factor r(t_i, ·)), then D^a on the grid.
    // Ψ carries the left exponent c + 1: Ψ ~ r(t0,t0)·(t−t0)^c/c.
    let w_psi = ProductWeights::new(c, 1.0, n)?;
    let mut psi_values = Vec::with_capacity(n + 1);
    psi_values.push(phi.regular(0, 0) / c);
    let mut wbuf = Vec::new();
    for i in 1..=n {
        node_weights(&w_psi, i, i, &mut wbuf);
        let mut acc = DMatrix::zeros(rows, cols);
        for (k, &wk) in wbuf.iter().enumerate() {
            accumulate_scaled(&mut acc, phi.regular(i, k), wk);
        }
        acc *= (i as f64).powf(-c);
        psi_values.push(acc);
    }
    let psi = SampledMatrixFunction::from_values(grid.clone(), Some(c + 1.0), psi_values)?;
    let lhs = derivative_samples(&grid_rl_integral(&psi, 1.0 - a)?)?;

    // Right side per node t_i: weighted s-integration of the subgrid
    // derivatives over [t0, t_{i−1}] plus the limit term at s = t_{i−1}.
    let s_order = if pole { 1.0 } else { c_shift };
    let w_s = ProductWeights::new(s_order, 1.0, n)?;
    let mut residuals = vec![f64::NAN; n + 1];
    let mut max_residual = 0.0f64;
    let mut argmax = 0usize;
    for i in 1..n {
        let mut acc = DMatrix::zeros(rows, cols);
        if i >= 2 {
            node_weights(&w_s, i, i - 1, &mut wbuf);
            for (k, &wk) in wbuf.iter().enumerate() {
                let d_ik = &d_sections[k][i - k];
                let factor = if pole { 1.0 } else { ((i - k) as f64).powf(1.0 - c_shift) };
                accumulate_scaled(&mut acc, d_ik, wk * factor);
            }
        }
        let rhs = acc * h + &j_at_node1[i - 1];
        let res = (&lhs[i] - rhs).amax();
        residuals[i] = res;
        if res > max_residual {
            max_residual = res;
            argmax = i;
        }
    }
    Ok(DiffUnderIntegralReport { residuals, max_residual, argmax_node: argmax, h })
}
