//! Problem files: a flat TOML document describing one initial value problem
//!
//! ```text
//! D^α x(t) = A(t)·x(t) + u(t),   J^{1−α}x|_{t=t0} = x0
//! ```
//!
//! ```toml
//! alpha = 0.5
//! t0 = 0.0
//! horizon = 1.0
//! x0 = [0.0, 1.0]
//!
//! [[A]]            # A(t) = Σ entries·(t − t0)^power, row-major n×n blocks
//! power = 1
//! entries = [0.0, 1.0, 0.0, 0.0]
//!
//! [[u]]            # u(t) = Σ entries·(t − t0)^(exponent − 1), exponent ≥ 1
//! exponent = 1.0
//! entries = [1.0, 0.0]
//! ```
//!
//! The dimension n is inferred from `x0` and every block must agree with it.
//! Unknown keys are rejected: a misspelled key in a numerics tool must fail
//! loudly, not silently change the problem.

use fraclin::series::{FracPowerSeries, MatrixPolynomial};
use fraclin::solver::{Coefficients, Forcing, IvpProblem};
use fraclin::transition::TransitionConfig;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixTerm {
    /// Integer power of (t − t0) multiplying this block.
    pub power: u32,
    /// Row-major n×n coefficients.
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingTerm {
    /// Series exponent γ: the term contributes entries·(t − t0)^{γ−1}.
    pub exponent: f64,
    pub entries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub alpha: f64,
    pub t0: f64,
    pub horizon: f64,
    #[serde(rename = "A")]
    pub a: Vec<MatrixTerm>,
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub u: Vec<ForcingTerm>,
    /// When present, solve on an N-interval uniform grid instead of the
    /// exact series lane.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
    /// Series truncation tolerance override.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl ProblemFile {
    /// Parse errors keep toml's line/column context.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("problem files serialize to TOML")
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    /// Builds the solver problem. `tol` and `grid` are command-line
    /// overrides that win over the file's own keys.
    pub fn to_problem(
        &self,
        tol: Option<f64>,
        grid: Option<usize>,
    ) -> fraclin::Result<IvpProblem> {
        let n = self.dim();
        if n == 0 {
            return Err(fraclin::Error::DimensionMismatch(
                "x0 must have at least one component".into(),
            ));
        }
        let mut coeffs = Vec::with_capacity(self.a.len());
        for block in &self.a {
            if block.entries.len() != n * n {
                return Err(fraclin::Error::DimensionMismatch(format!(
                    "A block with power {} has {} entries, expected {n}x{n} = {}",
                    block.power,
                    block.entries.len(),
                    n * n
                )));
            }
            coeffs.push((block.power, DMatrix::from_row_slice(n, n, &block.entries)));
        }
        let a = MatrixPolynomial::new(self.t0, n, coeffs)?;
        let x0 = DVector::from_column_slice(&self.x0);

        let grid_n = grid.or(self.grid);
        let mut p = match grid_n {
            None => IvpProblem::exact(self.alpha, a, x0, self.horizon)?,
            Some(ng) => {
                let g = fraclin::grid::Grid::new(self.t0, self.horizon, ng)?;
                let samples =
                    fraclin::grid::SampledMatrixFunction::from_fn(g, |t| a.eval(t))?;
                IvpProblem::sampled(self.alpha, samples, x0)?
            }
        };

        if !self.u.is_empty() {
            let mut terms = Vec::with_capacity(self.u.len());
            for block in &self.u {
                if block.entries.len() != n {
                    return Err(fraclin::Error::DimensionMismatch(format!(
                        "u block with exponent {} has {} entries, expected {n}",
                        block.exponent,
                        block.entries.len()
                    )));
                }
                terms.push((
                    block.exponent,
                    DMatrix::from_column_slice(n, 1, &block.entries),
                ));
            }
            let series = FracPowerSeries::new(self.t0, n, 1, terms)?;
            let forcing = match grid_n {
                None => Forcing::Series(series),
                Some(ng) => {
                    let g = fraclin::grid::Grid::new(self.t0, self.horizon, ng)?;
                    let t0 = self.t0;
                    let samples = fraclin::grid::SampledMatrixFunction::from_fn(g, |t| {
                        let mut v = DMatrix::zeros(n, 1);
                        for term in series.terms() {
                            // (t−t0)^0 at t = t0 is 1 by powf convention;
                            // exponents below 1 are rejected by the solver.
                            v += &term.coeff * (t - t0).powf(term.exponent - 1.0);
                        }
                        v
                    })?;
                    Forcing::Sampled(samples)
                }
            };
            p = p.with_forcing(forcing)?;
        }

        if let Some(t) = tol.or(self.tol) {
            p = p.with_config(TransitionConfig { tol: t, ..TransitionConfig::default() });
        }
        Ok(p)
    }

    /// Inverse of [`to_problem`] for the exact lane, so parse → build →
    /// serialize → parse is the identity on the file's semantic content.
    pub fn from_problem(p: &IvpProblem) -> Result<Self, String> {
        let a = match p.coefficients() {
            Coefficients::Polynomial(a) => a,
            Coefficients::Sampled(_) => {
                return Err("sampled coefficients have no file form".into())
            }
        };
        let u = match p.forcing() {
            Forcing::None => Vec::new(),
            Forcing::Series(s) => s
                .terms()
                .iter()
                .map(|t| ForcingTerm {
                    exponent: t.exponent,
                    entries: t.coeff.iter().copied().collect(),
                })
                .collect(),
            Forcing::Sampled(_) => return Err("sampled forcing has no file form".into()),
        };
        let default_tol = TransitionConfig::default().tol;
        Ok(Self {
            alpha: p.alpha(),
            t0: p.t0(),
            horizon: p.horizon(),
            a: a.coeffs()
                .iter()
                .map(|(m, c)| MatrixTerm {
                    power: *m,
                    entries: c.transpose().iter().copied().collect(),
                })
                .collect(),
            x0: p.x0().iter().copied().collect(),
            u,
            grid: None,
            tol: (p.config().tol != default_tol).then_some(p.config().tol),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const WORKED: &str = r#"
alpha = 0.5
t0 = 0.0
horizon = 1.0
x0 = [0.0, 1.0]

[[A]]
power = 1
entries = [0.0, 1.0, 0.0, 0.0]

[[u]]
exponent = 1.0
entries = [1.0, 0.0]
"#;

    #[test]
    fn parses_the_worked_file() {
        let f = ProblemFile::parse(WORKED).unwrap();
        assert_eq!(f.dim(), 2);
        assert_eq!(f.a.len(), 1);
        assert_eq!(f.a[0].power, 1);
        assert_eq!(f.u[0].entries, vec![1.0, 0.0]);
        assert!(f.grid.is_none());
        f.to_problem(None, None).unwrap();
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = ProblemFile::parse("alpha = 0.5\nt0 = 0.0\nhorizon = 1.0\nx0 = [1.0]\nA = []\nhorzon = 2.0\n")
            .unwrap_err();
        assert!(err.contains("horzon"), "{err}");
    }

    #[test]
    fn rejects_wrong_block_shapes() {
        let f = ProblemFile::parse(
            "alpha = 0.5\nt0 = 0.0\nhorizon = 1.0\nx0 = [1.0, 0.0]\n[[A]]\npower = 0\nentries = [1.0, 2.0]\n",
        )
        .unwrap();
        assert!(f.to_problem(None, None).is_err());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = ProblemFile::parse("alpha = 0.5\nt0 = oops\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn round_trips_through_the_solver_problem() {
        let original = ProblemFile::parse(WORKED).unwrap();
        let p = original.to_problem(None, None).unwrap();
        let regenerated = ProblemFile::from_problem(&p).unwrap();
        let reparsed = ProblemFile::parse(&regenerated.to_toml_string()).unwrap();
        assert_eq!(reparsed, regenerated);
        assert_eq!(reparsed, original);
    }

    #[test]
    fn round_trip_keeps_a_nondefault_tolerance() {
        let mut f = ProblemFile::parse(WORKED).unwrap();
        f.tol = Some(1e-9);
        let p = f.to_problem(None, None).unwrap();
        let back = ProblemFile::from_problem(&p).unwrap();
        assert_eq!(back.tol, Some(1e-9));
        assert_eq!(ProblemFile::parse(&back.to_toml_string()).unwrap(), back);
    }

    #[test]
    fn command_line_grid_override_switches_lanes() {
        let f = ProblemFile::parse(WORKED).unwrap();
        let p = f.to_problem(None, Some(32)).unwrap();
        assert!(matches!(p.coefficients(), Coefficients::Sampled(_)));
    }
}
