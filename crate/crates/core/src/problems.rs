//! Fixed-point problems: affine maps `q(x) = M x + b`, closed-form nonlinear
//! maps, the registry of named test problems, and the JSON problem loader.

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{dim_err, Error, Result};
use crate::linalg::{solve_square, Matrix, Vector};

/// `q(x) = M x + b` with `A = I - M` nonsingular; the fixed point solves `A x = b`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    m: Matrix,
    b: Vector,
    a: Matrix,
    x_star: Vector,
}

impl LinearProblem {
    /// Validates `M`, `b` and the optional fixed point. When `x_star` is not
    /// supplied it is computed from `A x = b`.
    pub fn new(m: Matrix, b: Vector, x_star: Option<Vector>) -> Result<Self> {
        let n = m.rows();
        if n == 0 || !m.is_square() {
            return Err(dim_err("non-empty square M", format!("{}x{}", m.rows(), m.cols())));
        }
        if b.len() != n {
            return Err(dim_err(format!("b of length {n}"), b.len()));
        }
        if !m.is_finite() || !b.is_finite() {
            return Err(Error::NonFinite("problem data"));
        }
        if m.max_abs() == 0.0 {
            return Err(Error::InvalidProblem("M = 0 (A = I) is the trivial case".into()));
        }
        let a = Matrix::identity(n).sub(&m);
        let solved = solve_square(&a, &b)
            .map_err(|e| Error::InvalidProblem(format!("A = I - M is singular: {e}")))?;
        let x_star = match x_star {
            Some(xs) => {
                if xs.len() != n {
                    return Err(dim_err(format!("x_star of length {n}"), xs.len()));
                }
                let defect = a.matvec(&xs).sub(&b).norm();
                if defect > 1e-12 * (1.0 + b.norm()) {
                    return Err(Error::InvalidProblem(format!(
                        "x_star is not a fixed point: |A x* - b| = {defect:e}"
                    )));
                }
                xs
            }
            None => solved,
        };
        Ok(Self { m, b, a, x_star })
    }

    pub fn dim(&self) -> usize {
        self.m.rows()
    }

    pub fn iteration_matrix(&self) -> &Matrix {
        &self.m
    }

    /// `A = I - M`
    pub fn system_matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn rhs(&self) -> &Vector {
        &self.b
    }

    pub fn x_star(&self) -> &Vector {
        &self.x_star
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        self.m.matvec(x).add(&self.b)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.b.iter().all(|v| *v == 0.0)
    }
}

pub type MapFn = dyn Fn(&Vector) -> Vector + Send + Sync;

/// A closed-form nonlinear map registered as a builtin.
#[derive(Clone)]
pub struct NonlinearProblem {
    name: String,
    dim: usize,
    map: Arc<MapFn>,
    x_star: Option<Vector>,
    spectral_radius_at_star: Option<f64>,
}

impl NonlinearProblem {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        map: Arc<MapFn>,
        x_star: Option<Vector>,
        spectral_radius_at_star: Option<f64>,
    ) -> Result<Self> {
        let p = Self {
            name: name.into(),
            dim,
            map,
            x_star,
            spectral_radius_at_star,
        };
        if let Some(xs) = &p.x_star {
            if xs.len() != dim {
                return Err(dim_err(dim, xs.len()));
            }
            let defect = (p.map)(xs).sub(xs).norm();
            if defect > 1e-12 {
                return Err(Error::InvalidProblem(format!(
                    "q(x*) != x* for `{}` (defect {defect:e})",
                    p.name
                )));
            }
        }
        Ok(p)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn x_star(&self) -> Option<&Vector> {
        self.x_star.as_ref()
    }

    pub fn spectral_radius_at_star(&self) -> Option<f64> {
        self.spectral_radius_at_star
    }

    pub fn apply(&self, x: &Vector) -> Vector {
        (self.map)(x)
    }
}

impl fmt::Debug for NonlinearProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NonlinearProblem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("x_star", &self.x_star)
            .finish()
    }
}

#[derive(Debug, Clone)]
pub enum Problem {
    Linear(LinearProblem),
    Nonlinear(NonlinearProblem),
}

impl Problem {
    pub fn dim(&self) -> usize {
        match self {
            Problem::Linear(p) => p.dim(),
            Problem::Nonlinear(p) => p.dim(),
        }
    }

    /// `q(x)`, without dimension checks.
    pub fn apply(&self, x: &Vector) -> Vector {
        match self {
            Problem::Linear(p) => p.apply(x),
            Problem::Nonlinear(p) => p.apply(x),
        }
    }

    pub fn x_star(&self) -> Option<&Vector> {
        match self {
            Problem::Linear(p) => Some(p.x_star()),
            Problem::Nonlinear(p) => p.x_star(),
        }
    }

    pub fn as_linear(&self) -> Option<&LinearProblem> {
        match self {
            Problem::Linear(p) => Some(p),
            Problem::Nonlinear(_) => None,
        }
    }

    pub(crate) fn check_dim(&self, x: &Vector) -> Result<()> {
        if x.len() != self.dim() {
            return Err(dim_err(format!("vector of length {}", self.dim()), x.len()));
        }
        Ok(())
    }
}

/// `r(x) = x - q(x)`; for a linear problem this is `A x - b`.
pub fn residual(problem: &Problem, x: &Vector) -> Result<Vector> {
    problem.check_dim(x)?;
    Ok(x.sub(&problem.apply(x)))
}

pub const BUILTIN_NAMES: [&str; 5] = [
    "prob41",
    "prob42",
    "prob43_nonlinear",
    "example32_stall",
    "prob_nrbe",
];

fn mat2(a: f64, b: f64, c: f64, d: f64) -> Matrix {
    Matrix::from_rows(&[vec![a, b], vec![c, d]]).expect("finite literal")
}

fn v2(a: f64, b: f64) -> Vector {
    Vector::from(vec![a, b])
}

/// The named test problems.
pub fn builtin(name: &str) -> Result<Problem> {
    let p = match name {
        "prob41" => Problem::Linear(LinearProblem::new(
            mat2(2.0 / 3.0, 0.25, 0.0, 1.0 / 3.0),
            Vector::zeros(2),
            Some(Vector::zeros(2)),
        )?),
        "prob42" => Problem::Linear(LinearProblem::new(
            Matrix::diag(&[0.5784, 0.999]),
            Vector::zeros(2),
            Some(Vector::zeros(2)),
        )?),
        "example32_stall" => Problem::Linear(LinearProblem::new(
            Matrix::diag(&[1.5, 0.5]),
            Vector::zeros(2),
            Some(Vector::zeros(2)),
        )?),
        "prob_nrbe" => {
            // x_{k+1} = M (x_k - c) + c, i.e. affine term (I - M) c, fixed point c
            let m = mat2(8.0 / 9.0, 0.25, 0.0, 2.0 / 3.0);
            let c = v2(1.0, 1.0);
            let b = Matrix::identity(2).sub(&m).matvec(&c);
            Problem::Linear(LinearProblem::new(m, b, Some(c))?)
        }
        "prob43_nonlinear" => Problem::Nonlinear(NonlinearProblem::new(
            "prob43_nonlinear",
            2,
            Arc::new(|x: &Vector| {
                let (x1, x2) = (x[0], x[1]);
                v2(0.5 * (x1 + x1 * x1 + x2 * x2), 0.5 * (x2 + x1 * x1))
            }),
            Some(Vector::zeros(2)),
            Some(0.5),
        )?),
        _ => {
            return Err(Error::UnknownBuiltin {
                name: name.to_string(),
                valid: BUILTIN_NAMES.join(", "),
            })
        }
    };
    Ok(p)
}

/// Default starting point used for traces of each builtin.
pub fn default_x0(name: &str) -> Option<Vector> {
    match name {
        "prob41" | "prob43_nonlinear" => Some(v2(0.2, 0.3)),
        "prob42" => Some(v2(0.0001, 0.3023)),
        "example32_stall" => Some(v2(-2.0, 2.0)),
        "prob_nrbe" => Some(v2(1.2, 1.3)),
        _ => None,
    }
}

/// On-disk problem description.
///
/// A linear problem is `{"M": [[..], ..], "b": [..], "x_star": [..]}`, with an
/// optional `"kind": "linear"`. A registered nonlinear map is
/// `{"kind": "nonlinear-builtin", "name": "prob43_nonlinear"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", deny_unknown_fields)]
pub enum ProblemSpec {
    #[serde(rename = "linear")]
    Linear {
        #[serde(rename = "M")]
        m: Vec<Vec<f64>>,
        b: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        x_star: Option<Vec<f64>>,
    },
    #[serde(rename = "nonlinear-builtin")]
    NonlinearBuiltin { name: String },
}

impl ProblemSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        if let Some(obj) = value.as_object_mut() {
            obj.entry("kind").or_insert_with(|| "linear".into());
        }
        serde_json::from_value(value).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn build(&self) -> Result<Problem> {
        match self {
            ProblemSpec::Linear { m, b, x_star } => {
                let m = Matrix::from_rows(m)?;
                let b = Vector::new(b.clone())?;
                let x_star = x_star.clone().map(Vector::new).transpose()?;
                Ok(Problem::Linear(LinearProblem::new(m, b, x_star)?))
            }
            ProblemSpec::NonlinearBuiltin { name } => match builtin(name)? {
                p @ Problem::Nonlinear(_) => Ok(p),
                Problem::Linear(_) => Err(Error::InvalidProblem(format!(
                    "`{name}` is a linear builtin, not a nonlinear one"
                ))),
            },
        }
    }
}

/// Both eigenpairs of a real 2x2 matrix, sorted by eigenvalue, with unit
/// eigenvectors whose first nonzero entry is positive.
pub fn eigen_directions_2x2(a: &Matrix) -> Result<Vec<(f64, Vector)>> {
    if a.dims() != (2, 2) {
        return Err(dim_err("2x2 matrix", format!("{}x{}", a.rows(), a.cols())));
    }
    if !a.is_finite() {
        return Err(Error::NonFinite("matrix entries"));
    }
    let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
    let tr = p + s;
    let det = p * s - q * r;
    // (p - s)^2 + 4qr avoids the cancellation in tr^2 - 4 det
    let disc = (p - s) * (p - s) + 4.0 * q * r;
    if disc < 0.0 {
        return Err(Error::ComplexEigenvalues { discriminant: disc });
    }
    let root = disc.sqrt();
    let big = 0.5 * (tr + if tr >= 0.0 { root } else { -root });
    let small = if big != 0.0 { det / big } else { 0.5 * (tr - root) };
    let mut mus = [big, small];
    mus.sort_by(f64::total_cmp);

    if q == 0.0 && r == 0.0 {
        // diagonal (covers multiples of I): coordinate axes
        let mut pairs = vec![(p, Vector::unit(2, 0)), (s, Vector::unit(2, 1))];
        pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
        return Ok(pairs);
    }
    let pairs = mus
        .iter()
        .map(|&mu| {
            let row0 = [p - mu, q];
            let row1 = [r, s - mu];
            let pick = if row0[0].hypot(row0[1]) >= row1[0].hypot(row1[1]) { row0 } else { row1 };
            let mut v = Vector::from(vec![-pick[1], pick[0]]);
            let nrm = v.norm();
            v = v.scale(1.0 / nrm);
            let lead = if v[0] != 0.0 { v[0] } else { v[1] };
            if lead < 0.0 {
                v = v.scale(-1.0);
            }
            (mu, v)
        })
        .collect();
    Ok(pairs)
}
