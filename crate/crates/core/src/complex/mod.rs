//! Almost complex structures on R^{2n} and the boundary data they induce.

mod levi;

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{max_abs, Point};

pub use levi::{
    alpha, check_strict_convexity, contact_at, dalpha_matrix, levi_form, levi_matrix,
    ConvexityReport, ContactData, LeviSample,
};

type MatrixField = Arc<dyn Fn(&Point) -> DMatrix<f64> + Send + Sync>;

#[derive(Clone)]
enum Field {
    Standard,
    Constant(DMatrix<f64>),
    Polynomial(Vec<(Vec<u32>, DMatrix<f64>)>),
    Tabulated(Grid),
    Custom(MatrixField),
}

#[derive(Clone, Debug)]
struct Grid {
    min: Vec<f64>,
    max: Vec<f64>,
    shape: Vec<usize>,
    values: Vec<DMatrix<f64>>,
}

impl Grid {
    fn eval(&self, x: &Point) -> DMatrix<f64> {
        let n = self.shape.len();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for i in 0..n {
            let cells = self.shape[i] - 1;
            if cells == 0 {
                continue;
            }
            let u = ((x[i] - self.min[i]) / (self.max[i] - self.min[i])).clamp(0.0, 1.0) * cells as f64;
            let b = (u.floor() as usize).min(cells - 1);
            base[i] = b;
            frac[i] = u - b as f64;
        }
        let dim = self.values[0].nrows();
        let mut out = DMatrix::zeros(dim, dim);
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut flat = 0;
            for i in 0..n {
                let bit = (corner >> i) & 1;
                let idx = if self.shape[i] > 1 { base[i] + bit } else { 0 };
                if self.shape[i] == 1 && bit == 1 {
                    w = 0.0;
                }
                w *= if bit == 1 { frac[i] } else { 1.0 - frac[i] };
                flat = flat * self.shape[i] + idx;
            }
            if w != 0.0 {
                out += &self.values[flat] * w;
            }
        }
        out
    }
}

/// A matrix field `x -> J(x)` on R^{2n}.
#[derive(Clone)]
pub struct Structure {
    dim: usize,
    field: Field,
}

impl fmt::Debug for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.field {
            Field::Standard => "standard",
            Field::Constant(_) => "constant",
            Field::Polynomial(_) => "polynomial",
            Field::Tabulated(_) => "tabulated",
            Field::Custom(_) => "custom",
        };
        write!(f, "Structure({kind}, dim {})", self.dim)
    }
}

/// The block-diagonal structure with `J e_{2k} = e_{2k+1}`.
pub fn standard_matrix(dim: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(dim, dim);
    for k in 0..dim / 2 {
        j[(2 * k + 1, 2 * k)] = 1.0;
        j[(2 * k, 2 * k + 1)] = -1.0;
    }
    j
}

impl Structure {
    pub fn standard(dim: usize) -> Self {
        Structure {
            dim,
            field: Field::Standard,
        }
    }

    pub fn constant(j: DMatrix<f64>) -> Self {
        Structure {
            dim: j.nrows(),
            field: Field::Constant(j),
        }
    }

    pub fn custom(dim: usize, f: impl Fn(&Point) -> DMatrix<f64> + Send + Sync + 'static) -> Self {
        Structure {
            dim,
            field: Field::Custom(Arc::new(f)),
        }
    }

    pub fn from_spec(spec: &StructureSpec) -> Result<Self> {
        let square = |m: &[Vec<f64>], n: usize| -> Result<DMatrix<f64>> {
            if m.len() != n || m.iter().any(|r| r.len() != n) {
                return Err(Error::Config(format!("expected a {n}x{n} matrix")));
            }
            Ok(DMatrix::from_fn(n, n, |i, j| m[i][j]))
        };
        match spec {
            StructureSpec::Standard { dimension } => {
                check_even(*dimension)?;
                Ok(Structure::standard(*dimension))
            }
            StructureSpec::Constant { matrix } => {
                let n = matrix.len();
                check_even(n)?;
                Ok(Structure::constant(square(matrix, n)?))
            }
            StructureSpec::Polynomial { dimension, terms } => {
                check_even(*dimension)?;
                let mut out = Vec::with_capacity(terms.len());
                for t in terms {
                    if t.exponents.len() != *dimension {
                        return Err(Error::Config("exponent length mismatch".into()));
                    }
                    out.push((t.exponents.clone(), square(&t.matrix, *dimension)?));
                }
                Ok(Structure {
                    dim: *dimension,
                    field: Field::Polynomial(out),
                })
            }
            StructureSpec::Tabulated {
                dimension,
                grid,
                values,
            } => {
                check_even(*dimension)?;
                let n = *dimension;
                if grid.min.len() != n || grid.max.len() != n || grid.shape.len() != n {
                    return Err(Error::Config("grid dimension mismatch".into()));
                }
                if grid.shape.iter().any(|&s| s == 0) {
                    return Err(Error::Config("grid shape entries must be positive".into()));
                }
                let count: usize = grid.shape.iter().product();
                if values.len() != count {
                    return Err(Error::Config(format!(
                        "tabulated structure needs {count} matrices, got {}",
                        values.len()
                    )));
                }
                let values = values
                    .iter()
                    .map(|m| square(m, n))
                    .collect::<Result<Vec<_>>>()?;
                Ok(Structure {
                    dim: n,
                    field: Field::Tabulated(Grid {
                        min: grid.min.clone(),
                        max: grid.max.clone(),
                        shape: grid.shape.clone(),
                        values,
                    }),
                })
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_standard(&self) -> bool {
        matches!(self.field, Field::Standard)
    }

    pub fn at(&self, x: &Point) -> DMatrix<f64> {
        match &self.field {
            Field::Standard => standard_matrix(self.dim),
            Field::Constant(m) => m.clone(),
            Field::Polynomial(terms) => {
                let mut out = DMatrix::zeros(self.dim, self.dim);
                for (e, m) in terms {
                    let c: f64 = e.iter().enumerate().map(|(i, &k)| x[i].powi(k as i32)).product();
                    out += m * c;
                }
                out
            }
            Field::Tabulated(g) => g.eval(x),
            Field::Custom(f) => f(x),
        }
    }

    pub fn apply(&self, x: &Point, v: &Point) -> Point {
        self.at(x) * v
    }
}

fn check_even(n: usize) -> Result<()> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Config(format!("structure dimension must be even, got {n}")));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MatrixTerm {
    pub exponents: Vec<u32>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSpec {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
    pub shape: Vec<usize>,
}

/// JSON description of a structure field.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureSpec {
    Standard {
        dimension: usize,
    },
    Constant {
        matrix: Vec<Vec<f64>>,
    },
    Polynomial {
        dimension: usize,
        terms: Vec<MatrixTerm>,
    },
    /// Matrices listed in row-major grid order (last axis fastest).
    Tabulated {
        dimension: usize,
        grid: GridSpec,
        values: Vec<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StructureReport {
    pub max_deviation: f64,
    pub worst_index: Option<usize>,
    pub tolerance: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Largest entry of `J(x)^2 + I` over the sample points.
pub fn check_structure(structure: &Structure, points: &[Point], tol: f64) -> StructureReport {
    let n = structure.dim();
    let mut worst = 0.0;
    let mut worst_index = None;
    for (i, x) in points.iter().enumerate() {
        let j = structure.at(x);
        let dev = max_abs(&(&j * &j + DMatrix::identity(n, n)));
        if worst_index.is_none() || dev > worst {
            worst = dev;
            worst_index = Some(i);
        }
    }
    StructureReport {
        max_deviation: worst,
        worst_index,
        tolerance: tol,
        samples: points.len(),
        pass: worst <= tol,
    }
}
