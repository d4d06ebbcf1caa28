use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::Point;
use crate::error::{Error, Result};

/// Smoothness of a Matérn kernel. Only half-integer orders have a closed form
/// without Bessel functions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MaternNu {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl MaternNu {
    pub fn value(self) -> f64 {
        match self {
            MaternNu::Half => 0.5,
            MaternNu::ThreeHalves => 1.5,
            MaternNu::FiveHalves => 2.5,
        }
    }

    pub fn from_value(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(MaternNu::Half),
            1.5 => Ok(MaternNu::ThreeHalves),
            2.5 => Ok(MaternNu::FiveHalves),
            other => Err(Error::InvalidParameter(format!(
                "matern nu must be one of 0.5, 1.5, 2.5 (got {other})"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum KernelFamily {
    SquaredExponential {
        lengthscale: f64,
    },
    Matern {
        nu: MaternNu,
        lengthscale: f64,
    },
    Linear,
    /// Indicator kernel `1{x == y}`; characteristic on finite domains.
    Delta,
}

/// A positive semi-definite kernel `output_scale * family(x, y)`.
///
/// Serialized as a flat table `{family, lengthscale, nu, output_scale}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "KernelSpecRepr", into = "KernelSpecRepr")]
pub struct KernelSpec {
    pub family: KernelFamily,
    pub output_scale: f64,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, output_scale: f64) -> Result<Self> {
        if !(output_scale > 0.0 && output_scale.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "output_scale must be positive (got {output_scale})"
            )));
        }
        match family {
            KernelFamily::SquaredExponential { lengthscale }
            | KernelFamily::Matern { lengthscale, .. }
                if !(lengthscale > 0.0 && lengthscale.is_finite()) =>
            {
                return Err(Error::InvalidParameter(format!(
                    "lengthscale must be positive (got {lengthscale})"
                )));
            }
            _ => {}
        }
        Ok(KernelSpec {
            family,
            output_scale,
        })
    }

    pub fn squared_exponential(lengthscale: f64, output_scale: f64) -> Result<Self> {
        Self::new(
            KernelFamily::SquaredExponential { lengthscale },
            output_scale,
        )
    }

    pub fn matern(nu: MaternNu, lengthscale: f64, output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Matern { nu, lengthscale }, output_scale)
    }

    pub fn delta(output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Delta, output_scale)
    }

    pub fn linear(output_scale: f64) -> Result<Self> {
        Self::new(KernelFamily::Linear, output_scale)
    }

    pub fn is_stationary(&self) -> bool {
        !matches!(self.family, KernelFamily::Linear)
    }

    /// `sup_x sqrt(k(x, x))` for stationary families; `None` for the linear kernel,
    /// whose diagonal is unbounded.
    pub fn sup_norm_bound(&self) -> Option<f64> {
        self.is_stationary().then(|| self.output_scale.sqrt())
    }

    pub fn eval(&self, x: &Point, y: &Point) -> Result<f64> {
        if x.dim() != y.dim() {
            return Err(Error::DimensionMismatch {
                expected: x.dim(),
                found: y.dim(),
            });
        }
        Ok(self.eval_unchecked(x, y))
    }

    pub(crate) fn eval_unchecked(&self, x: &Point, y: &Point) -> f64 {
        let s = self.output_scale;
        match self.family {
            KernelFamily::SquaredExponential { lengthscale } => {
                s * (-0.5 * x.sq_distance(y) / (lengthscale * lengthscale)).exp()
            }
            KernelFamily::Matern { nu, lengthscale } => {
                let r = x.sq_distance(y).sqrt() / lengthscale;
                s * match nu {
                    MaternNu::Half => (-r).exp(),
                    MaternNu::ThreeHalves => {
                        let a = 3f64.sqrt() * r;
                        (1.0 + a) * (-a).exp()
                    }
                    MaternNu::FiveHalves => {
                        let a = 5f64.sqrt() * r;
                        (1.0 + a + 5.0 * r * r / 3.0) * (-a).exp()
                    }
                }
            }
            KernelFamily::Linear => s * x.dot(y),
            KernelFamily::Delta => {
                if x.coords() == y.coords() {
                    s
                } else {
                    0.0
                }
            }
        }
    }

    /// `k(x, x)`.
    pub fn diag(&self, x: &Point) -> f64 {
        match self.family {
            KernelFamily::Linear => self.output_scale * x.dot(x),
            _ => self.output_scale,
        }
    }

    /// Vector `[k(x_i, y)]_i`.
    pub fn cross(&self, xs: &[Point], y: &Point) -> Result<Vec<f64>> {
        xs.iter().map(|x| self.eval(x, y)).collect()
    }
}

/// Gram matrix `[k(x_i, x_j)]_{ij}`. An empty list yields a 0x0 matrix.
pub fn gram_matrix(spec: &KernelSpec, xs: &[Point]) -> Result<DMatrix<f64>> {
    let n = xs.len();
    if let Some(first) = xs.first() {
        if let Some(bad) = xs.iter().find(|x| x.dim() != first.dim()) {
            return Err(Error::DimensionMismatch {
                expected: first.dim(),
                found: bad.dim(),
            });
        }
    }
    let mut gram = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let k = spec.eval_unchecked(&xs[i], &xs[j]);
            gram[(i, j)] = k;
            gram[(j, i)] = k;
        }
    }
    Ok(gram)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct KernelSpecRepr {
    family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lengthscale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    nu: Option<f64>,
    #[serde(default = "default_scale")]
    output_scale: f64,
}

fn default_scale() -> f64 {
    1.0
}

impl TryFrom<KernelSpecRepr> for KernelSpec {
    type Error = Error;

    fn try_from(repr: KernelSpecRepr) -> Result<Self> {
        let lengthscale = repr.lengthscale.unwrap_or(1.0);
        let family = match repr.family.to_ascii_lowercase().as_str() {
            "squared_exponential" | "se" | "rbf" => {
                KernelFamily::SquaredExponential { lengthscale }
            }
            "matern" => KernelFamily::Matern {
                nu: MaternNu::from_value(repr.nu.unwrap_or(1.5))?,
                lengthscale,
            },
            "linear" => KernelFamily::Linear,
            "delta" => KernelFamily::Delta,
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown kernel family `{other}`"
                )))
            }
        };
        KernelSpec::new(family, repr.output_scale)
    }
}

impl From<KernelSpec> for KernelSpecRepr {
    fn from(spec: KernelSpec) -> Self {
        let (family, lengthscale, nu) = match spec.family {
            KernelFamily::SquaredExponential { lengthscale } => {
                ("squared_exponential", Some(lengthscale), None)
            }
            KernelFamily::Matern { nu, lengthscale } => {
                ("matern", Some(lengthscale), Some(nu.value()))
            }
            KernelFamily::Linear => ("linear", None, None),
            KernelFamily::Delta => ("delta", None, None),
        };
        KernelSpecRepr {
            family: family.to_string(),
            lengthscale,
            nu,
            output_scale: spec.output_scale,
        }
    }
}
