use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{check_dim, Error, Result};
use crate::sos::MultiPoly;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> DVector<f64> + Send + Sync>;

/// Safe function `h`; the safe set is `{y | h(y) >= 0}`.
#[derive(Clone)]
pub enum SafeKind {
    /// `h(y) = normal . y + offset`
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// `h(y) = radius^2 - |y - center|^2`
    Ball { center: Vec<f64>, radius: f64 },
    /// Coefficient table; gradient polynomials are cached alongside.
    Polynomial { poly: MultiPoly, gradient: Vec<MultiPoly> },
    Custom {
        value: ScalarField,
        gradient: Option<VectorField>,
    },
}

impl fmt::Debug for SafeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SafeKind::Halfspace { normal, offset } => f
                .debug_struct("Halfspace")
                .field("normal", normal)
                .field("offset", offset)
                .finish(),
            SafeKind::Ball { center, radius } => f
                .debug_struct("Ball")
                .field("center", center)
                .field("radius", radius)
                .finish(),
            SafeKind::Polynomial { poly, .. } => write!(f, "Polynomial({poly})"),
            SafeKind::Custom { gradient, .. } => f
                .debug_struct("Custom")
                .field("has_gradient", &gradient.is_some())
                .finish(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SafeFunction {
    kind: SafeKind,
    dimension: usize,
}

impl SafeFunction {
    pub fn halfspace(normal: Vec<f64>, offset: f64) -> Result<Self> {
        if normal.is_empty() {
            return Err(Error::contract("halfspace normal must be nonempty"));
        }
        if normal.iter().all(|v| *v == 0.0) {
            return Err(Error::contract("halfspace normal must be nonzero"));
        }
        Ok(SafeFunction {
            dimension: normal.len(),
            kind: SafeKind::Halfspace { normal, offset },
        })
    }

    pub fn ball(center: Vec<f64>, radius: f64) -> Result<Self> {
        if center.is_empty() || !(radius > 0.0) {
            return Err(Error::contract("ball safe set needs a center and a positive radius"));
        }
        Ok(SafeFunction {
            dimension: center.len(),
            kind: SafeKind::Ball { center, radius },
        })
    }

    pub fn polynomial(poly: MultiPoly) -> Result<Self> {
        let dimension = poly.nvars();
        if dimension == 0 {
            return Err(Error::contract("polynomial safe function needs at least one variable"));
        }
        let gradient = (0..dimension)
            .map(|i| poly.partial_derivative(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(SafeFunction {
            dimension,
            kind: SafeKind::Polynomial { poly, gradient },
        })
    }

    /// `h(y) = 1 - sum_i ((y_i - c_i) / a_i)^p` for an even power `p`.
    pub fn superellipse(center: Vec<f64>, semi_axes: Vec<f64>, power: u32) -> Result<Self> {
        if center.len() != semi_axes.len() || center.is_empty() {
            return Err(Error::contract("superellipse center and semi-axes must have equal, nonzero length"));
        }
        if power == 0 || power % 2 != 0 {
            return Err(Error::contract("superellipse power must be a positive even integer"));
        }
        if semi_axes.iter().any(|a| !(*a > 0.0)) {
            return Err(Error::contract("superellipse semi-axes must be positive"));
        }
        let n = center.len();
        let mut h = MultiPoly::constant(n, 1.0);
        for i in 0..n {
            let shifted = &MultiPoly::var(n, i) - &MultiPoly::constant(n, center[i]);
            let term = shifted.scale(1.0 / semi_axes[i]).powi(power);
            h = &h - &term;
        }
        Self::polynomial(h)
    }

    pub fn custom(dimension: usize, value: ScalarField, gradient: Option<VectorField>) -> Self {
        SafeFunction {
            dimension,
            kind: SafeKind::Custom { value, gradient },
        }
    }

    pub fn kind(&self) -> &SafeKind {
        &self.kind
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn value(&self, y: &[f64]) -> Result<f64> {
        check_dim("safe function point", self.dimension, y.len())?;
        Ok(match &self.kind {
            SafeKind::Halfspace { normal, offset } => {
                normal.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            SafeKind::Ball { center, radius } => {
                radius * radius - center.iter().zip(y).map(|(c, v)| (v - c) * (v - c)).sum::<f64>()
            }
            SafeKind::Polynomial { poly, .. } => poly.evaluate(y)?,
            SafeKind::Custom { value, .. } => value(y),
        })
    }

    pub fn gradient(&self, y: &[f64]) -> Result<DVector<f64>> {
        check_dim("safe function point", self.dimension, y.len())?;
        Ok(match &self.kind {
            SafeKind::Halfspace { normal, .. } => DVector::from_column_slice(normal),
            SafeKind::Ball { center, .. } => {
                DVector::from_iterator(y.len(), center.iter().zip(y).map(|(c, v)| -2.0 * (v - c)))
            }
            SafeKind::Polynomial { gradient, .. } => DVector::from_iterator(
                y.len(),
                gradient.iter().map(|g| g.evaluate(y).unwrap_or(f64::NAN)),
            ),
            SafeKind::Custom { gradient, .. } => match gradient {
                Some(g) => {
                    let out = g(y);
                    check_dim("custom safe gradient", self.dimension, out.len())?;
                    out
                }
                None => {
                    return Err(Error::Unsupported(
                        "custom safe function has no gradient callback".into(),
                    ))
                }
            },
        })
    }

    /// The safe function as a polynomial in `y`, when it is one.
    pub fn as_polynomial(&self) -> Option<MultiPoly> {
        let n = self.dimension;
        match &self.kind {
            SafeKind::Halfspace { normal, offset } => {
                let mut p = MultiPoly::constant(n, *offset);
                for (i, a) in normal.iter().enumerate() {
                    p = &p + &MultiPoly::var(n, i).scale(*a);
                }
                Some(p)
            }
            SafeKind::Ball { center, radius } => {
                let mut p = MultiPoly::constant(n, radius * radius);
                for (i, c) in center.iter().enumerate() {
                    let d = &MultiPoly::var(n, i) - &MultiPoly::constant(n, *c);
                    p = &p - &(&d * &d);
                }
                Some(p)
            }
            SafeKind::Polynomial { poly, .. } => Some(poly.clone()),
            SafeKind::Custom { .. } => None,
        }
    }

    /// Checks that the gradient does not vanish at the given zero-level
    /// points (those with `|h| <= 1e-8`). Other points are ignored.
    pub fn check_regular_zero_level<'a, I>(&self, points: I) -> Result<usize>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut checked = 0;
        for y in points {
            if self.value(y)?.abs() > 1e-8 {
                continue;
            }
            checked += 1;
            if self.gradient(y)?.norm() <= 1e-12 {
                return Err(Error::Geometry(format!(
                    "safe function gradient vanishes on its zero level at {y:?}"
                )));
            }
        }
        Ok(checked)
    }
}
