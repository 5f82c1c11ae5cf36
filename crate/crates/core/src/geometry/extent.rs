use std::fmt;
use std::sync::Arc;

use nalgebra::{DVector, Matrix2, Vector2};

use crate::error::{check_dim, Error, Result};
use crate::sos::MultiPoly;

pub type ExtentField = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;
pub type ExtentGradient = Arc<dyn Fn(&[f64], &[f64]) -> DVector<f64> + Send + Sync>;

/// Shape of the system's footprint. Built-in kinds live in the plane and are
/// centered at the position coordinates of the state; `Ellipse` and
/// `Superellipse4` additionally rotate with the heading coordinate if one is
/// configured.
#[derive(Clone)]
pub enum ExtentKind {
    /// `|c - y|^2 - r^2`
    Ball { radius: f64 },
    /// `p^T P p - size^2` with body coordinates `p = R(-phi)(c - y)`.
    Ellipse { shape: Matrix2<f64>, size: f64 },
    /// `a^4 p1^4 + b^4 p2^4 - size^4` with body coordinates `p`.
    Superellipse4 { a: f64, b: f64, size: f64 },
    Custom {
        value: ExtentField,
        grad_x: Option<ExtentGradient>,
        grad_y: Option<ExtentGradient>,
    },
}

impl fmt::Debug for ExtentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtentKind::Ball { radius } => f.debug_struct("Ball").field("radius", radius).finish(),
            ExtentKind::Ellipse { shape, size } => f
                .debug_struct("Ellipse")
                .field("shape", &shape.as_slice())
                .field("size", size)
                .finish(),
            ExtentKind::Superellipse4 { a, b, size } => f
                .debug_struct("Superellipse4")
                .field("a", a)
                .field("b", b)
                .field("size", size)
                .finish(),
            ExtentKind::Custom { grad_x, grad_y, .. } => f
                .debug_struct("Custom")
                .field("has_grad_x", &grad_x.is_some())
                .field("has_grad_y", &grad_y.is_some())
                .finish(),
        }
    }
}

/// The extent function `E(x, y)`: negative inside the footprint, zero on its
/// boundary, positive outside.
///
/// The third regularity condition of an extent function (points with small
/// `E` are uniformly close to the boundary) is not checked at runtime. The
/// built-in kinds satisfy it because they are smooth, compact and have a
/// nonvanishing `y`-gradient on the boundary; a `Custom` extent carries that
/// obligation itself.
#[derive(Clone, Debug)]
pub struct ExtentFunction {
    kind: ExtentKind,
    state_dimension: usize,
    point_dimension: usize,
    position: [usize; 2],
    heading: Option<usize>,
}

/// `E(x, .)` and `dE/dx(x, .)` as polynomials in `y` for a fixed state.
#[derive(Clone, Debug)]
pub struct ExtentPolynomials {
    pub value: MultiPoly,
    pub grad_x: Vec<MultiPoly>,
}

struct Frame {
    delta: Vector2<f64>,
    body: Vector2<f64>,
    cos: f64,
    sin: f64,
}

impl ExtentFunction {
    fn builtin(kind: ExtentKind, state_dimension: usize) -> Result<Self> {
        if state_dimension < 2 {
            return Err(Error::contract("built-in extents need at least two position coordinates"));
        }
        Ok(ExtentFunction {
            kind,
            state_dimension,
            point_dimension: 2,
            position: [0, 1],
            heading: None,
        })
    }

    pub fn ball(radius: f64, state_dimension: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::contract("extent ball radius must be positive"));
        }
        Self::builtin(ExtentKind::Ball { radius }, state_dimension)
    }

    pub fn ellipse(shape: Matrix2<f64>, size: f64, state_dimension: usize) -> Result<Self> {
        if (shape[(0, 1)] - shape[(1, 0)]).abs() > 1e-12 * shape.norm() {
            return Err(Error::contract("ellipse shape matrix must be symmetric"));
        }
        if !(shape[(0, 0)] > 0.0 && shape.determinant() > 0.0) || !(size > 0.0) {
            return Err(Error::contract(
                "ellipse shape matrix must be positive definite and size positive",
            ));
        }
        Self::builtin(ExtentKind::Ellipse { shape, size }, state_dimension)
    }

    pub fn superellipse4(a: f64, b: f64, size: f64, state_dimension: usize) -> Result<Self> {
        if !(a > 0.0 && b > 0.0 && size > 0.0) {
            return Err(Error::contract("superellipse weights and size must be positive"));
        }
        Self::builtin(ExtentKind::Superellipse4 { a, b, size }, state_dimension)
    }

    pub fn custom(
        state_dimension: usize,
        point_dimension: usize,
        value: ExtentField,
        grad_x: Option<ExtentGradient>,
        grad_y: Option<ExtentGradient>,
    ) -> Self {
        ExtentFunction {
            kind: ExtentKind::Custom {
                value,
                grad_x,
                grad_y,
            },
            state_dimension,
            point_dimension,
            position: [0, 1],
            heading: None,
        }
    }

    /// Couples the body frame to state coordinate `index` (the heading angle).
    pub fn with_heading(mut self, index: usize) -> Result<Self> {
        if index >= self.state_dimension || self.position.contains(&index) {
            return Err(Error::contract(format!(
                "heading index {index} invalid for state dimension {}",
                self.state_dimension
            )));
        }
        self.heading = Some(index);
        Ok(self)
    }

    /// Selects which state coordinates hold the extent center.
    pub fn with_position(mut self, i: usize, j: usize) -> Result<Self> {
        if i == j || i >= self.state_dimension || j >= self.state_dimension {
            return Err(Error::contract("invalid position indices"));
        }
        self.position = [i, j];
        Ok(self)
    }

    pub fn kind(&self) -> &ExtentKind {
        &self.kind
    }

    pub fn state_dimension(&self) -> usize {
        self.state_dimension
    }

    pub fn point_dimension(&self) -> usize {
        self.point_dimension
    }

    pub fn heading_index(&self) -> Option<usize> {
        self.heading
    }

    pub fn position_indices(&self) -> [usize; 2] {
        self.position
    }

    pub fn is_builtin(&self) -> bool {
        !matches!(self.kind, ExtentKind::Custom { .. })
    }

    /// Extent center for built-in kinds.
    pub fn center(&self, x: &[f64]) -> Result<Vector2<f64>> {
        check_dim("extent state", self.state_dimension, x.len())?;
        Ok(Vector2::new(x[self.position[0]], x[self.position[1]]))
    }

    pub fn heading(&self, x: &[f64]) -> f64 {
        self.heading.map_or(0.0, |i| x[i])
    }

    fn frame(&self, x: &[f64], y: &[f64]) -> Frame {
        let delta = Vector2::new(x[self.position[0]] - y[0], x[self.position[1]] - y[1]);
        let (sin, cos) = match (&self.kind, self.heading) {
            (ExtentKind::Ball { .. }, _) | (_, None) => (0.0, 1.0),
            (_, Some(i)) => x[i].sin_cos(),
        };
        let body = Vector2::new(cos * delta.x + sin * delta.y, -sin * delta.x + cos * delta.y);
        Frame {
            delta,
            body,
            cos,
            sin,
        }
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        check_dim("extent state", self.state_dimension, x.len())?;
        check_dim("extent point", self.point_dimension, y.len())
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.value_unchecked(x, y))
    }

    pub(crate) fn value_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        if let ExtentKind::Custom { value, .. } = &self.kind {
            return value(x, y);
        }
        let fr = self.frame(x, y);
        match &self.kind {
            ExtentKind::Ball { radius } => fr.delta.norm_squared() - radius * radius,
            ExtentKind::Ellipse { shape, size } => fr.body.dot(&(shape * fr.body)) - size * size,
            ExtentKind::Superellipse4 { a, b, size } => {
                (a * fr.body.x).powi(4) + (b * fr.body.y).powi(4) - size.powi(4)
            }
            ExtentKind::Custom { .. } => unreachable!(),
        }
    }

    /// Gradient with respect to the body coordinates, then rotated back to
    /// the world frame (`dE/d delta`) together with `dE/d phi`.
    fn delta_gradient(&self, fr: &Frame) -> (Vector2<f64>, f64) {
        let gp = match &self.kind {
            ExtentKind::Ball { .. } => return (2.0 * fr.delta, 0.0),
            ExtentKind::Ellipse { shape, .. } => 2.0 * (shape * fr.body),
            ExtentKind::Superellipse4 { a, b, .. } => Vector2::new(
                4.0 * a.powi(4) * fr.body.x.powi(3),
                4.0 * b.powi(4) * fr.body.y.powi(3),
            ),
            ExtentKind::Custom { .. } => unreachable!(),
        };
        let gd = Vector2::new(fr.cos * gp.x - fr.sin * gp.y, fr.sin * gp.x + fr.cos * gp.y);
        // d(body)/d(phi) = (body.y, -body.x)
        let dphi = gp.x * fr.body.y - gp.y * fr.body.x;
        (gd, dphi)
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
        self.check(x, y)?;
        if let ExtentKind::Custom { grad_x, .. } = &self.kind {
            let g = grad_x
                .as_ref()
                .ok_or_else(|| Error::Unsupported("custom extent has no dE/dx callback".into()))?;
            let out = g(x, y);
            check_dim("custom dE/dx", self.state_dimension, out.len())?;
            return Ok(out);
        }
        let fr = self.frame(x, y);
        let (gd, dphi) = self.delta_gradient(&fr);
        let mut out = DVector::zeros(self.state_dimension);
        out[self.position[0]] = gd.x;
        out[self.position[1]] = gd.y;
        if let Some(i) = self.heading {
            out[i] = dphi;
        }
        Ok(out)
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Result<DVector<f64>> {
        self.check(x, y)?;
        if let ExtentKind::Custom { grad_y, .. } = &self.kind {
            let g = grad_y
                .as_ref()
                .ok_or_else(|| Error::Unsupported("custom extent has no dE/dy callback".into()))?;
            let out = g(x, y);
            check_dim("custom dE/dy", self.point_dimension, out.len())?;
            return Ok(out);
        }
        let fr = self.frame(x, y);
        let (gd, _) = self.delta_gradient(&fr);
        Ok(DVector::from_column_slice(&[-gd.x, -gd.y]))
    }

    /// `E(x, .)` and each `dE/dx_i(x, .)` as polynomials in `y`.
    pub fn polynomials_in_y(&self, x: &[f64]) -> Result<ExtentPolynomials> {
        check_dim("extent state", self.state_dimension, x.len())?;
        let c = |v: f64| MultiPoly::constant(2, v);
        let d1 = &c(x[self.position[0]]) - &MultiPoly::var(2, 0);
        let d2 = &c(x[self.position[1]]) - &MultiPoly::var(2, 1);
        let (sin, cos) = match (&self.kind, self.heading) {
            (ExtentKind::Ball { .. }, _) | (_, None) => (0.0, 1.0),
            (_, Some(i)) => x[i].sin_cos(),
        };
        let p1 = &d1.scale(cos) + &d2.scale(sin);
        let p2 = &d1.scale(-sin) + &d2.scale(cos);

        let (value, gd1, gd2, dphi) = match &self.kind {
            ExtentKind::Ball { radius } => {
                let value = &(&(&d1 * &d1) + &(&d2 * &d2)) - &c(radius * radius);
                (value, d1.scale(2.0), d2.scale(2.0), MultiPoly::zero(2))
            }
            ExtentKind::Ellipse { shape, size } => {
                let value = &(&(&(&p1 * &p1).scale(shape[(0, 0)])
                    + &(&p1 * &p2).scale(2.0 * shape[(0, 1)]))
                    + &(&p2 * &p2).scale(shape[(1, 1)]))
                    - &c(size * size);
                let gp1 = &p1.scale(2.0 * shape[(0, 0)]) + &p2.scale(2.0 * shape[(0, 1)]);
                let gp2 = &p1.scale(2.0 * shape[(1, 0)]) + &p2.scale(2.0 * shape[(1, 1)]);
                rotate_back(value, gp1, gp2, &p1, &p2, cos, sin)
            }
            ExtentKind::Superellipse4 { a, b, size } => {
                let a4 = a.powi(4);
                let b4 = b.powi(4);
                let value =
                    &(&p1.powi(4).scale(a4) + &p2.powi(4).scale(b4)) - &c(size.powi(4));
                let gp1 = p1.powi(3).scale(4.0 * a4);
                let gp2 = p2.powi(3).scale(4.0 * b4);
                rotate_back(value, gp1, gp2, &p1, &p2, cos, sin)
            }
            ExtentKind::Custom { .. } => {
                return Err(Error::Unsupported(
                    "custom extent has no polynomial representation".into(),
                ))
            }
        };
        let mut grad_x = vec![MultiPoly::zero(2); self.state_dimension];
        grad_x[self.position[0]] = gd1;
        grad_x[self.position[1]] = gd2;
        if let Some(i) = self.heading {
            grad_x[i] = dphi;
        }
        Ok(ExtentPolynomials { value, grad_x })
    }
}

fn rotate_back(
    value: MultiPoly,
    gp1: MultiPoly,
    gp2: MultiPoly,
    p1: &MultiPoly,
    p2: &MultiPoly,
    cos: f64,
    sin: f64,
) -> (MultiPoly, MultiPoly, MultiPoly, MultiPoly) {
    let gd1 = &gp1.scale(cos) - &gp2.scale(sin);
    let gd2 = &gp1.scale(sin) + &gp2.scale(cos);
    let dphi = &(&gp1 * p2) - &(&gp2 * p1);
    (value, gd1, gd2, dphi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn case_study_superellipse() -> ExtentFunction {
        ExtentFunction::superellipse4(1.5, 2.0, 0.2, 3)
            .unwrap()
            .with_heading(2)
            .unwrap()
    }

    #[test]
    fn ball_values() {
        let e = ExtentFunction::ball(1.0, 2).unwrap();
        assert_eq!(e.value(&[0.0, 0.0], &[0.0, 0.0]).unwrap(), -1.0);
        assert_eq!(e.value(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(e.grad_x(&[0.0, 0.0], &[1.0, 0.0]).unwrap().as_slice(), &[-2.0, 0.0]);
        assert_eq!(e.grad_y(&[0.0, 0.0], &[1.0, 0.0]).unwrap().as_slice(), &[2.0, 0.0]);
    }

    #[test]
    fn superellipse_value() {
        let e = case_study_superellipse();
        let v = e.value(&[0.0, 0.0, 0.0], &[0.2, 0.0]).unwrap();
        assert!((v - 0.0065).abs() < 1e-15, "{v}");
    }

    #[test]
    fn ellipse_gradient_on_long_axis() {
        let p = Matrix2::new(1.0 / 2.25, 0.0, 0.0, 1.0);
        let e = ExtentFunction::ellipse(p, 1.0, 3).unwrap().with_heading(2).unwrap();
        let x = [0.0, 0.0, 0.0];
        let y = [1.5, 0.0];
        assert!(e.value(&x, &y).unwrap().abs() < 1e-15);
        let gy = e.grad_y(&x, &y).unwrap();
        assert!((gy[0] - 4.0 / 3.0).abs() < 1e-14 && gy[1].abs() < 1e-15);
        let gx = e.grad_x(&x, &y).unwrap();
        assert!((gx[0] + 4.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn dimension_mismatch() {
        let e = ExtentFunction::ball(1.0, 2).unwrap();
        assert!(matches!(
            e.value(&[0.0, 0.0, 0.0], &[0.0, 0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(e.value(&[0.0, 0.0], &[0.0]).is_err());
    }

    #[test]
    fn custom_without_gradients() {
        let e = ExtentFunction::custom(
            2,
            2,
            Arc::new(|x: &[f64], y: &[f64]| (x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2) - 1.0),
            None,
            None,
        );
        assert_eq!(e.value(&[0.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert!(matches!(e.grad_x(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Unsupported(_))));
        assert!(matches!(e.grad_y(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::Unsupported(_))));
        assert!(e.polynomials_in_y(&[0.0, 0.0]).is_err());
    }

    #[test]
    fn invalid_construction() {
        assert!(ExtentFunction::ball(0.0, 2).is_err());
        assert!(ExtentFunction::ellipse(Matrix2::new(1.0, 0.0, 0.0, -1.0), 1.0, 2).is_err());
        assert!(ExtentFunction::ball(1.0, 2).unwrap().with_heading(1).is_err());
    }

    #[test]
    fn polynomial_expansion_at_zero_heading() {
        // At phi = 0 and the origin: 1.5^4 y1^4 + 2^4 y2^4 - 0.2^4, no cross terms
        let e = case_study_superellipse();
        let polys = e.polynomials_in_y(&[0.0, 0.0, 0.0]).unwrap();
        let expected = MultiPoly::from_terms(
            2,
            [
                (vec![4, 0], 1.5f64.powi(4)),
                (vec![0, 4], 16.0),
                (vec![0, 0], -(0.2f64.powi(4))),
            ],
        )
        .unwrap();
        assert!(polys.value.max_coeff_diff(&expected) < 1e-14);
    }
}
