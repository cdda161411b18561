//! Non-parametrized reference paths as level-surface pairs.
//!
//! A path is the cross-section {s1(p) = 0} ∩ {s2(p) = 0} of two scalar
//! fields with analytic gradients and Hessians. The module evaluates path
//! frames (unit normals and the tangent), the desired orientation along the
//! path, and the time derivatives of all frame quantities for a supplied
//! position rate.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::errors::{Error, Result};

/// Scalar field over position with analytic first and second derivatives.
///
/// Evaluators must be re-entrant; a `PathSpec` is shared across threads.
pub trait LevelSurface: Send + Sync {
    fn value(&self, p: &Vector3<f64>) -> f64;
    fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64>;
    fn hessian(&self, p: &Vector3<f64>) -> Matrix3<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrigKind {
    Sin,
    Cos,
}

/// Optional single-axis trigonometric factor of a term.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigFactor {
    /// 0 = x, 1 = y, 2 = z.
    pub axis: usize,
    pub frequency: f64,
    pub kind: TrigKind,
}

impl TrigFactor {
    fn eval(&self, v: f64) -> (f64, f64, f64) {
        let a = self.frequency * v;
        let w = self.frequency;
        match self.kind {
            TrigKind::Sin => (a.sin(), w * a.cos(), -w * w * a.sin()),
            TrigKind::Cos => (a.cos(), -w * a.sin(), -w * w * a.cos()),
        }
    }
}

/// One term `coeff * x^px * y^py * z^pz * trig(freq * axis)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurfaceTerm {
    pub coeff: f64,
    pub powers: [u32; 3],
    #[serde(default)]
    pub trig: Option<TrigFactor>,
}

impl SurfaceTerm {
    fn monomial(&self, p: &Vector3<f64>) -> f64 {
        (0..3).map(|i| p[i].powi(self.powers[i] as i32)).product()
    }

    fn monomial_d(&self, p: &Vector3<f64>, i: usize) -> f64 {
        let n = self.powers[i];
        if n == 0 {
            return 0.0;
        }
        let mut out = n as f64 * p[i].powi(n as i32 - 1);
        for k in 0..3 {
            if k != i {
                out *= p[k].powi(self.powers[k] as i32);
            }
        }
        out
    }

    fn monomial_dd(&self, p: &Vector3<f64>, i: usize, j: usize) -> f64 {
        if i == j {
            let n = self.powers[i];
            if n < 2 {
                return 0.0;
            }
            let mut out = (n * (n - 1)) as f64 * p[i].powi(n as i32 - 2);
            for k in 0..3 {
                if k != i {
                    out *= p[k].powi(self.powers[k] as i32);
                }
            }
            out
        } else {
            let (ni, nj) = (self.powers[i], self.powers[j]);
            if ni == 0 || nj == 0 {
                return 0.0;
            }
            let mut out = (ni * nj) as f64 * p[i].powi(ni as i32 - 1) * p[j].powi(nj as i32 - 1);
            for k in 0..3 {
                if k != i && k != j {
                    out *= p[k].powi(self.powers[k] as i32);
                }
            }
            out
        }
    }
}

/// Closed-form surface assembled from polynomial/trigonometric terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSurface {
    pub terms: Vec<SurfaceTerm>,
}

impl TermSurface {
    pub fn new(terms: Vec<SurfaceTerm>) -> Self {
        Self { terms }
    }
}

impl LevelSurface for TermSurface {
    fn value(&self, p: &Vector3<f64>) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                let g = t.trig.map_or(1.0, |tr| tr.eval(p[tr.axis]).0);
                t.coeff * t.monomial(p) * g
            })
            .sum()
    }

    fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let mut out = Vector3::zeros();
        for t in &self.terms {
            let (g, gd) = match t.trig {
                Some(tr) => {
                    let (g, gd, _) = tr.eval(p[tr.axis]);
                    (g, gd)
                }
                None => (1.0, 0.0),
            };
            let m = t.monomial(p);
            for i in 0..3 {
                let mut v = t.monomial_d(p, i) * g;
                if let Some(tr) = t.trig {
                    if tr.axis == i {
                        v += m * gd;
                    }
                }
                out[i] += t.coeff * v;
            }
        }
        out
    }

    fn hessian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        let mut out = Matrix3::zeros();
        for t in &self.terms {
            let (g, gd, gdd) = match t.trig {
                Some(tr) => tr.eval(p[tr.axis]),
                None => (1.0, 0.0, 0.0),
            };
            let m = t.monomial(p);
            for i in 0..3 {
                for j in 0..3 {
                    let mut v = t.monomial_dd(p, i, j) * g;
                    if let Some(tr) = t.trig {
                        if tr.axis == j {
                            v += t.monomial_d(p, i) * gd;
                        }
                        if tr.axis == i {
                            v += t.monomial_d(p, j) * gd;
                        }
                        if tr.axis == i && tr.axis == j {
                            v += m * gdd;
                        }
                    }
                    out[(i, j)] += t.coeff * v;
                }
            }
        }
        out
    }
}

/// Finite-difference adapter over a raw scalar field.
///
/// Test support only: control loops require analytic derivatives.
pub struct FiniteDifferenceSurface<F: Fn(&Vector3<f64>) -> f64 + Send + Sync> {
    pub field: F,
    pub step: f64,
}

impl<F: Fn(&Vector3<f64>) -> f64 + Send + Sync> LevelSurface for FiniteDifferenceSurface<F> {
    fn value(&self, p: &Vector3<f64>) -> f64 {
        (self.field)(p)
    }

    fn gradient(&self, p: &Vector3<f64>) -> Vector3<f64> {
        let h = self.step;
        Vector3::from_fn(|i, _| {
            let mut pp = *p;
            let mut pm = *p;
            pp[i] += h;
            pm[i] -= h;
            ((self.field)(&pp) - (self.field)(&pm)) / (2.0 * h)
        })
    }

    fn hessian(&self, p: &Vector3<f64>) -> Matrix3<f64> {
        let h = self.step;
        Matrix3::from_fn(|i, j| {
            let mut pp = *p;
            let mut pm = *p;
            pp[j] += h;
            pm[j] -= h;
            (self.gradient(&pp)[i] - self.gradient(&pm)[i]) / (2.0 * h)
        })
    }
}

/// Regularity bounds the level surfaces are held to at every queried point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AssumptionBounds {
    /// Lower bound on gradient norms.
    pub gradient_lower: f64,
    /// Upper bound on gradient norms.
    pub gradient_upper: f64,
    /// Upper bound on Hessian norms (reported by `validate_path`).
    pub hessian_upper: f64,
    /// Floor on |grad1 x grad2| below which gradients count as collinear.
    pub collinearity_floor: f64,
    /// Floor on the planar tangent norm along the path (reported only).
    pub planar_tangent_floor: f64,
}

impl Default for AssumptionBounds {
    fn default() -> Self {
        Self {
            gradient_lower: 1e-3,
            gradient_upper: 1e3,
            hessian_upper: 1e3,
            collinearity_floor: 1e-9,
            planar_tangent_floor: 1e-3,
        }
    }
}

/// Reference path: level-surface pair, movement direction and strategy, and
/// the constant speed profile.
#[derive(Clone)]
pub struct PathSpec {
    s1: Arc<dyn LevelSurface>,
    s2: Arc<dyn LevelSurface>,
    /// Movement direction along the path, +1 or -1.
    pub direction: i8,
    /// Movement strategy xi_d: +1 forward, -1 backward.
    pub strategy: i8,
    /// Speed profile magnitude U > 0 [m/s].
    pub speed: f64,
    pub bounds: AssumptionBounds,
}

impl fmt::Debug for PathSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PathSpec")
            .field("direction", &self.direction)
            .field("strategy", &self.strategy)
            .field("speed", &self.speed)
            .field("bounds", &self.bounds)
            .finish()
    }
}

impl PathSpec {
    pub fn new(
        s1: Arc<dyn LevelSurface>,
        s2: Arc<dyn LevelSurface>,
        direction: i8,
        strategy: i8,
        speed: f64,
    ) -> Result<Self> {
        if direction != 1 && direction != -1 {
            return Err(Error::Validation("direction must be +1 or -1".into()));
        }
        if strategy != 1 && strategy != -1 {
            return Err(Error::Validation("strategy must be +1 or -1".into()));
        }
        if !(speed > 0.0 && speed.is_finite()) {
            return Err(Error::Validation("speed must be positive".into()));
        }
        Ok(Self {
            s1,
            s2,
            direction,
            strategy,
            speed,
            bounds: AssumptionBounds::default(),
        })
    }

    pub fn with_bounds(mut self, bounds: AssumptionBounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Signed reference surge velocity u_d = xi_d U.
    pub fn reference_velocity(&self) -> f64 {
        self.strategy as f64 * self.speed
    }

    pub fn surface(&self, j: usize) -> &dyn LevelSurface {
        match j {
            0 => self.s1.as_ref(),
            1 => self.s2.as_ref(),
            _ => panic!("surface index must be 0 or 1"),
        }
    }

    /// Helix-like path: s1 = -x + sin(w z), s2 = -y + cos(w z).
    pub fn helix(frequency: f64, strategy: i8, speed: f64) -> Result<Self> {
        let s1 = TermSurface::new(vec![
            SurfaceTerm {
                coeff: -1.0,
                powers: [1, 0, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: 1.0,
                powers: [0, 0, 0],
                trig: Some(TrigFactor {
                    axis: 2,
                    frequency,
                    kind: TrigKind::Sin,
                }),
            },
        ]);
        let s2 = TermSurface::new(vec![
            SurfaceTerm {
                coeff: -1.0,
                powers: [0, 1, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: 1.0,
                powers: [0, 0, 0],
                trig: Some(TrigFactor {
                    axis: 2,
                    frequency,
                    kind: TrigKind::Cos,
                }),
            },
        ]);
        Self::new(Arc::new(s1), Arc::new(s2), 1, strategy, speed)
    }

    /// Elliptic cylinder cut by a plane:
    /// s1 = (x/rx)^2 + (y/ry)^2 - 1, s2 = n . p - c.
    pub fn plane_ellipse(
        rx: f64,
        ry: f64,
        plane_normal: Vector3<f64>,
        plane_offset: f64,
        strategy: i8,
        speed: f64,
    ) -> Result<Self> {
        if rx <= 0.0 || ry <= 0.0 {
            return Err(Error::Validation("ellipse radii must be positive".into()));
        }
        let s1 = TermSurface::new(vec![
            SurfaceTerm {
                coeff: 1.0 / (rx * rx),
                powers: [2, 0, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: 1.0 / (ry * ry),
                powers: [0, 2, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: -1.0,
                powers: [0, 0, 0],
                trig: None,
            },
        ]);
        let s2 = TermSurface::new(vec![
            SurfaceTerm {
                coeff: plane_normal[0],
                powers: [1, 0, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: plane_normal[1],
                powers: [0, 1, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: plane_normal[2],
                powers: [0, 0, 1],
                trig: None,
            },
            SurfaceTerm {
                coeff: -plane_offset,
                powers: [0, 0, 0],
                trig: None,
            },
        ]);
        Self::new(Arc::new(s1), Arc::new(s2), 1, strategy, speed)
    }
}

/// A point on the helix path of `PathSpec::helix`, parametrized by z.
pub fn helix_path_point(frequency: f64, z: f64) -> Vector3<f64> {
    Vector3::new((frequency * z).sin(), (frequency * z).cos(), z)
}

/// A point on the plane-ellipse path, parametrized by the ellipse angle.
/// Requires a plane normal with a nonzero z component.
pub fn plane_ellipse_path_point(
    rx: f64,
    ry: f64,
    plane_normal: Vector3<f64>,
    plane_offset: f64,
    angle: f64,
) -> Vector3<f64> {
    let x = rx * angle.cos();
    let y = ry * angle.sin();
    let z = (plane_offset - plane_normal[0] * x - plane_normal[1] * y) / plane_normal[2];
    Vector3::new(x, y, z)
}

/// Frame quantities evaluated at one position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathFrame {
    /// (s1, s2) values; zero on the path.
    pub s_values: (f64, f64),
    /// Raw gradients of the level surfaces.
    pub gradients: (Vector3<f64>, Vector3<f64>),
    /// Unit inward normals: -grad_j / |grad_j|.
    pub normals: (Vector3<f64>, Vector3<f64>),
    /// Unit tangent sigma (grad1 x grad2) / |grad1 x grad2|.
    pub tangent: Vector3<f64>,
    /// Projection of the tangent onto the x-y plane.
    pub planar_tangent: Vector2<f64>,
}

impl PathFrame {
    pub fn planar_tangent_norm(&self) -> f64 {
        self.planar_tangent.norm()
    }
}

/// Evaluates normals and tangent at `position`, enforcing the gradient-norm
/// band and the non-collinearity floor.
pub fn evaluate_frame(path: &PathSpec, position: &Vector3<f64>) -> Result<PathFrame> {
    let b = &path.bounds;
    let mut grads = [Vector3::zeros(); 2];
    let mut values = [0.0; 2];
    for j in 0..2 {
        let s = path.surface(j);
        values[j] = s.value(position);
        let g = s.gradient(position);
        let n = g.norm();
        if !(n > b.gradient_lower && n < b.gradient_upper && n.is_finite()) {
            return Err(Error::DegenerateGradient {
                surface: j + 1,
                norm: n,
                lower: b.gradient_lower,
                upper: b.gradient_upper,
            });
        }
        grads[j] = g;
    }
    let cross = grads[0].cross(&grads[1]);
    let cross_norm = cross.norm();
    if cross_norm <= b.collinearity_floor {
        return Err(Error::CollinearGradients {
            cross_norm,
            floor: b.collinearity_floor,
        });
    }
    let tangent = cross * (path.direction as f64 / cross_norm);
    Ok(PathFrame {
        s_values: (values[0], values[1]),
        gradients: (grads[0], grads[1]),
        normals: (-grads[0] / grads[0].norm(), -grads[1] / grads[1].norm()),
        tangent,
        planar_tangent: Vector2::new(tangent[0], tangent[1]),
    })
}

/// Reference orientation along the path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesiredOrientation {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// Four-quadrant arctangent on [-pi, pi): `atan2` with +pi folded to -pi.
pub fn atan2_half_open(y: f64, x: f64) -> f64 {
    let a = y.atan2(x);
    if a >= PI {
        a - 2.0 * PI
    } else {
        a
    }
}

/// Desired yaw/pitch/roll of the path tangent under strategy xi_d; the roll
/// reference is identically zero (non-banked motion).
pub fn desired_orientation(path: &PathSpec, frame: &PathFrame) -> Result<DesiredOrientation> {
    let planar = frame.planar_tangent_norm();
    if planar < 1e-12 {
        return Err(Error::PlanarTangentDegenerate { norm: planar });
    }
    let xi = path.strategy as f64;
    let yaw = atan2_half_open(xi * frame.tangent[1], xi * frame.tangent[0]);
    let beta1 = frame.tangent[0] * yaw.cos() + frame.tangent[1] * yaw.sin();
    let pitch = (-frame.tangent[2] / beta1).atan();
    Ok(DesiredOrientation {
        yaw,
        pitch,
        roll: 0.0,
    })
}

/// Time derivatives of the path frame for a supplied position rate.
///
/// The caller chooses the rate: `eta_pc_dot - eps_p` gives the nominal
/// quantities, `eta_pc_dot - eps_p_hat` the output-feedback ones.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathRates {
    pub s_dot: (f64, f64),
    pub normal_dot: (Vector3<f64>, Vector3<f64>),
    pub tangent_dot: Vector3<f64>,
}

pub fn frame_time_derivatives(
    path: &PathSpec,
    position: &Vector3<f64>,
    position_rate: &Vector3<f64>,
) -> Result<PathRates> {
    let frame = evaluate_frame(path, position)?;
    Ok(frame_time_derivatives_at(
        path,
        &frame,
        position,
        position_rate,
    ))
}

/// As `frame_time_derivatives`, reusing an already-evaluated frame.
pub fn frame_time_derivatives_at(
    path: &PathSpec,
    frame: &PathFrame,
    position: &Vector3<f64>,
    position_rate: &Vector3<f64>,
) -> PathRates {
    let (g1, g2) = frame.gradients;
    let h1 = path.surface(0).hessian(position);
    let h2 = path.surface(1).hessian(position);

    let g1_dot = h1 * position_rate;
    let g2_dot = h2 * position_rate;
    let s1_dot = g1.dot(position_rate);
    let s2_dot = g2.dot(position_rate);

    let normal_dot = |g: &Vector3<f64>, g_dot: &Vector3<f64>| -> Vector3<f64> {
        let n = g.norm();
        let n_dot = g.dot(g_dot) / n;
        (-g_dot * n + g * n_dot) / (n * n)
    };

    let w = g1.cross(&g2);
    let w_dot = g1_dot.cross(&g2) + g1.cross(&g2_dot);
    let wn = w.norm();
    let tangent_dot =
        (w_dot * w.dot(&w) - w * w.dot(&w_dot)) * (path.direction as f64 / (wn * wn * wn));

    PathRates {
        s_dot: (s1_dot, s2_dot),
        normal_dot: (normal_dot(&g1, &g1_dot), normal_dot(&g2, &g2_dot)),
        tangent_dot,
    }
}

/// Per-sample regularity summary over a batch of probe positions.
#[derive(Debug, Clone, PartialEq)]
pub struct PathValidationReport {
    pub samples: usize,
    pub grad_norm_min: [f64; 2],
    pub grad_norm_max: [f64; 2],
    pub hessian_norm_max: [f64; 2],
    pub cross_norm_min: f64,
    pub planar_tangent_min: f64,
    pub violations: Vec<String>,
}

impl PathValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Reports gradient/Hessian/collinearity statistics over `sample_positions`
/// and flags every bound violation. Never errors: reporting only.
pub fn validate_path(path: &PathSpec, sample_positions: &[Vector3<f64>]) -> PathValidationReport {
    let b = &path.bounds;
    let mut report = PathValidationReport {
        samples: sample_positions.len(),
        grad_norm_min: [f64::INFINITY; 2],
        grad_norm_max: [0.0; 2],
        hessian_norm_max: [0.0; 2],
        cross_norm_min: f64::INFINITY,
        planar_tangent_min: f64::INFINITY,
        violations: Vec::new(),
    };
    for (k, p) in sample_positions.iter().enumerate() {
        let mut grads = [Vector3::zeros(); 2];
        let mut degenerate = false;
        for j in 0..2 {
            let g = path.surface(j).gradient(p);
            let n = g.norm();
            report.grad_norm_min[j] = report.grad_norm_min[j].min(n);
            report.grad_norm_max[j] = report.grad_norm_max[j].max(n);
            if !(n > b.gradient_lower && n < b.gradient_upper) {
                report.violations.push(format!(
                    "sample {k}: |grad s{}| = {n:.3e} outside ({:.1e}, {:.1e})",
                    j + 1,
                    b.gradient_lower,
                    b.gradient_upper
                ));
                degenerate = true;
            }
            let hn = path.surface(j).hessian(p).norm();
            report.hessian_norm_max[j] = report.hessian_norm_max[j].max(hn);
            if hn >= b.hessian_upper {
                report.violations.push(format!(
                    "sample {k}: |Hess s{}| = {hn:.3e} above {:.1e}",
                    j + 1,
                    b.hessian_upper
                ));
            }
            grads[j] = g;
        }
        if degenerate {
            continue;
        }
        let cross = grads[0].cross(&grads[1]);
        let cn = cross.norm();
        report.cross_norm_min = report.cross_norm_min.min(cn);
        if cn <= b.collinearity_floor {
            report
                .violations
                .push(format!("sample {k}: collinear gradients, |g1 x g2| = {cn:.3e}"));
            continue;
        }
        let tangent = cross / cn;
        let planar = (tangent[0] * tangent[0] + tangent[1] * tangent[1]).sqrt();
        report.planar_tangent_min = report.planar_tangent_min.min(planar);
        if planar <= b.planar_tangent_floor {
            report.violations.push(format!(
                "sample {k}: planar tangent norm {planar:.3e} below {:.1e}",
                b.planar_tangent_floor
            ));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn helix() -> PathSpec {
        PathSpec::helix(4.0, 1, 0.1).unwrap()
    }

    fn ellipse() -> PathSpec {
        PathSpec::plane_ellipse(1.0, 2.0, Vector3::new(1.0, 2.0, 3.0), 1.0, 1, 0.2).unwrap()
    }

    #[test]
    fn helix_frame_at_known_point() {
        let path = helix();
        let p = Vector3::new(0.0, 1.0, 0.0);
        let f = evaluate_frame(&path, &p).unwrap();
        assert_relative_eq!(f.s_values.0, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.s_values.1, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.gradients.0, Vector3::new(-1.0, 0.0, 4.0), epsilon = 1e-15);
        assert_relative_eq!(f.gradients.1, Vector3::new(0.0, -1.0, 0.0), epsilon = 1e-15);
        let s17 = 17.0_f64.sqrt();
        assert_relative_eq!(f.normals.0, Vector3::new(1.0, 0.0, -4.0) / s17, epsilon = 1e-14);
        assert_relative_eq!(f.normals.1, Vector3::new(0.0, 1.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(f.tangent, Vector3::new(4.0, 0.0, 1.0) / s17, epsilon = 1e-14);
    }

    #[test]
    fn ellipse_point_is_on_path() {
        let path = ellipse();
        let p = Vector3::new(1.0, 0.0, 0.0);
        let f = evaluate_frame(&path, &p).unwrap();
        assert_relative_eq!(f.s_values.0, 0.0, epsilon = 1e-15);
        assert_relative_eq!(f.s_values.1, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn collinear_gradients_detected() {
        // s1 = x, s2 = 2x
        let s1 = TermSurface::new(vec![SurfaceTerm {
            coeff: 1.0,
            powers: [1, 0, 0],
            trig: None,
        }]);
        let s2 = TermSurface::new(vec![SurfaceTerm {
            coeff: 2.0,
            powers: [1, 0, 0],
            trig: None,
        }]);
        let path = PathSpec::new(Arc::new(s1), Arc::new(s2), 1, 1, 0.1).unwrap();
        match evaluate_frame(&path, &Vector3::new(0.3, 0.0, 0.0)) {
            Err(Error::CollinearGradients { .. }) => {}
            other => panic!("expected CollinearGradients, got {other:?}"),
        }
    }

    #[test]
    fn desired_orientation_on_helix() {
        let path = helix();
        let f = evaluate_frame(&path, &Vector3::new(0.0, 1.0, 0.0)).unwrap();
        let d = desired_orientation(&path, &f).unwrap();
        assert_relative_eq!(d.yaw, 0.0, epsilon = 1e-14);
        assert_relative_eq!(d.pitch, (-0.25_f64).atan(), epsilon = 1e-14);
        assert_eq!(d.roll, 0.0);
    }

    #[test]
    fn desired_orientation_axis_tangent() {
        // Any frame whose tangent is +x gives zero desired angles; with the
        // backward strategy the yaw flips to -pi.
        let path = helix();
        let mut f = evaluate_frame(&path, &Vector3::new(0.0, 1.0, 0.0)).unwrap();
        f.tangent = Vector3::new(1.0, 0.0, 0.0);
        f.planar_tangent = Vector2::new(1.0, 0.0);
        let d = desired_orientation(&path, &f).unwrap();
        assert_relative_eq!(d.yaw, 0.0, epsilon = 1e-15);
        assert_relative_eq!(d.pitch, 0.0, epsilon = 1e-15);

        let mut backward = helix();
        backward.strategy = -1;
        let d = desired_orientation(&backward, &f).unwrap();
        assert_relative_eq!(d.yaw, -PI, epsilon = 1e-15);
    }

    #[test]
    fn frame_rates_at_rest_are_zero() {
        let path = helix();
        let r = frame_time_derivatives(&path, &Vector3::new(0.0, 1.0, 0.0), &Vector3::zeros())
            .unwrap();
        assert_eq!(r.s_dot, (0.0, 0.0));
        assert_relative_eq!(r.tangent_dot.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn surface_rates_are_gradient_projections() {
        let path = helix();
        let r = frame_time_derivatives(
            &path,
            &Vector3::new(0.0, 1.0, 0.0),
            &Vector3::new(0.0, 0.0, 1.0),
        )
        .unwrap();
        assert_relative_eq!(r.s_dot.0, 4.0, epsilon = 1e-14);
        assert_relative_eq!(r.s_dot.1, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn frame_rates_match_trajectory_finite_differences() {
        let path = helix();
        let traj = |t: f64| Vector3::new(0.2 + 0.3 * t, 0.9 - 0.1 * t, 0.5 * t);
        let rate = Vector3::new(0.3, -0.1, 0.5);
        let h = 1e-4;
        for k in 0..10 {
            let t0 = 0.2 * k as f64;
            let p = traj(t0);
            let fp = evaluate_frame(&path, &traj(t0 + h)).unwrap();
            let fm = evaluate_frame(&path, &traj(t0 - h)).unwrap();
            let r = frame_time_derivatives(&path, &p, &rate).unwrap();
            let tangent_fd = (fp.tangent - fm.tangent) / (2.0 * h);
            let n1_fd = (fp.normals.0 - fm.normals.0) / (2.0 * h);
            assert!((r.tangent_dot - tangent_fd).norm() < 10.0 * h * h + 1e-9);
            // helix normals carry larger third derivatives along this
            // trajectory; still O(h^2)
            assert!((r.normal_dot.0 - n1_fd).norm() < 100.0 * h * h + 1e-9);
            let s1_fd = (fp.s_values.0 - fm.s_values.0) / (2.0 * h);
            assert!((r.s_dot.0 - s1_fd).abs() < 10.0 * h * h + 1e-9);
        }
    }

    #[test]
    fn analytic_derivatives_match_finite_differences() {
        let paths = [helix(), ellipse()];
        let points = [
            Vector3::new(0.3, 0.8, 0.4),
            Vector3::new(-0.5, 1.2, 2.0),
            Vector3::new(0.9, -0.3, 1.1),
        ];
        let h = 1e-5;
        for path in &paths {
            for p in &points {
                for j in 0..2 {
                    let s = path.surface(j);
                    let g = s.gradient(p);
                    for i in 0..3 {
                        let mut pp = *p;
                        let mut pm = *p;
                        pp[i] += h;
                        pm[i] -= h;
                        let fd = (s.value(&pp) - s.value(&pm)) / (2.0 * h);
                        assert_relative_eq!(g[i], fd, epsilon = 1e-6, max_relative = 1e-6);
                    }
                    let hess = s.hessian(p);
                    for i in 0..3 {
                        let mut pp = *p;
                        let mut pm = *p;
                        pp[i] += h;
                        pm[i] -= h;
                        let fd = (s.gradient(&pp) - s.gradient(&pm)) / (2.0 * h);
                        for r in 0..3 {
                            assert_relative_eq!(
                                hess[(r, i)],
                                fd[r],
                                epsilon = 1e-6,
                                max_relative = 1e-6
                            );
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn finite_difference_adapter_tracks_analytic_surface() {
        let analytic = TermSurface::new(vec![
            SurfaceTerm {
                coeff: 1.0,
                powers: [2, 0, 0],
                trig: None,
            },
            SurfaceTerm {
                coeff: 0.25,
                powers: [0, 2, 0],
                trig: None,
            },
        ]);
        let fd = FiniteDifferenceSurface {
            field: |p: &Vector3<f64>| p[0] * p[0] + 0.25 * p[1] * p[1],
            step: 1e-5,
        };
        let p = Vector3::new(0.7, -1.3, 0.2);
        assert_relative_eq!(analytic.value(&p), fd.value(&p), epsilon = 1e-12);
        assert_relative_eq!(analytic.gradient(&p), fd.gradient(&p), epsilon = 1e-6);
        assert!((analytic.hessian(&p) - fd.hessian(&p)).norm() < 1e-4);
    }

    #[test]
    fn validate_helix_grid_is_clean() {
        let path = helix();
        let samples: Vec<_> = (0..=100)
            .map(|k| helix_path_point(4.0, 5.0 * k as f64 / 100.0))
            .collect();
        let report = validate_path(&path, &samples);
        assert!(report.is_clean(), "violations: {:?}", report.violations);
        assert!(report.grad_norm_min[0] >= 1.0);
        assert!(report.cross_norm_min > 0.9);
    }

    #[test]
    fn validate_flags_vanishing_gradient() {
        // s1 = x^3 has a vanishing gradient at the origin.
        let s1 = TermSurface::new(vec![SurfaceTerm {
            coeff: 1.0,
            powers: [3, 0, 0],
            trig: None,
        }]);
        let s2 = TermSurface::new(vec![SurfaceTerm {
            coeff: 1.0,
            powers: [0, 1, 0],
            trig: None,
        }]);
        let path = PathSpec::new(Arc::new(s1), Arc::new(s2), 1, 1, 0.1).unwrap();
        let report = validate_path(&path, &[Vector3::zeros()]);
        assert!(!report.is_clean());
    }

    #[test]
    fn validate_flags_ellipse_center() {
        let path = ellipse();
        let report = validate_path(&path, &[Vector3::new(0.0, 0.0, 0.0)]);
        assert!(!report.is_clean());
    }

    #[test]
    fn on_path_samples_have_zero_surface_values() {
        let helix_path = helix();
        for k in 0..50 {
            let p = helix_path_point(4.0, 0.1 * k as f64);
            let f = evaluate_frame(&helix_path, &p).unwrap();
            assert!(f.s_values.0.abs() < 1e-12 && f.s_values.1.abs() < 1e-12);
        }
        let ellipse_path = ellipse();
        for k in 0..50 {
            let p = plane_ellipse_path_point(
                1.0,
                2.0,
                Vector3::new(1.0, 2.0, 3.0),
                1.0,
                0.12 * k as f64,
            );
            let f = evaluate_frame(&ellipse_path, &p).unwrap();
            assert!(f.s_values.0.abs() < 1e-12 && f.s_values.1.abs() < 1e-12);
        }
    }

    #[test]
    fn tangent_orthogonal_to_gradients_and_unit() {
        let paths = [helix(), ellipse()];
        let mut x = 0.123_f64;
        for path in &paths {
            for _ in 0..200 {
                // cheap deterministic scatter
                x = (x * 9301.0 + 0.2113).fract();
                let y = (x * 7919.0).fract();
                let z = (x * 104729.0).fract();
                let p = Vector3::new(2.0 * x - 1.0, 2.0 * y - 1.0 + 1.2, 3.0 * z);
                if let Ok(f) = evaluate_frame(path, &p) {
                    assert!((f.tangent.norm() - 1.0).abs() < 1e-12);
                    assert!((f.normals.0.norm() - 1.0).abs() < 1e-12);
                    assert!((f.normals.1.norm() - 1.0).abs() < 1e-12);
                    assert!(f.tangent.dot(&f.gradients.0).abs() < 1e-12 * f.gradients.0.norm());
                    assert!(f.tangent.dot(&f.gradients.1).abs() < 1e-12 * f.gradients.1.norm());
                }
            }
        }
    }
}
