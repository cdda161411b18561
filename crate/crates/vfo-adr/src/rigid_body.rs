//! Frame transforms and ground-truth plant dynamics for a 6-DoF rigid body.
//!
//! Conventions: global frame {G}, body frame {B} centered at the mass center
//! with x^B along the main thrust axis. Attitude is RPY Euler angles
//! (roll phi, pitch theta, yaw psi) with
//!
//!   eta_dot = J(eta_o) nu,   J = blkdiag(R, T),
//!   M nu_dot + mu(eta, nu) + tau* = Gamma tau.

use std::fmt;
use std::sync::Arc;

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};

use crate::errors::{Error, Result};

/// Default guard on |cos theta| before the angular velocity transform is
/// treated as singular.
pub const DEFAULT_SINGULARITY_MARGIN: f64 = 1e-6;

/// Position in {G} plus RPY attitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Configuration {
    /// (x, y, z) of the {B} origin in {G} [m].
    pub position: Vector3<f64>,
    /// (phi, theta, psi) [rad]; theta must stay inside (-pi/2, pi/2).
    pub attitude: Vector3<f64>,
}

impl Configuration {
    pub fn new(position: Vector3<f64>, attitude: Vector3<f64>) -> Result<Self> {
        let cfg = Self { position, attitude };
        cfg.check()?;
        Ok(cfg)
    }

    pub fn from_vector(eta: &Vector6<f64>) -> Result<Self> {
        Self::new(
            Vector3::new(eta[0], eta[1], eta[2]),
            Vector3::new(eta[3], eta[4], eta[5]),
        )
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.position, &self.attitude)
    }

    pub fn roll(&self) -> f64 {
        self.attitude[0]
    }

    pub fn pitch(&self) -> f64 {
        self.attitude[1]
    }

    pub fn yaw(&self) -> f64 {
        self.attitude[2]
    }

    fn check(&self) -> Result<()> {
        if !(self.position.iter().all(|v| v.is_finite())
            && self.attitude.iter().all(|v| v.is_finite()))
        {
            return Err(Error::NonFiniteState {
                context: "configuration",
            });
        }
        let theta = self.pitch();
        if theta <= -std::f64::consts::FRAC_PI_2 || theta >= std::f64::consts::FRAC_PI_2 {
            return Err(Error::Validation(format!(
                "pitch angle {theta} outside (-pi/2, pi/2)"
            )));
        }
        Ok(())
    }
}

/// Body-frame pseudovelocities: linear (u, v, w), angular (p, q, r).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pseudovelocity {
    pub linear: Vector3<f64>,
    pub angular: Vector3<f64>,
}

impl Pseudovelocity {
    pub fn zero() -> Self {
        Self {
            linear: Vector3::zeros(),
            angular: Vector3::zeros(),
        }
    }

    pub fn from_vector(nu: &Vector6<f64>) -> Result<Self> {
        if !nu.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState {
                context: "pseudovelocity",
            });
        }
        Ok(Self {
            linear: Vector3::new(nu[0], nu[1], nu[2]),
            angular: Vector3::new(nu[3], nu[4], nu[5]),
        })
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        stack(&self.linear, &self.angular)
    }
}

/// Stacks two 3-vectors into a 6-vector.
pub fn stack(top: &Vector3<f64>, bottom: &Vector3<f64>) -> Vector6<f64> {
    Vector6::new(top[0], top[1], top[2], bottom[0], bottom[1], bottom[2])
}

/// Skew-symmetric (hat) matrix: skew(a) * b = a x b.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v[2], v[1], v[2], 0.0, -v[0], -v[1], v[0], 0.0)
}

/// Rotation matrix R(eta_o) from {B} to {G}; equals Rz(psi) Ry(theta) Rx(phi).
pub fn rotation_matrix(attitude: &Vector3<f64>) -> Matrix3<f64> {
    let (sphi, cphi) = attitude[0].sin_cos();
    let (sth, cth) = attitude[1].sin_cos();
    let (spsi, cpsi) = attitude[2].sin_cos();
    Matrix3::new(
        cpsi * cth,
        cpsi * sphi * sth - cphi * spsi,
        cpsi * cphi * sth + sphi * spsi,
        spsi * cth,
        spsi * sphi * sth + cphi * cpsi,
        spsi * cphi * sth - sphi * cpsi,
        -sth,
        sphi * cth,
        cphi * cth,
    )
}

/// Angular velocity transform T(eta_o) mapping body rates (p, q, r) to Euler
/// angle rates. Singular at theta = +-pi/2.
pub fn angular_velocity_transform(attitude: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_attitude_margin(attitude, DEFAULT_SINGULARITY_MARGIN)?;
    let (sphi, cphi) = attitude[0].sin_cos();
    let (sth, cth) = attitude[1].sin_cos();
    let tth = sth / cth;
    Ok(Matrix3::new(
        1.0,
        sphi * tth,
        cphi * tth,
        0.0,
        cphi,
        -sphi,
        0.0,
        sphi / cth,
        cphi / cth,
    ))
}

/// Closed-form inverse of T(eta_o); keeps the singularity margin explicit
/// instead of relying on a generic matrix inverse.
pub fn angular_velocity_transform_inverse(attitude: &Vector3<f64>) -> Result<Matrix3<f64>> {
    check_attitude_margin(attitude, DEFAULT_SINGULARITY_MARGIN)?;
    let (sphi, cphi) = attitude[0].sin_cos();
    let (sth, cth) = attitude[1].sin_cos();
    Ok(Matrix3::new(
        1.0,
        0.0,
        -sth,
        0.0,
        cphi,
        sphi * cth,
        0.0,
        -sphi,
        cphi * cth,
    ))
}

fn check_attitude_margin(attitude: &Vector3<f64>, margin: f64) -> Result<()> {
    if !attitude.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState {
            context: "attitude",
        });
    }
    let cth = attitude[1].cos().abs();
    if cth < margin {
        return Err(Error::SingularAttitude {
            cos_theta_abs: cth,
            margin,
        });
    }
    Ok(())
}

/// J(eta_o) = blkdiag(R, T).
pub fn jacobian(attitude: &Vector3<f64>) -> Result<Matrix6<f64>> {
    Ok(block_diag(
        &rotation_matrix(attitude),
        &angular_velocity_transform(attitude)?,
    ))
}

/// J^{-1}(eta_o) = blkdiag(R^T, T^{-1}).
pub fn jacobian_inverse(attitude: &Vector3<f64>) -> Result<Matrix6<f64>> {
    Ok(block_diag(
        &rotation_matrix(attitude).transpose(),
        &angular_velocity_transform_inverse(attitude)?,
    ))
}

/// Time derivative of J along a trajectory with body rates nu_o.
///
/// Uses R_dot = R skew(nu_o) and the analytic partials of T with respect to
/// (phi, theta). Needed only by simulator diagnostics, never by the
/// controller.
pub fn jacobian_rate(attitude: &Vector3<f64>, body_angular: &Vector3<f64>) -> Result<Matrix6<f64>> {
    let r = rotation_matrix(attitude);
    let t = angular_velocity_transform(attitude)?;
    let r_dot = r * skew(body_angular);

    let euler_rates = t * body_angular;
    let (phi_dot, theta_dot) = (euler_rates[0], euler_rates[1]);

    let (sphi, cphi) = attitude[0].sin_cos();
    let (sth, cth) = attitude[1].sin_cos();
    let tth = sth / cth;
    let sec2 = 1.0 / (cth * cth);

    let dt_dphi = Matrix3::new(
        0.0,
        cphi * tth,
        -sphi * tth,
        0.0,
        -sphi,
        -cphi,
        0.0,
        cphi / cth,
        -sphi / cth,
    );
    let dt_dtheta = Matrix3::new(
        0.0,
        sphi * sec2,
        cphi * sec2,
        0.0,
        0.0,
        0.0,
        0.0,
        sphi * sth * sec2,
        cphi * sth * sec2,
    );
    let t_dot = dt_dphi * phi_dot + dt_dtheta * theta_dot;

    Ok(block_diag(&r_dot, &t_dot))
}

fn block_diag(top: &Matrix3<f64>, bottom: &Matrix3<f64>) -> Matrix6<f64> {
    let mut out = Matrix6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(top);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(bottom);
    out
}

/// External disturbance tau*_eta(t) expressed in {G}.
#[derive(Clone)]
pub enum DisturbanceSignal {
    Zero,
    /// Per-axis a_i sin(w_i t + p_i).
    Sinusoid {
        amplitude: Vector6<f64>,
        angular_frequency: Vector6<f64>,
        phase: Vector6<f64>,
    },
    Custom(Arc<dyn Fn(f64) -> Vector6<f64> + Send + Sync>),
}

impl DisturbanceSignal {
    pub fn evaluate(&self, t: f64) -> Vector6<f64> {
        match self {
            Self::Zero => Vector6::zeros(),
            Self::Sinusoid {
                amplitude,
                angular_frequency,
                phase,
            } => Vector6::from_fn(|i, _| {
                amplitude[i] * (angular_frequency[i] * t + phase[i]).sin()
            }),
            Self::Custom(f) => f(t),
        }
    }
}

impl fmt::Debug for DisturbanceSignal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Zero => write!(f, "DisturbanceSignal::Zero"),
            Self::Sinusoid { amplitude, .. } => {
                write!(f, "DisturbanceSignal::Sinusoid(|a| = {:.3})", amplitude.norm())
            }
            Self::Custom(_) => write!(f, "DisturbanceSignal::Custom"),
        }
    }
}

type RestoringFn = dyn Fn(&Configuration, &Pseudovelocity) -> Vector6<f64> + Send + Sync;

/// Ground-truth plant: inertia M, diagonal linear damping Delta, diagonal
/// 0/1 actuation Gamma, force aggregate mu(eta, nu), and an external
/// disturbance generator.
#[derive(Clone)]
pub struct VehiclePlant {
    inertia: Matrix6<f64>,
    inertia_inv: Matrix6<f64>,
    damping: Vector6<f64>,
    actuation: Vector6<f64>,
    rigid_body_coriolis: bool,
    restoring: Option<Arc<RestoringFn>>,
    disturbance: DisturbanceSignal,
}

impl fmt::Debug for VehiclePlant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("VehiclePlant")
            .field("inertia", &self.inertia)
            .field("damping", &self.damping)
            .field("actuation", &self.actuation)
            .field("rigid_body_coriolis", &self.rigid_body_coriolis)
            .field("restoring", &self.restoring.is_some())
            .field("disturbance", &self.disturbance)
            .finish()
    }
}

impl VehiclePlant {
    /// Validates M symmetric positive definite, Delta > 0 diagonal, and the
    /// actuation pattern diag{1, gv, gw, 1, 1, 1} with gv, gw in {0, 1}.
    pub fn new(
        inertia: Matrix6<f64>,
        damping_diag: Vector6<f64>,
        actuation_diag: Vector6<f64>,
    ) -> Result<Self> {
        let sym_err = (inertia - inertia.transpose()).norm();
        if sym_err > 1e-9 * inertia.norm().max(1.0) {
            return Err(Error::Validation(format!(
                "inertia matrix not symmetric (asymmetry {sym_err:.3e})"
            )));
        }
        let chol = inertia
            .cholesky()
            .ok_or_else(|| Error::Validation("inertia matrix not positive definite".into()))?;
        let inertia_inv = chol.inverse();

        if damping_diag.iter().any(|&d| d <= 0.0) {
            return Err(Error::Validation(
                "linear damping must have strictly positive diagonal".into(),
            ));
        }
        for (i, &g) in actuation_diag.iter().enumerate() {
            if g != 0.0 && g != 1.0 {
                return Err(Error::Validation(format!(
                    "actuation entry {i} must be 0 or 1, got {g}"
                )));
            }
            // Surge, roll, pitch and yaw actuation is structural.
            if matches!(i, 0 | 3 | 4 | 5) && g != 1.0 {
                return Err(Error::Validation(format!(
                    "actuation entry {i} must be 1 (surge/roll/pitch/yaw are actuated)"
                )));
            }
        }

        Ok(Self {
            inertia,
            inertia_inv,
            damping: damping_diag,
            actuation: actuation_diag,
            rigid_body_coriolis: true,
            restoring: None,
            disturbance: DisturbanceSignal::Zero,
        })
    }

    /// Disables the rigid-body Coriolis/centripetal term, leaving a pure
    /// linear-damping plant.
    pub fn with_rigid_body_coriolis(mut self, enabled: bool) -> Self {
        self.rigid_body_coriolis = enabled;
        self
    }

    pub fn with_restoring(
        mut self,
        f: Arc<dyn Fn(&Configuration, &Pseudovelocity) -> Vector6<f64> + Send + Sync>,
    ) -> Self {
        self.restoring = Some(f);
        self
    }

    pub fn with_disturbance(mut self, disturbance: DisturbanceSignal) -> Self {
        self.disturbance = disturbance;
        self
    }

    pub fn inertia(&self) -> &Matrix6<f64> {
        &self.inertia
    }

    pub fn inertia_inverse(&self) -> &Matrix6<f64> {
        &self.inertia_inv
    }

    pub fn damping_diag(&self) -> &Vector6<f64> {
        &self.damping
    }

    pub fn actuation_diag(&self) -> &Vector6<f64> {
        &self.actuation
    }

    pub fn external_disturbance(&self, t: f64) -> Vector6<f64> {
        self.disturbance.evaluate(t)
    }

    /// Rigid-body Coriolis/centripetal matrix derived from M:
    ///
    /// C(nu) = [ 0                 -skew(M11 v1 + M12 v2) ]
    ///         [ -skew(M11 v1 + M12 v2)  -skew(M21 v1 + M22 v2) ]
    pub fn coriolis_matrix(&self, nu: &Pseudovelocity) -> Matrix6<f64> {
        let m11 = self.inertia.fixed_view::<3, 3>(0, 0);
        let m12 = self.inertia.fixed_view::<3, 3>(0, 3);
        let m21 = self.inertia.fixed_view::<3, 3>(3, 0);
        let m22 = self.inertia.fixed_view::<3, 3>(3, 3);
        let a = m11 * nu.linear + m12 * nu.angular;
        let b = m21 * nu.linear + m22 * nu.angular;
        let mut c = Matrix6::zeros();
        c.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-skew(&a)));
        c.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(&a)));
        c.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-skew(&b)));
        c
    }

    /// mu(eta, nu): damping plus optional Coriolis and restoring terms.
    pub fn mu(&self, eta: &Configuration, nu: &Pseudovelocity) -> Vector6<f64> {
        let nu_vec = nu.to_vector();
        let mut mu = self.damping.component_mul(&nu_vec);
        if self.rigid_body_coriolis {
            mu += self.coriolis_matrix(nu) * nu_vec;
        }
        if let Some(ref g) = self.restoring {
            mu += g(eta, nu);
        }
        mu
    }
}

/// State-space right-hand side of the rigid body:
///
///   eta_dot = J(eta_o) nu
///   nu_dot  = -M^{-1} [mu(eta, nu) + J^T tau*_eta(t)] + M^{-1} Gamma tau
///
/// Pure; does not mutate the plant.
pub fn plant_derivative(
    plant: &VehiclePlant,
    eta: &Configuration,
    nu: &Pseudovelocity,
    tau: &Vector6<f64>,
    t: f64,
) -> Result<(Vector6<f64>, Vector6<f64>)> {
    if !tau.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState { context: "tau" });
    }
    let nu_vec = nu.to_vector();
    if !nu_vec.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteState { context: "nu" });
    }
    let j = jacobian(&eta.attitude)?;
    let eta_dot = j * nu_vec;

    let tau_star = j.transpose() * plant.external_disturbance(t);
    let applied = plant.actuation_diag().component_mul(tau);
    let nu_dot = plant.inertia_inverse() * (applied - plant.mu(eta, nu) - tau_star);
    Ok((eta_dot, nu_dot))
}
