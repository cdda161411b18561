//! Outer-loop kinematic controller.
//!
//! Builds the modified convergence vector field from the path frame and the
//! ESO velocity-error estimates, orients the vehicle through the auxiliary
//! angles (theta_a, psi_a), and emits commanded pseudovelocities for the
//! torpedo-like strategy (v_c = w_c = 0). Consumes only the configuration,
//! ESO outputs and path geometry; plant velocities never enter here.

use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::errors::{Error, Result};
use crate::path_geometry::{PathFrame, PathRates};

/// Default indeterminacy threshold on h_x^2 + h_y^2 below which the
/// auxiliary orientation is frozen at its previous value.
pub const DEFAULT_FREEZE_EPSILON: f64 = 1e-6;

/// Gains of the kinematic controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VfoGains {
    /// Position gain k_p > 0 of the convergence field feedback.
    pub k_p: f64,
    /// Pitch gain of K_a.
    pub k_theta: f64,
    /// Yaw gain of K_a.
    pub k_psi: f64,
    /// Roll stabilizer gain.
    pub k_phi: f64,
    /// Longitudinal cautious-compensation coefficient, in [0, 1).
    pub delta_p: f64,
    /// Angular cautious-compensation coefficient, in [0, 1].
    pub delta_o: f64,
}

impl VfoGains {
    pub fn validated(self) -> Result<Self> {
        if !(self.k_p > 0.0 && self.k_theta > 0.0 && self.k_psi > 0.0 && self.k_phi > 0.0) {
            return Err(Error::Validation(
                "VFO gains k_p, k_theta, k_psi, k_phi must be positive".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.delta_p) {
            return Err(Error::Validation("delta_p must lie in [0, 1)".into()));
        }
        if !(0.0..=1.0).contains(&self.delta_o) {
            return Err(Error::Validation("delta_o must lie in [0, 1]".into()));
        }
        Ok(self)
    }
}

/// Commanded pseudovelocities. Sway and heave commands are structurally zero.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommandedVelocity {
    pub u_c: f64,
    pub p_c: f64,
    pub q_c: f64,
    pub r_c: f64,
}

impl CommandedVelocity {
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.u_c, 0.0, 0.0, self.p_c, self.q_c, self.r_c)
    }

    pub fn max_abs(&self) -> f64 {
        self.u_c
            .abs()
            .max(self.p_c.abs())
            .max(self.q_c.abs())
            .max(self.r_c.abs())
    }
}

/// Wraps an angle to [-pi, pi).
pub fn wrap_half_open(a: f64) -> f64 {
    let mut w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        w -= 2.0 * PI;
    }
    w
}

/// Continuous four-quadrant arctangent: standard atan2 plus the 2*pi*k branch
/// that minimizes the jump from the previous evaluation.
#[derive(Debug, Clone, Default)]
pub struct ContinuousAtan2 {
    last: Option<f64>,
}

impl ContinuousAtan2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn evaluate(&mut self, y: f64, x: f64) -> f64 {
        let raw = y.atan2(x);
        let out = match self.last {
            Some(prev) => raw + 2.0 * PI * ((prev - raw) / (2.0 * PI)).round(),
            None => raw,
        };
        self.last = Some(out);
        out
    }

    pub fn last(&self) -> Option<f64> {
        self.last
    }
}

/// Auxiliary angles and their rates, as produced per control sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryAngles {
    pub theta_a: f64,
    pub psi_a: f64,
    pub theta_a_rate: f64,
    pub psi_a_rate: f64,
}

/// Mutable controller state: the yaw unwrapping accumulator and the last
/// well-determined auxiliary angles/rates used while the field is frozen.
#[derive(Debug, Clone)]
pub struct AuxiliaryState {
    atan2c: ContinuousAtan2,
    pub freeze_epsilon: f64,
    last: Option<AuxiliaryAngles>,
}

impl Default for AuxiliaryState {
    fn default() -> Self {
        Self::new(DEFAULT_FREEZE_EPSILON)
    }
}

impl AuxiliaryState {
    pub fn new(freeze_epsilon: f64) -> Self {
        Self {
            atan2c: ContinuousAtan2::new(),
            freeze_epsilon,
            last: None,
        }
    }

    pub fn last(&self) -> Option<&AuxiliaryAngles> {
        self.last.as_ref()
    }

    /// Joint angle-and-rate evaluation with the indeterminacy freeze: below
    /// threshold both the angles and the rates are held at their previous
    /// values and the accumulator is left untouched.
    pub fn evaluate(
        &mut self,
        h_star_p: &Vector3<f64>,
        h_star_p_rate: &Vector3<f64>,
        strategy: i8,
    ) -> Result<AuxiliaryAngles> {
        let mag_sq = h_star_p[0] * h_star_p[0] + h_star_p[1] * h_star_p[1];
        if mag_sq < self.freeze_epsilon {
            return self
                .last
                .ok_or(Error::NoPriorState { magnitude_sq: mag_sq });
        }
        let (theta_a, psi_a) = live_orientation(h_star_p, strategy, &mut self.atan2c);
        let (theta_a_rate, psi_a_rate) =
            auxiliary_orientation_derivative(h_star_p, h_star_p_rate, psi_a, self.freeze_epsilon)?;
        let angles = AuxiliaryAngles {
            theta_a,
            psi_a,
            theta_a_rate,
            psi_a_rate,
        };
        self.last = Some(angles);
        Ok(angles)
    }
}

fn live_orientation(
    h_star_p: &Vector3<f64>,
    strategy: i8,
    atan2c: &mut ContinuousAtan2,
) -> (f64, f64) {
    let xi = strategy as f64;
    let psi_a = atan2c.evaluate(xi * h_star_p[1], xi * h_star_p[0]);
    let denom = h_star_p[0] * psi_a.cos() + h_star_p[1] * psi_a.sin();
    let theta_a = (-h_star_p[2] / denom).atan();
    (theta_a, psi_a)
}

/// Longitudinal modified convergence field:
///
///   h_p      = u_d tangent + k_p (s1 n1 + s2 n2)
///   h_p_star = h_p + delta_p eps_p_hat
pub fn convergence_field_longitudinal(
    frame: &PathFrame,
    gains: &VfoGains,
    u_d: f64,
    eps_p_hat: &Vector3<f64>,
) -> Vector3<f64> {
    frame.tangent * u_d
        + (frame.normals.0 * frame.s_values.0 + frame.normals.1 * frame.s_values.1) * gains.k_p
        + eps_p_hat * gains.delta_p
}

/// Auxiliary orientation of the longitudinal field. Updates the accumulator
/// in `state`; below the freeze threshold returns the previous angles
/// unchanged (error if none exist yet).
pub fn auxiliary_orientation(
    h_star_p: &Vector3<f64>,
    strategy: i8,
    state: &mut AuxiliaryState,
) -> Result<(f64, f64)> {
    let mag_sq = h_star_p[0] * h_star_p[0] + h_star_p[1] * h_star_p[1];
    if mag_sq < state.freeze_epsilon {
        return state
            .last
            .map(|a| (a.theta_a, a.psi_a))
            .ok_or(Error::NoPriorState { magnitude_sq: mag_sq });
    }
    let (theta_a, psi_a) = live_orientation(h_star_p, strategy, &mut state.atan2c);
    let prev = state.last;
    state.last = Some(AuxiliaryAngles {
        theta_a,
        psi_a,
        theta_a_rate: prev.map_or(0.0, |a| a.theta_a_rate),
        psi_a_rate: prev.map_or(0.0, |a| a.psi_a_rate),
    });
    Ok((theta_a, psi_a))
}

/// Analytic rates of the auxiliary angles:
///
///   psi_a_dot   = (hy_dot hx - hx_dot hy) / (hx^2 + hy^2)
///   theta_a_dot = -beta2 / beta3
pub fn auxiliary_orientation_derivative(
    h_star_p: &Vector3<f64>,
    h_star_p_rate: &Vector3<f64>,
    psi_a: f64,
    freeze_epsilon: f64,
) -> Result<(f64, f64)> {
    let (hx, hy, hz) = (h_star_p[0], h_star_p[1], h_star_p[2]);
    let (hx_dot, hy_dot, hz_dot) = (h_star_p_rate[0], h_star_p_rate[1], h_star_p_rate[2]);
    let mag_sq = hx * hx + hy * hy;
    if mag_sq < freeze_epsilon {
        return Err(Error::FrozenState {
            magnitude_sq: mag_sq,
            threshold: freeze_epsilon,
        });
    }
    let psi_a_rate = (hy_dot * hx - hx_dot * hy) / mag_sq;

    let (spsi, cpsi) = psi_a.sin_cos();
    let planar = hx * cpsi + hy * spsi;
    let beta2 = hz_dot * planar
        - hz * (hx_dot * cpsi + hy_dot * spsi - hx * psi_a_rate * spsi + hy * psi_a_rate * cpsi);
    let beta3 = hz * hz + planar * planar;
    Ok((-beta2 / beta3, psi_a_rate))
}

/// Rate of the longitudinal modified convergence field, assembled from the
/// path-frame derivatives (evaluated by the caller at the chosen position
/// rate) plus the cautious-compensation rate:
///
///   h_p_star_dot = u_d tangent_dot
///                + s1_dot n1 + s1 n1_dot + s2_dot n2 + s2 n2_dot
///                + delta_p eps_p_hat_dot
pub fn longitudinal_field_rate(
    frame: &PathFrame,
    rates: &PathRates,
    u_d: f64,
    delta_p: f64,
    eps_p_hat_rate: &Vector3<f64>,
) -> Vector3<f64> {
    rates.tangent_dot * u_d
        + frame.normals.0 * rates.s_dot.0
        + rates.normal_dot.0 * frame.s_values.0
        + frame.normals.1 * rates.s_dot.1
        + rates.normal_dot.1 * frame.s_values.1
        + eps_p_hat_rate * delta_p
}

/// Auxiliary orientation error: pitch component wrapped to [-pi, pi), yaw
/// component kept on the accumulator.
pub fn auxiliary_error(theta_a: f64, psi_a: f64, attitude: &Vector3<f64>) -> Vector2<f64> {
    Vector2::new(wrap_half_open(theta_a - attitude[1]), psi_a - attitude[2])
}

/// Angular modified convergence field:
///
///   h_o_star = (theta_a_dot, psi_a_dot) + K_a e_a + delta_o eps_o_hat
#[allow(clippy::too_many_arguments)]
pub fn convergence_field_angular(
    theta_a: f64,
    psi_a: f64,
    theta_a_rate: f64,
    psi_a_rate: f64,
    attitude: &Vector3<f64>,
    gains: &VfoGains,
    eps_o_hat_reduced: &Vector2<f64>,
) -> Vector2<f64> {
    let e_a = auxiliary_error(theta_a, psi_a, attitude);
    Vector2::new(
        theta_a_rate + gains.k_theta * e_a[0] + gains.delta_o * eps_o_hat_reduced[0],
        psi_a_rate + gains.k_psi * e_a[1] + gains.delta_o * eps_o_hat_reduced[1],
    )
}

/// Projects the modified convergence field onto the commanded velocities:
///
///   u_c = hx c(theta) c(psi) + hy c(theta) s(psi) - hz s(theta)
///   q_c = h_theta
///   r_c = h_psi c(theta)
///
/// The roll command is filled in separately by `roll_stabilizer`.
pub fn commanded_velocities(
    h_star_p: &Vector3<f64>,
    h_star_o: &Vector2<f64>,
    attitude: &Vector3<f64>,
) -> CommandedVelocity {
    let (sth, cth) = attitude[1].sin_cos();
    let (spsi, cpsi) = attitude[2].sin_cos();
    CommandedVelocity {
        u_c: h_star_p[0] * cth * cpsi + h_star_p[1] * cth * spsi - h_star_p[2] * sth,
        p_c: 0.0,
        q_c: h_star_o[0],
        r_c: h_star_o[1] * cth,
    }
}

/// Surge projection only; lets the derivative pipeline obtain the commanded
/// position rate before the angular commands exist.
pub fn commanded_surge(h_star_p: &Vector3<f64>, attitude: &Vector3<f64>) -> f64 {
    let (sth, cth) = attitude[1].sin_cos();
    let (spsi, cpsi) = attitude[2].sin_cos();
    h_star_p[0] * cth * cpsi + h_star_p[1] * cth * spsi - h_star_p[2] * sth
}

/// Roll stabilizer with the default proportional feedback f_phi = -k_phi phi:
///
///   p_c = f_phi - s(phi) t(theta) q_c - c(phi) t(theta) r_c
pub fn roll_stabilizer(attitude: &Vector3<f64>, q_c: f64, r_c: f64, gains: &VfoGains) -> f64 {
    roll_stabilizer_with(attitude, q_c, r_c, -gains.k_phi * attitude[0])
}

/// Roll stabilizer with a caller-supplied feedback value f_phi, so any law
/// meeting the finite-time convergence requirement can be swapped in.
pub fn roll_stabilizer_with(attitude: &Vector3<f64>, q_c: f64, r_c: f64, f_phi: f64) -> f64 {
    let (sphi, cphi) = attitude[0].sin_cos();
    let tth = attitude[1].tan();
    f_phi - sphi * tth * q_c - cphi * tth * r_c
}

/// Static magnitude/rate limits on the commanded pseudovelocities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VelocityLimits {
    /// Per-component magnitude cap [m/s or rad/s].
    pub magnitude: f64,
    /// Per-component rate cap [m/s^2 or rad/s^2].
    pub rate: f64,
}

impl VelocityLimits {
    pub fn validated(self) -> Result<Self> {
        if !(self.magnitude > 0.0 && self.rate > 0.0) {
            return Err(Error::Validation(
                "velocity limits must be strictly positive".into(),
            ));
        }
        Ok(self)
    }
}

/// Two-stage command scaling: a single common factor <= 1 brings every
/// component within its magnitude limit (preserving the direction of the
/// commanded vector), then each component is rate-limited against the
/// previous output.
pub fn scale_commanded_velocities(
    nu_c: &CommandedVelocity,
    previous: &CommandedVelocity,
    dt: f64,
    limits: &VelocityLimits,
) -> CommandedVelocity {
    let worst = nu_c.max_abs();
    let factor = if worst > limits.magnitude {
        limits.magnitude / worst
    } else {
        1.0
    };
    let max_step = limits.rate * dt;
    let rate_limit = |new: f64, prev: f64| prev + (new - prev).clamp(-max_step, max_step);
    CommandedVelocity {
        u_c: rate_limit(nu_c.u_c * factor, previous.u_c),
        p_c: rate_limit(nu_c.p_c * factor, previous.p_c),
        q_c: rate_limit(nu_c.q_c * factor, previous.q_c),
        r_c: rate_limit(nu_c.r_c * factor, previous.r_c),
    }
}

/// Scalar variant of `scale_commanded_velocities` for the roll command,
/// which is computed after the other components have been scaled.
pub fn scale_scalar_command(new: f64, previous: f64, dt: f64, limits: &VelocityLimits) -> f64 {
    let clamped = new.clamp(-limits.magnitude, limits.magnitude);
    let max_step = limits.rate * dt;
    previous + (clamped - previous).clamp(-max_step, max_step)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path_geometry::{evaluate_frame, PathSpec};
    use approx::assert_relative_eq;

    fn gains() -> VfoGains {
        VfoGains {
            k_p: 2.0,
            k_theta: 4.0,
            k_psi: 4.0,
            k_phi: 5.0,
            delta_p: 0.75,
            delta_o: 1.0,
        }
    }

    fn helix_frame() -> crate::path_geometry::PathFrame {
        let path = PathSpec::helix(4.0, 1, 0.1).unwrap();
        evaluate_frame(&path, &Vector3::new(0.0, 1.0, 0.0)).unwrap()
    }

    #[test]
    fn gains_validation() {
        assert!(gains().validated().is_ok());
        let mut g = gains();
        g.delta_p = 1.0;
        assert!(g.validated().is_err());
        let mut g = gains();
        g.k_p = 0.0;
        assert!(g.validated().is_err());
        let mut g = gains();
        g.delta_o = 1.2;
        assert!(g.validated().is_err());
    }

    #[test]
    fn on_path_field_is_pure_feedforward() {
        let frame = helix_frame();
        let h = convergence_field_longitudinal(&frame, &gains(), 0.1, &Vector3::zeros());
        let s17 = 17.0_f64.sqrt();
        assert_relative_eq!(h, Vector3::new(0.4, 0.0, 0.1) / s17, epsilon = 1e-14);
        assert_relative_eq!(h[0], 0.0970, epsilon = 1e-4);
        assert_relative_eq!(h[2], 0.0243, epsilon = 1e-4);
    }

    #[test]
    fn delta_p_zero_ignores_velocity_error_estimate() {
        let frame = helix_frame();
        let mut g = gains();
        g.delta_p = 0.0;
        let h0 = convergence_field_longitudinal(&frame, &g, 0.1, &Vector3::zeros());
        let h1 = convergence_field_longitudinal(&frame, &g, 0.1, &Vector3::new(5.0, -3.0, 2.0));
        assert_relative_eq!(h0, h1, epsilon = 1e-15);
    }

    #[test]
    fn auxiliary_orientation_along_x() {
        let mut state = AuxiliaryState::default();
        let (theta_a, psi_a) =
            auxiliary_orientation(&Vector3::new(1.0, 0.0, 0.0), 1, &mut state).unwrap();
        assert_relative_eq!(theta_a, 0.0, epsilon = 1e-15);
        assert_relative_eq!(psi_a, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn auxiliary_orientation_matches_desired_on_path() {
        // On the path with eps_hat = 0 the auxiliary orientation equals the
        // desired orientation.
        let path = PathSpec::helix(4.0, 1, 0.1).unwrap();
        let frame = helix_frame();
        let h = convergence_field_longitudinal(&frame, &gains(), 0.1, &Vector3::zeros());
        let mut state = AuxiliaryState::default();
        let (theta_a, psi_a) = auxiliary_orientation(&h, 1, &mut state).unwrap();
        let d = crate::path_geometry::desired_orientation(&path, &frame).unwrap();
        assert_relative_eq!(theta_a, d.pitch, epsilon = 1e-12);
        assert_relative_eq!(psi_a, d.yaw, epsilon = 1e-12);
        assert_relative_eq!(theta_a, (-0.25_f64).atan(), epsilon = 1e-12);
    }

    #[test]
    fn atan2c_is_continuous_across_branch_cut() {
        let mut state = AuxiliaryState::default();
        let (_, psi1) = auxiliary_orientation(&Vector3::new(-1.0, 0.1, 0.0), 1, &mut state).unwrap();
        let (_, psi2) = auxiliary_orientation(&Vector3::new(-1.0, -0.1, 0.0), 1, &mut state).unwrap();
        assert!((psi2 - psi1).abs() < PI, "jumped from {psi1} to {psi2}");
        assert_relative_eq!(psi1, PI - (0.1_f64).atan2(1.0), epsilon = 1e-12);
        assert_relative_eq!(psi2, PI + (0.1_f64).atan2(1.0), epsilon = 1e-12);
    }

    #[test]
    fn freeze_returns_previous_values() {
        let mut state = AuxiliaryState::default();
        let live = state
            .evaluate(&Vector3::new(0.5, 0.2, -0.1), &Vector3::new(0.1, 0.0, 0.0), 1)
            .unwrap();
        let frozen = state
            .evaluate(&Vector3::new(1e-5, 0.0, 0.3), &Vector3::new(9.9, 9.9, 9.9), 1)
            .unwrap();
        assert_eq!(live, frozen);
    }

    #[test]
    fn freeze_without_prior_state_errors() {
        let mut state = AuxiliaryState::default();
        match state.evaluate(&Vector3::new(1e-5, 0.0, 0.0), &Vector3::zeros(), 1) {
            Err(Error::NoPriorState { .. }) => {}
            other => panic!("expected NoPriorState, got {other:?}"),
        }
    }

    #[test]
    fn derivative_formula_simple_cases() {
        let (theta_rate, psi_rate) = auxiliary_orientation_derivative(
            &Vector3::new(1.0, 0.0, 0.0),
            &Vector3::new(0.0, 1.0, 0.0),
            0.0,
            DEFAULT_FREEZE_EPSILON,
        )
        .unwrap();
        assert_relative_eq!(psi_rate, 1.0, epsilon = 1e-15);
        assert_relative_eq!(theta_rate, 0.0, epsilon = 1e-15);

        let (theta_rate, psi_rate) = auxiliary_orientation_derivative(
            &Vector3::new(0.4, -0.2, 0.3),
            &Vector3::zeros(),
            (-0.2_f64).atan2(0.4),
            DEFAULT_FREEZE_EPSILON,
        )
        .unwrap();
        assert_relative_eq!(psi_rate, 0.0, epsilon = 1e-15);
        assert_relative_eq!(theta_rate, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn derivative_matches_finite_differences_along_trajectory() {
        // Smooth synthetic field h(t); compare the analytic rates with
        // centered differences of the live angles.
        let h = |t: f64| {
            Vector3::new(
                1.0 + 0.3 * (0.9 * t).sin(),
                0.5 * (1.3 * t).cos(),
                0.4 * (0.7 * t).sin(),
            )
        };
        let h_dot = |t: f64| {
            Vector3::new(
                0.27 * (0.9 * t).cos(),
                -0.65 * (1.3 * t).sin(),
                0.28 * (0.7 * t).cos(),
            )
        };
        let angles = |t: f64| {
            let v = h(t);
            let psi = v[1].atan2(v[0]);
            let theta = (-v[2] / (v[0] * psi.cos() + v[1] * psi.sin())).atan();
            (theta, psi)
        };
        let dt = 1e-4;
        for k in 0..20 {
            let t0 = 0.3 * k as f64;
            let (theta0, psi0) = angles(t0);
            let (theta_p, psi_p) = angles(t0 + dt);
            let (theta_m, psi_m) = angles(t0 - dt);
            let (theta_rate, psi_rate) =
                auxiliary_orientation_derivative(&h(t0), &h_dot(t0), psi0, 1e-9).unwrap();
            assert_relative_eq!(psi_rate, (psi_p - psi_m) / (2.0 * dt), epsilon = 1e-5);
            assert_relative_eq!(theta_rate, (theta_p - theta_m) / (2.0 * dt), epsilon = 1e-5);
        }
    }

    #[test]
    fn angular_field_arithmetic() {
        let g = gains();
        // e_a = (0.1, -0.2) with zero rates and zero compensation.
        let attitude = Vector3::new(0.0, -0.1, 0.2);
        let h_o = convergence_field_angular(0.0, 0.0, 0.0, 0.0, &attitude, &g, &Vector2::zeros());
        assert_relative_eq!(h_o, Vector2::new(0.4, -0.8), epsilon = 1e-14);

        // Pure compensation with delta_o = 1.
        let h_o = convergence_field_angular(
            0.0,
            0.0,
            0.0,
            0.0,
            &Vector3::zeros(),
            &g,
            &Vector2::new(0.05, 0.05),
        );
        assert_relative_eq!(h_o, Vector2::new(0.05, 0.05), epsilon = 1e-15);

        // Zero error, zero rates, zero compensation.
        let h_o = convergence_field_angular(
            -0.1,
            0.2,
            0.0,
            0.0,
            &Vector3::new(0.0, -0.1, 0.2),
            &g,
            &Vector2::zeros(),
        );
        assert_relative_eq!(h_o.norm(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn commanded_velocity_projection() {
        let nu = commanded_velocities(
            &Vector3::new(1.0, 2.0, 3.0),
            &Vector2::new(0.1, 0.2),
            &Vector3::zeros(),
        );
        assert_relative_eq!(nu.u_c, 1.0, epsilon = 1e-15);
        assert_relative_eq!(nu.q_c, 0.1, epsilon = 1e-15);
        assert_relative_eq!(nu.r_c, 0.2, epsilon = 1e-15);

        let nu = commanded_velocities(
            &Vector3::new(1.0, 0.0, -1.0),
            &Vector2::zeros(),
            &Vector3::new(0.0, std::f64::consts::FRAC_PI_4, 0.0),
        );
        assert_relative_eq!(nu.u_c, 2.0_f64.sqrt(), epsilon = 1e-14);

        let nu = commanded_velocities(
            &Vector3::zeros(),
            &Vector2::new(0.0, 2.0),
            &Vector3::new(0.0, std::f64::consts::FRAC_PI_3, 0.0),
        );
        assert_relative_eq!(nu.r_c, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn roll_stabilizer_cases() {
        let g = gains();
        assert_relative_eq!(
            roll_stabilizer(&Vector3::zeros(), 3.0, -2.0, &g),
            0.0,
            epsilon = 1e-15
        );
        let p_c = roll_stabilizer(
            &Vector3::new(0.0, std::f64::consts::FRAC_PI_4, 0.0),
            0.0,
            1.0,
            &g,
        );
        assert_relative_eq!(p_c, -1.0, epsilon = 1e-14);
        let p_c = roll_stabilizer(&Vector3::new(0.1, 0.0, 0.0), 0.0, 0.0, &g);
        assert_relative_eq!(p_c, -0.5, epsilon = 1e-15);
    }

    #[test]
    fn scaling_within_limits_is_identity() {
        let limits = VelocityLimits {
            magnitude: 8.0,
            rate: 2.0,
        };
        let nu = CommandedVelocity {
            u_c: 0.5,
            p_c: -0.1,
            q_c: 0.2,
            r_c: 0.3,
        };
        let out = scale_commanded_velocities(&nu, &nu, 0.001, &limits);
        assert_eq!(out, nu);
        // Zero is preserved.
        let zero = CommandedVelocity::default();
        assert_eq!(scale_commanded_velocities(&zero, &zero, 0.001, &limits), zero);
    }

    #[test]
    fn magnitude_stage_uses_common_factor() {
        let limits = VelocityLimits {
            magnitude: 8.0,
            rate: 1e9, // rate stage inactive
        };
        let nu = CommandedVelocity {
            u_c: 16.0,
            p_c: 0.0,
            q_c: 4.0,
            r_c: 0.0,
        };
        let out = scale_commanded_velocities(&nu, &CommandedVelocity::default(), 0.001, &limits);
        assert_relative_eq!(out.u_c, 8.0, epsilon = 1e-12);
        assert_relative_eq!(out.q_c, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn rate_stage_limits_step() {
        let limits = VelocityLimits {
            magnitude: 8.0,
            rate: 2.0,
        };
        let nu = CommandedVelocity {
            u_c: 8.0,
            ..Default::default()
        };
        let out = scale_commanded_velocities(&nu, &CommandedVelocity::default(), 0.001, &limits);
        assert_relative_eq!(out.u_c, 0.002, epsilon = 1e-15);
    }

    #[test]
    fn wrap_half_open_range() {
        assert_relative_eq!(wrap_half_open(PI), -PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_half_open(-PI), -PI, epsilon = 1e-15);
        assert_relative_eq!(wrap_half_open(3.0 * PI + 0.1), -PI + 0.1, epsilon = 1e-12);
        assert_relative_eq!(wrap_half_open(0.3), 0.3, epsilon = 1e-15);
    }
}
