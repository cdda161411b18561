//! Inner-loop ADR controller.
//!
//! Six third-order error-domain extended state observers (one per DoF,
//! driven by eta_c - eta and the applied generalized force), the
//! bandwidth-parameterized gain rule l_i = (3 w, 3 w^2, w^3), the commanded
//! configuration integrator rate, and the disturbance-cancelling force law
//!
//!   tau_eta = J^{-T} B_hat^{-1} J^{-1} [d_hat + J K J^{-1} eps_hat].

use nalgebra::{Matrix3, Matrix6, SVector, Vector3, Vector6};

use crate::errors::{Error, Result};
use crate::rigid_body::{jacobian, jacobian_inverse};

/// Flattened observer state dimension: 6 DoF x 3 states.
pub const ESO_STATE_DIM: usize = 18;

/// Diagonal controller gain K and rough inverse-inertia estimate B_hat.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdrGains {
    /// Diagonal of K (body-frame gain).
    pub k: Vector6<f64>,
    /// Diagonal of B_hat, a rough approximation of M^{-1}.
    pub b_hat: Vector6<f64>,
}

impl AdrGains {
    pub fn new(k: Vector6<f64>, b_hat: Vector6<f64>) -> Result<Self> {
        if k.iter().any(|&v| v <= 0.0) {
            return Err(Error::Validation(
                "ADR gain matrix K must have strictly positive diagonal".into(),
            ));
        }
        if b_hat.iter().any(|&v| v <= 0.0) {
            return Err(Error::Validation(
                "B_hat must have strictly positive diagonal".into(),
            ));
        }
        Ok(Self { k, b_hat })
    }

    /// Skips the positivity checks; for degenerate diagnostic setups only.
    pub fn new_unchecked(k: Vector6<f64>, b_hat: Vector6<f64>) -> Self {
        Self { k, b_hat }
    }

    /// K_eta = J K J^{-1}.
    pub fn k_eta(&self, attitude: &Vector3<f64>) -> Result<Matrix6<f64>> {
        let j = jacobian(attitude)?;
        let j_inv = jacobian_inverse(attitude)?;
        Ok(j * Matrix6::from_diagonal(&self.k) * j_inv)
    }
}

/// Observer gain vector for bandwidth w: (3 w, 3 w^2, w^3), placing the
/// observer poles at -w (triple).
pub fn observer_gains(omega: f64) -> Vector3<f64> {
    Vector3::new(3.0 * omega, 3.0 * omega * omega, omega * omega * omega)
}

/// Error-dynamics matrix A - l C of a single observer.
pub fn eso_error_matrix(omega: f64) -> Matrix3<f64> {
    let l = observer_gains(omega);
    Matrix3::new(-l[0], 1.0, 0.0, -l[1], 0.0, 1.0, -l[2], 0.0, 0.0)
}

/// Bank of six extended state observers. Estimates per DoF:
/// x1 = eta_c_i - eta_i, x2 = eps_i, x3 = d_i.
#[derive(Debug, Clone, PartialEq)]
pub struct EsoBank {
    x_hat: [Vector3<f64>; 6],
    bandwidth: [f64; 6],
}

impl EsoBank {
    pub fn new(bandwidth: [f64; 6]) -> Result<Self> {
        if bandwidth.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return Err(Error::Validation(
                "observer bandwidths must be positive".into(),
            ));
        }
        Ok(Self {
            x_hat: [Vector3::zeros(); 6],
            bandwidth,
        })
    }

    /// Startup convention x_hat_i(0) = [-eta_i(0), 0, 0].
    pub fn initialize_from_configuration(&mut self, eta0: &Vector6<f64>) {
        for i in 0..6 {
            self.x_hat[i] = Vector3::new(-eta0[i], 0.0, 0.0);
        }
    }

    pub fn bandwidth(&self, dof: usize) -> f64 {
        self.bandwidth[dof]
    }

    pub fn state(&self, dof: usize) -> &Vector3<f64> {
        &self.x_hat[dof]
    }

    pub fn set_state(&mut self, dof: usize, x: Vector3<f64>) {
        self.x_hat[dof] = x;
    }

    pub fn to_vector(&self) -> SVector<f64, ESO_STATE_DIM> {
        let mut out: SVector<f64, ESO_STATE_DIM> = SVector::zeros();
        for i in 0..6 {
            out.fixed_rows_mut::<3>(3 * i).copy_from(&self.x_hat[i]);
        }
        out
    }

    pub fn load_vector(&mut self, v: &SVector<f64, ESO_STATE_DIM>) {
        for i in 0..6 {
            self.x_hat[i] = v.fixed_rows::<3>(3 * i).into();
        }
    }
}

/// Observer state derivative for external integration alongside the plant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EsoDerivative(pub [Vector3<f64>; 6]);

impl EsoDerivative {
    pub fn to_vector(&self) -> SVector<f64, ESO_STATE_DIM> {
        let mut out: SVector<f64, ESO_STATE_DIM> = SVector::zeros();
        for i in 0..6 {
            out.fixed_rows_mut::<3>(3 * i).copy_from(&self.0[i]);
        }
        out
    }

    /// d/dt eps_hat: the second rows, used by the auxiliary-orientation
    /// derivative pipeline.
    pub fn epsilon_hat_rate(&self) -> Vector6<f64> {
        Vector6::from_fn(|i, _| self.0[i][1])
    }
}

/// Per-DoF observer dynamics
///
///   x_hat_i_dot = A x_hat_i + b [J B_hat Gamma J^T tau_eta]_i
///               + l_i [(eta_c_i - eta_i) - x_hat_1i]
///
/// with A the third-order integrator chain and b = (0, -1, 0)^T. Consumes
/// the measured configuration only, never plant velocities.
pub fn eso_derivative(
    bank: &EsoBank,
    eta_c: &Vector6<f64>,
    eta: &Vector6<f64>,
    tau_eta: &Vector6<f64>,
    b_hat: &Vector6<f64>,
    gamma: &Vector6<f64>,
) -> Result<EsoDerivative> {
    let attitude = Vector3::new(eta[3], eta[4], eta[5]);
    let j = jacobian(&attitude)?;
    let input = j * b_hat.component_mul(&gamma.component_mul(&(j.transpose() * tau_eta)));

    let mut out = [Vector3::zeros(); 6];
    for i in 0..6 {
        let x = &bank.x_hat[i];
        let l = observer_gains(bank.bandwidth[i]);
        let innovation = (eta_c[i] - eta[i]) - x[0];
        out[i] = Vector3::new(
            x[1] + l[0] * innovation,
            x[2] - input[i] + l[1] * innovation,
            l[2] * innovation,
        );
    }
    Ok(EsoDerivative(out))
}

/// (eps_hat, d_hat): the velocity-error and total-disturbance estimates.
pub fn eso_outputs(bank: &EsoBank) -> (Vector6<f64>, Vector6<f64>) {
    (
        Vector6::from_fn(|i, _| bank.x_hat[i][1]),
        Vector6::from_fn(|i, _| bank.x_hat[i][2]),
    )
}

/// Disturbance-cancelling force law. Returns the control in both frames:
/// tau_eta in {G} and tau = J^T tau_eta in {B}. The plant applies Gamma tau.
pub fn control_force(
    eps_hat: &Vector6<f64>,
    d_hat: &Vector6<f64>,
    attitude: &Vector3<f64>,
    gains: &AdrGains,
) -> Result<(Vector6<f64>, Vector6<f64>)> {
    let j_inv = jacobian_inverse(attitude)?;
    let k_eta = gains.k_eta(attitude)?;
    let inner = d_hat + k_eta * eps_hat;
    let b_hat_inv = Vector6::from_fn(|i, _| 1.0 / gains.b_hat[i]);
    let tau = b_hat_inv.component_mul(&(j_inv * inner));
    let tau_eta = j_inv.transpose() * tau;
    Ok((tau, tau_eta))
}

/// Commanded configuration eta_c(t) = eta(0) + integral of J nu_c; starts at
/// the measured initial configuration exactly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommandedConfiguration(pub Vector6<f64>);

impl CommandedConfiguration {
    pub fn from_initial(eta0: &Vector6<f64>) -> Self {
        Self(*eta0)
    }
}

/// eta_c_dot = J(eta_o) nu_c, integrated externally with the same scheme as
/// the plant.
pub fn commanded_configuration_rate(
    nu_c: &Vector6<f64>,
    attitude: &Vector3<f64>,
) -> Result<Vector6<f64>> {
    Ok(jacobian(attitude)? * nu_c)
}
