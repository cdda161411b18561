//! Closed-loop scenario execution, error metrics and observer-quality
//! diagnostics.
//!
//! One run integrates the coupled state (eta, nu, eta_c, all observer
//! states) with classical fixed-step RK4. The controller is evaluated once
//! per step from the measured configuration and the observer bank only; the
//! resulting commanded velocities and generalized forces are held over the
//! step. Ground-truth quantities (velocity error, total disturbance) are
//! reconstructed with simulator privilege for diagnostics.

use nalgebra::{SVector, Vector2, Vector3, Vector6};
use serde::Serialize;
use thiserror::Error;

use crate::adr_controller::{
    commanded_configuration_rate, control_force, eso_derivative, eso_outputs, AdrGains, EsoBank,
    ESO_STATE_DIM,
};
use crate::config::ScenarioConfig;
use crate::errors::Error;
use crate::path_geometry::{
    atan2_half_open, desired_orientation, evaluate_frame, frame_time_derivatives_at, PathFrame,
    PathSpec,
};
use crate::rigid_body::{
    jacobian, jacobian_rate, plant_derivative, rotation_matrix, Configuration, Pseudovelocity,
    VehiclePlant, DEFAULT_SINGULARITY_MARGIN,
};
use crate::vfo_controller::{
    auxiliary_error, commanded_surge, commanded_velocities, convergence_field_angular,
    convergence_field_longitudinal, longitudinal_field_rate, roll_stabilizer,
    scale_commanded_velocities, scale_scalar_command, AuxiliaryState, CommandedVelocity,
    VelocityLimits, VfoGains,
};

/// Coupled integration state: eta (6) + nu (6) + eta_c (6) + x_hat (18).
pub const STATE_DIM: usize = 18 + ESO_STATE_DIM;
type State = SVector<f64, STATE_DIM>;

/// One integrator-step sample of every signal in the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub eta: Vector6<f64>,
    pub nu: Vector6<f64>,
    pub eta_c: Vector6<f64>,
    pub nu_c: Vector6<f64>,
    /// Controller output in {B} (zero during the inhibition window).
    pub tau: Vector6<f64>,
    /// Gamma tau: what the actuators deliver.
    pub applied_tau: Vector6<f64>,
    /// All six observer states, flattened (x1, x2, x3 per DoF).
    pub x_hat: SVector<f64, ESO_STATE_DIM>,
    /// (s1, s2, e_phi, e_theta, e_psi) with the yaw component on R.
    pub e: [f64; 5],
    /// Angular components wrapped to (-pi, pi].
    pub e_2pi: [f64; 5],
    /// Auxiliary orientation error (e_theta_a, e_psi_a).
    pub e_a: Vector2<f64>,
    /// Ground-truth total disturbance (simulator privilege).
    pub d: Vector6<f64>,
    pub d_hat: Vector6<f64>,
    /// Ground-truth velocity tracking error in {G}.
    pub eps: Vector6<f64>,
    pub eps_hat: Vector6<f64>,
    pub eps_psi: f64,
    pub eps_theta: f64,
    /// Running value of the yaw-discrepancy bound.
    pub f_eps_psi: f64,
}

impl TraceRow {
    pub fn position_error_norm(&self) -> f64 {
        (self.e[0] * self.e[0] + self.e[1] * self.e[1]).sqrt()
    }

    pub fn wrapped_error_norm(&self) -> f64 {
        self.e_2pi.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn orientation_error_norm(&self) -> f64 {
        self.e_2pi[2..].iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Uniformly sampled closed-loop time series.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub dt: f64,
    pub rows: Vec<TraceRow>,
}

impl SimulationTrace {
    pub fn final_time(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.t)
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("scenario setup failed: {0}")]
    Setup(#[from] Error),
    #[error("simulation aborted at t = {t:.4} s: {fault}")]
    Aborted {
        t: f64,
        fault: Error,
        partial: Box<SimulationTrace>,
    },
}

/// Wraps an angle to (-pi, pi]; exact for inputs already in range.
pub fn wrap_to_pi(a: f64) -> f64 {
    use std::f64::consts::PI;
    if a > -PI && a <= PI {
        return a;
    }
    let r = a.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Path-following errors at one configuration:
/// e = (s1, s2, phi_d - phi, theta_d - theta, psi_d - psi) with the yaw
/// component on R, and e_2pi with each angular component wrapped.
pub fn path_following_error(
    eta: &Vector6<f64>,
    path: &PathSpec,
    frame: &PathFrame,
) -> crate::errors::Result<([f64; 5], [f64; 5])> {
    let desired = desired_orientation(path, frame)?;
    let e = [
        frame.s_values.0,
        frame.s_values.1,
        desired.roll - eta[3],
        desired.pitch - eta[4],
        desired.yaw - eta[5],
    ];
    let e_2pi = [e[0], e[1], wrap_to_pi(e[2]), wrap_to_pi(e[3]), wrap_to_pi(e[4])];
    Ok((e, e_2pi))
}

/// Inputs of the Appendix-style yaw/pitch discrepancy diagnostics. The true
/// velocity-error norms are simulator-privilege quantities.
#[derive(Debug, Clone, Copy)]
pub struct DiscrepancyInputs<'a> {
    pub frame: &'a PathFrame,
    pub h_star_p: &'a Vector3<f64>,
    pub strategy: i8,
    pub u_d: f64,
    pub k_p: f64,
    pub delta_p: f64,
    pub eps_p_hat: &'a Vector3<f64>,
    /// True |eps_p|.
    pub eps_p_norm: f64,
    /// True |eps_p - eps_p_hat|.
    pub eps_p_tilde_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawPitchDiscrepancies {
    /// psi_d - psi_a*, wrapped by the four-quadrant difference identity.
    pub eps_psi: f64,
    /// theta_d - theta_a in closed form.
    pub eps_theta: f64,
    /// Running bound with |eps_psi| <= f_eps_psi.
    pub f_eps_psi: f64,
}

/// Closed-form differences between the desired and auxiliary angles, plus
/// the yaw-discrepancy bound.
pub fn yaw_pitch_discrepancies(inp: &DiscrepancyInputs) -> YawPitchDiscrepancies {
    let v = inp.frame.tangent;
    let h = inp.h_star_p;
    let xi = inp.strategy as f64;

    // Atan2(Y1, X1) - Atan2(Y2, X2) = Atan2(Y1 X2 - Y2 X1, X1 X2 + Y1 Y2)
    // with (Y1, X1) = xi (v_y, v_x) and (Y2, X2) = xi (h_y, h_x).
    let eps_psi = atan2_half_open(v[1] * h[0] - h[1] * v[0], v[0] * h[0] + v[1] * h[1]);

    let planar_v = (v[0] * v[0] + v[1] * v[1]).sqrt();
    let planar_h = (h[0] * h[0] + h[1] * h[1]).sqrt();
    let eps_theta = ((xi * h[2] * planar_v - xi * v[2] * planar_h)
        / (planar_v * planar_h + h[2] * v[2]))
        .atan();

    let e_p_norm = (inp.frame.s_values.0.powi(2) + inp.frame.s_values.1.powi(2)).sqrt();
    let numerator = 2.0 * inp.k_p * e_p_norm
        + inp.delta_p * inp.eps_p_norm
        + inp.delta_p * inp.eps_p_tilde_norm;
    let n1 = Vector2::new(inp.frame.normals.0[0], inp.frame.normals.0[1]);
    let n2 = Vector2::new(inp.frame.normals.1[0], inp.frame.normals.1[1]);
    let planar_tangent = inp.frame.planar_tangent;
    let eps_hat_planar = Vector2::new(inp.eps_p_hat[0], inp.eps_p_hat[1]);
    let denominator = inp.u_d * planar_tangent.norm_squared()
        - inp.k_p * inp.frame.s_values.0 * n1.dot(&planar_tangent)
        - inp.k_p * inp.frame.s_values.1 * n2.dot(&planar_tangent)
        + inp.delta_p * eps_hat_planar.dot(&planar_tangent);
    let f_eps_psi = numerator.atan2(denominator.abs());

    YawPitchDiscrepancies {
        eps_psi,
        eps_theta,
        f_eps_psi,
    }
}

/// Total disturbance reconstructed from exact plant quantities:
///
///   d = eps_dot + J B_hat Gamma J^T tau_eta,
///   eps_dot = eta_c_ddot - eta_ddot = J_dot (nu_c - nu) - J nu_dot
///
/// with nu_c held constant over the step. Diagnostics only.
pub struct GroundTruthInputs<'a> {
    pub plant: &'a VehiclePlant,
    pub b_hat: &'a Vector6<f64>,
    pub eta: &'a Vector6<f64>,
    pub nu: &'a Vector6<f64>,
    pub nu_c: &'a Vector6<f64>,
    pub tau_eta: &'a Vector6<f64>,
    pub t: f64,
}

pub fn ground_truth_disturbance(inp: &GroundTruthInputs) -> crate::errors::Result<Vector6<f64>> {
    let attitude = Vector3::new(inp.eta[3], inp.eta[4], inp.eta[5]);
    let config = Configuration {
        position: Vector3::new(inp.eta[0], inp.eta[1], inp.eta[2]),
        attitude,
    };
    let nu = Pseudovelocity::from_vector(inp.nu)?;
    let j = jacobian(&attitude)?;
    let tau_body = j.transpose() * inp.tau_eta;
    let (_, nu_dot) = plant_derivative(inp.plant, &config, &nu, &tau_body, inp.t)?;
    let j_dot = jacobian_rate(&attitude, &nu.angular)?;
    let eps_dot = j_dot * (inp.nu_c - inp.nu) - j * nu_dot;
    let gamma = inp.plant.actuation_diag();
    let input = j * inp.b_hat.component_mul(&gamma.component_mul(&tau_body));
    Ok(eps_dot + input)
}

/// Windowed steady-state statistics of a trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub window: [f64; 2],
    /// sup |e_p| over the window.
    pub sup_position_error: f64,
    /// sup |e_2pi| over the window.
    pub sup_wrapped_error: f64,
    pub avg_position_error: f64,
    pub avg_orientation_error: f64,
    pub avg_abs_roll_error: f64,
    pub avg_abs_aux_pitch_error: f64,
    pub avg_abs_aux_yaw_error: f64,
    pub avg_commanded_norm: f64,
    pub avg_applied_force_norm: f64,
    /// Whole-trace maxima.
    pub max_commanded: f64,
    pub max_applied_force: f64,
    pub max_disturbance_estimate_norm: f64,
}

/// Trapezoidal window averages and exact window suprema.
pub fn compute_metrics(trace: &SimulationTrace, window: [f64; 2]) -> crate::errors::Result<Metrics> {
    let [t1, t2] = window;
    let tol = 1e-9;
    let rows = &trace.rows;
    let i1 = rows
        .iter()
        .position(|r| r.t >= t1 - tol)
        .ok_or(Error::EmptyWindow { start: t1, end: t2 })?;
    let i2 = rows
        .iter()
        .rposition(|r| r.t <= t2 + tol)
        .ok_or(Error::EmptyWindow { start: t1, end: t2 })?;
    if i2 <= i1 {
        return Err(Error::EmptyWindow { start: t1, end: t2 });
    }
    let win = &rows[i1..=i2];

    let trapezoid = |f: &dyn Fn(&TraceRow) -> f64| -> f64 {
        let mut acc = 0.0;
        for pair in win.windows(2) {
            acc += 0.5 * (f(&pair[0]) + f(&pair[1])) * (pair[1].t - pair[0].t);
        }
        acc / (win.last().unwrap().t - win[0].t)
    };
    let sup = |f: &dyn Fn(&TraceRow) -> f64| win.iter().map(f).fold(0.0, f64::max);
    let global_max = |f: &dyn Fn(&TraceRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);

    Ok(Metrics {
        window,
        sup_position_error: sup(&|r| r.position_error_norm()),
        sup_wrapped_error: sup(&|r| r.wrapped_error_norm()),
        avg_position_error: trapezoid(&|r| r.position_error_norm()),
        avg_orientation_error: trapezoid(&|r| r.orientation_error_norm()),
        avg_abs_roll_error: trapezoid(&|r| r.e_2pi[2].abs()),
        avg_abs_aux_pitch_error: trapezoid(&|r| r.e_a[0].abs()),
        avg_abs_aux_yaw_error: trapezoid(&|r| r.e_a[1].abs()),
        avg_commanded_norm: trapezoid(&|r| r.nu_c.norm()),
        avg_applied_force_norm: trapezoid(&|r| r.applied_tau.norm()),
        max_commanded: global_max(&|r| {
            r.nu_c[0]
                .abs()
                .max(r.nu_c[3].abs())
                .max(r.nu_c[4].abs())
                .max(r.nu_c[5].abs())
        }),
        max_applied_force: global_max(&|r| r.applied_tau.amax()),
        max_disturbance_estimate_norm: global_max(&|r| r.d_hat.norm()),
    })
}

/// Documented CSV schema of trace exports.
pub const CSV_HEADER: &str = "t,x,y,z,phi,theta,psi,u,v,w,p,q,r,s1,s2,e_phi,e_theta,e_psi_2pi,\
e_theta_a,e_psi_a,u_c,p_c,q_c,r_c,tau_u,tau_p,tau_q,tau_r,d_norm,dhat_norm,eps_norm,epshat_norm,\
eps_psi,eps_theta";

/// Renders the trace in the documented column order with full round-trip
/// float precision, keeping every `decimate`-th row (and always the last).
pub fn trace_to_csv(trace: &SimulationTrace, decimate: usize) -> String {
    let stride = decimate.max(1);
    let mut out = String::with_capacity(64 * (trace.rows.len() / stride + 2));
    out.push_str(CSV_HEADER);
    out.push('\n');
    let last = trace.rows.len().saturating_sub(1);
    for (k, r) in trace.rows.iter().enumerate() {
        if k % stride != 0 && k != last {
            continue;
        }
        let cols: [f64; 34] = [
            r.t,
            r.eta[0],
            r.eta[1],
            r.eta[2],
            r.eta[3],
            r.eta[4],
            r.eta[5],
            r.nu[0],
            r.nu[1],
            r.nu[2],
            r.nu[3],
            r.nu[4],
            r.nu[5],
            r.e[0],
            r.e[1],
            r.e[2],
            r.e[3],
            r.e_2pi[4],
            r.e_a[0],
            r.e_a[1],
            r.nu_c[0],
            r.nu_c[3],
            r.nu_c[4],
            r.nu_c[5],
            r.applied_tau[0],
            r.applied_tau[3],
            r.applied_tau[4],
            r.applied_tau[5],
            r.d.norm(),
            r.d_hat.norm(),
            r.eps.norm(),
            r.eps_hat.norm(),
            r.eps_psi,
            r.eps_theta,
        ];
        let mut first = true;
        for c in cols {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(&format!("{c:?}"));
        }
        out.push('\n');
    }
    out
}

/// Runtime objects of one scenario.
struct Scenario {
    plant: VehiclePlant,
    path: PathSpec,
    vfo: VfoGains,
    adr: AdrGains,
    bank_template: EsoBank,
    u_d: f64,
    strategy: i8,
    dt: f64,
    steps: usize,
    inhibition: f64,
    limits: Option<VelocityLimits>,
    freeze_epsilon: f64,
    gamma: Vector6<f64>,
    eta0: Vector6<f64>,
    nu0: Vector6<f64>,
}

impl Scenario {
    fn from_config(config: &ScenarioConfig) -> crate::errors::Result<Self> {
        config.validate()?;
        let plant = config.build_plant()?;
        let gamma = *plant.actuation_diag();
        Ok(Self {
            plant,
            path: config.build_path()?,
            vfo: config.vfo,
            adr: config.adr.gains()?,
            bank_template: EsoBank::new(config.adr.bandwidths())?,
            u_d: config.reference_velocity(),
            strategy: config.strategy_xi_d,
            dt: config.step_s,
            steps: (config.horizon_s / config.step_s).round() as usize,
            inhibition: config.inhibition_window_s,
            limits: config.velocity_limits,
            freeze_epsilon: config.freeze_epsilon,
            gamma,
            eta0: config.initial_eta(),
            nu0: config.initial_nu(),
        })
    }
}

struct ControllerMemory {
    aux: AuxiliaryState,
    prev_command: CommandedVelocity,
}

/// Everything the controller produces at one sample.
struct ControlOutput {
    nu_c: CommandedVelocity,
    tau: Vector6<f64>,
    tau_eta: Vector6<f64>,
    frame: PathFrame,
    h_star_p: Vector3<f64>,
    theta_a: f64,
    psi_a: f64,
    eps_hat: Vector6<f64>,
    d_hat: Vector6<f64>,
}

/// One output-feedback controller evaluation. Consumes the measured
/// configuration, the commanded configuration and the observer bank; plant
/// velocities are structurally absent from this signature.
///
/// During the startup inhibition window the whole controller output is held
/// at zero while the observers keep integrating, so the observer
/// initialization transient (peaking) never reaches the loop; the path and
/// orientation diagnostics are still evaluated statelessly for the trace.
fn controller_step(
    sc: &Scenario,
    t: f64,
    eta: &Vector6<f64>,
    eta_c: &Vector6<f64>,
    bank: &EsoBank,
    mem: &mut ControllerMemory,
) -> crate::errors::Result<ControlOutput> {
    let attitude = Vector3::new(eta[3], eta[4], eta[5]);
    let position = Vector3::new(eta[0], eta[1], eta[2]);

    let (eps_hat, d_hat) = eso_outputs(bank);
    let frame = evaluate_frame(&sc.path, &position)?;
    let eps_p_hat: Vector3<f64> = eps_hat.fixed_rows::<3>(0).into();
    let h_star_p = convergence_field_longitudinal(&frame, &sc.vfo, sc.u_d, &eps_p_hat);

    if t < sc.inhibition {
        let xi = sc.strategy as f64;
        let psi_a = (xi * h_star_p[1]).atan2(xi * h_star_p[0]);
        let denom = h_star_p[0] * psi_a.cos() + h_star_p[1] * psi_a.sin();
        let theta_a = (-h_star_p[2] / denom).atan();
        return Ok(ControlOutput {
            nu_c: CommandedVelocity::default(),
            tau: Vector6::zeros(),
            tau_eta: Vector6::zeros(),
            frame,
            h_star_p,
            theta_a,
            psi_a,
            eps_hat,
            d_hat,
        });
    }

    let (tau, tau_eta) = control_force(&eps_hat, &d_hat, &attitude, &sc.adr)?;

    // d/dt eps_hat from the observer equations with the applied force.
    let eps_hat_rate = eso_derivative(bank, eta_c, eta, &tau_eta, &sc.adr.b_hat, &sc.gamma)?
        .epsilon_hat_rate();

    // Commanded position rate from the surge projection alone; the angular
    // part of nu_c does not move eta_pc.
    let u_c_raw = commanded_surge(&h_star_p, &attitude);
    let eta_pc_rate = rotation_matrix(&attitude) * Vector3::new(u_c_raw, 0.0, 0.0);
    let rate_hat = eta_pc_rate - eps_p_hat;
    let path_rates = frame_time_derivatives_at(&sc.path, &frame, &position, &rate_hat);
    let eps_p_hat_rate: Vector3<f64> = eps_hat_rate.fixed_rows::<3>(0).into();
    let h_star_p_rate =
        longitudinal_field_rate(&frame, &path_rates, sc.u_d, sc.vfo.delta_p, &eps_p_hat_rate);

    let angles = mem.aux.evaluate(&h_star_p, &h_star_p_rate, sc.strategy)?;

    let eps_o_reduced = Vector2::new(eps_hat[4], eps_hat[5]);
    let h_star_o = convergence_field_angular(
        angles.theta_a,
        angles.psi_a,
        angles.theta_a_rate,
        angles.psi_a_rate,
        &attitude,
        &sc.vfo,
        &eps_o_reduced,
    );

    let mut nu_c = commanded_velocities(&h_star_p, &h_star_o, &attitude);
    if let Some(lim) = sc.limits {
        let mut prev = mem.prev_command;
        prev.p_c = 0.0; // roll command handled after the common-factor stage
        nu_c = scale_commanded_velocities(&nu_c, &prev, sc.dt, &lim);
    }
    let p_raw = roll_stabilizer(&attitude, nu_c.q_c, nu_c.r_c, &sc.vfo);
    nu_c.p_c = match sc.limits {
        Some(lim) => scale_scalar_command(p_raw, mem.prev_command.p_c, sc.dt, &lim),
        None => p_raw,
    };
    mem.prev_command = nu_c;

    Ok(ControlOutput {
        nu_c,
        tau,
        tau_eta,
        frame,
        h_star_p,
        theta_a: angles.theta_a,
        psi_a: angles.psi_a,
        eps_hat,
        d_hat,
    })
}

/// Closed-loop right-hand side with the commanded velocities and the
/// global-frame force held constant over the step.
fn closed_loop_derivative(
    sc: &Scenario,
    t: f64,
    state: &State,
    nu_c: &Vector6<f64>,
    tau_eta: &Vector6<f64>,
) -> crate::errors::Result<State> {
    let eta: Vector6<f64> = state.fixed_rows::<6>(0).into();
    let nu_vec: Vector6<f64> = state.fixed_rows::<6>(6).into();
    let eta_c: Vector6<f64> = state.fixed_rows::<6>(12).into();
    let attitude = Vector3::new(eta[3], eta[4], eta[5]);

    let config = Configuration {
        position: Vector3::new(eta[0], eta[1], eta[2]),
        attitude,
    };
    let nu = Pseudovelocity::from_vector(&nu_vec)?;
    let j = jacobian(&attitude)?;
    let tau_body = j.transpose() * tau_eta;
    let (eta_dot, nu_dot) = plant_derivative(&sc.plant, &config, &nu, &tau_body, t)?;
    let eta_c_dot = commanded_configuration_rate(nu_c, &attitude)?;

    let mut bank = sc.bank_template.clone();
    bank.load_vector(&state.fixed_rows::<ESO_STATE_DIM>(18).into());
    let eso_dot = eso_derivative(&bank, &eta_c, &eta, tau_eta, &sc.adr.b_hat, &sc.gamma)?;

    let mut out = State::zeros();
    out.fixed_rows_mut::<6>(0).copy_from(&eta_dot);
    out.fixed_rows_mut::<6>(6).copy_from(&nu_dot);
    out.fixed_rows_mut::<6>(12).copy_from(&eta_c_dot);
    out.fixed_rows_mut::<ESO_STATE_DIM>(18)
        .copy_from(&eso_dot.to_vector());
    Ok(out)
}

fn rk4_step(
    sc: &Scenario,
    t: f64,
    state: &State,
    nu_c: &Vector6<f64>,
    tau_eta: &Vector6<f64>,
) -> crate::errors::Result<State> {
    let dt = sc.dt;
    let k1 = closed_loop_derivative(sc, t, state, nu_c, tau_eta)?;
    let k2 = closed_loop_derivative(sc, t + 0.5 * dt, &(state + k1 * (0.5 * dt)), nu_c, tau_eta)?;
    let k3 = closed_loop_derivative(sc, t + 0.5 * dt, &(state + k2 * (0.5 * dt)), nu_c, tau_eta)?;
    let k4 = closed_loop_derivative(sc, t + dt, &(state + k3 * dt), nu_c, tau_eta)?;
    Ok(state + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0))
}

fn assemble_row(
    sc: &Scenario,
    t: f64,
    state: &State,
    out: &ControlOutput,
) -> crate::errors::Result<TraceRow> {
    let eta: Vector6<f64> = state.fixed_rows::<6>(0).into();
    let nu: Vector6<f64> = state.fixed_rows::<6>(6).into();
    let eta_c: Vector6<f64> = state.fixed_rows::<6>(12).into();
    let attitude = Vector3::new(eta[3], eta[4], eta[5]);

    let nu_c_vec = out.nu_c.to_vector();
    let j = jacobian(&attitude)?;
    let eps = j * (nu_c_vec - nu);

    let (e, e_2pi) = path_following_error(&eta, &sc.path, &out.frame)?;
    let e_a = auxiliary_error(out.theta_a, out.psi_a, &attitude);

    let d = ground_truth_disturbance(&GroundTruthInputs {
        plant: &sc.plant,
        b_hat: &sc.adr.b_hat,
        eta: &eta,
        nu: &nu,
        nu_c: &nu_c_vec,
        tau_eta: &out.tau_eta,
        t,
    })?;

    let eps_p: Vector3<f64> = eps.fixed_rows::<3>(0).into();
    let eps_p_hat: Vector3<f64> = out.eps_hat.fixed_rows::<3>(0).into();
    let disc = yaw_pitch_discrepancies(&DiscrepancyInputs {
        frame: &out.frame,
        h_star_p: &out.h_star_p,
        strategy: sc.strategy,
        u_d: sc.u_d,
        k_p: sc.vfo.k_p,
        delta_p: sc.vfo.delta_p,
        eps_p_hat: &eps_p_hat,
        eps_p_norm: eps_p.norm(),
        eps_p_tilde_norm: (eps_p - eps_p_hat).norm(),
    });

    Ok(TraceRow {
        t,
        eta,
        nu,
        eta_c,
        nu_c: nu_c_vec,
        tau: out.tau,
        applied_tau: sc.gamma.component_mul(&out.tau),
        x_hat: state.fixed_rows::<ESO_STATE_DIM>(18).into(),
        e,
        e_2pi,
        e_a,
        d,
        d_hat: out.d_hat,
        eps,
        eps_hat: out.eps_hat,
        eps_psi: disc.eps_psi,
        eps_theta: disc.eps_theta,
        f_eps_psi: disc.f_eps_psi,
    })
}

/// Runs one scenario to its horizon. Deterministic: identical configs give
/// bit-identical traces. Aborts with the partial trace if the attitude hits
/// the singularity margin or the state stops being finite.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimulationTrace, RunError> {
    let sc = Scenario::from_config(config)?;

    let mut state = State::zeros();
    state.fixed_rows_mut::<6>(0).copy_from(&sc.eta0);
    state.fixed_rows_mut::<6>(6).copy_from(&sc.nu0);
    state.fixed_rows_mut::<6>(12).copy_from(&sc.eta0); // eta_c(0) = eta(0)
    let mut bank0 = sc.bank_template.clone();
    bank0.initialize_from_configuration(&sc.eta0);
    state
        .fixed_rows_mut::<ESO_STATE_DIM>(18)
        .copy_from(&bank0.to_vector());

    let mut mem = ControllerMemory {
        aux: AuxiliaryState::new(sc.freeze_epsilon),
        prev_command: CommandedVelocity::default(),
    };
    let mut rows: Vec<TraceRow> = Vec::with_capacity(sc.steps + 1);
    let mut bank = sc.bank_template.clone();

    for k in 0..=sc.steps {
        let t = k as f64 * sc.dt;

        let abort = |fault: Error, rows: Vec<TraceRow>| RunError::Aborted {
            t,
            fault,
            partial: Box::new(SimulationTrace { dt: sc.dt, rows }),
        };

        if !state.iter().all(|v| v.is_finite()) {
            return Err(abort(
                Error::NonFiniteState {
                    context: "integration state",
                },
                rows,
            ));
        }
        let cos_theta = state[4].cos();
        if cos_theta < DEFAULT_SINGULARITY_MARGIN {
            return Err(abort(
                Error::SingularAttitude {
                    cos_theta_abs: cos_theta.abs(),
                    margin: DEFAULT_SINGULARITY_MARGIN,
                },
                rows,
            ));
        }

        let eta: Vector6<f64> = state.fixed_rows::<6>(0).into();
        let eta_c: Vector6<f64> = state.fixed_rows::<6>(12).into();
        bank.load_vector(&state.fixed_rows::<ESO_STATE_DIM>(18).into());

        let out = match controller_step(&sc, t, &eta, &eta_c, &bank, &mut mem) {
            Ok(out) => out,
            Err(fault) => return Err(abort(fault, rows)),
        };
        match assemble_row(&sc, t, &state, &out) {
            Ok(row) => rows.push(row),
            Err(fault) => return Err(abort(fault, rows)),
        }
        if k == sc.steps {
            break;
        }
        state = match rk4_step(&sc, t, &state, &out.nu_c.to_vector(), &out.tau_eta) {
            Ok(next) => next,
            Err(fault) => return Err(abort(fault, rows)),
        };
    }

    Ok(SimulationTrace {
        dt: sc.dt,
        rows,
    })
}
