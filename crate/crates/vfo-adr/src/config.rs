//! Scenario configuration: a JSON-compatible schema with explicit unit
//! suffixes in key names, full validation, and builders for the runtime
//! plant/path/controller objects. Unknown keys are rejected.

use nalgebra::{Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::adr_controller::AdrGains;
use crate::errors::{Error, Result};
use crate::path_geometry::{AssumptionBounds, PathSpec, TermSurface};
use crate::rigid_body::{DisturbanceSignal, VehiclePlant};
use crate::vfo_controller::{VelocityLimits, VfoGains, DEFAULT_FREEZE_EPSILON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantConfig {
    /// 6x6 inertia matrix M, row-major [SI].
    pub inertia: [[f64; 6]; 6],
    /// Diagonal of the linear damping matrix Delta [SI].
    pub damping_diag: [f64; 6],
    /// Diagonal of the actuation matrix Gamma, entries in {0, 1}.
    pub actuation_diag: [f64; 6],
    /// Include the rigid-body Coriolis/centripetal term derived from M.
    #[serde(default = "default_true")]
    pub rigid_body_coriolis: bool,
    #[serde(default)]
    pub disturbance: DisturbanceConfig,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceConfig {
    #[default]
    None,
    /// Per-axis a_i sin(w_i t + p_i) in {G}.
    Sinusoid {
        amplitude: [f64; 6],
        angular_frequency_rad_s: [f64; 6],
        #[serde(default)]
        phase_rad: [f64; 6],
    },
}

impl DisturbanceConfig {
    pub fn build(&self) -> DisturbanceSignal {
        match self {
            Self::None => DisturbanceSignal::Zero,
            Self::Sinusoid {
                amplitude,
                angular_frequency_rad_s,
                phase_rad,
            } => DisturbanceSignal::Sinusoid {
                amplitude: Vector6::from_row_slice(amplitude),
                angular_frequency: Vector6::from_row_slice(angular_frequency_rad_s),
                phase: Vector6::from_row_slice(phase_rad),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathConfig {
    /// s1 = -x + sin(w z), s2 = -y + cos(w z).
    Helix {
        #[serde(default = "default_helix_frequency")]
        frequency: f64,
    },
    /// s1 = (x/rx)^2 + (y/ry)^2 - 1, s2 = n . p - c.
    PlaneEllipse {
        radius_x: f64,
        radius_y: f64,
        plane_normal: [f64; 3],
        plane_offset: f64,
    },
    /// Coefficient tables for a custom level-surface pair.
    LevelSurfaces { s1: TermSurface, s2: TermSurface },
}

fn default_helix_frequency() -> f64 {
    4.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdrConfig {
    /// Diagonal of the body-frame gain matrix K.
    pub k_diag: [f64; 6],
    /// Diagonal of B_hat, the rough M^{-1} estimate.
    pub b_hat_diag: [f64; 6],
    /// Shared observer bandwidth; `omega_overrides_rad_s` replaces single
    /// entries.
    pub omega_rad_s: f64,
    #[serde(default)]
    pub omega_overrides_rad_s: Option<[Option<f64>; 6]>,
}

impl AdrConfig {
    pub fn bandwidths(&self) -> [f64; 6] {
        let mut out = [self.omega_rad_s; 6];
        if let Some(overrides) = &self.omega_overrides_rad_s {
            for (slot, ov) in out.iter_mut().zip(overrides.iter()) {
                if let Some(w) = ov {
                    *slot = *w;
                }
            }
        }
        out
    }

    pub fn gains(&self) -> Result<AdrGains> {
        AdrGains::new(
            Vector6::from_row_slice(&self.k_diag),
            Vector6::from_row_slice(&self.b_hat_diag),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialConfig {
    /// eta(0) = [x, y, z, phi, theta, psi].
    pub eta0: [f64; 6],
    /// nu(0) = [u, v, w, p, q, r].
    #[serde(default)]
    pub nu0: [f64; 6],
}

/// Full batch-scenario description. Serializes canonically (fixed field
/// order), which the CLI hashes for the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantConfig,
    pub path: PathConfig,
    /// Desired movement direction along the path, +1 or -1.
    pub direction_sigma: i8,
    /// Movement strategy xi_d: +1 forward, -1 backward.
    pub strategy_xi_d: i8,
    /// Speed profile magnitude U [m/s].
    pub speed_m_s: f64,
    #[serde(default)]
    pub path_bounds: Option<AssumptionBounds>,
    pub vfo: VfoGains,
    #[serde(default = "default_freeze_epsilon")]
    pub freeze_epsilon: f64,
    pub adr: AdrConfig,
    pub initial: InitialConfig,
    pub horizon_s: f64,
    pub step_s: f64,
    /// Length of the startup window with the force law switched off while
    /// the observers run.
    #[serde(default = "default_inhibition")]
    pub inhibition_window_s: f64,
    /// Commanded-velocity magnitude/rate limits; omit to disable scaling.
    #[serde(default)]
    pub velocity_limits: Option<VelocityLimits>,
    /// [t1, t2] window for steady-state metrics.
    pub metric_window_s: [f64; 2],
}

fn default_freeze_epsilon() -> f64 {
    DEFAULT_FREEZE_EPSILON
}

fn default_inhibition() -> f64 {
    1.0
}

impl ScenarioConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| Error::Validation(format!("config parse error: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_s > 0.0) {
            return Err(Error::Validation("step_s must be positive".into()));
        }
        if !(self.horizon_s > 0.0) {
            return Err(Error::Validation("horizon_s must be positive".into()));
        }
        let [t1, t2] = self.metric_window_s;
        if !(t1 < t2 && t2 <= self.horizon_s + 1e-9) {
            return Err(Error::Validation(format!(
                "metric window [{t1}, {t2}] must satisfy t1 < t2 <= horizon"
            )));
        }
        if self.inhibition_window_s < 0.0 {
            return Err(Error::Validation(
                "inhibition_window_s must be non-negative".into(),
            ));
        }
        let theta0 = self.initial.eta0[4];
        if !(theta0 > -std::f64::consts::FRAC_PI_2 && theta0 < std::f64::consts::FRAC_PI_2) {
            return Err(Error::Validation(format!(
                "initial pitch angle {theta0} outside (-pi/2, pi/2)"
            )));
        }
        if self.initial.eta0.iter().any(|v| !v.is_finite())
            || self.initial.nu0.iter().any(|v| !v.is_finite())
        {
            return Err(Error::Validation("initial state must be finite".into()));
        }
        self.vfo.validated()?;
        if !(self.freeze_epsilon > 0.0) {
            return Err(Error::Validation("freeze_epsilon must be positive".into()));
        }
        self.adr.gains()?;
        for w in self.adr.bandwidths() {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::Validation(format!(
                    "observer bandwidth {w} must be positive"
                )));
            }
        }
        if let Some(l) = self.velocity_limits {
            l.validated()?;
        }
        // Plant and path constructors run their own invariant checks.
        self.build_plant()?;
        self.build_path()?;
        Ok(())
    }

    pub fn build_plant(&self) -> Result<VehiclePlant> {
        let mut m = Matrix6::zeros();
        for (r, row) in self.plant.inertia.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        Ok(VehiclePlant::new(
            m,
            Vector6::from_row_slice(&self.plant.damping_diag),
            Vector6::from_row_slice(&self.plant.actuation_diag),
        )?
        .with_rigid_body_coriolis(self.plant.rigid_body_coriolis)
        .with_disturbance(self.plant.disturbance.build()))
    }

    pub fn build_path(&self) -> Result<PathSpec> {
        let spec = match &self.path {
            PathConfig::Helix { frequency } => {
                PathSpec::helix(*frequency, self.strategy_xi_d, self.speed_m_s)?
            }
            PathConfig::PlaneEllipse {
                radius_x,
                radius_y,
                plane_normal,
                plane_offset,
            } => PathSpec::plane_ellipse(
                *radius_x,
                *radius_y,
                Vector3::from_row_slice(plane_normal),
                *plane_offset,
                self.strategy_xi_d,
                self.speed_m_s,
            )?,
            PathConfig::LevelSurfaces { s1, s2 } => PathSpec::new(
                std::sync::Arc::new(s1.clone()),
                std::sync::Arc::new(s2.clone()),
                self.direction_sigma,
                self.strategy_xi_d,
                self.speed_m_s,
            )?,
        };
        let mut spec = spec;
        spec.direction = validated_sign(self.direction_sigma, "direction_sigma")?;
        spec.strategy = validated_sign(self.strategy_xi_d, "strategy_xi_d")?;
        if let Some(b) = self.path_bounds {
            spec = spec.with_bounds(b);
        }
        Ok(spec)
    }

    pub fn initial_eta(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.initial.eta0)
    }

    pub fn initial_nu(&self) -> Vector6<f64> {
        Vector6::from_row_slice(&self.initial.nu0)
    }

    /// u_d = xi_d U.
    pub fn reference_velocity(&self) -> f64 {
        self.strategy_xi_d as f64 * self.speed_m_s
    }
}

fn validated_sign(v: i8, what: &str) -> Result<i8> {
    if v == 1 || v == -1 {
        Ok(v)
    } else {
        Err(Error::Validation(format!("{what} must be +1 or -1")))
    }
}

/// Inertia, damping and actuation of the simulated underactuated
/// ellipsoidal vehicle.
pub fn reference_plant_config() -> PlantConfig {
    PlantConfig {
        inertia: [
            [4.137, 0.0, 0.0, 0.0, 0.0, 0.0],
            [0.0, 4.137, 0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 4.137, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.535, 0.0, -0.390],
            [0.0, 0.0, 0.0, 0.0, 1.653, 0.0],
            [0.0, 0.0, 0.0, -0.390, 0.0, 1.577],
        ],
        damping_diag: [2.0, 10.0, 10.0, 10.0, 10.0, 10.0],
        actuation_diag: [1.0, 0.0, 0.0, 1.0, 1.0, 1.0],
        rigid_body_coriolis: true,
        disturbance: DisturbanceConfig::None,
    }
}

fn reference_vfo_gains() -> VfoGains {
    VfoGains {
        k_p: 2.0,
        k_theta: 4.0,
        k_psi: 4.0,
        k_phi: 5.0,
        delta_p: 0.75,
        delta_o: 1.0,
    }
}

/// Scenario A: helix-like path, u_d = 0.1 m/s, no external disturbance,
/// K = diag{2.4172 I3, 0.5 I3}.
pub fn scenario_a() -> ScenarioConfig {
    ScenarioConfig {
        name: "scenario_a".into(),
        plant: reference_plant_config(),
        path: PathConfig::Helix { frequency: 4.0 },
        direction_sigma: 1,
        strategy_xi_d: 1,
        speed_m_s: 0.1,
        path_bounds: None,
        vfo: reference_vfo_gains(),
        freeze_epsilon: DEFAULT_FREEZE_EPSILON,
        adr: AdrConfig {
            k_diag: [2.4172, 2.4172, 2.4172, 0.5, 0.5, 0.5],
            b_hat_diag: [0.3, 0.3, 0.3, 2.5, 0.75, 0.75],
            omega_rad_s: 200.0,
            omega_overrides_rad_s: None,
        },
        initial: InitialConfig {
            eta0: [
                0.0,
                -std::f64::consts::FRAC_PI_3,
                std::f64::consts::FRAC_PI_4,
                1.0,
                0.6,
                0.6,
            ],
            nu0: [0.0; 6],
        },
        horizon_s: 100.0,
        step_s: 1e-3,
        inhibition_window_s: 1.0,
        velocity_limits: None,
        metric_window_s: [50.0, 100.0],
    }
}

/// Scenario B: plane-ellipse path, u_d = 0.2 m/s, sinusoidal external
/// disturbance, relaxed gain K = 0.5 I, commanded-velocity scaling active.
pub fn scenario_b() -> ScenarioConfig {
    let mut cfg = scenario_a();
    cfg.name = "scenario_b".into();
    cfg.plant.disturbance = DisturbanceConfig::Sinusoid {
        amplitude: [2.0, 4.0, 1.4, 0.0, 0.0, 0.0],
        angular_frequency_rad_s: [1.0, 0.8, 0.6, 0.0, 0.0, 0.0],
        phase_rad: [0.0; 6],
    };
    cfg.path = PathConfig::PlaneEllipse {
        radius_x: 1.0,
        radius_y: 2.0,
        plane_normal: [1.0, 2.0, 3.0],
        plane_offset: 1.0,
    };
    cfg.speed_m_s = 0.2;
    cfg.adr.k_diag = [0.5; 6];
    cfg.initial.eta0 = [
        0.0,
        -std::f64::consts::FRAC_PI_3,
        std::f64::consts::FRAC_PI_4,
        -0.1,
        0.0,
        0.3,
    ];
    cfg.velocity_limits = Some(VelocityLimits {
        magnitude: 8.0,
        rate: 2.0,
    });
    cfg
}
