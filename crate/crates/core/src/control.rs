//! Two-loop speed-mode control.
//!
//! The inner loop ([`SpeedRegulator`]) holds a commanded vertical speed. The
//! outer loop ([`Supervisor`]) watches the measured density and selects
//! between the fast cruising mode and the slow measuring mode.

use serde::{Deserialize, Serialize};

use crate::dynamics::BuoyParams;
use crate::error::{ensure_finite, Error, Result};
use crate::numerics::{tustin_first_order, FirstOrderDiscrete};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    #[default]
    Cruise,
    Measure,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Cruise => "cruise",
            Mode::Measure => "measure",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpeedConfig {
    pub cruise: f64,
    pub measure: f64,
    /// When set, the reference ignores the mode entirely.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fixed: Option<f64>,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        SpeedConfig {
            cruise: 1.0,
            measure: 0.1,
            fixed: None,
        }
    }
}

pub fn reference_speed(speeds: &SpeedConfig, mode: Mode) -> f64 {
    match mode {
        Mode::Cruise => speeds.cruise,
        Mode::Measure => speeds.measure,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegulatorLaw {
    #[default]
    InverseDynamics,
    Pi,
}

/// Where the regulator's estimate of the stratification forcing comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingSource {
    /// From the lagged density channel.
    #[default]
    Measured,
    /// From the true profile at the true depth (oracle runs).
    Exact,
    /// Assume neutral water.
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegulatorConfig {
    pub law: RegulatorLaw,
    /// Error-decay rate of the inverse-dynamics law, 1/s.
    pub lambda: f64,
    pub kp: f64,
    pub ki: f64,
    pub fp_source: ForcingSource,
    /// Smoothing lag on the differenced depth used as the speed measurement, s.
    pub speed_lag: f64,
}

impl Default for RegulatorConfig {
    fn default() -> Self {
        RegulatorConfig {
            law: RegulatorLaw::InverseDynamics,
            lambda: 0.5,
            kp: 2.0,
            ki: 0.4,
            fp_source: ForcingSource::Measured,
            speed_lag: 0.5,
        }
    }
}

impl RegulatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Invalid(format!("regulator.lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.kp > 0.0 && self.kp.is_finite()) {
            return Err(Error::Invalid(format!("regulator.kp must be > 0, got {}", self.kp)));
        }
        if !(self.ki >= 0.0 && self.ki.is_finite()) {
            return Err(Error::Invalid(format!("regulator.ki must be >= 0, got {}", self.ki)));
        }
        if !(self.speed_lag > 0.0 && self.speed_lag.is_finite()) {
            return Err(Error::Invalid(format!(
                "regulator.speed_lag must be > 0, got {}",
                self.speed_lag
            )));
        }
        Ok(())
    }
}

/// Inner-loop speed regulator. Every output lies in `±u_max / 2`.
#[derive(Debug, Clone)]
pub struct SpeedRegulator {
    cfg: RegulatorConfig,
    a: f64,
    b: f64,
    u_limit: f64,
    t_s: f64,
    integral: f64,
    prev_error: Option<f64>,
}

impl SpeedRegulator {
    pub fn new(cfg: RegulatorConfig, params: &BuoyParams, t_s: f64) -> Result<Self> {
        cfg.validate()?;
        if !(t_s > 0.0 && t_s.is_finite()) {
            return Err(Error::Invalid(format!("sample period must be > 0, got {t_s}")));
        }
        Ok(SpeedRegulator {
            cfg,
            a: params.a(),
            b: params.b(),
            u_limit: params.u_limit(),
            t_s,
            integral: 0.0,
            prev_error: None,
        })
    }

    pub fn config(&self) -> &RegulatorConfig {
        &self.cfg
    }

    pub fn u_limit(&self) -> f64 {
        self.u_limit
    }

    /// Loads the PI integrator so that a zero-error first step outputs `u`.
    pub fn preload(&mut self, u: f64) {
        if self.cfg.ki > 0.0 {
            self.integral = u.clamp(-self.u_limit, self.u_limit) / self.cfg.ki;
        }
    }

    pub fn step(&mut self, v_ref: f64, v_meas: f64, f_p_hat: f64) -> Result<f64> {
        ensure_finite(v_ref, "v_ref")?;
        ensure_finite(v_meas, "v_meas")?;
        ensure_finite(f_p_hat, "f_p_hat")?;
        let lim = self.u_limit;
        let u = match self.cfg.law {
            RegulatorLaw::InverseDynamics => {
                // u that makes dv/dt = lambda (v_ref - v) under the plant model
                let raw = (f_p_hat - self.a * v_meas.abs() * v_meas
                    - self.cfg.lambda * (v_ref - v_meas))
                    / self.b;
                raw.clamp(-lim, lim)
            }
            RegulatorLaw::Pi => {
                // positive error means too fast; positive u slows the dive
                let e = v_meas - v_ref;
                let e_prev = self.prev_error.unwrap_or(e);
                let candidate = self.integral + 0.5 * self.t_s * (e + e_prev);
                let unsat = self.cfg.kp * e + self.cfg.ki * candidate;
                let winding = unsat.abs() > lim && unsat.signum() == e.signum();
                if !winding {
                    self.integral = candidate;
                }
                self.prev_error = Some(e);
                (self.cfg.kp * e + self.cfg.ki * self.integral).clamp(-lim, lim)
            }
        };
        ensure_finite(u, "u")
    }
}

/// Forcing estimate from a measured density: `g (1 - rho_meas / rho_ref)`.
pub fn update_fp_estimate(rho_meas: f64, rho_ref: f64, g: f64) -> Result<f64> {
    if !(rho_meas > 0.0) || !(rho_ref > 0.0) {
        return Err(Error::Domain(format!(
            "densities must be positive (rho_meas = {rho_meas}, rho_ref = {rho_ref})"
        )));
    }
    Ok(g * (1.0 - rho_meas / rho_ref))
}

/// Speed measurement: one-sample difference of the depth channel, smoothed by
/// a bilinear first-order lag.
#[derive(Debug, Clone)]
pub struct SpeedEstimator {
    prev_depth: f64,
    smoothing: FirstOrderDiscrete,
}

impl SpeedEstimator {
    pub fn new(lag: f64, t_s: f64, z0: f64, v0: f64) -> Result<Self> {
        let mut smoothing = tustin_first_order(lag, 1.0, t_s)?;
        smoothing.settle_at(v0);
        Ok(SpeedEstimator {
            prev_depth: z0,
            smoothing,
        })
    }

    pub fn update(&mut self, depth_meas: f64) -> Result<f64> {
        let raw = (depth_meas - self.prev_depth) / self.smoothing.sample_period();
        self.prev_depth = depth_meas;
        self.smoothing.step(raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriggerMetric {
    /// Magnitude of the estimated vertical density gradient.
    #[default]
    Gradient,
    /// Absolute deviation of measured density from the reference density.
    Deviation,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SupervisorConfig {
    pub trigger: TriggerMetric,
    /// Gradient trigger level, kg/m⁴.
    pub trigger_threshold: f64,
    /// Deviation trigger level, kg/m³.
    pub deviation_threshold: f64,
    pub rho_ref: f64,
    /// Minimum time in measuring mode after the latest trigger, s.
    pub dwell_s: f64,
    /// Trailing window that must be free of triggers before cruising resumes, s.
    pub quiet_window_s: f64,
    /// After cruising resumes, triggers are ignored for this long, s.
    pub rearm_s: f64,
    pub initial_mode: Mode,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        SupervisorConfig {
            trigger: TriggerMetric::Gradient,
            trigger_threshold: 0.02,
            deviation_threshold: 2.0,
            rho_ref: crate::environment::DEFAULT_RHO_REF,
            dwell_s: 300.0,
            quiet_window_s: 60.0,
            rearm_s: 60.0,
            initial_mode: Mode::Cruise,
        }
    }
}

impl SupervisorConfig {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be ≥ 0, got {v}")))
            }
        };
        nonneg("trigger_threshold", self.trigger_threshold)?;
        nonneg("deviation_threshold", self.deviation_threshold)?;
        nonneg("dwell_s", self.dwell_s)?;
        nonneg("quiet_window_s", self.quiet_window_s)?;
        nonneg("rearm_s", self.rearm_s)?;
        if !(self.rho_ref > 0.0 && self.rho_ref.is_finite()) {
            return Err(Error::Invalid(format!("rho_ref must be > 0, got {}", self.rho_ref)));
        }
        Ok(())
    }
}

/// Minimum depth increment for a new gradient estimate, m.
const MIN_DEPTH_STEP: f64 = 1e-6;

/// Outer-loop mode switch driven by the measured density.
#[derive(Debug, Clone)]
pub struct Supervisor {
    cfg: SupervisorConfig,
    mode: Mode,
    gradient: f64,
    anchor: Option<(f64, f64)>,
    last_t: Option<f64>,
    last_trigger_t: Option<f64>,
    last_active_t: Option<f64>,
    last_exit_t: Option<f64>,
}

impl Supervisor {
    pub fn new(cfg: SupervisorConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Supervisor {
            cfg,
            mode: cfg.initial_mode,
            gradient: 0.0,
            anchor: None,
            last_t: None,
            last_trigger_t: None,
            last_active_t: None,
            last_exit_t: None,
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn gradient_estimate(&self) -> f64 {
        self.gradient
    }

    pub fn last_trigger_time(&self) -> Option<f64> {
        self.last_trigger_t
    }

    pub fn step(&mut self, rho_meas: f64, z: f64, t: f64) -> Result<Mode> {
        ensure_finite(rho_meas, "rho_meas")?;
        ensure_finite(z, "z_meas")?;
        if let Some(previous) = self.last_t {
            if t < previous {
                return Err(Error::TimeRegression {
                    previous,
                    current: t,
                });
            }
        }
        self.last_t = Some(t);

        match self.anchor {
            Some((rho_prev, z_prev)) => {
                let dz = z - z_prev;
                if dz.abs() >= MIN_DEPTH_STEP {
                    self.gradient = (rho_meas - rho_prev) / dz;
                    self.anchor = Some((rho_meas, z));
                }
            }
            None => self.anchor = Some((rho_meas, z)),
        }

        let active = match self.cfg.trigger {
            TriggerMetric::Gradient => self.gradient.abs() >= self.cfg.trigger_threshold,
            TriggerMetric::Deviation => {
                (rho_meas - self.cfg.rho_ref).abs() >= self.cfg.deviation_threshold
            }
        };
        if active {
            self.last_active_t = Some(t);
        }

        let since = |mark: Option<f64>| mark.map_or(f64::INFINITY, |m| t - m);
        match self.mode {
            Mode::Cruise => {
                if active && since(self.last_exit_t) >= self.cfg.rearm_s {
                    self.mode = Mode::Measure;
                    self.last_trigger_t = Some(t);
                }
            }
            Mode::Measure => {
                if active {
                    self.last_trigger_t = Some(t);
                } else if since(self.last_trigger_t) >= self.cfg.dwell_s
                    && since(self.last_active_t) >= self.cfg.quiet_window_s
                {
                    self.mode = Mode::Cruise;
                    self.last_exit_t = Some(t);
                }
            }
        }
        Ok(self.mode)
    }
}
