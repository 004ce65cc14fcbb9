//! Vertical motion of the buoy and its buoyancy actuator.
//!
//! The plant is
//!
//! ```text
//! dz/dt = v
//! dv/dt = -a |v - v_l| (v - v_l) - drive + f_p(z)
//! dl/dt = (k_e u - l) / T_e          (zeroed at the piston hard stops)
//! ```
//!
//! with `a = c_x s_m / (2 v0)`, `b = s_c g k_e / v0` and
//! `f_p(z) = g (1 - rho(z) / rho_ref)`. The drive term is `b u` when the
//! actuator is bypassed and `(b / k_e) l` when the piston lag is modelled.

use serde::{Deserialize, Serialize};

use crate::environment::StratificationProfile;
use crate::error::{ensure_finite, Error, Result};

/// Primitive physical parameters, the form stored in scenario files.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuoyConfig {
    pub c_x: f64,
    pub s_m: f64,
    pub s_c: f64,
    pub v0: f64,
    pub l_max: f64,
    pub t_e: f64,
    pub k_e: f64,
    pub g: f64,
}

impl Default for BuoyConfig {
    fn default() -> Self {
        BuoyConfig {
            c_x: 0.82,
            s_m: 0.0227,
            s_c: 0.0227,
            v0: 0.025,
            l_max: 0.2,
            t_e: 2.0,
            k_e: 0.02,
            g: 9.81,
        }
    }
}

/// Validated parameters plus the coefficients derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "BuoyConfig", into = "BuoyConfig")]
pub struct BuoyParams {
    config: BuoyConfig,
    a: f64,
    b: f64,
    u_max: f64,
}

impl BuoyParams {
    pub fn new(config: BuoyConfig) -> Result<Self> {
        let fields = [
            ("c_x", config.c_x),
            ("s_m", config.s_m),
            ("s_c", config.s_c),
            ("v0", config.v0),
            ("l_max", config.l_max),
            ("t_e", config.t_e),
            ("k_e", config.k_e),
            ("g", config.g),
        ];
        for (name, value) in fields {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::Invalid(format!("buoy.{name} must be > 0, got {value}")));
            }
        }
        Ok(BuoyParams {
            config,
            a: config.c_x * config.s_m / (2.0 * config.v0),
            b: config.s_c * config.g * config.k_e / config.v0,
            u_max: config.l_max / config.k_e,
        })
    }

    pub fn config(&self) -> &BuoyConfig {
        &self.config
    }

    /// Drag coefficient, 1/m.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Control gain, (m/s²)/V.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// Full control span, V. Commands are limited to `±u_max / 2`.
    pub fn u_max(&self) -> f64 {
        self.u_max
    }

    pub fn u_limit(&self) -> f64 {
        0.5 * self.u_max
    }

    pub fn l_limit(&self) -> f64 {
        0.5 * self.config.l_max
    }

    pub fn g(&self) -> f64 {
        self.config.g
    }

    pub fn k_e(&self) -> f64 {
        self.config.k_e
    }

    pub fn t_e(&self) -> f64 {
        self.config.t_e
    }

    /// Buoyancy-chamber volume for a piston displacement measured from neutral.
    pub fn chamber_volume(&self, l: f64) -> f64 {
        self.config.s_c * (l + self.l_limit())
    }
}

impl Default for BuoyParams {
    fn default() -> Self {
        BuoyParams::new(BuoyConfig::default()).expect("default buoy parameters are valid")
    }
}

impl TryFrom<BuoyConfig> for BuoyParams {
    type Error = Error;

    fn try_from(config: BuoyConfig) -> Result<Self> {
        BuoyParams::new(config)
    }
}

impl From<BuoyParams> for BuoyConfig {
    fn from(params: BuoyParams) -> Self {
        params.config
    }
}

/// Continuous plant state. Depth and speed are positive downward; the piston
/// displacement is measured from the neutral (half-chamber) position.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BuoyState {
    pub z: f64,
    pub v: f64,
    pub l: f64,
    pub t: f64,
}

impl BuoyState {
    /// Enforces the piston hard stops and the surface.
    pub fn clamped(mut self, params: &BuoyParams) -> Self {
        let lim = params.l_limit();
        self.l = self.l.clamp(-lim, lim);
        if self.z < 0.0 {
            self.z = 0.0;
            self.v = self.v.max(0.0);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StateDerivative {
    pub dz: f64,
    pub dv: f64,
    pub dl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActuatorMode {
    /// Drive force follows the lagged piston position.
    #[default]
    Physical,
    /// Drive force follows the control voltage directly.
    Bypass,
}

pub fn drag_accel(params: &BuoyParams, v: f64, v_l: f64) -> f64 {
    let rel = v - v_l;
    -params.a * rel.abs() * rel
}

/// Net gravity/buoyancy residual at depth `z`, m/s². Positive sinks the buoy.
pub fn forcing(params: &BuoyParams, profile: &StratificationProfile, z: f64) -> Result<f64> {
    let rho = profile.density_at(z)?;
    Ok(params.g() * (1.0 - rho / profile.rho_ref()))
}

pub fn actuator_derivative(params: &BuoyParams, l: f64, u: f64) -> f64 {
    let lim = params.u_limit();
    let u = if u.abs() > lim {
        log::warn!("actuator command {u} V outside ±{lim} V, clamped");
        u.clamp(-lim, lim)
    } else {
        u
    };
    let rate = (params.k_e() * u - l) / params.t_e();
    let stop = params.l_limit();
    if (l >= stop && rate > 0.0) || (l <= -stop && rate < 0.0) {
        0.0
    } else {
        rate
    }
}

pub fn state_derivative(
    params: &BuoyParams,
    profile: &StratificationProfile,
    state: &BuoyState,
    u: f64,
    mode: ActuatorMode,
) -> Result<StateDerivative> {
    // RK4 stages may probe slightly above the surface; the water there is the surface water.
    let z = state.z.max(0.0);
    let drive = match mode {
        ActuatorMode::Physical => params.b() / params.k_e() * state.l,
        ActuatorMode::Bypass => params.b() * u,
    };
    let dv = drag_accel(params, state.v, profile.water_velocity(z)) - drive
        + forcing(params, profile, z)?;
    Ok(StateDerivative {
        dz: state.v,
        dv,
        dl: actuator_derivative(params, state.l, u),
    })
}

/// Steady speed at which drag balances the net forcing under a constant control.
pub fn terminal_velocity(params: &BuoyParams, f_p: f64, u: f64) -> f64 {
    let net = f_p - params.b() * u;
    if net == 0.0 {
        return 0.0;
    }
    net.signum() * (net.abs() / params.a()).sqrt()
}

/// Piston position and control voltage holding a steady speed `v` at depth `z`,
/// limited to the actuator range.
pub fn trim(
    params: &BuoyParams,
    profile: &StratificationProfile,
    z: f64,
    v: f64,
) -> Result<(f64, f64)> {
    let f_p = forcing(params, profile, z)?;
    let rel = v - profile.water_velocity(z);
    let u = ((f_p - params.a() * rel.abs() * rel) / params.b())
        .clamp(-params.u_limit(), params.u_limit());
    Ok((params.k_e() * u, u))
}

/// The plant bundled for the integrator.
#[derive(Debug, Clone)]
pub struct Plant<'a> {
    pub params: &'a BuoyParams,
    pub profile: &'a StratificationProfile,
    pub mode: ActuatorMode,
}

impl Plant<'_> {
    pub fn derivative(&self, state: &BuoyState, u: f64) -> Result<StateDerivative> {
        let d = state_derivative(self.params, self.profile, state, u, self.mode)?;
        ensure_finite(d.dz, "dz/dt")?;
        ensure_finite(d.dv, "dv/dt")?;
        ensure_finite(d.dl, "dl/dt")?;
        Ok(d)
    }
}


#[cfg(test)]
mod tests {
    use super::test_support::*;
    use super::*;

    #[test]
    fn derived_coefficients() {
        let p = round_params();
        assert!((p.a() - 0.5).abs() < 1e-15);
        assert!((p.b() - 0.09).abs() < 1e-15);
        assert!((p.u_max() - 10.0).abs() < 1e-12);

        let d = BuoyParams::default();
        let c = d.config();
        assert_eq!(d.a(), c.c_x * c.s_m / (2.0 * c.v0));
        assert_eq!(d.b(), c.s_c * c.g * c.k_e / c.v0);
        assert_eq!(d.u_max(), c.l_max / c.k_e);
    }

    #[test]
    fn rejects_nonpositive_fields() {
        let cfg = BuoyConfig {
            t_e: 0.0,
            ..BuoyConfig::default()
        };
        let err = BuoyParams::new(cfg).unwrap_err();
        assert!(err.to_string().contains("t_e"));
    }

    #[test]
    fn chamber_volume_spans_range() {
        let p = BuoyParams::default();
        assert_eq!(p.chamber_volume(-p.l_limit()), 0.0);
        let full = p.config().s_c * p.config().l_max;
        assert!((p.chamber_volume(p.l_limit()) - full).abs() < 1e-15);
    }

    #[test]
    fn drag_values() {
        let p = round_params();
        assert_eq!(drag_accel(&p, 0.0, 0.0), 0.0);
        assert_eq!(drag_accel(&p, 1.0, 0.0), -0.5);
        assert_eq!(drag_accel(&p, -1.0, 0.0), 0.5);
    }

    #[test]
    fn forcing_values() {
        let p = BuoyParams::default();
        let neutral = StratificationProfile::constant(1022.0).unwrap();
        assert_eq!(forcing(&p, &neutral, 100.0).unwrap(), 0.0);

        let dense = StratificationProfile::constant(1027.0).unwrap();
        let light = StratificationProfile::constant(1017.0).unwrap();
        let fd = forcing(&p, &dense, 100.0).unwrap();
        let fl = forcing(&p, &light, 100.0).unwrap();
        assert!((fd - 9.81 * (1.0 - 1027.0 / 1022.0)).abs() < 1e-15);
        assert!((fl - 9.81 * (1.0 - 1017.0 / 1022.0)).abs() < 1e-15);
        assert!((fd + 0.04799).abs() < 5e-6, "{fd}");
        assert!((fl - 0.04799).abs() < 5e-6, "{fl}");
    }

    #[test]
    fn actuator_values() {
        let p = round_params();
        assert_eq!(actuator_derivative(&p, 0.0, 0.0), 0.0);
        assert!((actuator_derivative(&p, 0.0, 5.0) - 0.025).abs() < 1e-15);
        // at the upper stop any command pushing further is blocked
        let stop = p.l_limit();
        assert_eq!(actuator_derivative(&p, stop, 5.0), 0.0);
        assert!(actuator_derivative(&p, stop, -5.0) < 0.0);
        assert_eq!(actuator_derivative(&p, -stop, -5.0), 0.0);
    }

    #[test]
    fn actuator_clamps_overdriven_command() {
        let p = round_params();
        assert_eq!(
            actuator_derivative(&p, 0.0, 50.0),
            actuator_derivative(&p, 0.0, p.u_limit())
        );
    }

    #[test]
    fn neutral_rest_is_equilibrium() {
        let p = BuoyParams::default();
        let prof = StratificationProfile::constant(1022.0).unwrap();
        let s = BuoyState {
            z: 50.0,
            ..BuoyState::default()
        };
        for mode in [ActuatorMode::Physical, ActuatorMode::Bypass] {
            let d = state_derivative(&p, &prof, &s, 0.0, mode).unwrap();
            assert_eq!(d, StateDerivative::default());
        }
    }

    #[test]
    fn eq5_terms() {
        let p = round_params();
        let prof = profile_with_forcing(0.05, 9.0);
        let s = BuoyState {
            z: 10.0,
            v: 0.1,
            ..BuoyState::default()
        };
        let d = state_derivative(&p, &prof, &s, 0.0, ActuatorMode::Bypass).unwrap();
        assert!((d.dz - 0.1).abs() < 1e-15);
        assert!((d.dv - 0.045).abs() < 1e-12, "{}", d.dv);

        let prof = profile_with_forcing(0.005, 9.0);
        let d = state_derivative(&p, &prof, &s, 0.0, ActuatorMode::Bypass).unwrap();
        assert!(d.dv.abs() < 1e-12, "{}", d.dv);
    }

    #[test]
    fn physical_mode_drives_through_piston() {
        let p = round_params();
        let prof = StratificationProfile::constant(1022.0).unwrap();
        let s = BuoyState {
            z: 10.0,
            l: 0.02,
            ..BuoyState::default()
        };
        let d = state_derivative(&p, &prof, &s, 2.0, ActuatorMode::Physical).unwrap();
        // b/k_e * l = 9 * 0.02
        assert!((d.dv + 0.18).abs() < 1e-12);
        assert_eq!(d.dl, 0.0);
    }

    #[test]
    fn terminal_velocity_values() {
        let p = round_params();
        assert_eq!(terminal_velocity(&p, 0.0, 0.0), 0.0);
        assert!((terminal_velocity(&p, 0.005, 0.0) - 0.1).abs() < 1e-15);
        let u_star = 0.045 / 0.09;
        assert!((terminal_velocity(&p, 0.05, u_star) - 0.1).abs() < 1e-12);
        assert!((terminal_velocity(&p, -0.005, 0.0) + 0.1).abs() < 1e-15);
    }

    #[test]
    fn trim_balances_forces() {
        let p = BuoyParams::default();
        let prof = StratificationProfile::constant(1025.0).unwrap();
        let (l, u) = trim(&p, &prof, 100.0, 1.0).unwrap();
        let s = BuoyState {
            z: 100.0,
            v: 1.0,
            l,
            t: 0.0,
        };
        let d = state_derivative(&p, &prof, &s, u, ActuatorMode::Physical).unwrap();
        assert!(d.dv.abs() < 1e-12);
        assert!(d.dl.abs() < 1e-12);
    }

    #[test]
    fn surface_clamp() {
        let p = BuoyParams::default();
        let s = BuoyState {
            z: -0.01,
            v: -0.3,
            l: 1.0,
            t: 0.0,
        }
        .clamped(&p);
        assert_eq!(s.z, 0.0);
        assert_eq!(s.v, 0.0);
        assert_eq!(s.l, p.l_limit());
    }

    #[test]
    fn params_serialize_as_primitives() {
        let p = BuoyParams::default();
        let text = toml::to_string(&p).unwrap();
        assert!(text.contains("c_x"));
        assert!(!text.contains("u_max"));
        let back: BuoyParams = toml::from_str(&text).unwrap();
        assert_eq!(back, p);
        assert!(toml::from_str::<BuoyParams>("c_x = 1.0").is_err());
    }
}
