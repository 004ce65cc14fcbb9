//! Closed-loop runs of the profiler.
//!
//! Each controller sample reads the sensors, steps the supervisor and the
//! speed regulator, logs a [`TraceRecord`], then holds the control over
//! `t_s / plant_dt` RK4 substeps of the plant. The sensor channels are
//! stepped at the plant rate.

use serde::{Deserialize, Serialize};

use crate::control::{
    reference_speed, update_fp_estimate, ForcingSource, Mode, RegulatorConfig, RegulatorLaw,
    SpeedConfig, SpeedEstimator, SpeedRegulator, Supervisor, SupervisorConfig,
};
use crate::dynamics::{forcing, trim, ActuatorMode, BuoyParams, BuoyState, Plant};
use crate::environment::{ProfileShape, ProfileSpec, StratificationProfile};
use crate::error::{Error, Result};
use crate::numerics::rk4_step;
use crate::sensing::{dynamic_error_estimate, SensorChannel, WoceBudget, SBE_THETA};
use crate::trace::TraceRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopCondition {
    #[default]
    TimeUp,
    DepthReached,
    Surfaced,
}

/// Pins the speed mode instead of following the supervisor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeLock {
    #[default]
    Auto,
    Cruise,
    Measure,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Controller sample period, s.
    pub t_s: f64,
    /// Plant integration step, s. Must divide `t_s`.
    pub plant_dt: f64,
    pub t_end: f64,
    pub z0: f64,
    pub v0: f64,
    pub stop: StopCondition,
    /// Depth for [`StopCondition::DepthReached`], m.
    pub stop_depth: f64,
    pub actuator: ActuatorMode,
    /// Start with the piston at the force balance for `v0` at `z0`.
    pub trim_actuator: bool,
    pub mode_lock: ModeLock,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            t_s: 0.1,
            plant_dt: 0.01,
            t_end: 30_000.0,
            z0: 0.0,
            v0: 0.0,
            stop: StopCondition::DepthReached,
            stop_depth: 2000.0,
            actuator: ActuatorMode::Physical,
            trim_actuator: true,
            mode_lock: ModeLock::Measure,
        }
    }
}

impl SimConfig {
    pub fn substeps(&self) -> usize {
        (self.t_s / self.plant_dt).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorConfig {
    pub density_theta: f64,
    pub temperature_theta: f64,
    pub depth_theta: f64,
    pub density_noise_sd: f64,
    pub depth_noise_sd: f64,
    pub seed: u64,
    /// Thermal expansion used to turn density gradients into temperature
    /// gradients for the error budget, 1/°C.
    pub thermal_expansion: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        SensorConfig {
            density_theta: SBE_THETA,
            temperature_theta: SBE_THETA,
            depth_theta: SBE_THETA,
            density_noise_sd: 0.0,
            depth_noise_sd: 0.0,
            seed: 0,
            thermal_expansion: 2.5e-4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub buoy: BuoyParams,
    pub profile: ProfileSpec,
    pub regulator: RegulatorConfig,
    pub supervisor: SupervisorConfig,
    pub sensors: SensorConfig,
    pub sim: SimConfig,
    pub speeds: SpeedConfig,
}

pub const BUILTIN_SCENARIOS: [&str; 4] = ["neutral_rest", "constant_density_dive", "fig4", "deep_profile"];

impl Scenario {
    /// Constant-density dive to 2000 m at the measuring speed.
    pub fn constant_density_dive() -> Self {
        Scenario {
            name: "constant_density_dive".into(),
            buoy: BuoyParams::default(),
            profile: ProfileSpec {
                z_max: 2100.0,
                ..ProfileSpec::default()
            },
            regulator: RegulatorConfig::default(),
            supervisor: SupervisorConfig::default(),
            sensors: SensorConfig::default(),
            sim: SimConfig::default(),
            speeds: SpeedConfig::default(),
        }
    }

    pub fn neutral_rest() -> Self {
        let mut s = Self::constant_density_dive();
        s.name = "neutral_rest".into();
        s.sim = SimConfig {
            t_end: 600.0,
            z0: 100.0,
            stop: StopCondition::TimeUp,
            mode_lock: ModeLock::Auto,
            ..SimConfig::default()
        };
        s.speeds.fixed = Some(0.0);
        s
    }

    /// A single pycnocline at 200 m crossed on a dive to 600 m.
    pub fn fig4() -> Self {
        let mut s = Self::constant_density_dive();
        s.name = "fig4".into();
        s.profile = ProfileSpec {
            shape: ProfileShape::TanhPycnocline {
                rho_top: 1022.0,
                rho_bottom: 1028.0,
                z_center: 200.0,
                thickness: 40.0,
            },
            ..ProfileSpec::default()
        };
        s.sim = SimConfig {
            t_end: 10_000.0,
            v0: 1.0,
            stop_depth: 600.0,
            mode_lock: ModeLock::Auto,
            ..SimConfig::default()
        };
        s
    }

    /// Full 2000 m profile with a near-surface and a deeper pycnocline.
    pub fn deep_profile() -> Self {
        let mut s = Self::constant_density_dive();
        s.name = "deep_profile".into();
        let knots = [
            (0.0, 1022.0),
            (100.0, 1022.0),
            (160.0, 1025.0),
            (400.0, 1025.0),
            (480.0, 1027.5),
            (2100.0, 1028.0),
        ];
        s.profile = ProfileSpec {
            shape: ProfileShape::PiecewiseLinear {
                knots: knots.to_vec(),
            },
            z_max: 2100.0,
            ..ProfileSpec::default()
        };
        s.sim = SimConfig {
            t_end: 30_000.0,
            v0: 1.0,
            stop_depth: 2000.0,
            mode_lock: ModeLock::Auto,
            ..SimConfig::default()
        };
        s
    }

    pub fn builtin(name: &str) -> Option<Self> {
        match name {
            "neutral_rest" => Some(Self::neutral_rest()),
            "constant_density_dive" => Some(Self::constant_density_dive()),
            "fig4" => Some(Self::fig4()),
            "deep_profile" => Some(Self::deep_profile()),
            _ => None,
        }
    }

    /// Checks every cross-section invariant and builds the profile.
    pub fn validate(&self) -> Result<StratificationProfile> {
        let sim = &self.sim;
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::Invalid(format!("{name} must be > 0, got {v}")))
            }
        };
        positive("sim.t_s", sim.t_s)?;
        positive("sim.plant_dt", sim.plant_dt)?;
        positive("sim.t_end", sim.t_end)?;
        let ratio = sim.t_s / sim.plant_dt;
        if ratio < 1.0 - 1e-9 || (ratio - ratio.round()).abs() > 1e-9 * ratio {
            return Err(Error::Invalid(format!(
                "plant_dt must divide t_s (t_s = {}, plant_dt = {})",
                sim.t_s, sim.plant_dt
            )));
        }
        if !(sim.z0 >= 0.0 && sim.z0.is_finite()) {
            return Err(Error::Invalid(format!("sim.z0 must be ≥ 0, got {}", sim.z0)));
        }
        if !sim.v0.is_finite() {
            return Err(Error::Invalid("sim.v0 must be finite".into()));
        }
        self.regulator.validate()?;
        self.supervisor.validate()?;
        let sensors = &self.sensors;
        positive("sensors.density_theta", sensors.density_theta)?;
        positive("sensors.temperature_theta", sensors.temperature_theta)?;
        positive("sensors.depth_theta", sensors.depth_theta)?;
        positive("sensors.thermal_expansion", sensors.thermal_expansion)?;
        for (name, v) in [
            ("sensors.density_noise_sd", sensors.density_noise_sd),
            ("sensors.depth_noise_sd", sensors.depth_noise_sd),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Invalid(format!("{name} must be ≥ 0, got {v}")));
            }
        }
        for (name, v) in [("speeds.cruise", self.speeds.cruise), ("speeds.measure", self.speeds.measure)] {
            if !v.is_finite() {
                return Err(Error::Invalid(format!("{name} must be finite")));
            }
        }
        let profile = self.profile.build()?;
        if sim.z0 > profile.z_max() {
            return Err(Error::Invalid(format!(
                "sim.z0 = {} lies below the profile range (z_max = {})",
                sim.z0,
                profile.z_max()
            )));
        }
        if sim.stop == StopCondition::DepthReached
            && !(sim.stop_depth > 0.0 && sim.stop_depth < profile.z_max())
        {
            return Err(Error::Invalid(format!(
                "sim.stop_depth must lie inside the profile range (0, {}), got {}",
                profile.z_max(),
                sim.stop_depth
            )));
        }
        Ok(profile)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TimeUp,
    DepthReached,
    Surfaced,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Transition {
    pub t: f64,
    pub z: f64,
    pub from: Mode,
    pub to: Mode,
}

/// Sensor-lag error budget over the samples spent in one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeCompliance {
    pub mode: Mode,
    pub samples: usize,
    pub max_temperature_error: f64,
    pub max_depth_error: f64,
    pub violating_samples: usize,
}

impl ModeCompliance {
    fn new(mode: Mode) -> Self {
        ModeCompliance {
            mode,
            samples: 0,
            max_temperature_error: 0.0,
            max_depth_error: 0.0,
            violating_samples: 0,
        }
    }

    pub fn violating_fraction(&self) -> f64 {
        if self.samples == 0 {
            0.0
        } else {
            self.violating_samples as f64 / self.samples as f64
        }
    }

    pub fn pass(&self) -> bool {
        self.violating_samples == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub name: String,
    pub records: usize,
    pub total_time: f64,
    pub time_in_cruise: f64,
    pub time_in_measure: f64,
    pub depth_reached: f64,
    pub max_abs_u: f64,
    pub max_abs_l: f64,
    pub stop_reason: StopReason,
    pub transitions: Vec<Transition>,
    pub measuring_depth_fraction: f64,
    pub compliance: [ModeCompliance; 2],
}

impl Summary {
    pub fn compliance_for(&self, mode: Mode) -> &ModeCompliance {
        &self.compliance[mode as usize]
    }

    pub fn woce_violation_fraction(&self) -> f64 {
        let samples: usize = self.compliance.iter().map(|c| c.samples).sum();
        let bad: usize = self.compliance.iter().map(|c| c.violating_samples).sum();
        if samples == 0 {
            0.0
        } else {
            bad as f64 / samples as f64
        }
    }

    /// Flat `key = value` text block.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        kv("name", self.name.clone());
        kv("records", self.records.to_string());
        kv("stop_reason", format!("{:?}", self.stop_reason).to_lowercase());
        kv("total_time_s", format!("{:.3}", self.total_time));
        kv("total_time_h", format!("{:.4}", self.total_time / 3600.0));
        kv("time_in_cruise_s", format!("{:.3}", self.time_in_cruise));
        kv("time_in_measure_s", format!("{:.3}", self.time_in_measure));
        kv("depth_reached_m", format!("{:.3}", self.depth_reached));
        kv("max_abs_u_v", format!("{:.6}", self.max_abs_u));
        kv("max_abs_l_m", format!("{:.6}", self.max_abs_l));
        kv("measuring_depth_fraction", format!("{:.6}", self.measuring_depth_fraction));
        kv("woce_violation_fraction", format!("{:.6}", self.woce_violation_fraction()));
        for c in &self.compliance {
            let m = c.mode.as_str();
            kv(&format!("woce.{m}.samples"), c.samples.to_string());
            kv(&format!("woce.{m}.max_temperature_error_c"), format!("{:.6e}", c.max_temperature_error));
            kv(&format!("woce.{m}.max_depth_error_m"), format!("{:.6e}", c.max_depth_error));
            kv(&format!("woce.{m}.violating_fraction"), format!("{:.6}", c.violating_fraction()));
            kv(&format!("woce.{m}.pass"), c.pass().to_string());
        }
        kv("transitions", self.transitions.len().to_string());
        for (i, tr) in self.transitions.iter().enumerate() {
            kv(
                &format!("transition.{i}"),
                format!("t={:.1} z={:.3} {}->{}", tr.t, tr.z, tr.from, tr.to),
            );
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: Vec<TraceRecord>,
    pub summary: Summary,
}

struct Accumulator {
    budget: WoceBudget,
    theta_t: f64,
    temperature_per_density: f64,
    compliance: [ModeCompliance; 2],
    transitions: Vec<Transition>,
    time_in: [f64; 2],
    measuring_depth: f64,
    max_abs_u: f64,
    max_abs_l: f64,
    max_z: f64,
}

impl Accumulator {
    fn record(&mut self, r: &TraceRecord, prev: Option<&TraceRecord>, true_gradient: f64) {
        self.max_abs_u = self.max_abs_u.max(r.u.abs());
        self.max_abs_l = self.max_abs_l.max(r.l.abs());
        self.max_z = self.max_z.max(r.z);
        let temperature_gradient = true_gradient * self.temperature_per_density;
        let t_err = dynamic_error_estimate(self.theta_t, r.v.abs(), temperature_gradient);
        let h_err = self.theta_t * r.v.abs();
        let c = &mut self.compliance[r.mode as usize];
        c.samples += 1;
        c.max_temperature_error = c.max_temperature_error.max(t_err);
        c.max_depth_error = c.max_depth_error.max(h_err);
        if t_err >= self.budget.d_t || h_err >= self.budget.d_h {
            c.violating_samples += 1;
        }
        if let Some(p) = prev {
            self.time_in[p.mode as usize] += r.t - p.t;
            if p.mode == Mode::Measure {
                self.measuring_depth += (r.z - p.z).abs();
            }
            if p.mode != r.mode {
                self.transitions.push(Transition {
                    t: r.t,
                    z: r.z,
                    from: p.mode,
                    to: r.mode,
                });
            }
        }
    }
}

/// Runs `scenario` to its stop condition.
pub fn run(scenario: &Scenario) -> Result<RunOutput> {
    let profile = scenario.validate()?;
    let mut trace = Vec::new();
    match simulate(scenario, &profile, &mut trace) {
        Ok(summary) => Ok(RunOutput { trace, summary }),
        Err(e) => Err(Error::Aborted {
            last_record: trace.len().saturating_sub(1),
            source: Box::new(e),
        }),
    }
}

fn simulate(
    scenario: &Scenario,
    profile: &StratificationProfile,
    trace: &mut Vec<TraceRecord>,
) -> Result<Summary> {
    let params = &scenario.buoy;
    let sim = &scenario.sim;
    let sensors = &scenario.sensors;
    let plant = Plant {
        params,
        profile,
        mode: sim.actuator,
    };
    let substeps = sim.substeps();
    let record_limit = (sim.t_end / sim.t_s + 1e-9).floor() as usize;

    let mut supervisor = Supervisor::new(scenario.supervisor)?;
    let initial_mode = match sim.mode_lock {
        ModeLock::Auto => supervisor.mode(),
        ModeLock::Cruise => Mode::Cruise,
        ModeLock::Measure => Mode::Measure,
    };

    let mut state = BuoyState {
        z: sim.z0,
        v: sim.v0,
        l: 0.0,
        t: 0.0,
    };
    let mut u_trim = 0.0;
    if sim.trim_actuator {
        let (l, u) = trim(params, profile, sim.z0, sim.v0)?;
        state.l = l;
        u_trim = u;
    }

    let mut density_channel =
        SensorChannel::new(sensors.density_theta, sim.plant_dt, sensors.density_noise_sd, sensors.seed)?;
    let mut depth_channel = SensorChannel::new(
        sensors.depth_theta,
        sim.plant_dt,
        sensors.depth_noise_sd,
        sensors.seed.wrapping_add(1),
    )?;
    let mut rho_meas = profile.density_at(state.z)?;
    let mut z_meas = state.z;
    density_channel.settle_at(rho_meas);
    depth_channel.settle_at(z_meas);
    let mut speed_estimator =
        SpeedEstimator::new(scenario.regulator.speed_lag, sim.t_s, z_meas, sim.v0)?;
    let mut regulator = SpeedRegulator::new(scenario.regulator, params, sim.t_s)?;
    if scenario.regulator.law == RegulatorLaw::Pi {
        regulator.preload(u_trim);
    }

    let mut acc = Accumulator {
        budget: WoceBudget::default(),
        theta_t: sensors.temperature_theta,
        temperature_per_density: 1.0 / (profile.rho_ref() * sensors.thermal_expansion),
        compliance: [ModeCompliance::new(Mode::Cruise), ModeCompliance::new(Mode::Measure)],
        transitions: Vec::new(),
        time_in: [0.0; 2],
        measuring_depth: 0.0,
        max_abs_u: 0.0,
        max_abs_l: 0.0,
        max_z: 0.0,
    };

    let mut stop_reason = StopReason::TimeUp;
    let mut v_meas = sim.v0;
    for k in 0..=record_limit {
        let t = k as f64 * sim.t_s;
        if k > 0 {
            v_meas = speed_estimator.update(z_meas)?;
        }
        let supervised = supervisor.step(rho_meas, z_meas, t)?;
        let mode = match sim.mode_lock {
            ModeLock::Auto => supervised,
            _ => initial_mode,
        };
        let v_ref = scenario.speeds.fixed.unwrap_or_else(|| reference_speed(&scenario.speeds, mode));
        let f_p_hat = match scenario.regulator.fp_source {
            ForcingSource::Measured => update_fp_estimate(rho_meas, profile.rho_ref(), params.g())?,
            ForcingSource::Exact => forcing(params, profile, state.z)?,
            ForcingSource::None => 0.0,
        };
        let u = regulator.step(v_ref, v_meas, f_p_hat)?;

        let record = TraceRecord {
            t,
            z: state.z,
            v: state.v,
            l: state.l,
            u,
            rho_true: profile.density_at(state.z)?,
            rho_meas,
            grad_est: supervisor.gradient_estimate(),
            f_p_hat,
            mode,
            v_ref,
        };
        acc.record(&record, trace.last(), profile.density_gradient(state.z)?);
        trace.push(record);

        let stop = match sim.stop {
            StopCondition::TimeUp => None,
            StopCondition::DepthReached => (state.z >= sim.stop_depth).then_some(StopReason::DepthReached),
            StopCondition::Surfaced => (k > 0 && state.z <= 0.0).then_some(StopReason::Surfaced),
        };
        if let Some(reason) = stop {
            stop_reason = reason;
            break;
        }
        if k == record_limit {
            break;
        }

        for _ in 0..substeps {
            state = rk4_step(&plant, &state, u, sim.plant_dt)?;
            rho_meas = density_channel.measure(profile.density_at(state.z)?)?;
            z_meas = depth_channel.measure(state.z)?;
        }
        state.t = (k + 1) as f64 * sim.t_s;
    }

    let total_time = trace.last().map_or(0.0, |r| r.t);
    let depth_span = acc.max_z - sim.z0;
    Ok(Summary {
        name: scenario.name.clone(),
        records: trace.len(),
        total_time,
        time_in_cruise: acc.time_in[Mode::Cruise as usize],
        time_in_measure: acc.time_in[Mode::Measure as usize],
        depth_reached: trace.last().map_or(sim.z0, |r| r.z),
        max_abs_u: acc.max_abs_u,
        max_abs_l: acc.max_abs_l,
        stop_reason,
        transitions: acc.transitions,
        measuring_depth_fraction: if depth_span > 0.0 { acc.measuring_depth / depth_span } else { 0.0 },
        compliance: acc.compliance,
    })
}

/// Kinematic duration of a profile at constant speed.
pub fn profile_time_estimate(depth: f64, speed: f64) -> Result<f64> {
    if !(speed > 0.0) {
        return Err(Error::Domain(format!("speed must be > 0, got {speed}")));
    }
    if !(depth >= 0.0) {
        return Err(Error::Domain(format!("depth must be ≥ 0, got {depth}")));
    }
    Ok(depth / speed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    AllMeasuring,
    AllCruising,
    Adaptive,
}

impl Strategy {
    pub fn label(&self) -> &'static str {
        match self {
            Strategy::AllMeasuring => "all-measuring",
            Strategy::AllCruising => "all-cruising",
            Strategy::Adaptive => "adaptive",
        }
    }

    fn lock(&self) -> ModeLock {
        match self {
            Strategy::AllMeasuring => ModeLock::Measure,
            Strategy::AllCruising => ModeLock::Cruise,
            Strategy::Adaptive => ModeLock::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyReport {
    pub strategy: Strategy,
    pub total_time: f64,
    pub measuring_depth_fraction: f64,
    pub woce_violation_fraction: f64,
    pub stop_reason: StopReason,
    pub summary: Summary,
}

/// Runs the scenario's profile three ways: pinned to measuring speed, pinned
/// to cruising speed, and under the supervisor.
pub fn compare_strategies(scenario: &Scenario) -> Result<Vec<StrategyReport>> {
    scenario.validate()?;
    let strategies = [Strategy::AllMeasuring, Strategy::AllCruising, Strategy::Adaptive];
    let results: Vec<Result<StrategyReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = strategies
            .iter()
            .map(|&strategy| {
                let mut variant = scenario.clone();
                variant.sim.mode_lock = strategy.lock();
                variant.speeds.fixed = None;
                variant.name = format!("{}.{}", scenario.name, strategy.label());
                scope.spawn(move || {
                    let out = run(&variant)?;
                    Ok(StrategyReport {
                        strategy,
                        total_time: out.summary.total_time,
                        measuring_depth_fraction: out.summary.measuring_depth_fraction,
                        woce_violation_fraction: out.summary.woce_violation_fraction(),
                        stop_reason: out.summary.stop_reason,
                        summary: out.summary,
                    })
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("strategy run panicked"))
            .collect()
    });
    results.into_iter().collect()
}

pub fn format_strategy_table(reports: &[StrategyReport]) -> String {
    let mut out = format!(
        "{:<14} {:>12} {:>10} {:>16} {:>16}  stop\n",
        "strategy", "time_s", "time_h", "measuring_depth", "woce_violations"
    );
    for r in reports {
        out.push_str(&format!(
            "{:<14} {:>12.1} {:>10.3} {:>16.4} {:>16.4}  {:?}\n",
            r.strategy.label(),
            r.total_time,
            r.total_time / 3600.0,
            r.measuring_depth_fraction,
            r.woce_violation_fraction,
            r.stop_reason
        ));
    }
    out
}
