//! Lagged measurement channels and the sensor-lag error budget.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{tustin_first_order, FirstOrderDiscrete};

/// Time constant of the reference temperature sensor, s.
pub const SBE_THETA: f64 = 0.065;

/// A first-order lag sensor with optional additive Gaussian noise.
#[derive(Debug, Clone)]
pub struct SensorChannel {
    theta: f64,
    lag: FirstOrderDiscrete,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
}

impl SensorChannel {
    pub fn new(theta: f64, t_s: f64, noise_sd: f64, seed: u64) -> Result<Self> {
        if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
            return Err(Error::Domain(format!("noise_sd must be >= 0, got {noise_sd}")));
        }
        let noise = if noise_sd > 0.0 {
            Some(Normal::new(0.0, noise_sd).map_err(|e| Error::Domain(e.to_string()))?)
        } else {
            None
        };
        Ok(SensorChannel {
            theta,
            lag: tustin_first_order(theta, 1.0, t_s)?,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sample_period(&self) -> f64 {
        self.lag.sample_period()
    }

    /// Starts the channel in steady state at `value`.
    pub fn settle_at(&mut self, value: f64) {
        self.lag.settle_at(value);
    }

    pub fn measure(&mut self, true_value: f64) -> Result<f64> {
        let lagged = self.lag.step(true_value)?;
        Ok(match &self.noise {
            Some(dist) => lagged + dist.sample(&mut self.rng),
            None => lagged,
        })
    }
}

/// Leading-order lag error `θ · v · |dX/dz|` of a first-order sensor moving
/// at speed `v` through a gradient `dX/dz`.
pub fn dynamic_error_estimate(theta: f64, speed: f64, vertical_gradient: f64) -> f64 {
    theta * speed * vertical_gradient.abs()
}

/// Accuracy limits for hydrographic profiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WoceBudget {
    /// Practical salinity.
    pub d_sp: f64,
    /// Temperature, °C.
    pub d_t: f64,
    /// Pressure, dbar.
    pub d_p: f64,
    /// Depth, m.
    pub d_h: f64,
}

impl Default for WoceBudget {
    fn default() -> Self {
        WoceBudget {
            d_sp: 0.002,
            d_t: 0.002,
            d_p: 3.0,
            d_h: 3.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WoceChannel {
    Salinity,
    Temperature,
    Pressure,
    Depth,
}

impl std::fmt::Display for WoceChannel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            WoceChannel::Salinity => "salinity",
            WoceChannel::Temperature => "temperature",
            WoceChannel::Pressure => "pressure",
            WoceChannel::Depth => "depth",
        })
    }
}

impl WoceBudget {
    pub fn limit(&self, channel: WoceChannel) -> f64 {
        match channel {
            WoceChannel::Salinity => self.d_sp,
            WoceChannel::Temperature => self.d_t,
            WoceChannel::Pressure => self.d_p,
            WoceChannel::Depth => self.d_h,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComplianceRow {
    pub channel: WoceChannel,
    pub estimate: f64,
    pub limit: f64,
    pub pass: bool,
}

pub fn woce_compliance(budget: &WoceBudget, errors: &[(WoceChannel, f64)]) -> Vec<ComplianceRow> {
    errors
        .iter()
        .map(|&(channel, estimate)| {
            let limit = budget.limit(channel);
            ComplianceRow {
                channel,
                estimate,
                limit,
                pass: estimate.abs() < limit,
            }
        })
        .collect()
}

/// Temperature and depth-assignment lag errors for a sensor of time constant
/// `theta` profiling at `speed` through a temperature gradient.
pub fn profiling_errors(theta: f64, speed: f64, temperature_gradient: f64) -> [(WoceChannel, f64); 2] {
    [
        (
            WoceChannel::Temperature,
            dynamic_error_estimate(theta, speed.abs(), temperature_gradient),
        ),
        (WoceChannel::Depth, theta * speed.abs()),
    ]
}

pub fn format_compliance_table(rows: &[ComplianceRow]) -> String {
    let mut out = format!("{:<12} {:>14} {:>10}  result\n", "channel", "estimate", "limit");
    for row in rows {
        out.push_str(&format!(
            "{:<12} {:>14.6e} {:>10} {}\n",
            row.channel.to_string(),
            row.estimate,
            row.limit,
            if row.pass { "pass" } else { "FAIL" }
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn steady_input_reproduced() {
        let mut ch = SensorChannel::new(SBE_THETA, 0.01, 0.0, 0).unwrap();
        let mut y = 0.0;
        for _ in 0..(30.0 * SBE_THETA / 0.01).ceil() as usize {
            y = ch.measure(3.5).unwrap();
        }
        assert!((y - 3.5).abs() < 1e-6);
    }

    #[test]
    fn step_response_at_one_time_constant() {
        let t_s = 0.001;
        let mut ch = SensorChannel::new(SBE_THETA, t_s, 0.0, 0).unwrap();
        let steps = (SBE_THETA / t_s).round() as usize;
        let mut y = 0.0;
        for _ in 0..steps {
            y = ch.measure(1.0).unwrap();
        }
        assert!((y - (1.0 - (-1.0f64).exp())).abs() < 0.01, "{y}");
    }

    #[test]
    fn noise_is_seeded() {
        let run = |seed| {
            let mut ch = SensorChannel::new(SBE_THETA, 0.01, 0.01, seed).unwrap();
            (0..50).map(|_| ch.measure(1.0).unwrap()).collect::<Vec<_>>()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }

    #[test]
    fn rejects_negative_noise() {
        assert!(SensorChannel::new(SBE_THETA, 0.01, -1.0, 0).is_err());
        assert!(SensorChannel::new(0.0, 0.01, 0.0, 0).is_err());
    }

    #[test]
    fn error_estimates() {
        assert_eq!(dynamic_error_estimate(0.065, 0.0, 0.3), 0.0);
        let slow = dynamic_error_estimate(0.065, 0.1, 0.3);
        let fast = dynamic_error_estimate(0.065, 1.0, 0.3);
        assert!((slow - 0.00195).abs() < 1e-12);
        assert!((fast - 0.0195).abs() < 1e-12);
        assert!(slow < WoceBudget::default().d_t);
        assert!(fast > WoceBudget::default().d_t);
        assert_eq!(dynamic_error_estimate(0.065, 0.1, -0.3), slow);
    }

    #[test]
    fn compliance_report() {
        let budget = WoceBudget::default();
        let zero = [
            (WoceChannel::Salinity, 0.0),
            (WoceChannel::Temperature, 0.0),
            (WoceChannel::Pressure, 0.0),
            (WoceChannel::Depth, 0.0),
        ];
        assert!(woce_compliance(&budget, &zero).iter().all(|r| r.pass));

        let measuring = woce_compliance(&budget, &profiling_errors(0.065, 0.1, 0.3));
        assert!(measuring.iter().all(|r| r.pass));
        assert!((measuring[1].estimate - 0.0065).abs() < 1e-12);
        assert_eq!(measuring[1].limit, 3.0);

        let cruising = woce_compliance(&budget, &profiling_errors(0.065, 1.0, 0.3));
        assert!(!cruising[0].pass);
        assert!(cruising[1].pass);
        let table = format_compliance_table(&cruising);
        assert!(table.contains("FAIL"));
    }
}
