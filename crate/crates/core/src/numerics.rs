//! Fixed-step integration and bilinear discretization.

use crate::dynamics::{BuoyState, Plant};
use crate::error::{ensure_finite, Error, Result};

/// One classical Runge–Kutta step of `dy/dt = f(t, y)` for an `N`-dimensional state.
pub fn rk4<const N: usize, F>(f: F, t: f64, y: &[f64; N], dt: f64) -> [f64; N]
where
    F: Fn(f64, &[f64; N]) -> [f64; N],
{
    let shifted = |base: &[f64; N], k: &[f64; N], h: f64| -> [f64; N] {
        std::array::from_fn(|i| base[i] + h * k[i])
    };
    let half = 0.5 * dt;
    let k1 = f(t, y);
    let k2 = f(t + half, &shifted(y, &k1, half));
    let k3 = f(t + half, &shifted(y, &k2, half));
    let k4 = f(t + dt, &shifted(y, &k3, dt));
    std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Advances the buoy by `dt` with the control `u` held over the step, then
/// applies the piston and surface clamps.
pub fn rk4_step(plant: &Plant<'_>, state: &BuoyState, u: f64, dt: f64) -> Result<BuoyState> {
    if !(dt > 0.0) {
        return Err(Error::Domain(format!("step must be > 0, got {dt}")));
    }
    ensure_finite(u, "u")?;
    let eval = |s: &BuoyState| -> Result<[f64; 3]> {
        let d = plant.derivative(s, u)?;
        Ok([d.dz, d.dv, d.dl])
    };
    let at = |y: &[f64; 3], k: &[f64; 3], h: f64| BuoyState {
        z: y[0] + h * k[0],
        v: y[1] + h * k[1],
        l: y[2] + h * k[2],
        t: state.t,
    };
    let y = [state.z, state.v, state.l];
    let half = 0.5 * dt;
    let k1 = eval(state)?;
    let k2 = eval(&at(&y, &k1, half))?;
    let k3 = eval(&at(&y, &k2, half))?;
    let k4 = eval(&at(&y, &k3, dt))?;
    let next: [f64; 3] =
        std::array::from_fn(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
    let out = BuoyState {
        z: ensure_finite(next[0], "z")?,
        v: ensure_finite(next[1], "v")?,
        l: ensure_finite(next[2], "l")?,
        t: state.t + dt,
    };
    Ok(out.clamped(plant.params))
}

/// Discrete first-order lag `k / (T s + 1)` under the bilinear map
/// `s <- (2 / t_s) (z - 1) / (z + 1)`:
///
/// ```text
/// y[k] = a1 y[k-1] + b0 x[k] + b1 x[k-1]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderDiscrete {
    a1: f64,
    b0: f64,
    b1: f64,
    // 1 - a1, kept separately so a unit-gain block holds a constant input exactly
    leak: f64,
    t_s: f64,
    prev_input: f64,
    prev_output: f64,
}

pub fn tustin_first_order(time_constant: f64, gain: f64, t_s: f64) -> Result<FirstOrderDiscrete> {
    if !(time_constant > 0.0 && time_constant.is_finite()) {
        return Err(Error::Domain(format!(
            "time constant must be > 0, got {time_constant}"
        )));
    }
    if !(t_s > 0.0 && t_s.is_finite()) {
        return Err(Error::Domain(format!("sample period must be > 0, got {t_s}")));
    }
    if !gain.is_finite() {
        return Err(Error::Domain(format!("gain must be finite, got {gain}")));
    }
    let den = 2.0 * time_constant + t_s;
    let b = gain * t_s / den;
    Ok(FirstOrderDiscrete {
        a1: (2.0 * time_constant - t_s) / den,
        b0: b,
        b1: b,
        leak: 2.0 * t_s / den,
        t_s,
        prev_input: 0.0,
        prev_output: 0.0,
    })
}

impl FirstOrderDiscrete {
    pub fn a1(&self) -> f64 {
        self.a1
    }

    pub fn b0(&self) -> f64 {
        self.b0
    }

    pub fn b1(&self) -> f64 {
        self.b1
    }

    pub fn sample_period(&self) -> f64 {
        self.t_s
    }

    pub fn dc_gain(&self) -> f64 {
        (self.b0 + self.b1) / self.leak
    }

    pub fn output(&self) -> f64 {
        self.prev_output
    }

    /// Overwrites the recursion memory.
    pub fn set_state(&mut self, prev_input: f64, prev_output: f64) {
        self.prev_input = prev_input;
        self.prev_output = prev_output;
    }

    /// Puts the block at rest with a constant input `x`.
    pub fn settle_at(&mut self, x: f64) {
        let y = self.dc_gain() * x;
        self.set_state(x, y);
    }

    pub fn step(&mut self, x: f64) -> Result<f64> {
        ensure_finite(x, "filter input")?;
        let y = self.prev_output
            + (self.b0 * x + self.b1 * self.prev_input - self.leak * self.prev_output);
        self.prev_input = x;
        self.prev_output = y;
        Ok(y)
    }
}

pub fn discrete_step(block: &mut FirstOrderDiscrete, x: f64) -> Result<f64> {
    block.step(x)
}
