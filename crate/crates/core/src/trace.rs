//! Per-sample trace records and their CSV form.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::control::Mode;

pub const TRACE_HEADER: &str = "t,z,v,l,u,rho_true,rho_meas,grad_est,f_p_hat,mode,v_ref";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRecord {
    pub t: f64,
    pub z: f64,
    pub v: f64,
    pub l: f64,
    pub u: f64,
    pub rho_true: f64,
    pub rho_meas: f64,
    pub grad_est: f64,
    pub f_p_hat: f64,
    pub mode: Mode,
    pub v_ref: f64,
}

/// Formats like C's `%.9g`: nine significant digits, trailing zeros removed,
/// exponent form outside `1e-4 <= |x| < 1e9`.
pub fn format_sig9(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa.to_string()), sign, exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

pub fn trace_csv(records: &[TraceRecord]) -> String {
    let mut out = String::with_capacity(records.len() * 120 + TRACE_HEADER.len() + 1);
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in records {
        let fields = [r.t, r.z, r.v, r.l, r.u, r.rho_true, r.rho_meas, r.grad_est, r.f_p_hat];
        for f in fields {
            out.push_str(&format_sig9(f));
            out.push(',');
        }
        out.push_str(r.mode.as_str());
        out.push(',');
        out.push_str(&format_sig9(r.v_ref));
        out.push('\n');
    }
    out
}

/// SHA-256 of the CSV form, hex encoded.
pub fn trace_hash(records: &[TraceRecord]) -> String {
    hex::encode(Sha256::digest(trace_csv(records).as_bytes()))
}
