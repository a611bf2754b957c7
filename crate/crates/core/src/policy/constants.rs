//! Stage lengths and the closed-form confidence constants.

use alloc::format;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::math::{ceil, exp, expm1, floor, ln, ln_1p, sqrt};
use crate::model::PriceBounds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageLengths {
    pub t0: u64,
    /// `T_0`, the number of pure-exploration periods.
    pub stage1: u64,
}

/// `t_0 = max{ceil(log(d_z T) / (sigma0 (1 - log 2))), 2 d_x}` and
/// `T_0 = max{t_0 + 1, floor(log T)}`.
pub fn compute_stage_lengths(
    d_z: usize,
    d_x: usize,
    horizon: u64,
    sigma0: f64,
) -> Result<StageLengths> {
    if !(sigma0 > 0.0 && sigma0.is_finite()) {
        return Err(invalid(format!("sigma0 must be positive, got {sigma0}")));
    }
    if d_z == 0 || horizon == 0 {
        return Err(invalid("feature dimension and horizon must be positive"));
    }
    let t = horizon as f64;
    let first = ceil(ln(d_z as f64 * t) / (sigma0 * (1.0 - core::f64::consts::LN_2)));
    let t0 = (first.max(0.0) as u64).max(2 * d_x as u64);
    let stage1 = (t0 + 1).max(floor(ln(t)).max(0.0) as u64);
    Ok(StageLengths { t0, stage1 })
}

/// Everything the choice-model confidence set needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MnlConstants {
    pub kappa: f64,
    pub c4: f64,
    pub c5: f64,
    pub c8: f64,
    pub c0: f64,
    pub tau_v: f64,
    pub omega_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub kappa: f64,
    pub c4: f64,
    pub c5: f64,
    pub c8: f64,
    pub c0: f64,
    pub tau_theta: f64,
    pub tau_v: f64,
    pub omega_theta: f64,
    pub omega_v: f64,
    /// `log omega_theta`, kept separately because the bonus prefactor
    /// `Lambda exp((2 tau_theta + 1) x_bar) omega_theta` can exceed `f64`.
    pub ln_omega_theta: f64,
}

/// Shared inputs of the constant formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantInputs {
    pub horizon: u64,
    pub stage1: u64,
    pub base_rate: f64,
    pub x_bar: f64,
    pub v_bar: f64,
    pub d_x: usize,
    pub d_z: usize,
    pub assortment_size: usize,
    pub prices: PriceBounds,
}

fn check(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Internal(format!("constant {name} evaluated to {v}")))
    }
}

/// `c_4` of the arrival-model concentration bound.
pub fn c4(base_rate: f64, x_bar: f64) -> f64 {
    let l = ln_1p(3.0 / (base_rate * exp(x_bar)));
    let e = core::f64::consts::E;
    let inner = 2.0 * e * e / (l * l * sqrt(6.0 * core::f64::consts::PI) * base_rate * exp(-x_bar));
    inner.max(1.0) * 2.0 * e / l
}

/// The common bracket `2 + 4 log T / (Lambda e^x T_0) + sqrt(...)`.
fn bracket(inp: &ConstantInputs) -> f64 {
    let a = 4.0 * ln(inp.horizon as f64) / (inp.base_rate * exp(inp.x_bar) * inp.stage1 as f64);
    2.0 + a + sqrt(a)
}

fn check_inputs(inp: &ConstantInputs, sigma: f64, which: &str) -> Result<()> {
    if inp.stage1 < 2 {
        return Err(invalid(format!(
            "Stage-1 length must be at least 2, got {}",
            inp.stage1
        )));
    }
    if inp.horizon < 2 {
        return Err(invalid("horizon must be at least 2 periods"));
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::NeedsMoreExploration(format!(
            "{which} = {sigma}; the exploration block does not identify the model"
        )));
    }
    if !(inp.base_rate > 0.0 && inp.x_bar >= 0.0 && inp.v_bar > 0.0) {
        return Err(invalid("bounds must be positive"));
    }
    inp.prices.validate()
}

/// Choice-model constants. `x_bar = 0` gives the constant-arrival variant.
pub fn compute_mnl_constants(inp: &ConstantInputs, sigma0: f64) -> Result<MnlConstants> {
    check_inputs(inp, sigma0, "sigma0")?;
    let t = inp.horizon as f64;
    let t_0 = inp.stage1 as f64;
    let lam = inp.base_rate;
    let x = inp.x_bar;
    let log_t = ln(t);
    let k = inp.assortment_size as f64;
    let d_z = inp.d_z as f64;
    let (p_l, p_h) = (inp.prices.low, inp.prices.high);

    let attraction = k * exp(inp.v_bar - p_l) + 1.0;
    let kappa = check("kappa", exp(-inp.v_bar - p_h) / (attraction * attraction))?;
    let c4 = check("c4", c4(lam, x))?;

    let lead = 8.0 * exp(x) / (kappa * t_0 * lam * sigma0);
    let log_term = (d_z + 1.0) * log_t + d_z * ln(6.0 * lam);
    let tau_sq = 2.0 * exp(2.0 * x) / (kappa * t * lam * sigma0) * bracket(inp)
        + lead * log_term
        + lead * sqrt((t_0 * lam * exp(x) * log_term).max(0.0));
    let tau_v = sqrt(tau_sq).min(1.0);
    let tau_v = check("tau_v", tau_v)?;

    let (c5, c8, omega_v, c0) = mnl_confidence(inp, tau_v)?;
    Ok(MnlConstants {
        kappa,
        c4,
        c5,
        c8,
        c0,
        tau_v,
        omega_v,
    })
}

/// `(c_5, c_8, omega_v, c_0)` for a given localization radius `tau_v`.
pub fn mnl_confidence(inp: &ConstantInputs, tau_v: f64) -> Result<(f64, f64, f64, f64)> {
    let t = inp.horizon as f64;
    let lam = inp.base_rate;
    let x = inp.x_bar;
    let log_t = ln(t);
    let d_z = inp.d_z as f64;
    let (p_l, p_h) = (inp.prices.low, inp.prices.high);
    let attraction = inp.assortment_size as f64 * exp(inp.v_bar - p_l) + 1.0;
    let c4 = c4(lam, x);

    let c5 = check(
        "c5",
        16.0 * tau_v * tau_v / (4.0 * tau_v + expm1(-4.0 * tau_v)),
    )?;
    let c8 = check("c8", 3.0 * expm1(4.0 * tau_v) * attraction + 1.0)?;
    let omega_v = 8.0 * c8 * exp(x)
        + 4.0 * c8 * sqrt(8.0 * exp(x) * log_t / (t * lam))
        + 32.0 * c8 * log_t / (t * lam)
        + 8.0 * (4.0 * tau_v * c4 + c5) * c8 * ((d_z + 2.0) * log_t + d_z * ln(6.0 * tau_v * lam));
    let omega_v = check("omega_v", omega_v)?;
    let c0 = check(
        "c0",
        (p_h - p_l) * (p_h - p_l) / (lam * exp(-inp.v_bar)) * c8,
    )?;
    Ok((c5, c8, omega_v, c0))
}

/// All constants of the two-stage policy. The dimension in the
/// localization bound for `omega_theta` is read as `d_x`.
pub fn compute_constants(inp: &ConstantInputs, sigma0: f64, sigma1: f64) -> Result<Constants> {
    let m = compute_mnl_constants(inp, sigma0)?;
    check_inputs(inp, sigma1, "sigma1")?;
    if !(inp.x_bar > 0.0) {
        return Err(invalid(
            "x_bar must be positive for the arrival-model constants",
        ));
    }
    let t = inp.horizon as f64;
    let t_0 = inp.stage1 as f64;
    let lam = inp.base_rate;
    let x = inp.x_bar;
    let log_t = ln(t);
    let d_x = inp.d_x as f64;

    let tau_sq = 2.0 * exp(2.0 * x) / (t * lam * sigma1) * (bracket(inp) + exp(-x))
        + 8.0 * (2.0 * x * m.c4 + 1.0) * exp(x) / (t_0 * lam * sigma1)
            * (log_t + d_x * ln(3.0 * x * (lam * t + 1.0)));
    let tau_theta = check("tau_theta", sqrt(tau_sq).min(1.0))?;

    let inner = 0.5
        + exp(x)
        + sqrt(2.0 * exp(x) * log_t / (t * lam))
        + 4.0 * log_t / (t * lam)
        + 2.0
            * (tau_theta * x * m.c4 + 1.0)
            * (2.0 * log_t + d_x * ln(6.0 * tau_theta * x * (lam * t + 1.0)));
    let inner = check("omega_theta bracket", inner)?;
    let ln_omega_theta = ln(8.0) + 2.0 * tau_theta * x + ln(inner);
    let omega_theta = 8.0 * exp(2.0 * tau_theta * x) * inner;
    if !ln_omega_theta.is_finite() || !(omega_theta > 0.0) {
        return Err(Error::Internal(format!(
            "omega_theta evaluated to {omega_theta}"
        )));
    }
    Ok(Constants {
        kappa: m.kappa,
        c4: m.c4,
        c5: m.c5,
        c8: m.c8,
        c0: m.c0,
        tau_theta,
        tau_v: m.tau_v,
        omega_theta,
        omega_v: m.omega_v,
        ln_omega_theta,
    })
}
