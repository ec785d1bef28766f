//! A-priori convergence conditions and estimates for the l1 Newton method.
//!
//! Everything here is a closed-form evaluator over user-supplied constants:
//!
//! * `mu0`: `||P'(u0)^T h||_1 >= mu0 ||h||_inf` for all `h`,
//! * `mu`: the same bound uniformly on the ball `||u - u0||_1 <= rho`,
//! * `l_const`: Lipschitz constant of `P'` on that ball (l1 -> l_inf),
//! * `s = ||P(u0)||_inf`.
//!
//! Nothing is estimated from a concrete problem.

use serde::Serialize;

use crate::error::{Error, Result};

/// Series summation stops at the first term below this value.
pub const SERIES_TERM_CUTOFF: f64 = 1e-17;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProblemConstants {
    pub mu0: f64,
    pub mu: f64,
    pub l_const: f64,
    pub rho: f64,
    pub s: f64,
}

impl ProblemConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("mu0", self.mu0), ("mu", self.mu), ("L", self.l_const), ("rho", self.rho)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(domain(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.s >= 0.0 && self.s.is_finite()) {
            return Err(domain(format!("s must be non-negative and finite, got {}", self.s)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub condition_holds: bool,
    /// The dimensionless ratio `h` of the respective condition.
    pub h_ratio: f64,
    /// Radius the ball must have for the condition; `None` when undefined.
    pub radius_bound: Option<f64>,
    /// Upper bound on `||u0 - u*||_1` when the formula is defined.
    pub u_star_distance_bound: Option<f64>,
    pub diagnostic: Option<String>,
}

fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..1.0).contains(&delta) {
        Ok(())
    } else {
        Err(domain(format!("double-exponent series needs 0 <= delta < 1, got {delta}")))
    }
}

/// `H_0(delta) = sum_{l >= 0} delta^(2^l)`.
pub fn h0_series(delta: f64) -> Result<f64> {
    h_tail(0, delta)
}

/// `H_j(delta) = sum_{l >= j} delta^(2^l)`, the tail of [`h0_series`].
pub fn h_tail(j: u32, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let mut term = delta;
    for _ in 0..j {
        term *= term;
    }
    let mut sum = 0.0;
    while term >= SERIES_TERM_CUTOFF {
        sum += term;
        term *= term;
    }
    Ok(sum)
}

/// Rounds up, treating values within `1e-12` (relative) of an integer as
/// that integer.
fn ceil_snapped(x: f64) -> f64 {
    let nearest = x.round();
    if (x - nearest).abs() <= 1e-12 * x.abs().max(1.0) {
        nearest
    } else {
        x.ceil()
    }
}

/// Semi-local condition at a single point: `h = L s / mu0^2 < 1/2` and
/// `(1 - sqrt(1 - 2h)) / h * s / mu0 <= rho`.
pub fn kantorovich_check(c: &ProblemConstants) -> Result<ConvergenceReport> {
    c.validate()?;
    let h = c.l_const * c.s / (c.mu0 * c.mu0);
    if h > 0.5 {
        return Ok(ConvergenceReport {
            condition_holds: false,
            h_ratio: h,
            radius_bound: None,
            u_star_distance_bound: None,
            diagnostic: Some(format!("h = {h} is not below 1/2")),
        });
    }
    // (1 - sqrt(1 - 2h)) / h == 2 / (1 + sqrt(1 - 2h)), which is also the
    // s -> 0 limit.
    let root = (1.0 - 2.0 * h).sqrt();
    let radius = 2.0 / (1.0 + root) * c.s / c.mu0;
    let holds = h < 0.5 && radius <= c.rho;
    let diagnostic = if h >= 0.5 {
        Some("h = 1/2 is on the boundary".to_string())
    } else if !holds {
        Some(format!("required radius {radius} exceeds rho = {}", c.rho))
    } else {
        None
    };
    Ok(ConvergenceReport {
        condition_holds: holds,
        h_ratio: h,
        radius_bound: Some(radius),
        // (mu0 / L)(1 - sqrt(1 - 2 L s / mu0^2)), same expression as the radius
        u_star_distance_bound: Some(radius),
        diagnostic,
    })
}

/// Uniform condition on the ball: `h = L s / mu^2 < 2` and
/// `(2 mu / L) H_0(h / 2) < rho`.
pub fn mysovskikh_check(c: &ProblemConstants) -> Result<ConvergenceReport> {
    c.validate()?;
    let h = c.l_const * c.s / (c.mu * c.mu);
    if h / 2.0 >= 1.0 {
        return Ok(ConvergenceReport {
            condition_holds: false,
            h_ratio: h,
            radius_bound: None,
            u_star_distance_bound: None,
            diagnostic: Some(format!("h = {h} is not below 2; H_0(h/2) diverges")),
        });
    }
    let series = h0_series(h / 2.0)?;
    let radius = 2.0 * c.mu / c.l_const * series;
    let holds = radius < c.rho;
    Ok(ConvergenceReport {
        condition_holds: holds,
        h_ratio: h,
        radius_bound: Some(radius),
        u_star_distance_bound: Some(c.mu / c.l_const * series),
        diagnostic: (!holds).then(|| format!("required radius {radius} is not below rho = {}", c.rho)),
    })
}

fn check_positive(mu: f64, l_const: f64, s: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite() && l_const > 0.0 && l_const.is_finite()) {
        return Err(domain(format!("mu and L must be positive and finite, got {mu}, {l_const}")));
    }
    if !(s >= 0.0 && s.is_finite()) {
        return Err(domain(format!("s must be non-negative and finite, got {s}")));
    }
    Ok(())
}

/// Number of damped iterations of the `mu`/`L` step rule:
/// `max{0, ceil(2 L s / mu^2) - 2}`.
pub fn k_max_bound(mu: f64, l_const: f64, s: f64) -> Result<u64> {
    check_positive(mu, l_const, s)?;
    let t = ceil_snapped(2.0 * l_const * s / (mu * mu));
    Ok((t - 2.0).max(0.0) as u64)
}

/// `v = L s / mu^2 - k_max / 2`.
fn v_bar(mu: f64, l_const: f64, s: f64) -> Result<(u64, f64)> {
    let k_max = k_max_bound(mu, l_const, s)?;
    let v = l_const * s / (mu * mu) - k_max as f64 / 2.0;
    if !(0.0..1.0).contains(&v) {
        return Err(domain(format!("v = L s / mu^2 - k_max / 2 = {v} must lie in [0, 1)")));
    }
    Ok((k_max, v))
}

/// Iterations needed to reach `||P(u^k)||_inf <= eps`:
/// `k_max + ceil(log2(log_{v/2}(eps L / (2 mu^2))))`.
pub fn k_eps_bound(mu: f64, l_const: f64, s: f64, eps: f64) -> Result<u64> {
    let (k_max, v) = v_bar(mu, l_const, s)?;
    if v == 0.0 {
        return Err(domain("v = 0: the starting point is already a solution"));
    }
    if !(eps > 0.0) {
        return Err(domain(format!("eps must be positive, got {eps}")));
    }
    let target = eps * l_const / (2.0 * mu * mu);
    if target >= v / 2.0 {
        return Err(domain(format!(
            "eps L / (2 mu^2) = {target} must be below v / 2 = {}",
            v / 2.0
        )));
    }
    let inner = target.log2() / (v / 2.0).log2();
    Ok(k_max + ceil_snapped(inner.log2()) as u64)
}

/// Upper bound on `||u^k - u*||_1` for the `mu`/`L` step rule; at `k = 0`
/// from `u0 = 0` this bounds `||u*||_1`.
pub fn distance_estimate(k: u64, mu: f64, l_const: f64, s: f64) -> Result<f64> {
    let (k_max, v) = v_bar(mu, l_const, s)?;
    let scale = mu / l_const;
    if k < k_max {
        Ok(scale * ((k_max - k) as f64 + 2.0 * h0_series(v / 2.0)?))
    } else {
        let j = u32::try_from(k - k_max).unwrap_or(u32::MAX).min(64);
        Ok(2.0 * scale * h_tail(j, v / 2.0)?)
    }
}
