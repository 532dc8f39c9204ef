//! Explicit constants of the energy and free-energy bounds.

use serde::Serialize;

use crate::bulk::{sphere_volume, BulkModel};
use crate::error::{invalid, Result};
use crate::spectral::fermi_occupation;

/// Filling below which the closed form of [`alpha`] applies: `|S_d| / (4π)^d`.
pub fn n_star(d: usize) -> f64 {
    sphere_volume(d) / (4.0 * std::f64::consts::PI).powi(d as i32)
}

fn alpha_closed(n: f64, d: usize) -> f64 {
    let df = d as f64;
    let pi = std::f64::consts::PI;
    let pref = 2f64.powi(d as i32 - 3) / (pi.powi(d as i32) * df.powi(3) * sphere_volume(d).powf(2.0 / df));
    pref * n.powf(1.0 + 2.0 / df)
}

fn check_filling(n: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&n) {
        return Err(invalid(format!("filling must lie in [0, 1], got {n}")));
    }
    Ok(())
}

/// Whether `n` lies where the closed form of `α` is proven (`n ≤ n*` or `n ≥ 1 - n*`).
pub fn alpha_closed_form_regime(n: f64, d: usize) -> bool {
    let ns = n_star(d);
    n <= ns || n >= 1.0 - ns
}

/// Boundary constant `α(n)`, extended as the constant `α(n*)` on the middle
/// band and mirrored so that `α(1-n) = α(n)`.
pub fn alpha(n: f64, d: usize) -> Result<f64> {
    check_filling(n)?;
    let m = n.min(1.0 - n);
    Ok(alpha_closed(m.min(n_star(d)), d))
}

/// `dα/dn` of the extended `α`; zero on the middle band, odd about `n = ½`.
pub fn alpha_prime(n: f64, d: usize) -> Result<f64> {
    check_filling(n)?;
    let ns = n_star(d);
    let slope = |m: f64| (1.0 + 2.0 / d as f64) * alpha_closed(m, d) / m;
    Ok(if n > 0.0 && n <= ns {
        slope(n)
    } else if n < 1.0 && n >= 1.0 - ns {
        -slope(1.0 - n)
    } else {
        0.0
    })
}

fn check_u(u: f64, d: usize) -> Result<()> {
    if !(u > 4.0 * d as f64) || !u.is_finite() {
        return Err(invalid(format!("U must be finite and > 4d = {}, got {u}", 4 * d)));
    }
    Ok(())
}

/// `η(U) = (U-2d)^{2d} / (U(U-4d))^d - 1`.
pub fn eta(u: f64, d: usize) -> Result<f64> {
    check_u(u, d)?;
    let t = 2.0 * d as f64;
    // (U-2d)²/(U(U-4d)) = 1 + x; ratio^d - 1 without cancellation for large U.
    let x = t * t / (u * (u - 2.0 * t));
    Ok((d as f64 * x.ln_1p()).exp_m1())
}

/// The finite-sum form `(2d/(U-2d))² Σ_{j=1}^d ((U-2d)²/(U(U-4d)))^j`.
pub fn eta_sum_form(u: f64, d: usize) -> Result<f64> {
    check_u(u, d)?;
    let t = 2.0 * d as f64;
    let ratio = (u - t).powi(2) / (u * (u - 2.0 * t));
    let sum: f64 = (1..=d as i32).map(|j| ratio.powi(j)).sum();
    Ok((t / (u - t)).powi(2) * sum)
}

/// `γ(U) = 8d²/(U-2d) + d 2^{d+2} η(U)`.
pub fn gamma(u: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    Ok(8.0 * df * df / (u - 2.0 * df) + df * 2f64.powi(d as i32 + 2) * eta(u, d)?)
}

/// `γ̄(U) = (2dU + 4d + 8d²) 2^d η(U) + (4d)²/(U-2d)`.
pub fn gamma_bar(u: f64, d: usize) -> Result<f64> {
    let df = d as f64;
    let e = eta(u, d)?;
    Ok((2.0 * df * u + 4.0 * df + 8.0 * df * df) * 2f64.powi(d as i32) * e
        + (4.0 * df).powi(2) / (u - 2.0 * df))
}

fn surface_coefficient(d: usize) -> f64 {
    4.0 * std::f64::consts::PI * (d as f64).sqrt() / sphere_volume(d).powf(1.0 / d as f64)
}

/// `C_{d,μ} = (4π√d/|S_d|^{1/d} + 2d(2d+1)) / (1 + e^{-βμ})`.
pub fn c_const(beta: f64, mu: f64, d: usize) -> f64 {
    let df = d as f64;
    (surface_coefficient(d) + 2.0 * df * (2.0 * df + 1.0)) * fermi_occupation(0.0, beta, mu)
}

/// `C'_{d,μ} = (4π√d/|S_d|^{1/d}) / (1 + e^{-β(μ-U)})`.
pub fn c_prime(beta: f64, mu: f64, u: f64, d: usize) -> f64 {
    surface_coefficient(d) * fermi_occupation(0.0, beta, mu - u)
}

/// Bound on the free energy of a domain:
/// `|Λ| f + (4π√d/|S_d|^{1/d} |Λ|^{(d-1)/d} + 2d|∂Λ|) / (1 + e^{-βμ})`, minus `|Λ| f`.
pub fn free_energy_surface_term(volume: usize, boundary: usize, beta: f64, mu: f64, d: usize) -> f64 {
    let df = d as f64;
    (surface_coefficient(d) * (volume as f64).powf((df - 1.0) / df) + 2.0 * df * boundary as f64)
        * fermi_occupation(0.0, beta, mu)
}

/// Snapshot of every constant at one parameter point.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsTable {
    pub d: usize,
    pub n: f64,
    pub u: f64,
    pub beta: f64,
    pub mu: f64,
    pub n_star: f64,
    pub alpha: f64,
    pub eta: f64,
    pub gamma: f64,
    pub gamma_bar: f64,
    pub c: f64,
    pub c_prime: f64,
}

impl ConstantsTable {
    pub fn new(d: usize, n: f64, u: f64, beta: f64, mu: f64) -> Result<Self> {
        Ok(Self {
            d,
            n,
            u,
            beta,
            mu,
            n_star: n_star(d),
            alpha: alpha(n, d)?,
            eta: eta(u, d)?,
            gamma: gamma(u, d)?,
            gamma_bar: gamma_bar(u, d)?,
            c: c_const(beta, mu, d),
            c_prime: c_prime(beta, mu, u, d),
        })
    }
}

/// `a(ε) = α'(n(ε))`, the derivative of the extended `α` along the bulk filling.
pub fn a_of_eps(bulk: &BulkModel, eps: f64) -> Result<f64> {
    let d = bulk.dim();
    if !(0.0..=4.0 * d as f64).contains(&eps) {
        return Err(invalid(format!("ε must lie in [0, 4d], got {eps}")));
    }
    alpha_prime(bulk.density(eps), d)
}

/// Diagnostic estimate of the free-energy boundary constant.
///
/// `L = (2π)^{-d} ∫_{ε_k<2d} a(ε_k)[g'(ε_k) - g'(4d-ε_k)]` is the linear term and
/// `Q = (β/8)(2π)^{-d} ∫ a(ε_k)²` bounds the quadratic one; the returned value is
/// `s L` with `s = min(1, L/(2Q))`, which keeps `s² Q ≤ s L / 2`.
pub fn alpha_bar_estimate(bulk: &BulkModel, beta: f64, mu: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be > 0, got {beta}")));
    }
    let d = bulk.dim();
    let top = 4.0 * d as f64;
    let a = |e: f64| alpha_prime(bulk.density(e), d).unwrap_or(0.0);
    let linear = bulk.zone_mean(|e| {
        if e < 0.5 * top {
            a(e) * (fermi_occupation(e, beta, mu) - fermi_occupation(top - e, beta, mu))
        } else {
            0.0
        }
    });
    let quad = beta / 8.0 * bulk.zone_mean(|e| a(e).powi(2));
    if linear <= 0.0 || quad <= 0.0 {
        return Ok(linear.max(0.0));
    }
    let s = (linear / (2.0 * quad)).min(1.0);
    Ok(s * linear)
}
