//! Numerical checks of the auxiliary estimates: a singular zone integral, a
//! lower bound on `e(n)`, and gradient bounds for boundary-vector functionals.

use num_complex::Complex64;
use rand::Rng;

use crate::bulk::{sphere_volume, BulkModel};
use crate::error::{invalid, Result};
use crate::lattice::{boundary_stats, Domain};
use crate::spectral::{apply_dirichlet, boundary_vector};

use super::{BoundReport, ReportInputs};

/// Finite-difference step in `k` for the gradient checks.
pub const FD_STEP: f64 = 1e-5;

/// `(2π)^{-d} ∫ |ε_k - ε_F|^{-1/4} dk` by the midpoint rule.
///
/// Cells that may contain the Fermi surface (`|ε - ε_F|` below the Lipschitz
/// constant of `ε_k` times the cell half-diagonal) are assigned the mean of
/// `|t|^{-1/4}` over `t ∈ [-δ, δ]`, i.e. `(4/3) δ^{-1/4}`.
pub fn fermi_singular_integral(bulk: &BulkModel, eps_f: f64) -> f64 {
    let d = bulk.dim() as f64;
    let h = 2.0 * std::f64::consts::PI / bulk.grid_points_per_axis() as f64;
    let delta = 2.0 * d.sqrt() * h * d.sqrt() / 2.0;
    let cap = 4.0 / 3.0 * delta.powf(-0.25);
    bulk.zone_mean(|e| {
        let t = (e - eps_f).abs();
        if t < delta {
            cap
        } else {
            t.powf(-0.25)
        }
    })
}

pub fn lemma_a_singular_check(bulk: &BulkModel, eps_f: f64) -> BoundReport {
    let value = fermi_singular_integral(bulk, eps_f);
    BoundReport::new(
        "appendix_a",
        2.0,
        value,
        0.0,
        ReportInputs {
            mu: Some(eps_f),
            ..Default::default()
        },
    )
}

/// `12 (9/10)^d n^{1+2/d} / |S_d|^{2/d}`.
pub fn lemma_a_energy_lower(n: f64, d: usize) -> f64 {
    let df = d as f64;
    12.0 * 0.9f64.powi(d as i32) * n.powf(1.0 + 2.0 / df) / sphere_volume(d).powf(2.0 / df)
}

/// `e(n) ≥ 12 (9/10)^d n^{1+2/d} / |S_d|^{2/d}` at one filling.
pub fn lemma_a_energy_check(bulk: &BulkModel, n: f64) -> Result<BoundReport> {
    let e = bulk.bulk_energy(n)?;
    Ok(BoundReport::new(
        "appendix_c",
        e,
        lemma_a_energy_lower(n, bulk.dim()),
        bulk.quadrature_delta(n)? + 1e-12,
        ReportInputs::default(),
    ))
}

fn inner(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

/// The four boundary-vector functionals whose `k`-gradients are bounded.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientFunctional {
    /// `‖b_k‖² / |∂Λ|`.
    NormSq,
    /// `‖(h_Λ - ε) b_k‖² / |∂Λ|`.
    Shifted,
    /// `(b_k, h_Λ b_k) / |∂Λ|`.
    Energy,
    /// `(b_k, h_Λ b_k) / ‖b_k‖²`.
    Rayleigh,
}

impl GradientFunctional {
    pub fn name(self) -> &'static str {
        match self {
            Self::NormSq => "appendix_d",
            Self::Shifted => "appendix_e",
            Self::Energy => "appendix_f",
            Self::Rayleigh => "appendix_g",
        }
    }
}

fn functional(domain: &Domain, k: &[f64], which: GradientFunctional, eps: f64) -> Result<f64> {
    let b = boundary_vector(domain, k)?;
    let boundary = boundary_stats(domain).boundary_size as f64;
    Ok(match which {
        GradientFunctional::NormSq => b.norm_sq / boundary,
        GradientFunctional::Shifted => {
            let hb = apply_dirichlet(domain, &b.values);
            let r: f64 = hb.iter().zip(&b.values).map(|(x, y)| (x - y * eps).norm_sqr()).sum();
            r / boundary
        }
        GradientFunctional::Energy => inner(&b.values, &apply_dirichlet(domain, &b.values)).re / boundary,
        GradientFunctional::Rayleigh => inner(&b.values, &apply_dirichlet(domain, &b.values)).re / b.norm_sq,
    })
}

/// Central-difference gradient norm of a functional at `k`.
pub fn gradient_norm(domain: &Domain, k: &[f64], which: GradientFunctional, eps: f64) -> Result<f64> {
    let mut sq = 0.0;
    let mut kp = k.to_vec();
    for i in 0..k.len() {
        kp[i] = k[i] + FD_STEP;
        let up = functional(domain, &kp, which, eps)?;
        kp[i] = k[i] - FD_STEP;
        let down = functional(domain, &kp, which, eps)?;
        kp[i] = k[i];
        sq += ((up - down) / (2.0 * FD_STEP)).powi(2);
    }
    Ok(sq.sqrt())
}

/// Gradient-bound report for one functional. For the Rayleigh quotient the
/// bound uses `η = min(1, ‖b_k‖²/|∂Λ|)`.
pub fn gradient_check(domain: &Domain, k: &[f64], which: GradientFunctional, eps: f64) -> Result<BoundReport> {
    if domain.is_empty() {
        return Err(invalid("empty domain"));
    }
    let d = domain.dim() as f64;
    let bound = match which {
        GradientFunctional::NormSq => 8.0 * d.powf(2.5),
        GradientFunctional::Shifted => 512.0 * d.powf(5.5),
        GradientFunctional::Energy => 32.0 * d.powf(3.5),
        GradientFunctional::Rayleigh => {
            let b = boundary_vector(domain, k)?;
            let eta = (b.norm_sq / boundary_stats(domain).boundary_size as f64).min(1.0);
            if eta < 1e-8 {
                return Err(invalid("‖b_k‖² vanishes; the quotient is undefined at this k"));
            }
            256.0 * d.powf(5.5) / (eta * eta)
        }
    };
    let g = gradient_norm(domain, k, which, eps)?;
    Ok(BoundReport::new(
        which.name(),
        bound,
        g,
        1e-6 * bound,
        ReportInputs {
            domain_hash: Some(domain.fingerprint()),
            ..Default::default()
        },
    ))
}

/// All four gradient checks at a random `k` (and random `ε ∈ [0, 4d]` for the shifted one).
pub fn gradient_checks_random<R: Rng>(domain: &Domain, rng: &mut R) -> Result<Vec<BoundReport>> {
    let d = domain.dim();
    let pi = std::f64::consts::PI;
    let mut out = Vec::with_capacity(4);
    for which in [
        GradientFunctional::NormSq,
        GradientFunctional::Shifted,
        GradientFunctional::Energy,
        GradientFunctional::Rayleigh,
    ] {
        // Redraw k until the Rayleigh quotient is defined.
        loop {
            let k: Vec<f64> = (0..d).map(|_| rng.random_range(-pi..pi)).collect();
            let eps = rng.random_range(0.0..4.0 * d as f64);
            match gradient_check(domain, &k, which, eps) {
                Ok(r) => {
                    out.push(r);
                    break;
                }
                Err(_) if which == GradientFunctional::Rayleigh => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}
