//! Inequality checks on concrete domains.

use crate::bulk::BulkModel;
use crate::error::{invalid, Error, Result};
use crate::lattice::{boundary_stats, Domain, Torus};
use crate::spectral::{
    build_dirichlet, build_screened, eigenvalues_capped, free_energy, level_free_energy,
    DEFAULT_EIGENSOLVER_CAP,
};

use super::constants::{
    alpha, alpha_closed_form_regime, c_const, c_prime, free_energy_surface_term,
    gamma, gamma_bar,
};
use super::{BoundReport, ReportInputs};

const BASE_TOL: f64 = 1e-8;

/// Rounding allowance for a sum of `levels` eigenvalues of an operator with norm `norm`.
fn eigen_tol(levels: usize, norm: f64) -> f64 {
    1e-12 * (levels as f64 + 1.0) * norm.max(1.0)
}

/// Bulk model plus eigensolver settings shared by the checks.
#[derive(Clone, Debug)]
pub struct Checker {
    pub bulk: BulkModel,
    pub eigensolver_cap: usize,
    coarse: BulkModel,
}

impl Checker {
    pub fn new(bulk: BulkModel) -> Self {
        let coarse = bulk.coarser().expect("coarser grid of a valid model is valid");
        Self {
            bulk,
            eigensolver_cap: DEFAULT_EIGENSOLVER_CAP,
            coarse,
        }
    }

    pub fn with_eigensolver_cap(mut self, cap: usize) -> Self {
        self.eigensolver_cap = cap;
        self
    }

    /// `|e_M(n) - e_{M/2}(n)|`.
    pub fn quadrature_delta(&self, n: f64) -> Result<f64> {
        Ok((self.bulk.bulk_energy(n)? - self.coarse.bulk_energy(n)?).abs())
    }

    pub fn with_default_grid(d: usize) -> Result<Self> {
        Ok(Self::new(BulkModel::with_default_grid(d)?))
    }

    fn dim(&self) -> usize {
        self.bulk.dim()
    }

    fn check_dim(&self, d: usize) -> Result<()> {
        if d != self.dim() {
            return Err(invalid(format!(
                "domain has dimension {d} but the bulk model has dimension {}",
                self.dim()
            )));
        }
        Ok(())
    }

    pub fn dirichlet_spectrum(&self, domain: &Domain) -> Result<Vec<f64>> {
        eigenvalues_capped(&build_dirichlet(domain), self.eigensolver_cap)
    }

    pub fn screened_spectrum(&self, torus: &Torus, lambda: &Domain, u: f64) -> Result<Vec<f64>> {
        eigenvalues_capped(&build_screened(torus, lambda, u)?, self.eigensolver_cap)
    }

    /// `|f_M - f_{M/2}|` at `(β, μ)`.
    pub fn free_energy_delta(&self, beta: f64, mu: f64) -> Result<f64> {
        Ok((self.bulk.free_energy_per_site(beta, mu)? - self.coarse.free_energy_per_site(beta, mu)?).abs())
    }

    /// Energy sandwich for one domain, filling and repulsion (`None` = infinite).
    ///
    /// Returns `[upper, lower]`. The lower report uses `α(n)` only where its
    /// closed form is proven and is then named `theorem1_lower`; elsewhere it
    /// uses `α = 0` and is named `theorem1_lower_bulk`.
    pub fn theorem1_check(&self, domain: &Domain, n_el: usize, u: Option<f64>) -> Result<[BoundReport; 2]> {
        self.check_dim(domain.dim())?;
        if n_el > domain.len() {
            return Err(invalid(format!("N = {n_el} exceeds |Λ| = {}", domain.len())));
        }
        let (energy, gam) = match u {
            None => {
                let ev = self.dirichlet_spectrum(domain)?;
                (ev[..n_el].iter().sum::<f64>(), 0.0)
            }
            Some(u) if u.is_infinite() => {
                let ev = self.dirichlet_spectrum(domain)?;
                (ev[..n_el].iter().sum::<f64>(), 0.0)
            }
            Some(u) => {
                let torus = domain
                    .ambient()
                    .ok_or_else(|| invalid("finite U requires a domain embedded in a torus"))?;
                let ev = self.screened_spectrum(torus, domain, u)?;
                (ev[..n_el].iter().sum::<f64>(), gamma(u, self.dim())?)
            }
        };
        let norm = 4.0 * self.dim() as f64 + u.filter(|v| v.is_finite()).unwrap_or(0.0);
        Ok(self.theorem1_reports(domain, n_el, energy, gam, u, norm))
    }

    fn theorem1_reports(
        &self,
        domain: &Domain,
        n_el: usize,
        energy: f64,
        gam: f64,
        u: Option<f64>,
        norm: f64,
    ) -> [BoundReport; 2] {
        let d = self.dim();
        let vol = domain.len() as f64;
        let boundary = boundary_stats(domain).boundary_size as f64;
        let n = n_el as f64 / vol;
        let e_n = self.bulk.bulk_energy(n).expect("filling in range");
        let tol = vol * self.quadrature_delta(n).expect("valid model")
            + BASE_TOL
            + eigen_tol(n_el, norm);
        let inputs = ReportInputs {
            domain_hash: Some(domain.fingerprint()),
            n_electrons: Some(n_el),
            u: Some(u.unwrap_or(f64::INFINITY)),
            ..Default::default()
        };
        let upper = BoundReport::new(
            "theorem1_upper",
            vol * e_n + boundary * (2.0 * d as f64 * n - e_n),
            energy,
            tol,
            inputs.clone(),
        );
        let (name, a) = if alpha_closed_form_regime(n, d) {
            ("theorem1_lower", alpha(n, d).expect("filling in range"))
        } else {
            ("theorem1_lower_bulk", 0.0)
        };
        let lower = BoundReport::new(name, energy - vol * e_n, (a - gam) * boundary, tol, inputs);
        [upper, lower]
    }

    /// [`Self::theorem1_check`] at infinite repulsion for every `N = 0..=|Λ|` from one eigensolve.
    pub fn theorem1_all_fillings(&self, domain: &Domain) -> Result<Vec<[BoundReport; 2]>> {
        self.check_dim(domain.dim())?;
        let ev = self.dirichlet_spectrum(domain)?;
        let norm = 4.0 * self.dim() as f64;
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(ev.len() + 1);
        for n_el in 0..=ev.len() {
            if n_el > 0 {
                acc += ev[n_el - 1];
            }
            out.push(self.theorem1_reports(domain, n_el, acc, 0.0, None, norm));
        }
        Ok(out)
    }

    /// `E^U_{Λ,N} ≥ E_{Λ,N} - γ(U)|∂Λ|`, with `E_{Λ,N}` the Dirichlet sum inside the torus.
    pub fn prop41_check(&self, torus: &Torus, lambda: &Domain, n_el: usize, u: f64) -> Result<BoundReport> {
        self.check_dim(torus.dim())?;
        let gam = gamma(u, self.dim())?;
        if n_el > lambda.len() {
            return Err(invalid(format!("N = {n_el} exceeds |Λ| = {}", lambda.len())));
        }
        let screened: f64 = self.screened_spectrum(torus, lambda, u)?[..n_el].iter().sum();
        let dirichlet: f64 = self.dirichlet_spectrum(lambda)?[..n_el].iter().sum();
        let boundary = boundary_stats(lambda).boundary_size as f64;
        Ok(BoundReport::new(
            "prop41",
            screened,
            dirichlet - gam * boundary,
            BASE_TOL + eigen_tol(n_el, 4.0 * self.dim() as f64 + u),
            ReportInputs {
                domain_hash: Some(lambda.fingerprint()),
                n_electrons: Some(n_el),
                u: Some(u),
                ..Default::default()
            },
        ))
    }

    fn free_energies(&self, torus: &Torus, lambda: &Domain, beta: f64, mu: f64, u: f64) -> Result<FreeEnergies> {
        self.check_dim(torus.dim())?;
        let f_u = free_energy(&self.screened_spectrum(torus, lambda, u)?, beta, mu)?;
        let f_lambda = free_energy(&self.dirichlet_spectrum(lambda)?, beta, mu)?;
        let f_rest = match lambda.complement() {
            Some(rest) => free_energy(&self.dirichlet_spectrum(&rest)?, beta, mu - u)?,
            None => 0.0,
        };
        Ok(FreeEnergies { f_u, f_lambda, f_rest })
    }

    fn thermal_inputs(lambda: &Domain, beta: f64, mu: f64, u: f64) -> ReportInputs {
        ReportInputs {
            domain_hash: Some(lambda.fingerprint()),
            beta: Some(beta),
            mu: Some(mu),
            u: Some(u),
            ..Default::default()
        }
    }

    /// Free-energy sandwich on a torus. Returns
    /// `[theorem2_upper, prop62_lower, prop61_weak]`.
    pub fn theorem2_check(&self, torus: &Torus, lambda: &Domain, beta: f64, mu: f64, u: f64) -> Result<Vec<BoundReport>> {
        let d = self.dim();
        let gb = gamma_bar(u, d)?;
        let fe = self.free_energies(torus, lambda, beta, mu, u)?;
        let vol = lambda.len() as f64;
        let omega = torus.volume() as f64;
        let boundary = boundary_stats(lambda).boundary_size as f64;
        let f_in = self.bulk.free_energy_per_site(beta, mu)?;
        let f_out = self.bulk.free_energy_per_site(beta, mu - u)?;
        let quad = vol * self.free_energy_delta(beta, mu)? + (omega - vol) * self.free_energy_delta(beta, mu - u)?;
        let spec_tol = eigen_tol(torus.volume(), 4.0 * d as f64 + u);
        let tol = BASE_TOL + quad + spec_tol;
        let inputs = Self::thermal_inputs(lambda, beta, mu, u);
        let bulk_part = vol * f_in + (omega - vol) * f_out;
        let upper = BoundReport::new(
            "theorem2_upper",
            c_const(beta, mu, d) * boundary + c_prime(beta, mu, u, d) * omega.powf(1.0 - 1.0 / d as f64),
            fe.f_u - bulk_part,
            tol,
            inputs.clone(),
        );
        let lower = BoundReport::new(
            "prop62_lower",
            fe.f_u,
            fe.f_lambda + fe.f_rest - gb * boundary,
            BASE_TOL + spec_tol,
            inputs.clone(),
        );
        let weak = BoundReport::new(
            "prop61_weak",
            fe.f_lambda - vol * f_in,
            0.0,
            BASE_TOL + vol * self.free_energy_delta(beta, mu)? + spec_tol,
            inputs,
        );
        Ok(vec![upper, lower, weak])
    }

    /// `F_Λ(β,μ) + F_{Ω∖Λ}(β,μ-U) ≥ F^U_{Ω,Λ}(β,μ)`; an empty complement contributes 0.
    pub fn decorrelation_check(&self, torus: &Torus, lambda: &Domain, beta: f64, mu: f64, u: f64) -> Result<BoundReport> {
        let fe = self.free_energies(torus, lambda, beta, mu, u)?;
        Ok(BoundReport::new(
            "decorrelation",
            fe.f_lambda + fe.f_rest,
            fe.f_u,
            BASE_TOL,
            Self::thermal_inputs(lambda, beta, mu, u),
        ))
    }

    /// `|Λ| f + (4π√d/|S_d|^{1/d} |Λ|^{(d-1)/d} + 2d|∂Λ|)/(1+e^{-βμ}) ≥ F_Λ`.
    pub fn prop63_second_check(&self, domain: &Domain, beta: f64, mu: f64) -> Result<BoundReport> {
        self.check_dim(domain.dim())?;
        let d = self.dim();
        let f_lambda = free_energy(&self.dirichlet_spectrum(domain)?, beta, mu)?;
        let vol = domain.len();
        let boundary = boundary_stats(domain).boundary_size;
        let lhs = vol as f64 * self.bulk.free_energy_per_site(beta, mu)?
            + free_energy_surface_term(vol, boundary, beta, mu, d);
        let tol = BASE_TOL + vol as f64 * self.free_energy_delta(beta, mu)? + eigen_tol(vol, 4.0 * d as f64);
        Ok(BoundReport::new(
            "prop63_second",
            lhs,
            f_lambda,
            tol,
            ReportInputs {
                domain_hash: Some(domain.fingerprint()),
                beta: Some(beta),
                mu: Some(mu),
                u: Some(f64::INFINITY),
                ..Default::default()
            },
        ))
    }

    /// Level averages `e_j*` shifted by `scale · (|∂Λ|/|Λ|) · ∫dμ_j a(ε)`, where
    /// `∫dμ_j a = M[α(j/M) - α((j-1)/M)]` by construction of `a`.
    pub fn perturbed_level_averages(&self, domain: &Domain, scale: f64) -> Result<Vec<f64>> {
        let levels = domain.len();
        let d = self.dim();
        let mut e = self.bulk.level_set_averages(levels)?;
        if scale != 0.0 {
            let m = levels as f64;
            let ratio = boundary_stats(domain).boundary_size as f64 / m;
            for (j, slot) in e.iter_mut().enumerate() {
                let inc = alpha((j + 1) as f64 / m, d)? - alpha(j as f64 / m, d)?;
                *slot += scale * ratio * m * inc;
            }
        }
        Ok(e)
    }

    /// Concavity comparison of the Dirichlet spectrum with the level averages of
    /// the same size, at `(β, μ)`.
    pub fn majorization_domain_check(&self, domain: &Domain, beta: f64, mu: f64) -> Result<BoundReport> {
        self.check_dim(domain.dim())?;
        let e = self.dirichlet_spectrum(domain)?;
        let star = self.perturbed_level_averages(domain, 0.0)?;
        let vol = domain.len() as f64;
        let quad = (1..=domain.len())
            .map(|j| self.quadrature_delta(j as f64 / vol))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        let tol = BASE_TOL + vol * quad + eigen_tol(domain.len(), 4.0 * self.dim() as f64);
        let mut r = majorization_check(&e, &star, beta, mu, tol)?;
        r.inputs.domain_hash = Some(domain.fingerprint());
        r.inputs.u = Some(f64::INFINITY);
        Ok(r)
    }
}

struct FreeEnergies {
    f_u: f64,
    f_lambda: f64,
    f_rest: f64,
}

/// `Σ g(e_j) ≥ Σ g(e'_j)` for the concave `g(e) = -(1/β) log(1 + e^{-β(e-μ)})`.
///
/// Both sequences must be nondecreasing and of equal length, with the partial
/// sums of `e` dominating those of `e'` and equal totals, all up to `tol`.
/// A failed precondition is returned as [`Error::MajorizationPrecondition`].
pub fn majorization_check(e: &[f64], e_prime: &[f64], beta: f64, mu: f64, tol: f64) -> Result<BoundReport> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be > 0, got {beta}")));
    }
    if e.len() != e_prime.len() {
        return Err(invalid(format!(
            "sequences have different lengths {} and {}",
            e.len(),
            e_prime.len()
        )));
    }
    for seq in [e, e_prime] {
        if let Some(i) = seq.windows(2).position(|w| w[1] < w[0] - tol) {
            return Err(Error::MajorizationPrecondition {
                index: i + 1,
                lhs: seq[i + 1],
                rhs: seq[i],
            });
        }
    }
    let (mut s, mut sp) = (0.0, 0.0);
    for (i, (a, b)) in e.iter().zip(e_prime).enumerate() {
        s += a;
        sp += b;
        if s < sp - tol {
            return Err(Error::MajorizationPrecondition { index: i, lhs: s, rhs: sp });
        }
    }
    if (s - sp).abs() > tol {
        return Err(Error::MajorizationPrecondition {
            index: e.len(),
            lhs: s,
            rhs: sp,
        });
    }
    let g = |x: &f64| level_free_energy(*x, beta, mu);
    Ok(BoundReport::new(
        "majorization",
        e.iter().map(g).sum(),
        e_prime.iter().map(g).sum(),
        tol,
        ReportInputs {
            n_electrons: Some(e.len()),
            beta: Some(beta),
            mu: Some(mu),
            ..Default::default()
        },
    ))
}
