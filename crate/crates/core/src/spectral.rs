//! One-particle lattice operators and everything derived from their spectra.
//!
//! Two operators are built here:
//!
//! * the Dirichlet Laplacian `h_Λ` on a domain (electrons confined to the holes,
//!   infinite repulsion), with hopping `-1` between neighbors and `2d` on the
//!   diagonal;
//! * the screened operator `h^U` on a whole torus, which adds `U` on the sites
//!   occupied by classical particles.
//!
//! Ground-state sums, grand-canonical free energies, momentum densities and
//! decay profiles are all computed from the one-particle spectrum.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::lattice::{boundary_stats, Domain, Site, Torus};

/// Default largest matrix dimension the dense eigensolver accepts.
pub const DEFAULT_EIGENSOLVER_CAP: usize = 4096;

/// Eigenvalues closer than this are treated as one degenerate cluster.
pub const DEGENERACY_GAP: f64 = 1e-8;

const RESIDUAL_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OperatorKind {
    Dirichlet,
    Screened { u: f64 },
}

/// A real symmetric lattice operator with its site ordering.
#[derive(Clone, Debug)]
pub struct LatticeOperator {
    pub kind: OperatorKind,
    pub sites: Vec<Site>,
    pub matrix: DMatrix<f64>,
    pub dim: usize,
}

impl LatticeOperator {
    pub fn size(&self) -> usize {
        self.sites.len()
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }
}

/// `h_Λ`: hopping `-1` between neighbors inside `Λ`, diagonal `2d`.
pub fn build_dirichlet(domain: &Domain) -> LatticeOperator {
    let n = domain.len();
    let d = domain.dim();
    let mut m = DMatrix::zeros(n, n);
    for (i, x) in domain.sites().iter().enumerate() {
        m[(i, i)] = 2.0 * d as f64;
        for y in domain.neighbors(x) {
            if let Some(j) = domain.position(&y) {
                m[(i, j)] -= 1.0;
            }
        }
    }
    LatticeOperator {
        kind: OperatorKind::Dirichlet,
        sites: domain.sites().to_vec(),
        matrix: m,
        dim: d,
    }
}

/// `h^U` on the whole torus: periodic hopping, diagonal `2d + U·1{x ∉ Λ}`.
pub fn build_screened(torus: &Torus, lambda: &Domain, u: f64) -> Result<LatticeOperator> {
    if !(u >= 0.0) || !u.is_finite() {
        return Err(invalid(format!("U must be finite and >= 0, got {u}")));
    }
    let mask = embedded_mask(torus, lambda)?;
    let v = torus.volume();
    let d = torus.dim();
    let mut m = DMatrix::zeros(v, v);
    for i in 0..v {
        m[(i, i)] = 2.0 * d as f64 + if mask[i] { 0.0 } else { u };
        for j in torus.neighbor_indices(i) {
            m[(i, j)] -= 1.0;
        }
    }
    Ok(LatticeOperator {
        kind: OperatorKind::Screened { u },
        sites: (0..v).map(|i| torus.site_at(i)).collect(),
        matrix: m,
        dim: d,
    })
}

pub(crate) fn embedded_mask(torus: &Torus, lambda: &Domain) -> Result<Vec<bool>> {
    match lambda.ambient() {
        Some(t) if t == torus => Ok(lambda.mask().expect("embedded")),
        _ => Err(invalid(format!("domain is not embedded in torus {torus}"))),
    }
}

/// Sorted eigenvalues and orthonormal eigenvectors (as columns, aligned with the operator's sites).
#[derive(Clone, Debug)]
pub struct Spectrum {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: DMatrix<f64>,
    /// Largest `‖Hφ_j - e_jφ_j‖` observed.
    pub max_residual: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn ground_energy(&self, n: usize) -> Result<f64> {
        ground_energy(&self.eigenvalues, n)
    }

    /// Half-open index ranges of numerically degenerate eigenvalue clusters.
    pub fn clusters(&self) -> Vec<(usize, usize)> {
        clusters(&self.eigenvalues)
    }

    /// Weights in `[0,1]` for the lowest `n` states, spread uniformly over a
    /// degenerate cluster cut by `n` so that derived quantities do not depend
    /// on the basis chosen inside the cluster.
    pub fn occupation_weights(&self, n: usize) -> Vec<f64> {
        let mut w = vec![0.0; self.len()];
        for (a, b) in self.clusters() {
            if b <= n {
                w[a..b].fill(1.0);
            } else if a < n {
                w[a..b].fill((n - a) as f64 / (b - a) as f64);
            }
        }
        w
    }
}

fn clusters(values: &[f64]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || values[i] - values[i - 1] >= DEGENERACY_GAP {
            out.push((start, i));
            start = i;
        }
    }
    out
}

fn check_cap(op: &LatticeOperator, cap: usize) -> Result<()> {
    if op.size() > cap {
        return Err(Error::MatrixTooLarge {
            dim: op.size(),
            cap,
        });
    }
    Ok(())
}

/// Full dense diagonalization (Householder tridiagonalization + implicit QR).
pub fn eigensolve(op: &LatticeOperator) -> Result<Spectrum> {
    eigensolve_capped(op, DEFAULT_EIGENSOLVER_CAP)
}

pub fn eigensolve_capped(op: &LatticeOperator, cap: usize) -> Result<Spectrum> {
    check_cap(op, cap)?;
    let n = op.size();
    let eig = SymmetricEigen::try_new(op.matrix.clone(), f64::EPSILON, 1000 * n.max(1))
        .ok_or(Error::NoConvergence {
            residual: f64::NAN,
        })?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (col, &i) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(i));
    }

    for (a, b) in clusters(&eigenvalues) {
        if b - a > 1 {
            reorthonormalize(&mut vectors, a, b);
        }
    }

    let norm = eigenvalues
        .iter()
        .fold(0.0f64, |m, e| m.max(e.abs()))
        .max(1.0);
    let hv = &op.matrix * &vectors;
    let mut max_residual = 0.0f64;
    for (j, &e) in eigenvalues.iter().enumerate() {
        let r = (hv.column(j) - vectors.column(j) * e).norm();
        max_residual = max_residual.max(r);
    }
    if max_residual > RESIDUAL_TOL * norm {
        return Err(Error::NoConvergence {
            residual: max_residual,
        });
    }
    Ok(Spectrum {
        eigenvalues,
        eigenvectors: vectors,
        max_residual,
    })
}

/// Eigenvalues only, ascending.
pub fn eigenvalues(op: &LatticeOperator) -> Result<Vec<f64>> {
    eigenvalues_capped(op, DEFAULT_EIGENSOLVER_CAP)
}

pub fn eigenvalues_capped(op: &LatticeOperator, cap: usize) -> Result<Vec<f64>> {
    check_cap(op, cap)?;
    let mut ev: Vec<f64> = op.matrix.clone().symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

fn reorthonormalize(v: &mut DMatrix<f64>, a: usize, b: usize) {
    for j in a..b {
        let mut col: DVector<f64> = v.column(j).into_owned();
        for i in a..j {
            let proj = v.column(i).dot(&col);
            col -= v.column(i) * proj;
        }
        let nrm = col.norm();
        v.set_column(j, &(col / nrm));
    }
}

/// Sum of the `n` smallest eigenvalues of an ascending list.
pub fn ground_energy(eigenvalues: &[f64], n: usize) -> Result<f64> {
    if n > eigenvalues.len() {
        return Err(invalid(format!(
            "N = {n} exceeds the number of levels {}",
            eigenvalues.len()
        )));
    }
    Ok(eigenvalues[..n].iter().sum())
}

/// `Σ_{|x-y|=1} |φ(x) - φ(y)|²` over all bonds, with `φ = 0` off the domain.
pub fn quadratic_form(domain: &Domain, phi: &[Complex64]) -> Result<f64> {
    if phi.len() != domain.len() {
        return Err(invalid("phi must have one value per domain site"));
    }
    let mut total = 0.0;
    for (i, x) in domain.sites().iter().enumerate() {
        for y in domain.neighbors(x) {
            match domain.position(&y) {
                Some(j) if j > i => total += (phi[i] - phi[j]).norm_sqr(),
                Some(_) => {}
                None => total += phi[i].norm_sqr(),
            }
        }
    }
    Ok(total)
}

fn dot_k(k: &[f64], x: &[i64]) -> f64 {
    k.iter().zip(x).map(|(a, &b)| a * b as f64).sum()
}

/// Boundary vector `b_k(x) = e^{-ikx} Σ_{e: x+e ∉ Λ} e^{-ike}` on `∂Λ`.
#[derive(Clone, Debug)]
pub struct BoundaryVector {
    pub k: Vec<f64>,
    /// Values aligned with the domain's site list; zero off the boundary.
    pub values: Vec<Complex64>,
    pub norm_sq: f64,
}

pub fn boundary_vector(domain: &Domain, k: &[f64]) -> Result<BoundaryVector> {
    if k.len() != domain.dim() {
        return Err(invalid("k must have one component per axis"));
    }
    let d = domain.dim();
    let mut values = vec![Complex64::new(0.0, 0.0); domain.len()];
    for (i, x) in domain.sites().iter().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for axis in 0..d {
            for delta in [-1i64, 1] {
                let mut y = x.coords().to_vec();
                y[axis] += delta;
                let y = match domain.ambient() {
                    Some(t) => t.wrap(&y),
                    None => Site(y),
                };
                if !domain.contains(&y) {
                    acc += Complex64::from_polar(1.0, -k[axis] * delta as f64);
                }
            }
        }
        values[i] = Complex64::from_polar(1.0, -dot_k(k, x.coords())) * acc;
    }
    let norm_sq = values.iter().map(|v| v.norm_sqr()).sum();
    Ok(BoundaryVector {
        k: k.to_vec(),
        values,
        norm_sq,
    })
}

/// `h_Λ v` for a complex vector on the domain.
pub fn apply_dirichlet(domain: &Domain, v: &[Complex64]) -> Vec<Complex64> {
    let two_d = 2.0 * domain.dim() as f64;
    domain
        .sites()
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let mut acc = v[i] * two_d;
            for y in domain.neighbors(x) {
                if let Some(j) = domain.position(&y) {
                    acc -= v[j];
                }
            }
            acc
        })
        .collect()
}

/// Midpoints `-π + (i + ½)·2π/G` of a uniform grid over `[-π, π]`.
pub fn k_axis(points: usize) -> Vec<f64> {
    let h = 2.0 * std::f64::consts::PI / points as f64;
    (0..points)
        .map(|i| -std::f64::consts::PI + (i as f64 + 0.5) * h)
        .collect()
}

/// `ρ(k) = Σ_{j ≤ N} |φ̂_j(k)|²` sampled on a uniform grid.
#[derive(Clone, Debug)]
pub struct MomentumDensity {
    pub dim: usize,
    pub points_per_axis: usize,
    /// Row-major over the grid, first axis most significant.
    pub values: Vec<f64>,
    pub n_electrons: usize,
}

impl MomentumDensity {
    /// `(2π)^{-d} ∫ ρ`, by the midpoint rule.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Momentum density from the spectrum of `build_dirichlet(domain)`; uses the
/// transform `φ̂(k) = Σ_x φ(x) e^{ikx}` evaluated directly on the grid.
pub fn momentum_density(
    spec: &Spectrum,
    domain: &Domain,
    n: usize,
    points_per_axis: usize,
) -> Result<MomentumDensity> {
    if spec.len() != domain.len() {
        return Err(invalid("spectrum does not belong to this domain"));
    }
    if n > spec.len() {
        return Err(invalid(format!("N = {n} exceeds |Λ| = {}", spec.len())));
    }
    if points_per_axis == 0 {
        return Err(invalid("grid needs at least one point per axis"));
    }
    let d = domain.dim();
    let axis = k_axis(points_per_axis);
    let weights = spec.occupation_weights(n);
    let active: Vec<usize> = (0..spec.len()).filter(|&j| weights[j] > 0.0).collect();
    let total = points_per_axis.pow(d as u32);
    let mut values = Vec::with_capacity(total);
    let mut phases = vec![Complex64::new(0.0, 0.0); domain.len()];
    let mut k = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for ax in (0..d).rev() {
            k[ax] = axis[rem % points_per_axis];
            rem /= points_per_axis;
        }
        for (i, x) in domain.sites().iter().enumerate() {
            phases[i] = Complex64::from_polar(1.0, dot_k(&k, x.coords()));
        }
        let mut rho = 0.0;
        for &j in &active {
            let col = spec.eigenvectors.column(j);
            let mut hat = Complex64::new(0.0, 0.0);
            for (i, p) in phases.iter().enumerate() {
                hat += p * col[i];
            }
            rho += weights[j] * hat.norm_sqr();
        }
        values.push(rho);
    }
    Ok(MomentumDensity {
        dim: d,
        points_per_axis,
        values,
        n_electrons: n,
    })
}

/// `log(1 + e^x)` without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// One-level grand potential `-(1/β) log(1 + e^{-β(e-μ)})`.
pub fn level_free_energy(e: f64, beta: f64, mu: f64) -> f64 {
    -softplus(-beta * (e - mu)) / beta
}

/// Fermi occupation `1/(1 + e^{β(e-μ)})`, the derivative of [`level_free_energy`] in `e`.
pub fn fermi_occupation(e: f64, beta: f64, mu: f64) -> f64 {
    let x = beta * (e - mu);
    if x >= 0.0 {
        let t = (-x).exp();
        t / (1.0 + t)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

/// `F = -(1/β) Σ_j log(1 + e^{-β(e_j-μ)})`.
pub fn free_energy(eigenvalues: &[f64], beta: f64, mu: f64) -> Result<f64> {
    if !(beta > 0.0) {
        return Err(invalid(format!("beta must be > 0, got {beta}")));
    }
    Ok(eigenvalues
        .iter()
        .map(|&e| level_free_energy(e, beta, mu))
        .sum())
}

/// Weight of the lowest `|Λ|` eigenvectors of `h^U` at distance `n` from `Λ`.
#[derive(Clone, Debug)]
pub struct DecayProfile {
    pub u: f64,
    pub dim: usize,
    /// `n ↦ max_{dist(x,Λ)=n} Σ_{j ≤ |Λ|} |φ_j(x)|²`.
    pub profile: BTreeMap<usize, f64>,
}

impl DecayProfile {
    /// `(2d/(U-2d))^{2n}`.
    pub fn bound(&self, n: usize) -> f64 {
        let d = self.dim as f64;
        (2.0 * d / (self.u - 2.0 * d)).powi(2 * n as i32)
    }

    /// Distances where the profile exceeds the bound by more than `tol`.
    pub fn violations(&self, tol: f64) -> Vec<usize> {
        self.profile
            .iter()
            .filter(|(&n, &v)| v > self.bound(n) + tol)
            .map(|(&n, _)| n)
            .collect()
    }
}

pub fn decay_profile(spec: &Spectrum, torus: &Torus, lambda: &Domain, u: f64) -> Result<DecayProfile> {
    let mask = embedded_mask(torus, lambda)?;
    if spec.len() != torus.volume() {
        return Err(invalid("spectrum must come from the screened operator on the torus"));
    }
    let d = torus.dim();
    if u <= 4.0 * d as f64 {
        log::warn!("decay bound is only established for U > 4d (U = {u}, d = {d})");
    }
    let dist = torus.distances_to(&mask);
    let occupied = lambda.len();
    let mut profile = BTreeMap::new();
    for (x, &n) in dist.iter().enumerate() {
        let w: f64 = (0..occupied)
            .map(|j| spec.eigenvectors[(x, j)].powi(2))
            .sum();
        let slot = profile.entry(n).or_insert(0.0f64);
        *slot = slot.max(w);
    }
    Ok(DecayProfile { u, dim: d, profile })
}

fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV `index,eigenvalue` with 1-based indices.
pub fn spectrum_csv(eigenvalues: &[f64]) -> String {
    let mut out = String::from("index,eigenvalue\n");
    for (j, e) in eigenvalues.iter().enumerate() {
        let _ = writeln!(out, "{},{}", j + 1, fmt17(*e));
    }
    out
}

/// CSV with one row per site: the site coordinates, then `φ_1(x), φ_2(x), ...`.
pub fn eigenvectors_csv(op: &LatticeOperator, spec: &Spectrum) -> String {
    let mut out = String::from("site");
    for j in 0..spec.len() {
        let _ = write!(out, ",phi_{}", j + 1);
    }
    out.push('\n');
    for (i, s) in op.sites.iter().enumerate() {
        out.push_str(&s.coords().iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" "));
        for j in 0..spec.len() {
            let _ = write!(out, ",{}", fmt17(spec.eigenvectors[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// `E_{Λ,N}` for the Dirichlet operator of a domain.
pub fn dirichlet_ground_energy(domain: &Domain, n: usize) -> Result<f64> {
    ground_energy(&eigenvalues(&build_dirichlet(domain))?, n)
}

/// `|∂Λ|` shortcut used by several checks.
pub fn boundary_size(domain: &Domain) -> usize {
    boundary_stats(domain).boundary_size
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn chain(l: i64) -> Domain {
        Domain::free(1, (0..l).map(|x| Site::new(vec![x]))).unwrap()
    }

    #[test]
    fn small_matrices() {
        let op = build_dirichlet(&chain(1));
        assert_eq!(op.matrix, DMatrix::from_row_slice(1, 1, &[2.0]));
        let op = build_dirichlet(&chain(2));
        assert_eq!(op.matrix, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]));
        let single = Domain::free(2, [Site::new(vec![3, -1])]).unwrap();
        let sp = eigensolve(&build_dirichlet(&single)).unwrap();
        assert_eq!(sp.eigenvalues, vec![4.0]);
    }

    #[test]
    fn trace_identity() {
        let d = Domain::free_box(&[3, 4]).unwrap();
        assert_eq!(build_dirichlet(&d).trace(), 2.0 * 2.0 * 12.0);
    }

    #[test]
    fn screened_construction() {
        let t = Torus::new(vec![4]).unwrap();
        let lam = Domain::from_indices(&t, &[0, 1]).unwrap();
        let op = build_screened(&t, &lam, 10.0).unwrap();
        let diag: Vec<f64> = op.matrix.diagonal().iter().copied().collect();
        assert_eq!(diag, vec![2.0, 2.0, 12.0, 12.0]);
        let other = Domain::from_indices(&t, &[2]).unwrap();
        let a = build_screened(&t, &lam, 0.0).unwrap();
        let b = build_screened(&t, &other, 0.0).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert!(build_screened(&t, &lam, -1.0).is_err());
        let full = build_screened(&t, &Domain::full(&t), 7.0).unwrap();
        assert_eq!(full.matrix, build_dirichlet(&Domain::full(&t)).matrix);
    }

    #[test]
    fn chain_spectrum_closed_form() {
        let sp = eigensolve(&build_dirichlet(&chain(3))).unwrap();
        let s2 = 2f64.sqrt();
        for (a, b) in sp.eigenvalues.iter().zip([2.0 - s2, 2.0, 2.0 + s2]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(sp.ground_energy(1).unwrap(), 2.0 - s2, epsilon = 1e-12);
        assert_abs_diff_eq!(sp.ground_energy(3).unwrap(), 6.0, epsilon = 1e-12);
        assert_eq!(sp.ground_energy(0).unwrap(), 0.0);
        assert!(sp.ground_energy(4).is_err());
    }

    #[test]
    fn eigensolver_cap() {
        let op = build_dirichlet(&chain(10));
        assert!(matches!(
            eigensolve_capped(&op, 5),
            Err(Error::MatrixTooLarge { dim: 10, cap: 5 })
        ));
    }

    #[test]
    fn degenerate_clusters_are_orthonormal() {
        // The 4x4 periodic Laplacian is highly degenerate.
        let t = Torus::cube(2, 4).unwrap();
        let sp = eigensolve(&build_dirichlet(&Domain::full(&t))).unwrap();
        let gram = sp.eigenvectors.transpose() * &sp.eigenvectors;
        assert!((gram - DMatrix::identity(16, 16)).abs().max() < 1e-9);
        assert!(sp.clusters().iter().any(|(a, b)| b - a > 1));
        let w = sp.occupation_weights(2);
        assert_abs_diff_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_form_single_site() {
        let d = chain(1);
        assert_eq!(quadratic_form(&d, &[Complex64::new(1.0, 0.0)]).unwrap(), 2.0);
        assert_eq!(quadratic_form(&d, &[Complex64::new(0.0, 0.0)]).unwrap(), 0.0);
    }

    #[test]
    fn boundary_vector_single_site() {
        let d = chain(1);
        let b = boundary_vector(&d, &[0.0]).unwrap();
        assert_abs_diff_eq!(b.values[0].re, 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(b.norm_sq, 4.0, epsilon = 1e-14);
        let b = boundary_vector(&d, &[PI / 2.0]).unwrap();
        assert_abs_diff_eq!(b.norm_sq, 0.0, epsilon = 1e-14);
    }

    #[test]
    fn momentum_density_limits() {
        let d = chain(5);
        let sp = eigensolve(&build_dirichlet(&d)).unwrap();
        let full = momentum_density(&sp, &d, 5, 64).unwrap();
        assert!(full.values.iter().all(|&r| (r - 5.0).abs() < 1e-10));
        let empty = momentum_density(&sp, &d, 0, 64).unwrap();
        assert!(empty.values.iter().all(|&r| r == 0.0));
    }

    #[test]
    fn chain8_plancherel() {
        let d = chain(8);
        let sp = eigensolve(&build_dirichlet(&d)).unwrap();
        let rho = momentum_density(&sp, &d, 3, 1024).unwrap();
        assert_abs_diff_eq!(rho.integral(), 3.0, epsilon = 1e-6);
    }

    #[test]
    fn free_energy_limits() {
        assert_abs_diff_eq!(free_energy(&[2.0], 1.0, 2.0).unwrap(), -(2f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(free_energy(&[0.5, 1.0], 1.0, -800.0).unwrap(), 0.0, epsilon = 1e-300);
        let ev = [0.3, 1.1, 2.5, 3.7];
        let zero_t: f64 = ev.iter().filter(|&&e| e < 2.0).map(|e| e - 2.0).sum();
        assert_abs_diff_eq!(free_energy(&ev, 1e4, 2.0).unwrap(), zero_t, epsilon = 1e-9);
        assert!(free_energy(&ev, 0.0, 1.0).is_err());
        // Large arguments of either sign stay finite.
        assert!(free_energy(&ev, 1e6, 1e3).unwrap().is_finite());
        assert!(free_energy(&ev, 1e6, -1e3).unwrap().is_finite());
    }

    #[test]
    fn decay_on_ring() {
        let t = Torus::new(vec![8]).unwrap();
        let lam = Domain::from_indices(&t, &[0, 1, 2, 3]).unwrap();
        let sp = eigensolve(&build_screened(&t, &lam, 10.0).unwrap()).unwrap();
        let prof = decay_profile(&sp, &t, &lam, 10.0).unwrap();
        assert_eq!(prof.bound(0), 1.0);
        assert_abs_diff_eq!(prof.bound(1), 0.0625, epsilon = 1e-15);
        assert_abs_diff_eq!(prof.bound(2), 0.00390625, epsilon = 1e-15);
        assert!(prof.violations(1e-12).is_empty(), "{:?}", prof.profile);
        assert!(prof.profile[&1] > 0.0);
    }

    #[test]
    fn csv_uses_seventeen_digits() {
        let csv = spectrum_csv(&[1.0 / 3.0]);
        assert_eq!(csv, "index,eigenvalue\n1,3.3333333333333331e-1\n");
        let back: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1.0 / 3.0);
    }

    fn domain_from_mask(mask: &[bool], side: usize) -> Option<Domain> {
        let sites: Vec<Site> = (0..mask.len())
            .filter(|&i| mask[i])
            .map(|i| Site::new(vec![(i / side) as i64, (i % side) as i64]))
            .collect();
        (!sites.is_empty()).then(|| Domain::free(2, sites).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn spectral_and_hole_symmetry(mask in prop::collection::vec(any::<bool>(), 30)) {
            let Some(dom) = domain_from_mask(&mask, 6) else { return Ok(()) };
            let ev = eigenvalues(&build_dirichlet(&dom)).unwrap();
            let m = ev.len();
            for j in 0..m {
                prop_assert!((ev[j] + ev[m - 1 - j] - 8.0).abs() < 1e-9);
            }
            for n in 0..=m {
                let lhs = ground_energy(&ev, m - n).unwrap();
                let rhs = 4.0 * m as f64 * (1.0 - 2.0 * n as f64 / m as f64) + ground_energy(&ev, n).unwrap();
                prop_assert!((lhs - rhs).abs() < 1e-9);
            }
        }

        #[test]
        fn quadratic_form_matches_matrix(
            mask in prop::collection::vec(any::<bool>(), 9),
            re in prop::collection::vec(-1.0f64..1.0, 9),
            im in prop::collection::vec(-1.0f64..1.0, 9),
        ) {
            let Some(dom) = domain_from_mask(&mask, 3) else { return Ok(()) };
            let phi: Vec<Complex64> = (0..dom.len()).map(|i| Complex64::new(re[i], im[i])).collect();
            let hphi = apply_dirichlet(&dom, &phi);
            let direct: f64 = phi.iter().zip(&hphi).map(|(a, b)| (a.conj() * b).re).sum();
            let form = quadratic_form(&dom, &phi).unwrap();
            prop_assert!((form - direct).abs() <= 1e-10 * direct.abs().max(1.0));
        }

        #[test]
        fn momentum_density_bounds(mask in prop::collection::vec(any::<bool>(), 16), frac in 0.0f64..=1.0) {
            let Some(dom) = domain_from_mask(&mask, 4) else { return Ok(()) };
            let sp = eigensolve(&build_dirichlet(&dom)).unwrap();
            let n = (frac * dom.len() as f64).round() as usize;
            let rho = momentum_density(&sp, &dom, n, 32).unwrap();
            prop_assert!(rho.min() >= -1e-12);
            prop_assert!(rho.max() <= dom.len() as f64 + 1e-9);
            prop_assert!((rho.integral() - n as f64).abs() < 1e-9);
        }

        #[test]
        fn boundary_vector_norm_bounds(mask in prop::collection::vec(any::<bool>(), 25), k1 in -1.0f64..1.0, k2 in -1.0f64..1.0) {
            let Some(dom) = domain_from_mask(&mask, 5) else { return Ok(()) };
            let k = [k1 * PI / 3.0, k2 * PI / 3.0];
            let b = boundary_vector(&dom, &k).unwrap();
            let size = boundary_size(&dom) as f64;
            prop_assert!(b.norm_sq >= size - 1e-9);
            prop_assert!(b.norm_sq <= 16.0 * size + 1e-9);
        }

        #[test]
        fn screened_energy_monotone_and_localized(mask in prop::collection::vec(any::<bool>(), 16), n_frac in 0.0f64..=1.0) {
            let t = Torus::cube(2, 4).unwrap();
            let idx: Vec<usize> = (0..16).filter(|&i| mask[i]).collect();
            prop_assume!(!idx.is_empty());
            let lam = Domain::from_indices(&t, &idx).unwrap();
            let n = (n_frac * lam.len() as f64).round() as usize;
            let mut prev = f64::NEG_INFINITY;
            for u in [0.0, 2.0, 9.0, 20.0, 50.0] {
                let ev = eigenvalues(&build_screened(&t, &lam, u).unwrap()).unwrap();
                let e = ground_energy(&ev, n).unwrap();
                prop_assert!(e >= prev - 1e-9);
                prev = e;
                if u > 8.0 {
                    for &x in &ev {
                        let inside = (-1e-9..=8.0 + 1e-9).contains(&x) || (u - 1e-9..=u + 8.0 + 1e-9).contains(&x);
                        prop_assert!(inside, "eigenvalue {} outside the bands for U = {}", x, u);
                    }
                }
            }
        }
    }
}
