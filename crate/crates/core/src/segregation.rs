//! Sampling of classical-particle configurations with the electronic energy
//! (or free energy) as Hamiltonian, plus exact enumeration on small tori.
//!
//! A configuration is the hole set `Λ ⊆ Ω`, stored as a boolean mask over the
//! torus sites in row-major order. Classical particles sit on `Ω ∖ Λ`.

use dashmap::DashMap;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::{binomial, enumerate_index_sets, Domain, Torus};
use crate::spectral::{free_energy, DEFAULT_EIGENSOLVER_CAP};

/// What the configuration weight is built from.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum EnergyMode {
    /// Sum of the `n_electrons` lowest one-particle levels.
    Ground { n_electrons: usize },
    /// Grand-canonical electronic free energy at `(β, μ)`.
    Thermal { beta: f64, mu: f64 },
}

/// Energy functional on hole sets of one torus, memoized by configuration.
///
/// With `u = None` (infinite repulsion) electrons live on `Λ` with Dirichlet
/// conditions toward the particles; otherwise the screened operator on the
/// whole torus is used.
#[derive(Debug)]
pub struct EnergyModel {
    torus: Torus,
    mode: EnergyMode,
    u: Option<f64>,
    eigensolver_cap: usize,
    neighbors: Vec<Vec<usize>>,
    memo: DashMap<Vec<u64>, f64>,
}

fn mask_key(mask: &[bool]) -> Vec<u64> {
    mask.chunks(64)
        .map(|c| c.iter().enumerate().fold(0u64, |acc, (i, &b)| acc | ((b as u64) << i)))
        .collect()
}

impl EnergyModel {
    pub fn new(torus: Torus, mode: EnergyMode, u: Option<f64>) -> Result<Self> {
        if let Some(u) = u {
            if !(u >= 0.0) || !u.is_finite() {
                return Err(invalid(format!("U must be finite and >= 0 (or infinite), got {u}")));
            }
        }
        if let EnergyMode::Thermal { beta, .. } = mode {
            if !(beta > 0.0) {
                return Err(invalid(format!("electronic beta must be > 0, got {beta}")));
            }
        }
        let neighbors = (0..torus.volume()).map(|i| torus.neighbor_indices(i)).collect();
        Ok(Self {
            torus,
            mode,
            u,
            eigensolver_cap: DEFAULT_EIGENSOLVER_CAP,
            neighbors,
            memo: DashMap::new(),
        })
    }

    pub fn with_eigensolver_cap(mut self, cap: usize) -> Self {
        self.eigensolver_cap = cap;
        self
    }

    pub fn torus(&self) -> &Torus {
        &self.torus
    }

    pub fn mode(&self) -> EnergyMode {
        self.mode
    }

    pub fn u(&self) -> Option<f64> {
        self.u
    }

    /// Number of distinct configurations evaluated so far.
    pub fn cache_len(&self) -> usize {
        self.memo.len()
    }

    /// `|∂Λ|` relative to the torus.
    pub fn boundary_size(&self, mask: &[bool]) -> usize {
        (0..mask.len())
            .filter(|&i| mask[i] && self.neighbors[i].iter().any(|&j| !mask[j]))
            .count()
    }

    fn operator(&self, mask: &[bool]) -> DMatrix<f64> {
        let diag = 2.0 * self.torus.dim() as f64;
        match self.u {
            None => {
                let sites: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
                let mut pos = vec![usize::MAX; mask.len()];
                for (p, &i) in sites.iter().enumerate() {
                    pos[i] = p;
                }
                let mut m = DMatrix::zeros(sites.len(), sites.len());
                for (p, &i) in sites.iter().enumerate() {
                    m[(p, p)] = diag;
                    for &j in &self.neighbors[i] {
                        if mask[j] {
                            m[(p, pos[j])] -= 1.0;
                        }
                    }
                }
                m
            }
            Some(u) => {
                let v = mask.len();
                let mut m = DMatrix::zeros(v, v);
                for i in 0..v {
                    m[(i, i)] = diag + if mask[i] { 0.0 } else { u };
                    for &j in &self.neighbors[i] {
                        m[(i, j)] -= 1.0;
                    }
                }
                m
            }
        }
    }

    fn compute(&self, mask: &[bool]) -> Result<f64> {
        let m = self.operator(mask);
        if m.nrows() > self.eigensolver_cap {
            return Err(crate::error::Error::MatrixTooLarge {
                dim: m.nrows(),
                cap: self.eigensolver_cap,
            });
        }
        let mut ev: Vec<f64> = if m.nrows() == 0 {
            Vec::new()
        } else {
            m.symmetric_eigenvalues().iter().copied().collect()
        };
        ev.sort_by(f64::total_cmp);
        match self.mode {
            EnergyMode::Ground { n_electrons } => {
                if n_electrons > ev.len() {
                    return Err(invalid(format!(
                        "N = {n_electrons} exceeds the {} available levels",
                        ev.len()
                    )));
                }
                Ok(ev[..n_electrons].iter().sum())
            }
            EnergyMode::Thermal { beta, mu } => free_energy(&ev, beta, mu),
        }
    }

    /// Energy of the hole set `mask`.
    pub fn energy(&self, mask: &[bool]) -> Result<f64> {
        if mask.len() != self.torus.volume() {
            return Err(invalid("mask length does not match the torus"));
        }
        let key = mask_key(mask);
        if let Some(e) = self.memo.get(&key) {
            return Ok(*e);
        }
        let e = self.compute(mask)?;
        Ok(*self.memo.entry(key).or_insert(e))
    }

    pub fn domain_energy(&self, lambda: &Domain) -> Result<f64> {
        match lambda.ambient() {
            Some(t) if *t == self.torus => self.energy(&lambda.mask().expect("embedded")),
            _ => Err(invalid("domain is not embedded in this model's torus")),
        }
    }
}

/// `δ(z) = |Ω|^{-1} Σ_x 1{w_x = w_{x+z}}` for every displacement `z`, indexed like torus sites.
pub fn delta_correlation(torus: &Torus, mask: &[bool]) -> Vec<f64> {
    let v = torus.volume();
    let dims = torus.dims();
    let coords: Vec<Vec<usize>> = (0..v)
        .map(|i| torus.site_at(i).coords().iter().map(|&c| c as usize).collect())
        .collect();
    let mut shifted = vec![0usize; dims.len()];
    (0..v)
        .map(|z| {
            let same = (0..v)
                .filter(|&x| {
                    for (a, s) in shifted.iter_mut().enumerate() {
                        *s = (coords[x][a] + coords[z][a]) % dims[a];
                    }
                    let y = shifted.iter().zip(dims).fold(0, |acc, (&c, &l)| acc * l + c);
                    mask[x] == mask[y]
                })
                .count();
            same as f64 / v as f64
        })
        .collect()
}

/// `|∂Λ| / |Λ|` relative to the torus.
pub fn boundary_fraction(torus: &Torus, mask: &[bool]) -> f64 {
    let holes = mask.iter().filter(|&&b| b).count();
    if holes == 0 {
        return 0.0;
    }
    let boundary = (0..mask.len())
        .filter(|&i| mask[i] && torus.neighbor_indices(i).iter().any(|&j| !mask[j]))
        .count();
    boundary as f64 / holes as f64
}

/// A uniformly random hole set with `m` holes.
pub fn random_mask<R: Rng>(volume: usize, m: usize, rng: &mut R) -> Vec<bool> {
    let mut mask = vec![false; volume];
    for i in rand::seq::index::sample(rng, volume, m) {
        mask[i] = true;
    }
    mask
}

/// Mean boundary fraction of `samples` uniformly random configurations with `m` holes.
pub fn uniform_boundary_fraction(torus: &Torus, m: usize, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total: f64 = (0..samples)
        .map(|_| boundary_fraction(torus, &random_mask(torus.volume(), m, &mut rng)))
        .sum();
    total / samples as f64
}

#[derive(Clone, Debug, Serialize)]
pub struct SamplerConfig {
    /// Sampling inverse temperatures, nondecreasing.
    pub schedule: Vec<f64>,
    pub steps_per_beta: usize,
    pub seed: u64,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(invalid("the schedule needs at least one β_s"));
        }
        if self.schedule.iter().any(|b| !(*b >= 0.0)) {
            return Err(invalid("sampling β_s must be >= 0"));
        }
        if self.schedule.windows(2).any(|w| w[1] < w[0]) {
            return Err(invalid("the β_s schedule must be nondecreasing"));
        }
        if self.steps_per_beta == 0 {
            return Err(invalid("steps per β_s must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub beta_s: f64,
    pub energy: f64,
    pub boundary_size: usize,
    pub accepted: bool,
    /// `(hole, particle)` sites exchanged by an accepted move.
    #[serde(skip)]
    pub swap: Option<(usize, usize)>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Trajectory {
    pub chain: u64,
    pub seed: u64,
    pub initial_mask: Vec<bool>,
    pub initial_energy: f64,
    pub records: Vec<StepRecord>,
    pub acceptance_rate: f64,
    pub final_mask: Vec<bool>,
    pub final_energy: f64,
}

impl Trajectory {
    pub fn csv(&self) -> String {
        let mut out = String::from("step,beta_s,energy,boundary_size,accepted\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{:.16e},{:.16e},{},{}\n",
                r.step, r.beta_s, r.energy, r.boundary_size, r.accepted as u8
            ));
        }
        out
    }
}

/// Metropolis chain with particle-hole swap moves over the whole torus.
///
/// The chain's random stream is the master seed with stream index `chain`.
pub fn metropolis_run(model: &EnergyModel, start: &[bool], sampler: &SamplerConfig, chain: u64) -> Result<Trajectory> {
    sampler.validate()?;
    let holes: Vec<usize> = (0..start.len()).filter(|&i| start[i]).collect();
    let particles: Vec<usize> = (0..start.len()).filter(|&i| !start[i]).collect();
    if holes.is_empty() || particles.is_empty() {
        return Err(invalid("swap moves need at least one hole and one particle"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    rng.set_stream(chain);
    let (mut holes, mut particles) = (holes, particles);
    let mut mask = start.to_vec();
    let mut energy = model.energy(&mask)?;
    let initial_energy = energy;
    let mut records = Vec::with_capacity(sampler.schedule.len() * sampler.steps_per_beta);
    let mut accepted_total = 0usize;
    let mut step = 0usize;
    for &beta_s in &sampler.schedule {
        for _ in 0..sampler.steps_per_beta {
            let hi = rng.random_range(0..holes.len());
            let pi = rng.random_range(0..particles.len());
            let (h, p) = (holes[hi], particles[pi]);
            mask[h] = false;
            mask[p] = true;
            let proposed = model.energy(&mask)?;
            let delta = proposed - energy;
            let u: f64 = rng.random();
            let accept = beta_s == 0.0 || delta <= 0.0 || u < (-beta_s * delta).exp();
            if accept {
                energy = proposed;
                holes[hi] = p;
                particles[pi] = h;
                accepted_total += 1;
            } else {
                mask[h] = true;
                mask[p] = false;
            }
            step += 1;
            records.push(StepRecord {
                step,
                beta_s,
                energy,
                boundary_size: model.boundary_size(&mask),
                accepted: accept,
                swap: accept.then_some((h, p)),
            });
        }
    }
    Ok(Trajectory {
        chain,
        seed: sampler.seed,
        initial_mask: start.to_vec(),
        initial_energy,
        acceptance_rate: accepted_total as f64 / step as f64,
        final_energy: energy,
        final_mask: mask,
        records,
    })
}

/// Independent chains from uniformly random starts, run in parallel.
/// Chain `c` draws its start and its moves from stream `c` of the master seed.
pub fn run_chains(model: &EnergyModel, m: usize, sampler: &SamplerConfig, chains: usize) -> Result<Vec<Trajectory>> {
    let v = model.torus().volume();
    if m == 0 || m >= v {
        return Err(invalid(format!("hole count must be in 1..{v}, got {m}")));
    }
    (0..chains as u64)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed ^ 0x9e37_79b9_7f4a_7c15);
            rng.set_stream(c);
            let start = random_mask(v, m, &mut rng);
            metropolis_run(model, &start, sampler, c)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Observables {
    /// Translation-averaged `⟨δ_{w_x, w_{x+z}}⟩`, indexed like torus sites.
    pub delta_corr: Vec<f64>,
    pub boundary_fraction: f64,
    pub energy_trace: Vec<f64>,
    pub samples: usize,
}

pub const DEFAULT_BURN_IN: f64 = 0.5;

/// Averages over the configurations visited after the burn-in fraction of the
/// steps, rebuilt by replaying the accepted swaps from the initial configuration.
pub fn observables(torus: &Torus, traj: &Trajectory, burn_in: f64) -> Result<Observables> {
    if !(0.0..1.0).contains(&burn_in) {
        return Err(invalid("burn-in fraction must lie in [0, 1)"));
    }
    let v = torus.volume();
    if traj.initial_mask.len() != v {
        return Err(invalid("trajectory does not belong to this torus"));
    }
    let skip = (traj.records.len() as f64 * burn_in).floor() as usize;
    let mut mask = traj.initial_mask.clone();
    let mut delta = vec![0.0; v];
    for (i, r) in traj.records.iter().enumerate() {
        if let Some((h, p)) = r.swap {
            mask[h] = false;
            mask[p] = true;
        }
        if i >= skip {
            for (acc, x) in delta.iter_mut().zip(delta_correlation(torus, &mask)) {
                *acc += x;
            }
        }
    }
    let samples = traj.records.len() - skip;
    delta.iter_mut().for_each(|x| *x /= samples.max(1) as f64);
    Ok(Observables {
        delta_corr: delta,
        boundary_fraction: boundary_fraction(torus, &traj.final_mask),
        energy_trace: traj.records[skip..].iter().map(|r| r.energy).collect(),
        samples,
    })
}

/// Exact enumeration of all hole sets of a given size.
#[derive(Clone, Debug)]
pub struct ExactEnsemble {
    pub torus: Torus,
    pub m: usize,
    pub configs: Vec<Vec<usize>>,
    pub energies: Vec<f64>,
    pub boundary_sizes: Vec<usize>,
    pub deltas: Vec<Vec<f64>>,
    pub e_min: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleAverages {
    pub beta_s: f64,
    pub delta_corr: Vec<f64>,
    pub mean_boundary_fraction: f64,
    pub ln_z: f64,
}

/// Configurations within this distance of the minimum count as ground states.
pub const GROUND_TOL: f64 = 1e-9;

pub fn exact_ensemble(model: &EnergyModel, m: usize, cap: u128) -> Result<ExactEnsemble> {
    let torus = model.torus().clone();
    let v = torus.volume();
    let configs: Vec<Vec<usize>> = enumerate_index_sets(&torus, m, cap)?.collect();
    debug_assert_eq!(configs.len() as u128, binomial(v, m));
    let to_mask = |idx: &[usize]| {
        let mut mask = vec![false; v];
        idx.iter().for_each(|&i| mask[i] = true);
        mask
    };
    let evaluated: Vec<(f64, usize, Vec<f64>)> = configs
        .par_iter()
        .map(|idx| {
            let mask = to_mask(idx);
            let e = model.energy(&mask)?;
            Ok((e, model.boundary_size(&mask), delta_correlation(&torus, &mask)))
        })
        .collect::<Result<_>>()?;
    let mut energies = Vec::with_capacity(configs.len());
    let mut boundary_sizes = Vec::with_capacity(configs.len());
    let mut deltas = Vec::with_capacity(configs.len());
    for (e, b, d) in evaluated {
        energies.push(e);
        boundary_sizes.push(b);
        deltas.push(d);
    }
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExactEnsemble {
        torus,
        m,
        configs,
        energies,
        boundary_sizes,
        deltas,
        e_min,
    })
}

impl ExactEnsemble {
    pub fn ground_set(&self) -> Vec<&[usize]> {
        self.configs
            .iter()
            .zip(&self.energies)
            .filter(|(_, &e)| e - self.e_min <= GROUND_TOL)
            .map(|(c, _)| c.as_slice())
            .collect()
    }

    fn weights(&self, beta_s: f64) -> Vec<f64> {
        if beta_s.is_infinite() {
            return self
                .energies
                .iter()
                .map(|&e| if e - self.e_min <= GROUND_TOL { 1.0 } else { 0.0 })
                .collect();
        }
        self.energies.iter().map(|&e| (-beta_s * (e - self.e_min)).exp()).collect()
    }

    /// Gibbs averages at sampling inverse temperature `beta_s` (may be infinite).
    pub fn averages(&self, beta_s: f64) -> EnsembleAverages {
        let w = self.weights(beta_s);
        let z: f64 = w.iter().sum();
        let v = self.torus.volume();
        let mut delta = vec![0.0; v];
        let mut bf = 0.0;
        for ((wi, d), &b) in w.iter().zip(&self.deltas).zip(&self.boundary_sizes) {
            if *wi == 0.0 {
                continue;
            }
            for (acc, x) in delta.iter_mut().zip(d) {
                *acc += wi * x;
            }
            bf += wi * b as f64 / self.m as f64;
        }
        delta.iter_mut().for_each(|x| *x /= z);
        let ln_z = if beta_s.is_infinite() {
            f64::NAN
        } else {
            z.ln() - beta_s * self.e_min
        };
        EnsembleAverages {
            beta_s,
            delta_corr: delta,
            mean_boundary_fraction: bf / z,
            ln_z,
        }
    }

    /// Gibbs probability of `|∂Λ| > r |Ω|`.
    pub fn prob_boundary_exceeds(&self, beta_s: f64, r: f64) -> f64 {
        let w = self.weights(beta_s);
        let z: f64 = w.iter().sum();
        let limit = r * self.torus.volume() as f64;
        w.iter()
            .zip(&self.boundary_sizes)
            .filter(|(_, &b)| b as f64 > limit)
            .map(|(wi, _)| wi)
            .sum::<f64>()
            / z
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{build_dirichlet, eigenvalues};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn ring(l: usize) -> Torus {
        Torus::new(vec![l]).unwrap()
    }

    fn mask_of(v: usize, idx: &[usize]) -> Vec<bool> {
        let mut m = vec![false; v];
        idx.iter().for_each(|&i| m[i] = true);
        m
    }

    #[test]
    fn ground_energy_on_ring_block() {
        let model = EnergyModel::new(ring(8), EnergyMode::Ground { n_electrons: 2 }, None).unwrap();
        let e = model.energy(&mask_of(8, &[0, 1, 2, 3])).unwrap();
        let want = (2.0 - 2.0 * (PI / 5.0).cos()) + (2.0 - 2.0 * (2.0 * PI / 5.0).cos());
        assert_abs_diff_eq!(e, want, epsilon = 1e-12);
        let zero = EnergyModel::new(ring(8), EnergyMode::Ground { n_electrons: 0 }, None).unwrap();
        assert_eq!(zero.energy(&mask_of(8, &[0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn full_torus_matches_periodic_spectrum() {
        let t = Torus::cube(2, 4).unwrap();
        let model = EnergyModel::new(t, EnergyMode::Ground { n_electrons: 5 }, None).unwrap();
        let e = model.energy(&[true; 16]).unwrap();
        let mut levels: Vec<f64> = (0..4)
            .flat_map(|a| (0..4).map(move |b| 4.0 - 2.0 * (PI * a as f64 / 2.0).cos() - 2.0 * (PI * b as f64 / 2.0).cos()))
            .collect();
        levels.sort_by(f64::total_cmp);
        assert_abs_diff_eq!(e, levels[..5].iter().sum::<f64>(), epsilon = 1e-10);
    }

    #[test]
    fn fast_operator_matches_domain_operator() {
        let t = Torus::cube(2, 5).unwrap();
        let idx = [0, 1, 4, 6, 7, 12, 20, 24];
        let model = EnergyModel::new(t.clone(), EnergyMode::Ground { n_electrons: 3 }, None).unwrap();
        let dom = Domain::from_indices(&t, &idx).unwrap();
        let ev = eigenvalues(&build_dirichlet(&dom)).unwrap();
        assert_abs_diff_eq!(model.domain_energy(&dom).unwrap(), ev[..3].iter().sum::<f64>(), epsilon = 1e-12);
    }

    #[test]
    fn observables_examples() {
        let t = ring(8);
        assert_eq!(boundary_fraction(&t, &mask_of(8, &[0, 1, 2, 3])), 0.5);
        assert_eq!(boundary_fraction(&t, &mask_of(8, &[0, 2, 4, 6])), 1.0);
        let d = delta_correlation(&t, &mask_of(8, &[0, 1, 2, 3]));
        assert_eq!(d[0], 1.0);
        assert_eq!(d[1], 0.75);
    }

    #[test]
    fn exact_ring_ensemble() {
        let model = EnergyModel::new(ring(8), EnergyMode::Ground { n_electrons: 2 }, None).unwrap();
        let ens = exact_ensemble(&model, 4, 10_000_000).unwrap();
        assert_eq!(ens.configs.len(), 70);
        let ground = ens.ground_set();
        assert_eq!(ground.len(), 8);
        for g in ground {
            let mask = mask_of(8, g);
            assert_eq!(model.boundary_size(&mask), 2, "{g:?}");
        }
        let hot = ens.averages(0.0);
        assert_abs_diff_eq!(hot.delta_corr[1], 3.0 / 7.0, epsilon = 1e-12);
        assert_eq!(hot.delta_corr[0], 1.0);
        assert_abs_diff_eq!(hot.ln_z, 70f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(ens.averages(f64::INFINITY).delta_corr[1], 0.75, epsilon = 1e-12);
    }

    #[test]
    fn zero_beta_accepts_everything() {
        let model = EnergyModel::new(ring(8), EnergyMode::Ground { n_electrons: 2 }, None).unwrap();
        let sampler = SamplerConfig {
            schedule: vec![0.0],
            steps_per_beta: 200,
            seed: 3,
        };
        let t = metropolis_run(&model, &mask_of(8, &[0, 2, 4, 6]), &sampler, 0).unwrap();
        assert_eq!(t.acceptance_rate, 1.0);
    }

    #[test]
    fn frozen_chain_never_goes_uphill() {
        let model = EnergyModel::new(ring(10), EnergyMode::Ground { n_electrons: 2 }, None).unwrap();
        let sampler = SamplerConfig {
            schedule: vec![f64::INFINITY],
            steps_per_beta: 300,
            seed: 11,
        };
        let t = metropolis_run(&model, &mask_of(10, &[0, 3, 5, 8]), &sampler, 2).unwrap();
        assert!(t.records.windows(2).all(|w| w[1].energy <= w[0].energy));
    }

    #[test]
    fn replay_reaches_final_configuration() {
        let t = ring(8);
        let model = EnergyModel::new(t.clone(), EnergyMode::Ground { n_electrons: 2 }, None).unwrap();
        let sampler = SamplerConfig {
            schedule: vec![1.0, 8.0],
            steps_per_beta: 100,
            seed: 5,
        };
        let traj = metropolis_run(&model, &mask_of(8, &[0, 2, 4, 6]), &sampler, 1).unwrap();
        let obs = observables(&t, &traj, DEFAULT_BURN_IN).unwrap();
        assert_eq!(obs.samples, 100);
        assert_eq!(obs.delta_corr[0], 1.0);
        let mut mask = traj.initial_mask.clone();
        for (h, p) in traj.records.iter().filter_map(|r| r.swap) {
            mask[h] = false;
            mask[p] = true;
        }
        assert_eq!(mask, traj.final_mask);
        assert!(observables(&t, &traj, 1.0).is_err());
    }

    #[test]
    fn sampler_validation() {
        let bad = SamplerConfig {
            schedule: vec![2.0, 1.0],
            steps_per_beta: 1,
            seed: 0,
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            schedule: vec![1.0],
            steps_per_beta: 0,
            seed: 0,
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn thermal_mode_uses_free_energy() {
        let t = ring(6);
        let model = EnergyModel::new(t.clone(), EnergyMode::Thermal { beta: 2.0, mu: 1.0 }, Some(10.0)).unwrap();
        let mask = mask_of(6, &[0, 1, 2]);
        let dom = Domain::from_mask(&t, &mask).unwrap();
        let ev = eigenvalues(&crate::spectral::build_screened(&t, &dom, 10.0).unwrap()).unwrap();
        assert_abs_diff_eq!(model.energy(&mask).unwrap(), free_energy(&ev, 2.0, 1.0).unwrap(), epsilon = 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn chains_are_deterministic(seed in any::<u64>(), chain in 0u64..4) {
            let model = EnergyModel::new(ring(8), EnergyMode::Ground { n_electrons: 2 }, None).unwrap();
            let sampler = SamplerConfig { schedule: vec![1.0, 4.0], steps_per_beta: 50, seed };
            let start = mask_of(8, &[0, 2, 5, 7]);
            let a = metropolis_run(&model, &start, &sampler, chain).unwrap();
            let b = metropolis_run(&model, &start, &sampler, chain).unwrap();
            prop_assert_eq!(a.csv(), b.csv());
            prop_assert_eq!(a.final_mask, b.final_mask);
        }

        #[test]
        fn correlations_in_unit_interval(bits in prop::collection::vec(any::<bool>(), 16)) {
            let t = Torus::cube(2, 4).unwrap();
            let d = delta_correlation(&t, &bits);
            prop_assert_eq!(d[0], 1.0);
            prop_assert!(d.iter().all(|x| (0.0..=1.0).contains(x)));
        }
    }
}
