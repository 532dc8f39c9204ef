//! Infinite-lattice reference quantities by Brillouin-zone quadrature.
//!
//! The zone `[-π, π]^d` is sampled at the midpoints of a uniform `M^d` grid.
//! The dispersion values are sorted once per `(d, M)` and shared, which turns
//! Fermi levels and bulk energies into table look-ups (bathtub filling of the
//! sorted levels, with the last level filled fractionally).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::spectral::{k_axis, level_free_energy};

pub const MIN_GRID_POINTS: usize = 64;

/// `ε_k = 2d - 2 Σ cos k_i`.
pub fn epsilon(k: &[f64]) -> f64 {
    2.0 * k.len() as f64 - 2.0 * k.iter().map(|x| x.cos()).sum::<f64>()
}

/// Volume of the unit ball in `R^d`.
pub fn sphere_volume(d: usize) -> f64 {
    match d {
        0 => 1.0,
        1 => 2.0,
        _ => 2.0 * std::f64::consts::PI / d as f64 * sphere_volume(d - 2),
    }
}

pub fn default_grid_points(d: usize) -> usize {
    match d {
        1 => 4096,
        2 => 1024,
        _ => 128,
    }
}

#[derive(Debug)]
struct Table {
    sorted: Vec<f64>,
    /// `prefix[i] = Σ_{j<i} sorted[j]`.
    prefix: Vec<f64>,
}

type TableCache = Mutex<HashMap<(usize, usize), Arc<Table>>>;

fn table(d: usize, m: usize) -> Arc<Table> {
    static CACHE: OnceLock<TableCache> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(t) = cache.lock().expect("bulk cache poisoned").get(&(d, m)) {
        return Arc::clone(t);
    }
    let t = Arc::new(build_table(d, m));
    let mut guard = cache.lock().expect("bulk cache poisoned");
    Arc::clone(guard.entry((d, m)).or_insert(t))
}

fn build_table(d: usize, m: usize) -> Table {
    let cosines: Vec<f64> = k_axis(m).iter().map(|k| 2.0 * k.cos()).collect();
    let total = m.pow(d as u32);
    let mut sorted = Vec::with_capacity(total);
    let mut idx = vec![0usize; d];
    for _ in 0..total {
        sorted.push(2.0 * d as f64 - idx.iter().map(|&i| cosines[i]).sum::<f64>());
        for slot in idx.iter_mut().rev() {
            *slot += 1;
            if *slot < m {
                break;
            }
            *slot = 0;
        }
    }
    sorted.sort_unstable_by(f64::total_cmp);
    let mut prefix = Vec::with_capacity(total + 1);
    let mut acc = 0.0;
    prefix.push(0.0);
    for &e in &sorted {
        acc += e;
        prefix.push(acc);
    }
    Table { sorted, prefix }
}

/// Dimension plus quadrature resolution; clones share the cached table.
#[derive(Clone, Debug)]
pub struct BulkModel {
    d: usize,
    m: usize,
    table: Arc<Table>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FermiData {
    pub n: f64,
    pub eps_f: f64,
}

impl BulkModel {
    pub fn new(d: usize, grid_points_per_axis: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dimension must be >= 1"));
        }
        if grid_points_per_axis < MIN_GRID_POINTS {
            return Err(invalid(format!(
                "quadrature needs at least {MIN_GRID_POINTS} points per axis, got {grid_points_per_axis}"
            )));
        }
        let total = (grid_points_per_axis as u128).pow(d as u32);
        if total > 1 << 28 {
            return Err(invalid(format!("quadrature grid of {total} points is too large")));
        }
        Ok(Self {
            d,
            m: grid_points_per_axis,
            table: table(d, grid_points_per_axis),
        })
    }

    pub fn with_default_grid(d: usize) -> Result<Self> {
        Self::new(d, default_grid_points(d))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn grid_points_per_axis(&self) -> usize {
        self.m
    }

    fn total(&self) -> usize {
        self.table.sorted.len()
    }

    fn top(&self) -> f64 {
        4.0 * self.d as f64
    }

    /// Filling `n(ε)`: fraction of the zone with `ε_k < ε`, counting ties as half.
    pub fn density(&self, eps: f64) -> f64 {
        let s = &self.table.sorted;
        let lt = s.partition_point(|&x| x < eps);
        let le = s.partition_point(|&x| x <= eps);
        (lt + le) as f64 / (2 * s.len()) as f64
    }

    fn check_filling(n: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&n) {
            return Err(invalid(format!("filling must lie in [0, 1], got {n}")));
        }
        Ok(())
    }

    pub fn fermi_level(&self, n: f64) -> Result<FermiData> {
        Self::check_filling(n)?;
        let eps_f = if n == 0.0 {
            0.0
        } else if n == 1.0 {
            self.top()
        } else {
            let s = &self.table.sorted;
            let p = n * s.len() as f64;
            let fl = p.floor();
            let i = fl as usize;
            if p == fl {
                0.5 * (s[i - 1] + s[i])
            } else {
                s[i]
            }
        };
        Ok(FermiData { n, eps_f })
    }

    /// `e(n) = (2π)^{-d} ∫_{ε_k < ε_F(n)} ε_k dk`.
    pub fn bulk_energy(&self, n: f64) -> Result<f64> {
        Self::check_filling(n)?;
        let g = self.total();
        let p = n * g as f64;
        let i = (p.floor() as usize).min(g);
        let frac = p - i as f64;
        let mut sum = self.table.prefix[i];
        if i < g {
            sum += frac * self.table.sorted[i];
        }
        Ok(sum / g as f64)
    }

    /// Model at half the resolution, used for the refinement error estimate.
    pub fn coarser(&self) -> Result<Self> {
        Self::new(self.d, (self.m / 2).max(MIN_GRID_POINTS))
    }

    /// `|e_M(n) - e_{M/2}(n)|`.
    pub fn quadrature_delta(&self, n: f64) -> Result<f64> {
        let coarse = self.coarser()?;
        Ok((self.bulk_energy(n)? - coarse.bulk_energy(n)?).abs())
    }

    /// Grid mean of an arbitrary function of `ε_k`.
    pub fn zone_mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        let s = &self.table.sorted;
        s.iter().map(|&e| f(e)).sum::<f64>() / s.len() as f64
    }

    /// `f(β, μ) = -(1/β)(2π)^{-d} ∫ log(1 + e^{-β(ε_k - μ)}) dk`.
    pub fn free_energy_per_site(&self, beta: f64, mu: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(invalid(format!("beta must be > 0, got {beta}")));
        }
        Ok(self.zone_mean(|e| level_free_energy(e, beta, mu)))
    }

    /// `e_j*` for `j = 1..=levels`: the mean of `ε_k` over the slice of the zone
    /// between fillings `(j-1)/levels` and `j/levels`.
    pub fn level_set_averages(&self, levels: usize) -> Result<Vec<f64>> {
        if levels == 0 {
            return Err(invalid("need at least one level"));
        }
        let m = levels as f64;
        let mut prev = 0.0;
        let mut out = Vec::with_capacity(levels);
        for j in 1..=levels {
            let cur = self.bulk_energy(j as f64 / m)?;
            out.push(m * (cur - prev));
            prev = cur;
        }
        Ok(out)
    }
}

/// Outcome of sampling `(8/π²)|k|² ≤ ε_k ≤ |k|²`.
#[derive(Clone, Debug, Default, Serialize)]
pub struct DispersionReport {
    pub checked: usize,
    /// Samples with `|k|_∞ > π/2`, where the lower bound is not claimed.
    pub skipped: usize,
    pub violations: Vec<Vec<f64>>,
}

impl DispersionReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn dispersion_bounds_check<'a>(samples: impl IntoIterator<Item = &'a [f64]>) -> DispersionReport {
    let c = 8.0 / std::f64::consts::PI.powi(2);
    let mut rep = DispersionReport::default();
    for k in samples {
        if k.iter().any(|x| x.abs() > std::f64::consts::FRAC_PI_2) {
            rep.skipped += 1;
            continue;
        }
        rep.checked += 1;
        let k2: f64 = k.iter().map(|x| x * x).sum();
        let e = epsilon(k);
        let tol = 1e-12 * (1.0 + k2);
        if e < c * k2 - tol || e > k2 + tol {
            rep.violations.push(k.to_vec());
        }
    }
    rep
}
