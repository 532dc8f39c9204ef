//! Local boundary geometry matrices and the Fermi-surface functional built from them.

use itertools::Itertools;
use serde::Serialize;

use crate::error::{invalid, Result};
use crate::lattice::{BoundaryStats, Site};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum QClass {
    /// `Q ≡ 0`.
    Zero,
    /// Diagonal entries all 2 and `Q_ij + Q_ji = 4` off the diagonal.
    DoublePrime,
    /// Every other matrix.
    Prime,
}

/// `Q_ij = (1 + δ_ij) q_ij`: diagonal entries stored doubled.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct QMatrix {
    d: usize,
    entries: Vec<Vec<u8>>,
}

impl QMatrix {
    /// Builds from the raw counts `q_ij` (diagonal not yet doubled).
    pub fn from_counts(q: &[Vec<u8>]) -> Result<Self> {
        let d = q.len();
        if q.iter().any(|row| row.len() != d) {
            return Err(invalid("q must be a square matrix"));
        }
        let mut entries = q.to_vec();
        for i in 0..d {
            for j in 0..d {
                let limit = if i == j { 2 } else { 4 };
                if q[i][j] > limit {
                    return Err(invalid(format!("q[{i}][{j}] = {} exceeds {limit}", q[i][j])));
                }
            }
            entries[i][i] *= 2;
        }
        Ok(Self { d, entries })
    }

    /// Matrix at a boundary site of a domain.
    pub fn at_site(stats: &BoundaryStats, x: &Site) -> Option<Self> {
        stats.q_ij.get(x).map(|q| Self::from_counts(q).expect("counts are in range"))
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j] as f64
    }

    pub fn trace(&self) -> f64 {
        (0..self.d).map(|i| self.get(i, i)).sum()
    }

    pub fn class(&self) -> QClass {
        if self.entries.iter().flatten().all(|&v| v == 0) {
            return QClass::Zero;
        }
        let diag = (0..self.d).all(|i| self.entries[i][i] == 2);
        let off = (0..self.d)
            .tuple_combinations()
            .all(|(i, j)| self.entries[i][j] + self.entries[j][i] == 4);
        if diag && off {
            QClass::DoublePrime
        } else {
            QClass::Prime
        }
    }
}

/// `F(c; a, Q) = (a, c) + ½ Tr Q - (c, Qc)`.
pub fn f_caq(c: &[f64], a: &[f64], q: &QMatrix) -> Result<f64> {
    let d = q.dim();
    if c.len() != d || a.len() != d {
        return Err(invalid("c, a and Q must share the dimension"));
    }
    if c.iter().any(|x| x.abs() > 1.0 + 1e-12) {
        return Err(invalid("c must satisfy |c|_∞ ≤ 1"));
    }
    let ac: f64 = a.iter().zip(c).map(|(x, y)| x * y).sum();
    let mut cqc = 0.0;
    for i in 0..d {
        for j in 0..d {
            cqc += c[i] * q.get(i, j) * c[j];
        }
    }
    Ok(ac + 0.5 * q.trace() - cqc)
}

/// Every local configuration `(q_i, Q)` in two dimensions with `Σ q_i ≥ 1` and `Q` in the primed class.
pub fn admissible_configurations_2d() -> Vec<([u8; 2], QMatrix)> {
    let mut out = Vec::new();
    for q1 in 0..=2u8 {
        for q2 in 0..=2u8 {
            if q1 + q2 == 0 {
                continue;
            }
            let qi = [q1, q2];
            let free = [2 - q1, 2 - q2];
            for d0 in 0..=free[0] {
                for d1 in 0..=free[1] {
                    for o01 in 0..=(2 * free[0]).min(4) {
                        for o10 in 0..=(2 * free[1]).min(4) {
                            let m = QMatrix::from_counts(&[vec![d0, o01], vec![o10, d1]]).expect("in range");
                            if m.class() == QClass::Prime {
                                out.push((qi, m));
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

/// Points `c = (cos k_1, cos k_2)` on the two-dimensional Fermi curve `ε_k = ε_F`.
pub fn fermi_curve_2d(eps_f: f64, samples: usize) -> Vec<[f64; 2]> {
    let target = 2.0 - 0.5 * eps_f;
    (0..samples)
        .filter_map(|i| {
            let k1 = -std::f64::consts::PI + (i as f64 + 0.5) * 2.0 * std::f64::consts::PI / samples as f64;
            let c2 = target - k1.cos();
            (c2.abs() <= 1.0).then_some([k1.cos(), c2])
        })
        .collect()
}

/// Grid estimate of `min_{a,Q} min_{ε ∈ [0,2d]} max_{c on the Fermi curve} |F(c; a, Q)|`
/// in two dimensions, with `a = (2d - ε) q_i`.
#[derive(Clone, Debug, Serialize)]
pub struct MuEstimate {
    pub eps_f: f64,
    pub value: f64,
    pub configurations: usize,
    pub curve_points: usize,
}

pub fn mu_estimate(eps_f: f64, d: usize) -> Result<MuEstimate> {
    if d != 2 {
        return Err(invalid("the μ(ε_F) estimate is implemented for d = 2"));
    }
    if !(eps_f > 0.0 && eps_f < 8.0) {
        return Err(invalid(format!("ε_F must lie in (0, 4d), got {eps_f}")));
    }
    let curve = fermi_curve_2d(eps_f, 256);
    if curve.is_empty() {
        return Err(invalid(format!("no Fermi-curve points for ε_F = {eps_f}")));
    }
    let configs = admissible_configurations_2d();
    let mut best = f64::INFINITY;
    for (qi, q) in &configs {
        for step in 0..64 {
            let eps = 4.0 * step as f64 / 63.0;
            let a = [(4.0 - eps) * qi[0] as f64, (4.0 - eps) * qi[1] as f64];
            let worst = curve
                .iter()
                .map(|c| f_caq(c, &a, q).expect("valid input").abs())
                .fold(0.0, f64::max);
            best = best.min(worst);
        }
    }
    Ok(MuEstimate {
        eps_f,
        value: best,
        configurations: configs.len(),
        curve_points: curve.len(),
    })
}
