//! Finite lattice domains in `Z^d`, periodic tori, and boundary statistics.
//!
//! A [`Domain`] is either *free* (a finite subset of `Z^d`, complements taken
//! in all of `Z^d`) or *embedded* in a [`Torus`] (coordinates reduced modulo
//! the side lengths, complements taken inside the torus). Sites are always
//! kept in lexicographic order so that operator rows, enumeration order and
//! serialized files are reproducible.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use itertools::Itertools;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Default upper bound on the number of subsets `enumerate_domains` will yield.
pub const DEFAULT_ENUMERATION_CAP: u128 = 10_000_000;

/// A lattice site, one integer coordinate per axis.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub Vec<i64>);

impl Site {
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    fn shifted(&self, axis: usize, delta: i64) -> Site {
        let mut c = self.0.clone();
        c[axis] += delta;
        Site(c)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0.iter().join(","))
    }
}

/// A periodic box `Z_{L1} x ... x Z_{Ld}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Torus {
    dims: Vec<usize>,
}

impl Torus {
    /// Every side must be at least 3 so that the `2d` neighbors of a site are distinct.
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(Error::InvalidTorus("no sides given".into()));
        }
        if let Some(&l) = dims.iter().find(|&&l| l < 3) {
            return Err(Error::InvalidTorus(format!("side length {l} < 3")));
        }
        Ok(Torus { dims })
    }

    pub fn cube(dim: usize, side: usize) -> Result<Self> {
        Torus::new(vec![side; dim])
    }

    /// Parses `L1xL2x...`, e.g. `6x6`.
    pub fn parse(text: &str) -> Result<Self> {
        let dims = text
            .trim()
            .split('x')
            .map(|s| {
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidTorus(format!("bad side length {s:?} in {text:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Torus::new(dims)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.len()
    }

    pub fn volume(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn wrap(&self, coords: &[i64]) -> Site {
        Site(
            coords
                .iter()
                .zip(&self.dims)
                .map(|(&c, &l)| c.rem_euclid(l as i64))
                .collect(),
        )
    }

    /// Row-major index; the first axis is most significant, so index order
    /// coincides with lexicographic site order.
    pub fn index_of(&self, site: &Site) -> usize {
        let w = self.wrap(site.coords());
        w.0.iter()
            .zip(&self.dims)
            .fold(0usize, |acc, (&c, &l)| acc * l + c as usize)
    }

    pub fn site_at(&self, mut index: usize) -> Site {
        let mut coords = vec![0i64; self.dims.len()];
        for (axis, &l) in self.dims.iter().enumerate().rev() {
            coords[axis] = (index % l) as i64;
            index /= l;
        }
        Site(coords)
    }

    /// Neighbors of a site index, ordered `-e_1, +e_1, -e_2, +e_2, ...`.
    pub fn neighbor_indices(&self, index: usize) -> Vec<usize> {
        let site = self.site_at(index);
        let mut out = Vec::with_capacity(2 * self.dim());
        for axis in 0..self.dim() {
            for delta in [-1, 1] {
                out.push(self.index_of(&site.shifted(axis, delta)));
            }
        }
        out
    }

    /// Index of `site(index) + site(displacement)`.
    pub fn translate(&self, index: usize, displacement: usize) -> usize {
        let a = self.site_at(index);
        let b = self.site_at(displacement);
        let sum: Vec<i64> = a.0.iter().zip(&b.0).map(|(x, y)| x + y).collect();
        self.index_of(&Site(sum))
    }

    /// Graph distance from every site to the marked set (BFS over nearest-neighbor bonds).
    pub fn distances_to(&self, marked: &[bool]) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.volume()];
        let mut queue = VecDeque::new();
        for (i, &m) in marked.iter().enumerate() {
            if m {
                dist[i] = 0;
                queue.push_back(i);
            }
        }
        while let Some(i) = queue.pop_front() {
            for j in self.neighbor_indices(i) {
                if dist[j] == usize::MAX {
                    dist[j] = dist[i] + 1;
                    queue.push_back(j);
                }
            }
        }
        dist
    }
}

impl fmt::Display for Torus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.dims.iter().join("x"))
    }
}

/// A finite nonempty set of sites, optionally embedded in a torus.
#[derive(Clone, Debug)]
pub struct Domain {
    dim: usize,
    sites: Vec<Site>,
    index: HashMap<Site, usize>,
    ambient: Option<Torus>,
}

impl PartialEq for Domain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.sites == other.sites && self.ambient == other.ambient
    }
}

impl Eq for Domain {}

impl Domain {
    /// A finite subset of `Z^d`.
    pub fn free(dim: usize, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        Self::build(dim, sites.into_iter().map(|s| (s, None)), None)
    }

    /// A subset of a torus; coordinates are reduced modulo the side lengths.
    pub fn embedded(torus: &Torus, sites: impl IntoIterator<Item = Site>) -> Result<Self> {
        Self::build(
            torus.dim(),
            sites.into_iter().map(|s| (s, None)),
            Some(torus.clone()),
        )
    }

    fn build(
        dim: usize,
        sites: impl Iterator<Item = (Site, Option<usize>)>,
        ambient: Option<Torus>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dimension must be at least 1"));
        }
        let mut collected = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for (site, line) in sites {
            if site.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: site.dim(),
                    line,
                });
            }
            let site = match &ambient {
                Some(t) => t.wrap(site.coords()),
                None => site,
            };
            if !seen.insert(site.clone()) {
                return Err(Error::DuplicateSite {
                    site: site.to_string(),
                    line,
                });
            }
            collected.push(site);
        }
        if collected.is_empty() {
            return Err(Error::EmptyDomain);
        }
        collected.sort();
        let index = collected
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Domain {
            dim,
            sites: collected,
            index,
            ambient,
        })
    }

    /// The box `[0, s1) x ... x [0, sd)` in `Z^d`.
    pub fn free_box(sides: &[usize]) -> Result<Self> {
        let ranges = sides.iter().map(|&s| 0..s as i64);
        let sites = ranges.multi_cartesian_product().map(Site);
        Domain::free(sides.len(), sites)
    }

    pub fn from_mask(torus: &Torus, mask: &[bool]) -> Result<Self> {
        if mask.len() != torus.volume() {
            return Err(invalid(format!(
                "mask length {} does not match torus volume {}",
                mask.len(),
                torus.volume()
            )));
        }
        let sites = mask
            .iter()
            .enumerate()
            .filter(|(_, &m)| m)
            .map(|(i, _)| torus.site_at(i));
        Domain::embedded(torus, sites)
    }

    pub fn from_indices(torus: &Torus, indices: &[usize]) -> Result<Self> {
        Domain::embedded(torus, indices.iter().map(|&i| torus.site_at(i)))
    }

    /// All of `Ω`.
    pub fn full(torus: &Torus) -> Self {
        Domain::from_mask(torus, &vec![true; torus.volume()]).expect("torus is nonempty")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    pub fn ambient(&self) -> Option<&Torus> {
        self.ambient.as_ref()
    }

    pub fn contains(&self, site: &Site) -> bool {
        self.index.contains_key(site)
    }

    /// Position of a site in the lexicographic site list.
    pub fn position(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }

    /// The `2d` nearest neighbors of `site`, wrapped when the domain is embedded.
    pub fn neighbors(&self, site: &Site) -> Vec<Site> {
        let mut out = Vec::with_capacity(2 * self.dim);
        for axis in 0..self.dim {
            for delta in [-1, 1] {
                let s = site.shifted(axis, delta);
                out.push(match &self.ambient {
                    Some(t) => t.wrap(s.coords()),
                    None => s,
                });
            }
        }
        out
    }

    fn step(&self, site: &Site, axis: usize, delta: i64) -> Site {
        let s = site.shifted(axis, delta);
        match &self.ambient {
            Some(t) => t.wrap(s.coords()),
            None => s,
        }
    }

    /// Membership mask over the ambient torus (embedded domains only).
    pub fn mask(&self) -> Option<Vec<bool>> {
        let t = self.ambient.as_ref()?;
        let mut m = vec![false; t.volume()];
        for s in &self.sites {
            m[t.index_of(s)] = true;
        }
        Some(m)
    }

    /// `Ω \ Λ` for an embedded domain; `None` when free or when `Λ = Ω`.
    pub fn complement(&self) -> Option<Domain> {
        let t = self.ambient.as_ref()?;
        let mask: Vec<bool> = self.mask()?.into_iter().map(|m| !m).collect();
        if mask.iter().any(|&m| m) {
            Domain::from_mask(t, &mask).ok()
        } else {
            None
        }
    }

    /// Same coordinates, viewed as a subset of `Z^d` with no wrap-around.
    pub fn to_free(&self) -> Domain {
        Domain {
            dim: self.dim,
            sites: self.sites.clone(),
            index: self.index.clone(),
            ambient: None,
        }
    }

    /// Short stable hash of the serialized domain.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(serialize_domain(self).as_bytes());
        hex::encode(digest)[..16].to_string()
    }
}

/// Boundary and neighbor statistics of a domain.
///
/// The per-site maps are keyed by boundary sites only; `q_ij` follows the
/// raw counting convention (diagonal in `[0,2]`, off-diagonal in `[0,4]`).
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryStats {
    pub boundary: Vec<Site>,
    pub boundary_size: usize,
    pub q_i: BTreeMap<Site, Vec<u8>>,
    pub q_ij: BTreeMap<Site, Vec<Vec<u8>>>,
    pub q_x: BTreeMap<Site, u32>,
    /// `k_hist[i]` = number of sites with exactly `i` neighbors in the domain.
    pub k_hist: Vec<usize>,
    pub bonds: usize,
    /// `2d * K`, with `K = sum_i (2d - i)/(2d) K_i`.
    pub k_numerator: usize,
    /// Bonds between `Λ` and `Ω \ Λ`; present for embedded domains.
    pub crossing_bonds: Option<usize>,
    dim: usize,
}

impl BoundaryStats {
    /// `K = sum_i (2d - i)/(2d) K_i`.
    pub fn k_weighted(&self) -> f64 {
        self.k_numerator as f64 / (2 * self.dim) as f64
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

pub fn boundary_stats(domain: &Domain) -> BoundaryStats {
    let d = domain.dim();
    let two_d = 2 * d;
    let mut k_hist = vec![0usize; two_d + 1];
    let mut bonds_twice = 0usize;
    let mut in_boundary = vec![false; domain.len()];

    for (p, x) in domain.sites().iter().enumerate() {
        let inside = domain
            .neighbors(x)
            .iter()
            .filter(|y| domain.contains(y))
            .count();
        k_hist[inside] += 1;
        bonds_twice += inside;
        in_boundary[p] = inside < two_d;
    }

    let is_boundary = |s: &Site| domain.position(s).is_some_and(|p| in_boundary[p]);

    let mut boundary = Vec::new();
    let mut q_i = BTreeMap::new();
    let mut q_ij = BTreeMap::new();
    let mut q_x = BTreeMap::new();
    for (p, x) in domain.sites().iter().enumerate() {
        if !in_boundary[p] {
            continue;
        }
        let mut qi = vec![0u8; d];
        let mut qij = vec![vec![0u8; d]; d];
        for i in 0..d {
            for di in [-1, 1] {
                let y = domain.step(x, i, di);
                if !domain.contains(&y) {
                    qi[i] += 1;
                } else if is_boundary(&y) {
                    for j in 0..d {
                        for dj in [-1, 1] {
                            if !domain.contains(&domain.step(&y, j, dj)) {
                                qij[i][j] += 1;
                            }
                        }
                    }
                }
            }
        }
        q_x.insert(x.clone(), qi.iter().map(|&v| v as u32).sum());
        q_i.insert(x.clone(), qi);
        q_ij.insert(x.clone(), qij);
        boundary.push(x.clone());
    }

    let k_numerator: usize = k_hist
        .iter()
        .enumerate()
        .map(|(i, &k)| (two_d - i) * k)
        .sum();

    BoundaryStats {
        boundary_size: boundary.len(),
        boundary,
        q_i,
        q_ij,
        q_x,
        k_hist,
        bonds: bonds_twice / 2,
        k_numerator,
        // Sides >= 3 make every neighbor distinct, so each missing neighbor is one crossing bond.
        crossing_bonds: domain.ambient().map(|_| k_numerator),
        dim: d,
    }
}

/// `|∂(Ω \ Λ)|` for an embedded domain (0 when `Λ = Ω`).
pub fn complement_boundary_size(domain: &Domain) -> Option<usize> {
    domain.ambient()?;
    Some(
        domain
            .complement()
            .map(|c| boundary_stats(&c).boundary_size)
            .unwrap_or(0),
    )
}

/// `C(n, k)` with saturation at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Index sets of size `m` in lexicographic order, subject to a size cap.
pub fn enumerate_index_sets(
    torus: &Torus,
    m: usize,
    cap: u128,
) -> Result<impl Iterator<Item = Vec<usize>>> {
    let v = torus.volume();
    if m == 0 || m > v {
        return Err(invalid(format!(
            "subset size {m} must be in 1..={v} for torus {torus}"
        )));
    }
    let count = binomial(v, m);
    if count > cap {
        return Err(Error::EnumerationTooLarge { count, cap });
    }
    Ok((0..v).combinations(m))
}

/// Every `Λ ⊆ Ω` with `|Λ| = m`, once each, in lexicographic order.
pub fn enumerate_domains(
    torus: &Torus,
    m: usize,
    cap: u128,
) -> Result<impl Iterator<Item = Domain> + '_> {
    let sets = enumerate_index_sets(torus, m, cap)?;
    Ok(sets.map(move |idx| Domain::from_indices(torus, &idx).expect("indices are distinct")))
}

/// Parses the line-oriented domain format:
///
/// ```text
/// d=2
/// torus=4x4      (optional)
/// 0 0
/// 0 1
/// ```
pub fn parse_domain(text: &str) -> Result<Domain> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());

    let (ln, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "missing `d=<int>` header".into(),
    })?;
    let dim: usize = header
        .strip_prefix("d=")
        .and_then(|v| v.trim().parse().ok())
        .filter(|&d: &usize| d >= 1)
        .ok_or_else(|| Error::Parse {
            line: ln,
            msg: format!("expected `d=<int>`, got {header:?}"),
        })?;

    let mut torus = None;
    let mut sites = Vec::new();
    for (ln, line) in lines {
        if let Some(spec) = line.strip_prefix("torus=") {
            if torus.is_some() || !sites.is_empty() {
                return Err(Error::Parse {
                    line: ln,
                    msg: "torus line must directly follow the header".into(),
                });
            }
            let t = Torus::parse(spec).map_err(|e| Error::Parse {
                line: ln,
                msg: e.to_string(),
            })?;
            if t.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: t.dim(),
                    line: Some(ln),
                });
            }
            torus = Some(t);
            continue;
        }
        let coords = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<i64>().map_err(|_| Error::Parse {
                    line: ln,
                    msg: format!("bad coordinate {tok:?}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sites.push((Site(coords), Some(ln)));
    }
    Domain::build(dim, sites.into_iter(), torus)
}

pub fn serialize_domain(domain: &Domain) -> String {
    let mut out = format!("d={}\n", domain.dim());
    if let Some(t) = domain.ambient() {
        out.push_str(&format!("torus={t}\n"));
    }
    for s in domain.sites() {
        out.push_str(&s.coords().iter().join(" "));
        out.push('\n');
    }
    out
}
