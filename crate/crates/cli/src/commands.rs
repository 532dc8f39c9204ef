//! Subcommand parameters and runners.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context as _, Result};
use clap::Args;
use fk_core::bounds::{
    gradient_checks_random, lemma_a_energy_check, lemma_a_singular_check, BoundReport, Checker,
};
use fk_core::bulk::{default_grid_points, BulkModel};
use fk_core::lattice::{enumerate_index_sets, parse_domain, serialize_domain, Domain, Torus};
use fk_core::segregation::{
    exact_ensemble, observables, run_chains, uniform_boundary_fraction, EnergyMode, EnergyModel,
    SamplerConfig,
};
use fk_core::spectral::{build_dirichlet, build_screened, eigensolve_capped, eigenvectors_csv, spectrum_csv};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{usage, Repulsion, ResolvedConfig};
use crate::output::RunDir;

/// How a run ended when it did not error.
#[derive(Debug, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    /// Names of the checks that failed.
    ChecksFailed(Vec<String>),
    /// Artifacts that were missing or not covered by a manifest.
    Incomplete(Vec<String>),
}

/// Settings shared by every subcommand.
pub struct Context {
    pub subcommand: &'static str,
    pub seed: u64,
    pub out: PathBuf,
    pub quadrature_points: Option<usize>,
    pub eigensolver_cap: usize,
}

impl Context {
    pub fn open(&self) -> Result<RunDir> {
        RunDir::create(&self.out)
    }

    pub fn finish(&self, run: RunDir, params: &impl Serialize) -> Result<()> {
        let config = ResolvedConfig {
            subcommand: self.subcommand.to_string(),
            seed: self.seed,
            output_dir: self.out.clone(),
            quadrature_points: self.quadrature_points,
            eigensolver_cap: self.eigensolver_cap,
            parameters: serde_json::to_value(params)?,
        };
        run.finish(&config)
    }

    /// Bulk model on the requested grid; the manifest records the grid used.
    fn bulk(&mut self, d: usize) -> Result<BulkModel> {
        let m = *self.quadrature_points.get_or_insert_with(|| default_grid_points(d));
        BulkModel::new(d, m).map_err(|e| usage(format!("--quadrature-points: {e}")))
    }
}

/// Comma-separated list of floats.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FloatList(pub Vec<f64>);

impl FromStr for FloatList {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| format!("bad number {t:?}")))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map(Self)
    }
}

fn require<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| usage(format!("missing required {flag}")))
}

fn parse_torus(text: &str) -> Result<Torus> {
    Torus::parse(text).map_err(|e| usage(format!("--torus {text:?}: {e}")))
}

/// Read a domain file, embedding it in `--torus` when one is given.
fn load_domain(path: &Path, torus: Option<&str>) -> Result<Domain> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("--domain: cannot read {}", path.display()))?;
    let domain = parse_domain(&text).map_err(|e| usage(format!("--domain {}: {e}", path.display())))?;
    let Some(t) = torus else {
        return Ok(domain);
    };
    let torus = parse_torus(t)?;
    match domain.ambient() {
        Some(a) if *a == torus => Ok(domain),
        Some(a) => Err(usage(format!(
            "--torus {torus} conflicts with the domain file's torus {a}"
        ))),
        None => Domain::embedded(&torus, domain.sites().iter().cloned())
            .map_err(|e| usage(format!("--torus {torus}: {e}"))),
    }
}

fn fmt_e(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumParams {
    /// Domain file (`d=<int>`, optional `torus=LxL`, one site per line).
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Embed the domain in this torus, e.g. `6x6`.
    #[arg(long)]
    pub torus: Option<String>,
    /// On-site repulsion; `inf` gives the Dirichlet operator on the domain.
    #[arg(long = "U", value_name = "U|inf")]
    #[serde(rename = "U")]
    pub u: Option<Repulsion>,
    /// Also write the eigenvectors.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub vectors: Option<bool>,
}

pub fn spectrum(mut p: SpectrumParams, ctx: &Context) -> Result<Outcome> {
    let path = require(p.domain.clone(), "--domain")?;
    let domain = load_domain(&path, p.torus.as_deref())?;
    let u = *p.u.get_or_insert(Repulsion(f64::INFINITY));
    let vectors = *p.vectors.get_or_insert(false);
    let op = match u.finite() {
        None => build_dirichlet(&domain),
        Some(u) => {
            let torus = domain
                .ambient()
                .ok_or_else(|| usage("finite --U needs a torus (--torus or a torus= line in the domain file)"))?;
            build_screened(torus, &domain, u)?
        }
    };
    let spec = eigensolve_capped(&op, ctx.eigensolver_cap)?;
    let csv = spectrum_csv(&spec.eigenvalues);
    let mut run = ctx.open()?;
    run.write("spectrum.csv", &csv)?;
    if vectors {
        run.write("eigenvectors.csv", eigenvectors_csv(&op, &spec))?;
    }
    ctx.finish(run, &p)?;
    print!("{csv}");
    Ok(Outcome::Ok)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BulkParams {
    /// Lattice dimension.
    #[arg(long)]
    pub d: Option<usize>,
    /// Electron fillings in [0, 1], comma-separated.
    #[arg(long)]
    pub n: Option<FloatList>,
    /// Inverse temperatures for the free-energy table.
    #[arg(long)]
    pub beta: Option<FloatList>,
    /// Chemical potentials for the free-energy table.
    #[arg(long)]
    pub mu: Option<FloatList>,
}

pub fn bulk(p: BulkParams, ctx: &mut Context) -> Result<Outcome> {
    let d = require(p.d, "--d")?;
    if d == 0 {
        return Err(usage("--d must be >= 1"));
    }
    if p.beta.is_some() != p.mu.is_some() {
        return Err(usage("--beta and --mu must be given together"));
    }
    if p.n.is_none() && p.beta.is_none() {
        return Err(usage("give --n, or --beta with --mu"));
    }
    let model = ctx.bulk(d)?;
    let mut tables = Vec::new();
    if let Some(ns) = &p.n {
        let mut csv = String::from("n,eps_F,e_n\n");
        for &n in &ns.0 {
            let fermi = model.fermi_level(n).map_err(|e| usage(format!("--n: {e}")))?;
            let e = model.bulk_energy(n)?;
            let _ = writeln!(csv, "{n},{},{}", fmt_e(fermi.eps_f), fmt_e(e));
        }
        tables.push(("bulk.csv", csv));
    }
    if let (Some(betas), Some(mus)) = (&p.beta, &p.mu) {
        let mut csv = String::from("beta,mu,f\n");
        for &beta in &betas.0 {
            for &mu in &mus.0 {
                let f = model
                    .free_energy_per_site(beta, mu)
                    .map_err(|e| usage(format!("--beta: {e}")))?;
                let _ = writeln!(csv, "{beta},{mu},{}", fmt_e(f));
            }
        }
        tables.push(("free_energy.csv", csv));
    }
    let mut run = ctx.open()?;
    for (name, csv) in &tables {
        run.write(name, csv)?;
        print!("{csv}");
    }
    ctx.finish(run, &p)?;
    Ok(Outcome::Ok)
}

pub const CHECKS: [&str; 7] = [
    "theorem1",
    "prop41",
    "theorem2",
    "decorrelation",
    "prop63_second",
    "majorization",
    "appendix",
];

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsParams {
    /// One of theorem1, prop41, theorem2, decorrelation, prop63_second,
    /// majorization, appendix, or `all`.
    #[arg(long)]
    pub check: Option<String>,
    #[arg(long)]
    pub domain: Option<PathBuf>,
    /// Electron count; theorem1 runs every filling when omitted.
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub n_electrons: Option<usize>,
    #[arg(long = "U", value_name = "U|inf")]
    #[serde(rename = "U")]
    pub u: Option<Repulsion>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub torus: Option<String>,
}

struct BoundsInputs<'a> {
    domain: &'a Domain,
    n: Option<usize>,
    u: Option<f64>,
    beta: Option<f64>,
    mu: Option<f64>,
}

impl BoundsInputs<'_> {
    fn torus(&self) -> Result<&Torus> {
        self.domain
            .ambient()
            .ok_or_else(|| usage("this check needs a torus (--torus or a torus= line in the domain file)"))
    }

    fn finite_u(&self) -> Result<f64> {
        self.u.ok_or_else(|| usage("this check needs a finite --U"))
    }

    fn n(&self) -> Result<usize> {
        self.n.ok_or_else(|| usage("this check needs --N"))
    }

    fn thermal(&self) -> Result<(f64, f64)> {
        match (self.beta, self.mu) {
            (Some(b), Some(m)) => Ok((b, m)),
            _ => Err(usage("this check needs --beta and --mu")),
        }
    }
}

fn run_check(
    name: &str,
    inp: &BoundsInputs,
    checker: &Checker,
    bulk: &BulkModel,
    seed: u64,
) -> Result<Vec<BoundReport>> {
    let dom = inp.domain;
    Ok(match name {
        "theorem1" => match inp.n {
            Some(n) => checker.theorem1_check(dom, n, inp.u)?.to_vec(),
            None => {
                let mut out = Vec::new();
                for n in 1..=dom.len() {
                    out.extend(checker.theorem1_check(dom, n, inp.u)?);
                }
                out
            }
        },
        "prop41" => {
            let (t, u, n) = (inp.torus()?, inp.finite_u()?, inp.n()?);
            vec![checker.prop41_check(t, dom, n, u)?]
        }
        "theorem2" => {
            let (t, u, (b, m)) = (inp.torus()?, inp.finite_u()?, inp.thermal()?);
            checker.theorem2_check(t, dom, b, m, u)?
        }
        "decorrelation" => {
            let (t, u, (b, m)) = (inp.torus()?, inp.finite_u()?, inp.thermal()?);
            vec![checker.decorrelation_check(t, dom, b, m, u)?]
        }
        "prop63_second" => {
            let (b, m) = inp.thermal()?;
            vec![checker.prop63_second_check(dom, b, m)?]
        }
        "majorization" => {
            let (b, m) = inp.thermal()?;
            vec![checker.majorization_domain_check(dom, b, m)?]
        }
        "appendix" => {
            let mut out = Vec::new();
            if let Some(n) = inp.n {
                let filling = n as f64 / dom.len() as f64;
                let fermi = bulk.fermi_level(filling)?;
                out.push(lemma_a_singular_check(bulk, fermi.eps_f));
                out.push(lemma_a_energy_check(bulk, filling)?);
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            out.extend(gradient_checks_random(dom, &mut rng)?);
            out
        }
        other => {
            return Err(usage(format!(
                "--check: unknown check {other:?}; expected one of {} or all",
                CHECKS.join(", ")
            )))
        }
    })
}

pub fn bounds(p: BoundsParams, ctx: &mut Context) -> Result<Outcome> {
    let check = require(p.check.clone(), "--check")?;
    if check != "all" && !CHECKS.contains(&check.as_str()) {
        return Err(usage(format!(
            "--check: unknown check {check:?}; expected one of {} or all",
            CHECKS.join(", ")
        )));
    }
    let path = require(p.domain.clone(), "--domain")?;
    let domain = load_domain(&path, p.torus.as_deref())?;
    if let Some(n) = p.n_electrons {
        if n > domain.len() && p.u.and_then(Repulsion::finite).is_none() {
            return Err(usage(format!("--N: {n} exceeds |Λ| = {}", domain.len())));
        }
    }
    let inp = BoundsInputs {
        domain: &domain,
        n: p.n_electrons,
        u: p.u.and_then(Repulsion::finite),
        beta: p.beta,
        mu: p.mu,
    };
    let bulk = ctx.bulk(domain.dim())?;
    let checker = Checker::new(bulk.clone()).with_eigensolver_cap(ctx.eigensolver_cap);

    let mut reports = Vec::new();
    if check == "all" {
        for name in CHECKS {
            match run_check(name, &inp, &checker, &bulk, ctx.seed) {
                Ok(r) => reports.extend(r),
                Err(e) if e.downcast_ref::<crate::config::UsageError>().is_some() => {
                    log::info!("skipping {name}: {e}");
                }
                Err(e) => return Err(e.context(format!("check {name}"))),
            }
        }
        if reports.is_empty() {
            return Err(usage("--check all: no check has the inputs it needs"));
        }
    } else {
        reports = run_check(&check, &inp, &checker, &bulk, ctx.seed)
            .map_err(|e| e.context(format!("--check {check}")))?;
    }

    let mut jsonl = String::new();
    let mut csv = String::from("name,lhs,rhs,slack,tol,pass\n");
    for r in &reports {
        jsonl.push_str(&serde_json::to_string(r)?);
        jsonl.push('\n');
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            r.name,
            fmt_e(r.lhs),
            fmt_e(r.rhs),
            fmt_e(r.slack),
            fmt_e(r.tol),
            r.pass
        );
    }
    let mut run = ctx.open()?;
    run.write("reports.jsonl", &jsonl)?;
    run.write("summary.csv", &csv)?;
    ctx.finish(run, &p)?;
    print!("{jsonl}");

    let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect();
    Ok(if failed.is_empty() {
        Outcome::Ok
    } else {
        Outcome::ChecksFailed(failed)
    })
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealParams {
    #[arg(long)]
    pub torus: Option<String>,
    /// Number of holes `m`.
    #[arg(long)]
    pub holes: Option<usize>,
    /// Fixed electron count (ground-state weights).
    #[arg(long, conflicts_with = "mu")]
    pub electrons: Option<usize>,
    /// Chemical potential (grand-canonical weights; needs --beta).
    #[arg(long)]
    pub mu: Option<f64>,
    /// Electronic inverse temperature used with --mu.
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long = "U", value_name = "U|inf")]
    #[serde(rename = "U")]
    pub u: Option<Repulsion>,
    /// Sampling inverse temperatures, comma-separated and nondecreasing.
    #[arg(long)]
    pub schedule: Option<FloatList>,
    /// Metropolis steps per schedule entry.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long)]
    pub chains: Option<usize>,
    /// Fraction of each chain discarded before averaging.
    #[arg(long)]
    pub burn_in: Option<f64>,
    /// Random configurations used for the uniform reference.
    #[arg(long)]
    pub uniform_samples: Option<usize>,
}

/// Final boundary fraction must be at most this multiple of the uniform one.
pub const SEGREGATION_RATIO: f64 = 0.6;

pub fn anneal(mut p: AnnealParams, ctx: &Context) -> Result<Outcome> {
    let torus = parse_torus(&require(p.torus.clone(), "--torus")?)?;
    let v = torus.volume();
    let m = require(p.holes, "--holes")?;
    if m == 0 || m >= v {
        return Err(usage(format!("--holes: need 1 <= m < {v}, got {m}")));
    }
    let u = *p.u.get_or_insert(Repulsion(f64::INFINITY));
    let mode = match (p.electrons, p.mu) {
        (Some(n), None) => {
            let cap = if u.finite().is_some() { v } else { m };
            if n > cap {
                return Err(usage(format!("--electrons: {n} exceeds the {cap} available levels")));
            }
            EnergyMode::Ground { n_electrons: n }
        }
        (None, Some(mu)) => {
            let beta = require(p.beta, "--beta (electronic, with --mu)")?;
            if !(beta > 0.0) {
                return Err(usage("--beta must be > 0"));
            }
            EnergyMode::Thermal { beta, mu }
        }
        _ => return Err(usage("give exactly one of --electrons or --mu")),
    };
    let schedule = p
        .schedule
        .get_or_insert(FloatList(vec![1.0, 2.0, 4.0, 8.0, 16.0]))
        .0
        .clone();
    let sampler = SamplerConfig {
        schedule,
        steps_per_beta: *p.steps.get_or_insert(2000),
        seed: ctx.seed,
    };
    sampler.validate().map_err(|e| usage(format!("--schedule/--steps: {e}")))?;
    let chains = *p.chains.get_or_insert(4);
    if chains == 0 {
        return Err(usage("--chains must be >= 1"));
    }
    let burn_in = *p.burn_in.get_or_insert(fk_core::segregation::DEFAULT_BURN_IN);
    if !(0.0..1.0).contains(&burn_in) {
        return Err(usage("--burn-in must lie in [0, 1)"));
    }
    let uniform_samples = *p.uniform_samples.get_or_insert(1000);
    if uniform_samples == 0 {
        return Err(usage("--uniform-samples must be >= 1"));
    }

    let model = EnergyModel::new(torus.clone(), mode, u.finite())?.with_eigensolver_cap(ctx.eigensolver_cap);
    let trajectories = run_chains(&model, m, &sampler, chains)?;

    let mut run = ctx.open()?;
    let mut per_chain = Vec::new();
    for t in &trajectories {
        let obs = observables(&torus, t, burn_in)?;
        run.write(&format!("trajectory_chain{}.csv", t.chain), t.csv())?;
        let dom = Domain::from_mask(&torus, &t.final_mask)?;
        run.write(&format!("final_chain{}.dom", t.chain), serialize_domain(&dom))?;
        per_chain.push(json!({
            "chain": t.chain,
            "acceptance_rate": t.acceptance_rate,
            "final_energy": t.final_energy,
            "final_boundary_fraction": obs.boundary_fraction,
            "samples": obs.samples,
            "delta_corr": obs.delta_corr,
        }));
    }
    let best = trajectories
        .iter()
        .min_by(|a, b| a.final_energy.total_cmp(&b.final_energy))
        .expect("at least one chain");
    run.write("final.dom", serialize_domain(&Domain::from_mask(&torus, &best.final_mask)?))?;

    let mean_final = per_chain
        .iter()
        .map(|c| c["final_boundary_fraction"].as_f64().unwrap_or(f64::NAN))
        .sum::<f64>()
        / chains as f64;
    let uniform = uniform_boundary_fraction(&torus, m, uniform_samples, ctx.seed);
    let ratio = mean_final / uniform;
    let summary = json!({
        "torus": torus.to_string(),
        "holes": m,
        "best_chain": best.chain,
        "mean_final_boundary_fraction": mean_final,
        "uniform_boundary_fraction": uniform,
        "ratio": ratio,
        "threshold": SEGREGATION_RATIO,
        "pass": ratio <= SEGREGATION_RATIO,
        "chains": per_chain,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    run.write("observables.json", &text)?;
    ctx.finish(run, &p)?;
    println!(
        "mean final boundary fraction {mean_final:.6}, uniform {uniform:.6}, ratio {ratio:.4}"
    );
    Ok(Outcome::Ok)
}

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnumerateParams {
    #[arg(long)]
    pub torus: Option<String>,
    #[arg(long)]
    pub holes: Option<usize>,
    /// Also compute ground-state energies with this many electrons.
    #[arg(long)]
    pub electrons: Option<usize>,
    #[arg(long = "U", value_name = "U|inf")]
    #[serde(rename = "U")]
    pub u: Option<Repulsion>,
    /// Refuse to enumerate more configurations than this.
    #[arg(long)]
    pub max_configs: Option<u64>,
}

fn boundary_of(torus: &Torus, idx: &[usize]) -> usize {
    let mut mask = vec![false; torus.volume()];
    idx.iter().for_each(|&i| mask[i] = true);
    idx.iter()
        .filter(|&&i| torus.neighbor_indices(i).iter().any(|&j| !mask[j]))
        .count()
}

fn join_indices(idx: &[usize]) -> String {
    idx.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

pub fn enumerate(mut p: EnumerateParams, ctx: &Context) -> Result<Outcome> {
    let torus = parse_torus(&require(p.torus.clone(), "--torus")?)?;
    let v = torus.volume();
    let m = require(p.holes, "--holes")?;
    if m > v {
        return Err(usage(format!("--holes: {m} exceeds the torus volume {v}")));
    }
    if m == 0 {
        return Err(usage("--holes must be >= 1"));
    }
    let cap = *p.max_configs.get_or_insert(1_000_000) as u128;
    let u = *p.u.get_or_insert(Repulsion(f64::INFINITY));

    let mut csv = String::new();
    let summary = if let Some(n) = p.electrons {
        let model = EnergyModel::new(torus.clone(), EnergyMode::Ground { n_electrons: n }, u.finite())?
            .with_eigensolver_cap(ctx.eigensolver_cap);
        let ens = exact_ensemble(&model, m, cap).map_err(|e| usage(format!("--holes/--max-configs: {e}")))?;
        csv.push_str("index,sites,boundary_size,energy\n");
        for (i, ((c, b), e)) in ens.configs.iter().zip(&ens.boundary_sizes).zip(&ens.energies).enumerate() {
            let _ = writeln!(csv, "{i},{},{b},{}", join_indices(c), fmt_e(*e));
        }
        let ground: Vec<String> = ens.ground_set().iter().map(|g| join_indices(g)).collect();
        json!({
            "torus": torus.to_string(),
            "holes": m,
            "configurations": ens.configs.len(),
            "e_min": ens.e_min,
            "ground_set": ground,
        })
    } else {
        let sets = enumerate_index_sets(&torus, m, cap).map_err(|e| usage(format!("--holes/--max-configs: {e}")))?;
        csv.push_str("index,sites,boundary_size\n");
        let mut count = 0usize;
        for (i, idx) in sets.enumerate() {
            let _ = writeln!(csv, "{i},{},{}", join_indices(&idx), boundary_of(&torus, &idx));
            count += 1;
        }
        json!({
            "torus": torus.to_string(),
            "holes": m,
            "configurations": count,
        })
    };
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    let mut run = ctx.open()?;
    run.write("configurations.csv", &csv)?;
    run.write("summary.json", &text)?;
    ctx.finish(run, &p)?;
    print!("{text}");
    Ok(Outcome::Ok)
}
