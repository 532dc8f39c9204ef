//! Aggregate the artifacts of earlier runs into one table keyed by criterion.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use clap::Args;
use fk_core::bounds::BoundReport;
use serde::{Deserialize, Serialize};

use crate::commands::{Context, Outcome};
use crate::config::usage;
use crate::output::{Manifest, MANIFEST};

#[derive(Args, Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportParams {
    /// Directory holding run artifacts (searched recursively).
    #[arg(value_name = "DIR")]
    pub dir: Option<PathBuf>,
}

/// Acceptance-criterion id for a report name.
pub fn criterion_of(name: &str) -> &'static str {
    match name {
        "theorem1_upper" | "theorem1_lower_bulk" => "3",
        "theorem1_lower" => "4",
        "prop41" => "6",
        "theorem2_upper" | "prop62_lower" | "decorrelation" | "prop63_second" => "8",
        "majorization" => "13",
        n if n.starts_with("appendix_") => "10",
        _ => "other",
    }
}

/// Criterion id for anneal observables.
pub const SEGREGATION_CRITERION: &str = "12";

#[derive(Debug, Default)]
struct Row {
    checks: usize,
    passed: usize,
    failing: BTreeSet<String>,
}

impl Row {
    fn add(&mut self, name: &str, pass: bool) {
        self.checks += 1;
        if pass {
            self.passed += 1;
        } else {
            self.failing.insert(name.to_string());
        }
    }

    fn status(&self) -> &'static str {
        if self.passed == self.checks {
            "PASS"
        } else {
            "FAIL"
        }
    }
}

#[derive(Debug, Default)]
struct Scan {
    rows: BTreeMap<(u32, String), Row>,
    missing: Vec<String>,
    unmanifested: Vec<String>,
}

impl Scan {
    fn row(&mut self, criterion: &str) -> &mut Row {
        let key = (criterion.parse().unwrap_or(u32::MAX), criterion.to_string());
        self.rows.entry(key).or_default()
    }

    fn visit(&mut self, root: &Path, dir: &Path, skip: Option<&Path>) -> Result<()> {
        if let (Some(skip), Ok(here)) = (skip, dir.canonicalize()) {
            if here == skip {
                return Ok(());
            }
        }
        let mut files = Vec::new();
        let mut subdirs = Vec::new();
        for entry in std::fs::read_dir(dir).with_context(|| format!("cannot read {}", dir.display()))? {
            let path = entry?.path();
            if path.is_dir() {
                subdirs.push(path);
            } else {
                files.push(path);
            }
        }
        files.sort();
        subdirs.sort();
        let rel = |p: &Path| p.strip_prefix(root).unwrap_or(p).display().to_string();

        let manifest_path = dir.join(MANIFEST);
        if manifest_path.is_file() {
            let text = std::fs::read_to_string(&manifest_path)?;
            let manifest: Manifest = match serde_json::from_str(&text) {
                Ok(m) => m,
                Err(e) => {
                    self.missing.push(format!("{} (unreadable: {e})", rel(&manifest_path)));
                    return Ok(());
                }
            };
            if manifest.subcommand == "report" {
                return Ok(());
            }
            let listed: BTreeSet<&str> = manifest.artifacts.iter().map(String::as_str).collect();
            for f in &files {
                let name = f.file_name().and_then(|n| n.to_str()).unwrap_or_default();
                if name != MANIFEST && !listed.contains(name) {
                    self.unmanifested.push(rel(f));
                }
            }
            for name in &manifest.artifacts {
                let path = dir.join(name);
                if !path.is_file() {
                    self.missing.push(rel(&path));
                    continue;
                }
                if name.ends_with(".jsonl") {
                    self.read_reports(&path, &rel(&path))?;
                } else if name == "observables.json" {
                    self.read_observables(&path, &rel(&path))?;
                }
            }
        } else {
            self.unmanifested.extend(files.iter().map(|f| rel(f)));
        }
        for sub in subdirs {
            self.visit(root, &sub, skip)?;
        }
        Ok(())
    }

    fn read_reports(&mut self, path: &Path, label: &str) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            match serde_json::from_str::<BoundReport>(line) {
                Ok(r) => self.row(criterion_of(&r.name)).add(&r.name, r.pass),
                Err(e) => self.missing.push(format!("{label}:{} (unreadable: {e})", i + 1)),
            }
        }
        Ok(())
    }

    fn read_observables(&mut self, path: &Path, label: &str) -> Result<()> {
        let value: serde_json::Value = match serde_json::from_str(&std::fs::read_to_string(path)?) {
            Ok(v) => v,
            Err(e) => {
                self.missing.push(format!("{label} (unreadable: {e})"));
                return Ok(());
            }
        };
        match value.get("pass").and_then(|p| p.as_bool()) {
            Some(pass) => self.row(SEGREGATION_CRITERION).add("segregation", pass),
            None => self.missing.push(format!("{label} (no pass field)")),
        }
        Ok(())
    }
}

fn render(source: &Path, scan: &Scan) -> (String, String) {
    let failed = scan.rows.values().any(|r| !r.failing.is_empty());
    let incomplete = !scan.missing.is_empty() || !scan.unmanifested.is_empty();
    let overall = match (failed, incomplete) {
        (true, _) => "FAIL",
        (false, true) => "INCOMPLETE",
        (false, false) => "PASS",
    };

    let mut md = format!(
        "# Check report\n\nSource: `{}`\n\nOverall: **{overall}**\n\n",
        source.display()
    );
    md.push_str("| criterion | checks | passed | failed | status | failing |\n");
    md.push_str("|---|---|---|---|---|---|\n");
    let mut csv = String::from("criterion,checks,passed,failed,status,failing\n");
    for ((_, id), row) in &scan.rows {
        let failing = row.failing.iter().cloned().collect::<Vec<_>>();
        let _ = writeln!(
            md,
            "| {id} | {} | {} | {} | {} | {} |",
            row.checks,
            row.passed,
            row.checks - row.passed,
            row.status(),
            failing.join(", ")
        );
        let _ = writeln!(
            csv,
            "{id},{},{},{},{},{}",
            row.checks,
            row.passed,
            row.checks - row.passed,
            row.status(),
            failing.join(";")
        );
    }
    for (title, items) in [
        ("Missing artifacts", &scan.missing),
        ("Unmanifested artifacts (ignored)", &scan.unmanifested),
    ] {
        if !items.is_empty() {
            let _ = writeln!(md, "\n## {title}\n");
            for item in items {
                let _ = writeln!(md, "- `{item}`");
            }
        }
    }
    (md, csv)
}

pub fn report(p: &ReportParams, ctx: &Context) -> Result<Outcome> {
    let dir = p.dir.clone().ok_or_else(|| usage("missing required DIR"))?;
    if !dir.is_dir() {
        return Err(usage(format!("DIR: {} is not a directory", dir.display())));
    }
    let skip = ctx.out.canonicalize().ok();
    let mut scan = Scan::default();
    scan.visit(&dir, &dir, skip.as_deref())?;
    let (md, csv) = render(&dir, &scan);

    let mut run = ctx.open()?;
    run.write("report.md", &md)?;
    run.write("report.csv", &csv)?;
    ctx.finish(run, p)?;
    print!("{md}");

    let failing: Vec<String> = scan.rows.values().flat_map(|r| r.failing.iter().cloned()).collect();
    Ok(if !failing.is_empty() {
        Outcome::ChecksFailed(failing)
    } else if !scan.missing.is_empty() || !scan.unmanifested.is_empty() {
        Outcome::Incomplete(scan.missing.iter().chain(&scan.unmanifested).cloned().collect())
    } else {
        Outcome::Ok
    })
}
