//! Named groups of acceptance criteria.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;
use serde_json::json;

use lvwf_core::sde::write_atomic;
use lvwf_core::Result;

use crate::criteria::{criterion, run_timed, Mode, Timed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Identities,
    Fixation,
    Stationary,
    Convergence,
    Chaos,
    Invasion,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Identities => "identities",
            Suite::Fixation => "fixation",
            Suite::Stationary => "stationary",
            Suite::Convergence => "convergence",
            Suite::Chaos => "chaos",
            Suite::Invasion => "invasion",
            Suite::All => "all",
        }
    }

    pub fn criteria(self) -> Vec<u8> {
        match self {
            Suite::Identities => vec![1, 2, 3, 4, 12],
            Suite::Invasion => vec![6],
            Suite::Stationary => vec![5, 8],
            Suite::Fixation => vec![7, 9],
            Suite::Chaos => vec![10],
            Suite::Convergence => vec![11],
            Suite::All => (1..=12).collect(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub fast: bool,
    pub passed: bool,
    pub results: Vec<Timed>,
    #[serde(skip)]
    pub dir: PathBuf,
}

impl SuiteReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        for t in &self.results {
            s.push_str(&t.line());
            s.push('\n');
        }
        let passed = self.results.iter().filter(|t| t.outcome.passed && t.within_budget()).count();
        s.push_str(&format!(
            "suite {}: {passed}/{} passed{}\n",
            self.suite.name(),
            self.results.len(),
            if self.fast { " (fast)" } else { "" }
        ));
        s
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_atomic(path, |f| {
        f.write_all(bytes)?;
        Ok(())
    })
}

/// Runs every criterion of the suite in order, writing
/// `<root>/suite-<name>/criterion_XX/` per criterion and a `summary.json`.
/// `progress` sees each result as soon as it is available.
pub fn run_suite(suite: Suite, mode: Mode, root: &Path, mut progress: impl FnMut(&Timed)) -> Result<SuiteReport> {
    let dir = root.join(format!("suite-{}", suite.name()));
    std::fs::create_dir_all(&dir)?;
    let mut results = Vec::new();
    for id in suite.criteria() {
        let c = criterion(id).expect("suite ids are valid");
        let t = run_timed(c, mode)?;
        let cdir = dir.join(format!("criterion_{id:02}"));
        std::fs::create_dir_all(&cdir)?;
        for (name, bytes) in &t.outcome.files {
            write_bytes(&cdir.join(name), bytes)?;
        }
        let mut verdict = serde_json::to_vec_pretty(&json!({
            "id": id,
            "name": c.name,
            "passed": t.outcome.passed,
            "within_budget": t.within_budget(),
            "seconds": t.seconds,
            "budget_secs": t.budget_secs,
            "summary": t.outcome.summary,
            "details": t.outcome.details,
        }))?;
        verdict.push(b'\n');
        write_bytes(&cdir.join("verdict.json"), &verdict)?;
        progress(&t);
        results.push(t);
    }
    let report = SuiteReport {
        suite,
        fast: mode.fast,
        passed: results.iter().all(|t| t.outcome.passed && t.within_budget()),
        results,
        dir: dir.clone(),
    };
    let mut summary = serde_json::to_vec_pretty(&report)?;
    summary.push(b'\n');
    write_bytes(&dir.join("summary.json"), &summary)?;
    Ok(report)
}
