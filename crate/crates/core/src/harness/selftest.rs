//! Built-in scenarios and the self-test that runs them.

use std::fs;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;

use super::report::emit_reports;
use super::run::{run, sharpness_defects, RunReport};
use super::scenario::{parse_scenario, Scenario};
use crate::error::Result;
use crate::estimates;

/// `(file name, contents)` of every scenario shipped with the crate.
pub const BUILTIN: [(&str, &str); 8] = [
    ("barenblatt_n1_m2.json", include_str!("../../scenarios/barenblatt_n1_m2.json")),
    ("hyperbolic_bump_m2.json", include_str!("../../scenarios/hyperbolic_bump_m2.json")),
    ("circle_pme_m2.json", include_str!("../../scenarios/circle_pme_m2.json")),
    ("circle_pme_m3.json", include_str!("../../scenarios/circle_pme_m3.json")),
    ("sphere_fde_m05.json", include_str!("../../scenarios/sphere_fde_m05.json")),
    ("sphere_fde_m09.json", include_str!("../../scenarios/sphere_fde_m09.json")),
    ("barenblatt_fde_n2.json", include_str!("../../scenarios/barenblatt_fde_n2.json")),
    ("constant_circle.json", include_str!("../../scenarios/constant_circle.json")),
];

pub fn builtin_scenarios() -> Result<Vec<Scenario>> {
    BUILTIN.iter().map(|(_, text)| parse_scenario(text)).collect()
}

pub fn builtin(name: &str) -> Result<Scenario> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(file, _)| file.trim_end_matches(".json") == name)
        .ok_or_else(|| crate::Error::Config(format!("no built-in scenario named {name}")))?;
    parse_scenario(text)
}

#[derive(Clone, Debug)]
pub struct SelftestItem {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl SelftestItem {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

fn scratch_dir(tag: &str) -> PathBuf {
    static COUNTER: AtomicUsize = AtomicUsize::new(0);
    let k = COUNTER.fetch_add(1, Ordering::Relaxed);
    std::env::temp_dir().join(format!("pme-verify-{tag}-{}-{k}", std::process::id()))
}

fn run_item(name: &str, report: &Result<RunReport>) -> SelftestItem {
    match report {
        Ok(r) => {
            let failing: Vec<&str> = r.failing().iter().map(|f| f.check_id.as_str()).collect();
            let detail = if failing.is_empty() {
                format!("{} checks, {:.1}s", r.reports.len(), r.wall_time.as_secs_f64())
            } else {
                format!("failing: {}", failing.join(" "))
            };
            SelftestItem::new(name, r.pass(), detail)
        }
        Err(e) => SelftestItem::new(name, false, e.to_string()),
    }
}

/// Writes the CSV outputs of two independent runs of `scenario` and compares them byte by byte.
pub fn determinism_check(scenario: &Scenario) -> Result<bool> {
    let dirs = [scratch_dir("a"), scratch_dir("b")];
    let mut files = Vec::new();
    for dir in &dirs {
        let report = run(scenario)?;
        let mut written: Vec<PathBuf> = emit_reports(&report, dir, false)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        written.sort();
        files.push(written);
    }
    let mut same = files[0].len() == files[1].len() && !files[0].is_empty();
    for (a, b) in files[0].iter().zip(&files[1]) {
        same &= a.file_name() == b.file_name() && fs::read(a)? == fs::read(b)?;
    }
    for dir in &dirs {
        let _ = fs::remove_dir_all(dir);
    }
    Ok(same)
}

/// Runs every built-in scenario, the cutoff certificate, the Barenblatt
/// sharpness defects and the determinism check.
pub fn selftest() -> Result<Vec<SelftestItem>> {
    let scenarios = builtin_scenarios()?;
    let reports: Vec<Result<RunReport>> = scenarios.par_iter().map(run).collect();
    let mut items: Vec<SelftestItem> = scenarios
        .iter()
        .zip(&reports)
        .map(|(s, r)| run_item(&s.name, r))
        .collect();

    let cutoff = estimates::verify_cutoff(super::run::CUTOFF_SAMPLES)?;
    items.push(SelftestItem::new(
        "cutoff_certificate",
        cutoff.pass,
        format!("sup θ′²/θ = {:.4}, min θ″ = {:.4}", cutoff.max_ratio, cutoff.min_second),
    ));

    let defects = sharpness_defects(1.0, 2.0, 1, 1.0, &[128, 256, 512], &[1.0, 2.0, 4.0])?;
    let worst = defects.iter().cloned().fold(0.0, f64::max);
    items.push(SelftestItem::new("barenblatt_sharpness", worst <= 1e-3, format!("max defect {worst:.3e}")));

    let golden = &scenarios[0];
    let same = determinism_check(golden)?;
    items.push(SelftestItem::new(
        "deterministic_csv",
        same,
        format!("{} written twice", golden.name),
    ));
    Ok(items)
}
