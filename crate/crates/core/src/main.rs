use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pme_verify::harness::report::{convergence_csv, num};
use pme_verify::harness::{self, emit_reports, parse_scenario, RunReport, Scenario, SweepParam};
use pme_verify::Result;

#[derive(Parser)]
#[command(name = "pme-verify", version, about = "Porous medium and fast diffusion estimates, checked numerically")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario and check every requested estimate.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write two-column .dat files for plotting.
        #[arg(long)]
        gnuplot: bool,
    },
    /// Repeat a scenario over values of one parameter (m, alpha, K or C).
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: SweepParam,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Grid refinement study with h halved and dt quartered per level.
    Refine {
        scenario: PathBuf,
        #[arg(long, default_value_t = 3)]
        levels: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the built-in scenarios and certificates.
    Selftest,
}

fn load(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path).map_err(|e| pme_verify::Error::Config(format!("{}: {e}", path.display())))?;
    parse_scenario(&text).map_err(|e| match e {
        pme_verify::Error::Parse { path: at, message } => pme_verify::Error::Parse {
            path: format!("{}: {at}", path.display()),
            message,
        },
        other => other,
    })
}

fn out_dir(flag: Option<PathBuf>, scenario: &Scenario) -> PathBuf {
    flag.or_else(|| scenario.output_dir.clone().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out").join(&scenario.name))
}

fn print_failures(report: &RunReport) {
    for rep in report.failing() {
        match rep.worst() {
            Some(w) => eprintln!(
                "FAIL {}: margin {} (tol {}) at t={} r={}",
                rep.check_id,
                num(w.margin),
                num(w.tol),
                w.t,
                w.worst_node_r
            ),
            None => eprintln!("FAIL {}: no eligible rows", rep.check_id),
        }
    }
}

fn cmd_run(path: &Path, out: Option<PathBuf>, gnuplot: bool) -> Result<bool> {
    let scenario = load(path)?;
    let report = harness::run(&scenario)?;
    let dir = out_dir(out, &scenario);
    emit_reports(&report, &dir, gnuplot)?;
    print!("{}", harness::report::summary_text(&report));
    println!("outputs: {}", dir.display());
    print_failures(&report);
    Ok(report.pass())
}

fn cmd_sweep(path: &Path, param: SweepParam, values: &[f64], out: Option<PathBuf>) -> Result<bool> {
    let base = load(path)?;
    let reports = harness::sweep(&base, param, values)?;
    let dir = out_dir(out, &base);
    fs::create_dir_all(&dir)?;
    let mut csv = format!("{},pass,checks,failing,wall_time_s\n", param.name());
    for (&value, report) in values.iter().zip(&reports) {
        let sub = dir.join(format!("{}_{value}", param.name()));
        emit_reports(report, &sub, false)?;
        let failing: Vec<&str> = report.failing().iter().map(|r| r.check_id.as_str()).collect();
        csv.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            num(value),
            report.pass(),
            report.reports.len(),
            failing.join(" "),
            report.wall_time.as_secs_f64()
        ));
        println!("{}={value}: {}", param.name(), if report.pass() { "PASS" } else { "FAIL" });
        print_failures(report);
    }
    fs::write(dir.join("sweep.csv"), csv)?;
    println!("outputs: {}", dir.display());
    Ok(reports.iter().all(RunReport::pass))
}

fn cmd_refine(path: &Path, levels: usize, out: Option<PathBuf>) -> Result<bool> {
    let base = load(path)?;
    let rows = harness::refine(&base, levels)?;
    let dir = out_dir(out, &base);
    fs::create_dir_all(&dir)?;
    let csv = convergence_csv(&rows);
    fs::write(dir.join("convergence.csv"), &csv)?;
    println!("{:>5} {:>9} {:>12} {:>12} {:>12} {:>8}", "level", "intervals", "h", "dt", "error", "order");
    for r in &rows {
        let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
        println!("{:>5} {:>9} {:>12.4e} {:>12.4e} {:>12.4e} {:>8}", r.level, r.intervals, r.h, r.dt, r.error, order);
    }
    println!("outputs: {}", dir.display());
    Ok(true)
}

fn cmd_selftest() -> Result<bool> {
    let items = harness::selftest()?;
    for item in &items {
        println!("{} {:<24} {}", if item.pass { "PASS" } else { "FAIL" }, item.name, item.detail);
    }
    let pass = items.iter().all(|i| i.pass);
    println!("selftest: {}", if pass { "PASS" } else { "FAIL" });
    Ok(pass)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run { scenario, out, gnuplot } => cmd_run(&scenario, out, gnuplot),
        Command::Sweep { scenario, param, values, out } => cmd_sweep(&scenario, param, &values, out),
        Command::Refine { scenario, levels, out } => cmd_refine(&scenario, levels, out),
        Command::Selftest => cmd_selftest(),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
