use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use iioss::campaign::{
    read_json, read_matrix, run_certify, run_kappa, run_observer, run_verify, CampaignError, CertifyConfig,
    GainOverrides, KappaRequest, ObserverCampaign, RunOverrides, SystemRef, VerifyScenario, EXIT_INPUT, EXIT_PASS,
    EXIT_VIOLATION,
};

#[derive(Parser)]
#[command(name = "iioss", version, about = "i-IOSS certificates and numerical verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Opts,
}

#[derive(Subcommand)]
enum Command {
    /// Certify a linear system (writes both certificates).
    Certify,
    /// Run a Monte-Carlo verification scenario.
    Verify,
    /// Tabulate κ for a decrease function.
    Kappa,
    /// Run the observer checks of a scenario.
    Observer,
}

#[derive(Args)]
struct Opts {
    /// Input file; `builtin:<name>` selects a built-in system for `certify`.
    #[arg(long = "in", global = true)]
    input: Option<String>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    trials: Option<u64>,
    #[arg(long, global = true)]
    horizon: Option<u64>,
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output-injection gain as a JSON array of rows.
    #[arg(long = "gain-L", global = true)]
    gain_l: Option<PathBuf>,
    /// Lyapunov weight as a JSON array of rows.
    #[arg(long = "weight-Q", global = true)]
    weight_q: Option<PathBuf>,
}

impl Opts {
    fn input(&self) -> Result<&str, CampaignError> {
        self.input.as_deref().ok_or_else(|| CampaignError::Input("--in is required".into()))
    }

    fn overrides(&self) -> Result<RunOverrides, CampaignError> {
        if self.trials == Some(0) {
            return Err(CampaignError::Input("--trials must be positive".into()));
        }
        if let Some(t) = self.tol {
            if !(t >= 0.0) {
                return Err(CampaignError::Input("--tol must be non-negative".into()));
            }
        }
        Ok(RunOverrides {
            seed: self.seed,
            trials: self.trials,
            horizon: self.horizon,
            tol: self.tol,
            gains: GainOverrides {
                gain: self.gain_l.as_deref().map(read_matrix).transpose()?,
                weight: self.weight_q.as_deref().map(read_matrix).transpose()?,
            },
        })
    }
}

fn base_dir(input: &str) -> PathBuf {
    Path::new(input).parent().map(Path::to_path_buf).unwrap_or_default()
}

fn write_file(path: &Path, text: &str) -> Result<(), CampaignError> {
    fs::write(path, text).map_err(|e| CampaignError::Input(format!("cannot write {}: {e}", path.display())))
}

fn pretty(v: Result<Value, serde_json::Error>) -> String {
    serde_json::to_string_pretty(&v.expect("reports serialize")).expect("values serialize") + "\n"
}

fn write_csv(path: &Path, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CampaignError> {
    let err = |e: csv::Error| CampaignError::Input(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(err)?;
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.flush().map_err(|e| CampaignError::Input(e.to_string()))
}

fn certify(opts: &Opts) -> Result<i32, CampaignError> {
    let input = opts.input()?;
    let system = match input.strip_prefix("builtin:") {
        Some(name) => SystemRef::Builtin(name.to_string()),
        None => SystemRef::Linear(read_json(Path::new(input))?),
    };
    let sys = system.resolve_linear(Path::new("."))?;
    let config = CertifyConfig { system, overrides: opts.overrides()?.gains, horizon: opts.horizon.unwrap_or(200) };
    let report = run_certify(&sys, config)?;
    let text = pretty(serde_json::to_value(&report));
    match &opts.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    println!("certified: ‖A_L‖_P = {}", report.certificate.max.lyap.a_l_pnorm);
    Ok(EXIT_PASS)
}

fn verify(opts: &Opts) -> Result<i32, CampaignError> {
    let input = opts.input()?;
    let scenario: VerifyScenario = read_json(Path::new(input))?;
    let report = run_verify(scenario, &opts.overrides()?, &base_dir(input))?;
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("report.json"));
    write_file(&out, &pretty(serde_json::to_value(&report)))?;
    let header: Vec<String> = ["t", "lhs", "rhs", "margin"].map(String::from).to_vec();
    for (summary, suffix) in [(&report.campaign.sum, ""), (&report.campaign.max, "_max")] {
        if let Some(s) = summary {
            let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            let csv = out.with_file_name(format!("{stem}{suffix}.csv"));
            write_csv(&csv, &header, s.worst_report.csv_rows().map(|r| r.to_vec()))?;
        }
    }
    for (name, s) in [("sum", &report.campaign.sum), ("max", &report.campaign.max)] {
        if let Some(s) = s {
            println!(
                "{name}: {} violations in {} trials (min margin {:e}, worst trial {})",
                s.violations, report.config.trials, s.min_margin, s.worst_trial
            );
        }
    }
    if let Some(l) = &report.lyapunov {
        for c in &l.conditions {
            println!("{}: {} (worst margin {:e})", c.condition, if c.pass { "pass" } else { "FAIL" }, c.worst_margin);
        }
    }
    Ok(if report.pass { EXIT_PASS } else { EXIT_VIOLATION })
}

fn kappa(opts: &Opts) -> Result<i32, CampaignError> {
    let value: Value = read_json(Path::new(opts.input()?))?;
    let report = run_kappa(KappaRequest::from_value(value)?)?;
    match &report.envelope {
        Some(env) => println!("sigma: {}", serde_json::to_string(env).expect("serializable")),
        None => eprintln!("warning: {}", report.warning.as_deref().unwrap_or("no summability envelope")),
    }
    match &opts.out {
        Some(p) => write_csv(p, &report.header(), report.csv_rows())?,
        None => {
            let mut w = csv::Writer::from_writer(std::io::stdout());
            let io = |e: csv::Error| CampaignError::Input(e.to_string());
            w.write_record(report.header()).map_err(io)?;
            for r in report.csv_rows() {
                w.write_record(&r).map_err(io)?;
            }
            w.flush().map_err(|e| CampaignError::Input(e.to_string()))?;
        }
    }
    Ok(EXIT_PASS)
}

fn observer(opts: &Opts) -> Result<i32, CampaignError> {
    let input = opts.input()?;
    let scenario: ObserverCampaign = read_json(Path::new(input))?;
    let report = run_observer(scenario, &opts.overrides()?, &base_dir(input))?;
    let out = opts.out.clone().unwrap_or_else(|| PathBuf::from("observer_report.json"));
    write_file(&out, &pretty(serde_json::to_value(&report)))?;
    let verdict = |b: bool| if b { "pass" } else { "FAIL" };
    println!("output injection: {} (worst residual {:e})", verdict(report.injection.pass), report.injection.worst_residual);
    println!("estimate: {} (terminal error {:e})", verdict(report.rgas.pass), report.rgas.terminal_error);
    println!("reduction: {} (max deviation {:e})", verdict(report.reduction.pass), report.reduction.max_deviation);
    Ok(if report.pass { EXIT_PASS } else { EXIT_VIOLATION })
}

fn run(cli: &Cli) -> Result<i32, CampaignError> {
    if let Some(n) = cli.opts.threads {
        if n == 0 {
            return Err(CampaignError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CampaignError::Input(e.to_string()))?;
    }
    match cli.command {
        Command::Certify => certify(&cli.opts),
        Command::Verify => verify(&cli.opts),
        Command::Kappa => kappa(&cli.opts),
        Command::Observer => observer(&cli.opts),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { EXIT_PASS as u8 });
        }
    };
    let code = match run(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    let _ = std::io::stdout().flush();
    ExitCode::from(code as u8)
}
