//! Command-line driver for scenario runs, the `example1` threshold table and plots.
//!
//! Exit codes: 0 success, 1 I/O or internal error, 2 configuration error,
//! 3 a run halted on an infeasible or unsolved filter step, 4 a threshold
//! mismatch in the `example1` table.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use extent_cbf::sdp::{parse_dump, solve_sdp, SdpOptions};
use extent_cbf::sim::{
    emit_outputs, example1, parse_trajectory_csv, run_example1_table, run_scenario, svg,
    RunSummary, ScenarioConfig,
};
use extent_cbf::Error;

#[derive(Parser)]
#[command(name = "extent-cbf", version, about = "Extent-aware safety filter simulations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenario files.
    Run {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        dt: Option<f64>,
        #[arg(long)]
        horizon: Option<f64>,
        /// Scenario files run concurrently.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print the sampled-filter feasibility thresholds against the closed form.
    Example1 {
        /// Also write the report as JSON into this directory.
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Check scenario files without running them.
    Validate {
        #[arg(required = true)]
        scenarios: Vec<PathBuf>,
    },
    /// Render a trajectory CSV as SVG.
    Plot {
        csv: PathBuf,
        /// Scenario file supplying the safe set and extent.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 100)]
        stride: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Solve an SDP from a text dump and print the result.
    Sdp { dump: PathBuf },
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::Parse(_) => 2,
        _ => 1,
    }
}

fn load(path: &Path, seed: Option<u64>, dt: Option<f64>, horizon: Option<f64>) -> Result<ScenarioConfig, Error> {
    let mut c = ScenarioConfig::load(path).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    if let Some(s) = seed {
        c.seed = s;
    }
    if let Some(v) = dt {
        c.dt = v;
    }
    if let Some(v) = horizon {
        c.horizon = v;
    }
    Ok(c)
}

fn run_one(path: &Path, args: (Option<u64>, Option<f64>, Option<f64>), out: &Path) -> Result<RunSummary, Error> {
    let cfg = load(path, args.0, args.1, args.2)?;
    let mut sc = cfg.build()?;
    let (traj, summary) = run_scenario(&mut sc)?;
    emit_outputs(&sc, &traj, &summary, out)?;
    Ok(summary)
}

fn cmd_run(
    scenarios: &[PathBuf],
    out_dir: &Path,
    overrides: (Option<u64>, Option<f64>, Option<f64>),
    jobs: usize,
) -> u8 {
    // Validate everything before any simulation starts.
    let mut code = 0;
    for p in scenarios {
        if let Err(e) = load(p, overrides.0, overrides.1, overrides.2).and_then(|c| c.validate()) {
            eprintln!("{}: {e}", p.display());
            code = code.max(exit_for(&e));
        }
    }
    if code != 0 {
        return code;
    }
    let next = AtomicUsize::new(0);
    let results = Mutex::new((0..scenarios.len()).map(|_| None).collect::<Vec<Option<Result<RunSummary, Error>>>>());
    std::thread::scope(|s| {
        for _ in 0..jobs.clamp(1, scenarios.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= scenarios.len() {
                    break;
                }
                let r = run_one(&scenarios[i], overrides, out_dir);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    for (p, r) in scenarios.iter().zip(results.into_inner().unwrap()) {
        match r.expect("every scenario ran") {
            Ok(s) => {
                println!(
                    "{}: {} steps, min boundary h {:+.6e}, active {}, halts {}, solve ms median {:.3}",
                    s.scenario,
                    s.steps,
                    s.min_boundary_h,
                    s.active_steps,
                    s.infeasible_halts + s.not_converged_halts,
                    s.solve_ms.median
                );
                if let Some(h) = &s.halt {
                    eprintln!(
                        "{}: halted at t = {} ({}), state {:?}, {} rows; see the summary file",
                        s.scenario,
                        h.t,
                        h.status,
                        h.state,
                        h.rows.len()
                    );
                    code = code.max(3);
                }
            }
            Err(e) => {
                eprintln!("{}: {e}", p.display());
                code = code.max(exit_for(&e));
            }
        }
    }
    code
}

fn cmd_example1(out_dir: Option<&Path>) -> Result<u8, Error> {
    let report = run_example1_table()?;
    print!("{}", example1::format_report(&report));
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.into(), source: e })?;
        let p = dir.join("example1.json");
        let text = serde_json::to_string_pretty(&report).expect("report serializes");
        std::fs::write(&p, text).map_err(|e| Error::Io { path: p.clone(), source: e })?;
    }
    if report.passed() {
        Ok(0)
    } else {
        eprintln!("threshold mismatch: max error {:.3e}", report.max_error);
        Ok(4)
    }
}

fn cmd_plot(csv: &Path, scenario: Option<&Path>, stride: usize, out_dir: &Path) -> Result<u8, Error> {
    let text = std::fs::read_to_string(csv).map_err(|e| Error::Io { path: csv.into(), source: e })?;
    let traj = parse_trajectory_csv(&text)?;
    let sc = match scenario {
        Some(p) => Some(load(p, None, None, None)?.build()?),
        None => None,
    };
    let svg = svg::render(sc.as_ref(), &traj, stride)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io { path: out_dir.into(), source: e })?;
    let stem = csv.file_stem().and_then(|s| s.to_str()).unwrap_or("trajectory");
    let p = out_dir.join(format!("{stem}.svg"));
    std::fs::write(&p, svg).map_err(|e| Error::Io { path: p.clone(), source: e })?;
    println!("{}", p.display());
    Ok(0)
}

fn cmd_sdp(dump: &Path) -> Result<u8, Error> {
    let text = std::fs::read_to_string(dump).map_err(|e| Error::Io { path: dump.into(), source: e })?;
    let problem = parse_dump(&text)?;
    let sol = solve_sdp(&problem, &SdpOptions::default())?;
    println!("status {:?} ({})", sol.status, sol.message);
    println!("objective {:.12e}", sol.objective);
    println!("dual objective {:.12e}", sol.dual_objective);
    println!("iterations {}", sol.iterations);
    let v: Vec<String> = sol.v.iter().map(|x| format!("{x:.12e}")).collect();
    println!("v {}", v.join(" "));
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run {
            scenarios,
            out_dir,
            seed,
            dt,
            horizon,
            jobs,
        } => Ok(cmd_run(&scenarios, &out_dir, (seed, dt, horizon), jobs)),
        Command::Example1 { out_dir } => cmd_example1(out_dir.as_deref()),
        Command::Validate { scenarios } => {
            let mut code = 0;
            for p in &scenarios {
                match load(p, None, None, None).and_then(|c| c.validate()) {
                    Ok(()) => println!("{}: ok", p.display()),
                    Err(e) => {
                        eprintln!("{}: {e}", p.display());
                        code = code.max(exit_for(&e));
                    }
                }
            }
            Ok(code)
        }
        Command::Plot {
            csv,
            scenario,
            stride,
            out_dir,
        } => cmd_plot(&csv, scenario.as_deref(), stride, &out_dir),
        Command::Sdp { dump } => cmd_sdp(&dump),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
