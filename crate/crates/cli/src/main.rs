//! `masep`: samplers, exact tables and verification experiments for ASEP
//! with Mallows-colored initial data.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Map, Value};

use mallows_asep::asep::{mallows_colored_step_init, simulate_multi, simulate_single, step_init, TruncationBound};
use mallows_asep::hermite_dpp::{closed_form_first_moment, weighted_trace, xi_pmf};
use mallows_asep::mallows::{height_pmf, height_pmf_multi, mallows_subset_step, sample_finite, sample_infinite_prefix};
use mallows_asep::rng::{replica_rng, EngineId};
use mallows_asep::verify::{
    diffusive_experiment, kpz_coupling_experiment, kpz_lln_experiment, null_calibration, replicas,
    verify_color_preservation, verify_many_point, verify_one_point,
};
use mallows_asep::{ExperimentReport, ParticleConfig, QParam, Window};

use config::{read_kv, resolve, RunFlags};

#[derive(Parser, Debug)]
#[command(name = "masep", version, about = "ASEP with Mallows-colored initial data: samplers, exact laws, experiments")]
struct Cli {
    /// Worker threads (default: machine parallelism) [config: threads]
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw Mallows permutations (finite, or a prefix of an infinite one)
    SampleMallows(SampleArgs),
    /// Exact law of the alpha count of f(K, L)
    Pmf(PmfArgs),
    /// Exact joint law of alpha-count increments at several prefix lengths
    PmfMulti(PmfMultiArgs),
    /// Run one ASEP trajectory and print the final configuration
    Simulate(SimulateArgs),
    /// Run a verification experiment and write its report
    #[command(subcommand)]
    Verify(Verify),
    /// Compare the weighted kernel trace with its closed form
    HermiteCheck(HermiteArgs),
    /// Recover the law of xi_r from its q-Laplace transform
    XiPmf(XiArgs),
    /// Null and power calibration of the goodness-of-fit tests
    Calibrate {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: CalibrateFlags,
    },
}

#[derive(Subcommand, Debug)]
enum Verify {
    /// One-point coupling identity
    OnePoint {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: OnePointFlags,
    },
    /// Joint coupling identity at several points
    ManyPoint {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: ManyPointFlags,
    },
    /// Mallows coloring is preserved by the dynamics
    Coloring {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: ColorFlags,
    },
    /// Diffusive regime at finite t against the Hermite-ensemble law
    Diffusive {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: DiffusiveFlags,
    },
    /// Law of large numbers for (L - s) eps in the KPZ scaling
    KpzLln {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: KpzLlnFlags,
    },
    /// Pre-limit KPZ coupling check
    KpzCoupling {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        p: KpzCouplingFlags,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Key-value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed [config: seed]
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (default: $MASEP_OUT_DIR, else stdout) [config: output]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: jsonl or csv [config: format]
    #[arg(long)]
    format: Option<String>,
}

/// Declares optional flags together with the parameter field each one sets.
macro_rules! flag_set {
    ($name:ident { $( $(#[$m:meta])* $field:ident : $ty:ty => $key:literal ),* $(,)? }) => {
        #[derive(Args, Debug)]
        struct $name {
            $( $(#[$m])* $field: Option<$ty>, )*
        }

        impl $name {
            fn to_map(&self) -> Map<String, Value> {
                let mut m = Map::new();
                $( if let Some(v) = &self.$field {
                    m.insert($key.to_string(), serde_json::to_value(v).expect("flag values serialize"));
                } )*
                m
            }
        }
    };
}

flag_set!(OnePointFlags {
    /// Number of colors K [config: k]
    #[arg(long = "K")] k: usize => "k",
    /// Asymmetry q in [0, 1) [config: q]
    #[arg(long)] q: f64 => "q",
    /// Time [config: t]
    #[arg(long)] t: f64 => "t",
    /// Observation point [config: x]
    #[arg(long)] x: f64 => "x",
    /// Replicas per side [config: n_reps]
    #[arg(long)] reps: usize => "n_reps",
    /// Light-cone tolerance [config: tol]
    #[arg(long)] tol: f64 => "tol",
    /// TV threshold [config: tv_threshold]
    #[arg(long)] tv_threshold: f64 => "tv_threshold",
    /// Significance level [config: alpha]
    #[arg(long)] alpha: f64 => "alpha",
    /// Replicas for the window-doubling check [config: doubling_reps]
    #[arg(long)] doubling_reps: usize => "doubling_reps",
});

flag_set!(ManyPointFlags {
    /// Number of colors K [config: k]
    #[arg(long = "K")] k: usize => "k",
    /// Asymmetry q [config: q]
    #[arg(long)] q: f64 => "q",
    /// Time [config: t]
    #[arg(long)] t: f64 => "t",
    /// Nonincreasing observation points, comma-separated [config: xs]
    #[arg(long = "x", value_delimiter = ',', allow_hyphen_values = true)] xs: Vec<f64> => "xs",
    /// Replicas per side [config: n_reps]
    #[arg(long)] reps: usize => "n_reps",
    /// Light-cone tolerance [config: tol]
    #[arg(long)] tol: f64 => "tol",
    /// Joint TV threshold [config: tv_threshold]
    #[arg(long)] tv_threshold: f64 => "tv_threshold",
    /// Significance level [config: alpha]
    #[arg(long)] alpha: f64 => "alpha",
    /// Replicas for the window-doubling check [config: doubling_reps]
    #[arg(long)] doubling_reps: usize => "doubling_reps",
});

flag_set!(ColorFlags {
    /// Colors watched [config: k]
    #[arg(long = "K")] k: usize => "k",
    /// Sites watched to the left of the origin [config: l]
    #[arg(long = "L")] l: usize => "l",
    /// Asymmetry q [config: q]
    #[arg(long)] q: f64 => "q",
    /// Time [config: t]
    #[arg(long)] t: f64 => "t",
    /// Replicas [config: n_reps]
    #[arg(long)] reps: usize => "n_reps",
    /// Light-cone tolerance [config: tol]
    #[arg(long)] tol: f64 => "tol",
    /// Significance level [config: alpha]
    #[arg(long)] alpha: f64 => "alpha",
    /// Replicas for the window-doubling check [config: doubling_reps]
    #[arg(long)] doubling_reps: usize => "doubling_reps",
});

flag_set!(DiffusiveFlags {
    /// Number of colors K [config: k]
    #[arg(long = "K")] k: usize => "k",
    /// Asymmetry q [config: q]
    #[arg(long)] q: f64 => "q",
    /// Time [config: t]
    #[arg(long)] t: f64 => "t",
    /// Scaled locations r, comma-separated [config: r_grid]
    #[arg(long = "r", value_delimiter = ',', allow_hyphen_values = true)] r_grid: Vec<f64> => "r_grid",
    /// Replicas per side [config: n_reps]
    #[arg(long)] reps: usize => "n_reps",
    /// Largest recovered atom of xi [config: l_max]
    #[arg(long)] l_max: usize => "l_max",
    /// Light-cone tolerance [config: tol]
    #[arg(long)] tol: f64 => "tol",
    /// TV threshold [config: tv_threshold]
    #[arg(long)] tv_threshold: f64 => "tv_threshold",
    /// Replicas for the half-time drift check [config: drift_reps]
    #[arg(long)] drift_reps: usize => "drift_reps",
});

flag_set!(KpzLlnFlags {
    /// Values of eps, comma-separated [config: eps_list]
    #[arg(long = "eps", value_delimiter = ',')] eps_list: Vec<f64> => "eps_list",
    /// Shift c in K [config: c]
    #[arg(long, allow_hyphen_values = true)] c: f64 => "c",
    /// Shift d in L [config: d]
    #[arg(long, allow_hyphen_values = true)] d: f64 => "d",
    /// Leading coefficient sigma-hat [config: sigma_hat]
    #[arg(long)] sigma_hat: f64 => "sigma_hat",
    /// Draws per eps [config: n_reps]
    #[arg(long)] reps: usize => "n_reps",
    /// Allowed deviation from the limit at the smallest eps [config: tol]
    #[arg(long)] tol: f64 => "tol",
});

flag_set!(KpzCouplingFlags {
    /// eps (at least 0.2) [config: eps]
    #[arg(long)] eps: f64 => "eps",
    /// Shift c in K [config: c]
    #[arg(long, allow_hyphen_values = true)] c: f64 => "c",
    /// Scaled time t-hat [config: hat_t]
    #[arg(long)] hat_t: f64 => "hat_t",
    /// Replicas [config: n_reps]
    #[arg(long)] reps: usize => "n_reps",
    /// Light-cone tolerance [config: tol]
    #[arg(long)] tol: f64 => "tol",
    /// Allowed absolute median discrepancy [config: median_tol]
    #[arg(long)] median_tol: f64 => "median_tol",
});

flag_set!(CalibrateFlags {
    /// Datasets per test [config: n_runs]
    #[arg(long)] runs: usize => "n_runs",
    /// Draws per dataset [config: n_draws]
    #[arg(long)] draws: usize => "n_draws",
    /// Significance level [config: alpha]
    #[arg(long)] alpha: f64 => "alpha",
    /// Mass moved in the power arm [config: shift]
    #[arg(long)] shift: f64 => "shift",
});

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum TableFormat {
    Text,
    Csv,
    Jsonl,
}

#[derive(Args, Debug)]
struct SampleArgs {
    /// Permutation size, or prefix length with --infinite
    #[arg(long)]
    n: usize,
    #[arg(long)]
    q: f64,
    /// Number of draws
    #[arg(long, default_value_t = 1)]
    count: usize,
    #[arg(long, default_value_t = config::DEFAULT_SEED)]
    seed: u64,
    /// Sample a prefix of an infinite Mallows permutation
    #[arg(long)]
    infinite: bool,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Args, Debug)]
struct PmfArgs {
    #[arg(long = "K")]
    k: usize,
    #[arg(long = "L")]
    l: usize,
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Args, Debug)]
struct PmfMultiArgs {
    #[arg(long = "K")]
    k: usize,
    /// Nondecreasing prefix lengths, comma-separated
    #[arg(long = "L", value_delimiter = ',', required = true)]
    ls: Vec<usize>,
    #[arg(long)]
    q: f64,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Clone, Copy, Debug, ValueEnum, PartialEq, Eq)]
enum Init {
    /// Every site <= 0 occupied
    Step,
    /// K particles on a Mallows subset of the step sites
    MallowsSubset,
    /// Step sites colored by an infinite Mallows permutation
    Colored,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value_t = Init::Step)]
    init: Init,
    /// Particles for --init mallows-subset
    #[arg(long = "K")]
    k: Option<usize>,
    #[arg(long)]
    q: f64,
    #[arg(long)]
    t: f64,
    /// Window as LO,HI (default: the light cone of the origin)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    window: Vec<i64>,
    /// Report heights at these points, comma-separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    heights: Vec<f64>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = config::DEFAULT_SEED)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

#[derive(Args, Debug)]
struct HermiteArgs {
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    r: f64,
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Allowed gap between the two values
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Args, Debug)]
struct XiArgs {
    #[arg(long, allow_hyphen_values = true)]
    r: f64,
    #[arg(long)]
    q: f64,
    #[arg(long, default_value_t = 12)]
    l_max: usize,
    #[arg(long, value_enum, default_value_t = TableFormat::Text)]
    format: TableFormat,
}

const EXIT_FAIL: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            bail!("--threads must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("building thread pool")?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let threads = cli.threads;
    let experiment = |id: &str, run: &RunArgs, flags: Map<String, Value>| -> Result<u8> {
        match id {
            "one-point" => run_experiment(id, run, threads, flags, verify_one_point),
            "many-point" => run_experiment(id, run, threads, flags, verify_many_point),
            "coloring" => run_experiment(id, run, threads, flags, verify_color_preservation),
            "diffusive" => run_experiment(id, run, threads, flags, diffusive_experiment),
            "kpz-lln" => run_experiment(id, run, threads, flags, kpz_lln_experiment),
            "kpz-coupling" => run_experiment(id, run, threads, flags, kpz_coupling_experiment),
            "calibrate" => run_experiment(id, run, threads, flags, null_calibration),
            _ => unreachable!(),
        }
    };
    match cli.command {
        Command::Verify(v) => match v {
            Verify::OnePoint { run, p } => experiment("one-point", &run, p.to_map()),
            Verify::ManyPoint { run, p } => experiment("many-point", &run, p.to_map()),
            Verify::Coloring { run, p } => experiment("coloring", &run, p.to_map()),
            Verify::Diffusive { run, p } => experiment("diffusive", &run, p.to_map()),
            Verify::KpzLln { run, p } => experiment("kpz-lln", &run, p.to_map()),
            Verify::KpzCoupling { run, p } => experiment("kpz-coupling", &run, p.to_map()),
        },
        Command::Calibrate { run, p } => experiment("calibrate", &run, p.to_map()),
        other => {
            init_threads(threads)?;
            match other {
                Command::SampleMallows(a) => sample_mallows(&a),
                Command::Pmf(a) => pmf(&a),
                Command::PmfMulti(a) => pmf_multi(&a),
                Command::Simulate(a) => simulate(&a),
                Command::HermiteCheck(a) => hermite_check(&a),
                Command::XiPmf(a) => xi(&a),
                Command::Verify(_) | Command::Calibrate { .. } => unreachable!(),
            }
        }
    }
}

fn run_experiment<P, F>(id: &str, run: &RunArgs, threads: Option<usize>, flags: Map<String, Value>, f: F) -> Result<u8>
where
    P: Serialize + DeserializeOwned + Default,
    F: Fn(&P, u64) -> mallows_asep::Result<ExperimentReport>,
{
    let file = match &run.config {
        Some(path) => read_kv(path)?,
        None => Map::new(),
    };
    let run_flags = RunFlags { seed: run.seed, output: run.out.clone(), format: run.format.clone(), threads };
    let (settings, params, merged) = resolve::<P>(id, file, &run_flags, flags)?;
    init_threads(settings.threads)?;
    eprintln!("effective config: {}", json!({ "run": settings, "params": merged }));
    let report = f(&params, settings.seed)?;
    output::write_report(&report, &settings)?;
    for c in report.checks.iter().filter(|c| !c.pass) {
        eprintln!("FAIL {}: {} (threshold {})", c.name, c.value, c.threshold);
    }
    Ok(if report.pass { 0 } else { EXIT_FAIL })
}

fn q_of(v: f64) -> Result<QParam> {
    Ok(QParam::new(v)?)
}

fn sample_mallows(a: &SampleArgs) -> Result<u8> {
    let q = q_of(a.q)?;
    let draws = replicas(a.count, a.seed, EngineId::Mallows, |_, rng| {
        if a.infinite {
            Ok(sample_infinite_prefix(a.n, q, rng).values().to_vec())
        } else {
            Ok(sample_finite(a.n, q, rng)?.values().to_vec())
        }
    })?;
    let mut out = String::new();
    match a.format {
        TableFormat::Text => {
            for d in &draws {
                out += &d.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
                out.push('\n');
            }
        }
        TableFormat::Csv => {
            out += "draw,position,value\n";
            for (i, d) in draws.iter().enumerate() {
                for (j, v) in d.iter().enumerate() {
                    out += &format!("{i},{},{v}\n", j + 1);
                }
            }
        }
        TableFormat::Jsonl => {
            for d in &draws {
                out += &serde_json::to_string(d)?;
                out.push('\n');
            }
        }
    }
    print!("{out}");
    Ok(0)
}

fn pmf(a: &PmfArgs) -> Result<u8> {
    let p = height_pmf(a.k, a.l, q_of(a.q)?);
    match a.format {
        TableFormat::Text => {
            let cells: Vec<String> = p.probs().iter().enumerate().map(|(s, v)| format!("{s}: {v:?}")).collect();
            println!("{{{}}}", cells.join(", "));
        }
        TableFormat::Csv => {
            println!("s,p");
            for (s, v) in p.probs().iter().enumerate() {
                println!("{s},{v:?}");
            }
        }
        TableFormat::Jsonl => println!("{}", json!({ "k": a.k, "l": a.l, "q": a.q, "probs": p.probs() })),
    }
    Ok(0)
}

fn pmf_multi(a: &PmfMultiArgs) -> Result<u8> {
    let m = height_pmf_multi(a.k, &a.ls, q_of(a.q)?)?;
    let key = |k: &[usize]| k.iter().map(|v| v.to_string()).collect::<Vec<_>>();
    match a.format {
        TableFormat::Text => {
            let cells: Vec<String> = m.probs.iter().map(|(k, v)| format!("({}): {v:?}", key(k).join(", "))).collect();
            println!("{{{}}}", cells.join(", "));
        }
        TableFormat::Csv => {
            let cols: Vec<String> = (1..=a.ls.len()).map(|i| format!("s{i}")).collect();
            println!("{},p", cols.join(","));
            for (k, v) in &m.probs {
                println!("{},{v:?}", key(k).join(","));
            }
        }
        TableFormat::Jsonl => {
            let rows: Vec<Value> = m.probs.iter().map(|(k, v)| json!({ "increments": k, "p": v })).collect();
            println!("{}", json!({ "k": a.k, "ls": a.ls, "q": a.q, "probs": rows }));
        }
    }
    Ok(0)
}

fn simulate(a: &SimulateArgs) -> Result<u8> {
    let q = q_of(a.q)?;
    let reach = TruncationBound::new(a.t, q, a.tol)?.reach;
    let mut rng = replica_rng(a.seed, EngineId::ParticleClock, 0);
    let k = a.k.unwrap_or(0);
    if a.init == Init::MallowsSubset && a.k.is_none() {
        bail!("--init mallows-subset needs --K");
    }
    let sites = match a.init {
        Init::MallowsSubset => mallows_subset_step(k, q, &mut rng),
        _ => Vec::new(),
    };
    let window = match a.window.as_slice() {
        [lo, hi] => Window::new(*lo, *hi)?,
        [] => {
            let left = sites.first().copied().unwrap_or(0).min(-10);
            Window::new(left - reach - 1, reach + 1)?
        }
        w => bail!("--window takes LO,HI, got {w:?}"),
    };
    let (snapshot, stats, uncolored) = match a.init {
        Init::Step => {
            let (out, stats) = simulate_single(&step_init(window)?, q, a.t, &mut rng)?;
            (out.to_json(), stats, out)
        }
        Init::MallowsSubset => {
            let (out, stats) = simulate_single(&ParticleConfig::new(window, sites)?, q, a.t, &mut rng)?;
            (out.to_json(), stats, out)
        }
        Init::Colored => {
            let mut rng = replica_rng(a.seed, EngineId::Harris, 0);
            let cfg = mallows_colored_step_init(window, q, &mut rng)?;
            let (out, stats) = simulate_multi(&cfg, q, a.t, &mut rng)?;
            (out.to_json(), stats, out.project(u64::MAX))
        }
    };
    let heights: Vec<(f64, usize)> = a.heights.iter().map(|&x| (x, uncolored.height(x))).collect();
    match a.format {
        TableFormat::Jsonl => println!(
            "{}",
            json!({
                "window": [window.lo, window.hi],
                "events": stats.events,
                "jumps": stats.jumps,
                "boundary_touched": stats.boundary_touched,
                "heights": heights.iter().map(|(x, h)| json!({ "x": x, "h": h })).collect::<Vec<_>>(),
                "config": serde_json::from_str::<Value>(&snapshot)?,
            })
        ),
        TableFormat::Text | TableFormat::Csv => {
            println!("window = [{}, {}]", window.lo, window.hi);
            println!(
                "events = {}, jumps = {}, boundary_touched = {}",
                stats.events, stats.jumps, stats.boundary_touched
            );
            for (x, h) in &heights {
                println!("h({x:?}) = {h}");
            }
            println!("{snapshot}");
        }
    }
    if stats.boundary_touched {
        eprintln!("warning: the run reached the window edge; widen --window");
    }
    Ok(0)
}

fn hermite_check(a: &HermiteArgs) -> Result<u8> {
    let q = q_of(a.q)?;
    let wt = weighted_trace(a.r, q, a.tol.min(1e-13))?;
    let cf = closed_form_first_moment(a.r, q);
    let gap = (wt - cf).abs();
    // twelve significant digits; the raw gap follows
    let show = |v: f64| format!("{:?}", format!("{v:.11e}").parse::<f64>().unwrap_or(v));
    println!("weighted_trace = {}", show(wt));
    println!("closed form = {}", show(cf));
    println!("gap = {gap:e}");
    let pass = gap <= a.tol;
    println!("{}", if pass { "PASS" } else { "FAIL" });
    Ok(if pass { 0 } else { EXIT_FAIL })
}

fn xi(a: &XiArgs) -> Result<u8> {
    let d = xi_pmf(a.r, q_of(a.q)?, a.l_max)?;
    match a.format {
        TableFormat::Text => {
            for (l, p) in d.probs.iter().enumerate() {
                println!("P(xi = {l}) = {p:?}");
            }
            println!("residual_mass = {:?}", d.residual_mass);
            println!("rms_misfit = {:e}", d.rms_misfit);
            println!("condition = {:e}", d.condition);
            println!("reliable = {}", d.reliable);
        }
        TableFormat::Csv => {
            println!("l,p");
            for (l, p) in d.probs.iter().enumerate() {
                println!("{l},{p:?}");
            }
        }
        TableFormat::Jsonl => {
            let mut d = d.clone();
            if d.condition.is_infinite() {
                d.condition = f64::MAX;
            }
            println!("{}", serde_json::to_string(&d)?);
        }
    }
    if !d.reliable {
        eprintln!("warning: misfit {:e} above the reliability threshold", d.rms_misfit);
    }
    Ok(0)
}
