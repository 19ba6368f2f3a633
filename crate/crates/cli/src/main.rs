mod config;

use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cuqb_bench::metrics::{RegretTrace, SolverTrace};
use cuqb_bench::{run_grid, Experiment};
use cuqb_core::problems;
use cuqb_core::quantile::Schedule;
use cuqb_core::trace::{read_jsonl, write_jsonl};
use cuqb_core::{RunRecord, RunStatus, Solver};

use config::{parse_seeds, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cuqb", version, about = "Constrained upper quantile bound optimization of composite grey-box problems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run solvers on problems over a set of seeds and write one trace per run.
    Run(RunArgs),
    /// Build performance profiles from a directory of traces.
    Profile(ProfileArgs),
    /// List the registered problems.
    ListProblems,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration with flat dotted keys; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem name, optionally `name:variant`. Repeatable.
    #[arg(long = "problem")]
    problems: Vec<String>,
    /// One of cuqb, eic, eic-cf, epbo, random. Repeatable.
    #[arg(long = "solver")]
    solvers: Vec<String>,
    #[arg(long, conflicts_with = "seeds")]
    seed: Option<u64>,
    /// Seed list such as `0..9` (inclusive) or `1,2,5`.
    #[arg(long)]
    seeds: Option<String>,
    /// Monte-Carlo samples per quantile.
    #[arg(long = "L")]
    mc_samples: Option<usize>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rho: Option<f64>,
    /// Initial design size.
    #[arg(long = "T0")]
    init_budget: Option<usize>,
    /// Total evaluation budget.
    #[arg(long = "T", alias = "budget")]
    total_budget: Option<usize>,
    /// Standard deviation of Gaussian observation noise.
    #[arg(long)]
    noise: Option<f64>,
    /// Raw Sobol candidates screened per acquisition maximization.
    #[arg(long)]
    n_raw: Option<usize>,
    /// Use the theoretical probability schedule with this delta.
    #[arg(long)]
    delta: Option<f64>,
    /// Surrogate domain cardinality for the theoretical schedule.
    #[arg(long, default_value_t = 1e4)]
    cardinality: f64,
    #[arg(long)]
    no_infeasibility_check: bool,
    #[arg(long)]
    find_rho: bool,
    /// Worker threads for independent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Output directory; defaults to $CUQB_OUT_DIR, then `runs`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ProfileArgs {
    /// Directory holding `.jsonl` traces.
    dir: PathBuf,
    #[arg(long, default_value_t = 0.01)]
    tau: f64,
    /// Penalty used for the penalized objective.
    #[arg(long, default_value_t = cuqb_core::cuqb::DEFAULT_RHO)]
    rho: f64,
    /// Output directory; defaults to the trace directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Profile(args) => cmd_profile(args).map(|()| true),
        Command::ListProblems => cmd_list_problems().map(|()| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

/// Writes through a temporary file in the target directory, then renames it into place.
fn write_atomic(path: &Path, contents: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("creating a temporary file in {}", dir.display()))?;
    contents(tmp.as_file_mut())?;
    tmp.as_file_mut().flush()?;
    tmp.persist(path).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn experiment_from(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::empty(),
    };
    if !args.problems.is_empty() {
        cfg.problems = args.problems.clone();
    }
    if !args.solvers.is_empty() {
        cfg.solvers = args.solvers.iter().map(|s| s.parse()).collect::<cuqb_core::Result<_>>()?;
    }
    if cfg.solvers.is_empty() {
        cfg.solvers = vec![Solver::Cuqb];
    }
    if let Some(s) = args.seed {
        cfg.seeds = vec![s];
    }
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if cfg.seeds.is_empty() {
        cfg.seeds = vec![0];
    }
    let b = &mut cfg.base;
    if let Some(v) = args.mc_samples {
        b.quantile.mc_samples = v;
    }
    if let Some(v) = args.epsilon {
        b.quantile.epsilon = v;
    }
    if let Some(v) = args.alpha {
        b.quantile.alpha = v;
    }
    if let Some(v) = args.rho {
        b.rho = v;
    }
    if let Some(v) = args.init_budget {
        b.init_budget = Some(v);
    }
    if let Some(v) = args.total_budget {
        b.total_budget = v;
    }
    if let Some(v) = args.noise {
        b.noise_std = v;
    }
    if let Some(v) = args.n_raw {
        b.multistart.n_raw = v;
    }
    if let Some(delta) = args.delta {
        b.quantile.schedule = Schedule::Theoretical { delta, cardinality: args.cardinality };
    }
    if args.no_infeasibility_check {
        b.infeasibility_check = false;
    }
    if args.find_rho {
        b.find_rho = true;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn trace_name(r: &RunRecord) -> String {
    format!("{}__{}__seed{}.jsonl", r.summary.problem.replace(':', "-"), r.summary.solver, r.summary.seed)
}

fn status_text(s: &RunStatus) -> String {
    match s {
        RunStatus::Completed => "completed".into(),
        RunStatus::InfeasibleDeclared { iteration, constraint } => format!("infeasible(t={iteration},g{constraint})"),
        RunStatus::Failed { iteration, message } => format!("failed(t={iteration}: {message})"),
    }
}

fn cmd_run(args: RunArgs) -> Result<bool> {
    let cfg = experiment_from(&args)?;
    let resolved: Vec<_> = cfg.problems.iter().map(|p| problems::get(p)).collect::<cuqb_core::Result<_>>()?;
    let exp = Experiment { problems: cfg.problems.clone(), solvers: cfg.solvers.clone(), seeds: cfg.seeds.clone(), base: cfg.base.clone() };
    let records = run_grid(&exp, args.jobs)?;
    fs::create_dir_all(&cfg.output_dir).with_context(|| format!("creating {}", cfg.output_dir.display()))?;

    let rho = cfg.base.rho;
    let mut table = String::from("problem\tsolver\tseed\tstatus\tevaluations\trec_index\trec_penalized\tpenalized_regret\tsimple_regret\tnaive_index\tnaive_penalized\n");
    let mut all_completed = true;
    for r in &records {
        write_atomic(&cfg.output_dir.join(trace_name(r)), |w| Ok(write_jsonl(r, w)?))?;
        let problem = resolved.iter().find(|p| p.name == r.summary.problem).expect("resolved above");
        let (rec_value, regret, simple) = match (r.iterations.last(), RegretTrace::from_record(problem, r, rho)) {
            (Some(last), Ok(rt)) => (
                cuqb_bench::penalized_value(problem, &last.rec_x, rho)?.to_string(),
                rt.penalized_recommended.last().map_or(String::new(), f64::to_string),
                rt.simple.last().map_or(String::new(), f64::to_string),
            ),
            (Some(last), Err(_)) => (cuqb_bench::penalized_value(problem, &last.rec_x, rho)?.to_string(), String::new(), String::new()),
            (None, _) => (String::new(), String::new(), String::new()),
        };
        let (naive_index, naive_value) = match (r.iterations.last(), r.naive_recommended()) {
            (Some(last), Some(x)) => (last.naive_index.to_string(), cuqb_bench::penalized_value(problem, x, rho)?.to_string()),
            _ => (String::new(), String::new()),
        };
        if r.summary.status != RunStatus::Completed {
            all_completed = false;
            eprintln!("{}: {}", trace_name(r), status_text(&r.summary.status));
        }
        table.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{rec_value}\t{regret}\t{simple}\t{naive_index}\t{naive_value}\n",
            r.summary.problem,
            r.summary.solver,
            r.summary.seed,
            status_text(&r.summary.status),
            r.summary.evaluations,
            r.iterations.last().map_or(0, |i| i.rec_index),
        ));
    }
    write_atomic(&cfg.output_dir.join("summary.tsv"), |w| Ok(w.write_all(table.as_bytes())?))?;
    let summaries: Vec<_> = records.iter().map(|r| &r.summary).collect();
    write_atomic(&cfg.output_dir.join("summary.json"), |w| Ok(serde_json::to_writer_pretty(w, &summaries)?))?;
    print!("{table}");
    println!("wrote {} traces to {}", records.len(), cfg.output_dir.display());
    Ok(all_completed)
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let mut paths: Vec<PathBuf> = fs::read_dir(&args.dir)
        .with_context(|| format!("reading {}", args.dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        bail!("no .jsonl traces in {}", args.dir.display());
    }
    let mut records = Vec::with_capacity(paths.len());
    for p in &paths {
        let f = fs::File::open(p).with_context(|| format!("opening {}", p.display()))?;
        records.push(read_jsonl(std::io::BufReader::new(f)).with_context(|| format!("parsing {}", p.display()))?);
    }

    let problem_names: BTreeSet<&str> = records.iter().map(|r| r.summary.problem.as_str()).collect();
    let solvers: BTreeSet<String> = records.iter().map(|r| r.summary.solver.to_string()).collect();
    let seeds: BTreeSet<u64> = records.iter().map(|r| r.summary.seed).collect();
    let mut missing = Vec::new();
    for p in &problem_names {
        for s in &solvers {
            for seed in &seeds {
                if !records.iter().any(|r| r.summary.problem == *p && r.summary.solver.to_string() == *s && r.summary.seed == *seed) {
                    missing.push(format!("{p}/{s}/seed{seed}"));
                }
            }
        }
    }
    if !missing.is_empty() {
        bail!("incomplete trace set, missing: {}", missing.join(", "));
    }

    let defs: Vec<_> = problem_names.iter().map(|n| problems::get(n)).collect::<cuqb_core::Result<_>>()?;
    let mut grouped: Vec<(String, Vec<SolverTrace>)> = Vec::new();
    for p in &defs {
        let traces = records
            .iter()
            .filter(|r| r.summary.problem == p.name)
            .map(|r| SolverTrace::from_record(p, r, args.rho))
            .collect::<cuqb_core::Result<Vec<_>>>()?;
        grouped.push((p.name.clone(), traces));
    }
    let table = cuqb_bench::metrics::profiles_from_traces(&grouped, args.tau)?;

    let out = args.out.unwrap_or(args.dir.clone());
    fs::create_dir_all(&out)?;
    let mut long = String::from("solver\tproblem\ttau\tpi\n");
    for (k, p) in table.problems.iter().enumerate() {
        for (s, name) in table.solvers.iter().enumerate() {
            long.push_str(&format!("{name}\t{p}\t{}\t{}\n", table.tau, table.pi[k][s].map_or("inf".to_string(), |v| v.to_string())));
        }
    }
    write_atomic(&out.join("profile_pi.tsv"), |w| Ok(w.write_all(long.as_bytes())?))?;
    write_atomic(&out.join("profile_curves.tsv"), |w| Ok(w.write_all(table.curves_delimited('\t').as_bytes())?))?;
    write_atomic(&out.join("profile.json"), |w| Ok(serde_json::to_writer_pretty(w, &table.to_json())?))?;
    print!("{long}");
    for (s, name) in table.solvers.iter().enumerate() {
        println!("{name}: solved fraction at T = {} is {}", table.budget, table.rho(s, table.budget));
    }
    Ok(())
}

fn box_text(b: &cuqb_core::Bounds) -> String {
    let pairs: Vec<(f64, f64)> = b.lower.iter().copied().zip(b.upper.iter().copied()).collect();
    if pairs.iter().all(|p| *p == pairs[0]) {
        format!("[{}, {}]^{}", pairs[0].0, pairs[0].1, pairs.len())
    } else {
        pairs.iter().map(|(l, h)| format!("[{l}, {h}]")).collect::<Vec<_>>().join(" x ")
    }
}

fn cmd_list_problems() -> Result<()> {
    let rows: Vec<_> = problems::names().into_iter().chain(problems::EXTRA).map(|n| problems::get(n).map(|p| (n, p))).collect::<cuqb_core::Result<_>>()?;
    let width = rows.iter().map(|(_, p)| box_text(&p.bounds).len()).max().unwrap_or(3);
    let mut out = std::io::stdout().lock();
    let written = (|| -> std::io::Result<()> {
        writeln!(out, "{:<16} {:>3} {:>3} {:>3}  {:<width$}  optimum", "name", "d", "m", "n", "box")?;
        for (name, p) in &rows {
            let opt = p.known_optimum.as_ref().map_or("-".to_string(), |o| format!("{}", o.value));
            writeln!(out, "{:<16} {:>3} {:>3} {:>3}  {:<width$}  {opt}", name, p.d(), p.m(), p.n(), box_text(&p.bounds))?;
        }
        out.flush()
    })();
    match written {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}
