use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use ahsecagg::algebra::FieldParams;
use ahsecagg::error::Error;
use ahsecagg::harness::sweep::{row_laws, scaling_fit};
use ahsecagg::harness::{run_grid, run_suite, simulate, write_csv, Network, RunConfig, Scheme, Suite, SweepGrid};
use ahsecagg::masking::rank::{analyze, build_mask_equations, Layout};
use ahsecagg::masking::MaskParams;
use ahsecagg::protocol::Mode;
use ahsecagg::rng::seeded_stream;
use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use rand::Rng;

#[derive(Parser)]
#[command(name = "ahsecagg", version, about = "Secure aggregation simulator, sweeps and property suites")]
struct Cli {
    /// Default seed for every subcommand.
    #[arg(long, global = true, env = "AHSECAGG_SEED")]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One aggregation.
    Run(RunArgs),
    /// A grid of runs written as CSV.
    Sweep(SweepArgs),
    /// Property suites.
    Verify {
        #[arg(long, default_value = "all")]
        suite: Suite,
    },
    /// Rank of the linear system an observer of one masked vector can write.
    Rank {
        #[arg(short)]
        m: usize,
        #[arg(long, default_value = "ours")]
        layout: Layout,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value run file; flags given here override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scheme: Option<Scheme>,
    #[arg(short)]
    n: Option<usize>,
    #[arg(short)]
    t: Option<usize>,
    #[arg(short)]
    m: Option<usize>,
    #[arg(long)]
    mode: Option<Mode>,
    /// modp2048, desk or toy.
    #[arg(long)]
    group: Option<String>,
    #[arg(long)]
    dropout_round: Option<u8>,
    #[arg(long)]
    dropout_rate: Option<f64>,
    /// Scenario as name[:victim[:colluders]].
    #[arg(long)]
    adversary: Option<String>,
    /// lan, wan or a latency in ms.
    #[arg(long)]
    network: Option<Network>,
    #[arg(long)]
    aggregations: Option<usize>,
    #[arg(long)]
    parallel: bool,
    /// Write the message transcript as CSV.
    #[arg(long)]
    transcript: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_delimiter = ',')]
    schemes: Option<Vec<Scheme>>,
    #[arg(long = "n", value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    #[arg(long = "m", value_delimiter = ',')]
    ms: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    rates: Option<Vec<f64>>,
    #[arg(long, default_value = "desk")]
    group: String,
    #[arg(long, default_value = "lan")]
    network: Network,
    #[arg(long, short, default_value = "sweep.csv")]
    out: PathBuf,
}

struct Usage(String);

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => match e.downcast::<Usage>() {
            Ok(Usage(msg)) => {
                eprintln!("error: {msg}");
                ExitCode::from(2)
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

impl std::fmt::Debug for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

/// Configuration problems are usage errors.
fn lift(e: Error) -> anyhow::Error {
    match e {
        Error::Config(msg) => Usage(msg).into(),
        other => other.into(),
    }
}

fn dispatch(cli: Cli) -> anyhow::Result<bool> {
    match cli.cmd {
        Command::Run(args) => run(args, cli.seed),
        Command::Sweep(args) => sweep(args, cli.seed.unwrap_or(0)),
        Command::Verify { suite } => {
            let checks = run_suite(suite, cli.seed.unwrap_or(0));
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(checks.iter().all(|c| c.passed))
        }
        Command::Rank { m, layout } => rank(m, layout, cli.seed.unwrap_or(0)),
    }
}

fn run_config(args: &RunArgs, seed: Option<u64>) -> anyhow::Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            RunConfig::from_kv(&text).map_err(lift)?
        }
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    macro_rules! over {
        ($field:ident) => {
            if let Some(v) = args.$field.clone() {
                cfg.$field = v;
            }
        };
    }
    over!(scheme);
    over!(n);
    over!(m);
    over!(mode);
    over!(dropout_round);
    over!(dropout_rate);
    over!(network);
    over!(aggregations);
    if args.t.is_some() {
        cfg.t = args.t;
    }
    if args.group.is_some() {
        cfg.group = args.group.clone();
    }
    if let Some(a) = &args.adversary {
        cfg.set("adversary", a).map_err(lift)?;
    }
    cfg.parallel |= args.parallel;
    Ok(cfg)
}

fn run(args: RunArgs, seed: Option<u64>) -> anyhow::Result<bool> {
    let cfg = run_config(&args, seed)?;
    let report = simulate(&cfg).map_err(lift)?;
    let o = &report.result.outcome;
    println!(
        "scheme {} n={} t={} m={} mode={} group={} seed={}",
        cfg.scheme,
        cfg.n,
        cfg.threshold(),
        cfg.m,
        cfg.mode,
        cfg.group_name(),
        cfg.seed
    );
    if let (Some(u2), Some(u3)) = (&o.survivors.u2, &o.survivors.u3) {
        println!("survivors: {} sent masked inputs, {} dropped after sharing", u3.len(), u2.len() - u3.len());
    }
    for note in &report.result.notes {
        println!("note: {note}");
    }
    if let Some(s) = &report.result.split {
        println!("split view: signatures {:?}, echoed {:?}, reconstructible {:?}", s.signatures, s.echoed, s.reconstructible);
    }
    if let Some((round, cause)) = &o.server_abort {
        println!("server aborted in round {round}: {cause}");
    }
    if !o.user_aborts.is_empty() {
        println!("{} users aborted", o.user_aborts.len());
        for (u, (round, cause)) in o.user_aborts.iter().take(5) {
            println!("  {u} in round {round}: {cause}");
        }
    }
    let server = o.metrics.server();
    println!(
        "server: modexp {} reconstructions {} prg expansions {} bsgs steps {}",
        server.ops.modexp, server.ops.shamir_reconstructions, server.ops.prg_element_expansions, server.ops.bsgs_steps
    );
    println!(
        "traffic: {} bytes sent, {} undelivered, wall {:.1} ms, injected latency {:.0} ms",
        o.metrics.total_bytes_sent(),
        o.metrics.bytes_undelivered,
        o.metrics.wall.as_secs_f64() * 1e3,
        o.metrics.virtual_latency.as_secs_f64() * 1e3
    );
    if let Some(path) = &args.transcript {
        fs::write(path, o.transcript.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    match report.checksum() {
        Some(sum) => {
            let ok = report.matches_oracle();
            println!("output checksum {sum}");
            println!("oracle match: {}", if ok { "yes" } else { "no" });
            Ok(ok)
        }
        None => {
            println!("no output");
            Ok(false)
        }
    }
}

fn sweep(args: SweepArgs, seed: u64) -> anyhow::Result<bool> {
    let d = SweepGrid::default();
    let grid = SweepGrid {
        schemes: args.schemes.unwrap_or(d.schemes),
        ns: args.ns.unwrap_or(d.ns),
        ms: args.ms.unwrap_or(d.ms),
        rates: args.rates.unwrap_or(d.rates),
        seed,
        group: args.group,
        network: args.network,
        ..d
    };
    let rows = run_grid(&grid).map_err(lift)?;
    let file = fs::File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_csv(file, &rows)?;
    println!("{} rows written to {}", rows.len(), args.out.display());
    let mut ok = true;
    for c in row_laws(&rows) {
        println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    if let Some(fit) = scaling_fit(&rows) {
        let [a, b, c] = fit.coefficients;
        println!("server ops ~ {a:.1} + {b:.3} m + {c:.3} n, R^2 = {:.5}", fit.r2);
        if !fit.rate_dependent.is_empty() {
            println!("server counters vary with dropout rate at {:?}", fit.rate_dependent);
        }
        ok &= fit.passed();
    }
    Ok(ok)
}

fn rank(m: usize, layout: Layout, seed: u64) -> anyhow::Result<bool> {
    let f = FieldParams::default();
    let mut rng = seeded_stream(seed, "rank", m as u64);
    let params = MaskParams::random(&f, m, &mut rng).map_err(lift)?;
    let y: Vec<_> = (0..m).map(|_| f.elem(rng.gen_range(0..f.modulus()))).collect();
    let rep = analyze(&f, &build_mask_equations(&f, &y, &params, layout).map_err(lift)?);
    println!("layout {layout:?}: rank(C) = {}, rank(A) = {}, unknowns = {}", rep.rank_coefficients, rep.rank_augmented, rep.unknowns);
    println!("rank {}, unknowns {}", rep.rank_coefficients, rep.unknowns);
    if rep.underdetermined() {
        println!("underdetermined: infinitely many (s, x) fit the masked vector");
    }
    Ok(rep.rank_coefficients == rep.rank_augmented)
}
