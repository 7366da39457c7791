//! `txpar`: analyse, schedule and execute transaction blocks.
//!
//! Exit codes: 0 success, 1 other failure, 2 invalid input, 3 I/O error,
//! 4 conflict during parallel execution, 5 serial/parallel mismatch.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use clap::{Parser, Subcommand, ValueEnum};

use txpar::exec::{Amplified, ExecError, ParallelExecutor};
use txpar::format::{state_to_json, BlockFile};
use txpar::net::{build_net, export_dot, DEFAULT_MAX_BLOCK};
use txpar::swap::{build_swap_relation, Analysis, RwAnalysis, RwSets};
use txpar::{exec_serial, fixtures, gen, BlockchainState, Platform};

#[derive(Parser)]
#[command(name = "txpar", version, about = "Parallel execution of blockchain transaction blocks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print read/write sets and the strong swappability matrix.
    Analyze {
        path: PathBuf,
        /// Emit JSON instead of text.
        #[arg(long)]
        json: bool,
    },
    /// Write the occurrence net of a block as GraphViz DOT.
    Net {
        path: PathBuf,
        /// Output file (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute a block and print the final state.
    Run {
        path: PathBuf,
        #[arg(long, value_enum, default_value_t = Mode::Parallel)]
        mode: Mode,
        #[command(flatten)]
        workers: Workers,
        /// Write the execution trace (schedule and updates per step) as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// On a conflict, rerun the whole block serially instead of failing.
        #[arg(long)]
        fallback_serial: bool,
        /// Pretend every transaction touches nothing (fault injection).
        #[arg(long, hide = true)]
        corrupt_analysis: bool,
    },
    /// Run serially once and in parallel `repeat` times; fail on any difference.
    Compare {
        path: PathBuf,
        #[command(flatten)]
        workers: Workers,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
        /// Pretend every transaction touches nothing (fault injection).
        #[arg(long, hide = true)]
        corrupt_analysis: bool,
    },
    /// Time serial against parallel execution.
    Bench {
        path: PathBuf,
        #[command(flatten)]
        workers: Workers,
        #[arg(long, default_value_t = 5)]
        repeat: usize,
        /// Busy-work rounds added to every transaction.
        #[arg(long, default_value_t = 0)]
        work_amplify: u64,
    },
    /// Print a random block.
    Gen {
        #[arg(long, value_enum)]
        platform: PlatformKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        max_len: usize,
    },
    /// Print a bundled block: one of the named fixtures, `lottery-replay:N`
    /// or `disjoint:N`.
    Fixture { name: String },
}

#[derive(clap::Args)]
struct Workers {
    /// Worker count (defaults to the available parallelism).
    #[arg(long, env = "TXPAR_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,
}

impl Workers {
    fn get(&self) -> usize {
        self.workers
            .map(|w| w as usize)
            .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Serial,
    Parallel,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlatformKind {
    Utxo,
    Account,
}

struct Failure {
    code: u8,
    message: String,
}

type CliResult<T> = Result<T, Failure>;

fn fail(code: u8, message: impl Into<String>) -> Failure {
    Failure { code, message: message.into() }
}

impl From<txpar::Error> for Failure {
    fn from(e: txpar::Error) -> Self {
        match e {
            txpar::Error::Conflict(_) => fail(4, e.to_string()),
            _ => fail(2, e.to_string()),
        }
    }
}

fn load(path: &Path) -> CliResult<BlockFile> {
    let text = std::fs::read_to_string(path).map_err(|e| fail(3, format!("{}: {e}", path.display())))?;
    BlockFile::parse(&text).map_err(|e| fail(2, format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| fail(3, format!("{}: {e}", path.display())))
}

fn state_json(s: &BlockchainState) -> String {
    serde_json::to_string_pretty(&state_to_json(s)).expect("JSON values always serialize") + "\n"
}

/// Calls `$body` with `$p`, `$block` bound to the platform and block of `$file`.
macro_rules! with_block {
    ($file:expr, |$p:ident, $block:ident| $body:expr) => {
        match $file {
            BlockFile::Utxo(b) => {
                let $p = b.platform();
                let $block = &b.block[..];
                $body
            }
            BlockFile::Account(b) => {
                let $p = b.platform();
                let $block = &b.block[..];
                $body
            }
        }
    };
}

// analyze -------------------------------------------------------------------

fn analyze_text<Tx: Sync>(labels: &[String], block: &[Tx], analysis: &dyn RwAnalysis<Tx>) -> String {
    let ba = build_swap_relation(block, analysis);
    let n = block.len();
    let mut out = format!("transactions: {n}\n");
    for (i, a) in ba.analyses.iter().enumerate() {
        let flag = if a.flagged { "  (widened)" } else { "" };
        let _ = writeln!(out, "{} {}{flag}", i + 1, labels[i]);
        let _ = writeln!(out, "  R = {}", a.sets.reads);
        let _ = writeln!(out, "  W = {}", a.sets.writes);
    }
    let pairs: Vec<String> = ba
        .relation
        .pairs()
        .into_iter()
        .map(|(i, j)| format!("({},{})", i + 1, j + 1))
        .collect();
    let _ = writeln!(out, "strongly swappable: {}", if pairs.is_empty() { "none".into() } else { pairs.join(" ") });
    if n > 0 {
        let w = n.to_string().len();
        let _ = write!(out, "{:w$} ", "");
        for j in 1..=n {
            let _ = write!(out, " {j:>w$}");
        }
        out.push('\n');
        for i in 0..n {
            let _ = write!(out, "{:>w$} ", i + 1);
            for j in 0..n {
                let c = match (i == j, ba.relation.get(i, j)) {
                    (true, _) => '-',
                    (false, true) => 's',
                    (false, false) => 'x',
                };
                let _ = write!(out, " {c:>w$}");
            }
            out.push('\n');
        }
    }
    out
}

fn analyze_json<Tx: Sync>(labels: &[String], block: &[Tx], analysis: &dyn RwAnalysis<Tx>) -> String {
    let ba = build_swap_relation(block, analysis);
    let set = |s: &txpar::swap::AccessSet| s.iter().map(|a| a.to_string()).collect::<Vec<_>>();
    let txs: Vec<_> = ba
        .analyses
        .iter()
        .enumerate()
        .map(|(i, a)| {
            serde_json::json!({
                "position": i + 1,
                "label": labels[i],
                "reads": set(&a.sets.reads),
                "writes": set(&a.sets.writes),
                "widened": a.flagged,
            })
        })
        .collect();
    let pairs: Vec<_> = ba.relation.pairs().into_iter().map(|(i, j)| [i + 1, j + 1]).collect();
    let v = serde_json::json!({ "transactions": txs, "swappable": pairs });
    serde_json::to_string_pretty(&v).expect("JSON values always serialize") + "\n"
}

fn cmd_analyze(path: &Path, json: bool) -> CliResult<String> {
    let file = load(path)?;
    let labels = file.labels();
    Ok(with_block!(&file, |p, block| if json {
        analyze_json(&labels, block, &p)
    } else {
        analyze_text(&labels, block, &p)
    }))
}

// net -------------------------------------------------------------------------

fn cmd_net(path: &Path, out: Option<&Path>) -> CliResult<String> {
    let file = load(path)?;
    let labels = file.labels();
    let rel = with_block!(&file, |p, block| build_swap_relation(block, &p).relation);
    let dot = export_dot(&build_net(&labels, &rel, DEFAULT_MAX_BLOCK)?, None);
    match out {
        Some(o) => write_file(o, &dot).map(|_| String::new()),
        None => Ok(dot),
    }
}

// run -------------------------------------------------------------------------

fn run_parallel<P: Platform + RwAnalysis<P::Tx>>(
    p: &P,
    block: &[P::Tx],
    labels: &[String],
    workers: usize,
    trace: Option<&Path>,
    fallback: bool,
    corrupt: bool,
) -> CliResult<BlockchainState> {
    let blind = |_: &P::Tx| Analysis::exact(RwSets::default());
    let analysis: &dyn RwAnalysis<P::Tx> = if corrupt { &blind } else { p };
    let s0 = p.initial_state();
    let ex = ParallelExecutor::new(workers)?;
    match ex.run(block, labels, &s0, p, analysis) {
        Ok(run) => {
            if let Some(t) = trace {
                let json = serde_json::to_string_pretty(&run.trace).expect("trace serializes");
                write_file(t, &(json + "\n"))?;
            }
            Ok(run.state)
        }
        Err(ExecError::Conflict(c)) if fallback => {
            eprintln!("warning: {c}; rerunning the block serially");
            Ok(exec_serial(block, &s0, p))
        }
        Err(ExecError::Conflict(c)) => Err(fail(4, c.to_string())),
        Err(ExecError::Other(e)) => Err(e.into()),
    }
}

struct RunOpts<'a> {
    mode: Mode,
    workers: usize,
    trace: Option<&'a Path>,
    fallback: bool,
    corrupt: bool,
}

fn cmd_run(path: &Path, o: RunOpts) -> CliResult<String> {
    let file = load(path)?;
    let labels = file.labels();
    let state = with_block!(&file, |p, block| match o.mode {
        Mode::Serial => exec_serial(block, &p.initial_state(), &p),
        Mode::Parallel => run_parallel(&p, block, &labels, o.workers, o.trace, o.fallback, o.corrupt)?,
    });
    Ok(state_json(&state))
}

// compare ---------------------------------------------------------------------

fn compare<P: Platform + RwAnalysis<P::Tx>>(
    p: &P,
    block: &[P::Tx],
    labels: &[String],
    workers: usize,
    repeat: usize,
    corrupt: bool,
) -> CliResult<String> {
    let blind = |_: &P::Tx| Analysis::exact(RwSets::default());
    let analysis: &dyn RwAnalysis<P::Tx> = if corrupt { &blind } else { p };
    let s0 = p.initial_state();
    let serial = exec_serial(block, &s0, p);
    let ex = ParallelExecutor::new(workers)?;
    for k in 1..=repeat {
        match ex.run(block, labels, &s0, p, analysis) {
            Ok(run) if run.state == serial => {}
            Ok(run) => {
                let diff = txpar::state_diff(&run.state, &serial);
                let first = diff.iter().next().map(|(o, _)| o.to_string()).unwrap_or_default();
                return Err(fail(5, format!("mismatch in parallel run {k}: states differ at {first}")));
            }
            Err(ExecError::Conflict(c)) => return Err(fail(5, format!("mismatch in parallel run {k}: {c}"))),
            Err(ExecError::Other(e)) => return Err(e.into()),
        }
    }
    Ok(format!(
        "pass: {} transactions, {repeat} parallel run(s) with {workers} worker(s) equal serial\n",
        block.len()
    ))
}

fn cmd_compare(path: &Path, workers: usize, repeat: usize, corrupt: bool) -> CliResult<String> {
    let file = load(path)?;
    let labels = file.labels();
    with_block!(&file, |p, block| compare(&p, block, &labels, workers, repeat, corrupt))
}

// bench -----------------------------------------------------------------------

fn median(mut v: Vec<Duration>) -> Duration {
    v.sort();
    v[v.len() / 2]
}

fn bench<P: Platform + RwAnalysis<P::Tx>>(
    p: &P,
    block: &[P::Tx],
    labels: &[String],
    workers: usize,
    repeat: usize,
) -> CliResult<String> {
    let s0 = p.initial_state();
    let ex = ParallelExecutor::new(workers)?;
    let (mut serial, mut prep, mut parallel) = (Vec::new(), Vec::new(), Vec::new());
    let mut steps = 0;
    for _ in 0..repeat.max(1) {
        let start = Instant::now();
        let expected = exec_serial(block, &s0, p);
        serial.push(start.elapsed());
        let start = Instant::now();
        let run = ex.run(block, labels, &s0, p, p).map_err(|e| match e {
            ExecError::Conflict(c) => fail(4, c.to_string()),
            ExecError::Other(e) => e.into(),
        })?;
        parallel.push(start.elapsed());
        prep.push(run.timings.analysis + run.timings.net);
        if run.state != expected {
            return Err(fail(5, "parallel state differs from serial"));
        }
        steps = run.schedule.len();
    }
    let ms = |d: Duration| d.as_secs_f64() * 1e3;
    let (s, a, q) = (median(serial), median(prep), median(parallel));
    Ok(format!(
        "transactions        {}\nsteps               {steps}\nworkers             {workers}\nrepeat              {}\n\
         serial ms           {:.3}\nanalysis+net ms     {:.3}\nparallel ms         {:.3}\nspeedup             {:.2}\n",
        block.len(),
        repeat.max(1),
        ms(s),
        ms(a),
        ms(q),
        s.as_secs_f64() / q.as_secs_f64().max(1e-9),
    ))
}

fn cmd_bench(path: &Path, workers: usize, repeat: usize, cycles: u64) -> CliResult<String> {
    let file = load(path)?;
    let labels = file.labels();
    with_block!(&file, |p, block| bench(&Amplified::new(p, cycles), block, &labels, workers, repeat))
}

// gen / fixture ----------------------------------------------------------------

fn cmd_fixture(name: &str) -> CliResult<String> {
    let count = |prefix: &str| {
        name.strip_prefix(prefix)
            .map(|n| n.parse::<usize>().map_err(|_| fail(2, format!("bad count in {name:?}"))))
    };
    let file = if let Some(n) = count("lottery-replay:") {
        BlockFile::Account(fixtures::lottery_replay(n?))
    } else if let Some(n) = count("disjoint:") {
        BlockFile::Utxo(fixtures::utxo_disjoint(n?))
    } else {
        let names: Vec<_> = fixtures::ALL.iter().map(|(n, _)| *n).collect();
        fixtures::by_name(name).ok_or_else(|| {
            fail(2, format!("unknown fixture {name:?}; expected one of {}, lottery-replay:N, disjoint:N", names.join(", ")))
        })?
    };
    Ok(file.to_string_pretty() + "\n")
}

fn dispatch(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Analyze { path, json } => cmd_analyze(&path, json),
        Command::Net { path, out } => cmd_net(&path, out.as_deref()),
        Command::Run { path, mode, workers, trace, fallback_serial, corrupt_analysis } => cmd_run(
            &path,
            RunOpts {
                mode,
                workers: workers.get(),
                trace: trace.as_deref(),
                fallback: fallback_serial,
                corrupt: corrupt_analysis,
            },
        ),
        Command::Compare { path, workers, repeat, corrupt_analysis } => {
            cmd_compare(&path, workers.get(), repeat, corrupt_analysis)
        }
        Command::Bench { path, workers, repeat, work_amplify } => {
            cmd_bench(&path, workers.get(), repeat, work_amplify)
        }
        Command::Gen { platform, seed, max_len } => {
            let file = match platform {
                PlatformKind::Utxo => gen::utxo_block(seed, max_len),
                PlatformKind::Account => gen::account_block(seed, max_len),
            };
            Ok(file.to_string_pretty() + "\n")
        }
        Command::Fixture { name } => cmd_fixture(&name),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
