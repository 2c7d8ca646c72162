use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use mms_duel_core::adversary::AdversaryParams;
use mms_duel_core::algorithms::Builtin;
use mms_duel_core::harness::{
    self, describe_verdict, duel_exit_code, render_report, run_duel, AlgoSelector, DuelConfig, HarnessError,
    HumanPolicy, VerifyOutcome,
};
use mms_duel_core::mms::{lpt_partition, mms_exact, partition_max_bundle};
use mms_duel_core::transcript_file;
use mms_duel_core::Rat;

/// Bad command line or duel parameters.
const EXIT_USAGE: u8 = 64;

#[derive(Parser)]
#[command(
    name = "mms-duel",
    version,
    about = "Adversary-vs-algorithm duels for online chore division under maximin share"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one duel and write its transcript (stdout when --out is absent).
    Duel(DuelArgs),
    /// Recheck the violation certificate stored in a transcript.
    Verify { path: PathBuf },
    /// Exact minimax share of a list of item costs.
    Mms {
        /// Comma-separated costs, e.g. 1,1/2,3
        #[arg(long, value_delimiter = ',', required = true)]
        costs: Vec<Rat>,
        #[arg(long)]
        k: usize,
    },
    /// Assign each chore yourself at the terminal.
    Play(GameArgs),
    /// Summarize transcripts as a table.
    Report { paths: Vec<PathBuf> },
}

#[derive(Args)]
struct GameArgs {
    #[arg(long, default_value_t = 2)]
    n: usize,
    #[arg(long, default_value = "1/4")]
    eps: Rat,
    #[arg(long, default_value = "1")]
    kappa: Rat,
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Also stop as soon as any agent is provably over the threshold.
    #[arg(long)]
    eager: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DuelArgs {
    #[command(flatten)]
    game: GameArgs,
    /// Built-in policy: all-to-one, round-robin, greedy-marginal, greedy-load, delayer.
    #[arg(long, default_value = "all-to-one", conflicts_with = "cmd")]
    algo: Builtin,
    /// Shell command of an external policy speaking the JSON line protocol.
    #[arg(long)]
    cmd: Option<String>,
    /// Per-chore reply deadline for --cmd.
    #[arg(long, default_value_t = 10_000)]
    timeout_ms: u64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    ExitCode::from(match cli.command {
        Command::Duel(args) => cmd_duel(args),
        Command::Verify { path } => cmd_verify(&path),
        Command::Mms { costs, k } => cmd_mms(&costs, k),
        Command::Play(args) => cmd_play(args),
        Command::Report { paths } => cmd_report(&paths),
    })
}

fn code(value: i32) -> u8 {
    u8::try_from(value).unwrap_or(1)
}

fn cmd_duel(args: DuelArgs) -> u8 {
    let algo = match args.cmd {
        Some(command) => AlgoSelector::External {
            command,
            timeout: Duration::from_millis(args.timeout_ms),
        },
        None => AlgoSelector::Builtin(args.algo),
    };
    let g = args.game;
    let config = DuelConfig {
        n: g.n,
        epsilon: g.eps,
        kappa: g.kappa,
        budget: g.budget,
        algo,
        eager_check: g.eager,
        out: g.out,
    };
    let transcript = match harness::duel(&config) {
        Ok(t) => t,
        Err(e @ HarnessError::Adversary(_)) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    if config.out.is_none() {
        let stdout = io::stdout().lock();
        if let Err(e) = transcript_file::write_transcript(&transcript, BufWriter::new(stdout)) {
            eprintln!("error: cannot write transcript: {e}");
            return 1;
        }
    }
    eprintln!(
        "{} chores; {}",
        transcript.m(),
        describe_verdict(transcript.verdict.as_ref(), &transcript.threshold())
    );
    code(duel_exit_code(transcript.verdict.as_ref()))
}

fn cmd_verify(path: &Path) -> u8 {
    let outcome = harness::verify_file(path);
    match &outcome {
        VerifyOutcome::Valid => println!("valid"),
        VerifyOutcome::Invalid(reason) => println!("invalid: {reason}"),
        VerifyOutcome::Malformed(reason) => eprintln!("malformed: {reason}"),
    }
    code(outcome.exit_code())
}

fn cmd_mms(costs: &[Rat], k: usize) -> u8 {
    if k == 0 {
        eprintln!("error: --k must be at least 1");
        return EXIT_USAGE;
    }
    let (value, partition) = match mms_exact(costs, k) {
        Ok(result) => (result.value, result.optimal_partition),
        Err(e) => {
            // Past the exact search limit, report the LPT bound instead.
            eprintln!("note: {e}; showing the LPT upper bound");
            let p = lpt_partition(costs, k);
            let v = partition_max_bundle(costs, &p).expect("LPT covers every item");
            (v, p)
        }
    };
    println!("{value}");
    let bundles: Vec<String> = partition
        .bundles
        .iter()
        .map(|b| {
            format!(
                "[{}]",
                b.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
            )
        })
        .collect();
    println!("partition: {}", bundles.join(" "));
    0
}

fn cmd_play(g: GameArgs) -> u8 {
    let params = match AdversaryParams::new(g.n, g.eps, g.kappa, g.budget, g.eager) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let stdin = io::stdin().lock();
    let mut human = HumanPolicy::new(stdin, io::stdout());
    let transcript = match run_duel(params, &mut human) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Some(path) = &g.out {
        if let Err(e) = transcript_file::save(&transcript, path) {
            eprintln!("error: cannot write transcript to {}: {e}", path.display());
            return 1;
        }
    }
    let _ = io::stdout().flush();
    code(duel_exit_code(transcript.verdict.as_ref()))
}

fn cmd_report(paths: &[PathBuf]) -> u8 {
    match harness::report_rows(paths) {
        Ok(rows) => {
            print!("{}", render_report(&rows));
            0
        }
        Err((path, e)) => {
            eprintln!("malformed: {}: {e}", path.display());
            code(harness::EXIT_MALFORMED)
        }
    }
}
