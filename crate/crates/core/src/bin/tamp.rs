use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tamp::harness::{self, OtAttack, ReportFormat, Scenario};
use tamp::quantum::{self, Certificate, ToyProtocol};
use tamp::structures::{self, MonotoneFamily};

#[derive(Parser)]
#[command(name = "tamp", version, about = "Simulate and test multiparty commitment, OT and GMW protocols")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the admissibility conditions an adversary structure meets.
    CheckStructure { literal: String },
    /// Run a scenario file.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<u64>,
        #[arg(long, default_value = "text")]
        report: ReportFormat,
        /// Print the event log after the report (text reports only).
        #[arg(long)]
        events: bool,
    },
    /// Purification attack on a toy quantum commitment.
    AttackDemo { toy: ToyProtocol },
    /// Measurement-forcing oblivious transfer from BB84 states.
    Bb84Ot {
        #[arg(long, default_value_t = 128)]
        n: usize,
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
        #[arg(long, default_value = "none", value_parser = parse_attack)]
        attack: OtAttack,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "text")]
        report: ReportFormat,
    },
}

fn parse_attack(s: &str) -> Result<OtAttack, String> {
    OtAttack::parse(s).ok_or_else(|| format!("unknown attack `{s}` (none, delayed, unforced)"))
}

fn usage(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("tamp: {message}");
    ExitCode::from(2)
}

fn verdict(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(scenario: &Scenario, format: ReportFormat, events: bool) -> ExitCode {
    let t = harness::run_scenario(scenario);
    print!("{}", harness::report(&t, format));
    if events && format == ReportFormat::Text {
        for e in &t.events {
            println!("{e}");
        }
    }
    verdict(t.all_pass())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match cli.command {
        Command::CheckStructure { literal } => {
            let a: MonotoneFamily = match literal.parse() {
                Ok(a) => a,
                Err(e) => return usage(e),
            };
            let yes = |b: bool| if b { "yes" } else { "no" };
            println!("structure {}", a.literal());
            println!("partial: {}, robust: {}", yes(structures::partially_robust_admissible(&a)), yes(structures::robust_admissible(&a)));
            for &m in a.extremal() {
                if let Ok(post) = structures::post_termination_secure(&a, m) {
                    println!("post-termination-secure M={m}: {}", post.literal());
                }
            }
            ExitCode::SUCCESS
        }
        Command::Run { scenario, seed, trials, report, events } => {
            let mut s = match harness::load_scenario_file(&scenario) {
                Ok(s) => s,
                Err(e) => return usage(format!("{}: {e}", scenario.display())),
            };
            if let Some(seed) = seed {
                s.seed = seed;
            }
            if let Some(trials) = trials {
                s.trials = trials;
            }
            if let Err(e) = harness::validate(&s) {
                return usage(e);
            }
            run(&s, report, events)
        }
        Command::AttackDemo { toy } => match quantum::mayers_attack_demo(toy) {
            Ok(r) => {
                print!("{}", r.render());
                verdict(r.certified != Certificate::Inconclusive)
            }
            Err(e) => {
                eprintln!("tamp: {e}");
                ExitCode::from(1)
            }
        },
        Command::Bb84Ot { n, alpha, attack, trials, seed, report } => {
            let mut s = harness::load_scenario("name bb84-ot\nprotocol bb84-ot\n").expect("fixed scenario");
            s.positions = n;
            s.alpha = alpha;
            s.attack = attack;
            s.trials = trials;
            s.seed = seed;
            if let Err(e) = harness::validate(&s) {
                return usage(e);
            }
            run(&s, report, false)
        }
    }
}
