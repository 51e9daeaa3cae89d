//! `hiereval`: operator entry point for hierarchical evaluation campaigns.
//!
//! Exit status is the same for every subcommand: 0 success, 1 the input
//! failed validation, 2 a file could not be read or written (or a journal
//! is corrupt), 3 a verification did not pass.

mod commands;
mod stats;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hiereval::report::ReportKind;
use hiereval::simulate::Policy;

#[derive(Parser, Debug)]
#[command(
    name = "hiereval",
    version,
    about = "Hierarchical human evaluation campaigns"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a metric tree document and list every violation.
    Validate {
        /// Tree file, or the name of a bundled tree (question_tree, answer_tree).
        #[arg(long)]
        tree: String,
    },
    /// Campaign setup.
    #[command(subcommand)]
    Campaign(CampaignCommand),
    /// Item management.
    #[command(subcommand)]
    Items(ItemsCommand),
    /// Drive every open traversal to termination with synthetic evaluators.
    Simulate {
        #[command(flatten)]
        dir: DirArg,
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Render a report from the journal.
    Report {
        #[command(flatten)]
        dir: DirArg,
        #[arg(long, value_parser = parse_kind)]
        kind: ReportKind,
        /// Only use judgments up to this sequence number.
        #[arg(long)]
        as_of: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Chi-square test or agreement coefficients.
    Stats(stats::StatsArgs),
    /// Serve campaigns over HTTP for live judgment sessions.
    Serve {
        /// Campaign directory; repeat to serve several campaigns.
        #[arg(long = "campaign-dir", env = "HIEREVAL_CAMPAIGN_DIR", required = true)]
        campaign_dirs: Vec<PathBuf>,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
    /// The bundled sleep-coaching case study.
    #[command(subcommand)]
    Casestudy(CasestudyCommand),
}

#[derive(Subcommand, Debug)]
enum CampaignCommand {
    /// Create a campaign directory with an empty journal.
    Create(commands::CreateArgs),
}

#[derive(Subcommand, Debug)]
enum ItemsCommand {
    /// Add items to a campaign that has no judgments yet.
    Import {
        #[command(flatten)]
        dir: DirArg,
        /// Items as .json, .jsonl or .csv.
        #[arg(long)]
        items: PathBuf,
    },
}

#[derive(Subcommand, Debug)]
enum CasestudyCommand {
    /// Write the reconstructed campaign, items and journal.
    Emit {
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute every published figure from a campaign directory.
    Verify {
        dir: PathBuf,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
}

#[derive(Args, Debug, Clone)]
struct DirArg {
    #[arg(long = "campaign-dir", env = "HIEREVAL_CAMPAIGN_DIR")]
    campaign_dir: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Text,
    Json,
}

fn parse_policy(s: &str) -> Result<Policy, String> {
    s.parse()
}

fn parse_kind(s: &str) -> Result<ReportKind, String> {
    s.parse()
        .map_err(|e: hiereval::report::UnknownReportKind| e.to_string())
}

/// Why a command did not succeed; the variant fixes the exit status.
#[derive(Debug)]
pub enum Failure {
    Invalid(String),
    Io(String),
    /// The report has already been printed.
    Verification,
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Io(_) => 2,
            Failure::Verification => 3,
        }
    }
}

impl From<hiereval::store::StoreError> for Failure {
    fn from(e: hiereval::store::StoreError) -> Self {
        use hiereval::store::StoreError as E;
        match e {
            // a journal that no longer replays is damaged data, not bad input
            E::Io { .. } | E::Journal(_) | E::Replay { .. } => Failure::Io(e.to_string()),
            _ => Failure::Invalid(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate { tree } => commands::validate(&tree),
        Command::Campaign(CampaignCommand::Create(args)) => commands::create(args),
        Command::Items(ItemsCommand::Import { dir, items }) => {
            commands::import_items(&dir.campaign_dir, &items)
        }
        Command::Simulate { dir, policy, seed } => {
            commands::simulate(&dir.campaign_dir, policy, seed)
        }
        Command::Report {
            dir,
            kind,
            as_of,
            format,
        } => commands::report(&dir.campaign_dir, kind, as_of, format),
        Command::Stats(args) => stats::run(args),
        Command::Serve {
            campaign_dirs,
            port,
            host,
        } => commands::serve(&campaign_dirs, &host, port),
        Command::Casestudy(CasestudyCommand::Emit { out }) => commands::emit(&out),
        Command::Casestudy(CasestudyCommand::Verify { dir, format }) => {
            commands::verify(&dir, format)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            match &failure {
                Failure::Invalid(m) | Failure::Io(m) => eprintln!("error: {m}"),
                Failure::Verification => {}
            }
            ExitCode::from(failure.code())
        }
    }
}
