use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::Args;
use hiereval::campaign::{create_campaign, CampaignConfig};
use hiereval::casestudy;
use hiereval::report::{self, ReportKind};
use hiereval::simulate::{self, Policy};
use hiereval::store::{self, CampaignDir};
use hiereval::tree::{MetricTree, TreeError};
use hiereval::Engine;
use hiereval_server::AppState;

use crate::{Failure, Format};

#[derive(Args, Debug)]
pub struct CreateArgs {
    #[arg(long = "campaign-dir", env = "HIEREVAL_CAMPAIGN_DIR")]
    campaign_dir: PathBuf,
    /// Campaign id; defaults to the directory name.
    #[arg(long)]
    id: Option<String>,
    /// Items as .json, .jsonl or .csv.
    #[arg(long)]
    items: PathBuf,
    /// Evaluators (id, display_name, token) as .json, .jsonl or .csv.
    #[arg(long)]
    evaluators: PathBuf,
    /// Seed for the assignment shuffle.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Evaluators per item.
    #[arg(long, default_value_t = 1)]
    redundancy: usize,
    /// Tree file or bundled tree name.
    #[arg(long, default_value = "question_tree")]
    input_tree: String,
    #[arg(long, default_value = "answer_tree")]
    output_tree: String,
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

/// A tree from a file, or a bundled tree when no such file exists.
fn load_tree(spec: &str) -> Result<MetricTree, Failure> {
    let path = Path::new(spec);
    if !path.exists() {
        if let Some(tree) = MetricTree::bundled(spec) {
            return Ok(tree);
        }
    }
    let text = std::fs::read_to_string(path).map_err(|e| io(path, e))?;
    MetricTree::parse(&text).map_err(|e| Failure::Invalid(format!("{spec}: {e}")))
}

pub fn validate(spec: &str) -> Result<(), Failure> {
    let path = Path::new(spec);
    let text = match MetricTree::bundled(spec).filter(|_| !path.exists()) {
        Some(tree) => tree.to_canonical_json(),
        None => std::fs::read_to_string(path).map_err(|e| io(path, e))?,
    };
    match MetricTree::parse(&text) {
        Ok(tree) => {
            println!(
                "{spec}: valid {} tree '{}' with {} nodes and {} terminal paths",
                tree.target(),
                tree.id(),
                tree.node_count(),
                tree.enumerate_paths().len()
            );
            Ok(())
        }
        Err(TreeError::Invalid { violations, .. }) => {
            for v in &violations {
                println!("{}: {v}", v.invariant());
            }
            Err(Failure::Invalid(format!(
                "{spec}: {} violation(s)",
                violations.len()
            )))
        }
        Err(e) => Err(Failure::Invalid(format!("{spec}: {e}"))),
    }
}

pub fn create(args: CreateArgs) -> Result<(), Failure> {
    let id = match args.id {
        Some(id) => id,
        None => args
            .campaign_dir
            .file_name()
            .and_then(|n| n.to_str())
            .map(str::to_string)
            .ok_or_else(|| Failure::Invalid("cannot derive a campaign id; pass --id".into()))?,
    };
    let campaign = create_campaign(CampaignConfig {
        id,
        input_tree: load_tree(&args.input_tree)?,
        output_tree: load_tree(&args.output_tree)?,
        items: store::read_items(&args.items)?,
        evaluators: store::read_evaluators(&args.evaluators)?,
        redundancy: args.redundancy,
        shuffle_seed: args.seed,
    })
    .map_err(|e| Failure::Invalid(e.to_string()))?;
    CampaignDir::new(&args.campaign_dir).create(&campaign)?;
    println!(
        "created campaign '{}' in {}: {} items, {} evaluators, redundancy {}",
        campaign.id(),
        args.campaign_dir.display(),
        campaign.items().len(),
        campaign.evaluators().len(),
        campaign.redundancy()
    );
    Ok(())
}

pub fn import_items(dir: &Path, items: &Path) -> Result<(), Failure> {
    let items = store::read_items(items)?;
    let added = items.len();
    let campaign = CampaignDir::new(dir).import_items(items)?;
    println!(
        "imported {added} items; campaign '{}' now has {}",
        campaign.id(),
        campaign.items().len()
    );
    Ok(())
}

pub fn simulate(dir: &Path, policy: Policy, seed: u64) -> Result<(), Failure> {
    let (mut engine, mut journal) = CampaignDir::new(dir).open_for_writing()?;
    let before = engine.journal().len();
    let added = simulate::simulate(&mut engine, policy, seed)
        .map_err(|e| Failure::Invalid(e.to_string()))?;
    for record in &engine.journal()[before..] {
        journal
            .append(record)
            .map_err(|e| Failure::Io(e.to_string()))?;
    }
    println!(
        "{added} judgments recorded ({} policy, seed {seed}); journal now at sequence {}",
        policy.as_str(),
        engine.last_sequence_no()
    );
    Ok(())
}

pub fn report(
    dir: &Path,
    kind: ReportKind,
    as_of: Option<u64>,
    format: Format,
) -> Result<(), Failure> {
    let engine = CampaignDir::new(dir).load_engine(as_of)?;
    let report = report::build(&engine, kind);
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => print!("{}", report.to_json()),
    }
    Ok(())
}

pub fn serve(dirs: &[PathBuf], host: &str, port: u16) -> Result<(), Failure> {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .init();
    let dirs: Vec<CampaignDir> = dirs.iter().map(CampaignDir::new).collect();
    let state = AppState::open(&dirs).map_err(|e| match e {
        hiereval_server::ServeError::Store(e) => Failure::from(e),
        other => Failure::Invalid(other.to_string()),
    })?;
    let runtime = tokio::runtime::Runtime::new().map_err(|e| Failure::Io(e.to_string()))?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::Io(format!("cannot listen on {host}:{port}: {e}")))?;
        hiereval_server::serve(listener, state)
            .await
            .map_err(|e| Failure::Io(e.to_string()))
    })
}

pub fn emit(out: &Path) -> Result<(), Failure> {
    let engine = casestudy::reconstruct_dataset();
    let dir = CampaignDir::new(out);
    dir.create_with_journal(engine.campaign(), engine.journal())?;
    let items_path = out.join("items.jsonl");
    std::fs::write(
        &items_path,
        store::items_to_jsonl(engine.campaign().items()),
    )
    .map_err(|e| io(&items_path, e))?;
    println!(
        "wrote campaign '{}' ({} items, {} judgments) to {}",
        engine.campaign().id(),
        engine.campaign().items().len(),
        engine.journal().len(),
        out.display()
    );
    Ok(())
}

/// Checks the journal in `dir` against the published figures. The
/// campaign definition comes from the directory, so an edited journal is
/// verified as it stands.
pub fn verify(dir: &Path, format: Format) -> Result<(), Failure> {
    let cdir = CampaignDir::new(dir);
    let campaign = Arc::new(cdir.load_campaign()?);
    let records = cdir.read_journal()?;
    let engine = Engine::replay(campaign, &records)
        .map_err(|e| Failure::Io(format!("{}: {e}", cdir.journal_path().display())))?;
    let report = casestudy::verify_against_paper(&engine);
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Json => print!("{}", report.to_json()),
    }
    if report.overall_pass {
        Ok(())
    } else {
        Err(Failure::Verification)
    }
}
