//! `hiereval stats`: association and agreement statistics from the command
//! line, on a campaign, a literal 2x2 table or a ratings file.

use std::fs::File;
use std::path::PathBuf;

use clap::Args;
use hiereval::scoring;
use hiereval::stats::{
    chi_square_2x2, cohens_kappa, fleiss_kappa, kendall_tau_raters, krippendorff_alpha,
    percentage_agreement, ContingencyTable, RatingsMatrix, Scale, StatsError, TestResult,
};
use hiereval::store::CampaignDir;
use serde::Serialize;

use crate::{Failure, Format};

#[derive(Args, Debug)]
pub struct StatsArgs {
    /// 2x2 table as `a,b,c,d`, row by row (rows: output good/bad, columns: input good/bad).
    #[arg(long, conflicts_with_all = ["campaign_dir", "ratings"])]
    cells: Option<ContingencyTable>,
    /// Cross-tabulate a campaign's composite outcomes.
    #[arg(long = "campaign-dir", conflicts_with = "ratings")]
    campaign_dir: Option<PathBuf>,
    /// Ratings table: header `item,<rater>,...`, one row per item.
    #[arg(long)]
    ratings: Option<PathBuf>,
    /// Cell value meaning "not rated".
    #[arg(long, default_value = "NA")]
    missing: String,
    /// Ordered category levels, lowest first; makes the scale ordinal.
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<String>>,
    /// Field delimiter of the ratings file; defaults to tab for .tsv, comma otherwise.
    #[arg(long)]
    delimiter: Option<char>,
    /// Apply Yates' continuity correction.
    #[arg(long)]
    yates: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
}

#[derive(Serialize)]
struct ChiSquareOutput {
    table: ContingencyTable,
    test: TestResult,
}

#[derive(Serialize)]
struct Coefficient {
    name: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    value: Option<f64>,
    /// Why the coefficient is not defined for this input.
    #[serde(skip_serializing_if = "Option::is_none")]
    undefined: Option<String>,
}

#[derive(Serialize)]
struct AgreementOutput {
    items: usize,
    raters: usize,
    categories: Vec<String>,
    scale: Scale,
    coefficients: Vec<Coefficient>,
}

pub fn run(args: StatsArgs) -> Result<(), Failure> {
    if let Some(path) = &args.ratings {
        return agreement(&args, path);
    }
    let table = match (&args.cells, &args.campaign_dir) {
        (Some(t), _) => *t,
        (None, Some(dir)) => scoring::contingency_table(&CampaignDir::new(dir).load_engine(None)?),
        (None, None) => {
            return Err(Failure::Invalid(
                "pass one of --cells, --campaign-dir or --ratings".into(),
            ))
        }
    };
    let test = chi_square_2x2(&table, args.yates).map_err(|e| Failure::Invalid(e.to_string()))?;
    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&ChiSquareOutput { table, test }).expect("serializes")
        ),
        Format::Text => {
            println!(
                "table      {} {} / {} {}",
                table.a, table.b, table.c, table.d
            );
            println!(
                "chi-square {:.4}{}",
                test.statistic,
                if test.yates_correction {
                    " (Yates)"
                } else {
                    ""
                }
            );
            println!("dof        {}", test.dof);
            println!("p-value    {:.4}", test.p_value);
            if test.low_expected_warning {
                println!("warning: an expected count is below 5");
            }
        }
    }
    Ok(())
}

fn coefficient(name: &str, result: Result<f64, StatsError>) -> Coefficient {
    let (value, undefined) = match result {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    };
    Coefficient {
        name: name.into(),
        value,
        undefined,
    }
}

fn agreement(args: &StatsArgs, path: &PathBuf) -> Result<(), Failure> {
    let file = File::open(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let tsv = path.extension().is_some_and(|e| e == "tsv");
    let delimiter = args.delimiter.unwrap_or(if tsv { '\t' } else { ',' });
    let delimiter = u8::try_from(delimiter)
        .map_err(|_| Failure::Invalid("the delimiter must be a single-byte character".into()))?;
    let m = RatingsMatrix::from_delimited(file, delimiter, &args.missing, args.levels.clone())
        .map_err(|e| Failure::Invalid(format!("{}: {e}", path.display())))?;

    let mut coefficients = vec![coefficient(
        "percentage_agreement",
        percentage_agreement(&m),
    )];
    if m.raters().len() == 2 {
        coefficients.push(coefficient("cohens_kappa", cohens_kappa(&m)));
    }
    coefficients.push(coefficient(
        "fleiss_kappa",
        m.fleiss_counts().and_then(|(c, n)| fleiss_kappa(&c, n)),
    ));
    coefficients.push(coefficient("krippendorff_alpha", krippendorff_alpha(&m)));
    if m.scale() == Scale::Ordinal {
        for i in 0..m.raters().len() {
            for j in i + 1..m.raters().len() {
                let name = format!("kendall_tau[{},{}]", m.raters()[i], m.raters()[j]);
                coefficients.push(coefficient(&name, kendall_tau_raters(&m, i, j)));
            }
        }
    }
    let out = AgreementOutput {
        items: m.items().len(),
        raters: m.raters().len(),
        categories: m.categories().to_vec(),
        scale: m.scale(),
        coefficients,
    };
    match args.format {
        Format::Json => println!(
            "{}",
            serde_json::to_string_pretty(&out).expect("serializes")
        ),
        Format::Text => {
            println!(
                "{} items, {} raters, {:?} scale, categories {}",
                out.items,
                out.raters,
                out.scale,
                out.categories.join(", ")
            );
            let width = out
                .coefficients
                .iter()
                .map(|c| c.name.len())
                .max()
                .unwrap_or(0);
            for c in &out.coefficients {
                match (c.value, &c.undefined) {
                    (Some(v), _) => println!("{:<width$}  {v:.6}", c.name),
                    (None, Some(why)) => println!("{:<width$}  undefined ({why})", c.name),
                    (None, None) => unreachable!(),
                }
            }
        }
    }
    Ok(())
}
