//! Acceptance suite: one PASS or FAIL line per criterion, nonzero exit if
//! any criterion fails.
//!
//! The case-study criteria drive the built `hiereval` binary end to end.
//! The statistics criteria compare the library against the brute-force
//! oracles in `oracles.rs`; the engine criteria run the shared invariant
//! checks over many random campaigns.

mod oracles;

use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use hiereval::simulate::{simulate, Policy};
use hiereval::stats::{self, ContingencyTable, RatingsMatrix, StatsError};
use hiereval::testkit;
use hiereval::Engine;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use oracles::Rows;

/// Tolerance for tail probabilities against numerical integration.
const SF_TOL: f64 = 1e-8;
/// Tolerance for coefficients that are ratios of integer counts.
const EXACT_TOL: f64 = 1e-12;
/// Instances per coefficient compared against its oracle.
const ORACLE_INSTANCES: usize = 40;
/// Randomized trials per invariance property.
const INVARIANCE_TRIALS: usize = 1000;
/// Random campaigns for the engine properties.
const ENGINE_CAMPAIGNS: u64 = 120;
const ENGINE_MAX_ITEMS: usize = 50;

type Outcome = Result<String, String>;
type Criterion<'a> = (&'static str, Box<dyn FnOnce() -> Outcome + 'a>);

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temp dir");
    let dir = work.path().join("casestudy");
    let started = Instant::now();
    let emitted = run(&["casestudy", "emit", "--out", dir.to_str().unwrap()]);

    let criteria: Vec<Criterion> = vec![
        (
            "case-study funnel reproduction",
            Box::new(|| funnel(&dir, emitted.clone(), started)),
        ),
        ("answer-side reproduction", Box::new(|| answers(&dir))),
        ("association test", Box::new(|| association(&dir))),
        ("time savings", Box::new(|| time_savings(&dir))),
        ("statistics oracle suite", Box::new(statistics)),
        ("engine property suite", Box::new(engine_properties)),
    ];

    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{failed} criteria failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

/// Runs the binary and returns its stdout, or the reason it failed.
fn run(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hiereval"))
        .args(args)
        .env_remove("HIEREVAL_CAMPAIGN_DIR")
        .output()
        .map_err(|e| format!("cannot start hiereval: {e}"))?;
    if !out.status.success() {
        return Err(format!(
            "hiereval {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn report(dir: &Path, kind: &str) -> Result<Value, String> {
    let text = run(&[
        "report",
        "--campaign-dir",
        dir.to_str().unwrap(),
        "--kind",
        kind,
        "--format",
        "json",
    ])?;
    let doc: Value = serde_json::from_str(&text).map_err(|e| format!("{kind} json: {e}"))?;
    Ok(doc["report"].clone())
}

fn expect_eq<T: PartialEq + std::fmt::Debug>(what: &str, got: T, want: T) -> Result<(), String> {
    if got == want {
        Ok(())
    } else {
        Err(format!("{what}: expected {want:?}, got {got:?}"))
    }
}

fn entry<'a>(funnel: &'a Value, node: &str) -> Result<&'a Value, String> {
    funnel["entries"]
        .as_array()
        .and_then(|es| es.iter().find(|e| e["node_id"] == node))
        .ok_or_else(|| format!("funnel has no entry for {node}"))
}

fn answer_count(funnel: &Value, node: &str, answer: &str) -> Result<u64, String> {
    Ok(entry(funnel, node)?["answer_counts"][answer]
        .as_u64()
        .unwrap_or(0))
}

fn funnel(dir: &Path, emitted: Result<String, String>, started: Instant) -> Outcome {
    emitted?;
    let input = report(dir, "funnel_input")?;
    let difficulty = report(dir, "difficulty")?;
    let elapsed = started.elapsed();

    let presented: Vec<u64> = input["entries"]
        .as_array()
        .ok_or("funnel_input has no entries")?
        .iter()
        .map(|e| e["presented"].as_u64().unwrap_or(0))
        .collect();
    expect_eq(
        "presented",
        presented.as_slice(),
        &[387, 383, 335, 327, 321, 247],
    )?;
    let levels: Vec<(String, u64)> = difficulty["levels"]
        .as_array()
        .ok_or("difficulty has no levels")?
        .iter()
        .map(|l| {
            (
                l["level"].as_str().unwrap_or("").to_string(),
                l["count"].as_u64().unwrap_or(0),
            )
        })
        .collect();
    expect_eq(
        "difficulty",
        levels,
        vec![
            ("easy".into(), 155),
            ("medium".into(), 74),
            ("hard".into(), 18),
        ],
    )?;
    if elapsed >= Duration::from_secs(5) {
        return Err(format!("emit and reports took {elapsed:.2?}, limit 5 s"));
    }
    Ok(format!(
        "presented 387/383/335/327/321/247, difficulty 155/74/18, {elapsed:.2?}"
    ))
}

fn answers(dir: &Path) -> Outcome {
    let f = report(dir, "funnel_output")?;
    expect_eq("clear yes", answer_count(&f, "clear", "yes")?, 230)?;
    expect_eq("clear no", answer_count(&f, "clear", "no")?, 157)?;
    expect_eq(
        "clear and relevant",
        answer_count(&f, "answer_relevant", "yes")?,
        146,
    )?;
    let accurate = answer_count(&f, "answer_accuracy", "accurate")?
        + answer_count(&f, "answer_accuracy", "partially_accurate")?;
    expect_eq("clear-path (partly) accurate", accurate, 144)?;
    expect_eq(
        "explanation relevant",
        answer_count(&f, "explanation_relevant", "yes")?,
        116,
    )?;
    let passed = entry(&f, "explanation_accuracy")?["continued"]
        .as_u64()
        .unwrap_or(0);
    expect_eq("explanation (partly) accurate", passed, 113)?;
    expect_eq("good answers", f["good"].as_u64().unwrap_or(0), 191)?;
    Ok("clear 230/157, relevant 146, accurate 144, explanation 113 of 116, good 191".into())
}

fn association(dir: &Path) -> Outcome {
    let r = report(dir, "chi_square")?;
    let t = &r["table"];
    let cells: Vec<u64> = ["a", "b", "c", "d"]
        .iter()
        .map(|k| t[k].as_u64().unwrap_or(u64::MAX))
        .collect();
    expect_eq("cells", cells.as_slice(), &[132, 59, 115, 81])?;
    let statistic = r["test"]["statistic"].as_f64().ok_or("no statistic")?;
    let p = r["test"]["p_value"].as_f64().ok_or("no p-value")?;
    if (statistic - 4.56).abs() > 0.01 {
        return Err(format!("statistic {statistic} not within 0.01 of 4.56"));
    }
    if (p - 0.033).abs() > 0.002 {
        return Err(format!("p-value {p} not within 0.002 of 0.033"));
    }
    Ok(format!(
        "cells 132/59/115/81, chi-square {statistic:.4}, p {p:.4}"
    ))
}

fn time_savings(dir: &Path) -> Outcome {
    let r = report(dir, "time_savings")?;
    let input = r
        .as_array()
        .and_then(|sides| sides.iter().find(|s| s["target"] == "input"))
        .ok_or("no input side")?;
    let s = &input["report"];
    expect_eq(
        "hierarchical",
        s["hierarchical_judgments"].as_u64(),
        Some(2000),
    )?;
    expect_eq("flat", s["flat_judgments"].as_u64(), Some(2322))?;
    expect_eq("saved", s["saved"].as_u64(), Some(322))?;
    let fraction = s["saved_fraction"].as_f64().ok_or("no fraction")?;
    if (fraction - 322.0 / 2322.0).abs() > 1e-12 {
        return Err(format!("saved fraction {fraction}"));
    }
    Ok(format!(
        "2000 vs 2322, saved 322 ({:.1}%)",
        fraction * 100.0
    ))
}

// ---- statistics ----

fn random_rows(rng: &mut impl Rng, complete: bool, raters: Option<usize>) -> Rows {
    let items = rng.random_range(1..=12);
    let raters = raters.unwrap_or_else(|| rng.random_range(2..=5));
    let categories = rng.random_range(1..=4);
    (0..items)
        .map(|_| {
            (0..raters)
                .map(|_| {
                    (complete || !rng.random_bool(0.2))
                        .then(|| format!("c{}", rng.random_range(0..categories)))
                })
                .collect()
        })
        .collect()
}

fn matrix(rows: &Rows) -> RatingsMatrix {
    RatingsMatrix::from_rows(rows).expect("generated rows are valid")
}

/// Both sides defined and within `tol`, or both undefined.
fn agree(
    what: &str,
    got: Result<f64, StatsError>,
    want: Option<f64>,
    tol: f64,
    worst: &mut f64,
) -> Result<(), String> {
    match (got, want) {
        (Ok(g), Some(w)) => {
            let err = (g - w).abs();
            *worst = worst.max(err);
            if err > tol {
                return Err(format!("{what}: {g} vs oracle {w}"));
            }
        }
        (Err(_), None) => {}
        (got, want) => return Err(format!("{what}: library {got:?}, oracle {want:?}")),
    }
    Ok(())
}

fn statistics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    let mut worst_sf = 0.0f64;
    let mut worst_exact = 0.0f64;

    // the integrator itself, against the closed form for two degrees of freedom
    for x in [0.0, 0.5, 3.0, 12.0] {
        let err = (oracles::chi_square_sf(x, 2) - (-x / 2.0f64).exp()).abs();
        if err > 1e-12 {
            return Err(format!("integration oracle off by {err} at x = {x}"));
        }
    }
    for i in 0..ORACLE_INSTANCES {
        let dof = (i % 6) as u32 + 1;
        let x = rng.random_range(0.0..30.0);
        let got = stats::chi_square_sf(x, dof);
        let want = oracles::chi_square_sf(x, dof);
        worst_sf = worst_sf.max((got - want).abs());
        if (got - want).abs() > SF_TOL {
            return Err(format!("chi_square_sf({x}, {dof}) = {got}, oracle {want}"));
        }
    }

    let mut defined = [0usize; 5];
    let mut instance = 0;
    while defined.iter().any(|&d| d < ORACLE_INSTANCES) {
        instance += 1;
        if instance > 100 * ORACLE_INSTANCES {
            return Err(format!("too few defined instances: {defined:?}"));
        }
        let rows = random_rows(&mut rng, false, None);
        let m = matrix(&rows);
        let want = oracles::percentage_agreement(&rows);
        defined[0] += usize::from(want.is_some());
        agree(
            "percentage agreement",
            stats::percentage_agreement(&m),
            want,
            EXACT_TOL,
            &mut worst_exact,
        )?;
        let want = oracles::krippendorff_alpha(&rows);
        defined[1] += usize::from(want.is_some());
        agree(
            "krippendorff alpha",
            stats::krippendorff_alpha(&m),
            want,
            EXACT_TOL,
            &mut worst_exact,
        )?;

        let pair = random_rows(&mut rng, false, Some(2));
        let want = oracles::cohens_kappa(&pair);
        defined[2] += usize::from(want.is_some());
        agree(
            "cohen kappa",
            stats::cohens_kappa(&matrix(&pair)),
            want,
            EXACT_TOL,
            &mut worst_exact,
        )?;

        let full = random_rows(&mut rng, true, None);
        let want = oracles::fleiss_kappa(&full);
        defined[3] += usize::from(want.is_some());
        let got = matrix(&full)
            .fleiss_counts()
            .and_then(|(c, n)| stats::fleiss_kappa(&c, n));
        agree("fleiss kappa", got, want, EXACT_TOL, &mut worst_exact)?;

        let n = rng.random_range(0..=15);
        let x: Vec<i64> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let y: Vec<i64> = (0..n).map(|_| rng.random_range(0..4)).collect();
        let want = oracles::kendall_tau(&x, &y);
        defined[4] += usize::from(want.is_some());
        agree(
            "kendall tau",
            stats::kendall_tau(&x, &y),
            want,
            EXACT_TOL,
            &mut worst_exact,
        )?;
    }

    invariance(&mut rng)?;
    Ok(format!(
        "{ORACLE_INSTANCES}+ defined instances per coefficient ({instance} generated), \
         max error sf {worst_sf:.1e}, coefficients {worst_exact:.1e}; \
         {INVARIANCE_TRIALS} trials per invariance"
    ))
}

fn invariance(rng: &mut impl Rng) -> Result<(), String> {
    // renaming categories so that their sorted order changes must leave
    // every nominal coefficient unchanged
    let names = ["zeta", "alpha", "mu", "kappa"];
    for trial in 0..INVARIANCE_TRIALS {
        let rows = random_rows(rng, trial % 2 == 0, None);
        let mut perm = names;
        perm.shuffle(rng);
        let renamed: Rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|v| {
                        v.as_ref()
                            .map(|c| perm[c[1..].parse::<usize>().unwrap()].to_string())
                    })
                    .collect()
            })
            .collect();
        let (a, b) = (matrix(&rows), matrix(&renamed));
        let same = |what: &str, x: Result<f64, StatsError>, y: Result<f64, StatsError>| match (x, y)
        {
            (Ok(x), Ok(y)) if (x - y).abs() <= EXACT_TOL => Ok(()),
            (Err(_), Err(_)) => Ok(()),
            (x, y) => Err(format!("{what} changed under relabeling: {x:?} vs {y:?}")),
        };
        same(
            "percentage agreement",
            stats::percentage_agreement(&a),
            stats::percentage_agreement(&b),
        )?;
        same(
            "krippendorff alpha",
            stats::krippendorff_alpha(&a),
            stats::krippendorff_alpha(&b),
        )?;
        same(
            "fleiss kappa",
            a.fleiss_counts()
                .and_then(|(c, n)| stats::fleiss_kappa(&c, n)),
            b.fleiss_counts()
                .and_then(|(c, n)| stats::fleiss_kappa(&c, n)),
        )?;
        let (a2, b2) = (a.select_raters(&[0, 1]), b.select_raters(&[0, 1]));
        same(
            "cohen kappa",
            stats::cohens_kappa(&a2),
            stats::cohens_kappa(&b2),
        )?;
    }

    for _ in 0..INVARIANCE_TRIALS {
        let mut cell = || rng.random_range(0..60u64);
        let t = ContingencyTable::new(cell(), cell(), cell(), cell());
        for yates in [false, true] {
            match (
                stats::chi_square_2x2(&t, yates),
                stats::chi_square_2x2(&t.transpose(), yates),
            ) {
                (Ok(x), Ok(y))
                    if (x.statistic - y.statistic).abs() <= 1e-9 * x.statistic.max(1.0)
                        && (x.p_value - y.p_value).abs() <= 1e-12 => {}
                (Err(x), Err(y)) if x == y => {}
                (x, y) => {
                    return Err(format!(
                        "transposing {t:?} changed the test: {x:?} vs {y:?}"
                    ))
                }
            }
        }
    }

    for _ in 0..INVARIANCE_TRIALS {
        let dof = rng.random_range(1..=10);
        let x1 = rng.random_range(0.0..60.0);
        let x2 = x1 + rng.random_range(0.0..10.0);
        let (s1, s2) = (stats::chi_square_sf(x1, dof), stats::chi_square_sf(x2, dof));
        if !(0.0..=1.0).contains(&s1) || !(0.0..=1.0).contains(&s2) || s2 > s1 {
            return Err(format!(
                "sf not monotone in [0,1] at dof {dof}: sf({x1}) = {s1}, sf({x2}) = {s2}"
            ));
        }
    }
    Ok(())
}

// ---- engine ----

fn engine_properties() -> Outcome {
    let mut judgments = 0;
    for seed in 0..ENGINE_CAMPAIGNS {
        let mut engine = Engine::new(Arc::new(testkit::random_campaign(seed, ENGINE_MAX_ITEMS)));
        simulate(&mut engine, Policy::SeededRandom, seed)
            .map_err(|e| format!("campaign {seed}: simulation failed: {e}"))?;
        let len = engine.journal().len();
        judgments += len;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let prefixes: Vec<usize> = (0..3).map(|_| rng.random_range(0..=len)).collect();
        let partial = engine.as_of(prefixes[0] as u64);
        let fail = |e: String| format!("campaign {seed}: {e}");
        testkit::check_replay_prefixes(&engine, &prefixes).map_err(fail)?;
        for e in [&engine, &partial] {
            testkit::check_funnel_conservation(e).map_err(fail)?;
            testkit::check_early_termination(e).map_err(fail)?;
        }
        testkit::check_path_coverage(&engine).map_err(fail)?;
    }
    Ok(format!(
        "{ENGINE_CAMPAIGNS} campaigns of up to {ENGINE_MAX_ITEMS} items, {judgments} judgments"
    ))
}
