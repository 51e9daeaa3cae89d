//! Independent reference implementations for the statistics, written from
//! the textbook definitions with no shared code: pairs are enumerated
//! explicitly, and tail probabilities come from numerical integration of
//! the density.

use std::collections::HashMap;
use std::f64::consts::PI;

/// A ratings table as plain strings; `None` is a missing rating.
pub type Rows = Vec<Vec<Option<String>>>;

/// Γ(k/2) for a positive integer k, from factorials.
fn gamma_half(k: u32) -> f64 {
    let fact = |n: u32| (1..=n).map(f64::from).product::<f64>();
    if k.is_multiple_of(2) {
        fact(k / 2 - 1)
    } else {
        let n = (k - 1) / 2;
        fact(2 * n) * PI.sqrt() / (4f64.powi(n as i32) * fact(n))
    }
}

/// Upper tail of the chi-square distribution by composite Simpson's rule.
/// Substituting t = u² removes the t^(k/2 - 1) singularity at zero, so the
/// integrand 2 u^(k-1) e^(-u²/2) / (2^(k/2) Γ(k/2)) is smooth.
pub fn chi_square_sf(x: f64, dof: u32) -> f64 {
    let norm = 2f64.powf(f64::from(dof) / 2.0) * gamma_half(dof);
    let f = |u: f64| 2.0 * u.powi(dof as i32 - 1) * (-u * u / 2.0).exp() / norm;
    let lo = x.max(0.0).sqrt();
    // e^(-u²/2) is below 1e-50 sixteen units past any start worth testing
    let hi = lo + 16.0;
    let steps = 40_000;
    let h = (hi - lo) / steps as f64;
    let mut sum = f(lo) + f(hi);
    for i in 1..steps {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        sum += w * f(lo + i as f64 * h);
    }
    sum * h / 3.0
}

/// Share of agreeing pairs over every pair of raters that rated one item.
pub fn percentage_agreement(rows: &Rows) -> Option<f64> {
    let (mut agree, mut pairs) = (0u64, 0u64);
    for row in rows {
        for i in 0..row.len() {
            for j in i + 1..row.len() {
                if let (Some(a), Some(b)) = (&row[i], &row[j]) {
                    pairs += 1;
                    agree += u64::from(a == b);
                }
            }
        }
    }
    (pairs > 0).then(|| agree as f64 / pairs as f64)
}

/// Cohen's κ for the first two columns over co-rated items. Agreement is
/// taken as perfect when chance agreement is certain.
pub fn cohens_kappa(rows: &Rows) -> Option<f64> {
    let pairs: Vec<(&str, &str)> = rows
        .iter()
        .filter_map(|r| Some((r[0].as_deref()?, r[1].as_deref()?)))
        .collect();
    if pairs.is_empty() {
        return None;
    }
    let n = pairs.len() as f64;
    let p_o = pairs.iter().filter(|(a, b)| a == b).count() as f64 / n;
    let mut first: HashMap<&str, f64> = HashMap::new();
    let mut second: HashMap<&str, f64> = HashMap::new();
    for (a, b) in &pairs {
        *first.entry(a).or_default() += 1.0;
        *second.entry(b).or_default() += 1.0;
    }
    let p_e: f64 = first
        .iter()
        .map(|(c, x)| x * second.get(c).copied().unwrap_or(0.0))
        .sum::<f64>()
        / (n * n);
    if (1.0 - p_e).abs() < 1e-15 {
        return Some(1.0);
    }
    Some((p_o - p_e) / (1.0 - p_e))
}

/// Fleiss' κ on complete rows: P_i is the share of agreeing ordered rater
/// pairs within item i, p_j the share of all ratings in category j.
pub fn fleiss_kappa(rows: &Rows) -> Option<f64> {
    let m = rows.first()?.len();
    let mut p_bar = 0.0;
    let mut share: HashMap<&str, f64> = HashMap::new();
    for row in rows {
        let vals: Vec<&str> = row.iter().map(|v| v.as_deref()).collect::<Option<_>>()?;
        let mut agree = 0u64;
        for i in 0..m {
            for j in 0..m {
                if i != j && vals[i] == vals[j] {
                    agree += 1;
                }
            }
        }
        p_bar += agree as f64 / (m * (m - 1)) as f64;
        for v in vals {
            *share.entry(v).or_default() += 1.0;
        }
    }
    let total = (rows.len() * m) as f64;
    p_bar /= rows.len() as f64;
    let p_e: f64 = share.values().map(|s| (s / total).powi(2)).sum();
    if (1.0 - p_e).abs() < 1e-15 {
        return None;
    }
    Some((p_bar - p_e) / (1.0 - p_e))
}

/// Krippendorff's nominal α = 1 - D_o / D_e, enumerating every ordered
/// pair of pairable values within units (observed, each weighted by
/// 1/(m_u - 1)) and across the whole pool (expected).
pub fn krippendorff_alpha(rows: &Rows) -> Option<f64> {
    let units: Vec<Vec<&str>> = rows
        .iter()
        .map(|r| r.iter().flatten().map(String::as_str).collect::<Vec<_>>())
        .filter(|u| u.len() >= 2)
        .collect();
    let pool: Vec<&str> = units.iter().flatten().copied().collect();
    let n = pool.len() as f64;
    if pool.is_empty() {
        return None;
    }
    let mut d_o = 0.0;
    for u in &units {
        let mut mismatched = 0u64;
        for i in 0..u.len() {
            for j in 0..u.len() {
                if i != j && u[i] != u[j] {
                    mismatched += 1;
                }
            }
        }
        d_o += mismatched as f64 / (u.len() - 1) as f64;
    }
    d_o /= n;
    let mut mismatched = 0u64;
    for i in 0..pool.len() {
        for j in 0..pool.len() {
            if i != j && pool[i] != pool[j] {
                mismatched += 1;
            }
        }
    }
    let d_e = mismatched as f64 / (n * (n - 1.0));
    if d_e == 0.0 {
        return None;
    }
    Some(1.0 - d_o / d_e)
}

/// Kendall's τ-b by checking all n(n-1)/2 pairs.
pub fn kendall_tau(x: &[i64], y: &[i64]) -> Option<f64> {
    let n = x.len();
    let (mut concordant, mut discordant, mut tied_x, mut tied_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..n {
        for j in i + 1..n {
            let dx = (x[i] - x[j]).signum();
            let dy = (y[i] - y[j]).signum();
            if dx == 0 {
                tied_x += 1;
            }
            if dy == 0 {
                tied_y += 1;
            }
            match dx * dy {
                1 => concordant += 1,
                -1 => discordant += 1,
                _ => {}
            }
        }
    }
    let n0 = (n * n.saturating_sub(1) / 2) as i64;
    let denom = (((n0 - tied_x) * (n0 - tied_y)) as f64).sqrt();
    (denom > 0.0).then(|| (concordant - discordant) as f64 / denom)
}
