//! Inter-annotator agreement coefficients.
//!
//! Degenerate inputs (no variability, so chance agreement is certain) are
//! reported as [`StatsError::Undefined`] instead of dividing by zero. The
//! one exception is Cohen's κ, which is 1 when both raters use one and the
//! same category throughout.

use std::collections::BTreeSet;
use std::io::Read;

use serde::Serialize;

use super::StatsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    Nominal,
    /// Categories are listed in level order, lowest first.
    Ordinal,
}

/// Item × rater table of categorical ratings; cells may be missing.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingsMatrix {
    items: Vec<String>,
    raters: Vec<String>,
    categories: Vec<String>,
    scale: Scale,
    values: Vec<Vec<Option<usize>>>,
}

impl RatingsMatrix {
    pub fn new(
        items: Vec<String>,
        raters: Vec<String>,
        categories: Vec<String>,
        scale: Scale,
    ) -> Result<Self, StatsError> {
        let mut seen = BTreeSet::new();
        for c in &categories {
            if c.is_empty() || !seen.insert(c) {
                return Err(StatsError::Parse(format!(
                    "category '{c}' is empty or repeated"
                )));
            }
        }
        let values = vec![vec![None; raters.len()]; items.len()];
        Ok(Self {
            items,
            raters,
            categories,
            scale,
            values,
        })
    }

    /// Builds a nominal matrix from rows of cells (one row per item, one
    /// column per rater). Categories are the distinct values in sorted order.
    pub fn from_rows<S: AsRef<str>>(rows: &[Vec<Option<S>>]) -> Result<Self, StatsError> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != width) {
            return Err(StatsError::Parse("rows have different lengths".into()));
        }
        let categories: BTreeSet<String> = rows
            .iter()
            .flatten()
            .flatten()
            .map(|s| s.as_ref().to_string())
            .collect();
        let mut m = Self::new(
            (0..rows.len()).map(|i| format!("item{i}")).collect(),
            (0..width).map(|j| format!("rater{j}")).collect(),
            categories.into_iter().collect(),
            Scale::Nominal,
        )?;
        for (i, row) in rows.iter().enumerate() {
            for (j, cell) in row.iter().enumerate() {
                if let Some(v) = cell {
                    m.set_index(i, j, v.as_ref())?;
                }
            }
        }
        Ok(m)
    }

    /// Reads a delimited table: a header `item,<rater>,<rater>,...` followed
    /// by one row per item. Cells equal to `missing` are absent ratings.
    /// When `levels` is given the scale is ordinal with that order and every
    /// value must be one of the levels.
    pub fn from_delimited<R: Read>(
        reader: R,
        delimiter: u8,
        missing: &str,
        levels: Option<Vec<String>>,
    ) -> Result<Self, StatsError> {
        let mut rdr = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| StatsError::Parse(e.to_string()))?
            .clone();
        if header.len() < 2 {
            return Err(StatsError::Parse(
                "header needs an item column and at least one rater".into(),
            ));
        }
        let raters: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut items = Vec::new();
        let mut cells: Vec<Vec<Option<String>>> = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| StatsError::Parse(format!("row {}: {e}", line + 2)))?;
            items.push(rec.get(0).unwrap_or_default().to_string());
            cells.push(
                rec.iter()
                    .skip(1)
                    .map(|v| (v != missing && !v.is_empty()).then(|| v.to_string()))
                    .collect(),
            );
        }
        let (categories, scale) = match levels {
            Some(levels) => (levels, Scale::Ordinal),
            None => {
                let set: BTreeSet<String> = cells.iter().flatten().flatten().cloned().collect();
                (set.into_iter().collect(), Scale::Nominal)
            }
        };
        let mut m = Self::new(items, raters, categories, scale)?;
        for (i, row) in cells.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if let Some(v) = v {
                    m.set_index(i, j, v)?;
                }
            }
        }
        Ok(m)
    }

    pub fn set(&mut self, item: &str, rater: &str, value: &str) -> Result<(), StatsError> {
        let i = self
            .items
            .iter()
            .position(|x| x == item)
            .ok_or_else(|| StatsError::Unknown(item.into()))?;
        let j = self
            .raters
            .iter()
            .position(|x| x == rater)
            .ok_or_else(|| StatsError::Unknown(rater.into()))?;
        self.set_index(i, j, value)
    }

    fn set_index(&mut self, i: usize, j: usize, value: &str) -> Result<(), StatsError> {
        let c = self
            .categories
            .iter()
            .position(|c| c == value)
            .ok_or_else(|| StatsError::UnknownCategory(value.to_string()))?;
        self.values[i][j] = Some(c);
        Ok(())
    }

    pub fn get(&self, item: usize, rater: usize) -> Option<&str> {
        self.values[item][rater].map(|c| self.categories[c].as_str())
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn raters(&self) -> &[String] {
        &self.raters
    }

    pub fn categories(&self) -> &[String] {
        &self.categories
    }

    pub fn scale(&self) -> Scale {
        self.scale
    }

    /// Copy keeping only the given rater columns, in the given order.
    pub fn select_raters(&self, raters: &[usize]) -> Self {
        Self {
            items: self.items.clone(),
            raters: raters.iter().map(|&j| self.raters[j].clone()).collect(),
            categories: self.categories.clone(),
            scale: self.scale,
            values: self
                .values
                .iter()
                .map(|row| raters.iter().map(|&j| row[j]).collect())
                .collect(),
        }
    }

    /// Copy with every category renamed through `f` (used for relabeling
    /// invariance checks).
    pub fn relabeled(&self, f: impl Fn(&str) -> String) -> Self {
        Self {
            categories: self.categories.iter().map(|c| f(c)).collect(),
            ..self.clone()
        }
    }

    /// Per-item category counts over present ratings.
    fn unit_counts(&self) -> Vec<Vec<u64>> {
        self.values
            .iter()
            .map(|row| {
                let mut counts = vec![0u64; self.categories.len()];
                for c in row.iter().flatten() {
                    counts[*c] += 1;
                }
                counts
            })
            .collect()
    }

    /// Item × category counts for Fleiss' κ. Every item must carry the same
    /// number of ratings.
    pub fn fleiss_counts(&self) -> Result<(Vec<Vec<u64>>, u64), StatsError> {
        let counts = self.unit_counts();
        let per_item = counts.first().map_or(0, |r| r.iter().sum());
        fleiss_check(&counts, per_item)?;
        Ok((counts, per_item))
    }
}

/// Fraction of agreeing rater pairs among all pairs that rated the same item.
pub fn percentage_agreement(ratings: &RatingsMatrix) -> Result<f64, StatsError> {
    if ratings.raters.len() < 2 {
        return Err(StatsError::TooFewRaters {
            needed: 2,
            found: ratings.raters.len(),
        });
    }
    let (mut agree, mut pairs) = (0u64, 0u64);
    for counts in ratings.unit_counts() {
        let m: u64 = counts.iter().sum();
        if m < 2 {
            continue;
        }
        pairs += m * (m - 1) / 2;
        agree += counts
            .iter()
            .map(|&c| c * c.saturating_sub(1) / 2)
            .sum::<u64>();
    }
    if pairs == 0 {
        return Err(StatsError::NoCoRatedItems);
    }
    Ok(agree as f64 / pairs as f64)
}

/// Cohen's κ for exactly two raters over the items both rated.
pub fn cohens_kappa(ratings: &RatingsMatrix) -> Result<f64, StatsError> {
    if ratings.raters.len() != 2 {
        return Err(StatsError::WrongRaterCount {
            expected: 2,
            found: ratings.raters.len(),
        });
    }
    let k = ratings.categories.len();
    let mut confusion = vec![vec![0u64; k]; k];
    let mut n = 0u64;
    for row in &ratings.values {
        if let (Some(x), Some(y)) = (row[0], row[1]) {
            confusion[x][y] += 1;
            n += 1;
        }
    }
    if n == 0 {
        return Err(StatsError::NoCoRatedItems);
    }
    let observed: u64 = (0..k).map(|c| confusion[c][c]).sum();
    let row_tot: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let col_tot: Vec<u64> = (0..k)
        .map(|c| confusion.iter().map(|r| r[c]).sum())
        .collect();
    let chance: u64 = row_tot.iter().zip(&col_tot).map(|(a, b)| a * b).sum();
    if chance == n * n {
        // both raters used a single, shared category
        return Ok(1.0);
    }
    let n = n as f64;
    let p_o = observed as f64 / n;
    let p_e = chance as f64 / (n * n);
    Ok((p_o - p_e) / (1.0 - p_e))
}

fn fleiss_check(counts: &[Vec<u64>], raters_per_item: u64) -> Result<(), StatsError> {
    if counts.is_empty() {
        return Err(StatsError::NoCoRatedItems);
    }
    if raters_per_item < 2 {
        return Err(StatsError::TooFewRaters {
            needed: 2,
            found: raters_per_item as usize,
        });
    }
    let width = counts[0].len();
    for (row, r) in counts.iter().enumerate() {
        let sum: u64 = r.iter().sum();
        if r.len() != width || sum != raters_per_item {
            return Err(StatsError::InconsistentRow {
                row,
                sum,
                expected: raters_per_item,
            });
        }
    }
    Ok(())
}

/// Fleiss' κ from an item × category count matrix where every row sums to
/// `raters_per_item`.
pub fn fleiss_kappa(counts: &[Vec<u64>], raters_per_item: u64) -> Result<f64, StatsError> {
    fleiss_check(counts, raters_per_item)?;
    let n = raters_per_item;
    let items = counts.len() as u64;
    let mut totals = vec![0u64; counts[0].len()];
    let mut p_bar = 0.0;
    for row in counts {
        let sq: u64 = row.iter().map(|c| c * c).sum();
        p_bar += (sq - n) as f64 / (n * (n - 1)) as f64;
        for (t, c) in totals.iter_mut().zip(row) {
            *t += c;
        }
    }
    p_bar /= items as f64;
    let all = items * n;
    if totals.iter().map(|t| t * t).sum::<u64>() == all * all {
        return Err(StatsError::Undefined("all ratings fall in one category"));
    }
    let p_e: f64 = totals
        .iter()
        .map(|&t| (t as f64 / all as f64).powi(2))
        .sum();
    Ok((p_bar - p_e) / (1.0 - p_e))
}

/// Krippendorff's α with the nominal metric, from the coincidence matrix of
/// all pairable values. Items with fewer than two ratings are ignored.
pub fn krippendorff_alpha(ratings: &RatingsMatrix) -> Result<f64, StatsError> {
    let k = ratings.categories.len();
    let mut coincidence = vec![vec![0.0f64; k]; k];
    let mut any = false;
    for counts in ratings.unit_counts() {
        let m: u64 = counts.iter().sum();
        if m < 2 {
            continue;
        }
        any = true;
        let w = 1.0 / (m - 1) as f64;
        for c in 0..k {
            for d in 0..k {
                let pairs = if c == d {
                    counts[c] * counts[c].saturating_sub(1)
                } else {
                    counts[c] * counts[d]
                };
                coincidence[c][d] += pairs as f64 * w;
            }
        }
    }
    if !any {
        return Err(StatsError::NoPairableUnits);
    }
    let marginals: Vec<f64> = coincidence.iter().map(|r| r.iter().sum()).collect();
    let n: f64 = marginals.iter().sum();
    let mut disagree_obs = 0.0;
    let mut disagree_exp = 0.0;
    for c in 0..k {
        for d in 0..k {
            if c != d {
                disagree_obs += coincidence[c][d];
                disagree_exp += marginals[c] * marginals[d];
            }
        }
    }
    if disagree_exp == 0.0 {
        return Err(StatsError::Undefined("no variability in pairable values"));
    }
    Ok(1.0 - (n - 1.0) * disagree_obs / disagree_exp)
}

/// Kendall's τ-b, tie-corrected, in O(n log n) (Knight's algorithm).
pub fn kendall_tau<T: Ord>(x: &[T], y: &[T]) -> Result<f64, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let n = x.len();
    if n < 2 {
        return Err(StatsError::TooShort {
            needed: 2,
            found: n,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].cmp(&x[j]).then_with(|| y[i].cmp(&y[j])));

    let tie_pairs = |len: u64| len * (len - 1) / 2;
    let (mut x_ties, mut joint_ties) = (0u64, 0u64);
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && x[order[end]] == x[order[start]] {
            end += 1;
        }
        x_ties += tie_pairs((end - start) as u64);
        let mut s = start;
        while s < end {
            let mut e = s + 1;
            while e < end && y[order[e]] == y[order[s]] {
                e += 1;
            }
            joint_ties += tie_pairs((e - s) as u64);
            s = e;
        }
        start = end;
    }

    let mut ys: Vec<&T> = order.iter().map(|&i| &y[i]).collect();
    let swaps = count_inversions(&mut ys);

    let mut y_ties = 0u64;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && ys[end] == ys[start] {
            end += 1;
        }
        y_ties += tie_pairs((end - start) as u64);
        start = end;
    }

    let total = tie_pairs(n as u64);
    let numerator =
        total as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * swaps as i64;
    let denominator = ((total - x_ties) as f64 * (total - y_ties) as f64).sqrt();
    if denominator == 0.0 {
        return Err(StatsError::Undefined("a sequence is entirely tied"));
    }
    Ok((numerator as f64 / denominator).clamp(-1.0, 1.0))
}

/// Kendall's τ-b between two raters of an ordinal matrix, over co-rated items.
pub fn kendall_tau_raters(
    ratings: &RatingsMatrix,
    first: usize,
    second: usize,
) -> Result<f64, StatsError> {
    let (x, y): (Vec<usize>, Vec<usize>) = ratings
        .values
        .iter()
        .filter_map(|row| Some((row[first]?, row[second]?)))
        .unzip();
    kendall_tau(&x, &y)
}

// Merge sort that counts pairs i < j with v[i] > v[j]; leaves `v` sorted.
fn count_inversions<T: Ord>(v: &mut [&T]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut count = count_inversions(&mut v[..mid]) + count_inversions(&mut v[mid..]);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            merged.push(v[j]);
            count += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(v[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&v[i..mid]);
    merged.extend_from_slice(&v[j..]);
    v.copy_from_slice(&merged);
    count
}
