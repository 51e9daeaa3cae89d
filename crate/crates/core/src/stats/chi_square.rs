use serde::{Deserialize, Serialize};

use super::special::chi_square_sf;
use super::StatsError;

/// 2x2 cross-count of output outcome (rows: good, bad) by input outcome
/// (columns: good, bad).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        Self { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn cells(&self) -> [[u64; 2]; 2] {
        [[self.a, self.b], [self.c, self.d]]
    }

    pub fn transpose(&self) -> Self {
        Self {
            a: self.a,
            b: self.c,
            c: self.b,
            d: self.d,
        }
    }

    pub fn row_totals(&self) -> [u64; 2] {
        [self.a + self.b, self.c + self.d]
    }

    pub fn column_totals(&self) -> [u64; 2] {
        [self.a + self.c, self.b + self.d]
    }
}

impl std::str::FromStr for ContingencyTable {
    type Err = String;

    /// Parses `a,b,c,d`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let cells: Vec<u64> = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u64>()
                    .map_err(|e| format!("bad cell '{}': {e}", p.trim()))
            })
            .collect::<Result<_, _>>()?;
        match cells[..] {
            [a, b, c, d] => Ok(Self { a, b, c, d }),
            _ => Err(format!(
                "expected 4 comma-separated cells, got {}",
                cells.len()
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub dof: u32,
    pub expected: [[f64; 2]; 2],
    pub yates_correction: bool,
    /// Set when any expected count is below 5.
    pub low_expected_warning: bool,
}

/// Pearson chi-square test of independence on a 2x2 table, optionally with
/// Yates' continuity correction.
pub fn chi_square_2x2(
    table: &ContingencyTable,
    yates_correction: bool,
) -> Result<TestResult, StatsError> {
    let n = table.n();
    if n == 0 {
        return Err(StatsError::EmptyTable);
    }
    let rows = table.row_totals();
    let cols = table.column_totals();
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::ZeroMarginal);
    }
    let n = n as f64;
    let observed = table.cells();
    let mut expected = [[0.0; 2]; 2];
    let mut statistic = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let e = rows[i] as f64 * cols[j] as f64 / n;
            expected[i][j] = e;
            let mut diff = (observed[i][j] as f64 - e).abs();
            if yates_correction {
                diff = (diff - 0.5).max(0.0);
            }
            statistic += diff * diff / e;
        }
    }
    let low_expected_warning = expected.iter().flatten().any(|&e| e < 5.0);
    Ok(TestResult {
        statistic,
        p_value: chi_square_sf(statistic, 1),
        dof: 1,
        expected,
        yates_correction,
        low_expected_warning,
    })
}
