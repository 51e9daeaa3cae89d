//! Significance testing and agreement coefficients.

mod agreement;
mod chi_square;
mod special;

pub use agreement::{
    cohens_kappa, fleiss_kappa, kendall_tau, kendall_tau_raters, krippendorff_alpha,
    percentage_agreement, RatingsMatrix, Scale,
};
pub use chi_square::{chi_square_2x2, ContingencyTable, TestResult};
pub use special::{chi_square_sf, gamma_p, gamma_q, ln_gamma};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("contingency table is empty")]
    EmptyTable,
    #[error("contingency table has a zero row or column total")]
    ZeroMarginal,
    #[error("coefficient is undefined: {0}")]
    Undefined(&'static str),
    #[error("no item was rated by both raters")]
    NoCoRatedItems,
    #[error("no item carries two or more ratings")]
    NoPairableUnits,
    #[error("need at least {needed} raters, found {found}")]
    TooFewRaters { needed: usize, found: usize },
    #[error("expected exactly {expected} raters, found {found}")]
    WrongRaterCount { expected: usize, found: usize },
    #[error("row {row} sums to {sum}, expected {expected}")]
    InconsistentRow { row: usize, sum: u64, expected: u64 },
    #[error("sequences differ in length ({left} vs {right})")]
    LengthMismatch { left: usize, right: usize },
    #[error("need at least {needed} observations, found {found}")]
    TooShort { needed: usize, found: usize },
    #[error("unknown category '{0}'")]
    UnknownCategory(String),
    #[error("unknown item or rater '{0}'")]
    Unknown(String),
    #[error("{0}")]
    Parse(String),
}
