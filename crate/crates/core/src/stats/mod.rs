//! Factorial comparison of experiment grids.

pub mod anova;
pub mod ptukey;
pub mod tukey;

pub use anova::{anova2, f_upper_tail, AnovaTable, Effect, ResultRow, ResultsTable};
pub use ptukey::{studentized_range_cdf, studentized_range_quantile};
pub use tukey::{tukey_hsd, tukey_hsd_with, ErrorTerm, PairComparison, TukeyGrouping, TukeyLevel};
