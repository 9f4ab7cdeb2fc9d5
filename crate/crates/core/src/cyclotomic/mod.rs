//! The exact coefficient rings: the extension tower K = Q_p(zeta_m',
//! zeta_{p^r}) on the p-adic side, and Q(zeta_m) with truncated q-series on
//! the classical oracle side.

pub mod exact;
pub(crate) mod polys;
pub mod series;
pub mod tower;

pub use exact::{CycField, ExactCyclotomic};
pub use series::{binomial, FormalQSeries};
pub use tower::{
    ext_defect, ext_working_floor, ExtElement, ExtValuation, ExtensionTower, RootOfUnity,
    TowerMetadata,
};
