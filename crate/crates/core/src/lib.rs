//! Copula-CoVaR risk-spillover toolkit.
//!
//! The crate implements the full estimation chain used to measure extreme
//! risk spillover between a futures return series and its spot counterpart:
//!
//! 1. [`timeseries`] — CSV ingestion, log returns, sample alignment and
//!    splitting, descriptive statistics and residual diagnostics.
//! 2. [`distributions`] — Hansen's skewed Student-t distribution and the
//!    standard Student-t CDF/quantile.
//! 3. [`marginal`] — ARMA(m,n)-GARCH(p,q) filtering with skew-t innovations,
//!    maximum-likelihood estimation, AIC lag-order search, and the empirical
//!    probability-integral transform.
//! 4. [`copula`] — six single copula families, two-component mixtures,
//!    tail-dependence coefficients, Kendall's tau, sampling, and AIC-based
//!    family selection.
//! 5. [`risk`] — per-date downside/upside VaR, copula-inverted CoVaR,
//!    median-state CoVaR, and delta-CoVaR for the spot leg.
//! 6. [`spillover`] — one-sided two-sample Kolmogorov-Smirnov tests with
//!    permutation-bootstrap p-values over the twelve hypothesis panels.
//!
//! All computations are pure functions of their inputs: fitted models and
//! series are immutable after construction and safe to share across threads.

pub mod copula;
pub mod distributions;
pub mod marginal;
mod numeric;
pub mod risk;
pub mod spillover;
pub mod timeseries;

pub use copula::{
    fit_mixed, fit_single, select_copula, CandidateSpec, CopulaError, CopulaFamily, CopulaFit,
    CopulaModel, CopulaSpec, MixedCopulaSpec, TailDependence,
};
pub use distributions::{DistError, SkewT, SkewTConstants, SkewTParams};
pub use marginal::{ArmaGarchOrders, MarginalError, MarginalFit, MarginalParams};
pub use risk::{Direction, RiskConfig, RiskError, RiskRecord, RiskSeries};
pub use spillover::{KsDirection, SpilloverError, SpilloverTest};
pub use timeseries::{AlignedPair, PeriodTag, PriceSeries, ReturnSeries, TsError};
