//! Recommendation/return panel construction and the three-subsample study.
//!
//! Data flow: CSV ingestion ([`io`]) → filters and matching ([`panel`]) →
//! copula estimation per subsample ([`study`]). [`fixture`] writes synthetic
//! inputs with planted dependence for end-to-end checks.

pub mod fixture;
pub mod io;
pub mod panel;
pub mod returns;
pub mod study;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, KeyValues};
use crate::copula::ReflectedTerm;
use crate::estimator::EstimatorError;
use crate::volatility::{VolatilityError, DEFAULT_ARCH_LAGS, MIN_SERIES_LEN};

pub use fixture::{make_fixture, Fixture, FixtureConfig, TruthManifest};
pub use panel::{build_panel, ChangeClass, MatchedObservation, MatchedPanel, Provenance, Subsample};
pub use returns::{compute_excess_return, reverse_scale};
pub use study::run_study;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("mean recommendation {0} is outside the 1-5 scale")]
    ScaleOutOfRange(f64),
    #[error("record {security_id} {vintage_date}: {reason}")]
    InvalidRecord {
        security_id: String,
        vintage_date: NaiveDate,
        reason: String,
    },
    #[error("price series {0}: {1}")]
    InvalidSeries(String, String),
    #[error("window not covered: {0}")]
    Coverage(String),
    #[error("no observations survived the filters: {0:?}")]
    EmptyPanel(Box<Provenance>),
    #[error("subsample {label}: {source}")]
    Estimation {
        label: String,
        #[source]
        source: EstimatorError,
    },
    #[error("infeasible fixture configuration: {0}")]
    InfeasibleFixture(String),
    #[error(transparent)]
    Volatility(#[from] VolatilityError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One monthly consensus on the original scale (1 = strong buy, 5 = strong sell).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsensusRecord {
    pub security_id: String,
    pub vintage_date: NaiveDate,
    pub mean_rec: f64,
    pub num_analysts: u32,
}

impl ConsensusRecord {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |reason: &str| PipelineError::InvalidRecord {
            security_id: self.security_id.clone(),
            vintage_date: self.vintage_date,
            reason: reason.to_string(),
        };
        if !(1.0..=5.0).contains(&self.mean_rec) {
            return Err(bad("mean_rec must lie in [1, 5]"));
        }
        if self.num_analysts < 1 {
            return Err(bad("num_analysts must be at least 1"));
        }
        Ok(())
    }
}

/// Daily closes (or index levels) in strictly increasing date order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PriceSeries {
    dates: Vec<NaiveDate>,
    closes: Vec<f64>,
}

impl PriceSeries {
    /// Sorts by date; rejects duplicate dates and non-positive or
    /// non-finite values.
    pub fn new(name: &str, mut points: Vec<(NaiveDate, f64)>) -> Result<Self, PipelineError> {
        points.sort_by_key(|p| p.0);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(PipelineError::InvalidSeries(
                name.to_string(),
                format!("duplicate date {}", w[0].0),
            ));
        }
        if let Some(p) = points.iter().find(|p| !(p.1 > 0.0 && p.1.is_finite())) {
            return Err(PipelineError::InvalidSeries(
                name.to_string(),
                format!("non-positive close {} on {}", p.1, p.0),
            ));
        }
        let (dates, closes) = points.into_iter().unzip();
        Ok(Self { dates, closes })
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn closes(&self) -> &[f64] {
        &self.closes
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn close_on(&self, date: NaiveDate) -> Option<f64> {
        self.dates
            .binary_search(&date)
            .ok()
            .map(|i| self.closes[i])
    }

    /// Simple daily returns `c_t / c_{t-1} - 1`.
    pub fn daily_returns(&self) -> Vec<f64> {
        self.closes.windows(2).map(|w| w[1] / w[0] - 1.0).collect()
    }
}

/// Security prices keyed by id, plus the benchmark index.
#[derive(Debug, Clone, Default)]
pub struct MarketData {
    pub prices: BTreeMap<String, PriceSeries>,
    pub benchmark: PriceSeries,
}

/// Which six-month quantity is paired with the consensus score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReturnMode {
    /// Cumulative simple excess return over the benchmark.
    #[default]
    RawExcess,
    /// Sum of the security's GARCH-standardized daily residuals over the window.
    FilteredExcess,
}

impl std::str::FromStr for ReturnMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "raw_excess" => Ok(Self::RawExcess),
            "filtered_excess" => Ok(Self::FilteredExcess),
            other => Err(format!("expected raw_excess or filtered_excess, got {other}")),
        }
    }
}

fn parse_mode(s: &str) -> Result<ReflectedTerm, String> {
    match s {
        "swapped" => Ok(ReflectedTerm::Swapped),
        "unswapped" => Ok(ReflectedTerm::Unswapped),
        other => Err(format!("expected swapped or unswapped, got {other}")),
    }
}

/// Every tunable of panel construction and estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub min_analysts: u32,
    pub arch_lags: usize,
    /// Significance level of the ARCH screens.
    pub significance: f64,
    pub iid_screen: bool,
    pub min_history: usize,
    pub horizon_months: u32,
    pub min_window_days: usize,
    pub return_mode: ReturnMode,
    /// Records dated before this serve only as prior vintages.
    pub study_start: Option<NaiveDate>,
    /// Consensus changes smaller than this count as unchanged.
    pub change_epsilon: f64,
    pub bootstrap_reps: usize,
    pub seed: u64,
    pub copula: ReflectedTerm,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            min_analysts: 30,
            arch_lags: DEFAULT_ARCH_LAGS,
            significance: 0.05,
            iid_screen: true,
            min_history: MIN_SERIES_LEN,
            horizon_months: 6,
            min_window_days: 100,
            return_mode: ReturnMode::RawExcess,
            study_start: None,
            change_epsilon: 1e-9,
            bootstrap_reps: 0,
            seed: 0,
            copula: ReflectedTerm::Swapped,
        }
    }
}

impl PipelineConfig {
    pub const KEYS: &'static [&'static str] = &[
        "min_analysts",
        "arch_lags",
        "significance",
        "iid_screen",
        "min_history",
        "horizon_months",
        "min_window_days",
        "return_mode",
        "study_start",
        "change_epsilon",
        "bootstrap_reps",
        "seed",
        "copula",
    ];

    pub fn from_kv(kv: &KeyValues) -> Result<Self, ConfigError> {
        kv.reject_unknown(Self::KEYS)?;
        let d = Self::default();
        let study_start = match kv.raw("study_start") {
            None | Some("") => None,
            Some(_) => Some(kv.get_or("study_start", NaiveDate::MIN)?),
        };
        let copula = match kv.raw("copula") {
            None => d.copula,
            Some(s) => parse_mode(s).map_err(|reason| ConfigError::Value {
                key: "copula".into(),
                value: s.into(),
                reason,
            })?,
        };
        Ok(Self {
            min_analysts: kv.get_or("min_analysts", d.min_analysts)?,
            arch_lags: kv.get_or("arch_lags", d.arch_lags)?,
            significance: kv.get_or("significance", d.significance)?,
            iid_screen: kv.get_or("iid_screen", d.iid_screen)?,
            min_history: kv.get_or("min_history", d.min_history)?,
            horizon_months: kv.get_or("horizon_months", d.horizon_months)?,
            min_window_days: kv.get_or("min_window_days", d.min_window_days)?,
            return_mode: kv.get_or("return_mode", d.return_mode)?,
            study_start,
            change_epsilon: kv.get_or("change_epsilon", d.change_epsilon)?,
            bootstrap_reps: kv.get_or("bootstrap_reps", d.bootstrap_reps)?,
            seed: kv.get_or("seed", d.seed)?,
            copula,
        })
    }

    pub fn to_kv(&self) -> KeyValues {
        let mut kv = KeyValues::default();
        kv.set("min_analysts", self.min_analysts);
        kv.set("arch_lags", self.arch_lags);
        kv.set("significance", self.significance);
        kv.set("iid_screen", self.iid_screen);
        kv.set("min_history", self.min_history);
        kv.set("horizon_months", self.horizon_months);
        kv.set("min_window_days", self.min_window_days);
        kv.set(
            "return_mode",
            match self.return_mode {
                ReturnMode::RawExcess => "raw_excess",
                ReturnMode::FilteredExcess => "filtered_excess",
            },
        );
        if let Some(d) = self.study_start {
            kv.set("study_start", d);
        }
        kv.set("change_epsilon", self.change_epsilon);
        kv.set("bootstrap_reps", self.bootstrap_reps);
        kv.set("seed", self.seed);
        kv.set(
            "copula",
            match self.copula {
                ReflectedTerm::Swapped => "swapped",
                ReflectedTerm::Unswapped => "unswapped",
            },
        );
        kv
    }
}
