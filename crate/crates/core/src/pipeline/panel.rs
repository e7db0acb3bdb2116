//! Filters, matching and subsample construction.

use std::collections::{BTreeMap, HashMap};

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::returns::{compute_excess_return, locate_window, reverse_scale, Window};
use super::{ConsensusRecord, MarketData, PipelineConfig, PipelineError, PriceSeries, ReturnMode};
use crate::volatility::{garch11_fit, iid_screen, GarchFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Subsample {
    #[serde(rename = "full")]
    Full,
    #[serde(rename = "A_downgrade")]
    ADowngrade,
    #[serde(rename = "B_upgrade")]
    BUpgrade,
}

impl Subsample {
    pub fn label(self) -> &'static str {
        match self {
            Self::Full => "full",
            Self::ADowngrade => "A_downgrade",
            Self::BUpgrade => "B_upgrade",
        }
    }
}

/// Direction of the consensus move against the prior monthly vintage, on
/// the reversed scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChangeClass {
    Downgrade,
    Upgrade,
    Unchanged,
    /// No record for the preceding calendar month.
    NoPrior,
}

impl ChangeClass {
    pub fn of(delta_prev: Option<f64>, epsilon: f64) -> Self {
        match delta_prev {
            None => Self::NoPrior,
            Some(d) if d < -epsilon => Self::Downgrade,
            Some(d) if d > epsilon => Self::Upgrade,
            Some(_) => Self::Unchanged,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedObservation {
    pub security_id: String,
    pub vintage_date: NaiveDate,
    pub score_reversed: f64,
    pub excess_return_6m: f64,
    pub delta_prev: Option<f64>,
    pub passed_iid_screen: bool,
}

/// Record counts per stage. Every input record lands in exactly one of
/// `prior_only`, a `dropped_*` bucket or `retained`; every retained record
/// in exactly one change class.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub records_in: usize,
    /// Dated before the study start; used only as prior vintages.
    pub prior_only: usize,
    pub dropped_analysts: usize,
    pub dropped_no_prices: usize,
    pub dropped_short_history: usize,
    pub dropped_screen: usize,
    pub dropped_coverage: usize,
    pub retained: usize,
    pub downgrades: usize,
    pub upgrades: usize,
    pub unchanged: usize,
    pub no_prior: usize,
}

impl Provenance {
    pub fn dropped(&self) -> usize {
        self.dropped_analysts
            + self.dropped_no_prices
            + self.dropped_short_history
            + self.dropped_screen
            + self.dropped_coverage
    }

    /// Both partition identities.
    pub fn balanced(&self) -> bool {
        self.records_in == self.prior_only + self.dropped() + self.retained
            && self.retained == self.downgrades + self.upgrades + self.unchanged + self.no_prior
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchedPanel {
    pub subsample: Subsample,
    pub observations: Vec<MatchedObservation>,
    pub provenance: Provenance,
}

impl MatchedPanel {
    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn scores(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.score_reversed).collect()
    }

    pub fn excess_returns(&self) -> Vec<f64> {
        self.observations.iter().map(|o| o.excess_return_6m).collect()
    }
}

/// Splits records into those meeting the analyst threshold and the rest.
pub fn analyst_filter<T: Clone>(
    records: &[T],
    count: impl Fn(&T) -> u32,
    min_analysts: u32,
) -> (Vec<T>, Vec<T>) {
    records.iter().cloned().partition(|r| count(r) >= min_analysts)
}

type MonthKey<'a> = (&'a str, i32, u32);

fn month_key(r: &ConsensusRecord) -> MonthKey<'_> {
    (r.security_id.as_str(), r.vintage_date.year(), r.vintage_date.month())
}

fn prior_month(d: NaiveDate) -> (i32, u32) {
    if d.month() == 1 {
        (d.year() - 1, 12)
    } else {
        (d.year(), d.month() - 1)
    }
}

enum Screened {
    NoPrices,
    ShortHistory,
    Failed,
    Passed { flagged: bool, fit: Option<GarchFit> },
}

fn screen_security(
    series: Option<&PriceSeries>,
    config: &PipelineConfig,
) -> Screened {
    let Some(series) = series else {
        return Screened::NoPrices;
    };
    let returns = series.daily_returns();
    if returns.len() < config.min_history {
        return Screened::ShortHistory;
    }
    let need_fit = config.return_mode == ReturnMode::FilteredExcess;
    if !config.iid_screen {
        return match need_fit.then(|| garch11_fit(&returns)) {
            Some(Err(_)) => Screened::Failed,
            Some(Ok(fit)) => Screened::Passed { flagged: false, fit: Some(fit) },
            None => Screened::Passed { flagged: false, fit: None },
        };
    }
    match iid_screen(&returns, config.arch_lags, config.significance) {
        Ok(out) if out.passed => {
            let fit = match (need_fit, out.fit) {
                (false, _) => None,
                (true, Some(f)) => Some(f),
                (true, None) => match garch11_fit(&returns) {
                    Ok(f) => Some(f),
                    Err(_) => return Screened::Failed,
                },
            };
            Screened::Passed { flagged: true, fit }
        }
        _ => Screened::Failed,
    }
}

/// Sum of standardized residuals on return days in `(start, end]`.
fn residual_sum(series: &PriceSeries, fit: &GarchFit, w: &Window) -> Result<f64, PipelineError> {
    let dates = series.dates();
    let i0 = dates.binary_search(&w.start);
    let i1 = dates.binary_search(&w.end);
    match (i0, i1) {
        (Ok(i0), Ok(i1)) => Ok(fit.residuals[i0..i1].iter().sum()),
        _ => Err(PipelineError::Coverage(format!(
            "no residuals for {}..{}",
            w.start, w.end
        ))),
    }
}

/// Builds the full panel and subsamples A and B, in that order.
///
/// Stages: study-start split, analyst threshold, i.i.d. screen per
/// security, scale reversal, excess return, change versus the prior
/// calendar-month vintage (looked up among all input records).
pub fn build_panel(
    recs: &[ConsensusRecord],
    market: &MarketData,
    config: &PipelineConfig,
) -> Result<Vec<MatchedPanel>, PipelineError> {
    let mut prov = Provenance {
        records_in: recs.len(),
        ..Default::default()
    };

    let mut by_month: HashMap<MonthKey<'_>, f64> = HashMap::with_capacity(recs.len());
    for r in recs {
        r.validate()?;
        if by_month.insert(month_key(r), r.mean_rec).is_some() {
            return Err(PipelineError::InvalidRecord {
                security_id: r.security_id.clone(),
                vintage_date: r.vintage_date,
                reason: "second record in the same calendar month".into(),
            });
        }
    }

    let (in_study, prior): (Vec<&ConsensusRecord>, Vec<&ConsensusRecord>) = recs
        .iter()
        .partition(|r| config.study_start.is_none_or(|s| r.vintage_date >= s));
    prov.prior_only = prior.len();

    let (stage1, dropped) = analyst_filter(&in_study, |r| r.num_analysts, config.min_analysts);
    prov.dropped_analysts = dropped.len();

    let ids: Vec<&str> = {
        let mut ids: Vec<&str> = stage1.iter().map(|r| r.security_id.as_str()).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    };
    let screened: BTreeMap<&str, Screened> = ids
        .par_iter()
        .map(|&id| (id, screen_security(market.prices.get(id), config)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect();

    let bench_fit = match config.return_mode {
        ReturnMode::FilteredExcess => Some(garch11_fit(&market.benchmark.daily_returns())?),
        ReturnMode::RawExcess => None,
    };

    let mut observations = Vec::new();
    for r in stage1 {
        let (flagged, fit) = match &screened[r.security_id.as_str()] {
            Screened::NoPrices => {
                prov.dropped_no_prices += 1;
                continue;
            }
            Screened::ShortHistory => {
                prov.dropped_short_history += 1;
                continue;
            }
            Screened::Failed => {
                prov.dropped_screen += 1;
                continue;
            }
            Screened::Passed { flagged, fit } => (*flagged, fit.as_ref()),
        };
        let series = &market.prices[&r.security_id];
        let score = reverse_scale(r.mean_rec)?;
        let excess = compute_excess_return(
            series,
            &market.benchmark,
            r.vintage_date,
            config.horizon_months,
            config.min_window_days,
        )
        .and_then(|(w, raw)| match (fit, &bench_fit) {
            (Some(f), Some(bf)) => {
                locate_window(&market.benchmark, r.vintage_date, config.horizon_months, 1)?;
                Ok(residual_sum(series, f, &w)? - residual_sum(&market.benchmark, bf, &w)?)
            }
            _ => Ok(raw),
        });
        let Ok(excess) = excess else {
            prov.dropped_coverage += 1;
            continue;
        };
        let (py, pm) = prior_month(r.vintage_date);
        let delta_prev = by_month
            .get(&(r.security_id.as_str(), py, pm))
            .map(|&prev| score - reverse_scale(prev).expect("validated"));
        match ChangeClass::of(delta_prev, config.change_epsilon) {
            ChangeClass::Downgrade => prov.downgrades += 1,
            ChangeClass::Upgrade => prov.upgrades += 1,
            ChangeClass::Unchanged => prov.unchanged += 1,
            ChangeClass::NoPrior => prov.no_prior += 1,
        }
        observations.push(MatchedObservation {
            security_id: r.security_id.clone(),
            vintage_date: r.vintage_date,
            score_reversed: score,
            excess_return_6m: excess,
            delta_prev,
            passed_iid_screen: flagged,
        });
    }
    prov.retained = observations.len();
    debug_assert!(prov.balanced());
    if observations.is_empty() {
        return Err(PipelineError::EmptyPanel(Box::new(prov)));
    }
    observations.sort_by(|a, b| {
        (a.vintage_date, &a.security_id).cmp(&(b.vintage_date, &b.security_id))
    });

    let pick = |class: ChangeClass| -> Vec<MatchedObservation> {
        observations
            .iter()
            .filter(|o| ChangeClass::of(o.delta_prev, config.change_epsilon) == class)
            .cloned()
            .collect()
    };
    let a = pick(ChangeClass::Downgrade);
    let b = pick(ChangeClass::Upgrade);
    Ok(vec![
        MatchedPanel {
            subsample: Subsample::Full,
            observations,
            provenance: prov.clone(),
        },
        MatchedPanel {
            subsample: Subsample::ADowngrade,
            observations: a,
            provenance: prov.clone(),
        },
        MatchedPanel {
            subsample: Subsample::BUpgrade,
            observations: b,
            provenance: prov,
        },
    ])
}
