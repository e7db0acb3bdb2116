//! Synthetic inputs with planted score/return dependence.
//!
//! Every security carries a prior and a current monthly vintage. The
//! current records of each change class are coupled to their six-month
//! excess returns through pairs drawn from the SJC copula: the k-th
//! smallest score receives the pair with the k-th smallest `u`, and the
//! security's price path is drifted over the return window so that its
//! excess return equals `excess_sd * Phi^-1(rank(v) / (n + 1))`.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use chrono::{Datelike, Days, Months, NaiveDate, Weekday};
use rand::Rng;
use rand_distr::{Beta, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use super::io;
use super::panel::Provenance;
use super::returns::{locate_window, reverse_scale};
use super::{ConsensusRecord, PipelineConfig, PipelineError, PriceSeries};
use crate::config::KeyValues;
use crate::copula::{TailParams, UnitPair};
use crate::sampler::{sample_independent, sample_sjc};
use crate::seeds;
use crate::volatility::{garch11_simulate, iid_screen, GarchParams, DEFAULT_ARCH_LAGS, MIN_SERIES_LEN};

const MIN_ANALYSTS: u32 = 30;
const HORIZON_MONTHS: u32 = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub downgrades: usize,
    pub upgrades: usize,
    pub unchanged: usize,
    /// Securities below the analyst threshold; the first has exactly 29.
    pub low_coverage: usize,
    /// Number of consecutive current-vintage months.
    pub vintages: usize,
    pub first_vintage: NaiveDate,
    /// Planted (lambda_u, lambda_l); (0, 0) plants independence.
    pub plant_downgrade: (f64, f64),
    pub plant_upgrade: (f64, f64),
    pub plant_unchanged: (f64, f64),
    pub excess_sd: f64,
    /// Trading days of price history before the earliest prior vintage.
    pub history_days: usize,
    pub security_garch: GarchParams,
    pub benchmark_garch: GarchParams,
    pub arch_lags: usize,
    pub significance: f64,
    /// Price-path redraws allowed per security before giving up.
    pub max_attempts: usize,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            downgrades: 700,
            upgrades: 500,
            unchanged: 1300,
            low_coverage: 3,
            vintages: 1,
            first_vintage: NaiveDate::from_ymd_opt(2011, 1, 1).unwrap(),
            plant_downgrade: (0.158, 0.014),
            plant_upgrade: (0.0, 0.0),
            plant_unchanged: (0.0, 0.0),
            excess_sd: 0.15,
            history_days: 260,
            security_garch: GarchParams {
                mu: 3e-4,
                omega: 2e-5,
                alpha: 0.05,
                beta: 0.90,
            },
            benchmark_garch: GarchParams {
                mu: 2e-4,
                omega: 5e-6,
                alpha: 0.08,
                beta: 0.90,
            },
            arch_lags: DEFAULT_ARCH_LAGS,
            significance: 0.05,
            max_attempts: 50,
        }
    }
}

fn parse_pair(kv: &KeyValues, key: &str, d: (f64, f64)) -> Result<(f64, f64), PipelineError> {
    Ok((kv.get_or(&format!("{key}_u"), d.0)?, kv.get_or(&format!("{key}_l"), d.1)?))
}

fn parse_garch(kv: &KeyValues, key: &str, d: GarchParams) -> Result<GarchParams, PipelineError> {
    Ok(GarchParams {
        mu: kv.get_or(&format!("{key}_mu"), d.mu)?,
        omega: kv.get_or(&format!("{key}_omega"), d.omega)?,
        alpha: kv.get_or(&format!("{key}_alpha"), d.alpha)?,
        beta: kv.get_or(&format!("{key}_beta"), d.beta)?,
    })
}

impl FixtureConfig {
    pub const KEYS: &'static [&'static str] = &[
        "downgrades", "upgrades", "unchanged", "low_coverage", "vintages", "first_vintage",
        "plant_downgrade_u", "plant_downgrade_l", "plant_upgrade_u", "plant_upgrade_l",
        "plant_unchanged_u", "plant_unchanged_l", "excess_sd", "history_days",
        "security_mu", "security_omega", "security_alpha", "security_beta",
        "benchmark_mu", "benchmark_omega", "benchmark_alpha", "benchmark_beta",
        "arch_lags", "significance", "max_attempts",
    ];

    pub fn from_kv(kv: &KeyValues) -> Result<Self, PipelineError> {
        kv.reject_unknown(Self::KEYS)?;
        let d = Self::default();
        Ok(Self {
            downgrades: kv.get_or("downgrades", d.downgrades)?,
            upgrades: kv.get_or("upgrades", d.upgrades)?,
            unchanged: kv.get_or("unchanged", d.unchanged)?,
            low_coverage: kv.get_or("low_coverage", d.low_coverage)?,
            vintages: kv.get_or("vintages", d.vintages)?,
            first_vintage: kv.get_or("first_vintage", d.first_vintage)?,
            plant_downgrade: parse_pair(kv, "plant_downgrade", d.plant_downgrade)?,
            plant_upgrade: parse_pair(kv, "plant_upgrade", d.plant_upgrade)?,
            plant_unchanged: parse_pair(kv, "plant_unchanged", d.plant_unchanged)?,
            excess_sd: kv.get_or("excess_sd", d.excess_sd)?,
            history_days: kv.get_or("history_days", d.history_days)?,
            security_garch: parse_garch(kv, "security", d.security_garch)?,
            benchmark_garch: parse_garch(kv, "benchmark", d.benchmark_garch)?,
            arch_lags: kv.get_or("arch_lags", d.arch_lags)?,
            significance: kv.get_or("significance", d.significance)?,
            max_attempts: kv.get_or("max_attempts", d.max_attempts)?,
        })
    }

    fn check(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::InfeasibleFixture(m.to_string()));
        if self.downgrades + self.upgrades + self.unchanged == 0 {
            return bad("no securities above the analyst threshold");
        }
        if self.vintages == 0 {
            return bad("vintages must be at least 1");
        }
        for (name, (u, l)) in [
            ("downgrade", self.plant_downgrade),
            ("upgrade", self.plant_upgrade),
            ("unchanged", self.plant_unchanged),
        ] {
            if !((0.0..1.0).contains(&u) && (0.0..1.0).contains(&l)) {
                return Err(PipelineError::InfeasibleFixture(format!(
                    "plant_{name} must lie in [0, 1)"
                )));
            }
        }
        if !(self.excess_sd > 0.0 && self.excess_sd < 0.25) {
            return bad("excess_sd must lie in (0, 0.25)");
        }
        if self.history_days < MIN_SERIES_LEN + 1 {
            return bad("history_days too short for the i.i.d. screen");
        }
        if self.max_attempts == 0 {
            return bad("max_attempts must be at least 1");
        }
        self.security_garch.validate()?;
        self.benchmark_garch.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlantedClass {
    Downgrade,
    Upgrade,
    Unchanged,
}

/// One current-vintage observation and the copula pair it was given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedObservation {
    pub security_id: String,
    pub vintage_date: NaiveDate,
    pub class: PlantedClass,
    pub u: f64,
    pub v: f64,
    pub score_reversed: f64,
    pub excess_target: f64,
    pub attempts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthManifest {
    pub seed: u64,
    pub config: FixtureConfig,
    pub study_start: NaiveDate,
    /// Counts `build_panel` must reproduce under [`Fixture::pipeline_config`].
    pub expected: Provenance,
    pub planted: Vec<PlantedObservation>,
}

#[derive(Debug, Clone)]
pub struct Fixture {
    pub recommendations: Vec<ConsensusRecord>,
    pub prices: BTreeMap<String, PriceSeries>,
    pub benchmark: PriceSeries,
    pub truth: TruthManifest,
}

pub const RECOMMENDATIONS_FILE: &str = "recommendations.csv";
pub const PRICES_FILE: &str = "prices.csv";
pub const BENCHMARK_FILE: &str = "benchmark.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const CONFIG_FILE: &str = "pipeline.conf";

impl Fixture {
    /// Pipeline settings matching the generator's screen.
    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            min_analysts: MIN_ANALYSTS,
            arch_lags: self.truth.config.arch_lags,
            significance: self.truth.config.significance,
            iid_screen: true,
            horizon_months: HORIZON_MONTHS,
            study_start: Some(self.truth.study_start),
            seed: self.truth.seed,
            ..PipelineConfig::default()
        }
    }

    pub fn market(&self) -> super::MarketData {
        super::MarketData {
            prices: self.prices.clone(),
            benchmark: self.benchmark.clone(),
        }
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        let create = |name: &str| std::fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        io::write_recommendations(create(RECOMMENDATIONS_FILE)?, &self.recommendations)?;
        io::write_prices(create(PRICES_FILE)?, &self.prices)?;
        io::write_benchmark(create(BENCHMARK_FILE)?, &self.benchmark)?;
        serde_json::to_writer_pretty(create(TRUTH_FILE)?, &self.truth)?;
        std::fs::write(dir.join(CONFIG_FILE), self.pipeline_config().to_kv().to_text())?;
        Ok(())
    }
}

/// Third Thursday of the month containing `d`.
pub fn third_thursday(d: NaiveDate) -> NaiveDate {
    NaiveDate::from_weekday_of_month_opt(d.year(), d.month(), Weekday::Thu, 3).expect("always exists")
}

fn weekdays(from: NaiveDate, to: NaiveDate) -> Vec<NaiveDate> {
    from.iter_days()
        .take_while(|d| *d <= to)
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .collect()
}

fn prices_from_log_returns(calendar: &[NaiveDate], start: f64, r: &[f64]) -> PriceSeries {
    let mut p = start;
    let mut pts = Vec::with_capacity(calendar.len());
    pts.push((calendar[0], p));
    for (d, x) in calendar[1..].iter().zip(r) {
        p *= x.exp();
        pts.push((*d, p));
    }
    PriceSeries::new("fixture", pts).expect("positive, sorted")
}

struct Draft {
    id: String,
    class: PlantedClass,
    vintage: usize,
    analysts: u32,
    sum_current: u32,
    sum_prior: u32,
}

impl Draft {
    fn score(&self) -> f64 {
        6.0 - self.sum_current as f64 / self.analysts as f64
    }
}

/// Draws analyst counts and score sums; current consensus means are
/// distinct across the whole fixture so score ranks carry no ties.
fn draft_scores(cfg: &FixtureConfig, seed: u64) -> Result<Vec<Draft>, PipelineError> {
    let mut rng = seeds::rng(seed);
    let beta = Beta::new(2.0, 3.0).expect("valid");
    let mut used = HashSet::new();
    let classes = std::iter::repeat_n(PlantedClass::Downgrade, cfg.downgrades)
        .chain(std::iter::repeat_n(PlantedClass::Upgrade, cfg.upgrades))
        .chain(std::iter::repeat_n(PlantedClass::Unchanged, cfg.unchanged));
    let mut out = Vec::new();
    for (i, class) in classes.enumerate() {
        let mut tries = 0;
        let draft = loop {
            tries += 1;
            if tries > 10_000 {
                return Err(PipelineError::InfeasibleFixture(
                    "ran out of distinct consensus values".into(),
                ));
            }
            let n: u32 = rng.random_range(30..=60);
            let step: u32 = rng.random_range(1..=3);
            let mean = 1.0 + 4.0 * beta.sample(&mut rng);
            let s = ((mean * n as f64).round() as u32).clamp(n, 5 * n);
            let prior = match class {
                PlantedClass::Downgrade if s >= n + step => s - step,
                PlantedClass::Upgrade if s + step <= 5 * n => s + step,
                PlantedClass::Unchanged => s,
                _ => continue,
            };
            let value = s as f64 / n as f64;
            if used.insert(value.to_bits()) {
                break Draft {
                    id: format!("S{i:05}"),
                    class,
                    vintage: i % cfg.vintages,
                    analysts: n,
                    sum_current: s,
                    sum_prior: prior,
                };
            }
        };
        out.push(draft);
    }
    Ok(out)
}

/// Generates a fixture; identical `(config, seed)` give identical output.
pub fn make_fixture(cfg: &FixtureConfig, seed: u64) -> Result<Fixture, PipelineError> {
    cfg.check()?;
    // index 0 is the prior month of the first current vintage
    let prior0 = third_thursday(cfg.first_vintage)
        .checked_sub_months(Months::new(1))
        .expect("in range");
    let vintage_dates: Vec<NaiveDate> = (0..=cfg.vintages as u32)
        .map(|m| third_thursday(prior0.checked_add_months(Months::new(m)).expect("in range")))
        .collect();
    let study_start = vintage_dates[1];
    let last = vintage_dates[cfg.vintages];
    let horizon_end = last
        .checked_add_months(Months::new(HORIZON_MONTHS))
        .expect("in range")
        + Days::new(3);
    let mut cal_start = vintage_dates[0];
    let mut back = 0;
    while back < cfg.history_days {
        cal_start = cal_start.pred_opt().expect("in range");
        if !matches!(cal_start.weekday(), Weekday::Sat | Weekday::Sun) {
            back += 1;
        }
    }
    let calendar = weekdays(cal_start, horizon_end);
    let t = calendar.len() - 1;

    let bench_r = garch11_simulate(cfg.benchmark_garch, t, seeds::derive(seed, u64::MAX))?;
    let benchmark = prices_from_log_returns(&calendar, 1000.0, &bench_r);

    let drafts = draft_scores(cfg, seeds::derive(seed, u64::MAX - 1))?;

    // couple scores and returns within each class
    let normal = Normal::standard();
    let mut coupling: Vec<Option<(f64, f64, f64)>> = vec![None; drafts.len()];
    for (ci, (class, plant)) in [
        (PlantedClass::Downgrade, cfg.plant_downgrade),
        (PlantedClass::Upgrade, cfg.plant_upgrade),
        (PlantedClass::Unchanged, cfg.plant_unchanged),
    ]
    .into_iter()
    .enumerate()
    {
        let mut members: Vec<usize> = (0..drafts.len()).filter(|&i| drafts[i].class == class).collect();
        let n = members.len();
        if n == 0 {
            continue;
        }
        let pair_seed = seeds::derive(seed, u64::MAX - 2 - ci as u64);
        let mut pairs: Vec<UnitPair> = if plant == (0.0, 0.0) {
            sample_independent(n, pair_seed)
        } else {
            sample_sjc(n, TailParams::clamped(plant.0, plant.1), pair_seed).pairs
        };
        members.sort_by(|&a, &b| drafts[a].score().total_cmp(&drafts[b].score()));
        pairs.sort_by(|a, b| a.u.total_cmp(&b.u));
        let mut v_order: Vec<usize> = (0..n).collect();
        v_order.sort_by(|&a, &b| pairs[a].v.total_cmp(&pairs[b].v));
        let mut v_rank = vec![0usize; n];
        for (r, &k) in v_order.iter().enumerate() {
            v_rank[k] = r + 1;
        }
        for (k, &m) in members.iter().enumerate() {
            let q = v_rank[k] as f64 / (n + 1) as f64;
            coupling[m] = Some((pairs[k].u, pairs[k].v, cfg.excess_sd * normal.inverse_cdf(q)));
        }
    }

    let generated: Vec<Result<(PriceSeries, PlantedObservation), PipelineError>> = drafts
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let (u, v, target) = coupling[i].expect("every draft coupled");
            let vintage_date = vintage_dates[d.vintage + 1];
            let w = locate_window(&benchmark, vintage_date, HORIZON_MONTHS, 1)?;
            let s = calendar.partition_point(|x| *x < w.start);
            let e = calendar.partition_point(|x| *x <= w.end);
            let bench_cum = benchmark.closes()[e - 1] / benchmark.closes()[s] - 1.0;
            let gross = 1.0 + bench_cum + target;
            if gross <= 0.05 {
                return Err(PipelineError::InfeasibleFixture(format!(
                    "excess target {target:.3} not attainable against benchmark return {bench_cum:.3}"
                )));
            }
            // log returns r[j] move the price from calendar[j] to calendar[j + 1]
            let (lo, hi) = (s, e - 1);
            for attempt in 1..=cfg.max_attempts {
                let mut r = garch11_simulate(
                    cfg.security_garch,
                    t,
                    seeds::derive(seeds::derive(seed, i as u64), attempt as u64),
                )?;
                let drift = (gross.ln() - r[lo..hi].iter().sum::<f64>()) / (hi - lo) as f64;
                r[lo..hi].iter_mut().for_each(|x| *x += drift);
                let series = prices_from_log_returns(&calendar, 50.0, &r);
                let screen = iid_screen(&series.daily_returns(), cfg.arch_lags, cfg.significance)?;
                if screen.passed {
                    let planted = PlantedObservation {
                        security_id: d.id.clone(),
                        vintage_date,
                        class: d.class,
                        u,
                        v,
                        score_reversed: d.score(),
                        excess_target: target,
                        attempts: attempt,
                    };
                    return Ok((series, planted));
                }
            }
            Err(PipelineError::InfeasibleFixture(format!(
                "{} failed the i.i.d. screen {} times",
                d.id, cfg.max_attempts
            )))
        })
        .collect();

    let mut prices = BTreeMap::new();
    let mut planted = Vec::with_capacity(drafts.len());
    let mut recommendations = Vec::new();
    for (d, g) in drafts.iter().zip(generated) {
        let (series, obs) = g?;
        prices.insert(d.id.clone(), series);
        planted.push(obs);
        let n = d.analysts;
        recommendations.push(ConsensusRecord {
            security_id: d.id.clone(),
            vintage_date: vintage_dates[d.vintage],
            mean_rec: d.sum_prior as f64 / n as f64,
            num_analysts: n,
        });
        recommendations.push(ConsensusRecord {
            security_id: d.id.clone(),
            vintage_date: vintage_dates[d.vintage + 1],
            mean_rec: d.sum_current as f64 / n as f64,
            num_analysts: n,
        });
    }

    let mut rng = seeds::rng(seeds::derive(seed, u64::MAX - 10));
    for j in 0..cfg.low_coverage {
        let n = if j == 0 { 29 } else { rng.random_range(5..=29) };
        let s: u32 = rng.random_range(n..=5 * n);
        let vintage = j % cfg.vintages;
        for k in [vintage, vintage + 1] {
            recommendations.push(ConsensusRecord {
                security_id: format!("L{j:04}"),
                vintage_date: vintage_dates[k],
                mean_rec: s as f64 / n as f64,
                num_analysts: n,
            });
        }
    }
    recommendations.sort_by(|a, b| {
        (a.vintage_date, &a.security_id).cmp(&(b.vintage_date, &b.security_id))
    });

    let count = |c: PlantedClass| drafts.iter().filter(|d| d.class == c).count();
    let in_study_priors = drafts.iter().filter(|d| d.vintage > 0).count();
    let low_in_study: usize = (0..cfg.low_coverage)
        .map(|j| if j % cfg.vintages > 0 { 2 } else { 1 })
        .sum();
    let retained = drafts.len() + in_study_priors;
    let expected = Provenance {
        records_in: recommendations.len(),
        prior_only: recommendations.len() - retained - low_in_study,
        dropped_analysts: low_in_study,
        retained,
        downgrades: count(PlantedClass::Downgrade),
        upgrades: count(PlantedClass::Upgrade),
        unchanged: count(PlantedClass::Unchanged),
        no_prior: in_study_priors,
        ..Provenance::default()
    };
    debug_assert!(expected.balanced());
    debug_assert!(planted.iter().all(|p| reverse_scale(6.0 - p.score_reversed).is_ok()));

    Ok(Fixture {
        recommendations,
        prices,
        benchmark,
        truth: TruthManifest {
            seed,
            config: cfg.clone(),
            study_start,
            expected,
            planted,
        },
    })
}
