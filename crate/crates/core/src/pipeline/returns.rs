//! Scale reversal and six-month excess returns.

use chrono::{Months, NaiveDate};

use super::{PipelineError, PriceSeries};

/// Window end may fall this many calendar days short of the nominal horizon
/// (weekends, holidays) before the series counts as not covering it.
pub const END_SLACK_DAYS: i64 = 7;

/// Maps the 1 = strong buy scale to 1 = strong sell.
pub fn reverse_scale(mean_rec_original: f64) -> Result<f64, PipelineError> {
    if !(1.0..=5.0).contains(&mean_rec_original) {
        return Err(PipelineError::ScaleOutOfRange(mean_rec_original));
    }
    Ok(6.0 - mean_rec_original)
}

/// Trading-day window following an issue date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub start: NaiveDate,
    pub end: NaiveDate,
    /// Trading days from `start` to `end` inclusive.
    pub days: usize,
}

/// Locates the window on `series`: start is the first trading day strictly
/// after `issue_date`, end the last trading day on or before
/// `issue_date + months`.
pub fn locate_window(
    series: &PriceSeries,
    issue_date: NaiveDate,
    months: u32,
    min_days: usize,
) -> Result<Window, PipelineError> {
    let horizon = issue_date
        .checked_add_months(Months::new(months))
        .ok_or_else(|| PipelineError::Coverage(format!("horizon overflow after {issue_date}")))?;
    let dates = series.dates();
    let first = dates.partition_point(|d| *d <= issue_date);
    let past_end = dates.partition_point(|d| *d <= horizon);
    if first >= past_end {
        return Err(PipelineError::Coverage(format!(
            "no trading days in ({issue_date}, {horizon}]"
        )));
    }
    let (start, end) = (dates[first], dates[past_end - 1]);
    if (horizon - end).num_days() > END_SLACK_DAYS {
        return Err(PipelineError::Coverage(format!(
            "series ends {end}, window runs to {horizon}"
        )));
    }
    let days = past_end - first;
    if days < min_days {
        return Err(PipelineError::Coverage(format!(
            "{days} trading days in window, need {min_days}"
        )));
    }
    Ok(Window { start, end, days })
}

/// Cumulative simple return of `series` from the close on `start` to the
/// close on `end`.
pub fn cumulative_return(
    series: &PriceSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<f64, PipelineError> {
    let close = |d: NaiveDate| {
        series
            .close_on(d)
            .ok_or_else(|| PipelineError::Coverage(format!("no close on {d}")))
    };
    Ok(close(end)? / close(start)? - 1.0)
}

/// Security minus benchmark cumulative return over one explicit window.
pub fn excess_over_window(
    prices: &PriceSeries,
    benchmark: &PriceSeries,
    start: NaiveDate,
    end: NaiveDate,
) -> Result<f64, PipelineError> {
    Ok(cumulative_return(prices, start, end)? - cumulative_return(benchmark, start, end)?)
}

/// Excess return over the `months`-month window after `issue_date`. The
/// benchmark must trade on the window's start and end dates.
pub fn compute_excess_return(
    prices: &PriceSeries,
    benchmark: &PriceSeries,
    issue_date: NaiveDate,
    months: u32,
    min_days: usize,
) -> Result<(Window, f64), PipelineError> {
    let w = locate_window(prices, issue_date, months, min_days)?;
    let r = excess_over_window(prices, benchmark, w.start, w.end)?;
    Ok((w, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn day(i: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2011, 1, 3).unwrap() + chrono::Days::new(i)
    }

    fn series(closes: &[f64]) -> PriceSeries {
        PriceSeries::new(
            "t",
            closes.iter().enumerate().map(|(i, &c)| (day(i as u64), c)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn reverse_examples() {
        assert_eq!(reverse_scale(1.0).unwrap(), 5.0);
        assert_eq!(reverse_scale(3.0).unwrap(), 3.0);
        assert_close!(reverse_scale(1.8).unwrap(), 4.2, 1e-15);
        assert!(reverse_scale(0.99).is_err());
        assert!(reverse_scale(5.01).is_err());
        assert!(reverse_scale(f64::NAN).is_err());
    }

    #[test]
    fn three_day_fixture() {
        let p = series(&[100.0, 101.0, 102.0]);
        let b = series(&[200.0, 200.0, 201.0]);
        let r = excess_over_window(&p, &b, day(0), day(2)).unwrap();
        assert_close!(r, 0.015, 1e-15);
    }

    fn daily(n: usize, growth: f64) -> PriceSeries {
        PriceSeries::new(
            "t",
            (0..n)
                .map(|i| (day(i as u64), 100.0 * (1.0 + growth).powf(i as f64 / (n - 1) as f64)))
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn window_boundaries() {
        // issue date itself is excluded from the window
        let p = daily(400, 0.0);
        let w = locate_window(&p, day(10), 6, 100).unwrap();
        assert_eq!(w.start, day(11));
        assert_eq!(w.end, day(10).checked_add_months(Months::new(6)).unwrap());
        assert_eq!(w.days, (w.end - w.start).num_days() as usize + 1);
        assert!(locate_window(&p, day(300), 6, 100).is_err());
        assert!(locate_window(&p, day(10), 6, 1000).is_err());
    }

    #[test]
    fn identical_and_doubling() {
        let p = daily(400, 0.5);
        let b = daily(400, 0.5);
        let (_, r) = compute_excess_return(&p, &b, day(0), 6, 100).unwrap();
        assert_close!(r, 0.0, 1e-15);

        let flat = series(&[50.0; 400]);
        let mut pts: Vec<_> = (0..400).map(|i| (day(i), 10.0)).collect();
        for p in pts.iter_mut().skip(100) {
            p.1 = 20.0;
        }
        let dbl = PriceSeries::new("d", pts).unwrap();
        let (_, r) = compute_excess_return(&dbl, &flat, day(0), 6, 100).unwrap();
        assert_close!(r, 1.0, 1e-15);
    }

    #[test]
    fn benchmark_gap_is_coverage_error() {
        let p = daily(400, 0.1);
        let b = PriceSeries::new(
            "b",
            (0..400).filter(|&i| i != 1).map(|i| (day(i), 1.0)).collect(),
        )
        .unwrap();
        assert!(matches!(
            compute_excess_return(&p, &b, day(0), 6, 100),
            Err(PipelineError::Coverage(_))
        ));
    }

    proptest! {
        #[test]
        fn reversal_is_involution(x in 1.0f64..=5.0) {
            let y = reverse_scale(reverse_scale(x).unwrap()).unwrap();
            prop_assert!((y - x).abs() <= 4.0 * f64::EPSILON);
            prop_assert!((1.0..=5.0).contains(&reverse_scale(x).unwrap()));
        }
    }
}
