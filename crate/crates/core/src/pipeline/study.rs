//! Per-subsample estimation.

use super::panel::{MatchedPanel, Subsample};
use super::{PipelineConfig, PipelineError};
use crate::estimator::{bootstrap_se, fit_raw, FitConfig, FitReport};
use crate::margins::PseudoObservations;
use crate::seeds;

/// Report order: unconditional, upgrades, downgrades.
pub const REPORT_ORDER: [Subsample; 3] = [Subsample::Full, Subsample::BUpgrade, Subsample::ADowngrade];

pub fn fit_config(config: &PipelineConfig) -> FitConfig {
    FitConfig {
        mode: config.copula,
        ..FitConfig::default()
    }
}

/// Fits the SJC copula to each subsample's (score, excess return) ranks.
/// Subsamples missing from `panels` are skipped.
pub fn run_study(
    panels: &[MatchedPanel],
    config: &PipelineConfig,
) -> Result<Vec<FitReport>, PipelineError> {
    let fc = fit_config(config);
    let mut out = Vec::new();
    for (i, which) in REPORT_ORDER.iter().enumerate() {
        let Some(panel) = panels.iter().find(|p| p.subsample == *which) else {
            continue;
        };
        let label = which.label().to_string();
        let wrap = |source| PipelineError::Estimation {
            label: label.clone(),
            source,
        };
        let (x, y) = (panel.scores(), panel.excess_returns());
        let mut report = fit_raw(&x, &y, &fc).map_err(wrap)?;
        report.subsample_label = label.clone();
        if config.bootstrap_reps > 0 {
            let obs = PseudoObservations::from_raw(&x, &y).map_err(|e| wrap(e.into()))?;
            let seed = seeds::derive(config.seed, i as u64);
            report.bootstrap = Some(bootstrap_se(&obs, config.bootstrap_reps, seed, &fc).map_err(wrap)?);
        }
        out.push(report);
    }
    Ok(out)
}
