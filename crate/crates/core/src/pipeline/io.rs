//! CSV readers and writers for the pipeline's file interfaces.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{ConsensusRecord, MarketData, PipelineError, PriceSeries};
use crate::copula::UnitPair;

#[derive(Debug, Serialize, Deserialize)]
struct PriceRow {
    security_id: String,
    date: NaiveDate,
    close: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct BenchmarkRow {
    date: NaiveDate,
    level: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct PairRow {
    u: f64,
    v: f64,
}

/// Reads `security_id,vintage_date,mean_rec,num_analysts`; every row is
/// validated.
pub fn read_recommendations<R: Read>(r: R) -> Result<Vec<ConsensusRecord>, PipelineError> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let rec: ConsensusRecord = row?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_recommendations<W: Write>(w: W, recs: &[ConsensusRecord]) -> Result<(), PipelineError> {
    let mut wr = csv::Writer::from_writer(w);
    for r in recs {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads `security_id,date,close` into one series per security.
pub fn read_prices<R: Read>(r: R) -> Result<BTreeMap<String, PriceSeries>, PipelineError> {
    let mut grouped: BTreeMap<String, Vec<(NaiveDate, f64)>> = BTreeMap::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: PriceRow = row?;
        grouped.entry(row.security_id).or_default().push((row.date, row.close));
    }
    grouped
        .into_iter()
        .map(|(id, pts)| PriceSeries::new(&id, pts).map(|s| (id, s)))
        .collect()
}

pub fn write_prices<W: Write>(
    w: W,
    prices: &BTreeMap<String, PriceSeries>,
) -> Result<(), PipelineError> {
    let mut wr = csv::Writer::from_writer(w);
    for (id, s) in prices {
        for (&date, &close) in s.dates().iter().zip(s.closes()) {
            wr.serialize(PriceRow {
                security_id: id.clone(),
                date,
                close,
            })?;
        }
    }
    wr.flush()?;
    Ok(())
}

/// Reads `date,level`.
pub fn read_benchmark<R: Read>(r: R) -> Result<PriceSeries, PipelineError> {
    let mut pts = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: BenchmarkRow = row?;
        pts.push((row.date, row.level));
    }
    PriceSeries::new("benchmark", pts)
}

pub fn write_benchmark<W: Write>(w: W, s: &PriceSeries) -> Result<(), PipelineError> {
    let mut wr = csv::Writer::from_writer(w);
    for (&date, &level) in s.dates().iter().zip(s.closes()) {
        wr.serialize(BenchmarkRow { date, level })?;
    }
    wr.flush()?;
    Ok(())
}

/// Loads the three input files.
pub fn load_inputs(
    recommendations: &Path,
    prices: &Path,
    benchmark: &Path,
) -> Result<(Vec<ConsensusRecord>, MarketData), PipelineError> {
    let recs = read_recommendations(std::fs::File::open(recommendations)?)?;
    let market = MarketData {
        prices: read_prices(std::fs::File::open(prices)?)?,
        benchmark: read_benchmark(std::fs::File::open(benchmark)?)?,
    };
    Ok((recs, market))
}

/// Reads a `u,v` CSV of pseudo-observations.
pub fn read_pairs<R: Read>(r: R) -> Result<Vec<(f64, f64)>, PipelineError> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let row: PairRow = row?;
        out.push((row.u, row.v));
    }
    Ok(out)
}

pub fn write_pairs<W: Write>(w: W, pairs: &[UnitPair]) -> Result<(), PipelineError> {
    let mut wr = csv::Writer::from_writer(w);
    for p in pairs {
        wr.serialize(PairRow { u: p.u, v: p.v })?;
    }
    wr.flush()?;
    Ok(())
}

/// Reads a single-column numeric CSV (header required, any name).
pub fn read_column<R: Read>(r: R) -> Result<Vec<f64>, PipelineError> {
    let mut out = Vec::new();
    for row in csv::Reader::from_reader(r).deserialize() {
        let (x,): (f64,) = row?;
        out.push(x);
    }
    Ok(out)
}

pub fn write_column<W: Write>(w: W, header: &str, values: &[f64]) -> Result<(), PipelineError> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record([header])?;
    for x in values {
        wr.write_record([x.to_string()])?;
    }
    wr.flush()?;
    Ok(())
}
