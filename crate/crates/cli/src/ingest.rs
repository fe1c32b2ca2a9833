//! Reading observation series from CSV.

use std::io::Read;
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;
use covbreak::ObservationSeries;

/// How the numbers in an input file are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    /// Price levels; converted to `100·log(P_t/P_{t-1})`.
    Prices,
    /// Rows are the observations `X_t` themselves.
    #[default]
    Returns,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct IngestOptions {
    pub has_header: bool,
    pub mode: Mode,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            has_header: true,
            mode: Mode::Returns,
        }
    }
}

pub fn ingest_csv(path: &Path, options: IngestOptions) -> Result<ObservationSeries> {
    let file = std::fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
    ingest_reader(file, options).with_context(|| format!("while reading {}", path.display()))
}

/// Parses a rectangular numeric table and applies the mode conversion.
pub fn ingest_reader<R: Read>(reader: R, options: IngestOptions) -> Result<ObservationSeries> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(options.has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (i, record) in csv.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        let row = record
            .iter()
            .enumerate()
            .map(|(j, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .with_context(|| format!("line {line}, column {}: {cell:?} is not a finite number", j + 1))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                bail!("line {line} has {} columns, expected {}", row.len(), first.len());
            }
        }
        rows.push(row);
    }
    if rows.is_empty() || rows[0].is_empty() {
        bail!("no observations");
    }
    let rows = match options.mode {
        Mode::Returns => rows,
        Mode::Prices => log_returns(&rows)?,
    };
    if rows.is_empty() {
        bail!("price mode needs at least two rows");
    }
    Ok(ObservationSeries::from_rows(&rows)?)
}

fn log_returns(prices: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if let Some((i, j)) = prices
        .iter()
        .enumerate()
        .find_map(|(i, row)| row.iter().position(|&p| p <= 0.0).map(|j| (i, j)))
    {
        bail!("price at row {}, column {} is not positive", i + 1, j + 1);
    }
    Ok(prices
        .windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(now, before)| 100.0 * (now / before).ln()).collect())
        .collect())
}
