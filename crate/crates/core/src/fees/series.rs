use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::FeeError;
use crate::types::{Feerate, Height};

/// One fee estimate: the feerate asked for confirmation within
/// `conf_target` blocks, observed at `height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeerateSample {
    pub height: Height,
    pub feerate: Feerate,
    pub conf_target: u32,
}

/// Fee estimates ordered by strictly increasing height. Between samples the
/// last estimate stays in force.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<FeerateSample>", into = "Vec<FeerateSample>")]
pub struct FeerateSeries {
    samples: Vec<FeerateSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FeeUnit {
    SatKwu,
    SatVb,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    height: Height,
    feerate: f64,
    unit: FeeUnit,
    conf_target: u32,
}

impl FeerateSeries {
    pub fn new(samples: Vec<FeerateSample>) -> Result<Self, FeeError> {
        if samples.is_empty() {
            return Err(FeeError::EmptySeries);
        }
        for (i, s) in samples.iter().enumerate() {
            if s.feerate == Feerate::ZERO {
                return Err(FeeError::NonpositiveFeerate { line: i as u64 + 1 });
            }
            if i > 0 && samples[i - 1].height >= s.height {
                return Err(FeeError::NonMonotonicHeights { line: i as u64 + 1 });
            }
        }
        Ok(Self { samples })
    }

    pub fn ingest_csv(path: impl AsRef<Path>) -> Result<Self, FeeError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| FeeError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_csv_reader(file)
    }

    /// Parses `height,feerate,unit,conf_target` rows; `unit` is `sat_kwu`
    /// or `sat_vb`. Reported line numbers count the header as line 1.
    pub fn from_csv_reader(reader: impl Read) -> Result<Self, FeeError> {
        let mut rdr = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| FeeError::Parse {
                line: 1,
                message: e.to_string(),
            })?
            .clone();
        let mut samples: Vec<FeerateSample> = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| FeeError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let row: CsvRow = record
                .deserialize(Some(&headers))
                .map_err(|e| FeeError::Parse {
                    line,
                    message: e.to_string(),
                })?;
            if row.feerate.is_nan() || row.feerate <= 0.0 {
                return Err(FeeError::NonpositiveFeerate { line });
            }
            let feerate = match row.unit {
                FeeUnit::SatKwu => Feerate(row.feerate.floor() as u64),
                FeeUnit::SatVb => Feerate::from_sat_per_vbyte(row.feerate),
            };
            if feerate == Feerate::ZERO {
                return Err(FeeError::NonpositiveFeerate { line });
            }
            if samples.last().is_some_and(|prev| prev.height >= row.height) {
                return Err(FeeError::NonMonotonicHeights { line });
            }
            samples.push(FeerateSample {
                height: row.height,
                feerate,
                conf_target: row.conf_target,
            });
        }
        Self::new(samples)
    }

    pub fn samples(&self) -> &[FeerateSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn first_height(&self) -> Height {
        self.samples[0].height
    }

    pub fn last_height(&self) -> Height {
        self.samples[self.samples.len() - 1].height
    }

    /// Estimate in force at `height`.
    pub fn estimate_at(&self, height: Height) -> Result<Feerate, FeeError> {
        self.check_range(height)?;
        let idx = self.samples.partition_point(|s| s.height <= height) - 1;
        Ok(self.samples[idx].feerate)
    }

    /// Estimates in force over `[from, to]`: the one at `from` followed by
    /// every sample strictly inside the range, with their heights.
    pub fn estimates_between(
        &self,
        from: Height,
        to: Height,
    ) -> Result<Vec<(Height, Feerate)>, FeeError> {
        self.check_range(from)?;
        self.check_range(to)?;
        let mut out = vec![(from, self.estimate_at(from)?)];
        let start = self.samples.partition_point(|s| s.height <= from);
        out.extend(
            self.samples[start..]
                .iter()
                .take_while(|s| s.height <= to)
                .map(|s| (s.height, s.feerate)),
        );
        Ok(out)
    }

    fn check_range(&self, height: Height) -> Result<(), FeeError> {
        if height < self.first_height() || height > self.last_height() {
            return Err(FeeError::HeightOutOfRange {
                height,
                first: self.first_height(),
                last: self.last_height(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<FeerateSample>> for FeerateSeries {
    type Error = FeeError;

    fn try_from(samples: Vec<FeerateSample>) -> Result<Self, Self::Error> {
        Self::new(samples)
    }
}

impl From<FeerateSeries> for Vec<FeerateSample> {
    fn from(series: FeerateSeries) -> Self {
        series.samples
    }
}
