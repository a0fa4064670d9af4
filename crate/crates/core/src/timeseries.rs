//! Probe recordings and their CSV form.

use crate::error::{FdtdError, Result};
use std::io::{BufRead, Write};
use std::path::Path;

/// Per-probe sample traces over a run with fixed timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub dt: f64,
    pub names: Vec<String>,
    /// one vector of samples per probe, all the same length
    pub data: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(dt: f64, names: Vec<String>) -> Self {
        let data = names.iter().map(|_| Vec::new()).collect();
        TimeSeries { dt, names, data }
    }

    pub fn len(&self) -> usize {
        self.data.first().map_or(0, |c| c.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn push(&mut self, samples: &[f64]) {
        assert_eq!(samples.len(), self.data.len());
        for (col, &v) in self.data.iter_mut().zip(samples) {
            col.push(v);
        }
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        let i = self.names.iter().position(|n| n == name)?;
        Some(&self.data[i])
    }

    /// Writes `step,time,<probe...>` rows, with an optional leading `#`
    /// provenance line.
    pub fn write_csv<W: Write>(&self, w: &mut W, provenance: Option<&str>) -> Result<()> {
        if let Some(p) = provenance {
            writeln!(w, "# {p}")?;
        }
        write!(w, "step,time")?;
        for n in &self.names {
            write!(w, ",{n}")?;
        }
        writeln!(w)?;
        for i in 0..self.len() {
            write!(w, "{},{:e}", i + 1, (i + 1) as f64 * self.dt)?;
            for col in &self.data {
                write!(w, ",{:e}", col[i])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path, provenance: Option<&str>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_csv(&mut w, provenance)
    }

    pub fn read_csv_file(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        let mut lines = std::io::BufReader::new(f).lines();
        let mut header = String::new();
        for line in lines.by_ref() {
            let line = line?;
            if line.starts_with('#') || line.trim().is_empty() {
                continue;
            }
            header = line;
            break;
        }
        let cols: Vec<&str> = header.split(',').collect();
        if cols.len() < 3 || cols[0] != "step" || cols[1] != "time" {
            return Err(FdtdError::InvalidParameter(format!(
                "not a time-series CSV: {}",
                path.display()
            )));
        }
        let names: Vec<String> = cols[2..].iter().map(|s| s.to_string()).collect();
        let mut data: Vec<Vec<f64>> = names.iter().map(|_| Vec::new()).collect();
        let mut times: Vec<f64> = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != names.len() + 2 {
                return Err(FdtdError::InvalidParameter(format!(
                    "ragged CSV row in {}",
                    path.display()
                )));
            }
            let t: f64 = fields[1]
                .parse()
                .map_err(|_| FdtdError::InvalidParameter("bad time value".into()))?;
            times.push(t);
            for (i, field) in fields[2..].iter().enumerate() {
                data[i].push(
                    field
                        .parse()
                        .map_err(|_| FdtdError::InvalidParameter("bad sample value".into()))?,
                );
            }
        }
        let dt = match times.len() {
            0 => {
                return Err(FdtdError::InvalidParameter(format!(
                    "empty time series in {}",
                    path.display()
                )))
            }
            1 => times[0],
            _ => times[1] - times[0],
        };
        Ok(TimeSeries { dt, names, data })
    }
}
