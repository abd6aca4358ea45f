use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{MlError, Result, SolverConfig};

/// Which part of the spectrum an eigensolve asks for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    LargestMagnitude,
    SmallestMagnitude,
    LargestReal,
    SmallestReal,
    LargestImaginary,
    SmallestImaginary,
}

impl Spectrum {
    pub const ALL: [Spectrum; 6] = [
        Spectrum::LargestMagnitude,
        Spectrum::SmallestMagnitude,
        Spectrum::LargestReal,
        Spectrum::SmallestReal,
        Spectrum::LargestImaginary,
        Spectrum::SmallestImaginary,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Spectrum::LargestMagnitude => "largest_magnitude",
            Spectrum::SmallestMagnitude => "smallest_magnitude",
            Spectrum::LargestReal => "largest_real",
            Spectrum::SmallestReal => "smallest_real",
            Spectrum::LargestImaginary => "largest_imaginary",
            Spectrum::SmallestImaginary => "smallest_imaginary",
        }
    }

    /// Numeric code used when the spectrum is a tree feature.
    pub fn code(self) -> f64 {
        Spectrum::ALL.iter().position(|s| *s == self).expect("listed") as f64
    }
}

impl FromStr for Spectrum {
    type Err = MlError;

    fn from_str(s: &str) -> Result<Self> {
        Spectrum::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| MlError::BadValue { column: "spectrum".into(), value: s.into() })
    }
}

/// Request parameters of a run (number of eigenvalues, spectrum portion,
/// tolerance, processor count). All are optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RequestSpec {
    pub n_eigenvalues: Option<u32>,
    pub spectrum: Option<Spectrum>,
    pub tolerance: Option<f64>,
    pub processors: Option<u32>,
}

impl RequestSpec {
    pub fn is_empty(&self) -> bool {
        *self == RequestSpec::default()
    }

    /// The present fields as numeric features.
    pub fn as_features(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        if let Some(n) = self.n_eigenvalues {
            out.insert("n_eigenvalues".into(), n as f64);
        }
        if let Some(s) = self.spectrum {
            out.insert("spectrum".into(), s.code());
        }
        if let Some(t) = self.tolerance {
            out.insert("tolerance".into(), t);
        }
        if let Some(p) = self.processors {
            out.insert("processors".into(), p as f64);
        }
        out
    }
}

/// One benchmark run of a solver configuration on a problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub features: BTreeMap<String, f64>,
    pub config: SolverConfig,
    pub converged: bool,
    pub time_seconds: f64,
    pub residual: Option<f64>,
    pub converged_count: Option<u32>,
    pub request: RequestSpec,
}

/// Fixed corpus columns; every other column is a numeric feature.
pub const RUN_COLUMNS: &[&str] = &[
    "problem_id",
    "method",
    "preconditioner",
    "converged",
    "time_seconds",
    "residual",
    "converged_count",
    "n_eigenvalues",
    "spectrum",
    "tolerance",
    "processors",
];

fn opt<T: FromStr>(column: &str, value: &str) -> Result<Option<T>> {
    if value.is_empty() {
        return Ok(None);
    }
    value.parse().map(Some).map_err(|_| MlError::BadValue { column: column.into(), value: value.into() })
}

fn req<T: FromStr>(column: &str, value: &str) -> Result<T> {
    opt(column, value)?.ok_or_else(|| MlError::BadValue { column: column.into(), value: value.into() })
}

/// Reads a run corpus. The header must contain every fixed column.
pub fn read_runs(reader: impl Read) -> Result<Vec<RunRecord>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let col = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| MlError::MissingColumn(name.into()));
    let idx: BTreeMap<&str, usize> = RUN_COLUMNS.iter().map(|c| Ok((*c, col(c)?))).collect::<Result<_>>()?;
    let feature_cols: Vec<(usize, &str)> = header
        .iter()
        .enumerate()
        .filter(|(_, h)| !RUN_COLUMNS.contains(&h.as_str()))
        .map(|(i, h)| (i, h.as_str()))
        .collect();

    let mut runs = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = row + 2;
        let get = |c: &str| rec.get(idx[c]).unwrap_or("");
        let wrap = |e: MlError| MlError::Line { line, source: Box::new(e) };
        let parse = || -> Result<RunRecord> {
            let pc = get("preconditioner");
            let label = if pc.is_empty() || pc.starts_with('[') {
                format!("{}{}", get("method"), pc)
            } else {
                format!("{}+{}", get("method"), pc)
            };
            let features = feature_cols
                .iter()
                .map(|(i, name)| Ok((name.to_string(), req(name, rec.get(*i).unwrap_or(""))?)))
                .collect::<Result<_>>()?;
            let converged = match get("converged") {
                "true" | "1" | "yes" => true,
                "false" | "0" | "no" => false,
                other => return Err(MlError::BadValue { column: "converged".into(), value: other.into() }),
            };
            Ok(RunRecord {
                problem_id: req("problem_id", get("problem_id"))?,
                features,
                config: label.parse()?,
                converged,
                time_seconds: req("time_seconds", get("time_seconds"))?,
                residual: opt("residual", get("residual"))?,
                converged_count: opt("converged_count", get("converged_count"))?,
                request: RequestSpec {
                    n_eigenvalues: opt("n_eigenvalues", get("n_eigenvalues"))?,
                    spectrum: opt("spectrum", get("spectrum"))?,
                    tolerance: opt("tolerance", get("tolerance"))?,
                    processors: opt("processors", get("processors"))?,
                },
            })
        };
        runs.push(parse().map_err(wrap)?);
    }
    Ok(runs)
}

/// Writes runs with the fixed columns first, then the union of feature names.
pub fn write_runs(runs: &[RunRecord], writer: impl Write) -> Result<()> {
    let features: Vec<&String> = {
        let mut names: Vec<&String> = runs.iter().flat_map(|r| r.features.keys()).collect();
        names.sort();
        names.dedup();
        names
    };
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = vec!["problem_id"];
    header.extend(features.iter().map(|s| s.as_str()));
    header.extend(&RUN_COLUMNS[1..]);
    w.write_record(&header)?;
    let show = |v: Option<String>| v.unwrap_or_default();
    for r in runs {
        let mut rec = vec![r.problem_id.clone()];
        rec.extend(features.iter().map(|f| r.features.get(*f).map(|v| v.to_string()).unwrap_or_default()));
        rec.push(r.config.method.clone());
        rec.push(r.config.preconditioner_label());
        rec.push(r.converged.to_string());
        rec.push(r.time_seconds.to_string());
        rec.push(show(r.residual.map(|x| x.to_string())));
        rec.push(show(r.converged_count.map(|x| x.to_string())));
        rec.push(show(r.request.n_eigenvalues.map(|x| x.to_string())));
        rec.push(show(r.request.spectrum.map(|x| x.as_str().to_string())));
        rec.push(show(r.request.tolerance.map(|x| x.to_string())));
        rec.push(show(r.request.processors.map(|x| x.to_string())));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
