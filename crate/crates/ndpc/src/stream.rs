//! Line-delimited JSON stream of NDP draws: a header line, then one line
//! per retained draw.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use ndpc_core::ndp::{NdpConfig, NdpDraw, PosteriorDraws, RunReport};
use serde::{Deserialize, Serialize};

use crate::error::{io_err, json_err, Error, Result};

pub const DRAWS_FORMAT: &str = "ndpc-draws";
pub const DRAWS_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub format: String,
    pub version: u64,
    pub code_version: String,
    pub config: NdpConfig,
    pub chains: u32,
    pub data_digest: String,
    pub subject_ids: Vec<String>,
    pub radius: f64,
    pub report: RunReport,
}

pub fn write_draws(path: &Path, draws: &PosteriorDraws) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let header = StreamHeader {
        format: DRAWS_FORMAT.into(),
        version: DRAWS_VERSION,
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: draws.config.clone(),
        chains: draws.chains().len() as u32,
        data_digest: draws.data_digest.clone(),
        subject_ids: draws.subject_ids.clone(),
        radius: draws.radius,
        report: draws.report.clone(),
    };
    serde_json::to_writer(&mut w, &header).map_err(json_err(path))?;
    w.write_all(b"\n").map_err(io_err(path))?;
    for d in &draws.draws {
        serde_json::to_writer(&mut w, d).map_err(json_err(path))?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads a stream written by [`write_draws`]. Unknown formats and versions
/// are rejected before any draw is parsed.
pub fn read_draws(path: &Path) -> Result<PosteriorDraws> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let malformed = |reason: String| Error::Malformed {
        path: path.to_path_buf(),
        reason,
    };
    let first = lines
        .next()
        .ok_or_else(|| malformed("empty draw stream".into()))?
        .map_err(io_err(path))?;
    let v: serde_json::Value = serde_json::from_str(&first).map_err(json_err(path))?;
    if v.get("format").and_then(|f| f.as_str()) != Some(DRAWS_FORMAT) {
        return Err(malformed(format!("first line is not a {DRAWS_FORMAT} header")));
    }
    let found = v
        .get("version")
        .and_then(|x| x.as_u64())
        .ok_or_else(|| malformed("header has no integer version".into()))?;
    if found != DRAWS_VERSION {
        return Err(Error::UnsupportedVersion {
            path: path.to_path_buf(),
            found,
            expected: DRAWS_VERSION,
        });
    }
    let header: StreamHeader = serde_json::from_value(v).map_err(json_err(path))?;
    let n = header.subject_ids.len();
    let mut draws = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        let d: NdpDraw = serde_json::from_str(&line).map_err(json_err(path))?;
        if d.zeta.len() != n {
            return Err(malformed(format!("draw on line {} has {} labels for {n} subjects", i + 2, d.zeta.len())));
        }
        draws.push(d);
    }
    Ok(PosteriorDraws {
        config: header.config,
        data_digest: header.data_digest,
        subject_ids: header.subject_ids,
        radius: header.radius,
        draws,
        report: header.report,
    })
}
