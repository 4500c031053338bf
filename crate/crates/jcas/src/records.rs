//! CSV outputs: per-episode training records and beam patterns.
//!
//! Episode CSV columns are `episode,avg_gain,beta,tpr,tpr_literal,selected_count`;
//! the last three are empty for agents without a selector.

use std::path::Path;

use jcas_core::metrics::EpisodeRecord;
use serde::{Deserialize, Serialize};

use crate::error::{io_at, read, write, Result};

pub fn episodes_to_csv(records: &[EpisodeRecord]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        w.serialize(r)?;
    }
    if records.is_empty() {
        w.write_record(["episode", "avg_gain", "beta", "tpr", "tpr_literal", "selected_count"])?;
    }
    w.into_inner().map_err(|e| e.into_error()).map_err(io_at(Path::new("<memory>")))
}

pub fn episodes_from_csv(bytes: &[u8]) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_reader(bytes);
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}

pub fn save_episodes(records: &[EpisodeRecord], path: &Path) -> Result<()> {
    write(path, &episodes_to_csv(records)?)
}

pub fn load_episodes(path: &Path) -> Result<Vec<EpisodeRecord>> {
    episodes_from_csv(&read(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub angle_rad: f64,
    pub normalized_gain: f64,
}

pub fn pattern_to_csv(pattern: &[(f64, f64)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for &(angle_rad, normalized_gain) in pattern {
        w.serialize(PatternRow {
            angle_rad,
            normalized_gain,
        })?;
    }
    w.into_inner().map_err(|e| e.into_error()).map_err(io_at(Path::new("<memory>")))
}

pub fn pattern_from_csv(bytes: &[u8]) -> Result<Vec<PatternRow>> {
    let mut r = csv::Reader::from_reader(bytes);
    Ok(r.deserialize().collect::<std::result::Result<Vec<_>, _>>()?)
}
