//! Plain-text channel files.
//!
//! ```text
//! M K
//! re im re im ...   (one record per line, M pairs)
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Values are written in
//! shortest round-trip form, so a save/load cycle is exact.

use std::fmt::Write as _;
use std::path::Path;

use jcas_core::radio::ChannelVector;
use num_complex::Complex64;

use crate::error::{read_string, write, FormatError, Result};

pub fn format_channels(channels: &[ChannelVector]) -> Result<String> {
    let m = channels.first().map_or(0, |h| h.len());
    let mut out = format!("{m} {}\n", channels.len());
    for (k, h) in channels.iter().enumerate() {
        if h.len() != m {
            return Err(FormatError::parse(
                k + 2,
                format!("record {} has {} entries, expected {m}", k + 1, h.len()),
            ));
        }
        let mut first = true;
        for c in h.entries() {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{} {}", c.re, c.im).expect("writing to a String");
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn parse_channels(text: &str) -> Result<Vec<ChannelVector>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (header_line, header) = lines
        .next()
        .ok_or_else(|| FormatError::parse(1, "empty channel file"))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(str::parse)
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| FormatError::parse(header_line, format!("bad header: {e}")))?;
    let [m, k] = dims[..] else {
        return Err(FormatError::parse(header_line, "header must be \"M K\""));
    };
    if m == 0 || k == 0 {
        return Err(FormatError::parse(header_line, "M and K must be positive"));
    }
    let mut channels = Vec::with_capacity(k);
    for (record, (line, body)) in lines.enumerate() {
        let record = record + 1;
        if record > k {
            return Err(FormatError::parse(line, format!("more than {k} records")));
        }
        let reals: Vec<f64> = body
            .split_whitespace()
            .map(str::parse)
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| FormatError::parse(line, format!("record {record}: {e}")))?;
        if !reals.len().is_multiple_of(2) {
            return Err(FormatError::parse(
                line,
                format!("record {record} has an odd number of reals ({})", reals.len()),
            ));
        }
        if reals.len() != 2 * m {
            return Err(FormatError::parse(
                line,
                format!("record {record} has {} entries, expected {m}", reals.len() / 2),
            ));
        }
        let entries = reals
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        channels.push(
            ChannelVector::new(entries)
                .map_err(|e| FormatError::parse(line, format!("record {record}: {e}")))?,
        );
    }
    if channels.len() != k {
        return Err(FormatError::parse(
            text.lines().count().max(1),
            format!("expected {k} records, found {}", channels.len()),
        ));
    }
    Ok(channels)
}

pub fn save_channels(channels: &[ChannelVector], path: &Path) -> Result<()> {
    write(path, format_channels(channels)?.as_bytes())
}

pub fn load_channels(path: &Path) -> Result<Vec<ChannelVector>> {
    parse_channels(&read_string(path)?)
}
