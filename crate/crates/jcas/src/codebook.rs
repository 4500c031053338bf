//! Codebook files: JSON with the array size `M`, phase resolution `r` and
//! one entry per beam.
//!
//! ```json
//! {"num_antennas": 4, "phase_bits": 2,
//!  "beams": [{"role": "comm", "id": 0, "phases": [0.0, 1.5707963267948966, ...]}]}
//! ```

use std::path::Path;

use jcas_core::pipeline::{BeamRole, Codebook, CodebookEntry};
use jcas_core::radio::{BeamVector, PhaseCodomain};
use serde::{Deserialize, Serialize};

use crate::error::{read_string, write, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BeamJson {
    role: BeamRole,
    id: usize,
    phases: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CodebookJson {
    num_antennas: usize,
    phase_bits: u32,
    beams: Vec<BeamJson>,
}

pub fn codebook_to_json(codebook: &Codebook) -> String {
    let doc = CodebookJson {
        num_antennas: codebook.num_antennas(),
        phase_bits: codebook.codomain().bits(),
        beams: codebook
            .entries()
            .iter()
            .map(|e| BeamJson {
                role: e.role,
                id: e.id,
                phases: e.beam.phases().to_vec(),
            })
            .collect(),
    };
    let mut text = serde_json::to_string_pretty(&doc).expect("codebook serializes");
    text.push('\n');
    text
}

pub fn codebook_from_json(text: &str) -> Result<Codebook> {
    let doc: CodebookJson = serde_json::from_str(text)?;
    let entries = doc
        .beams
        .into_iter()
        .map(|b| {
            Ok(CodebookEntry {
                role: b.role,
                id: b.id,
                beam: BeamVector::new(b.phases)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Codebook::new(PhaseCodomain::new(doc.phase_bits)?, doc.num_antennas, entries)?)
}

pub fn save_codebook(codebook: &Codebook, path: &Path) -> Result<()> {
    write(path, codebook_to_json(codebook).as_bytes())
}

pub fn load_codebook(path: &Path) -> Result<Codebook> {
    codebook_from_json(&read_string(path)?)
}
