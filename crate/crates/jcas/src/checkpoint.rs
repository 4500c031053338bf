//! Network and agent checkpoints.
//!
//! Binary network layout, little-endian throughout:
//!
//! | field | type |
//! |---|---|
//! | magic `JCNN` | 4 bytes |
//! | format version (1) | u32 |
//! | layer count `L` | u32 |
//! | layer sizes, input first | `L + 1` × u32 |
//! | activation tags (0 relu, 1 scaled tanh, 2 sigmoid, 3 linear) | `L` × u8 |
//! | output scale | f64 |
//! | per layer: weights, then biases | f64 |
//!
//! Weights are stored row-major by input: entry `(i, o)` sits at `i * outputs + o`.
//! The file ends after the last bias. JSON mode holds the same fields by name.
//!
//! An agent checkpoint is a directory with `manifest.json` and one file per
//! network and target network; the extension selects the network encoding.

use std::path::Path;

use jcas_core::agents::{Agent, AgentConfig, AgentKind, NetRole};
use jcas_core::env::BeamEnvConfig;
use jcas_core::nn::{Activation, DenseNet};
use serde::{Deserialize, Serialize};

use crate::error::{read, read_string, write, FormatError, Result};

const MAGIC: &[u8; 4] = b"JCNN";
const VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

pub fn encode_net(net: &DenseNet) -> Vec<u8> {
    let sizes = net.layer_sizes();
    let mut out = Vec::with_capacity(16 + 8 * net.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(net.layers().len() as u32).to_le_bytes());
    for s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend(net.activations().iter().map(|a| a.tag()));
    out.extend_from_slice(&net.scale().to_le_bytes());
    for layer in net.layers() {
        for v in layer.weights().iter().chain(layer.bias()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| corrupt(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

fn corrupt(message: impl Into<String>) -> FormatError {
    FormatError::Checkpoint(message.into())
}

pub fn decode_net(bytes: &[u8]) -> Result<DenseNet> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4)? != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let layers = c.u32()? as usize;
    // Each layer needs at least a size, a tag and one bias.
    if layers == 0 || layers > bytes.len() {
        return Err(corrupt(format!("implausible layer count {layers}")));
    }
    let sizes = (0..=layers)
        .map(|_| c.u32().map(|s| s as usize))
        .collect::<Result<Vec<_>>>()?;
    let activations = c
        .take(layers)?
        .iter()
        .map(|&t| Activation::from_tag(t).ok_or_else(|| corrupt(format!("unknown activation tag {t}"))))
        .collect::<Result<Vec<_>>>()?;
    let scale = c.f64()?;
    let mut params = Vec::with_capacity(layers);
    for w in sizes.windows(2) {
        let count = w[0]
            .checked_mul(w[1])
            .filter(|&n| n <= bytes.len())
            .ok_or_else(|| corrupt("layer too large"))?;
        let weights = (0..count).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        let bias = (0..w[1]).map(|_| c.f64()).collect::<Result<Vec<_>>>()?;
        params.push((weights, bias));
    }
    if c.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    DenseNet::from_parts(&sizes, &activations, scale, params).map_err(|e| corrupt(e.to_string()))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LayerJson {
    weights: Vec<f64>,
    bias: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NetJson {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    scale: f64,
    layers: Vec<LayerJson>,
}

pub fn net_to_json(net: &DenseNet) -> String {
    let doc = NetJson {
        layer_sizes: net.layer_sizes(),
        activations: net.activations(),
        scale: net.scale(),
        layers: net
            .layers()
            .iter()
            .map(|l| LayerJson {
                weights: l.weights().to_vec(),
                bias: l.bias().to_vec(),
            })
            .collect(),
    };
    serde_json::to_string(&doc).expect("network serializes")
}

pub fn net_from_json(text: &str) -> Result<DenseNet> {
    let doc: NetJson = serde_json::from_str(text).map_err(|e| corrupt(e.to_string()))?;
    let params = doc.layers.into_iter().map(|l| (l.weights, l.bias)).collect();
    DenseNet::from_parts(&doc.layer_sizes, &doc.activations, doc.scale, params)
        .map_err(|e| corrupt(e.to_string()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetFormat {
    #[default]
    Binary,
    Json,
}

impl NetFormat {
    pub fn extension(self) -> &'static str {
        match self {
            NetFormat::Binary => "bin",
            NetFormat::Json => "json",
        }
    }

    fn of(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => NetFormat::Json,
            _ => NetFormat::Binary,
        }
    }
}

pub fn save_net(net: &DenseNet, path: &Path) -> Result<()> {
    match NetFormat::of(path) {
        NetFormat::Binary => write(path, &encode_net(net)),
        NetFormat::Json => write(path, net_to_json(net).as_bytes()),
    }
}

pub fn load_net(path: &Path) -> Result<DenseNet> {
    match NetFormat::of(path) {
        NetFormat::Binary => decode_net(&read(path)?),
        NetFormat::Json => net_from_json(&read_string(path)?),
    }
}

/// Where an agent's task came from, so it can be rebuilt from scenario files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TaskSource {
    /// Indices into the scenario's channel file.
    Comm { channel_indices: Vec<usize> },
    /// Index into the scene's sensing targets.
    Sense { target_index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkEntry {
    /// `actor`, `critic1`, `baseline2`, `selector`, ...
    pub role: String,
    pub file: String,
    pub target_file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentManifest {
    pub format_version: u32,
    pub name: String,
    pub kind: AgentKind,
    pub seed: u64,
    pub updates: u64,
    /// Curriculum `λ` and `p_r` at the time of saving.
    pub lambda: f64,
    pub p_r: f64,
    pub config: AgentConfig,
    pub env: BeamEnvConfig,
    pub task_source: TaskSource,
    /// Exported quantized beam.
    pub beam: Vec<f64>,
    pub beam_gain: f64,
    pub networks: Vec<NetworkEntry>,
}

/// Everything in a manifest that the agent itself does not know.
#[derive(Debug, Clone)]
pub struct CheckpointMeta {
    pub name: String,
    pub seed: u64,
    pub env: BeamEnvConfig,
    pub task_source: TaskSource,
    pub beam: Vec<f64>,
    pub beam_gain: f64,
}

pub fn save_agent(agent: &Agent, meta: &CheckpointMeta, dir: &Path, format: NetFormat) -> Result<AgentManifest> {
    std::fs::create_dir_all(dir).map_err(crate::error::io_at(dir))?;
    let ext = format.extension();
    let mut networks = Vec::new();
    for role in agent.roles() {
        let slot = agent.slot(role).expect("listed role exists");
        let name = role.name();
        let entry = NetworkEntry {
            file: format!("{name}.{ext}"),
            target_file: format!("{name}_target.{ext}"),
            role: name,
        };
        save_net(&slot.net, &dir.join(&entry.file))?;
        save_net(&slot.target, &dir.join(&entry.target_file))?;
        networks.push(entry);
    }
    let (lambda, p_r) = agent.curriculum_state();
    let manifest = AgentManifest {
        format_version: VERSION,
        name: meta.name.clone(),
        kind: agent.kind(),
        seed: meta.seed,
        updates: agent.update_count(),
        lambda,
        p_r,
        config: agent.config().clone(),
        env: meta.env.clone(),
        task_source: meta.task_source.clone(),
        beam: meta.beam.clone(),
        beam_gain: meta.beam_gain,
        networks,
    };
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    write(&dir.join(MANIFEST_FILE), text.as_bytes())?;
    Ok(manifest)
}

pub fn load_manifest(dir: &Path) -> Result<AgentManifest> {
    let text = read_string(&dir.join(MANIFEST_FILE))?;
    let manifest: AgentManifest = serde_json::from_str(&text).map_err(|e| corrupt(e.to_string()))?;
    if manifest.format_version != VERSION {
        return Err(corrupt(format!("unsupported manifest version {}", manifest.format_version)));
    }
    if manifest.kind != manifest.config.kind {
        return Err(corrupt("manifest kind disagrees with its agent config"));
    }
    Ok(manifest)
}

pub fn load_agent(dir: &Path) -> Result<(AgentManifest, Agent)> {
    let manifest = load_manifest(dir)?;
    let nets = manifest
        .networks
        .iter()
        .map(|e| {
            let role = NetRole::from_name(&e.role)
                .ok_or_else(|| corrupt(format!("unknown network role {:?}", e.role)))?;
            Ok((role, load_net(&dir.join(&e.file))?, load_net(&dir.join(&e.target_file))?))
        })
        .collect::<Result<Vec<_>>>()?;
    let agent = Agent::from_networks(manifest.config.clone(), manifest.seed, &nets, manifest.updates)
        .map_err(|e| corrupt(e.to_string()))?;
    if agent.roles().len() != nets.len() {
        return Err(corrupt("manifest does not list every network"));
    }
    Ok((manifest, agent))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn net() -> DenseNet {
        DenseNet::mlp(3, &[5, 4], 2, Activation::TanhScaled, std::f64::consts::PI, &mut ChaCha8Rng::seed_from_u64(4)).unwrap()
    }

    #[test]
    fn binary_round_trip_is_bit_exact() {
        let n = net();
        let back = decode_net(&encode_net(&n)).unwrap();
        assert_eq!(back, n);
        let bits = |n: &DenseNet| n.flat_params().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&n));
    }

    #[test]
    fn json_round_trip() {
        let n = net();
        let back = net_from_json(&net_to_json(&n)).unwrap();
        for (a, b) in back.flat_params().iter().zip(n.flat_params()) {
            assert!((a - b).abs() <= 1e-12);
        }
        assert_eq!(back.activations(), n.activations());
    }

    #[test]
    fn corruption_detected() {
        let bytes = encode_net(&net());
        assert!(decode_net(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(decode_net(&extra).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(decode_net(&magic).is_err());
        let mut tag = bytes.clone();
        // Tags follow magic, version, count and four sizes.
        tag[4 + 4 + 4 + 4 * 4] = 9;
        assert!(decode_net(&tag).is_err());
        let mut huge = bytes;
        huge[8..12].copy_from_slice(&u32::MAX.to_le_bytes());
        assert!(decode_net(&huge).is_err());
        assert!(net_from_json("{}").is_err());
    }
}
