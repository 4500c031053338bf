//! Analog beamformers, phase quantization, array response and gains.

use alloc::vec::Vec;
use core::f64::consts::{PI, TAU};

use num_complex::Complex64;
// Unused when std is in the dependency graph (its float methods take over).
#[allow(unused_imports)]
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::math::{circular_distance, wrap_angle};

/// Phase-shifter settings of one analog beam. The implied complex weights are
/// `e^{jθ_m} / √M`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamVector {
    phases: Vec<f64>,
}

impl BeamVector {
    /// Phases are normalized into `(-π, π]`.
    pub fn new(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Empty("beam phases"));
        }
        if phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("beam phases"));
        }
        Ok(BeamVector {
            phases: phases.into_iter().map(wrap_angle).collect(),
        })
    }

    pub fn from_slice(phases: &[f64]) -> Result<Self> {
        Self::new(phases.to_vec())
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn num_antennas(&self) -> usize {
        self.phases.len()
    }

    pub fn weights(&self) -> Vec<Complex64> {
        beam_weights(self)
    }
}

pub fn beam_weights(beam: &BeamVector) -> Vec<Complex64> {
    let norm = 1.0 / (beam.num_antennas() as f64).sqrt();
    beam.phases
        .iter()
        .map(|&p| Complex64::from_polar(norm, p))
        .collect()
}

/// The `2^r` uniformly spaced phase values of an `r`-bit shifter,
/// `{-π + 2πk/2^r : k = 1..2^r}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseCodomain {
    bits: u32,
}

impl PhaseCodomain {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > 16 {
            return Err(Error::InvalidArgument(alloc::format!(
                "phase resolution must be 1..=16 bits, got {bits}"
            )));
        }
        Ok(PhaseCodomain { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn len(&self) -> usize {
        1usize << self.bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn step(&self) -> f64 {
        TAU / self.len() as f64
    }

    /// Value at index `k` in `1..=2^r`.
    pub fn value(&self, k: usize) -> f64 {
        if k == self.len() {
            PI
        } else {
            -PI + self.step() * k as f64
        }
    }

    pub fn values(&self) -> Vec<f64> {
        (1..=self.len()).map(|k| self.value(k)).collect()
    }

    pub fn contains(&self, phase: f64) -> bool {
        let t = (phase + PI) / self.step();
        let k = t.round();
        (t - k).abs() < 1e-9 && k >= 1.0 && k <= self.len() as f64
    }

    /// Circularly nearest codomain value; ties go to the smaller value.
    pub fn nearest(&self, phase: f64) -> f64 {
        let n = self.len();
        let x = wrap_angle(phase);
        let t = (x + PI) / self.step();
        let lo = t.floor() as i64;
        let mut best = f64::NAN;
        let mut best_d = f64::INFINITY;
        for k in [lo - 1, lo, lo + 1, lo + 2] {
            let idx = ((k - 1).rem_euclid(n as i64) + 1) as usize;
            let v = self.value(idx);
            let d = circular_distance(x, v);
            if d < best_d || (d == best_d && v < best) {
                best = v;
                best_d = d;
            }
        }
        best
    }
}

pub fn quantize(beam: &BeamVector, codomain: &PhaseCodomain) -> BeamVector {
    BeamVector {
        phases: beam.phases.iter().map(|&p| codomain.nearest(p)).collect(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelVector {
    entries: Vec<Complex64>,
}

impl ChannelVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Empty("channel vector"));
        }
        if entries.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::NonFinite("channel vector"));
        }
        Ok(ChannelVector { entries })
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.entries.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Element positions along the array axis and the carrier wavelength, both in
/// meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    positions: Vec<f64>,
    wavelength: f64,
}

impl ArrayGeometry {
    pub fn new(positions: Vec<f64>, wavelength: f64) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty("array positions"));
        }
        if positions.iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("array positions"));
        }
        if !(wavelength.is_finite() && wavelength > 0.0) {
            return Err(Error::InvalidArgument("wavelength must be positive".into()));
        }
        Ok(ArrayGeometry {
            positions,
            wavelength,
        })
    }

    /// Uniform linear array with half-wavelength spacing.
    pub fn half_wavelength(num_antennas: usize, wavelength: f64) -> Result<Self> {
        let positions = (0..num_antennas)
            .map(|m| m as f64 * wavelength / 2.0)
            .collect();
        Self::new(positions, wavelength)
    }

    pub fn positions(&self) -> &[f64] {
        &self.positions
    }

    pub fn wavelength(&self) -> f64 {
        self.wavelength
    }

    pub fn num_antennas(&self) -> usize {
        self.positions.len()
    }

    /// Phase profile `2π d_m sin θ / λ` of a plane wave from `theta`.
    pub fn steering_phases(&self, theta: f64) -> Vec<f64> {
        let k = TAU * theta.sin() / self.wavelength;
        self.positions.iter().map(|d| k * d).collect()
    }

    /// Beam whose phases match the array response at `theta`.
    pub fn matched_beam(&self, theta: f64) -> BeamVector {
        BeamVector {
            phases: self
                .steering_phases(theta)
                .into_iter()
                .map(wrap_angle)
                .collect(),
        }
    }
}

pub fn array_response(geom: &ArrayGeometry, theta: f64) -> Vec<Complex64> {
    geom.steering_phases(theta)
        .into_iter()
        .map(Complex64::cis)
        .collect()
}

/// `w^H x` for the beam's implied weights.
fn inner(beam: &BeamVector, x: &[Complex64]) -> Complex64 {
    let norm = 1.0 / (beam.num_antennas() as f64).sqrt();
    let sum: Complex64 = beam
        .phases
        .iter()
        .zip(x)
        .map(|(&p, &h)| Complex64::cis(-p) * h)
        .sum();
    sum * norm
}

/// `|w^H h|²`.
pub fn comm_gain(beam: &BeamVector, channel: &ChannelVector) -> Result<f64> {
    check_len("channel", beam.num_antennas(), channel.len())?;
    Ok(inner(beam, &channel.entries).norm_sqr())
}

/// Mean of [`comm_gain`] over a channel set.
pub fn avg_comm_gain(beam: &BeamVector, channels: &[ChannelVector]) -> Result<f64> {
    if channels.is_empty() {
        return Err(Error::Empty("channel set"));
    }
    let mut total = 0.0;
    for h in channels {
        total += comm_gain(beam, h)?;
    }
    Ok(total / channels.len() as f64)
}

/// `|w^H b_r(θ)|²` (squared, on the same scale as the communication gain).
pub fn sensing_gain(beam: &BeamVector, geom: &ArrayGeometry, theta: f64) -> Result<f64> {
    check_len("array geometry", beam.num_antennas(), geom.num_antennas())?;
    Ok(inner(beam, &array_response(geom, theta)).norm_sqr())
}

/// `n` angles evenly covering `(-π, π]`: `-π + 2πk/n` for `k = 1..n`.
pub fn angle_grid(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|k| if k == n { PI } else { -PI + TAU * k as f64 / n as f64 })
        .collect()
}

/// Sensing gain over `grid`, normalized by its analytic maximum `M`.
pub fn beam_pattern(
    beam: &BeamVector,
    geom: &ArrayGeometry,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if grid.is_empty() {
        return Err(Error::Empty("angle grid"));
    }
    let m = beam.num_antennas() as f64;
    grid.iter()
        .map(|&theta| Ok((theta, sensing_gain(beam, geom, theta)? / m)))
        .collect()
}

/// Index of the largest pattern value (first one on ties).
pub fn pattern_peak(pattern: &[(f64, f64)]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(_, g)) in pattern.iter().enumerate() {
        if best.is_none_or(|(_, b)| g > b) {
            best = Some((i, g));
        }
    }
    best.map(|(i, _)| i)
}
