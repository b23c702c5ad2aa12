//! Raw 16-bit PCM encoding for waveform playback.

use serde::{Deserialize, Serialize};

/// Sample rate declared for every synthetic waveform.
pub const SAMPLE_RATE: u32 = 8000;

/// Sidecar describing a PCM body.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WaveformMeta {
    pub kind: String,
    pub sample_rate: u32,
    pub length: usize,
    /// Signal value that maps to full scale (`i16::MAX`).
    pub scale: f64,
    /// Segment index of the frame.
    pub k: usize,
    pub encoding: String,
}

/// Common full-scale value for the waveforms of one frame, so that their
/// relative levels survive the conversion.
pub fn frame_scale(waves: &[&[f64]]) -> f64 {
    let peak = waves.iter().flat_map(|w| w.iter()).fold(0.0_f64, |m, v| m.max(v.abs()));
    if peak > 0.0 && peak.is_finite() {
        peak
    } else {
        1.0
    }
}

/// Little-endian signed 16-bit samples of `samples / scale`, clipped.
pub fn encode_pcm16(samples: &[f64], scale: f64) -> Vec<u8> {
    let full = i16::MAX as f64;
    samples
        .iter()
        .flat_map(|v| ((v / scale * full).round().clamp(-full, full) as i16).to_le_bytes())
        .collect()
}
