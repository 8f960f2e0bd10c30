//! EEG preprocessing: average re-reference, boxcar decimation, zero-phase
//! band-pass, stimulus-locked epochs and windowed-mean features.
//!
//! Every stage is linear in the signal. Summation order is fixed so results
//! are bitwise reproducible for a given configuration.

use ndarray::{s, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::dataio::{Epoch, EventMarker, FeatureMatrix, FeatureVector, RawRecording};
use crate::error::{Error, RejectedMarker, Result};
use crate::filter::SosFilter;

/// Butterworth order of each band edge.
pub const BAND_EDGE_ORDER: usize = 4;

/// How the feature span is sized relative to the window grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSpan {
    /// Span grows to `(n_windows - 1) * hop + window_len` samples so every
    /// window is complete (204 samples with the defaults).
    #[default]
    Extended,
    /// Span is cut at `window_end_s`; windows running past it average only
    /// the samples that remain.
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub decim_factor: usize,
    pub band_lo_hz: f64,
    pub band_hi_hz: f64,
    pub epoch_pre_s: f64,
    pub epoch_post_s: f64,
    pub window_start_s: f64,
    /// Only used with [`WindowSpan::Truncated`].
    pub window_end_s: f64,
    pub n_windows: usize,
    pub window_len: usize,
    pub hop: usize,
    pub span: WindowSpan,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            decim_factor: 4,
            band_lo_hz: 0.1,
            band_hi_hz: 20.0,
            epoch_pre_s: 1.0,
            epoch_post_s: 2.0,
            window_start_s: 0.2,
            window_end_s: 1.0,
            n_windows: 16,
            window_len: 24,
            hop: 12,
            span: WindowSpan::Extended,
        }
    }
}

impl PipelineConfig {
    /// Checks the configuration against a raw sampling rate.
    pub fn validate(&self, raw_rate_hz: u32) -> Result<()> {
        if self.decim_factor < 1 {
            return Err(Error::Precondition("decim_factor must be at least 1".into()));
        }
        if self.window_len == 0 || self.n_windows == 0 {
            return Err(Error::Precondition("window_len and n_windows must be positive".into()));
        }
        if self.hop * 2 != self.window_len {
            return Err(Error::Precondition(format!(
                "hop ({}) must be half the window length ({})",
                self.hop, self.window_len
            )));
        }
        let nyquist = raw_rate_hz as f64 / self.decim_factor as f64 / 2.0;
        if !(self.band_lo_hz > 0.0 && self.band_lo_hz < self.band_hi_hz && self.band_hi_hz < nyquist) {
            return Err(Error::Precondition(format!(
                "band {}..{} Hz does not fit below the decimated Nyquist of {nyquist} Hz",
                self.band_lo_hz, self.band_hi_hz
            )));
        }
        if self.epoch_pre_s < 0.0 || self.epoch_post_s <= 0.0 {
            return Err(Error::Precondition("epoch bounds must be non-negative".into()));
        }
        Ok(())
    }

    pub fn n_features(&self, n_channels: usize) -> usize {
        n_channels * self.n_windows
    }

    fn grid_span(&self) -> usize {
        (self.n_windows - 1) * self.hop + self.window_len
    }
}

/// Subtracts the cross-channel mean at every sample.
pub fn rereference_average(rec: &RawRecording) -> Result<RawRecording> {
    let n_ch = rec.n_channels();
    if n_ch < 2 {
        return Err(Error::Precondition(format!(
            "average re-reference needs at least 2 channels, got {n_ch}"
        )));
    }
    let mut mean = vec![0.0; rec.n_samples()];
    for row in rec.samples.rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    let inv = 1.0 / n_ch as f64;
    mean.iter_mut().for_each(|m| *m *= inv);
    let mut out = rec.samples.clone();
    for mut row in out.rows_mut() {
        row.iter_mut().zip(&mean).for_each(|(v, m)| *v -= m);
    }
    Ok(RawRecording {
        samples: out,
        ..rec.clone()
    })
}

/// Mean of non-overlapping groups of `factor` samples. A tail shorter than
/// `factor` is dropped.
pub fn decimate(rec: &RawRecording, factor: usize) -> Result<RawRecording> {
    if factor < 1 {
        return Err(Error::Precondition("decimation factor must be at least 1".into()));
    }
    if !(rec.sample_rate_hz as usize).is_multiple_of(factor) {
        return Err(Error::Precondition(format!(
            "sample rate {} Hz is not divisible by {factor}",
            rec.sample_rate_hz
        )));
    }
    let n_out = rec.n_samples() / factor;
    let inv = 1.0 / factor as f64;
    let mut out = Array2::zeros((rec.n_channels(), n_out));
    for (src, mut dst) in rec.samples.rows().into_iter().zip(out.rows_mut()) {
        let src = src.as_slice().expect("recordings are stored contiguously");
        for (d, group) in dst.iter_mut().zip(src.chunks_exact(factor)) {
            *d = group.iter().sum::<f64>() * inv;
        }
    }
    Ok(RawRecording {
        sample_rate_hz: rec.sample_rate_hz / factor as u32,
        channel_labels: rec.channel_labels.clone(),
        samples: out,
    })
}

/// Zero-phase Butterworth band-pass applied to every channel.
pub fn bandpass(rec: &RawRecording, lo_hz: f64, hi_hz: f64) -> Result<RawRecording> {
    let filter =
        SosFilter::butterworth_bandpass(BAND_EDGE_ORDER, lo_hz, hi_hz, rec.sample_rate_hz as f64)?;
    let mut out = Array2::zeros(rec.samples.raw_dim());
    for (src, mut dst) in rec.samples.rows().into_iter().zip(out.rows_mut()) {
        let y = filter.filtfilt(src.as_slice().expect("recordings are stored contiguously"))?;
        dst.iter_mut().zip(y).for_each(|(d, v)| *d = v);
    }
    Ok(RawRecording {
        samples: out,
        ..rec.clone()
    })
}

/// Cuts one epoch per marker. Markers index samples of `rec`. Every marker
/// outside the recording is reported at once.
pub fn extract_epochs(rec: &RawRecording, markers: &[EventMarker], cfg: &PipelineConfig) -> Result<Vec<Epoch>> {
    let fs = rec.sample_rate_hz as f64;
    let pre = (cfg.epoch_pre_s * fs).round() as usize;
    let post = (cfg.epoch_post_s * fs).round() as usize;
    let n = rec.n_samples();

    let rejected: Vec<RejectedMarker> = markers
        .iter()
        .enumerate()
        .filter(|(_, m)| m.onset_sample < pre || m.onset_sample + post > n)
        .map(|(index, m)| RejectedMarker {
            index,
            image_id: m.image_id.clone(),
            onset_sample: m.onset_sample,
        })
        .collect();
    if !rejected.is_empty() {
        return Err(Error::EpochBounds(rejected));
    }

    Ok(markers
        .iter()
        .map(|m| Epoch {
            image_id: m.image_id.clone(),
            is_target: m.is_target,
            data: rec
                .samples
                .slice(s![.., m.onset_sample - pre..m.onset_sample + post])
                .to_owned(),
            sample_rate_hz: rec.sample_rate_hz,
        })
        .collect())
}

/// Windowed means over the post-stimulus span, channels concatenated in
/// recording order.
pub fn epoch_features(epoch: &Epoch, cfg: &PipelineConfig) -> Result<FeatureVector> {
    let fs = epoch.sample_rate_hz as f64;
    let start = ((cfg.epoch_pre_s + cfg.window_start_s) * fs).round() as usize;
    let span = match cfg.span {
        WindowSpan::Extended => cfg.grid_span(),
        WindowSpan::Truncated => ((cfg.window_end_s - cfg.window_start_s) * fs).round() as usize,
    };
    let n_t = epoch.data.ncols();
    if start + span > n_t {
        return Err(Error::Precondition(format!(
            "epoch of {n_t} samples is too short for a {span}-sample span starting at {start}"
        )));
    }
    if cfg.span == WindowSpan::Truncated && (cfg.n_windows - 1) * cfg.hop >= span {
        return Err(Error::Precondition(format!(
            "truncated span of {span} samples leaves window {} empty",
            cfg.n_windows
        )));
    }

    let mut values = Vec::with_capacity(epoch.data.nrows() * cfg.n_windows);
    for row in epoch.data.rows() {
        let region = row.slice(s![start..start + span]);
        for w in 0..cfg.n_windows {
            let lo = w * cfg.hop;
            let hi = (lo + cfg.window_len).min(span);
            let window = region.slice(s![lo..hi]);
            values.push(window.sum() / (hi - lo) as f64);
        }
    }
    Ok(FeatureVector {
        image_id: epoch.image_id.clone(),
        is_target: epoch.is_target,
        values,
    })
}

/// Full chain from a raw recording to one feature row per marker. Marker
/// onsets are given at the raw rate and rescaled by the decimation factor.
pub fn preprocess_session(
    rec: &RawRecording,
    markers: &[EventMarker],
    cfg: &PipelineConfig,
) -> Result<FeatureMatrix> {
    cfg.validate(rec.sample_rate_hz)?;
    let n_dims = cfg.n_features(rec.n_channels());
    if markers.is_empty() {
        return Ok(FeatureMatrix::empty(n_dims));
    }
    let filtered = {
        let rr = rereference_average(rec)?;
        let dec = decimate(&rr, cfg.decim_factor)?;
        bandpass(&dec, cfg.band_lo_hz, cfg.band_hi_hz)?
    };
    let rescaled: Vec<EventMarker> = markers
        .iter()
        .map(|m| EventMarker {
            onset_sample: m.onset_sample / cfg.decim_factor,
            ..m.clone()
        })
        .collect();
    let epochs = extract_epochs(&filtered, &rescaled, cfg)?;
    let vectors = epochs
        .iter()
        .map(|e| epoch_features(e, cfg))
        .collect::<Result<Vec<_>>>()?;
    FeatureMatrix::from_vectors(vectors, n_dims)
}

/// Average of the epochs of one class for a single channel; used for
/// grand-average ERP inspection.
pub fn class_average(epochs: &[Epoch], channel: usize, targets: bool) -> Option<Vec<f64>> {
    let picked: Vec<&Epoch> = epochs.iter().filter(|e| e.is_target == targets).collect();
    let first = picked.first()?;
    let mut acc = vec![0.0; first.data.ncols()];
    for e in &picked {
        acc.iter_mut()
            .zip(e.data.index_axis(Axis(0), channel))
            .for_each(|(a, v)| *a += v);
    }
    let inv = 1.0 / picked.len() as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    Some(acc)
}
