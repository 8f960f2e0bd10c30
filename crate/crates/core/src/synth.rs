//! Synthetic oddball recordings.
//!
//! Background per channel is white noise, a 10 Hz alpha rhythm with a
//! random phase, and a slow drift built from three AR(1) processes with
//! time constants spread over two decades (a cheap 1/f-like spectrum).
//! Every target stimulus adds a Gaussian positive deflection whose
//! amplitude and latency are jittered per event and scaled per channel by
//! the profile's topography.
//!
//! All samples are rounded to `f32` precision so a generated recording
//! survives the on-disk format unchanged.

use std::f64::consts::PI;

use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataio::{
    AnnotationLog, EventKind, EventMarker, LogEvent, RawRecording, RsvpPlan, SessionMode,
};
use crate::error::{Error, Result};
use crate::planner::{rng_from_seed, timeline_samples};

pub const SAMPLE_RATE_HZ: u32 = 1000;
pub const PRE_ROLL_S: f64 = 2.0;
pub const POST_ROLL_S: f64 = 2.5;

/// 32-channel 10-20 montage with approximate 2-D scalp positions (x to the
/// right ear, y to the nose, unit head radius).
pub const MONTAGE: [(&str, f64, f64); 32] = [
    ("Fp1", -0.31, 0.95),
    ("Fz", 0.0, 0.5),
    ("F3", -0.4, 0.55),
    ("F7", -0.81, 0.59),
    ("FT9", -1.0, 0.3),
    ("FC5", -0.65, 0.25),
    ("FC1", -0.25, 0.25),
    ("C3", -0.5, 0.0),
    ("T7", -1.0, 0.0),
    ("TP9", -1.0, -0.3),
    ("CP5", -0.65, -0.25),
    ("CP1", -0.25, -0.25),
    ("Pz", 0.0, -0.5),
    ("P3", -0.4, -0.55),
    ("P7", -0.81, -0.59),
    ("O1", -0.31, -0.95),
    ("Oz", 0.0, -1.0),
    ("O2", 0.31, -0.95),
    ("P4", 0.4, -0.55),
    ("P8", 0.81, -0.59),
    ("TP10", 1.0, -0.3),
    ("CP6", 0.65, -0.25),
    ("CP2", 0.25, -0.25),
    ("Cz", 0.0, 0.0),
    ("C4", 0.5, 0.0),
    ("T8", 1.0, 0.0),
    ("FT10", 1.0, 0.3),
    ("FC6", 0.65, 0.25),
    ("FC2", 0.25, 0.25),
    ("F4", 0.4, 0.55),
    ("F8", 0.81, 0.59),
    ("Fp2", 0.31, 0.95),
];

pub const PARIETAL_CHANNEL: &str = "Pz";

const TOPOGRAPHY_WIDTH: f64 = 0.45;
const DRIFT_TAUS_S: [f64; 3] = [0.1, 1.0, 10.0];

pub fn montage_labels() -> Vec<String> {
    MONTAGE.iter().map(|(l, _, _)| l.to_string()).collect()
}

pub fn channel_index(label: &str) -> Option<usize> {
    MONTAGE.iter().position(|(l, _, _)| *l == label)
}

/// Gaussian falloff around Pz, 1.0 at Pz.
pub fn default_topography() -> Vec<f64> {
    let (_, px, py) = MONTAGE[channel_index(PARIETAL_CHANNEL).unwrap()];
    MONTAGE
        .iter()
        .map(|(_, x, y)| {
            let d2 = (x - px).powi(2) + (y - py).powi(2);
            (-d2 / (2.0 * TOPOGRAPHY_WIDTH * TOPOGRAPHY_WIDTH)).exp()
        })
        .collect()
}

/// Per-user response and noise parameters. Magnitudes are in microvolts and
/// seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UserProfile {
    pub p300_amp_uv: f64,
    pub p300_latency_s: f64,
    pub p300_width_s: f64,
    pub latency_jitter_sd_s: f64,
    pub amp_jitter_rel_sd: f64,
    pub noise_sd_uv: f64,
    pub alpha_amp_uv: f64,
    pub drift_sd_uv: f64,
    /// Probability a target is answered with a button press.
    pub button_hit_rate: f64,
    pub topography: Vec<f64>,
    pub seed: u64,
}

impl Default for UserProfile {
    fn default() -> Self {
        Self {
            p300_amp_uv: 8.0,
            p300_latency_s: 0.4,
            p300_width_s: 0.075,
            latency_jitter_sd_s: 0.05,
            amp_jitter_rel_sd: 0.3,
            noise_sd_uv: 5.0,
            alpha_amp_uv: 4.0,
            drift_sd_uv: 3.0,
            button_hit_rate: 0.9,
            topography: default_topography(),
            seed: 0,
        }
    }
}

impl UserProfile {
    pub fn expert(seed: u64) -> Self {
        Self {
            p300_amp_uv: 8.0,
            latency_jitter_sd_s: 0.03,
            seed,
            ..Default::default()
        }
    }

    pub fn novice(seed: u64) -> Self {
        Self {
            p300_amp_uv: 4.0,
            latency_jitter_sd_s: 0.06,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sds = [
            self.latency_jitter_sd_s,
            self.amp_jitter_rel_sd,
            self.alpha_amp_uv,
            self.drift_sd_uv,
            self.p300_amp_uv,
        ];
        if sds.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Precondition("profile amplitudes and SDs must be non-negative".into()));
        }
        if !(self.noise_sd_uv > 0.0 && self.p300_width_s > 0.0) {
            return Err(Error::Precondition("noise_sd_uv and p300_width_s must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.button_hit_rate) {
            return Err(Error::Precondition("button_hit_rate must lie in [0, 1]".into()));
        }
        if self.topography.len() != MONTAGE.len() {
            return Err(Error::Precondition(format!(
                "topography has {} weights for {} channels",
                self.topography.len(),
                MONTAGE.len()
            )));
        }
        if self.topography.iter().any(|w| !(0.0..=1.0).contains(w))
            || !self.topography.contains(&1.0)
        {
            return Err(Error::Precondition(
                "topography weights must lie in [0, 1] with at least one equal to 1".into(),
            ));
        }
        Ok(())
    }
}

/// Gaussian ERP template.
pub fn p300_template(t_s: f64, amp: f64, latency_s: f64, width_s: f64) -> f64 {
    let z = (t_s - latency_s) / width_s;
    amp * (-0.5 * z * z).exp()
}

/// Generated session: recording, stimulus markers at the recording rate, and
/// the button presses the simulated user made.
#[derive(Debug, Clone)]
pub struct SimulatedSession {
    pub recording: RawRecording,
    pub markers: Vec<EventMarker>,
    pub buttons: AnnotationLog,
}

fn session_rng(profile_seed: u64, stream: u64) -> rand_xoshiro::Xoshiro256PlusPlus {
    rng_from_seed(profile_seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ stream)
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Background activity only, `n_samples` long on the standard montage.
pub fn background(profile: &UserProfile, n_samples: usize, stream: u64) -> Result<RawRecording> {
    profile.validate()?;
    let mut rng = session_rng(profile.seed, stream);
    let fs = SAMPLE_RATE_HZ as f64;
    let mut samples = Array2::zeros((MONTAGE.len(), n_samples));

    let drift_sd = profile.drift_sd_uv / (DRIFT_TAUS_S.len() as f64).sqrt();
    let rhos: Vec<f64> = DRIFT_TAUS_S.iter().map(|tau| (-1.0 / (tau * fs)).exp()).collect();

    for mut row in samples.rows_mut() {
        let alpha_freq = 10.0 + 0.5 * (rng.random::<f64>() - 0.5);
        let phase = 2.0 * PI * rng.random::<f64>();
        let step = 2.0 * PI * alpha_freq / fs;
        let mut drift: Vec<f64> = rhos.iter().map(|_| drift_sd * normal(&mut rng)).collect();
        let innov: Vec<f64> = rhos.iter().map(|r| drift_sd * (1.0 - r * r).sqrt()).collect();
        for (t, v) in row.iter_mut().enumerate() {
            let mut x = profile.noise_sd_uv * normal(&mut rng);
            x += profile.alpha_amp_uv * (phase + step * t as f64).sin();
            for ((d, r), s) in drift.iter_mut().zip(&rhos).zip(&innov) {
                *d = r * *d + s * normal(&mut rng);
                x += *d;
            }
            *v = x;
        }
    }
    RawRecording::new(SAMPLE_RATE_HZ, montage_labels(), samples)
}

/// Renders a full RSVP session for `plan` as seen through `profile`.
pub fn simulate_recording(plan: &RsvpPlan, profile: &UserProfile) -> Result<SimulatedSession> {
    plan.validate()?;
    profile.validate()?;
    let fs = SAMPLE_RATE_HZ as f64;
    let pre = (PRE_ROLL_S * fs) as usize;
    let post = (POST_ROLL_S * fs) as usize;
    let onsets: Vec<usize> = timeline_samples(plan, SAMPLE_RATE_HZ)
        .into_iter()
        .map(|s| s + pre)
        .collect();
    let n_samples = onsets.last().copied().unwrap_or(pre) + post;

    let mut rec = background(profile, n_samples, plan.seed)?;
    let mut rng = session_rng(profile.seed, plan.seed ^ 0xE5F0_0D5E_ED00_0001);

    let mut markers = Vec::with_capacity(onsets.len());
    let mut events = Vec::with_capacity(onsets.len() + 64);
    let mut presses = Vec::new();
    let extent = (profile.p300_latency_s + 6.0 * profile.p300_width_s + 4.0 * profile.latency_jitter_sd_s) * fs;
    let extent = extent.ceil() as usize;

    let items = plan.blocks.iter().enumerate().flat_map(|(b, block)| block.iter().map(move |i| (b, i)));
    for ((block_index, item), &onset) in items.zip(&onsets) {
        markers.push(EventMarker {
            onset_sample: onset,
            image_id: item.image_id.clone(),
            is_target: item.is_target,
            block_index,
            query_id: plan.query_id.clone(),
        });
        let t_ms = (onset - pre) as u64;
        events.push(LogEvent::new(t_ms, EventKind::Show, Some(&item.image_id), Some(block_index as u32)));
        if !item.is_target {
            continue;
        }
        let amp = (profile.p300_amp_uv * (1.0 + profile.amp_jitter_rel_sd * normal(&mut rng))).max(0.0);
        let latency = profile.p300_latency_s + profile.latency_jitter_sd_s * normal(&mut rng);
        let end = (onset + extent).min(n_samples);
        for (c, mut row) in rec.samples.rows_mut().into_iter().enumerate() {
            let w = profile.topography[c];
            if w == 0.0 {
                continue;
            }
            for t in onset..end {
                let dt = (t - onset) as f64 / fs;
                row[t] += w * p300_template(dt, amp, latency, profile.p300_width_s);
            }
        }
        if rng.random::<f64>() < profile.button_hit_rate {
            let rt = (0.45 + 0.05 * normal(&mut rng)).max(0.15);
            presses.push((t_ms + (rt * 1000.0).round() as u64, item.image_id.clone(), block_index));
        }
    }
    rec.samples.mapv_inplace(|v| v as f32 as f64);

    for (t_ms, id, block) in presses {
        events.push(LogEvent::new(t_ms, EventKind::Button, Some(&id), Some(block as u32)));
    }
    // Stable sort keeps a press after the show event that shares its millisecond.
    events.sort_by_key(|e| e.t_ms);
    let duration_s = (onsets.last().map_or(0, |&o| o - pre + post) as f64 / 1000.0).ceil() as u32;

    Ok(SimulatedSession {
        recording: rec,
        markers,
        buttons: AnnotationLog {
            session_id: format!("{}-seed{}", plan.query_id, profile.seed),
            mode: SessionMode::Rsvp,
            rate_hz: plan.rate_hz,
            duration_s,
            events,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::{build_plan, synthetic_ids};

    #[test]
    fn template_closed_forms() {
        assert_eq!(p300_template(0.4, 7.0, 0.4, 0.075), 7.0);
        assert_eq!(p300_template(0.1, 0.0, 0.4, 0.075), 0.0);
        let v = p300_template(0.4 + 0.075, 2.0, 0.4, 0.075);
        assert!((v - 2.0 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((v / 2.0 - 0.6065).abs() < 1e-4);
    }

    #[test]
    fn presets_are_valid() {
        let t = default_topography();
        assert_eq!(t[channel_index("Pz").unwrap()], 1.0);
        UserProfile::expert(1).validate().unwrap();
        UserProfile::novice(1).validate().unwrap();
        let bad = UserProfile { topography: vec![0.5; 32], ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn marker_spacing_matches_rate() {
        let (t, d) = synthetic_ids("q1");
        let plan = build_plan("q1", &t, &d, 5, 7, 5.0).unwrap();
        let s = simulate_recording(&plan, &UserProfile::expert(3)).unwrap();
        assert_eq!(s.markers.len(), 1000);
        for block in s.markers.chunks(200) {
            assert!(block.windows(2).all(|w| w[1].onset_sample - w[0].onset_sample == 200));
        }
        assert!(s.markers[0].onset_sample >= 2000);
        assert!(s.markers.last().unwrap().onset_sample + 2000 <= s.recording.n_samples());
        s.buttons.validate().unwrap();
        assert!(s.buttons.events.iter().all(|e| e.t_ms <= s.buttons.deadline_ms()));
    }

    #[test]
    fn generation_is_deterministic() {
        let (t, d) = synthetic_ids("q2");
        let plan = build_plan("q2", &t, &d, 10, 1, 5.0).unwrap();
        let a = simulate_recording(&plan, &UserProfile::novice(9)).unwrap();
        let b = simulate_recording(&plan, &UserProfile::novice(9)).unwrap();
        assert_eq!(a.recording, b.recording);
        assert_eq!(a.buttons, b.buttons);
        let c = simulate_recording(&plan, &UserProfile::novice(10)).unwrap();
        assert_ne!(a.recording, c.recording);
    }
}
