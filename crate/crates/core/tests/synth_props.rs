use rsvp_core::dataio::{save_recording, EventMarker, RsvpPlan};
use rsvp_core::metrics::welch_t_test;
use rsvp_core::pipeline::{bandpass, class_average, decimate, extract_epochs, rereference_average, PipelineConfig};
use rsvp_core::planner::{build_plan, synthetic_ids, timeline};
use rsvp_core::synth::{channel_index, simulate_recording, UserProfile};
use tempfile::tempdir;

fn plan(seed: u64, rate: u32) -> RsvpPlan {
    let (t, d) = synthetic_ids("q1");
    build_plan("q1", &t, &d, rate, seed, 5.0).unwrap()
}

fn epochs_for(plan: &RsvpPlan, profile: &UserProfile) -> Vec<rsvp_core::dataio::Epoch> {
    let cfg = PipelineConfig::default();
    let s = simulate_recording(plan, profile).unwrap();
    let rec = bandpass(&decimate(&rereference_average(&s.recording).unwrap(), 4).unwrap(), 0.1, 20.0).unwrap();
    let markers: Vec<EventMarker> = s
        .markers
        .iter()
        .map(|m| EventMarker { onset_sample: m.onset_sample / 4, ..m.clone() })
        .collect();
    extract_epochs(&rec, &markers, &cfg).unwrap()
}

/// Mean of the parietal channel over 300-500 ms after onset, per epoch.
fn parietal_window_means(epochs: &[rsvp_core::dataio::Epoch], targets: bool) -> Vec<f64> {
    let pz = channel_index("Pz").unwrap();
    let (a, b) = (250 + 75, 250 + 125);
    epochs
        .iter()
        .filter(|e| e.is_target == targets)
        .map(|e| e.data.row(pz).slice(ndarray::s![a..b]).mean().unwrap())
        .collect()
}

#[test]
fn null_user_parietal_amplitudes_do_not_separate() {
    let mut ps: Vec<f64> = (0..40u64)
        .map(|seed| {
            let profile = UserProfile { p300_amp_uv: 0.0, ..UserProfile::expert(seed) };
            let epochs = epochs_for(&plan(seed + 1000, 5), &profile);
            let t = parietal_window_means(&epochs, true);
            let d = parietal_window_means(&epochs, false);
            welch_t_test(&t, &d).unwrap().p
        })
        .collect();
    ps.sort_by(f64::total_cmp);
    // Kolmogorov-Smirnov distance to U(0, 1); 0.258 is the 1% critical value for n = 40.
    let n = ps.len() as f64;
    let ks = ps
        .iter()
        .enumerate()
        .map(|(i, &p)| ((i as f64 + 1.0) / n - p).max(p - i as f64 / n))
        .fold(0.0, f64::max);
    assert!(ks < 0.258, "p-values not uniform: KS {ks}, {ps:?}");
}

#[test]
fn high_snr_average_peaks_near_400_ms() {
    let profile = UserProfile { p300_amp_uv: 10.0, noise_sd_uv: 2.0, ..UserProfile::expert(5) };
    let epochs = epochs_for(&plan(11, 5), &profile);
    let pz = channel_index("Pz").unwrap();
    let avg = class_average(&epochs, pz, true).unwrap();
    let peak = (0..avg.len()).max_by(|&a, &b| avg[a].total_cmp(&avg[b])).unwrap();
    let peak_ms = (peak as f64 / 250.0 - 1.0) * 1000.0;
    assert!((peak_ms - 400.0).abs() <= 60.0, "grand average peaks at {peak_ms} ms");
    let distractors = class_average(&epochs, pz, false).unwrap();
    assert!(avg[peak] > 5.0 * distractors[peak].abs().max(0.5));
}

#[test]
fn same_inputs_give_identical_bytes() {
    let p = plan(3, 10);
    let profile = UserProfile::novice(17);
    let a = simulate_recording(&p, &profile).unwrap();
    let b = simulate_recording(&p, &profile).unwrap();
    assert_eq!(a.recording, b.recording);
    assert_eq!(a.markers, b.markers);
    assert_eq!(a.buttons, b.buttons);
    let dir = tempdir().unwrap();
    save_recording(&a.recording, &dir.path().join("a")).unwrap();
    save_recording(&b.recording, &dir.path().join("b")).unwrap();
    for ext in ["rec.json", "rec.f32"] {
        let x = std::fs::read(dir.path().join(format!("a.{ext}"))).unwrap();
        let y = std::fs::read(dir.path().join(format!("b.{ext}"))).unwrap();
        assert!(x == y, "{ext} differs");
    }
    let other = simulate_recording(&p, &UserProfile::novice(18)).unwrap();
    assert_ne!(other.recording, a.recording);
}

#[test]
fn markers_follow_the_plan_and_buttons_follow_targets() {
    for rate in [5, 10] {
        let p = plan(8, rate);
        let s = simulate_recording(&p, &UserProfile::expert(2)).unwrap();
        assert_eq!(s.markers.len(), 1000);
        let ids: Vec<&str> = s.markers.iter().map(|m| m.image_id.as_str()).collect();
        let planned: Vec<&str> = p.display_order().map(|i| i.image_id.as_str()).collect();
        assert_eq!(ids, planned);
        for block in 0..5 {
            let in_block: Vec<&EventMarker> = s.markers.iter().filter(|m| m.block_index == block).collect();
            assert_eq!(in_block.len(), 200);
            assert_eq!(in_block.iter().filter(|m| m.is_target).count(), 10);
            let step = 1000 / rate as usize;
            assert!(in_block.windows(2).all(|w| w[1].onset_sample - w[0].onset_sample == step));
        }
        // Epoch bounds hold for every marker thanks to the pre/post roll.
        let first = s.markers.first().unwrap().onset_sample;
        let last = s.markers.last().unwrap().onset_sample;
        assert!(first >= 1000 && last + 2000 <= s.recording.n_samples());
        s.buttons.validate().unwrap();
        let targets = p.target_ids();
        for e in s.buttons.events.iter().filter(|e| e.kind == rsvp_core::dataio::EventKind::Button) {
            assert!(targets.contains(e.image_id.as_ref().unwrap()));
        }
    }
}

#[test]
fn timeline_is_strictly_increasing() {
    for rate in [5, 10] {
        let t = timeline(&plan(2, rate));
        assert_eq!(t.len(), 1000);
        assert!(t.windows(2).all(|w| w[1] > w[0]));
    }
}
