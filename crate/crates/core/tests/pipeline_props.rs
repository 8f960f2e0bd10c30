use ndarray::{s, Array2};
use proptest::prelude::*;
use rsvp_core::dataio::{Epoch, EventMarker, FeatureMatrix, RawRecording};
use rsvp_core::filter::SosFilter;
use rsvp_core::pipeline::*;

mod common;
use common::*;

fn labels(n: usize) -> Vec<String> {
    (0..n).map(|c| format!("ch{c}")).collect()
}

fn rec(rate: u32, samples: Array2<f64>) -> RawRecording {
    RawRecording::new(rate, labels(samples.nrows()), samples).unwrap()
}

#[test]
fn ten_hz_gain_matches_analytic_oracle() {
    let expected = analytic_gain(10.0, 0.1, 20.0, 250.0);
    let measured = measured_gain(10.0);
    assert!(
        (measured - expected).abs() <= 0.05 * expected,
        "measured {measured}, analytic {expected}"
    );
    assert!((measured - 1.0).abs() < 0.05);
}

#[test]
fn forty_hz_attenuated_by_40_db() {
    let db = 20.0 * measured_gain(40.0).log10();
    assert!(db <= -40.0, "attenuation only {db} dB");
    let analytic_db = 20.0 * analytic_gain(40.0, 0.1, 20.0, 250.0).log10();
    assert!((db - analytic_db).abs() < 1.0, "measured {db} dB, analytic {analytic_db} dB");
}

#[test]
fn gain_tracks_oracle_across_band() {
    for f in [1.0, 5.0, 15.0, 20.0, 25.0, 30.0] {
        let expected = analytic_gain(f, 0.1, 20.0, 250.0);
        let measured = measured_gain(f);
        assert!(
            (measured - expected).abs() <= 0.05 * expected.max(1e-3),
            "{f} Hz: measured {measured}, analytic {expected}"
        );
    }
}

#[test]
fn dc_offset_removed_after_transient() {
    let n = 250 * 200;
    let r = rec(250, Array2::from_elem((1, n), 5.0));
    let y = bandpass(&r, 0.1, 20.0).unwrap();
    let centre = y.samples.slice(s![0, n / 4..3 * n / 4]);
    let worst = centre.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    assert!(worst <= 0.05, "residual DC {worst}");
}

#[test]
fn gaussian_bump_keeps_its_peak() {
    let shift = bump_peak_shift();
    assert!(shift <= 1, "peak moved by {shift} samples");
}

#[test]
fn unstable_edge_is_a_numeric_error() {
    let err = SosFilter::butterworth_bandpass(BAND_EDGE_ORDER, 0.1, 125.0 - 1e-10, 250.0).unwrap_err();
    assert!(matches!(err, rsvp_core::Error::Numeric(_)), "{err:?}");
}

fn random_recording(c: usize, n: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-100.0f64..100.0, c * n).prop_map(move |v| Array2::from_shape_vec((c, n), v).unwrap())
}

fn markers(onsets: &[usize]) -> Vec<EventMarker> {
    onsets
        .iter()
        .enumerate()
        .map(|(i, &onset_sample)| EventMarker {
            onset_sample,
            image_id: format!("img{i}"),
            is_target: i % 3 == 0,
            block_index: 0,
            query_id: "q".into(),
        })
        .collect()
}

fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn common_signal_does_not_survive_rereference(
        x in random_recording(4, 64),
        common in prop::collection::vec(-1e3f64..1e3, 64),
    ) {
        let base = rereference_average(&rec(1000, x.clone())).unwrap();
        let mut shifted = x.clone();
        for mut row in shifted.rows_mut() {
            row.iter_mut().zip(&common).for_each(|(v, c)| *v += c);
        }
        let out = rereference_average(&rec(1000, shifted)).unwrap();
        prop_assert!(max_abs(&(&out.samples - &base.samples)) <= 1e-9);
        for t in 0..64 {
            prop_assert!(out.samples.column(t).sum().abs() / 4.0 <= 1e-9);
        }
    }

    #[test]
    fn pipeline_is_linear(
        x in random_recording(3, 4000),
        y in random_recording(3, 4000),
        a in -3.0f64..3.0,
        b in -3.0f64..3.0,
    ) {
        let cfg = PipelineConfig::default();
        let m = markers(&[1100, 1300, 1450]);
        let run = |s: Array2<f64>| preprocess_session(&rec(1000, s), &m, &cfg).unwrap().data;
        let combined = run(&x * a + &y * b);
        let separate = run(x) * a + run(y) * b;
        let scale = max_abs(&combined).max(max_abs(&separate)).max(1e-12);
        prop_assert!(max_abs(&(&combined - &separate)) / scale <= 1e-6);
    }

    #[test]
    fn window_means_equal_brute_force(v in prop::collection::vec(-50.0f64..50.0, 2 * 750)) {
        let cfg = PipelineConfig::default();
        let data = Array2::from_shape_vec((2, 750), v).unwrap();
        let epoch = Epoch { image_id: "e".into(), is_target: false, data: data.clone(), sample_rate_hz: 250 };
        let f = epoch_features(&epoch, &cfg).unwrap();
        prop_assert_eq!(f.values.len(), 2 * cfg.n_windows);
        for c in 0..2 {
            for w in 0..16 {
                let start = 300 + 12 * w;
                let mut sum = 0.0;
                for t in start..start + 24 {
                    sum += data[[c, t]];
                }
                prop_assert!((f.values[c * 16 + w] - sum / 24.0).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn disjoint_marker_halves_concatenate_to_single_pass() {
    let n = 12_000;
    let samples = Array2::from_shape_fn((4, n), |(c, t)| ((c * 7 + t) % 23) as f64 - 11.0 + (t as f64 * 0.01).sin());
    let r = rec(1000, samples);
    let m = markers(&[1200, 1400, 1500, 2600, 5000, 8000, 9900]);
    let cfg = PipelineConfig::default();
    let whole = preprocess_session(&r, &m, &cfg).unwrap();
    let first = preprocess_session(&r, &m[..3], &cfg).unwrap();
    let second = preprocess_session(&r, &m[3..], &cfg).unwrap();
    assert_eq!(FeatureMatrix::concat(&[&first, &second]).unwrap(), whole);
}

#[test]
fn output_dimension_is_channels_times_windows() {
    let cfg = PipelineConfig::default();
    for c in [2, 5, 32] {
        let r = rec(1000, Array2::from_shape_fn((c, 4000), |(i, t)| (i + t % 17) as f64));
        let m = preprocess_session(&r, &markers(&[1500, 2000]), &cfg).unwrap();
        assert_eq!(m.n_dims(), c * cfg.n_windows);
        assert_eq!(m.n_rows(), 2);
    }
}
