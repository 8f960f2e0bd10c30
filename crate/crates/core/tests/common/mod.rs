//! Independent oracles shared by the property tests and the acceptance run.
#![allow(dead_code)]

use std::collections::HashSet;
use std::f64::consts::PI;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rsvp_core::filter::SosFilter;
use rsvp_core::pipeline::BAND_EDGE_ORDER;

/// Standardised rows with a trailing constant 1, computed independently of
/// the library (population SD, constant columns left unscaled).
pub fn design(x: &Array2<f64>) -> Vec<Vec<f64>> {
    let n = x.nrows() as f64;
    let cols: Vec<(f64, f64)> = x
        .columns()
        .into_iter()
        .map(|c| {
            let m = c.sum() / n;
            let sd = (c.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m, if sd > 1e-12 * m.abs().max(1.0) { sd } else { 1.0 })
        })
        .collect();
    x.rows()
        .into_iter()
        .map(|r| {
            let mut z: Vec<f64> = r.iter().zip(&cols).map(|(v, (m, s))| (v - m) / s).collect();
            z.push(1.0);
            z
        })
        .collect()
}

pub fn primal(w: &[f64], z: &[Vec<f64>], y: &[f64], c: f64) -> f64 {
    let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    let hinge: f64 = z
        .iter()
        .zip(y)
        .map(|(zi, yi)| (1.0 - yi * zi.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()).max(0.0))
        .sum();
    reg + c * hinge
}

/// Projected subgradient descent on the primal (step 1/t, iterates kept in
/// the ball that must contain the optimum), reporting the best objective
/// seen over the raw iterates and the running suffix average.
pub fn subgradient_oracle(z: &[Vec<f64>], y: &[f64], c: f64, steps: usize) -> f64 {
    let dim = z[0].len();
    let radius = (2.0 * c * z.len() as f64).sqrt();
    let mut w = vec![0.0; dim];
    let mut avg = vec![0.0; dim];
    let mut n_avg = 0.0;
    let mut best = primal(&w, z, y, c);
    let mut g = vec![0.0; dim];
    for t in 1..=steps {
        g.copy_from_slice(&w);
        for (zi, yi) in z.iter().zip(y) {
            let m: f64 = zi.iter().zip(&w).map(|(a, b)| a * b).sum();
            if yi * m < 1.0 {
                g.iter_mut().zip(zi).for_each(|(gj, zj)| *gj -= c * yi * zj);
            }
        }
        let eta = 1.0 / t as f64;
        w.iter_mut().zip(&g).for_each(|(wj, gj)| *wj -= eta * gj);
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > radius {
            w.iter_mut().for_each(|v| *v *= radius / norm);
        }
        if t > steps / 2 {
            n_avg += 1.0;
            avg.iter_mut().zip(&w).for_each(|(a, wj)| *a += (wj - *a) / n_avg);
        }
        if t % 64 == 0 || t == steps {
            best = best.min(primal(&w, z, y, c));
            if n_avg > 0.0 {
                best = best.min(primal(&avg, z, y, c));
            }
        }
    }
    best
}

pub fn random_instance(seed: u64, n: usize, d: usize) -> (Array2<f64>, Vec<bool>) {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let mut labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
    labels[0] = true;
    labels[1] = false;
    let x = Array2::from_shape_fn((n, d), |(i, j)| {
        let shift = if labels[i] { 0.7 } else { -0.7 } * (j % 2) as f64;
        rng.random_range(-2.0..2.0) + shift
    });
    (x, labels)
}

/// Sizes of the oracle instances: n in 4..=20, d in 1..=5.
pub fn instance_shape(k: u64) -> (usize, usize) {
    (4 + (k as usize * 7) % 17, 1 + (k as usize) % 5)
}

pub fn ys(labels: &[bool]) -> Vec<f64> {
    labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect()
}

pub fn default_filter() -> SosFilter {
    SosFilter::butterworth_bandpass(BAND_EDGE_ORDER, 0.1, 20.0, 250.0).unwrap()
}

/// Amplitude gain of the zero-phase cascade, i.e. the single-pass power
/// gain: each edge is a bilinear-transform Butterworth of order 4.
pub fn analytic_gain(f: f64, lo: f64, hi: f64, fs: f64) -> f64 {
    let w = |x: f64| (PI * x / fs).tan();
    let lp = 1.0 / (1.0 + (w(f) / w(hi)).powi(8));
    let hp = 1.0 / (1.0 + (w(lo) / w(f)).powi(8));
    lp * hp
}

pub fn sine(f: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|t| (2.0 * PI * f * t as f64 / fs).sin()).collect()
}

/// Amplitude of the `f` component of `x` by projection onto sine and
/// cosine; `x` must span a whole number of cycles.
pub fn component(x: &[f64], f: f64, fs: f64, t0: usize) -> f64 {
    let (mut s, mut c) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let ph = 2.0 * PI * f * (t0 + i) as f64 / fs;
        s += v * ph.sin();
        c += v * ph.cos();
    }
    2.0 * (s * s + c * c).sqrt() / x.len() as f64
}

/// Gain at `f` over the central 30 s of a 60 s tone. Projection onto the
/// tone ignores the slow ringing the 0.1 Hz edge leaves after the start.
pub fn measured_gain(f: f64) -> f64 {
    let n = 250 * 60;
    let x = sine(f, 250.0, n);
    let y = default_filter().filtfilt(&x).unwrap();
    let (a, b) = (n / 4, 3 * n / 4);
    component(&y[a..b], f, 250.0, a) / component(&x[a..b], f, 250.0, a)
}

/// Largest shift of the argmax of a noiseless Gaussian bump after filtering.
pub fn bump_peak_shift() -> i64 {
    let n = 2500;
    [(1250.0, 12.5), (900.0, 6.0), (1600.0, 25.0)]
        .iter()
        .map(|&(centre, sd)| {
            let x: Vec<f64> = (0..n)
                .map(|t| 10.0 * (-((t as f64 - centre) / sd).powi(2) / 2.0).exp())
                .collect();
            let y = default_filter().filtfilt(&x).unwrap();
            let argmax = |v: &[f64]| (0..v.len()).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap() as i64;
            (argmax(&y) - argmax(&x)).abs()
        })
        .max()
        .unwrap()
}

/// O(n^2) pairwise definition of the ROC area, ties counting one half.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

pub fn definitional_ap(ranking: &[String], relevant: &HashSet<String>) -> f64 {
    let mut total = 0.0;
    for (k, id) in ranking.iter().enumerate() {
        if relevant.contains(id) {
            let hits_to_k = ranking[..=k].iter().filter(|x| relevant.contains(*x)).count();
            total += hits_to_k as f64 / (k + 1) as f64;
        }
    }
    total / relevant.len() as f64
}
