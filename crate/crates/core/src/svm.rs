//! Linear SVM trained by dual coordinate descent.
//!
//! Minimises `1/2 |w|^2 + C * sum_i max(0, 1 - y_i w.z_i)` where `z_i` is the
//! standardised feature row with a constant 1 appended, so the bias is
//! regularised along with the weights. The dual is a box-constrained QP
//! over `alpha in [0, C]^n`, solved one coordinate at a time with the
//! closed-form clipped Newton step and liblinear-style shrinking. A fit has
//! converged when no coordinate's projected gradient exceeds `tol` in
//! magnitude over a full (unshrunk) pass.

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::dataio::FeatureMatrix;
use crate::error::{Error, Result};
use crate::planner::{fisher_yates, rng_from_seed};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub c: f64,
    pub tol: f64,
    pub max_epochs: usize,
    /// Seed for the per-epoch coordinate order.
    pub seed: u64,
    pub shrinking: bool,
    /// Record primal and dual objective after every epoch (costs one extra
    /// pass over the data per epoch).
    pub record_trace: bool,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-4,
            max_epochs: 10_000,
            seed: 0x5EED,
            shrinking: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub primal: f64,
    /// Dual objective in minimisation form, `1/2 |w|^2 - sum(alpha)`.
    pub dual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    /// `d` feature weights followed by the bias.
    pub weights: Vec<f64>,
    pub c_param: f64,
    pub scaler_mean: Vec<f64>,
    pub scaler_sd: Vec<f64>,
    pub n_iterations_run: usize,
    pub converged: bool,
    pub max_violation: f64,
    /// Primal minus dual objective at exit.
    pub dual_gap: f64,
    pub primal_objective: f64,
    #[serde(skip)]
    pub dual_coef: Vec<f64>,
    #[serde(skip)]
    pub trace: Vec<EpochTrace>,
}

/// Column means and population standard deviations; zero-variance columns
/// get an SD of 1.
fn column_scaler(x: &Array2<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut mean = vec![0.0; x.ncols()];
    for row in x.rows() {
        mean.iter_mut().zip(row).for_each(|(m, v)| *m += v);
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; x.ncols()];
    for row in x.rows() {
        var.iter_mut()
            .zip(row.iter().zip(&mean))
            .for_each(|(s, (v, m))| *s += (v - m) * (v - m));
    }
    // Round-off on a constant column leaves a tiny positive SD; treat it as zero.
    let sd = var
        .into_iter()
        .zip(&mean)
        .map(|(s, m)| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 * m.abs().max(1.0) {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem {
    z: Vec<f64>,
    width: usize,
    y: Vec<f64>,
}

impl Problem {
    fn row(&self, i: usize) -> &[f64] {
        &self.z[i * self.width..(i + 1) * self.width]
    }

    fn len(&self) -> usize {
        self.y.len()
    }

    fn primal(&self, w: &[f64], c: f64) -> f64 {
        let hinge: f64 = (0..self.len())
            .map(|i| (1.0 - self.y[i] * dot(w, self.row(i))).max(0.0))
            .sum();
        0.5 * dot(w, w) + c * hinge
    }

    /// Largest projected-gradient magnitude over all coordinates.
    fn max_violation(&self, w: &[f64], alpha: &[f64], c: f64) -> f64 {
        (0..self.len())
            .map(|i| {
                let g = self.y[i] * dot(w, self.row(i)) - 1.0;
                let pg = if alpha[i] <= 0.0 {
                    g.min(0.0)
                } else if alpha[i] >= c {
                    g.max(0.0)
                } else {
                    g
                };
                pg.abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Trains on rows of `x` with boolean labels (`true` is the positive class).
pub fn fit(x: &Array2<f64>, labels: &[bool], params: &SvmParams) -> Result<SvmModel> {
    let n = x.nrows();
    if labels.len() != n {
        return Err(Error::Precondition(format!("{} labels for {n} rows", labels.len())));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    if n_pos == 0 || n_pos == n {
        return Err(Error::Training(format!(
            "training set needs both classes, got {n_pos} positive of {n}"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Training("training data contains NaN or infinite values".into()));
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::Precondition(format!("C must be positive, got {}", params.c)));
    }

    let d = x.ncols();
    let (scaler_mean, scaler_sd) = column_scaler(x);
    let width = d + 1;
    let mut z = Vec::with_capacity(n * width);
    for row in x.rows() {
        z.extend(row.iter().zip(&scaler_mean).zip(&scaler_sd).map(|((v, m), s)| (v - m) / s));
        z.push(1.0);
    }
    let prob = Problem {
        z,
        width,
        y: labels.iter().map(|&l| if l { 1.0 } else { -1.0 }).collect(),
    };
    let qd: Vec<f64> = (0..n).map(|i| dot(prob.row(i), prob.row(i))).collect();

    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; width];
    let mut rng = rng_from_seed(params.seed);
    let mut active: Vec<usize> = (0..n).collect();
    let (mut pg_max_old, mut pg_min_old) = (f64::INFINITY, f64::NEG_INFINITY);
    let mut trace = Vec::new();
    let mut epochs = 0;
    let mut converged = false;

    while epochs < params.max_epochs {
        epochs += 1;
        fisher_yates(&mut active, &mut rng);
        let (mut pg_max, mut pg_min) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut s = 0;
        while s < active.len() {
            let i = active[s];
            let zi = prob.row(i);
            let g = prob.y[i] * dot(&w, zi) - 1.0;
            let pg = if alpha[i] == 0.0 {
                if params.shrinking && g > pg_max_old {
                    active.swap_remove(s);
                    continue;
                }
                g.min(0.0)
            } else if alpha[i] == c {
                if params.shrinking && g < pg_min_old {
                    active.swap_remove(s);
                    continue;
                }
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg.abs() > 1e-12 {
                let old = alpha[i];
                alpha[i] = (old - g / qd[i]).clamp(0.0, c);
                let step = (alpha[i] - old) * prob.y[i];
                w.iter_mut().zip(zi).for_each(|(wj, zj)| *wj += step * zj);
            }
            s += 1;
        }
        if params.record_trace {
            trace.push(EpochTrace {
                primal: prob.primal(&w, c),
                dual: 0.5 * dot(&w, &w) - alpha.iter().sum::<f64>(),
            });
        }

        let violation = pg_max.max(-pg_min).max(0.0);
        if violation <= params.tol {
            if active.len() == n || prob.max_violation(&w, &alpha, c) <= params.tol {
                converged = true;
                break;
            }
            active = (0..n).collect();
            pg_max_old = f64::INFINITY;
            pg_min_old = f64::NEG_INFINITY;
            continue;
        }
        pg_max_old = if pg_max <= 0.0 { f64::INFINITY } else { pg_max };
        pg_min_old = if pg_min >= 0.0 { f64::NEG_INFINITY } else { pg_min };
    }

    let primal = prob.primal(&w, c);
    let dual = alpha.iter().sum::<f64>() - 0.5 * dot(&w, &w);
    Ok(SvmModel {
        max_violation: prob.max_violation(&w, &alpha, c),
        weights: w,
        c_param: c,
        scaler_mean,
        scaler_sd,
        n_iterations_run: epochs,
        converged,
        dual_gap: primal - dual,
        primal_objective: primal,
        dual_coef: alpha,
        trace,
    })
}

pub fn fit_matrix(m: &FeatureMatrix, params: &SvmParams) -> Result<SvmModel> {
    fit(&m.data, m.labels()?, params)
}

impl SvmModel {
    pub fn n_dims(&self) -> usize {
        self.scaler_mean.len()
    }

    pub fn bias(&self) -> f64 {
        self.weights[self.n_dims()]
    }

    pub fn score_row(&self, x: ArrayView1<f64>) -> f64 {
        let d = self.n_dims();
        let mut acc = 0.0;
        for (j, v) in x.iter().enumerate() {
            acc += self.weights[j] * (v - self.scaler_mean[j]) / self.scaler_sd[j];
        }
        acc + self.weights[d]
    }

    /// Signed distance-like score `w . standardize(x) + b` for every row.
    pub fn decision_scores(&self, x: &Array2<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_dims() {
            return Err(Error::Precondition(format!(
                "model expects {} dims, input has {}",
                self.n_dims(),
                x.ncols()
            )));
        }
        Ok(x.rows().into_iter().map(|r| self.score_row(r)).collect())
    }
}

/// Leave-one-query-out scoring over exactly three labelled query matrices:
/// each query is scored by a model trained on the other two.
pub fn cross_query_scores(queries: &[FeatureMatrix], params: &SvmParams) -> Result<Vec<Vec<f64>>> {
    if queries.len() != 3 {
        return Err(Error::Precondition(format!(
            "cross-query evaluation needs exactly 3 queries, got {}",
            queries.len()
        )));
    }
    (0..queries.len())
        .map(|held_out| {
            let train: Vec<&FeatureMatrix> = queries
                .iter()
                .enumerate()
                .filter(|(q, _)| *q != held_out)
                .map(|(_, m)| m)
                .collect();
            let train = FeatureMatrix::concat(&train)?;
            let model = fit_matrix(&train, params)?;
            model.decision_scores(&queries[held_out].data)
        })
        .collect()
}
