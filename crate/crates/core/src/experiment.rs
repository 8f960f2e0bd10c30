//! End-to-end harnesses over simulated users: leave-one-query-out EEG
//! evaluation, a scripted mouse annotator, relevance feedback over a
//! descriptor collection, and the rate x profile x modality comparison grid.
//!
//! Every number these harnesses produce comes from synthetic users and is
//! labelled as such in the reports.

use std::collections::HashSet;
use std::path::Path;

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::{
    write_json, AnnotationLog, EventKind, FeatureMatrix, LogEvent, Ranking, RsvpPlan, SessionMode,
    IMAGES_PER_QUERY, TARGETS_PER_QUERY,
};
use crate::error::{Error, Result};
use crate::fixtures::{gen_feature_set, FeatureSet, FeatureSetSpec};
use crate::metrics::{average_precision, mean_ap, roc_auc, roc_curve, welch_t_test, RocPoint, TTest};
use crate::pipeline::{preprocess_session, PipelineConfig};
use crate::planner::{build_plan, rng_from_seed, synthetic_ids, DEFAULT_GAP_S};
use crate::retrieval::{
    annotation_sets, feedback_rank, ranking_from_annotations, ranking_from_scores,
    select_feedback_labels_eeg, FeedbackLabels,
};
use crate::svm::{cross_query_scores, SvmParams};
use crate::synth::{simulate_recording, UserProfile};

pub const N_QUERIES: usize = 3;
pub const FEEDBACK_POSITIVES: usize = 10;
pub const FEEDBACK_NEGATIVES: usize = 100;

/// Mixes a run seed with a stream tag into an independent sub-seed.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mouse-interface time budget matching an RSVP rate.
pub fn budget_for_rate(rate_hz: u32) -> u32 {
    (IMAGES_PER_QUERY as u32) / rate_hz
}

/// The images one query presents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryImages {
    pub query_id: String,
    pub targets: Vec<String>,
    pub distractors: Vec<String>,
}

impl QueryImages {
    pub fn synthetic(query_id: &str) -> Self {
        let (targets, distractors) = synthetic_ids(query_id);
        Self {
            query_id: query_id.to_string(),
            targets,
            distractors,
        }
    }

    /// 50 relevant and 950 other rows drawn from a descriptor collection.
    pub fn from_feature_set(query_id: &str, set: &FeatureSet, seed: u64) -> Result<Self> {
        let labels = set.matrix.labels()?;
        let (rel, other): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
        let n_other = IMAGES_PER_QUERY - TARGETS_PER_QUERY;
        if rel.len() < TARGETS_PER_QUERY || other.len() < n_other {
            return Err(Error::Precondition(format!(
                "collection has {} relevant and {} other rows, need {TARGETS_PER_QUERY} and {n_other}",
                rel.len(),
                other.len()
            )));
        }
        let mut rng = rng_from_seed(seed);
        let pick = |rows: &[usize], k: usize, rng: &mut rand_xoshiro::Xoshiro256PlusPlus| -> Vec<String> {
            let mut idx = sample(rng, rows.len(), k).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| set.matrix.image_ids[rows[i]].clone()).collect()
        };
        Ok(Self {
            query_id: query_id.to_string(),
            targets: pick(&rel, TARGETS_PER_QUERY, &mut rng),
            distractors: pick(&other, n_other, &mut rng),
        })
    }

    pub fn target_set(&self) -> HashSet<String> {
        self.targets.iter().cloned().collect()
    }
}

/// One simulated user presented with one query.
#[derive(Debug, Clone)]
pub struct SessionOutput {
    pub plan: RsvpPlan,
    /// One row per stimulus in display order.
    pub features: FeatureMatrix,
    pub buttons: AnnotationLog,
}

pub fn run_session(
    images: &QueryImages,
    profile: &UserProfile,
    rate_hz: u32,
    plan_seed: u64,
    cfg: &PipelineConfig,
) -> Result<SessionOutput> {
    let plan = build_plan(
        &images.query_id,
        &images.targets,
        &images.distractors,
        rate_hz,
        plan_seed,
        DEFAULT_GAP_S,
    )?;
    let session = simulate_recording(&plan, profile)?;
    let features = preprocess_session(&session.recording, &session.markers, cfg)?;
    Ok(SessionOutput {
        plan,
        features,
        buttons: session.buttons,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QueryEval {
    pub query_id: String,
    pub auc: f64,
    pub ap: f64,
    #[serde(skip)]
    pub ranking: Option<Ranking>,
    #[serde(skip)]
    pub roc: Vec<RocPoint>,
}

/// Leave-one-query-out scores turned into per-query AUC, ranking and AP.
pub fn evaluate_queries<S: AsRef<str>>(
    query_ids: &[S],
    queries: &[FeatureMatrix],
    svm: &SvmParams,
) -> Result<Vec<QueryEval>> {
    if query_ids.len() != queries.len() {
        return Err(Error::Precondition(format!(
            "{} query ids for {} feature matrices",
            query_ids.len(),
            queries.len()
        )));
    }
    let scores = cross_query_scores(queries, svm)?;
    queries
        .iter()
        .zip(scores)
        .zip(query_ids)
        .map(|((m, s), query_id)| {
            let labels = m.labels()?;
            let query_id = query_id.as_ref().to_string();
            let ranking = ranking_from_scores(&query_id, &m.image_ids, &s, &m.image_ids)?;
            let relevant: HashSet<String> = m
                .image_ids
                .iter()
                .zip(labels)
                .filter(|(_, &l)| l)
                .map(|(id, _)| id.clone())
                .collect();
            let ids: Vec<&str> = ranking.ids().collect();
            Ok(QueryEval {
                auc: roc_auc(&s, labels)?,
                ap: average_precision(&ids, &relevant)?,
                roc: roc_curve(&s, labels)?,
                ranking: Some(ranking),
                query_id,
            })
        })
        .collect()
}

/// Outcome of one simulated user over the three queries.
#[derive(Debug, Clone)]
pub struct EegUserRun {
    pub sessions: Vec<SessionOutput>,
    pub queries: Vec<QueryEval>,
}

impl EegUserRun {
    pub fn mean_auc(&self) -> f64 {
        self.queries.iter().map(|q| q.auc).sum::<f64>() / self.queries.len() as f64
    }

    pub fn mean_ap(&self) -> f64 {
        self.queries.iter().map(|q| q.ap).sum::<f64>() / self.queries.len() as f64
    }

    pub fn ranking(&self, q: usize) -> &Ranking {
        self.queries[q].ranking.as_ref().expect("rankings are kept in memory")
    }
}

pub fn run_eeg_user(
    images: &[QueryImages],
    profile: &UserProfile,
    rate_hz: u32,
    seed: u64,
    cfg: &PipelineConfig,
    svm: &SvmParams,
) -> Result<EegUserRun> {
    let sessions = images
        .iter()
        .enumerate()
        .map(|(q, img)| run_session(img, profile, rate_hz, sub_seed(seed, 0x91A0 + q as u64), cfg))
        .collect::<Result<Vec<_>>>()?;
    let feats: Vec<FeatureMatrix> = sessions.iter().map(|s| s.features.clone()).collect();
    let ids: Vec<&str> = images.iter().map(|i| i.query_id.as_str()).collect();
    let queries = evaluate_queries(&ids, &feats, svm)?;
    Ok(EegUserRun { sessions, queries })
}

// ---------------------------------------------------------------------------
// Simulated mouse annotator

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnnotatorConfig {
    /// Inspection speed.
    pub images_per_s: f64,
    /// Probability of clicking a target once it is inspected.
    pub detect_prob: f64,
    pub page_size: usize,
}

impl Default for AnnotatorConfig {
    fn default() -> Self {
        Self {
            images_per_s: 2.0,
            detect_prob: 0.9,
            page_size: 20,
        }
    }
}

/// Scripted grid-interface user: opens a page, inspects its images one by
/// one at a fixed speed, clicks detected targets, presses Next after the
/// last image, and stops when the time budget runs out.
pub fn simulate_mouse_session(
    plan: &RsvpPlan,
    duration_s: u32,
    annotator: &AnnotatorConfig,
    seed: u64,
) -> Result<AnnotationLog> {
    if !(annotator.images_per_s > 0.0 && annotator.page_size > 0) {
        return Err(Error::Precondition("annotator speed and page size must be positive".into()));
    }
    let mut rng = rng_from_seed(seed);
    let step_ms = 1000.0 / annotator.images_per_s;
    let deadline = duration_s as u64 * 1000;
    let items: Vec<_> = plan.display_order().collect();
    let mut events = Vec::new();
    let mut t = 0.0f64;
    'pages: for (p, page) in items.chunks(annotator.page_size).enumerate() {
        let page_t = t.round() as u64;
        if page_t >= deadline {
            break;
        }
        if p > 0 {
            events.push(LogEvent::new(page_t, EventKind::Next, None, Some(p as u32 - 1)));
        }
        for item in page {
            events.push(LogEvent::new(page_t, EventKind::Show, Some(&item.image_id), Some(p as u32)));
        }
        for item in page {
            t += step_ms;
            let now = t.round() as u64;
            if now > deadline {
                break 'pages;
            }
            if item.is_target && rng.random::<f64>() < annotator.detect_prob {
                events.push(LogEvent::new(now, EventKind::Click, Some(&item.image_id), Some(p as u32)));
            }
        }
    }
    Ok(AnnotationLog {
        session_id: format!("{}-mouse-{seed}", plan.query_id),
        mode: SessionMode::Mouse,
        rate_hz: plan.rate_hz,
        duration_s,
        events,
    })
}

/// AP of the ranking the mouse log induces over the plan's images.
pub fn mouse_ranking(plan: &RsvpPlan, log: &AnnotationLog) -> Result<(Ranking, f64)> {
    let display = plan.display_ids();
    let sets = annotation_sets(log, &display)?;
    let ranking = ranking_from_annotations(&plan.query_id, &sets);
    let ids: Vec<&str> = ranking.ids().collect();
    let ap = average_precision(&ids, &plan.target_ids())?;
    Ok((ranking, ap))
}

// ---------------------------------------------------------------------------
// Relevance feedback

/// Top-10 / bottom-100 labels from an EEG ranking, used to re-rank the whole
/// collection. Returns the AP against the collection's relevant set.
pub fn eeg_feedback_ap(eeg_ranking: &Ranking, set: &FeatureSet, svm: &SvmParams) -> Result<f64> {
    let labels = select_feedback_labels_eeg(eeg_ranking, FEEDBACK_POSITIVES, FEEDBACK_NEGATIVES)?;
    feedback_ap(&labels, set, svm)
}

pub fn feedback_ap(labels: &FeedbackLabels, set: &FeatureSet, svm: &SvmParams) -> Result<f64> {
    let ranking = feedback_rank("feedback", labels, &set.matrix, svm)?;
    let ids: Vec<&str> = ranking.ids().collect();
    let relevant: HashSet<String> = set.truth.relevant.iter().cloned().collect();
    average_precision(&ids, &relevant)
}

/// Labels a user with perfect judgement would give: `n_pos` random relevant
/// rows and `n_neg` random non-relevant rows.
pub fn clean_labels(set: &FeatureSet, n_pos: usize, n_neg: usize, seed: u64) -> Result<FeedbackLabels> {
    let labels = set.matrix.labels()?;
    let (rel, other): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if rel.len() < n_pos || other.len() < n_neg {
        return Err(Error::Precondition("collection too small for the requested labels".into()));
    }
    let mut rng = rng_from_seed(seed);
    let ids = |rows: &[usize], k, rng: &mut rand_xoshiro::Xoshiro256PlusPlus| -> Vec<String> {
        sample(rng, rows.len(), k)
            .into_iter()
            .map(|i| set.matrix.image_ids[rows[i]].clone())
            .collect()
    };
    Ok(FeedbackLabels {
        positives: ids(&rel, n_pos, &mut rng),
        negatives: ids(&other, n_neg, &mut rng),
    })
}

/// Per-query collections and the query images drawn from them for one seed.
pub fn query_collections(seed: u64, spec: &FeatureSetSpec) -> Result<Vec<(FeatureSet, QueryImages)>> {
    (0..N_QUERIES)
        .map(|q| {
            let set = gen_feature_set(&FeatureSetSpec {
                seed: sub_seed(seed, 0xC011 + q as u64),
                ..spec.clone()
            })?;
            let images = QueryImages::from_feature_set(&format!("q{}", q + 1), &set, sub_seed(seed, 0x1A6E + q as u64))?;
            Ok((set, images))
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Comparison grid

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedProfile {
    pub name: String,
    pub profile: UserProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n_seeds: usize,
    pub base_seed: u64,
    pub profiles: Vec<NamedProfile>,
    pub rates: Vec<u32>,
    pub annotator: AnnotatorConfig,
    pub feature_set: FeatureSetSpec,
    pub feedback: bool,
    pub pipeline: PipelineConfig,
    pub svm: SvmParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_seeds: 20,
            base_seed: 1,
            profiles: vec![
                NamedProfile {
                    name: "expert".into(),
                    profile: UserProfile::expert(0),
                },
                NamedProfile {
                    name: "novice".into(),
                    profile: UserProfile::novice(0),
                },
            ],
            rates: vec![5, 10],
            annotator: AnnotatorConfig::default(),
            feature_set: FeatureSetSpec::default(),
            feedback: true,
            pipeline: PipelineConfig::default(),
            svm: SvmParams::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Eeg,
    Mouse,
}

/// Per-seed results for one (profile, rate, modality) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub profile: String,
    pub rate_hz: u32,
    pub duration_s: u32,
    pub modality: Modality,
    /// Mean AP over the queries, one entry per seed.
    pub map_per_seed: Vec<f64>,
    /// Mean AUC over the queries per seed (EEG only).
    pub auc_per_seed: Vec<f64>,
    /// Relevance-feedback AP over the collection per seed.
    pub feedback_ap_per_seed: Vec<f64>,
}

impl CellResult {
    pub fn mean_map(&self) -> f64 {
        mean(&self.map_per_seed)
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub name: String,
    pub mean_a: f64,
    pub mean_b: f64,
    pub test: Option<TTest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub note: String,
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub comparisons: Vec<Comparison>,
}

/// Runs every profile x rate x modality cell over `n_seeds` simulated users.
pub fn run_compare(cfg: &ExperimentConfig) -> Result<CompareReport> {
    let mut cells = Vec::new();
    for np in &cfg.profiles {
        for &rate in &cfg.rates {
            let duration = budget_for_rate(rate);
            let mut eeg = CellResult {
                profile: np.name.clone(),
                rate_hz: rate,
                duration_s: duration,
                modality: Modality::Eeg,
                map_per_seed: vec![],
                auc_per_seed: vec![],
                feedback_ap_per_seed: vec![],
            };
            let mut mouse = CellResult {
                modality: Modality::Mouse,
                ..eeg.clone()
            };
            for k in 0..cfg.n_seeds {
                let seed = cfg.base_seed + k as u64;
                let collections = query_collections(seed, &cfg.feature_set)?;
                let images: Vec<QueryImages> = collections.iter().map(|(_, i)| i.clone()).collect();
                let profile = UserProfile {
                    seed,
                    ..np.profile.clone()
                };
                let run = run_eeg_user(&images, &profile, rate, seed, &cfg.pipeline, &cfg.svm)?;
                eeg.map_per_seed.push(run.mean_ap());
                eeg.auc_per_seed.push(run.mean_auc());

                let mut mouse_aps = Vec::new();
                let mut mouse_fb = Vec::new();
                let mut eeg_fb = Vec::new();
                for (q, session) in run.sessions.iter().enumerate() {
                    let log = simulate_mouse_session(&session.plan, duration, &cfg.annotator, sub_seed(seed, 0x40D5 + q as u64))?;
                    let (_, ap) = mouse_ranking(&session.plan, &log)?;
                    mouse_aps.push(ap);
                    if cfg.feedback {
                        let set = &collections[q].0;
                        eeg_fb.push(eeg_feedback_ap(run.ranking(q), set, &cfg.svm)?);
                        let sets = annotation_sets(&log, &session.plan.display_ids())?;
                        // A budget too short for any click leaves nothing to train on.
                        if let Ok(labels) = crate::retrieval::select_feedback_labels_mouse(&sets) {
                            mouse_fb.push(feedback_ap(&labels, set, &cfg.svm)?);
                        }
                    }
                }
                mouse.map_per_seed.push(mean_ap(&mouse_aps)?);
                if cfg.feedback {
                    eeg.feedback_ap_per_seed.push(mean(&eeg_fb));
                    if !mouse_fb.is_empty() {
                        mouse.feedback_ap_per_seed.push(mean(&mouse_fb));
                    }
                }
            }
            cells.push(eeg);
            cells.push(mouse);
        }
    }
    let comparisons = grid_comparisons(cfg, &cells);
    Ok(CompareReport {
        note: "synthetic users and a scripted annotator; not human-subject results".into(),
        config: cfg.clone(),
        cells,
        comparisons,
    })
}

fn compare(name: String, a: &[f64], b: &[f64]) -> Comparison {
    Comparison {
        name,
        mean_a: mean(a),
        mean_b: mean(b),
        test: welch_t_test(a, b).ok(),
    }
}

fn grid_comparisons(cfg: &ExperimentConfig, cells: &[CellResult]) -> Vec<Comparison> {
    let find = |p: &str, r: u32, m: Modality| {
        cells
            .iter()
            .find(|c| c.profile == p && c.rate_hz == r && c.modality == m)
    };
    let mut out = Vec::new();
    if let [first, second, ..] = cfg.profiles.as_slice() {
        for &r in &cfg.rates {
            if let (Some(a), Some(b)) = (find(&first.name, r, Modality::Eeg), find(&second.name, r, Modality::Eeg)) {
                out.push(compare(
                    format!("auc {} vs {} at {r} Hz", first.name, second.name),
                    &a.auc_per_seed,
                    &b.auc_per_seed,
                ));
            }
        }
    }
    if let [r1, r2, ..] = cfg.rates.as_slice() {
        for p in &cfg.profiles {
            for m in [Modality::Eeg, Modality::Mouse] {
                if let (Some(a), Some(b)) = (find(&p.name, *r1, m), find(&p.name, *r2, m)) {
                    let what = if m == Modality::Eeg { "eeg" } else { "mouse" };
                    out.push(compare(
                        format!("{what} map {} {r1} Hz vs {r2} Hz", p.name),
                        &a.map_per_seed,
                        &b.map_per_seed,
                    ));
                }
            }
        }
        for p in &cfg.profiles {
            for &r in [*r1, *r2].iter() {
                if let (Some(a), Some(b)) = (find(&p.name, r, Modality::Mouse), find(&p.name, r, Modality::Eeg)) {
                    out.push(compare(
                        format!("map mouse vs eeg {} {r} Hz", p.name),
                        &a.map_per_seed,
                        &b.map_per_seed,
                    ));
                }
            }
        }
    }
    out
}

impl CompareReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("profile,rate_hz,duration_s,modality,n_seeds,mean_map,mean_auc,mean_feedback_ap\n");
        let fmt = |v: &[f64]| if v.is_empty() { String::new() } else { format!("{:.6}", mean(v)) };
        for c in &self.cells {
            s.push_str(&format!(
                "{},{},{},{},{},{:.6},{},{}\n",
                c.profile,
                c.rate_hz,
                c.duration_s,
                if c.modality == Modality::Eeg { "eeg" } else { "mouse" },
                c.map_per_seed.len(),
                c.mean_map(),
                fmt(&c.auc_per_seed),
                fmt(&c.feedback_ap_per_seed),
            ));
        }
        s
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let json = stem.with_extension("json");
        let csv = stem.with_extension("csv");
        write_json(&json, self)?;
        std::fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))
    }
}

/// Cross-query report as emitted by `eval-eeg`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EegReport {
    pub queries: Vec<EegQueryReport>,
    pub mean_auc: f64,
    pub mean_ap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EegQueryReport {
    pub query_id: String,
    pub n_epochs: usize,
    pub n_targets: usize,
    pub auc: f64,
    pub ap: f64,
    pub roc: Vec<RocPoint>,
}

impl EegReport {
    pub fn new(evals: &[QueryEval], matrices: &[FeatureMatrix]) -> Self {
        let queries: Vec<EegQueryReport> = evals
            .iter()
            .zip(matrices)
            .map(|(e, m)| EegQueryReport {
                query_id: e.query_id.clone(),
                n_epochs: m.n_rows(),
                n_targets: m.n_targets(),
                auc: e.auc,
                ap: e.ap,
                roc: e.roc.clone(),
            })
            .collect();
        Self {
            mean_auc: mean(&queries.iter().map(|q| q.auc).collect::<Vec<_>>()),
            mean_ap: mean(&queries.iter().map(|q| q.ap).collect::<Vec<_>>()),
            queries,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("query_id,n_epochs,n_targets,auc,ap\n");
        for q in &self.queries {
            s.push_str(&format!("{},{},{},{},{}\n", q.query_id, q.n_epochs, q.n_targets, q.auc, q.ap));
        }
        s
    }
}
