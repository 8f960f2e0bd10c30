use std::collections::HashSet;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rsvp_core::dataio::*;
use rsvp_core::experiment::*;
use rsvp_core::fixtures::{gen_feature_set, gen_images, FeatureSetSpec, GlyphSpec, ImageManifest};
use rsvp_core::metrics::average_precision;
use rsvp_core::pipeline::{preprocess_session, PipelineConfig};
use rsvp_core::planner::{build_plan, synthetic_ids, DEFAULT_GAP_S};
use rsvp_core::retrieval::*;
use rsvp_core::svm::{fit_matrix, SvmParams};
use rsvp_core::synth::{simulate_recording, UserProfile};
use serde::Serialize;

use crate::service::{self, SessionConfig};

#[derive(Parser, Debug)]
#[command(name = "rsvp", version, about = "Synthetic RSVP sessions, EEG ranking and relevance feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build a five-block presentation plan for one query.
    GenPlan(GenPlanArgs),
    /// Render a synthetic image collection with a manifest.
    GenDataset(GenDatasetArgs),
    /// Generate a labelled descriptor collection for feedback experiments.
    GenFeatures(GenFeaturesArgs),
    /// Simulate an EEG recording of a plan for a user profile.
    Simulate(SimulateArgs),
    /// Turn a recording and its markers into one feature row per stimulus.
    Preprocess(PreprocessArgs),
    /// Leave-one-query-out AUC and AP over three queries.
    EvalEeg(EvalEegArgs),
    /// Rank one query's images from EEG scores or a mouse log.
    Rank(RankArgs),
    /// Re-rank a collection from positive and negative labels.
    Feedback(FeedbackArgs),
    /// Run the profile x rate x modality grid over simulated users.
    Compare(CompareArgs),
    /// Serve sessions to the annotation interface.
    Serve(ServeArgs),
}

#[derive(Args, Debug)]
pub struct GenPlanArgs {
    #[arg(long, default_value = "q1")]
    pub query: String,
    #[arg(long, default_value_t = 5)]
    pub rate: u32,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Rest between blocks in seconds.
    #[arg(long, default_value_t = DEFAULT_GAP_S)]
    pub gap: f64,
    /// Take image ids from a generated image directory instead of numbered ids.
    #[arg(long)]
    pub images: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct GenDatasetArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 50)]
    pub targets: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct GenFeaturesArgs {
    /// Output stem; writes `<out>.feat.json`, `<out>.feat.f32` and `<out>.truth.json`.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON collection parameters; flags below override individual fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub d: Option<usize>,
    #[arg(long)]
    pub n_relevant: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long)]
    pub profile: PathBuf,
    #[arg(long)]
    pub plan: PathBuf,
    /// Overrides the profile's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output stem; writes `.rec.json`, `.rec.f32`, `.markers.jsonl` and `.buttons.json`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct PreprocessArgs {
    #[arg(long)]
    pub rec: PathBuf,
    #[arg(long)]
    pub markers: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output stem for the feature matrix.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SvmArgs {
    /// JSON SVM parameters.
    #[arg(long)]
    pub svm: Option<PathBuf>,
}

impl SvmArgs {
    fn load(&self) -> Result<SvmParams> {
        load_or_default(self.svm.as_deref())
    }
}

#[derive(Args, Debug)]
pub struct EvalEegArgs {
    /// Exactly three query ids; features are read from `<features-dir>/<id>.feat.*`.
    #[arg(long, value_delimiter = ',', required = true)]
    pub queries: Vec<String>,
    #[arg(long)]
    pub features_dir: PathBuf,
    /// Directory for `report.json`, `report.csv` and one ranking per query.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub svm: SvmArgs,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum RankSource {
    Eeg,
    Mouse,
}

#[derive(Args, Debug)]
pub struct RankArgs {
    #[arg(long, value_enum)]
    pub from: RankSource,
    /// EEG: feature matrix of the query to rank.
    #[arg(long, required_if_eq("from", "eeg"))]
    pub features: Option<PathBuf>,
    /// EEG: labelled feature matrices of other queries to train on.
    #[arg(long, value_delimiter = ',', required_if_eq("from", "eeg"))]
    pub train: Vec<PathBuf>,
    /// Mouse: annotation log.
    #[arg(long, required_if_eq("from", "mouse"))]
    pub log: Option<PathBuf>,
    /// Mouse: the plan the log was recorded against.
    #[arg(long, required_if_eq("from", "mouse"))]
    pub plan: Option<PathBuf>,
    #[arg(long, default_value = "q")]
    pub query_id: String,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub svm: SvmArgs,
}

#[derive(Args, Debug)]
#[group(id = "source", required = true, multiple = false, args = ["labels", "eeg_ranking", "mouse_log"])]
pub struct FeedbackArgs {
    /// Collection to re-rank.
    #[arg(long)]
    pub features: PathBuf,
    /// JSON file with `positives` and `negatives` id lists.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// EEG ranking CSV; its top and bottom rows become the labels.
    #[arg(long)]
    pub eeg_ranking: Option<PathBuf>,
    #[arg(long, default_value_t = FEEDBACK_POSITIVES)]
    pub positives: usize,
    #[arg(long, default_value_t = FEEDBACK_NEGATIVES)]
    pub negatives: usize,
    /// Mouse log; clicked images are positives, seen but unclicked negatives.
    #[arg(long, requires = "plan")]
    pub mouse_log: Option<PathBuf>,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub svm: SvmArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// JSON experiment configuration; missing fields take defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output stem; writes `<out>.json` and `<out>.csv`.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Mouse,
    Rsvp,
}

impl From<ModeArg> for SessionMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Mouse => SessionMode::Mouse,
            ModeArg::Rsvp => SessionMode::Rsvp,
        }
    }
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// One session per plan, named `<query>-<mode>`.
    #[arg(long, required = true)]
    pub plan: Vec<PathBuf>,
    #[arg(long)]
    pub images: PathBuf,
    #[arg(long, value_enum)]
    pub mode: ModeArg,
    /// Time budget in seconds; defaults to the plan's stimulus span.
    #[arg(long)]
    pub duration: Option<u32>,
    #[arg(long, default_value_t = 20)]
    pub page_size: usize,
    #[arg(long, default_value = "Find every image that contains the object shown in the examples")]
    pub query_text: String,
    /// Where finished logs are written.
    #[arg(long, default_value = "sessions")]
    pub sessions: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
}

fn load_or_default<T: serde::de::DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        Some(p) => Ok(read_json(p)?),
        None => Ok(T::default()),
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn suffixed(stem: &Path, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{}{suffix}", stem.display()))
}

fn relevant_of(m: &FeatureMatrix) -> Option<HashSet<String>> {
    let labels = m.labels().ok()?;
    Some(
        m.image_ids
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l)
            .map(|(id, _)| id.clone())
            .collect(),
    )
}

fn ap_of(ranking: &Ranking, relevant: Option<&HashSet<String>>) -> Result<Option<f64>> {
    match relevant {
        Some(rel) => Ok(Some(average_precision(&ranking.ids().collect::<Vec<_>>(), rel)?)),
        None => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenPlan(a) => gen_plan(a),
        Command::GenDataset(a) => {
            let m = gen_images(a.n, a.targets, &GlyphSpec::default(), a.seed, &a.out)?;
            print_json(&serde_json::json!({ "n_images": m.images.len(), "n_targets": m.target_ids().len() }))
        }
        Command::GenFeatures(a) => gen_features(a),
        Command::Simulate(a) => simulate(a),
        Command::Preprocess(a) => {
            let rec = load_recording(&a.rec)?;
            let markers = load_markers(&a.markers)?;
            let cfg: PipelineConfig = load_or_default(a.config.as_deref())?;
            let m = preprocess_session(&rec, &markers, &cfg)?;
            save_feature_matrix(&m, &a.out)?;
            print_json(&serde_json::json!({ "n_rows": m.n_rows(), "n_dims": m.n_dims(), "n_targets": m.n_targets() }))
        }
        Command::EvalEeg(a) => eval_eeg(a),
        Command::Rank(a) => rank(a),
        Command::Feedback(a) => feedback(a),
        Command::Compare(a) => {
            let cfg: ExperimentConfig = load_or_default(a.config.as_deref())?;
            let report = run_compare(&cfg)?;
            report.write(&a.out)?;
            print!("{}", report.to_csv());
            Ok(())
        }
        Command::Serve(a) => serve(a),
    }
}

fn gen_plan(a: GenPlanArgs) -> Result<()> {
    let (targets, distractors) = match &a.images {
        Some(dir) => {
            let path = dir.join("manifest.json");
            let m: ImageManifest = read_json(&path)?;
            (m.target_ids(), m.distractor_ids())
        }
        None => synthetic_ids(&a.query),
    };
    let plan = build_plan(&a.query, &targets, &distractors, a.rate, a.seed, a.gap)?;
    save_plan(&plan, &a.out)?;
    print_json(&serde_json::json!({ "query_id": plan.query_id, "rate_hz": plan.rate_hz, "blocks": plan.blocks.len() }))
}

fn gen_features(a: GenFeaturesArgs) -> Result<()> {
    let mut spec: FeatureSetSpec = load_or_default(a.config.as_deref())?;
    if let Some(v) = a.n {
        spec.n = v;
    }
    if let Some(v) = a.d {
        spec.d = v;
    }
    if let Some(v) = a.n_relevant {
        spec.n_relevant = v;
    }
    if let Some(v) = a.separation {
        spec.separation = v;
    }
    if let Some(v) = a.seed {
        spec.seed = v;
    }
    let set = gen_feature_set(&spec)?;
    save_feature_matrix(&set.matrix, &a.out)?;
    write_json(&suffixed(&a.out, ".truth.json"), &set.truth)?;
    print_json(&serde_json::json!({ "n": set.matrix.n_rows(), "d": set.matrix.n_dims(), "n_relevant": set.truth.relevant.len() }))
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut profile: UserProfile = read_json(&a.profile)?;
    if let Some(seed) = a.seed {
        profile.seed = seed;
    }
    let plan = load_plan(&a.plan)?;
    let s = simulate_recording(&plan, &profile)?;
    save_recording(&s.recording, &a.out)?;
    save_markers(&s.markers, &suffixed(&a.out, ".markers.jsonl"))?;
    save_log(&s.buttons, &suffixed(&a.out, ".buttons.json"))?;
    print_json(&serde_json::json!({
        "n_samples": s.recording.n_samples(),
        "n_channels": s.recording.n_channels(),
        "n_markers": s.markers.len(),
    }))
}

fn eval_eeg(a: EvalEegArgs) -> Result<()> {
    if a.queries.len() != N_QUERIES {
        bail!("--queries needs exactly {N_QUERIES} ids, got {}", a.queries.len());
    }
    let matrices = a
        .queries
        .iter()
        .map(|q| {
            let stem = a.features_dir.join(q);
            load_feature_matrix(&stem).with_context(|| format!("features for query {q}"))
        })
        .collect::<Result<Vec<_>>>()?;
    let evals = evaluate_queries(&a.queries, &matrices, &a.svm.load()?)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for e in &evals {
        let ranking = e.ranking.as_ref().expect("rankings are kept in memory");
        save_ranking(ranking, &a.out.join(format!("{}.eeg-rank.csv", e.query_id)))?;
    }
    let report = EegReport::new(&evals, &matrices);
    write_json(&a.out.join("report.json"), &report)?;
    let csv = a.out.join("report.csv");
    std::fs::write(&csv, report.to_csv()).with_context(|| format!("writing {}", csv.display()))?;
    print!("{}", report.to_csv());
    println!("mean_auc,{}", report.mean_auc);
    Ok(())
}

#[derive(Serialize)]
struct RankSummary {
    query_id: String,
    n: usize,
    ap: Option<f64>,
}

fn rank(a: RankArgs) -> Result<()> {
    let (ranking, ap) = match a.from {
        RankSource::Eeg => {
            let target = load_feature_matrix(a.features.as_deref().expect("required by clap"))?;
            let train = a.train.iter().map(|p| load_feature_matrix(p)).collect::<rsvp_core::Result<Vec<_>>>()?;
            let train = FeatureMatrix::concat(&train.iter().collect::<Vec<_>>())?;
            let model = fit_matrix(&train, &a.svm.load()?)?;
            let scores = model.decision_scores(&target.data)?;
            let ranking = ranking_from_scores(&a.query_id, &target.image_ids, &scores, &target.image_ids)?;
            let ap = ap_of(&ranking, relevant_of(&target).as_ref())?;
            (ranking, ap)
        }
        RankSource::Mouse => {
            let log = load_log(a.log.as_deref().expect("required by clap"))?;
            let mut plan = load_plan(a.plan.as_deref().expect("required by clap"))?;
            plan.query_id = a.query_id.clone();
            let (ranking, ap) = mouse_ranking(&plan, &log)?;
            (ranking, Some(ap))
        }
    };
    save_ranking(&ranking, &a.out)?;
    print_json(&RankSummary { query_id: a.query_id, n: ranking.len(), ap })
}

fn feedback(a: FeedbackArgs) -> Result<()> {
    let collection = load_feature_matrix(&a.features)?;
    let labels = if let Some(p) = &a.labels {
        read_json::<FeedbackLabels>(p)?
    } else if let Some(p) = &a.eeg_ranking {
        select_feedback_labels_eeg(&load_ranking(p, "eeg")?, a.positives, a.negatives)?
    } else {
        let log = load_log(a.mouse_log.as_deref().expect("group requires one source"))?;
        let plan = load_plan(a.plan.as_deref().expect("required with --mouse-log"))?;
        select_feedback_labels_mouse(&annotation_sets(&log, &plan.display_ids())?)?
    };
    let ranking = feedback_rank("feedback", &labels, &collection, &a.svm.load()?)?;
    save_ranking(&ranking, &a.out)?;
    let ap = ap_of(&ranking, relevant_of(&collection).as_ref())?;
    print_json(&serde_json::json!({
        "n": ranking.len(),
        "n_positives": labels.positives.len(),
        "n_negatives": labels.negatives.len(),
        "ap": ap,
    }))
}

/// Session configurations for `serve`, one per plan.
pub fn session_configs(a: &ServeArgs) -> Result<Vec<SessionConfig>> {
    let manifest: Option<ImageManifest> = {
        let path = a.images.join("manifest.json");
        if path.exists() {
            Some(read_json(&path)?)
        } else {
            None
        }
    };
    let mode: SessionMode = a.mode.into();
    let tag = match mode {
        SessionMode::Mouse => "mouse",
        SessionMode::Rsvp => "rsvp",
    };
    if a.page_size == 0 {
        bail!("--page-size must be positive");
    }
    a.plan
        .iter()
        .map(|p| {
            let plan = load_plan(p)?;
            Ok(SessionConfig {
                session_id: format!("{}-{tag}", plan.query_id),
                mode,
                duration_s: a.duration.unwrap_or_else(|| budget_for_rate(plan.rate_hz)),
                query_text: a.query_text.clone(),
                example_image_ids: manifest.as_ref().map(|m| m.example_ids.clone()).unwrap_or_default(),
                page_size: a.page_size,
                plan,
            })
        })
        .collect()
}

fn serve(a: ServeArgs) -> Result<()> {
    let configs = session_configs(&a)?;
    let ids: Vec<String> = configs.iter().map(|c| c.session_id.clone()).collect();
    let state = service::AppState::new(configs, &a.images, &a.sessions);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(a.addr)
            .await
            .with_context(|| format!("binding {}", a.addr))?;
        eprintln!("serving sessions {} on http://{}", ids.join(", "), a.addr);
        axum::serve(listener, service::router(state)).await?;
        Ok(())
    })
}
