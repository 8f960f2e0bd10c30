//! HTTP backend for the annotation interface.
//!
//! Each session wraps one presentation plan. Events are appended under a
//! per-session lock, deduplicated by client sequence number, and the log is
//! written to the session directory on `finish`.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rsvp_core::dataio::{save_log, AnnotationLog, EventKind, LogEvent, RsvpPlan, SessionMode};
use rsvp_core::experiment::mouse_ranking;
use rsvp_core::retrieval::annotation_sets;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub session_id: String,
    pub plan: RsvpPlan,
    pub mode: SessionMode,
    pub duration_s: u32,
    pub query_text: String,
    pub example_image_ids: Vec<String>,
    pub page_size: usize,
}

struct Session {
    cfg: SessionConfig,
    known_ids: HashSet<String>,
    shown: HashSet<String>,
    seqs: HashSet<u64>,
    log: AnnotationLog,
    started: Instant,
    finished: Option<FinishSummary>,
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<HashMap<String, Mutex<Session>>>,
    images_dir: PathBuf,
    sessions_dir: PathBuf,
}

impl AppState {
    pub fn new(configs: Vec<SessionConfig>, images_dir: &Path, sessions_dir: &Path) -> Self {
        let sessions = configs
            .into_iter()
            .map(|cfg| {
                let log = AnnotationLog {
                    session_id: cfg.session_id.clone(),
                    mode: cfg.mode,
                    rate_hz: cfg.plan.rate_hz,
                    duration_s: cfg.duration_s,
                    events: vec![],
                };
                let session = Session {
                    known_ids: cfg.plan.display_ids().into_iter().collect(),
                    shown: HashSet::new(),
                    seqs: HashSet::new(),
                    log,
                    started: Instant::now(),
                    finished: None,
                    cfg,
                };
                (session.cfg.session_id.clone(), Mutex::new(session))
            })
            .collect();
        Self {
            sessions: Arc::new(sessions),
            images_dir: images_dir.to_path_buf(),
            sessions_dir: sessions_dir.to_path_buf(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/sessions/{id}/manifest", get(manifest))
        .route("/api/sessions/{id}/events", post(events))
        .route("/api/sessions/{id}/finish", post(finish))
        .route("/api/images/{id}", get(image))
        .with_state(state)
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub session_id: String,
    pub mode: SessionMode,
    pub rate_hz: u32,
    pub duration_s: u32,
    pub query_text: String,
    pub example_image_ids: Vec<String>,
    /// Grid pages for the mouse interface.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pages: Option<Vec<Vec<String>>>,
    /// Blocks in presentation order for the RSVP player.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stimulus_order: Option<Vec<Vec<String>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inter_block_gap_s: Option<f64>,
}

/// One client event. `seq` makes retries idempotent.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClientEvent {
    pub seq: u64,
    pub t_ms: u64,
    pub kind: EventKind,
    #[serde(default)]
    pub image_id: Option<String>,
    #[serde(default)]
    pub page: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventBatch {
    events: Vec<ClientEvent>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct EventsAck {
    pub accepted: usize,
    pub duplicates: usize,
    pub n_events: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FinishSummary {
    /// AP of the click ranking; absent for RSVP sessions, whose button
    /// presses play no part in retrieval.
    pub ap: Option<f64>,
    pub n_clicks: usize,
    pub n_seen: usize,
    pub log_path: PathBuf,
}

#[derive(Debug)]
enum ApiError {
    NotFound(String),
    Unprocessable(String),
    Conflict(String),
    Internal(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Unprocessable(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (status, Json(serde_json::json!({ "error": message }))).into_response()
    }
}

fn session<'a>(state: &'a AppState, id: &str) -> Result<&'a Mutex<Session>, ApiError> {
    state
        .sessions
        .get(id)
        .ok_or_else(|| ApiError::NotFound(format!("unknown session {id}")))
}

async fn manifest(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<Manifest>, ApiError> {
    let s = session(&state, &id)?.lock().await;
    let cfg = &s.cfg;
    let ids = |items: &[rsvp_core::dataio::PlanItem]| items.iter().map(|i| i.image_id.clone()).collect::<Vec<_>>();
    let mut m = Manifest {
        session_id: cfg.session_id.clone(),
        mode: cfg.mode,
        rate_hz: cfg.plan.rate_hz,
        duration_s: cfg.duration_s,
        query_text: cfg.query_text.clone(),
        example_image_ids: cfg.example_image_ids.clone(),
        pages: None,
        stimulus_order: None,
        inter_block_gap_s: None,
    };
    match cfg.mode {
        SessionMode::Mouse => {
            let order = cfg.plan.display_ids();
            m.pages = Some(order.chunks(cfg.page_size).map(<[String]>::to_vec).collect());
        }
        SessionMode::Rsvp => {
            m.stimulus_order = Some(cfg.plan.blocks.iter().map(|b| ids(b)).collect());
            m.inter_block_gap_s = Some(cfg.plan.inter_block_gap_s);
        }
    }
    Ok(Json(m))
}

/// Checks one event against the session before it is stored.
fn check_event(s: &Session, ev: &ClientEvent, shown_in_batch: &HashSet<String>, last_t: u64) -> Result<(), String> {
    let allowed = match s.cfg.mode {
        SessionMode::Mouse => matches!(ev.kind, EventKind::Show | EventKind::Click | EventKind::Next),
        SessionMode::Rsvp => matches!(ev.kind, EventKind::Show | EventKind::Button),
    };
    if !allowed {
        return Err(format!("{:?} events are not part of a {:?} session", ev.kind, s.cfg.mode));
    }
    if ev.t_ms < last_t {
        return Err(format!("event seq {} at {} ms precedes the previous event at {last_t} ms", ev.seq, ev.t_ms));
    }
    match (&ev.kind, ev.image_id.as_deref()) {
        (EventKind::Show | EventKind::Click, None) => Err(format!("{:?} event seq {} has no image_id", ev.kind, ev.seq)),
        (_, Some(id)) if !s.known_ids.contains(id) => Err(format!("image {id} is not part of this session")),
        (EventKind::Click | EventKind::Button, Some(id)) if !s.shown.contains(id) && !shown_in_batch.contains(id) => {
            Err(format!("image {id} was not shown before seq {}", ev.seq))
        }
        _ => Ok(()),
    }
}

async fn events(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<EventsAck>, ApiError> {
    let mut s = session(&state, &id)?.lock().await;
    if s.finished.is_some() {
        return Err(ApiError::Conflict(format!("session {id} is finished")));
    }
    let batch: EventBatch =
        serde_json::from_slice(&body).map_err(|e| ApiError::Unprocessable(format!("malformed events: {e}")))?;

    // Validate the whole batch first so a rejected batch leaves no trace.
    let mut fresh = Vec::new();
    let mut batch_seqs = HashSet::new();
    let mut shown_in_batch = HashSet::new();
    let mut last_t = s.log.events.last().map_or(0, |e| e.t_ms);
    let mut duplicates = 0;
    for ev in batch.events {
        if s.seqs.contains(&ev.seq) || !batch_seqs.insert(ev.seq) {
            duplicates += 1;
            continue;
        }
        check_event(&s, &ev, &shown_in_batch, last_t).map_err(ApiError::Unprocessable)?;
        if ev.kind == EventKind::Show {
            shown_in_batch.insert(ev.image_id.clone().unwrap_or_default());
        }
        last_t = ev.t_ms;
        fresh.push(ev);
    }
    let server_ms = s.started.elapsed().as_millis() as u64;
    let accepted = fresh.len();
    for ev in fresh {
        s.seqs.insert(ev.seq);
        if let (EventKind::Show, Some(img)) = (ev.kind, &ev.image_id) {
            s.shown.insert(img.clone());
        }
        s.log.events.push(LogEvent {
            seq: Some(ev.seq),
            server_ms: Some(server_ms),
            ..LogEvent::new(ev.t_ms, ev.kind, ev.image_id.as_deref(), ev.page)
        });
    }
    Ok(Json(EventsAck {
        accepted,
        duplicates,
        n_events: s.log.events.len(),
    }))
}

async fn finish(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<FinishSummary>, ApiError> {
    let mut s = session(&state, &id)?.lock().await;
    if s.finished.is_some() {
        return Err(ApiError::Conflict(format!("session {id} is already finished")));
    }
    let display = s.cfg.plan.display_ids();
    let sets = annotation_sets(&s.log, &display).map_err(|e| ApiError::Unprocessable(e.to_string()))?;
    let deadline = s.log.deadline_ms();
    let n_seen = s
        .log
        .events
        .iter()
        .filter(|e| e.kind == EventKind::Show && e.t_ms <= deadline)
        .filter_map(|e| e.image_id.as_deref())
        .collect::<HashSet<_>>()
        .len();
    let (ap, n_clicks) = match s.cfg.mode {
        SessionMode::Mouse => {
            let (_, ap) = mouse_ranking(&s.cfg.plan, &s.log).map_err(|e| ApiError::Internal(e.to_string()))?;
            (Some(ap), sets.p_a.len())
        }
        SessionMode::Rsvp => {
            let presses = s.log.events.iter().filter(|e| e.kind == EventKind::Button && e.t_ms <= deadline);
            (None, presses.count())
        }
    };
    std::fs::create_dir_all(&state.sessions_dir).map_err(|e| ApiError::Internal(e.to_string()))?;
    let log_path = state.sessions_dir.join(format!("{id}.log.json"));
    save_log(&s.log, &log_path).map_err(|e| ApiError::Internal(e.to_string()))?;
    let summary = FinishSummary { ap, n_clicks, n_seen, log_path };
    s.finished = Some(summary.clone());
    Ok(Json(summary))
}

/// Image ids become file names, so only a conservative alphabet is served.
fn safe_id(id: &str) -> bool {
    !id.is_empty() && id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

async fn image(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Response, ApiError> {
    let id = id.strip_suffix(".png").unwrap_or(&id);
    if !safe_id(id) {
        return Err(ApiError::NotFound(format!("no image {id}")));
    }
    let path = state.images_dir.join(format!("{id}.png"));
    let bytes = tokio::fs::read(&path)
        .await
        .map_err(|_| ApiError::NotFound(format!("no image {id}")))?;
    Ok(([(header::CONTENT_TYPE, "image/png")], bytes).into_response())
}
