//! Shared domain types and their on-disk formats.
//!
//! Array-valued objects use a two-file layout: a JSON header next to a raw
//! little-endian `f32` payload. Samples and features are held as `f64` in
//! memory and narrowed to `f32` on save, so `load(save(x)) == x` holds for
//! any value that is exactly representable in single precision (everything
//! the synthetic generator emits is).
//!
//! | object          | files                                         |
//! |-----------------|-----------------------------------------------|
//! | recording       | `<name>.rec.json` + `<name>.rec.f32`          |
//! | feature matrix  | `<name>.feat.json` + `<name>.feat.f32`        |
//! | markers         | `<name>.markers.jsonl`                        |
//! | plan, log       | single JSON document                          |
//! | ranking         | CSV `rank,image_id,score`                     |

use std::collections::HashSet;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;
pub const ENCODING_F32LE: &str = "f32le";
pub const LAYOUT_CHANNEL_MAJOR: &str = "channel-major";

pub const BLOCKS_PER_QUERY: usize = 5;
pub const IMAGES_PER_BLOCK: usize = 200;
pub const TARGETS_PER_BLOCK: usize = 10;
pub const IMAGES_PER_QUERY: usize = BLOCKS_PER_QUERY * IMAGES_PER_BLOCK;
pub const TARGETS_PER_QUERY: usize = BLOCKS_PER_QUERY * TARGETS_PER_BLOCK;

// ---------------------------------------------------------------------------
// Recording

/// Multichannel EEG in microvolts, shape `n_channels x n_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub sample_rate_hz: u32,
    pub channel_labels: Vec<String>,
    pub samples: Array2<f64>,
}

impl RawRecording {
    pub fn new(sample_rate_hz: u32, channel_labels: Vec<String>, samples: Array2<f64>) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Precondition("sample rate must be positive".into()));
        }
        if channel_labels.is_empty() {
            return Err(Error::Precondition("recording needs at least one channel".into()));
        }
        if channel_labels.len() != samples.nrows() {
            return Err(Error::Precondition(format!(
                "{} channel labels for {} sample rows",
                channel_labels.len(),
                samples.nrows()
            )));
        }
        Ok(Self {
            sample_rate_hz,
            channel_labels,
            samples,
        })
    }

    pub fn n_channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn n_samples(&self) -> usize {
        self.samples.ncols()
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RecordingHeader {
    version: u32,
    sample_rate_hz: u32,
    n_channels: usize,
    n_samples: usize,
    channel_labels: Vec<String>,
    encoding: String,
    layout: String,
}

/// Header and payload paths for a two-file array object.
///
/// Accepts the bare stem (`out/s1`), the header path (`out/s1.rec.json`) or
/// the payload path (`out/s1.rec.f32`).
#[derive(Debug, Clone)]
pub struct ArrayPaths {
    pub header: PathBuf,
    pub payload: PathBuf,
}

impl ArrayPaths {
    pub fn new(path: &Path, kind: &str) -> Self {
        let s = path.to_string_lossy();
        let header_ext = format!(".{kind}.json");
        let payload_ext = format!(".{kind}.f32");
        let stem = s
            .strip_suffix(&header_ext)
            .or_else(|| s.strip_suffix(&payload_ext))
            .unwrap_or(&s)
            .to_string();
        Self {
            header: PathBuf::from(format!("{stem}{header_ext}")),
            payload: PathBuf::from(format!("{stem}{payload_ext}")),
        }
    }
}

pub fn save_recording(rec: &RawRecording, path: &Path) -> Result<ArrayPaths> {
    let paths = ArrayPaths::new(path, "rec");
    let header = RecordingHeader {
        version: FORMAT_VERSION,
        sample_rate_hz: rec.sample_rate_hz,
        n_channels: rec.n_channels(),
        n_samples: rec.n_samples(),
        channel_labels: rec.channel_labels.clone(),
        encoding: ENCODING_F32LE.into(),
        layout: LAYOUT_CHANNEL_MAJOR.into(),
    };
    write_json(&paths.header, &header)?;
    // Standard layout of Array2 is row-major, i.e. channel-major here.
    write_f32_payload(&paths.payload, rec.samples.iter().copied())?;
    Ok(paths)
}

pub fn load_recording(path: &Path) -> Result<RawRecording> {
    let paths = ArrayPaths::new(path, "rec");
    let header: RecordingHeader = read_json(&paths.header)?;
    check_header_common(&paths.header, header.version, &header.encoding)?;
    if header.layout != LAYOUT_CHANNEL_MAJOR {
        return Err(Error::format(
            &paths.header,
            format!("unknown layout '{}'", header.layout),
        ));
    }
    if header.channel_labels.len() != header.n_channels {
        return Err(Error::format(
            &paths.header,
            format!(
                "channel_labels has {} entries but n_channels = {}",
                header.channel_labels.len(),
                header.n_channels
            ),
        ));
    }
    let expected = header.n_channels * header.n_samples;
    let values = read_f32_payload(&paths.payload, expected)?;
    let samples = Array2::from_shape_vec((header.n_channels, header.n_samples), values)
        .map_err(|e| Error::format(&paths.payload, e.to_string()))?;
    RawRecording::new(header.sample_rate_hz, header.channel_labels, samples)
        .map_err(|e| Error::format(&paths.header, e.to_string()))
}

fn check_header_common(path: &Path, version: u32, encoding: &str) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    if encoding != ENCODING_F32LE {
        return Err(Error::format(path, format!("unknown encoding tag '{encoding}'")));
    }
    Ok(())
}

fn write_f32_payload(path: &Path, values: impl Iterator<Item = f64>) -> Result<()> {
    let (lo, _) = values.size_hint();
    let mut bytes = Vec::with_capacity(lo * 4);
    for v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_f32_payload(path: &Path, expected: usize) -> Result<Vec<f64>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() % 4 != 0 {
        return Err(Error::format(
            path,
            format!("payload size {} is not a multiple of 4 bytes", bytes.len()),
        ));
    }
    let found = bytes.len() / 4;
    if found != expected {
        return Err(Error::format(
            path,
            format!("expected {expected} f32 values, found {found}"),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

// ---------------------------------------------------------------------------
// Markers

/// Stimulus onset, as a sample index into the recording it belongs to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventMarker {
    pub onset_sample: usize,
    pub image_id: String,
    pub is_target: bool,
    pub block_index: usize,
    pub query_id: String,
}

pub fn save_markers(markers: &[EventMarker], path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for m in markers {
        let line = serde_json::to_string(m).map_err(|e| Error::format(path, e.to_string()))?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_markers(path: &Path) -> Result<Vec<EventMarker>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let m: EventMarker = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        out.push(m);
    }
    validate_markers(&out).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(out)
}

/// Markers must be sorted by onset and carry a valid block index.
pub fn validate_markers(markers: &[EventMarker]) -> Result<()> {
    for (i, pair) in markers.windows(2).enumerate() {
        if pair[1].onset_sample < pair[0].onset_sample {
            return Err(Error::Data(format!(
                "markers not sorted: #{} onset {} follows onset {}",
                i + 1,
                pair[1].onset_sample,
                pair[0].onset_sample
            )));
        }
    }
    if let Some(m) = markers.iter().find(|m| m.block_index >= BLOCKS_PER_QUERY) {
        return Err(Error::Data(format!(
            "marker for {} has block_index {}",
            m.image_id, m.block_index
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Epochs and features

/// One stimulus-locked segment, `n_channels x n_epoch_samples`.
#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub image_id: String,
    pub is_target: bool,
    pub data: Array2<f64>,
    pub sample_rate_hz: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub image_id: String,
    pub is_target: bool,
    pub values: Vec<f64>,
}

/// Row-major feature matrix with one row per image.
///
/// `is_target` is optional: EEG features carry their stimulus labels, image
/// descriptor matrices usually do not.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub image_ids: Vec<String>,
    pub is_target: Option<Vec<bool>>,
    pub data: Array2<f64>,
}

impl FeatureMatrix {
    pub fn new(image_ids: Vec<String>, is_target: Option<Vec<bool>>, data: Array2<f64>) -> Result<Self> {
        if image_ids.len() != data.nrows() {
            return Err(Error::Precondition(format!(
                "{} image ids for {} rows",
                image_ids.len(),
                data.nrows()
            )));
        }
        if let Some(labels) = &is_target {
            if labels.len() != data.nrows() {
                return Err(Error::Precondition(format!(
                    "{} labels for {} rows",
                    labels.len(),
                    data.nrows()
                )));
            }
        }
        Ok(Self {
            image_ids,
            is_target,
            data,
        })
    }

    pub fn empty(n_dims: usize) -> Self {
        Self {
            image_ids: Vec::new(),
            is_target: Some(Vec::new()),
            data: Array2::zeros((0, n_dims)),
        }
    }

    pub fn from_vectors(vectors: Vec<FeatureVector>, n_dims: usize) -> Result<Self> {
        let mut data = Array2::zeros((vectors.len(), n_dims));
        let mut ids = Vec::with_capacity(vectors.len());
        let mut labels = Vec::with_capacity(vectors.len());
        for (i, v) in vectors.into_iter().enumerate() {
            if v.values.len() != n_dims {
                return Err(Error::Precondition(format!(
                    "feature vector for {} has {} values, expected {n_dims}",
                    v.image_id,
                    v.values.len()
                )));
            }
            data.row_mut(i)
                .iter_mut()
                .zip(&v.values)
                .for_each(|(d, s)| *d = *s);
            ids.push(v.image_id);
            labels.push(v.is_target);
        }
        Ok(Self {
            image_ids: ids,
            is_target: Some(labels),
            data,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_dims(&self) -> usize {
        self.data.ncols()
    }

    /// Labels, or a data error when this matrix carries none.
    pub fn labels(&self) -> Result<&[bool]> {
        self.is_target
            .as_deref()
            .ok_or_else(|| Error::Data("feature matrix carries no target labels".into()))
    }

    pub fn n_targets(&self) -> usize {
        self.is_target
            .as_ref()
            .map_or(0, |l| l.iter().filter(|&&t| t).count())
    }

    /// Rows in the given order, copying labels along.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let data = self.data.select(ndarray::Axis(0), rows);
        Self {
            image_ids: rows.iter().map(|&r| self.image_ids[r].clone()).collect(),
            is_target: self
                .is_target
                .as_ref()
                .map(|l| rows.iter().map(|&r| l[r]).collect()),
            data,
        }
    }

    /// Row-wise concatenation; labels survive only if every part has them.
    pub fn concat(parts: &[&FeatureMatrix]) -> Result<Self> {
        let n_dims = parts.first().map_or(0, |p| p.n_dims());
        if parts.iter().any(|p| p.n_dims() != n_dims) {
            return Err(Error::Precondition("cannot concatenate matrices of different widths".into()));
        }
        let views: Vec<_> = parts.iter().map(|p| p.data.view()).collect();
        let data = ndarray::concatenate(ndarray::Axis(0), &views)
            .map_err(|e| Error::Precondition(e.to_string()))?;
        let image_ids = parts.iter().flat_map(|p| p.image_ids.iter().cloned()).collect();
        let is_target = parts
            .iter()
            .map(|p| p.is_target.clone())
            .collect::<Option<Vec<_>>>()
            .map(|v| v.concat());
        Ok(Self {
            image_ids,
            is_target,
            data,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct FeatureHeader {
    version: u32,
    n_rows: usize,
    n_dims: usize,
    image_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    is_target: Option<Vec<bool>>,
}

pub fn save_feature_matrix(m: &FeatureMatrix, path: &Path) -> Result<ArrayPaths> {
    let paths = ArrayPaths::new(path, "feat");
    let header = FeatureHeader {
        version: FORMAT_VERSION,
        n_rows: m.n_rows(),
        n_dims: m.n_dims(),
        image_ids: m.image_ids.clone(),
        is_target: m.is_target.clone(),
    };
    write_json(&paths.header, &header)?;
    write_f32_payload(&paths.payload, m.data.iter().copied())?;
    Ok(paths)
}

pub fn load_feature_matrix(path: &Path) -> Result<FeatureMatrix> {
    let paths = ArrayPaths::new(path, "feat");
    let header: FeatureHeader = read_json(&paths.header)?;
    check_header_common(&paths.header, header.version, ENCODING_F32LE)?;
    if header.image_ids.len() != header.n_rows {
        return Err(Error::format(
            &paths.header,
            format!(
                "image_ids has {} entries but n_rows = {}",
                header.image_ids.len(),
                header.n_rows
            ),
        ));
    }
    if let Some(l) = &header.is_target {
        if l.len() != header.n_rows {
            return Err(Error::format(
                &paths.header,
                format!("is_target has {} entries but n_rows = {}", l.len(), header.n_rows),
            ));
        }
    }
    let values = read_f32_payload(&paths.payload, header.n_rows * header.n_dims)?;
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        let (row, col) = (pos / header.n_dims.max(1), pos % header.n_dims.max(1));
        return Err(Error::Data(format!(
            "{}: non-finite value at row {row} ({}), dim {col}",
            paths.payload.display(),
            header.image_ids[row]
        )));
    }
    let data = Array2::from_shape_vec((header.n_rows, header.n_dims), values)
        .map_err(|e| Error::format(&paths.payload, e.to_string()))?;
    Ok(FeatureMatrix {
        image_ids: header.image_ids,
        is_target: header.is_target,
        data,
    })
}

// ---------------------------------------------------------------------------
// Plans

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanItem {
    pub image_id: String,
    pub is_target: bool,
}

/// Presentation plan for one query: five blocks shown in order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RsvpPlan {
    pub query_id: String,
    pub rate_hz: u32,
    pub blocks: Vec<Vec<PlanItem>>,
    pub inter_block_gap_s: f64,
    pub seed: u64,
}

impl RsvpPlan {
    /// Checks every structural invariant: rate, block sizes, per-block
    /// target counts and uniqueness of image ids.
    pub fn validate(&self) -> Result<()> {
        if self.rate_hz != 5 && self.rate_hz != 10 {
            return Err(Error::Data(format!("rate_hz must be 5 or 10, got {}", self.rate_hz)));
        }
        if !(self.inter_block_gap_s.is_finite() && self.inter_block_gap_s >= 0.0) {
            return Err(Error::Data("inter_block_gap_s must be a non-negative number".into()));
        }
        if self.blocks.len() != BLOCKS_PER_QUERY {
            return Err(Error::Data(format!(
                "plan has {} blocks, expected {BLOCKS_PER_QUERY}",
                self.blocks.len()
            )));
        }
        let mut seen = HashSet::new();
        for (b, block) in self.blocks.iter().enumerate() {
            if block.len() != IMAGES_PER_BLOCK {
                return Err(Error::Data(format!(
                    "block {b} has {} images, expected {IMAGES_PER_BLOCK}",
                    block.len()
                )));
            }
            let targets = block.iter().filter(|i| i.is_target).count();
            if targets != TARGETS_PER_BLOCK {
                return Err(Error::Data(format!(
                    "block {b} has {targets} targets, expected {TARGETS_PER_BLOCK}"
                )));
            }
            for item in block {
                if !seen.insert(item.image_id.as_str()) {
                    return Err(Error::Data(format!("image {} repeated in plan", item.image_id)));
                }
            }
        }
        Ok(())
    }

    /// All items in presentation order.
    pub fn display_order(&self) -> impl Iterator<Item = &PlanItem> {
        self.blocks.iter().flatten()
    }

    pub fn display_ids(&self) -> Vec<String> {
        self.display_order().map(|i| i.image_id.clone()).collect()
    }

    pub fn target_ids(&self) -> HashSet<String> {
        self.display_order()
            .filter(|i| i.is_target)
            .map(|i| i.image_id.clone())
            .collect()
    }
}

pub fn save_plan(plan: &RsvpPlan, path: &Path) -> Result<()> {
    write_json(path, plan)
}

pub fn load_plan(path: &Path) -> Result<RsvpPlan> {
    let plan: RsvpPlan = read_json(path)?;
    plan.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Annotation logs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SessionMode {
    Mouse,
    Rsvp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EventKind {
    Show,
    Click,
    Next,
    Button,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEvent {
    pub t_ms: u64,
    pub kind: EventKind,
    #[serde(default)]
    pub image_id: Option<String>,
    #[serde(default)]
    pub page: Option<u32>,
    /// Client sequence number, present for events that came through the service.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seq: Option<u64>,
    /// Server arrival time in ms since session start.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub server_ms: Option<u64>,
}

impl LogEvent {
    pub fn new(t_ms: u64, kind: EventKind, image_id: Option<&str>, page: Option<u32>) -> Self {
        Self {
            t_ms,
            kind,
            image_id: image_id.map(str::to_string),
            page,
            seq: None,
            server_ms: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationLog {
    pub session_id: String,
    pub mode: SessionMode,
    pub rate_hz: u32,
    pub duration_s: u32,
    pub events: Vec<LogEvent>,
}

impl AnnotationLog {
    /// Timestamps must be non-decreasing and every click must reference an
    /// image shown at or before it. Button presses may lack an image (a
    /// press during a rest screen); when they name one it must have been
    /// shown. Events past the time budget are allowed here and dropped by
    /// the consumers.
    pub fn validate(&self) -> Result<()> {
        let mut shown: HashSet<&str> = HashSet::new();
        let mut last_t = 0;
        for (i, ev) in self.events.iter().enumerate() {
            if ev.t_ms < last_t {
                return Err(Error::LogConsistency(format!(
                    "event #{i} at t={} ms precedes previous event at {last_t} ms",
                    ev.t_ms
                )));
            }
            last_t = ev.t_ms;
            match ev.kind {
                EventKind::Show => {
                    let id = ev.image_id.as_deref().ok_or_else(|| {
                        Error::LogConsistency(format!("show event #{i} has no image_id"))
                    })?;
                    shown.insert(id);
                }
                EventKind::Click | EventKind::Button => match ev.image_id.as_deref() {
                    Some(id) if !shown.contains(id) => {
                        return Err(Error::LogConsistency(format!(
                            "{:?} event #{i} at t={} ms references {id}, which was never shown before",
                            ev.kind, ev.t_ms
                        )));
                    }
                    None if ev.kind == EventKind::Click => {
                        return Err(Error::LogConsistency(format!("click event #{i} has no image_id")));
                    }
                    _ => {}
                },
                EventKind::Next => {}
            }
        }
        Ok(())
    }

    pub fn deadline_ms(&self) -> u64 {
        self.duration_s as u64 * 1000
    }
}

pub fn save_log(log: &AnnotationLog, path: &Path) -> Result<()> {
    write_json(path, log)
}

pub fn load_log(path: &Path) -> Result<AnnotationLog> {
    let log: AnnotationLog = read_json(path)?;
    log.validate().map_err(|e| Error::format(path, e.to_string()))?;
    Ok(log)
}

// ---------------------------------------------------------------------------
// Rankings

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub image_id: String,
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub query_id: String,
    pub entries: Vec<RankEntry>,
}

impl Ranking {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.image_id.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// True when the entries are exactly the given id set, each once.
    pub fn is_permutation_of<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> bool {
        let expected: Vec<&str> = ids.into_iter().collect();
        if expected.len() != self.entries.len() {
            return false;
        }
        let set: HashSet<&str> = expected.iter().copied().collect();
        let mut seen = HashSet::new();
        set.len() == expected.len() && self.ids().all(|id| set.contains(id) && seen.insert(id))
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct RankingRow {
    rank: usize,
    image_id: String,
    score: Option<f64>,
}

pub fn save_ranking(r: &Ranking, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for (i, e) in r.entries.iter().enumerate() {
        w.serialize(RankingRow {
            rank: i + 1,
            image_id: e.image_id.clone(),
            score: e.score,
        })
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn load_ranking(path: &Path, query_id: &str) -> Result<Ranking> {
    let mut rd = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut entries = Vec::new();
    for (i, row) in rd.deserialize::<RankingRow>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if row.rank != i + 1 {
            return Err(Error::format(
                path,
                format!("row {} has rank {}, expected {}", i + 1, row.rank, i + 1),
            ));
        }
        entries.push(RankEntry {
            image_id: row.image_id,
            score: row.score,
        });
    }
    Ok(Ranking {
        query_id: query_id.to_string(),
        entries,
    })
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

// ---------------------------------------------------------------------------
// JSON helpers

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}
