//! Rankings from EEG scores and from mouse annotations, and relevance
//! feedback re-ranking over a larger feature-indexed collection.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::dataio::{AnnotationLog, EventKind, FeatureMatrix, RankEntry, Ranking};
use crate::error::{Error, Result};
use crate::svm::{fit, SvmParams};

/// Partition of a session's images derived from a mouse log.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSets {
    /// Clicked images in click order.
    pub p_a: Vec<String>,
    /// Seen but not clicked, in display order.
    pub n_a: Vec<String>,
    /// Everything else, in display order.
    pub rest: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeedbackLabels {
    pub positives: Vec<String>,
    pub negatives: Vec<String>,
}

fn display_positions(display_order: &[String]) -> Result<HashMap<&str, usize>> {
    let mut pos = HashMap::with_capacity(display_order.len());
    for (i, id) in display_order.iter().enumerate() {
        if pos.insert(id.as_str(), i).is_some() {
            return Err(Error::Precondition(format!("display order repeats {id}")));
        }
    }
    Ok(pos)
}

/// Descending by score; exact ties keep display order.
pub fn ranking_from_scores(
    query_id: &str,
    image_ids: &[String],
    scores: &[f64],
    display_order: &[String],
) -> Result<Ranking> {
    if image_ids.len() != scores.len() {
        return Err(Error::Precondition(format!(
            "{} ids for {} scores",
            image_ids.len(),
            scores.len()
        )));
    }
    if let Some(i) = scores.iter().position(|s| s.is_nan()) {
        return Err(Error::Data(format!("score for {} is NaN", image_ids[i])));
    }
    let pos = display_positions(display_order)?;
    let mut keyed = Vec::with_capacity(image_ids.len());
    for (id, &score) in image_ids.iter().zip(scores) {
        let p = *pos
            .get(id.as_str())
            .ok_or_else(|| Error::Precondition(format!("{id} is not in the display order")))?;
        keyed.push((p, id, score));
    }
    keyed.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    Ok(Ranking {
        query_id: query_id.to_string(),
        entries: keyed
            .into_iter()
            .map(|(_, id, score)| RankEntry {
                image_id: id.clone(),
                score: Some(score),
            })
            .collect(),
    })
}

/// Splits a session into clicked, seen-but-unclicked and unseen images.
///
/// A click toggles the image's marked state, so an image clicked twice is
/// unmarked. An image counts as seen when a `show` event for it happened at
/// or before the last click that left an image marked. Events after the
/// log's time budget are ignored.
pub fn annotation_sets(log: &AnnotationLog, display_order: &[String]) -> Result<AnnotationSets> {
    log.validate()?;
    let pos = display_positions(display_order)?;
    let deadline = log.deadline_ms();
    let in_time = || log.events.iter().filter(move |e| e.t_ms <= deadline);

    // id -> t_ms of the click that marked it, None once unmarked.
    let mut marked: HashMap<&str, (u64, usize)> = HashMap::new();
    for (i, ev) in in_time().enumerate() {
        if ev.kind != EventKind::Click {
            continue;
        }
        let id = ev.image_id.as_deref().expect("validated click has an image id");
        if !pos.contains_key(id) {
            return Err(Error::LogConsistency(format!("click on {id}, which is not in this session")));
        }
        if marked.remove(id).is_none() {
            marked.insert(id, (ev.t_ms, i));
        }
    }
    let mut clicked: Vec<(&str, (u64, usize))> = marked.into_iter().collect();
    clicked.sort_by_key(|(_, key)| *key);
    let p_a: Vec<String> = clicked.iter().map(|(id, _)| id.to_string()).collect();

    let mut seen: HashSet<&str> = HashSet::new();
    if let Some(&(_, (last_click, _))) = clicked.last() {
        for ev in in_time().filter(|e| e.kind == EventKind::Show && e.t_ms <= last_click) {
            let id = ev.image_id.as_deref().expect("validated show has an image id");
            if !pos.contains_key(id) {
                return Err(Error::LogConsistency(format!("{id} was shown but is not in this session")));
            }
            seen.insert(id);
        }
    }
    let positives: HashSet<&str> = p_a.iter().map(String::as_str).collect();
    let (n_a, rest) = display_order
        .iter()
        .filter(|id| !positives.contains(id.as_str()))
        .cloned()
        .partition(|id| seen.contains(id.as_str()));
    Ok(AnnotationSets { p_a, n_a, rest })
}

/// Clicked images first, unseen images in display order next, presumed
/// negatives last. Scores are left empty.
pub fn ranking_from_annotations(query_id: &str, sets: &AnnotationSets) -> Ranking {
    Ranking {
        query_id: query_id.to_string(),
        entries: sets
            .p_a
            .iter()
            .chain(&sets.rest)
            .chain(&sets.n_a)
            .map(|id| RankEntry {
                image_id: id.clone(),
                score: None,
            })
            .collect(),
    }
}

/// Top `n_pos` entries as positives, bottom `n_neg` as negatives.
pub fn select_feedback_labels_eeg(ranking: &Ranking, n_pos: usize, n_neg: usize) -> Result<FeedbackLabels> {
    if ranking.len() < n_pos + n_neg {
        return Err(Error::Precondition(format!(
            "ranking of {} entries cannot supply {n_pos} positives and {n_neg} negatives",
            ranking.len()
        )));
    }
    let ids: Vec<String> = ranking.ids().map(str::to_string).collect();
    Ok(FeedbackLabels {
        positives: ids[..n_pos].to_vec(),
        negatives: ids[ids.len() - n_neg..].to_vec(),
    })
}

pub fn select_feedback_labels_mouse(sets: &AnnotationSets) -> Result<FeedbackLabels> {
    if sets.p_a.is_empty() || sets.n_a.is_empty() {
        return Err(Error::Training(format!(
            "mouse feedback needs clicked and seen-unclicked images, got {} and {}",
            sets.p_a.len(),
            sets.n_a.len()
        )));
    }
    Ok(FeedbackLabels {
        positives: sets.p_a.clone(),
        negatives: sets.n_a.clone(),
    })
}

/// Trains a linear SVM on the labelled rows and ranks every row of
/// `features` by its score, ties in matrix row order.
pub fn feedback_rank(
    query_id: &str,
    labels: &FeedbackLabels,
    features: &FeatureMatrix,
    params: &SvmParams,
) -> Result<Ranking> {
    let rows: HashMap<&str, usize> = features
        .image_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();
    let lookup = |id: &String| {
        rows.get(id.as_str())
            .copied()
            .ok_or_else(|| Error::Precondition(format!("labelled image {id} has no feature row")))
    };
    let pos: HashSet<&String> = labels.positives.iter().collect();
    if let Some(id) = labels.negatives.iter().find(|id| pos.contains(id)) {
        return Err(Error::Precondition(format!("{id} is labelled both positive and negative")));
    }
    let mut train_rows = Vec::new();
    let mut train_labels = Vec::new();
    for id in &labels.positives {
        train_rows.push(lookup(id)?);
        train_labels.push(true);
    }
    for id in &labels.negatives {
        train_rows.push(lookup(id)?);
        train_labels.push(false);
    }
    let train = features.data.select(ndarray::Axis(0), &train_rows);
    let model = fit(&train, &train_labels, params)?;
    let scores = model.decision_scores(&features.data)?;
    ranking_from_scores(query_id, &features.image_ids, &scores, &features.image_ids)
}
