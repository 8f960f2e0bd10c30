//! RSVP plan construction and presentation timing.
//!
//! Shuffling is Fisher-Yates driven by xoshiro256++ seeded through
//! SplitMix64 (`seed_from_u64`): for `i` from `n - 1` down to `1`, swap
//! element `i` with a uniform index in `0..=i`.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::dataio::{
    PlanItem, RsvpPlan, BLOCKS_PER_QUERY, IMAGES_PER_BLOCK, IMAGES_PER_QUERY, TARGETS_PER_BLOCK,
    TARGETS_PER_QUERY,
};
use crate::error::{Error, Result};

pub const DEFAULT_GAP_S: f64 = 5.0;

pub fn rng_from_seed(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

pub fn fisher_yates<T, R: Rng>(items: &mut [T], rng: &mut R) {
    for i in (1..items.len()).rev() {
        let j = rng.random_range(0..=i);
        items.swap(i, j);
    }
}

/// Splits 50 targets and 950 distractors into five blocks of 10 + 190 and
/// shuffles each block. Which targets land in which block is also drawn
/// from the seed.
pub fn build_plan(
    query_id: &str,
    targets: &[String],
    distractors: &[String],
    rate_hz: u32,
    seed: u64,
    inter_block_gap_s: f64,
) -> Result<RsvpPlan> {
    if rate_hz != 5 && rate_hz != 10 {
        return Err(Error::Precondition(format!("rate must be 5 or 10 Hz, got {rate_hz}")));
    }
    if targets.len() != TARGETS_PER_QUERY {
        return Err(Error::Precondition(format!(
            "expected {TARGETS_PER_QUERY} target ids, got {}",
            targets.len()
        )));
    }
    let n_distractors = IMAGES_PER_QUERY - TARGETS_PER_QUERY;
    if distractors.len() != n_distractors {
        return Err(Error::Precondition(format!(
            "expected {n_distractors} distractor ids, got {}",
            distractors.len()
        )));
    }
    let mut seen = HashSet::with_capacity(IMAGES_PER_QUERY);
    if let Some(dup) = targets.iter().chain(distractors).find(|id| !seen.insert(id.as_str())) {
        return Err(Error::Precondition(format!("duplicate image id {dup}")));
    }

    let mut rng = rng_from_seed(seed);
    let mut t: Vec<&String> = targets.iter().collect();
    let mut d: Vec<&String> = distractors.iter().collect();
    fisher_yates(&mut t, &mut rng);
    fisher_yates(&mut d, &mut rng);

    let per_block_d = IMAGES_PER_BLOCK - TARGETS_PER_BLOCK;
    let blocks = (0..BLOCKS_PER_QUERY)
        .map(|b| {
            let mut block: Vec<PlanItem> = t[b * TARGETS_PER_BLOCK..(b + 1) * TARGETS_PER_BLOCK]
                .iter()
                .map(|id| PlanItem {
                    image_id: (*id).clone(),
                    is_target: true,
                })
                .chain(d[b * per_block_d..(b + 1) * per_block_d].iter().map(|id| PlanItem {
                    image_id: (*id).clone(),
                    is_target: false,
                }))
                .collect();
            fisher_yates(&mut block, &mut rng);
            block
        })
        .collect();

    let plan = RsvpPlan {
        query_id: query_id.to_string(),
        rate_hz,
        blocks,
        inter_block_gap_s,
        seed,
    };
    plan.validate()?;
    Ok(plan)
}

/// Onset of every image in seconds from the first stimulus, in display order.
pub fn timeline(plan: &RsvpPlan) -> Vec<f64> {
    let period = 1.0 / plan.rate_hz as f64;
    let mut out = Vec::with_capacity(IMAGES_PER_QUERY);
    for (b, block) in plan.blocks.iter().enumerate() {
        let block_start = b as f64 * (block.len() as f64 * period + plan.inter_block_gap_s);
        out.extend((0..block.len()).map(|i| block_start + i as f64 * period));
    }
    out
}

/// Onsets as integer sample indices at `sample_rate_hz`, from the first stimulus.
///
/// Computed in integer arithmetic so consecutive onsets within a block are
/// exactly `sample_rate_hz / rate_hz` samples apart.
pub fn timeline_samples(plan: &RsvpPlan, sample_rate_hz: u32) -> Vec<usize> {
    let period = (sample_rate_hz / plan.rate_hz) as usize;
    let gap = (plan.inter_block_gap_s * sample_rate_hz as f64).round() as usize;
    let mut out = Vec::with_capacity(IMAGES_PER_QUERY);
    let mut start = 0;
    for block in &plan.blocks {
        out.extend((0..block.len()).map(|i| start + i * period));
        start += block.len() * period + gap;
    }
    out
}

/// Time the stimuli are on screen, excluding rest gaps.
pub fn stimulus_span_s(plan: &RsvpPlan) -> f64 {
    plan.blocks.iter().map(Vec::len).sum::<usize>() as f64 / plan.rate_hz as f64
}

/// Stimulus time plus the rest gaps between blocks.
pub fn session_span_s(plan: &RsvpPlan) -> f64 {
    stimulus_span_s(plan) + plan.blocks.len().saturating_sub(1) as f64 * plan.inter_block_gap_s
}

/// Numbered target and distractor ids for a query, e.g. `q1-t000`.
pub fn synthetic_ids(query_id: &str) -> (Vec<String>, Vec<String>) {
    let targets = (0..TARGETS_PER_QUERY).map(|i| format!("{query_id}-t{i:03}")).collect();
    let distractors = (0..IMAGES_PER_QUERY - TARGETS_PER_QUERY)
        .map(|i| format!("{query_id}-d{i:03}"))
        .collect();
    (targets, distractors)
}
