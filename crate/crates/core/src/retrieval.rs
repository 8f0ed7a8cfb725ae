//! Recall@K and median rank over similarity matrices.

use std::collections::BTreeMap;
use std::fmt;

use crate::contrastive::SimilarityMatrix;
use crate::error::{Error, Result};

/// Cut-offs carried by every report.
pub const RECALL_KS: [usize; 4] = [1, 5, 10, 50];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    TextToVideo,
    VideoToText,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::TextToVideo => "text_to_video",
            Direction::VideoToText => "video_to_text",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetrievalReport {
    pub direction: Direction,
    /// Percentage of queries whose match is within the top `K`, keyed by `K`.
    pub recall: BTreeMap<usize, f64>,
    /// Median 1-based rank; even counts average the middle pair.
    pub median_rank: f64,
    pub queries: usize,
}

impl RetrievalReport {
    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.recall.get(&k).copied()
    }
}

/// 1-based rank of the correct candidate for every query row.
///
/// Ties are resolved pessimistically: every other candidate scoring at least
/// as high as the correct one is ranked ahead of it.
pub fn rank_matrix(sim: &SimilarityMatrix, ground_truth: &[usize]) -> Result<Vec<usize>> {
    let s = sim.as_matrix();
    if ground_truth.len() != s.nrows() {
        return Err(Error::shape(
            "ground truth length",
            s.nrows(),
            ground_truth.len(),
        ));
    }
    let n = s.ncols();
    ground_truth
        .iter()
        .enumerate()
        .map(|(q, &gt)| {
            if gt >= n {
                return Err(Error::IndexOutOfRange {
                    query: q,
                    index: gt,
                    len: n,
                });
            }
            let target = s[(q, gt)];
            let ahead = (0..n).filter(|&j| j != gt && s[(q, j)] >= target).count();
            Ok(1 + ahead)
        })
        .collect()
}

pub fn compute_report(ranks: &[usize], direction: Direction) -> Result<RetrievalReport> {
    if ranks.is_empty() {
        return Err(Error::Empty("rank vector"));
    }
    if ranks.contains(&0) {
        return Err(Error::InvalidArgument("ranks are 1-based".into()));
    }
    let n = ranks.len() as f64;
    let recall = RECALL_KS
        .iter()
        .map(|&k| {
            (
                k,
                100.0 * ranks.iter().filter(|&&r| r <= k).count() as f64 / n,
            )
        })
        .collect();
    let mut sorted = ranks.to_vec();
    sorted.sort_unstable();
    let mid = sorted.len() / 2;
    let median_rank = if sorted.len().is_multiple_of(2) {
        (sorted[mid - 1] + sorted[mid]) as f64 / 2.0
    } else {
        sorted[mid] as f64
    };
    Ok(RetrievalReport {
        direction,
        recall,
        median_rank,
        queries: ranks.len(),
    })
}

/// Inverse of a one-to-one text→video mapping.
pub fn invert_mapping(ground_truth: &[usize], candidates: usize) -> Result<Vec<usize>> {
    if ground_truth.len() != candidates {
        return Err(Error::InvalidArgument(format!(
            "video→text evaluation needs a one-to-one mapping: {} queries for {candidates} candidates",
            ground_truth.len()
        )));
    }
    let mut inverse = vec![usize::MAX; candidates];
    for (q, &gt) in ground_truth.iter().enumerate() {
        if gt >= candidates {
            return Err(Error::IndexOutOfRange {
                query: q,
                index: gt,
                len: candidates,
            });
        }
        if inverse[gt] != usize::MAX {
            return Err(Error::InvalidArgument(format!(
                "candidate {gt} is matched by queries {} and {q}",
                inverse[gt]
            )));
        }
        inverse[gt] = q;
    }
    Ok(inverse)
}

/// Reports for both directions of a text × video similarity matrix.
pub fn evaluate_both(
    sim: &SimilarityMatrix,
    ground_truth: &[usize],
) -> Result<(RetrievalReport, RetrievalReport)> {
    let t2v = compute_report(&rank_matrix(sim, ground_truth)?, Direction::TextToVideo)?;
    let inverse = invert_mapping(ground_truth, sim.candidates())?;
    let v2t = compute_report(
        &rank_matrix(&sim.transpose(), &inverse)?,
        Direction::VideoToText,
    )?;
    Ok((t2v, v2t))
}
