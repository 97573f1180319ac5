//! hits@N and map@N over every prediction point of a cascade set.
//!
//! With one relevant node per prediction point, average precision reduces
//! to the reciprocal rank, so map@N is the mean of `1/rank` truncated to
//! zero beyond rank N.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use rayon::prelude::*;

use crate::data::Cascade;
use crate::error::{invalid, Result};
use crate::model::{cascade_step_scores, ModelParams};

pub const DEFAULT_CUTOFFS: [usize; 3] = [10, 50, 100];

/// 1-based rank of `target`: one plus the number of nodes scoring strictly
/// higher, plus equal-scoring nodes with a smaller index.
pub fn rank_of_target(scores: &[f64], target: usize) -> usize {
    let t = scores[target];
    1 + scores
        .iter()
        .enumerate()
        .filter(|&(v, &s)| s > t || (s == t && v < target))
        .count()
}

pub fn hits_at_n(ranks: &[usize], n: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(invalid("hits@N of an empty rank list"));
    }
    Ok(ranks.iter().filter(|&&r| r <= n).count() as f64 / ranks.len() as f64)
}

pub fn map_at_n(ranks: &[usize], n: usize) -> Result<f64> {
    if ranks.is_empty() {
        return Err(invalid("map@N of an empty rank list"));
    }
    let total: f64 = ranks
        .iter()
        .map(|&r| if r <= n { 1.0 / r as f64 } else { 0.0 })
        .sum();
    Ok(total / ranks.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub hits: BTreeMap<usize, f64>,
    pub map: BTreeMap<usize, f64>,
    pub prediction_points: usize,
}

impl EvalReport {
    pub fn from_ranks(ranks: &[usize], cutoffs: &[usize]) -> Result<Self> {
        if cutoffs.is_empty() {
            return Err(invalid("no cutoffs given"));
        }
        let mut hits = BTreeMap::new();
        let mut map = BTreeMap::new();
        for &n in cutoffs {
            hits.insert(n, hits_at_n(ranks, n)?);
            map.insert(n, map_at_n(ranks, n)?);
        }
        Ok(Self {
            hits,
            map,
            prediction_points: ranks.len(),
        })
    }

    pub fn hits_at(&self, n: usize) -> Option<f64> {
        self.hits.get(&n).copied()
    }

    pub fn map_at(&self, n: usize) -> Option<f64> {
        self.map.get(&n).copied()
    }

    pub fn cutoffs(&self) -> Vec<usize> {
        self.hits.keys().copied().collect()
    }

    /// hits and map non-decreasing in N, and map@N ≤ hits@N.
    pub fn is_consistent(&self) -> bool {
        let mono = |m: &BTreeMap<usize, f64>| m.values().zip(m.values().skip(1)).all(|(a, b)| a <= b);
        mono(&self.hits)
            && mono(&self.map)
            && self.hits.iter().all(|(n, h)| self.map[n] <= *h)
    }

    pub fn to_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>8} {:>10} {:>10}", "N", "hits@N", "map@N");
        for n in self.cutoffs() {
            let _ = writeln!(s, "{:>8} {:>10.6} {:>10.6}", n, self.hits[&n], self.map[&n]);
        }
        let _ = writeln!(s, "prediction points: {}", self.prediction_points);
        s
    }

    /// `metric,N,value,points` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "metric,N,value,points")?;
        for (name, m) in [("hits", &self.hits), ("map", &self.map)] {
            for (n, v) in m {
                writeln!(w, "{name},{n},{v},{}", self.prediction_points)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Target ranks for every prefix of every cascade, in cascade order.
/// Cascades with fewer than two nodes contribute nothing.
pub fn collect_ranks(params: &ModelParams, cascades: &[Cascade]) -> Result<Vec<usize>> {
    let per_cascade: Vec<Vec<usize>> = cascades
        .par_iter()
        .filter(|c| c.len() >= 2)
        .map(|c| {
            let scores = cascade_step_scores(params, c.as_slice())?;
            Ok(scores
                .iter()
                .enumerate()
                .map(|(t, s)| rank_of_target(s, c.nodes[t + 1]))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_cascade.into_iter().flatten().collect())
}

/// Evaluation-mode hits@N and map@N over all prediction points.
pub fn evaluate(params: &ModelParams, cascades: &[Cascade], cutoffs: &[usize]) -> Result<EvalReport> {
    let ranks = collect_ranks(params, cascades)?;
    if ranks.is_empty() {
        return Err(invalid("evaluation set has no prediction points"));
    }
    EvalReport::from_ranks(&ranks, cutoffs)
}
