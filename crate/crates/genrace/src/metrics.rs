//! Generalization metrics over query batches, and the two track protocols.
//!
//! A query is *unseen* if it is not a training entry, *valid* if it has even
//! parity, and a *solution* if it is both. From a batch of `Q` queries the
//! validity metrics are
//!
//! - exploration `E = |G_new| / Q`,
//! - rate `R = |G_sol| / Q` and normalized rate `R_norm = R / (1 - eps)`,
//! - fidelity `F = |G_sol| / |G_new|` (absent when nothing is unseen),
//! - coverage `C = |g_sol| / (|S| (1 - eps))` over unique solutions, and its
//!   normalization `C_norm = C / (1 - (1 - 1/(|S|(1-eps)))^Q)` against the
//!   ideal expected coverage of a perfectly diverse sampler.
//!
//! The quality metrics score costs of solution queries: the minimum value
//! `MV`, the utility `U` (mean of the 5% lowest costs), and the quality
//! coverage `Cq` (unique solutions strictly cheaper than the training
//! minimum, over the track's denominator).
//!
//! Track T1 fixes the query budget `Q` and scores the solution multiset with
//! denominator `Q`. Track T2 keeps drawing batches until a budget of unique
//! solutions is collected (or a draw cap is hit) and scores that unique
//! collection with the reached count as denominator; it models tasks where
//! cost evaluation, not sampling, is expensive. Metrics that cannot be
//! computed are reported as explicitly absent, never coerced to zero.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use thiserror::Error;

use crate::bitspace::{is_valid, separation_cost, Bitstring, TrainingSet};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("query length {query_len} does not match training n_var {n_var}")]
    LengthMismatch { query_len: usize, n_var: usize },
    #[error("query budget must be positive")]
    ZeroQueryBudget,
    #[error("unique-sample target must be positive")]
    ZeroUniqueTarget,
    #[error("draw cap {draw_cap} is smaller than the batch size {batch_size}")]
    CapBelowBatch { draw_cap: usize, batch_size: usize },
    #[error("sampler failed while drawing {requested} queries for {track}: {source}")]
    Sampler {
        track: Track,
        requested: usize,
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

/// The two competition rules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Track {
    #[serde(rename = "t1")]
    T1,
    #[serde(rename = "t2")]
    T2,
}

impl std::fmt::Display for Track {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Track::T1 => write!(f, "t1"),
            Track::T2 => write!(f, "t2"),
        }
    }
}

impl std::str::FromStr for Track {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "t1" => Ok(Track::T1),
            "t2" => Ok(Track::T2),
            other => Err(format!("unknown track {other:?} (expected t1 or t2)")),
        }
    }
}

/// An ordered multiset of queries drawn from one model at one epoch.
#[derive(Clone, Debug)]
pub struct QueryBatch {
    pub queries: Vec<Bitstring>,
    pub model: String,
    pub epoch: u64,
}

impl QueryBatch {
    pub fn new(queries: Vec<Bitstring>) -> Self {
        Self {
            queries,
            model: String::new(),
            epoch: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.queries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queries.is_empty()
    }
}

/// A batch split by training membership and validity, multiplicity preserved.
#[derive(Clone, Debug, Default)]
pub struct PartitionedQueries {
    /// Queries outside the training set, with duplicates.
    pub g_new: Vec<Bitstring>,
    /// Unseen and valid queries, with duplicates.
    pub g_sol: Vec<Bitstring>,
    /// `g_sol` deduplicated, first occurrence order.
    pub g_sol_unique: Vec<Bitstring>,
    /// Batch size the partition was computed from.
    pub total: usize,
}

/// Splits a batch into unseen / unseen-and-valid / unique-solution parts.
pub fn partition(
    batch: &QueryBatch,
    train: &TrainingSet,
) -> Result<PartitionedQueries, MetricsError> {
    let n_var = train.n_var();
    let mut out = PartitionedQueries {
        total: batch.len(),
        ..Default::default()
    };
    let mut seen_words = HashSet::new();
    for query in &batch.queries {
        if query.len() != n_var {
            return Err(MetricsError::LengthMismatch {
                query_len: query.len(),
                n_var,
            });
        }
        if train.contains(query) {
            continue;
        }
        out.g_new.push(*query);
        if is_valid(query) {
            out.g_sol.push(*query);
            if seen_words.insert(query.word()) {
                out.g_sol_unique.push(*query);
            }
        }
    }
    Ok(out)
}

/// Pre-generalization and validity metrics of a partitioned batch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidityMetrics {
    pub e: f64,
    pub r: f64,
    pub r_norm: f64,
    /// Absent when the batch contains no unseen query.
    pub f: Option<f64>,
    pub c: f64,
    pub c_norm: f64,
}

/// Computes the six validity metrics for a batch of `q` queries against a
/// solution space of `s_size` members at data fraction `epsilon`.
pub fn validity_metrics(
    p: &PartitionedQueries,
    q: usize,
    epsilon: f64,
    s_size: u64,
) -> Result<ValidityMetrics, MetricsError> {
    if q == 0 {
        return Err(MetricsError::ZeroQueryBudget);
    }
    let q_f = q as f64;
    let e = p.g_new.len() as f64 / q_f;
    let r = p.g_sol.len() as f64 / q_f;
    let r_norm = r / (1.0 - epsilon);
    let f = if p.g_new.is_empty() {
        None
    } else {
        Some(p.g_sol.len() as f64 / p.g_new.len() as f64)
    };
    let unseen_space = s_size as f64 * (1.0 - epsilon);
    let c = p.g_sol_unique.len() as f64 / unseen_space;
    let ideal = 1.0 - (1.0 - 1.0 / unseen_space).powi(q as i32);
    let c_norm = c / ideal;
    Ok(ValidityMetrics {
        e,
        r,
        r_norm,
        f,
        c,
        c_norm,
    })
}

/// Quality metrics of a scored sample set.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QualityMetrics {
    /// Unique members strictly cheaper than the training minimum, divided by
    /// the track denominator.
    pub cq: Option<f64>,
    /// Lowest cost in the set.
    pub mv: Option<i64>,
    /// Mean of the `max(1, floor(0.05 n))` lowest costs.
    pub u: Option<f64>,
}

/// Scores a sample set. An empty set yields all-absent metrics.
pub fn quality_metrics(
    samples: &[(Bitstring, i64)],
    denominator: usize,
    min_train_cost: i64,
) -> QualityMetrics {
    assert!(denominator > 0, "quality denominator must be positive");
    if samples.is_empty() {
        return QualityMetrics {
            cq: None,
            mv: None,
            u: None,
        };
    }
    let mut costs: Vec<i64> = samples.iter().map(|&(_, c)| c).collect();
    costs.sort_unstable();
    let mv = costs[0];
    let k = 1.max((0.05 * costs.len() as f64).floor() as usize);
    let u = costs[..k].iter().map(|&c| c as f64).sum::<f64>() / k as f64;
    let qualifying: HashSet<u64> = samples
        .iter()
        .filter(|&&(_, c)| c < min_train_cost)
        .map(|(x, _)| x.word())
        .collect();
    QualityMetrics {
        cq: Some(qualifying.len() as f64 / denominator as f64),
        mv: Some(mv),
        u: Some(u),
    }
}

/// One evaluation point: every metric for one (track, model, seed, epoch).
///
/// Absent metrics serialize as `null`. Key names follow the run-record
/// schema shared with the harness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub track: Track,
    pub epoch: u64,
    pub model: String,
    pub seed: u64,
    #[serde(rename = "E")]
    pub e: Option<f64>,
    #[serde(rename = "R")]
    pub r: Option<f64>,
    #[serde(rename = "R_norm")]
    pub r_norm: Option<f64>,
    #[serde(rename = "F")]
    pub f: Option<f64>,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "C_norm")]
    pub c_norm: Option<f64>,
    #[serde(rename = "Cq")]
    pub cq: Option<f64>,
    #[serde(rename = "MV")]
    pub mv: Option<i64>,
    #[serde(rename = "U")]
    pub u: Option<f64>,
    /// Query budget (T1 only).
    #[serde(rename = "Q")]
    pub q: Option<usize>,
    /// Unique solutions actually collected (T2 only).
    #[serde(rename = "Q_u_reached")]
    pub q_u_reached: Option<usize>,
    /// Raw samples drawn to produce the report.
    pub draws_used: Option<usize>,
}

impl MetricsReport {
    fn empty(track: Track) -> Self {
        Self {
            track,
            epoch: 0,
            model: String::new(),
            seed: 0,
            e: None,
            r: None,
            r_norm: None,
            f: None,
            c: None,
            c_norm: None,
            cq: None,
            mv: None,
            u: None,
            q: None,
            q_u_reached: None,
            draws_used: None,
        }
    }
}

/// Sampler callback used by the track protocols: draw `n` queries.
pub type SampleFn<'a> =
    dyn FnMut(usize) -> Result<Vec<Bitstring>, Box<dyn std::error::Error + Send + Sync>> + 'a;

fn draw(
    sampler: &mut SampleFn<'_>,
    n: usize,
    track: Track,
) -> Result<Vec<Bitstring>, MetricsError> {
    sampler(n).map_err(|source| MetricsError::Sampler {
        track,
        requested: n,
        source,
    })
}

/// Track T1: draw exactly `q` queries, score validity metrics over the batch
/// and quality metrics over the solution multiset with denominator `q`.
pub fn run_track1(
    sampler: &mut SampleFn<'_>,
    train: &TrainingSet,
    q: usize,
) -> Result<MetricsReport, MetricsError> {
    if q == 0 {
        return Err(MetricsError::ZeroQueryBudget);
    }
    let queries = draw(sampler, q, Track::T1)?;
    let batch = QueryBatch::new(queries);
    let parts = partition(&batch, train)?;
    let validity = validity_metrics(&parts, q, train.epsilon(), space_size(train))?;
    let scored: Vec<(Bitstring, i64)> = parts
        .g_sol
        .iter()
        .map(|x| (*x, separation_cost(x)))
        .collect();
    let quality = quality_metrics(&scored, q, train.min_cost());

    let mut report = MetricsReport::empty(Track::T1);
    report.e = Some(validity.e);
    report.r = Some(validity.r);
    report.r_norm = Some(validity.r_norm);
    report.f = validity.f;
    report.c = Some(validity.c);
    report.c_norm = Some(validity.c_norm);
    // The denominator q is fixed, so an empty solution set still has a
    // well-defined quality coverage of zero.
    report.cq = Some(quality.cq.unwrap_or(0.0));
    report.mv = quality.mv;
    report.u = quality.u;
    report.q = Some(q);
    report.draws_used = Some(q);
    Ok(report)
}

/// Track T2: draw batches until `q_u_target` unique solutions are collected
/// or `draw_cap` raw samples were consumed, then score the unique collection
/// with the reached count as denominator.
pub fn run_track2(
    sampler: &mut SampleFn<'_>,
    train: &TrainingSet,
    q_u_target: usize,
    draw_cap: usize,
    batch_size: usize,
) -> Result<MetricsReport, MetricsError> {
    if q_u_target == 0 {
        return Err(MetricsError::ZeroUniqueTarget);
    }
    if draw_cap < batch_size || batch_size == 0 {
        return Err(MetricsError::CapBelowBatch {
            draw_cap,
            batch_size,
        });
    }

    let n_var = train.n_var();
    let mut collected: Vec<(Bitstring, i64)> = Vec::with_capacity(q_u_target);
    let mut collected_words = HashSet::new();
    let mut draws_used = 0usize;
    while collected.len() < q_u_target && draws_used < draw_cap {
        let n = batch_size.min(draw_cap - draws_used);
        let queries = draw(sampler, n, Track::T2)?;
        draws_used += n;
        for query in &queries {
            if query.len() != n_var {
                return Err(MetricsError::LengthMismatch {
                    query_len: query.len(),
                    n_var,
                });
            }
            if collected.len() >= q_u_target {
                break;
            }
            if !train.contains(query) && is_valid(query) && collected_words.insert(query.word()) {
                collected.push((*query, separation_cost(query)));
            }
        }
    }

    let reached = collected.len();
    let quality = if reached > 0 {
        quality_metrics(&collected, reached, train.min_cost())
    } else {
        QualityMetrics {
            cq: None,
            mv: None,
            u: None,
        }
    };

    let mut report = MetricsReport::empty(Track::T2);
    report.cq = quality.cq;
    report.mv = quality.mv;
    report.u = quality.u;
    report.q_u_reached = Some(reached);
    report.draws_used = Some(draws_used);
    Ok(report)
}

fn space_size(train: &TrainingSet) -> u64 {
    1u64 << (train.n_var() - 1)
}
