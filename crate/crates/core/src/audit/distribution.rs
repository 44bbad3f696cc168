use std::io::Write;

use serde::{Deserialize, Serialize};

use super::AuditError;
use crate::embedding::{cosine_slices, Embedder};
use crate::scalar::Scalar;
use crate::serialize::TextView;
use crate::table::Table;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub a_id: String,
    pub b_id: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub n: usize,
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
    /// 10th through 90th percentiles.
    pub deciles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityDistribution {
    pub summary: DistributionSummary,
    pub scores: Vec<PairScore>,
}

impl SimilarityDistribution {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        for s in &self.scores {
            out.serialize(s)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Linear interpolation between closest ranks of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

impl DistributionSummary {
    pub fn of(scores: &[f64]) -> Self {
        let mut sorted = scores.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        DistributionSummary {
            n,
            mean: if n == 0 { f64::NAN } else { scores.iter().sum::<f64>() / n as f64 },
            median: quantile(&sorted, 0.5),
            min: sorted.first().copied().unwrap_or(f64::NAN),
            max: sorted.last().copied().unwrap_or(f64::NAN),
            deciles: (1..10).map(|i| quantile(&sorted, i as f64 / 10.0)).collect(),
        }
    }
}

/// Cosine score of each pair. Each table draws its serialized row from its
/// own id, so the two sides of a generated pair are sampled independently.
pub fn similarity_distribution<T: Scalar>(pairs: &[(Table, Table)], embedder: &dyn Embedder<T>, view: &TextView) -> Result<SimilarityDistribution, AuditError> {
    if pairs.is_empty() {
        return Err(AuditError::Empty);
    }
    let texts: Vec<String> = pairs.iter().flat_map(|(a, b)| [view.text(a), view.text(b)]).collect();
    let vectors = embedder.embed_batch(&texts)?;
    let scores: Vec<PairScore> = pairs
        .iter()
        .zip(vectors.chunks(2))
        .map(|((a, b), v)| PairScore { a_id: a.id().into(), b_id: b.id().into(), score: cosine_slices(v[0].as_slice(), v[1].as_slice()).as_f64() })
        .collect();
    let raw: Vec<f64> = scores.iter().map(|s| s.score).collect();
    Ok(SimilarityDistribution { summary: DistributionSummary::of(&raw), scores })
}
