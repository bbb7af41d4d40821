use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hotspots::SparseVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMeasure {
    #[default]
    DensityCosine,
    BinaryCosine,
    Jaccard,
    Intersect,
}

impl SimilarityMeasure {
    pub const ALL: [SimilarityMeasure; 4] = [
        SimilarityMeasure::DensityCosine,
        SimilarityMeasure::BinaryCosine,
        SimilarityMeasure::Jaccard,
        SimilarityMeasure::Intersect,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SimilarityMeasure::DensityCosine => "density_cosine",
            SimilarityMeasure::BinaryCosine => "binary_cosine",
            SimilarityMeasure::Jaccard => "jaccard",
            SimilarityMeasure::Intersect => "intersect",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|m| m.name() == norm || (norm == "cosine" && *m == SimilarityMeasure::DensityCosine))
            .ok_or_else(|| Error::Config(format!("unknown similarity measure `{s}`")))
    }
}

/// Dot product and size of the shared support.
fn overlap(a: &SparseVector, b: &SparseVector) -> (f64, usize) {
    let (mut i, mut j) = (0, 0);
    let (mut dot, mut shared) = (0.0, 0);
    let (ea, eb) = (&a.entries, &b.entries);
    while i < ea.len() && j < eb.len() {
        match ea[i].0.cmp(&eb[j].0) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                dot += ea[i].1 * eb[j].1;
                shared += 1;
                i += 1;
                j += 1;
            }
        }
    }
    (dot, shared)
}

pub fn norm(v: &SparseVector) -> f64 {
    v.entries.iter().map(|e| e.1 * e.1).sum::<f64>().sqrt()
}

/// Similarity of two non-negative vectors; anything involving a zero vector
/// is 0.
pub fn similarity(a: &SparseVector, b: &SparseVector, measure: SimilarityMeasure) -> f64 {
    similarity_with_norms(a, norm(a), b, norm(b), measure)
}

pub(crate) fn similarity_with_norms(
    a: &SparseVector,
    norm_a: f64,
    b: &SparseVector,
    norm_b: f64,
    measure: SimilarityMeasure,
) -> f64 {
    if a.is_zero() || b.is_zero() {
        return 0.0;
    }
    let (dot, shared) = overlap(a, b);
    let shared = shared as f64;
    let (na, nb) = (a.nnz() as f64, b.nnz() as f64);
    match measure {
        SimilarityMeasure::DensityCosine => (dot / (norm_a * norm_b)).min(1.0),
        SimilarityMeasure::BinaryCosine => shared / (na * nb).sqrt(),
        SimilarityMeasure::Jaccard => shared / (na + nb - shared),
        SimilarityMeasure::Intersect => shared,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(dense: &[f64]) -> SparseVector {
        SparseVector::from_dense(dense)
    }

    #[test]
    fn identical_vectors_are_fully_similar() {
        let a = v(&[3.0, 0.0, 4.0]);
        assert_eq!(similarity(&a, &a, SimilarityMeasure::DensityCosine), 1.0);
        assert_eq!(similarity(&a, &a, SimilarityMeasure::BinaryCosine), 1.0);
        assert_eq!(similarity(&a, &a, SimilarityMeasure::Jaccard), 1.0);
        assert_eq!(similarity(&a, &a, SimilarityMeasure::Intersect), 2.0);
    }

    #[test]
    fn disjoint_supports_score_zero() {
        let a = v(&[1.0, 0.0, 2.0, 0.0]);
        let b = v(&[0.0, 5.0, 0.0, 1.0]);
        for m in SimilarityMeasure::ALL {
            assert_eq!(similarity(&a, &b, m), 0.0);
        }
    }

    #[test]
    fn density_cosine_by_hand() {
        let a = v(&[20.0, 0.0, 5.0]);
        let b = v(&[10.0, 0.0, 5.0]);
        let expected = 225.0 / (425f64.sqrt() * 125f64.sqrt());
        assert!((similarity(&a, &b, SimilarityMeasure::DensityCosine) - expected).abs() < 1e-15);
        assert!((expected - 0.976).abs() < 1e-3);
    }

    #[test]
    fn zero_vectors_score_zero() {
        let z = SparseVector::default();
        let a = v(&[1.0]);
        for m in SimilarityMeasure::ALL {
            assert_eq!(similarity(&z, &z, m), 0.0);
            assert_eq!(similarity(&z, &a, m), 0.0);
        }
    }

    #[test]
    fn support_measures() {
        let a = v(&[1.0, 1.0, 1.0, 0.0]);
        let b = v(&[0.0, 9.0, 1.0, 1.0]);
        assert!((similarity(&a, &b, SimilarityMeasure::BinaryCosine) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(similarity(&a, &b, SimilarityMeasure::Jaccard), 0.5);
        assert_eq!(similarity(&a, &b, SimilarityMeasure::Intersect), 2.0);
    }

    #[test]
    fn parse_names() {
        assert_eq!(SimilarityMeasure::parse("jaccard").unwrap(), SimilarityMeasure::Jaccard);
        assert_eq!(SimilarityMeasure::parse("binary-cosine").unwrap(), SimilarityMeasure::BinaryCosine);
        assert_eq!(SimilarityMeasure::parse("cosine").unwrap(), SimilarityMeasure::DensityCosine);
        assert!(SimilarityMeasure::parse("dice").is_err());
    }
}
