use std::cmp::Ordering;
use std::collections::HashSet;

use super::document::record_to_document;
use super::embed::EmbeddingProvider;
use super::IndexError;
use crate::model::PantryRecord;

/// Exact cosine index. Stored vectors are unit length or all zero.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorIndex {
    dim: usize,
    fingerprint: String,
    ids: Vec<String>,
    data: Vec<f32>,
}

pub(crate) fn normalized(v: &[f32]) -> Vec<f32> {
    let norm = v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; v.len()];
    }
    v.iter().map(|x| (f64::from(*x) / norm) as f32).collect()
}

/// Descending score, then ascending id.
pub fn rank_order(a: &(String, f32), b: &(String, f32)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0))
}

impl VectorIndex {
    pub fn new(dim: usize, fingerprint: impl Into<String>) -> Self {
        VectorIndex {
            dim,
            fingerprint: fingerprint.into(),
            ids: Vec::new(),
            data: Vec::new(),
        }
    }

    /// Adds a vector (normalized on insert). Ids must be unique.
    pub fn insert(&mut self, id: impl Into<String>, vector: &[f32]) -> Result<(), IndexError> {
        let id = id.into();
        if vector.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if vector.iter().any(|x| !x.is_finite()) {
            return Err(IndexError::NonFinite(id));
        }
        if self.ids.contains(&id) {
            return Err(IndexError::DuplicateId(id));
        }
        self.data.extend(normalized(vector));
        self.ids.push(id);
        Ok(())
    }

    pub(crate) fn from_parts(dim: usize, fingerprint: String, ids: Vec<String>, data: Vec<f32>) -> Self {
        VectorIndex { dim, fingerprint, ids, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn vector(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .zip(self.data.chunks_exact(self.dim.max(1)))
            .map(|(id, v)| (id.as_str(), v))
    }

    /// Exact top-k by cosine similarity. Zero query or zero entry scores 0.
    pub fn search(
        &self,
        query: &[f32],
        k: usize,
        restrict_to: Option<&HashSet<String>>,
    ) -> Result<Vec<(String, f32)>, IndexError> {
        if query.len() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        if k == 0 {
            return Err(IndexError::ZeroK);
        }
        let q = normalized(query);
        let mut scored: Vec<(String, f32)> = self
            .entries()
            .filter(|(id, _)| restrict_to.is_none_or(|set| set.contains(*id)))
            .map(|(id, v)| {
                let dot: f64 = q.iter().zip(v).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
                (id.to_string(), dot.clamp(-1.0, 1.0) as f32)
            })
            .collect();
        if scored.len() > k {
            scored.select_nth_unstable_by(k - 1, rank_order);
            scored.truncate(k);
        }
        scored.sort_by(rank_order);
        Ok(scored)
    }
}

pub fn build_index(records: &[PantryRecord], provider: &dyn EmbeddingProvider) -> Result<VectorIndex, IndexError> {
    let mut index = VectorIndex::new(provider.dim(), provider.fingerprint());
    for r in records {
        let v = provider
            .embed(&record_to_document(r))
            .map_err(|source| IndexError::Provider { id: r.id.clone(), source })?;
        index.insert(r.id.clone(), &v)?;
    }
    Ok(index)
}
