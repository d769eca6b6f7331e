use std::time::Duration;

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq, Eq)]
#[error("embedding provider error: {0}")]
pub struct ProviderError(pub String);

/// Maps text to a fixed-dimension vector. Same text, same vector.
pub trait EmbeddingProvider: Send + Sync {
    fn dim(&self) -> usize;
    /// Identifies the provider and its configuration; stored in the index.
    fn fingerprint(&self) -> String;
    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError>;
}

pub const STUB_DIM: usize = 256;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Hashed bag-of-tokens embedding, L2-normalized. Text without tokens maps
/// to the zero vector.
pub fn stub_embed(text: &str, dim: usize) -> Vec<f32> {
    assert!(dim >= 1, "embedding dimension must be positive");
    let mut buckets = vec![0f64; dim];
    for token in tokenize(text) {
        buckets[(fnv1a64(token.as_bytes()) % dim as u64) as usize] += 1.0;
    }
    let norm = buckets.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return vec![0.0; dim];
    }
    buckets.into_iter().map(|x| (x / norm) as f32).collect()
}

#[derive(Debug, Clone, Copy)]
pub struct StubEmbedder {
    pub dim: usize,
}

impl Default for StubEmbedder {
    fn default() -> Self {
        StubEmbedder { dim: STUB_DIM }
    }
}

impl EmbeddingProvider for StubEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("stub-fnv1a64-bow/{}", self.dim)
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        Ok(stub_embed(text, self.dim))
    }
}

/// HTTP embedding service: POST the UTF-8 text, receive `dim` little-endian
/// f32 values as the raw response body.
pub struct RemoteEmbedder {
    endpoint: String,
    dim: usize,
    client: reqwest::blocking::Client,
}

impl RemoteEmbedder {
    pub fn new(endpoint: impl Into<String>, dim: usize, timeout: Duration) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(timeout)
            .build()
            .map_err(|e| ProviderError(e.to_string()))?;
        Ok(RemoteEmbedder {
            endpoint: endpoint.into(),
            dim,
            client,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn fingerprint(&self) -> String {
        format!("remote:{}/{}", self.endpoint, self.dim)
    }

    fn embed(&self, text: &str) -> Result<Vec<f32>, ProviderError> {
        let resp = self
            .client
            .post(&self.endpoint)
            .header(reqwest::header::CONTENT_TYPE, "text/plain; charset=utf-8")
            .body(text.to_string())
            .send()
            .map_err(|e| ProviderError(e.to_string()))?;
        if !resp.status().is_success() {
            return Err(ProviderError(format!("HTTP {}", resp.status())));
        }
        let bytes = resp.bytes().map_err(|e| ProviderError(e.to_string()))?;
        if bytes.len() != self.dim * 4 {
            return Err(ProviderError(format!(
                "expected {} bytes for dim {}, got {}",
                self.dim * 4,
                self.dim,
                bytes.len()
            )));
        }
        let v: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(ProviderError("non-finite component".into()));
        }
        Ok(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        a.iter().zip(b).map(|(x, y)| f64::from(*x) * f64::from(*y)).sum()
    }

    fn norm(v: &[f32]) -> f64 {
        v.iter().map(|x| f64::from(*x).powi(2)).sum::<f64>().sqrt()
    }

    #[test]
    fn fnv_reference_values() {
        // published FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn empty_text_is_zero_vector() {
        assert!(stub_embed("", 256).iter().all(|x| *x == 0.0));
        assert!(stub_embed(" ,.; ", 16).iter().all(|x| *x == 0.0));
    }

    #[test]
    fn order_invariant() {
        let a = stub_embed("derby pantry", 256);
        let b = stub_embed("pantry derby", 256);
        assert!((cosine(&a, &b) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn dim_one_is_unit() {
        assert_eq!(stub_embed("anything at all", 1), vec![1.0]);
    }

    proptest! {
        #[test]
        fn nonempty_tokens_have_unit_norm(words in prop::collection::vec("[a-z0-9]{1,8}", 1..20)) {
            let v = stub_embed(&words.join(" "), 256);
            prop_assert!((norm(&v) - 1.0).abs() < 1e-6);
        }

        #[test]
        fn reordering_and_whitespace_do_not_change_vector(words in prop::collection::vec("[a-zA-Z]{1,6}", 1..10), seed in 0usize..100) {
            let mut shuffled = words.clone();
            shuffled.rotate_left(seed % words.len());
            let a = stub_embed(&words.join(" "), 64);
            let b = stub_embed(&shuffled.join("   \t "), 64);
            prop_assert!((cosine(&a, &b) - 1.0).abs() < 1e-6);
        }
    }
}
