//! Latent Dirichlet allocation fit by collapsed Gibbs sampling, used to
//! surface themes in the correctly-predicted item subsets.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};
use crate::preprocess::CleanStem;

/// A fitted topic model over a document subset's local vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicModel {
    pub n_topics: usize,
    /// Subset vocabulary, sorted; indexes the columns of `phi`.
    pub vocab: Vec<String>,
    /// Topic-term distribution, `n_topics` rows summing to 1.
    pub phi: Vec<Vec<f64>>,
    /// Document-topic distribution, one row per document summing to 1.
    pub theta: Vec<Vec<f64>>,
    pub alpha: f64,
    pub beta: f64,
    pub n_iterations: usize,
    pub seed: u64,
}

/// Fits LDA with `iterations` collapsed Gibbs sweeps.
///
/// Topic-assignment counts are checked for conservation after every sweep;
/// phi and theta are estimated from the final counts with Dirichlet
/// smoothing.
pub fn lda_fit(
    docs: &[CleanStem],
    n_topics: usize,
    alpha: f64,
    beta: f64,
    iterations: usize,
    seed: u64,
) -> Result<TopicModel> {
    if n_topics == 0 {
        return Err(AuditError::Topics("n_topics must be >= 1".into()));
    }
    if docs.len() < n_topics {
        return Err(AuditError::Topics(format!(
            "subset has {} documents, fewer than {} topics",
            docs.len(),
            n_topics
        )));
    }
    let mut vocab: Vec<String> = docs
        .iter()
        .flat_map(|d| d.tokens.iter().cloned())
        .collect();
    vocab.sort();
    vocab.dedup();
    if vocab.is_empty() {
        return Err(AuditError::Topics("vocabulary collapse: no tokens in subset".into()));
    }
    let v = vocab.len();
    let index: std::collections::BTreeMap<&str, usize> = vocab
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let word_ids: Vec<Vec<usize>> = docs
        .iter()
        .map(|d| d.tokens.iter().map(|t| index[t.as_str()]).collect())
        .collect();
    let total_tokens: usize = word_ids.iter().map(Vec::len).sum();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
    let mut ndk = vec![vec![0usize; n_topics]; docs.len()];
    let mut nkv = vec![vec![0usize; v]; n_topics];
    let mut nk = vec![0usize; n_topics];
    for (d, words) in word_ids.iter().enumerate() {
        let mut zd = Vec::with_capacity(words.len());
        for &w in words {
            let k = rng.gen_range(0..n_topics);
            zd.push(k);
            ndk[d][k] += 1;
            nkv[k][w] += 1;
            nk[k] += 1;
        }
        z.push(zd);
    }

    let beta_v = beta * v as f64;
    let mut weights = vec![0.0; n_topics];
    for _sweep in 0..iterations {
        for (d, words) in word_ids.iter().enumerate() {
            for (i, &w) in words.iter().enumerate() {
                let old = z[d][i];
                ndk[d][old] -= 1;
                nkv[old][w] -= 1;
                nk[old] -= 1;

                let mut total = 0.0;
                for (k, weight) in weights.iter_mut().enumerate() {
                    *weight = (ndk[d][k] as f64 + alpha) * (nkv[k][w] as f64 + beta)
                        / (nk[k] as f64 + beta_v);
                    total += *weight;
                }
                let target = rng.gen::<f64>() * total;
                let mut acc = 0.0;
                let mut new = n_topics - 1;
                for (k, &weight) in weights.iter().enumerate() {
                    acc += weight;
                    if target < acc {
                        new = k;
                        break;
                    }
                }

                z[d][i] = new;
                ndk[d][new] += 1;
                nkv[new][w] += 1;
                nk[new] += 1;
            }
        }
        let assigned: usize = nk.iter().sum();
        assert_eq!(
            assigned, total_tokens,
            "topic assignment counts diverged from token count"
        );
    }

    let phi: Vec<Vec<f64>> = (0..n_topics)
        .map(|k| {
            (0..v)
                .map(|w| (nkv[k][w] as f64 + beta) / (nk[k] as f64 + beta_v))
                .collect()
        })
        .collect();
    let alpha_t = alpha * n_topics as f64;
    let theta: Vec<Vec<f64>> = (0..docs.len())
        .map(|d| {
            let nd = word_ids[d].len() as f64;
            (0..n_topics)
                .map(|k| (ndk[d][k] as f64 + alpha) / (nd + alpha_t))
                .collect()
        })
        .collect();

    Ok(TopicModel {
        n_topics,
        vocab,
        phi,
        theta,
        alpha,
        beta,
        n_iterations: iterations,
        seed,
    })
}

/// The `n` highest-probability terms of one topic, descending by phi with
/// lexicographic tie-breaking; clamps `n` to the vocabulary size.
pub fn top_terms(model: &TopicModel, topic: usize, n: usize) -> Result<Vec<(String, f64)>> {
    if topic >= model.n_topics {
        return Err(AuditError::Topics(format!(
            "topic index {topic} out of range (n_topics = {})",
            model.n_topics
        )));
    }
    let mut ranked: Vec<(String, f64)> = model
        .vocab
        .iter()
        .cloned()
        .zip(model.phi[topic].iter().copied())
        .collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    ranked.truncate(n);
    Ok(ranked)
}
