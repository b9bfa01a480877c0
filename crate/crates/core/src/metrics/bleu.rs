use std::collections::HashMap;

use super::{EvalCorpus, MetricsError};

/// Corpus-level clipped n-gram statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct BleuStats {
    /// Modified precision p_1..p_max_n.
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hypothesis_len: usize,
    pub reference_len: usize,
    pub score: f64,
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for g in tokens.windows(n) {
        *counts.entry(g).or_insert(0) += 1;
    }
    counts
}

/// Reference length closest to `hyp_len`; ties go to the shorter one.
fn closest_ref_len(hyp_len: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(hyp_len), r))
        .unwrap_or(0)
}

/// Cumulative BLEU with uniform weights, closest-reference brevity penalty
/// and no smoothing: any zero precision gives a score of 0.
pub fn bleu_stats(corpus: &EvalCorpus, max_n: usize) -> Result<BleuStats, MetricsError> {
    if !(1..=4).contains(&max_n) {
        return Err(MetricsError::BadOrder(max_n));
    }
    let items = corpus.non_empty()?;
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut hyp_len, mut ref_len) = (0usize, 0usize);

    for item in items {
        hyp_len += item.hypothesis.len();
        ref_len += closest_ref_len(item.hypothesis.len(), &item.references);
        for n in 1..=max_n {
            let hyp = ngram_counts(&item.hypothesis, n);
            let mut max_ref: HashMap<&[String], usize> = HashMap::new();
            for r in &item.references {
                for (g, c) in ngram_counts(r, n) {
                    let slot = max_ref.entry(g).or_insert(0);
                    *slot = (*slot).max(c);
                }
            }
            for (g, c) in hyp {
                matched[n - 1] += c.min(max_ref.get(g).copied().unwrap_or(0));
                total[n - 1] += c;
            }
        }
    }

    let precisions: Vec<f64> = matched
        .iter()
        .zip(&total)
        .map(|(&m, &t)| if t == 0 { 0.0 } else { m as f64 / t as f64 })
        .collect();
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len < ref_len {
        (1.0 - ref_len as f64 / hyp_len as f64).exp()
    } else {
        1.0
    };
    let score = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / max_n as f64;
        brevity_penalty * log_mean.exp()
    };
    Ok(BleuStats {
        precisions,
        brevity_penalty,
        hypothesis_len: hyp_len,
        reference_len: ref_len,
        score,
    })
}

pub fn bleu(corpus: &EvalCorpus, max_n: usize) -> Result<f64, MetricsError> {
    bleu_stats(corpus, max_n).map(|s| s.score)
}
