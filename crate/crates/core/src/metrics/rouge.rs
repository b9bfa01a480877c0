use super::{order_free_mean, EvalCorpus, MetricsError};

pub const ROUGE_BETA: f64 = 1.2;

/// Longest common subsequence length, O(|a|·|b|) dynamic programme.
pub fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

fn f_lcs(hyp: &[String], reference: &[String], beta: f64) -> f64 {
    let lcs = lcs_len(hyp, reference);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / hyp.len() as f64;
    let r = lcs as f64 / reference.len() as f64;
    let b2 = beta * beta;
    (1.0 + b2) * p * r / (r + b2 * p)
}

/// Mean over items of the best LCS F-measure against any reference.
pub fn rouge_l_with(corpus: &EvalCorpus, beta: f64) -> Result<f64, MetricsError> {
    let items = corpus.non_empty()?;
    let scores = items
        .iter()
        .map(|item| {
            item.references
                .iter()
                .map(|r| f_lcs(&item.hypothesis, r, beta))
                .fold(0.0, f64::max)
        })
        .collect();
    Ok(order_free_mean(scores))
}

pub fn rouge_l(corpus: &EvalCorpus) -> Result<f64, MetricsError> {
    rouge_l_with(corpus, ROUGE_BETA)
}
