use std::collections::{HashMap, HashSet};

use super::{order_free_mean, EvalCorpus, MetricsError};

/// CIDEr variant knobs. The default is the usual captioning formulation:
/// n = 1..4, Gaussian length penalty with σ = 6, final ×10 scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CiderOptions {
    pub sigma: f64,
    pub scale: f64,
}

impl Default for CiderOptions {
    fn default() -> Self {
        Self {
            sigma: 6.0,
            scale: 10.0,
        }
    }
}

impl CiderOptions {
    /// Same as the default but without the ×10 factor.
    pub fn raw() -> Self {
        Self {
            scale: 1.0,
            ..Self::default()
        }
    }
}

const MAX_N: usize = 4;

type Counts<'a> = HashMap<&'a [String], f64>;

fn counts(tokens: &[String], n: usize) -> Counts<'_> {
    let mut c = HashMap::new();
    for g in tokens.windows(n) {
        *c.entry(g).or_insert(0.0) += 1.0;
    }
    c
}

fn weighted<'a>(c: Counts<'a>, idf: &dyn Fn(&[String]) -> f64) -> Counts<'a> {
    c.into_iter().map(|(g, tf)| (g, tf * idf(g))).collect()
}

fn norm(v: &Counts<'_>) -> f64 {
    v.values().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(a: &Counts<'_>, b: &Counts<'_>) -> f64 {
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().filter_map(|(g, x)| b.get(g).map(|y| x * y)).sum();
    dot / (na * nb)
}

/// TF-IDF cosine consensus score. Document frequencies count the items
/// whose reference set contains an n-gram; IDF is `ln(M / max(df, 1))`.
pub fn cider_with(corpus: &EvalCorpus, options: CiderOptions) -> Result<f64, MetricsError> {
    let items = corpus.non_empty()?;
    let m = items.len() as f64;

    let mut df: Vec<HashMap<&[String], usize>> = vec![HashMap::new(); MAX_N];
    for item in items {
        for n in 1..=MAX_N {
            let present: HashSet<&[String]> = item.references.iter().flat_map(|r| r.windows(n)).collect();
            for g in present {
                *df[n - 1].entry(g).or_insert(0) += 1;
            }
        }
    }

    let two_sigma_sq = 2.0 * options.sigma * options.sigma;
    let scores = items
        .iter()
        .map(|item| {
            let per_n: f64 = (1..=MAX_N)
                .map(|n| {
                    let table = &df[n - 1];
                    let idf = |g: &[String]| (m / table.get(g).copied().unwrap_or(0).max(1) as f64).ln();
                    let hyp = weighted(counts(&item.hypothesis, n), &idf);
                    let total: f64 = item
                        .references
                        .iter()
                        .map(|r| {
                            let rv = weighted(counts(r, n), &idf);
                            let delta = item.hypothesis.len() as f64 - r.len() as f64;
                            cosine(&hyp, &rv) * (-delta * delta / two_sigma_sq).exp()
                        })
                        .sum();
                    total / item.references.len() as f64
                })
                .sum();
            options.scale * per_n / MAX_N as f64
        })
        .collect();
    Ok(order_free_mean(scores))
}

pub fn cider(corpus: &EvalCorpus) -> Result<f64, MetricsError> {
    cider_with(corpus, CiderOptions::default())
}
