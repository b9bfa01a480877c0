use super::{check_len, dot, NumError, Real, Tensor};

/// `y = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Affine<R> {
    pub weight: Tensor<R>,
    pub bias: Tensor<R>,
}

impl<R: Real> Affine<R> {
    pub fn zeros(input: usize, output: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[output, input]),
            bias: Tensor::zeros(&[output]),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, x: &[R]) -> Result<Vec<R>, NumError> {
        check_len("affine_forward", self.input_dim(), x.len())?;
        let mut y = vec![R::zero(); self.output_dim()];
        self.weight.matvec(x, &mut y);
        for (o, &b) in y.iter_mut().zip(self.bias.as_slice()) {
            *o += b;
        }
        Ok(y)
    }

    /// Accumulates `dW`, `db` into `grads` and returns `dx`.
    pub fn backward(&self, x: &[R], dy: &[R], grads: &mut Affine<R>) -> Result<Vec<R>, NumError> {
        check_len("affine_backward", self.input_dim(), x.len())?;
        check_len("affine_backward", self.output_dim(), dy.len())?;
        grads.weight.outer_acc(dy, x);
        for (g, &d) in grads.bias.as_mut_slice().iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![R::zero(); self.input_dim()];
        self.weight.matvec_t_acc(dy, &mut dx);
        Ok(dx)
    }
}

/// Lookup table mapping token ids to dense rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding<R> {
    pub table: Tensor<R>,
}

impl<R: Real> Embedding<R> {
    pub fn zeros(vocab: usize, dim: usize) -> Self {
        Self {
            table: Tensor::zeros(&[vocab, dim]),
        }
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    pub fn forward(&self, id: usize) -> Result<&[R], NumError> {
        if id >= self.vocab_size() {
            return Err(NumError::TargetOutOfRange {
                target: id,
                classes: self.vocab_size(),
            });
        }
        Ok(self.table.row(id))
    }

    pub fn backward(&self, id: usize, dy: &[R], grads: &mut Embedding<R>) -> Result<(), NumError> {
        if id >= self.vocab_size() {
            return Err(NumError::TargetOutOfRange {
                target: id,
                classes: self.vocab_size(),
            });
        }
        check_len("embedding_backward", self.dim(), dy.len())?;
        for (g, &d) in grads.table.row_mut(id).iter_mut().zip(dy) {
            *g += d;
        }
        Ok(())
    }
}

/// Average of `rows`, accumulated as offsets from the first row so that a
/// sequence of identical rows pools to exactly that row.
pub fn mean_pool_forward<R: Real, V: AsRef<[R]>>(rows: &[V]) -> Result<Vec<R>, NumError> {
    let first = rows.first().ok_or(NumError::EmptySequence)?.as_ref();
    let dim = first.len();
    let mut offset = vec![R::zero(); dim];
    for row in &rows[1..] {
        let row = row.as_ref();
        check_len("mean_pool_forward", dim, row.len())?;
        for ((o, &x), &f) in offset.iter_mut().zip(row).zip(first) {
            *o += x - f;
        }
    }
    let count = R::lit(rows.len() as f64);
    Ok(first
        .iter()
        .zip(&offset)
        .map(|(&f, &o)| f + o / count)
        .collect())
}

/// Gradient reaching each pooled row: `dy / T`.
pub fn mean_pool_backward<R: Real>(dy: &[R], steps: usize) -> Result<Vec<R>, NumError> {
    if steps == 0 {
        return Err(NumError::EmptySequence);
    }
    let inv = R::one() / R::lit(steps as f64);
    Ok(dy.iter().map(|&d| d * inv).collect())
}

#[derive(Debug, Clone)]
pub struct SoftmaxCeCache<R> {
    pub probs: Vec<R>,
    pub target: usize,
}

/// Negative log-probability of `target` under `softmax(logits)`.
pub fn softmax_ce_forward<R: Real>(
    logits: &[R],
    target: usize,
) -> Result<(R, SoftmaxCeCache<R>), NumError> {
    if target >= logits.len() {
        return Err(NumError::TargetOutOfRange {
            target,
            classes: logits.len(),
        });
    }
    let max = logits.iter().copied().fold(R::neg_infinity(), R::max);
    let mut probs: Vec<R> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: R = probs.iter().copied().sum();
    let log_total = total.ln();
    let loss = log_total - (logits[target] - max);
    let inv = R::one() / total;
    probs.iter_mut().for_each(|p| *p *= inv);
    Ok((loss, SoftmaxCeCache { probs, target }))
}

/// `dlogits = upstream * (softmax - onehot(target))`.
pub fn softmax_ce_backward<R: Real>(cache: &SoftmaxCeCache<R>, upstream: R) -> Vec<R> {
    let mut d: Vec<R> = cache.probs.iter().map(|&p| p * upstream).collect();
    d[cache.target] -= upstream;
    d
}

#[derive(Debug, Clone)]
pub struct CosineCache<R> {
    a: Vec<R>,
    b: Vec<R>,
    ab: R,
    norm_a: R,
    denom: R,
    clamped: bool,
}

/// `1 - a·b / max(‖a‖‖b‖, eps)`. Only `a` receives a gradient.
pub fn cosine_dissim_forward<R: Real>(
    a: &[R],
    b: &[R],
    eps: R,
) -> Result<(R, CosineCache<R>), NumError> {
    if a.len() != b.len() {
        return Err(NumError::DimensionMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let ab = dot(a, b);
    let norm_a = dot(a, a).sqrt();
    let norm_b = dot(b, b).sqrt();
    let prod = norm_a * norm_b;
    let clamped = prod <= eps;
    let denom = if clamped { eps } else { prod };
    let loss = R::one() - ab / denom;
    Ok((
        loss,
        CosineCache {
            a: a.to_vec(),
            b: b.to_vec(),
            ab,
            norm_a,
            denom,
            clamped,
        },
    ))
}

pub fn cosine_dissim_backward<R: Real>(cache: &CosineCache<R>, upstream: R) -> Vec<R> {
    if cache.clamped {
        return cache.b.iter().map(|&b| -upstream * b / cache.denom).collect();
    }
    // d cos / da = b / (|a||b|) - (a·b) a / (|a|^3 |b|)
    let inv = R::one() / cache.denom;
    let coef = cache.ab / (cache.norm_a * cache.norm_a * cache.denom);
    cache
        .a
        .iter()
        .zip(&cache.b)
        .map(|(&a, &b)| -upstream * (b * inv - coef * a))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::grad_check;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_vec(rng: &mut Xoshiro256PlusPlus, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
    }

    #[test]
    fn mean_pool_of_two_rows() {
        let rows = vec![vec![1.0, 3.0], vec![3.0, 5.0]];
        assert_eq!(mean_pool_forward::<f64, _>(&rows).unwrap(), vec![2.0, 4.0]);
    }

    #[test]
    fn mean_pool_identical_rows_is_exact() {
        let row = vec![0.1f64, -0.7, 1.3];
        let rows = vec![row.clone(); 3];
        assert_eq!(mean_pool_forward::<f64, _>(&rows).unwrap(), row);
    }

    #[test]
    fn mean_pool_empty_is_error() {
        let rows: Vec<Vec<f64>> = vec![];
        assert_eq!(mean_pool_forward::<f64, _>(&rows), Err(NumError::EmptySequence));
        assert_eq!(mean_pool_backward::<f64>(&[1.0], 0), Err(NumError::EmptySequence));
    }

    #[test]
    fn mean_pool_backward_matches_finite_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(3);
        let flat = random_vec(&mut rng, 12);
        let w = random_vec(&mut rng, 4);
        let loss = |p: &[f64]| {
            let rows: Vec<&[f64]> = p.chunks(4).collect();
            dot(&mean_pool_forward::<f64, _>(&rows).unwrap(), &w)
        };
        let d = mean_pool_backward(&w, 3).unwrap();
        let analytic: Vec<f64> = (0..3).flat_map(|_| d.clone()).collect();
        let report = grad_check(&flat, &analytic, 1e-5, loss);
        assert!(report.max_relative_error <= 1e-6, "{report:?}");
    }

    #[test]
    fn affine_identity_passes_input_through() {
        let mut layer = Affine::<f64>::zeros(3, 3);
        for i in 0..3 {
            layer.weight.row_mut(i)[i] = 1.0;
        }
        let x = vec![0.5, -2.0, 7.0];
        assert_eq!(layer.forward(&x).unwrap(), x);
    }

    #[test]
    fn affine_shape_mismatch() {
        let layer = Affine::<f64>::zeros(3, 2);
        assert!(matches!(
            layer.forward(&[1.0, 2.0]),
            Err(NumError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn affine_backward_matches_finite_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(11);
        let (input, output) = (5, 4);
        let x = random_vec(&mut rng, input);
        let w = random_vec(&mut rng, output);
        let mut layer = Affine::<f64>::zeros(input, output);
        layer.weight = Tensor::from_vec(&[output, input], random_vec(&mut rng, input * output)).unwrap();
        layer.bias = Tensor::vector(random_vec(&mut rng, output));

        // parameters and input packed together: [W, b, x]
        let mut grads = Affine::zeros(input, output);
        let dx = layer.backward(&x, &w, &mut grads).unwrap();
        let mut packed = layer.weight.as_slice().to_vec();
        packed.extend_from_slice(layer.bias.as_slice());
        packed.extend_from_slice(&x);
        let mut analytic = grads.weight.as_slice().to_vec();
        analytic.extend_from_slice(grads.bias.as_slice());
        analytic.extend_from_slice(&dx);

        let report = grad_check(&packed, &analytic, 1e-5, |p| {
            let mut l = Affine::<f64>::zeros(input, output);
            l.weight.as_mut_slice().copy_from_slice(&p[..input * output]);
            l.bias.as_mut_slice().copy_from_slice(&p[input * output..input * output + output]);
            dot(&l.forward(&p[input * output + output..]).unwrap(), &w)
        });
        assert!(report.max_relative_error <= 1e-6, "{report:?}");
    }

    #[test]
    fn embedding_backward_matches_finite_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(5);
        let mut emb = Embedding::<f64>::zeros(6, 3);
        emb.table = Tensor::from_vec(&[6, 3], random_vec(&mut rng, 18)).unwrap();
        let ids = [2usize, 4, 2];
        let w = random_vec(&mut rng, 3);
        let mut grads = Embedding::zeros(6, 3);
        for &id in &ids {
            emb.backward(id, &w, &mut grads).unwrap();
        }
        let report = grad_check(emb.table.as_slice(), grads.table.as_slice(), 1e-5, |p| {
            let t = Tensor::from_vec(&[6, 3], p.to_vec()).unwrap();
            let e = Embedding { table: t };
            ids.iter().map(|&id| dot(e.forward(id).unwrap(), &w)).sum()
        });
        assert!(report.max_relative_error <= 1e-6, "{report:?}");
        assert!(emb.forward(6).is_err());
    }

    #[test]
    fn uniform_logits_give_ln_v() {
        let (loss, _) = softmax_ce_forward(&[0.3f64; 4], 2).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
        assert!((loss - 1.3863).abs() < 1e-4);
    }

    #[test]
    fn ce_decreases_with_target_margin() {
        let mut prev = f64::INFINITY;
        for margin in [0.0, 1.0, 2.0, 5.0, 10.0, 20.0, 40.0] {
            let (loss, _) = softmax_ce_forward(&[0.0, margin, 0.0], 1).unwrap();
            assert!(loss < prev);
            assert!(loss >= 0.0);
            prev = loss;
        }
        assert!(prev < 1e-16);
    }

    #[test]
    fn ce_target_out_of_range() {
        assert_eq!(
            softmax_ce_forward(&[0.0f64; 3], 3).err(),
            Some(NumError::TargetOutOfRange { target: 3, classes: 3 })
        );
    }

    #[test]
    fn ce_gradient_matches_finite_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(8);
        let logits = random_vec(&mut rng, 7);
        let (_, cache) = softmax_ce_forward(&logits, 4).unwrap();
        let analytic = softmax_ce_backward(&cache, 1.0);
        let report = grad_check(&logits, &analytic, 1e-5, |p| softmax_ce_forward(p, 4).unwrap().0);
        assert!(report.max_relative_error <= 1e-6, "{report:?}");
    }

    #[test]
    fn ce_is_stable_for_large_logits() {
        let (loss, _) = softmax_ce_forward(&[1000.0f64, 0.0, -1000.0], 1).unwrap();
        assert!((loss - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn cosine_extremes() {
        let a = [1.0f64, 2.0, -0.5];
        let neg: Vec<f64> = a.iter().map(|x| -x).collect();
        assert!(cosine_dissim_forward(&a, &a, 1e-8).unwrap().0.abs() < 1e-15);
        assert!((cosine_dissim_forward(&a, &neg, 1e-8).unwrap().0 - 2.0).abs() < 1e-15);
        let (l, _) = cosine_dissim_forward(&[1.0f64, 0.0], &[0.0, 3.0], 1e-8).unwrap();
        assert_eq!(l, 1.0);
    }

    #[test]
    fn cosine_zero_vector_is_finite() {
        let (l, cache) = cosine_dissim_forward(&[0.0f64; 3], &[1.0, 2.0, 3.0], 1e-8).unwrap();
        assert_eq!(l, 1.0);
        assert!(cosine_dissim_backward(&cache, 1.0).iter().all(|g| g.is_finite()));
    }

    #[test]
    fn cosine_dimension_mismatch() {
        assert!(matches!(
            cosine_dissim_forward(&[1.0f64], &[1.0, 2.0], 1e-8),
            Err(NumError::DimensionMismatch { left: 1, right: 2 })
        ));
    }

    #[test]
    fn cosine_gradient_matches_finite_differences() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(21);
        let a = random_vec(&mut rng, 9);
        let b = random_vec(&mut rng, 9);
        let (_, cache) = cosine_dissim_forward(&a, &b, 1e-8).unwrap();
        let analytic = cosine_dissim_backward(&cache, 1.0);
        let report = grad_check(&a, &analytic, 1e-5, |p| cosine_dissim_forward(p, &b, 1e-8).unwrap().0);
        assert!(report.max_relative_error <= 1e-6, "{report:?}");
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn ce_is_nonnegative(logits in prop::collection::vec(-50.0f64..50.0, 2..12), t in 0usize..2) {
                let (loss, _) = softmax_ce_forward(&logits, t).unwrap();
                prop_assert!(loss >= 0.0 && loss.is_finite());
            }

            #[test]
            fn cosine_in_range(pair in prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), 1..16)) {
                let (a, b): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
                let (loss, _) = cosine_dissim_forward(&a, &b, 1e-8).unwrap();
                prop_assert!((-1e-12..=2.0 + 1e-12).contains(&loss), "loss {}", loss);
            }
        }
    }
}
