use super::{check_len, sigmoid, NumError, Real, Tensor};

/// Single GRU cell with separate input and recurrent biases.
///
/// Gate rows are stacked in the order reset `r`, update `z`, candidate `n`:
///
/// ```text
/// r  = σ(W_ir x + b_ir + W_hr h + b_hr)
/// z  = σ(W_iz x + b_iz + W_hz h + b_hz)
/// n  = tanh(W_in x + b_in + r ∘ (W_hn h + b_hn))
/// h' = (1 - z) ∘ n + z ∘ h
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct GruCell<R> {
    pub w_ih: Tensor<R>,
    pub w_hh: Tensor<R>,
    pub b_ih: Tensor<R>,
    pub b_hh: Tensor<R>,
}

/// Intermediates of one forward step.
#[derive(Debug, Clone)]
pub struct GruCache<R> {
    x: Vec<R>,
    h: Vec<R>,
    r: Vec<R>,
    z: Vec<R>,
    n: Vec<R>,
    /// `W_hn h + b_hn`
    hn: Vec<R>,
}

impl<R: Real> GruCell<R> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_ih: Tensor::zeros(&[3 * hidden, input]),
            w_hh: Tensor::zeros(&[3 * hidden, hidden]),
            b_ih: Tensor::zeros(&[3 * hidden]),
            b_hh: Tensor::zeros(&[3 * hidden]),
        }
    }

    pub fn input_size(&self) -> usize {
        self.w_ih.cols()
    }

    pub fn hidden_size(&self) -> usize {
        self.w_hh.cols()
    }

    pub fn forward(&self, x: &[R], h: &[R]) -> Result<(Vec<R>, GruCache<R>), NumError> {
        let hs = self.hidden_size();
        check_len("gru_cell_forward", self.input_size(), x.len())?;
        check_len("gru_cell_forward", hs, h.len())?;

        let mut gi = vec![R::zero(); 3 * hs];
        let mut gh = vec![R::zero(); 3 * hs];
        self.w_ih.matvec(x, &mut gi);
        self.w_hh.matvec(h, &mut gh);
        for (g, &b) in gi.iter_mut().zip(self.b_ih.as_slice()) {
            *g += b;
        }
        for (g, &b) in gh.iter_mut().zip(self.b_hh.as_slice()) {
            *g += b;
        }

        let mut r = vec![R::zero(); hs];
        let mut z = vec![R::zero(); hs];
        let mut n = vec![R::zero(); hs];
        let mut out = vec![R::zero(); hs];
        for j in 0..hs {
            r[j] = sigmoid(gi[j] + gh[j]);
            z[j] = sigmoid(gi[hs + j] + gh[hs + j]);
            n[j] = (gi[2 * hs + j] + r[j] * gh[2 * hs + j]).tanh();
            out[j] = (R::one() - z[j]) * n[j] + z[j] * h[j];
        }
        let hn = gh[2 * hs..].to_vec();
        Ok((
            out,
            GruCache {
                x: x.to_vec(),
                h: h.to_vec(),
                r,
                z,
                n,
                hn,
            },
        ))
    }

    /// Back-propagates `dh_new` through one step. Parameter gradients are
    /// accumulated into `grads`; returns `(dx, dh)`.
    pub fn backward(
        &self,
        cache: &GruCache<R>,
        dh_new: &[R],
        grads: &mut GruCell<R>,
    ) -> Result<(Vec<R>, Vec<R>), NumError> {
        let hs = self.hidden_size();
        check_len("gru_cell_backward", hs, dh_new.len())?;
        check_len("gru_cell_backward", hs, cache.h.len())?;
        check_len("gru_cell_backward", self.input_size(), cache.x.len())?;

        let mut dgi = vec![R::zero(); 3 * hs];
        let mut dgh = vec![R::zero(); 3 * hs];
        let mut dh = vec![R::zero(); hs];
        let one = R::one();
        for j in 0..hs {
            let (r, z, n) = (cache.r[j], cache.z[j], cache.n[j]);
            let d = dh_new[j];
            let dn = d * (one - z);
            let dz = d * (cache.h[j] - n);
            dh[j] = d * z;

            let dan = dn * (one - n * n);
            let dr = dan * cache.hn[j];
            let dar = dr * r * (one - r);
            let daz = dz * z * (one - z);

            dgi[j] = dar;
            dgi[hs + j] = daz;
            dgi[2 * hs + j] = dan;
            dgh[j] = dar;
            dgh[hs + j] = daz;
            dgh[2 * hs + j] = dan * r;
        }

        grads.w_ih.outer_acc(&dgi, &cache.x);
        grads.w_hh.outer_acc(&dgh, &cache.h);
        for (g, &d) in grads.b_ih.as_mut_slice().iter_mut().zip(&dgi) {
            *g += d;
        }
        for (g, &d) in grads.b_hh.as_mut_slice().iter_mut().zip(&dgh) {
            *g += d;
        }

        let mut dx = vec![R::zero(); self.input_size()];
        self.w_ih.matvec_t_acc(&dgi, &mut dx);
        self.w_hh.matvec_t_acc(&dgh, &mut dh);
        Ok((dx, dh))
    }

    pub fn tensors(&self) -> [&Tensor<R>; 4] {
        [&self.w_ih, &self.w_hh, &self.b_ih, &self.b_hh]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor<R>; 4] {
        [&mut self.w_ih, &mut self.w_hh, &mut self.b_ih, &mut self.b_hh]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numcore::{dot, grad_check, init_uniform};
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    fn random_cell(seed: u64, input: usize, hidden: usize) -> GruCell<f64> {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
        let mut cell = GruCell::zeros(input, hidden);
        for t in cell.tensors_mut() {
            init_uniform(t, 0.8, &mut rng);
        }
        cell
    }

    fn pack(cell: &GruCell<f64>) -> Vec<f64> {
        cell.tensors().iter().flat_map(|t| t.as_slice().to_vec()).collect()
    }

    fn unpack(p: &[f64], input: usize, hidden: usize) -> GruCell<f64> {
        let mut cell = GruCell::zeros(input, hidden);
        let mut off = 0;
        for t in cell.tensors_mut() {
            let n = t.len();
            t.as_mut_slice().copy_from_slice(&p[off..off + n]);
            off += n;
        }
        cell
    }

    /// Straight-line evaluation with explicit per-gate weight indexing.
    fn oracle_step(c: &GruCell<f64>, x: &[f64], h: &[f64]) -> Vec<f64> {
        let hs = h.len();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let lin = |w: &Tensor<f64>, b: &Tensor<f64>, row: usize, v: &[f64]| -> f64 {
            let mut s = b.as_slice()[row];
            for k in 0..v.len() {
                s += w.as_slice()[row * v.len() + k] * v[k];
            }
            s
        };
        (0..hs)
            .map(|j| {
                let r = sig(lin(&c.w_ih, &c.b_ih, j, x) + lin(&c.w_hh, &c.b_hh, j, h));
                let z = sig(lin(&c.w_ih, &c.b_ih, hs + j, x) + lin(&c.w_hh, &c.b_hh, hs + j, h));
                let n = (lin(&c.w_ih, &c.b_ih, 2 * hs + j, x) + r * lin(&c.w_hh, &c.b_hh, 2 * hs + j, h)).tanh();
                (1.0 - z) * n + z * h[j]
            })
            .collect()
    }

    #[test]
    fn zero_params_zero_state_stays_zero() {
        let cell = GruCell::<f64>::zeros(3, 4);
        let (h, _) = cell.forward(&[0.0; 3], &[0.0; 4]).unwrap();
        assert_eq!(h, vec![0.0; 4]);
    }

    #[test]
    fn zero_params_halve_the_state() {
        let cell = GruCell::<f64>::zeros(3, 4);
        let (h, _) = cell.forward(&[1.0, -2.0, 5.0], &[0.4; 4]).unwrap();
        assert_eq!(h, vec![0.2; 4]);
    }

    #[test]
    fn forward_matches_straight_line_oracle() {
        let cell = random_cell(1, 3, 4);
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(2);
        let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let h: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (out, _) = cell.forward(&x, &h).unwrap();
        for (a, b) in out.iter().zip(oracle_step(&cell, &x, &h)) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn shape_errors() {
        let cell = GruCell::<f64>::zeros(3, 4);
        assert!(cell.forward(&[0.0; 2], &[0.0; 4]).is_err());
        assert!(cell.forward(&[0.0; 3], &[0.0; 5]).is_err());
        let (_, cache) = cell.forward(&[0.0; 3], &[0.0; 4]).unwrap();
        let mut g = GruCell::zeros(3, 4);
        assert!(cell.backward(&cache, &[0.0; 3], &mut g).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let cell = random_cell(4, 3, 4);
        let (_, cache) = cell.forward(&[0.3, 0.1, -0.2], &[0.5, -0.5, 0.1, 0.0]).unwrap();
        let mut g = GruCell::zeros(3, 4);
        let (dx, dh) = cell.backward(&cache, &[0.0; 4], &mut g).unwrap();
        assert!(dx.iter().chain(&dh).all(|&v| v == 0.0));
        assert!(pack(&g).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let (input, hidden) = (3, 4);
        for seed in 0..5 {
            let cell = random_cell(100 + seed, input, hidden);
            let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
            let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let w: Vec<f64> = (0..hidden).map(|_| rng.gen_range(-1.0..1.0)).collect();

            let (_, cache) = cell.forward(&x, &h).unwrap();
            let mut g = GruCell::zeros(input, hidden);
            let (dx, dh) = cell.backward(&cache, &w, &mut g).unwrap();

            let mut packed = pack(&cell);
            let np = packed.len();
            packed.extend_from_slice(&x);
            packed.extend_from_slice(&h);
            let mut analytic = pack(&g);
            analytic.extend_from_slice(&dx);
            analytic.extend_from_slice(&dh);

            let report = grad_check(&packed, &analytic, 1e-5, |p| {
                let c = unpack(&p[..np], input, hidden);
                let (out, _) = c
                    .forward(&p[np..np + input], &p[np + input..])
                    .unwrap();
                dot(&out, &w)
            });
            assert!(report.max_relative_error <= 1e-6, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn saturated_update_gate_copies_state() {
        let mut cell = random_cell(9, 3, 4);
        // z ≈ 1 everywhere
        for j in 4..8 {
            cell.b_ih.as_mut_slice()[j] = 60.0;
        }
        let x = [0.2, -0.4, 0.9];
        let h = [0.1, -0.3, 0.6, 0.0];
        let (out, cache) = cell.forward(&x, &h).unwrap();
        for (a, b) in out.iter().zip(&h) {
            assert!((a - b).abs() < 1e-12);
        }
        let upstream = [1.0, -2.0, 0.5, 3.0];
        let mut g = GruCell::zeros(3, 4);
        let (dx, dh) = cell.backward(&cache, &upstream, &mut g).unwrap();
        for (a, b) in dh.iter().zip(&upstream) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(dx.iter().all(|v| v.abs() < 1e-12));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn output_stays_in_open_unit_interval(
                seed in 0u64..1000,
                x in prop::collection::vec(-5.0f64..5.0, 3),
                h in prop::collection::vec(-0.999f64..0.999, 4),
            ) {
                let cell = random_cell(seed, 3, 4);
                let (out, _) = cell.forward(&x, &h).unwrap();
                prop_assert!(out.iter().all(|v| v.abs() < 1.0));
            }
        }
    }
}
