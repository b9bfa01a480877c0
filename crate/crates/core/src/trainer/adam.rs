use super::TrainError;
use crate::captioner::ModelParams;
use crate::numcore::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 4e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<R> {
    pub m: ModelParams<R>,
    pub u: ModelParams<R>,
    pub t: u64,
}

impl<R: Real> AdamState<R> {
    pub fn new(params: &ModelParams<R>) -> Self {
        Self {
            m: params.zeros_like(),
            u: params.zeros_like(),
            t: 0,
        }
    }
}

/// One bias-corrected Adam update of a flat slice at step `t` (1-based).
pub fn adam_update<R: Real>(p: &mut [R], g: &[R], m: &mut [R], u: &mut [R], t: u64, cfg: &AdamConfig) {
    let (b1, b2) = (R::lit(cfg.beta1), R::lit(cfg.beta2));
    let (c1, c2) = (R::one() - b1, R::one() - b2);
    let bc1 = R::lit(1.0 - cfg.beta1.powf(t as f64));
    let bc2 = R::lit(1.0 - cfg.beta2.powf(t as f64));
    let (lr, eps) = (R::lit(cfg.lr), R::lit(cfg.eps));
    for i in 0..p.len() {
        m[i] = b1 * m[i] + c1 * g[i];
        u[i] = b2 * u[i] + c2 * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let u_hat = u[i] / bc2;
        p[i] -= lr * m_hat / (u_hat.sqrt() + eps);
    }
}

pub fn adam_step<R: Real>(
    params: &mut ModelParams<R>,
    grads: &ModelParams<R>,
    state: &mut AdamState<R>,
    cfg: &AdamConfig,
) -> Result<(), TrainError> {
    for (((name, p), (_, g)), ((_, m), (_, u))) in params
        .tensors()
        .into_iter()
        .zip(grads.tensors())
        .zip(state.m.tensors().into_iter().zip(state.u.tensors()))
    {
        if g.shape() != p.shape() || m.shape() != p.shape() || u.shape() != p.shape() {
            return Err(TrainError::ShapeMismatch {
                name,
                expected: p.shape().to_vec(),
                found: g.shape().to_vec(),
            });
        }
    }
    state.t += 1;
    let t = state.t;
    let moments = state.m.tensors_mut().into_iter().zip(state.u.tensors_mut());
    for (((_, p), (_, g)), ((_, m), (_, u))) in params.tensors_mut().into_iter().zip(grads.tensors()).zip(moments) {
        adam_update(p.as_mut_slice(), g.as_slice(), m.as_mut_slice(), u.as_mut_slice(), t, cfg);
    }
    Ok(())
}
