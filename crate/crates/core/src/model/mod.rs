// SPDX-License-Identifier: MIT OR Apache-2.0

//! Recurrent change-probability network.
//!
//! A single recurrent cell feeds two ReLU layers and a sigmoid output, giving
//! one probability per step that depends only on the observations so far.
//! Gradients are computed by hand through the unrolled recurrence.
//!
//! Parameters live in one flat vector. Matrices are row-major, and blocks are
//! laid out in this order:
//!
//! | block      | LSTM                 | GRU                          |
//! |------------|----------------------|------------------------------|
//! | input      | `W_x: 4H × d`        | `W_x: 3H × d`                |
//! | recurrent  | `W_h: 4H × H`        | `W_h: 3H × H`                |
//! | biases     | `b: 4H`              | `b_x: 3H`, then `b_h: 3H`    |
//! | dense 1    | `W_1: F1 × H`, `b_1: F1`                            ||
//! | dense 2    | `W_2: F2 × F1`, `b_2: F2`                           ||
//! | output     | `w_o: F2`, `b_o: 1`                                 ||
//!
//! LSTM gate rows are ordered input, forget, candidate, output. GRU rows are
//! ordered reset, update, candidate, with `n = tanh(W_xn x + b_xn + r ⊙ (W_hn h + b_hn))`
//! and `h' = (1 - z) ⊙ n + z ⊙ h`.

mod io;
mod train;

pub use io::{
    decode_model, encode_model, load_model, load_model_expecting, save_model, MODEL_FORMAT_VERSION,
    MODEL_MAGIC,
};
pub use train::{train, EpochRecord, LossKind, Optimizer, TrainConfig, TrainingLog};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::{ProbabilitySeries, Sequence};
use crate::error::{invalid, CpdError, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CellKind {
    /// Gated cell with a memory carry.
    #[serde(alias = "gated-with-memory-cell")]
    Lstm,
    /// Gated cell without a separate memory.
    #[serde(alias = "simple-gated")]
    Gru,
}

impl CellKind {
    fn gates(self) -> usize {
        match self {
            CellKind::Lstm => 4,
            CellKind::Gru => 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub fc_dims: [usize; 2],
    pub cell_kind: CellKind,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            input_dim: 1,
            hidden_dim: 32,
            fc_dims: [16, 16],
            cell_kind: CellKind::Lstm,
        }
    }
}

impl ModelConfig {
    pub fn new(input_dim: usize) -> Self {
        Self {
            input_dim,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.fc_dims.contains(&0) {
            return Err(invalid(format!(
                "all model dimensions must be >= 1: {self:?}"
            )));
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        Layout::new(self).total
    }
}

/// Offsets of each parameter block inside the flat vector.
#[derive(Clone, Copy, Debug)]
struct Layout {
    w_x: usize,
    w_h: usize,
    b_x: usize,
    /// GRU only: recurrent-side biases.
    b_h: usize,
    w_1: usize,
    b_1: usize,
    w_2: usize,
    b_2: usize,
    w_o: usize,
    b_o: usize,
    total: usize,
}

impl Layout {
    fn new(cfg: &ModelConfig) -> Self {
        let (d, h) = (cfg.input_dim, cfg.hidden_dim);
        let [f1, f2] = cfg.fc_dims;
        let g = cfg.cell_kind.gates() * h;
        let w_x = 0;
        let w_h = w_x + g * d;
        let b_x = w_h + g * h;
        let b_h = b_x + g;
        let w_1 = match cfg.cell_kind {
            CellKind::Lstm => b_h,
            CellKind::Gru => b_h + g,
        };
        let b_1 = w_1 + f1 * h;
        let w_2 = b_1 + f1;
        let b_2 = w_2 + f2 * f1;
        let w_o = b_2 + f2;
        let b_o = w_o + f2;
        Self {
            w_x,
            w_h,
            b_x,
            b_h,
            w_1,
            b_1,
            w_2,
            b_2,
            w_o,
            b_o,
            total: b_o + 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DetectorModel<F> {
    config: ModelConfig,
    params: Vec<F>,
}

/// Hidden state carried between steps.
#[derive(Clone, Debug, PartialEq)]
pub struct RecurrentState<F> {
    h: Vec<F>,
    /// Memory cell; empty for GRU.
    c: Vec<F>,
}

/// Everything the backward pass needs from one forward step.
#[derive(Clone, Debug, Default)]
struct StepCache<F> {
    h_prev: Vec<F>,
    c_prev: Vec<F>,
    /// Post-activation gates (LSTM: i, f, g, o; GRU: r, z, n).
    gates: Vec<F>,
    /// GRU: `W_hn h + b_hn`; LSTM: `tanh(c)`.
    aux: Vec<F>,
    h: Vec<F>,
    u1: Vec<F>,
    a1: Vec<F>,
    u2: Vec<F>,
    a2: Vec<F>,
    p: F,
}

fn sigmoid<F: Scalar>(z: F) -> F {
    if z >= F::zero() {
        F::one() / (F::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (F::one() + e)
    }
}

/// `out[r] = b[r] + Σ_j w[r, j] x[j]`.
fn affine<F: Scalar>(w: &[F], b: &[F], x: &[F], out: &mut [F]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = b[r];
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        *o = acc;
    }
}

/// `out[r] += Σ_j w[r, j] x[j]`.
fn add_matvec<F: Scalar>(w: &[F], x: &[F], out: &mut [F]) {
    let cols = x.len();
    for (r, o) in out.iter_mut().enumerate() {
        let row = &w[r * cols..(r + 1) * cols];
        let mut acc = F::zero();
        for (wv, xv) in row.iter().zip(x) {
            acc += *wv * *xv;
        }
        *o += acc;
    }
}

/// `out[j] += Σ_r w[r, j] dy[r]`.
fn add_matvec_t<F: Scalar>(w: &[F], dy: &[F], out: &mut [F]) {
    let cols = out.len();
    for (r, &d) in dy.iter().enumerate() {
        if d == F::zero() {
            continue;
        }
        let row = &w[r * cols..(r + 1) * cols];
        for (o, wv) in out.iter_mut().zip(row) {
            *o += *wv * d;
        }
    }
}

/// `gw[r, j] += dy[r] x[j]` and `gb[r] += dy[r]`.
fn add_outer<F: Scalar>(gw: &mut [F], gb: &mut [F], dy: &[F], x: &[F]) {
    let cols = x.len();
    for (r, &d) in dy.iter().enumerate() {
        gb[r] += d;
        if d == F::zero() {
            continue;
        }
        for (g, xv) in gw[r * cols..(r + 1) * cols].iter_mut().zip(x) {
            *g += d * *xv;
        }
    }
}

impl<F: Scalar> DetectorModel<F> {
    /// Model with every parameter zero; emits 0.5 everywhere.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            params: vec![F::zero(); config.param_count()],
            config,
        })
    }

    /// Weights uniform in `[-1/√H, 1/√H]`, zero biases, LSTM forget bias 1.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let lay = Layout::new(&config);
        let bound = 1.0 / (config.hidden_dim as f64).sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weight_blocks = [
            (lay.w_x, lay.b_x),
            (lay.w_1, lay.b_1),
            (lay.w_2, lay.b_2),
            (lay.w_o, lay.b_o),
        ];
        for (start, end) in weight_blocks {
            for v in &mut model.params[start..end] {
                *v = F::from_f64_lossy(rng.random_range(-bound..=bound));
            }
        }
        if config.cell_kind == CellKind::Lstm {
            let h = config.hidden_dim;
            for v in &mut model.params[lay.b_x + h..lay.b_x + 2 * h] {
                *v = F::one();
            }
        }
        Ok(model)
    }

    pub fn from_params(config: ModelConfig, params: Vec<F>) -> Result<Self> {
        config.validate()?;
        if params.len() != config.param_count() {
            return Err(CpdError::ConfigMismatch(format!(
                "config needs {} parameters, got {}",
                config.param_count(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(invalid("model parameters must be finite"));
        }
        Ok(Self { config, params })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub(crate) fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn initial_state(&self) -> RecurrentState<F> {
        let h = self.config.hidden_dim;
        RecurrentState {
            h: vec![F::zero(); h],
            c: match self.config.cell_kind {
                CellKind::Lstm => vec![F::zero(); h],
                CellKind::Gru => Vec::new(),
            },
        }
    }

    fn check_dim(&self, dim: usize) -> Result<()> {
        if dim != self.config.input_dim {
            return Err(CpdError::DimensionMismatch {
                expected: self.config.input_dim,
                actual: dim,
            });
        }
        Ok(())
    }

    /// Advances the recurrence by one observation and returns `p_t`.
    pub fn step(&self, state: &mut RecurrentState<F>, x: &[F]) -> Result<F> {
        self.check_dim(x.len())?;
        Ok(self.step_inner(state, x, None))
    }

    fn step_inner(
        &self,
        state: &mut RecurrentState<F>,
        x: &[F],
        cache: Option<&mut StepCache<F>>,
    ) -> F {
        let cfg = &self.config;
        let lay = Layout::new(cfg);
        let w = &self.params;
        let h = cfg.hidden_dim;
        let d = cfg.input_dim;
        let g = cfg.cell_kind.gates() * h;
        let [f1, f2] = cfg.fc_dims;

        let h_prev = state.h.clone();
        let c_prev = state.c.clone();
        let mut gates = vec![F::zero(); g];
        let mut aux = vec![F::zero(); h];
        match cfg.cell_kind {
            CellKind::Lstm => {
                affine(
                    &w[lay.w_x..lay.w_h],
                    &w[lay.b_x..lay.b_x + g],
                    x,
                    &mut gates,
                );
                add_matvec(&w[lay.w_h..lay.b_x], &h_prev, &mut gates);
                for j in 0..h {
                    gates[j] = sigmoid(gates[j]);
                    gates[h + j] = sigmoid(gates[h + j]);
                    gates[2 * h + j] = gates[2 * h + j].tanh();
                    gates[3 * h + j] = sigmoid(gates[3 * h + j]);
                    let c = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
                    state.c[j] = c;
                    aux[j] = c.tanh();
                    state.h[j] = gates[3 * h + j] * aux[j];
                }
            }
            CellKind::Gru => {
                let mut hx = vec![F::zero(); g];
                affine(&w[lay.w_x..lay.w_h], &w[lay.b_x..lay.b_h], x, &mut gates);
                affine(
                    &w[lay.w_h..lay.b_x],
                    &w[lay.b_h..lay.b_h + g],
                    &h_prev,
                    &mut hx,
                );
                for j in 0..h {
                    let r = sigmoid(gates[j] + hx[j]);
                    let z = sigmoid(gates[h + j] + hx[h + j]);
                    aux[j] = hx[2 * h + j];
                    let n = (gates[2 * h + j] + r * aux[j]).tanh();
                    gates[j] = r;
                    gates[h + j] = z;
                    gates[2 * h + j] = n;
                    state.h[j] = (F::one() - z) * n + z * h_prev[j];
                }
            }
        }

        let mut u1 = vec![F::zero(); f1];
        affine(
            &w[lay.w_1..lay.b_1],
            &w[lay.b_1..lay.w_2],
            &state.h,
            &mut u1,
        );
        let a1: Vec<F> = u1.iter().map(|&v| v.max(F::zero())).collect();
        let mut u2 = vec![F::zero(); f2];
        affine(&w[lay.w_2..lay.b_2], &w[lay.b_2..lay.w_o], &a1, &mut u2);
        let a2: Vec<F> = u2.iter().map(|&v| v.max(F::zero())).collect();
        let mut logit = w[lay.b_o];
        for (wv, av) in w[lay.w_o..lay.b_o].iter().zip(&a2) {
            logit += *wv * *av;
        }
        let p = sigmoid(logit)
            .max(F::epsilon())
            .min(F::one() - F::epsilon());
        debug_assert_eq!(x.len(), d);

        if let Some(cache) = cache {
            *cache = StepCache {
                h_prev,
                c_prev,
                gates,
                aux,
                h: state.h.clone(),
                u1,
                a1,
                u2,
                a2,
                p,
            };
        }
        p
    }

    /// Per-step change probabilities for `seq`; `p_t` sees only `x_0..=x_t`.
    pub fn forward(&self, seq: &Sequence<F>) -> Result<ProbabilitySeries<F>> {
        self.check_dim(seq.dim())?;
        let mut state = self.initial_state();
        let probs = seq
            .rows()
            .map(|x| self.step_inner(&mut state, x, None))
            .collect();
        ProbabilitySeries::new(probs)
    }

    fn forward_cached(&self, seq: &Sequence<F>) -> Result<Vec<StepCache<F>>> {
        self.check_dim(seq.dim())?;
        let mut state = self.initial_state();
        Ok(seq
            .rows()
            .map(|x| {
                let mut cache = StepCache::default();
                self.step_inner(&mut state, x, Some(&mut cache));
                cache
            })
            .collect())
    }

    /// Gradient of a loss with respect to the parameters, given its gradient
    /// with respect to each emitted probability.
    pub fn backward(&self, seq: &Sequence<F>, upstream: &[F]) -> Result<Vec<F>> {
        if upstream.len() != seq.len() {
            return Err(CpdError::DimensionMismatch {
                expected: seq.len(),
                actual: upstream.len(),
            });
        }
        let caches = self.forward_cached(seq)?;
        Ok(self.backward_cached(seq, &caches, upstream))
    }

    /// Runs the forward pass, lets `loss` turn probabilities into an upstream
    /// gradient, and back-propagates it.
    pub fn value_and_grad<T>(
        &self,
        seq: &Sequence<F>,
        loss: impl FnOnce(&ProbabilitySeries<F>) -> Result<(T, Vec<F>)>,
    ) -> Result<(T, Vec<F>)> {
        let caches = self.forward_cached(seq)?;
        let probs = ProbabilitySeries::new(caches.iter().map(|c| c.p).collect())?;
        let (value, upstream) = loss(&probs)?;
        if upstream.len() != seq.len() {
            return Err(CpdError::DimensionMismatch {
                expected: seq.len(),
                actual: upstream.len(),
            });
        }
        Ok((value, self.backward_cached(seq, &caches, &upstream)))
    }

    fn backward_cached(
        &self,
        seq: &Sequence<F>,
        caches: &[StepCache<F>],
        upstream: &[F],
    ) -> Vec<F> {
        let cfg = &self.config;
        let lay = Layout::new(cfg);
        let w = &self.params;
        let h = cfg.hidden_dim;
        let g = cfg.cell_kind.gates() * h;
        let [f1, f2] = cfg.fc_dims;
        let mut grad = vec![F::zero(); lay.total];

        let mut dh_next = vec![F::zero(); h];
        let mut dc_next = vec![F::zero(); h];
        let one = F::one();

        for t in (0..caches.len()).rev() {
            let c = &caches[t];
            let x = seq.row(t);

            // output head
            let dz = upstream[t] * c.p * (one - c.p);
            let mut dh = dh_next.clone();
            if dz != F::zero() {
                grad[lay.b_o] += dz;
                let mut du2 = vec![F::zero(); f2];
                for k in 0..f2 {
                    grad[lay.w_o + k] += dz * c.a2[k];
                    if c.u2[k] > F::zero() {
                        du2[k] = dz * w[lay.w_o + k];
                    }
                }
                let (gw2, rest) = grad[lay.w_2..].split_at_mut(lay.b_2 - lay.w_2);
                add_outer(gw2, &mut rest[..f2], &du2, &c.a1);
                let mut da1 = vec![F::zero(); f1];
                add_matvec_t(&w[lay.w_2..lay.b_2], &du2, &mut da1);
                let du1: Vec<F> = da1
                    .iter()
                    .zip(&c.u1)
                    .map(|(&d, &u)| if u > F::zero() { d } else { F::zero() })
                    .collect();
                let (gw1, rest) = grad[lay.w_1..].split_at_mut(lay.b_1 - lay.w_1);
                add_outer(gw1, &mut rest[..f1], &du1, &c.h);
                add_matvec_t(&w[lay.w_1..lay.b_1], &du1, &mut dh);
            }

            // recurrent cell
            let mut da_x = vec![F::zero(); g];
            let mut da_h = vec![F::zero(); g];
            let mut dh_prev = vec![F::zero(); h];
            match cfg.cell_kind {
                CellKind::Lstm => {
                    for j in 0..h {
                        let (i, f, cand, o) = (
                            c.gates[j],
                            c.gates[h + j],
                            c.gates[2 * h + j],
                            c.gates[3 * h + j],
                        );
                        let tc = c.aux[j];
                        let d_o = dh[j] * tc;
                        let dc = dh[j] * o * (one - tc * tc) + dc_next[j];
                        da_x[j] = dc * cand * i * (one - i);
                        da_x[h + j] = dc * c.c_prev[j] * f * (one - f);
                        da_x[2 * h + j] = dc * i * (one - cand * cand);
                        da_x[3 * h + j] = d_o * o * (one - o);
                        dc_next[j] = dc * f;
                    }
                    da_h.copy_from_slice(&da_x);
                    let (gwx, rest) = grad[lay.w_x..].split_at_mut(lay.w_h - lay.w_x);
                    let (gwh, gb) = rest.split_at_mut(lay.b_x - lay.w_h);
                    add_outer(gwx, &mut gb[..g], &da_x, x);
                    let mut scratch = vec![F::zero(); g];
                    add_outer(gwh, &mut scratch, &da_h, &c.h_prev);
                }
                CellKind::Gru => {
                    for j in 0..h {
                        let (r, z, n) = (c.gates[j], c.gates[h + j], c.gates[2 * h + j]);
                        let dn = dh[j] * (one - z);
                        let dzg = dh[j] * (c.h_prev[j] - n);
                        dh_prev[j] = dh[j] * z;
                        let dan = dn * (one - n * n);
                        let dar = dan * c.aux[j] * r * (one - r);
                        let daz = dzg * z * (one - z);
                        da_x[j] = dar;
                        da_x[h + j] = daz;
                        da_x[2 * h + j] = dan;
                        da_h[j] = dar;
                        da_h[h + j] = daz;
                        da_h[2 * h + j] = dan * r;
                    }
                    let (gwx, rest) = grad[lay.w_x..].split_at_mut(lay.w_h - lay.w_x);
                    let (gwh, gb) = rest.split_at_mut(lay.b_x - lay.w_h);
                    let (gbx, gbh) = gb.split_at_mut(g);
                    add_outer(gwx, gbx, &da_x, x);
                    add_outer(gwh, &mut gbh[..g], &da_h, &c.h_prev);
                }
            }
            add_matvec_t(&w[lay.w_h..lay.b_x], &da_h, &mut dh_prev);
            dh_next = dh_prev;
        }
        grad
    }
}
