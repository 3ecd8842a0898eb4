//! Forward and manual backward passes of the convolutional identifier.
//!
//! Activations are stored per sample as `[channel][width]`. The input's rows
//! act as the channels of block 1, which is how a `rows × k` kernel with
//! valid height padding reduces to a 1-D convolution.

use rand::Rng;

use super::arch::{CnnConfig, CONV_BLOCKS, FC_LAYERS};
use crate::error::{Error, Result};
use crate::scalar::{axpy, dot};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm.
    Train,
    /// Running statistics in batch norm.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock<T> {
    /// `[out][in][k]`
    pub weight: Vec<T>,
    pub gamma: Vec<T>,
    pub beta: Vec<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `[out][in]`
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cnn<T> {
    pub config: CnnConfig,
    pub blocks: Vec<ConvBlock<T>>,
    pub dense: Vec<Dense<T>>,
}

/// Gradients in the same layout as the trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub blocks: Vec<(Vec<T>, Vec<T>, Vec<T>)>,
    pub dense: Vec<Dense<T>>,
}

struct BlockCache<T> {
    xhat: Vec<Vec<T>>,
    act: Vec<Vec<T>>,
    argmax: Vec<Vec<u32>>,
    out: Vec<Vec<T>>,
    mean: Vec<T>,
    var: Vec<T>,
    invstd: Vec<T>,
}

/// Intermediate values kept for the backward pass.
pub struct ForwardCache<T> {
    inputs: Vec<Vec<T>>,
    blocks: Vec<BlockCache<T>>,
    /// Input of each dense layer, per sample.
    dense_in: Vec<Vec<Vec<T>>>,
    pub logits: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn batch_len(&self) -> usize {
        self.inputs.len()
    }
}

fn uniform<T: Scalar, R: Rng>(rng: &mut R, n: usize, bound: f64) -> Vec<T> {
    (0..n)
        .map(|_| T::of(rng.random_range(-bound..=bound)))
        .collect()
}

/// Same-padded 1-D convolution, `y = w ⊛ x`.
fn conv_forward<T: Scalar>(
    x: &[T],
    w: &[T],
    cin: usize,
    cout: usize,
    k: usize,
    width: usize,
    y: &mut [T],
) {
    let p = (k / 2) as isize;
    y.iter_mut().for_each(|v| *v = T::zero());
    for o in 0..cout {
        let yo = &mut y[o * width..(o + 1) * width];
        for i in 0..cin {
            let xi = &x[i * width..(i + 1) * width];
            for t in 0..k {
                let wv = w[(o * cin + i) * k + t];
                let s = t as isize - p;
                if s.unsigned_abs() >= width {
                    continue;
                }
                if s >= 0 {
                    let s = s as usize;
                    axpy(wv, &xi[s..], &mut yo[..width - s]);
                } else {
                    let s = (-s) as usize;
                    axpy(wv, &xi[..width - s], &mut yo[s..]);
                }
            }
        }
    }
}

/// Accumulate `dw` and (optionally) `dx` from `dy`.
#[allow(clippy::too_many_arguments)]
fn conv_backward<T: Scalar>(
    x: &[T],
    w: &[T],
    dy: &[T],
    cin: usize,
    cout: usize,
    k: usize,
    width: usize,
    dw: &mut [T],
    mut dx: Option<&mut [T]>,
) {
    let p = (k / 2) as isize;
    for o in 0..cout {
        let dyo = &dy[o * width..(o + 1) * width];
        for i in 0..cin {
            let xi = &x[i * width..(i + 1) * width];
            for t in 0..k {
                let idx = (o * cin + i) * k + t;
                let s = t as isize - p;
                if s.unsigned_abs() >= width {
                    continue;
                }
                let (xs, dys, xr) = if s >= 0 {
                    let s = s as usize;
                    (&xi[s..], &dyo[..width - s], s..width)
                } else {
                    let s = (-s) as usize;
                    (&xi[..width - s], &dyo[s..], 0..width - s)
                };
                dw[idx] += dot(dys, xs);
                if let Some(dx) = dx.as_deref_mut() {
                    axpy(w[idx], dys, &mut dx[i * width..(i + 1) * width][xr]);
                }
            }
        }
    }
}

fn leaky<T: Scalar>(v: T, slope: T) -> T {
    if v > T::zero() {
        v
    } else {
        v * slope
    }
}

fn check_finite<T: Scalar>(v: &[T], layer: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            layer: layer.into(),
        })
    }
}

/// Numerically stable softmax, evaluated in f64.
pub fn softmax<T: Scalar>(logits: &[T]) -> Vec<f64> {
    let m = logits.iter().fold(f64::NEG_INFINITY, |m, v| m.max(v.f64()));
    let e: Vec<f64> = logits.iter().map(|v| (v.f64() - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Index of the largest probability; ties go to the lowest index.
pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> Cnn<T> {
    /// Kaiming-uniform (a = √5) weights, i.e. bound `1/√fan_in`, with the
    /// same bound for dense biases; batch-norm scale 1, shift 0.
    pub fn new(config: CnnConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = crate::rng::rng(seed);
        let blocks = (0..CONV_BLOCKS)
            .map(|b| {
                let (cin, k, _) = config.block_geometry(b);
                let cout = config.channels[b];
                let bound = 1.0 / ((cin * k) as f64).sqrt();
                ConvBlock {
                    weight: uniform(&mut rng, cout * cin * k, bound),
                    gamma: vec![T::one(); cout],
                    beta: vec![T::zero(); cout],
                    running_mean: vec![T::zero(); cout],
                    running_var: vec![T::one(); cout],
                }
            })
            .collect();
        let dense = config
            .dense_shapes()
            .iter()
            .map(|&(i, o)| {
                let bound = 1.0 / (i as f64).sqrt();
                Dense {
                    weight: uniform(&mut rng, o * i, bound),
                    bias: uniform(&mut rng, o, bound),
                }
            })
            .collect();
        Ok(Cnn {
            config,
            blocks,
            dense,
        })
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        Gradients {
            blocks: self
                .blocks
                .iter()
                .map(|b| {
                    (
                        vec![T::zero(); b.weight.len()],
                        vec![T::zero(); b.gamma.len()],
                        vec![T::zero(); b.beta.len()],
                    )
                })
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    weight: vec![T::zero(); d.weight.len()],
                    bias: vec![T::zero(); d.bias.len()],
                })
                .collect(),
        }
    }

    /// Trainable tensors in canonical order (conv weight, gamma, beta per
    /// block; then weight, bias per dense layer).
    pub fn params_mut(&mut self) -> Vec<&mut Vec<T>> {
        let mut v: Vec<&mut Vec<T>> = Vec::new();
        for b in &mut self.blocks {
            v.push(&mut b.weight);
            v.push(&mut b.gamma);
            v.push(&mut b.beta);
        }
        for d in &mut self.dense {
            v.push(&mut d.weight);
            v.push(&mut d.bias);
        }
        v
    }

    pub fn params(&self) -> Vec<&Vec<T>> {
        let mut v: Vec<&Vec<T>> = Vec::new();
        for b in &self.blocks {
            v.extend([&b.weight, &b.gamma, &b.beta]);
        }
        for d in &self.dense {
            v.extend([&d.weight, &d.bias]);
        }
        v
    }

    /// Names matching [`Cnn::params`].
    pub fn param_names(&self) -> Vec<String> {
        let mut v = Vec::new();
        for b in 0..CONV_BLOCKS {
            v.extend([
                format!("block{}.conv.weight", b + 1),
                format!("block{}.bn.gamma", b + 1),
                format!("block{}.bn.beta", b + 1),
            ]);
        }
        for j in 0..FC_LAYERS {
            v.extend([format!("fc{}.weight", j + 1), format!("fc{}.bias", j + 1)]);
        }
        v
    }

    pub fn is_finite(&self) -> bool {
        self.params()
            .iter()
            .all(|p| p.iter().all(|v| v.is_finite()))
            && self.blocks.iter().all(|b| {
                b.running_mean.iter().all(|v| v.is_finite())
                    && b.running_var
                        .iter()
                        .all(|v| v.is_finite() && *v > T::zero())
            })
    }

    fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.config.input_len() {
            return Err(Error::validation(format!(
                "input has {} values, architecture expects {}×{} = {}",
                x.len(),
                self.config.input_rows,
                self.config.input_width,
                self.config.input_len()
            )));
        }
        check_finite(x, "input")
    }

    /// Forward pass over a batch, returning logits and the backward cache.
    pub fn forward(&self, batch: &[&[T]], mode: Mode) -> Result<ForwardCache<T>> {
        if batch.is_empty() {
            return Err(Error::validation("empty batch"));
        }
        for x in batch {
            self.check_input(x)?;
        }
        let cfg = &self.config;
        let slope = T::of(cfg.leaky_slope);
        let scale = T::of(cfg.input_scale);
        let eps = T::of(cfg.bn_eps);
        let inputs: Vec<Vec<T>> = batch
            .iter()
            .map(|x| x.iter().map(|v| *v * scale).collect())
            .collect();
        let mut blocks = Vec::with_capacity(CONV_BLOCKS);
        for (b, blk) in self.blocks.iter().enumerate() {
            let (cin, k, w) = cfg.block_geometry(b);
            let cout = cfg.channels[b];
            let prev: &Vec<Vec<T>> = if b == 0 {
                &inputs
            } else {
                &blocks.last().map(|c: &BlockCache<T>| &c.out).unwrap()
            };
            let z: Vec<Vec<T>> = prev
                .iter()
                .map(|x| {
                    let mut y = vec![T::zero(); cout * w];
                    conv_forward(x, &blk.weight, cin, cout, k, w, &mut y);
                    y
                })
                .collect();
            let n = T::of_usize(z.len() * w);
            let (mean, var) = match mode {
                Mode::Train => {
                    let mut mean = vec![T::zero(); cout];
                    let mut var = vec![T::zero(); cout];
                    for c in 0..cout {
                        let s: T = z
                            .iter()
                            .map(|zs| zs[c * w..(c + 1) * w].iter().copied().sum::<T>())
                            .sum();
                        let m = s / n;
                        let ss: T = z
                            .iter()
                            .map(|zs| {
                                zs[c * w..(c + 1) * w]
                                    .iter()
                                    .map(|v| (*v - m) * (*v - m))
                                    .sum::<T>()
                            })
                            .sum();
                        mean[c] = m;
                        var[c] = ss / n;
                    }
                    (mean, var)
                }
                Mode::Eval => (blk.running_mean.clone(), blk.running_var.clone()),
            };
            let invstd: Vec<T> = var.iter().map(|v| T::one() / (*v + eps).sqrt()).collect();
            let half = w / 2;
            let mut cache = BlockCache {
                xhat: Vec::with_capacity(z.len()),
                act: Vec::with_capacity(z.len()),
                argmax: Vec::with_capacity(z.len()),
                out: Vec::with_capacity(z.len()),
                mean,
                var,
                invstd,
            };
            for zs in z {
                let mut xhat = zs;
                let mut act = vec![T::zero(); cout * w];
                for c in 0..cout {
                    let (m, is, g, be) =
                        (cache.mean[c], cache.invstd[c], blk.gamma[c], blk.beta[c]);
                    for j in c * w..(c + 1) * w {
                        let h = (xhat[j] - m) * is;
                        xhat[j] = h;
                        act[j] = leaky(g * h + be, slope);
                    }
                }
                let mut out = vec![T::zero(); cout * half];
                let mut am = vec![0u32; cout * half];
                for c in 0..cout {
                    for j in 0..half {
                        let a = c * w + 2 * j;
                        let pick = if act[a + 1] > act[a] { a + 1 } else { a };
                        out[c * half + j] = act[pick];
                        am[c * half + j] = pick as u32;
                    }
                }
                check_finite(&out, &format!("block{}", b + 1))?;
                cache.xhat.push(xhat);
                cache.act.push(act);
                cache.argmax.push(am);
                cache.out.push(out);
            }
            blocks.push(cache);
        }
        let mut dense_in: Vec<Vec<Vec<T>>> = Vec::with_capacity(FC_LAYERS);
        let mut cur: Vec<Vec<T>> = blocks.last().unwrap().out.clone();
        for (j, d) in self.dense.iter().enumerate() {
            let (ni, no) = cfg.dense_shapes()[j];
            let next: Vec<Vec<T>> = cur
                .iter()
                .map(|x| {
                    (0..no)
                        .map(|o| {
                            let v = dot(&d.weight[o * ni..(o + 1) * ni], x) + d.bias[o];
                            if j + 1 < FC_LAYERS {
                                leaky(v, slope)
                            } else {
                                v
                            }
                        })
                        .collect()
                })
                .collect();
            for v in &next {
                check_finite(v, &format!("fc{}", j + 1))?;
            }
            dense_in.push(cur);
            cur = next;
        }
        Ok(ForwardCache {
            inputs,
            blocks,
            dense_in,
            logits: cur,
        })
    }

    /// Class probabilities (f64, summing to one) for each input.
    pub fn probabilities(&self, batch: &[&[T]], mode: Mode) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .forward(batch, mode)?
            .logits
            .iter()
            .map(|l| softmax(l))
            .collect())
    }

    /// `(class, probability)` in eval mode; ties go to the lowest class index.
    pub fn predict(&self, x: &[T]) -> Result<(usize, f64)> {
        let p = self.probabilities(&[x], Mode::Eval)?.remove(0);
        let k = argmax(&p);
        Ok((k, p[k]))
    }

    /// Mean cross-entropy of a cached forward pass and its gradient w.r.t. logits.
    pub fn loss_and_dlogits(
        cache: &ForwardCache<T>,
        labels: &[usize],
    ) -> Result<(f64, Vec<Vec<T>>)> {
        if labels.len() != cache.logits.len() {
            return Err(Error::validation("label count differs from batch size"));
        }
        let b = labels.len() as f64;
        let mut loss = 0.0;
        let mut d = Vec::with_capacity(labels.len());
        for (l, &y) in cache.logits.iter().zip(labels) {
            if y >= l.len() {
                return Err(Error::validation(format!(
                    "label {y} outside [0, {})",
                    l.len()
                )));
            }
            let p = softmax(l);
            loss -= p[y].max(f64::MIN_POSITIVE).ln();
            d.push(
                p.iter()
                    .enumerate()
                    .map(|(i, pi)| T::of((pi - if i == y { 1.0 } else { 0.0 }) / b))
                    .collect(),
            );
        }
        Ok((loss / b, d))
    }

    /// Back-propagate `dlogits` through a train-mode cache.
    pub fn backward(&self, cache: &ForwardCache<T>, dlogits: &[Vec<T>]) -> Result<Gradients<T>> {
        let cfg = &self.config;
        let slope = T::of(cfg.leaky_slope);
        let bsz = cache.batch_len();
        let mut g = self.zero_gradients();
        let mut delta: Vec<Vec<T>> = dlogits.to_vec();
        for j in (0..FC_LAYERS).rev() {
            let (ni, no) = cfg.dense_shapes()[j];
            let d = &self.dense[j];
            let gd = &mut g.dense[j];
            let mut prev = Vec::with_capacity(bsz);
            for (s, dy) in delta.iter().enumerate() {
                let x = &cache.dense_in[j][s];
                let mut dx = vec![T::zero(); ni];
                for o in 0..no {
                    gd.bias[o] += dy[o];
                    axpy(dy[o], x, &mut gd.weight[o * ni..(o + 1) * ni]);
                    axpy(dy[o], &d.weight[o * ni..(o + 1) * ni], &mut dx);
                }
                if j > 0 {
                    // x is the leaky output of the previous layer; its sign is the pre-activation's.
                    for (v, xv) in dx.iter_mut().zip(x) {
                        if *xv <= T::zero() {
                            *v *= slope;
                        }
                    }
                }
                prev.push(dx);
            }
            delta = prev;
        }
        for b in (0..CONV_BLOCKS).rev() {
            let (cin, k, w) = cfg.block_geometry(b);
            let cout = cfg.channels[b];
            let bc = &cache.blocks[b];
            let blk = &self.blocks[b];
            let half = w / 2;
            // Unpool and leaky ReLU: dy w.r.t. the batch-norm output.
            let dy: Vec<Vec<T>> = delta
                .iter()
                .enumerate()
                .map(|(s, dout)| {
                    let mut dy = vec![T::zero(); cout * w];
                    for (q, &a) in bc.argmax[s].iter().enumerate() {
                        dy[a as usize] = dout[q];
                    }
                    for (v, a) in dy.iter_mut().zip(&bc.act[s]) {
                        if *a <= T::zero() {
                            *v *= slope;
                        }
                    }
                    dy
                })
                .collect();
            debug_assert_eq!(delta.first().map(|d| d.len()), Some(cout * half));
            let (gw, gg, gb) = &mut g.blocks[b];
            let n = T::of_usize(bsz * w);
            let mut dz = dy;
            for c in 0..cout {
                let r = c * w..(c + 1) * w;
                let mut sum_dy = T::zero();
                let mut sum_dy_xhat = T::zero();
                for (d, xh) in dz.iter().zip(&bc.xhat) {
                    sum_dy += d[r.clone()].iter().copied().sum::<T>();
                    sum_dy_xhat += dot(&d[r.clone()], &xh[r.clone()]);
                }
                gb[c] += sum_dy;
                gg[c] += sum_dy_xhat;
                let gamma = blk.gamma[c];
                let k1 = gamma * bc.invstd[c] / n;
                for (d, xh) in dz.iter_mut().zip(&bc.xhat) {
                    for (dv, xv) in d[r.clone()].iter_mut().zip(&xh[r.clone()]) {
                        *dv = k1 * (n * *dv - sum_dy - *xv * sum_dy_xhat);
                    }
                }
            }
            let xs: &Vec<Vec<T>> = if b == 0 {
                &cache.inputs
            } else {
                &cache.blocks[b - 1].out
            };
            let mut next = Vec::with_capacity(bsz);
            for (s, dzs) in dz.iter().enumerate() {
                if b == 0 {
                    conv_backward(&xs[s], &blk.weight, dzs, cin, cout, k, w, gw, None);
                } else {
                    let mut dx = vec![T::zero(); cin * w];
                    conv_backward(&xs[s], &blk.weight, dzs, cin, cout, k, w, gw, Some(&mut dx));
                    next.push(dx);
                }
            }
            delta = next;
        }
        Ok(g)
    }

    /// Fold a train-mode batch's statistics into the running estimates
    /// (unbiased variance, exponential averaging).
    pub fn update_running_stats(&mut self, cache: &ForwardCache<T>) {
        let mom = T::of(self.config.bn_momentum);
        for (b, blk) in self.blocks.iter_mut().enumerate() {
            let (_, _, w) = self.config.block_geometry(b);
            let n = cache.batch_len() * w;
            let corr = if n > 1 {
                T::of_usize(n) / T::of_usize(n - 1)
            } else {
                T::one()
            };
            let bc = &cache.blocks[b];
            for c in 0..blk.gamma.len() {
                blk.running_mean[c] = (T::one() - mom) * blk.running_mean[c] + mom * bc.mean[c];
                blk.running_var[c] = (T::one() - mom) * blk.running_var[c] + mom * bc.var[c] * corr;
            }
        }
    }

    /// Batch-normalized pre-activations of block `b` from a cache, per sample.
    pub fn normalized_preactivations<'a>(cache: &'a ForwardCache<T>, b: usize) -> &'a [Vec<T>] {
        &cache.blocks[b].xhat
    }

    pub fn cast<U: Scalar>(&self) -> Cnn<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect::<Vec<U>>();
        Cnn {
            config: self.config.clone(),
            blocks: self
                .blocks
                .iter()
                .map(|b| ConvBlock {
                    weight: c(&b.weight),
                    gamma: c(&b.gamma),
                    beta: c(&b.beta),
                    running_mean: c(&b.running_mean),
                    running_var: c(&b.running_var),
                })
                .collect(),
            dense: self
                .dense
                .iter()
                .map(|d| Dense {
                    weight: c(&d.weight),
                    bias: c(&d.bias),
                })
                .collect(),
        }
    }
}

impl<T: Scalar> Gradients<T> {
    /// Tensors in the order of [`Cnn::params`].
    pub fn tensors(&self) -> Vec<&Vec<T>> {
        let mut v: Vec<&Vec<T>> = Vec::new();
        for (w, g, b) in &self.blocks {
            v.extend([w, g, b]);
        }
        for d in &self.dense {
            v.extend([&d.weight, &d.bias]);
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(cfg: &CnnConfig, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut r = crate::rng::rng(seed);
        (0..n)
            .map(|_| {
                (0..cfg.input_len())
                    .map(|_| r.random_range(-1.0..1.0))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn conv_matches_direct_sum() {
        let (cin, cout, k, w) = (2, 3, 5, 11);
        let mut r = crate::rng::rng(1);
        let x: Vec<f64> = (0..cin * w).map(|_| r.random_range(-1.0..1.0)).collect();
        let wt: Vec<f64> = (0..cout * cin * k)
            .map(|_| r.random_range(-1.0..1.0))
            .collect();
        let mut y = vec![0.0; cout * w];
        conv_forward(&x, &wt, cin, cout, k, w, &mut y);
        for o in 0..cout {
            for p in 0..w {
                let mut s = 0.0;
                for i in 0..cin {
                    for t in 0..k {
                        let q = p as isize + t as isize - 2;
                        if (0..w as isize).contains(&q) {
                            s += wt[(o * cin + i) * k + t] * x[i * w + q as usize];
                        }
                    }
                }
                assert!((y[o * w + p] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fresh_model_is_near_uniform_and_sums_to_one() {
        let cfg = CnnConfig::compact(15);
        let m = Cnn::<f64>::new(cfg.clone(), 3).unwrap();
        let xs = inputs(&cfg, 2, 4);
        for p in m.probabilities(&[&xs[0], &xs[1]], Mode::Eval).unwrap() {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let (lo, hi) = p
                .iter()
                .fold((1.0f64, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
            assert!(hi - lo <= 0.2);
        }
        let a = m.probabilities(&[&xs[0]], Mode::Eval).unwrap();
        let b = m.probabilities(&[&xs[0]], Mode::Eval).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_a_validation_error() {
        let m = Cnn::<f64>::new(CnnConfig::miniature(2), 0).unwrap();
        assert!(matches!(m.predict(&[0.0; 10]), Err(Error::Validation(_))));
    }

    #[test]
    fn non_finite_activation_names_layer() {
        let cfg = CnnConfig::miniature(2);
        let mut m = Cnn::<f64>::new(cfg.clone(), 0).unwrap();
        m.blocks[2].gamma[0] = f64::INFINITY;
        let x = &inputs(&cfg, 1, 1)[0];
        match m.predict(x) {
            Err(Error::NonFinite { layer }) => assert_eq!(layer, "block3"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn batch_norm_normalizes_each_channel() {
        let cfg = CnnConfig::miniature(3);
        let m = Cnn::<f64>::new(cfg.clone(), 2).unwrap();
        let xs = inputs(&cfg, 4, 7);
        let refs: Vec<&[f64]> = xs.iter().map(|v| v.as_slice()).collect();
        let cache = m.forward(&refs, Mode::Train).unwrap();
        for b in 0..CONV_BLOCKS {
            let (_, _, w) = cfg.block_geometry(b);
            let xh = Cnn::normalized_preactivations(&cache, b);
            for c in 0..cfg.channels[b] {
                let vals: Vec<f64> = xh
                    .iter()
                    .flat_map(|s| s[c * w..(c + 1) * w].to_vec())
                    .collect();
                let n = vals.len() as f64;
                let mean = vals.iter().sum::<f64>() / n;
                let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                assert!(mean.abs() <= 1e-6, "block {b} ch {c} mean {mean}");
                assert!((var - 1.0).abs() <= 1e-3, "block {b} ch {c} var {var}");
            }
        }
    }

    #[test]
    fn logit_shift_leaves_probabilities() {
        let l = [0.3f64, -1.2, 2.0, 0.0];
        let s: Vec<f64> = l.iter().map(|v| v + 123.0).collect();
        for (a, b) in softmax(&l).iter().zip(softmax(&s)) {
            assert!((a - b).abs() < 1e-9);
        }
        assert_eq!(argmax(&[0.1, 0.7, 0.2]), 1);
        assert_eq!(argmax(&[0.4, 0.4, 0.2]), 0);
    }
}
