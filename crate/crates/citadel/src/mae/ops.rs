//! Layer primitives for the masked autoencoder: 3x3 convolutions, their
//! transposed counterparts, dense layers, the GELU nonlinearity, and Adam.
//! Everything is f64 and written for gradient-checkability rather than speed.

pub(crate) fn gelu(x: f64) -> f64 {
    // tanh approximation; smooth everywhere so finite differences behave.
    let u = (2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x * x * x);
    0.5 * x * (1.0 + u.tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    let u = c * (x + 0.044715 * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * c * (1.0 + 3.0 * 0.044715 * x * x)
}

pub(crate) fn apply_gelu(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| gelu(x)).collect()
}

pub(crate) fn gelu_backward(pre_activation: &[f64], grad_out: &[f64]) -> Vec<f64> {
    pre_activation
        .iter()
        .zip(grad_out)
        .map(|(&x, &g)| g * gelu_grad(x))
        .collect()
}

/// Strided 3x3 convolution. Weights are [out_ch][in_ch][3][3] row-major.
#[derive(Debug, Clone)]
pub(crate) struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub pad: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

pub(crate) const KERNEL: usize = 3;

impl Conv2d {
    pub fn out_size(&self, in_size: usize) -> usize {
        (in_size + 2 * self.pad - KERNEL) / self.stride + 1
    }

    fn w(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        self.weight[((oc * self.in_ch + ic) * KERNEL + ky) * KERNEL + kx]
    }

    pub fn forward(&self, input: &[f64], in_size: usize) -> Vec<f64> {
        let out_size = self.out_size(in_size);
        let mut out = vec![0.0; self.out_ch * out_size * out_size];
        for oc in 0..self.out_ch {
            for oy in 0..out_size {
                for ox in 0..out_size {
                    let mut acc = self.bias[oc];
                    for ic in 0..self.in_ch {
                        for ky in 0..KERNEL {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= in_size as isize {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix >= in_size as isize {
                                    continue;
                                }
                                acc += self.w(oc, ic, ky, kx)
                                    * input[(ic * in_size + iy as usize) * in_size + ix as usize];
                            }
                        }
                    }
                    out[(oc * out_size + oy) * out_size + ox] = acc;
                }
            }
        }
        out
    }

    /// Returns (grad_input, grad_weight, grad_bias).
    pub fn backward(
        &self,
        input: &[f64],
        in_size: usize,
        grad_out: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let out_size = self.out_size(in_size);
        let mut grad_in = vec![0.0; self.in_ch * in_size * in_size];
        let mut grad_w = vec![0.0; self.weight.len()];
        let mut grad_b = vec![0.0; self.bias.len()];
        for oc in 0..self.out_ch {
            for oy in 0..out_size {
                for ox in 0..out_size {
                    let g = grad_out[(oc * out_size + oy) * out_size + ox];
                    grad_b[oc] += g;
                    for ic in 0..self.in_ch {
                        for ky in 0..KERNEL {
                            let iy = (oy * self.stride + ky) as isize - self.pad as isize;
                            if iy < 0 || iy >= in_size as isize {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let ix = (ox * self.stride + kx) as isize - self.pad as isize;
                                if ix < 0 || ix >= in_size as isize {
                                    continue;
                                }
                                let in_idx = (ic * in_size + iy as usize) * in_size + ix as usize;
                                let w_idx = ((oc * self.in_ch + ic) * KERNEL + ky) * KERNEL + kx;
                                grad_w[w_idx] += g * input[in_idx];
                                grad_in[in_idx] += g * self.weight[w_idx];
                            }
                        }
                    }
                }
            }
        }
        (grad_in, grad_w, grad_b)
    }
}

/// Transposed 3x3 convolution. Weights are [in_ch][out_ch][3][3] row-major;
/// `out_pad` grows the output to hit the mirror of the encoder's size.
#[derive(Debug, Clone)]
pub(crate) struct ConvTranspose2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    pub pad: usize,
    pub out_pad: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl ConvTranspose2d {
    pub fn out_size(&self, in_size: usize) -> usize {
        (in_size - 1) * self.stride + KERNEL + self.out_pad - 2 * self.pad
    }

    pub fn forward(&self, input: &[f64], in_size: usize) -> Vec<f64> {
        let out_size = self.out_size(in_size);
        let mut out = vec![0.0; self.out_ch * out_size * out_size];
        for (oc, &b) in self.bias.iter().enumerate() {
            for v in out[oc * out_size * out_size..(oc + 1) * out_size * out_size].iter_mut() {
                *v = b;
            }
        }
        for ic in 0..self.in_ch {
            for iy in 0..in_size {
                for ix in 0..in_size {
                    let x = input[(ic * in_size + iy) * in_size + ix];
                    for oc in 0..self.out_ch {
                        for ky in 0..KERNEL {
                            let oy = (iy * self.stride + ky) as isize - self.pad as isize;
                            if oy < 0 || oy >= out_size as isize {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let ox = (ix * self.stride + kx) as isize - self.pad as isize;
                                if ox < 0 || ox >= out_size as isize {
                                    continue;
                                }
                                let w_idx = ((ic * self.out_ch + oc) * KERNEL + ky) * KERNEL + kx;
                                out[(oc * out_size + oy as usize) * out_size + ox as usize] +=
                                    self.weight[w_idx] * x;
                            }
                        }
                    }
                }
            }
        }
        out
    }

    pub fn backward(
        &self,
        input: &[f64],
        in_size: usize,
        grad_out: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let out_size = self.out_size(in_size);
        let mut grad_in = vec![0.0; self.in_ch * in_size * in_size];
        let mut grad_w = vec![0.0; self.weight.len()];
        let mut grad_b = vec![0.0; self.bias.len()];
        for oc in 0..self.out_ch {
            for v in grad_out[oc * out_size * out_size..(oc + 1) * out_size * out_size].iter() {
                grad_b[oc] += v;
            }
        }
        for ic in 0..self.in_ch {
            for iy in 0..in_size {
                for ix in 0..in_size {
                    let in_idx = (ic * in_size + iy) * in_size + ix;
                    let x = input[in_idx];
                    for oc in 0..self.out_ch {
                        for ky in 0..KERNEL {
                            let oy = (iy * self.stride + ky) as isize - self.pad as isize;
                            if oy < 0 || oy >= out_size as isize {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let ox = (ix * self.stride + kx) as isize - self.pad as isize;
                                if ox < 0 || ox >= out_size as isize {
                                    continue;
                                }
                                let w_idx = ((ic * self.out_ch + oc) * KERNEL + ky) * KERNEL + kx;
                                let g = grad_out
                                    [(oc * out_size + oy as usize) * out_size + ox as usize];
                                grad_w[w_idx] += g * x;
                                grad_in[in_idx] += g * self.weight[w_idx];
                            }
                        }
                    }
                }
            }
        }
        (grad_in, grad_w, grad_b)
    }
}

/// Fully connected layer; weights are [out][in] row-major.
#[derive(Debug, Clone)]
pub(crate) struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn forward(&self, input: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|o| {
                self.bias[o]
                    + self.weight[o * self.in_dim..(o + 1) * self.in_dim]
                        .iter()
                        .zip(input)
                        .map(|(w, x)| w * x)
                        .sum::<f64>()
            })
            .collect()
    }

    pub fn backward(&self, input: &[f64], grad_out: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut grad_in = vec![0.0; self.in_dim];
        let mut grad_w = vec![0.0; self.weight.len()];
        for (o, &g) in grad_out.iter().enumerate() {
            for i in 0..self.in_dim {
                grad_w[o * self.in_dim + i] = g * input[i];
                grad_in[i] += g * self.weight[o * self.in_dim + i];
            }
        }
        (grad_in, grad_w, grad_out.to_vec())
    }
}

/// Adam over a flat parameter vector.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u32,
}

impl Adam {
    pub fn new(param_count: usize, learning_rate: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            learning_rate,
            beta1,
            beta2,
            eps,
            m: vec![0.0; param_count],
            v: vec![0.0; param_count],
            t: 0,
        }
    }

    /// One update; `apply` receives (flat index, delta) for each parameter.
    pub fn step(&mut self, grads: &[f64], mut apply: impl FnMut(usize, f64)) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, &g) in grads.iter().enumerate() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            apply(i, -self.learning_rate * m_hat / (v_hat.sqrt() + self.eps));
        }
    }
}
