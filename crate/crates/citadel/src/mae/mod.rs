//! Masked autoencoder over grayscale grids.
//!
//! Encoder: two stride-2 3x3 convolutions (1 -> 8 -> 16 channels) with GELU,
//! then a dense bottleneck to the latent vector. Decoder mirrors it with a
//! dense expansion and two transposed convolutions (16 -> 8 -> 1). Training
//! zero-fills a random pixel subset per sample and scores the reconstruction
//! only on those masked pixels.

mod ops;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::imaging::ImageGrid;
use crate::seeding::sub_seed;
use ops::{apply_gelu, gelu_backward, Adam, Conv2d, ConvTranspose2d, Dense, KERNEL};

pub type LatentVector = Vec<f64>;

/// Boolean grid; true marks a pixel hidden from the encoder and scored in the
/// loss.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    dim: usize,
    flags: Vec<bool>,
}

impl Mask {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_masked(&self, row: usize, col: usize) -> bool {
        self.flags[row * self.dim + col]
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Training hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub mask_ratio: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            mask_ratio: 0.75,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.mask_ratio) {
            return Err(Error::invalid("mask_ratio must be in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct MaeModel {
    grid_dim: usize,
    latent_dim: usize,
    mid_size: usize,
    bottom_size: usize,
    enc_conv1: Conv2d,
    enc_conv2: Conv2d,
    enc_fc: Dense,
    dec_fc: Dense,
    dec_tconv1: ConvTranspose2d,
    dec_tconv2: ConvTranspose2d,
}

const CH1: usize = 8;
const CH2: usize = 16;

fn glorot_fill(weight: &mut [f64], fan_in: usize, fan_out: usize, rng: &mut ChaCha8Rng) {
    let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for w in weight.iter_mut() {
        *w = (rng.gen::<f64>() * 2.0 - 1.0) * bound;
    }
}

/// Initialize a model with uniform fan-scaled weights and zero biases;
/// bit-identical for equal seeds.
pub fn init_mae(grid_dim: usize, latent_dim: usize, seed: u64) -> Result<MaeModel> {
    if grid_dim < 4 {
        return Err(Error::invalid("grid_dim must be at least 4"));
    }
    if latent_dim == 0 {
        return Err(Error::invalid("latent_dim must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut enc_conv1 = Conv2d {
        in_ch: 1,
        out_ch: CH1,
        stride: 2,
        pad: 1,
        weight: vec![0.0; CH1 * KERNEL * KERNEL],
        bias: vec![0.0; CH1],
    };
    glorot_fill(&mut enc_conv1.weight, KERNEL * KERNEL, CH1 * KERNEL * KERNEL, &mut rng);

    let mut enc_conv2 = Conv2d {
        in_ch: CH1,
        out_ch: CH2,
        stride: 2,
        pad: 1,
        weight: vec![0.0; CH2 * CH1 * KERNEL * KERNEL],
        bias: vec![0.0; CH2],
    };
    glorot_fill(&mut enc_conv2.weight, CH1 * KERNEL * KERNEL, CH2 * KERNEL * KERNEL, &mut rng);

    let mid_size = enc_conv1.out_size(grid_dim);
    let bottom_size = enc_conv2.out_size(mid_size);
    let flat = CH2 * bottom_size * bottom_size;

    let mut enc_fc = Dense {
        in_dim: flat,
        out_dim: latent_dim,
        weight: vec![0.0; latent_dim * flat],
        bias: vec![0.0; latent_dim],
    };
    glorot_fill(&mut enc_fc.weight, flat, latent_dim, &mut rng);

    let mut dec_fc = Dense {
        in_dim: latent_dim,
        out_dim: flat,
        weight: vec![0.0; flat * latent_dim],
        bias: vec![0.0; flat],
    };
    glorot_fill(&mut dec_fc.weight, latent_dim, flat, &mut rng);

    let mut dec_tconv1 = ConvTranspose2d {
        in_ch: CH2,
        out_ch: CH1,
        stride: 2,
        pad: 1,
        out_pad: mid_size - ((bottom_size - 1) * 2 + 1),
        weight: vec![0.0; CH2 * CH1 * KERNEL * KERNEL],
        bias: vec![0.0; CH1],
    };
    glorot_fill(&mut dec_tconv1.weight, CH2 * KERNEL * KERNEL, CH1 * KERNEL * KERNEL, &mut rng);

    let mut dec_tconv2 = ConvTranspose2d {
        in_ch: CH1,
        out_ch: 1,
        stride: 2,
        pad: 1,
        out_pad: grid_dim - ((mid_size - 1) * 2 + 1),
        weight: vec![0.0; CH1 * KERNEL * KERNEL],
        bias: vec![0.0; 1],
    };
    glorot_fill(&mut dec_tconv2.weight, CH1 * KERNEL * KERNEL, KERNEL * KERNEL, &mut rng);

    Ok(MaeModel {
        grid_dim,
        latent_dim,
        mid_size,
        bottom_size,
        enc_conv1,
        enc_conv2,
        enc_fc,
        dec_fc,
        dec_tconv1,
        dec_tconv2,
    })
}

fn sample_mask(dim: usize, ratio: f64, rng: &mut ChaCha8Rng) -> Mask {
    let cells = dim * dim;
    let count = (ratio * cells as f64).floor() as usize;
    let mut indices: Vec<usize> = (0..cells).collect();
    for i in 0..count {
        let j = rng.gen_range(i..cells);
        indices.swap(i, j);
    }
    let mut flags = vec![false; cells];
    for &idx in &indices[..count] {
        flags[idx] = true;
    }
    Mask { dim, flags }
}

/// Zero out a random fraction of pixels; returns the masked copy and the
/// mask. The original image is untouched.
pub fn mask_sample(image: &ImageGrid, ratio: f64, rng: &mut ChaCha8Rng) -> Result<(ImageGrid, Mask)> {
    if !(0.0..1.0).contains(&ratio) {
        return Err(Error::invalid("mask ratio must be in [0, 1)"));
    }
    let mask = sample_mask(image.dim(), ratio, rng);
    let mut masked = image.clone();
    for row in 0..image.dim() {
        for col in 0..image.dim() {
            if mask.is_masked(row, col) {
                masked.set(row, col, 0);
            }
        }
    }
    Ok((masked, mask))
}

/// Mean squared error over the masked pixels only.
pub fn masked_mse(reconstruction: &[f64], original: &[f64], mask: &Mask) -> Result<f64> {
    if reconstruction.len() != original.len() || reconstruction.len() != mask.flags.len() {
        return Err(Error::DimensionMismatch {
            expected: mask.flags.len(),
            got: reconstruction.len(),
        });
    }
    let count = mask.count();
    if count == 0 {
        return Err(Error::invalid("masked_mse needs at least one masked pixel"));
    }
    let sum: f64 = mask
        .flags
        .iter()
        .zip(reconstruction.iter().zip(original))
        .filter(|(&m, _)| m)
        .map(|(_, (&r, &o))| (r - o) * (r - o))
        .sum();
    Ok(sum / count as f64)
}

/// One prepared training batch: zero-filled inputs, clean targets, and the
/// masks that link them. Pixel values are rescaled to [0, 1].
#[derive(Debug, Clone)]
pub struct MaeBatch {
    pub masked: Vec<Vec<f64>>,
    pub originals: Vec<Vec<f64>>,
    pub masks: Vec<Mask>,
}

impl MaeBatch {
    pub fn len(&self) -> usize {
        self.masked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masked.is_empty()
    }
}

pub fn image_to_unit(image: &ImageGrid) -> Vec<f64> {
    image.pixels().iter().map(|&p| p as f64 / 255.0).collect()
}

struct ForwardTrace {
    x0: Vec<f64>,
    a1: Vec<f64>,
    h1: Vec<f64>,
    a2: Vec<f64>,
    h2: Vec<f64>,
    latent: Vec<f64>,
    b0: Vec<f64>,
    h3: Vec<f64>,
    a4: Vec<f64>,
    h4: Vec<f64>,
    reconstruction: Vec<f64>,
}

impl MaeModel {
    pub fn grid_dim(&self) -> usize {
        self.grid_dim
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    /// Input width of the encoder's dense layer.
    pub fn bottleneck_input(&self) -> usize {
        CH2 * self.bottom_size * self.bottom_size
    }

    fn forward(&self, input: &[f64]) -> ForwardTrace {
        let g = self.grid_dim;
        let a1 = self.enc_conv1.forward(input, g);
        let h1 = apply_gelu(&a1);
        let a2 = self.enc_conv2.forward(&h1, self.mid_size);
        let h2 = apply_gelu(&a2);
        let latent = self.enc_fc.forward(&h2);
        let b0 = self.dec_fc.forward(&latent);
        let h3 = apply_gelu(&b0);
        let a4 = self.dec_tconv1.forward(&h3, self.bottom_size);
        let h4 = apply_gelu(&a4);
        let reconstruction = self.dec_tconv2.forward(&h4, self.mid_size);
        ForwardTrace {
            x0: input.to_vec(),
            a1,
            h1,
            a2,
            h2,
            latent,
            b0,
            h3,
            a4,
            h4,
            reconstruction,
        }
    }

    fn tensors(&self) -> [&Vec<f64>; 12] {
        [
            &self.enc_conv1.weight,
            &self.enc_conv1.bias,
            &self.enc_conv2.weight,
            &self.enc_conv2.bias,
            &self.enc_fc.weight,
            &self.enc_fc.bias,
            &self.dec_fc.weight,
            &self.dec_fc.bias,
            &self.dec_tconv1.weight,
            &self.dec_tconv1.bias,
            &self.dec_tconv2.weight,
            &self.dec_tconv2.bias,
        ]
    }

    fn tensors_mut(&mut self) -> [&mut Vec<f64>; 12] {
        [
            &mut self.enc_conv1.weight,
            &mut self.enc_conv1.bias,
            &mut self.enc_conv2.weight,
            &mut self.enc_conv2.bias,
            &mut self.enc_fc.weight,
            &mut self.enc_fc.bias,
            &mut self.dec_fc.weight,
            &mut self.dec_fc.bias,
            &mut self.dec_tconv1.weight,
            &mut self.dec_tconv1.bias,
            &mut self.dec_tconv2.weight,
            &mut self.dec_tconv2.bias,
        ]
    }

    /// Tensor dimensions in serialization order.
    fn tensor_dims(&self) -> [Vec<u32>; 12] {
        let flat = self.bottleneck_input() as u32;
        let latent = self.latent_dim as u32;
        [
            vec![CH1 as u32, 1, 3, 3],
            vec![CH1 as u32],
            vec![CH2 as u32, CH1 as u32, 3, 3],
            vec![CH2 as u32],
            vec![latent, flat],
            vec![latent],
            vec![flat, latent],
            vec![flat],
            vec![CH2 as u32, CH1 as u32, 3, 3],
            vec![CH1 as u32],
            vec![CH1 as u32, 1, 3, 3],
            vec![1],
        ]
    }

    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn param(&self, flat_index: usize) -> f64 {
        let mut idx = flat_index;
        for t in self.tensors() {
            if idx < t.len() {
                return t[idx];
            }
            idx -= t.len();
        }
        panic!("parameter index {flat_index} out of range");
    }

    pub fn set_param(&mut self, flat_index: usize, value: f64) {
        let mut idx = flat_index;
        for t in self.tensors_mut() {
            if idx < t.len() {
                t[idx] = value;
                return;
            }
            idx -= t.len();
        }
        panic!("parameter index {flat_index} out of range");
    }
}

/// Mean masked loss of a batch without touching the model.
pub fn batch_loss(model: &MaeModel, batch: &MaeBatch) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    let mut total = 0.0;
    for i in 0..batch.len() {
        let trace = model.forward(&batch.masked[i]);
        total += masked_mse(&trace.reconstruction, &batch.originals[i], &batch.masks[i])?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean masked loss plus the analytic gradient for every parameter, flattened
/// in the model's canonical tensor order.
pub fn batch_gradients(model: &MaeModel, batch: &MaeBatch) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::invalid("batch is empty"));
    }
    let mut grads = vec![0.0; model.param_count()];
    let mut total = 0.0;
    let scale = 1.0 / batch.len() as f64;

    for s in 0..batch.len() {
        let trace = model.forward(&batch.masked[s]);
        let mask = &batch.masks[s];
        let original = &batch.originals[s];
        total += masked_mse(&trace.reconstruction, original, mask)?;

        let count = mask.count() as f64;
        let grad_recon: Vec<f64> = trace
            .reconstruction
            .iter()
            .zip(original)
            .zip(mask.flags())
            .map(|((&r, &o), &m)| if m { 2.0 * (r - o) / count } else { 0.0 })
            .collect();

        let (g_h4, gw_t2, gb_t2) = model.dec_tconv2.backward(&trace.h4, model.mid_size, &grad_recon);
        let g_a4 = gelu_backward(&trace.a4, &g_h4);
        let (g_h3, gw_t1, gb_t1) = model.dec_tconv1.backward(&trace.h3, model.bottom_size, &g_a4);
        let g_b0 = gelu_backward(&trace.b0, &g_h3);
        let (g_latent, gw_dfc, gb_dfc) = model.dec_fc.backward(&trace.latent, &g_b0);
        let (g_h2, gw_efc, gb_efc) = model.enc_fc.backward(&trace.h2, &g_latent);
        let g_a2 = gelu_backward(&trace.a2, &g_h2);
        let (g_h1, gw_c2, gb_c2) = model.enc_conv2.backward(&trace.h1, model.mid_size, &g_a2);
        let g_a1 = gelu_backward(&trace.a1, &g_h1);
        let (_, gw_c1, gb_c1) = model.enc_conv1.backward(&trace.x0, model.grid_dim, &g_a1);

        let pieces: [&[f64]; 12] = [
            &gw_c1, &gb_c1, &gw_c2, &gb_c2, &gw_efc, &gb_efc, &gw_dfc, &gb_dfc, &gw_t1, &gb_t1,
            &gw_t2, &gb_t2,
        ];
        let mut offset = 0;
        for piece in pieces {
            for (i, &g) in piece.iter().enumerate() {
                grads[offset + i] += g * scale;
            }
            offset += piece.len();
        }
    }
    Ok((total / batch.len() as f64, grads))
}

/// Train in place with Adam on the masked reconstruction loss. Masks are
/// resampled for every sample in every epoch from the seeded stream; the
/// shuffle order has its own stream, so runs are reproducible end to end.
/// Returns the mean loss per epoch.
pub fn train(model: &mut MaeModel, images: &[ImageGrid], cfg: &TrainConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    if images.is_empty() {
        return Err(Error::invalid("training needs at least one image"));
    }
    if images.iter().any(|img| img.dim() != model.grid_dim) {
        return Err(Error::invalid("image size does not match the model grid"));
    }
    let originals: Vec<Vec<f64>> = images.iter().map(image_to_unit).collect();
    let n = images.len();
    let mut adam = Adam::new(
        model.param_count(),
        cfg.learning_rate,
        cfg.beta1,
        cfg.beta2,
        cfg.adam_eps,
    );

    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..n).collect();
        let mut shuffle_rng =
            ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "mae-shuffle", epoch as u64));
        for i in (1..n).rev() {
            let j = shuffle_rng.gen_range(0..=i);
            order.swap(i, j);
        }
        let mut mask_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, "mae-mask", epoch as u64));

        let mut epoch_loss = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut batch = MaeBatch {
                masked: Vec::with_capacity(chunk.len()),
                originals: Vec::with_capacity(chunk.len()),
                masks: Vec::with_capacity(chunk.len()),
            };
            for &i in chunk {
                let mask = sample_mask(model.grid_dim, cfg.mask_ratio, &mut mask_rng);
                let mut masked = originals[i].clone();
                for (v, &m) in masked.iter_mut().zip(mask.flags()) {
                    if m {
                        *v = 0.0;
                    }
                }
                batch.masked.push(masked);
                batch.originals.push(originals[i].clone());
                batch.masks.push(mask);
            }
            let (loss, grads) = batch_gradients(model, &batch)?;
            if !loss.is_finite() {
                return Err(Error::NanLoss {
                    epoch,
                    batch: batch_idx,
                });
            }
            epoch_loss += loss * chunk.len() as f64;

            let mut offset = 0;
            let mut ranges = Vec::with_capacity(12);
            for t in model.tensors() {
                ranges.push(offset..offset + t.len());
                offset += t.len();
            }
            let mut tensors = model.tensors_mut();
            adam.step(&grads, |i, delta| {
                for (t_idx, range) in ranges.iter().enumerate() {
                    if range.contains(&i) {
                        tensors[t_idx][i - range.start] += delta;
                        break;
                    }
                }
            });
        }
        history.push(epoch_loss / n as f64);
    }
    Ok(history)
}

/// Encode one image (no masking) into its latent vector.
pub fn encode(model: &MaeModel, image: &ImageGrid) -> Result<LatentVector> {
    if image.dim() != model.grid_dim {
        return Err(Error::DimensionMismatch {
            expected: model.grid_dim,
            got: image.dim(),
        });
    }
    let x = image_to_unit(image);
    let a1 = model.enc_conv1.forward(&x, model.grid_dim);
    let h1 = apply_gelu(&a1);
    let a2 = model.enc_conv2.forward(&h1, model.mid_size);
    let h2 = apply_gelu(&a2);
    Ok(model.enc_fc.forward(&h2))
}

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"CTDL";
pub const SNAPSHOT_VERSION: u32 = 1;

impl MaeModel {
    /// Serialize as a versioned binary snapshot: magic, version, grid and
    /// latent sizes, then every tensor as (rank, dims, row-major f64 LE).
    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(SNAPSHOT_MAGIC);
        out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.grid_dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.latent_dim as u32).to_le_bytes());
        for (tensor, dims) in self.tensors().iter().zip(self.tensor_dims()) {
            out.extend_from_slice(&(dims.len() as u32).to_le_bytes());
            for d in &dims {
                out.extend_from_slice(&d.to_le_bytes());
            }
            for v in tensor.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_snapshot_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cursor = 0usize;
        let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
            if *cursor + n > bytes.len() {
                return Err(Error::BadSnapshot("truncated".into()));
            }
            let slice = &bytes[*cursor..*cursor + n];
            *cursor += n;
            Ok(slice)
        };
        let read_u32 = |cursor: &mut usize| -> Result<u32> {
            Ok(u32::from_le_bytes(take(cursor, 4)?.try_into().unwrap()))
        };

        if take(&mut cursor, 4)? != SNAPSHOT_MAGIC {
            return Err(Error::BadSnapshot("bad magic".into()));
        }
        let version = read_u32(&mut cursor)?;
        if version != SNAPSHOT_VERSION {
            return Err(Error::BadSnapshot(format!("unsupported version {version}")));
        }
        let grid_dim = read_u32(&mut cursor)? as usize;
        let latent_dim = read_u32(&mut cursor)? as usize;
        let mut model = init_mae(grid_dim, latent_dim, 0)?;

        let expected_dims = model.tensor_dims();
        let mut loaded: Vec<Vec<f64>> = Vec::with_capacity(12);
        for dims in &expected_dims {
            let rank = read_u32(&mut cursor)? as usize;
            if rank != dims.len() {
                return Err(Error::BadSnapshot("tensor rank mismatch".into()));
            }
            let mut len = 1usize;
            for expect in dims {
                let got = read_u32(&mut cursor)?;
                if got != *expect {
                    return Err(Error::BadSnapshot("tensor shape mismatch".into()));
                }
                len *= got as usize;
            }
            let raw = take(&mut cursor, len * 8)?;
            loaded.push(
                raw.chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect(),
            );
        }
        if cursor != bytes.len() {
            return Err(Error::BadSnapshot("trailing bytes".into()));
        }
        for (slot, values) in model.tensors_mut().into_iter().zip(loaded) {
            *slot = values;
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_snapshot_bytes()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::Io {
            path: path.as_ref().to_path_buf(),
            source: e,
        })?;
        Self::from_snapshot_bytes(&bytes)
    }
}

/// Loss history serialized as CSV (epoch, loss).
pub fn loss_history_csv(history: &[f64]) -> String {
    let mut out = String::from("epoch,loss\n");
    for (epoch, loss) in history.iter().enumerate() {
        out.push_str(&format!("{},{}\n", epoch + 1, loss));
    }
    out
}
