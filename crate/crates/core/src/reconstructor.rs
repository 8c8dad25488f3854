//! Per-level linear autoencoder over feature cells.
//!
//! A 1x1 convolution acts on each cell independently, so the encoder and
//! decoder are plain affine maps `R^C -> R^latent -> R^C`. The training
//! objective is the mean over cells of the l2 norm (not squared) of the
//! residual, which is also what the error map reports per cell.

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::feature::{ErrorMap, FeatureMap, Level};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Autoencoder {
    pub level: Level,
    pub input_dim: usize,
    pub latent_dim: usize,
    /// `latent_dim x input_dim`, row-major.
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    /// `input_dim x latent_dim`, row-major.
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

/// Gradients of the reconstruction loss, same layout as [`Autoencoder`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub enc_w: Vec<f64>,
    pub enc_b: Vec<f64>,
    pub dec_w: Vec<f64>,
    pub dec_b: Vec<f64>,
}

impl Gradients {
    fn zeros(ae: &Autoencoder) -> Self {
        Self {
            enc_w: vec![0.0; ae.enc_w.len()],
            enc_b: vec![0.0; ae.enc_b.len()],
            dec_w: vec![0.0; ae.dec_w.len()],
            dec_b: vec![0.0; ae.dec_b.len()],
        }
    }

    pub fn norm(&self) -> f64 {
        [&self.enc_w, &self.enc_b, &self.dec_w, &self.dec_b]
            .iter()
            .flat_map(|v| v.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }

    fn scale(&mut self, k: f64) {
        for v in [
            &mut self.enc_w,
            &mut self.enc_b,
            &mut self.dec_w,
            &mut self.dec_b,
        ] {
            v.iter_mut().for_each(|g| *g *= k);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_cells: usize,
    pub seed: u64,
    /// Multiplier applied to the learning rate after each epoch; 1 keeps it fixed.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.01,
            epochs: 12,
            batch_cells: 32,
            seed: 0,
            lr_decay: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Invalid("epochs must be >= 1".into()));
        }
        if self.batch_cells == 0 {
            return Err(Error::Invalid("batch_cells must be >= 1".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(Error::Invalid("lr_decay must be in (0, 1]".into()));
        }
        Ok(())
    }
}

/// Per-epoch record returned by [`train_with_history`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean of the mini-batch losses seen during the epoch.
    pub mean_batch_loss: f64,
}

impl Autoencoder {
    /// Uniform `±1/sqrt(C)` initialization from a seeded stream.
    pub fn init(level: Level, input_dim: usize, latent_dim: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || latent_dim == 0 {
            return Err(Error::Invalid("autoencoder dims must be positive".into()));
        }
        if latent_dim >= input_dim {
            return Err(Error::Invalid(format!(
                "latent_dim {latent_dim} must be smaller than input_dim {input_dim}"
            )));
        }
        let mut rng = Rng::new(seed);
        let bound = 1.0 / (input_dim as f64).sqrt();
        let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| rng.range(-bound, bound)).collect() };
        let enc_w = draw(latent_dim * input_dim);
        let dec_w = draw(input_dim * latent_dim);
        Ok(Self {
            level,
            input_dim,
            latent_dim,
            enc_w,
            enc_b: vec![0.0; latent_dim],
            dec_w,
            dec_b: vec![0.0; input_dim],
        })
    }

    /// Builds from explicit parameters without the `latent < input` rule,
    /// so square and degenerate configurations can be checked.
    pub fn from_parts(
        level: Level,
        input_dim: usize,
        latent_dim: usize,
        enc_w: Vec<f64>,
        enc_b: Vec<f64>,
        dec_w: Vec<f64>,
        dec_b: Vec<f64>,
    ) -> Result<Self> {
        let ae = Self {
            level,
            input_dim,
            latent_dim,
            enc_w,
            enc_b,
            dec_w,
            dec_b,
        };
        ae.check_shapes()?;
        Ok(ae)
    }

    fn check_shapes(&self) -> Result<()> {
        let (c, l) = (self.input_dim, self.latent_dim);
        if self.enc_w.len() != l * c
            || self.enc_b.len() != l
            || self.dec_w.len() != c * l
            || self.dec_b.len() != c
        {
            return Err(Error::Dimension(format!(
                "autoencoder parameter blocks do not match {c}->{l}->{c}"
            )));
        }
        if self.params().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("autoencoder weights must be finite".into()));
        }
        Ok(())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.enc_w
            .iter()
            .chain(&self.enc_b)
            .chain(&self.dec_w)
            .chain(&self.dec_b)
    }

    fn check_map(&self, f: &FeatureMap) -> Result<()> {
        if f.channels() != self.input_dim {
            return Err(Error::Dimension(format!(
                "feature map has {} channels, autoencoder expects {}",
                f.channels(),
                self.input_dim
            )));
        }
        if f.level() != self.level {
            return Err(Error::Dimension(format!(
                "feature map level {} does not match autoencoder level {}",
                f.level(),
                self.level
            )));
        }
        Ok(())
    }

    fn encode_into(&self, x: &[f32], z: &mut [f64]) {
        let c = self.input_dim;
        for (k, zk) in z.iter_mut().enumerate() {
            *zk = self.enc_b[k] + dot_f32(&self.enc_w[k * c..(k + 1) * c], x);
        }
    }

    fn decode_into(&self, z: &[f64], r: &mut [f64]) {
        let l = self.latent_dim;
        for (i, ri) in r.iter_mut().enumerate() {
            *ri = self.dec_b[i] + dot(&self.dec_w[i * l..(i + 1) * l], z);
        }
    }

    /// Reconstruction and residual norm of one cell.
    fn cell_error(&self, x: &[f32], z: &mut [f64], r: &mut [f64]) -> f64 {
        self.encode_into(x, z);
        self.decode_into(z, r);
        r.iter()
            .zip(x)
            .map(|(a, &b)| (a - b as f64).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Adds the gradient of `scale * ||Dec(Enc(x)) - x||` to `g`; returns the norm.
    fn accumulate_cell_grad(
        &self,
        x: &[f32],
        scale: f64,
        g: &mut Gradients,
        z: &mut [f64],
        r: &mut [f64],
        dz: &mut [f64],
    ) -> f64 {
        let (c, l) = (self.input_dim, self.latent_dim);
        let e = self.cell_error(x, z, r);
        if e == 0.0 {
            return 0.0;
        }
        // r becomes d(loss)/d(reconstruction)
        let k = scale / e;
        for (ri, &xi) in r.iter_mut().zip(x) {
            *ri = k * (*ri - xi as f64);
        }
        dz.iter_mut().for_each(|v| *v = 0.0);
        for ((&gi, row), grow) in r
            .iter()
            .zip(self.dec_w.chunks_exact(l))
            .zip(g.dec_w.chunks_exact_mut(l))
        {
            for ((gw, &zj), (d, &w)) in grow.iter_mut().zip(z.iter()).zip(dz.iter_mut().zip(row)) {
                *gw += gi * zj;
                *d += w * gi;
            }
        }
        g.dec_b.iter_mut().zip(r.iter()).for_each(|(b, gi)| *b += gi);
        for ((&dj, grow), b) in dz.iter().zip(g.enc_w.chunks_exact_mut(c)).zip(g.enc_b.iter_mut()) {
            *b += dj;
            for (gw, &xv) in grow.iter_mut().zip(x) {
                *gw += dj * xv as f64;
            }
        }
        e
    }

    fn apply(&mut self, g: &Gradients, lr: f64) {
        for (p, d) in [
            (&mut self.enc_w, &g.enc_w),
            (&mut self.enc_b, &g.enc_b),
            (&mut self.dec_w, &g.dec_w),
            (&mut self.dec_b, &g.dec_b),
        ] {
            p.iter_mut().zip(d).for_each(|(w, gw)| *w -= lr * gw);
        }
    }
}

// Four independent accumulators; the summation order is fixed so results
// do not depend on target features.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k];
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn dot_f32(a: &[f64], b: &[f32]) -> f64 {
    let mut acc = [0.0f64; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        for k in 0..4 {
            acc[k] += x[k] * y[k] as f64;
        }
    }
    let tail: f64 = ra.iter().zip(rb).map(|(x, &y)| x * y as f64).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// `Dec(Enc(F))` cell by cell; output has the input's dimensions.
pub fn reconstruct(ae: &Autoencoder, f: &FeatureMap) -> Result<FeatureMap> {
    ae.check_map(f)?;
    let mut z = vec![0.0; ae.latent_dim];
    let mut r = vec![0.0; ae.input_dim];
    let mut out = Vec::with_capacity(f.data().len());
    for k in 0..f.cells() {
        ae.encode_into(f.cell_flat(k), &mut z);
        ae.decode_into(&z, &mut r);
        out.extend(r.iter().map(|&v| v as f32));
    }
    FeatureMap::new(f.level(), f.height(), f.width(), f.channels(), out)
}

/// Per-cell l2 residual norm.
pub fn error_map(ae: &Autoencoder, f: &FeatureMap) -> Result<ErrorMap> {
    ae.check_map(f)?;
    let mut z = vec![0.0; ae.latent_dim];
    let mut r = vec![0.0; ae.input_dim];
    let data = (0..f.cells())
        .map(|k| ae.cell_error(f.cell_flat(k), &mut z, &mut r))
        .collect();
    ErrorMap::new(f.level(), f.height(), f.width(), data)
}

/// Mean over cells of the l2 residual norm.
pub fn reconstruction_loss(ae: &Autoencoder, f: &FeatureMap) -> Result<f64> {
    Ok(error_map(ae, f)?.mean())
}

/// Exact gradient of [`reconstruction_loss`]. Cells with zero residual
/// contribute a zero subgradient.
pub fn loss_gradient(ae: &Autoencoder, f: &FeatureMap) -> Result<Gradients> {
    ae.check_map(f)?;
    let mut g = Gradients::zeros(ae);
    let mut z = vec![0.0; ae.latent_dim];
    let mut r = vec![0.0; ae.input_dim];
    let mut dz = vec![0.0; ae.latent_dim];
    let scale = 1.0 / f.cells() as f64;
    for k in 0..f.cells() {
        ae.accumulate_cell_grad(f.cell_flat(k), scale, &mut g, &mut z, &mut r, &mut dz);
    }
    Ok(g)
}

/// Full-data loss; may be non-finite when training has diverged.
fn mean_loss(ae: &Autoencoder, maps: &[&FeatureMap]) -> f64 {
    let mut z = vec![0.0; ae.latent_dim];
    let mut r = vec![0.0; ae.input_dim];
    let mut total = 0.0;
    let mut cells = 0usize;
    for m in maps {
        for k in 0..m.cells() {
            total += ae.cell_error(m.cell_flat(k), &mut z, &mut r);
        }
        cells += m.cells();
    }
    total / cells as f64
}

/// Mini-batch gradient descent over cells pooled from `maps`.
pub fn train(ae: &Autoencoder, maps: &[&FeatureMap], cfg: &TrainConfig) -> Result<Autoencoder> {
    train_with_history(ae, maps, cfg).map(|(ae, _)| ae)
}

pub fn train_with_history(
    ae: &Autoencoder,
    maps: &[&FeatureMap],
    cfg: &TrainConfig,
) -> Result<(Autoencoder, Vec<EpochStats>)> {
    cfg.validate()?;
    ae.check_shapes()?;
    if maps.is_empty() {
        return Err(Error::Invalid("no feature maps to train on".into()));
    }
    for m in maps {
        ae.check_map(m)?;
    }
    let mut model = ae.clone();
    let mut order: Vec<(usize, usize)> = maps
        .iter()
        .enumerate()
        .flat_map(|(mi, m)| (0..m.cells()).map(move |k| (mi, k)))
        .collect();
    let mut rng = Rng::new(cfg.seed);
    let mut g = Gradients::zeros(&model);
    let mut z = vec![0.0; model.latent_dim];
    let mut r = vec![0.0; model.input_dim];
    let mut dz = vec![0.0; model.latent_dim];
    let mut lr = cfg.learning_rate;
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        rng.shuffle(&mut order);
        let mut batch_sum = 0.0;
        let mut batches = 0usize;
        for batch in order.chunks(cfg.batch_cells) {
            g.scale(0.0);
            let scale = 1.0 / batch.len() as f64;
            let mut loss = 0.0;
            for &(mi, k) in batch {
                loss += model.accumulate_cell_grad(
                    maps[mi].cell_flat(k),
                    scale,
                    &mut g,
                    &mut z,
                    &mut r,
                    &mut dz,
                );
            }
            loss *= scale;
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            model.apply(&g, lr);
            batch_sum += loss;
            batches += 1;
        }
        let mean_batch_loss = batch_sum / batches as f64;
        if model.params().any(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                loss: mean_loss(&model, maps),
            });
        }
        history.push(EpochStats {
            epoch,
            mean_batch_loss,
        });
        lr *= cfg.lr_decay;
    }
    Ok((model, history))
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AutoencoderDoc {
    level: Level,
    input_dim: usize,
    latent_dim: usize,
    /// f64 little-endian: enc_w, enc_b, dec_w, dec_b.
    weights: String,
}

impl Serialize for Autoencoder {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut blob = Vec::with_capacity(8 * self.params().count());
        for v in self.params() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        AutoencoderDoc {
            level: self.level,
            input_dim: self.input_dim,
            latent_dim: self.latent_dim,
            weights: B64.encode(blob),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Autoencoder {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let doc = AutoencoderDoc::deserialize(d)?;
        let blob = B64.decode(doc.weights).map_err(D::Error::custom)?;
        let (c, l) = (doc.input_dim, doc.latent_dim);
        let n = 2 * c * l + c + l;
        if blob.len() != 8 * n {
            return Err(D::Error::custom(format!(
                "weight blob has {} bytes, expected {}",
                blob.len(),
                8 * n
            )));
        }
        let vals: Vec<f64> = blob
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let (enc_w, rest) = vals.split_at(l * c);
        let (enc_b, rest) = rest.split_at(l);
        let (dec_w, dec_b) = rest.split_at(c * l);
        Autoencoder::from_parts(
            doc.level,
            c,
            l,
            enc_w.to_vec(),
            enc_b.to_vec(),
            dec_w.to_vec(),
            dec_b.to_vec(),
        )
        .map_err(D::Error::custom)
    }
}
