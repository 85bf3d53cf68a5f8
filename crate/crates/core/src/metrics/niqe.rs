use std::path::Path;
use std::sync::OnceLock;

use log::{info, warn};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::fid::fit_gaussian_rows;
use super::MetricError;
use crate::raster::GrayImage;

pub const FEATURES_PER_SCALE: usize = 18;
const MIN_MSCN_SIDE: usize = 16;
const MIN_FIT_SAMPLES: usize = 16;
const MIN_MODEL_IMAGES: usize = 10;
const REGULARIZER: f64 = 1e-6;
const ALPHA_MIN: f64 = 0.2;
const ALPHA_STEP: f64 = 0.001;
const ALPHA_COUNT: usize = 9801;
const SHIFTS: [(isize, isize); 4] = [(0, 1), (1, 0), (1, 1), (-1, 1)];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NiqeConfig {
    /// Side of a square patch at the finest scale.
    pub patch_size: usize,
    pub sharpness_fraction: f64,
    pub scales: usize,
    pub window_sigma: f64,
    pub c: f64,
}

impl Default for NiqeConfig {
    fn default() -> Self {
        Self { patch_size: 96, sharpness_fraction: 0.75, scales: 2, window_sigma: 7.0 / 6.0, c: 1.0 / 255.0 }
    }
}

impl NiqeConfig {
    pub fn feature_len(&self) -> usize {
        FEATURES_PER_SCALE * self.scales
    }

    pub fn validate(&self) -> Result<(), MetricError> {
        if self.scales == 0 {
            return Err(MetricError::Config("scales must be at least 1".into()));
        }
        let coarsest = self.patch_size >> (self.scales - 1);
        if coarsest < 4 || !self.patch_size.is_multiple_of(1 << (self.scales - 1)) {
            return Err(MetricError::Config(format!(
                "patch size {} cannot be halved {} times",
                self.patch_size,
                self.scales - 1
            )));
        }
        if !(0.0..=1.0).contains(&self.sharpness_fraction) {
            return Err(MetricError::Config("sharpness fraction must lie in [0, 1]".into()));
        }
        if !(self.window_sigma > 0.0 && self.c > 0.0) {
            return Err(MetricError::Config("window sigma and C must be positive".into()));
        }
        Ok(())
    }
}

/// Row-major real field, used for MSCN coefficients and local deviations.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffField {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl CoeffField {
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    fn block(&self, x0: usize, y0: usize, size: usize) -> CoeffField {
        let mut data = Vec::with_capacity(size * size);
        for y in y0..y0 + size {
            data.extend_from_slice(&self.data[y * self.width + x0..y * self.width + x0 + size]);
        }
        CoeffField { width: size, height: size, data }
    }
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let half = ((3.0 * sigma).floor() as isize).max(1);
    let k: Vec<f64> = (-half..=half).map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.into_iter().map(|v| v / s).collect()
}

fn convolve_separable(src: &[f64], w: usize, h: usize, k: &[f64]) -> Vec<f64> {
    let half = (k.len() / 2) as isize;
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * src[y * w + clamp(x as isize + i as isize - half, w)];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * tmp[clamp(y as isize + i as isize - half, h) * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

fn mscn_with_sigma(image: &GrayImage, window_sigma: f64, c: f64) -> Result<(CoeffField, CoeffField), MetricError> {
    let (w, h) = (image.width(), image.height());
    if w < MIN_MSCN_SIDE || h < MIN_MSCN_SIDE {
        return Err(MetricError::ImageTooSmall { width: w, height: h, min: MIN_MSCN_SIDE });
    }
    let px = image.pixels();
    if px.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    let origin = px[0];
    let px: Vec<f64> = px.iter().map(|v| v - origin).collect();
    let k = gaussian_kernel(window_sigma);
    let mu = convolve_separable(&px, w, h, &k);
    let sq: Vec<f64> = px.iter().map(|v| v * v).collect();
    let mu_sq = convolve_separable(&sq, w, h, &k);
    let sigma: Vec<f64> = mu_sq.iter().zip(&mu).map(|(s, m)| (s - m * m).max(0.0).sqrt()).collect();
    let coeffs = px.iter().zip(&mu).zip(&sigma).map(|((p, m), s)| (p - m) / (s + c)).collect();
    Ok((CoeffField { width: w, height: h, data: coeffs }, CoeffField { width: w, height: h, data: sigma }))
}

/// Mean-subtracted contrast-normalized coefficients with a Gaussian window
/// and replicated borders.
pub fn mscn(image: &GrayImage, window_sigma: f64) -> Result<CoeffField, MetricError> {
    Ok(mscn_with_sigma(image, window_sigma, NiqeConfig::default().c)?.0)
}

fn cubic(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.5 * a * a * a - 2.5 * a * a + 1.0
    } else if a <= 2.0 {
        -0.5 * a * a * a + 2.5 * a * a - 4.0 * a + 2.0
    } else {
        0.0
    }
}

fn half_weights(n_out: usize, n_in: usize) -> Vec<Vec<(usize, f64)>> {
    let mirror = |j: isize| -> usize {
        let n = n_in as isize;
        let period = 2 * n;
        let m = j.rem_euclid(period);
        (if m < n { m } else { period - 1 - m }) as usize
    };
    (0..n_out)
        .map(|o| {
            let centre = 2.0 * o as f64 + 0.5;
            let taps: Vec<(isize, f64)> =
                (2 * o as isize - 3..=2 * o as isize + 4).map(|j| (j, 0.5 * cubic(0.5 * (centre - j as f64)))).collect();
            let total: f64 = taps.iter().map(|t| t.1).sum();
            taps.into_iter().map(|(j, wt)| (mirror(j), wt / total)).collect()
        })
        .collect()
}

/// Antialiased bicubic downsampling by a factor of two with symmetric borders.
pub fn downsample_half(image: &GrayImage) -> GrayImage {
    let (w, h) = (image.width(), image.height());
    let (ow, oh) = (w.div_ceil(2), h.div_ceil(2));
    let wx = half_weights(ow, w);
    let wy = half_weights(oh, h);
    let px = image.pixels();
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for (x, taps) in wx.iter().enumerate() {
            tmp[y * ow + x] = taps.iter().map(|&(j, wt)| wt * px[y * w + j]).sum();
        }
    }
    GrayImage::from_fn(ow, oh, |x, y| wy[y].iter().map(|&(j, wt)| wt * tmp[j * ow + x]).sum())
}

struct RatioTables {
    alphas: Vec<f64>,
    /// Γ(2/α)² / (Γ(1/α) Γ(3/α)).
    rho: Vec<f64>,
    inv_rho: Vec<f64>,
}

fn tables() -> &'static RatioTables {
    static TABLES: OnceLock<RatioTables> = OnceLock::new();
    TABLES.get_or_init(|| {
        let alphas: Vec<f64> = (0..ALPHA_COUNT).map(|i| ALPHA_MIN + i as f64 * ALPHA_STEP).collect();
        let rho = alphas
            .iter()
            .map(|a| (2.0 * ln_gamma(2.0 / a) - ln_gamma(1.0 / a) - ln_gamma(3.0 / a)).exp())
            .collect::<Vec<f64>>();
        let inv_rho = rho.iter().map(|r| 1.0 / r).collect();
        RatioTables { alphas, rho, inv_rho }
    })
}

fn nearest_alpha(target: f64, values: impl Iterator<Item = f64>) -> f64 {
    let t = tables();
    let mut best = (f64::INFINITY, 0);
    for (i, v) in values.enumerate() {
        let d = (v - target).abs();
        if d < best.0 {
            best = (d, i);
        }
    }
    t.alphas[best.1]
}

fn check_samples(samples: &[f64]) -> Result<(), MetricError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(MetricError::TooFewSamples { need: MIN_FIT_SAMPLES, got: samples.len() });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(MetricError::NonFinite);
    }
    if samples.iter().all(|&v| v == 0.0) {
        return Err(MetricError::AllZero);
    }
    Ok(())
}

/// Generalized Gaussian fit: shape and variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ggd {
    pub alpha: f64,
    pub variance: f64,
}

pub fn fit_ggd(samples: &[f64]) -> Result<Ggd, MetricError> {
    check_samples(samples)?;
    let n = samples.len() as f64;
    let variance = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let mean_abs = samples.iter().map(|v| v.abs()).sum::<f64>() / n;
    let ratio = variance / (mean_abs * mean_abs);
    let alpha = nearest_alpha(ratio, tables().inv_rho.iter().copied());
    Ok(Ggd { alpha, variance })
}

/// Asymmetric generalized Gaussian fit: shape and one-sided standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggd {
    pub alpha: f64,
    pub beta_left: f64,
    pub beta_right: f64,
}

impl Aggd {
    /// Mean of the fitted distribution.
    pub fn mean(&self) -> f64 {
        let a = self.alpha;
        let shape = (ln_gamma(2.0 / a) - ln_gamma(1.0 / a)).exp() * (ln_gamma(1.0 / a) - ln_gamma(3.0 / a)).exp().sqrt();
        (self.beta_right - self.beta_left) * shape
    }
}

fn one_sided_rms(mut squares: Vec<f64>) -> f64 {
    if squares.is_empty() {
        return 0.0;
    }
    squares.sort_by(f64::total_cmp);
    (squares.iter().sum::<f64>() / squares.len() as f64).sqrt()
}

pub fn fit_aggd(samples: &[f64]) -> Result<Aggd, MetricError> {
    check_samples(samples)?;
    let left = one_sided_rms(samples.iter().filter(|&&v| v < 0.0).map(|v| v * v).collect());
    let right = one_sided_rms(samples.iter().filter(|&&v| v > 0.0).map(|v| v * v).collect());
    let n = samples.len() as f64;
    let mean_abs = samples.iter().map(|v| v.abs()).sum::<f64>() / n;
    let mean_sq = samples.iter().map(|v| v * v).sum::<f64>() / n;
    let r_hat = mean_abs * mean_abs / mean_sq;
    let norm = if right == 0.0 {
        1.0
    } else {
        let g = left / right;
        (g.powi(3) + 1.0) * (g + 1.0) / (g * g + 1.0).powi(2)
    };
    let alpha = nearest_alpha(r_hat * norm, tables().rho.iter().copied());
    Ok(Aggd { alpha, beta_left: left, beta_right: right })
}

fn circular_products(field: &CoeffField, (dy, dx): (isize, isize)) -> Vec<f64> {
    let (w, h) = (field.width as isize, field.height as isize);
    let mut out = Vec::with_capacity(field.data.len());
    for y in 0..h {
        for x in 0..w {
            let sy = (y - dy).rem_euclid(h);
            let sx = (x - dx).rem_euclid(w);
            out.push(field.data[(y * w + x) as usize] * field.data[(sy * w + sx) as usize]);
        }
    }
    out
}

fn block_features(block: &CoeffField) -> Result<[f64; FEATURES_PER_SCALE], MetricError> {
    let mut f = [0.0; FEATURES_PER_SCALE];
    let g = fit_ggd(&block.data)?;
    f[0] = g.alpha;
    f[1] = g.variance;
    for (i, shift) in SHIFTS.iter().enumerate() {
        let a = fit_aggd(&circular_products(block, *shift))?;
        let base = 2 + 4 * i;
        f[base] = a.alpha;
        f[base + 1] = a.mean();
        f[base + 2] = a.beta_left * a.beta_left;
        f[base + 3] = a.beta_right * a.beta_right;
    }
    Ok(f)
}

/// Features of every patch that passes the sharpness gate, in raster order.
pub fn niqe_patch_features(image: &GrayImage, cfg: &NiqeConfig) -> Result<Vec<Vec<f64>>, MetricError> {
    cfg.validate()?;
    let ps = cfg.patch_size;
    let (w, h) = (image.width(), image.height());
    if w < 2 * ps || h < 2 * ps {
        return Err(MetricError::ImageTooSmall { width: w, height: h, min: 2 * ps });
    }
    let (bx, by) = (w / ps, h / ps);
    let mut scaled = GrayImage::from_fn(bx * ps, by * ps, |x, y| image.get(x, y));
    let mut kept: Vec<(usize, usize)> = Vec::new();
    let mut features: Vec<Vec<f64>> = Vec::new();
    for s in 0..cfg.scales {
        if s > 0 {
            scaled = downsample_half(&scaled);
        }
        let size = ps >> s;
        let (coeffs, sigma) = mscn_with_sigma(&scaled, cfg.window_sigma, cfg.c)?;
        if s == 0 {
            let sharpness: Vec<f64> = (0..by * bx)
                .map(|k| {
                    let b = sigma.block((k % bx) * size, (k / bx) * size, size);
                    b.data.iter().sum::<f64>() / b.data.len() as f64
                })
                .collect();
            let peak = sharpness.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            kept = (0..by * bx)
                .filter(|&k| sharpness[k] > cfg.sharpness_fraction * peak)
                .map(|k| (k % bx, k / bx))
                .collect();
            if kept.is_empty() {
                return Err(MetricError::NoSharpPatch);
            }
            features = vec![Vec::with_capacity(cfg.feature_len()); kept.len()];
        }
        for (f, &(i, j)) in features.iter_mut().zip(&kept) {
            f.extend(block_features(&coeffs.block(i * size, j * size, size))?);
        }
    }
    Ok(features)
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let d = rows[0].len();
    (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect()
}

/// Mean of the sharpness-selected patch features.
pub fn niqe_features(image: &GrayImage, cfg: &NiqeConfig) -> Result<Vec<f64>, MetricError> {
    Ok(mean_rows(&niqe_patch_features(image, cfg)?))
}

fn image_stats(image: &GrayImage, cfg: &NiqeConfig) -> Result<(DVector<f64>, DMatrix<f64>), MetricError> {
    let patches = niqe_patch_features(image, cfg)?;
    let f = cfg.feature_len();
    if patches.len() < 2 {
        return Ok((DVector::from_vec(mean_rows(&patches)), DMatrix::zeros(f, f)));
    }
    let g = fit_gaussian_rows(&patches)?;
    Ok((g.mean, g.cov))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NiqeModel {
    pub mean: Vec<f64>,
    /// Row-major `f × f`.
    pub cov: Vec<f64>,
    pub config: NiqeConfig,
    pub images: usize,
    pub regularized: bool,
}

impl NiqeModel {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.dim(), self.dim(), &self.cov)
    }

    /// Model built from one image's own patch statistics.
    pub fn from_image(image: &GrayImage, cfg: &NiqeConfig) -> Result<Self, MetricError> {
        let (mean, cov) = image_stats(image, cfg)?;
        Ok(Self::from_parts(mean, cov, *cfg, 1, false))
    }

    fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>, config: NiqeConfig, images: usize, regularized: bool) -> Self {
        let f = mean.len();
        let cov = (0..f * f).map(|k| cov[(k / f, k % f)]).collect();
        Self { mean: mean.iter().copied().collect(), cov, config, images, regularized }
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let json = serde_json::to_vec_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, json)
    }

    pub fn load(path: &Path) -> std::io::Result<Self> {
        let model: Self = serde_json::from_slice(&std::fs::read(path)?).map_err(std::io::Error::other)?;
        if model.cov.len() != model.dim() * model.dim() || model.dim() != model.config.feature_len() {
            return Err(std::io::Error::new(std::io::ErrorKind::InvalidData, "model dimensions are inconsistent"));
        }
        Ok(model)
    }
}

fn numerical_rank(m: &DMatrix<f64>) -> usize {
    let eig = m.clone().symmetric_eigen();
    let peak = eig.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    eig.eigenvalues.iter().filter(|v| **v > peak * m.nrows() as f64 * f64::EPSILON).count()
}

/// Fits the pristine Gaussian over per-image features.
pub fn fit_niqe_model(images: &[GrayImage], cfg: &NiqeConfig) -> Result<NiqeModel, MetricError> {
    use rayon::prelude::*;
    if images.len() < MIN_MODEL_IMAGES {
        return Err(MetricError::TooFewSamples { need: MIN_MODEL_IMAGES, got: images.len() });
    }
    let features = images.par_iter().map(|im| niqe_features(im, cfg)).collect::<Result<Vec<_>, _>>()?;
    let g = fit_gaussian_rows(&features)?;
    let mut cov = g.cov;
    let f = cfg.feature_len();
    let rank = numerical_rank(&cov);
    let regularized = rank < f;
    if regularized {
        warn!(
            "pristine covariance has rank {rank} < {f} from {} images; adding {REGULARIZER:e} to the diagonal (more images avoid this)",
            images.len()
        );
        for i in 0..f {
            cov[(i, i)] += REGULARIZER;
        }
    }
    info!("fitted NIQE model on {} images", images.len());
    Ok(NiqeModel::from_parts(g.mean, cov, *cfg, images.len(), regularized))
}

fn mahalanobis(diff: &DVector<f64>, pooled: DMatrix<f64>) -> f64 {
    let chol = Cholesky::new(pooled.clone()).or_else(|| {
        warn!("pooled covariance is singular; adding {REGULARIZER:e} to the diagonal");
        let f = pooled.nrows();
        Cholesky::new(&pooled + DMatrix::identity(f, f) * REGULARIZER)
    });
    match chol {
        Some(c) => diff.dot(&c.solve(diff)),
        None => {
            warn!("regularized covariance still not positive definite; using clamped eigenvalues");
            let eig = pooled.symmetric_eigen();
            let proj = eig.eigenvectors.transpose() * diff;
            proj.iter().zip(eig.eigenvalues.iter()).map(|(p, l)| p * p / l.max(REGULARIZER)).sum()
        }
    }
}

/// Distance of an image's feature statistics from the pristine model; lower is better.
pub fn niqe_score(image: &GrayImage, model: &NiqeModel) -> Result<f64, MetricError> {
    let f = model.config.feature_len();
    if model.dim() != f || model.cov.len() != f * f {
        return Err(MetricError::DimMismatch(model.dim(), f));
    }
    let (mean, cov) = image_stats(image, &model.config)?;
    let diff = DVector::from_column_slice(&model.mean) - mean;
    if diff.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let pooled = (model.cov_matrix() + cov) * 0.5;
    Ok(mahalanobis(&diff, pooled).max(0.0).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Exp, StandardNormal};

    fn noise_image(w: usize, h: usize, seed: u64) -> GrayImage {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h).map(|_| rng.random::<f64>()).collect();
        GrayImage::from_vec(w, h, data).unwrap()
    }

    #[test]
    fn constant_image_has_zero_mscn() {
        let im = GrayImage::from_fn(20, 17, |_, _| 0.37);
        assert!(mscn(&im, 7.0 / 6.0).unwrap().data.iter().all(|&v| v == 0.0));
        assert!(matches!(mscn(&GrayImage::from_fn(15, 40, |_, _| 0.0), 1.0), Err(MetricError::ImageTooSmall { .. })));
    }

    #[test]
    fn mscn_matches_direct_convolution() {
        let im = noise_image(32, 32, 5);
        let got = mscn(&im, 7.0 / 6.0).unwrap();
        let sigma: f64 = 7.0 / 6.0;
        let mut k2 = [[0.0f64; 7]; 7];
        let mut total = 0.0;
        for (a, row) in k2.iter_mut().enumerate() {
            for (b, v) in row.iter_mut().enumerate() {
                let (dy, dx) = (a as f64 - 3.0, b as f64 - 3.0);
                *v = (-(dx * dx + dy * dy) / (2.0 * sigma * sigma)).exp();
                total += *v;
            }
        }
        let at = |x: isize, y: isize| im.get(x.clamp(0, 31) as usize, y.clamp(0, 31) as usize);
        let (mut max_abs, min, max) = (0.0f64, 0.0, 1.0);
        for y in 0..32isize {
            for x in 0..32isize {
                let (mut m1, mut m2) = (0.0, 0.0);
                for a in 0..7isize {
                    for b in 0..7isize {
                        let v = at(x + b - 3, y + a - 3);
                        let wgt = k2[a as usize][b as usize] / total;
                        m1 += wgt * v;
                        m2 += wgt * v * v;
                    }
                }
                let expect = (at(x, y) - m1) / ((m2 - m1 * m1).max(0.0).sqrt() + 1.0 / 255.0);
                let g = got.get(x as usize, y as usize);
                assert!((g - expect).abs() < 1e-8, "({x},{y}) {g} vs {expect}");
                max_abs = max_abs.max(g.abs());
            }
        }
        assert!(max_abs <= (max - min) * 255.0);
    }

    #[test]
    fn mscn_commutes_with_flip() {
        let im = noise_image(24, 18, 6);
        let a = mscn(&im, 7.0 / 6.0).unwrap();
        let b = mscn(&im.flip_horizontal(), 7.0 / 6.0).unwrap();
        for y in 0..18 {
            for x in 0..24 {
                assert!((a.get(x, y) - b.get(23 - x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn aggd_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let gauss: Vec<f64> = (0..100_000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let a = fit_aggd(&gauss).unwrap();
        assert!((1.8..=2.2).contains(&a.alpha), "{a:?}");
        assert!((a.beta_left / a.beta_right - 1.0).abs() < 0.1);
        let g = fit_ggd(&gauss).unwrap();
        assert!((1.8..=2.2).contains(&g.alpha) && (g.variance - 1.0).abs() < 0.05);
        let exp = Exp::new(1.0).unwrap();
        let lap: Vec<f64> = (0..100_000)
            .map(|_| {
                let v: f64 = exp.sample(&mut rng);
                if rng.random::<bool>() { v } else { -v }
            })
            .collect();
        let a = fit_aggd(&lap).unwrap();
        assert!((0.85..=1.15).contains(&a.alpha), "{a:?}");
    }

    #[test]
    fn aggd_mirrored_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let half: Vec<f64> = (0..1000).map(|_| rng.random::<f64>() * 3.0 - 1.0).collect();
        let mut s = half.clone();
        s.extend(half.iter().map(|v| -v));
        let a = fit_aggd(&s).unwrap();
        assert_eq!(a.beta_left, a.beta_right);
        assert_eq!(a.mean(), 0.0);
    }

    #[test]
    fn fit_rejects_degenerate() {
        assert!(matches!(fit_aggd(&[0.0; 32]), Err(MetricError::AllZero)));
        assert!(matches!(fit_ggd(&[1.0; 4]), Err(MetricError::TooFewSamples { .. })));
    }

    #[test]
    fn one_sided_samples_fit() {
        let s: Vec<f64> = (1..=40).map(|i| i as f64).collect();
        let a = fit_aggd(&s).unwrap();
        assert_eq!(a.beta_left, 0.0);
        assert!(a.alpha.is_finite());
    }

    #[test]
    fn downsample_preserves_constants_and_size() {
        let im = GrayImage::from_fn(10, 7, |_, _| 0.25);
        let d = downsample_half(&im);
        assert_eq!((d.width(), d.height()), (5, 4));
        assert!(d.pixels().iter().all(|v| (v - 0.25).abs() < 1e-12));
    }

    #[test]
    fn downsample_weights_sum_to_one() {
        for taps in half_weights(6, 12) {
            assert_eq!(taps.len(), 8);
            assert!((taps.iter().map(|t| t.1).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn feature_arity_and_self_distance() {
        let cfg = NiqeConfig { patch_size: 32, ..NiqeConfig::default() };
        let im = noise_image(96, 64, 9);
        let f = niqe_features(&im, &cfg).unwrap();
        assert_eq!(f.len(), 36);
        assert_eq!(f, niqe_features(&im, &cfg).unwrap());
        let model = NiqeModel::from_image(&im, &cfg).unwrap();
        assert!(niqe_score(&im, &model).unwrap().abs() < 1e-6);
    }

    #[test]
    fn flat_image_has_no_sharp_patch() {
        let cfg = NiqeConfig { patch_size: 32, ..NiqeConfig::default() };
        let im = GrayImage::from_fn(64, 64, |_, _| 0.5);
        assert!(matches!(niqe_patch_features(&im, &cfg), Err(MetricError::NoSharpPatch)));
    }

    #[test]
    fn config_validation() {
        assert!(NiqeConfig::default().validate().is_ok());
        assert!(NiqeConfig { patch_size: 6, ..NiqeConfig::default() }.validate().is_err());
        assert!(NiqeConfig { scales: 0, ..NiqeConfig::default() }.validate().is_err());
    }
}
