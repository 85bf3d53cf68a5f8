//! Grayscale images in `[0, 1]` and PGM I/O.

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("{path}: {source}")]
    Codec {
        path: PathBuf,
        #[source]
        source: ::image::ImageError,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, fill: f64) -> Self {
        Self { width, height, data: vec![fill; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self { width, height, data }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Option<Self> {
        (data.len() == width * height).then_some(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn pixels(&self) -> &[f64] {
        &self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { width: self.width, height: self.height, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| self.get(self.width - 1 - x, y))
    }

    /// 8-bit quantization, values clamped to `[0, 1]`.
    pub fn to_luma8(&self) -> ::image::GrayImage {
        let buf = self.data.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        ::image::GrayImage::from_raw(self.width as u32, self.height as u32, buf).expect("buffer sized to image")
    }

    /// Writes a binary (P5) PGM.
    pub fn save_pgm(&self, path: &Path) -> Result<(), ImageError> {
        let mut bytes = Vec::new();
        let enc = ::image::codecs::pnm::PnmEncoder::new(&mut bytes)
            .with_subtype(::image::codecs::pnm::PnmSubtype::Graymap(::image::codecs::pnm::SampleEncoding::Binary));
        let img = self.to_luma8();
        ::image::ImageEncoder::write_image(enc, img.as_raw(), img.width(), img.height(), ::image::ExtendedColorType::L8)
            .map_err(|source| ImageError::Codec { path: path.to_path_buf(), source })?;
        std::fs::write(path, bytes).map_err(|source| ImageError::Io { path: path.to_path_buf(), source })
    }

    /// Reads any PNM grayscale image, rescaled to `[0, 1]`.
    pub fn load(path: &Path) -> Result<Self, ImageError> {
        let codec = |source| ImageError::Codec { path: path.to_path_buf(), source };
        let img = ::image::ImageReader::open(path)
            .map_err(|source| ImageError::Io { path: path.to_path_buf(), source })?
            .with_guessed_format()
            .map_err(|source| ImageError::Io { path: path.to_path_buf(), source })?
            .decode()
            .map_err(codec)?
            .into_luma16();
        let (w, h) = (img.width() as usize, img.height() as usize);
        let data = img.into_raw().into_iter().map(|v| f64::from(v) / 65535.0).collect();
        Ok(Self { width: w, height: h, data })
    }
}
