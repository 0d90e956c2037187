//! Single-channel raster images and their file I/O.
//!
//! Intensities are real-valued; files use the canonical [0, 255] 8-bit
//! range. Supported formats are 8-bit grayscale PNG and binary PGM (P5).
//! Color PNG inputs are converted to luma with the Rec.601 weights
//! (0.299 R + 0.587 G + 0.114 B).

use crate::error::{Error, Result};
use ndarray::Array2;
use std::fs;
use std::io::Write as IoWrite;
use std::path::Path;

/// M x N single-channel image with finite real-valued intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    data: Array2<f64>,
}

impl ImageGrid {
    /// Wraps an array, rejecting empty shapes and non-finite values.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (m, n) = data.dim();
        if m == 0 || n == 0 {
            return Err(Error::Dimension(format!("image must be nonempty, got {m}x{n}")));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("image contains NaN or infinite values".into()));
        }
        Ok(ImageGrid { data })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(Array2::zeros((height, width)))
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        Self::new(Array2::from_shape_fn((height, width), |(r, c)| f(r, c)))
    }

    pub fn height(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Elementwise clamp, used before writing or measuring 8-bit fidelity.
    pub fn clamped(&self, lo: f64, hi: f64) -> ImageGrid {
        ImageGrid { data: self.data.map(|&v| v.clamp(lo, hi)) }
    }

    /// Center crop to at most (max_height, max_width).
    pub fn center_crop(&self, max_height: usize, max_width: usize) -> ImageGrid {
        let (m, n) = self.data.dim();
        let h = m.min(max_height.max(1));
        let w = n.min(max_width.max(1));
        let r0 = (m - h) / 2;
        let c0 = (n - w) / 2;
        ImageGrid { data: self.data.slice(ndarray::s![r0..r0 + h, c0..c0 + w]).to_owned() }
    }

    /// Reads a PNG or PGM image, dispatching on the file extension.
    pub fn read(path: &Path) -> Result<Self> {
        match extension(path) {
            Some("png") => read_png(path),
            Some("pgm") | Some("pnm") => read_pgm(path),
            _ => Err(Error::Parameter(format!(
                "unsupported image extension in {}; expected .png or .pgm",
                path.display()
            ))),
        }
    }

    /// Writes the image as 8-bit grayscale, rounding and clamping to [0, 255].
    pub fn write(&self, path: &Path) -> Result<()> {
        match extension(path) {
            Some("png") => write_png(self, path),
            Some("pgm") | Some("pnm") => write_pgm(self, path),
            _ => Err(Error::Parameter(format!(
                "unsupported image extension in {}; expected .png or .pgm",
                path.display()
            ))),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        self.data.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
    }
}

fn extension(path: &Path) -> Option<&str> {
    path.extension().and_then(|e| e.to_str())
}

fn read_png(path: &Path) -> Result<ImageGrid> {
    let img = image::open(path).map_err(|e| Error::Image(format!("{}: {e}", path.display())))?;
    let (m, n) = (img.height() as usize, img.width() as usize);
    let data = match img {
        image::DynamicImage::ImageLuma8(gray) => Array2::from_shape_fn((m, n), |(r, c)| {
            gray.get_pixel(c as u32, r as u32).0[0] as f64
        }),
        other => {
            // Rec.601 luma for color inputs.
            let rgb = other.to_rgb8();
            Array2::from_shape_fn((m, n), |(r, c)| {
                let p = rgb.get_pixel(c as u32, r as u32).0;
                0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
            })
        }
    };
    ImageGrid::new(data)
}

fn write_png(img: &ImageGrid, path: &Path) -> Result<()> {
    let buf = image::GrayImage::from_raw(img.width() as u32, img.height() as u32, img.to_bytes())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Image(format!("{}: {e}", path.display())))
}

/// Binary PGM (P5) reader; supports `#` comments and maxval up to 255.
fn read_pgm(path: &Path) -> Result<ImageGrid> {
    let bytes = fs::read(path)?;
    let mut pos = 0usize;

    let mut token = |bytes: &[u8]| -> Result<String> {
        // skip whitespace and comments
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Image(format!("{}: truncated PGM header", path.display())));
        }
        Ok(String::from_utf8_lossy(&bytes[start..pos]).into_owned())
    };

    let magic = token(&bytes)?;
    if magic != "P5" {
        return Err(Error::Image(format!("{}: expected P5 magic, got {magic:?}", path.display())));
    }
    let parse = |s: String| -> Result<usize> {
        s.parse::<usize>()
            .map_err(|_| Error::Image(format!("{}: bad PGM header token {s:?}", path.display())))
    };
    let width = parse(token(&bytes)?)?;
    let height = parse(token(&bytes)?)?;
    let maxval = parse(token(&bytes)?)?;
    if maxval == 0 || maxval > 255 {
        return Err(Error::Image(format!(
            "{}: unsupported PGM maxval {maxval} (only 8-bit supported)",
            path.display()
        )));
    }
    pos += 1; // single whitespace byte after maxval
    let need = width * height;
    if bytes.len() < pos + need {
        return Err(Error::Image(format!(
            "{}: PGM payload truncated, expected {need} bytes found {}",
            path.display(),
            bytes.len().saturating_sub(pos)
        )));
    }
    let data = Array2::from_shape_fn((height, width), |(r, c)| bytes[pos + r * width + c] as f64);
    ImageGrid::new(data)
}

fn write_pgm(img: &ImageGrid, path: &Path) -> Result<()> {
    let mut file = fs::File::create(path)?;
    write!(file, "P5\n{} {}\n255\n", img.width(), img.height())?;
    file.write_all(&img.to_bytes())?;
    Ok(())
}
