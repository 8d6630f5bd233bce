//! Grayscale raster type, file I/O, reflected-border convolution and max
//! normalization.
//!
//! Coordinates: `x` is the column, `y` the row, origin at the top-left pixel.

use std::path::Path;

use crate::error::{Error, Result};
use crate::par;

/// A dense single-channel image of `f64` intensities stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::contract(format!(
                "expected {} samples for a {width}x{height} image, got {}",
                width * height,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::contract(format!("non-finite intensity {v}")));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Panics if either dimension is zero.
    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::filled(width, height, 0.0)
    }

    /// Builds an image from `f(x, y)`. Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// `1 - v` at every pixel.
    pub fn inverted(&self) -> Self {
        self.map(|v| 1.0 - v)
    }

    /// Rotates by 90 degrees counterclockwise as displayed: pixel `(x, y)`
    /// moves to `(y, width - 1 - x)` in the `height x width` result.
    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = vec![0.0; w * h];
        for y in 0..h {
            for x in 0..w {
                out[(w - 1 - x) * h + y] = self.data[y * w + x];
            }
        }
        Self {
            width: h,
            height: w,
            data: out,
        }
    }

    pub fn flip_horizontal(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(self.width - 1 - x, y)
        })
    }

    pub fn flip_vertical(&self) -> Self {
        Self::from_fn(self.width, self.height, |x, y| {
            self.get(x, self.height - 1 - y)
        })
    }

    pub(crate) fn same_dimensions(&self, width: usize, height: usize) -> Result<()> {
        if self.width != width || self.height != height {
            return Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: width,
                right_height: height,
            });
        }
        Ok(())
    }
}

/// Maps an out-of-range index back into `0..n` by half-sample mirror
/// reflection (`-1 -> 0`, `n -> n - 1`), repeating for arbitrarily large offsets.
#[inline]
pub fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let m = i.rem_euclid(period);
    (if m >= n { period - 1 - m } else { m }) as usize
}

/// Copies `image` into a buffer grown by `pad` pixels on every side, filled by
/// reflection.
pub(crate) struct Padded {
    pub data: Vec<f64>,
    pub stride: usize,
    pub pad: usize,
}

impl Padded {
    pub fn new(image: &GrayImage, pad: usize) -> Self {
        let stride = image.width + 2 * pad;
        let rows = image.height + 2 * pad;
        let mut data = Vec::with_capacity(stride * rows);
        for py in 0..rows {
            let y = reflect(py as isize - pad as isize, image.height);
            let src = image.row(y);
            for px in 0..stride {
                data.push(src[reflect(px as isize - pad as isize, image.width)]);
            }
        }
        Self { data, stride, pad }
    }

    /// Index of image pixel `(x, y)` in the padded buffer.
    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y + self.pad) * self.stride + x + self.pad
    }
}

/// Square, odd-sided convolution kernel with finite weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    radius: usize,
    weights: Vec<f64>,
}

impl Kernel {
    /// `weights` is row-major over `(2 * radius + 1)^2` samples, centre in the middle.
    pub fn new(radius: usize, weights: Vec<f64>) -> Result<Self> {
        let side = 2 * radius + 1;
        if weights.len() != side * side {
            return Err(Error::contract(format!(
                "kernel of radius {radius} needs {} weights, got {}",
                side * side,
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::contract("kernel weights must be finite"));
        }
        Ok(Self { radius, weights })
    }

    /// Builds a kernel from `f(dx, dy)` with offsets in `-radius..=radius`.
    pub fn from_fn(radius: usize, f: impl Fn(isize, isize) -> f64) -> Result<Self> {
        let r = radius as isize;
        let mut weights = Vec::with_capacity((2 * radius + 1).pow(2));
        for dy in -r..=r {
            for dx in -r..=r {
                weights.push(f(dx, dy));
            }
        }
        Self::new(radius, weights)
    }

    pub fn identity() -> Self {
        Self {
            radius: 0,
            weights: vec![1.0],
        }
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn side(&self) -> usize {
        2 * self.radius + 1
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dx, dy)` from the centre.
    #[inline]
    pub fn weight(&self, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        self.weights[((dy + r) as usize) * self.side() + (dx + r) as usize]
    }

    pub fn sum(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// True if the weights are exactly invariant under the eight symmetries
    /// of the square (quarter turns and mirrors).
    pub fn is_dihedral(&self) -> bool {
        let r = self.radius as isize;
        (-r..=r).all(|dy| {
            (-r..=r).all(|dx| {
                let w = self.weight(dx, dy);
                w == self.weight(-dy, dx) && w == self.weight(-dx, dy)
            })
        })
    }
}

/// One orbit of kernel offsets under the dihedral group, as one or two
/// quarter-turn cycles of padded-buffer offsets.
struct Orbit {
    weight: f64,
    cycles: [[isize; 4]; 2],
    two: bool,
}

fn dihedral_orbits(kernel: &Kernel, stride: usize) -> Vec<Orbit> {
    let r = kernel.radius as isize;
    let s = stride as isize;
    let cycle = |a: isize, b: isize| -> [isize; 4] {
        // (a, b) -> (-b, a) -> (-a, -b) -> (b, -a)
        [b * s + a, a * s - b, -b * s - a, -a * s + b]
    };
    let mut orbits = Vec::new();
    for a in 1..=r {
        for b in 0..=a {
            let two = b != 0 && b != a;
            orbits.push(Orbit {
                weight: kernel.weight(a, b),
                cycles: [cycle(a, b), if two { cycle(b, a) } else { [0; 4] }],
                two,
            });
        }
    }
    orbits
}

#[inline]
fn cycle_sum(buf: &[f64], base: usize, c: &[isize; 4]) -> f64 {
    let v = |k: usize| buf[(base as isize + c[k]) as usize];
    // Pairing opposite members makes the sum independent of which member
    // comes first, so a quarter-turn or mirror of the input is exact.
    (v(0) + v(2)) + (v(1) + v(3))
}

/// Convolves `image` with `kernel`, reflecting at the borders.
///
/// For kernels with full square symmetry (e.g. DoG, box) the sum is evaluated
/// orbit by orbit, which makes the result exactly equivariant under quarter
/// turns and mirrors of the input.
pub fn convolve(image: &GrayImage, kernel: &Kernel) -> GrayImage {
    let (w, h) = image.dimensions();
    let r = kernel.radius;
    let padded = Padded::new(image, r);
    let mut out = vec![0.0; w * h];

    if kernel.is_dihedral() {
        let orbits = dihedral_orbits(kernel, padded.stride);
        let centre = kernel.weight(0, 0);
        par::for_each_row(&mut out, w, |y, row| {
            for (x, o) in row.iter_mut().enumerate() {
                let base = padded.index(x, y);
                let mut acc = centre * padded.data[base];
                for orbit in &orbits {
                    let mut s = cycle_sum(&padded.data, base, &orbit.cycles[0]);
                    if orbit.two {
                        s += cycle_sum(&padded.data, base, &orbit.cycles[1]);
                    }
                    acc += orbit.weight * s;
                }
                *o = acc;
            }
        });
    } else {
        let side = kernel.side();
        par::for_each_row(&mut out, w, |y, row| {
            for (x, o) in row.iter_mut().enumerate() {
                let mut acc = 0.0;
                // out(x, y) = sum K(i, j) I(x - i, y - j)
                for ky in 0..side {
                    let src = (y + 2 * r - ky + padded.pad - r) * padded.stride;
                    let krow = &kernel.weights[ky * side..(ky + 1) * side];
                    for (kx, kw) in krow.iter().enumerate() {
                        acc += kw * padded.data[src + x + 2 * r - kx];
                    }
                }
                *o = acc;
            }
        });
    }

    GrayImage {
        width: w,
        height: h,
        data: out,
    }
}

/// Divides by the maximum so the brightest pixel becomes 1. All-zero images
/// are returned unchanged.
pub fn normalize_max(image: &GrayImage) -> Result<GrayImage> {
    if let Some(v) = image.data.iter().find(|&&v| v < 0.0) {
        return Err(Error::contract(format!(
            "normalize_max expects non-negative input, found {v}"
        )));
    }
    let max = image.max();
    if max > 0.0 {
        Ok(image.map(|v| v / max))
    } else {
        Ok(image.clone())
    }
}

fn map_image_error(path: &Path, err: ::image::ImageError) -> Error {
    match err {
        ::image::ImageError::IoError(source) => Error::Io {
            path: path.to_path_buf(),
            source,
        },
        other => Error::Format {
            path: path.to_path_buf(),
            message: other.to_string(),
        },
    }
}

/// Loads a BMP or PNG file as luma scaled to `[0, 1]`. Colour inputs are
/// converted to luma first.
pub fn load_image(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let reader = ::image::ImageReader::open(path)
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?
        .with_guessed_format()
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
    let decoded = reader.decode().map_err(|e| map_image_error(path, e))?;
    let luma = decoded.to_luma8();
    let (w, h) = luma.dimensions();
    let data = luma.as_raw().iter().map(|&p| p as f64 / 255.0).collect();
    GrayImage::new(w as usize, h as usize, data)
}

/// Quantizes `[0, 1]` intensities to 8 bits: `round(255 v)`, clamped.
pub fn to_u8(v: f64) -> u8 {
    (255.0 * v).round().clamp(0.0, 255.0) as u8
}

/// Writes an 8-bit grayscale PNG with value `round(255 v)` per pixel.
pub fn save_png(image: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let bytes: Vec<u8> = image.data.iter().map(|&v| to_u8(v)).collect();
    write_gray8(image.width, image.height, bytes, path.as_ref())
}

pub(crate) fn write_gray8(width: usize, height: usize, bytes: Vec<u8>, path: &Path) -> Result<()> {
    let buf = ::image::GrayImage::from_raw(width as u32, height as u32, bytes)
        .ok_or_else(|| Error::contract("raster buffer size mismatch"))?;
    buf.save_with_format(path, ::image::ImageFormat::Png)
        .map_err(|e| map_image_error(path, e))
}
