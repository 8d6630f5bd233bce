//! From response map to a one-pixel-wide binary delineation: non-maximum
//! suppression along the line normal, hysteresis thresholding, and a 3x3
//! morphological closing.

use std::collections::VecDeque;
use std::f64::consts::FRAC_PI_4;
use std::f64::consts::FRAC_PI_2;
use std::path::Path;

use crate::cosfire::{rotation_tolerant, CosfireParams, ResponsePair};
use crate::dog::Polarity;
use crate::error::{Error, Result};
use crate::image::{write_gray8, GrayImage};
use crate::par;

const NEIGHBOURS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Boolean mask with the same geometry as an image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMap {
    width: usize,
    height: usize,
    mask: Vec<bool>,
}

impl BinaryMap {
    pub fn new(width: usize, height: usize, mask: Vec<bool>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("mask dimensions must be positive"));
        }
        if mask.len() != width * height {
            return Err(Error::contract(format!(
                "expected {} mask entries, got {}",
                width * height,
                mask.len()
            )));
        }
        Ok(Self {
            width,
            height,
            mask,
        })
    }

    /// Panics if either dimension is zero.
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            mask: vec![false; width * height],
        }
    }

    /// Panics if either dimension is zero.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                m.mask[y * width + x] = f(x, y);
            }
        }
        m
    }

    /// Pixels strictly above `threshold`.
    pub fn from_gray(image: &GrayImage, threshold: f64) -> Self {
        Self {
            width: image.width(),
            height: image.height(),
            mask: image.data().iter().map(|&v| v > threshold).collect(),
        }
    }

    /// Binarizes an 8-bit-derived image at raw value > 127.
    pub fn from_annotation(image: &GrayImage) -> Self {
        Self::from_gray(image, 127.5 / 255.0)
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dimensions(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.mask
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.mask[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.mask[y * self.width + x] = v;
    }

    pub fn count(&self) -> usize {
        self.mask.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.mask.iter().any(|&b| b)
    }

    /// Coordinates of set pixels in row-major order.
    pub fn points(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(move |(i, _)| (i % self.width, i / self.width))
    }

    /// True if every set pixel of `self` is set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMap) -> bool {
        self.mask.iter().zip(&other.mask).all(|(&a, &b)| !a || b)
    }

    pub fn rotate90(&self) -> Self {
        let (w, h) = (self.width, self.height);
        let mut out = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                out[(w - 1 - x) * h + y] = self.mask[y * w + x];
            }
        }
        Self {
            width: h,
            height: w,
            mask: out,
        }
    }

    pub fn to_gray(&self) -> GrayImage {
        GrayImage::new(
            self.width,
            self.height,
            self.mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        )
        .expect("dimensions are positive")
    }

    /// Writes an 8-bit PNG with 0 for background and 255 for set pixels.
    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        let bytes = self.mask.iter().map(|&b| if b { 255 } else { 0 }).collect();
        write_gray8(self.width, self.height, bytes, path.as_ref())
    }

    pub(crate) fn same_dimensions(&self, other: &BinaryMap) -> Result<()> {
        if self.dimensions() != other.dimensions() {
            return Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            });
        }
        Ok(())
    }
}

/// Offset to one of the two neighbours across a line at angle `theta`.
///
/// The normal `theta + pi/2` is snapped to the nearest multiple of 45 degrees;
/// exact ties (odd multiples of pi/8) snap upwards.
pub fn normal_step(theta: f64) -> (isize, isize) {
    let q = ((theta + FRAC_PI_2) / FRAC_PI_4 + 0.5 + 1e-9).floor() as i64;
    match q.rem_euclid(4) {
        0 => (1, 0),
        1 => (1, -1),
        2 => (0, -1),
        _ => (-1, -1),
    }
}

/// Non-maximum suppression across the local line direction.
///
/// A non-zero pixel survives if it is `>=` both neighbours along the quantized
/// normal; neighbours outside the image count as 0.
pub fn thin(pair: &ResponsePair) -> Result<GrayImage> {
    let (w, h) = pair.response.dimensions();
    if pair.orientation.len() != w * h {
        return Err(Error::contract(format!(
            "orientation map has {} entries for a {w}x{h} response",
            pair.orientation.len()
        )));
    }
    if let Some(&k) = pair.orientation.iter().find(|&&k| k as usize >= pair.orientations.len()) {
        return Err(Error::contract(format!("orientation index {k} out of range")));
    }
    let steps: Vec<(isize, isize)> = pair.orientations.iter().map(|&t| normal_step(t)).collect();
    let resp = &pair.response;
    let at = |x: isize, y: isize| {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            resp.get(x as usize, y as usize)
        }
    };
    let mut out = vec![0.0; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let v = resp.get(x, y);
            if v == 0.0 {
                continue;
            }
            let (dx, dy) = steps[pair.orientation[y * w + x] as usize];
            let (xi, yi) = (x as isize, y as isize);
            if v >= at(xi + dx, yi + dy) && v >= at(xi - dx, yi - dy) {
                *o = v;
            }
        }
    });
    GrayImage::new(w, h, out)
}

fn check_threshold(t_high: f64) -> Result<()> {
    if !(t_high > 0.0 && t_high <= 1.0) {
        return Err(Error::param(format!("t_h must lie in (0, 1], got {t_high}")));
    }
    Ok(())
}

/// Two-level thresholding with `t_l = t_h / 2`: pixels `>= t_h` seed regions
/// that grow through 8-connected pixels `>= t_l`.
pub fn hysteresis(thinned: &GrayImage, t_high: f64) -> Result<BinaryMap> {
    check_threshold(t_high)?;
    Ok(hysteresis_unchecked(thinned, t_high))
}

/// As [`hysteresis`], but a threshold of 0 selects the non-zero support.
pub(crate) fn hysteresis_unchecked(thinned: &GrayImage, t_high: f64) -> BinaryMap {
    let (w, h) = thinned.dimensions();
    let t_low = 0.5 * t_high;
    let data = thinned.data();
    let mut mask = vec![false; w * h];
    let mut queue = VecDeque::new();
    for (i, &v) in data.iter().enumerate() {
        if v > 0.0 && v >= t_high && !mask[i] {
            mask[i] = true;
            queue.push_back(i);
            while let Some(j) = queue.pop_front() {
                let (x, y) = ((j % w) as isize, (j / w) as isize);
                for (dx, dy) in NEIGHBOURS_8 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = ny as usize * w + nx as usize;
                    if !mask[n] && data[n] > 0.0 && data[n] >= t_low {
                        mask[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
    }
    BinaryMap {
        width: w,
        height: h,
        mask,
    }
}

/// 3x3 dilation; pixels outside the image are background.
pub fn dilate(mask: &BinaryMap) -> BinaryMap {
    neighbourhood(mask, true)
}

/// 3x3 erosion; pixels outside the image are background, so set pixels on
/// the border erode.
pub fn erode(mask: &BinaryMap) -> BinaryMap {
    neighbourhood(mask, false)
}

/// `any` over the 3x3 window when `dilation`, `all` otherwise, with
/// background outside the image.
fn neighbourhood(mask: &BinaryMap, dilation: bool) -> BinaryMap {
    let (w, h) = mask.dimensions();
    let mut out = vec![false; w * h];
    par::for_each_row(&mut out, w, |y, row| {
        for (x, o) in row.iter_mut().enumerate() {
            let mut window = NEIGHBOURS_8.iter().chain(&[(0, 0)]).map(|&(dx, dy)| {
                let (nx, ny) = (x as isize + dx, y as isize + dy);
                nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize && mask.get(nx as usize, ny as usize)
            });
            *o = if dilation {
                window.any(|b| b)
            } else {
                window.all(|b| b)
            };
        }
    });
    BinaryMap {
        width: w,
        height: h,
        mask: out,
    }
}

/// Morphological closing (dilation then erosion) with a 3x3 square.
///
/// Evaluated on a canvas grown by one background pixel per side and cropped
/// back, which equals closing in the unbounded plane: the result contains the
/// input and closing it again changes nothing.
pub fn close(mask: &BinaryMap) -> BinaryMap {
    let (w, h) = mask.dimensions();
    let grown = BinaryMap::from_fn(w + 2, h + 2, |x, y| {
        (1..=w).contains(&x) && (1..=h).contains(&y) && mask.get(x - 1, y - 1)
    });
    let closed = erode(&dilate(&grown));
    BinaryMap::from_fn(w, h, |x, y| closed.get(x + 1, y + 1))
}

/// Threshold-independent intermediate maps of the delineation pipeline.
#[derive(Debug, Clone)]
pub struct Prepared {
    /// Rotation-tolerant response normalized to a maximum of 1.
    pub pair: ResponsePair,
    pub thinned: GrayImage,
}

impl Prepared {
    pub fn new(image: &GrayImage, params: &CosfireParams, polarity: Polarity) -> Result<Self> {
        let pair = rotation_tolerant(image, params, polarity)?;
        Self::from_pair(pair)
    }

    pub fn from_pair(pair: ResponsePair) -> Result<Self> {
        let pair = pair.normalized()?;
        let thinned = thin(&pair)?;
        Ok(Self { pair, thinned })
    }

    /// Hysteresis and closing at `t_high`.
    pub fn binarize(&self, t_high: f64) -> Result<BinaryMap> {
        check_threshold(t_high)?;
        Ok(close(&hysteresis_unchecked(&self.thinned, t_high)))
    }

    /// As [`Prepared::binarize`], also accepting `t_high = 0` (the non-zero
    /// support of the thinned map).
    pub(crate) fn binarize_sweep(&self, t_high: f64) -> BinaryMap {
        close(&hysteresis_unchecked(&self.thinned, t_high))
    }
}

/// Filter, thin, threshold and close.
pub fn delineate(image: &GrayImage, params: &CosfireParams, t_high: f64, polarity: Polarity) -> Result<BinaryMap> {
    check_threshold(t_high)?;
    Prepared::new(image, params, polarity)?.binarize(t_high)
}
