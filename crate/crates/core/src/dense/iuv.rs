use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_len, invariant, Result};

/// One IUV sample: part id (0 = background) and byte-quantized surface coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Iuv {
    pub part: u8,
    pub u: u8,
    pub v: u8,
}

pub const BACKGROUND: Iuv = Iuv { part: 0, u: 0, v: 0 };

impl Iuv {
    pub const fn new(part: u8, u: u8, v: u8) -> Self {
        Self { part, u, v }
    }

    #[inline]
    pub fn is_background(&self) -> bool {
        self.part == 0
    }
}

/// Per-pixel dense correspondence raster, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IuvMap {
    width: u32,
    height: u32,
    pixels: Vec<Iuv>,
}

impl IuvMap {
    /// All-background map.
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, pixels: vec![BACKGROUND; width as usize * height as usize] }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Iuv>) -> Result<Self> {
        check_len("iuv pixels", width as usize * height as usize, pixels.len())?;
        Ok(Self { width, height, pixels })
    }

    /// Checks part ids against a model's part count and that background carries no UV.
    pub fn validate(&self, part_count: usize) -> Result<()> {
        for (i, p) in self.pixels.iter().enumerate() {
            if p.part as usize > part_count {
                return Err(invariant("iuv", alloc::format!("pixel {i} has part id {} > {part_count}", p.part)));
            }
            if p.part == 0 && (p.u != 0 || p.v != 0) {
                return Err(invariant("iuv", alloc::format!("background pixel {i} carries UV")));
            }
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Iuv] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> Iuv {
        self.pixels[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, value: Iuv) {
        self.pixels[y as usize * self.width as usize + x as usize] = value;
    }

    pub fn foreground_count(&self) -> usize {
        self.pixels.iter().filter(|p| !p.is_background()).count()
    }

    /// In-bounds pixels of the 3×3 grid centred on `(x, y)`, including the centre.
    pub(crate) fn neighbourhood(&self, x: u32, y: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let (w, h) = (self.width as i64, self.height as i64);
        (-1i64..=1).flat_map(move |dy| {
            (-1i64..=1).filter_map(move |dx| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                (nx >= 0 && ny >= 0 && nx < w && ny < h).then_some((nx as u32, ny as u32))
            })
        })
    }
}

/// An image point in pixels paired with its `(I, U, V)` surface coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DenseKeypoint {
    pub x: f64,
    pub y: f64,
    pub part: u8,
    pub u: f64,
    pub v: f64,
}
