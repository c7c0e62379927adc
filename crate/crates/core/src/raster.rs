use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};

/// Single-channel 16-bit image.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    pub width: u32,
    pub height: u32,
    pub pixels: Vec<u16>,
}

impl Image {
    pub fn new(width: u32, height: u32, pixels: Vec<u16>) -> Result<Self> {
        let n = width as usize * height as usize;
        if pixels.len() != n {
            return Err(Error::Config(format!(
                "image {width}x{height} needs {n} samples, got {}",
                pixels.len()
            )));
        }
        Ok(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn filled(width: u32, height: u32, value: u16) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width as usize * height as usize],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> u16 {
        self.pixels[y as usize * self.width as usize + x as usize]
    }
}

/// Per-pixel change class. The numeric codes are the on-disk contract.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum ChangeClass {
    Static = 0,
    New = 1,
    Missing = 2,
    Replaced = 3,
}

impl ChangeClass {
    pub const ALL: [ChangeClass; 4] = [
        ChangeClass::Static,
        ChangeClass::New,
        ChangeClass::Missing,
        ChangeClass::Replaced,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ChangeClass::Static => "static",
            ChangeClass::New => "new",
            ChangeClass::Missing => "missing",
            ChangeClass::Replaced => "replaced",
        }
    }

    /// Swaps the roles of reference and query.
    pub fn mirrored(self) -> Self {
        match self {
            ChangeClass::New => ChangeClass::Missing,
            ChangeClass::Missing => ChangeClass::New,
            c => c,
        }
    }
}

/// 8-bit class-code raster. Predictions only hold [`ChangeClass`] codes;
/// rasters read from disk may carry anything, which evaluation rejects.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChangeRaster {
    pub width: u32,
    pub height: u32,
    pub codes: Vec<u8>,
}

impl ChangeRaster {
    pub fn new(width: u32, height: u32, codes: Vec<u8>) -> Result<Self> {
        let n = width as usize * height as usize;
        if codes.len() != n {
            return Err(Error::Config(format!(
                "change raster {width}x{height} needs {n} samples, got {}",
                codes.len()
            )));
        }
        Ok(Self {
            width,
            height,
            codes,
        })
    }

    pub fn all_static(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            codes: vec![0; width as usize * height as usize],
        }
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn get(&self, x: u32, y: u32) -> u8 {
        self.codes[y as usize * self.width as usize + x as usize]
    }

    pub fn count(&self, class: ChangeClass) -> usize {
        self.codes.iter().filter(|&&c| c == class.code()).count()
    }

    /// Pixels carrying `class`.
    pub fn class_mask(&self, class: ChangeClass) -> Bitmap {
        let mut b = Bitmap::new(self.width, self.height);
        for (i, &c) in self.codes.iter().enumerate() {
            if c == class.code() {
                b.insert_index(i);
            }
        }
        b
    }
}
