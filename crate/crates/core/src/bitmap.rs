//! Packed binary raster.
//!
//! Pixels are stored row-major, one bit each, in 64-bit words. Bit `i` of the
//! raster is pixel `(i % width, i / width)`. Padding bits in the last word are
//! always zero so word-wise popcounts are exact.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bitmap {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self {
            width,
            height,
            words: vec![0; n.div_ceil(64)],
        }
    }

    /// Builds a bitmap from a predicate over `(x, y)`.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut b = Self::new(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    b.insert_index(y as usize * width as usize + x as usize);
                }
            }
        }
        b
    }

    /// Axis-aligned filled rectangle, clipped to the frame.
    pub fn rect(width: u32, height: u32, x0: u32, y0: u32, w: u32, h: u32) -> Self {
        Self::from_fn(width, height, |x, y| {
            x >= x0 && x < x0.saturating_add(w) && y >= y0 && y < y0.saturating_add(h)
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.contains_index(y as usize * self.width as usize + x as usize)
    }

    pub fn set(&mut self, x: u32, y: u32, value: bool) {
        let i = y as usize * self.width as usize + x as usize;
        if value {
            self.insert_index(i);
        } else {
            self.remove_index(i);
        }
    }

    pub fn contains_index(&self, i: usize) -> bool {
        debug_assert!(i < self.len());
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn insert_index(&mut self, i: usize) {
        assert!(i < self.len(), "pixel index {i} outside {}x{}", self.width, self.height);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove_index(&mut self, i: usize) {
        assert!(i < self.len(), "pixel index {i} outside {}x{}", self.width, self.height);
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    fn check_dims(&self, other: &Bitmap) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::dims(self.dims(), other.dims()));
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &Bitmap) -> Result<u64> {
        self.check_dims(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| u64::from((a & b).count_ones()))
            .sum())
    }

    pub fn union_with(&mut self, other: &Bitmap) -> Result<()> {
        self.check_dims(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a |= b);
        Ok(())
    }

    pub fn intersect_with(&mut self, other: &Bitmap) -> Result<()> {
        self.check_dims(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= b);
        Ok(())
    }

    pub fn subtract(&mut self, other: &Bitmap) -> Result<()> {
        self.check_dims(other)?;
        self.words.iter_mut().zip(&other.words).for_each(|(a, b)| *a &= !b);
        Ok(())
    }

    pub fn is_subset_of(&self, other: &Bitmap) -> Result<bool> {
        self.check_dims(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    /// Indices of set pixels in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let bit = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + bit)
            })
        })
    }

    /// Tight bounding box `(x0, y0, x1, y1)`, inclusive, or `None` when empty.
    pub fn bounding_box(&self) -> Option<(u32, u32, u32, u32)> {
        let w = self.width as usize;
        let mut it = self.iter_ones();
        let first = it.next()?;
        let (mut x0, mut y0) = (first % w, first / w);
        let (mut x1, mut y1) = (x0, y0);
        for i in it {
            let (x, y) = (i % w, i / w);
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        Some((x0 as u32, y0 as u32, x1 as u32, y1 as u32))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_counts() {
        let b = Bitmap::rect(8, 8, 2, 2, 4, 4);
        assert_eq!(b.count_ones(), 16);
        assert!(b.get(2, 2) && b.get(5, 5) && !b.get(6, 6));
        assert_eq!(b.bounding_box(), Some((2, 2, 5, 5)));
    }

    #[test]
    fn iter_ones_crosses_word_boundaries() {
        let mut b = Bitmap::new(13, 11);
        for i in [0, 63, 64, 65, 127, 142] {
            b.insert_index(i);
        }
        assert_eq!(b.iter_ones().collect::<Vec<_>>(), vec![0, 63, 64, 65, 127, 142]);
        b.remove_index(64);
        assert_eq!(b.count_ones(), 5);
    }

    #[test]
    fn set_ops_reject_dimension_mismatch() {
        let mut a = Bitmap::new(4, 4);
        let b = Bitmap::new(4, 5);
        assert!(matches!(a.union_with(&b), Err(Error::DimensionMismatch { .. })));
        assert!(a.intersection_count(&b).is_err());
    }
}
