//! Packed binary masks aligned with a raster grid.

use std::fmt;

use crate::error::{Error, Result};

/// Row-major binary grid, 64 pixels per word.
///
/// Bits past `width * height` in the last word are always zero, so derived
/// equality and [`BitMask::count_ones`] only see real pixels.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl BitMask {
    pub fn empty(width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "mask dimensions must be positive");
        BitMask {
            width,
            height,
            words: vec![0; (width * height).div_ceil(64)],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let mut m = Self::empty(width, height);
        m.words.iter_mut().for_each(|w| *w = !0);
        m.clear_tail();
        m
    }

    /// Builds a mask by evaluating `f(row, col)` for every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for r in 0..height {
            for c in 0..width {
                if f(r, c) {
                    m.set(r, c, true);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        debug_assert!(row < self.height && col < self.width);
        self.get_index(row * self.width + col)
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.height && col < self.width);
        self.set_index(row * self.width + col, value);
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, value: bool) {
        let bit = 1u64 << (i % 64);
        if value {
            self.words[i / 64] |= bit;
        } else {
            self.words[i / 64] &= !bit;
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Iterates `(row, col)` of set pixels in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let width = self.width;
        self.words.iter().enumerate().flat_map(move |(wi, &word)| {
            let mut w = word;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                let i = wi * 64 + b;
                Some((i / width, i % width))
            })
        })
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.dims() == other.dims() && self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn and(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn or(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_words(other, |a, b| a | b)
    }

    /// `self AND NOT other`.
    pub fn and_not(&self, other: &BitMask) -> Result<BitMask> {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn not(&self) -> BitMask {
        let mut m = BitMask {
            width: self.width,
            height: self.height,
            words: self.words.iter().map(|w| !w).collect(),
        };
        m.clear_tail();
        m
    }

    /// Unpacks into one byte per pixel, 0 or 1.
    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.len()).map(|i| u8::from(self.get_index(i))).collect()
    }

    fn zip_words(&self, other: &BitMask, f: impl Fn(u64, u64) -> u64) -> Result<BitMask> {
        check_same_shape(self, other)?;
        Ok(BitMask {
            width: self.width,
            height: self.height,
            words: self.words.iter().zip(&other.words).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    fn clear_tail(&mut self) {
        let n = self.width * self.height;
        if !n.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (n % 64)) - 1;
            }
        }
    }
}

pub fn check_same_shape(a: &BitMask, b: &BitMask) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::Shape(format!(
            "{}x{} vs {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

pub fn mask_and(a: &BitMask, b: &BitMask) -> Result<BitMask> {
    a.and(b)
}

pub fn mask_or(a: &BitMask, b: &BitMask) -> Result<BitMask> {
    a.or(b)
}

pub fn mask_not(a: &BitMask) -> BitMask {
    a.not()
}

impl fmt::Debug for BitMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "BitMask {}x{} ({} set)", self.width, self.height, self.count_ones())?;
        if self.len() <= 64 * 64 {
            for r in 0..self.height {
                for c in 0..self.width {
                    f.write_str(if self.get(r, c) { "#" } else { "." })?;
                }
                writeln!(f)?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tail_bits_stay_clear() {
        let m = BitMask::full(5, 3);
        assert_eq!(m.count_ones(), 15);
        assert_eq!(m.not().count_ones(), 0);
        assert!(m.not().is_empty());
    }

    #[test]
    fn iter_ones_row_major() {
        let mut m = BitMask::empty(70, 2);
        m.set(0, 3, true);
        m.set(0, 69, true);
        m.set(1, 0, true);
        let v: Vec<_> = m.iter_ones().collect();
        assert_eq!(v, vec![(0, 3), (0, 69), (1, 0)]);
    }

    #[test]
    fn boolean_identities() {
        let a = BitMask::from_fn(9, 7, |r, c| (r * 3 + c * 5) % 4 == 0);
        let full = BitMask::full(9, 7);
        assert!(a.and(&a.not()).unwrap().is_empty());
        assert_eq!(a.and(&full).unwrap(), a);
        assert_eq!(a.or(&a.not()).unwrap(), full);
    }

    #[test]
    fn random_pair_matches_per_bit_loop() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
            let a = BitMask::from_fn(w, h, |_, _| rng.random_bool(0.5));
            let b = BitMask::from_fn(w, h, |_, _| rng.random_bool(0.5));
            let and = a.and(&b).unwrap();
            let or = a.or(&b).unwrap();
            let not = a.not();
            for r in 0..h {
                for c in 0..w {
                    assert_eq!(and.get(r, c), a.get(r, c) && b.get(r, c));
                    assert_eq!(or.get(r, c), a.get(r, c) || b.get(r, c));
                    assert_eq!(not.get(r, c), !a.get(r, c));
                }
            }
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = BitMask::empty(4, 4);
        let b = BitMask::empty(4, 5);
        assert!(matches!(a.and(&b), Err(Error::Shape(_))));
    }
}
