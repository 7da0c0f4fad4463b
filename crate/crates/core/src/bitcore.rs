//! Fixed-width bit strings and weight-K masks.
//!
//! Bit positions are numbered from the most significant end: position 0 is
//! the leftmost character of the canonical rendering. Every width-changing
//! operation (erasure, concatenation, truncation) preserves the relative
//! order of the surviving bits.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};

/// Largest supported width in bits.
pub const MAX_WIDTH: usize = 256;

const LIMBS: usize = MAX_WIDTH / 64;

/// An immutable binary string of 0..=256 bits.
///
/// Internally the value is stored as an unsigned integer in little-endian
/// 64-bit limbs; position `p` maps to value bit `width - 1 - p`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    width: u16,
    limbs: [u64; LIMBS],
}

fn check_width(width: usize) -> Result<()> {
    if width > MAX_WIDTH {
        Err(Error::WidthOutOfRange(width))
    } else {
        Ok(())
    }
}

fn same_width(a: &BitString, b: &BitString) -> Result<()> {
    if a.width != b.width {
        Err(Error::WidthMismatch {
            expected: a.width(),
            found: b.width(),
        })
    } else {
        Ok(())
    }
}

impl BitString {
    /// The all-zero string of the given width.
    pub fn zeros(width: usize) -> Result<Self> {
        check_width(width)?;
        Ok(Self {
            width: width as u16,
            limbs: [0; LIMBS],
        })
    }

    pub fn ones(width: usize) -> Result<Self> {
        Ok(Self::zeros(width)?.not())
    }

    /// Builds a string from the low `width` bits of `value`; errors if
    /// `value` does not fit.
    pub fn from_u64(value: u64, width: usize) -> Result<Self> {
        let mut s = Self::zeros(width)?;
        if width < 64 && value >> width != 0 {
            return Err(Error::InvalidArgument(format!(
                "value {value} does not fit in {width} bits"
            )));
        }
        s.limbs[0] = value;
        Ok(s)
    }

    /// Builds a string from bits given most significant first.
    pub fn from_bits<I: IntoIterator<Item = bool>>(bits: I) -> Result<Self> {
        let bits: Vec<bool> = bits.into_iter().collect();
        let mut s = Self::zeros(bits.len())?;
        let w = bits.len();
        for (p, b) in bits.into_iter().enumerate() {
            if b {
                s.set_value_bit(w - 1 - p);
            }
        }
        Ok(s)
    }

    /// Unpacks `width` bits from a big-endian byte buffer padded at the end.
    pub fn from_bytes(bytes: &[u8], width: usize) -> Result<Self> {
        check_width(width)?;
        let needed = width.div_ceil(8);
        if bytes.len() < needed {
            return Err(Error::Malformed(format!(
                "{} bytes cannot hold {width} bits",
                bytes.len()
            )));
        }
        Self::from_bits((0..width).map(|p| bytes[p / 8] >> (7 - p % 8) & 1 == 1))
    }

    /// Packs the bits big-endian, position 0 in the top bit of byte 0,
    /// zero-padding the final byte.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.width().div_ceil(8)];
        for (p, b) in self.bits().enumerate() {
            if b {
                out[p / 8] |= 0x80 >> (p % 8);
            }
        }
        out
    }

    pub fn width(&self) -> usize {
        self.width as usize
    }

    pub fn is_empty(&self) -> bool {
        self.width == 0
    }

    /// The bit at `pos` (0 = most significant).
    ///
    /// Panics if `pos >= width`, like slice indexing.
    pub fn bit(&self, pos: usize) -> bool {
        assert!(pos < self.width(), "bit position {pos} out of range");
        self.value_bit(self.width() - 1 - pos)
    }

    /// Returns a copy with the bit at `pos` set to `value`.
    pub fn with_bit(mut self, pos: usize, value: bool) -> Self {
        assert!(pos < self.width(), "bit position {pos} out of range");
        let j = self.width() - 1 - pos;
        if value {
            self.set_value_bit(j);
        } else {
            self.limbs[j / 64] &= !(1u64 << (j % 64));
        }
        self
    }

    /// Bits from position 0 onward.
    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.width()).map(move |p| self.bit(p))
    }

    /// The value as an integer when it fits in 64 bits.
    pub fn to_u64(&self) -> Option<u64> {
        if self.limbs[1..].iter().all(|&l| l == 0) {
            Some(self.limbs[0])
        } else {
            None
        }
    }

    pub fn count_ones(&self) -> usize {
        self.limbs.iter().map(|l| l.count_ones() as usize).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.limbs.iter().all(|&l| l == 0)
    }

    /// Bitwise complement within the width.
    pub fn not(&self) -> Self {
        let mut s = *self;
        for l in s.limbs.iter_mut() {
            *l = !*l;
        }
        s.clear_above_width();
        s
    }

    pub fn xor(&self, other: &Self) -> Result<Self> {
        same_width(self, other)?;
        let mut s = *self;
        for (a, b) in s.limbs.iter_mut().zip(other.limbs.iter()) {
            *a ^= b;
        }
        Ok(s)
    }

    pub fn hamming_distance(&self, other: &Self) -> Result<usize> {
        same_width(self, other)?;
        Ok(self
            .limbs
            .iter()
            .zip(other.limbs.iter())
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Removes the positions where `mask` is set, keeping the survivors in
    /// their original order. The result is `mask.weight()` bits shorter.
    pub fn erase(&self, mask: &Mask) -> Result<Self> {
        same_width(self, &mask.inner)?;
        let mut out = Self::zeros(self.width() - mask.weight())?;
        let mut next = 0usize;
        // Walk kept bits from least significant upward; the output fills in
        // the same direction so relative order is unchanged.
        for limb in 0..LIMBS {
            let valid = limb_valid_mask(self.width(), limb);
            let mut keep = !mask.inner.limbs[limb] & valid;
            while keep != 0 {
                // Copy one run of consecutive kept bits at a time.
                let start = keep.trailing_zeros() as usize;
                let len = (!(keep >> start)).trailing_zeros() as usize;
                let run = if len == 64 { u64::MAX } else { (1u64 << len) - 1 };
                out.or_value_bits(next, (self.limbs[limb] >> start) & run, len);
                next += len;
                keep &= !(run << start);
            }
        }
        Ok(out)
    }

    /// `self ‖ low`: `self` occupies the leading positions.
    pub fn concat(&self, low: &Self) -> Result<Self> {
        let width = self.width() + low.width();
        check_width(width)?;
        let mut out = Self::zeros(width)?;
        out.limbs = shl(&self.limbs, low.width());
        for (a, b) in out.limbs.iter_mut().zip(low.limbs.iter()) {
            *a |= b;
        }
        Ok(out)
    }

    /// The trailing (least significant) `n` bits.
    pub fn low_bits(&self, n: usize) -> Result<Self> {
        if n > self.width() {
            return Err(Error::WidthMismatch {
                expected: n,
                found: self.width(),
            });
        }
        let mut out = *self;
        out.width = n as u16;
        out.clear_above_width();
        Ok(out)
    }

    /// The leading `n` bits.
    pub fn high_bits(&self, n: usize) -> Result<Self> {
        if n > self.width() {
            return Err(Error::WidthMismatch {
                expected: n,
                found: self.width(),
            });
        }
        let mut out = Self::zeros(n)?;
        out.limbs = shr(&self.limbs, self.width() - n);
        Ok(out)
    }

    fn value_bit(&self, j: usize) -> bool {
        self.limbs[j / 64] >> (j % 64) & 1 == 1
    }

    fn set_value_bit(&mut self, j: usize) {
        self.limbs[j / 64] |= 1u64 << (j % 64);
    }

    /// ORs the low `len` bits of `v` in at value-bit offset `j`.
    fn or_value_bits(&mut self, j: usize, v: u64, len: usize) {
        let (limb, off) = (j / 64, j % 64);
        self.limbs[limb] |= v << off;
        if off != 0 && off + len > 64 {
            self.limbs[limb + 1] |= v >> (64 - off);
        }
    }

    fn clear_above_width(&mut self) {
        let w = self.width();
        for (i, l) in self.limbs.iter_mut().enumerate() {
            *l &= limb_valid_mask(w, i);
        }
    }
}

fn limb_valid_mask(width: usize, limb: usize) -> u64 {
    let lo = limb * 64;
    if width >= lo + 64 {
        u64::MAX
    } else if width <= lo {
        0
    } else {
        (1u64 << (width - lo)) - 1
    }
}

fn shl(limbs: &[u64; LIMBS], s: usize) -> [u64; LIMBS] {
    let mut out = [0u64; LIMBS];
    let (words, bits) = (s / 64, s % 64);
    for i in (words..LIMBS).rev() {
        let src = i - words;
        out[i] = limbs[src] << bits;
        if bits > 0 && src > 0 {
            out[i] |= limbs[src - 1] >> (64 - bits);
        }
    }
    out
}

fn shr(limbs: &[u64; LIMBS], s: usize) -> [u64; LIMBS] {
    let mut out = [0u64; LIMBS];
    let (words, bits) = (s / 64, s % 64);
    for i in 0..LIMBS.saturating_sub(words) {
        let src = i + words;
        out[i] = limbs[src] >> bits;
        if bits > 0 && src + 1 < LIMBS {
            out[i] |= limbs[src + 1] << (64 - bits);
        }
    }
    out
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.bits() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(Error::Parse(s.to_owned())),
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_bits(bits)
    }
}

/// A bit string tagged with its Hamming weight `K`. Set bits mark the
/// positions an erasure removes or an error flips.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Mask {
    inner: BitString,
    weight: u16,
}

impl Mask {
    pub fn new(inner: BitString) -> Self {
        Self {
            weight: inner.count_ones() as u16,
            inner,
        }
    }

    pub fn zeros(width: usize) -> Result<Self> {
        Ok(Self::new(BitString::zeros(width)?))
    }

    pub fn from_positions(width: usize, positions: &[usize]) -> Result<Self> {
        let mut inner = BitString::zeros(width)?;
        for &p in positions {
            if p >= width {
                return Err(Error::InvalidArgument(format!(
                    "mask position {p} out of range for width {width}"
                )));
            }
            inner = inner.with_bit(p, true);
        }
        Ok(Self::new(inner))
    }

    pub fn bits(&self) -> &BitString {
        &self.inner
    }

    pub fn weight(&self) -> usize {
        self.weight as usize
    }

    pub fn width(&self) -> usize {
        self.inner.width()
    }

    /// Positions of set bits, ascending.
    pub fn positions(&self) -> Vec<usize> {
        (0..self.width()).filter(|&p| self.inner.bit(p)).collect()
    }
}

/// Exclusive-or of two equal-width strings.
pub fn xor_bits(a: &BitString, b: &BitString) -> Result<BitString> {
    a.xor(b)
}

/// Drops the bits of `x` at the positions set in `mask`.
pub fn erase_bits(x: &BitString, mask: &Mask) -> Result<BitString> {
    x.erase(mask)
}

pub fn hamming_distance(a: &BitString, b: &BitString) -> Result<usize> {
    a.hamming_distance(b)
}

/// Draws a mask uniformly from the `C(width, k)` masks of weight `k`.
///
/// Partial Fisher–Yates over the position list: the first `k` slots after
/// `k` swap steps form a uniform `k`-subset.
pub fn random_weight_mask<R: Rng + ?Sized>(width: usize, k: usize, rng: &mut R) -> Result<Mask> {
    check_width(width)?;
    if k > width {
        return Err(Error::WeightOutOfRange { width, k });
    }
    let mut positions: Vec<usize> = (0..width).collect();
    for i in 0..k {
        let j = rng.random_range(i..width);
        positions.swap(i, j);
    }
    Mask::from_positions(width, &positions[..k])
}

/// Every weight-`k` mask of the given width, in increasing numeric order.
/// Limited to widths below 64 (exhaustive use only).
pub fn weight_masks(width: usize, k: usize) -> Result<impl Iterator<Item = Mask>> {
    if width >= 64 {
        return Err(Error::ExhaustiveCap {
            what: "mask enumeration width",
            value: width,
            cap: 63,
        });
    }
    if k > width {
        return Err(Error::WeightOutOfRange { width, k });
    }
    let limit = 1u64 << width;
    let first = if k == 0 { 0 } else { (1u64 << k) - 1 };
    let mut next = Some(first);
    Ok(std::iter::from_fn(move || {
        let cur = next?;
        // Gosper's hack: next integer with the same popcount.
        next = if cur == 0 {
            None
        } else {
            let c = cur & cur.wrapping_neg();
            let r = cur + c;
            let n = (((r ^ cur) >> 2) / c) | r;
            (n < limit).then_some(n)
        };
        Some(Mask::new(
            BitString::from_u64(cur, width).expect("mask fits its width"),
        ))
    }))
}
