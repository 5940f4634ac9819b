//! Difference operator, sign-magnitude encoding, XOR folding and symbol
//! packing.
//!
//! A counter trace becomes a symbol stream through
//! `pack(fold(delta(trace), alpha), 8)`:
//!
//! * `delta` takes successive differences in 65-bit signed arithmetic and
//!   stores each as sign (bit 63) plus magnitude modulo 2⁶³ (bits 0..63).
//!   Zero is always the all-zero word.
//! * `fold` XORs the `64 / alpha` consecutive `alpha`-bit fields of a word.
//! * `pack` concatenates the folded values MSB-first into 4- or 8-bit
//!   symbols. The first folded value lands in the most significant bits;
//!   a trailing partial symbol is dropped.

use crate::error::{Error, Result};
use crate::trace::CounterTrace;

pub const SIGN_BIT: u64 = 1 << 63;
const MAGNITUDE_MASK: u64 = SIGN_BIT - 1;

/// Fold widths used by the assessment pipeline.
pub const PIPELINE_ALPHAS: [Alpha; 4] = [Alpha(1), Alpha(2), Alpha(4), Alpha(8)];

/// Fold width in bits: one of 1, 2, 4, 8, 16, 32.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Alpha(u32);

impl Alpha {
    pub const ALL: [Alpha; 6] = [Alpha(1), Alpha(2), Alpha(4), Alpha(8), Alpha(16), Alpha(32)];

    pub fn new(bits: u32) -> Result<Self> {
        if matches!(bits, 1 | 2 | 4 | 8 | 16 | 32) {
            Ok(Self(bits))
        } else {
            Err(Error::InvalidAlpha(bits))
        }
    }

    pub fn bits(self) -> u32 {
        self.0
    }
}

impl std::fmt::Display for Alpha {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

/// Symbol grouping width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolWidth {
    Nibble,
    Byte,
}

impl SymbolWidth {
    pub fn bits(self) -> u32 {
        match self {
            SymbolWidth::Nibble => 4,
            SymbolWidth::Byte => 8,
        }
    }

    pub fn alphabet_size(self) -> usize {
        1 << self.bits()
    }
}

/// Successive differences of a trace in sign-magnitude encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeltaSequence {
    pub deltas: Vec<u64>,
    /// Differences whose magnitude did not fit in 63 bits.
    pub overflow_count: usize,
}

impl DeltaSequence {
    pub fn is_constant(&self) -> bool {
        self.deltas.windows(2).all(|w| w[0] == w[1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolStream {
    pub alpha: Alpha,
    pub symbol_width: SymbolWidth,
    pub symbols: Vec<u8>,
}

impl SymbolStream {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.symbols.windows(2).all(|w| w[0] == w[1])
    }
}

/// Sign-magnitude encodes a signed difference. Returns the word and whether
/// the magnitude was reduced modulo 2⁶³.
pub fn encode_sign_magnitude(diff: i128) -> (u64, bool) {
    let magnitude = diff.unsigned_abs();
    let overflow = magnitude > MAGNITUDE_MASK as u128;
    let low = (magnitude as u64) & MAGNITUDE_MASK;
    let word = if diff < 0 && low != 0 {
        SIGN_BIT | low
    } else {
        low
    };
    (word, overflow)
}

/// Inverse of [`encode_sign_magnitude`] for non-overflowed values.
pub fn decode_sign_magnitude(word: u64) -> i128 {
    let magnitude = (word & MAGNITUDE_MASK) as i128;
    if word & SIGN_BIT != 0 {
        -magnitude
    } else {
        magnitude
    }
}

pub fn delta(trace: &CounterTrace) -> Result<DeltaSequence> {
    trace.require_len(2)?;
    let mut overflow_count = 0;
    let deltas = trace
        .samples
        .windows(2)
        .map(|w| {
            let (word, overflow) = encode_sign_magnitude(w[1] as i128 - w[0] as i128);
            overflow_count += usize::from(overflow);
            word
        })
        .collect();
    Ok(DeltaSequence {
        deltas,
        overflow_count,
    })
}

/// XOR of the `64 / alpha` consecutive `alpha`-bit fields of `value`.
pub fn fold(value: u64, alpha: u32) -> Result<u64> {
    if alpha == 0 || alpha > 64 || 64 % alpha != 0 {
        return Err(Error::InvalidAlpha(alpha));
    }
    Ok(fold_unchecked(value, alpha))
}

#[inline]
fn fold_unchecked(value: u64, alpha: u32) -> u64 {
    // Halving preserves field alignment because alpha is a power of two.
    let mut acc = value;
    let mut width = 64;
    while width > alpha {
        width /= 2;
        acc = (acc >> width) ^ (acc & ((1u64 << width) - 1));
    }
    acc
}

/// Packs `alpha`-bit values MSB-first into symbols of `symbol_width` bits.
pub fn pack(folded: &[u64], alpha: Alpha, symbol_width: SymbolWidth) -> Result<SymbolStream> {
    let a = alpha.bits();
    let w = symbol_width.bits();
    if a < w && !w.is_multiple_of(a) {
        return Err(Error::InvalidWidth {
            alpha: a,
            symbol_width: w,
        });
    }
    let value_mask = if a == 64 { u64::MAX } else { (1u64 << a) - 1 };
    let count = folded.len() * a as usize / w as usize;
    let mut symbols = Vec::with_capacity(count);

    if a >= w {
        let per_value = a / w;
        for &v in folded {
            let v = v & value_mask;
            for k in (0..per_value).rev() {
                symbols.push(((v >> (k * w)) & ((1 << w) - 1)) as u8);
            }
        }
    } else {
        let per_symbol = (w / a) as usize;
        for chunk in folded.chunks_exact(per_symbol) {
            let sym = chunk
                .iter()
                .fold(0u64, |acc, &v| (acc << a) | (v & value_mask));
            symbols.push(sym as u8);
        }
    }
    debug_assert_eq!(symbols.len(), count);
    Ok(SymbolStream {
        alpha,
        symbol_width,
        symbols,
    })
}

/// Inverse of [`pack`] up to the discarded tail.
pub fn unpack(stream: &SymbolStream) -> Vec<u64> {
    let a = stream.alpha.bits();
    let w = stream.symbol_width.bits();
    if a >= w {
        let per_value = (a / w) as usize;
        stream
            .symbols
            .chunks_exact(per_value)
            .map(|chunk| chunk.iter().fold(0u64, |acc, &s| (acc << w) | s as u64))
            .collect()
    } else {
        let per_symbol = w / a;
        let mask = (1u64 << a) - 1;
        stream
            .symbols
            .iter()
            .flat_map(|&s| {
                (0..per_symbol)
                    .rev()
                    .map(move |k| (s as u64 >> (k * a)) & mask)
            })
            .collect()
    }
}

/// Splits each byte into two nibbles, high nibble first.
pub fn to_nibbles(stream: &SymbolStream) -> Result<SymbolStream> {
    if stream.symbol_width != SymbolWidth::Byte {
        return Err(Error::InvalidWidth {
            alpha: stream.alpha.bits(),
            symbol_width: stream.symbol_width.bits(),
        });
    }
    let symbols = stream
        .symbols
        .iter()
        .flat_map(|&b| [b >> 4, b & 0x0f])
        .collect();
    Ok(SymbolStream {
        alpha: stream.alpha,
        symbol_width: SymbolWidth::Nibble,
        symbols,
    })
}

/// Folds an already computed delta sequence and packs it into bytes.
pub fn fold_and_pack(deltas: &DeltaSequence, alpha: Alpha) -> SymbolStream {
    let folded: Vec<u64> = deltas
        .deltas
        .iter()
        .map(|&d| fold_unchecked(d, alpha.bits()))
        .collect();
    pack(&folded, alpha, SymbolWidth::Byte).expect("byte packing accepts every alpha")
}

/// `pack(fold(delta(trace), alpha), 8)`.
pub fn preprocess_counter(trace: &CounterTrace, alpha: Alpha) -> Result<SymbolStream> {
    Ok(fold_and_pack(&delta(trace)?, alpha))
}
