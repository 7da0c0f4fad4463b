//! The covert transmitter/receiver pair: codebooks, the receiver's
//! estimator, and the countermeasures each scheme invites (preimage tables,
//! retransmission, distance codes).

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytics::binomial_exact;
use crate::bitcore::BitString;
use crate::error::{Error, Result};
use crate::schemes::{Hint, ObfuscatedBroadcast, Scheme, Variant};

/// Greedy distance-code construction gives up after this many draws.
pub const MIN_DISTANCE_BUDGET: u64 = 1_000_000;
/// Largest codebook stored word by word.
pub const EXPLICIT_MAX_M_BITS: usize = 20;
/// Largest complete codebook the estimator will enumerate.
pub const ENUMERABLE_MAX_M_BITS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Structure {
    Random,
    /// Pairwise Hamming distance at least `d`.
    MinDistance(usize),
    /// Low `tag_bits` carry a checksum of the payload bits.
    Tagged(usize),
}

impl fmt::Display for Structure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Structure::Random => f.write_str("random"),
            Structure::MinDistance(d) => write!(f, "min-distance:{d}"),
            Structure::Tagged(t) => write!(f, "tagged:{t}"),
        }
    }
}

impl FromStr for Structure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown codebook structure `{s}`"));
        match s.split_once(':') {
            None if s == "random" => Ok(Structure::Random),
            Some(("min-distance", d)) => Ok(Structure::MinDistance(d.parse().map_err(|_| bad())?)),
            Some(("tagged", t)) => Ok(Structure::Tagged(t.parse().map_err(|_| bad())?)),
            _ => Err(bad()),
        }
    }
}

/// Checksum: sum of the payload's 4-bit groups (from position 0; a short
/// final group counts as its own value) modulo `2^tag_bits`.
pub fn integrity_tag(payload: &BitString, tag_bits: usize) -> Result<BitString> {
    let mut sum: u64 = 0;
    let mut nibble = 0u64;
    for (p, b) in payload.bits().enumerate() {
        nibble = nibble << 1 | b as u64;
        if p % 4 == 3 || p + 1 == payload.width() {
            sum += nibble;
            nibble = 0;
        }
    }
    let modulus = if tag_bits >= 64 { u64::MAX } else { (1u64 << tag_bits) - 1 };
    BitString::from_u64(sum & modulus, tag_bits)
}

/// Whether the low `tag_bits` of `word` equal the checksum of the rest.
pub fn has_valid_tag(word: &BitString, tag_bits: usize) -> bool {
    if tag_bits == 0 || tag_bits >= word.width() {
        return false;
    }
    let (Ok(payload), Ok(tag)) = (
        word.high_bits(word.width() - tag_bits),
        word.low_bits(tag_bits),
    ) else {
        return false;
    };
    integrity_tag(&payload, tag_bits).is_ok_and(|t| t == tag)
}

#[derive(Debug, Clone)]
enum Words {
    Explicit {
        words: Vec<BitString>,
        index: HashMap<BitString, u64>,
    },
    /// Every admissible word is a codeword: all `N`-bit strings (Random) or
    /// every tag-valid string (Tagged). Symbols map to words directly.
    Complete,
}

/// The transmitter's message set `M` of `2^m` distinct `n`-bit words.
#[derive(Debug, Clone)]
pub struct Codebook {
    n_bits: usize,
    m_bits: usize,
    structure: Structure,
    words: Words,
}

impl Codebook {
    /// Builds a codebook of `2^m` words.
    ///
    /// `m` equal to the structure's capacity (`n` for Random, `n - tag_bits`
    /// for Tagged) yields the complete code without materialising it.
    pub fn build<R: Rng + ?Sized>(
        n: usize,
        m: usize,
        structure: Structure,
        rng: &mut R,
    ) -> Result<Self> {
        if n == 0 || n > crate::bitcore::MAX_WIDTH {
            return Err(Error::InvalidArgument(format!("codeword width {n} not in 1..=256")));
        }
        let capacity = match structure {
            Structure::Random | Structure::MinDistance(_) => n,
            Structure::Tagged(t) => {
                if t == 0 || t >= n || t > 64 {
                    return Err(Error::InvalidArgument(format!(
                        "tag width {t} must be in 1..min(n, 65)"
                    )));
                }
                n - t
            }
        };
        if m > capacity {
            return Err(Error::InvalidArgument(format!(
                "2^{m} codewords exceed the {capacity}-bit capacity"
            )));
        }
        let complete = m == capacity && !matches!(structure, Structure::MinDistance(d) if d > 1);
        if complete {
            if capacity > 63 {
                return Err(Error::InvalidArgument(format!(
                    "complete codebook over {capacity} bits is not indexable"
                )));
            }
            return Ok(Self {
                n_bits: n,
                m_bits: m,
                structure,
                words: Words::Complete,
            });
        }
        if m > EXPLICIT_MAX_M_BITS {
            return Err(Error::Infeasible(format!(
                "explicit codebooks hold at most 2^{EXPLICIT_MAX_M_BITS} words"
            )));
        }
        let target = 1usize << m;
        let words = match structure {
            Structure::Random => distinct_random(n, target, rng)?,
            Structure::Tagged(t) => distinct_random(n - t, target, rng)?
                .into_iter()
                .map(|p| p.concat(&integrity_tag(&p, t)?))
                .collect::<Result<Vec<_>>>()?,
            Structure::MinDistance(d) => greedy_min_distance(n, target, d, rng)?,
        };
        Ok(Self::from_words(n, m, structure, words))
    }

    fn from_words(n: usize, m: usize, structure: Structure, words: Vec<BitString>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (*w, i as u64)).collect();
        Self {
            n_bits: n,
            m_bits: m,
            structure,
            words: Words::Explicit { words, index },
        }
    }

    pub fn n_bits(&self) -> usize {
        self.n_bits
    }

    pub fn m_bits(&self) -> usize {
        self.m_bits
    }

    pub fn structure(&self) -> Structure {
        self.structure
    }

    pub fn len(&self) -> u64 {
        1u64 << self.m_bits
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_complete(&self) -> bool {
        matches!(self.words, Words::Complete)
    }

    /// Stored words, for explicit books.
    pub fn words(&self) -> Option<&[BitString]> {
        match &self.words {
            Words::Explicit { words, .. } => Some(words),
            Words::Complete => None,
        }
    }

    /// All words, materialising complete books up to
    /// `2^ENUMERABLE_MAX_M_BITS` entries.
    pub fn enumerate(&self) -> Result<Vec<BitString>> {
        match &self.words {
            Words::Explicit { words, .. } => Ok(words.clone()),
            Words::Complete if self.m_bits <= ENUMERABLE_MAX_M_BITS => {
                (0..self.len()).map(|s| self.word(s)).collect()
            }
            Words::Complete => Err(Error::Infeasible(format!(
                "complete codebook of 2^{} words is too large to enumerate",
                self.m_bits
            ))),
        }
    }

    /// The codeword carrying `symbol`.
    pub fn word(&self, symbol: u64) -> Result<BitString> {
        if symbol >= self.len() {
            return Err(Error::InvalidArgument(format!(
                "symbol {symbol} outside 2^{} codebook",
                self.m_bits
            )));
        }
        match (&self.words, self.structure) {
            (Words::Explicit { words, .. }, _) => Ok(words[symbol as usize]),
            (Words::Complete, Structure::Tagged(t)) => {
                let p = BitString::from_u64(symbol, self.n_bits - t)?;
                p.concat(&integrity_tag(&p, t)?)
            }
            (Words::Complete, _) => BitString::from_u64(symbol, self.n_bits),
        }
    }

    /// The symbol `word` carries, if it is a codeword.
    pub fn symbol_of(&self, word: &BitString) -> Option<u64> {
        if word.width() != self.n_bits {
            return None;
        }
        match (&self.words, self.structure) {
            (Words::Explicit { index, .. }, _) => index.get(word).copied(),
            (Words::Complete, Structure::Tagged(t)) => has_valid_tag(word, t)
                .then(|| word.high_bits(self.n_bits - t).ok()?.to_u64())
                .flatten(),
            (Words::Complete, _) => word.to_u64(),
        }
    }

    pub fn contains(&self, word: &BitString) -> bool {
        self.symbol_of(word).is_some()
    }

    /// Smallest pairwise Hamming distance (explicit books only).
    pub fn min_pairwise_distance(&self) -> Option<usize> {
        let words = self.words()?;
        let mut best = None;
        for (i, a) in words.iter().enumerate() {
            for b in &words[i + 1..] {
                let d = a.hamming_distance(b).ok()?;
                best = Some(best.map_or(d, |x: usize| x.min(d)));
            }
        }
        best
    }

    /// Exchange format: a header line, then one codeword per line
    /// (omitted for complete books).
    pub fn to_text(&self) -> String {
        let mut out = format!("n={} m={} structure={}\n", self.n_bits, self.m_bits, self.structure);
        if let Some(words) = self.words() {
            for w in words {
                out.push_str(&w.to_string());
                out.push('\n');
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines.next().ok_or_else(|| Error::Malformed("empty codebook file".into()))?;
        let mut n = None;
        let mut m = None;
        let mut structure = None;
        for field in header.split_whitespace() {
            match field.split_once('=') {
                Some(("n", v)) => n = v.parse::<usize>().ok(),
                Some(("m", v)) => m = v.parse::<usize>().ok(),
                Some(("structure", v)) => structure = Some(v.parse::<Structure>()?),
                _ => return Err(Error::Malformed(format!("bad header field `{field}`"))),
            }
        }
        let (Some(n), Some(m), Some(structure)) = (n, m, structure) else {
            return Err(Error::Malformed("header needs n, m and structure".into()));
        };
        let words = lines.map(BitString::from_str).collect::<Result<Vec<_>>>()?;
        let capacity = match structure {
            Structure::Tagged(t) => n.saturating_sub(t),
            _ => n,
        };
        if words.is_empty() && m == capacity && !matches!(structure, Structure::MinDistance(d) if d > 1) {
            return Ok(Self {
                n_bits: n,
                m_bits: m,
                structure,
                words: Words::Complete,
            });
        }
        if m > EXPLICIT_MAX_M_BITS || words.len() != 1usize << m {
            return Err(Error::Malformed(format!(
                "expected 2^{m} codewords, found {}",
                words.len()
            )));
        }
        let distinct: HashSet<_> = words.iter().collect();
        if words.iter().any(|w| w.width() != n) || distinct.len() != words.len() {
            return Err(Error::Malformed("codewords must be distinct and n bits wide".into()));
        }
        Ok(Self::from_words(n, m, structure, words))
    }
}

fn distinct_random<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Vec<BitString>> {
    if n <= 24 && count * 2 > 1usize << n {
        // Dense: shuffle the whole space and keep a prefix.
        let mut all: Vec<u64> = (0..1u64 << n).collect();
        let (chosen, _) = all.partial_shuffle(rng, count);
        return chosen.iter().map(|&v| BitString::from_u64(v, n)).collect();
    }
    let mut seen = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let w = random_word(n, rng)?;
        if seen.insert(w) {
            out.push(w);
        }
    }
    Ok(out)
}

/// Uniform `n`-bit string.
pub fn random_word<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<BitString> {
    let mut bytes = vec![0u8; n.div_ceil(8)];
    rng.fill_bytes(&mut bytes);
    BitString::from_bytes(&bytes, n)
}

fn greedy_min_distance<R: Rng + ?Sized>(
    n: usize,
    count: usize,
    d: usize,
    rng: &mut R,
) -> Result<Vec<BitString>> {
    let mut out: Vec<BitString> = Vec::with_capacity(count);
    let mut draws = 0u64;
    while out.len() < count {
        if draws == MIN_DISTANCE_BUDGET {
            return Err(Error::BudgetExhausted {
                budget: MIN_DISTANCE_BUDGET,
                accepted: out.len(),
            });
        }
        draws += 1;
        let c = random_word(n, rng)?;
        if out.iter().all(|w| w.hamming_distance(&c).is_ok_and(|h| h >= d.max(1))) {
            out.push(c);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeResult {
    Decoded(BitString),
    Ambiguous,
    NoMatch,
}

/// The receiver's estimate `E(Y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeOutcome {
    pub result: DecodeResult,
    pub candidates_considered: u64,
}

impl DecodeOutcome {
    fn from_matches(matches: &[BitString], considered: u64) -> Self {
        let result = match matches {
            [] => DecodeResult::NoMatch,
            [w] => DecodeResult::Decoded(*w),
            _ => DecodeResult::Ambiguous,
        };
        Self {
            result,
            candidates_considered: considered,
        }
    }
}

fn check_book(book: &Codebook, scheme: &Scheme, y: &ObfuscatedBroadcast) -> Result<()> {
    let cfg = scheme.config();
    if y.variant != cfg.variant {
        return Err(Error::SchemeMismatch {
            expected: cfg.variant.to_string(),
            found: y.variant.to_string(),
        });
    }
    if book.n_bits != cfg.n_bits {
        return Err(Error::WidthMismatch {
            expected: cfg.n_bits,
            found: book.n_bits,
        });
    }
    Ok(())
}

/// Decodes one broadcast against the codebook: the unique codeword
/// consistent with `y`, if any. For ELISHA every codeword is re-hashed with
/// the broadcast salt, which is the best a receiver can do without control
/// over the digests.
pub fn estimate(y: &ObfuscatedBroadcast, book: &Codebook, scheme: &Scheme) -> Result<DecodeOutcome> {
    Ok(observe(y, book, scheme)?.outcome)
}

/// What the receiver learns from one broadcast.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Observation {
    pub outcome: DecodeOutcome,
    /// The realised symbol map of this attempt is not injective: two or
    /// more codewords produce the same payload under this broadcast's hint.
    pub aliased: bool,
}

/// Decodes `y` and checks whether this attempt's hint collapses the
/// codebook.
///
/// For K-errors the mask is never revealed, so collapse is judged on the
/// received payload alone (an ambiguous decode).
pub fn observe(y: &ObfuscatedBroadcast, book: &Codebook, scheme: &Scheme) -> Result<Observation> {
    check_book(book, scheme, y)?;
    if scheme.config().variant == Variant::Plain {
        let matches: Vec<BitString> = book.symbol_of(&y.payload).map(|_| y.payload).into_iter().collect();
        return Ok(Observation {
            outcome: DecodeOutcome::from_matches(&matches, 1),
            aliased: false,
        });
    }
    let words = book.enumerate()?;
    let considered = words.len() as u64;
    if let Hint::Errors { k } = y.hint {
        let mut matches = Vec::new();
        for w in &words {
            if w.hamming_distance(&y.payload)? == k {
                matches.push(*w);
            }
        }
        let outcome = DecodeOutcome::from_matches(&matches, considered);
        let aliased = outcome.result == DecodeResult::Ambiguous;
        return Ok(Observation { outcome, aliased });
    }
    let proj = scheme.projector(&y.hint)?;
    let mut images = Vec::with_capacity(words.len());
    let mut matches = Vec::new();
    for w in &words {
        let img = proj.apply(w)?;
        if img == y.payload {
            matches.push(*w);
        }
        images.push(img);
    }
    images.sort_unstable();
    let aliased = images.windows(2).any(|p| p[0] == p[1]);
    Ok(Observation {
        outcome: DecodeOutcome::from_matches(&matches, considered),
        aliased,
    })
}

/// Digest → codeword map for unsalted, unmasked ELISHA.
#[derive(Debug, Clone)]
pub struct PreimageTable {
    /// `None` marks a digest shared by two codewords.
    entries: HashMap<BitString, Option<BitString>>,
}

impl PreimageTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn lookup(&self, y: &ObfuscatedBroadcast) -> DecodeOutcome {
        let result = match self.entries.get(&y.payload) {
            Some(Some(w)) => DecodeResult::Decoded(*w),
            Some(None) => DecodeResult::Ambiguous,
            None => DecodeResult::NoMatch,
        };
        DecodeOutcome {
            result,
            candidates_considered: 1,
        }
    }
}

#[derive(Debug, Clone)]
pub enum PreimageOutcome {
    Table(PreimageTable),
    /// Salting makes the table per-salt: `2^salt_bits` digests per codeword.
    Infeasible {
        salt_bits: usize,
        log2_cost_per_codeword: usize,
        log2_total_cost: usize,
    },
}

/// Precomputes the receiver's preimage table, or reports what salting
/// would make it cost.
pub fn preimage_attack(book: &Codebook, scheme: &Scheme) -> Result<PreimageOutcome> {
    let cfg = scheme.config();
    if cfg.variant != Variant::Elisha {
        return Err(Error::InvalidConfig(format!(
            "preimage tables target elisha, not {}",
            cfg.variant
        )));
    }
    if book.n_bits != cfg.n_bits {
        return Err(Error::WidthMismatch {
            expected: cfg.n_bits,
            found: book.n_bits,
        });
    }
    if cfg.salt_bits > 0 {
        return Ok(PreimageOutcome::Infeasible {
            salt_bits: cfg.salt_bits,
            log2_cost_per_codeword: cfg.salt_bits,
            log2_total_cost: cfg.salt_bits + book.m_bits,
        });
    }
    if cfg.k > 0 {
        return Err(Error::InvalidConfig(format!(
            "k = {} random erasures still disrupt a fixed table; attack needs k = 0",
            cfg.k
        )));
    }
    let keyed = scheme.keyed(&BitString::zeros(0)?)?;
    let mut entries: HashMap<BitString, Option<BitString>> = HashMap::new();
    for w in book.enumerate()? {
        entries
            .entry(keyed.apply(&w)?)
            .and_modify(|e| *e = None)
            .or_insert(Some(w));
    }
    Ok(PreimageOutcome::Table(PreimageTable { entries }))
}

/// Sends the same word `repeats` times through independent K-erasures
/// draws.
pub fn repetition_transmit<R: Rng + ?Sized>(
    word: &BitString,
    repeats: usize,
    scheme: &Scheme,
    rng: &mut R,
) -> Result<Vec<ObfuscatedBroadcast>> {
    if scheme.config().variant != Variant::KErasures {
        return Err(Error::InvalidConfig("repetition targets k-erasures".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidArgument("repeats must be positive".into()));
    }
    (0..repeats).map(|_| scheme.obfuscate(word, rng)).collect()
}

/// Merges repeated K-erasures broadcasts: each position is known once any
/// repeat left it unerased.
pub fn combine_erasures(broadcasts: &[ObfuscatedBroadcast], n_bits: usize) -> Result<Vec<Option<bool>>> {
    let mut known = vec![None; n_bits];
    for y in broadcasts {
        let Hint::Erasures { mask } = &y.hint else {
            return Err(Error::InvalidArgument("not a k-erasures broadcast".into()));
        };
        if mask.width() != n_bits {
            return Err(Error::WidthMismatch {
                expected: n_bits,
                found: mask.width(),
            });
        }
        let mut survivors = y.payload.bits();
        for (p, slot) in known.iter_mut().enumerate() {
            if !mask.bits().bit(p) {
                let b = survivors
                    .next()
                    .ok_or_else(|| Error::Malformed("payload shorter than mask implies".into()))?;
                *slot = Some(b);
            }
        }
    }
    Ok(known)
}

/// The full word, if the repeats jointly cover every position.
pub fn reconstruct(broadcasts: &[ObfuscatedBroadcast], n_bits: usize) -> Result<Option<BitString>> {
    let known = combine_erasures(broadcasts, n_bits)?;
    known
        .into_iter()
        .collect::<Option<Vec<bool>>>()
        .map(BitString::from_bits)
        .transpose()
}

/// Exact probability that `repeats` independent weight-`k` masks over `n`
/// positions leave no position erased every time (inclusion–exclusion over
/// the always-erased set).
pub fn repetition_recovery_exact(n: usize, k: usize, repeats: u32) -> f64 {
    let total = binomial_exact(n, k).expect("n <= 128") as f64;
    (0..=k)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let c_nj = binomial_exact(n, j).expect("n <= 128") as f64;
            let frac = binomial_exact(n - j, k - j).expect("n <= 128") as f64 / total;
            sign * c_nj * frac.powi(repeats as i32)
        })
        .sum::<f64>()
        .clamp(0.0, 1.0)
}

/// Approximation treating positions as independently erased with rate
/// `k / n`.
pub fn repetition_recovery_independent(n: usize, k: usize, repeats: u32) -> f64 {
    (1.0 - (k as f64 / n as f64).powi(repeats as i32)).powi(n as i32)
}

/// Per-attempt outcome counts from [`measure_disruption`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionReport {
    pub trials: u64,
    pub success: u64,
    /// Attempts whose realised symbol map collapsed, plus ambiguous decodes.
    pub ambiguous: u64,
    pub no_match: u64,
    pub misdecoded: u64,
    pub success_rate: f64,
    pub ambiguous_rate: f64,
    pub no_match_rate: f64,
}

/// Sends uniformly chosen codewords through the scheme and tallies how the
/// receiver fares.
///
/// An attempt counts as delivered only when the realised symbol map is
/// injective and the sent word decodes uniquely; a collapsed map is
/// disruption even if the sent word happened to stay distinguishable,
/// because the receiver cannot rely on any symbol of that attempt.
pub fn measure_disruption<R: Rng + ?Sized>(
    book: &Codebook,
    scheme: &Scheme,
    trials: u64,
    rng: &mut R,
) -> Result<DisruptionReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let mut r = DisruptionReport {
        trials,
        success: 0,
        ambiguous: 0,
        no_match: 0,
        misdecoded: 0,
        success_rate: 0.0,
        ambiguous_rate: 0.0,
        no_match_rate: 0.0,
    };
    for _ in 0..trials {
        let sent = book.word(rng.random_range(0..book.len()))?;
        let y = scheme.obfuscate(&sent, rng)?;
        let obs = observe(&y, book, scheme)?;
        if obs.aliased {
            r.ambiguous += 1;
            continue;
        }
        match obs.outcome.result {
            DecodeResult::Decoded(w) if w == sent => r.success += 1,
            DecodeResult::Decoded(_) => r.misdecoded += 1,
            DecodeResult::Ambiguous => r.ambiguous += 1,
            DecodeResult::NoMatch => r.no_match += 1,
        }
    }
    let t = trials as f64;
    r.success_rate = r.success as f64 / t;
    r.ambiguous_rate = r.ambiguous as f64 / t;
    r.no_match_rate = r.no_match as f64 / t;
    Ok(r)
}
