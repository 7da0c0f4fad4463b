//! Broadcast obfuscation `B(X)`, hint construction and the UE decision
//! function for the four contention-resolution variants.
//!
//! | variant    | payload          | hint              |
//! |------------|------------------|-------------------|
//! | Plain      | `X`              | none              |
//! | KErrors    | `X ⊕ e_K`        | `K`               |
//! | KErasures  | `X ⊘ e_K`        | `e_K` (N bits)    |
//! | Elisha     | `C(X, s) ⊘ e_K`  | `e_K` (L bits), s |
//!
//! A K-erasures Msg4 therefore occupies `(N − K) + N = 2N − K` bits on the
//! wire, as reported by [`ObfuscatedBroadcast::wire_bits`].

use std::collections::HashMap;
use std::fmt;
use std::sync::Mutex;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest as _, Sha256};

use crate::bitcore::{random_weight_mask, BitString, Mask};
use crate::error::{Error, Result};

/// Salt width used when a configuration does not say otherwise.
pub const DEFAULT_SALT_BITS: usize = 64;

/// Widest identity the keyed-permutation backend supports.
pub const MAX_PERMUTATION_BITS: usize = 64;

const FEISTEL_ROUNDS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Plain,
    KErrors,
    KErasures,
    Elisha,
}

impl Variant {
    pub const ALL: [Variant; 4] = [
        Variant::Plain,
        Variant::KErrors,
        Variant::KErasures,
        Variant::Elisha,
    ];

    /// Wire tag byte.
    pub fn tag(self) -> u8 {
        match self {
            Variant::Plain => 0,
            Variant::KErrors => 1,
            Variant::KErasures => 2,
            Variant::Elisha => 3,
        }
    }

    pub fn from_tag(tag: u8) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.tag() == tag)
            .ok_or_else(|| Error::Malformed(format!("unknown scheme tag {tag}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Plain => "plain",
            Variant::KErrors => "k-errors",
            Variant::KErasures => "k-erasures",
            Variant::Elisha => "elisha",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scheme `{s}`")))
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How `C(X, s)` is realised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DigestBackend {
    /// SHA-256 over `s ‖ X`, truncated to the low `L` bits.
    TruncatedCryptoHash,
    /// A bijection of the `N`-bit identity space keyed by the salt
    /// (`L == N`, so digests never collide).
    RandomPermutation,
    /// Lazily sampled uniform digests, memoised per `(X, s)`.
    RandomOracleStub,
}

impl DigestBackend {
    pub fn name(self) -> &'static str {
        match self {
            DigestBackend::TruncatedCryptoHash => "hash",
            DigestBackend::RandomPermutation => "permutation",
            DigestBackend::RandomOracleStub => "oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        [
            DigestBackend::TruncatedCryptoHash,
            DigestBackend::RandomPermutation,
            DigestBackend::RandomOracleStub,
        ]
        .into_iter()
        .find(|b| b.name() == s)
        .ok_or_else(|| Error::InvalidConfig(format!("unknown digest backend `{s}`")))
    }
}

/// Parameters of one obfuscation scheme instance.
///
/// `l_bits` and `salt_bits` only matter for [`Variant::Elisha`]; the
/// convenience constructors set them to `n_bits` and 0 otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub variant: Variant,
    pub n_bits: usize,
    pub l_bits: usize,
    pub k: usize,
    pub salt_bits: usize,
    pub digest_backend: DigestBackend,
}

impl SchemeConfig {
    pub fn plain(n_bits: usize) -> Self {
        Self::simple(Variant::Plain, n_bits, 0)
    }

    pub fn k_errors(n_bits: usize, k: usize) -> Self {
        Self::simple(Variant::KErrors, n_bits, k)
    }

    pub fn k_erasures(n_bits: usize, k: usize) -> Self {
        Self::simple(Variant::KErasures, n_bits, k)
    }

    pub fn elisha(
        n_bits: usize,
        l_bits: usize,
        k: usize,
        salt_bits: usize,
        digest_backend: DigestBackend,
    ) -> Self {
        Self {
            variant: Variant::Elisha,
            n_bits,
            l_bits,
            k,
            salt_bits,
            digest_backend,
        }
    }

    fn simple(variant: Variant, n_bits: usize, k: usize) -> Self {
        Self {
            variant,
            n_bits,
            l_bits: n_bits,
            k,
            salt_bits: 0,
            digest_backend: DigestBackend::TruncatedCryptoHash,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_bits == 0 || self.n_bits > crate::bitcore::MAX_WIDTH {
            return bad(format!("identity width {} not in 1..=256", self.n_bits));
        }
        match self.variant {
            Variant::Plain if self.k != 0 => bad(format!("plain scheme requires k = 0, got {}", self.k)),
            Variant::KErrors | Variant::KErasures if self.k > self.n_bits => {
                bad(format!("k = {} exceeds n = {}", self.k, self.n_bits))
            }
            Variant::Plain | Variant::KErrors | Variant::KErasures if self.salt_bits != 0 => {
                bad(format!("salt is only used by elisha, got salt_bits = {}", self.salt_bits))
            }
            Variant::Elisha => self.validate_elisha(),
            _ => Ok(()),
        }
    }

    fn validate_elisha(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.l_bits < self.n_bits || self.l_bits > crate::bitcore::MAX_WIDTH {
            return bad(format!(
                "digest width l = {} must satisfy n ({}) <= l <= 256",
                self.l_bits, self.n_bits
            ));
        }
        if self.k > self.l_bits {
            return bad(format!("k = {} exceeds l = {}", self.k, self.l_bits));
        }
        if self.salt_bits > crate::bitcore::MAX_WIDTH {
            return bad(format!("salt_bits = {} exceeds 256", self.salt_bits));
        }
        match self.digest_backend {
            DigestBackend::RandomPermutation => {
                if self.l_bits != self.n_bits {
                    return bad("permutation backend requires l = n".into());
                }
                if self.n_bits > MAX_PERMUTATION_BITS {
                    return bad(format!(
                        "permutation backend supports n <= {MAX_PERMUTATION_BITS}"
                    ));
                }
            }
            DigestBackend::TruncatedCryptoHash => {
                if self.l_bits > 256 {
                    return bad("hash output is 256 bits".into());
                }
                if self.salt_bits + self.n_bits > crate::bitcore::MAX_WIDTH {
                    return bad("salt and identity together exceed 256 bits".into());
                }
            }
            DigestBackend::RandomOracleStub => {}
        }
        Ok(())
    }

    /// Width of the string the mask applies to (`N`, or `L` for Elisha).
    pub fn mask_width(&self) -> usize {
        match self.variant {
            Variant::Plain => 0,
            Variant::KErrors | Variant::KErasures => self.n_bits,
            Variant::Elisha => self.l_bits,
        }
    }

    pub fn payload_width(&self) -> usize {
        match self.variant {
            Variant::Plain | Variant::KErrors => self.n_bits,
            Variant::KErasures => self.n_bits - self.k,
            Variant::Elisha => self.l_bits - self.k,
        }
    }

    fn salt_width(&self) -> usize {
        if self.variant == Variant::Elisha {
            self.salt_bits
        } else {
            0
        }
    }
}

/// Helper data broadcast next to the obfuscated payload.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Hint {
    None,
    Errors { k: usize },
    Erasures { mask: Mask },
    Elisha { mask: Mask, salt: BitString },
}

/// The Msg4 pair `Y = [B(X), h]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObfuscatedBroadcast {
    pub payload: BitString,
    pub hint: Hint,
    pub variant: Variant,
}

impl ObfuscatedBroadcast {
    /// Logical Msg4 size in bits: payload plus hint fields.
    pub fn wire_bits(&self) -> usize {
        self.payload.width()
            + match &self.hint {
                Hint::None => 0,
                Hint::Errors { .. } => 8,
                Hint::Erasures { mask } => mask.width(),
                Hint::Elisha { mask, salt } => mask.width() + salt.width(),
            }
    }

    /// Trace encoding: tag byte, big-endian u16 payload bit length, payload
    /// bytes, then hint fields (K as one byte; masks and salt as padded
    /// bitmaps).
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut out = vec![self.variant.tag()];
        out.extend_from_slice(&(self.payload.width() as u16).to_be_bytes());
        out.extend(self.payload.to_bytes());
        match &self.hint {
            Hint::None => {}
            Hint::Errors { k } => {
                let k = u8::try_from(*k)
                    .map_err(|_| Error::Malformed(format!("k = {k} does not fit one byte")))?;
                out.push(k);
            }
            Hint::Erasures { mask } => out.extend(mask.bits().to_bytes()),
            Hint::Elisha { mask, salt } => {
                out.extend(mask.bits().to_bytes());
                out.extend(salt.to_bytes());
            }
        }
        Ok(out)
    }

    /// Decodes a trace record. Mask and salt widths are not on the wire;
    /// they come from the cell configuration.
    pub fn from_bytes(bytes: &[u8], cfg: &SchemeConfig) -> Result<Self> {
        let short = || Error::Malformed("truncated broadcast".into());
        let (&tag, rest) = bytes.split_first().ok_or_else(short)?;
        let variant = Variant::from_tag(tag)?;
        if variant != cfg.variant {
            return Err(Error::SchemeMismatch {
                expected: cfg.variant.to_string(),
                found: variant.to_string(),
            });
        }
        if rest.len() < 2 {
            return Err(short());
        }
        let width = u16::from_be_bytes([rest[0], rest[1]]) as usize;
        let mut rest = &rest[2..];
        let mut take = |n_bits: usize| -> Result<BitString> {
            let n = n_bits.div_ceil(8);
            if rest.len() < n {
                return Err(short());
            }
            let (head, tail) = rest.split_at(n);
            rest = tail;
            BitString::from_bytes(head, n_bits)
        };
        let payload = take(width)?;
        let hint = match variant {
            Variant::Plain => Hint::None,
            Variant::KErrors => Hint::Errors {
                k: take(8)?.to_u64().unwrap_or_default() as usize,
            },
            Variant::KErasures => Hint::Erasures {
                mask: Mask::new(take(cfg.mask_width())?),
            },
            Variant::Elisha => {
                let mask = Mask::new(take(cfg.mask_width())?);
                let salt = take(cfg.salt_bits)?;
                Hint::Elisha { mask, salt }
            }
        };
        if !rest.is_empty() {
            return Err(Error::Malformed(format!("{} trailing bytes", rest.len())));
        }
        Ok(Self {
            payload,
            hint,
            variant,
        })
    }
}

/// UE verdict after comparing Msg4 against its own Msg3 identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Decision {
    Proceed,
    BackOff,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Digest {
    pub value: BitString,
    pub backend: DigestBackend,
    pub salt: BitString,
}

/// Per-broadcast randomness: the mask (empty for Plain) and the salt
/// (empty unless salted Elisha).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Randomness {
    pub mask: Mask,
    pub salt: BitString,
}

struct OracleState {
    rng: ChaCha8Rng,
    table: HashMap<(BitString, BitString), BitString>,
}

/// Lazily sampled random function; the memo table is the only shared
/// mutable state in a [`Scheme`].
struct RandomOracle {
    state: Mutex<OracleState>,
    l_bits: usize,
}

impl RandomOracle {
    fn new(l_bits: usize, seed: u64) -> Self {
        Self {
            state: Mutex::new(OracleState {
                rng: ChaCha8Rng::seed_from_u64(seed),
                table: HashMap::new(),
            }),
            l_bits,
        }
    }

    fn query(&self, x: &BitString, salt: &BitString) -> BitString {
        let mut st = self.state.lock().expect("oracle lock poisoned");
        if let Some(v) = st.table.get(&(*x, *salt)) {
            return *v;
        }
        let mut bytes = [0u8; 32];
        st.rng.fill_bytes(&mut bytes);
        let v = BitString::from_bytes(&bytes, 256)
            .and_then(|b| b.low_bits(self.l_bits))
            .expect("l_bits validated <= 256");
        st.table.insert((*x, *salt), v);
        v
    }
}

/// A validated scheme, ready to obfuscate and decide.
pub struct Scheme {
    cfg: SchemeConfig,
    oracle: Option<RandomOracle>,
}

impl fmt::Debug for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Scheme").field("cfg", &self.cfg).finish()
    }
}

impl Scheme {
    pub fn new(cfg: SchemeConfig) -> Result<Self> {
        Self::with_oracle_seed(cfg, 0)
    }

    /// Like [`Scheme::new`], seeding the random-oracle backend's stream.
    pub fn with_oracle_seed(cfg: SchemeConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let oracle = (cfg.variant == Variant::Elisha
            && cfg.digest_backend == DigestBackend::RandomOracleStub)
            .then(|| RandomOracle::new(cfg.l_bits, seed));
        Ok(Self { cfg, oracle })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.cfg
    }

    /// `C(x, s)` under the configured backend.
    pub fn digest(&self, x: &BitString, salt: &BitString) -> Result<Digest> {
        let value = self.keyed(salt)?.apply(x)?;
        Ok(Digest {
            value,
            backend: self.cfg.digest_backend,
            salt: *salt,
        })
    }

    /// Binds the digest to one salt so that many identities can be hashed
    /// without re-deriving key material.
    pub fn keyed(&self, salt: &BitString) -> Result<KeyedDigest<'_>> {
        if self.cfg.variant != Variant::Elisha {
            return Err(Error::InvalidConfig(format!(
                "{} scheme has no digest",
                self.cfg.variant
            )));
        }
        expect_width(salt, self.cfg.salt_bits)?;
        let inner = match self.cfg.digest_backend {
            DigestBackend::TruncatedCryptoHash => KeyedInner::Hash,
            DigestBackend::RandomPermutation => {
                KeyedInner::Permutation(Feistel::derive(self.cfg.n_bits, salt))
            }
            DigestBackend::RandomOracleStub => {
                KeyedInner::Oracle(self.oracle.as_ref().expect("oracle built for backend"))
            }
        };
        Ok(KeyedDigest {
            cfg: self.cfg,
            salt: *salt,
            inner,
        })
    }

    /// Fresh mask and salt from the caller's stream.
    pub fn draw_randomness<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Randomness> {
        let mask = random_weight_mask(self.cfg.mask_width(), self.cfg.k, rng)?;
        let salt_w = self.cfg.salt_width();
        let mut bytes = vec![0u8; salt_w.div_ceil(8)];
        rng.fill_bytes(&mut bytes);
        let salt = BitString::from_bytes(&bytes, salt_w)?;
        Ok(Randomness { mask, salt })
    }

    /// `Y = [B(x), h]` with freshly drawn randomness.
    pub fn obfuscate<R: Rng + ?Sized>(
        &self,
        x: &BitString,
        rng: &mut R,
    ) -> Result<ObfuscatedBroadcast> {
        let r = self.draw_randomness(rng)?;
        self.obfuscate_with(x, &r)
    }

    /// Deterministic obfuscation with caller-supplied randomness; used by the
    /// exhaustive analyses.
    pub fn obfuscate_with(&self, x: &BitString, r: &Randomness) -> Result<ObfuscatedBroadcast> {
        expect_width(x, self.cfg.n_bits)?;
        expect_width(r.mask.bits(), self.cfg.mask_width())?;
        if r.mask.weight() != self.cfg.k {
            return Err(Error::InvalidArgument(format!(
                "mask weight {} differs from k = {}",
                r.mask.weight(),
                self.cfg.k
            )));
        }
        let (payload, hint) = match self.cfg.variant {
            Variant::Plain => (*x, Hint::None),
            Variant::KErrors => (x.xor(r.mask.bits())?, Hint::Errors { k: self.cfg.k }),
            Variant::KErasures => (x.erase(&r.mask)?, Hint::Erasures { mask: r.mask }),
            Variant::Elisha => {
                let d = self.keyed(&r.salt)?.apply(x)?;
                (
                    d.erase(&r.mask)?,
                    Hint::Elisha {
                        mask: r.mask,
                        salt: r.salt,
                    },
                )
            }
        };
        Ok(ObfuscatedBroadcast {
            payload,
            hint,
            variant: self.cfg.variant,
        })
    }

    /// Evaluates `B(·)` for the hint of an equality-tested broadcast
    /// (every variant except K-errors, whose mask is never revealed).
    pub fn projector<'a>(&'a self, hint: &'a Hint) -> Result<Projector<'a>> {
        let kind = match (self.cfg.variant, hint) {
            (Variant::Plain, Hint::None) => ProjectorKind::Identity,
            (Variant::KErasures, Hint::Erasures { mask }) => {
                expect_width(mask.bits(), self.cfg.n_bits)?;
                ProjectorKind::Erase(mask)
            }
            (Variant::Elisha, Hint::Elisha { mask, salt }) => {
                expect_width(mask.bits(), self.cfg.l_bits)?;
                ProjectorKind::DigestErase(self.keyed(salt)?, mask)
            }
            (Variant::KErrors, _) => {
                return Err(Error::InvalidArgument(
                    "k-errors broadcasts are tested by distance, not by projection".into(),
                ))
            }
            (v, h) => {
                return Err(Error::Malformed(format!("hint {h:?} does not fit scheme {v}")))
            }
        };
        Ok(Projector {
            n_bits: self.cfg.n_bits,
            kind,
        })
    }

    /// The contention-resolution decision `D(Y, X_i)`.
    pub fn decide(&self, y: &ObfuscatedBroadcast, x_i: &BitString) -> Result<Decision> {
        if y.variant != self.cfg.variant {
            return Err(Error::SchemeMismatch {
                expected: self.cfg.variant.to_string(),
                found: y.variant.to_string(),
            });
        }
        expect_width(x_i, self.cfg.n_bits)?;
        expect_width(&y.payload, self.cfg.payload_width())?;
        let proceed = match (&y.hint, self.cfg.variant) {
            (Hint::Errors { k }, Variant::KErrors) => y.payload.hamming_distance(x_i)? == *k,
            (hint, _) => self.projector(hint)?.apply(x_i)? == y.payload,
        };
        Ok(if proceed {
            Decision::Proceed
        } else {
            Decision::BackOff
        })
    }
}

fn expect_width(x: &BitString, width: usize) -> Result<()> {
    if x.width() != width {
        Err(Error::WidthMismatch {
            expected: width,
            found: x.width(),
        })
    } else {
        Ok(())
    }
}

enum KeyedInner<'a> {
    Hash,
    Permutation(Feistel),
    Oracle(&'a RandomOracle),
}

/// `C(·, s)` for a fixed salt `s`.
pub struct KeyedDigest<'a> {
    cfg: SchemeConfig,
    salt: BitString,
    inner: KeyedInner<'a>,
}

impl KeyedDigest<'_> {
    pub fn apply(&self, x: &BitString) -> Result<BitString> {
        expect_width(x, self.cfg.n_bits)?;
        match &self.inner {
            KeyedInner::Hash => {
                let input = self.salt.concat(x)?;
                let mut h = Sha256::new();
                h.update((self.salt.width() as u16).to_be_bytes());
                h.update((x.width() as u16).to_be_bytes());
                h.update(input.to_bytes());
                let out = h.finalize();
                BitString::from_bytes(out.as_slice(), 256)?.low_bits(self.cfg.l_bits)
            }
            KeyedInner::Permutation(f) => {
                let v = x.to_u64().expect("n <= 64 for permutation backend");
                BitString::from_u64(f.permute(v), self.cfg.n_bits)
            }
            KeyedInner::Oracle(o) => Ok(o.query(x, &self.salt)),
        }
    }
}

enum ProjectorKind<'a> {
    Identity,
    Erase(&'a Mask),
    DigestErase(KeyedDigest<'a>, &'a Mask),
}

/// `x ↦ B(x)` under a fixed hint.
pub struct Projector<'a> {
    n_bits: usize,
    kind: ProjectorKind<'a>,
}

impl Projector<'_> {
    pub fn apply(&self, x: &BitString) -> Result<BitString> {
        expect_width(x, self.n_bits)?;
        match &self.kind {
            ProjectorKind::Identity => Ok(*x),
            ProjectorKind::Erase(m) => x.erase(m),
            ProjectorKind::DigestErase(d, m) => d.apply(x)?.erase(m),
        }
    }
}

/// Unbalanced Feistel network over `width` bits with salt-derived round
/// keys. Each round is invertible, so the whole map is a bijection.
struct Feistel {
    width: usize,
    keys: [u64; FEISTEL_ROUNDS],
}

impl Feistel {
    fn derive(width: usize, salt: &BitString) -> Self {
        let mut h = Sha256::new();
        h.update(b"racovert/feistel");
        h.update((width as u16).to_be_bytes());
        h.update((salt.width() as u16).to_be_bytes());
        h.update(salt.to_bytes());
        let seed: [u8; 32] = h.finalize().as_slice().try_into().expect("32-byte digest");
        let mut rng = ChaCha8Rng::from_seed(seed);
        let mut keys = [0u64; FEISTEL_ROUNDS];
        for k in keys.iter_mut() {
            *k = rng.next_u64();
        }
        Self { width, keys }
    }

    fn permute(&self, v: u64) -> u64 {
        let mut hb = self.width.div_ceil(2);
        let mut lb = self.width / 2;
        let mut hi = if lb == 64 { 0 } else { v >> lb };
        let mut lo = v & low_mask(lb);
        for key in self.keys {
            let f = splitmix64(lo ^ key) & low_mask(hb);
            (hi, lo) = (lo, hi ^ f);
            (hb, lb) = (lb, hb);
        }
        if lb == 64 {
            lo
        } else {
            hi << lb | lo
        }
    }
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_id<R: Rng>(n: usize, rng: &mut R) -> BitString {
        BitString::from_bits((0..n).map(|_| rng.random::<bool>())).unwrap()
    }

    #[test]
    fn config_invariants() {
        assert!(SchemeConfig { k: 1, ..SchemeConfig::plain(8) }.validate().is_err());
        assert!(SchemeConfig::k_errors(8, 9).validate().is_err());
        assert!(SchemeConfig::k_erasures(8, 8).validate().is_ok());
        assert!(SchemeConfig::elisha(16, 12, 0, 8, DigestBackend::RandomOracleStub)
            .validate()
            .is_err());
        assert!(SchemeConfig::elisha(16, 16, 17, 8, DigestBackend::RandomOracleStub)
            .validate()
            .is_err());
        assert!(SchemeConfig::elisha(16, 20, 2, 8, DigestBackend::RandomPermutation)
            .validate()
            .is_err());
        assert!(SchemeConfig::elisha(40, 64, 6, 64, DigestBackend::TruncatedCryptoHash)
            .validate()
            .is_ok());
    }

    #[test]
    fn permutation_is_injective() {
        for n in [1usize, 2, 5, 8, 11, 12] {
            let cfg = SchemeConfig::elisha(n, n, 0, 16, DigestBackend::RandomPermutation);
            let s = Scheme::new(cfg).unwrap();
            let salt = BitString::from_u64(0xBEEF, 16).unwrap();
            let keyed = s.keyed(&salt).unwrap();
            let images: HashSet<BitString> = (0..1u64 << n)
                .map(|v| keyed.apply(&BitString::from_u64(v, n).unwrap()).unwrap())
                .collect();
            assert_eq!(images.len(), 1 << n, "n = {n}");
        }
    }

    #[test]
    fn permutation_full_width() {
        let cfg = SchemeConfig::elisha(64, 64, 0, 8, DigestBackend::RandomPermutation);
        let s = Scheme::new(cfg).unwrap();
        let salt = BitString::from_u64(3, 8).unwrap();
        let a = s.digest(&BitString::from_u64(1, 64).unwrap(), &salt).unwrap();
        let b = s.digest(&BitString::from_u64(2, 64).unwrap(), &salt).unwrap();
        assert_ne!(a.value, b.value);
    }

    #[test]
    fn digest_is_deterministic() {
        for backend in [
            DigestBackend::TruncatedCryptoHash,
            DigestBackend::RandomPermutation,
            DigestBackend::RandomOracleStub,
        ] {
            let s = Scheme::new(SchemeConfig::elisha(12, 12, 0, 8, backend)).unwrap();
            let x = BitString::from_u64(0xABC, 12).unwrap();
            let salt = BitString::from_u64(0x5A, 8).unwrap();
            assert_eq!(s.digest(&x, &salt).unwrap(), s.digest(&x, &salt).unwrap());
        }
    }

    #[test]
    fn salted_hash_collisions_match_birthday_bound() {
        // L = 40: expected collisions over 10^4 salt pairs is 10^4 / 2^40.
        let s = Scheme::new(SchemeConfig::elisha(40, 40, 0, 64, DigestBackend::TruncatedCryptoHash))
            .unwrap();
        let mut r = rng(1);
        let pairs = 10_000u32;
        let mut collisions = 0u32;
        for _ in 0..pairs {
            let x = random_id(40, &mut r);
            let s1 = BitString::from_u64(r.random(), 64).unwrap();
            let s2 = BitString::from_u64(r.random(), 64).unwrap();
            if s1 != s2 && s.digest(&x, &s1).unwrap().value == s.digest(&x, &s2).unwrap().value {
                collisions += 1;
            }
        }
        let mean = pairs as f64 / 2f64.powi(40);
        assert!(collisions as f64 <= mean + 3.0 * mean.sqrt());
    }

    #[test]
    fn oracle_draws_fresh_values_per_pair() {
        let s = Scheme::new(SchemeConfig::elisha(8, 32, 0, 8, DigestBackend::RandomOracleStub))
            .unwrap();
        let x = BitString::from_u64(7, 8).unwrap();
        let vals: HashSet<BitString> = (0..64u64)
            .map(|salt| s.digest(&x, &BitString::from_u64(salt, 8).unwrap()).unwrap().value)
            .collect();
        assert_eq!(vals.len(), 64);
    }

    #[test]
    fn obfuscate_examples() {
        let mut r = rng(3);
        let x: BitString = "10110010".parse().unwrap();
        let plain = Scheme::new(SchemeConfig::plain(8)).unwrap();
        let y = plain.obfuscate(&x, &mut r).unwrap();
        assert_eq!(y.payload, x);
        assert_eq!(y.hint, Hint::None);

        let ke = Scheme::new(SchemeConfig::k_erasures(8, 0)).unwrap();
        let y = ke.obfuscate(&x, &mut r).unwrap();
        assert_eq!(y.payload, x);
        assert_eq!(y.hint, Hint::Erasures { mask: Mask::zeros(8).unwrap() });

        let kerr = Scheme::new(SchemeConfig::k_errors(4, 4)).unwrap();
        let x4: BitString = "1001".parse().unwrap();
        assert_eq!(kerr.obfuscate(&x4, &mut r).unwrap().payload, x4.not());
    }

    #[test]
    fn plain_backs_off_on_mismatch() {
        let plain = Scheme::new(SchemeConfig::plain(8)).unwrap();
        let x = BitString::from_u64(5, 8).unwrap();
        let y = plain.obfuscate(&x, &mut rng(0)).unwrap();
        assert_eq!(
            plain.decide(&y, &BitString::from_u64(6, 8).unwrap()).unwrap(),
            Decision::BackOff
        );
    }

    #[test]
    fn decide_rejects_foreign_broadcast() {
        let plain = Scheme::new(SchemeConfig::plain(8)).unwrap();
        let ke = Scheme::new(SchemeConfig::k_erasures(8, 2)).unwrap();
        let x = BitString::from_u64(5, 8).unwrap();
        let y = ke.obfuscate(&x, &mut rng(0)).unwrap();
        assert!(matches!(plain.decide(&y, &x), Err(Error::SchemeMismatch { .. })));
        assert!(matches!(
            ke.decide(&y, &BitString::from_u64(5, 9).unwrap()),
            Err(Error::WidthMismatch { .. })
        ));
    }

    #[test]
    fn kerrors_false_proceeds_exhaustive_n8_k2() {
        // Direct double loop over (x, x_i) and all 28 weight-2 masks; the
        // fraction of Proceeds among all triples is C(8,2)/2^8 because
        // exactly C(8,2) identities sit at distance 2 from any payload.
        let s = Scheme::new(SchemeConfig::k_errors(8, 2)).unwrap();
        let masks: Vec<Mask> = crate::bitcore::weight_masks(8, 2).unwrap().collect();
        let mut proceeds = 0u64;
        let mut total = 0u64;
        for m in &masks {
            let r = Randomness { mask: *m, salt: BitString::zeros(0).unwrap() };
            for x in 0..256u64 {
                let y = s.obfuscate_with(&BitString::from_u64(x, 8).unwrap(), &r).unwrap();
                for xi in 0..256u64 {
                    total += 1;
                    if s.decide(&y, &BitString::from_u64(xi, 8).unwrap()).unwrap()
                        == Decision::Proceed
                    {
                        proceeds += 1;
                    }
                }
            }
        }
        assert_eq!(proceeds * 256, total * 28);
    }

    #[test]
    fn liveness_all_variants() {
        let mut r = rng(11);
        for i in 0..20_000u32 {
            let v = Variant::ALL[(i % 4) as usize];
            let n = r.random_range(1..=48usize);
            let cfg = match v {
                Variant::Plain => SchemeConfig::plain(n),
                Variant::KErrors => SchemeConfig::k_errors(n, r.random_range(0..=n)),
                Variant::KErasures => SchemeConfig::k_erasures(n, r.random_range(0..=n)),
                Variant::Elisha => {
                    let backend = [
                        DigestBackend::TruncatedCryptoHash,
                        DigestBackend::RandomPermutation,
                        DigestBackend::RandomOracleStub,
                    ][r.random_range(0..3)];
                    let l = if backend == DigestBackend::RandomPermutation {
                        n
                    } else {
                        r.random_range(n..=64)
                    };
                    SchemeConfig::elisha(n, l, r.random_range(0..=l), r.random_range(0..=64), backend)
                }
            };
            let s = Scheme::new(cfg).unwrap();
            let x = random_id(n, &mut r);
            let y = s.obfuscate(&x, &mut r).unwrap();
            assert_eq!(y.payload.width(), cfg.payload_width());
            assert_eq!(s.decide(&y, &x).unwrap(), Decision::Proceed, "{cfg:?}");
        }
    }

    #[test]
    fn elisha_permutation_k0_is_collision_free() {
        for n in [4usize, 8, 12] {
            let s = Scheme::new(SchemeConfig::elisha(n, n, 0, 16, DigestBackend::RandomPermutation))
                .unwrap();
            let mut r = rng(n as u64);
            let x = random_id(n, &mut r);
            let y = s.obfuscate(&x, &mut r).unwrap();
            for v in 0..1u64 << n {
                let xi = BitString::from_u64(v, n).unwrap();
                let d = s.decide(&y, &xi).unwrap();
                assert_eq!(d == Decision::Proceed, xi == x);
            }
        }
    }

    #[test]
    fn unsalted_elisha_is_repeatable() {
        let s = Scheme::new(SchemeConfig::elisha(16, 32, 0, 0, DigestBackend::TruncatedCryptoHash))
            .unwrap();
        let mut r = rng(5);
        let x = random_id(16, &mut r);
        let first = s.obfuscate(&x, &mut r).unwrap();
        for _ in 0..50 {
            assert_eq!(s.obfuscate(&x, &mut r).unwrap().payload, first.payload);
        }
        let salted = Scheme::new(SchemeConfig::elisha(16, 32, 0, 64, DigestBackend::TruncatedCryptoHash))
            .unwrap();
        let a = salted.obfuscate(&x, &mut r).unwrap();
        let b = salted.obfuscate(&x, &mut r).unwrap();
        assert_ne!(a.payload, b.payload);
    }

    #[test]
    fn wire_sizes() {
        let mut r = rng(8);
        let x = random_id(40, &mut r);
        let ke = Scheme::new(SchemeConfig::k_erasures(40, 10)).unwrap();
        assert_eq!(ke.obfuscate(&x, &mut r).unwrap().wire_bits(), 2 * 40 - 10);
        let el = Scheme::new(SchemeConfig::elisha(40, 64, 6, 64, DigestBackend::TruncatedCryptoHash))
            .unwrap();
        assert_eq!(el.obfuscate(&x, &mut r).unwrap().wire_bits(), 2 * 64 + 64 - 6);
    }

    #[test]
    fn trace_encoding_layout() {
        let s = Scheme::new(SchemeConfig::k_erasures(10, 3)).unwrap();
        let x: BitString = "1100110011".parse().unwrap();
        let m = Mask::from_positions(10, &[0, 4, 9]).unwrap();
        let y = s
            .obfuscate_with(&x, &Randomness { mask: m, salt: BitString::zeros(0).unwrap() })
            .unwrap();
        assert_eq!(y.payload.to_string(), "1001001");
        let bytes = y.to_bytes().unwrap();
        assert_eq!(
            bytes,
            vec![2, 0, 7, 0b1001_0010, 0b1000_1000, 0b0100_0000]
        );
        assert_eq!(ObfuscatedBroadcast::from_bytes(&bytes, s.config()).unwrap(), y);
        assert!(ObfuscatedBroadcast::from_bytes(&bytes[..4], s.config()).is_err());
    }

    #[test]
    fn trace_encoding_roundtrip_all_variants() {
        let mut r = rng(21);
        let cfgs = [
            SchemeConfig::plain(40),
            SchemeConfig::k_errors(40, 7),
            SchemeConfig::k_erasures(40, 13),
            SchemeConfig::elisha(40, 48, 6, 64, DigestBackend::TruncatedCryptoHash),
            SchemeConfig::elisha(20, 20, 3, 12, DigestBackend::RandomPermutation),
        ];
        for cfg in cfgs {
            let s = Scheme::new(cfg).unwrap();
            for _ in 0..50 {
                let y = s.obfuscate(&random_id(cfg.n_bits, &mut r), &mut r).unwrap();
                let back = ObfuscatedBroadcast::from_bytes(&y.to_bytes().unwrap(), &cfg).unwrap();
                assert_eq!(back, y);
            }
        }
    }
}
