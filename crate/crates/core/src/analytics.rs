//! Identity-collision and disruption probabilities, channel mutual
//! information and the Fano bound.
//!
//! Closed forms sit next to exhaustive evaluators so that each can be
//! checked against the other at small widths.

use std::collections::HashMap;

use num_rational::Ratio;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::bitcore::{weight_masks, BitString};
use crate::error::{Error, Result};
use crate::schemes::{DigestBackend, Randomness, Scheme, SchemeConfig, Variant};

/// Largest identity width [`pc_exact`] enumerates.
pub const PC_EXACT_MAX_BITS: usize = 14;
/// Largest identity width [`mutual_information_bruteforce`] enumerates.
pub const MI_MAX_BITS: usize = 12;
/// Exhaustive Elisha analyses enumerate every salt; this caps `S`.
pub const SALT_ENUM_MAX_BITS: usize = 4;
/// Binomials are exact integers up to this `n`, log-gamma beyond.
pub const EXACT_BINOMIAL_MAX_N: usize = 64;
/// Widest digest [`pd_montecarlo`] accepts.
pub const PD_MC_MAX_BITS: usize = 24;

/// Terms summed one by one in the disruption product before switching to
/// Euler–Maclaurin.
const DIRECT_TERMS_MAX: f64 = (1u64 << 22) as f64;
/// Euler–Maclaurin is applied only where `C - x` stays above this.
const EM_SAFE_GAP: f64 = (1u64 << 20) as f64;

const Z_95: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    ClosedForm,
    Exhaustive,
    MonteCarlo,
}

/// Two-sided 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub low: f64,
    pub high: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.low <= x && x <= self.high
    }
}

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64) -> Interval {
    if trials == 0 {
        return Interval { low: 0.0, high: 1.0 };
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    Interval {
        low: (centre - half).max(0.0),
        high: (centre + half).min(1.0),
    }
}

/// Identity collision probability `P_C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionStats {
    pub p_c: f64,
    pub log2_p_c: f64,
    pub method: Method,
    /// Monte Carlo only.
    pub trials: Option<u64>,
    pub ci: Option<Interval>,
    /// Exact rational value where one is available.
    #[serde(skip)]
    pub exact: Option<Ratio<u128>>,
}

impl CollisionStats {
    fn from_log2(log2_p_c: f64, method: Method) -> Self {
        Self {
            p_c: log2_p_c.exp2(),
            log2_p_c,
            method,
            trials: None,
            ci: None,
            exact: None,
        }
    }

    fn from_ratio(r: Ratio<u128>, method: Method) -> Self {
        let p_c = ratio_to_f64(&r);
        Self {
            p_c,
            log2_p_c: ratio_log2(&r),
            method,
            trials: None,
            ci: None,
            exact: Some(r),
        }
    }

    /// Empirical estimate with a Wilson interval attached.
    pub fn monte_carlo(hits: u64, trials: u64) -> Self {
        let p_c = if trials == 0 { 0.0 } else { hits as f64 / trials as f64 };
        Self {
            p_c,
            log2_p_c: p_c.log2(),
            method: Method::MonteCarlo,
            trials: Some(trials),
            ci: Some(wilson_interval(hits, trials)),
            exact: None,
        }
    }
}

fn ratio_to_f64(r: &Ratio<u128>) -> f64 {
    // Both sides may exceed 2^53; scale through log2 to keep precision.
    (ratio_log2(r)).exp2()
}

fn ratio_log2(r: &Ratio<u128>) -> f64 {
    log2_u128(*r.numer()) - log2_u128(*r.denom())
}

fn log2_u128(v: u128) -> f64 {
    if v == 0 {
        return f64::NEG_INFINITY;
    }
    let shift = 128 - v.leading_zeros() as i32 - 53;
    if shift <= 0 {
        (v as f64).log2()
    } else {
        ((v >> shift) as f64).log2() + shift as f64
    }
}

/// Covert-pair disruption probability `P_D` for a `2^m`-word codebook.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisruptionStats {
    pub p_d: f64,
    pub l_bits: usize,
    pub k: usize,
    pub m_bits: usize,
    pub method: Method,
    pub trials: Option<u64>,
    pub ci: Option<Interval>,
}

/// `C(n, k)` exactly, or `None` on overflow.
pub fn binomial_exact(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

/// `ln C(n, k)` via log-gamma.
pub fn ln_binomial(n: usize, k: usize) -> f64 {
    ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if n == 0 || n > crate::bitcore::MAX_WIDTH || k > n {
        Err(Error::InvalidArgument(format!(
            "need 0 <= k <= n <= 256 with n >= 1, got n = {n}, k = {k}"
        )))
    } else {
        Ok(())
    }
}

/// K-errors: `P_C = C(N, K) / 2^N`.
pub fn pc_kerrors(n: usize, k: usize) -> Result<CollisionStats> {
    check_k(n, k)?;
    if n <= EXACT_BINOMIAL_MAX_N {
        let c = binomial_exact(n, k).expect("C(64, k) fits u128");
        return Ok(CollisionStats::from_ratio(
            Ratio::new(c, 1u128 << n),
            Method::ClosedForm,
        ));
    }
    Ok(CollisionStats::from_log2(
        ln_binomial(n, k) / std::f64::consts::LN_2 - n as f64,
        Method::ClosedForm,
    ))
}

/// K-erasures: `P_C = 2^K / 2^N`.
pub fn pc_kerasures(n: usize, k: usize) -> Result<CollisionStats> {
    check_k(n, k)?;
    if n <= EXACT_BINOMIAL_MAX_N {
        return Ok(CollisionStats::from_ratio(
            Ratio::new(1u128 << k, 1u128 << n),
            Method::ClosedForm,
        ));
    }
    Ok(CollisionStats::from_log2(k as f64 - n as f64, Method::ClosedForm))
}

/// ELISHA: `P_C ≈ 2^K / 2^L`, ignoring digest collisions.
pub fn pc_elisha(l: usize, k: usize) -> Result<CollisionStats> {
    check_k(l, k)?;
    Ok(CollisionStats::from_log2(k as f64 - l as f64, Method::ClosedForm))
}

/// Every mask/salt combination the scheme can draw, each equally likely.
fn all_randomness(cfg: &SchemeConfig) -> Result<Vec<Randomness>> {
    let salt_w = if cfg.variant == Variant::Elisha { cfg.salt_bits } else { 0 };
    if salt_w > SALT_ENUM_MAX_BITS {
        return Err(Error::ExhaustiveCap {
            what: "salt width",
            value: salt_w,
            cap: SALT_ENUM_MAX_BITS,
        });
    }
    let masks: Vec<_> = weight_masks(cfg.mask_width(), cfg.k)?.collect();
    let mut out = Vec::with_capacity(masks.len() << salt_w);
    for s in 0..1u64 << salt_w {
        let salt = BitString::from_u64(s, salt_w)?;
        out.extend(masks.iter().map(|&mask| Randomness { mask, salt }));
    }
    Ok(out)
}

fn identities(n: usize) -> impl Iterator<Item = BitString> {
    (0..1u64 << n).map(move |v| BitString::from_u64(v, n).expect("fits"))
}

fn key(x: &BitString) -> u64 {
    x.to_u64().expect("exhaustive widths fit u64")
}

/// Exact two-UE collision probability `Pr(D(Y, X_2) = Proceed | X = X_1)`
/// for i.i.d. uniform `X_1, X_2`, averaged over every mask (and salt).
///
/// The random-oracle backend has no finite function table to enumerate;
/// its expectation is returned in closed form instead.
pub fn pc_exact(cfg: &SchemeConfig) -> Result<CollisionStats> {
    let scheme = Scheme::new(*cfg)?;
    let n = cfg.n_bits;
    if n > PC_EXACT_MAX_BITS {
        return Err(Error::ExhaustiveCap {
            what: "identity width",
            value: n,
            cap: PC_EXACT_MAX_BITS,
        });
    }
    if cfg.variant == Variant::Elisha {
        if cfg.l_bits > PC_EXACT_MAX_BITS {
            return Err(Error::ExhaustiveCap {
                what: "digest width",
                value: cfg.l_bits,
                cap: PC_EXACT_MAX_BITS,
            });
        }
        if cfg.digest_backend == DigestBackend::RandomOracleStub {
            // Equal identities always match; distinct ones match when the
            // L - K surviving digest bits agree.
            let cells = 1u128 << (cfg.l_bits - cfg.k);
            let num = cells + (1u128 << n) - 1;
            return Ok(CollisionStats::from_ratio(
                Ratio::new(num, (1u128 << n) * cells),
                Method::ClosedForm,
            ));
        }
    }

    let draws = all_randomness(cfg)?;
    let space = 1usize << n;
    let mut proceeds: u128 = 0;
    match cfg.variant {
        Variant::KErrors => {
            // at_k[y] = #{x2 : d(y, x2) = K}
            let at_k: Vec<u128> = (0..space as u64)
                .map(|y| {
                    (0..space as u64)
                        .filter(|x2| (y ^ x2).count_ones() as usize == cfg.k)
                        .count() as u128
                })
                .collect();
            for r in &draws {
                for x1 in identities(n) {
                    let y = scheme.obfuscate_with(&x1, r)?;
                    proceeds += at_k[key(&y.payload) as usize];
                }
            }
        }
        _ => {
            for r in &draws {
                let probe = scheme.obfuscate_with(&BitString::zeros(n)?, r)?;
                let proj = scheme.projector(&probe.hint)?;
                let mut hist: HashMap<u64, u128> = HashMap::new();
                for x2 in identities(n) {
                    *hist.entry(key(&proj.apply(&x2)?)).or_default() += 1;
                }
                for x1 in identities(n) {
                    let y = scheme.obfuscate_with(&x1, r)?;
                    proceeds += hist.get(&key(&y.payload)).copied().unwrap_or(0);
                }
            }
        }
    }
    let denom = (space as u128) * (space as u128) * draws.len() as u128;
    Ok(CollisionStats::from_ratio(
        Ratio::new(proceeds, denom),
        Method::Exhaustive,
    ))
}

/// `I(X;Y) = -log2 P_C` (bits per attempt).
pub fn capacity_from_pc(p_c: f64) -> Result<f64> {
    if !(p_c > 0.0 && p_c <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "collision probability {p_c} not in (0, 1]"
        )));
    }
    Ok(-p_c.log2())
}

fn entropy_bits<I: IntoIterator<Item = u64>>(counts: I, total: u64) -> f64 {
    let t = total as f64;
    counts
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / t;
            -p * p.log2()
        })
        .sum()
}

/// Exact `I(X; Y)` in bits for uniform `X`, with the broadcast hint treated
/// as part of the observation `Y`.
///
/// Randomness that is broadcast (erasure masks, salts) conditions the
/// channel; randomness that is not (the K-errors mask) is averaged inside
/// it. The result is the hint-averaged mutual information between `X` and
/// the payload.
pub fn mutual_information_bruteforce(cfg: &SchemeConfig) -> Result<f64> {
    let scheme = Scheme::new(*cfg)?;
    let n = cfg.n_bits;
    if n > MI_MAX_BITS {
        return Err(Error::ExhaustiveCap {
            what: "identity width",
            value: n,
            cap: MI_MAX_BITS,
        });
    }
    if cfg.variant == Variant::Elisha && cfg.l_bits > 2 * MI_MAX_BITS {
        return Err(Error::ExhaustiveCap {
            what: "digest width",
            value: cfg.l_bits,
            cap: 2 * MI_MAX_BITS,
        });
    }
    let draws = all_randomness(cfg)?;
    // Groups share one observed hint; members differ only in hidden draws.
    let groups: Vec<&[Randomness]> = if cfg.variant == Variant::KErrors {
        vec![&draws[..]]
    } else {
        draws.chunks(1).collect()
    };
    let mut total = 0.0;
    for group in &groups {
        let mut marginal: HashMap<u64, u64> = HashMap::new();
        let mut cond = 0.0;
        let mut per_x: Vec<u64> = Vec::with_capacity(group.len());
        for x in identities(n) {
            per_x.clear();
            for r in group.iter() {
                per_x.push(key(&scheme.obfuscate_with(&x, r)?.payload));
            }
            per_x.sort_unstable();
            let mut runs = Vec::new();
            let mut i = 0;
            while i < per_x.len() {
                let j = per_x[i..].partition_point(|&v| v == per_x[i]) + i;
                runs.push((j - i) as u64);
                *marginal.entry(per_x[i]).or_default() += (j - i) as u64;
                i = j;
            }
            cond += entropy_bits(runs, group.len() as u64);
        }
        let joint_total = (1u64 << n) * group.len() as u64;
        let h_y = entropy_bits(marginal.into_values(), joint_total);
        total += h_y - cond / (1u64 << n) as f64;
    }
    Ok(total / groups.len() as f64)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Smallest error probability `P_e` consistent with Fano's inequality
/// `H_b(P_e) + P_e log2(|X| - 1) >= H(X|Y)` for `|X| = 2^alphabet_log2`.
pub fn fano_lower_bound(h_x_given_y: f64, alphabet_log2: u32) -> Result<f64> {
    let a = alphabet_log2 as f64;
    if h_x_given_y.is_nan() || h_x_given_y < 0.0 || h_x_given_y > a + 1e-12 {
        return Err(Error::InvalidArgument(format!(
            "equivocation {h_x_given_y} outside [0, {a}]"
        )));
    }
    if h_x_given_y == 0.0 {
        return Ok(0.0);
    }
    // log2(2^a - 1) without overflow.
    let log_m1 = a + (-(-a).exp2()).ln_1p() / std::f64::consts::LN_2;
    let p_max = 1.0 - (-a).exp2();
    // g peaks at p_max with zero slope, so bisection cannot resolve the
    // top end; full equivocation is answered directly.
    if h_x_given_y >= a - 1e-12 {
        return Ok(p_max);
    }
    let g = |p: f64| binary_entropy(p) + p * log_m1;
    let (mut lo, mut hi) = (0.0, p_max);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if g(mid) >= h_x_given_y {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// `Σ_{i=0}^{n-1} ln(1 - i/c)` by Euler–Maclaurin; accurate when `c - n`
/// is large.
fn ln_falling_ratio_em(n: f64, c: f64) -> f64 {
    if n <= 0.0 {
        return 0.0;
    }
    let u = n / c;
    // φ(u) = (1-u) ln(1-u) + u; series below 1e-3 avoids cancellation.
    let phi = if u < 1e-3 {
        (2..=10).map(|j| u.powi(j) / (j * (j - 1)) as f64).sum::<f64>()
    } else {
        (1.0 - u) * (-u).ln_1p() + u
    };
    let integral = -c * phi;
    let d = c - n;
    let d1 = -1.0 / d + 1.0 / c;
    let d3 = -2.0 / d.powi(3) + 2.0 / c.powi(3);
    let d5 = -24.0 / d.powi(5) + 24.0 / c.powi(5);
    integral - 0.5 * (-u).ln_1p() + d1 / 12.0 - d3 / 720.0 + d5 / 30240.0
}

/// `ln Π_{i=0}^{2^m - 1} (2^l - i 2^k) / (2^l - i)`, or `-∞` once some
/// factor reaches zero. `k` may be fractional.
pub fn ln_survival(l: u32, k: f64, m: u32) -> f64 {
    if m == 0 || k <= 0.0 {
        return 0.0;
    }
    let n = (m as f64).exp2();
    let a = (l as f64).exp2();
    let b = (l as f64 - k).exp2();
    if n - 1.0 >= b {
        return f64::NEG_INFINITY;
    }
    let spread = k.exp2() - 1.0;
    let direct = |from: f64, to: f64| -> f64 {
        let mut s = 0.0;
        let mut i = from;
        while i < to {
            s += (-(i * spread) / (a - i)).ln_1p();
            i += 1.0;
        }
        s
    };
    if n <= DIRECT_TERMS_MAX {
        return direct(1.0, n);
    }
    let split = if b - n < EM_SAFE_GAP {
        (b - EM_SAFE_GAP).floor().max(0.0)
    } else {
        n
    };
    ln_falling_ratio_em(split, b) - ln_falling_ratio_em(split, a) + direct(split, n)
}

/// ELISHA disruption rate for real-valued `k` (used when inverting for a
/// target `P_D`).
pub fn pd_elisha_real(l: u32, k: f64, m: u32) -> f64 {
    let s = ln_survival(l, k, m);
    if s == f64::NEG_INFINITY {
        1.0
    } else if s == 0.0 {
        0.0
    } else {
        -s.exp_m1()
    }
}

/// ELISHA disruption rate
/// `P_D = 1 - Π_{i=0}^{2^M-1} (2^L - i 2^K) / (2^L - i)`,
/// evaluated in log space. Saturates to exactly 1 when `2^M > 2^(L-K)`.
pub fn pd_elisha(l: usize, k: usize, m: usize) -> Result<DisruptionStats> {
    if l == 0 || l > 64 || k > l || m > 40 {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= k <= l <= 64 and m <= 40, got l = {l}, k = {k}, m = {m}"
        )));
    }
    Ok(DisruptionStats {
        p_d: pd_elisha_real(l as u32, k as f64, m as u32),
        l_bits: l,
        k,
        m_bits: m,
        method: Method::ClosedForm,
        trials: None,
        ci: None,
    })
}

/// Finds `K` (real) with `pd_elisha(l, K, m) = target` by bisection.
/// Returns `None` when no `K` in `[0, l]` reaches the target.
pub fn invert_pd_for_k(l: u32, m: u32, target: f64) -> Option<f64> {
    if !(target > 0.0 && target < 1.0) || m == 0 {
        return None;
    }
    let (mut lo, mut hi) = (0.0f64, l as f64);
    if pd_elisha_real(l, hi, m) < target {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pd_elisha_real(l, mid, m) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Some(lo)
}

/// Largest integer `K` whose closed-form `P_C = 2^(K-L)` does not exceed
/// `target`.
pub fn k_for_pc_elisha(l: usize, target: f64) -> Option<usize> {
    (0..=l).rev().find(|&k| pc_elisha(l, k).is_ok_and(|s| s.p_c <= target))
}

/// Empirical aliasing frequency: per trial a fresh random codebook of
/// `2^m` distinct identities goes through a fresh salt and mask; the trial
/// counts when two codewords share a payload.
pub fn pd_montecarlo<R: Rng + ?Sized>(
    scheme: &Scheme,
    m: usize,
    trials: u64,
    rng: &mut R,
) -> Result<DisruptionStats> {
    let cfg = *scheme.config();
    if cfg.variant != Variant::Elisha {
        return Err(Error::InvalidConfig(
            "disruption Monte Carlo needs an elisha scheme".into(),
        ));
    }
    if cfg.l_bits > PD_MC_MAX_BITS {
        return Err(Error::InvalidArgument(format!(
            "l = {} above Monte Carlo limit {PD_MC_MAX_BITS}",
            cfg.l_bits
        )));
    }
    if m > cfg.n_bits {
        return Err(Error::InvalidArgument(format!(
            "2^{m} distinct codewords do not fit {} bits",
            cfg.n_bits
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be positive".into()));
    }
    let mut aliased = 0u64;
    let mut book = std::collections::HashSet::with_capacity(1 << m);
    let mut images = std::collections::HashSet::with_capacity(1 << m);
    for _ in 0..trials {
        book.clear();
        while book.len() < 1 << m {
            let v = rng.random::<u64>() & low_mask(cfg.n_bits);
            book.insert(BitString::from_u64(v, cfg.n_bits)?);
        }
        let r = scheme.draw_randomness(rng)?;
        let keyed = scheme.keyed(&r.salt)?;
        images.clear();
        let mut hit = false;
        for w in &book {
            if !images.insert(keyed.apply(w)?.erase(&r.mask)?) {
                hit = true;
                break;
            }
        }
        aliased += hit as u64;
    }
    Ok(DisruptionStats {
        p_d: aliased as f64 / trials as f64,
        l_bits: cfg.l_bits,
        k: cfg.k,
        m_bits: m,
        method: Method::MonteCarlo,
        trials: Some(trials),
        ci: Some(wilson_interval(aliased, trials)),
    })
}

fn low_mask(bits: usize) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::DigestBackend;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(f64::MIN_POSITIVE)
    }

    /// Binomial standard deviation of a frequency over `n` trials.
    fn sigma(p: f64, n: u64) -> f64 {
        (p * (1.0 - p) / n as f64).sqrt()
    }

    #[test]
    fn kerrors_closed_form_examples() {
        assert_eq!(pc_kerrors(40, 0).unwrap().p_c, 2f64.powi(-40));
        assert_eq!(pc_kerrors(40, 40).unwrap().p_c, 2f64.powi(-40));
        // mpmath: C(40,20)/2^40 = 0.12537068761957926
        assert!(close(pc_kerrors(40, 20).unwrap().p_c, 0.125_370_687_619_579_26, 1e-14));
        assert_eq!(
            pc_kerrors(8, 2).unwrap().exact,
            Some(Ratio::new(28, 256))
        );
    }

    #[test]
    fn kerrors_log_gamma_branch() {
        // mpmath references above the exact-arithmetic seam.
        assert!(close(pc_kerrors(100, 50).unwrap().p_c, 0.079_589_237_387_178_761, 1e-11));
        assert!(close(pc_kerrors(256, 100).unwrap().p_c, 1.062_502_846_516_473_1e-4, 1e-10));
        assert!(pc_kerrors(65, 3).unwrap().exact.is_none());
    }

    #[test]
    fn binomial_seam_agrees() {
        for n in [60usize, 64] {
            for k in [0, 1, 7, n / 2, n] {
                let exact = binomial_exact(n, k).unwrap() as f64;
                assert!(close(ln_binomial(n, k).exp(), exact, 1e-12), "C({n},{k})");
            }
        }
        let below = pc_kerrors(64, 32).unwrap().p_c;
        let above = pc_kerrors(65, 32).unwrap().p_c;
        // C(65,32)/2^65 = C(64,32)/2^64 · 65/(2·33)
        assert!(close(above, below * 65.0 / 66.0, 1e-12));
    }

    #[test]
    fn stats_log2_consistent() {
        for s in [
            pc_kerrors(40, 13).unwrap(),
            pc_kerrors(200, 13).unwrap(),
            pc_kerasures(40, 10).unwrap(),
            pc_elisha(40, 6).unwrap(),
        ] {
            assert!(close(s.log2_p_c.exp2(), s.p_c, 1e-12));
        }
    }

    #[test]
    fn kerasures_and_elisha_closed_forms() {
        assert_eq!(pc_kerasures(40, 0).unwrap().p_c, 2f64.powi(-40));
        assert_eq!(pc_kerasures(40, 40).unwrap().p_c, 1.0);
        assert_eq!(pc_kerasures(40, 10).unwrap().p_c, 2f64.powi(-30));
        assert_eq!(pc_elisha(40, 0).unwrap().p_c, 2f64.powi(-40));
        assert!(close(pc_elisha(40, 6).unwrap().p_c, 5.820_766_091_346_741e-11, 1e-15));
        assert!(close(pc_elisha(40, 34).unwrap().p_c, 1.562_5e-2, 1e-15));
        assert!(pc_kerasures(8, 9).is_err());
        assert!(pc_elisha(0, 0).is_err());
    }

    #[test]
    fn pc_exact_examples() {
        let plain = pc_exact(&SchemeConfig::plain(8)).unwrap();
        assert_eq!(plain.exact, Some(Ratio::new(1, 256)));
        assert_eq!(plain.method, Method::Exhaustive);
        assert_eq!(
            pc_exact(&SchemeConfig::k_erasures(8, 3)).unwrap().exact,
            Some(Ratio::new(1, 32))
        );
        assert_eq!(
            pc_exact(&SchemeConfig::k_errors(8, 2)).unwrap().exact,
            Some(Ratio::new(28, 256))
        );
        assert!(matches!(
            pc_exact(&SchemeConfig::plain(15)),
            Err(Error::ExhaustiveCap { .. })
        ));
    }

    #[test]
    fn pc_exact_elisha_backends() {
        // Keyed bijection: 2^K identities share each payload, for every salt.
        let perm = SchemeConfig::elisha(8, 8, 3, 2, DigestBackend::RandomPermutation);
        assert_eq!(pc_exact(&perm).unwrap().exact, Some(Ratio::new(1, 32)));
        let oracle = SchemeConfig::elisha(8, 12, 4, 64, DigestBackend::RandomOracleStub);
        let s = pc_exact(&oracle).unwrap();
        assert_eq!(s.exact, Some(Ratio::new(256 + 255, 256 * 256)));
        let wide_salt = SchemeConfig::elisha(8, 8, 3, 16, DigestBackend::RandomPermutation);
        assert!(matches!(pc_exact(&wide_salt), Err(Error::ExhaustiveCap { .. })));
    }

    #[test]
    fn pc_exact_matches_independent_double_loop() {
        // Oracle: literal Eq.-2 enumeration through decide(), tiny widths.
        use crate::schemes::Decision;
        for cfg in [
            SchemeConfig::k_errors(5, 2),
            SchemeConfig::k_erasures(5, 2),
            SchemeConfig::elisha(4, 4, 1, 1, DigestBackend::RandomPermutation),
            SchemeConfig::elisha(4, 6, 2, 1, DigestBackend::TruncatedCryptoHash),
        ] {
            let s = Scheme::new(cfg).unwrap();
            let draws = all_randomness(&cfg).unwrap();
            let mut hits = 0u128;
            let mut total = 0u128;
            for r in &draws {
                for x1 in identities(cfg.n_bits) {
                    let y = s.obfuscate_with(&x1, r).unwrap();
                    for x2 in identities(cfg.n_bits) {
                        total += 1;
                        hits += (s.decide(&y, &x2).unwrap() == Decision::Proceed) as u128;
                    }
                }
            }
            assert_eq!(pc_exact(&cfg).unwrap().exact, Some(Ratio::new(hits, total)), "{cfg:?}");
        }
    }

    #[test]
    fn pc_exact_equals_closed_forms_small_grid() {
        for n in 1..=8 {
            for k in 0..=n {
                assert_eq!(
                    pc_exact(&SchemeConfig::k_errors(n, k)).unwrap().exact,
                    pc_kerrors(n, k).unwrap().exact
                );
                assert_eq!(
                    pc_exact(&SchemeConfig::k_erasures(n, k)).unwrap().exact,
                    pc_kerasures(n, k).unwrap().exact
                );
            }
        }
    }

    #[test]
    fn capacity_examples() {
        assert_eq!(capacity_from_pc(1.0).unwrap(), 0.0);
        assert_eq!(capacity_from_pc(2f64.powi(-40)).unwrap(), 40.0);
        assert!(capacity_from_pc(0.0).is_err());
        let c = capacity_from_pc(pc_kerrors(12, 3).unwrap().p_c).unwrap();
        assert!((c - (12.0 - 220f64.log2())).abs() < 1e-12);
        for n in [10usize, 40, 64] {
            for k in 0..=n {
                assert_eq!(capacity_from_pc(pc_kerasures(n, k).unwrap().p_c).unwrap(), (n - k) as f64);
            }
        }
    }

    #[test]
    fn mutual_information_examples() {
        let mi = mutual_information_bruteforce(&SchemeConfig::k_erasures(10, 4)).unwrap();
        assert!((mi - 6.0).abs() < 1e-9);
        let mi = mutual_information_bruteforce(&SchemeConfig::k_errors(10, 0)).unwrap();
        assert!((mi - 10.0).abs() < 1e-9);
        let mi = mutual_information_bruteforce(&SchemeConfig::plain(8)).unwrap();
        assert!((mi - 8.0).abs() < 1e-9);
        assert!(mutual_information_bruteforce(&SchemeConfig::plain(13)).is_err());
    }

    #[test]
    fn mutual_information_matches_capacity_relation() {
        for n in 1..=8 {
            for k in 0..=n {
                for cfg in [SchemeConfig::k_errors(n, k), SchemeConfig::k_erasures(n, k)] {
                    let mi = mutual_information_bruteforce(&cfg).unwrap();
                    let cap = capacity_from_pc(pc_exact(&cfg).unwrap().p_c).unwrap();
                    assert!((mi - cap).abs() < 1e-9, "{cfg:?}: {mi} vs {cap}");
                }
            }
        }
    }

    #[test]
    fn elisha_mutual_information_with_bijective_digest() {
        // Erasing K digest bits of a bijection leaves L - K bits of
        // information about X.
        let cfg = SchemeConfig::elisha(6, 6, 2, 1, DigestBackend::RandomPermutation);
        let mi = mutual_information_bruteforce(&cfg).unwrap();
        assert!((mi - 4.0).abs() < 1e-9);
    }

    #[test]
    fn fano_examples() {
        assert_eq!(fano_lower_bound(0.0, 8).unwrap(), 0.0);
        assert!((fano_lower_bound(1.0, 1).unwrap() - 0.5).abs() < 1e-9);
        let p = fano_lower_bound(8.0, 8).unwrap();
        assert!((p - (1.0 - 1.0 / 256.0)).abs() < 1e-9);
        // Plug back: the bound holds at p and fails just below it.
        let h = 3.5;
        let p = fano_lower_bound(h, 8).unwrap();
        let g = |p: f64| binary_entropy(p) + p * 255f64.log2();
        assert!(g(p) >= h - 1e-12);
        assert!(g(p - 1e-8) < h);
        assert!(fano_lower_bound(9.0, 8).is_err());
        assert!(fano_lower_bound(-0.1, 8).is_err());
    }

    #[test]
    fn pd_edge_cases() {
        for m in 0..=20 {
            assert_eq!(pd_elisha(40, 0, m).unwrap().p_d, 0.0);
        }
        for k in 0..=40 {
            assert_eq!(pd_elisha(40, k, 0).unwrap().p_d, 0.0);
        }
        for l in [8usize, 16, 40] {
            for m in 1..=8 {
                assert_eq!(pd_elisha(l, l, m).unwrap().p_d, 1.0);
            }
        }
        // 2^(L-K) = 64 cut-sets cannot hold 256 distinct symbols.
        assert_eq!(pd_elisha(40, 34, 8).unwrap().p_d, 1.0);
        assert!(pd_elisha(65, 1, 1).is_err());
        assert!(pd_elisha(40, 1, 41).is_err());
    }

    #[test]
    fn pd_matches_high_precision_references() {
        // Values from a 40-digit mpmath evaluation of the same product.
        let cases = [
            (40, 6, 16, 0.115_776_266_663_510_62),
            (16, 4, 4, 0.027_127_945_010_348_301),
            (40, 20, 8, 0.030_650_865_980_542_32),
            (40, 4, 20, 0.999_446_934_090_866_2),
            (40, 10, 8, 3.036_822_421_565_148_7e-5),
        ];
        for (l, k, m, want) in cases {
            let got = pd_elisha(l, k, m).unwrap().p_d;
            assert!(close(got, want, 1e-9), "({l},{k},{m}): {got} vs {want}");
        }
        assert!(close(pd_elisha_real(40, 15.5, 8), 1.374_702_616_992_148_3e-3, 1e-9));
    }

    #[test]
    fn pd_euler_maclaurin_branch() {
        // ln-survival references from log-gamma at 80 digits.
        let cases = [
            (64u32, 3.0, 30u32, -0.218_749_999_834_471_96),
            (60, 2.0, 28, -0.093_749_999_687_133_82),
            (40, 16.0, 24, -16_777_078.762_651_878),
            (48, 20.0, 26, -9_190_804.629_944_309),
            (40, 14.0, 26, -67_106_806.028_510_70),
            (64, 30.0, 33, -2_635_845_646.014_282_3),
        ];
        for (l, k, m, want) in cases {
            let got = ln_survival(l, k, m);
            assert!(close(got, want, 1e-9), "({l},{k},{m}): {got} vs {want}");
        }
        assert!(close(pd_elisha(64, 3, 30).unwrap().p_d, 0.196_477_426_177_933_75, 1e-9));
    }

    #[test]
    fn pd_monotone_at_l40() {
        for m in 0..=40 {
            let mut prev = 0.0;
            for k in 0..=40 {
                let p = pd_elisha(40, k, m).unwrap().p_d;
                assert!((0.0..=1.0).contains(&p));
                assert!(p >= prev, "k not monotone at m={m}, k={k}");
                prev = p;
            }
        }
        for k in 0..=40 {
            let mut prev = 0.0;
            for m in 0..=40 {
                let p = pd_elisha(40, k, m).unwrap().p_d;
                assert!(p >= prev, "m not monotone at k={k}, m={m}");
                prev = p;
            }
        }
    }

    #[test]
    fn invert_pd_reproduces_bisection_reference() {
        // mpmath bisection: K* for (L=40, M=8, P_D=0.5) = 24.4742709787382
        let k = invert_pd_for_k(40, 8, 0.5).unwrap();
        assert!((k - 24.474_270_978_738_2).abs() < 1e-6);
        let k = invert_pd_for_k(40, 16, 0.1).unwrap();
        assert!((k - 5.779_925_412_995_22).abs() < 1e-6);
        assert!(invert_pd_for_k(40, 0, 0.5).is_none());
    }

    #[test]
    fn operating_point_k_for_pc() {
        assert_eq!(k_for_pc_elisha(40, 1e-10), Some(6));
    }

    #[test]
    fn pd_montecarlo_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let s0 = Scheme::new(SchemeConfig::elisha(16, 16, 0, 64, DigestBackend::RandomPermutation))
            .unwrap();
        assert_eq!(pd_montecarlo(&s0, 4, 20_000, &mut rng).unwrap().p_d, 0.0);

        let s16 = Scheme::new(SchemeConfig::elisha(16, 16, 16, 64, DigestBackend::RandomPermutation))
            .unwrap();
        assert_eq!(pd_montecarlo(&s16, 1, 500, &mut rng).unwrap().p_d, 1.0);

        let s4 = Scheme::new(SchemeConfig::elisha(16, 16, 4, 64, DigestBackend::RandomPermutation))
            .unwrap();
        let mc = pd_montecarlo(&s4, 4, 100_000, &mut rng).unwrap();
        let want = pd_elisha(16, 4, 4).unwrap().p_d;
        assert!((mc.p_d - want).abs() <= 3.0 * sigma(want, 100_000), "{} vs {want}", mc.p_d);
        assert!(mc.ci.unwrap().low < want && want < mc.ci.unwrap().high);

        assert!(pd_montecarlo(&s4, 4, 0, &mut rng).is_err());
        let plain = Scheme::new(SchemeConfig::plain(16)).unwrap();
        assert!(pd_montecarlo(&plain, 4, 10, &mut rng).is_err());
    }

    #[test]
    fn pd_montecarlo_sweep_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (l, k, m) in [(12, 2, 3), (16, 6, 3), (20, 8, 4), (20, 12, 2)] {
            let s = Scheme::new(SchemeConfig::elisha(l, l, k, 32, DigestBackend::RandomPermutation))
                .unwrap();
            let trials = 20_000;
            let mc = pd_montecarlo(&s, m, trials, &mut rng).unwrap().p_d;
            let want = pd_elisha(l, k, m).unwrap().p_d;
            assert!((mc - want).abs() <= 3.0 * sigma(want, trials).max(1e-4), "({l},{k},{m})");
        }
    }

    #[test]
    fn wilson_interval_sane() {
        let ci = wilson_interval(50, 100);
        assert!(ci.low < 0.5 && ci.high > 0.5);
        assert_eq!(wilson_interval(0, 10).low, 0.0);
    }
}
