//! Slot-level simulation of RA contention resolution with a covert pair
//! (Trudy transmitting, Ricky listening) and Poisson background load.
//!
//! Each slot is one exchange plus back-off. Trudy and the slot's background
//! UEs contend; the station answers exactly one Msg3, chosen uniformly, with
//! a single Msg4 that every contender and Ricky observe.

use std::collections::{HashMap, HashSet};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::adversary::{observe, random_word, Codebook, DecodeResult};
use crate::analytics::{wilson_interval, CollisionStats};
use crate::bitcore::BitString;
use crate::error::{Error, Result};
use crate::schemes::{Decision, Scheme, SchemeConfig};

pub const DEFAULT_EXCHANGE_MS: u64 = 30;
pub const DEFAULT_BACKOFF_MS: u64 = 10;
pub const MIN_PC_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub scheme: SchemeConfig,
    pub exchange_ms: u64,
    pub backoff_ms: u64,
    /// Mean number of background UEs contending per slot.
    pub background_rate: f64,
    pub duration_s: f64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(scheme: SchemeConfig, seed: u64) -> Self {
        Self {
            scheme,
            exchange_ms: DEFAULT_EXCHANGE_MS,
            backoff_ms: DEFAULT_BACKOFF_MS,
            background_rate: 0.0,
            duration_s: 60.0,
            seed,
        }
    }

    pub fn slot_ms(&self) -> u64 {
        self.exchange_ms + self.backoff_ms
    }

    pub fn validate(&self) -> Result<()> {
        self.scheme.validate()?;
        if self.exchange_ms == 0 {
            return Err(Error::InvalidConfig("exchange_ms must be positive".into()));
        }
        if !(self.background_rate >= 0.0 && self.background_rate.is_finite()) {
            return Err(Error::InvalidConfig("background_rate must be a finite value >= 0".into()));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidConfig("duration_s must be positive".into()));
        }
        Ok(())
    }

    fn max_slots(&self) -> u64 {
        (self.duration_s * 1000.0 / self.slot_ms() as f64).floor() as u64
    }
}

/// Result of one covert session. Field order is the serialised order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub seed: u64,
    pub attempts: u64,
    pub trudy_wins: u64,
    pub chunks_sent: u64,
    pub covert_bits_delivered: u64,
    pub simulated_ms: u64,
    pub goodput_bps: f64,
    /// Share of Trudy's own broadcasts that Ricky could not decode.
    pub disruption_rate: f64,
    /// Share of Ricky's accepted decodes that were Trudy's actual chunk;
    /// `None` when Ricky accepted nothing.
    pub attribution_accuracy: Option<f64>,
    pub background_broadcasts: u64,
    pub false_accepts: u64,
    pub false_accept_rate: f64,
    pub contention_pairs: u64,
    pub identity_collisions: u64,
    pub empirical_p_c: f64,
    pub empirical_p_c_ci_low: f64,
    pub empirical_p_c_ci_high: f64,
    pub liveness_violations: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Runs one session with the config's own seed.
pub fn simulate(sim: &SimConfig, book: &Codebook, message_bits: u64) -> Result<TrialReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    run_covert_session(sim, book, message_bits, &mut rng)
}

/// Trudy sends `message_bits` in codeword-sized chunks until the message is
/// through or the simulated duration runs out.
pub fn run_covert_session<R: Rng + ?Sized>(
    sim: &SimConfig,
    book: &Codebook,
    message_bits: u64,
    rng: &mut R,
) -> Result<TrialReport> {
    sim.validate()?;
    let m = book.m_bits() as u64;
    if m == 0 {
        return Err(Error::InvalidArgument("codebook carries no information".into()));
    }
    if message_bits < m {
        return Err(Error::InvalidArgument(format!(
            "message of {message_bits} bits is shorter than one {m}-bit chunk"
        )));
    }
    if book.n_bits() != sim.scheme.n_bits {
        return Err(Error::WidthMismatch {
            expected: sim.scheme.n_bits,
            found: book.n_bits(),
        });
    }
    let scheme = Scheme::with_oracle_seed(sim.scheme, sim.seed)?;
    let poisson = if sim.background_rate > 0.0 {
        Some(Poisson::new(sim.background_rate).map_err(|e| Error::InvalidConfig(e.to_string()))?)
    } else {
        None
    };
    let n = sim.scheme.n_bits;
    let total_chunks = message_bits.div_ceil(m);

    let mut attempts = 0u64;
    let mut trudy_wins = 0u64;
    let mut chunk = 0u64;
    let mut delivered = 0u64;
    let mut disrupted = 0u64;
    let mut accepted = 0u64;
    let mut correctly_attributed = 0u64;
    let mut background_broadcasts = 0u64;
    let mut false_accepts = 0u64;
    let mut pairs = 0u64;
    let mut collisions = 0u64;
    let mut liveness_violations = 0u64;

    let mut pending: Option<BitString> = None;
    while chunk < total_chunks && attempts < sim.max_slots() {
        attempts += 1;
        let sent = match pending {
            Some(w) => w,
            None => {
                let w = book.word(rng.random_range(0..book.len()))?;
                pending = Some(w);
                w
            }
        };
        let n_background = poisson.as_ref().map_or(0, |p| p.sample(rng) as usize);
        let mut ids = Vec::with_capacity(1 + n_background);
        ids.push(sent);
        for _ in 0..n_background {
            ids.push(random_word(n, rng)?);
        }
        let winner = rng.random_range(0..ids.len());
        let y = scheme.obfuscate(&ids[winner], rng)?;

        let mut trudy_proceeds = winner == 0;
        for (i, id) in ids.iter().enumerate() {
            let d = scheme.decide(&y, id)?;
            if i == winner {
                liveness_violations += (d != Decision::Proceed) as u64;
            } else {
                pairs += 1;
                if d == Decision::Proceed {
                    collisions += 1;
                    trudy_proceeds |= i == 0;
                }
            }
        }

        let obs = observe(&y, book, &scheme)?;
        let decoded = match obs.outcome.result {
            DecodeResult::Decoded(w) if !obs.aliased => Some(w),
            _ => None,
        };
        if decoded.is_some() {
            accepted += 1;
        }
        if winner == 0 {
            trudy_wins += 1;
            if decoded == Some(sent) {
                correctly_attributed += 1;
                delivered += m.min(message_bits - chunk * m);
            } else {
                disrupted += 1;
            }
        } else {
            background_broadcasts += 1;
            false_accepts += decoded.is_some() as u64;
        }
        if trudy_proceeds {
            chunk += 1;
            pending = None;
        }
    }

    let simulated_ms = attempts * sim.slot_ms();
    let ci = wilson_interval(collisions, pairs);
    Ok(TrialReport {
        seed: sim.seed,
        attempts,
        trudy_wins,
        chunks_sent: chunk,
        covert_bits_delivered: delivered,
        simulated_ms,
        goodput_bps: ratio(delivered * 1000, simulated_ms),
        disruption_rate: ratio(disrupted, trudy_wins),
        attribution_accuracy: (accepted > 0).then(|| ratio(correctly_attributed, accepted)),
        background_broadcasts,
        false_accepts,
        false_accept_rate: ratio(false_accepts, background_broadcasts),
        contention_pairs: pairs,
        identity_collisions: collisions,
        empirical_p_c: ratio(collisions, pairs),
        empirical_p_c_ci_low: ci.low,
        empirical_p_c_ci_high: ci.high,
        liveness_violations,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ContentionResult {
    Resolved,
    IdentityCollision,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContentionOutcome {
    pub result: ContentionResult,
    /// Whether contender 1, whose Msg3 was received, decided to proceed.
    pub winner_proceeded: bool,
}

/// One contention among `n_contenders` UEs with i.i.d. uniform identities;
/// contender 1 is the one the station answers.
pub fn contention_trial<R: Rng + ?Sized>(
    scheme: &Scheme,
    n_contenders: usize,
    rng: &mut R,
) -> Result<ContentionOutcome> {
    if n_contenders < 2 {
        return Err(Error::InvalidArgument("contention needs at least two UEs".into()));
    }
    let n = scheme.config().n_bits;
    let ids = (0..n_contenders)
        .map(|_| random_word(n, rng))
        .collect::<Result<Vec<_>>>()?;
    let y = scheme.obfuscate(&ids[0], rng)?;
    let winner_proceeded = scheme.decide(&y, &ids[0])? == Decision::Proceed;
    let mut collided = false;
    for id in &ids[1..] {
        collided |= scheme.decide(&y, id)? == Decision::Proceed;
    }
    Ok(ContentionOutcome {
        result: if collided {
            ContentionResult::IdentityCollision
        } else {
            ContentionResult::Resolved
        },
        winner_proceeded,
    })
}

/// Two-UE contention repeated `trials` times.
pub fn estimate_pc_montecarlo<R: Rng + ?Sized>(
    cfg: &SchemeConfig,
    trials: u64,
    rng: &mut R,
) -> Result<CollisionStats> {
    if trials < MIN_PC_TRIALS {
        return Err(Error::InvalidArgument(format!(
            "Monte Carlo P_C needs at least {MIN_PC_TRIALS} trials"
        )));
    }
    let scheme = Scheme::with_oracle_seed(*cfg, rng.random())?;
    let mut hits = 0u64;
    for _ in 0..trials {
        let o = contention_trial(&scheme, 2, rng)?;
        hits += (o.result == ContentionResult::IdentityCollision) as u64;
    }
    Ok(CollisionStats::monte_carlo(hits, trials))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TopologyMode {
    SingleCell,
    /// Overlapping cells carry disjoint parts of the message.
    Parallel,
    /// Each link forwards the whole message from one cell to the next.
    RelayChain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelayLink {
    /// Cell where the relay receives.
    pub from: u32,
    /// Cell where the relay retransmits.
    pub to: u32,
    pub latency_attempts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub cells: Vec<(u32, SimConfig)>,
    pub links: Vec<RelayLink>,
    pub mode: TopologyMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopologyReport {
    pub mode: TopologyMode,
    /// Cells in run order (the relay path for chains).
    pub cells: Vec<(u32, TrialReport)>,
    pub aggregate_goodput_bps: f64,
    pub end_to_end_latency_attempts: u64,
}

impl Topology {
    /// Checks the topology and returns the order in which cells run.
    pub fn validate(&self) -> Result<Vec<usize>> {
        let bad = |m: &str| Err(Error::InvalidTopology(m.into()));
        if self.cells.is_empty() {
            return bad("no cells");
        }
        let index: HashMap<u32, usize> =
            self.cells.iter().enumerate().map(|(i, (id, _))| (*id, i)).collect();
        if index.len() != self.cells.len() {
            return bad("duplicate cell id");
        }
        for (_, c) in &self.cells {
            c.validate()?;
        }
        match self.mode {
            TopologyMode::SingleCell if self.cells.len() != 1 || !self.links.is_empty() => {
                bad("single-cell topology takes one cell and no links")
            }
            TopologyMode::Parallel if !self.links.is_empty() => bad("parallel cells share no links"),
            TopologyMode::SingleCell | TopologyMode::Parallel => Ok((0..self.cells.len()).collect()),
            TopologyMode::RelayChain => self.relay_path(&index),
        }
    }

    fn relay_path(&self, index: &HashMap<u32, usize>) -> Result<Vec<usize>> {
        let mut next: HashMap<usize, usize> = HashMap::new();
        let mut has_incoming = HashSet::new();
        for l in &self.links {
            let (Some(&a), Some(&b)) = (index.get(&l.from), index.get(&l.to)) else {
                return Err(Error::InvalidTopology(format!("link {}→{} names an unknown cell", l.from, l.to)));
            };
            if next.insert(a, b).is_some() || !has_incoming.insert(b) {
                return Err(Error::InvalidTopology("relay links must form a single path".into()));
            }
        }
        let starts: Vec<usize> = (0..self.cells.len()).filter(|i| !has_incoming.contains(i)).collect();
        let [start] = starts[..] else {
            return Err(Error::InvalidTopology(if starts.is_empty() {
                "relay links contain a cycle".into()
            } else {
                "relay links must connect every cell into one path".into()
            }));
        };
        let mut path = vec![start];
        let mut seen = HashSet::from([start]);
        while let Some(&b) = next.get(path.last().expect("non-empty")) {
            if !seen.insert(b) {
                return Err(Error::InvalidTopology("relay links contain a cycle".into()));
            }
            path.push(b);
        }
        if path.len() != self.cells.len() {
            return Err(Error::InvalidTopology("relay links contain a cycle".into()));
        }
        Ok(path)
    }
}

/// Runs every cell of the topology and combines their reports.
///
/// Parallel cells split the message evenly and their goodputs add up. A
/// relay chain carries the full message through every cell, so it moves at
/// the pace of its slowest cell and accumulates per-link latency.
pub fn run_topology<R: Rng + ?Sized>(
    topo: &Topology,
    book: &Codebook,
    message_bits: u64,
    rng: &mut R,
) -> Result<TopologyReport> {
    let order = topo.validate()?;
    let share = match topo.mode {
        TopologyMode::Parallel => message_bits.div_ceil(topo.cells.len() as u64),
        _ => message_bits,
    };
    let mut cells = Vec::with_capacity(order.len());
    for &i in &order {
        let (id, cfg) = &topo.cells[i];
        let mut cell_rng = ChaCha8Rng::seed_from_u64(rng.random());
        cells.push((*id, run_covert_session(cfg, book, share, &mut cell_rng)?));
    }
    let goodputs = cells.iter().map(|(_, r)| r.goodput_bps);
    let aggregate_goodput_bps = match topo.mode {
        TopologyMode::Parallel => goodputs.sum(),
        _ => goodputs.fold(f64::INFINITY, f64::min),
    };
    Ok(TopologyReport {
        mode: topo.mode,
        cells,
        aggregate_goodput_bps,
        end_to_end_latency_attempts: topo.links.iter().map(|l| l.latency_attempts).sum(),
    })
}
