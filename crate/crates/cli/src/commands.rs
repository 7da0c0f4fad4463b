use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use racovert_core::adversary::{
    estimate, measure_disruption, preimage_attack, reconstruct, repetition_recovery_exact,
    repetition_recovery_independent, repetition_transmit, random_word, Codebook, DecodeResult,
    PreimageOutcome, Structure,
};
use racovert_core::analytics::{binomial_exact, pd_elisha, wilson_interval, Interval};
use racovert_core::bitcore::{weight_masks, BitString};
use racovert_core::schemes::{DigestBackend, Randomness, Scheme, SchemeConfig, Variant};
use racovert_core::sim::{
    run_covert_session, run_topology, RelayLink, SimConfig, Topology, TopologyMode,
};

use crate::config::{RunConfig, SIMULATE_KEYS};
use crate::output::{sci, Table};
use crate::CliError;

/// Largest exhaustive mask × codeword grid for the distance demo.
const MINDIST_EXHAUSTIVE_CAP: u128 = 2_000_000;

pub fn scheme_config(cfg: &RunConfig) -> Result<SchemeConfig, CliError> {
    let variant = Variant::parse(cfg.raw("scheme"))?;
    let n: usize = cfg.get("n")?;
    let k: usize = cfg.get("k")?;
    let sc = match variant {
        Variant::Plain => SchemeConfig::plain(n),
        Variant::KErrors => SchemeConfig::k_errors(n, k),
        Variant::KErasures => SchemeConfig::k_erasures(n, k),
        Variant::Elisha => SchemeConfig::elisha(
            n,
            cfg.get("l")?,
            k,
            cfg.get("salt_bits")?,
            DigestBackend::parse(cfg.raw("backend"))?,
        ),
    };
    sc.validate()?;
    Ok(sc)
}

pub fn sim_config(cfg: &RunConfig) -> Result<SimConfig, CliError> {
    let sim = SimConfig {
        scheme: scheme_config(cfg)?,
        exchange_ms: cfg.get("exchange_ms")?,
        backoff_ms: cfg.get("backoff_ms")?,
        background_rate: cfg.get("background_rate")?,
        duration_s: cfg.get("duration_s")?,
        seed: cfg.get("seed")?,
    };
    sim.validate()?;
    Ok(sim)
}

fn codebook<R: Rng>(cfg: &RunConfig, rng: &mut R) -> Result<Codebook, CliError> {
    let path = cfg.raw("codebook");
    if !path.is_empty() {
        let text = std::fs::read_to_string(path)?;
        return Ok(Codebook::from_text(&text)?);
    }
    let structure: Structure = cfg.raw("structure").parse()?;
    Ok(Codebook::build(cfg.get("n")?, cfg.get("m")?, structure, rng)?)
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum SimulateReport {
    Single(racovert_core::sim::TrialReport),
    Topology(racovert_core::sim::TopologyReport),
}

impl SimulateReport {
    pub fn goodput_bps(&self) -> f64 {
        match self {
            SimulateReport::Single(r) => r.goodput_bps,
            SimulateReport::Topology(t) => t.aggregate_goodput_bps,
        }
    }
}

/// Builds the codebook and runs one session (or topology) from the seed.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateReport, CliError> {
    let sim = sim_config(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);
    let book = codebook(cfg, &mut rng)?;
    let message_bits: u64 = cfg.get("message_bits")?;
    let cells: u32 = cfg.get("cells")?;
    let mode = match cfg.raw("topology") {
        "single" => return Ok(SimulateReport::Single(run_covert_session(&sim, &book, message_bits, &mut rng)?)),
        "parallel" => TopologyMode::Parallel,
        "relay" => TopologyMode::RelayChain,
        other => return Err(CliError::Config(format!("topology `{other}` is not single, parallel or relay"))),
    };
    let hop_latency: u64 = cfg.get("hop_latency")?;
    let topo = Topology {
        cells: (0..cells)
            .map(|i| (i, SimConfig { seed: sim.seed.wrapping_add(i as u64), ..sim }))
            .collect(),
        links: match mode {
            TopologyMode::RelayChain => (1..cells)
                .map(|i| RelayLink { from: i - 1, to: i, latency_attempts: hop_latency })
                .collect(),
            _ => Vec::new(),
        },
        mode,
    };
    Ok(SimulateReport::Topology(run_topology(&topo, &book, message_bits, &mut rng)?))
}

/// One simulate run per value of `param`; other keys stay fixed.
pub fn sweep(cfg: &RunConfig) -> Result<Table, CliError> {
    let param = cfg.raw("param").to_string();
    if param.is_empty() || cfg.raw("values").is_empty() {
        return Err(CliError::Config("sweep needs param and values".into()));
    }
    if !SIMULATE_KEYS.iter().any(|k| k.name == param) {
        return Err(CliError::Config(format!("cannot sweep unknown key `{param}`")));
    }
    let mut t = Table::new(&[
        param.as_str(),
        "attempts",
        "covert_bits_delivered",
        "goodput_bps",
        "disruption_rate",
        "pd_closed_form",
        "empirical_p_c",
        "false_accept_rate",
        "liveness_violations",
    ]);
    for value in cfg.raw("values").split(',').map(str::trim) {
        let mut point = cfg.clone();
        point.set(&param, value)?;
        if point.raw("topology") != "single" {
            return Err(CliError::Config("sweep runs single-cell sessions only".into()));
        }
        let SimulateReport::Single(r) = simulate(&point)? else {
            unreachable!("single topology yields a single report");
        };
        let sc = scheme_config(&point)?;
        let pd = if sc.variant == Variant::Elisha {
            pd_elisha(sc.l_bits, sc.k, point.get("m")?).map(|s| sci(s.p_d)).unwrap_or_default()
        } else {
            String::new()
        };
        t.push(vec![
            value.to_string(),
            r.attempts.to_string(),
            r.covert_bits_delivered.to_string(),
            sci(r.goodput_bps),
            sci(r.disruption_rate),
            pd,
            sci(r.empirical_p_c),
            sci(r.false_accept_rate),
            r.liveness_violations.to_string(),
        ]);
    }
    Ok(t)
}

#[derive(Debug, Clone, Serialize)]
pub struct PreimageReport {
    pub unsalted: UnsaltedResult,
    pub salted: SaltedResult,
}

#[derive(Debug, Clone, Serialize)]
pub struct UnsaltedResult {
    pub table_entries: usize,
    pub trials: u64,
    pub success_rate: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SaltedResult {
    pub salt_bits: usize,
    pub k: usize,
    pub table_feasible: bool,
    pub log2_cost_per_codeword: usize,
    pub log2_total_cost: usize,
    pub trials: u64,
    pub success_rate: f64,
    pub success_ci: Interval,
    pub predicted_success: f64,
    pub within_3_sigma: bool,
}

/// Preimage table against unsalted, unmasked ELISHA, then the configured
/// salted scheme decoded by the best remaining strategy.
pub fn preimage(cfg: &RunConfig) -> Result<PreimageReport, CliError> {
    let n: usize = cfg.get("n")?;
    let l: usize = cfg.get("l")?;
    let k: usize = cfg.get("k")?;
    let m: usize = cfg.get("m")?;
    let salt_bits: usize = cfg.get("salt_bits")?;
    let trials: u64 = cfg.get("trials")?;
    let backend = DigestBackend::parse(cfg.raw("backend"))?;
    if salt_bits == 0 {
        return Err(CliError::Config("preimage demo contrasts with a salted scheme; set salt_bits > 0".into()));
    }
    if trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("seed")?);
    let book = Codebook::build(n, m, Structure::Random, &mut rng)?;

    let plain = Scheme::new(SchemeConfig::elisha(n, l, 0, 0, backend))?;
    let PreimageOutcome::Table(table) = preimage_attack(&book, &plain)? else {
        unreachable!("unsalted scheme always yields a table");
    };
    let mut hits = 0u64;
    for _ in 0..trials {
        let w = book.word(rng.random_range(0..book.len()))?;
        let y = plain.obfuscate(&w, &mut rng)?;
        hits += (table.lookup(&y).result == DecodeResult::Decoded(w)) as u64;
    }

    let salted = Scheme::new(SchemeConfig::elisha(n, l, k, salt_bits, backend))?;
    let PreimageOutcome::Infeasible { log2_cost_per_codeword, log2_total_cost, .. } =
        preimage_attack(&book, &salted)?
    else {
        unreachable!("salted scheme never yields a table");
    };
    let rep = measure_disruption(&book, &salted, trials, &mut rng)?;
    let predicted = 1.0 - pd_elisha(l, k, m)?.p_d;
    let sigma = (predicted * (1.0 - predicted) / trials as f64).sqrt();
    Ok(PreimageReport {
        unsalted: UnsaltedResult {
            table_entries: table.len(),
            trials,
            success_rate: hits as f64 / trials as f64,
        },
        salted: SaltedResult {
            salt_bits,
            k,
            table_feasible: false,
            log2_cost_per_codeword,
            log2_total_cost,
            trials,
            success_rate: rep.success_rate,
            success_ci: wilson_interval(rep.success, trials),
            predicted_success: predicted,
            within_3_sigma: (rep.success_rate - predicted).abs() <= 3.0 * sigma,
        },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RepetitionReport {
    pub n: usize,
    pub k: usize,
    pub repeats: usize,
    pub trials: u64,
    pub single_shot_recovery: f64,
    pub recovery_rate: f64,
    pub recovery_ci: Interval,
    pub exact_recovery: f64,
    pub independent_approximation: f64,
}

/// Retransmission against K-erasures.
pub fn repetition(cfg: &RunConfig) -> Result<RepetitionReport, CliError> {
    let n: usize = cfg.get("n")?;
    let k: usize = cfg.get("k")?;
    let repeats: usize = cfg.get("repeats")?;
    let trials: u64 = cfg.get("trials")?;
    if trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }
    let sc = SchemeConfig::k_erasures(n, k);
    let scheme = Scheme::new(sc)?;
    if binomial_exact(n, k).is_none() {
        return Err(CliError::Config(format!("C({n}, {k}) too large for the exact recovery formula")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("seed")?);
    let mut ok = 0u64;
    for _ in 0..trials {
        let w = random_word(n, &mut rng)?;
        let ys = repetition_transmit(&w, repeats, &scheme, &mut rng)?;
        ok += (reconstruct(&ys, n)? == Some(w)) as u64;
    }
    Ok(RepetitionReport {
        n,
        k,
        repeats,
        trials,
        single_shot_recovery: repetition_recovery_exact(n, k, 1),
        recovery_rate: ok as f64 / trials as f64,
        recovery_ci: wilson_interval(ok, trials),
        exact_recovery: repetition_recovery_exact(n, k, repeats as u32),
        independent_approximation: repetition_recovery_independent(n, k, repeats as u32),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct DistanceRow {
    pub structure: String,
    pub min_distance: Option<usize>,
    pub success_rate: f64,
    pub exhaustive: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct MinDistanceReport {
    pub scheme: String,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub rows: Vec<DistanceRow>,
}

/// Distance codebooks against K-errors or K-erasures: a random book, the
/// `d = K + 1` regime, and the configured distance (default `2K + 1` for
/// errors, `K + 1` for erasures).
pub fn mindist(cfg: &RunConfig) -> Result<MinDistanceReport, CliError> {
    let variant = Variant::parse(cfg.raw("scheme"))?;
    let n: usize = cfg.get("n")?;
    let k: usize = cfg.get("k")?;
    let m: usize = cfg.get("m")?;
    let trials: u64 = cfg.get("trials")?;
    let sc = match variant {
        Variant::KErrors => SchemeConfig::k_errors(n, k),
        Variant::KErasures => SchemeConfig::k_erasures(n, k),
        other => {
            return Err(CliError::Config(format!(
                "mindist demo needs k-errors or k-erasures, not {other}"
            )))
        }
    };
    let scheme = Scheme::new(sc)?;
    let d: usize = match cfg.raw("d") {
        "" if variant == Variant::KErasures => k + 1,
        "" => 2 * k + 1,
        _ => cfg.get("d")?,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.get("seed")?);
    let mut rows = Vec::new();
    let mut structures = vec![Structure::Random, Structure::MinDistance(k + 1)];
    if d != k + 1 {
        structures.push(Structure::MinDistance(d));
    }
    for structure in structures {
        let book = Codebook::build(n, m, structure, &mut rng)?;
        let (success_rate, exhaustive) = distance_success(&book, &scheme, trials, &mut rng)?;
        rows.push(DistanceRow {
            structure: structure.to_string(),
            min_distance: book.min_pairwise_distance(),
            success_rate,
            exhaustive,
        });
    }
    Ok(MinDistanceReport {
        scheme: variant.to_string(),
        n,
        k,
        m,
        rows,
    })
}

fn distance_success<R: Rng>(
    book: &Codebook,
    scheme: &Scheme,
    trials: u64,
    rng: &mut R,
) -> Result<(f64, bool), CliError> {
    let n = book.n_bits();
    let k = scheme.config().k;
    let grid = binomial_exact(n, k).map(|c| c * book.len() as u128);
    let words = book.enumerate()?;
    let no_salt = BitString::zeros(0)?;
    if n < 64 && grid.is_some_and(|g| g <= MINDIST_EXHAUSTIVE_CAP) {
        let mut ok = 0u64;
        let mut total = 0u64;
        for mask in weight_masks(n, k)? {
            let r = Randomness { mask, salt: no_salt };
            for w in &words {
                let y = scheme.obfuscate_with(w, &r)?;
                ok += (estimate(&y, book, scheme)?.result == DecodeResult::Decoded(*w)) as u64;
                total += 1;
            }
        }
        return Ok((ok as f64 / total as f64, true));
    }
    if trials == 0 {
        return Err(CliError::Config("trials must be positive".into()));
    }
    let mut ok = 0u64;
    for _ in 0..trials {
        let w = words[rng.random_range(0..words.len())];
        let y = scheme.obfuscate(&w, rng)?;
        ok += (estimate(&y, book, scheme)?.result == DecodeResult::Decoded(w)) as u64;
    }
    Ok((ok as f64 / trials as f64, false))
}
