//! Monte Carlo repeater chain: heralded links, purification, swapping.
//!
//! Links are black boxes described by a heralding probability and the pair
//! state they deliver. Physical links are generated one after another; every
//! failed purification or swap discards its inputs and regenerates them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::protocols::{entanglement_swap, purify_pairs, PairState, ParityImpl, PurifyOutcome, SwapOutcome};
use crate::qstate::DensityMatrix;

/// Name and version recorded next to every seed.
pub const RNG_ALGORITHM: &str = "ChaCha8 (rand_chacha 0.9), stream = shot index";

#[derive(Debug, Clone, PartialEq)]
pub struct LinkModel {
    pub p_gen: f64,
    pub raw_state: PairState,
    pub attempt_time: f64,
    /// Halve `p_gen` for the photons lost at the 50:50 input beamsplitter.
    pub halve_for_bs1: bool,
    /// Weight of white noise mixed into `raw_state` for the same beamsplitter.
    pub bs1_mixing: f64,
}

impl LinkModel {
    pub fn new(p_gen: f64, raw_state: PairState, attempt_time: f64) -> Result<Self> {
        LinkModel {
            p_gen,
            raw_state,
            attempt_time,
            halve_for_bs1: true,
            bs1_mixing: 0.0,
        }
        .validated()
    }

    pub fn validated(self) -> Result<Self> {
        if !(self.p_gen > 0.0 && self.p_gen <= 1.0) {
            return Err(Error::InvalidParameter(format!("p_gen = {} not in (0, 1]", self.p_gen)));
        }
        if !(self.attempt_time >= 0.0 && self.attempt_time.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "attempt_time = {} must be finite and non-negative",
                self.attempt_time
            )));
        }
        if !(0.0..=1.0).contains(&self.bs1_mixing) {
            return Err(Error::InvalidParameter(format!(
                "bs1_mixing = {} not in [0, 1]",
                self.bs1_mixing
            )));
        }
        self.raw_state.rho.validate()?;
        Ok(self)
    }

    pub fn with_bs1(mut self, halve: bool, mixing: f64) -> Result<Self> {
        self.halve_for_bs1 = halve;
        self.bs1_mixing = mixing;
        self.validated()
    }

    pub fn effective_p_gen(&self) -> f64 {
        if self.halve_for_bs1 {
            self.p_gen / 2.0
        } else {
            self.p_gen
        }
    }

    pub fn effective_state(&self) -> Result<PairState> {
        if self.bs1_mixing == 0.0 {
            return Ok(self.raw_state.clone());
        }
        let m = self.bs1_mixing;
        let rho = self
            .raw_state
            .rho
            .scaled(1.0 - m)
            .add(&DensityMatrix::maximally_mixed(2)?.scaled(m))?;
        PairState::new(rho)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainConfig {
    pub n_links: usize,
    pub link: LinkModel,
    pub parity: ParityImpl,
    pub purify_rounds: u32,
    pub rng_seed: u64,
}

impl ChainConfig {
    pub fn validated(self) -> Result<Self> {
        if self.n_links == 0 {
            return Err(Error::InvalidParameter("a chain needs at least one link".into()));
        }
        if self.purify_rounds > 16 {
            return Err(Error::InvalidParameter(format!(
                "purify_rounds = {} would need 2^{} raw pairs per link",
                self.purify_rounds, self.purify_rounds
            )));
        }
        let link = self.link.validated()?;
        Ok(ChainConfig { link, ..self })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Raw link generation; `tries` counts physical attempts.
    Generate,
    /// Purification round `r`, starting at 1.
    Purify(u32),
    /// Swap that extends a segment to `k + 1` links.
    Swap(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageStats {
    pub stage: Stage,
    pub tries: u64,
    pub failures: u64,
    /// Fidelity of the last successful output of this stage.
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub end_to_end_fidelity: f64,
    pub total_attempts: u64,
    pub elapsed_time: f64,
    pub per_stage: Vec<StageStats>,
}

/// Attempt until heralded.
pub fn generate_link(model: &LinkModel, rng: &mut impl Rng) -> Result<(u64, PairState)> {
    let attempts = sample_attempts(model.effective_p_gen(), rng)?;
    Ok((attempts, model.effective_state()?))
}

fn sample_attempts(p: f64, rng: &mut impl Rng) -> Result<u64> {
    let geo = Geometric::new(p).map_err(|e| Error::InvalidParameter(format!("p_gen: {e}")))?;
    Ok(1 + geo.sample(rng))
}

/// One round over a pool: neighbours are purified pairwise, failures dropped.
pub fn purify_pool(pool: &[PairState], parity: &ParityImpl, rng: &mut impl Rng) -> Result<Vec<PairState>> {
    if pool.len() % 2 == 1 {
        return Err(Error::PurificationStarved(format!(
            "{} pairs cannot be grouped into purification rounds",
            pool.len()
        )));
    }
    let mut out = Vec::with_capacity(pool.len() / 2);
    for chunk in pool.chunks(2) {
        let res = purify_pairs(&chunk[0], &chunk[1], parity)?;
        if rng.random::<f64>() < res.success_prob {
            out.push(res.pair);
        }
    }
    Ok(out)
}

struct Tally {
    stages: Vec<StageStats>,
}

/// Purification and swap results keyed by their exact inputs. A chain only
/// ever sees a handful of distinct pair states, so shots share the work.
#[derive(Default)]
struct Cache {
    purify: Vec<((PairState, PairState), PurifyOutcome)>,
    swap: Vec<((PairState, PairState), Vec<SwapOutcome>)>,
}

impl Cache {
    fn purify(&mut self, a: &PairState, b: &PairState, parity: &ParityImpl) -> Result<PurifyOutcome> {
        if let Some((_, out)) = self.purify.iter().find(|((x, y), _)| x == a && y == b) {
            return Ok(out.clone());
        }
        let out = purify_pairs(a, b, parity)?;
        self.purify.push(((a.clone(), b.clone()), out.clone()));
        Ok(out)
    }

    fn swap(&mut self, a: &PairState, b: &PairState, parity: &ParityImpl) -> Result<&[SwapOutcome]> {
        let pos = match self.swap.iter().position(|((x, y), _)| x == a && y == b) {
            Some(pos) => pos,
            None => {
                let out = entanglement_swap(a, b, parity)?;
                self.swap.push(((a.clone(), b.clone()), out));
                self.swap.len() - 1
            }
        };
        Ok(&self.swap[pos].1)
    }
}

impl Tally {
    fn new(cfg: &ChainConfig) -> Self {
        let mut stages = vec![Stage::Generate];
        stages.extend((1..=cfg.purify_rounds).map(Stage::Purify));
        stages.extend((1..cfg.n_links).map(Stage::Swap));
        Tally {
            stages: stages
                .into_iter()
                .map(|stage| StageStats {
                    stage,
                    tries: 0,
                    failures: 0,
                    fidelity: 0.0,
                })
                .collect(),
        }
    }

    fn record(&mut self, stage: Stage, tries: u64, outcome: Option<&PairState>) {
        let s = self
            .stages
            .iter_mut()
            .find(|s| s.stage == stage)
            .expect("stage list covers the config");
        s.tries += tries;
        match outcome {
            Some(pair) => s.fidelity = pair.fidelity(),
            None => s.failures += 1,
        }
    }
}

/// A link purified `level` times, regenerating both inputs when a round fails.
fn purified_link(
    cfg: &ChainConfig,
    level: u32,
    rng: &mut ChaCha8Rng,
    tally: &mut Tally,
    cache: &mut Cache,
) -> Result<PairState> {
    if level == 0 {
        let (attempts, pair) = generate_link(&cfg.link, rng)?;
        tally.record(Stage::Generate, attempts, Some(&pair));
        return Ok(pair);
    }
    loop {
        let a = purified_link(cfg, level - 1, rng, tally, cache)?;
        let b = purified_link(cfg, level - 1, rng, tally, cache)?;
        let res = cache.purify(&a, &b, &cfg.parity)?;
        if rng.random::<f64>() < res.success_prob {
            tally.record(Stage::Purify(level), 1, Some(&res.pair));
            return Ok(res.pair);
        }
        tally.record(Stage::Purify(level), 1, None);
    }
}

/// Sample one heralded swap outcome, or `None` when the Bell analysis fails.
fn sample_swap(
    left: &PairState,
    right: &PairState,
    parity: &ParityImpl,
    rng: &mut ChaCha8Rng,
    cache: &mut Cache,
) -> Result<Option<PairState>> {
    let outcomes = cache.swap(left, right, parity)?;
    let mut u = rng.random::<f64>();
    for o in outcomes {
        if u < o.prob {
            return Ok(o.pair.clone());
        }
        u -= o.prob;
    }
    Ok(None)
}

/// A segment of `n` links. A failed swap destroys both inputs, so the left
/// segment and the new link are rebuilt from scratch.
fn segment(
    cfg: &ChainConfig,
    n: usize,
    rng: &mut ChaCha8Rng,
    tally: &mut Tally,
    cache: &mut Cache,
) -> Result<PairState> {
    if n == 1 {
        return purified_link(cfg, cfg.purify_rounds, rng, tally, cache);
    }
    loop {
        let left = segment(cfg, n - 1, rng, tally, cache)?;
        let right = purified_link(cfg, cfg.purify_rounds, rng, tally, cache)?;
        let out = sample_swap(&left, &right, &cfg.parity, rng, cache)?;
        tally.record(Stage::Swap(n - 1), 1, out.as_ref());
        if let Some(pair) = out {
            return Ok(pair);
        }
    }
}

fn run_with(cfg: &ChainConfig, rng: &mut ChaCha8Rng, cache: &mut Cache) -> Result<RunStats> {
    let mut tally = Tally::new(cfg);
    let pair = segment(cfg, cfg.n_links, rng, &mut tally, cache)?;
    let total = tally.stages[0].tries;
    Ok(RunStats {
        end_to_end_fidelity: pair.fidelity().clamp(0.0, 1.0),
        total_attempts: total,
        elapsed_time: total as f64 * cfg.link.attempt_time,
        per_stage: tally.stages,
    })
}

fn shot_rng(seed: u64, shot: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(shot);
    rng
}

/// One chain run on RNG stream 0 of `rng_seed`.
pub fn run_chain(cfg: &ChainConfig) -> Result<RunStats> {
    run_shot(cfg, 0)
}

/// A run on stream `shot`; shots are independent and reproducible in any order.
pub fn run_shot(cfg: &ChainConfig, shot: u64) -> Result<RunStats> {
    let cfg = cfg.clone().validated()?;
    run_with(&cfg, &mut shot_rng(cfg.rng_seed, shot), &mut Cache::default())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShotSummary {
    pub shots: u64,
    pub mean_fidelity: f64,
    pub std_error: f64,
    pub mean_attempts: f64,
    pub mean_elapsed: f64,
}

pub fn summarize(runs: &[RunStats]) -> ShotSummary {
    let n = runs.len() as f64;
    let mean = runs.iter().map(|r| r.end_to_end_fidelity).sum::<f64>() / n;
    let var = if runs.len() > 1 {
        runs.iter().map(|r| (r.end_to_end_fidelity - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    ShotSummary {
        shots: runs.len() as u64,
        mean_fidelity: mean,
        std_error: (var / n).sqrt(),
        mean_attempts: runs.iter().map(|r| r.total_attempts as f64).sum::<f64>() / n,
        mean_elapsed: runs.iter().map(|r| r.elapsed_time).sum::<f64>() / n,
    }
}

/// `shots` independent runs on streams `0..shots`.
pub fn run_shots(cfg: &ChainConfig, shots: u64) -> Result<Vec<RunStats>> {
    run_shot_range(cfg, 0..shots)
}

/// Shots on the given streams, sharing one cache.
pub fn run_shot_range(cfg: &ChainConfig, shots: std::ops::Range<u64>) -> Result<Vec<RunStats>> {
    let cfg = cfg.clone().validated()?;
    let mut cache = Cache::default();
    shots
        .map(|s| run_with(&cfg, &mut shot_rng(cfg.rng_seed, s), &mut cache))
        .collect()
}

/// Exact end-to-end fidelity, conditioned on every heralded step succeeding.
///
/// Purified links are computed once (their inputs are identical), then every
/// sequence of Bell labels is enumerated with unnormalized branch states.
pub fn exact_chain_fidelity(cfg: &ChainConfig) -> Result<f64> {
    let cfg = cfg.clone().validated()?;
    let mut link = cfg.link.effective_state()?;
    for _ in 0..cfg.purify_rounds {
        link = purify_pairs(&link, &link, &cfg.parity)?.pair;
    }
    // (weight, normalized state) along each label path.
    let mut paths = vec![(1.0, link.clone())];
    for _ in 1..cfg.n_links {
        let mut next = Vec::with_capacity(paths.len() * 4);
        for (w, state) in &paths {
            for o in entanglement_swap(state, &link, &cfg.parity)? {
                if let Some(pair) = o.pair {
                    next.push((w * o.prob, pair));
                }
            }
        }
        paths = next;
    }
    let total: f64 = paths.iter().map(|(w, _)| w).sum();
    if total <= 0.0 {
        return Err(Error::ZeroProbability("no heralded path through the chain".into()));
    }
    Ok(paths.iter().map(|(w, s)| w * s.fidelity()).sum::<f64>() / total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parity::Protocol;
    use crate::qstate::BellLabel;

    fn model(p: f64, f: f64) -> LinkModel {
        LinkModel::new(p, PairState::werner(f).unwrap(), 1.0)
            .unwrap()
            .with_bs1(false, 0.0)
            .unwrap()
    }

    fn chain(n: usize, link: LinkModel, parity: ParityImpl, rounds: u32) -> ChainConfig {
        ChainConfig {
            n_links: n,
            link,
            parity,
            purify_rounds: rounds,
            rng_seed: 2024,
        }
    }

    #[test]
    fn certain_link_takes_one_attempt() {
        let m = model(1.0, 1.0);
        let mut rng = shot_rng(1, 0);
        for _ in 0..100 {
            let (a, pair) = generate_link(&m, &mut rng).unwrap();
            assert_eq!(a, 1);
            assert!((pair.fidelity() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn geometric_mean_attempts() {
        let m = model(0.5, 1.0);
        let mut rng = shot_rng(7, 0);
        let n = 100_000;
        let total: u64 = (0..n).map(|_| generate_link(&m, &mut rng).unwrap().0).sum();
        let mean = total as f64 / n as f64;
        assert!((mean - 2.0).abs() < 0.04, "{mean}");
    }

    #[test]
    fn bs1_knobs() {
        let m = model(0.5, 1.0).with_bs1(true, 0.2).unwrap();
        assert!((m.effective_p_gen() - 0.25).abs() < 1e-15);
        assert!((m.effective_state().unwrap().fidelity() - (0.8 + 0.2 / 4.0)).abs() < 1e-12);
        assert!(LinkModel::new(0.0, PairState::bell(BellLabel::PhiPlus), 1.0).is_err());
    }

    #[test]
    fn single_ideal_link() {
        let stats = run_chain(&chain(1, model(1.0, 1.0), ParityImpl::Ideal, 0)).unwrap();
        assert!((stats.end_to_end_fidelity - 1.0).abs() < 1e-12);
        assert_eq!(stats.total_attempts, 1);
        assert_eq!(stats.elapsed_time, 1.0);
    }

    #[test]
    fn two_link_werner_matches_oracle() {
        let cfg = chain(2, model(0.3, 0.95), ParityImpl::Ideal, 0);
        let exact = exact_chain_fidelity(&cfg).unwrap();
        let f: f64 = 0.95;
        assert!((exact - (f * f + (1.0 - f).powi(2) / 3.0)).abs() < 1e-12);
        // Ideal Bell analysis gives the same state for every label.
        let stats = run_chain(&cfg).unwrap();
        assert!((stats.end_to_end_fidelity - exact).abs() < 1e-12);
    }

    #[test]
    fn runs_are_deterministic() {
        let parity = ParityImpl::symmetric(Protocol::TwoClick, 0.9, 0.0).unwrap();
        let cfg = chain(3, model(0.2, 0.9), parity, 1);
        assert_eq!(run_chain(&cfg).unwrap(), run_chain(&cfg).unwrap());
        let other = ChainConfig {
            rng_seed: 99,
            ..cfg.clone()
        };
        assert_ne!(run_shots(&cfg, 5).unwrap(), run_shots(&other, 5).unwrap());
    }

    #[test]
    fn elapsed_is_attempts_times_period() {
        let parity = ParityImpl::symmetric(Protocol::OneClick, 0.8, 0.0).unwrap();
        let mut link = model(0.3, 0.9);
        link.attempt_time = 0.25;
        let cfg = chain(3, link, parity, 1);
        for stats in run_shots(&cfg, 20).unwrap() {
            assert_eq!(stats.elapsed_time, stats.total_attempts as f64 * 0.25);
            assert_eq!(stats.per_stage[0].stage, Stage::Generate);
            assert_eq!(stats.total_attempts, stats.per_stage[0].tries);
        }
    }

    #[test]
    fn purification_round_helps() {
        let parity = ParityImpl::symmetric(Protocol::TwoClick, 0.9, 0.0).unwrap();
        let zero = chain(2, model(0.5, 0.8), parity, 0);
        let one = ChainConfig {
            purify_rounds: 1,
            ..zero.clone()
        };
        let f0 = run_chain(&zero).unwrap().end_to_end_fidelity;
        let f1 = run_chain(&one).unwrap().end_to_end_fidelity;
        assert!(f1 >= f0, "{f1} < {f0}");
    }

    #[test]
    fn odd_pool_is_starved() {
        let pool = vec![PairState::werner(0.9).unwrap(); 3];
        let mut rng = shot_rng(0, 0);
        assert!(matches!(
            purify_pool(&pool, &ParityImpl::Ideal, &mut rng),
            Err(Error::PurificationStarved(_))
        ));
        assert!(purify_pool(&pool[..2], &ParityImpl::Ideal, &mut rng).unwrap().len() <= 1);
    }
}
