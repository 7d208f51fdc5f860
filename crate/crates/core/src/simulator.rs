//! Round-by-round Monte-Carlo of the witness experiment.
//!
//! Every round the source emits a fresh copy of the state, each party picks a
//! setting uniformly at random and measures. With probability `alpha[x]`
//! (`beta[y]`) a party's detector fires and the outcome follows the Born rule;
//! otherwise the outcome is a random bit drawn as if the maximally mixed state
//! had been measured, i.e. `P(0) = (1 + a)/2`. For the unbiased observables
//! used in practice (`a = 0`) this is a fair coin. When both detectors fire,
//! the pair `(a, b)` is drawn from the four-outcome joint distribution so that
//! correlations are reproduced exactly.
//!
//! Randomness is counter-based: round `r` always consumes the same fixed
//! window of the ChaCha8 keystream for the given seed, so the tally does not
//! depend on how rounds are split across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::linalg::RMatrix;
use crate::measurements::MeasurementSet;
use crate::states::DensityMatrix;
use crate::witness::{expectations, EvaluationPath, WitnessReport};
use crate::{Error, Result};

/// Keystream words (u32) consumed per round: six u64 draws.
const WORDS_PER_ROUND: u128 = 12;
const CHUNK_ROUNDS: u64 = 1 << 16;

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub state: DensityMatrix,
    pub alice: MeasurementSet,
    pub bob: MeasurementSet,
    /// Detection efficiency per Alice setting.
    pub alpha: Vec<f64>,
    /// Detection efficiency per Bob setting.
    pub beta: Vec<f64>,
    pub rounds: u64,
    pub seed: u64,
}

impl ExperimentConfig {
    /// Lossless detectors on both sides.
    pub fn ideal(
        state: DensityMatrix,
        alice: MeasurementSet,
        bob: MeasurementSet,
        rounds: u64,
        seed: u64,
    ) -> Self {
        let alpha = vec![1.0; alice.len()];
        let beta = vec![1.0; bob.len()];
        Self { state, alice, bob, alpha, beta, rounds, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::InvalidConfig("rounds must be at least 1".into()));
        }
        if self.alpha.len() != self.alice.len() || self.beta.len() != self.bob.len() {
            return Err(Error::InvalidConfig(format!(
                "{} alpha / {} beta efficiencies for {} / {} settings",
                self.alpha.len(),
                self.beta.len(),
                self.alice.len(),
                self.bob.len()
            )));
        }
        if let Some(e) = self.alpha.iter().chain(&self.beta).find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::InvalidConfig(format!("efficiency {e} is outside [0, 1]")));
        }
        if self.state.d_a() != self.alice.d() || self.state.d_b() != self.bob.d() {
            return Err(Error::InvalidConfig(format!(
                "measurements act on {}x{} but the state is {}x{}",
                self.alice.d(),
                self.bob.d(),
                self.state.d_a(),
                self.state.d_b()
            )));
        }
        Ok(())
    }
}

/// Outcome counts `n(a,b|x,y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TallyTable {
    n_a: usize,
    n_b: usize,
    counts: Vec<[[u64; 2]; 2]>,
}

impl TallyTable {
    pub fn new(n_a: usize, n_b: usize) -> Self {
        Self {
            n_a,
            n_b,
            counts: vec![[[0; 2]; 2]; n_a * n_b],
        }
    }

    pub fn settings(&self) -> (usize, usize) {
        (self.n_a, self.n_b)
    }

    pub fn counts(&self, x: usize, y: usize) -> [[u64; 2]; 2] {
        self.counts[x * self.n_b + y]
    }

    pub fn set_counts(&mut self, x: usize, y: usize, cell: [[u64; 2]; 2]) {
        self.counts[x * self.n_b + y] = cell;
    }

    pub fn rounds_per_setting(&self, x: usize, y: usize) -> u64 {
        self.counts(x, y).iter().flatten().sum()
    }

    pub fn total_rounds(&self) -> u64 {
        self.counts.iter().flatten().flatten().sum()
    }

    fn record(&mut self, x: usize, y: usize, a: usize, b: usize) {
        self.counts[x * self.n_b + y][a][b] += 1;
    }

    fn merge(mut self, other: TallyTable) -> TallyTable {
        for (dst, src) in self.counts.iter_mut().zip(other.counts) {
            for a in 0..2 {
                for b in 0..2 {
                    dst[a][b] += src[a][b];
                }
            }
        }
        self
    }
}

/// Per-setting outcome distributions precomputed from the config.
struct RoundModel {
    n_a: usize,
    n_b: usize,
    /// Cumulative `P(00), P(00)+P(01), P(00)+P(01)+P(10)` per `(x, y)`.
    joint_cdf: Vec<[f64; 3]>,
    alice_p0: Vec<f64>,
    bob_p0: Vec<f64>,
    alice_lost_p0: Vec<f64>,
    bob_lost_p0: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    seed: u64,
}

fn prob_zero(mean: f64) -> f64 {
    ((1.0 + mean) / 2.0).clamp(0.0, 1.0)
}

impl RoundModel {
    fn new(config: &ExperimentConfig) -> Result<Self> {
        let (n_a, n_b) = (config.alice.len(), config.bob.len());
        let mut joint_cdf = Vec::with_capacity(n_a * n_b);
        let mut alice_p0 = vec![0.0; n_a];
        let mut bob_p0 = vec![0.0; n_b];
        for (x, ao) in config.alice.observables().iter().enumerate() {
            for (y, bo) in config.bob.observables().iter().enumerate() {
                let e = expectations(&config.state, ao, bo)?;
                let mut p = [0.0; 4];
                for (k, cell) in p.iter_mut().enumerate() {
                    let sa = if k / 2 == 0 { 1.0 } else { -1.0 };
                    let sb = if k % 2 == 0 { 1.0 } else { -1.0 };
                    *cell = ((1.0 + sa * e.marginal_a + sb * e.marginal_b + sa * sb * e.joint) / 4.0).max(0.0);
                }
                let total: f64 = p.iter().sum();
                p.iter_mut().for_each(|v| *v /= total);
                joint_cdf.push([p[0], p[0] + p[1], p[0] + p[1] + p[2]]);
                alice_p0[x] = prob_zero(e.marginal_a);
                bob_p0[y] = prob_zero(e.marginal_b);
            }
        }
        Ok(Self {
            n_a,
            n_b,
            joint_cdf,
            alice_p0,
            bob_p0,
            alice_lost_p0: config.alice.observables().iter().map(|o| prob_zero(o.a())).collect(),
            bob_lost_p0: config.bob.observables().iter().map(|o| prob_zero(o.a())).collect(),
            alpha: config.alpha.clone(),
            beta: config.beta.clone(),
            seed: config.seed,
        })
    }

    /// Simulate rounds `start..end` into a fresh table.
    fn run_range(&self, start: u64, end: u64) -> TallyTable {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_word_pos(start as u128 * WORDS_PER_ROUND);
        let mut table = TallyTable::new(self.n_a, self.n_b);
        let pairs = (self.n_a * self.n_b) as u128;
        for _ in start..end {
            let idx = ((rng.next_u64() as u128 * pairs) >> 64) as usize;
            let (x, y) = (idx / self.n_b, idx % self.n_b);
            let alice_hit = unit(rng.next_u64()) < self.alpha[x];
            let bob_hit = unit(rng.next_u64()) < self.beta[y];
            let born = unit(rng.next_u64());
            let lost_a = unit(rng.next_u64());
            let lost_b = unit(rng.next_u64());

            let bit = |u: f64, p0: f64| usize::from(u >= p0);
            let (a, b) = match (alice_hit, bob_hit) {
                (true, true) => {
                    let cdf = &self.joint_cdf[idx];
                    let k = cdf.iter().position(|c| born < *c).unwrap_or(3);
                    (k / 2, k % 2)
                }
                (true, false) => (bit(born, self.alice_p0[x]), bit(lost_b, self.bob_lost_p0[y])),
                (false, true) => (bit(lost_a, self.alice_lost_p0[x]), bit(born, self.bob_p0[y])),
                (false, false) => (bit(lost_a, self.alice_lost_p0[x]), bit(lost_b, self.bob_lost_p0[y])),
            };
            table.record(x, y, a, b);
        }
        table
    }
}

/// Uniform in `[0, 1)` from the top 53 bits.
fn unit(word: u64) -> f64 {
    (word >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Simulate `config.rounds` rounds; bit-identical for any thread count.
pub fn run(config: &ExperimentConfig) -> Result<TallyTable> {
    config.validate()?;
    let model = RoundModel::new(config)?;
    let chunks = config.rounds.div_ceil(CHUNK_ROUNDS);
    let table = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK_ROUNDS;
            model.run_range(start, (start + CHUNK_ROUNDS).min(config.rounds))
        })
        .reduce(|| TallyTable::new(model.n_a, model.n_b), TallyTable::merge);
    Ok(table)
}

/// Tallies rounded from the exact (loss-adjusted) outcome probabilities.
pub fn expected_tally(config: &ExperimentConfig, rounds_per_setting: u64) -> Result<TallyTable> {
    config.validate()?;
    let alice = config.alice.with_efficiencies(&config.alpha)?;
    let bob = config.bob.with_efficiencies(&config.beta)?;
    let mut table = TallyTable::new(alice.len(), bob.len());
    for (x, ao) in alice.observables().iter().enumerate() {
        for (y, bo) in bob.observables().iter().enumerate() {
            let e = expectations(&config.state, ao, bo)?;
            let mut cell = [[0u64; 2]; 2];
            for (a, row) in cell.iter_mut().enumerate() {
                for (b, n) in row.iter_mut().enumerate() {
                    let sa = if a == 0 { 1.0 } else { -1.0 };
                    let sb = if b == 0 { 1.0 } else { -1.0 };
                    let p = (1.0 + sa * e.marginal_a + sb * e.marginal_b + sa * sb * e.joint) / 4.0;
                    *n = (p.max(0.0) * rounds_per_setting as f64).round() as u64;
                }
            }
            table.set_counts(x, y, cell);
        }
    }
    Ok(table)
}

fn estimated_q(t: &TallyTable) -> Result<RMatrix> {
    let (n_a, n_b) = t.settings();
    if n_a != n_b {
        return Err(Error::SettingCountMismatch { alice: n_a, bob: n_b });
    }
    for x in 0..n_a {
        for y in 0..n_b {
            if t.rounds_per_setting(x, y) == 0 {
                return Err(Error::EmptySetting { x, y });
            }
        }
    }
    // Marginals pool over the partner's settings.
    let alice_mean: Vec<f64> = (0..n_a)
        .map(|x| {
            let (mut diff, mut total) = (0i64, 0u64);
            for y in 0..n_b {
                let c = t.counts(x, y);
                diff += (c[0][0] + c[0][1]) as i64 - (c[1][0] + c[1][1]) as i64;
                total += t.rounds_per_setting(x, y);
            }
            diff as f64 / total as f64
        })
        .collect();
    let bob_mean: Vec<f64> = (0..n_b)
        .map(|y| {
            let (mut diff, mut total) = (0i64, 0u64);
            for x in 0..n_a {
                let c = t.counts(x, y);
                diff += (c[0][0] + c[1][0]) as i64 - (c[0][1] + c[1][1]) as i64;
                total += t.rounds_per_setting(x, y);
            }
            diff as f64 / total as f64
        })
        .collect();
    Ok(RMatrix::from_fn(n_a, n_b, |x, y| {
        let c = t.counts(x, y);
        let same = (c[0][0] + c[1][1]) as i64;
        let differ = (c[0][1] + c[1][0]) as i64;
        let joint = (same - differ) as f64 / t.rounds_per_setting(x, y) as f64;
        joint - alice_mean[x] * bob_mean[y]
    }))
}

/// Plug-in estimate of `Q` and `W` from tallies.
///
/// The tally does not record local dimensions, so they are passed through
/// for the report.
pub fn estimate(t: &TallyTable, d_a: usize, d_b: usize) -> Result<WitnessReport> {
    Ok(WitnessReport::from_q(estimated_q(t)?, d_a, d_b, EvaluationPath::Estimated))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapInterval {
    pub low: f64,
    pub high: f64,
    /// Standard deviation of the resampled witness values.
    pub sigma: f64,
}

impl BootstrapInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.low <= value && value <= self.high
    }

    pub fn width(&self) -> f64 {
        self.high - self.low
    }
}

/// Multinomial bootstrap of every setting pair; percentile interval.
pub fn bootstrap_ci(t: &TallyTable, resamples: usize, level: f64, seed: u64) -> Result<BootstrapInterval> {
    if resamples < 100 {
        return Err(Error::InvalidParams(format!("need at least 100 resamples, got {resamples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParams(format!("level {level} must lie strictly between 0 and 1")));
    }
    estimated_q(t)?;
    let (n_a, n_b) = t.settings();

    let mut values: Vec<f64> = (0..resamples)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut sample = TallyTable::new(n_a, n_b);
            for x in 0..n_a {
                for y in 0..n_b {
                    sample.set_counts(x, y, resample_cell(t.counts(x, y), &mut rng)?);
                }
            }
            Ok(crate::linalg::determinant(&estimated_q(&sample)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    values.sort_by(|a, b| a.total_cmp(b));
    let tail = (1.0 - level) / 2.0;
    Ok(BootstrapInterval {
        low: quantile(&values, tail),
        high: quantile(&values, 1.0 - tail),
        sigma: var.sqrt(),
    })
}

fn resample_cell(cell: [[u64; 2]; 2], rng: &mut ChaCha8Rng) -> Result<[[u64; 2]; 2]> {
    let counts = [cell[0][0], cell[0][1], cell[1][0], cell[1][1]];
    let total: u64 = counts.iter().sum();
    let mut remaining_n = total;
    let mut remaining_mass = total;
    let mut out = [0u64; 4];
    for k in 0..3 {
        if remaining_n == 0 || remaining_mass == 0 {
            break;
        }
        let p = (counts[k] as f64 / remaining_mass as f64).min(1.0);
        let draw = Binomial::new(remaining_n, p)
            .map_err(|e| Error::InvalidParams(format!("binomial resampling failed: {e}")))?
            .sample(rng);
        out[k] = draw;
        remaining_n -= draw;
        remaining_mass -= counts[k];
    }
    out[3] = remaining_n;
    Ok([[out[0], out[1]], [out[2], out[3]]])
}

/// Linear interpolation between order statistics of a sorted slice.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}
