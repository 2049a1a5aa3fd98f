//! Bayesian prevalence model with the rate, sensitivity and specificity
//! integrated out, sampled by collapsed Gibbs over the latent labels.
//!
//! Each review `i` has an observed classifier output `f_i` and a latent true
//! label `y_i`. With Beta priors `alpha` (prevalence), `beta` (sensitivity)
//! and `gamma` (specificity) the site conditionals are
//!
//! ```text
//! P(y_i = 1 | rest) ~ (alpha_1 + N1) (beta_{f_i} + X_{f_i}) / (sum(beta) + N1)
//! P(y_i = 0 | rest) ~ (alpha_0 + N0) (gamma_{1-f_i} + Y_{f_i}) / (sum(gamma) + N0)
//! ```
//!
//! where every count excludes review `i`: `X_k` counts reviews with `y = 1`
//! and output `k`, `Y_k` those with `y = 0` and output `k`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of retained samples for a summary.
pub const MIN_RETAINED: usize = 30;

/// Beta hyperparameters `<a_0, a_1>`. Which outcome each index carries is
/// fixed per use: for `alpha` index 1 is "deceptive"; see
/// [`crate::calibration::hyperparams`] for `beta` and `gamma`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BetaPair(pub [f64; 2]);

impl BetaPair {
    pub const UNIFORM: BetaPair = BetaPair([1.0, 1.0]);

    pub fn new(a0: f64, a1: f64) -> Self {
        BetaPair([a0, a1])
    }

    pub fn sum(&self) -> f64 {
        self.0[0] + self.0[1]
    }

    /// Mean of the component at index 1.
    pub fn mean1(&self) -> f64 {
        self.0[1] / self.sum()
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.0.iter().all(|&a| a > 0.0 && a.is_finite()) {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "{name} hyperparameters must be positive and finite, got {:?}",
                self.0
            )))
        }
    }
}

impl Default for BetaPair {
    fn default() -> Self {
        BetaPair::UNIFORM
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Priors {
    pub alpha: BetaPair,
    pub beta: BetaPair,
    pub gamma: BetaPair,
}

impl Priors {
    pub fn uniform() -> Self {
        Priors {
            alpha: BetaPair::UNIFORM,
            beta: BetaPair::UNIFORM,
            gamma: BetaPair::UNIFORM,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate("alpha")?;
        self.beta.validate("beta")?;
        self.gamma.validate("gamma")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GibbsConfig {
    /// Full sweeps over all labels.
    pub iterations: usize,
    pub burn_in: usize,
    pub lag: usize,
    pub seed: u64,
    pub chains: usize,
    pub alpha: BetaPair,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            iterations: 70_000,
            burn_in: 20_000,
            lag: 50,
            seed: 0,
            chains: 3,
            alpha: BetaPair::UNIFORM,
        }
    }
}

impl GibbsConfig {
    pub fn retained_per_chain(&self) -> usize {
        self.iterations.saturating_sub(self.burn_in) / self.lag.max(1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lag == 0 {
            return Err(Error::invalid("lag must be at least 1"));
        }
        if self.burn_in >= self.iterations {
            return Err(Error::invalid("burn_in must be smaller than iterations"));
        }
        if self.chains == 0 {
            return Err(Error::invalid("need at least one chain"));
        }
        if self.retained_per_chain() < MIN_RETAINED {
            return Err(Error::invalid(format!(
                "configuration retains {} samples per chain, need at least {MIN_RETAINED}",
                self.retained_per_chain()
            )));
        }
        self.alpha.validate("alpha")
    }

    /// Sweep numbers are 1-based; sweep `s` is kept when it is past burn-in
    /// and `(s - burn_in)` is a multiple of the lag.
    pub fn is_retained(&self, sweep: usize) -> bool {
        sweep > self.burn_in && (sweep - self.burn_in).is_multiple_of(self.lag)
    }
}

/// Sufficient statistics: `x[k]` = #{y=1, f=k}, `y[k]` = #{y=0, f=k}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Counts {
    pub x: [u64; 2],
    pub y: [u64; 2],
}

impl Counts {
    pub fn n1(&self) -> u64 {
        self.x[0] + self.x[1]
    }

    pub fn n0(&self) -> u64 {
        self.y[0] + self.y[1]
    }

    pub fn total(&self) -> u64 {
        self.n1() + self.n0()
    }

    /// Recount from labels and outputs.
    pub fn tally(labels: &[bool], outputs: &[bool]) -> Self {
        let mut c = Counts::default();
        for (&y, &f) in labels.iter().zip(outputs) {
            c.add(y, f);
        }
        c
    }

    fn add(&mut self, y: bool, f: bool) {
        if y {
            self.x[f as usize] += 1;
        } else {
            self.y[f as usize] += 1;
        }
    }

    fn remove(&mut self, y: bool, f: bool) {
        if y {
            self.x[f as usize] -= 1;
        } else {
            self.y[f as usize] -= 1;
        }
    }

    /// Counts with one review (label `y`, output `f`) taken out.
    pub fn without(&self, y: bool, f: bool) -> Counts {
        let mut c = *self;
        c.remove(y, f);
        c
    }

    pub fn pi(&self, alpha: &BetaPair) -> f64 {
        (alpha.0[1] + self.n1() as f64) / (alpha.sum() + self.total() as f64)
    }

    pub fn eta(&self, beta: &BetaPair) -> f64 {
        (beta.0[1] + self.x[1] as f64) / (beta.sum() + self.n1() as f64)
    }

    pub fn theta(&self, gamma: &BetaPair) -> f64 {
        (gamma.0[1] + self.y[0] as f64) / (gamma.sum() + self.n0() as f64)
    }
}

/// Unnormalised weight of `y_i = 1` given the counts without review `i`.
pub fn conditional_weight_y1(f_i: bool, rest: &Counts, alpha: &BetaPair, beta: &BetaPair) -> f64 {
    let k = f_i as usize;
    let n1 = rest.n1() as f64;
    (alpha.0[1] + n1) * (beta.0[k] + rest.x[k] as f64) / (beta.sum() + n1)
}

/// Unnormalised weight of `y_i = 0` given the counts without review `i`.
pub fn conditional_weight_y0(f_i: bool, rest: &Counts, alpha: &BetaPair, gamma: &BetaPair) -> f64 {
    let k = f_i as usize;
    let n0 = rest.n0() as f64;
    (alpha.0[0] + n0) * (gamma.0[1 - k] + rest.y[k] as f64) / (gamma.sum() + n0)
}

/// `P(y_i = 1 | rest)`.
pub fn conditional_p1(f_i: bool, rest: &Counts, priors: &Priors) -> f64 {
    let w1 = conditional_weight_y1(f_i, rest, &priors.alpha, &priors.beta);
    let w0 = conditional_weight_y0(f_i, rest, &priors.alpha, &priors.gamma);
    w1 / (w1 + w0)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GibbsState {
    pub labels: Vec<bool>,
    pub counts: Counts,
}

impl GibbsState {
    fn init(outputs: &[bool], rng: &mut impl Rng) -> Self {
        let labels: Vec<bool> = outputs.iter().map(|_| rng.random_bool(0.5)).collect();
        let counts = Counts::tally(&labels, outputs);
        GibbsState { labels, counts }
    }

    /// One pass over every label in index order.
    fn sweep(&mut self, outputs: &[bool], priors: &Priors, rng: &mut impl Rng) {
        let [a0, a1] = priors.alpha.0;
        let b = priors.beta.0;
        let g = priors.gamma.0;
        let (sb, sg) = (priors.beta.sum(), priors.gamma.sum());
        // counts held as exact small integers in f64 for the inner loop
        let mut x = self.counts.x.map(|v| v as f64);
        let mut yc = self.counts.y.map(|v| v as f64);
        for (label, &f) in self.labels.iter_mut().zip(outputs) {
            let k = f as usize;
            let old = *label as u8 as f64;
            x[k] -= old;
            yc[k] -= 1.0 - old;
            let n1 = x[0] + x[1];
            let n0 = yc[0] + yc[1];
            // P(y=1) = w1 / (w1 + w0) with w1 = p1/q1 and w0 = p0/q0,
            // compared against u without dividing
            let p1 = (a1 + n1) * (b[k] + x[k]);
            let q1 = sb + n1;
            let p0 = (a0 + n0) * (g[1 - k] + yc[k]);
            let q0 = sg + n0;
            let num = p1 * q0;
            let u: f64 = rng.random();
            let y = u * (num + p0 * q1) < num;
            *label = y;
            let new = y as u8 as f64;
            x[k] += new;
            yc[k] += 1.0 - new;
        }
        self.counts.x = x.map(|v| v as u64);
        self.counts.y = yc.map(|v| v as u64);
    }
}

/// Initial labels drawn independently with probability 1/2.
pub fn init_state(outputs: &[bool], seed: u64) -> Result<GibbsState> {
    if outputs.is_empty() {
        return Err(Error::invalid("no classifier outputs to sample over"));
    }
    Ok(GibbsState::init(outputs, &mut chain_rng(seed, 0)))
}

fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sample {
    pub chain: usize,
    pub sweep: usize,
    pub counts: Counts,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSamples {
    pub chain: usize,
    pub samples: Vec<Sample>,
}

pub fn run_chain(
    outputs: &[bool],
    priors: &Priors,
    cfg: &GibbsConfig,
    chain: usize,
) -> Result<ChainSamples> {
    run_chain_observed(outputs, priors, cfg, chain, |_, _| {})
}

/// [`run_chain`] calling `observe(sweep, state)` after every sweep.
pub fn run_chain_observed(
    outputs: &[bool],
    priors: &Priors,
    cfg: &GibbsConfig,
    chain: usize,
    mut observe: impl FnMut(usize, &GibbsState),
) -> Result<ChainSamples> {
    cfg.validate()?;
    priors.validate()?;
    if outputs.is_empty() {
        return Err(Error::invalid("no classifier outputs to sample over"));
    }
    let mut rng = chain_rng(cfg.seed, chain);
    let mut state = GibbsState::init(outputs, &mut rng);
    let mut samples = Vec::with_capacity(cfg.retained_per_chain());
    for sweep in 1..=cfg.iterations {
        state.sweep(outputs, priors, &mut rng);
        observe(sweep, &state);
        if cfg.is_retained(sweep) {
            samples.push(Sample {
                chain,
                sweep,
                counts: state.counts,
            });
        }
    }
    Ok(ChainSamples { chain, samples })
}

/// All `cfg.chains` chains, each on its own RNG stream. Chains run on
/// separate threads where threads are available.
pub fn run_chains(
    outputs: &[bool],
    priors: &Priors,
    cfg: &GibbsConfig,
) -> Result<Vec<ChainSamples>> {
    cfg.validate()?;
    #[cfg(not(target_arch = "wasm32"))]
    if cfg.chains > 1 {
        return std::thread::scope(|s| {
            let handles: Vec<_> = (0..cfg.chains)
                .map(|chain| s.spawn(move || run_chain(outputs, priors, cfg, chain)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("gibbs chain panicked"))
                .collect()
        });
    }
    (0..cfg.chains)
        .map(|chain| run_chain(outputs, priors, cfg, chain))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub chain_pi_means: Vec<f64>,
    /// max - min of the per-chain means.
    pub pi_spread: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub n_test: u64,
    pub pi_mean: f64,
    pub pi_ci95: (f64, f64),
    pub eta_mean: f64,
    pub eta_ci95: (f64, f64),
    pub theta_mean: f64,
    pub theta_ci95: (f64, f64),
    pub priors: Priors,
    pub diagnostics: ChainDiagnostics,
    #[serde(skip)]
    pub retained_samples: Vec<Sample>,
}

impl PosteriorSummary {
    pub fn n_samples(&self) -> usize {
        self.retained_samples.len()
    }

    pub fn chains_agree(&self, tolerance: f64) -> bool {
        self.diagnostics.pi_spread <= tolerance
    }

    /// CSV dump of every retained sample.
    pub fn write_samples_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "chain,sweep,N1,X0,X1,Y0,Y1,pi_sample")?;
        for s in &self.retained_samples {
            let c = &s.counts;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                s.chain,
                s.sweep,
                c.n1(),
                c.x[0],
                c.x[1],
                c.y[0],
                c.y[1],
                c.pi(&self.priors.alpha)
            )?;
        }
        Ok(())
    }
}

/// Linear-interpolation empirical quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let h = (sorted.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

fn mean_and_ci(mut vals: Vec<f64>) -> (f64, (f64, f64)) {
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    vals.sort_by(f64::total_cmp);
    let ci = (quantile_sorted(&vals, 0.025), quantile_sorted(&vals, 0.975));
    (mean, ci)
}

/// Pools the chains and reconstructs prevalence, sensitivity and
/// specificity per retained sample.
pub fn summarize(
    chains: &[ChainSamples],
    priors: &Priors,
    n_test: u64,
) -> Result<PosteriorSummary> {
    let samples: Vec<Sample> = chains
        .iter()
        .flat_map(|c| c.samples.iter().copied())
        .collect();
    if samples.len() < MIN_RETAINED {
        return Err(Error::invalid(format!(
            "{} retained samples, need at least {MIN_RETAINED}",
            samples.len()
        )));
    }
    if let Some(s) = samples.iter().find(|s| s.counts.total() != n_test) {
        return Err(Error::invalid(format!(
            "sample from sweep {} covers {} reviews, expected {n_test}",
            s.sweep,
            s.counts.total()
        )));
    }
    let (pi_mean, pi_ci95) =
        mean_and_ci(samples.iter().map(|s| s.counts.pi(&priors.alpha)).collect());
    let (eta_mean, eta_ci95) =
        mean_and_ci(samples.iter().map(|s| s.counts.eta(&priors.beta)).collect());
    let (theta_mean, theta_ci95) = mean_and_ci(
        samples
            .iter()
            .map(|s| s.counts.theta(&priors.gamma))
            .collect(),
    );

    let chain_pi_means: Vec<f64> = chains
        .iter()
        .filter(|c| !c.samples.is_empty())
        .map(|c| {
            c.samples
                .iter()
                .map(|s| s.counts.pi(&priors.alpha))
                .sum::<f64>()
                / c.samples.len() as f64
        })
        .collect();
    let pi_spread = chain_pi_means
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max)
        - chain_pi_means.iter().copied().fold(f64::INFINITY, f64::min);

    Ok(PosteriorSummary {
        n_test,
        pi_mean,
        pi_ci95,
        eta_mean,
        eta_ci95,
        theta_mean,
        theta_ci95,
        priors: *priors,
        diagnostics: ChainDiagnostics {
            chain_pi_means,
            pi_spread,
        },
        retained_samples: samples,
    })
}

/// Run every chain and summarise.
pub fn estimate(outputs: &[bool], priors: &Priors, cfg: &GibbsConfig) -> Result<PosteriorSummary> {
    let chains = run_chains(outputs, priors, cfg)?;
    summarize(&chains, priors, outputs.len() as u64)
}
