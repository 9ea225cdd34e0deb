//! Monte Carlo concentration experiments.
//!
//! Two experiments run over a family of random finite metric spaces of
//! growing size `m`:
//!
//! * the concentration experiment for a kind sentence `σ` tallies how often
//!   `σ` is below `ε` on a random `m`-point substructure, and compares the
//!   failure rate with the bound `C(m,n)·(1-p)^⌊(m-n)/k⌋`, where `p` is the
//!   probability that a fresh block of `k` points witnesses the matrix for a
//!   fixed `n`-tuple;
//! * the zero-one experiment tallies how often an arbitrary sentence lands
//!   within `ε` of its value on the full host.
//!
//! Trial `t` at size `m` draws from the stream `(seed, m, t)`, so the tallies
//! do not depend on scheduling or thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generate::{build_approximation, sequential_random_space, ApproximationParams, GenError};
use crate::logic::{
    assignment_count, classify, CompiledFormula, Env, EvalError, EvalMode, Evaluation, Formula, KindSentenceSpec,
};
use crate::metric::{extract_substructure, FiniteMetricSpace};
use crate::rng::{self, Purpose};
use crate::sampler::{sample_indices, Replacement, SampleError, Sampler};
use crate::stats::{mean_sd, wilson, ConfidenceInterval, Z95};

/// Default cap on exact quantifier assignments per experiment.
pub const DEFAULT_BUDGET: f64 = 1e8;

/// Default trial count for estimating `p`.
pub const DEFAULT_P_TRIALS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExperimentError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("sentence is not a kind ∀∃-sentence")]
    NotKind,
    #[error(
        "exact evaluation needs about {needed:.3e} assignments, over the budget of {budget:.3e}; use sampled mode"
    )]
    EvalBudgetExceeded { needed: f64, budget: f64 },
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Generate(#[from] GenError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

fn domain<T>(msg: impl Into<String>) -> Result<T, ExperimentError> {
    Err(ExperimentError::Domain(msg.into()))
}

/// `C(m,n)·(1-p)^⌊(m-n)/k⌋`, computed in log space and clamped to `[0,1]`.
pub fn holdout_bound(m: u64, n: u64, k: u64, p: f64) -> Result<f64, ExperimentError> {
    if n < 1 || k < 1 || m < n {
        return domain(format!("holdout_bound needs m >= n >= 1 and k >= 1, got m={m} n={n} k={k}"));
    }
    if !(0.0..=1.0).contains(&p) {
        return domain(format!("p must lie in [0,1], got {p}"));
    }
    let q = (m - n) / k;
    if q == 0 {
        // C(m,n) >= 1, so the clamped bound is vacuous.
        return Ok(1.0);
    }
    if p == 1.0 {
        return Ok(0.0);
    }
    let small = n.min(m - n);
    let ln_choose: f64 = (1..=small).map(|i| (((m - small + i) as f64) / i as f64).ln()).sum();
    let ln_bound = ln_choose + q as f64 * (-p).ln_1p();
    Ok(ln_bound.exp().min(1.0))
}

/// Empirical probability that the matrix holds below `ε` on a fresh tuple.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PEstimate {
    pub successes: u64,
    pub trials: u64,
    pub p_hat: f64,
    pub ci: ConfidenceInterval,
    /// `p_hat` is 0 or 1; the interval is still defined.
    pub zero_variance: bool,
}

impl PEstimate {
    fn from_counts(successes: u64, trials: u64) -> Self {
        let p_hat = successes as f64 / trials as f64;
        Self {
            successes,
            trials,
            p_hat,
            ci: wilson(successes, trials, Z95),
            zero_variance: successes == 0 || successes == trials,
        }
    }
}

/// `p` together with the bound it implies at every `m`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundEstimate {
    pub p: PEstimate,
    pub n: usize,
    pub k: usize,
    /// `(m, holdout_bound(m, n, k, p.ci.lo))`.
    pub bound_curve: Vec<(usize, f64)>,
}

/// Free-variable points for the matrix: `xi -> i - 1`, `yj -> n + j - 1`.
fn matrix_points(compiled: &CompiledFormula, n: usize) -> Vec<usize> {
    let point = |v: &str| -> Option<usize> {
        let i: usize = v.get(1..)?.parse().ok().filter(|&i| i >= 1)?;
        match &v[..1] {
            "x" if i <= n => Some(i - 1),
            "y" => Some(n + i - 1),
            _ => None,
        }
    };
    compiled.free_vars().map(|v| point(v).expect("kind matrix variables are x1..xn, y1..yk")).collect()
}

fn estimate_p_with<F>(
    spec: &KindSentenceSpec,
    epsilon: f64,
    trials: usize,
    structure: F,
) -> Result<PEstimate, ExperimentError>
where
    F: Fn(u64) -> Result<FiniteMetricSpace, ExperimentError> + Sync,
{
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return domain(format!("epsilon must lie in (0,1], got {epsilon}"));
    }
    if trials == 0 {
        return domain("estimate_p needs at least one trial");
    }
    let compiled = CompiledFormula::new(&spec.matrix);
    let points = matrix_points(&compiled, spec.n);
    let hits = (0..trials as u64)
        .into_par_iter()
        .map(|t| {
            let block = structure(t)?;
            Ok(u64::from(compiled.eval_positional(&block, &points) < epsilon))
        })
        .collect::<Result<Vec<u64>, ExperimentError>>()?;
    Ok(PEstimate::from_counts(hits.iter().sum(), trials as u64))
}

/// Estimates `p` from `trials` draws of `n + k` distinct host points, the
/// first `n` bound to `x1..xn` and the rest to `y1..yk`.
pub fn estimate_p(
    spec: &KindSentenceSpec,
    sampler: &Sampler<'_>,
    epsilon: f64,
    trials: usize,
) -> Result<PEstimate, ExperimentError> {
    let host = sampler.host();
    let width = spec.n + spec.k;
    if width > host.size() {
        return Err(SampleError::TupleTooLarge { m: width, n: host.size() }.into());
    }
    estimate_p_with(spec, epsilon, trials, |t| {
        let mut rng = rng::stream(sampler.seed(), Purpose::EstimateP, &[t]);
        let idx = sample_indices(&mut rng, host.size(), width, Replacement::Without)?;
        Ok(extract_substructure(host, &idx).expect("sampled indices are distinct and in range"))
    })
}

/// Where random `m`-point spaces come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", deny_unknown_fields)]
pub enum Generator {
    /// Uniform distinct tuples from one Urysohn-sphere approximation.
    Approximation(ApproximationParams),
    /// A fresh sequentially generated space per trial; the reference value of
    /// the zero-one experiment comes from one space of `reference_size` points.
    Sequential { reference_size: usize, grid: u32 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub sentence: Formula,
    pub epsilon: f64,
    pub m_values: Vec<usize>,
    pub trials: usize,
    pub generator: Generator,
    pub seed: u64,
    pub eval_mode: EvalMode,
    /// Trials for estimating `p` (concentration experiment only).
    pub p_trials: usize,
    /// Cap on exact quantifier assignments.
    pub budget: f64,
}

impl ExperimentConfig {
    pub fn new(
        sentence: Formula,
        epsilon: f64,
        m_values: Vec<usize>,
        trials: usize,
        generator: Generator,
        seed: u64,
    ) -> Self {
        Self {
            sentence,
            epsilon,
            m_values,
            trials,
            generator,
            seed,
            eval_mode: EvalMode::Exact,
            p_trials: DEFAULT_P_TRIALS,
            budget: DEFAULT_BUDGET,
        }
    }

    fn validate(&self) -> Result<(), ExperimentError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return domain(format!("epsilon must lie in (0,1], got {}", self.epsilon));
        }
        if self.trials == 0 {
            return domain("trials must be at least 1");
        }
        if self.m_values.is_empty() || self.m_values[0] == 0 {
            return domain("m_values must be a nonempty list of positive sizes");
        }
        if self.m_values.windows(2).any(|w| w[0] >= w[1]) {
            return domain("m_values must be strictly increasing");
        }
        if !self.sentence.is_sentence() {
            return domain("formula has free variables");
        }
        if let EvalMode::Sampled { s: 0 } = self.eval_mode {
            return domain("sampled mode needs s >= 1");
        }
        match self.generator {
            Generator::Approximation(p) => {
                p.validate()?;
                let largest = *self.m_values.last().unwrap();
                if largest > p.target_size {
                    return Err(SampleError::TupleTooLarge { m: largest, n: p.target_size }.into());
                }
            }
            Generator::Sequential { reference_size: 0, .. } => {
                return domain("reference_size must be at least 1");
            }
            Generator::Sequential { .. } => {}
        }
        Ok(())
    }

    fn check_budget(&self, extra: f64) -> Result<(), ExperimentError> {
        if self.eval_mode != EvalMode::Exact {
            return Ok(());
        }
        let per_trial: f64 = self.m_values.iter().map(|&m| assignment_count(&self.sentence, m)).sum();
        let needed = per_trial * self.trials as f64 + extra;
        if needed > self.budget {
            return Err(ExperimentError::EvalBudgetExceeded { needed, budget: self.budget });
        }
        Ok(())
    }
}

/// One row of a trial series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SeriesRow {
    pub m: usize,
    pub trials: u64,
    pub good: u64,
    pub bad: u64,
    /// `good / trials`.
    pub fraction: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub mean_sigma: f64,
    pub sd_sigma: f64,
    pub bound: Option<f64>,
}

impl SeriesRow {
    fn from_values(m: usize, values: &[f64], good: u64, bound: Option<f64>) -> Self {
        let trials = values.len() as u64;
        let ci = wilson(good, trials, Z95);
        let (mean_sigma, sd_sigma) = mean_sd(values);
        Self {
            m,
            trials,
            good,
            bad: trials - good,
            fraction: good as f64 / trials as f64,
            ci_lo: ci.lo,
            ci_hi: ci.hi,
            mean_sigma,
            sd_sigma,
            bound,
        }
    }

    pub fn bad_fraction(&self) -> f64 {
        self.bad as f64 / self.trials as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialSeries {
    pub rows: Vec<SeriesRow>,
}

impl TrialSeries {
    pub const CSV_HEADER: &'static str = "m,trials,good,bad,fraction,ci_lo,ci_hi,mean_sigma,sd_sigma,bound";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let bound = r.bound.map(|b| b.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.m, r.trials, r.good, r.bad, r.fraction, r.ci_lo, r.ci_hi, r.mean_sigma, r.sd_sigma, bound
            ));
        }
        out
    }

    pub fn row(&self, m: usize) -> Option<&SeriesRow> {
        self.rows.iter().find(|r| r.m == m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConcentrationResult {
    pub series: TrialSeries,
    pub bound: BoundEstimate,
    /// Host size `N`, when sampling from an approximation.
    pub host_size: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroOneResult {
    pub series: TrialSeries,
    /// The sentence's value on the reference space.
    pub r_hat: Evaluation,
    pub reference_size: usize,
}

enum Population {
    Host(FiniteMetricSpace),
    Sequential { grid: u32 },
}

impl Population {
    fn prepare(config: &ExperimentConfig) -> Result<(Self, Option<FiniteMetricSpace>), ExperimentError> {
        Ok(match config.generator {
            Generator::Approximation(params) => (Population::Host(build_approximation(&params)?), None),
            Generator::Sequential { reference_size, grid } => {
                let seed = rng::derive_seed(config.seed, Purpose::Host, &[]);
                let reference = sequential_random_space(reference_size, grid, seed)?;
                (Population::Sequential { grid }, Some(reference))
            }
        })
    }

    fn host(&self) -> Option<&FiniteMetricSpace> {
        match self {
            Population::Host(h) => Some(h),
            Population::Sequential { .. } => None,
        }
    }

    /// The `m`-point space of trial `t` under `purpose`.
    fn structure(&self, seed: u64, purpose: Purpose, m: usize, t: u64) -> Result<FiniteMetricSpace, ExperimentError> {
        match self {
            Population::Host(host) => {
                let mut rng = rng::stream(seed, purpose, &[m as u64, t]);
                let idx = sample_indices(&mut rng, host.size(), m, Replacement::Without)?;
                Ok(extract_substructure(host, &idx).expect("sampled indices are distinct and in range"))
            }
            Population::Sequential { grid } => {
                let s = rng::derive_seed(seed, purpose, &[m as u64, t]);
                Ok(sequential_random_space(m, *grid, s)?)
            }
        }
    }
}

/// Values of the sentence on every trial at size `m`, in trial order.
fn sentence_values(
    config: &ExperimentConfig,
    compiled: &CompiledFormula,
    population: &Population,
    m: usize,
) -> Result<Vec<f64>, ExperimentError> {
    let env = Env::new();
    (0..config.trials as u64)
        .into_par_iter()
        .map(|t| {
            let space = population.structure(config.seed, Purpose::Trial, m, t)?;
            Ok(match config.eval_mode {
                EvalMode::Exact => compiled.eval_positional(&space, &[]),
                EvalMode::Sampled { s } => {
                    let seed = rng::derive_seed(config.seed, Purpose::SampledEval, &[m as u64, t]);
                    compiled.evaluate_sampled(&space, &env, s, seed)?.value
                }
            })
        })
        .collect()
}

/// Tallies `σ < ε` over random `m`-point spaces and attaches the bound.
pub fn run_concentration_experiment(config: &ExperimentConfig) -> Result<ConcentrationResult, ExperimentError> {
    config.validate()?;
    let spec = KindSentenceSpec::from_sentence(&config.sentence).ok_or(ExperimentError::NotKind)?;
    debug_assert!(classify(&config.sentence).is_kind());
    if let Some(&m) = config.m_values.iter().find(|&&m| m < spec.n) {
        return domain(format!("m = {m} is smaller than the sentence's n = {}", spec.n));
    }
    if config.p_trials == 0 {
        return domain("p_trials must be at least 1");
    }
    config.check_budget(0.0)?;

    let (population, _) = Population::prepare(config)?;
    let p = match &population {
        Population::Host(host) => {
            let sampler = Sampler::new(host, rng::derive_seed(config.seed, Purpose::EstimateP, &[]));
            estimate_p(&spec, &sampler, config.epsilon, config.p_trials)?
        }
        Population::Sequential { .. } => estimate_p_with(&spec, config.epsilon, config.p_trials, |t| {
            population.structure(config.seed, Purpose::EstimateP, spec.n + spec.k, t)
        })?,
    };

    let compiled = CompiledFormula::new(&config.sentence);
    let mut rows = Vec::with_capacity(config.m_values.len());
    let mut bound_curve = Vec::with_capacity(config.m_values.len());
    for &m in &config.m_values {
        let values = sentence_values(config, &compiled, &population, m)?;
        let good = values.iter().filter(|&&v| v < config.epsilon).count() as u64;
        let bound = holdout_bound(m as u64, spec.n as u64, spec.k as u64, p.ci.lo)?;
        bound_curve.push((m, bound));
        rows.push(SeriesRow::from_values(m, &values, good, Some(bound)));
    }
    Ok(ConcentrationResult {
        series: TrialSeries { rows },
        bound: BoundEstimate { p, n: spec.n, k: spec.k, bound_curve },
        host_size: population.host().map(FiniteMetricSpace::size),
    })
}

/// Tallies `|σ - r̂| < ε` over random `m`-point spaces, where `r̂` is the
/// sentence's value on the host (or on the reference space).
pub fn run_zero_one_experiment(config: &ExperimentConfig) -> Result<ZeroOneResult, ExperimentError> {
    config.validate()?;
    let (population, sequential_reference) = Population::prepare(config)?;
    let reference = match (&population, &sequential_reference) {
        (Population::Host(h), _) => h,
        (_, Some(r)) => r,
        _ => unreachable!("sequential populations carry a reference space"),
    };
    config.check_budget(assignment_count(&config.sentence, reference.size()))?;

    let compiled = CompiledFormula::new(&config.sentence);
    let r_seed = rng::derive_seed(config.seed, Purpose::SampledEval, &[u64::MAX]);
    let r_hat = compiled.evaluate_mode(reference, &Env::new(), config.eval_mode, r_seed)?;

    let mut rows = Vec::with_capacity(config.m_values.len());
    for &m in &config.m_values {
        let values = sentence_values(config, &compiled, &population, m)?;
        let good = values.iter().filter(|&&v| (v - r_hat.value).abs() < config.epsilon).count() as u64;
        rows.push(SeriesRow::from_values(m, &values, good, None));
    }
    Ok(ZeroOneResult { series: TrialSeries { rows }, r_hat, reference_size: reference.size() })
}
