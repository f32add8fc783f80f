//! Monte Carlo oracles: correlated binary pairs, Gumbel-coupled event
//! times, and empirical power of the analysis tests.
//!
//! Randomness comes from ChaCha20 seeded with `SimConfig::seed`. Bulk samples
//! draw from stream 0; replication `r` of a power simulation draws from
//! stream `r + 1`, so replications can run in any order (or in parallel)
//! and still give bit-identical results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Exp1, Open01};
use serde::{Deserialize, Serialize};

use crate::binary::{joint_prob_from_correlation, BinaryDesignInput, BinaryMarginals};
use crate::design::{Arm, Endpoint, Sidedness, TestDesign, VarianceVariant};
use crate::error::{Error, Result};
use crate::survival::{build_composite_law, CompositeLaw, CopulaOrientation, SurvivalScenario};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_subjects: u64,
    pub n_replications: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_subjects: u64, n_replications: u64, seed: u64) -> Result<Self> {
        let config = SimConfig {
            n_subjects,
            n_replications,
            seed,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_subjects == 0 {
            return Err(Error::validation("n_subjects", "must be positive"));
        }
        if self.n_replications == 0 {
            return Err(Error::validation("n_replications", "must be positive"));
        }
        Ok(())
    }

    /// Total number of simulated subjects, saturating.
    pub fn draws(&self) -> u64 {
        self.n_subjects.saturating_mul(self.n_replications)
    }
}

/// Generator for a given stream of a seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub power_hat: f64,
    pub mc_standard_error: f64,
    pub n_replications: u64,
}

impl PowerEstimate {
    fn from_rejections(rejections: u64, n_replications: u64) -> Self {
        let p = rejections as f64 / n_replications as f64;
        PowerEstimate {
            power_hat: p,
            mc_standard_error: binomial_se(p, n_replications),
            n_replications,
        }
    }
}

/// `√(p(1−p)/n)`.
pub fn binomial_se(p: f64, n: u64) -> f64 {
    (p * (1.0 - p) / n as f64).sqrt()
}

/// Cell counts of the 2×2 table of (ε₁, ε₂) indicators.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinaryCounts {
    pub both: u64,
    pub eps1_only: u64,
    pub eps2_only: u64,
    pub neither: u64,
}

impl BinaryCounts {
    pub fn total(&self) -> u64 {
        self.both + self.eps1_only + self.eps2_only + self.neither
    }

    pub fn eps1(&self) -> u64 {
        self.both + self.eps1_only
    }

    pub fn eps2(&self) -> u64 {
        self.both + self.eps2_only
    }

    pub fn composite(&self) -> u64 {
        self.total() - self.neither
    }

    /// Empirical Pearson correlation of the two indicators.
    pub fn correlation(&self) -> f64 {
        let n = self.total() as f64;
        let (a, b) = (self.eps1() as f64 / n, self.eps2() as f64 / n);
        let ab = self.both as f64 / n;
        (ab - a * b) / (a * (1.0 - a) * b * (1.0 - b)).sqrt()
    }
}

/// Joint Bernoulli cell probabilities `[both, eps1 only, eps2 only]`.
#[derive(Debug, Clone, Copy)]
struct BinaryCells {
    cut_both: f64,
    cut_eps1: f64,
    cut_eps2: f64,
}

impl BinaryCells {
    fn new(p1: f64, p2: f64, p12: f64) -> Self {
        BinaryCells {
            cut_both: p12,
            cut_eps1: p1,
            cut_eps2: p1 + p2 - p12,
        }
    }

    fn draw<R: Rng>(&self, rng: &mut R, counts: &mut BinaryCounts) {
        let u: f64 = rng.random();
        if u < self.cut_both {
            counts.both += 1;
        } else if u < self.cut_eps1 {
            counts.eps1_only += 1;
        } else if u < self.cut_eps2 {
            counts.eps2_only += 1;
        } else {
            counts.neither += 1;
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, n: u64) -> BinaryCounts {
        let mut counts = BinaryCounts::default();
        for _ in 0..n {
            self.draw(rng, &mut counts);
        }
        counts
    }
}

/// Draws `n_subjects` pairs of indicators with joint probability
/// `p12 = joint_prob_from_correlation(marginals, rho)`.
pub fn sample_correlated_binary(marginals: &BinaryMarginals, rho: f64, config: &SimConfig) -> Result<BinaryCounts> {
    config.validate()?;
    let p12 = joint_prob_from_correlation(marginals, rho)?;
    let cells = BinaryCells::new(marginals.p1, marginals.p2, p12);
    Ok(cells.sample(&mut stream_rng(config.seed, 0), config.n_subjects))
}

/// Positive stable variate with Laplace transform `exp(−s^α)`, by Kanter's
/// representation.
fn positive_stable<R: Rng>(rng: &mut R, alpha: f64) -> f64 {
    if alpha == 1.0 {
        return 1.0;
    }
    let theta = std::f64::consts::PI * rng.sample::<f64, _>(Open01);
    let w: f64 = rng.sample(Exp1);
    let a = (alpha * theta).sin() / theta.sin().powf(1.0 / alpha);
    let b = ((1.0 - alpha) * theta).sin() / w;
    a * b.powf((1.0 - alpha) / alpha)
}

/// One draw `(U₁, U₂)` from the Gumbel copula with parameter `theta`,
/// returned as `(−ln U₁, −ln U₂)` to keep precision near 1.
fn gumbel_neg_logs<R: Rng>(rng: &mut R, theta: f64) -> (f64, f64) {
    let alpha = 1.0 / theta;
    let v = positive_stable(rng, alpha);
    let e1: f64 = rng.sample(Exp1);
    let e2: f64 = rng.sample(Exp1);
    ((e1 / v).powf(alpha), (e2 / v).powf(alpha))
}

/// Uniform pairs from the Gumbel copula, by the Marshall–Olkin frailty
/// construction `U_j = exp(−(E_j/V)^{1/θ})`.
pub fn sample_gumbel_uniforms(theta: f64, n: u64, seed: u64) -> Result<Vec<(f64, f64)>> {
    if !(theta >= 1.0 && theta.is_finite()) {
        return Err(Error::validation("theta", format!("Gumbel parameter {theta} must be finite and at least 1")));
    }
    let mut rng = stream_rng(seed, 0);
    Ok((0..n)
        .map(|_| {
            let (x, y) = gumbel_neg_logs(&mut rng, theta);
            ((-x).exp(), (-y).exp())
        })
        .collect())
}

/// One simulated subject.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimePair {
    pub t1: f64,
    pub t2: f64,
    /// `min(t1, t2)`.
    pub composite_time: f64,
    /// The composite occurs by the end of follow-up.
    pub composite_event: bool,
    /// ε₂ can be observed: always, unless ε₁ is terminal and happens first.
    pub eps2_observable: bool,
}

fn draw_times<R: Rng>(law: &CompositeLaw, arm: Arm, terminal: bool, rng: &mut R) -> TimePair {
    let [m1, m2] = law.margins(arm);
    let (x, y) = gumbel_neg_logs(rng, law.theta());
    // x = −ln U₁. Distribution orientation: F(T) = U, so the cumulative
    // hazard is −ln(1 − e^{−x}); survival orientation: S(T) = U.
    let (h1, h2) = match law.orientation {
        CopulaOrientation::Distribution => (-(-(-x).exp()).ln_1p(), -(-(-y).exp()).ln_1p()),
        CopulaOrientation::Survival => (x, y),
    };
    let t1 = m1.scale * h1.powf(1.0 / m1.shape);
    let t2 = m2.scale * h2.powf(1.0 / m2.shape);
    let composite_time = t1.min(t2);
    TimePair {
        t1,
        t2,
        composite_time,
        composite_event: composite_time <= law.tau,
        eps2_observable: !(terminal && t1 < t2),
    }
}

/// Event-time pairs for one arm of a scenario.
pub fn sample_gumbel_times(scenario: &SurvivalScenario, arm: Arm, config: &SimConfig) -> Result<Vec<TimePair>> {
    let law = build_composite_law(scenario)?;
    sample_law_times(&law, arm, scenario.eps1_terminal, config)
}

/// As [`sample_gumbel_times`] for an already built law.
pub fn sample_law_times(law: &CompositeLaw, arm: Arm, terminal: bool, config: &SimConfig) -> Result<Vec<TimePair>> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, 0);
    Ok((0..config.n_subjects)
        .map(|_| draw_times(law, arm, terminal, &mut rng))
        .collect())
}

fn split_arms(n_total: u64) -> (u64, u64) {
    let treatment = n_total / 2;
    (n_total - treatment, treatment)
}

fn reject(z: f64, design: &TestDesign) -> bool {
    match design.sidedness {
        Sidedness::One => z > design.z_alpha(),
        Sidedness::Two => z.abs() > design.z_alpha(),
    }
}

/// Two-proportion z statistic, positive when the treatment rate is lower.
pub fn two_proportion_z(events_c: u64, n_c: u64, events_t: u64, n_t: u64, variant: VarianceVariant) -> f64 {
    let (nc, nt) = (n_c as f64, n_t as f64);
    let (pc, pt) = (events_c as f64 / nc, events_t as f64 / nt);
    let var = match variant {
        VarianceVariant::Pooled => {
            let p = (events_c + events_t) as f64 / (nc + nt);
            p * (1.0 - p) * (1.0 / nc + 1.0 / nt)
        }
        VarianceVariant::Unpooled => pc * (1.0 - pc) / nc + pt * (1.0 - pt) / nt,
    };
    if var > 0.0 {
        (pc - pt) / var.sqrt()
    } else {
        0.0
    }
}

fn count_rejections<F>(n_replications: u64, replicate: F) -> u64
where
    F: Fn(u64) -> bool + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n_replications).into_par_iter().filter(|&r| replicate(r)).count() as u64
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n_replications).filter(|&r| replicate(r)).count() as u64
    }
}

fn check_n_total(n_total: u64) -> Result<()> {
    if n_total < 2 {
        return Err(Error::validation("n_total", "at least one subject per arm is required"));
    }
    Ok(())
}

/// Empirical power of the two-proportion test on the chosen endpoint.
/// `config.n_subjects` is ignored in favour of `n_total`.
pub fn simulate_power_binary(
    input: &BinaryDesignInput,
    endpoint: Endpoint,
    n_total: u64,
    config: &SimConfig,
) -> Result<PowerEstimate> {
    config.validate()?;
    check_n_total(n_total)?;
    let (n_c, n_t) = split_arms(n_total);
    let cells = |arm: Arm| -> Result<BinaryCells> {
        let (p1, p2) = input.arm_marginals(arm);
        let p12 = if p1 > 0.0 && p2 > 0.0 {
            joint_prob_from_correlation(&BinaryMarginals { p1, p2 }, input.rho)
                .map_err(|e| match e {
                    Error::InfeasibleAssociation {
                        field,
                        rho,
                        rho_min,
                        rho_max,
                        ..
                    } => Error::InfeasibleAssociation {
                        field,
                        arm,
                        rho,
                        rho_min,
                        rho_max,
                    },
                    e => e,
                })?
        } else {
            0.0
        };
        Ok(BinaryCells::new(p1, p2, p12))
    };
    let (control, treatment) = (cells(Arm::Control)?, cells(Arm::Treatment)?);
    let events = |c: &BinaryCounts| match endpoint {
        Endpoint::Relevant => c.eps1(),
        Endpoint::Composite => c.composite(),
    };
    let rejections = count_rejections(config.n_replications, |r| {
        let mut rng = stream_rng(config.seed, r + 1);
        let cc = control.sample(&mut rng, n_c);
        let tc = treatment.sample(&mut rng, n_t);
        let z = two_proportion_z(events(&cc), n_c, events(&tc), n_t, input.variance_variant);
        reject(z, &input.design)
    });
    Ok(PowerEstimate::from_rejections(rejections, config.n_replications))
}

/// Unweighted logrank statistic for two groups with administrative
/// censoring; positive when the treatment group has fewer events than
/// expected. `events` holds `(time, is_treatment)` for observed events only;
/// everyone else is censored after the last event.
pub fn logrank_z(events: &mut [(f64, bool)], n_c: u64, n_t: u64) -> f64 {
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (mut at_c, mut at_t) = (n_c as f64, n_t as f64);
    let (mut o_minus_e, mut var) = (0.0, 0.0);
    let mut i = 0;
    while i < events.len() {
        // Group tied event times.
        let t = events[i].0;
        let (mut d_c, mut d_t) = (0.0, 0.0);
        while i < events.len() && events[i].0 == t {
            if events[i].1 {
                d_t += 1.0;
            } else {
                d_c += 1.0;
            }
            i += 1;
        }
        let n = at_c + at_t;
        let d = d_c + d_t;
        o_minus_e += d_t - d * at_t / n;
        if n > 1.0 {
            var += d * (at_c / n) * (at_t / n) * (n - d) / (n - 1.0);
        }
        at_c -= d_c;
        at_t -= d_t;
    }
    if var > 0.0 {
        -o_minus_e / var.sqrt()
    } else {
        0.0
    }
}

/// Empirical power of the logrank test on the composite (or on ε₁ alone),
/// with censoring at the end of follow-up.
pub fn simulate_power_survival(
    scenario: &SurvivalScenario,
    endpoint: Endpoint,
    n_total: u64,
    config: &SimConfig,
) -> Result<PowerEstimate> {
    let law = build_composite_law(scenario)?;
    simulate_power_law(&law, scenario.eps1_terminal, &scenario.design, endpoint, n_total, config)
}

/// As [`simulate_power_survival`] for an already built law.
pub fn simulate_power_law(
    law: &CompositeLaw,
    terminal: bool,
    design: &TestDesign,
    endpoint: Endpoint,
    n_total: u64,
    config: &SimConfig,
) -> Result<PowerEstimate> {
    config.validate()?;
    design.validate()?;
    check_n_total(n_total)?;
    let (n_c, n_t) = split_arms(n_total);
    let rejections = count_rejections(config.n_replications, |r| {
        let mut rng = stream_rng(config.seed, r + 1);
        let mut events = Vec::new();
        for (arm, n, treated) in [(Arm::Control, n_c, false), (Arm::Treatment, n_t, true)] {
            for _ in 0..n {
                let pair = draw_times(law, arm, terminal, &mut rng);
                let time = match endpoint {
                    Endpoint::Composite => pair.composite_time,
                    Endpoint::Relevant => pair.t1,
                };
                if time <= law.tau {
                    events.push((time, treated));
                }
            }
        }
        reject(logrank_z(&mut events, n_c, n_t), design)
    });
    Ok(PowerEstimate::from_rejections(rejections, config.n_replications))
}

/// Estimate with a Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
}

/// Sample Kendall's tau (no ties) with the U-statistic standard error
/// `√(4·Var(h_i)/n)`, where `h_i` is subject `i`'s mean concordance sign.
/// Quadratic in `n`.
pub fn kendall_tau(pairs: &[(f64, f64)]) -> McEstimate {
    let n = pairs.len();
    let mut h = vec![0.0; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let s = ((pairs[i].0 - pairs[j].0) * (pairs[i].1 - pairs[j].1)).signum();
            h[i] += s;
            h[j] += s;
        }
    }
    let denom = (n - 1) as f64;
    h.iter_mut().for_each(|x| *x /= denom);
    let mean = h.iter().sum::<f64>() / n as f64;
    let var = h.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / denom;
    McEstimate {
        estimate: mean,
        standard_error: (4.0 * var / n as f64).sqrt(),
    }
}

fn ranks(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let v: Vec<f64> = values.collect();
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    for (rank, &i) in idx.iter().enumerate() {
        r[i] = rank as f64;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

/// Sample Spearman's rho of the whole sample; the standard error comes from
/// the spread of the estimate over `batches` contiguous batches.
pub fn spearman_rho(pairs: &[(f64, f64)], batches: usize) -> McEstimate {
    let rho = |chunk: &[(f64, f64)]| {
        let rx = ranks(chunk.iter().map(|p| p.0));
        let ry = ranks(chunk.iter().map(|p| p.1));
        pearson(&rx, &ry)
    };
    let estimate = rho(pairs);
    let size = pairs.len() / batches.max(2);
    let per_batch: Vec<f64> = pairs.chunks_exact(size.max(2)).map(rho).collect();
    let k = per_batch.len() as f64;
    let mean = per_batch.iter().sum::<f64>() / k;
    let var = per_batch.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0);
    McEstimate {
        estimate,
        standard_error: (var / k).sqrt(),
    }
}
