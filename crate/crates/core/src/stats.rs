//! Confirmatory tests comparing observed curvature statistics to their nulls.
//!
//! * Pooled Monte-Carlo test: sums tail counts (and averages ratios) over all
//!   trajectories, pairs observed with each null sample index, and reports the
//!   add-one right-tailed p-value `(1 + #{Δ ≤ 0}) / (S + 1)`.
//! * Paired t-test: per-trajectory differences between the observed statistic
//!   and its own null mean, tested with `T - 1` degrees of freedom.
//!
//! Both alternatives are one-sided: observed exceeds null.

use thiserror::Error;

use crate::curvature::CurvatureSummary;
use crate::null_model::NullDraws;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("{observed} observed summaries but {null} null draw sets")]
    CountMismatch { observed: usize, null: usize },
    #[error("trajectory id mismatch at position {index}: observed {observed:?}, null {null:?}")]
    IdMismatch {
        index: usize,
        observed: String,
        null: String,
    },
    #[error("null draw sets disagree on sample count: {0:?}")]
    UnequalSamples(Vec<usize>),
    #[error("no null samples")]
    NoSamples,
    #[error("paired test needs at least 2 trajectories, got {0}")]
    TooFewTrajectories(usize),
}

/// Pooled Monte-Carlo comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct PooledReport {
    pub c_pool_obs: usize,
    /// Mean observed ratio over non-degenerate trajectories.
    pub r_bar_obs: Option<f64>,
    pub delta_c_pool: Vec<i64>,
    /// `None` when no trajectory has both a defined observed ratio and a
    /// defined null ratio at that sample; counted as `Δ ≤ 0`.
    pub delta_r_bar: Vec<Option<f64>>,
    pub p_mc_c: f64,
    pub p_mc_r: f64,
    /// Trajectories whose observed ratio is degenerate.
    pub r_excluded: usize,
}

impl PooledReport {
    pub fn samples(&self) -> usize {
        self.delta_c_pool.len()
    }

    pub fn mean_delta_c(&self) -> f64 {
        self.delta_c_pool.iter().sum::<i64>() as f64 / self.samples().max(1) as f64
    }

    pub fn mean_delta_r(&self) -> Option<f64> {
        let (sum, n) = self
            .delta_r_bar
            .iter()
            .flatten()
            .fold((0.0, 0usize), |(s, n), &d| (s + d, n + 1));
        (n > 0).then(|| sum / n as f64)
    }
}

/// `(1 + #{Δ ≤ 0}) / (S + 1)`.
pub fn monte_carlo_p(non_exceeding: usize, samples: usize) -> f64 {
    (1 + non_exceeding) as f64 / (samples + 1) as f64
}

fn check_alignment(summaries: &[CurvatureSummary<f64>], nulls: &[NullDraws]) -> Result<usize, StatsError> {
    if summaries.len() != nulls.len() {
        return Err(StatsError::CountMismatch {
            observed: summaries.len(),
            null: nulls.len(),
        });
    }
    for (index, (s, n)) in summaries.iter().zip(nulls).enumerate() {
        if s.trajectory_id != n.trajectory_id {
            return Err(StatsError::IdMismatch {
                index,
                observed: s.trajectory_id.clone(),
                null: n.trajectory_id.clone(),
            });
        }
    }
    let counts: Vec<usize> = nulls.iter().map(NullDraws::samples).collect();
    let samples = counts.first().copied().unwrap_or(0);
    if counts.iter().any(|&c| c != samples) {
        return Err(StatsError::UnequalSamples(counts));
    }
    if samples == 0 && !nulls.is_empty() {
        return Err(StatsError::NoSamples);
    }
    Ok(samples)
}

pub fn pooled_test(summaries: &[CurvatureSummary<f64>], nulls: &[NullDraws]) -> Result<PooledReport, StatsError> {
    let samples = check_alignment(summaries, nulls)?;
    if samples == 0 {
        return Err(StatsError::NoSamples);
    }

    let c_pool_obs: usize = summaries.iter().map(|s| s.tail_count).sum();
    let delta_c_pool: Vec<i64> = (0..samples)
        .map(|s| {
            let null: usize = nulls.iter().map(|n| n.c_tilde[s]).sum();
            c_pool_obs as i64 - null as i64
        })
        .collect();

    let observed_r: Vec<Option<f64>> = summaries.iter().map(|s| s.ratio).collect();
    let defined: Vec<f64> = observed_r.iter().flatten().copied().collect();
    let r_bar_obs = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);

    let delta_r_bar: Vec<Option<f64>> = (0..samples)
        .map(|s| {
            let (mut obs, mut null, mut n) = (0.0, 0.0, 0usize);
            for (r, draws) in observed_r.iter().zip(nulls) {
                if let (Some(r), Some(rt)) = (r, draws.r_tilde[s]) {
                    obs += r;
                    null += rt;
                    n += 1;
                }
            }
            (n > 0).then(|| obs / n as f64 - null / n as f64)
        })
        .collect();

    let non_exceeding_c = delta_c_pool.iter().filter(|&&d| d <= 0).count();
    let non_exceeding_r = delta_r_bar.iter().filter(|d| d.is_none_or(|d| d <= 0.0)).count();

    Ok(PooledReport {
        c_pool_obs,
        r_bar_obs,
        p_mc_c: monte_carlo_p(non_exceeding_c, samples),
        p_mc_r: monte_carlo_p(non_exceeding_r, samples),
        delta_c_pool,
        delta_r_bar,
        r_excluded: observed_r.iter().filter(|r| r.is_none()).count(),
    })
}

/// One-sample right-tailed t-test on paired differences.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedStat {
    pub n: usize,
    pub d_bar: f64,
    /// Sample standard deviation, denominator `n - 1`.
    pub sd: f64,
    /// `±∞` when the variance is zero and the mean is not.
    pub t: f64,
    pub dof: usize,
    pub p: f64,
    pub degenerate_variance: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedReport {
    pub c: PairedStat,
    pub r: PairedStat,
    /// Trajectories left out of the ratio test (degenerate observed ratio or
    /// no defined null ratio).
    pub r_excluded: usize,
}

/// Mean and sum of squared deviations by Welford's update. Equal inputs give
/// their common value and exactly zero spread.
pub fn mean_and_squares(values: &[f64]) -> (f64, f64) {
    let (mut mean, mut m2) = (0.0, 0.0);
    for (k, &x) in values.iter().enumerate() {
        let delta = x - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (x - mean);
    }
    (mean, m2)
}

pub fn paired_t(differences: &[f64]) -> Result<PairedStat, StatsError> {
    let n = differences.len();
    if n < 2 {
        return Err(StatsError::TooFewTrajectories(n));
    }
    let nf = n as f64;
    let (d_bar, ss) = mean_and_squares(differences);
    let sd = (ss / (nf - 1.0)).sqrt();
    let dof = n - 1;

    if sd == 0.0 {
        let (t, p, degenerate) = if d_bar > 0.0 {
            (f64::INFINITY, 0.0, true)
        } else if d_bar < 0.0 {
            (f64::NEG_INFINITY, 1.0, true)
        } else {
            (0.0, 0.5, false)
        };
        return Ok(PairedStat {
            n,
            d_bar,
            sd,
            t,
            dof,
            p,
            degenerate_variance: degenerate,
        });
    }

    let t = d_bar / (sd / nf.sqrt());
    Ok(PairedStat {
        n,
        d_bar,
        sd,
        t,
        dof,
        p: student_t_sf(t, dof as f64),
        degenerate_variance: false,
    })
}

pub fn paired_test(summaries: &[CurvatureSummary<f64>], nulls: &[NullDraws]) -> Result<PairedReport, StatsError> {
    check_alignment(summaries, nulls)?;
    let dc: Vec<f64> = summaries
        .iter()
        .zip(nulls)
        .map(|(s, n)| s.tail_count as f64 - n.mean_c())
        .collect();
    let dr: Vec<f64> = summaries
        .iter()
        .zip(nulls)
        .filter_map(|(s, n)| Some(s.ratio? - n.mean_r()?))
        .collect();
    Ok(PairedReport {
        c: paired_t(&dc)?,
        r_excluded: summaries.len() - dr.len(),
        r: paired_t(&dr)?,
    })
}

// --- special functions -----------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// `ln Γ(x)` for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-15;
    const MAX_ITER: usize = 20_000;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;

    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;

        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;

        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * (1.0 - x).ln() - ln_beta(a, b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_continued_fraction(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_continued_fraction(b, a, 1.0 - x) / b
    }
}

/// Upper tail `P(T > t)` of Student's t with `dof` degrees of freedom.
pub fn student_t_sf(t: f64, dof: f64) -> f64 {
    assert!(dof > 0.0, "degrees of freedom must be positive");
    if t.is_nan() {
        return f64::NAN;
    }
    if t == f64::INFINITY {
        return 0.0;
    }
    if t == f64::NEG_INFINITY {
        return 1.0;
    }
    if t == 0.0 {
        return 0.5;
    }
    let x = dof / (dof + t * t);
    // P(|T| > |t|) / 2
    let half_tail = 0.5 * regularized_incomplete_beta(0.5 * dof, 0.5, x);
    if t > 0.0 {
        half_tail
    } else {
        1.0 - half_tail
    }
}
