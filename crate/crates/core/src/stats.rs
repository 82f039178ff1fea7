//! Estimators for the limit laws: Cauchy and Gaussian fits, tail index,
//! Haar means of the cocycle, drift and accumulation summaries, and the
//! recurrence report.
//!
//! All functions are pure over sample arrays. Statistical verdicts are
//! hints, not proofs.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::cover::{Cover, CoverPoint, CoverSpec};
use crate::fuchsian::GeometryError;
use crate::hyp2::{GroupElement, UnitTangent};
use crate::walk::{trajectory_rng, Measure, MeasureSpec, Trajectory};

pub const MIN_FIT_SAMPLES: usize = 100;
/// Fraction of order statistics used by the Hill estimator.
pub const HILL_FRACTION: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("samples are degenerate (zero interquartile range)")]
    DegenerateSamples,
    #[error("non-finite sample at position {0}")]
    NonFinite(usize),
    #[error("sigma is not Haar-integrable: the cover has an unfolded cusp")]
    NonIntegrableConfiguration,
    #[error("exact target unavailable: {0}")]
    NoExactTarget(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(i) = samples.iter().position(|x| !x.is_finite()) {
        return Err(StatsError::NonFinite(i));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty sample");
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn median(samples: &[f64]) -> f64 {
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    quantile_sorted(&v, 0.5)
}

/// Kolmogorov–Smirnov distance between sorted samples and a CDF.
pub fn ks_distance_sorted(sorted: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Hill estimate of the tail index of `|x - center|` from the top
/// `fraction` of order statistics.
pub fn hill_tail_index(samples: &[f64], center: f64, fraction: f64) -> f64 {
    let mut dev: Vec<f64> = samples.iter().map(|x| (x - center).abs()).collect();
    dev.sort_by(|a, b| b.total_cmp(a));
    let k = ((fraction * dev.len() as f64).ceil() as usize).clamp(1, dev.len() - 1);
    let threshold = dev[k];
    if threshold <= 0.0 {
        return f64::INFINITY;
    }
    let mean_log = dev[..k].iter().map(|y| (y / threshold).ln()).sum::<f64>() / k as f64;
    1.0 / mean_log
}

pub fn cauchy_cdf(x: f64, location: f64, scale: f64) -> f64 {
    0.5 + ((x - location) / scale).atan() / PI
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CauchyFit {
    pub location: f64,
    /// Half the interquartile range.
    pub scale: f64,
    pub ks_distance: f64,
    pub tail_index: f64,
    pub samples: usize,
}

/// Robust Cauchy fit: location is the median and scale half the IQR.
pub fn cauchy_fit(samples: &[f64]) -> Result<CauchyFit, StatsError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let v = sorted_finite(samples)?;
    let location = quantile_sorted(&v, 0.5);
    let iqr = quantile_sorted(&v, 0.75) - quantile_sorted(&v, 0.25);
    if iqr <= 0.0 {
        return Err(StatsError::DegenerateSamples);
    }
    let scale = 0.5 * iqr;
    Ok(CauchyFit {
        location,
        scale,
        ks_distance: ks_distance_sorted(&v, |x| cauchy_cdf(x, location, scale)),
        tail_index: hill_tail_index(&v, location, HILL_FRACTION),
        samples: v.len(),
    })
}

/// Maximum-likelihood Cauchy location and scale, started from the robust
/// fit. Offered as a cross-check only.
pub fn cauchy_mle(samples: &[f64]) -> Result<(f64, f64), StatsError> {
    let start = cauchy_fit(samples)?;
    let (mut m, mut c) = (start.location, start.scale);
    // fixed-point iteration of the score equations (a weighted mean for m,
    // the identity mean(w) = 1/2 for c)
    for _ in 0..500 {
        let (mut sw, mut swx) = (0.0, 0.0);
        for &x in samples {
            let w = 1.0 / (1.0 + ((x - m) / c).powi(2));
            sw += w;
            swx += w * x;
        }
        let n = samples.len() as f64;
        let m_new = swx / sw;
        let c_new = c * (2.0 * sw / n).sqrt().recip();
        let done = (m_new - m).abs() < 1e-12 * c && (c_new / c - 1.0).abs() < 1e-12;
        m = m_new;
        c = c_new;
        if done {
            break;
        }
    }
    Ok((m, c))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: f64,
    pub sd: f64,
    /// Standard error of the mean.
    pub se: f64,
    pub ks_distance: f64,
    pub tail_index: f64,
    pub samples: usize,
}

pub fn gaussian_fit(samples: &[f64]) -> Result<GaussianFit, StatsError> {
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let v = sorted_finite(samples)?;
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(StatsError::DegenerateSamples);
    }
    let sd = var.sqrt();
    let normal = Normal::new(mean, sd).map_err(|_| StatsError::DegenerateSamples)?;
    Ok(GaussianFit {
        mean,
        sd,
        se: sd / n.sqrt(),
        ks_distance: ks_distance_sorted(&v, |x| normal.cdf(x)),
        tail_index: hill_tail_index(&v, mean, HILL_FRACTION),
        samples: v.len(),
    })
}

/// Projections `⟨x, e⟩` of vector samples on each frame vector.
pub fn project(samples: &[Vec<f64>], frame: &[Vec<f64>]) -> Vec<Vec<f64>> {
    frame
        .iter()
        .map(|e| {
            samples
                .iter()
                .map(|x| x.iter().zip(e).map(|(a, b)| a * b).sum())
                .collect()
        })
        .collect()
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&i, &j| x[i].total_cmp(&x[j]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64;
        for &k in &idx[i..=j] {
            r[k] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Per-axis Cauchy fits of vector samples projected on an orthonormal
/// frame, with pairwise rank correlations as an independence check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedCauchy {
    pub fits: Vec<CauchyFit>,
    /// `(i, j, ρ)` for each pair of axes.
    pub rank_correlations: Vec<(usize, usize, f64)>,
}

pub fn cauchy_fit_projections(
    samples: &[Vec<f64>],
    frame: &[Vec<f64>],
) -> Result<ProjectedCauchy, StatsError> {
    let proj = project(samples, frame);
    let fits = proj.iter().map(|p| cauchy_fit(p)).collect::<Result<_, _>>()?;
    let mut rank_correlations = Vec::new();
    for i in 0..proj.len() {
        for j in i + 1..proj.len() {
            rank_correlations.push((i, j, spearman(&proj[i], &proj[j])));
        }
    }
    Ok(ProjectedCauchy {
        fits,
        rank_correlations,
    })
}

/// Monte Carlo Haar mean of `σ(·, g)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HaarMean {
    pub mean: Vec<f64>,
    pub se: Vec<f64>,
    /// Componentwise percentile bootstrap interval at the 3-SE level.
    pub ci_low: Vec<f64>,
    pub ci_high: Vec<f64>,
    pub samples: usize,
}

impl HaarMean {
    pub fn ci_contains(&self, target: &[f64]) -> bool {
        target
            .iter()
            .zip(self.ci_low.iter().zip(&self.ci_high))
            .all(|(t, (lo, hi))| lo <= t && t <= hi)
    }
}

const BOOTSTRAP_RESAMPLES: usize = 1000;
/// Two-sided tail mass of ±3 standard deviations.
const THREE_SIGMA_TAIL: f64 = 0.0027;

/// Mean of `σ(x, g)` over `n` Haar samples `x` of the base.
///
/// Refuses covers with an unfolded cusp: `σ(·, g)` then grows like the
/// cusp height, which is not Haar-integrable. The identity is exempt.
pub fn haar_mean_sigma(
    cover: &Cover,
    g: &GroupElement,
    n: usize,
    seed: u64,
) -> Result<HaarMean, StatsError> {
    let d = cover.dim();
    if g.is_identity(0.0) {
        return Ok(HaarMean {
            mean: vec![0.0; d],
            se: vec![0.0; d],
            ci_low: vec![0.0; d],
            ci_high: vec![0.0; d],
            samples: n,
        });
    }
    if cover.spec().has_unfolded_cusp() {
        return Err(StatsError::NonIntegrableConfiguration);
    }
    if n < 2 {
        return Err(StatsError::TooFewSamples { needed: 2, got: n });
    }
    let sampler = cover.surface().haar_sampler()?;
    const CHUNK: usize = 4096;
    let chunks: Vec<Vec<Vec<i64>>> = (0..n.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut rng = trajectory_rng(seed, c as u64);
            let len = CHUNK.min(n - c * CHUNK);
            (0..len)
                .map(|_| {
                    let p = cover.lift(&sampler.sample(&mut rng))?;
                    cover.sigma_step(&p, g)
                })
                .collect::<Result<Vec<_>, GeometryError>>()
        })
        .collect::<Result<_, _>>()?;
    let values: Vec<Vec<i64>> = chunks.into_iter().flatten().collect();
    let nf = n as f64;
    let mut mean = vec![0.0; d];
    let mut se = vec![0.0; d];
    let mut ci_low = vec![0.0; d];
    let mut ci_high = vec![0.0; d];
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb007);
    for k in 0..d {
        let col: Vec<f64> = values.iter().map(|v| v[k] as f64).collect();
        let m = col.iter().sum::<f64>() / nf;
        let var = col.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (nf - 1.0);
        mean[k] = m;
        se[k] = (var / nf).sqrt();
        let mut boot: Vec<f64> = (0..BOOTSTRAP_RESAMPLES)
            .map(|_| (0..n).map(|_| col[rng.random_range(0..n)]).sum::<f64>() / nf)
            .collect();
        boot.sort_by(f64::total_cmp);
        ci_low[k] = quantile_sorted(&boot, 0.5 * THREE_SIGMA_TAIL);
        ci_high[k] = quantile_sorted(&boot, 1.0 - 0.5 * THREE_SIGMA_TAIL);
    }
    Ok(HaarMean {
        mean,
        se,
        ci_low,
        ci_high,
        samples: n,
    })
}

/// Largest orbit enumerated by [`finite_orbit_target`].
pub const MAX_ORBIT: usize = 512;

/// Exact drift target `Σ_{x ∈ O} Σ_g μ(g) σ(x, g) / |O|` over the finite
/// orbit `O = x0 · Γ_μ` in the base.
///
/// Fails if the measure is not atomic or the orbit exceeds [`MAX_ORBIT`]
/// points (treated as infinite).
pub fn finite_orbit_target(
    cover: &Cover,
    measure: &Measure,
    x0: &UnitTangent,
) -> Result<Vec<f64>, StatsError> {
    let MeasureSpec::Atoms(atoms) = measure.spec() else {
        return Err(StatsError::NoExactTarget("measure is not atomic".into()));
    };
    const SAME: f64 = 1e-8;
    let mut orbit: Vec<CoverPoint> = vec![cover.lift(x0)?];
    let mut sum = vec![0.0; cover.dim()];
    let mut i = 0;
    while i < orbit.len() {
        let x = orbit[i].clone();
        for (g, p) in atoms {
            let y = cover.apply_step(&x, g)?;
            for (s, (a, b)) in sum.iter_mut().zip(y.index.iter().zip(&x.index)) {
                *s += p * (a - b) as f64;
            }
            if !orbit.iter().any(|o| o.rep.0.psl_distance(&y.rep.0) < SAME) {
                if orbit.len() == MAX_ORBIT {
                    return Err(StatsError::NoExactTarget(format!(
                        "orbit has more than {MAX_ORBIT} points"
                    )));
                }
                orbit.push(y);
            }
        }
        i += 1;
    }
    let n = orbit.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftSummary {
    /// Terminal normalized drift of each trajectory.
    pub terminal: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    pub target: Option<Vec<f64>>,
    /// Euclidean distance of each terminal drift from the target (or 0).
    pub deviation: Vec<f64>,
}

impl DriftSummary {
    /// Share of trajectories whose deviation is at most `tol`.
    pub fn fraction_within(&self, tol: f64) -> f64 {
        if self.deviation.is_empty() {
            return 0.0;
        }
        self.deviation.iter().filter(|&&e| e <= tol).count() as f64 / self.deviation.len() as f64
    }
}

/// Terminal drift per trajectory with pooled mean and covariance.
pub fn drift_summary(trajs: &[Trajectory], target: Option<Vec<f64>>) -> DriftSummary {
    let terminal: Vec<Vec<f64>> = trajs
        .iter()
        .filter_map(|t| t.records.last().map(|r| r.drift.clone()))
        .collect();
    let d = terminal.first().map_or(0, |v| v.len());
    let k = terminal.len() as f64;
    let mut mean = vec![0.0; d];
    for v in &terminal {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / k;
        }
    }
    let mut covariance = vec![vec![0.0; d]; d];
    if terminal.len() > 1 {
        for v in &terminal {
            for i in 0..d {
                for j in 0..d {
                    covariance[i][j] += (v[i] - mean[i]) * (v[j] - mean[j]) / (k - 1.0);
                }
            }
        }
    }
    let origin = vec![0.0; d];
    let t = target.as_ref().unwrap_or(&origin);
    let deviation = terminal
        .iter()
        .map(|v| v.iter().zip(t).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    DriftSummary {
        terminal,
        mean,
        covariance,
        target,
        deviation,
    }
}

/// Oscillation ranges of the normalized drift over a window of checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccumulationReport {
    pub n_min: f64,
    /// Per trajectory: largest componentwise range in the E_C frame.
    pub ec_range: Vec<f64>,
    /// Per trajectory: largest componentwise range in the complement frame.
    pub complement_range: Vec<f64>,
    /// Per trajectory: largest range over the coordinate axes.
    pub total_range: Vec<f64>,
    pub ec_threshold: f64,
    pub complement_threshold: f64,
    /// Share with E_C range above and complement range below threshold.
    pub oscillating_fraction: f64,
}

impl AccumulationReport {
    pub fn fraction_total_below(&self, tol: f64) -> f64 {
        self.total_range.iter().filter(|&&r| r <= tol).count() as f64
            / self.total_range.len().max(1) as f64
    }
}

fn max_component_range(series: &[Vec<f64>]) -> f64 {
    let Some(first) = series.first() else {
        return 0.0;
    };
    (0..first.len())
        .map(|k| {
            let (lo, hi) = series.iter().fold((f64::MAX, f64::MIN), |(lo, hi), v| {
                (lo.min(v[k]), hi.max(v[k]))
            });
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Range of `(1/n)σ` over checkpoints with `n ≥ n_min`, in the E_C frame,
/// its orthogonal complement and the coordinate axes.
pub fn accumulation_diagnostic(
    trajs: &[Trajectory],
    spec: &CoverSpec,
    n_min: f64,
    ec_threshold: f64,
    complement_threshold: f64,
) -> AccumulationReport {
    let (ec, comp) = spec.ec_frames();
    let mut ec_range = Vec::with_capacity(trajs.len());
    let mut complement_range = Vec::with_capacity(trajs.len());
    let mut total_range = Vec::with_capacity(trajs.len());
    for t in trajs {
        let series: Vec<Vec<f64>> = t
            .records
            .iter()
            .filter(|r| r.n >= n_min)
            .map(|r| r.drift.clone())
            .collect();
        let transpose = |p: Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..series.len())
                .map(|i| p.iter().map(|axis| axis[i]).collect())
                .collect()
        };
        ec_range.push(max_component_range(&transpose(project(&series, &ec))));
        complement_range.push(max_component_range(&transpose(project(&series, &comp))));
        total_range.push(max_component_range(&series));
    }
    let hits = ec_range
        .iter()
        .zip(&complement_range)
        .filter(|(e, c)| **e > ec_threshold && **c < complement_threshold)
        .count();
    AccumulationReport {
        n_min,
        oscillating_fraction: hits as f64 / trajs.len().max(1) as f64,
        ec_range,
        complement_range,
        total_range,
        ec_threshold,
        complement_threshold,
    }
}

/// Expected long-run behaviour for a `Z^d`-cover with `dim E_C = e`:
/// recurrent iff `d = 1`, or `d = 2` and `e = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Recurrent,
    Transient,
}

pub fn verdict_hint(d: usize, ec_dim: usize) -> Verdict {
    if d == 1 || (d == 2 && ec_dim == 0) {
        Verdict::Recurrent
    } else {
        Verdict::Transient
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceRow {
    pub n: f64,
    /// Share of trajectories with a return in the window `(n / window, n]`.
    pub return_fraction: f64,
    /// Share of trajectories with at least one return by step `n`.
    pub ever_returned: f64,
    /// Median first-return step among trajectories that returned.
    pub median_first_return: Option<f64>,
    pub median_max_excursion: f64,
}

/// Statistical recurrence indicators; the verdict is advisory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecurrenceReport {
    pub window: f64,
    pub rows: Vec<RecurrenceRow>,
    pub verdict_hint: Verdict,
}

impl RecurrenceReport {
    pub fn row(&self, n: f64) -> Option<&RecurrenceRow> {
        self.rows.iter().find(|r| r.n == n)
    }
}

/// Return statistics at every checkpoint shared by all trajectories.
///
/// A return is a re-entry into the start neighborhood (index 0, base point
/// within the walk's return radius). At checkpoint `n` the report counts
/// trajectories whose last return falls in `(n / window, n]`, and those that
/// have returned at all.
pub fn recurrence_report(trajs: &[Trajectory], window: f64, d: usize, ec_dim: usize) -> RecurrenceReport {
    let count = trajs.iter().map(|t| t.records.len()).min().unwrap_or(0);
    let k = trajs.len().max(1) as f64;
    let rows = (0..count)
        .map(|c| {
            let recs: Vec<_> = trajs.iter().map(|t| &t.records[c]).collect();
            let n = recs[0].n;
            let in_window = recs
                .iter()
                .filter(|r| r.last_return.is_some_and(|s| s as f64 > n / window))
                .count();
            let firsts: Vec<f64> = recs.iter().filter_map(|r| r.first_return.map(|s| s as f64)).collect();
            let excursions: Vec<f64> = recs.iter().map(|r| r.max_excursion).collect();
            RecurrenceRow {
                n,
                return_fraction: in_window as f64 / k,
                ever_returned: firsts.len() as f64 / k,
                median_first_return: (!firsts.is_empty()).then(|| median(&firsts)),
                median_max_excursion: median(&excursions),
            }
        })
        .collect();
    RecurrenceReport {
        window,
        rows,
        verdict_hint: verdict_hint(d, ec_dim),
    }
}
