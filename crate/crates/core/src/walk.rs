//! Trajectory engine for random walks and the geodesic flow on a cover.
//!
//! Every trajectory owns a ChaCha8 stream selected by `(master_seed,
//! trajectory id)`, so a run is reproducible under any thread schedule.
//! The geodesic flow is the walk driven by the Dirac measure at
//! `a_dt`; both go through the same [`Walker`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{Cover, CoverPoint};
use crate::fuchsian::{GeometryError, HaarSampler};
use crate::hyp2::{BoundaryPoint, GroupElement, Kind, RunningProduct, UnitTangent};

/// Distance from the start (on the base) within which a visit to index 0
/// counts as a return.
pub const RETURN_RADIUS: f64 = 2.0;
/// Largest geodesic step for which reduction stays local.
pub const MAX_FLOW_STEP: f64 = 0.5;
pub const DEFAULT_FLOW_STEP: f64 = 0.25;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum WalkError {
    #[error("invalid measure: {0}")]
    InvalidMeasure(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("measure fails the Zariski density check: {0}")]
    NotZariskiDense(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Step distribution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum MeasureSpec {
    /// Finitely many elements with probabilities summing to one.
    Atoms(Vec<(GroupElement, f64)>),
    /// `R_θ a_τ R_θ'` with `θ, θ'` uniform on `[0, 2π)` and `τ` uniform on
    /// `[tau_min, tau_max]`.
    Parametric { tau_min: f64, tau_max: f64 },
}

impl MeasureSpec {
    pub fn uniform(elements: &[GroupElement]) -> Self {
        let p = 1.0 / elements.len() as f64;
        MeasureSpec::Atoms(elements.iter().map(|g| (*g, p)).collect())
    }

    pub fn dirac(g: GroupElement) -> Self {
        MeasureSpec::Atoms(vec![(g, 1.0)])
    }

    /// Uniform on `elements` and their inverses.
    pub fn symmetric(elements: &[GroupElement]) -> Self {
        let all: Vec<GroupElement> = elements.iter().flat_map(|g| [*g, g.inverse()]).collect();
        Self::uniform(&all)
    }
}

/// A validated measure ready for sampling.
#[derive(Clone, Debug)]
pub struct Measure {
    spec: MeasureSpec,
    cumulative: Vec<f64>,
}

impl Measure {
    pub fn new(spec: MeasureSpec) -> Result<Self, WalkError> {
        let cumulative = match &spec {
            MeasureSpec::Atoms(atoms) => {
                if atoms.is_empty() {
                    return Err(WalkError::InvalidMeasure("no atoms".into()));
                }
                let mut acc = 0.0;
                let mut cum = Vec::with_capacity(atoms.len());
                for (_, p) in atoms {
                    if !(*p >= 0.0) || !p.is_finite() {
                        return Err(WalkError::InvalidMeasure(format!("probability {p}")));
                    }
                    acc += p;
                    cum.push(acc);
                }
                if (acc - 1.0).abs() > 1e-12 {
                    return Err(WalkError::InvalidMeasure(format!(
                        "probabilities sum to {acc}"
                    )));
                }
                cum
            }
            MeasureSpec::Parametric { tau_min, tau_max } => {
                if !(*tau_min > 0.0 && tau_max >= tau_min && tau_max.is_finite()) {
                    return Err(WalkError::InvalidMeasure(format!(
                        "tau range [{tau_min}, {tau_max}] must lie in (0, inf)"
                    )));
                }
                Vec::new()
            }
        };
        Ok(Self { spec, cumulative })
    }

    pub fn spec(&self) -> &MeasureSpec {
        &self.spec
    }

    /// Draws a step; for atomic measures also returns the atom index.
    ///
    /// A single-atom measure consumes no randomness.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (GroupElement, Option<usize>) {
        match &self.spec {
            MeasureSpec::Atoms(atoms) => {
                if atoms.len() == 1 {
                    return (atoms[0].0, Some(0));
                }
                let u: f64 = rng.random();
                let k = self
                    .cumulative
                    .partition_point(|&c| c <= u)
                    .min(atoms.len() - 1);
                (atoms[k].0, Some(k))
            }
            MeasureSpec::Parametric { tau_min, tau_max } => {
                let th1 = std::f64::consts::TAU * rng.random::<f64>();
                let tau = tau_min + (tau_max - tau_min) * rng.random::<f64>();
                let th2 = std::f64::consts::TAU * rng.random::<f64>();
                let g = GroupElement::rotation(th1)
                    * GroupElement::translation(tau)
                    * GroupElement::rotation(th2);
                (g, None)
            }
        }
    }

    /// Atoms closed under inversion with equal mass on each pair.
    pub fn is_symmetric(&self) -> bool {
        match &self.spec {
            MeasureSpec::Atoms(atoms) => atoms.iter().all(|(g, p)| {
                let gi = g.inverse();
                let mass: f64 = atoms
                    .iter()
                    .filter(|(h, _)| h.psl_distance(&gi) < 1e-12)
                    .map(|(_, q)| q)
                    .sum();
                (mass - p).abs() < 1e-12
            }),
            // the law of θ, θ' is rotation invariant and a_τ^-1 = R_π a_τ R_π
            MeasureSpec::Parametric { .. } => true,
        }
    }
}

/// Outcome of [`zariski_density_check`].
#[derive(Clone, Debug, PartialEq)]
pub enum ZariskiVerdict {
    /// Two hyperbolic elements of the semigroup with disjoint fixed points.
    Pass(GroupElement, GroupElement),
    Fail(String),
}

impl ZariskiVerdict {
    pub fn passed(&self) -> bool {
        matches!(self, ZariskiVerdict::Pass(..))
    }
}

/// Heuristic certificate: looks for two hyperbolic elements with no common
/// fixed point among products of up to six support elements.
pub fn zariski_density_check(m: &Measure) -> ZariskiVerdict {
    const MAX_LEN: usize = 6;
    const BUDGET: usize = 20_000;
    let support: Vec<GroupElement> = match &m.spec {
        MeasureSpec::Atoms(atoms) => atoms
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|(g, _)| *g)
            .collect(),
        MeasureSpec::Parametric { .. } => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..16).map(|_| m.sample(&mut rng).0).collect()
        }
    };
    let mut hyperbolic: Vec<(GroupElement, Vec<BoundaryPoint>)> = Vec::new();
    let mut layer = vec![GroupElement::IDENTITY];
    let mut seen = 0usize;
    for _ in 0..MAX_LEN {
        let mut next = Vec::new();
        for w in &layer {
            for s in &support {
                let g = *w * *s;
                seen += 1;
                if g.classify().kind == Kind::Hyperbolic {
                    let fp = g.fixed_points();
                    for (h, hfp) in &hyperbolic {
                        let disjoint = fp
                            .iter()
                            .all(|p| hfp.iter().all(|q| p.separation(q) > 1e-6));
                        if disjoint {
                            return ZariskiVerdict::Pass(*h, g);
                        }
                    }
                    if hyperbolic.len() < 64 {
                        hyperbolic.push((g, fp));
                    }
                }
                if next.len() < BUDGET {
                    next.push(g);
                }
            }
        }
        if seen > BUDGET {
            break;
        }
        layer = next;
    }
    if hyperbolic.is_empty() {
        ZariskiVerdict::Fail("no hyperbolic element among short products".into())
    } else {
        ZariskiVerdict::Fail("all hyperbolic elements found share a fixed point".into())
    }
}

/// Where trajectories start.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum StartMode {
    /// A fixed tangent vector of the plane (lifted through the cover).
    Fixed(UnitTangent),
    /// Haar-distributed on the base, drawn from the trajectory's stream.
    Haar,
}

/// Which steps produce a record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Checkpoints {
    Stride(u64),
    List(Vec<u64>),
}

impl Checkpoints {
    /// `count` points spaced geometrically from `first` to `last`.
    pub fn geometric(first: u64, last: u64, count: usize) -> Self {
        let mut v: Vec<u64> = (0..count)
            .map(|k| {
                let s = k as f64 / (count.max(2) - 1) as f64;
                ((first as f64).ln() * (1.0 - s) + (last as f64).ln() * s).exp().round() as u64
            })
            .collect();
        v.dedup();
        Checkpoints::List(v)
    }

    /// Sorted, deduplicated steps in `[0, steps]`, always ending at `steps`.
    pub fn resolve(&self, steps: u64) -> Vec<u64> {
        let mut v: Vec<u64> = match self {
            Checkpoints::Stride(s) => {
                let s = (*s).max(1);
                (1..=steps / s).map(|k| k * s).collect()
            }
            Checkpoints::List(l) => l.iter().copied().filter(|&n| n <= steps).collect(),
        };
        v.push(steps);
        v.sort_unstable();
        v.dedup();
        v
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub steps: u64,
    pub trajectories: usize,
    pub master_seed: u64,
    pub checkpoints: Checkpoints,
    pub start: StartMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeodesicConfig {
    pub time: f64,
    pub dt: f64,
    pub trajectories: usize,
    pub master_seed: u64,
    /// Checkpoint times; each is rounded to a whole number of steps.
    pub checkpoints: Vec<f64>,
    pub start: StartMode,
}

impl GeodesicConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        if !(self.dt > 0.0 && self.dt <= MAX_FLOW_STEP) {
            return Err(WalkError::InvalidConfig(format!(
                "flow step {} must lie in (0, {MAX_FLOW_STEP}]",
                self.dt
            )));
        }
        if !(self.time >= 0.0) || !self.time.is_finite() {
            return Err(WalkError::InvalidConfig(format!("flow time {}", self.time)));
        }
        Ok(())
    }

    pub fn steps(&self) -> u64 {
        (self.time / self.dt).round() as u64
    }

    /// The equivalent walk: Dirac steps at `a_dt` with checkpoints in steps.
    pub fn as_walk(&self) -> WalkConfig {
        WalkConfig {
            steps: self.steps(),
            trajectories: self.trajectories,
            master_seed: self.master_seed,
            checkpoints: Checkpoints::List(
                self.checkpoints
                    .iter()
                    .map(|t| (t / self.dt).round() as u64)
                    .collect(),
            ),
            start: self.start.clone(),
        }
    }
}

/// One observation of a trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRecord {
    pub traj: u64,
    /// Step count for walks, elapsed time for the flow.
    pub n: f64,
    /// `σ`: sheet index relative to the start.
    pub index: Vec<i64>,
    /// `index / n` (zero at `n = 0`).
    pub drift: Vec<f64>,
    /// Log cusp height of the base point.
    pub cusp_height: f64,
    /// Cartan projection of the step product so far.
    pub cartan_t: f64,
    /// Re-entries into the start neighborhood so far: index 0 and base
    /// point within [`RETURN_RADIUS`] of the start, after having left it.
    pub returns: u64,
    pub first_return: Option<u64>,
    pub last_return: Option<u64>,
    /// Largest `‖index‖` seen so far.
    pub max_excursion: f64,
}

/// Records of one trajectory; `error` is set if reduction failed part way.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub traj: u64,
    pub records: Vec<CheckpointRecord>,
    pub error: Option<String>,
}

/// The random stream of trajectory `traj`.
pub fn trajectory_rng(master_seed: u64, traj: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(traj);
    rng
}

/// A single trajectory advanced one step at a time.
pub struct Walker<'a> {
    cover: &'a Cover,
    measure: &'a Measure,
    rng: ChaCha8Rng,
    point: CoverPoint,
    origin: CoverPoint,
    product: RunningProduct,
    steps: u64,
    inside: bool,
    returns: u64,
    first_return: Option<u64>,
    last_return: Option<u64>,
    max_excursion: f64,
}

impl<'a> Walker<'a> {
    pub fn new(
        cover: &'a Cover,
        measure: &'a Measure,
        start: &StartMode,
        haar: Option<&HaarSampler<'_>>,
        mut rng: ChaCha8Rng,
    ) -> Result<Self, WalkError> {
        let x = match start {
            StartMode::Fixed(x) => *x,
            StartMode::Haar => haar
                .ok_or_else(|| WalkError::InvalidConfig("Haar start needs a sampler".into()))?
                .sample(&mut rng),
        };
        let mut point = cover.lift(&x)?;
        point.index.iter_mut().for_each(|k| *k = 0);
        Ok(Self {
            cover,
            measure,
            rng,
            origin: point.clone(),
            point,
            product: RunningProduct::new(),
            steps: 0,
            inside: true,
            returns: 0,
            first_return: None,
            last_return: None,
            max_excursion: 0.0,
        })
    }

    /// Advances by one step; returns the step and the atom index if any.
    pub fn step(&mut self) -> Result<(GroupElement, Option<usize>), GeometryError> {
        let (g, atom) = self.measure.sample(&mut self.rng);
        self.cover.step_in_place(&mut self.point, &g)?;
        self.product.push(&g);
        self.steps += 1;
        let norm2: i64 = self.point.index.iter().map(|k| k * k).sum();
        self.max_excursion = self.max_excursion.max((norm2 as f64).sqrt());
        let inside = norm2 == 0
            && self
                .point
                .rep
                .base_point()
                .distance(&self.origin.rep.base_point())
                <= RETURN_RADIUS;
        if inside && !self.inside {
            self.returns += 1;
            self.first_return.get_or_insert(self.steps);
            self.last_return = Some(self.steps);
        }
        self.inside = inside;
        Ok((g, atom))
    }

    pub fn point(&self) -> &CoverPoint {
        &self.point
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// The current state as a record, with `n = steps · time_per_step`.
    pub fn record(&self, traj: u64, time_per_step: f64) -> CheckpointRecord {
        let n = self.steps as f64 * time_per_step;
        let drift = if self.steps == 0 {
            vec![0.0; self.point.index.len()]
        } else {
            self.point.index.iter().map(|&k| k as f64 / n).collect()
        };
        CheckpointRecord {
            traj,
            n,
            index: self.point.index.clone(),
            drift,
            cusp_height: self
                .cover
                .surface()
                .cusp_height(&self.point.rep.base_point())
                .log_height,
            cartan_t: if self.steps == 0 { 0.0 } else { self.product.cartan_t() },
            returns: self.returns,
            first_return: self.first_return,
            last_return: self.last_return,
            max_excursion: self.max_excursion,
        }
    }
}

fn run_one(
    cover: &Cover,
    measure: &Measure,
    cfg: &WalkConfig,
    haar: Option<&HaarSampler<'_>>,
    checkpoints: &[u64],
    traj: u64,
    time_per_step: f64,
) -> Trajectory {
    let rng = trajectory_rng(cfg.master_seed, traj);
    let mut out = Trajectory {
        traj,
        records: Vec::with_capacity(checkpoints.len()),
        error: None,
    };
    let mut w = match Walker::new(cover, measure, &cfg.start, haar, rng) {
        Ok(w) => w,
        Err(e) => {
            out.error = Some(e.to_string());
            return out;
        }
    };
    for &c in checkpoints {
        while w.steps() < c {
            if let Err(e) = w.step() {
                out.error = Some(format!("step {}: {e}", w.steps() + 1));
                return out;
            }
        }
        out.records.push(w.record(traj, time_per_step));
    }
    out
}

fn run_engine(
    cover: &Cover,
    measure: &Measure,
    cfg: &WalkConfig,
    time_per_step: f64,
) -> Result<Vec<Trajectory>, WalkError> {
    let sampler = match cfg.start {
        StartMode::Haar => Some(cover.surface().haar_sampler()?),
        StartMode::Fixed(_) => None,
    };
    let checkpoints = cfg.checkpoints.resolve(cfg.steps);
    Ok((0..cfg.trajectories as u64)
        .into_par_iter()
        .map(|traj| {
            run_one(
                cover,
                measure,
                cfg,
                sampler.as_ref(),
                &checkpoints,
                traj,
                time_per_step,
            )
        })
        .collect())
}

/// Runs `cfg.trajectories` independent walks in parallel.
///
/// Output is ordered by trajectory id regardless of scheduling.
pub fn run_walk(cover: &Cover, measure: &Measure, cfg: &WalkConfig) -> Result<Vec<Trajectory>, WalkError> {
    run_engine(cover, measure, cfg, 1.0)
}

/// Geodesic flow in increments of `a_dt`; records carry elapsed time.
pub fn run_geodesic(cover: &Cover, cfg: &GeodesicConfig) -> Result<Vec<Trajectory>, WalkError> {
    cfg.validate()?;
    let measure = Measure::new(MeasureSpec::dirac(GroupElement::translation(cfg.dt)))?;
    run_engine(cover, &measure, &cfg.as_walk(), cfg.dt)
}

/// Estimate of the top Lyapunov exponent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub mean: f64,
    pub se: f64,
    pub steps: u64,
    pub trajectories: usize,
}

/// Mean of `t_n / n` over independent products, with its standard error.
///
/// Refuses measures failing [`zariski_density_check`] unless `force` is set.
pub fn lyapunov_estimate(
    measure: &Measure,
    steps: u64,
    trajectories: usize,
    master_seed: u64,
    force: bool,
) -> Result<LyapunovEstimate, WalkError> {
    if steps == 0 || trajectories == 0 {
        return Err(WalkError::InvalidConfig("steps and trajectories must be positive".into()));
    }
    if !force {
        if let ZariskiVerdict::Fail(why) = zariski_density_check(measure) {
            return Err(WalkError::NotZariskiDense(why));
        }
    }
    let values: Vec<f64> = (0..trajectories as u64)
        .into_par_iter()
        .map(|traj| {
            let mut rng = trajectory_rng(master_seed, traj);
            let mut p = RunningProduct::new();
            for _ in 0..steps {
                p.push(&measure.sample(&mut rng).0);
            }
            p.cartan_t() / steps as f64
        })
        .collect();
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let se = if values.len() > 1 {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (k - 1.0);
        (var / k).sqrt()
    } else {
        0.0
    };
    Ok(LyapunovEstimate {
        mean,
        se,
        steps,
        trajectories,
    })
}
