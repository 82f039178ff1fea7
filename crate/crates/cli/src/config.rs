//! Experiment configuration: an INI-style file with the sections
//! `[lattice]`, `[weights]`, `[measure]`, `[walk]` and `[analysis]`.
//!
//! Parsing is syntactic and fails with a line number. [`ExperimentConfig::build`]
//! then resolves the lattice, cover and measure, again naming the line that
//! caused a failure. [`ExperimentConfig::canonical`] prints every field with
//! defaults spelled out, in a fixed order; the config hash is the SHA-256 of
//! that text (plus the lattice file's bytes when one is used).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use covwalk::cover::preset_weights;
use covwalk::io::{parse_numbers, parse_sections, Entry, LatticeFile, Section};
use covwalk::walk::zariski_density_check;
use covwalk::{
    Checkpoints, Cover, GeodesicConfig, LineError, Measure, MeasureSpec, PointH, Preset, StartMode,
    Surface, UnitTangent, WalkConfig,
};
use sha2::{Digest, Sha256};

#[derive(Clone, Debug, PartialEq)]
pub enum LatticeSource {
    Preset(Preset),
    File(PathBuf),
}

#[derive(Clone, Debug, PartialEq)]
pub enum WeightsSpec {
    /// The preset's standard weights in this dimension.
    Dim(usize),
    /// `label = k1 ... kd`, in file order.
    Rows(Vec<(String, Vec<i64>)>),
    /// Taken from the lattice file's own `[weights]` section.
    FromLattice,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MeasureConfig {
    /// Equal mass on the generators.
    Uniform,
    /// Equal mass on the generators and their inverses.
    Symmetric,
    /// `word = mass` lines; words use the generator labels.
    Atoms(Vec<(String, f64)>),
    Parametric { tau_min: f64, tau_max: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub enum CheckpointSpec {
    Stride(u64),
    Geometric { first: u64, last: u64, count: usize },
    List(Vec<u64>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum StartSpec {
    Haar,
    Fixed { x: f64, y: f64, angle: f64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct WalkSection {
    pub steps: u64,
    pub trajectories: usize,
    pub seed: u64,
    pub checkpoints: CheckpointSpec,
    pub start: StartSpec,
    /// Geodesic runs: total time, step and record times.
    pub time: f64,
    pub dt: f64,
    pub times: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Report {
    Drift,
    Cauchy,
    Gaussian,
    Recurrence,
    Accumulation,
}

impl Report {
    const ALL: [Report; 5] = [
        Report::Drift,
        Report::Cauchy,
        Report::Gaussian,
        Report::Recurrence,
        Report::Accumulation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Report::Drift => "drift",
            Report::Cauchy => "cauchy",
            Report::Gaussian => "gaussian",
            Report::Recurrence => "recurrence",
            Report::Accumulation => "accumulation",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisSection {
    pub reports: Vec<Report>,
    /// Coordinate (1-based) fitted by the 1D laws.
    pub axis: usize,
    /// Recurrence window: returns counted in `(n / window, n]`.
    pub window: f64,
    pub n_min: f64,
    /// `None`: half the fitted Cauchy scale of the terminal drift.
    pub ec_threshold: Option<f64>,
    pub complement_threshold: f64,
    pub lyapunov_steps: Option<u64>,
    pub lyapunov_trajectories: usize,
    pub force: bool,
}

/// Line numbers of entries that are only validated at build time.
#[derive(Clone, Debug, Default)]
struct Spans {
    lattice: usize,
    weights: usize,
    weight_rows: BTreeMap<String, usize>,
    atoms: Vec<usize>,
    measure: usize,
    start: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub lattice: LatticeSource,
    pub weights: WeightsSpec,
    pub measure: MeasureConfig,
    pub walk: WalkSection,
    pub analysis: AnalysisSection,
    base_dir: PathBuf,
    spans: Spans,
}

impl PartialEq for ExperimentConfig {
    fn eq(&self, other: &Self) -> bool {
        self.lattice == other.lattice
            && self.weights == other.weights
            && self.measure == other.measure
            && self.walk == other.walk
            && self.analysis == other.analysis
    }
}

/// Validated experiment: geometry, cover and measure ready to run.
pub struct Bundle {
    pub cover: Cover,
    pub measure: Measure,
}

fn err(line: usize, msg: impl Into<String>) -> LineError {
    LineError::new(line, msg)
}

struct Keys<'a> {
    section: &'a Section,
    map: BTreeMap<&'a str, &'a Entry>,
}

impl<'a> Keys<'a> {
    fn new(section: &'a Section, allowed: &[&str]) -> Result<Self, LineError> {
        let mut map = BTreeMap::new();
        for e in &section.entries {
            let k = e
                .key
                .as_deref()
                .ok_or_else(|| err(e.line, format!("expected `key = value` in [{}]", section.name)))?;
            if !allowed.contains(&k) {
                return Err(err(e.line, format!("unknown key `{k}` in [{}]", section.name)));
            }
            if map.insert(k, e).is_some() {
                return Err(err(e.line, format!("duplicate key `{k}`")));
            }
        }
        Ok(Keys { section, map })
    }

    fn get(&self, k: &str) -> Option<&'a Entry> {
        self.map.get(k).copied()
    }

    fn required(&self, k: &str) -> Result<&'a Entry, LineError> {
        self.get(k)
            .ok_or_else(|| err(self.section.line, format!("[{}] needs `{k}`", self.section.name)))
    }
}

fn one<T: std::str::FromStr>(e: &Entry) -> Result<T, LineError> {
    e.value
        .parse()
        .map_err(|_| err(e.line, format!("cannot parse `{}`", e.value)))
}

fn parse_lattice(s: &Section) -> Result<(LatticeSource, usize), LineError> {
    let k = Keys::new(s, &["preset", "file"])?;
    match (k.get("preset"), k.get("file")) {
        (Some(e), None) => Preset::from_name(&e.value)
            .map(|p| (LatticeSource::Preset(p), e.line))
            .ok_or_else(|| err(e.line, format!("unknown preset `{}` (gamma2, punctured_square_torus)", e.value))),
        (None, Some(e)) => Ok((LatticeSource::File(PathBuf::from(&e.value)), e.line)),
        _ => Err(err(s.line, "[lattice] needs exactly one of `preset` or `file`")),
    }
}

fn parse_weights(s: &Section, spans: &mut Spans) -> Result<WeightsSpec, LineError> {
    spans.weights = s.line;
    if let Some(e) = s.entries.iter().find(|e| e.key.as_deref() == Some("d")) {
        if s.entries.len() > 1 {
            return Err(err(e.line, "`d` cannot be combined with weight rows"));
        }
        let d: usize = one(e)?;
        spans.weights = e.line;
        return Ok(WeightsSpec::Dim(d));
    }
    let mut rows = Vec::new();
    for e in &s.entries {
        let label = e
            .key
            .clone()
            .ok_or_else(|| err(e.line, "expected `label = k1 ... kd`"))?;
        if spans.weight_rows.insert(label.clone(), e.line).is_some() {
            return Err(err(e.line, format!("duplicate weight for `{label}`")));
        }
        rows.push((label, parse_numbers(e, None)?));
    }
    if rows.is_empty() {
        return Err(err(s.line, "[weights] is empty"));
    }
    Ok(WeightsSpec::Rows(rows))
}

fn parse_measure(s: &Section, spans: &mut Spans) -> Result<MeasureConfig, LineError> {
    spans.measure = s.line;
    let kind = s
        .entries
        .iter()
        .find(|e| e.key.as_deref() == Some("kind"))
        .ok_or_else(|| err(s.line, "[measure] needs `kind`"))?;
    spans.measure = kind.line;
    match kind.value.as_str() {
        "uniform" | "symmetric" => {
            if let Some(e) = s.entries.iter().find(|e| e.line != kind.line) {
                return Err(err(e.line, format!("`kind = {}` takes no other keys", kind.value)));
            }
            Ok(if kind.value == "uniform" {
                MeasureConfig::Uniform
            } else {
                MeasureConfig::Symmetric
            })
        }
        "parametric" => {
            let k = Keys::new(s, &["kind", "tau_min", "tau_max"])?;
            let tau_min = one(k.required("tau_min")?)?;
            let tau_max = one(k.required("tau_max")?)?;
            Ok(MeasureConfig::Parametric { tau_min, tau_max })
        }
        "atoms" => {
            let mut atoms = Vec::new();
            for e in s.entries.iter().filter(|e| e.line != kind.line) {
                let word = e.key.clone().ok_or_else(|| err(e.line, "expected `word = mass`"))?;
                let word = word.split_whitespace().collect::<Vec<_>>().join(" ");
                atoms.push((word, one::<f64>(e)?));
                spans.atoms.push(e.line);
            }
            if atoms.is_empty() {
                return Err(err(kind.line, "`kind = atoms` needs at least one `word = mass` line"));
            }
            Ok(MeasureConfig::Atoms(atoms))
        }
        other => Err(err(
            kind.line,
            format!("unknown measure kind `{other}` (uniform, symmetric, atoms, parametric)"),
        )),
    }
}

fn parse_checkpoints(e: &Entry) -> Result<CheckpointSpec, LineError> {
    let mut words = e.value.split_whitespace();
    let kind = words.next().unwrap_or("");
    let rest = Entry {
        line: e.line,
        key: None,
        value: words.collect::<Vec<_>>().join(" "),
    };
    match kind {
        "stride" => {
            let v = parse_numbers::<u64>(&rest, Some(1))?;
            if v[0] == 0 {
                return Err(err(e.line, "stride must be positive"));
            }
            Ok(CheckpointSpec::Stride(v[0]))
        }
        "geometric" => {
            let v = parse_numbers::<u64>(&rest, Some(3))?;
            if v[0] == 0 || v[1] < v[0] || v[2] < 2 {
                return Err(err(e.line, "geometric needs 0 < first <= last and count >= 2"));
            }
            Ok(CheckpointSpec::Geometric {
                first: v[0],
                last: v[1],
                count: v[2] as usize,
            })
        }
        "list" => {
            let mut v = parse_numbers::<u64>(&rest, None)?;
            v.sort_unstable();
            v.dedup();
            Ok(CheckpointSpec::List(v))
        }
        _ => Err(err(e.line, "checkpoints: `stride N`, `geometric FIRST LAST COUNT` or `list N...`")),
    }
}

fn parse_start(e: &Entry) -> Result<StartSpec, LineError> {
    let mut words = e.value.split_whitespace();
    match words.next() {
        Some("haar") if words.next().is_none() => Ok(StartSpec::Haar),
        Some("fixed") => {
            let rest = Entry {
                line: e.line,
                key: None,
                value: words.collect::<Vec<_>>().join(" "),
            };
            let v = parse_numbers::<f64>(&rest, None)?;
            let v = match v.len() {
                0 => vec![0.0, 1.0, 0.0],
                3 => v,
                _ => return Err(err(e.line, "`fixed` takes no numbers or `x y angle`")),
            };
            if !(v[1] > 0.0) {
                return Err(err(e.line, "start point needs y > 0"));
            }
            Ok(StartSpec::Fixed { x: v[0], y: v[1], angle: v[2] })
        }
        _ => Err(err(e.line, "start: `haar`, `fixed` or `fixed x y angle`")),
    }
}

fn parse_walk(s: &Section, spans: &mut Spans) -> Result<WalkSection, LineError> {
    let k = Keys::new(
        s,
        &["steps", "trajectories", "seed", "checkpoints", "start", "time", "dt", "times"],
    )?;
    let steps: u64 = match (k.get("steps"), k.get("time")) {
        (Some(e), _) => one(e)?,
        (None, Some(_)) => 0,
        (None, None) => return Err(err(s.line, "[walk] needs `steps`, or `time` for geodesic runs")),
    };
    let trajectories: usize = one(k.required("trajectories")?)?;
    if trajectories == 0 {
        return Err(err(k.required("trajectories")?.line, "trajectories must be positive"));
    }
    let seed = k.get("seed").map(one).transpose()?.unwrap_or(1);
    let checkpoints = k
        .get("checkpoints")
        .map(parse_checkpoints)
        .transpose()?
        .unwrap_or(CheckpointSpec::List(vec![]));
    let start = match k.get("start") {
        Some(e) => {
            spans.start = e.line;
            parse_start(e)?
        }
        None => StartSpec::Haar,
    };
    let time: f64 = k.get("time").map(one).transpose()?.unwrap_or(0.0);
    let dt: f64 = k
        .get("dt")
        .map(one)
        .transpose()?
        .unwrap_or(covwalk::walk::DEFAULT_FLOW_STEP);
    if let Some(e) = k.get("dt") {
        if !(dt > 0.0 && dt <= covwalk::walk::MAX_FLOW_STEP) {
            return Err(err(e.line, format!("dt must lie in (0, {}]", covwalk::walk::MAX_FLOW_STEP)));
        }
    }
    if let Some(e) = k.get("time") {
        if !(time >= 0.0 && time.is_finite()) {
            return Err(err(e.line, "time must be a non-negative number"));
        }
    }
    let mut times = match k.get("times") {
        Some(e) => parse_numbers::<f64>(e, None)?,
        None => vec![],
    };
    times.sort_by(f64::total_cmp);
    times.dedup();
    Ok(WalkSection {
        steps,
        trajectories,
        seed,
        checkpoints,
        start,
        time,
        dt,
        times,
    })
}

fn parse_analysis(s: Option<&Section>) -> Result<AnalysisSection, LineError> {
    let mut a = AnalysisSection {
        reports: vec![Report::Drift],
        axis: 1,
        window: 10.0,
        n_min: 1000.0,
        ec_threshold: None,
        complement_threshold: 0.1,
        lyapunov_steps: None,
        lyapunov_trajectories: 200,
        force: false,
    };
    let Some(s) = s else {
        return Ok(a);
    };
    let k = Keys::new(
        s,
        &[
            "reports",
            "axis",
            "window",
            "n_min",
            "ec_threshold",
            "complement_threshold",
            "lyapunov_steps",
            "lyapunov_trajectories",
            "force",
        ],
    )?;
    if let Some(e) = k.get("reports") {
        let mut reports = Vec::new();
        for w in e.value.split([',', ' ']).filter(|w| !w.is_empty()) {
            let r = Report::ALL
                .into_iter()
                .find(|r| r.name() == w)
                .ok_or_else(|| err(e.line, format!("unknown report `{w}`")))?;
            reports.push(r);
        }
        reports.sort();
        reports.dedup();
        a.reports = reports;
    }
    if let Some(e) = k.get("axis") {
        a.axis = one(e)?;
        if a.axis == 0 {
            return Err(err(e.line, "axis is 1-based"));
        }
    }
    if let Some(e) = k.get("window") {
        a.window = one(e)?;
        if !(a.window > 1.0) {
            return Err(err(e.line, "window must exceed 1"));
        }
    }
    if let Some(e) = k.get("n_min") {
        a.n_min = one(e)?;
    }
    if let Some(e) = k.get("ec_threshold") {
        a.ec_threshold = Some(one(e)?);
    }
    if let Some(e) = k.get("complement_threshold") {
        a.complement_threshold = one(e)?;
    }
    if let Some(e) = k.get("lyapunov_steps") {
        a.lyapunov_steps = Some(one(e)?);
    }
    if let Some(e) = k.get("lyapunov_trajectories") {
        a.lyapunov_trajectories = one(e)?;
    }
    if let Some(e) = k.get("force") {
        a.force = one(e)?;
    }
    Ok(a)
}

impl ExperimentConfig {
    /// Parses config text; relative lattice paths resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, LineError> {
        let sections = parse_sections(text)?;
        let mut seen = BTreeMap::new();
        for s in &sections {
            if !["lattice", "weights", "measure", "walk", "analysis"].contains(&s.name.as_str()) {
                return Err(err(s.line, format!("unknown section [{}]", s.name)));
            }
            if seen.insert(s.name.as_str(), s).is_some() {
                return Err(err(s.line, format!("duplicate section [{}]", s.name)));
            }
        }
        let need = |name: &str| {
            seen.get(name)
                .copied()
                .ok_or_else(|| err(0, format!("missing section [{name}]")))
        };
        let mut spans = Spans::default();
        let (lattice, line) = parse_lattice(need("lattice")?)?;
        spans.lattice = line;
        let weights = match seen.get("weights") {
            Some(s) => parse_weights(s, &mut spans)?,
            None if matches!(lattice, LatticeSource::File(_)) => WeightsSpec::FromLattice,
            None => return Err(err(0, "missing section [weights]")),
        };
        let measure = parse_measure(need("measure")?, &mut spans)?;
        let walk = parse_walk(need("walk")?, &mut spans)?;
        let analysis = parse_analysis(seen.get("analysis").copied())?;
        Ok(ExperimentConfig {
            lattice,
            weights,
            measure,
            walk,
            analysis,
            base_dir: base_dir.to_path_buf(),
            spans,
        })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base).map_err(|e| located(path, &e))
    }

    pub fn lattice_path(&self) -> Option<PathBuf> {
        match &self.lattice {
            LatticeSource::File(p) => Some(self.base_dir.join(p)),
            LatticeSource::Preset(_) => None,
        }
    }

    /// Every field in a fixed order with defaults spelled out.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        s.push_str("[lattice]\n");
        match &self.lattice {
            LatticeSource::Preset(p) => writeln!(s, "preset = {}", p.name()).unwrap(),
            LatticeSource::File(p) => writeln!(s, "file = {}", p.display()).unwrap(),
        }
        match &self.weights {
            WeightsSpec::Dim(d) => writeln!(s, "\n[weights]\nd = {d}").unwrap(),
            WeightsSpec::Rows(rows) => {
                s.push_str("\n[weights]\n");
                for (label, w) in rows {
                    writeln!(s, "{label} = {}", join(w)).unwrap();
                }
            }
            WeightsSpec::FromLattice => {}
        }
        s.push_str("\n[measure]\n");
        match &self.measure {
            MeasureConfig::Uniform => s.push_str("kind = uniform\n"),
            MeasureConfig::Symmetric => s.push_str("kind = symmetric\n"),
            MeasureConfig::Atoms(atoms) => {
                s.push_str("kind = atoms\n");
                for (w, m) in atoms {
                    writeln!(s, "{w} = {m}").unwrap();
                }
            }
            MeasureConfig::Parametric { tau_min, tau_max } => {
                writeln!(s, "kind = parametric\ntau_min = {tau_min}\ntau_max = {tau_max}").unwrap()
            }
        }
        let w = &self.walk;
        s.push_str("\n[walk]\n");
        writeln!(s, "steps = {}\ntrajectories = {}\nseed = {}", w.steps, w.trajectories, w.seed).unwrap();
        match &w.checkpoints {
            CheckpointSpec::Stride(k) => writeln!(s, "checkpoints = stride {k}").unwrap(),
            CheckpointSpec::Geometric { first, last, count } => {
                writeln!(s, "checkpoints = geometric {first} {last} {count}").unwrap()
            }
            CheckpointSpec::List(v) => writeln!(s, "checkpoints = list {}", join(v)).unwrap(),
        }
        match &w.start {
            StartSpec::Haar => s.push_str("start = haar\n"),
            StartSpec::Fixed { x, y, angle } => writeln!(s, "start = fixed {x} {y} {angle}").unwrap(),
        }
        writeln!(s, "time = {}\ndt = {}\ntimes = {}", w.time, w.dt, join(&w.times)).unwrap();
        let a = &self.analysis;
        s.push_str("\n[analysis]\n");
        let names: Vec<&str> = a.reports.iter().map(|r| r.name()).collect();
        writeln!(s, "reports = {}", names.join(", ")).unwrap();
        writeln!(s, "axis = {}\nwindow = {}\nn_min = {}", a.axis, a.window, a.n_min).unwrap();
        if let Some(t) = a.ec_threshold {
            writeln!(s, "ec_threshold = {t}").unwrap();
        }
        writeln!(s, "complement_threshold = {}", a.complement_threshold).unwrap();
        if let Some(n) = a.lyapunov_steps {
            writeln!(s, "lyapunov_steps = {n}").unwrap();
        }
        writeln!(s, "lyapunov_trajectories = {}\nforce = {}", a.lyapunov_trajectories, a.force).unwrap();
        s
    }

    /// SHA-256 of the canonical text, and of the lattice file if one is used.
    pub fn hash(&self) -> Result<String, String> {
        let mut h = Sha256::new();
        h.update(self.canonical().as_bytes());
        if let Some(p) = self.lattice_path() {
            let bytes = std::fs::read(&p).map_err(|e| format!("{}: {e}", p.display()))?;
            h.update(b"\0lattice\0");
            h.update(&bytes);
        }
        Ok(format!("{:x}", h.finalize()))
    }

    /// Builds the surface from the lattice section. Errors carry the config
    /// path or the lattice file path with a line.
    pub fn surface(&self, config_path: &Path) -> Result<(Surface, Option<LatticeFile>), String> {
        match &self.lattice {
            LatticeSource::Preset(p) => p
                .build()
                .map(|s| (s, None))
                .map_err(|e| located(config_path, &err(self.spans.lattice, e.to_string()))),
            LatticeSource::File(_) => {
                let path = self.lattice_path().unwrap();
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| located(config_path, &err(self.spans.lattice, format!("{}: {e}", path.display()))))?;
                let file = LatticeFile::parse(&text).map_err(|e| located(&path, &e))?;
                let s = file.surface().map_err(|e| located(&path, &e))?;
                Ok((s, Some(file)))
            }
        }
    }

    pub fn bundle(&self, config_path: &Path) -> Result<Bundle, String> {
        let (surface, file) = self.surface(config_path)?;
        let at = |line: usize, msg: String| located(config_path, &err(line, msg));
        let cover = match (&self.weights, &self.lattice) {
            (WeightsSpec::Dim(d), LatticeSource::Preset(p)) => {
                let w = preset_weights(*p, *d)
                    .ok_or_else(|| at(self.spans.weights, format!("no standard weights of dimension {d}")))?;
                Cover::build(surface, w).map_err(|e| at(self.spans.weights, e.to_string()))?
            }
            (WeightsSpec::Dim(_), LatticeSource::File(_)) => {
                return Err(at(self.spans.weights, "`d = ...` needs a preset lattice".into()))
            }
            (WeightsSpec::FromLattice, _) => {
                let f = file.expect("file lattice");
                let path = self.lattice_path().unwrap();
                f.cover(surface).map_err(|e| located(&path, &e))?
            }
            (WeightsSpec::Rows(rows), _) => {
                let pres = surface.presentation();
                for (label, _) in rows {
                    if pres.index_of(label).is_none() {
                        return Err(at(self.spans.weight_rows[label], format!("unknown generator `{label}`")));
                    }
                }
                let w = covwalk::cover::weights_by_label(pres, rows).map_err(|e| at(self.spans.weights, e.to_string()))?;
                match covwalk::cover::validate_cover(&surface, w) {
                    Ok(spec) => Cover::new(surface, spec),
                    Err(e) => {
                        let line = match &e {
                            covwalk::CoverError::WeightLength { label, .. } => {
                                self.spans.weight_rows.get(label).copied().unwrap_or(self.spans.weights)
                            }
                            _ => self.spans.weights,
                        };
                        return Err(at(line, e.to_string()));
                    }
                }
            }
        };
        let pres = cover.surface().presentation();
        let spec = match &self.measure {
            MeasureConfig::Uniform => MeasureSpec::uniform(pres.elements()),
            MeasureConfig::Symmetric => MeasureSpec::symmetric(pres.elements()),
            MeasureConfig::Parametric { tau_min, tau_max } => MeasureSpec::Parametric {
                tau_min: *tau_min,
                tau_max: *tau_max,
            },
            MeasureConfig::Atoms(atoms) => {
                let mut v = Vec::new();
                for ((word, mass), line) in atoms.iter().zip(&self.spans.atoms) {
                    let w = pres.parse_word(word).map_err(|e| at(*line, e.to_string()))?;
                    v.push((pres.evaluate(&w), *mass));
                }
                MeasureSpec::Atoms(v)
            }
        };
        let measure = Measure::new(spec).map_err(|e| at(self.spans.measure, e.to_string()))?;
        Ok(Bundle { cover, measure })
    }

    pub fn start_mode(&self) -> StartMode {
        match self.walk.start {
            StartSpec::Haar => StartMode::Haar,
            StartSpec::Fixed { x, y, angle } => {
                StartMode::Fixed(UnitTangent::at(PointH::new(x, y).expect("checked at parse"), angle))
            }
        }
    }

    pub fn walk_config(&self, config_path: &Path) -> Result<WalkConfig, String> {
        let w = &self.walk;
        if w.steps == 0 {
            return Err(located(config_path, &err(0, "walk runs need `steps > 0` in [walk]")));
        }
        Ok(WalkConfig {
            steps: w.steps,
            trajectories: w.trajectories,
            master_seed: w.seed,
            checkpoints: match &w.checkpoints {
                CheckpointSpec::Stride(k) => Checkpoints::Stride(*k),
                CheckpointSpec::Geometric { first, last, count } => Checkpoints::geometric(*first, *last, *count),
                CheckpointSpec::List(v) => Checkpoints::List(v.clone()),
            },
            start: self.start_mode(),
        })
    }

    pub fn geodesic_config(&self, config_path: &Path) -> Result<GeodesicConfig, String> {
        let w = &self.walk;
        if !(w.time > 0.0) {
            return Err(located(config_path, &err(0, "geodesic runs need `time > 0` in [walk]")));
        }
        Ok(GeodesicConfig {
            time: w.time,
            dt: w.dt,
            trajectories: w.trajectories,
            master_seed: w.seed,
            checkpoints: if w.times.is_empty() { vec![w.time] } else { w.times.clone() },
            start: self.start_mode(),
        })
    }

    /// Warns (does not fail) when the measure looks degenerate.
    pub fn zariski_note(&self, bundle: &Bundle) -> Option<String> {
        match zariski_density_check(&bundle.measure) {
            covwalk::walk::ZariskiVerdict::Pass(..) => None,
            covwalk::walk::ZariskiVerdict::Fail(why) => Some(why),
        }
    }
}

fn join<T: std::fmt::Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

/// `path:line: message`, or `path: message` when no line applies.
pub fn located(path: &Path, e: &LineError) -> String {
    if e.line == 0 {
        format!("{}: {}", path.display(), e.message)
    } else {
        format!("{}:{}: {}", path.display(), e.line, e.message)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DRIFT: &str = "\
[lattice]
preset = punctured_square_torus

[weights]
d = 1

[measure]
kind = uniform

[walk]
steps = 10000
trajectories = 100
seed = 7
checkpoints = stride 1000
start = fixed
";

    fn parse(text: &str) -> Result<ExperimentConfig, LineError> {
        ExperimentConfig::parse(text, Path::new("."))
    }

    #[test]
    fn canonical_round_trip() {
        let c = parse(DRIFT).unwrap();
        let text = c.canonical();
        let back = parse(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.canonical(), text);
        assert_eq!(c.walk.start, StartSpec::Fixed { x: 0.0, y: 1.0, angle: 0.0 });
        assert_eq!(c.analysis.reports, vec![Report::Drift]);
    }

    #[test]
    fn hash_tracks_semantics_only() {
        let a = parse(DRIFT).unwrap();
        let reordered = "# same experiment\n[walk]\nseed=7\nsteps = 10000\n  trajectories = 100\ncheckpoints = stride   1000\nstart = fixed 0 1 0\n[measure]\nkind = uniform\n[weights]\nd = 1\n[lattice]\npreset = punctured_square_torus\n[analysis]\nreports = drift\n";
        assert_eq!(a.hash().unwrap(), parse(reordered).unwrap().hash().unwrap());
        for (from, to) in [("seed = 7", "seed = 8"), ("d = 1", "d = 2"), ("start = fixed", "start = haar")] {
            let b = parse(&DRIFT.replace(from, to)).unwrap();
            assert_ne!(a.hash().unwrap(), b.hash().unwrap(), "{to}");
        }
    }

    #[test]
    fn every_field_survives_the_round_trip() {
        let text = "\
[lattice]
file = lat.txt
[weights]
A = 1 0
B = 0 1
[measure]
kind = atoms
A = 0.25
A^-1  B = 0.75
[walk]
steps = 5
trajectories = 2
checkpoints = geometric 10 1000 5
start = fixed 0.5 2 1.25
time = 20
dt = 0.125
times = 10 5
[analysis]
reports = recurrence, cauchy drift
axis = 2
window = 4
n_min = 100
ec_threshold = 0.02
complement_threshold = 0.2
lyapunov_steps = 77
lyapunov_trajectories = 9
force = true
";
        let c = parse(text).unwrap();
        assert_eq!(c.walk.times, vec![5.0, 10.0]);
        assert_eq!(
            c.measure,
            MeasureConfig::Atoms(vec![("A".into(), 0.25), ("A^-1 B".into(), 0.75)])
        );
        let back = parse(&c.canonical()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.canonical(), c.canonical());
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            (DRIFT.replace("seed = 7", "seed = x"), 13),
            (DRIFT.replace("seed = 7", "sed = 7"), 13),
            (DRIFT.replace("kind = uniform", "kind = lumpy"), 8),
            (DRIFT.replace("start = fixed", "start = fixed 1 -1 0"), 15),
            (DRIFT.replace("[walk]", "[walks]"), 10),
            (DRIFT.replace("checkpoints = stride 1000", "checkpoints = every 1000"), 14),
            (format!("{DRIFT}steps = 3\n"), 16),
        ];
        for (text, line) in cases {
            assert_eq!(parse(&text).unwrap_err().line, line, "{text}");
        }
        assert_eq!(parse(&DRIFT.replace("[measure]\nkind = uniform\n", "")).unwrap_err().line, 0);
    }

    #[test]
    fn build_errors_name_the_line() {
        let p = Path::new("x.cfg");
        let unknown = parse(&DRIFT.replace("d = 1", "g1 = 0\ng3 = 1")).unwrap();
        assert!(unknown.bundle(p).err().unwrap().starts_with("x.cfg:6:"));
        let atoms = parse(&DRIFT.replace("kind = uniform", "kind = atoms\ng1 = 0.5\ng9 = 0.5")).unwrap();
        assert!(atoms.bundle(p).err().unwrap().starts_with("x.cfg:10:"));
        let mass = parse(&DRIFT.replace("kind = uniform", "kind = atoms\ng1 = 0.5\ng2 = 0.25")).unwrap();
        assert!(mass.bundle(p).err().unwrap().starts_with("x.cfg:8:"));
        let dim = parse(&DRIFT.replace("d = 1", "d = 3")).unwrap();
        assert!(dim.bundle(p).err().unwrap().starts_with("x.cfg:5:"));
        assert!(parse(DRIFT).unwrap().bundle(p).is_ok());
    }
}
