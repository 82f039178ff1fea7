use std::path::{Path, PathBuf};

use covwalk::cover::{preset_weights, validate_cover};
use covwalk::io::{read_fit_samples, write_dat, write_records_csv, write_records_jsonl, LatticeAudit, LatticeFile};
use covwalk::stats::{
    accumulation_diagnostic, cauchy_cdf, cauchy_fit, cauchy_fit_projections, drift_summary,
    finite_orbit_target, gaussian_fit, median, recurrence_report,
};
use covwalk::walk::{lyapunov_estimate, run_geodesic, run_walk};
use covwalk::{Cover, Preset, Surface, Trajectory};
use serde_json::{json, Value};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::config::{Bundle, ExperimentConfig, MeasureConfig, Report, StartSpec};
use crate::output::{out_dir, stem, write_atomic, write_json, Failure, Outcome, BUILD_ID};

fn input(e: impl std::fmt::Display) -> Failure {
    Failure::Input(e.to_string())
}

fn runtime(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn load(config: &Path) -> Outcome<(ExperimentConfig, Bundle, String)> {
    let cfg = ExperimentConfig::load(config).map_err(Failure::Input)?;
    let bundle = cfg.bundle(config).map_err(Failure::Input)?;
    let hash = cfg.hash().map_err(Failure::Input)?;
    if let Some(why) = cfg.zariski_note(&bundle) {
        eprintln!("warning: measure may not be Zariski dense: {why}");
    }
    Ok((cfg, bundle, hash))
}

fn header(kind: &str, name: &str, cfg: &ExperimentConfig, bundle: &Bundle, hash: &str) -> Value {
    let spec = bundle.cover.spec();
    json!({
        "kind": kind,
        "name": name,
        "build": BUILD_ID,
        "config_hash": hash,
        "config": cfg.canonical(),
        "cover": {
            "d": spec.dim(),
            "ec_dim": spec.ec_dim(),
            "weights": spec.weights(),
            "cusp_vectors": spec.cusp_vectors(),
            "unfolded": spec.unfolded(),
        },
    })
}

fn merge(into: &mut Value, from: Value) {
    if let (Value::Object(a), Value::Object(b)) = (into, from) {
        a.extend(b);
    }
}

fn ok_trajectories(trajs: &[Trajectory]) -> Vec<Trajectory> {
    trajs.iter().filter(|t| t.error.is_none()).cloned().collect()
}

fn failures(trajs: &[Trajectory]) -> Value {
    trajs
        .iter()
        .filter_map(|t| t.error.as_ref().map(|e| json!({ "traj": t.traj, "error": e })))
        .collect()
}

/// Per checkpoint: mean normalized drift and median of its norm.
fn checkpoint_table(trajs: &[Trajectory]) -> Vec<Vec<f64>> {
    let count = trajs.iter().map(|t| t.records.len()).min().unwrap_or(0);
    (0..count)
        .map(|c| {
            let recs: Vec<_> = trajs.iter().map(|t| &t.records[c]).collect();
            let d = recs[0].drift.len();
            let k = recs.len() as f64;
            let mut row = vec![recs[0].n];
            row.extend((0..d).map(|i| recs.iter().map(|r| r.drift[i]).sum::<f64>() / k));
            let norms: Vec<f64> = recs
                .iter()
                .map(|r| r.drift.iter().map(|x| x * x).sum::<f64>().sqrt())
                .collect();
            row.push(median(&norms));
            row
        })
        .collect()
}

fn or_error<T: serde::Serialize, E: std::fmt::Display>(r: Result<T, E>) -> Value {
    match r {
        Ok(v) => serde_json::to_value(v).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

/// The analyses requested in `[analysis]`, over successful trajectories.
fn analyze(cfg: &ExperimentConfig, bundle: &Bundle, trajs: &[Trajectory], out: &Path, name: &str) -> Outcome<Value> {
    let a = &cfg.analysis;
    let cover = &bundle.cover;
    let d = cover.dim();
    if a.axis > d {
        return Err(Failure::Input(format!("analysis axis {} exceeds the cover dimension {d}", a.axis)));
    }
    let axis = a.axis - 1;
    let mut v = json!({});
    let terminal: Vec<&covwalk::CheckpointRecord> = trajs.iter().filter_map(|t| t.records.last()).collect();
    let along: Vec<f64> = terminal.iter().map(|r| r.drift[axis]).collect();
    let table = checkpoint_table(trajs);
    let mut cols: Vec<String> = vec!["n".into()];
    cols.extend((1..=d).map(|i| format!("mean_drift{i}")));
    cols.push("median_norm_drift".into());
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    write_atomic(&out.join(format!("{name}.drift.dat")), |w| write_dat(w, &col_refs, &table))?;

    for r in &a.reports {
        match r {
            Report::Drift => {
                let target = match (&cfg.walk.start, &cfg.measure) {
                    (StartSpec::Fixed { .. }, m) if !matches!(m, MeasureConfig::Parametric { .. }) => {
                        let StartSpecMode(x0) = StartSpecMode::from(cfg);
                        finite_orbit_target(cover, &bundle.measure, &x0).ok()
                    }
                    _ => None,
                };
                let s = drift_summary(trajs, target.clone());
                merge(
                    &mut v,
                    json!({ "drift": {
                        "mean": s.mean,
                        "covariance": s.covariance,
                        "target": target,
                        "fraction_within_0.05": s.fraction_within(0.05),
                        "max_deviation": s.deviation.iter().cloned().fold(0.0, f64::max),
                    }}),
                );
            }
            Report::Cauchy => {
                let mut c = json!({ "axis": a.axis, "fit": or_error(cauchy_fit(&along)) });
                if cover.spec().ec_dim() > 1 {
                    let (ec, _) = cover.spec().ec_frames();
                    let samples: Vec<Vec<f64>> = terminal.iter().map(|r| r.drift.clone()).collect();
                    c["ec_projections"] = or_error(cauchy_fit_projections(&samples, &ec));
                }
                merge(&mut v, json!({ "cauchy": c }));
            }
            Report::Gaussian => {
                let scaled: Vec<f64> = terminal
                    .iter()
                    .map(|r| r.index[axis] as f64 / r.n.max(f64::MIN_POSITIVE).sqrt())
                    .collect();
                merge(
                    &mut v,
                    json!({ "gaussian": { "axis": a.axis, "statistic": "index / sqrt(n)", "fit": or_error(gaussian_fit(&scaled)) } }),
                );
            }
            Report::Recurrence => {
                let rep = recurrence_report(trajs, a.window, d, cover.spec().ec_dim());
                let rows: Vec<Vec<f64>> = rep
                    .rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.n,
                            r.return_fraction,
                            r.ever_returned,
                            r.median_first_return.unwrap_or(f64::NAN),
                            r.median_max_excursion,
                        ]
                    })
                    .collect();
                write_atomic(&out.join(format!("{name}.recurrence.dat")), |w| {
                    write_dat(
                        w,
                        &["n", "windowed_return_fraction", "ever_returned", "median_first_return", "median_max_excursion"],
                        &rows,
                    )
                })?;
                merge(&mut v, json!({ "recurrence": rep }));
            }
            Report::Accumulation => {
                let threshold = match a.ec_threshold {
                    Some(t) => Some(t),
                    None => cauchy_fit(&along).ok().map(|f| 0.5 * f.scale),
                };
                let value = match threshold {
                    Some(t) => {
                        let rep = accumulation_diagnostic(trajs, cover.spec(), a.n_min, t, a.complement_threshold);
                        json!({
                            "n_min": rep.n_min,
                            "ec_threshold": rep.ec_threshold,
                            "complement_threshold": rep.complement_threshold,
                            "oscillating_fraction": rep.oscillating_fraction,
                            "fraction_total_below_complement_threshold": rep.fraction_total_below(a.complement_threshold),
                            "median_ec_range": if rep.ec_range.is_empty() { Value::Null } else { json!(median(&rep.ec_range)) },
                            "median_total_range": if rep.total_range.is_empty() { Value::Null } else { json!(median(&rep.total_range)) },
                        })
                    }
                    None => json!({ "error": "no threshold: set ec_threshold or provide enough samples for a Cauchy fit" }),
                };
                merge(&mut v, json!({ "accumulation": value }));
            }
        }
    }
    Ok(v)
}

/// The fixed start as a tangent vector.
struct StartSpecMode(covwalk::UnitTangent);

impl From<&ExperimentConfig> for StartSpecMode {
    fn from(cfg: &ExperimentConfig) -> Self {
        match cfg.start_mode() {
            covwalk::StartMode::Fixed(x) => StartSpecMode(x),
            covwalk::StartMode::Haar => StartSpecMode(covwalk::UnitTangent::upright()),
        }
    }
}

fn write_records(out: &Path, name: &str, trajs: &[Trajectory], d: usize) -> Outcome<()> {
    write_atomic(&out.join(format!("{name}.records.csv")), |w| {
        write_records_csv(w, trajs, d).map_err(std::io::Error::other)
    })?;
    write_atomic(&out.join(format!("{name}.records.jsonl")), |w| write_records_jsonl(w, trajs))
}

/// Adds failure counts, writes the summary and prints it without the config text.
fn finish(kind: &str, out: &Path, name: &str, mut summary: Value, trajs: &[Trajectory]) -> Outcome<()> {
    let failed = trajs.iter().filter(|t| t.error.is_some()).count();
    summary["trajectories"] = json!(trajs.len());
    summary["failed"] = json!(failed);
    summary["failures"] = failures(trajs);
    let path = out.join(format!("{name}.{kind}.summary.json"));
    write_json(&path, &summary)?;
    println!("{}", serde_json::to_string_pretty(&compact(&summary)).unwrap());
    eprintln!("wrote {}", path.display());
    if failed > 0 {
        return Err(Failure::Runtime(format!(
            "{failed} of {} trajectories failed; see {}",
            trajs.len(),
            path.display()
        )));
    }
    Ok(())
}

fn compact(summary: &Value) -> Value {
    let mut s = summary.clone();
    if let Value::Object(m) = &mut s {
        m.remove("config");
    }
    s
}

pub fn walk_run(config: &Path, out: &Path) -> Outcome<()> {
    let (cfg, bundle, hash) = load(config)?;
    let out = out_dir(out)?;
    let name = stem(config);
    let walk = cfg.walk_config(config).map_err(Failure::Input)?;
    let trajs = run_walk(&bundle.cover, &bundle.measure, &walk).map_err(input)?;
    write_records(&out, &name, &trajs, bundle.cover.dim())?;
    let mut summary = header("walk", &name, &cfg, &bundle, &hash);
    summary["steps"] = json!(walk.steps);
    merge(&mut summary, analyze(&cfg, &bundle, &ok_trajectories(&trajs), &out, &name)?);
    finish("walk", &out, &name, summary, &trajs)
}

pub fn geodesic_run(config: &Path, out: &Path) -> Outcome<()> {
    let (cfg, bundle, hash) = load(config)?;
    let out = out_dir(out)?;
    let name = stem(config);
    let geo = cfg.geodesic_config(config).map_err(Failure::Input)?;
    let trajs = run_geodesic(&bundle.cover, &geo).map_err(input)?;
    write_records(&out, &name, &trajs, bundle.cover.dim())?;
    let mut summary = header("geodesic", &name, &cfg, &bundle, &hash);
    summary["time"] = json!(geo.time);
    summary["dt"] = json!(geo.dt);
    merge(&mut summary, analyze(&cfg, &bundle, &ok_trajectories(&trajs), &out, &name)?);
    finish("geodesic", &out, &name, summary, &trajs)
}

pub fn recurrence(config: &Path, out: &Path) -> Outcome<()> {
    let (mut cfg, bundle, hash) = load(config)?;
    let out = out_dir(out)?;
    let name = stem(config);
    let trajs = run_walk(&bundle.cover, &bundle.measure, &cfg.walk_config(config).map_err(Failure::Input)?).map_err(input)?;
    let mut summary = header("recurrence", &name, &cfg, &bundle, &hash);
    summary["steps"] = json!(cfg.walk.steps);
    cfg.analysis.reports = vec![Report::Recurrence];
    merge(&mut summary, analyze(&cfg, &bundle, &ok_trajectories(&trajs), &out, &name)?);
    summary["verdict_note"] = json!("advisory: statistical indicator, not a proof");
    finish("recurrence", &out, &name, summary, &trajs)
}

pub fn lyapunov(
    config: &Path,
    steps: Option<u64>,
    trajectories: Option<usize>,
    force: bool,
    out: Option<&Path>,
) -> Outcome<()> {
    let (cfg, bundle, hash) = load(config)?;
    let steps = steps
        .or(cfg.analysis.lyapunov_steps)
        .unwrap_or(cfg.walk.steps);
    if steps == 0 {
        return Err(Failure::Input("lyapunov needs --steps, `lyapunov_steps` or `steps` in the config".into()));
    }
    let k = trajectories.unwrap_or(cfg.analysis.lyapunov_trajectories);
    let est = lyapunov_estimate(&bundle.measure, steps, k, cfg.walk.seed, force || cfg.analysis.force)
        .map_err(input)?;
    let name = stem(config);
    let mut summary = header("lyapunov", &name, &cfg, &bundle, &hash);
    summary["lyapunov"] = json!(est);
    println!("{}", serde_json::to_string_pretty(&compact(&summary)).unwrap());
    if let Some(dir) = out {
        let dir = out_dir(dir)?;
        write_json(&dir.join(format!("{name}.lyapunov.summary.json")), &summary)?;
    }
    if !(est.mean > 0.0) {
        return Err(Failure::Runtime(format!("estimated exponent {} is not positive", est.mean)));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Law {
    Cauchy,
    Gaussian,
}

pub fn fit(law: Law, file: &Path, column: Option<&str>, out: Option<&Path>) -> Outcome<()> {
    let text = std::fs::read_to_string(file).map_err(|e| Failure::Input(format!("{}: {e}", file.display())))?;
    let samples = read_fit_samples(&text, column).map_err(|e| Failure::Input(crate::config::located(file, &e)))?;
    let mut sorted = samples.clone();
    sorted.sort_by(f64::total_cmp);
    let (value, cdf): (Value, Box<dyn Fn(f64) -> f64>) = match law {
        Law::Cauchy => {
            let f = cauchy_fit(&samples).map_err(input)?;
            let (loc, scale) = (f.location, f.scale);
            (json!(f), Box::new(move |x| cauchy_cdf(x, loc, scale)))
        }
        Law::Gaussian => {
            let f = gaussian_fit(&samples).map_err(input)?;
            let normal = Normal::new(f.mean, f.sd).map_err(runtime)?;
            (json!(f), Box::new(move |x| normal.cdf(x)))
        }
    };
    let kind = match law {
        Law::Cauchy => "cauchy",
        Law::Gaussian => "gaussian",
    };
    let name = stem(file);
    let summary = json!({
        "kind": format!("fit_{kind}"),
        "name": name,
        "build": BUILD_ID,
        "input": file.display().to_string(),
        "column": column,
        "fit": value,
    });
    println!("{}", serde_json::to_string_pretty(&summary).unwrap());
    if let Some(dir) = out {
        let dir = out_dir(dir)?;
        write_json(&dir.join(format!("{name}.fit_{kind}.summary.json")), &summary)?;
        let n = sorted.len() as f64;
        let rows: Vec<Vec<f64>> = sorted
            .iter()
            .enumerate()
            .map(|(i, &x)| vec![x, (i + 1) as f64 / n, cdf(x)])
            .collect();
        write_atomic(&dir.join(format!("{name}.fit_{kind}.cdf.dat")), |w| {
            write_dat(w, &["x", "empirical_cdf", "fitted_cdf"], &rows)
        })?;
    }
    Ok(())
}

pub fn report(dir: &Path) -> Outcome<()> {
    let entries = std::fs::read_dir(dir).map_err(|e| Failure::Input(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.to_string_lossy().ends_with(".summary.json"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Failure::Input(format!("{}: no *.summary.json files", dir.display())));
    }
    let mut text = String::new();
    let mut rows = Vec::new();
    let mut legend = Vec::new();
    for (id, p) in paths.iter().enumerate() {
        let raw = std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
        let s: Value = serde_json::from_str(&raw).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))?;
        let file = p.file_name().unwrap().to_string_lossy().into_owned();
        legend.push(format!("{id} {file}"));
        text.push_str(&dashboard_block(&file, &s));
        let num = |v: &Value| v.as_f64().unwrap_or(f64::NAN);
        let drift_norm = s["drift"]["mean"]
            .as_array()
            .map(|m| m.iter().map(|x| num(x).powi(2)).sum::<f64>().sqrt())
            .unwrap_or(f64::NAN);
        let cauchy = if s["fit"].is_object() && s["kind"] == "fit_cauchy" { &s["fit"] } else { &s["cauchy"]["fit"] };
        let gauss = if s["fit"].is_object() && s["kind"] == "fit_gaussian" { &s["fit"] } else { &s["gaussian"]["fit"] };
        let last_rec = s["recurrence"]["rows"].as_array().and_then(|r| r.last()).cloned().unwrap_or(Value::Null);
        rows.push(vec![
            id as f64,
            num(&s["trajectories"]),
            num(&s["failed"]),
            drift_norm,
            num(&cauchy["scale"]),
            num(&cauchy["ks_distance"]),
            num(&cauchy["tail_index"]),
            num(&gauss["ks_distance"]),
            num(&last_rec["ever_returned"]),
            num(&s["lyapunov"]["mean"]),
        ]);
    }
    write_atomic(&dir.join("report.txt"), |w| w.write_all(text.as_bytes()))?;
    write_atomic(&dir.join("report.dat"), |w| {
        for l in &legend {
            writeln!(w, "# {l}")?;
        }
        write_dat(
            w,
            &[
                "id",
                "trajectories",
                "failed",
                "mean_drift_norm",
                "cauchy_scale",
                "cauchy_ks",
                "cauchy_tail_index",
                "gaussian_ks",
                "final_ever_returned",
                "lyapunov",
            ],
            &rows,
        )
    })?;
    print!("{text}");
    eprintln!("wrote {} and {}", dir.join("report.txt").display(), dir.join("report.dat").display());
    Ok(())
}

fn dashboard_block(file: &str, s: &Value) -> String {
    let mut out = format!("== {file} ({})\n", s["kind"].as_str().unwrap_or("?"));
    let line = |out: &mut String, k: &str, v: String| out.push_str(&format!("  {k:<22} {v}\n"));
    if let Some(h) = s["config_hash"].as_str() {
        line(&mut out, "config hash", h[..16.min(h.len())].to_string());
    }
    if let Some(b) = s["build"].as_str() {
        line(&mut out, "build", b.to_string());
    }
    if s["trajectories"].is_number() {
        line(&mut out, "trajectories", format!("{} ({} failed)", s["trajectories"], s["failed"]));
    }
    if s["drift"].is_object() {
        line(&mut out, "mean drift", s["drift"]["mean"].to_string());
        if !s["drift"]["target"].is_null() {
            line(&mut out, "drift target", s["drift"]["target"].to_string());
        }
        line(&mut out, "within 0.05", s["drift"]["fraction_within_0.05"].to_string());
    }
    for (key, label) in [("cauchy", "cauchy fit"), ("gaussian", "gaussian fit")] {
        let f = &s[key]["fit"];
        if f.is_object() {
            line(&mut out, label, fit_line(f));
        }
    }
    if s["kind"].as_str().is_some_and(|k| k.starts_with("fit_")) {
        line(&mut out, "fit", fit_line(&s["fit"]));
    }
    if let Some(rows) = s["recurrence"]["rows"].as_array() {
        for r in rows {
            line(
                &mut out,
                &format!("returns by n={}", r["n"]),
                format!(
                    "ever {:.3}, windowed {:.3}, median max excursion {:.1}",
                    r["ever_returned"].as_f64().unwrap_or(f64::NAN),
                    r["return_fraction"].as_f64().unwrap_or(f64::NAN),
                    r["median_max_excursion"].as_f64().unwrap_or(f64::NAN)
                ),
            );
        }
        line(&mut out, "verdict hint", s["recurrence"]["verdict_hint"].to_string());
    }
    if s["accumulation"].is_object() {
        line(&mut out, "oscillating fraction", s["accumulation"]["oscillating_fraction"].to_string());
    }
    if s["lyapunov"].is_object() {
        line(
            &mut out,
            "lyapunov",
            format!("{} ± {}", s["lyapunov"]["mean"], s["lyapunov"]["se"]),
        );
    }
    out
}

fn fit_line(f: &Value) -> String {
    if let Some(e) = f["error"].as_str() {
        return format!("error: {e}");
    }
    let g = |k: &str| f[k].as_f64().unwrap_or(f64::NAN);
    if f.get("scale").is_some() {
        format!(
            "location {:.4}, scale {:.4}, KS {:.4}, tail index {:.3}",
            g("location"),
            g("scale"),
            g("ks_distance"),
            g("tail_index")
        )
    } else {
        format!(
            "mean {:.4}, sd {:.4}, KS {:.4}, tail index {:.3}",
            g("mean"),
            g("sd"),
            g("ks_distance"),
            g("tail_index")
        )
    }
}

/// One cover's audit line for `lattice check`.
fn cover_audit(surface: &Surface, weights: Vec<Vec<i64>>) -> Value {
    match validate_cover(surface, weights.clone()) {
        Ok(spec) => json!({
            "weights": weights,
            "ok": true,
            "cusp_vectors": spec.cusp_vectors(),
            "unfolded": spec.unfolded(),
            "ec_dim": spec.ec_dim(),
        }),
        Err(e) => json!({ "weights": weights, "ok": false, "error": e.to_string() }),
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

pub fn lattice_check(target: &str, json_out: bool) -> Outcome<()> {
    let mut covers = Vec::new();
    let mut problems = Vec::new();
    let surface = if let Some(p) = Preset::from_name(target) {
        let s = p.build().map_err(runtime)?;
        for d in [1, 2] {
            covers.push(cover_audit(&s, preset_weights(p, d).unwrap()));
        }
        // every primitive rank-one weight with small entries
        for a in -3i64..=3 {
            for b in -3i64..=3 {
                if gcd(a, b) == 1 {
                    let mut c = cover_audit(&s, vec![vec![a], vec![b]]);
                    c["sweep"] = json!(true);
                    covers.push(c);
                }
            }
        }
        s
    } else {
        let path = Path::new(target);
        let text = std::fs::read_to_string(path).map_err(|e| {
            Failure::Input(format!("{target}: not a preset (gamma2, punctured_square_torus) and not readable: {e}"))
        })?;
        let file = LatticeFile::parse(&text).map_err(|e| Failure::Input(crate::config::located(path, &e)))?;
        let s = file.surface().map_err(|e| Failure::Input(crate::config::located(path, &e)))?;
        if !file.weights.is_empty() {
            let cover: Cover = file
                .cover(s.clone())
                .map_err(|e| Failure::Input(crate::config::located(path, &e)))?;
            covers.push(cover_audit(&s, cover.spec().weights().to_vec()));
        }
        s
    };
    let audit = LatticeAudit::new(&surface, None);
    if !audit.area_ok() {
        problems.push(format!(
            "polygon area {} differs from 2π|χ| = {}",
            audit.area, audit.gauss_bonnet_area
        ));
    }
    let invalid = covers.iter().filter(|c| c["ok"] == false).count();
    let always_folded = covers.iter().filter(|c| c["ok"] == true).all(|c| {
        c["unfolded"].as_array().is_some_and(|u| u.iter().all(|x| x == false))
    });
    let ok = problems.is_empty();
    let report = json!({
        "lattice": target,
        "audit": audit,
        "covers": covers,
        "invalid_weight_choices": invalid,
        "no_unfolded_cusp_for_any_weight_tried": always_folded,
        "problems": problems,
        "ok": ok,
    });
    if json_out {
        println!("{}", serde_json::to_string_pretty(&report).unwrap());
    } else {
        print_audit(target, &audit, &report);
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Input(problems.join("; ")))
    }
}

fn print_audit(target: &str, audit: &LatticeAudit, report: &Value) {
    println!("lattice {target}");
    println!("  generators      {}", audit.generators.join(", "));
    if !audit.relators.is_empty() {
        println!("  relators        {}", audit.relators.join("; "));
    }
    println!("  euler char      {}", audit.euler_characteristic);
    println!(
        "  area            {:.12} (2π|χ| = {:.12}) {}",
        audit.area,
        audit.gauss_bonnet_area,
        if audit.area_ok() { "ok" } else { "MISMATCH" }
    );
    println!("  sides           {} (word bound {})", audit.sides, audit.word_bound);
    println!("  cusps           {}", audit.cusps.len());
    for c in &audit.cusps {
        println!("    at {:<12} width {:<8.4} loop {}", c.fixed_point, c.width, c.loop_word);
    }
    let covers = report["covers"].as_array().cloned().unwrap_or_default();
    let (swept, listed): (Vec<_>, Vec<_>) = covers.iter().partition(|c| c["sweep"] == true);
    for c in listed {
        if c["ok"] == true {
            println!(
                "  weights {:<18} cusp vectors {:<22} unfolded {:<20} dim E_C {}",
                c["weights"].to_string(),
                c["cusp_vectors"].to_string(),
                c["unfolded"].to_string(),
                c["ec_dim"]
            );
        } else {
            println!("  weights {:<18} rejected: {}", c["weights"].to_string(), c["error"].as_str().unwrap_or(""));
        }
    }
    if !swept.is_empty() {
        let with_unfolded = swept
            .iter()
            .filter(|c| c["unfolded"].as_array().is_some_and(|u| u.iter().any(|x| x == true)))
            .count();
        println!(
            "  swept {} primitive rank-one weights with entries in [-3, 3]: {with_unfolded} unfold some cusp",
            swept.len()
        );
    }
    if report["no_unfolded_cusp_for_any_weight_tried"] == true {
        println!("  no cusp is unfolded for any weight tried");
    }
    println!("  {}", if report["ok"] == true { "all checks pass" } else { "CHECKS FAILED" });
}
