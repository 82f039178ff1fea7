//! Text formats: the INI-style section tokenizer, the lattice file, record
//! CSV/JSONL and gnuplot `.dat` tables.
//!
//! # Lattice file
//!
//! ```text
//! # comments start with '#'
//! [generator]
//! A = 1 2 0 1          # label = a b c d, a matrix of determinant 1
//! B = 1 0 2 1
//! [relator]
//! A B A^-1 B^-1        # one word per line; tokens `label` or `label^-1`
//! [weights]
//! A = 1                # label = k1 ... kd
//! B = 0
//! [domain]             # optional
//! center = 0 1         # Dirichlet center x y (default 0 1, i.e. i)
//! word_bound = 4       # largest word length tried (default: smallest that works up to 8)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cover::{validate_cover, weights_by_label, Cover, CoverError};
use crate::fuchsian::{GeometryError, LatticePresentation, Surface, Word};
use crate::hyp2::{GroupElement, PointH};
use crate::walk::{CheckpointRecord, Trajectory};

/// An error tied to a 1-based line of the input (0 if not tied to a line).
#[derive(Debug, Error, Clone, PartialEq)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl LineError {
    pub fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

impl fmt::Display for LineError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            f.write_str(&self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

/// A `key = value` line, or a bare line (`key` is `None`).
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: Option<String>,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

/// Splits INI-style text into sections. Comments (`#` or `;` to end of
/// line) and blank lines are dropped; content before the first header is
/// an error.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, LineError> {
    let mut out: Vec<Section> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| LineError::new(line, "unterminated section header"))?
                .trim();
            if name.is_empty() {
                return Err(LineError::new(line, "empty section name"));
            }
            out.push(Section {
                name: name.to_string(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let section = out
            .last_mut()
            .ok_or_else(|| LineError::new(line, "content before the first [section]"))?;
        let entry = match content.split_once('=') {
            Some((k, v)) => {
                let k = k.trim();
                if k.is_empty() {
                    return Err(LineError::new(line, "empty key"));
                }
                Entry {
                    line,
                    key: Some(k.to_string()),
                    value: v.trim().to_string(),
                }
            }
            None => Entry {
                line,
                key: None,
                value: content.to_string(),
            },
        };
        section.entries.push(entry);
    }
    Ok(out)
}

/// Parses whitespace-separated numbers, naming the line on failure.
pub fn parse_numbers<T: std::str::FromStr>(e: &Entry, count: Option<usize>) -> Result<Vec<T>, LineError> {
    let v: Vec<T> = e
        .value
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| LineError::new(e.line, format!("`{t}` is not a number")))
        })
        .collect::<Result<_, _>>()?;
    if let Some(n) = count {
        if v.len() != n {
            return Err(LineError::new(e.line, format!("expected {n} numbers, found {}", v.len())));
        }
    }
    Ok(v)
}

/// A parsed lattice file.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeFile {
    pub generators: Vec<(usize, String, [f64; 4])>,
    pub relators: Vec<(usize, String)>,
    pub weights: Vec<(usize, String, Vec<i64>)>,
    pub center: Option<PointH>,
    pub word_bound: Option<usize>,
}

/// Largest word bound tried when the file does not fix one.
pub const FILE_MAX_WORD_BOUND: usize = 8;

impl LatticeFile {
    pub fn parse(text: &str) -> Result<Self, LineError> {
        let mut f = LatticeFile {
            generators: Vec::new(),
            relators: Vec::new(),
            weights: Vec::new(),
            center: None,
            word_bound: None,
        };
        for s in parse_sections(text)? {
            match s.name.as_str() {
                "generator" | "generators" => {
                    for e in &s.entries {
                        let key = e
                            .key
                            .as_ref()
                            .ok_or_else(|| LineError::new(e.line, "expected `label = a b c d`"))?;
                        let m = parse_numbers::<f64>(e, Some(4))?;
                        f.generators.push((e.line, key.clone(), [m[0], m[1], m[2], m[3]]));
                    }
                }
                "relator" | "relators" => {
                    for e in &s.entries {
                        if e.key.is_some() {
                            return Err(LineError::new(e.line, "relator lines are bare words"));
                        }
                        f.relators.push((e.line, e.value.clone()));
                    }
                }
                "weights" => {
                    for e in &s.entries {
                        let key = e
                            .key
                            .as_ref()
                            .ok_or_else(|| LineError::new(e.line, "expected `label = k1 ... kd`"))?;
                        f.weights.push((e.line, key.clone(), parse_numbers(e, None)?));
                    }
                }
                "domain" => {
                    for e in &s.entries {
                        match e.key.as_deref() {
                            Some("center") => {
                                let c = parse_numbers::<f64>(e, Some(2))?;
                                f.center = Some(
                                    PointH::new(c[0], c[1])
                                        .map_err(|err| LineError::new(e.line, err.to_string()))?,
                                );
                            }
                            Some("word_bound") => {
                                f.word_bound = Some(parse_numbers(e, Some(1))?[0]);
                            }
                            _ => return Err(LineError::new(e.line, "unknown [domain] key")),
                        }
                    }
                }
                other => return Err(LineError::new(s.line, format!("unknown section [{other}]"))),
            }
        }
        if f.generators.is_empty() {
            return Err(LineError::new(0, "no [generator] entries"));
        }
        Ok(f)
    }

    pub fn presentation(&self) -> Result<LatticePresentation, LineError> {
        let mut gens = Vec::new();
        for (line, label, [a, b, c, d]) in &self.generators {
            let g = GroupElement::new(*a, *b, *c, *d).map_err(|e| LineError::new(*line, e.to_string()))?;
            gens.push((label.clone(), g));
        }
        let unchecked = LatticePresentation::new(gens.clone(), vec![]).map_err(|e| {
            let line = match &e {
                GeometryError::DuplicateLabel(l) | GeometryError::EllipticGenerator(l) => self
                    .generators
                    .iter()
                    .rfind(|g| &g.1 == l)
                    .map(|g| g.0)
                    .unwrap_or(0),
                _ => 0,
            };
            LineError::new(line, e.to_string())
        })?;
        let mut words: Vec<Word> = Vec::new();
        for (line, r) in &self.relators {
            words.push(unchecked.parse_word(r).map_err(|e| LineError::new(*line, e.to_string()))?);
        }
        LatticePresentation::new(gens, words).map_err(|e| match e {
            GeometryError::RelatorNotTrivial { index, .. } => LineError::new(self.relators[index].0, e.to_string()),
            e => LineError::new(0, e.to_string()),
        })
    }

    pub fn surface(&self) -> Result<Surface, LineError> {
        let pres = self.presentation()?;
        let center = self.center.unwrap_or(PointH::I);
        let res = match self.word_bound {
            Some(b) => Surface::new(pres, center, b),
            None => Surface::with_smallest_bound(pres, center, FILE_MAX_WORD_BOUND),
        };
        res.map_err(|e| LineError::new(0, e.to_string()))
    }

    /// Weight rows in generator order, if a `[weights]` section is present.
    pub fn weight_rows(&self, pres: &LatticePresentation) -> Result<Option<Vec<Vec<i64>>>, LineError> {
        if self.weights.is_empty() {
            return Ok(None);
        }
        for (line, label, _) in &self.weights {
            if pres.index_of(label).is_none() {
                return Err(LineError::new(*line, format!("weight for unknown generator `{label}`")));
            }
        }
        let rows: Vec<(String, Vec<i64>)> = self.weights.iter().map(|(_, l, w)| (l.clone(), w.clone())).collect();
        weights_by_label(pres, &rows).map(Some).map_err(|e| LineError::new(0, e.to_string()))
    }

    /// Builds the cover, anchoring weight errors to the offending line.
    pub fn cover(&self, surface: Surface) -> Result<Cover, LineError> {
        let rows = self
            .weight_rows(surface.presentation())?
            .ok_or_else(|| LineError::new(0, "no [weights] section"))?;
        let spec = validate_cover(&surface, rows).map_err(|e| {
            let line = match &e {
                CoverError::RelatorNotKilled { index, .. } => self.relators[*index].0,
                CoverError::WeightLength { label, .. } => {
                    self.weights.iter().find(|w| &w.1 == label).map_or(0, |w| w.0)
                }
                _ => 0,
            };
            LineError::new(line, e.to_string())
        })?;
        Ok(Cover::new(surface, spec))
    }
}

/// CSV header of the record contract.
pub fn csv_header(d: usize) -> Vec<String> {
    let mut h = vec!["traj".to_string(), "n".to_string()];
    h.extend((1..=d).map(|k| format!("k{k}")));
    h.extend((1..=d).map(|k| format!("drift{k}")));
    h.push("cusp_height".into());
    h.push("cartan_t".into());
    h
}

pub fn write_records_csv<W: Write>(out: W, trajs: &[Trajectory], d: usize) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(d))?;
    for t in trajs {
        for r in &t.records {
            let mut row = vec![r.traj.to_string(), r.n.to_string()];
            row.extend(r.index.iter().map(|k| k.to_string()));
            row.extend(r.drift.iter().map(|x| x.to_string()));
            row.push(r.cusp_height.to_string());
            row.push(r.cartan_t.to_string());
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per record; failed trajectories add an error line.
pub fn write_records_jsonl<W: Write>(mut out: W, trajs: &[Trajectory]) -> std::io::Result<()> {
    for t in trajs {
        for r in &t.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        if let Some(e) = &t.error {
            serde_json::to_writer(&mut out, &serde_json::json!({ "traj": t.traj, "error": e }))?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Deserialize)]
#[serde(untagged)]
enum JsonLine {
    Record(CheckpointRecord),
    Failure { traj: u64, error: String },
}

/// Reads JSONL records back into trajectories ordered by id.
pub fn read_records_jsonl(text: &str) -> Result<Vec<Trajectory>, LineError> {
    let mut by_traj: BTreeMap<u64, Trajectory> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: JsonLine = serde_json::from_str(line).map_err(|e| LineError::new(i + 1, e.to_string()))?;
        let (traj, rec, err) = match parsed {
            JsonLine::Record(r) => (r.traj, Some(r), None),
            JsonLine::Failure { traj, error } => (traj, None, Some(error)),
        };
        let t = by_traj.entry(traj).or_insert_with(|| Trajectory {
            traj,
            records: Vec::new(),
            error: None,
        });
        t.records.extend(rec);
        if err.is_some() {
            t.error = err;
        }
    }
    Ok(by_traj.into_values().collect())
}

/// Samples for fitting from a CSV file.
///
/// A file with `traj` and `n` columns is a record file: only the last
/// record of each trajectory is used, and the default column is `drift1`.
/// Otherwise the default column is the first. A headerless file of numbers
/// is accepted too.
pub fn read_fit_samples(text: &str, column: Option<&str>) -> Result<Vec<f64>, LineError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = rdr.records();
    let first = match rows.next() {
        Some(r) => r.map_err(|e| LineError::new(1, e.to_string()))?,
        None => return Err(LineError::new(0, "empty sample file")),
    };
    let has_header = first.iter().any(|f| f.parse::<f64>().is_err());
    let header: Vec<String> = if has_header {
        first.iter().map(str::to_string).collect()
    } else {
        (1..=first.len()).map(|k| format!("c{k}")).collect()
    };
    let is_records = header.iter().any(|h| h == "traj") && header.iter().any(|h| h == "n");
    let want = match column {
        Some(c) => c.to_string(),
        None if is_records => "drift1".to_string(),
        None => header[0].clone(),
    };
    let col = header
        .iter()
        .position(|h| *h == want)
        .ok_or_else(|| LineError::new(1, format!("no column `{want}`")))?;
    let traj_col = header.iter().position(|h| h == "traj");
    let mut values: Vec<(Option<String>, f64)> = Vec::new();
    let mut pending = if has_header { None } else { Some(first) };
    let mut line = if has_header { 1 } else { 0 };
    loop {
        let rec = match pending.take() {
            Some(r) => r,
            None => match rows.next() {
                Some(r) => r.map_err(|e| LineError::new(line + 1, e.to_string()))?,
                None => break,
            },
        };
        line = rec.position().map_or(line + 1, |p| p.line() as usize);
        let field = rec
            .get(col)
            .ok_or_else(|| LineError::new(line, "missing field"))?;
        let x: f64 = field
            .parse()
            .map_err(|_| LineError::new(line, format!("`{field}` is not a number")))?;
        let key = if is_records { traj_col.and_then(|c| rec.get(c)).map(str::to_string) } else { None };
        values.push((key, x));
    }
    if is_records {
        // last record per trajectory
        let mut last: BTreeMap<String, f64> = BTreeMap::new();
        let mut order = Vec::new();
        for (k, x) in values {
            let k = k.unwrap_or_default();
            if last.insert(k.clone(), x).is_none() {
                order.push(k);
            }
        }
        Ok(order.iter().map(|k| last[k]).collect())
    } else {
        Ok(values.into_iter().map(|(_, x)| x).collect())
    }
}

/// Writes a whitespace-separated table with a `#` header line, as read by
/// gnuplot.
pub fn write_dat<W: Write>(mut out: W, columns: &[&str], rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(out, "# {}", columns.join(" "))?;
    for r in rows {
        let line: Vec<String> = r.iter().map(|x| x.to_string()).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Summary of a lattice (and optionally a cover), as printed by the CLI.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticeAudit {
    pub generators: Vec<String>,
    pub relators: Vec<String>,
    pub euler_characteristic: i64,
    pub area: f64,
    pub gauss_bonnet_area: f64,
    pub sides: usize,
    pub word_bound: usize,
    pub cusps: Vec<CuspAudit>,
    pub ec_dim: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspAudit {
    pub fixed_point: String,
    pub width: f64,
    pub loop_word: String,
    pub vector: Option<Vec<i64>>,
    pub unfolded: Option<bool>,
}

impl LatticeAudit {
    pub fn new(surface: &Surface, cover: Option<&Cover>) -> Self {
        let pres = surface.presentation();
        LatticeAudit {
            generators: pres.labels().to_vec(),
            relators: pres.relators().iter().map(|w| pres.format_word(w)).collect(),
            euler_characteristic: pres.euler_characteristic(),
            area: surface.polygon().area(),
            gauss_bonnet_area: pres.gauss_bonnet_area(),
            sides: surface.polygon().sides().len(),
            word_bound: surface.polygon().word_bound(),
            cusps: surface
                .cusps()
                .iter()
                .enumerate()
                .map(|(j, c)| CuspAudit {
                    fixed_point: short_point(&c.fixed_point),
                    width: c.width,
                    loop_word: pres.format_word(&c.primitive_parabolic),
                    vector: cover.map(|cv| cv.spec().cusp_vectors()[j].clone()),
                    unfolded: cover.map(|cv| cv.spec().unfolded()[j]),
                })
                .collect(),
            ec_dim: cover.map(|c| c.spec().ec_dim()),
        }
    }

    pub fn area_ok(&self) -> bool {
        (self.area - self.gauss_bonnet_area).abs() <= 1e-6
    }
}

/// Boundary point rounded to 12 decimals, so `1.0000000000000002` reads `1`.
fn short_point(p: &crate::hyp2::BoundaryPoint) -> String {
    match p {
        crate::hyp2::BoundaryPoint::Real(x) => {
            let s = format!("{x:.12}");
            let s = s.trim_end_matches('0').trim_end_matches('.');
            if s == "-0" { "0".into() } else { s.into() }
        }
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cover::preset_weights;
    use crate::fuchsian::Preset;
    use crate::walk::{run_walk, Checkpoints, Measure, MeasureSpec, StartMode, WalkConfig};

    const GAMMA2: &str = "\
# level-2 congruence subgroup
[generator]
A = 1 2 0 1
B = 1 0 2 1

[weights]
A = 1   ; phi(A)
B = 0
";

    #[test]
    fn sections_and_errors() {
        let s = parse_sections("[a]\nx = 1 2\nbare words here\n\n[b]\n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[0].entries[0].key.as_deref(), Some("x"));
        assert_eq!(s[0].entries[1].key, None);
        assert_eq!(s[0].entries[1].line, 3);
        assert_eq!(parse_sections("x = 1\n").unwrap_err().line, 1);
        assert_eq!(parse_sections("[a]\n[b\n").unwrap_err().line, 2);
        assert_eq!(parse_sections("[a]\n = 3\n").unwrap_err().line, 2);
    }

    #[test]
    fn lattice_file_matches_preset() {
        let f = LatticeFile::parse(GAMMA2).unwrap();
        let s = f.surface().unwrap();
        let c = f.cover(s).unwrap();
        let preset = Preset::Gamma2.build().unwrap();
        assert!((c.surface().polygon().area() - preset.polygon().area()).abs() < 1e-9);
        assert_eq!(c.spec().weights(), preset_weights(Preset::Gamma2, 1).unwrap().as_slice());
        assert_eq!(c.spec().cusp_vectors(), &[vec![1], vec![0], vec![-1]]);
    }

    #[test]
    fn line_anchored_errors() {
        let bad_number = GAMMA2.replace("B = 1 0 2 1", "B = 1 0 x 1");
        assert_eq!(LatticeFile::parse(&bad_number).unwrap_err().line, 4);
        let three = GAMMA2.replace("B = 1 0 2 1", "B = 1 0 2");
        assert_eq!(LatticeFile::parse(&three).unwrap_err().line, 4);
        let det = GAMMA2.replace("B = 1 0 2 1", "B = 1 0 2 3");
        let f = LatticeFile::parse(&det).unwrap();
        assert_eq!(f.presentation().unwrap_err().line, 4);
        let unknown = GAMMA2.replace("B = 0", "C = 0");
        let f = LatticeFile::parse(&unknown).unwrap();
        let s = f.surface().unwrap();
        assert_eq!(f.cover(s).unwrap_err().line, 8);
        let short = GAMMA2.replace("A = 1   ; phi(A)", "A = 1 0");
        let f = LatticeFile::parse(&short).unwrap();
        let s = f.surface().unwrap();
        assert_eq!(f.cover(s).unwrap_err().line, 8);
    }

    #[test]
    fn relator_not_killed_names_the_relator_line() {
        // C = AB is redundant; the relator kills it unless phi(C) = phi(A) + phi(B)
        let text = "\
[generator]
A = 1 2 0 1
B = 1 0 2 1
C = 5 2 2 1
[relator]
C B^-1 A^-1
[weights]
A = 1
B = 0
C = 0
";
        let f = LatticeFile::parse(text).unwrap();
        let s = f.surface().unwrap();
        let e = f.cover(s).unwrap_err();
        assert_eq!(e.line, 6);
        assert!(e.message.contains("relator"), "{e}");
        let ok = text.replace("C = 0", "C = 1");
        let f = LatticeFile::parse(&ok).unwrap();
        assert!(f.cover(f.surface().unwrap()).is_ok());
        let wrong = text.replace("C B^-1 A^-1", "C A^-1 B^-1");
        let f = LatticeFile::parse(&wrong).unwrap();
        assert_eq!(f.presentation().unwrap_err().line, 6);
    }

    fn small_run() -> Vec<Trajectory> {
        let p = Preset::Gamma2;
        let c = Cover::build(p.build().unwrap(), preset_weights(p, 2).unwrap()).unwrap();
        let m = Measure::new(MeasureSpec::Parametric { tau_min: 0.5, tau_max: 1.5 }).unwrap();
        let cfg = WalkConfig {
            steps: 50,
            trajectories: 3,
            master_seed: 1,
            checkpoints: Checkpoints::Stride(10),
            start: StartMode::Haar,
        };
        run_walk(&c, &m, &cfg).unwrap()
    }

    #[test]
    fn csv_contract() {
        let t = small_run();
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &t, 2).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let first = text.lines().next().unwrap();
        assert_eq!(first, "traj,n,k1,k2,drift1,drift2,cusp_height,cartan_t");
        assert_eq!(text.lines().count(), 1 + 3 * 5);
        // terminal drift per trajectory
        let s = read_fit_samples(&text, None).unwrap();
        let expect: Vec<f64> = t.iter().map(|t| t.records.last().unwrap().drift[0]).collect();
        assert_eq!(s, expect);
        let k2 = read_fit_samples(&text, Some("k2")).unwrap();
        assert_eq!(k2[1], t[1].records.last().unwrap().index[1] as f64);
    }

    #[test]
    fn jsonl_round_trip() {
        let mut t = small_run();
        t[1].error = Some("step 7: boom".into());
        let mut buf = Vec::new();
        write_records_jsonl(&mut buf, &t).unwrap();
        let back = read_records_jsonl(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, t);
        assert_eq!(read_records_jsonl("{\"x\": 1}\n").unwrap_err().line, 1);
    }

    #[test]
    fn plain_sample_files() {
        assert_eq!(read_fit_samples("1.5\n-2\n3e1\n", None).unwrap(), vec![1.5, -2.0, 30.0]);
        assert_eq!(read_fit_samples("x,y\n1,2\n3,4\n", Some("y")).unwrap(), vec![2.0, 4.0]);
        assert_eq!(read_fit_samples("x\n1\nfoo\n", None).unwrap_err().line, 3);
        assert!(read_fit_samples("", None).is_err());
    }

    #[test]
    fn dat_layout() {
        let mut buf = Vec::new();
        write_dat(&mut buf, &["n", "f"], &[vec![1.0, 0.5], vec![2.0, 0.25]]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "# n f\n1 0.5\n2 0.25\n");
    }

    #[test]
    fn audit_of_presets() {
        let s = Preset::Gamma2.build().unwrap();
        let c = Cover::build(s.clone(), preset_weights(Preset::Gamma2, 1).unwrap()).unwrap();
        let a = LatticeAudit::new(&s, Some(&c));
        assert!(a.area_ok());
        assert_eq!(a.cusps.len(), 3);
        assert_eq!(a.ec_dim, Some(1));
        assert_eq!(a.cusps[2].loop_word, "B A^-1");
    }
}
