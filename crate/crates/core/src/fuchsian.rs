//! Lattice presentations, Dirichlet fundamental polygons, cusp data, point
//! reduction and Haar sampling on the unit tangent bundle of the base surface.
//!
//! Polygons are built as Dirichlet domains: the intersection over orbit
//! points `γ·c` of the half-planes `{d(z, c) <= d(z, γ·c)}`. Each half-plane
//! is a linear constraint in the Klein model, so the construction is convex
//! polygon clipping; the Gauss–Bonnet area certifies that the word bound
//! was large enough.

use std::collections::HashMap;
use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hyp2::{
    minkowski, BoundaryPoint, GroupElement, HypError, Kind, PointH, UnitTangent,
};

/// Tolerance for side inequalities, in `sinh` of hyperbolic distance.
pub const GEOM_EPS: f64 = 1e-9;
pub const MAX_REDUCE_ITER: usize = 1_000_000;
pub const DEFAULT_WORD_BOUND: usize = 12;
/// Reduction switches to chart coordinates beyond this `cosh` of the
/// distance from `i`.
pub const CHART_MODE_COSH: f64 = 1e3;
/// Cap on the number of enumerated words when choosing a default bound.
const WORD_BUDGET: usize = 2_000_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("unknown generator label `{0}`")]
    UnknownLabel(String),
    #[error("duplicate generator label `{0}`")]
    DuplicateLabel(String),
    #[error("generator `{0}` is elliptic or trivial; the lattice must be torsion-free")]
    EllipticGenerator(String),
    #[error("relator #{index} does not evaluate to the identity (error {error:e})")]
    RelatorNotTrivial { index: usize, error: f64 },
    #[error("polygon area {found} does not match Gauss-Bonnet value {expected}")]
    AreaMismatch { expected: f64, found: f64 },
    #[error("center is fixed by the non-trivial element {0}")]
    EllipticCenter(String),
    #[error("side from word `{0}` has no paired side")]
    UnpairedSide(String),
    #[error("reduction did not terminate after {0} steps")]
    NonTermination(usize),
    #[error("horoballs at height {0} overlap")]
    OverlappingHoroballs(f64),
    #[error("ideal vertex cycle error: {0}")]
    CuspCycle(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Hyp(#[from] HypError),
}

/// A generator or its inverse.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Letter {
    pub gen: usize,
    pub inverse: bool,
}

impl Letter {
    pub fn inv(self) -> Self {
        Letter {
            gen: self.gen,
            inverse: !self.inverse,
        }
    }
}

/// A word in the generators, read left to right as a matrix product.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Word(pub Vec<Letter>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn letter(gen: usize, inverse: bool) -> Self {
        Word(vec![Letter { gen, inverse }])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn inverse(&self) -> Self {
        Word(self.0.iter().rev().map(|l| l.inv()).collect())
    }

    /// `self` followed by `other`, freely reduced at the junction.
    pub fn concat(&self, other: &Word) -> Self {
        let mut out = self.clone();
        out.append(other);
        out
    }

    /// In-place [`Word::concat`].
    pub fn append(&mut self, other: &Word) {
        for &l in &other.0 {
            if self.0.last() == Some(&l.inv()) {
                self.0.pop();
            } else {
                self.0.push(l);
            }
        }
    }

    pub fn reduced(&self) -> Self {
        Word::empty().concat(self)
    }
}

/// Generators and relators of a torsion-free lattice in `PSL(2,R)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LatticePresentation {
    labels: Vec<String>,
    elements: Vec<GroupElement>,
    relators: Vec<Word>,
}

impl LatticePresentation {
    pub fn new(
        generators: Vec<(String, GroupElement)>,
        relators: Vec<Word>,
    ) -> Result<Self, GeometryError> {
        let mut labels = Vec::with_capacity(generators.len());
        let mut elements = Vec::with_capacity(generators.len());
        for (label, g) in generators {
            if labels.contains(&label) {
                return Err(GeometryError::DuplicateLabel(label));
            }
            match g.classify().kind {
                Kind::Elliptic | Kind::Identity => {
                    return Err(GeometryError::EllipticGenerator(label))
                }
                _ => {}
            }
            labels.push(label);
            elements.push(g);
        }
        let pres = Self {
            labels,
            elements,
            relators,
        };
        for (index, r) in pres.relators.iter().enumerate() {
            if r.letters().iter().any(|l| l.gen >= pres.elements.len()) {
                return Err(GeometryError::InvalidParameter(format!(
                    "relator #{index} uses an unknown generator"
                )));
            }
            let error = pres.evaluate(r).psl_distance(&GroupElement::IDENTITY);
            if error > 1e-9 {
                return Err(GeometryError::RelatorNotTrivial { index, error });
            }
        }
        Ok(pres)
    }

    pub fn rank(&self) -> usize {
        self.elements.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn relators(&self) -> &[Word] {
        &self.relators
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn letter_element(&self, l: Letter) -> GroupElement {
        let g = self.elements[l.gen];
        if l.inverse {
            g.inverse()
        } else {
            g
        }
    }

    pub fn evaluate(&self, w: &Word) -> GroupElement {
        w.letters()
            .iter()
            .fold(GroupElement::IDENTITY, |acc, &l| acc * self.letter_element(l))
    }

    /// Parses `A B^-1 A` (tokens separated by whitespace or `*`).
    pub fn parse_word(&self, s: &str) -> Result<Word, GeometryError> {
        let mut out = Vec::new();
        for tok in s.split(|c: char| c.is_whitespace() || c == '*') {
            if tok.is_empty() {
                continue;
            }
            let (name, inverse) = match tok.strip_suffix("^-1") {
                Some(n) => (n, true),
                None => (tok, false),
            };
            let gen = self
                .index_of(name)
                .ok_or_else(|| GeometryError::UnknownLabel(name.to_string()))?;
            out.push(Letter { gen, inverse });
        }
        Ok(Word(out))
    }

    pub fn format_word(&self, w: &Word) -> String {
        if w.is_empty() {
            return "e".to_string();
        }
        w.letters()
            .iter()
            .map(|l| {
                if l.inverse {
                    format!("{}^-1", self.labels[l.gen])
                } else {
                    self.labels[l.gen].clone()
                }
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Euler characteristic `1 - #generators + #relators` of the presentation.
    pub fn euler_characteristic(&self) -> i64 {
        1 - self.rank() as i64 + self.relators.len() as i64
    }

    /// `2π |χ|`.
    pub fn gauss_bonnet_area(&self) -> f64 {
        TAU * self.euler_characteristic().unsigned_abs() as f64
    }

    /// Largest word length whose enumeration stays within budget, capped at 12.
    pub fn default_word_bound(&self) -> usize {
        let r = 2 * self.rank();
        let mut total = 1usize;
        let mut layer = 1usize;
        for len in 1..=DEFAULT_WORD_BOUND {
            layer = if len == 1 { r } else { layer.saturating_mul(r.saturating_sub(1)) };
            total = total.saturating_add(layer);
            if total > WORD_BUDGET {
                return (len - 1).max(1);
            }
        }
        DEFAULT_WORD_BOUND
    }
}

/// A polygon vertex: inside the plane or on its boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Vertex {
    Finite(PointH),
    Ideal(BoundaryPoint),
}

impl Vertex {
    pub fn is_ideal(&self) -> bool {
        matches!(self, Vertex::Ideal(_))
    }
}

/// A complete geodesic in the upper half-plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Geodesic {
    Vertical { x: f64 },
    Circle { center: f64, radius: f64 },
}

impl Geodesic {
    /// Geodesic `{X : B(X, n) = 0}` for a spacelike normal `n`.
    pub fn from_normal(n: &[f64; 3]) -> Self {
        let p = n[0] - n[2];
        let q = n[0] + n[2];
        let scale = n[0].abs().max(n[1].abs()).max(n[2].abs());
        if p.abs() <= 1e-13 * scale {
            Geodesic::Vertical { x: q / (2.0 * n[1]) }
        } else {
            let center = n[1] / p;
            let r2 = center * center - q / p;
            Geodesic::Circle {
                center,
                radius: r2.max(0.0).sqrt(),
            }
        }
    }

    pub fn endpoints(&self) -> [BoundaryPoint; 2] {
        match *self {
            Geodesic::Vertical { x } => [BoundaryPoint::Real(x), BoundaryPoint::Infinity],
            Geodesic::Circle { center, radius } => [
                BoundaryPoint::Real(center - radius),
                BoundaryPoint::Real(center + radius),
            ],
        }
    }

    /// Largest imaginary part reached.
    pub fn max_height(&self) -> f64 {
        match *self {
            Geodesic::Vertical { .. } => f64::INFINITY,
            Geodesic::Circle { radius, .. } => radius,
        }
    }
}

/// One side of a Dirichlet polygon, lying on the bisector of `c` and `γ·c`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Side {
    /// Unit spacelike normal; inside is `B(X, normal) <= 0`.
    pub normal: [f64; 3],
    /// The word `γ`.
    pub source: Word,
    /// The word `γ^{-1}`, carrying this side onto its partner.
    pub pairing: Word,
    pub pairing_element: GroupElement,
    pub partner: usize,
}

impl Side {
    /// `sinh` of the signed distance from the side; positive means outside.
    pub fn excess(&self, x: &[f64; 3]) -> f64 {
        minkowski(x, &self.normal)
    }

    pub fn geodesic(&self) -> Geodesic {
        Geodesic::from_normal(&self.normal)
    }
}

/// A Dirichlet fundamental polygon. Side `i` runs from vertex `i` to vertex
/// `i + 1` (cyclically).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FundamentalPolygon {
    center: PointH,
    sides: Vec<Side>,
    vertices: Vec<Vertex>,
    area: f64,
    word_bound: usize,
}

impl FundamentalPolygon {
    pub fn center(&self) -> PointH {
        self.center
    }

    pub fn sides(&self) -> &[Side] {
        &self.sides
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn word_bound(&self) -> usize {
        self.word_bound
    }

    pub fn ideal_vertices(&self) -> Vec<BoundaryPoint> {
        self.vertices
            .iter()
            .filter_map(|v| match v {
                Vertex::Ideal(p) => Some(*p),
                Vertex::Finite(_) => None,
            })
            .collect()
    }

    /// Largest side excess at `z`; non-positive means `z` is in the closed polygon.
    pub fn max_excess(&self, z: &PointH) -> f64 {
        let x = z.hyperboloid();
        self.sides
            .iter()
            .map(|s| s.excess(&x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn contains(&self, z: &PointH) -> bool {
        self.max_excess(z) <= GEOM_EPS
    }
}

/// Raw output of the Dirichlet clipping, before any area certification.
#[derive(Clone, Debug)]
pub struct DirichletCell {
    /// Klein-model vertices (center at the origin) with the candidate index
    /// of the edge leaving each vertex; `None` marks an unbounded edge.
    pub klein: Vec<([f64; 2], Option<usize>)>,
    pub candidates: Vec<Candidate>,
}

#[derive(Clone, Debug)]
pub struct Candidate {
    pub word: Word,
    pub element: GroupElement,
    normal: [f64; 3],
    line: [f64; 3],
}

impl DirichletCell {
    /// Edges carried by a bisector and meeting the open disk.
    pub fn bisector_sides(&self) -> Vec<usize> {
        let n = self.klein.len();
        (0..n)
            .filter_map(|i| {
                let (p, tag) = self.klein[i];
                let q = self.klein[(i + 1) % n].0;
                let t = tag?;
                // closest point of the segment to the origin
                let d = [q[0] - p[0], q[1] - p[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                let s = if len2 > 0.0 {
                    (-(p[0] * d[0] + p[1] * d[1]) / len2).clamp(0.0, 1.0)
                } else {
                    0.0
                };
                let m = [p[0] + s * d[0], p[1] + s * d[1]];
                (m[0].hypot(m[1]) < 1.0).then_some(t)
            })
            .collect()
    }

    /// True when the cell reaches the boundary circle only at isolated points.
    pub fn is_finite_area(&self) -> bool {
        self.klein
            .iter()
            .all(|(p, tag)| tag.is_some() && p[0].hypot(p[1]) <= 1.0 + 1e-9)
    }
}

fn normalize_spacelike(n: [f64; 3]) -> [f64; 3] {
    let s = (-minkowski(&n, &n)).sqrt();
    [n[0] / s, n[1] / s, n[2] / s]
}

/// Enumerates orbit points up to `bound` and clips the Klein disk.
pub fn dirichlet_cell(
    pres: &LatticePresentation,
    center: PointH,
    bound: usize,
) -> Result<DirichletCell, GeometryError> {
    let frame = center.lift();
    let frame_inv = frame.inverse();
    let xc = center.hyperboloid();

    let mut candidates: Vec<Candidate> = Vec::new();
    let mut seen: HashMap<(i64, i64), usize> = HashMap::new();
    let mut layer: Vec<(Word, GroupElement)> = vec![(Word::empty(), GroupElement::IDENTITY)];
    for _ in 0..bound {
        let mut next = Vec::with_capacity(layer.len() * 2 * pres.rank().max(1));
        for (w, g) in &layer {
            for gen in 0..pres.rank() {
                for inverse in [false, true] {
                    let l = Letter { gen, inverse };
                    if w.letters().last() == Some(&l.inv()) {
                        continue;
                    }
                    let mut wl = w.clone();
                    wl.0.push(l);
                    let h = *g * pres.letter_element(l);
                    next.push((wl, h));
                }
            }
        }
        for (w, g) in &next {
            let orbit = g.mobius(center)?;
            let q = orbit.hyperboloid();
            let cosh_d = minkowski(&xc, &q);
            if cosh_d - 1.0 < 1e-12 {
                if g.is_identity(1e-9) {
                    continue;
                }
                return Err(GeometryError::EllipticCenter(pres.format_word(w)));
            }
            let local = frame_inv.mobius(orbit)?.hyperboloid();
            let key_scale = 1e9;
            let key = (
                (local[1] / local[0] * key_scale).round() as i64,
                (local[2] / local[0] * key_scale).round() as i64,
            );
            if seen.contains_key(&key) {
                continue;
            }
            seen.insert(key, candidates.len());
            let normal = normalize_spacelike([xc[0] - q[0], xc[1] - q[1], xc[2] - q[2]]);
            // (1 - Q0) + Q1 k1 + Q2 k2 <= 0, normalized
            let s = local[1].hypot(local[2]);
            let line = [local[1] / s, local[2] / s, (local[0] - 1.0) / s];
            candidates.push(Candidate {
                word: w.clone(),
                element: *g,
                normal,
                line,
            });
        }
        layer = next;
    }

    // clip, nearest orbit points first
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| candidates[i].line[2].total_cmp(&candidates[j].line[2]));
    let mut poly: Vec<([f64; 2], Option<usize>)> = vec![
        ([-2.0, -2.0], None),
        ([2.0, -2.0], None),
        ([2.0, 2.0], None),
        ([-2.0, 2.0], None),
    ];
    for &ci in &order {
        let [a, b, c] = candidates[ci].line;
        poly = clip(&poly, a, b, c, ci);
        if poly.is_empty() {
            break;
        }
    }
    Ok(DirichletCell {
        klein: poly,
        candidates,
    })
}

/// Sutherland–Hodgman step for the half-plane `a x + b y <= c`.
fn clip(
    poly: &[([f64; 2], Option<usize>)],
    a: f64,
    b: f64,
    c: f64,
    tag: usize,
) -> Vec<([f64; 2], Option<usize>)> {
    const TOL: f64 = 1e-13;
    let side = |p: &[f64; 2]| a * p[0] + b * p[1] - c;
    if poly.iter().all(|(p, _)| side(p) <= TOL) {
        return poly.to_vec();
    }
    let n = poly.len();
    let mut out = Vec::with_capacity(n + 1);
    for i in 0..n {
        let (p, t) = poly[i];
        let q = poly[(i + 1) % n].0;
        let (sp, sq) = (side(&p), side(&q));
        let p_in = sp <= TOL;
        let q_in = sq <= TOL;
        let cross = |p: [f64; 2], q: [f64; 2]| {
            let s = sp / (sp - sq);
            [p[0] + s * (q[0] - p[0]), p[1] + s * (q[1] - p[1])]
        };
        match (p_in, q_in) {
            (true, true) => out.push((p, t)),
            (true, false) => {
                out.push((p, t));
                if sp < -TOL {
                    out.push((cross(p, q), Some(tag)));
                } else if let Some(last) = out.last_mut() {
                    last.1 = Some(tag);
                }
            }
            (false, true) => {
                if sq < -TOL {
                    out.push((cross(p, q), t));
                }
            }
            (false, false) => {}
        }
    }
    out
}

fn klein_to_boundary(k: [f64; 2], frame: &GroupElement) -> BoundaryPoint {
    let r = k[0].hypot(k[1]);
    let (k1, k2) = (k[0] / r, k[1] / r);
    let local = if 1.0 - k2 < 1e-12 {
        BoundaryPoint::Infinity
    } else {
        BoundaryPoint::Real(k1 / (1.0 - k2))
    };
    match frame.mobius_boundary(local) {
        BoundaryPoint::Real(x) if x.abs() > 1e12 => BoundaryPoint::Infinity,
        p => p,
    }
}

fn klein_to_point(k: [f64; 2], frame: &GroupElement) -> Result<PointH, HypError> {
    let s = (1.0 - k[0] * k[0] - k[1] * k[1]).sqrt();
    let x = [1.0 / s, k[0] / s, k[1] / s];
    frame.mobius(crate::hyp2::from_hyperboloid(&x)?)
}

/// Dirichlet domain about `center`, certified by the Gauss–Bonnet area.
pub fn dirichlet_domain(
    pres: &LatticePresentation,
    center: PointH,
    word_length_bound: usize,
) -> Result<FundamentalPolygon, GeometryError> {
    let expected = pres.gauss_bonnet_area();
    let cell = dirichlet_cell(pres, center, word_length_bound)?;
    if cell.klein.len() < 3 || !cell.is_finite_area() {
        return Err(GeometryError::AreaMismatch {
            expected,
            found: f64::INFINITY,
        });
    }
    let frame = center.lift();

    // drop degenerate edges
    let mut verts = cell.klein.clone();
    loop {
        let n = verts.len();
        let mut removed = false;
        for i in 0..n {
            let p = verts[i].0;
            let q = verts[(i + 1) % n].0;
            if (p[0] - q[0]).hypot(p[1] - q[1]) < 1e-9 {
                verts.remove(i);
                removed = true;
                break;
            }
        }
        if !removed || verts.len() < 3 {
            break;
        }
    }

    let mut vertices = Vec::with_capacity(verts.len());
    for (k, _) in &verts {
        if k[0].hypot(k[1]) >= 1.0 - 1e-9 {
            vertices.push(Vertex::Ideal(klein_to_boundary(*k, &frame)));
        } else {
            vertices.push(Vertex::Finite(klein_to_point(*k, &frame)?));
        }
    }

    let mut sides: Vec<Side> = verts
        .iter()
        .map(|(_, tag)| {
            let c = &cell.candidates[tag.expect("finite cell has tagged edges")];
            Side {
                normal: c.normal,
                source: c.word.clone(),
                pairing: c.word.inverse(),
                pairing_element: c.element.inverse(),
                partner: usize::MAX,
            }
        })
        .collect();
    let elements: Vec<GroupElement> = verts
        .iter()
        .map(|(_, tag)| cell.candidates[tag.unwrap()].element)
        .collect();
    for i in 0..sides.len() {
        let target = sides[i].pairing_element;
        let tol = 1e-8 * target.max_norm().max(1.0);
        let partner = (0..sides.len())
            .find(|&j| elements[j].psl_distance(&target) <= tol)
            .ok_or_else(|| GeometryError::UnpairedSide(pres.format_word(&sides[i].source)))?;
        sides[i].partner = partner;
    }

    // area = (n - 2)π - Σ interior angles
    let n = sides.len();
    let mut angle_sum = 0.0;
    for i in 0..n {
        if let Vertex::Finite(_) = vertices[i] {
            let prev = &sides[(i + n - 1) % n];
            let cos = minkowski(&prev.normal, &sides[i].normal).clamp(-1.0, 1.0);
            angle_sum += cos.acos();
        }
    }
    let area = (n as f64 - 2.0) * PI - angle_sum;
    if (area - expected).abs() > 1e-6 {
        return Err(GeometryError::AreaMismatch {
            expected,
            found: area,
        });
    }
    Ok(FundamentalPolygon {
        center,
        sides,
        vertices,
        area,
        word_bound: word_length_bound,
    })
}

/// A cusp of the base surface.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspData {
    pub fixed_point: BoundaryPoint,
    /// `g_j`, carrying `∞` to the fixed point.
    pub normalizer: GroupElement,
    /// Loop word, oriented so that `g_j^{-1} P g_j = n(width)` with `width > 0`.
    pub primitive_parabolic: Word,
    pub parabolic: GroupElement,
    pub width: f64,
    /// Polygon vertices in this cusp's cycle.
    pub vertices: Vec<usize>,
}

/// Normalized coordinates near one ideal vertex of the polygon.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VertexChart {
    pub vertex: usize,
    pub cusp: usize,
    /// Maps a neighborhood of the vertex into the standard cusp at `∞`.
    pub to_cusp: GroupElement,
    /// Primitive parabolic fixing the vertex; `to_cusp` conjugates it to `n(width)`.
    pub parabolic: GroupElement,
    pub parabolic_word: Word,
    /// Midpoint, in chart coordinates, of the polygon's strip at this vertex.
    pub strip_center: f64,
    /// The two sides through the vertex as `(side, x)`: vertical lines in
    /// chart coordinates, lower `x` first.
    pub walls: [(usize, f64); 2],
}

/// One move of the reduction: a side pairing, or a power of a vertex
/// parabolic applied in a single jump deep inside a cusp.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Move {
    Side(usize),
    Cusp { chart: usize, power: i64 },
}

fn normalizer_for(p: BoundaryPoint) -> GroupElement {
    match p {
        BoundaryPoint::Infinity => GroupElement::IDENTITY,
        BoundaryPoint::Real(v) => GroupElement::raw(v, -1.0, 1.0, 0.0),
    }
}

fn cusp_order(p: &BoundaryPoint) -> (u8, f64) {
    match *p {
        BoundaryPoint::Infinity => (0, 0.0),
        BoundaryPoint::Real(x) => (1, x),
    }
}

type ChartParts = (usize, GroupElement, GroupElement, Word, [(usize, f64); 2]);

/// Chart positions of the two sides meeting at ideal vertex `v`.
fn chart_walls(polygon: &FundamentalPolygon, v: usize, to_cusp: &GroupElement) -> [(usize, f64); 2] {
    let n = polygon.sides.len();
    let mut walls = [v, (v + n - 1) % n].map(|s| {
        // the far endpoint; the vertex itself lands at (or numerically
        // near) infinity
        let x = polygon.sides[s]
            .geodesic()
            .endpoints()
            .iter()
            .filter_map(|p| match to_cusp.mobius_boundary(*p) {
                BoundaryPoint::Real(x) if x.abs() < 1e6 => Some(x),
                _ => None,
            })
            .next()
            .unwrap_or(0.0);
        (s, x)
    });
    if walls[0].1 > walls[1].1 {
        walls.swap(0, 1);
    }
    walls
}

/// Ideal vertex cycles of a polygon, one per cusp.
pub fn cusp_cycles(
    _pres: &LatticePresentation,
    polygon: &FundamentalPolygon,
) -> Result<(Vec<CuspData>, Vec<VertexChart>), GeometryError> {
    let n = polygon.sides.len();
    let verts = &polygon.vertices;
    let mut visited = vec![false; n];
    let mut raw: Vec<(Vec<(usize, GroupElement, Word)>, GroupElement, Word)> = Vec::new();
    for start in 0..n {
        if visited[start] || !verts[start].is_ideal() {
            continue;
        }
        let mut members = Vec::new();
        let mut v = start;
        let mut s = start;
        let mut acc = GroupElement::IDENTITY;
        let mut acc_word = Word::empty();
        for _ in 0..=2 * n {
            visited[v] = true;
            members.push((v, acc, acc_word.clone()));
            let side = &polygon.sides[s];
            let Vertex::Ideal(p) = verts[v] else {
                return Err(GeometryError::CuspCycle("finite vertex in ideal cycle".into()));
            };
            let image = side.pairing_element.mobius_boundary(p);
            let partner = side.partner;
            let (next_v, next_s) = [(partner, (partner + n - 1) % n), ((partner + 1) % n, (partner + 1) % n)]
                .into_iter()
                .find(|(w, _)| match verts[*w] {
                    Vertex::Ideal(q) => q.separation(&image) < 1e-7,
                    Vertex::Finite(_) => false,
                })
                .ok_or_else(|| {
                    GeometryError::CuspCycle(format!("image of vertex {v} is not a vertex of side {partner}"))
                })?;
            acc = side.pairing_element * acc;
            acc_word = side.pairing.concat(&acc_word);
            v = next_v;
            s = next_s;
            if v == start && s == start {
                break;
            }
        }
        if !(v == start && s == start) {
            return Err(GeometryError::CuspCycle(format!("cycle at vertex {start} did not close")));
        }
        raw.push((members, acc, acc_word));
    }

    // canonical representative: ∞ if present, else the largest real
    let mut cusps: Vec<(CuspData, Vec<ChartParts>)> = Vec::new();
    for (members, parabolic, word) in raw {
        let rep = members
            .iter()
            .max_by(|a, b| {
                let pa = match verts[a.0] {
                    Vertex::Ideal(p) => p,
                    _ => unreachable!(),
                };
                let pb = match verts[b.0] {
                    Vertex::Ideal(p) => p,
                    _ => unreachable!(),
                };
                let ka = match pa {
                    BoundaryPoint::Infinity => f64::INFINITY,
                    BoundaryPoint::Real(x) => x,
                };
                let kb = match pb {
                    BoundaryPoint::Infinity => f64::INFINITY,
                    BoundaryPoint::Real(x) => x,
                };
                ka.total_cmp(&kb)
            })
            .unwrap()
            .clone();
        let (rep_vertex, rep_acc, rep_word) = rep;
        let Vertex::Ideal(fixed_point) = verts[rep_vertex] else { unreachable!() };
        // conjugate the start-vertex parabolic to the representative
        let mut p = rep_acc * parabolic * rep_acc.inverse();
        let mut pw = rep_word.concat(&word).concat(&rep_word.inverse());
        let g = normalizer_for(fixed_point);
        let q = g.inverse() * p * g;
        let [qa, qb, qc, _] = q.entries();
        if qc.abs() > 1e-6 * q.max_norm() || p.classify().kind != Kind::Parabolic {
            return Err(GeometryError::CuspCycle(format!(
                "cycle product at {fixed_point} is not parabolic (trace {})",
                p.trace()
            )));
        }
        let mut width = qb / qa;
        if width < 0.0 {
            p = p.inverse();
            pw = pw.inverse();
            width = -width;
        }
        let charts: Vec<ChartParts> = members
            .iter()
            .map(|(v, acc, acc_word)| {
                let carry = rep_acc * acc.inverse();
                let carry_word = rep_word.concat(&acc_word.inverse());
                let to_cusp = g.inverse() * carry;
                let q = carry.inverse() * p * carry;
                let qw = carry_word.inverse().concat(&pw).concat(&carry_word).reduced();
                (*v, to_cusp, q, qw, chart_walls(polygon, *v, &to_cusp))
            })
            .collect();
        cusps.push((
            CuspData {
                fixed_point,
                normalizer: g,
                primitive_parabolic: pw.reduced(),
                parabolic: p,
                width,
                vertices: members.iter().map(|m| m.0).collect(),
            },
            charts,
        ));
    }
    cusps.sort_by(|a, b| {
        let (ta, xa) = cusp_order(&a.0.fixed_point);
        let (tb, xb) = cusp_order(&b.0.fixed_point);
        ta.cmp(&tb).then(xa.total_cmp(&xb))
    });
    let mut charts = Vec::new();
    let mut out = Vec::new();
    for (j, (c, ch)) in cusps.into_iter().enumerate() {
        for (vertex, to_cusp, parabolic, parabolic_word, walls) in ch {
            charts.push(VertexChart {
                vertex,
                cusp: j,
                to_cusp,
                parabolic,
                parabolic_word,
                strip_center: 0.5 * (walls[0].1 + walls[1].1),
                walls,
            });
        }
        out.push(c);
    }
    charts.sort_by_key(|c| c.vertex);
    Ok((out, charts))
}

/// Output of [`Surface::reduce`].
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub rep: UnitTangent,
    /// `evaluate(deck_word) * raw = rep`.
    pub deck_word: Word,
}

/// Cusp height of a point of the polygon.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CuspHeight {
    /// `ln Im` in normalized coordinates, maximized over ideal vertices.
    pub log_height: f64,
    pub cusp: Option<usize>,
}

/// Horoball sector of one cusp at log-height `h`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspSector {
    pub cusp: usize,
    pub width: f64,
    pub h: f64,
    /// Hyperbolic area `width · e^{-h}`.
    pub area: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CuspNeighborhoods {
    pub h: f64,
    pub sectors: Vec<CuspSector>,
    pub core_area: f64,
}

/// The base surface: presentation, polygon and cusp data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Surface {
    presentation: LatticePresentation,
    polygon: FundamentalPolygon,
    cusps: Vec<CuspData>,
    charts: Vec<VertexChart>,
    /// Chart height above which reduction jumps by parabolic powers.
    jump_height: f64,
}

impl Surface {
    pub fn new(
        presentation: LatticePresentation,
        center: PointH,
        word_length_bound: usize,
    ) -> Result<Self, GeometryError> {
        let polygon = dirichlet_domain(&presentation, center, word_length_bound)?;
        Self::from_polygon(presentation, polygon)
    }

    /// Tries word bounds `1..=max_bound` until the Gauss–Bonnet certificate passes.
    pub fn with_smallest_bound(
        presentation: LatticePresentation,
        center: PointH,
        max_bound: usize,
    ) -> Result<Self, GeometryError> {
        let mut last = None;
        for bound in 1..=max_bound {
            match dirichlet_domain(&presentation, center, bound) {
                Ok(p) => return Self::from_polygon(presentation, p),
                Err(e @ GeometryError::AreaMismatch { .. }) | Err(e @ GeometryError::UnpairedSide(_)) => {
                    last = Some(e)
                }
                Err(e) => return Err(e),
            }
        }
        Err(last.unwrap_or(GeometryError::AreaMismatch {
            expected: presentation.gauss_bonnet_area(),
            found: f64::INFINITY,
        }))
    }

    pub fn from_polygon(
        presentation: LatticePresentation,
        polygon: FundamentalPolygon,
    ) -> Result<Self, GeometryError> {
        let (cusps, charts) = cusp_cycles(&presentation, &polygon)?;
        let mut s = Self {
            presentation,
            polygon,
            cusps,
            charts,
            jump_height: f64::INFINITY,
        };
        if !s.charts.is_empty() {
            s.jump_height = s.min_embedded_height().max(0.0).exp();
        }
        Ok(s)
    }

    pub fn presentation(&self) -> &LatticePresentation {
        &self.presentation
    }

    pub fn polygon(&self) -> &FundamentalPolygon {
        &self.polygon
    }

    pub fn cusps(&self) -> &[CuspData] {
        &self.cusps
    }

    pub fn charts(&self) -> &[VertexChart] {
        &self.charts
    }

    /// Greedy Dirichlet descent: the first violated side in stored order
    /// acts. Calls `visit` for each move applied.
    ///
    /// Far from the center and high in a vertex chart, the side tests are
    /// done in chart coordinates instead, where the two sides through the
    /// vertex are vertical lines: the hyperboloid excesses there are of
    /// order width / height and drown in rounding. A point many widths from
    /// the strip is first moved by the matching power of the vertex
    /// parabolic in one jump.
    pub fn reduce_visit(
        &self,
        x: GroupElement,
        mut visit: impl FnMut(Move),
    ) -> Result<GroupElement, GeometryError> {
        let mut g = x;
        let sides = &self.polygon.sides;
        let mut iter = 0usize;
        'outer: loop {
            iter += 1;
            if iter > MAX_REDUCE_ITER {
                return Err(GeometryError::NonTermination(MAX_REDUCE_ITER));
            }
            let z = g.base_point();
            let xh = z.hyperboloid();
            if xh[0] > CHART_MODE_COSH {
                if let Some((k, w)) = self.deep_chart(&z) {
                    let ch = &self.charts[k];
                    let width = self.cusps[ch.cusp].width;
                    let shift = ((w.x() - ch.strip_center) / width).round();
                    if shift.abs() >= 2.0 {
                        // same element as parabolic^-shift, composed in the
                        // chart frame to avoid cancellation
                        let h = GroupElement::unipotent(-shift * width) * (ch.to_cusp * g);
                        g = ch.to_cusp.inverse() * h;
                        visit(Move::Cusp {
                            chart: k,
                            power: -(shift as i64),
                        });
                        continue 'outer;
                    }
                    let [(lo_side, lo), (hi_side, hi)] = ch.walls;
                    let side = if w.x() < lo {
                        lo_side
                    } else if w.x() > hi {
                        hi_side
                    } else {
                        return Ok(g);
                    };
                    g = sides[side].pairing_element * g;
                    visit(Move::Side(side));
                    continue 'outer;
                }
            }
            for (i, s) in sides.iter().enumerate() {
                if s.excess(&xh) > GEOM_EPS {
                    g = s.pairing_element * g;
                    visit(Move::Side(i));
                    continue 'outer;
                }
            }
            return Ok(g);
        }
    }

    /// Membership test matching the stopping rule of [`Surface::reduce_visit`].
    pub fn in_domain(&self, z: &PointH) -> bool {
        let xh = z.hyperboloid();
        if xh[0] > CHART_MODE_COSH {
            if let Some((k, w)) = self.deep_chart(z) {
                let [(_, lo), (_, hi)] = self.charts[k].walls;
                return lo <= w.x() && w.x() <= hi;
            }
        }
        self.polygon.sides.iter().all(|s| s.excess(&xh) <= GEOM_EPS)
    }

    /// The chart in which `z` is highest, if above the jump height.
    fn deep_chart(&self, z: &PointH) -> Option<(usize, PointH)> {
        let mut best: Option<(usize, PointH)> = None;
        for (k, ch) in self.charts.iter().enumerate() {
            let Ok(w) = ch.to_cusp.mobius(*z) else { continue };
            if w.y() > self.jump_height && best.is_none_or(|(_, b)| w.y() > b.y()) {
                best = Some((k, w));
            }
        }
        best
    }

    /// The deck word of a single move.
    pub fn move_word(&self, m: Move) -> Word {
        match m {
            Move::Side(i) => self.polygon.sides[i].pairing.clone(),
            Move::Cusp { chart, power } => {
                let w = &self.charts[chart].parabolic_word;
                let unit = if power < 0 { w.inverse() } else { w.clone() };
                let mut out = Word(Vec::with_capacity(unit.len() * power.unsigned_abs() as usize));
                for _ in 0..power.unsigned_abs() {
                    out.append(&unit);
                }
                out
            }
        }
    }

    pub fn reduce(&self, x: &UnitTangent) -> Result<ReducedPoint, GeometryError> {
        let mut applied = Vec::new();
        let rep = self.reduce_visit(*x.rep(), |m| applied.push(m))?;
        let mut word = Word::empty();
        for m in applied.into_iter().rev() {
            word.append(&self.move_word(m));
        }
        Ok(ReducedPoint {
            rep: UnitTangent(rep),
            deck_word: word,
        })
    }

    pub fn cusp_height(&self, z: &PointH) -> CuspHeight {
        let mut best = CuspHeight {
            log_height: f64::NEG_INFINITY,
            cusp: None,
        };
        for ch in &self.charts {
            if let Ok(w) = ch.to_cusp.mobius(*z) {
                let h = w.y().ln();
                if h > best.log_height {
                    best = CuspHeight {
                        log_height: h,
                        cusp: Some(ch.cusp),
                    };
                }
            }
        }
        best
    }

    /// Checks that horoballs at log-height `h` are embedded and bounded by
    /// the sides through their vertex.
    pub fn horoballs_embedded(&self, h: f64) -> bool {
        let big_h = h.exp();
        for (i, a) in self.charts.iter().enumerate() {
            for b in &self.charts[i + 1..] {
                let p = a.to_cusp * b.to_cusp.inverse();
                let c = p.entries()[2];
                if big_h * big_h * c * c < 1.0 - 1e-12 {
                    return false;
                }
            }
            let n = self.polygon.sides.len();
            for (s, side) in self.polygon.sides.iter().enumerate() {
                let adjacent = s == a.vertex || (s + 1) % n == a.vertex;
                if adjacent {
                    continue;
                }
                if mapped_geodesic_height(&a.to_cusp, side) > big_h {
                    return false;
                }
            }
        }
        true
    }

    pub fn cusp_neighborhoods(&self, h: f64) -> Result<CuspNeighborhoods, GeometryError> {
        if !self.horoballs_embedded(h) {
            return Err(GeometryError::OverlappingHoroballs(h));
        }
        let sectors: Vec<CuspSector> = self
            .cusps
            .iter()
            .enumerate()
            .map(|(j, c)| CuspSector {
                cusp: j,
                width: c.width,
                h,
                area: c.width * (-h).exp(),
            })
            .collect();
        let core_area = self.polygon.area - sectors.iter().map(|s| s.area).sum::<f64>();
        Ok(CuspNeighborhoods {
            h,
            sectors,
            core_area,
        })
    }

    /// Smallest `h` on a quarter grid for which horoballs are embedded.
    pub fn min_embedded_height(&self) -> f64 {
        let mut h = -2.0;
        while !self.horoballs_embedded(h) && h < 20.0 {
            h += 0.25;
        }
        h
    }

    pub fn haar_sampler(&self) -> Result<HaarSampler<'_>, GeometryError> {
        HaarSampler::new(self, self.min_embedded_height().max(0.0))
    }
}

fn mapped_geodesic_height(g: &GroupElement, side: &Side) -> f64 {
    let [p, q] = side.geodesic().endpoints();
    let (p, q) = (g.mobius_boundary(p), g.mobius_boundary(q));
    match (p, q) {
        (BoundaryPoint::Real(a), BoundaryPoint::Real(b)) => 0.5 * (a - b).abs(),
        _ => f64::INFINITY,
    }
}

/// Haar sampler on the unit tangent bundle of the base surface.
///
/// Cusp sectors above log-height `h_cut` are sampled exactly in normalized
/// coordinates (`u` uniform over the width, log-height exponential with
/// rate 1); the compact core is sampled by rejection from `dx dy / y^2` on
/// a bounding box.
pub struct HaarSampler<'a> {
    surface: &'a Surface,
    h_cut: f64,
    cusp_mass: Vec<f64>,
    bbox: [f64; 4],
}

impl<'a> HaarSampler<'a> {
    pub fn new(surface: &'a Surface, h_cut: f64) -> Result<Self, GeometryError> {
        let nb = surface.cusp_neighborhoods(h_cut)?;
        let total = surface.polygon.area;
        let cusp_mass = nb.sectors.iter().map(|s| s.area / total).collect();
        let bbox = core_bounding_box(surface, h_cut);
        Ok(Self {
            surface,
            h_cut,
            cusp_mass,
            bbox,
        })
    }

    pub fn h_cut(&self) -> f64 {
        self.h_cut
    }

    /// Base point with normalized hyperbolic area on the polygon.
    pub fn sample_point<R: Rng + ?Sized>(&self, rng: &mut R) -> PointH {
        let mut u: f64 = rng.random();
        for (j, m) in self.cusp_mass.iter().enumerate() {
            if u < *m {
                let c = &self.surface.cusps[j];
                let x = rng.random::<f64>() * c.width;
                let e: f64 = -(1.0 - rng.random::<f64>()).ln();
                let y = (self.h_cut + e).exp();
                let raw = c.normalizer.mobius(PointH::new(x, y).unwrap()).unwrap();
                // bring into the polygon
                let g = self
                    .surface
                    .reduce_visit(raw.lift(), |_| {})
                    .unwrap_or_else(|_| raw.lift());
                return g.base_point();
            }
            u -= m;
        }
        let [x0, x1, y0, y1] = self.bbox;
        let (iy0, iy1) = (1.0 / y0, 1.0 / y1);
        loop {
            let x = x0 + (x1 - x0) * rng.random::<f64>();
            let y = 1.0 / (iy0 - (iy0 - iy1) * rng.random::<f64>());
            let z = PointH::new(x, y).unwrap();
            if self.surface.polygon.max_excess(&z) <= 0.0
                && self.surface.cusp_height(&z).log_height < self.h_cut
            {
                return z;
            }
        }
    }

    /// Haar-distributed unit tangent vector with base point in the polygon.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> UnitTangent {
        let z = self.sample_point(rng);
        let theta = TAU * rng.random::<f64>();
        UnitTangent::at(z, theta)
    }
}

fn core_bounding_box(surface: &Surface, h_cut: f64) -> [f64; 4] {
    let mut pts: Vec<PointH> = Vec::new();
    let keep = |z: &PointH| {
        surface.polygon.max_excess(z) <= 1e-7 && surface.cusp_height(z).log_height <= h_cut + 1e-9
    };
    for v in &surface.polygon.vertices {
        if let Vertex::Finite(z) = v {
            pts.push(*z);
        }
    }
    const SAMPLES: usize = 20_000;
    for side in &surface.polygon.sides {
        match side.geodesic() {
            Geodesic::Vertical { x } => {
                for k in 0..SAMPLES {
                    let y = (-14.0 + 28.0 * k as f64 / SAMPLES as f64).exp();
                    let z = PointH::new(x, y).unwrap();
                    if keep(&z) {
                        pts.push(z);
                    }
                }
            }
            Geodesic::Circle { center, radius } => {
                for k in 1..SAMPLES {
                    let phi = PI * k as f64 / SAMPLES as f64;
                    let z = PointH::new(center + radius * phi.cos(), radius * phi.sin()).unwrap();
                    if keep(&z) {
                        pts.push(z);
                    }
                }
            }
        }
    }
    let y_cut = h_cut.exp();
    for ch in &surface.charts {
        let back = ch.to_cusp.inverse();
        let width = surface.cusps[ch.cusp].width;
        // the vertex piece lies within a few widths of the origin in chart coordinates
        let n = surface.polygon.sides.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for s in [ch.vertex, (ch.vertex + n - 1) % n] {
            for p in surface.polygon.sides[s].geodesic().endpoints() {
                // the cusp vertex itself may come back as a huge finite value
                if let BoundaryPoint::Real(x) = ch.to_cusp.mobius_boundary(p) {
                    if x.abs() > 1e6 {
                        continue;
                    }
                    lo = lo.min(x);
                    hi = hi.max(x);
                }
            }
        }
        if !lo.is_finite() || !hi.is_finite() {
            lo = -2.0 * width;
            hi = 2.0 * width;
        }
        for k in 0..=SAMPLES / 4 {
            let u = lo + (hi - lo) * k as f64 / (SAMPLES / 4) as f64;
            if let Ok(z) = back.mobius(PointH::new(u, y_cut).unwrap()) {
                if keep(&z) {
                    pts.push(z);
                }
            }
        }
    }
    let mut bb = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for z in &pts {
        bb[0] = bb[0].min(z.x());
        bb[1] = bb[1].max(z.x());
        bb[2] = bb[2].min(z.y());
        bb[3] = bb[3].max(z.y());
    }
    let dx = 0.05 * (bb[1] - bb[0]);
    [bb[0] - dx, bb[1] + dx, 0.9 * bb[2], 1.1 * bb[3]]
}

/// Built-in lattices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Preset {
    /// Principal congruence subgroup of level 2: thrice-punctured sphere.
    Gamma2,
    /// Once-punctured torus generated by `R_{-π/2} a_{l1} R_{π/2}` and `a_{l2}`.
    PuncturedSquareTorus { l1: f64, l2: f64 },
}

impl Preset {
    pub fn punctured_square_torus() -> Self {
        let l = 2.0 * 1f64.asinh();
        Preset::PuncturedSquareTorus { l1: l, l2: l }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gamma2" => Some(Preset::Gamma2),
            "punctured_square_torus" => Some(Self::punctured_square_torus()),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Gamma2 => "gamma2",
            Preset::PuncturedSquareTorus { .. } => "punctured_square_torus",
        }
    }

    pub fn presentation(&self) -> Result<LatticePresentation, GeometryError> {
        match *self {
            Preset::Gamma2 => LatticePresentation::new(
                vec![
                    ("A".into(), GroupElement::new(1.0, 2.0, 0.0, 1.0)?),
                    ("B".into(), GroupElement::new(1.0, 0.0, 2.0, 1.0)?),
                ],
                vec![],
            ),
            Preset::PuncturedSquareTorus { l1, l2 } => {
                if !(l1 > 0.0 && l2 > 0.0) {
                    return Err(GeometryError::InvalidParameter("l1, l2 must be positive".into()));
                }
                let defect = (0.5 * l1).sinh() * (0.5 * l2).sinh() - 1.0;
                if defect.abs() > 1e-9 {
                    return Err(GeometryError::InvalidParameter(format!(
                        "sinh(l1/2) sinh(l2/2) = {} (must be 1)",
                        defect + 1.0
                    )));
                }
                let (g1, g2) = torus_generators(l1, l2);
                LatticePresentation::new(vec![("g1".into(), g1), ("g2".into(), g2)], vec![])
            }
        }
    }

    pub fn center(&self) -> PointH {
        PointH::I
    }

    pub fn build(&self) -> Result<Surface, GeometryError> {
        let pres = self.presentation()?;
        let surface = Surface::with_smallest_bound(pres, self.center(), 4)?;
        if let Preset::PuncturedSquareTorus { .. } = self {
            let [g1, g2] = [surface.presentation.elements[0], surface.presentation.elements[1]];
            let comm = g1 * g2 * g1.inverse() * g2.inverse();
            if (comm.trace().abs() - 2.0).abs() > 1e-9 {
                return Err(GeometryError::InvalidParameter("commutator is not parabolic".into()));
            }
        }
        Ok(surface)
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// `g1 = R_{-π/2} a_{l1} R_{π/2}` and `g2 = a_{l2}`.
pub fn torus_generators(l1: f64, l2: f64) -> (GroupElement, GroupElement) {
    let g1 = GroupElement::rotation(-PI / 2.0)
        * GroupElement::translation(l1)
        * GroupElement::rotation(PI / 2.0);
    (g1, GroupElement::translation(l2))
}

pub fn builtin_lattice(preset: Preset) -> Result<Surface, GeometryError> {
    preset.build()
}
