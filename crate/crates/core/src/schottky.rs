//! Exact constant-curvature oracle: free-homotopy classes as words in a free
//! group of Mobius generators, with translation lengths straight from traces.

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, MetricModel, ModelKind, PhasePoint};
use crate::orbits::Loop;
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::fmt;

/// A hyperbolic element of PSL(2, R) given by a unit-determinant matrix.
/// Serialized as a row-major 2x2 array `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy)]
pub struct MobiusGenerator {
    pub matrix: Matrix2<f64>,
}

impl Serialize for MobiusGenerator {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let m = &self.matrix;
        [[m[(0, 0)], m[(0, 1)]], [m[(1, 0)], m[(1, 1)]]].serialize(s)
    }
}

impl<'de> Deserialize<'de> for MobiusGenerator {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = <[[f64; 2]; 2]>::deserialize(d)?;
        MobiusGenerator::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

impl MobiusGenerator {
    pub fn new(matrix: Matrix2<f64>) -> Result<Self> {
        if (matrix.determinant() - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "generator determinant {} differs from 1 beyond 1e-12",
                matrix.determinant()
            )));
        }
        if matrix.trace().abs() <= 2.0 {
            return Err(Error::NonHyperbolic {
                trace_abs: matrix.trace().abs(),
            });
        }
        Ok(MobiusGenerator { matrix })
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Result<Self> {
        MobiusGenerator::new(Matrix2::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1]))
    }

    /// Translation length 2 arccosh(|tr|/2) of the element's axis.
    pub fn translation_length(&self) -> f64 {
        2.0 * crate::numeric::acosh_clamped(self.matrix.trace().abs() / 2.0)
    }

    /// Generator with axis through the fixed points -1, 1 and translation
    /// length 2t, conjugated by the horizontal shift `shift`.
    pub fn axis_standard(t: f64, shift: f64) -> Self {
        let (ch, sh) = (t.cosh(), t.sinh());
        let a = Matrix2::new(ch, sh, sh, ch);
        let tr = Matrix2::new(1.0, shift, 0.0, 1.0);
        let tr_inv = Matrix2::new(1.0, -shift, 0.0, 1.0);
        MobiusGenerator {
            matrix: tr * a * tr_inv,
        }
    }
}

fn mat_inverse(m: &Matrix2<f64>) -> Matrix2<f64> {
    // Exact inverse for det = 1.
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

/// A freely reduced word over generators a_1, a_1^-1, ..., a_r, a_r^-1.
/// Letters are signed one-based generator indices; display uses lowercase for
/// generators and uppercase for inverses (a, A, b, B, ...).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Word {
    letters: Vec<i32>,
}

impl Word {
    pub fn new(letters: Vec<i32>) -> Self {
        let mut w = Word { letters };
        w.free_reduce();
        w
    }

    pub fn empty() -> Self {
        Word { letters: Vec::new() }
    }

    pub fn generator(index: usize) -> Self {
        Word {
            letters: vec![index as i32 + 1],
        }
    }

    pub fn letters(&self) -> &[i32] {
        &self.letters
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    fn free_reduce(&mut self) {
        let mut out: Vec<i32> = Vec::with_capacity(self.letters.len());
        for &l in &self.letters {
            if l == 0 {
                continue;
            }
            if out.last().is_some_and(|&p| p == -l) {
                out.pop();
            } else {
                out.push(l);
            }
        }
        self.letters = out;
    }

    pub fn inverse(&self) -> Word {
        Word {
            letters: self.letters.iter().rev().map(|l| -l).collect(),
        }
    }

    pub fn concat(&self, other: &Word) -> Word {
        let mut letters = self.letters.clone();
        letters.extend_from_slice(&other.letters);
        Word::new(letters)
    }

    pub fn power(&self, k: usize) -> Word {
        let mut letters = Vec::with_capacity(self.letters.len() * k);
        for _ in 0..k {
            letters.extend_from_slice(&self.letters);
        }
        Word::new(letters)
    }

    /// Remove cancelling prefix/suffix pairs until the word is cyclically
    /// reduced.
    pub fn cyclic_reduce(&self) -> Word {
        let mut l = self.letters.clone();
        while l.len() >= 2 && l[0] == -*l.last().unwrap() {
            l.pop();
            l.remove(0);
        }
        Word { letters: l }
    }

    fn rotation(&self, k: usize) -> Vec<i32> {
        let n = self.letters.len();
        (0..n).map(|i| self.letters[(i + k) % n]).collect()
    }

    /// Letter order used for canonical forms: a < A < b < B < ...
    fn rank(letter: i32) -> u32 {
        (2 * (letter.unsigned_abs() - 1) + u32::from(letter < 0)) as u32
    }

    fn lex_key(letters: &[i32]) -> Vec<u32> {
        letters.iter().map(|&l| Word::rank(l)).collect()
    }

    /// Lexicographically minimal cyclic rotation of the cyclically reduced
    /// word; with `unoriented`, also minimized over inversion.
    pub fn canonical(&self, unoriented: bool) -> Word {
        let red = self.cyclic_reduce();
        if red.is_empty() {
            return red;
        }
        let mut best: Option<Vec<i32>> = None;
        let mut consider = |cand: Vec<i32>| match &best {
            None => best = Some(cand),
            Some(b) => {
                if Word::lex_key(&cand) < Word::lex_key(b) {
                    best = Some(cand);
                }
            }
        };
        for k in 0..red.len() {
            consider(red.rotation(k));
        }
        if unoriented {
            let inv = red.inverse();
            for k in 0..inv.len() {
                consider(inv.rotation(k));
            }
        }
        Word {
            letters: best.unwrap(),
        }
    }

    /// A cyclically reduced word is primitive when it is not a proper power.
    pub fn is_primitive(&self) -> bool {
        let w = self.cyclic_reduce();
        let n = w.len();
        if n == 0 {
            return false;
        }
        'outer: for d in 1..n {
            if n % d != 0 {
                continue;
            }
            for i in d..n {
                if w.letters[i] != w.letters[i % d] {
                    continue 'outer;
                }
            }
            return false;
        }
        true
    }

    /// For rank-one words (all letters the same +/- index), the signed power.
    pub fn rank_one_power(&self) -> Option<i64> {
        let w = self.cyclic_reduce();
        if w.is_empty() {
            return Some(0);
        }
        let first = w.letters[0];
        if w.letters.iter().all(|&l| l == first) {
            Some(first.signum() as i64 * w.len() as i64)
        } else {
            None
        }
    }

    pub fn parse(s: &str) -> Result<Word> {
        let mut letters = Vec::with_capacity(s.len());
        for ch in s.chars() {
            let l = match ch {
                'a'..='z' => (ch as i32 - 'a' as i32) + 1,
                'A'..='Z' => -((ch as i32 - 'A' as i32) + 1),
                _ => {
                    return Err(Error::Data(format!("invalid word character '{ch}'")));
                }
            };
            letters.push(l);
        }
        Ok(Word { letters })
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.letters.is_empty() {
            return write!(f, "e");
        }
        for &l in &self.letters {
            let idx = (l.unsigned_abs() - 1) as u8;
            let c = if l > 0 { b'a' + idx } else { b'A' + idx } as char;
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

/// Product matrix of a word in the given generators.
pub fn word_matrix(w: &Word, generators: &[MobiusGenerator]) -> Result<Matrix2<f64>> {
    let mut m = Matrix2::identity();
    for &l in w.letters() {
        let idx = (l.unsigned_abs() as usize) - 1;
        let g = generators
            .get(idx)
            .ok_or_else(|| Error::Config(format!("word uses generator #{} beyond rank", idx + 1)))?;
        m *= if l > 0 {
            g.matrix
        } else {
            mat_inverse(&g.matrix)
        };
    }
    Ok(m)
}

/// Isometric circle (center on the real axis, radius) of a Mobius matrix
/// with c != 0.
fn isometric_circle(m: &Matrix2<f64>) -> Option<(f64, f64)> {
    let c = m[(1, 0)];
    if c.abs() < 1e-12 {
        return None;
    }
    Some((-m[(1, 1)] / c, 1.0 / c.abs()))
}

/// Validate that the generators form a Schottky system.
///
/// Rank one: a single hyperbolic generator always generates a convex
/// cocompact (cylinder) group. Rank >= 2: the classical test, pairwise
/// disjoint isometric circles of all generators and inverses with margin
/// 1e-6. Generators fixing infinity (c = 0) have no isometric circle, so the
/// whole system is conjugated away from that degeneracy first; lengths and
/// the group are conjugation invariant.
pub fn validate_schottky(generators: &[MobiusGenerator]) -> Result<()> {
    if generators.is_empty() {
        return Err(Error::SchottkyValidation("empty generator list".into()));
    }
    for g in generators {
        MobiusGenerator::new(g.matrix)?;
    }
    if generators.len() == 1 {
        return Ok(());
    }
    'attempt: for angle in [0.0, 0.37, 0.91, 1.43, 2.11] {
        let (c, s) = (f64::cos(angle), f64::sin(angle));
        let rot = Matrix2::new(c, -s, s, c);
        let rot_inv = Matrix2::new(c, s, -s, c);
        let mut circles: Vec<(f64, f64)> = Vec::with_capacity(2 * generators.len());
        for g in generators {
            let m = rot * g.matrix * rot_inv;
            let inv = mat_inverse(&m);
            match (isometric_circle(&m), isometric_circle(&inv)) {
                (Some(ci), Some(cj)) => {
                    circles.push(ci);
                    circles.push(cj);
                }
                _ => continue 'attempt,
            }
        }
        for i in 0..circles.len() {
            for j in (i + 1)..circles.len() {
                let gap = (circles[i].0 - circles[j].0).abs() - circles[i].1 - circles[j].1;
                if gap < 1e-6 {
                    return Err(Error::SchottkyValidation(format!(
                        "isometric circles {i} and {j} overlap (gap {gap:.3e})"
                    )));
                }
            }
        }
        return Ok(());
    }
    Err(Error::SchottkyValidation(
        "could not find a normalization with all isometric circles defined".into(),
    ))
}

/// One canonical representative per primitive conjugacy class of cyclically
/// reduced words of length <= `max_word_length`; with `unoriented`, classes
/// of w and w^-1 are identified. Sorted by (length, letters).
pub fn enumerate_classes(
    generators: &[MobiusGenerator],
    max_word_length: usize,
    unoriented: bool,
) -> Result<Vec<Word>> {
    if max_word_length < 1 {
        return Err(Error::Config("max_word_length must be at least 1".into()));
    }
    validate_schottky(generators)?;
    Ok(enumerate_classes_free(
        generators.len(),
        max_word_length,
        unoriented,
    ))
}

/// Enumeration over the abstract free group (no validity check); exposed for
/// the rank-one pipeline and for counting tests.
pub fn enumerate_classes_free(rank: usize, max_word_length: usize, unoriented: bool) -> Vec<Word> {
    let alphabet: Vec<i32> = (1..=rank as i32).flat_map(|i| [i, -i]).collect();
    let mut seen = std::collections::BTreeSet::new();
    let mut out: Vec<Word> = Vec::new();
    let mut stack: Vec<i32> = Vec::new();
    for m in 1..=max_word_length {
        dfs(&alphabet, m, &mut stack, &mut |letters| {
            let w = Word {
                letters: letters.to_vec(),
            };
            if !w.is_primitive() {
                return;
            }
            let canon = w.canonical(unoriented);
            if seen.insert(canon.letters.clone()) {
                out.push(canon);
            }
        });
    }
    out.sort_by(|a, b| {
        (a.len(), Word::lex_key(&a.letters)).cmp(&(b.len(), Word::lex_key(&b.letters)))
    });
    out
}

fn dfs(alphabet: &[i32], target: usize, stack: &mut Vec<i32>, emit: &mut impl FnMut(&[i32])) {
    if stack.len() == target {
        // Cyclic reducedness: last letter must not cancel the first.
        if target == 1 || stack[0] != -stack[target - 1] {
            emit(stack);
        }
        return;
    }
    for &l in alphabet {
        if let Some(&prev) = stack.last() {
            if prev == -l {
                continue;
            }
        }
        stack.push(l);
        dfs(alphabet, target, stack, emit);
        stack.pop();
    }
}

/// Exact translation length 2 arccosh(|tr|/2) of the word's matrix.
pub fn exact_length(w: &Word, generators: &[MobiusGenerator]) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::ContractibleClass("empty word has no geodesic".into()));
    }
    let m = word_matrix(w, generators)?;
    let tr = m.trace().abs();
    if tr <= 2.0 {
        return Err(Error::NonHyperbolic { trace_abs: tr });
    }
    Ok(2.0 * (tr / 2.0).acosh())
}

/// The axis of a hyperbolic Mobius matrix in the half-plane chart, with a
/// unit-speed parametrization increasing toward the attracting fixed point.
#[derive(Debug, Clone, Copy)]
pub struct Axis {
    kind: AxisKind,
}

#[derive(Debug, Clone, Copy)]
enum AxisKind {
    /// Semicircle footed at (center - radius, center + radius); `sign` is +1
    /// when the attracting fixed point sits at the phi -> 0 end.
    Circle { center: f64, radius: f64, sign: f64 },
    /// Vertical line v = x0; `upward` when the attracting fixed point is
    /// infinity.
    Vertical { x0: f64, upward: bool },
}

impl Axis {
    pub fn of_matrix(m: &Matrix2<f64>) -> Result<Axis> {
        let mut m = *m;
        if m.trace() < 0.0 {
            m = -m;
        }
        let tr = m.trace();
        if tr <= 2.0 {
            return Err(Error::NonHyperbolic { trace_abs: tr.abs() });
        }
        let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        if c.abs() < 1e-14 {
            let x0 = if (d - a).abs() < 1e-14 {
                // Pure dilation fixes 0 and infinity.
                0.0
            } else {
                b / (d - a)
            };
            return Ok(Axis {
                kind: AxisKind::Vertical { x0, upward: a.abs() > 1.0 },
            });
        }
        let disc = (tr * tr - 4.0).sqrt();
        let p_plus = ((a - d) + disc) / (2.0 * c);
        let p_minus = ((a - d) - disc) / (2.0 * c);
        // Attracting fixed point: |derivative| = 1/(c z + d)^2 < 1.
        let attract = if (c * p_plus + d).abs() > 1.0 { p_plus } else { p_minus };
        let (lo, hi) = (p_plus.min(p_minus), p_plus.max(p_minus));
        let center = 0.5 * (lo + hi);
        let radius = 0.5 * (hi - lo);
        // phi -> 0 is the z = center + radius end.
        let sign = if (attract - (center + radius)).abs() < (attract - (center - radius)).abs() {
            1.0
        } else {
            -1.0
        };
        Ok(Axis {
            kind: AxisKind::Circle { center, radius, sign },
        })
    }

    /// Phase point at arclength `s` from the axis base point (the apex of the
    /// semicircle, or height 1 on a vertical axis).
    pub fn phase_at(&self, s: f64) -> PhasePoint {
        match self.kind {
            AxisKind::Circle { center, radius, sign } => {
                // sigma = ln tan(phi/2) increases with phi; s = -sign * sigma.
                let sigma = -sign * s;
                let phi = 2.0 * sigma.exp().atan();
                let (sin_phi, cos_phi) = phi.sin_cos();
                let base = ChartPoint::half_plane(radius * sin_phi, center + radius * cos_phi);
                // dz/ds = i R e^{i phi} sin(phi) * dsigma/ds
                let dzr = -radius * sin_phi * sin_phi * (-sign);
                let dzi = radius * cos_phi * sin_phi * (-sign);
                PhasePoint::new(base, Vector2::new(dzi, dzr))
            }
            AxisKind::Vertical { x0, upward } => {
                let y = if upward { s.exp() } else { (-s).exp() };
                let dir = if upward { y } else { -y };
                PhasePoint::new(ChartPoint::half_plane(y, x0), Vector2::new(dir, 0.0))
            }
        }
    }
}

/// A closed piecewise-geodesic seed loop in the free-homotopy class of `w`,
/// built from the axis of the word's matrix (or the core circle on
/// cylinder-chart models). Vertex count is 32 per unit length, at least 8.
pub fn seed_loop(w: &Word, generators: &[MobiusGenerator], model: &MetricModel) -> Result<Loop> {
    let w = w.cyclic_reduce();
    if w.is_empty() {
        return Err(Error::ContractibleClass(
            "empty word names the contractible class".into(),
        ));
    }
    let simply_connected = match &model.kind {
        ModelKind::HalfPlane => true,
        ModelKind::Perturbed { base, .. } => matches!(base.as_ref(), ModelKind::HalfPlane),
        _ => false,
    };
    if simply_connected {
        return Err(Error::ContractibleClass(
            "the (perturbed) half-plane carries no closed geodesics".into(),
        ));
    }
    if model.chart() == crate::geometry::ChartId::Cylinder {
        let core_length = match &model.kind {
            ModelKind::Cylinder { core_length } => *core_length,
            ModelKind::Perturbed { base, .. } => match base.as_ref() {
                ModelKind::Cylinder { core_length } => *core_length,
                _ => unreachable!(),
            },
            _ => unreachable!(),
        };
        let k = w.rank_one_power().ok_or_else(|| {
            Error::Config("cylinder words must be powers of the single generator".into())
        })?;
        let length = core_length * k.unsigned_abs() as f64;
        let n = vertex_count(length);
        let vertices: Vec<ChartPoint> = (0..n)
            .map(|j| {
                let theta = 2.0 * std::f64::consts::PI * k as f64 * j as f64 / n as f64;
                ChartPoint::cylinder(0.0, theta)
            })
            .collect();
        return Loop::new(model, vertices, w.clone());
    }
    // Axis of the word in the half-plane cover.
    let gens = match &model.kind {
        ModelKind::Schottky { generators: g } => g.as_slice(),
        _ => generators,
    };
    let m = word_matrix(&w, gens)?;
    let length = exact_length(&w, gens)?;
    let axis = Axis::of_matrix(&m)?;
    let n = vertex_count(length);
    let vertices: Vec<ChartPoint> = (0..n)
        .map(|j| axis.phase_at(length * j as f64 / n as f64).base)
        .collect();
    Loop::new(model, vertices, w.clone())
}

fn vertex_count(length: f64) -> usize {
    ((32.0 * length).ceil() as usize).max(8)
}

/// Exact closed geodesic on a constant-curvature Schottky model: axis loop,
/// closed-form monodromy cosh/sinh(l), zero residual.
pub fn exact_closed_geodesic(
    w: &Word,
    generators: &[MobiusGenerator],
    model: &MetricModel,
) -> Result<crate::orbits::ClosedGeodesic> {
    let w = w.cyclic_reduce();
    let length = exact_length(&w, generators)?;
    let lp = seed_loop(&w, generators, model)?;
    let m = word_matrix(&w, generators)?;
    let axis = Axis::of_matrix(&m)?;
    let n_nodes = ((length / 1.2).ceil() as usize).clamp(4, 64);
    let nodes: Vec<crate::orbits::ShootingNode> = (0..n_nodes)
        .map(|j| crate::orbits::ShootingNode {
            phase: axis.phase_at(length * j as f64 / n_nodes as f64),
            time: length / n_nodes as f64,
        })
        .collect();
    let (ch, sh) = (length.cosh(), length.sinh());
    let monodromy = crate::geometry::Monodromy::from_matrix(Matrix2::new(ch, sh, sh, ch), length);
    let eigenvalues = monodromy.eigenvalues.unwrap();
    Ok(crate::orbits::ClosedGeodesic {
        word: w,
        length,
        loop_: lp,
        nodes,
        monodromy,
        monodromy_det: 1.0,
        eigenvalues,
        residual: 0.0,
    })
}

/// Unit-speed phase points sampled along one period of the word's closed
/// geodesic, lifted to the half-plane cover (for separation checks).
pub fn axis_phase_samples(
    w: &Word,
    generators: &[MobiusGenerator],
    samples: usize,
) -> Result<Vec<PhasePoint>> {
    let length = exact_length(w, generators)?;
    let m = word_matrix(w, generators)?;
    let axis = Axis::of_matrix(&m)?;
    Ok((0..samples)
        .map(|j| axis.phase_at(length * j as f64 / samples as f64))
        .collect())
}

#[cfg(test)]
mod tests;
