//! Closed-geodesic search: Birkhoff curve shortening for global convergence
//! within a free-homotopy class, then multiple-shooting Newton for quadratic
//! local accuracy, plus monodromies and determinant weights.

use crate::error::{Error, Result};
use crate::geometry::{ChartPoint, Deck, MetricModel, Monodromy, PhasePoint};
use crate::schottky::Word;
use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

/// A closed polyline in the cover chart: vertices x_0..x_{N-1}, closed by the
/// deck transformation of `word` applied to x_0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Loop {
    pub vertices: Vec<ChartPoint>,
    pub word: Word,
    pub length: f64,
}

impl Loop {
    /// Build a loop and compute its piecewise-geodesic length (including the
    /// closing segment to deck(x_0)).
    pub fn new(model: &MetricModel, vertices: Vec<ChartPoint>, word: Word) -> Result<Loop> {
        if vertices.len() < 3 {
            return Err(Error::Config("a loop needs at least 3 vertices".into()));
        }
        let length = polyline_length(model, &vertices, &word)?;
        Ok(Loop {
            vertices,
            word,
            length,
        })
    }
}

fn polyline_length(model: &MetricModel, vertices: &[ChartPoint], word: &Word) -> Result<f64> {
    let deck = model.deck(word)?;
    let mut total = 0.0;
    for i in 0..vertices.len() {
        let next = if i + 1 < vertices.len() {
            vertices[i + 1]
        } else {
            deck.apply_point(&vertices[0])
        };
        total += model.distance(&vertices[i], &next)?;
    }
    Ok(total)
}

/// A multiple-shooting node: phase point and the time to the next node.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShootingNode {
    pub phase: PhasePoint,
    pub time: f64,
}

/// A converged closed geodesic together with its linearized data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClosedGeodesic {
    pub word: Word,
    /// Primitive period (length) from the converged shooting times.
    pub length: f64,
    /// Resampled orbit polyline.
    pub loop_: Loop,
    /// Converged shooting nodes (phase-accurate orbit samples).
    pub nodes: Vec<ShootingNode>,
    /// One-period monodromy of the transverse Jacobi equation.
    pub monodromy: Monodromy,
    /// Monodromy determinant evaluated stably as the product of the segment
    /// Wronskians (the direct 2x2 determinant of a hyperbolic matrix with
    /// entries ~ e^l loses ~ e^{2l} eps to cancellation).
    pub monodromy_det: f64,
    /// (expanding, contracting) monodromy eigenvalues.
    pub eigenvalues: (f64, f64),
    /// Max matching defect of the multiple-shooting system at convergence.
    pub residual: f64,
}

impl ClosedGeodesic {
    /// Initial phase point of the converged orbit.
    pub fn initial_phase(&self) -> Result<PhasePoint> {
        self.nodes
            .first()
            .map(|n| n.phase)
            .ok_or_else(|| Error::Data("orbit carries no shooting nodes".into()))
    }

    /// `count` phase points spread over one period by flowing from the
    /// converged nodes (accurate to the integrator tolerance).
    pub fn phase_samples(&self, model: &MetricModel, count: usize) -> Result<Vec<PhasePoint>> {
        let mut out = Vec::with_capacity(count);
        let mut node_start = 0.0;
        let mut node_idx = 0usize;
        for j in 0..count {
            let s = self.length * j as f64 / count as f64;
            while node_idx + 1 < self.nodes.len()
                && s >= node_start + self.nodes[node_idx].time
            {
                node_start += self.nodes[node_idx].time;
                node_idx += 1;
            }
            let xi = self.nodes[node_idx].phase;
            out.push(model.flow_cover(&xi, s - node_start, 1e-11, false)?);
        }
        Ok(out)
    }
}

/// Options for the two-stage orbit search.
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub shorten_max_iters: usize,
    pub shorten_tol: f64,
    pub newton_tol: f64,
    /// Integrator tolerance used inside the shooting solves.
    pub integrator_tol: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            shorten_max_iters: 60,
            shorten_tol: 1e-6,
            newton_tol: 1e-10,
            integrator_tol: 1e-12,
        }
    }
}

/// Birkhoff curve shortening: alternately replace the even and odd vertex
/// families by geodesic midpoints of their neighbors. The length sequence is
/// non-increasing; iteration stops when a full sweep shortens by less than
/// `tol` or after `max_iters` sweeps.
pub fn shorten_loop(model: &MetricModel, lp: &Loop, max_iters: usize, tol: f64) -> Result<Loop> {
    if lp.vertices.len() < 8 {
        return Err(Error::Config("shortening needs at least 8 vertices".into()));
    }
    if lp.word.cyclic_reduce().is_empty() {
        return Err(Error::ContractibleClass(
            "cannot shorten a contractible loop".into(),
        ));
    }
    let deck = model.deck(&lp.word)?;
    let deck_inv = deck.inverse();
    let mut verts = lp.vertices.clone();
    let n = verts.len();
    let mut length = lp.length;
    let min_length = 0.1 * model.injectivity_radius_lower_bound;
    for _ in 0..max_iters {
        for parity in 0..2 {
            for i in (parity..n).step_by(2) {
                let prev = if i == 0 {
                    deck_inv.apply_point(&verts[n - 1])
                } else {
                    verts[i - 1]
                };
                let next = if i + 1 < n {
                    verts[i + 1]
                } else {
                    deck.apply_point(&verts[0])
                };
                verts[i] = model.midpoint(&prev, &next)?;
            }
        }
        let new_length = polyline_length(model, &verts, &lp.word)?;
        if min_length.is_finite() && new_length < min_length {
            return Err(Error::ContractibleClass(format!(
                "loop length {new_length:.3e} fell below 0.1 inj(X)"
            )));
        }
        let drop = length - new_length;
        length = new_length;
        if drop.abs() < tol {
            break;
        }
    }
    Loop::new(model, verts, lp.word.clone())
}

struct ShootingSystem<'a> {
    model: &'a MetricModel,
    deck: Deck,
    m: usize,
    integrator_tol: f64,
    /// Phase-condition anchor: initial node position and chart direction.
    anchor: (Vector2<f64>, Vector2<f64>),
}

impl ShootingSystem<'_> {
    fn n_unknowns(&self) -> usize {
        5 * self.m
    }

    fn n_residuals(&self) -> usize {
        4 * self.m + 2
    }

    fn node(&self, z: &DVector<f64>, i: usize, chart: crate::geometry::ChartId) -> (PhasePoint, f64) {
        let o = 5 * i;
        (
            PhasePoint::new(
                ChartPoint {
                    coords: Vector2::new(z[o], z[o + 1]),
                    chart,
                },
                Vector2::new(z[o + 2], z[o + 3]),
            ),
            z[o + 4],
        )
    }

    fn segment_flow(&self, xi: &PhasePoint, tau: f64) -> Result<[f64; 4]> {
        let end = self.model.flow_cover(xi, tau, self.integrator_tol, false)?;
        Ok([
            end.base.coords[0],
            end.base.coords[1],
            end.velocity[0],
            end.velocity[1],
        ])
    }

    fn target(&self, z: &DVector<f64>, i: usize, chart: crate::geometry::ChartId) -> [f64; 4] {
        if i + 1 < self.m {
            let (xi, _) = self.node(z, i + 1, chart);
            [
                xi.base.coords[0],
                xi.base.coords[1],
                xi.velocity[0],
                xi.velocity[1],
            ]
        } else {
            let (xi0, _) = self.node(z, 0, chart);
            let im = self.deck.apply_phase(&xi0);
            [
                im.base.coords[0],
                im.base.coords[1],
                im.velocity[0],
                im.velocity[1],
            ]
        }
    }

    fn residual(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let chart = self.model.chart();
        let mut r = DVector::zeros(self.n_residuals());
        for i in 0..self.m {
            let (xi, tau) = self.node(z, i, chart);
            let flow = self.segment_flow(&xi, tau)?;
            let target = self.target(z, i, chart);
            for c in 0..4 {
                r[4 * i + c] = flow[c] - target[c];
            }
        }
        let (xi0, _) = self.node(z, 0, chart);
        let g = self.model.metric_at(&xi0.base)?;
        r[4 * self.m] = (g * xi0.velocity).dot(&xi0.velocity) - 1.0;
        let (x_ref, dir) = self.anchor;
        r[4 * self.m + 1] = (xi0.base.coords - x_ref).dot(&dir);
        Ok(r)
    }

    /// Block-sparse forward-difference Jacobian: perturbing node i touches
    /// only its own flow block, the previous block's target, the seam block
    /// (through the deck map, for node 0), and the two scalar rows.
    fn jacobian(&self, z: &DVector<f64>) -> Result<DMatrix<f64>> {
        let chart = self.model.chart();
        let mut jac = DMatrix::zeros(self.n_residuals(), self.n_unknowns());
        for i in 0..self.m {
            let (xi, tau) = self.node(z, i, chart);
            let flow0 = self.segment_flow(&xi, tau)?;
            for c in 0..5 {
                let col = 5 * i + c;
                let h = 1e-7 * (1.0 + z[col].abs());
                let mut zp = z.clone();
                zp[col] += h;
                let (xi_p, tau_p) = self.node(&zp, i, chart);
                let flow_p = self.segment_flow(&xi_p, tau_p)?;
                for row in 0..4 {
                    jac[(4 * i + row, col)] = (flow_p[row] - flow0[row]) / h;
                }
                if c < 4 {
                    // This node is the target of the previous block.
                    if i > 0 {
                        jac[(4 * (i - 1) + c, col)] = -1.0;
                    } else {
                        // Seam: node 0 enters block m-1 through the deck map.
                        let t0 = self.target(z, self.m - 1, chart);
                        let tp = self.target(&zp, self.m - 1, chart);
                        for row in 0..4 {
                            jac[(4 * (self.m - 1) + row, col)] = -(tp[row] - t0[row]) / h;
                        }
                        // Scalar rows depend on node 0 only.
                        let r0u = {
                            let g = self.model.metric_at(&xi.base)?;
                            (g * xi.velocity).dot(&xi.velocity) - 1.0
                        };
                        let rpu = {
                            let g = self.model.metric_at(&xi_p.base)?;
                            (g * xi_p.velocity).dot(&xi_p.velocity) - 1.0
                        };
                        jac[(4 * self.m, col)] = (rpu - r0u) / h;
                        let (x_ref, dir) = self.anchor;
                        let r0p = (xi.base.coords - x_ref).dot(&dir);
                        let rpp = (xi_p.base.coords - x_ref).dot(&dir);
                        jac[(4 * self.m + 1, col)] = (rpp - r0p) / h;
                    }
                }
            }
        }
        Ok(jac)
    }
}

/// Multiple-shooting Newton refinement of a (near-stationary) loop into a
/// closed geodesic with residual at most `tol`.
pub fn refine_newton(model: &MetricModel, lp: &Loop, tol: f64) -> Result<ClosedGeodesic> {
    refine_newton_opts(
        model,
        lp,
        &SearchOptions {
            newton_tol: tol,
            ..SearchOptions::default()
        },
    )
}

pub fn refine_newton_opts(
    model: &MetricModel,
    lp: &Loop,
    opts: &SearchOptions,
) -> Result<ClosedGeodesic> {
    let word = lp.word.cyclic_reduce();
    if word.is_empty() {
        return Err(Error::ContractibleClass("empty word".into()));
    }
    let deck = model.deck(&word)?;
    let chart = model.chart();
    let tol = opts.newton_tol;

    // Resample the polyline into m shooting nodes at equal arclength.
    let m = ((lp.length / 1.2).ceil() as usize).clamp(4, 64);
    let nodes = resample_nodes(model, lp, m, &deck)?;
    let mut z = DVector::zeros(5 * m);
    for (i, (xi, tau)) in nodes.iter().enumerate() {
        z[5 * i] = xi.base.coords[0];
        z[5 * i + 1] = xi.base.coords[1];
        z[5 * i + 2] = xi.velocity[0];
        z[5 * i + 3] = xi.velocity[1];
        z[5 * i + 4] = *tau;
    }
    let sys = ShootingSystem {
        model,
        deck,
        m,
        integrator_tol: opts.integrator_tol,
        anchor: (nodes[0].0.base.coords, nodes[0].0.velocity),
    };

    let tau_cap = 3.0 * (lp.length / m as f64).max(1.0);
    let mut r = sys.residual(&z)?;
    let mut rnorm = r.amax();
    let mut stalls = 0usize;
    let mut iterations = 0usize;
    while rnorm > tol {
        iterations += 1;
        if iterations > 50 {
            return Err(Error::NonConvergence {
                iterations: iterations - 1,
                residual: rnorm,
            });
        }
        let jac = sys.jacobian(&z)?;
        let svd = jac.svd(true, true);
        let max_sv = svd.singular_values.amax();
        // The shooting system has a near-null space from time
        // reparametrization along the orbit; a cutoff well above the
        // finite-difference noise keeps the Gauss-Newton step off it.
        let mut delta = match svd.solve(&r, max_sv * 1e-8) {
            Ok(d) => d,
            Err(_) => {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: rnorm,
                })
            }
        };
        // Trust region: all unknowns are O(1) chart/velocity/time values.
        let dmax = delta.amax();
        if dmax > 0.5 {
            delta *= 0.5 / dmax;
        }
        // Backtracking on the max-norm of the residual.
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..12 {
            let znew = &z - &delta * step;
            if (0..m).any(|i| znew[5 * i + 4] <= 1e-6 || znew[5 * i + 4] > tau_cap) {
                step *= 0.5;
                continue;
            }
            match sys.residual(&znew) {
                Ok(rnew) => {
                    let nn = rnew.amax();
                    if nn < rnorm * (1.0 - 1e-4) || nn < tol {
                        z = znew;
                        r = rnew;
                        rnorm = nn;
                        improved = true;
                        break;
                    }
                }
                Err(_) => {}
            }
            step *= 0.5;
        }
        if !improved {
            stalls += 1;
            if stalls >= 3 {
                return Err(Error::NonConvergence {
                    iterations,
                    residual: rnorm,
                });
            }
        } else {
            stalls = 0;
        }
    }

    // Converged: assemble the orbit.
    let mut shooting_nodes: Vec<ShootingNode> = (0..m)
        .map(|i| {
            let (phase, time) = sys.node(&z, i, chart);
            ShootingNode { phase, time }
        })
        .collect();
    // The unit-speed row constrains node 0; renormalize the interior nodes to
    // keep downstream consumers exactly unit within residual accuracy.
    for node in shooting_nodes.iter_mut() {
        node.phase = PhasePoint::unit(model, node.phase.base, node.phase.velocity)?;
    }
    let length: f64 = shooting_nodes.iter().map(|n| n.time).sum();

    // Dense polyline by sampling each shooting segment.
    let mut vertices: Vec<ChartPoint> = Vec::new();
    for node in &shooting_nodes {
        let steps = ((32.0 * node.time).ceil() as usize).max(1);
        for s in 0..steps {
            let t = node.time * s as f64 / steps as f64;
            let p = model.flow_cover(&node.phase, t, opts.integrator_tol, false)?;
            vertices.push(p.base);
        }
    }
    let loop_ = Loop::new(model, vertices, word.clone())?;

    // Monodromy: transverse Jacobi fundamental matrix composed over the
    // shooting segments (restarting at the converged nodes suppresses drift).
    let mut mat = nalgebra::Matrix2::identity();
    let mut det = 1.0;
    for node in &shooting_nodes {
        let jf = model.integrate_jacobi_flow(&node.phase, node.time, opts.integrator_tol)?;
        mat = jf.monodromy.matrix * mat;
        det *= jf.monodromy.matrix.determinant();
    }
    let monodromy = Monodromy::from_matrix(mat, length);
    let eigenvalues = monodromy
        .eigenvalues
        .ok_or(Error::DegenerateOrbit { margin: 1e-6 })?;
    if (eigenvalues.0.abs() - 1.0).abs() < 1e-6 {
        return Err(Error::DegenerateOrbit { margin: 1e-6 });
    }

    Ok(ClosedGeodesic {
        word,
        length,
        loop_,
        nodes: shooting_nodes,
        monodromy,
        monodromy_det: det,
        eigenvalues,
        residual: rnorm,
    })
}

fn resample_nodes(
    model: &MetricModel,
    lp: &Loop,
    m: usize,
    deck: &Deck,
) -> Result<Vec<(PhasePoint, f64)>> {
    let n = lp.vertices.len();
    // Cumulative chord lengths, with the closing segment.
    let mut cum = Vec::with_capacity(n + 1);
    cum.push(0.0);
    for i in 0..n {
        let next = if i + 1 < n {
            lp.vertices[i + 1]
        } else {
            deck.apply_point(&lp.vertices[0])
        };
        let d = model.distance(&lp.vertices[i], &next)?;
        cum.push(cum[i] + d);
    }
    let total = *cum.last().unwrap();
    if total <= 0.0 {
        return Err(Error::ContractibleClass("zero-length loop".into()));
    }
    let position_at = |s: f64| -> ChartPoint {
        let s = s.clamp(0.0, total);
        let seg = match cum.binary_search_by(|c| c.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(n - 1),
            Err(i) => i - 1,
        };
        let seg = seg.min(n - 1);
        let seg_len = cum[seg + 1] - cum[seg];
        let frac = if seg_len > 0.0 { (s - cum[seg]) / seg_len } else { 0.0 };
        let a = lp.vertices[seg];
        let b = if seg + 1 < n {
            lp.vertices[seg + 1]
        } else {
            deck.apply_point(&lp.vertices[0])
        };
        ChartPoint {
            coords: a.coords + (b.coords - a.coords) * frac,
            chart: a.chart,
        }
    };
    let positions: Vec<ChartPoint> = (0..m).map(|i| position_at(total * i as f64 / m as f64)).collect();
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let next = if i + 1 < m {
            positions[i + 1]
        } else {
            deck.apply_point(&positions[0])
        };
        let (dir, dist) = model.log_map(&positions[i], &next)?;
        if dist <= 0.0 {
            return Err(Error::ContractibleClass("coincident shooting nodes".into()));
        }
        out.push((PhasePoint::new(positions[i], dir), dist));
    }
    Ok(out)
}

/// Monodromy of the Jacobi equation over `k` periods, by continuous
/// integration along the closed orbit (independently of the stored one-period
/// matrix, which it matches up to integration drift).
pub fn poincare_map(model: &MetricModel, orbit: &ClosedGeodesic, k: usize) -> Result<Monodromy> {
    if k < 1 {
        return Err(Error::Config("iterate count k must be at least 1".into()));
    }
    if orbit.residual > 1e-6 {
        return Err(Error::Config(
            "orbit residual too large for monodromy integration".into(),
        ));
    }
    let xi0 = orbit.initial_phase()?;
    let xi0 = PhasePoint::unit(model, xi0.base, xi0.velocity)?;
    let jf = model.integrate_jacobi_flow(&xi0, k as f64 * orbit.length, 1e-12)?;
    Ok(jf.monodromy)
}

/// sqrt(|det(I - P^k)|) from the monodromy eigenvalues, in the numerically
/// stable form |lambda^{k/2} - lambda^{-k/2}| (surfaces).
pub fn det_weight(m: &Monodromy, k: usize) -> Result<f64> {
    if k < 1 {
        return Err(Error::Config("iterate count k must be at least 1".into()));
    }
    let lambda = m.expanding_eigenvalue()?;
    Ok(det_weight_from_expanding(lambda, k))
}

/// Weight from a known expanding eigenvalue.
pub fn det_weight_from_expanding(lambda: f64, k: usize) -> f64 {
    let chi = lambda.abs().ln();
    let half = 0.5 * k as f64 * chi;
    if lambda > 0.0 || k % 2 == 0 {
        2.0 * half.sinh()
    } else {
        2.0 * half.cosh()
    }
}

/// Expanding eigenvalue consistent with a stored k-iterate weight
/// w = 2 sinh(k chi / 2); inverse of [`det_weight_from_expanding`].
pub fn expanding_from_weight(weight: f64, k: usize) -> Result<f64> {
    if !(weight > 0.0) || k < 1 {
        return Err(Error::Data(format!("invalid weight {weight} for k = {k}")));
    }
    let chi = 2.0 * (weight / 2.0).asinh() / k as f64;
    Ok(chi.exp())
}

/// High-level search: seed from the word's axis, shorten, refine.
pub fn search_closed_geodesic(
    model: &MetricModel,
    word: &Word,
    generators: &[crate::schottky::MobiusGenerator],
    opts: &SearchOptions,
) -> Result<ClosedGeodesic> {
    let seed = crate::schottky::seed_loop(word, generators, model)?;
    let shortened = shorten_loop(model, &seed, opts.shorten_max_iters, opts.shorten_tol)?;
    refine_newton_opts(model, &shortened, opts)
}

#[cfg(test)]
mod tests;
