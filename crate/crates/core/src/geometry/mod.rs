//! Surface metric models, curvature bounds, and the geodesic / Jacobi flow.
//!
//! Every model is presented in a single global chart of its universal cover:
//! the half-plane `{u > 0}` with coordinates `(u, v)` (u is the height), or
//! the cylinder chart `(r, theta)` with `theta` periodic. Schottky quotients
//! integrate in the half-plane cover; the quotient structure only enters
//! through deck transformations tracked by the orbit machinery.

mod flow;
mod models;
mod sasaki;

pub use flow::JacobiFlow;

use crate::error::{Error, Result};
use crate::schottky::{MobiusGenerator, Word};
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

/// Default multiplicative inflation applied to sampled curvature extrema.
pub const DEFAULT_CURVATURE_MARGIN: f64 = 1e-3;

/// Which global chart a point's coordinates refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartId {
    /// (u, v) with u > 0; metric (du^2 + dv^2) / u^2.
    HalfPlane,
    /// (r, theta) with theta periodic mod 2*pi.
    Cylinder,
}

/// A point in a model chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vector2<f64>,
    pub chart: ChartId,
}

impl ChartPoint {
    pub fn half_plane(u: f64, v: f64) -> Self {
        ChartPoint {
            coords: Vector2::new(u, v),
            chart: ChartId::HalfPlane,
        }
    }

    pub fn cylinder(r: f64, theta: f64) -> Self {
        ChartPoint {
            coords: Vector2::new(r, theta),
            chart: ChartId::Cylinder,
        }
    }
}

/// A unit-tangent-bundle point: base plus coordinate velocity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub base: ChartPoint,
    pub velocity: Vector2<f64>,
}

impl PhasePoint {
    pub fn new(base: ChartPoint, velocity: Vector2<f64>) -> Self {
        PhasePoint { base, velocity }
    }

    /// Construct with the velocity rescaled to unit speed in `model`.
    pub fn unit(model: &MetricModel, base: ChartPoint, direction: Vector2<f64>) -> Result<Self> {
        let g = model.metric_at(&base)?;
        let n2 = (g * direction).dot(&direction);
        if n2 <= 0.0 || !n2.is_finite() {
            return Err(Error::Domain("zero or non-finite direction".into()));
        }
        Ok(PhasePoint {
            base,
            velocity: direction / n2.sqrt(),
        })
    }
}

/// Axis-aligned rectangle in chart coordinates.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Rect {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Rect {
    pub fn contains(&self, other: &Rect) -> bool {
        self.min[0] <= other.min[0]
            && self.min[1] <= other.min[1]
            && self.max[0] >= other.max[0]
            && self.max[1] >= other.max[1]
    }
}

/// Pinching constants: every sampled curvature satisfies
/// -k1^2 <= K <= -k2^2, with k2 <= 1 <= k1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurvatureBounds {
    pub k1: f64,
    pub k2: f64,
    pub sample_count: usize,
    pub margin: f64,
}

/// Fundamental solution of the transverse Jacobi equation over a geodesic
/// segment, in the parallel-transported unit-normal frame.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct Monodromy {
    pub matrix: Matrix2<f64>,
    /// (expanding, contracting) when the matrix is hyperbolic.
    pub eigenvalues: Option<(f64, f64)>,
    pub base_length: f64,
}

impl Monodromy {
    pub fn from_matrix(matrix: Matrix2<f64>, base_length: f64) -> Self {
        let tr = matrix.trace();
        let eigenvalues = if tr.abs() > 2.0 {
            let s = (tr * tr - 4.0).sqrt();
            let expanding = if tr > 0.0 { (tr + s) / 2.0 } else { (tr - s) / 2.0 };
            Some((expanding, 1.0 / expanding))
        } else {
            None
        };
        Monodromy {
            matrix,
            eigenvalues,
            base_length,
        }
    }

    pub fn det(&self) -> f64 {
        self.matrix.determinant()
    }

    /// Expanding eigenvalue, or a degenerate-orbit error when the matrix is
    /// elliptic/parabolic within `margin` of the unit circle.
    pub fn expanding_eigenvalue(&self) -> Result<f64> {
        match self.eigenvalues {
            Some((l, _)) if (l.abs() - 1.0).abs() > 1e-6 => Ok(l),
            _ => Err(Error::DegenerateOrbit { margin: 1e-6 }),
        }
    }

    /// Unit eigenvector for the expanding eigenvalue (direction of E^u in the
    /// (J, J') frame); the stable direction is its image under eigenvalue
    /// inversion.
    pub fn unstable_direction(&self) -> Result<Vector2<f64>> {
        let l = self.expanding_eigenvalue()?;
        let m = self.matrix;
        // (m - l I) x = 0; pick the better-conditioned row.
        let r0 = Vector2::new(m[(0, 0)] - l, m[(0, 1)]);
        let r1 = Vector2::new(m[(1, 0)], m[(1, 1)] - l);
        let v = if r0.norm() > r1.norm() {
            Vector2::new(-r0[1], r0[0])
        } else {
            Vector2::new(-r1[1], r1[0])
        };
        Ok(v / v.norm())
    }
}

/// Deck transformation closing a loop in the universal-cover chart.
#[derive(Debug, Clone)]
pub enum Deck {
    Identity,
    /// theta += 2*pi*k on the cylinder chart.
    Rotate(i64),
    /// Mobius action on the half-plane chart.
    Mobius(Matrix2<f64>),
}

impl Deck {
    pub fn apply_point(&self, p: &ChartPoint) -> ChartPoint {
        match self {
            Deck::Identity => *p,
            Deck::Rotate(k) => ChartPoint {
                coords: Vector2::new(p.coords[0], p.coords[1] + 2.0 * std::f64::consts::PI * *k as f64),
                chart: p.chart,
            },
            Deck::Mobius(m) => {
                let (z, _) = models::mobius_apply(m, p.coords, None);
                ChartPoint {
                    coords: z,
                    chart: p.chart,
                }
            }
        }
    }

    pub fn apply_phase(&self, xi: &PhasePoint) -> PhasePoint {
        match self {
            Deck::Identity => *xi,
            Deck::Rotate(_) => PhasePoint {
                base: self.apply_point(&xi.base),
                velocity: xi.velocity,
            },
            Deck::Mobius(m) => {
                let (z, dv) = models::mobius_apply(m, xi.base.coords, Some(xi.velocity));
                PhasePoint {
                    base: ChartPoint {
                        coords: z,
                        chart: xi.base.chart,
                    },
                    velocity: dv.unwrap(),
                }
            }
        }
    }

    pub fn inverse(&self) -> Deck {
        match self {
            Deck::Identity => Deck::Identity,
            Deck::Rotate(k) => Deck::Rotate(-k),
            Deck::Mobius(m) => {
                let inv = Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]);
                Deck::Mobius(inv)
            }
        }
    }
}

/// The metric model variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelKind {
    HalfPlane,
    Cylinder {
        core_length: f64,
    },
    Schottky {
        generators: Vec<MobiusGenerator>,
    },
    /// Conformal perturbation g = e^{2 phi} g0 with a compactly supported
    /// radial bump phi of peak value `amplitude` inside base-metric radius
    /// `radius` around `center`.
    Perturbed {
        base: Box<ModelKind>,
        center: [f64; 2],
        radius: f64,
        amplitude: f64,
    },
}

/// A negatively curved surface model with its chart and basic estimates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricModel {
    pub kind: ModelKind,
    /// Boundary dimension; fixed to 1 for surfaces.
    pub n: usize,
    pub injectivity_radius_lower_bound: f64,
}

impl MetricModel {
    pub fn new(kind: ModelKind) -> Result<Self> {
        models::validate_kind(&kind)?;
        let inj = models::injectivity_lower_bound(&kind);
        Ok(MetricModel {
            kind,
            n: 1,
            injectivity_radius_lower_bound: inj,
        })
    }

    pub fn half_plane() -> Self {
        MetricModel::new(ModelKind::HalfPlane).unwrap()
    }

    pub fn cylinder(core_length: f64) -> Result<Self> {
        MetricModel::new(ModelKind::Cylinder { core_length })
    }

    pub fn schottky(generators: Vec<MobiusGenerator>) -> Result<Self> {
        MetricModel::new(ModelKind::Schottky { generators })
    }

    pub fn perturbed(base: ModelKind, center: [f64; 2], radius: f64, amplitude: f64) -> Result<Self> {
        MetricModel::new(ModelKind::Perturbed {
            base: Box::new(base),
            center,
            radius,
            amplitude,
        })
    }

    pub fn chart(&self) -> ChartId {
        models::chart_of(&self.kind)
    }

    /// Metric tensor g_ij at `p`.
    pub fn metric_at(&self, p: &ChartPoint) -> Result<Matrix2<f64>> {
        models::check_domain(&self.kind, p)?;
        Ok(models::metric(&self.kind, p.coords))
    }

    /// Gaussian curvature at `p`.
    pub fn curvature_at(&self, p: &ChartPoint) -> Result<f64> {
        models::check_domain(&self.kind, p)?;
        Ok(models::curvature(&self.kind, p.coords))
    }

    /// Squared-speed of a phase point minus one.
    pub fn unit_speed_error(&self, xi: &PhasePoint) -> Result<f64> {
        let g = self.metric_at(&xi.base)?;
        Ok(((g * xi.velocity).dot(&xi.velocity) - 1.0).abs())
    }

    /// Pinching bounds from curvature sampled on a `grid` x `grid` lattice
    /// over `region`. Constant-curvature models return (1, 1) exactly.
    pub fn curvature_bounds(&self, region: &Rect, grid: usize) -> Result<CurvatureBounds> {
        models::curvature_bounds(self, region, grid, DEFAULT_CURVATURE_MARGIN)
    }

    /// Chart rectangle guaranteed to contain the perturbation support.
    /// Constant-curvature models return None.
    pub fn perturbation_support_box(&self) -> Option<Rect> {
        models::support_box(&self.kind)
    }

    /// Riemannian distance between chart points (quotient distance on the
    /// cylinder chart, cover distance on the half-plane chart).
    pub fn distance(&self, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
        models::distance(self, p, q)
    }

    /// Unit initial velocity at `p` of the minimizing geodesic toward `q`,
    /// together with its length.
    pub fn log_map(&self, p: &ChartPoint, q: &ChartPoint) -> Result<(Vector2<f64>, f64)> {
        models::log_map(self, p, q)
    }

    /// Geodesic midpoint of `p` and `q` (cover chart; no wrapping applied).
    pub fn midpoint(&self, p: &ChartPoint, q: &ChartPoint) -> Result<ChartPoint> {
        models::midpoint(self, p, q)
    }

    /// Wrap a cover-chart point back into the model chart (cylinder theta
    /// into [0, 2*pi)); identity elsewhere.
    pub fn chart_normalize(&self, p: &ChartPoint) -> ChartPoint {
        models::chart_normalize(self, p)
    }

    /// Deck transformation of the universal cover named by `word`.
    pub fn deck(&self, word: &Word) -> Result<Deck> {
        models::deck(self, word)
    }

    /// Geodesic flow G^t. The returned base point is wrapped into the model
    /// chart; use [`MetricModel::flow_cover`] to stay in the cover.
    pub fn integrate_geodesic(&self, xi: &PhasePoint, t: f64, tol: f64) -> Result<PhasePoint> {
        let out = flow::flow_cover(self, xi, t, tol, false)?;
        Ok(PhasePoint {
            base: self.chart_normalize(&out.base),
            velocity: out.velocity,
        })
    }

    /// Geodesic flow in the unwrapped cover chart, with optional stepwise
    /// unit-speed renormalization (off by default in the public op).
    pub fn flow_cover(&self, xi: &PhasePoint, t: f64, tol: f64, renormalize: bool) -> Result<PhasePoint> {
        flow::flow_cover(self, xi, t, tol, renormalize)
    }

    /// Fundamental solution of the Jacobi equation J'' + K J = 0 along the
    /// geodesic through `xi`, acting on (J, J').
    pub fn integrate_jacobi(&self, xi: &PhasePoint, t: f64, tol: f64) -> Result<Monodromy> {
        flow::integrate_jacobi(self, xi, t, tol).map(|jf| jf.monodromy)
    }

    /// Geodesic and Jacobi flow together; exposes the transported phase point.
    pub fn integrate_jacobi_flow(&self, xi: &PhasePoint, t: f64, tol: f64) -> Result<JacobiFlow> {
        flow::integrate_jacobi(self, xi, t, tol)
    }

    /// First-order Sasaki distance sqrt(d_base^2 + d_fiber^2) between unit
    /// tangent vectors; exact in the small-separation limit and documented
    /// valid for separations up to ~0.1 inj(X).
    pub fn sasaki_distance(&self, xi1: &PhasePoint, xi2: &PhasePoint) -> Result<f64> {
        sasaki::sasaki_distance(self, xi1, xi2)
    }
}
