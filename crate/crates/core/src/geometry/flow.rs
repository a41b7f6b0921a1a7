//! Geodesic, Jacobi, and parallel-transport flows on the cover chart.

use super::{models, ChartPoint, MetricModel, Monodromy, PhasePoint};
use crate::error::{Error, Result};
use crate::numeric::dopri5;
use nalgebra::{Matrix2, SVector, Vector2};

/// Christoffel symbols from the metric and its chart gradient:
/// result[k][(i, j)] = Gamma^k_{ij}.
fn christoffel(g: &Matrix2<f64>, dg: &[Matrix2<f64>; 2]) -> [Matrix2<f64>; 2] {
    let ginv = g.try_inverse().expect("metric must be invertible");
    let mut out = [Matrix2::zeros(), Matrix2::zeros()];
    for k in 0..2 {
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for l in 0..2 {
                    s += ginv[(k, l)] * (dg[j][(l, i)] + dg[i][(j, l)] - dg[l][(i, j)]);
                }
                out[k][(i, j)] = 0.5 * s;
            }
        }
    }
    out
}

fn geodesic_acceleration(model: &MetricModel, x: Vector2<f64>, v: Vector2<f64>) -> Vector2<f64> {
    let (g, dg) = models::metric_grad(&model.kind, x);
    let gamma = christoffel(&g, &dg);
    let mut acc = Vector2::zeros();
    for k in 0..2 {
        acc[k] = -(v.dot(&(gamma[k] * v)));
    }
    acc
}

fn domain_guard(model: &MetricModel, x: Vector2<f64>) -> Result<()> {
    if model.chart() == super::ChartId::HalfPlane && x[0] <= 0.0 {
        return Err(Error::ChartTransition(format!(
            "half-plane height became non-positive (u = {})",
            x[0]
        )));
    }
    if !(x[0].is_finite() && x[1].is_finite()) {
        return Err(Error::ChartTransition("non-finite chart coordinates".into()));
    }
    Ok(())
}

fn validate_tol(tol: f64) -> Result<()> {
    if !(1e-13..=1e-6).contains(&tol) {
        return Err(Error::Config(format!(
            "integration tolerance {tol} outside [1e-13, 1e-6]"
        )));
    }
    Ok(())
}

/// Geodesic flow in the cover chart. `renormalize` rescales to unit speed
/// every 0.5 time units (for long entropy runs; masks integrator error, so
/// it is off in the public operation).
pub(super) fn flow_cover(
    model: &MetricModel,
    xi: &PhasePoint,
    t: f64,
    tol: f64,
    renormalize: bool,
) -> Result<PhasePoint> {
    validate_tol(tol)?;
    models::check_domain(&model.kind, &xi.base)?;
    if !t.is_finite() {
        return Err(Error::Config("integration time must be finite".into()));
    }
    let rhs = |_t: f64, y: &SVector<f64, 4>| -> Result<SVector<f64, 4>> {
        let x = Vector2::new(y[0], y[1]);
        domain_guard(model, x)?;
        let v = Vector2::new(y[2], y[3]);
        let acc = geodesic_acceleration(model, x, v);
        Ok(SVector::<f64, 4>::new(v[0], v[1], acc[0], acc[1]))
    };
    let mut y = SVector::<f64, 4>::new(
        xi.base.coords[0],
        xi.base.coords[1],
        xi.velocity[0],
        xi.velocity[1],
    );
    let chunk = if renormalize { 0.5 } else { f64::INFINITY };
    let mut remaining = t;
    let dir = t.signum();
    loop {
        let step = remaining.abs().min(chunk) * dir;
        y = dopri5(&rhs, y, 0.0, step, tol)?;
        remaining -= step;
        if renormalize {
            let x = Vector2::new(y[0], y[1]);
            let v = Vector2::new(y[2], y[3]);
            let g = models::metric(&model.kind, x);
            let n = ((g * v).dot(&v)).sqrt();
            y[2] /= n;
            y[3] /= n;
        }
        if remaining.abs() <= f64::EPSILON * t.abs().max(1.0) {
            break;
        }
    }
    Ok(PhasePoint {
        base: ChartPoint {
            coords: Vector2::new(y[0], y[1]),
            chart: xi.base.chart,
        },
        velocity: Vector2::new(y[2], y[3]),
    })
}

/// Result of the combined geodesic + Jacobi integration.
#[derive(Debug, Clone)]
pub struct JacobiFlow {
    /// Endpoint of the geodesic flow in the cover chart.
    pub endpoint: PhasePoint,
    /// Fundamental solution of J'' + K J = 0 in the parallel normal frame.
    pub monodromy: Monodromy,
}

pub(super) fn integrate_jacobi(
    model: &MetricModel,
    xi: &PhasePoint,
    t: f64,
    tol: f64,
) -> Result<JacobiFlow> {
    validate_tol(tol)?;
    models::check_domain(&model.kind, &xi.base)?;
    if !t.is_finite() {
        return Err(Error::Config("integration time must be finite".into()));
    }
    // State: [x, v, Y] with Y the 2x2 fundamental matrix (column-major),
    // Y' = [[0, 1], [-K, 0]] Y.
    let rhs = |_t: f64, y: &SVector<f64, 8>| -> Result<SVector<f64, 8>> {
        let x = Vector2::new(y[0], y[1]);
        domain_guard(model, x)?;
        let v = Vector2::new(y[2], y[3]);
        let acc = geodesic_acceleration(model, x, v);
        let k = models::curvature(&model.kind, x);
        Ok(SVector::<f64, 8>::from_column_slice(&[
            v[0],
            v[1],
            acc[0],
            acc[1],
            y[5],
            -k * y[4],
            y[7],
            -k * y[6],
        ]))
    };
    let y0 = SVector::<f64, 8>::from_column_slice(&[
        xi.base.coords[0],
        xi.base.coords[1],
        xi.velocity[0],
        xi.velocity[1],
        1.0,
        0.0,
        0.0,
        1.0,
    ]);
    let y = dopri5(&rhs, y0, 0.0, t, tol)?;
    let matrix = Matrix2::new(y[4], y[6], y[5], y[7]);
    Ok(JacobiFlow {
        endpoint: PhasePoint {
            base: ChartPoint {
                coords: Vector2::new(y[0], y[1]),
                chart: xi.base.chart,
            },
            velocity: Vector2::new(y[2], y[3]),
        },
        monodromy: Monodromy::from_matrix(matrix, t.abs()),
    })
}

/// Parallel transport `w` along the geodesic from `xi` over time `t`;
/// returns the endpoint phase point and the transported vector.
pub(super) fn parallel_transport(
    model: &MetricModel,
    xi: &PhasePoint,
    w: Vector2<f64>,
    t: f64,
    tol: f64,
) -> Result<(PhasePoint, Vector2<f64>)> {
    validate_tol(tol)?;
    let rhs = |_t: f64, y: &SVector<f64, 6>| -> Result<SVector<f64, 6>> {
        let x = Vector2::new(y[0], y[1]);
        domain_guard(model, x)?;
        let v = Vector2::new(y[2], y[3]);
        let wv = Vector2::new(y[4], y[5]);
        let (g, dg) = models::metric_grad(&model.kind, x);
        let gamma = christoffel(&g, &dg);
        let mut acc = Vector2::zeros();
        let mut wdot = Vector2::zeros();
        for k in 0..2 {
            acc[k] = -(v.dot(&(gamma[k] * v)));
            wdot[k] = -(v.dot(&(gamma[k] * wv)));
        }
        Ok(SVector::<f64, 6>::from_column_slice(&[
            v[0], v[1], acc[0], acc[1], wdot[0], wdot[1],
        ]))
    };
    let y0 = SVector::<f64, 6>::from_column_slice(&[
        xi.base.coords[0],
        xi.base.coords[1],
        xi.velocity[0],
        xi.velocity[1],
        w[0],
        w[1],
    ]);
    let y = dopri5(&rhs, y0, 0.0, t, tol)?;
    Ok((
        PhasePoint {
            base: ChartPoint {
                coords: Vector2::new(y[0], y[1]),
                chart: xi.base.chart,
            },
            velocity: Vector2::new(y[2], y[3]),
        },
        Vector2::new(y[4], y[5]),
    ))
}
