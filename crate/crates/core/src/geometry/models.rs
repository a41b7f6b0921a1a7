//! Model internals: metric tensors and their chart gradients, curvature,
//! the conformal bump, closed-form distances and midpoints, deck maps.

use super::{ChartId, ChartPoint, CurvatureBounds, MetricModel, ModelKind, Rect};
use crate::error::{Error, Result};
use crate::numeric::{acosh_clamped, x_coth_x, x_over_sinh_x};
use crate::schottky::Word;
use nalgebra::{Matrix2, Vector2};
use std::f64::consts::PI;

pub(super) fn chart_of(kind: &ModelKind) -> ChartId {
    match kind {
        ModelKind::HalfPlane | ModelKind::Schottky { .. } => ChartId::HalfPlane,
        ModelKind::Cylinder { .. } => ChartId::Cylinder,
        ModelKind::Perturbed { base, .. } => chart_of(base),
    }
}

pub(super) fn validate_kind(kind: &ModelKind) -> Result<()> {
    match kind {
        ModelKind::HalfPlane => Ok(()),
        ModelKind::Cylinder { core_length } => {
            if *core_length > 0.0 && core_length.is_finite() {
                Ok(())
            } else {
                Err(Error::Config("cylinder core_length must be positive".into()))
            }
        }
        ModelKind::Schottky { generators } => {
            crate::schottky::validate_schottky(generators)?;
            Ok(())
        }
        ModelKind::Perturbed {
            base,
            center,
            radius,
            amplitude,
        } => {
            match base.as_ref() {
                ModelKind::HalfPlane | ModelKind::Cylinder { .. } => {}
                _ => {
                    return Err(Error::Config(
                        "perturbed base must be half_plane or cylinder".into(),
                    ))
                }
            }
            validate_kind(base)?;
            if !(*radius > 0.0 && radius.is_finite()) {
                return Err(Error::Config("bump radius must be positive and finite".into()));
            }
            if amplitude.abs() >= 0.2 {
                return Err(Error::Config(
                    "bump amplitude must lie in (-0.2, 0.2) to keep curvature negative".into(),
                ));
            }
            if let ModelKind::Cylinder { core_length } = base.as_ref() {
                // Bump support must avoid the center's cut locus.
                if *radius >= 0.49 * core_length {
                    return Err(Error::Config(
                        "bump radius must be below half the cylinder core length".into(),
                    ));
                }
            }
            let p = ChartPoint {
                coords: Vector2::new(center[0], center[1]),
                chart: chart_of(base),
            };
            check_domain(base, &p)?;
            // Negativity scan over the support: the amplitude cap alone does
            // not protect small bump radii.
            if let Some(region) = support_box(kind) {
                let grid = 48;
                for i in 0..=grid {
                    for j in 0..=grid {
                        let u = region.min[0]
                            + (region.max[0] - region.min[0]) * i as f64 / grid as f64;
                        let v = region.min[1]
                            + (region.max[1] - region.min[1]) * j as f64 / grid as f64;
                        if chart_of(base) == ChartId::HalfPlane && u <= 0.0 {
                            continue;
                        }
                        let k = curvature(kind, Vector2::new(u, v));
                        if k >= 0.0 {
                            return Err(Error::Config(format!(
                                "perturbation destroys negative curvature (K = {k} at ({u}, {v}))"
                            )));
                        }
                    }
                }
            }
            Ok(())
        }
    }
}

pub(super) fn injectivity_lower_bound(kind: &ModelKind) -> f64 {
    match kind {
        ModelKind::HalfPlane => f64::INFINITY,
        ModelKind::Cylinder { core_length } => core_length / 2.0,
        ModelKind::Schottky { generators } => {
            // Half the shortest generator translation length; a desk-scale
            // estimate (short relator words cannot undercut generators in a
            // free group acting with disjoint circles).
            generators
                .iter()
                .map(|g| g.translation_length())
                .fold(f64::INFINITY, f64::min)
                / 2.0
        }
        ModelKind::Perturbed {
            base, amplitude, ..
        } => injectivity_lower_bound(base) * (-amplitude.abs()).exp(),
    }
}

pub(super) fn check_domain(kind: &ModelKind, p: &ChartPoint) -> Result<()> {
    let chart = chart_of(kind);
    if p.chart != chart {
        return Err(Error::Domain(format!(
            "point in chart {:?} given to a {:?} model",
            p.chart, chart
        )));
    }
    if !p.coords[0].is_finite() || !p.coords[1].is_finite() {
        return Err(Error::Domain("non-finite coordinates".into()));
    }
    if chart == ChartId::HalfPlane && p.coords[0] <= 0.0 {
        return Err(Error::Domain(format!(
            "half-plane chart requires u > 0, got u = {}",
            p.coords[0]
        )));
    }
    Ok(())
}

/// theta scale of the cylinder chart: g = dr^2 + c^2 cosh^2(r) dtheta^2.
fn cyl_scale(core_length: f64) -> f64 {
    core_length / (2.0 * PI)
}

// ---------------------------------------------------------------------------
// Base metrics and their chart gradients.
// ---------------------------------------------------------------------------

fn base_metric(kind: &ModelKind, x: Vector2<f64>) -> Matrix2<f64> {
    match kind {
        ModelKind::HalfPlane | ModelKind::Schottky { .. } => {
            let u2 = x[0] * x[0];
            Matrix2::new(1.0 / u2, 0.0, 0.0, 1.0 / u2)
        }
        ModelKind::Cylinder { core_length } => {
            let c = cyl_scale(*core_length);
            let ch = x[0].cosh();
            Matrix2::new(1.0, 0.0, 0.0, c * c * ch * ch)
        }
        ModelKind::Perturbed { .. } => unreachable!("perturbed base handled by caller"),
    }
}

/// (g, [dg/dx0, dg/dx1]) for the base (unperturbed) metric.
fn base_metric_grad(kind: &ModelKind, x: Vector2<f64>) -> (Matrix2<f64>, [Matrix2<f64>; 2]) {
    match kind {
        ModelKind::HalfPlane | ModelKind::Schottky { .. } => {
            let u = x[0];
            let g = base_metric(kind, x);
            let d_du = Matrix2::new(-2.0 / (u * u * u), 0.0, 0.0, -2.0 / (u * u * u));
            (g, [d_du, Matrix2::zeros()])
        }
        ModelKind::Cylinder { core_length } => {
            let c = cyl_scale(*core_length);
            let (sh, ch) = (x[0].sinh(), x[0].cosh());
            let g = Matrix2::new(1.0, 0.0, 0.0, c * c * ch * ch);
            let d_dr = Matrix2::new(0.0, 0.0, 0.0, 2.0 * c * c * ch * sh);
            (g, [d_dr, Matrix2::zeros()])
        }
        ModelKind::Perturbed { .. } => unreachable!("perturbed base handled by caller"),
    }
}

pub(super) fn metric(kind: &ModelKind, x: Vector2<f64>) -> Matrix2<f64> {
    match kind {
        ModelKind::Perturbed { base, .. } => {
            let phi = bump_phi(kind, x);
            base_metric(base, x) * (2.0 * phi).exp()
        }
        _ => base_metric(kind, x),
    }
}

pub(super) fn metric_grad(kind: &ModelKind, x: Vector2<f64>) -> (Matrix2<f64>, [Matrix2<f64>; 2]) {
    match kind {
        ModelKind::Perturbed { base, .. } => {
            let (g0, dg0) = base_metric_grad(base, x);
            let (phi, dphi) = bump_phi_grad(kind, x);
            let e = (2.0 * phi).exp();
            let g = g0 * e;
            let d0 = (dg0[0] + g0 * (2.0 * dphi[0])) * e;
            let d1 = (dg0[1] + g0 * (2.0 * dphi[1])) * e;
            (g, [d0, d1])
        }
        _ => base_metric_grad(kind, x),
    }
}

pub(super) fn curvature(kind: &ModelKind, x: Vector2<f64>) -> f64 {
    match kind {
        ModelKind::Perturbed { .. } => {
            let (phi, lap) = bump_phi_laplacian(kind, x);
            (-2.0 * phi).exp() * (-1.0 - lap)
        }
        _ => -1.0,
    }
}

// ---------------------------------------------------------------------------
// The conformal bump.
//
// phi(p) = amplitude * B(d / radius) with the smooth profile
// B(t) = exp(1/(t^2 - 1)) on |t| < 1 (so the center value is amplitude/e),
// and d the base-metric distance to the bump center. With this profile the
// declared amplitude range (-0.2, 0.2) keeps the curvature negative down to
// bump radii around 0.8. All derived quantities use the radial closed forms
// against the constant-curvature base:
//   grad phi = (phi'(d)/sinh d) * grad(cosh d)
//   lap phi  = phi''(d) + coth(d) phi'(d).
// ---------------------------------------------------------------------------

/// (B, B', B'') of the bump profile at |t| < 1.
fn bump_profile(t: f64) -> (f64, f64, f64) {
    let t2 = t * t;
    if t2 >= 1.0 {
        return (0.0, 0.0, 0.0);
    }
    let w = t2 - 1.0;
    let b = (1.0 / w).exp();
    let db = b * (-2.0 * t) / (w * w);
    let d2b = b * ((4.0 * t2) / (w * w * w * w) + (6.0 * t2 + 2.0) / (w * w * w));
    (b, db, d2b)
}

/// B'(t)/t, stable at t = 0.
fn bump_dprofile_over_t(t: f64) -> f64 {
    let t2 = t * t;
    if t2 >= 1.0 {
        return 0.0;
    }
    let w = t2 - 1.0;
    (1.0 / w).exp() * (-2.0) / (w * w)
}

struct BumpGeometry {
    cosh_d: f64,
    dcosh_d: Vector2<f64>,
}

/// cosh of the base-metric distance to the bump center, with its chart
/// gradient, for the two supported bases.
fn bump_geometry(base: &ModelKind, center: [f64; 2], x: Vector2<f64>) -> BumpGeometry {
    match base {
        ModelKind::HalfPlane => {
            let (u, v) = (x[0], x[1]);
            let (u0, v0) = (center[0], center[1]);
            let du = u - u0;
            let dv = v - v0;
            let q = (du * du + dv * dv) / (2.0 * u * u0);
            let dq_du = du / (u * u0) - q / u;
            let dq_dv = dv / (u * u0);
            BumpGeometry {
                cosh_d: 1.0 + q,
                dcosh_d: Vector2::new(dq_du, dq_dv),
            }
        }
        ModelKind::Cylinder { core_length } => {
            let c = cyl_scale(*core_length);
            let (r, theta) = (x[0], x[1]);
            let (r0, theta0) = (center[0], center[1]);
            let mut dth = (theta - theta0) % (2.0 * PI);
            if dth > PI {
                dth -= 2.0 * PI;
            }
            if dth < -PI {
                dth += 2.0 * PI;
            }
            let ds = c * dth;
            let (shr, chr) = (r.sinh(), r.cosh());
            let (shr0, chr0) = (r0.sinh(), r0.cosh());
            let cosh_d = chr * chr0 * ds.cosh() - shr * shr0;
            BumpGeometry {
                cosh_d,
                dcosh_d: Vector2::new(
                    shr * chr0 * ds.cosh() - chr * shr0,
                    c * chr * chr0 * ds.sinh(),
                ),
            }
        }
        _ => unreachable!("unsupported perturbation base"),
    }
}

fn bump_params(kind: &ModelKind) -> (&ModelKind, [f64; 2], f64, f64) {
    match kind {
        ModelKind::Perturbed {
            base,
            center,
            radius,
            amplitude,
        } => (base.as_ref(), *center, *radius, *amplitude),
        _ => unreachable!("bump_params on unperturbed model"),
    }
}

pub(super) fn bump_phi(kind: &ModelKind, x: Vector2<f64>) -> f64 {
    let (base, center, radius, amplitude) = bump_params(kind);
    let geo = bump_geometry(base, center, x);
    let d = acosh_clamped(geo.cosh_d);
    if d >= radius {
        return 0.0;
    }
    amplitude * bump_profile(d / radius).0
}

fn bump_phi_grad(kind: &ModelKind, x: Vector2<f64>) -> (f64, Vector2<f64>) {
    let (base, center, radius, amplitude) = bump_params(kind);
    let geo = bump_geometry(base, center, x);
    let d = acosh_clamped(geo.cosh_d);
    if d >= radius {
        return (0.0, Vector2::zeros());
    }
    let t = d / radius;
    let (b, _, _) = bump_profile(t);
    // phi'(d)/sinh(d) = (a/r^2) * (B'(t)/t) * (d/sinh d)
    let s = amplitude / (radius * radius) * bump_dprofile_over_t(t) * x_over_sinh_x(d);
    (amplitude * b, geo.dcosh_d * s)
}

/// (phi, Laplace-Beltrami of phi in the base metric) at x.
fn bump_phi_laplacian(kind: &ModelKind, x: Vector2<f64>) -> (f64, f64) {
    let (base, center, radius, amplitude) = bump_params(kind);
    let geo = bump_geometry(base, center, x);
    let d = acosh_clamped(geo.cosh_d);
    if d >= radius {
        return (0.0, 0.0);
    }
    let t = d / radius;
    let (b, _, d2b) = bump_profile(t);
    let phi_dd = amplitude / (radius * radius) * d2b;
    // coth(d) phi'(d) = (phi'(d)/d) * (d coth d)
    let phi_d_over_d = amplitude / (radius * radius) * bump_dprofile_over_t(t);
    (amplitude * b, phi_dd + phi_d_over_d * x_coth_x(d))
}

// ---------------------------------------------------------------------------
// Curvature bounds.
// ---------------------------------------------------------------------------

pub(super) fn support_box(kind: &ModelKind) -> Option<Rect> {
    match kind {
        ModelKind::Perturbed {
            base,
            center,
            radius,
            ..
        } => {
            let rad = 1.02 * radius;
            match base.as_ref() {
                ModelKind::HalfPlane => {
                    let (u0, v0) = (center[0], center[1]);
                    let dv = u0 * (2.0 * rad.exp() * (rad.cosh() - 1.0)).sqrt();
                    Some(Rect {
                        min: [u0 * (-rad).exp(), v0 - dv],
                        max: [u0 * rad.exp(), v0 + dv],
                    })
                }
                ModelKind::Cylinder { core_length } => {
                    let c = cyl_scale(*core_length);
                    Some(Rect {
                        min: [center[0] - rad, center[1] - rad / c],
                        max: [center[0] + rad, center[1] + rad / c],
                    })
                }
                _ => None,
            }
        }
        _ => None,
    }
}

pub(super) fn curvature_bounds(
    model: &MetricModel,
    region: &Rect,
    grid: usize,
    margin: f64,
) -> Result<CurvatureBounds> {
    if !matches!(model.kind, ModelKind::Perturbed { .. }) {
        // Constant curvature -1 is known analytically; sampling adds nothing.
        return Ok(CurvatureBounds {
            k1: 1.0,
            k2: 1.0,
            sample_count: 0,
            margin: 0.0,
        });
    }
    if grid < 16 {
        return Err(Error::Config("curvature grid must be at least 16 per axis".into()));
    }
    if let Some(support) = support_box(&model.kind) {
        if !region.contains(&support) {
            return Err(Error::Config(
                "curvature region must contain the perturbation support".into(),
            ));
        }
    }
    let chart = model.chart();
    let mut min_k = f64::INFINITY;
    let mut max_k = f64::NEG_INFINITY;
    let mut count = 0usize;
    for i in 0..=grid {
        for j in 0..=grid {
            let u = region.min[0] + (region.max[0] - region.min[0]) * i as f64 / grid as f64;
            let v = region.min[1] + (region.max[1] - region.min[1]) * j as f64 / grid as f64;
            if chart == ChartId::HalfPlane && u <= 0.0 {
                continue;
            }
            let k = curvature(&model.kind, Vector2::new(u, v));
            if k >= 0.0 {
                return Err(Error::Config(format!(
                    "not negatively curved: K = {k} at ({u}, {v})"
                )));
            }
            min_k = min_k.min(k);
            max_k = max_k.max(k);
            count += 1;
        }
    }
    // Outside the sampled region the model is exactly constant curvature -1,
    // so the bounds clamp against 1.
    let k1 = ((-min_k).sqrt() * (1.0 + margin)).max(1.0);
    let k2 = ((-max_k).sqrt() / (1.0 + margin)).min(1.0);
    Ok(CurvatureBounds {
        k1,
        k2,
        sample_count: count,
        margin,
    })
}

// ---------------------------------------------------------------------------
// Mobius action on the half-plane chart (u height, v horizontal; z = v + iu).
// ---------------------------------------------------------------------------

/// Apply a real Mobius matrix to a chart point, optionally pushing a tangent
/// vector forward by the complex derivative.
pub(crate) fn mobius_apply(
    m: &Matrix2<f64>,
    x: Vector2<f64>,
    vel: Option<Vector2<f64>>,
) -> (Vector2<f64>, Option<Vector2<f64>>) {
    let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    // z = v + i u
    let (zr, zi) = (x[1], x[0]);
    let (nr, ni) = (a * zr + b, a * zi);
    let (dr, di) = (c * zr + d, c * zi);
    let den = dr * dr + di * di;
    let wr = (nr * dr + ni * di) / den;
    let wi = (ni * dr - nr * di) / den;
    let out = Vector2::new(wi, wr);
    let vel_out = vel.map(|v| {
        // w'(z) = det / (cz+d)^2 = 1 / (cz+d)^2 for det = 1.
        let (er, ei) = (dr * dr - di * di, 2.0 * dr * di);
        let e2 = er * er + ei * ei;
        let (fr, fi) = (er / e2, -ei / e2);
        // velocity as complex: v_c = v_v + i v_u
        let (vr, vi) = (v[1], v[0]);
        Vector2::new(vr * fi + vi * fr, vr * fr - vi * fi)
    });
    (out, vel_out)
}

// ---------------------------------------------------------------------------
// Distances, log maps, midpoints.
// ---------------------------------------------------------------------------

fn half_plane_cosh_distance(p: Vector2<f64>, q: Vector2<f64>) -> f64 {
    let du = p[0] - q[0];
    let dv = p[1] - q[1];
    1.0 + (du * du + dv * dv) / (2.0 * p[0] * q[0])
}

/// Gradient of cosh d(p, q) with respect to p.
fn half_plane_dcosh(p: Vector2<f64>, q: Vector2<f64>) -> Vector2<f64> {
    let du = p[0] - q[0];
    let dv = p[1] - q[1];
    let quad = (du * du + dv * dv) / (2.0 * p[0] * q[0]);
    Vector2::new(du / (p[0] * q[0]) - quad / p[0], dv / (p[0] * q[0]))
}

fn cylinder_cosh_distance(c: f64, p: Vector2<f64>, q: Vector2<f64>) -> (f64, Vector2<f64>) {
    let mut dth = (p[1] - q[1]) % (2.0 * PI);
    if dth > PI {
        dth -= 2.0 * PI;
    }
    if dth < -PI {
        dth += 2.0 * PI;
    }
    let ds = c * dth;
    let (shr, chr) = (p[0].sinh(), p[0].cosh());
    let (shq, chq) = (q[0].sinh(), q[0].cosh());
    let cosh_d = chr * chq * ds.cosh() - shr * shq;
    let grad = Vector2::new(shr * chq * ds.cosh() - chr * shq, c * chr * chq * ds.sinh());
    (cosh_d, grad)
}

pub(super) fn distance(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Result<f64> {
    check_domain(&model.kind, p)?;
    check_domain(&model.kind, q)?;
    match &model.kind {
        ModelKind::HalfPlane | ModelKind::Schottky { .. } => {
            Ok(acosh_clamped(half_plane_cosh_distance(p.coords, q.coords)))
        }
        ModelKind::Cylinder { core_length } => {
            let (cd, _) = cylinder_cosh_distance(cyl_scale(*core_length), p.coords, q.coords);
            Ok(acosh_clamped(cd))
        }
        ModelKind::Perturbed { .. } => log_map(model, p, q).map(|(_, d)| d),
    }
}

pub(super) fn log_map(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Result<(Vector2<f64>, f64)> {
    check_domain(&model.kind, p)?;
    check_domain(&model.kind, q)?;
    match &model.kind {
        ModelKind::HalfPlane | ModelKind::Schottky { .. } => {
            let cd = half_plane_cosh_distance(p.coords, q.coords);
            let d = acosh_clamped(cd);
            constant_curvature_log(model, p, half_plane_dcosh(p.coords, q.coords), d)
        }
        ModelKind::Cylinder { core_length } => {
            let (cd, grad) = cylinder_cosh_distance(cyl_scale(*core_length), p.coords, q.coords);
            let d = acosh_clamped(cd);
            constant_curvature_log(model, p, grad, d)
        }
        ModelKind::Perturbed { .. } => shooting_log_map(model, p, q),
    }
}

/// Initial velocity from the gradient of cosh d: the unit tangent at p toward
/// q is -grad_p d = -(grad cosh d)/sinh d, raised with the inverse metric.
fn constant_curvature_log(
    model: &MetricModel,
    p: &ChartPoint,
    dcosh: Vector2<f64>,
    d: f64,
) -> Result<(Vector2<f64>, f64)> {
    if d < 1e-14 {
        return Ok((Vector2::zeros(), 0.0));
    }
    let g = metric(&model.kind, p.coords);
    let grad = g.try_inverse().unwrap() * dcosh / d.sinh();
    let v = -grad;
    let norm = ((g * v).dot(&v)).sqrt();
    Ok((v / norm, d))
}

/// Two-parameter Newton shooting for the connecting geodesic on perturbed
/// models; the base model's log map seeds the iteration.
fn shooting_log_map(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Result<(Vector2<f64>, f64)> {
    let base_kind = match &model.kind {
        ModelKind::Perturbed { base, .. } => base.as_ref().clone(),
        _ => unreachable!(),
    };
    let base_model = MetricModel::new(base_kind)?;
    let (v0, d0) = base_model.log_map(p, q)?;
    if d0 < 1e-14 {
        return Ok((Vector2::zeros(), 0.0));
    }
    // Orthonormal frame at p in the perturbed metric for the angle parameter.
    let g = metric(&model.kind, p.coords);
    let e1 = {
        let e = Vector2::new(1.0, 0.0);
        e / ((g * e).dot(&e)).sqrt()
    };
    let e2 = {
        let e = Vector2::new(0.0, 1.0);
        let proj = (g * e).dot(&e1);
        let o = e - e1 * proj;
        o / ((g * o).dot(&o)).sqrt()
    };
    // Initial angle/time from the base log map (v0 is base-unit; direction
    // only, the frame is perturbed-orthonormal).
    let c1 = (g * v0).dot(&e1);
    let c2 = (g * v0).dot(&e2);
    let mut alpha = c2.atan2(c1);
    let mut s = d0;
    let tol = 1e-11 * (1.0 + p.coords.norm().max(q.coords.norm()));
    let shoot = |alpha: f64, s: f64| -> Result<Vector2<f64>> {
        let v = e1 * alpha.cos() + e2 * alpha.sin();
        let end = super::flow::flow_cover(
            model,
            &super::PhasePoint::new(*p, v),
            s,
            1e-11,
            false,
        )?;
        Ok(end.base.coords - q.coords)
    };
    for _ in 0..30 {
        let f0 = shoot(alpha, s)?;
        if f0.norm() < tol {
            let v = e1 * alpha.cos() + e2 * alpha.sin();
            return Ok((v, s));
        }
        let ha = 1e-7;
        let hs = 1e-7 * s.max(1e-3);
        let fa = shoot(alpha + ha, s)?;
        let fs = shoot(alpha, s + hs)?;
        let jac = Matrix2::from_columns(&[(fa - f0) / ha, (fs - f0) / hs]);
        let delta = jac
            .try_inverse()
            .ok_or_else(|| Error::Range("singular shooting Jacobian in log map".into()))?
            * f0;
        alpha -= delta[0];
        s -= delta[1];
        if !(s.is_finite() && alpha.is_finite()) || s <= 0.0 {
            return Err(Error::Range("log-map shooting left the admissible range".into()));
        }
    }
    Err(Error::Range("log-map shooting did not converge".into()))
}

/// Map cylinder Fermi coordinates (r, s) to the half-plane chart (u, v);
/// s is the recentered arclength along the core.
fn fermi_to_uhp(r: f64, s: f64) -> Vector2<f64> {
    let es = s.exp();
    Vector2::new(es / r.cosh(), es * r.tanh())
}

fn uhp_to_fermi(x: Vector2<f64>) -> (f64, f64) {
    let (u, v) = (x[0], x[1]);
    let r = (v / u).asinh();
    let s = (u * u + v * v).sqrt().ln();
    (r, s)
}

fn half_plane_midpoint(p: Vector2<f64>, q: Vector2<f64>) -> Vector2<f64> {
    let (up, vp) = (p[0], p[1]);
    let (uq, vq) = (q[0], q[1]);
    let scale = up.abs().max(uq.abs()).max((vp - vq).abs());
    if (vp - vq).abs() < 1e-13 * scale {
        return Vector2::new((up * uq).sqrt(), 0.5 * (vp + vq));
    }
    let xc = (vq * vq + uq * uq - vp * vp - up * up) / (2.0 * (vq - vp));
    let sig = |x: Vector2<f64>| -> f64 {
        let phi = x[0].atan2(x[1] - xc);
        (phi / 2.0).tan().ln()
    };
    let r = ((vp - xc) * (vp - xc) + up * up).sqrt();
    let sm = 0.5 * (sig(p) + sig(q));
    let phi_m = 2.0 * sm.exp().atan();
    Vector2::new(r * phi_m.sin(), xc + r * phi_m.cos())
}

pub(super) fn midpoint(model: &MetricModel, p: &ChartPoint, q: &ChartPoint) -> Result<ChartPoint> {
    check_domain(&model.kind, p)?;
    check_domain(&model.kind, q)?;
    let chart = model.chart();
    match &model.kind {
        ModelKind::HalfPlane | ModelKind::Schottky { .. } => Ok(ChartPoint {
            coords: half_plane_midpoint(p.coords, q.coords),
            chart,
        }),
        ModelKind::Cylinder { core_length } => {
            let c = cyl_scale(*core_length);
            // Recenter s to keep exp(s) well scaled for unwrapped theta.
            let s_center = c * 0.5 * (p.coords[1] + q.coords[1]);
            let zp = fermi_to_uhp(p.coords[0], c * p.coords[1] - s_center);
            let zq = fermi_to_uhp(q.coords[0], c * q.coords[1] - s_center);
            let zm = half_plane_midpoint(zp, zq);
            let (r, s) = uhp_to_fermi(zm);
            Ok(ChartPoint {
                coords: Vector2::new(r, (s + s_center) / c),
                chart,
            })
        }
        ModelKind::Perturbed { .. } => {
            let (v, d) = log_map(model, p, q)?;
            if d < 1e-14 {
                return Ok(*p);
            }
            let mid = super::flow::flow_cover(model, &super::PhasePoint::new(*p, v), d / 2.0, 1e-11, false)?;
            Ok(mid.base)
        }
    }
}

pub(super) fn chart_normalize(model: &MetricModel, p: &ChartPoint) -> ChartPoint {
    match model.chart() {
        ChartId::HalfPlane => *p,
        ChartId::Cylinder => {
            let mut th = p.coords[1] % (2.0 * PI);
            if th < 0.0 {
                th += 2.0 * PI;
            }
            ChartPoint {
                coords: Vector2::new(p.coords[0], th),
                chart: p.chart,
            }
        }
    }
}

pub(super) fn deck(model: &MetricModel, word: &Word) -> Result<super::Deck> {
    if word.is_empty() {
        return Ok(super::Deck::Identity);
    }
    match &model.kind {
        ModelKind::HalfPlane => Err(Error::ContractibleClass(
            "the half-plane is simply connected; nontrivial words have no deck map".into(),
        )),
        ModelKind::Cylinder { .. } => {
            let k = word.rank_one_power().ok_or_else(|| {
                Error::Config("cylinder words must be powers of the single generator".into())
            })?;
            Ok(super::Deck::Rotate(k))
        }
        ModelKind::Schottky { generators } => {
            let m = crate::schottky::word_matrix(word, generators)?;
            Ok(super::Deck::Mobius(m))
        }
        ModelKind::Perturbed { base, .. } => {
            let base_model = MetricModel::new(base.as_ref().clone())?;
            deck(&base_model, word)
        }
    }
}
