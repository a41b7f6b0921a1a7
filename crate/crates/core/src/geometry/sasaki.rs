//! First-order Sasaki distance on the unit tangent bundle.

use super::{flow, ChartId, MetricModel, PhasePoint};
use crate::error::{Error, Result};

/// sqrt(d_base^2 + d_fiber^2), where d_fiber is the angle between xi2's
/// velocity and the parallel transport of xi1's velocity along the minimizing
/// connecting geodesic. Exact in the small-separation limit.
///
/// On half-plane-chart models the base distance is the cover distance (no
/// range limit: the cover is simply connected). On the cylinder chart the
/// formula requires a unique minimizing geodesic, so base separations beyond
/// 0.9 inj(X) are rejected.
pub(super) fn sasaki_distance(model: &MetricModel, xi1: &PhasePoint, xi2: &PhasePoint) -> Result<f64> {
    let d_base = model.distance(&xi1.base, &xi2.base)?;
    if model.chart() == ChartId::Cylinder {
        let limit = 0.9 * model.injectivity_radius_lower_bound;
        if d_base > limit {
            return Err(Error::Range(format!(
                "base separation {d_base:.6} exceeds {limit:.6}"
            )));
        }
    }
    let transported = if d_base < 1e-14 {
        xi1.velocity
    } else {
        let (v0, d) = model.log_map(&xi1.base, &xi2.base)?;
        let conn = PhasePoint::new(xi1.base, v0);
        let (_end, w) = flow::parallel_transport(model, &conn, xi1.velocity, d, 1e-11)?;
        w
    };
    let g = model.metric_at(&xi2.base)?;
    let dot = (g * transported).dot(&xi2.velocity);
    // Metric area form for a signed angle; atan2 keeps small angles accurate.
    let area = g.determinant().sqrt()
        * (transported[0] * xi2.velocity[1] - transported[1] * xi2.velocity[0]);
    let angle = area.atan2(dot).abs();
    Ok((d_base * d_base + angle * angle).sqrt())
}
