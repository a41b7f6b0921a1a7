//! Shared numerical kernels: an adaptive Dormand-Prince 5(4) integrator,
//! least-squares line fits, and a few stable scalar helpers.

use crate::error::{Error, Result};
use nalgebra::SVector;

/// Right-hand side of an ODE; errors abort the integration (used for chart
/// domain violations).
pub trait OdeRhs<const N: usize> {
    fn eval(&self, t: f64, y: &SVector<f64, N>) -> Result<SVector<f64, N>>;
}

impl<F, const N: usize> OdeRhs<N> for F
where
    F: Fn(f64, &SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    fn eval(&self, t: f64, y: &SVector<f64, N>) -> Result<SVector<f64, N>> {
        self(t, y)
    }
}

// Dormand-Prince 5(4) coefficients.
const A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
// 5th order solution weights equal the last row of A (FSAL form); the error
// estimate uses the direct 5th-minus-4th stage coefficients, which keeps the
// estimate proportional to h instead of drowning in y-cancellation noise.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `t0` over duration `dt` (signed) with
/// adaptive step control targeting local error `tol` per unit time.
pub fn dopri5<const N: usize>(
    f: &dyn OdeRhs<N>,
    y0: SVector<f64, N>,
    t0: f64,
    dt: f64,
    tol: f64,
) -> Result<SVector<f64, N>> {
    if dt == 0.0 {
        return Ok(y0);
    }
    if !dt.is_finite() {
        return Err(Error::Config("non-finite integration time".into()));
    }
    let t_end = t0 + dt;
    let dir = dt.signum();
    let mut t = t0;
    let mut y = y0;
    let mut k0 = f.eval(t, &y)?;
    let mut h = (0.1 * dt.abs()).min(0.5).max(1e-8) * dir;
    let mut rejected_in_a_row = 0usize;
    // Generous cap; a healthy run uses far fewer steps.
    for _ in 0..2_000_000 {
        if (t_end - t) * dir <= 0.0 {
            return Ok(y);
        }
        if (t + h - t_end) * dir > 0.0 {
            h = t_end - t;
        }
        let mut k = [k0; 7];
        let mut failed = false;
        for stage in 0..6 {
            let mut yi = y;
            for (j, kj) in k.iter().enumerate().take(stage + 1) {
                yi += *kj * (A[stage][j] * h);
            }
            match f.eval(t + C[stage] * h, &yi) {
                Ok(v) => k[stage + 1] = v,
                Err(_) if rejected_in_a_row < 40 => {
                    // Stage point left the domain: retry with a smaller step.
                    failed = true;
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        if failed {
            h *= 0.25;
            rejected_in_a_row += 1;
            continue;
        }
        let mut y5 = y;
        for (j, kj) in k.iter().enumerate().take(6) {
            y5 += *kj * (A[5][j] * h);
        }
        // k[6] is f at (t+h, y5), reused as the next step's k0 (FSAL).
        let mut est = SVector::<f64, N>::zeros();
        for (j, kj) in k.iter().enumerate() {
            est += *kj * (E[j] * h);
        }
        let mut err = 0.0f64;
        for i in 0..N {
            let sc = 1.0 + y[i].abs().max(y5[i].abs());
            err = err.max((est[i] / sc).abs());
        }
        let target = tol * h.abs();
        if !err.is_finite() {
            h *= 0.25;
            rejected_in_a_row += 1;
            if rejected_in_a_row > 60 {
                return Err(Error::ChartTransition(
                    "integration diverged (non-finite state)".into(),
                ));
            }
            continue;
        }
        if err <= target || h.abs() < 1e-14 {
            t += h;
            y = y5;
            k0 = k[6];
            rejected_in_a_row = 0;
            let factor = if err == 0.0 {
                5.0
            } else {
                (0.9 * (target / err).powf(0.2)).clamp(0.2, 5.0)
            };
            h *= factor;
        } else {
            h *= (0.9 * (target / err).powf(0.2)).clamp(0.1, 0.9);
            rejected_in_a_row += 1;
            if rejected_in_a_row > 60 {
                return Err(Error::ChartTransition(
                    "step control failed to find an admissible step".into(),
                ));
            }
        }
    }
    Err(Error::ChartTransition(format!(
        "step budget exhausted (span {dt:.3e}, reached {:.3e}, h {h:.3e})",
        t - t0
    )))
}

/// Ordinary least squares fit y = a + b x. Returns (slope, intercept,
/// slope standard error). Requires at least two distinct x values.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return Err(Error::DegenerateEstimate(format!(
            "need at least 2 points for a line fit, got {n}"
        )));
    }
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let ybar = ys.iter().sum::<f64>() / n as f64;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    if sxx <= 0.0 {
        return Err(Error::DegenerateEstimate(
            "all x values coincide in line fit".into(),
        ));
    }
    let sxy: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - xbar) * (y - ybar))
        .sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    let stderr = if n > 2 {
        (ss_res / (n as f64 - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr: stderr,
    })
}

#[derive(Debug, Clone, Copy)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
}

/// Compensated (Kahan) summation.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// x * coth(x), stable through x = 0.
pub fn x_coth_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        1.0 + x * x / 3.0 - x.powi(4) / 45.0
    } else {
        x / x.tanh()
    }
}

/// x / sinh(x), stable through x = 0.
pub fn x_over_sinh_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        1.0 - x * x / 6.0 + 7.0 * x.powi(4) / 360.0
    } else {
        x / x.sinh()
    }
}

/// arccosh for arguments that may dip just below 1 through roundoff.
pub fn acosh_clamped(x: f64) -> f64 {
    if x <= 1.0 {
        0.0
    } else {
        x.acosh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector2;

    #[test]
    fn dopri5_exponential() {
        let f = |_t: f64, y: &Vector2<f64>| Ok(Vector2::new(y[0], -y[1]));
        let y = dopri5(&f, Vector2::new(1.0, 1.0), 0.0, 3.0, 1e-12).unwrap();
        assert_relative_eq!(y[0], 3.0f64.exp(), max_relative = 1e-10);
        assert_relative_eq!(y[1], (-3.0f64).exp(), max_relative = 1e-9);
    }

    #[test]
    fn dopri5_backwards() {
        let f = |_t: f64, y: &Vector2<f64>| Ok(Vector2::new(y[1], -y[0]));
        let fwd = dopri5(&f, Vector2::new(1.0, 0.0), 0.0, 2.0, 1e-11).unwrap();
        let back = dopri5(&f, fwd, 2.0, -2.0, 1e-11).unwrap();
        assert_relative_eq!(back[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(back[1], 0.0, epsilon = 1e-9);
    }

    #[test]
    fn line_fit_exact() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 1.0, epsilon = 1e-12);
        assert!(fit.slope_stderr < 1e-12);
    }

    #[test]
    fn stable_scalars() {
        assert_relative_eq!(x_coth_x(1e-9), 1.0, epsilon = 1e-12);
        assert_relative_eq!(x_coth_x(0.5), 0.5 / 0.5f64.tanh(), epsilon = 1e-12);
        assert_relative_eq!(x_over_sinh_x(1e-9), 1.0, epsilon = 1e-12);
        assert_relative_eq!(x_over_sinh_x(0.7), 0.7 / 0.7f64.sinh(), epsilon = 1e-12);
    }
}
