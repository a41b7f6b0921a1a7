//! Compactly supported smooth test functions for trace pairings.

use crate::error::{Error, Result};

/// A smooth bump supported on (center - width/2, center + width/2), values in
/// [0, 1] with peak 1 at the center:
/// phi(t) = exp(1 + 1/(x^2 - 1)) with x = 2 (t - center) / width.
#[derive(Debug, Clone, Copy)]
pub struct TestFunction {
    pub center: f64,
    pub width: f64,
}

impl TestFunction {
    pub fn bump(center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Config("bump width must be positive".into()));
        }
        if center - width / 2.0 <= 0.0 {
            return Err(Error::Config(
                "bump support must stay inside (0, infinity)".into(),
            ));
        }
        Ok(TestFunction { center, width })
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.width / 2.0, self.center + self.width / 2.0)
    }

    pub fn eval(&self, t: f64) -> f64 {
        let x = 2.0 * (t - self.center) / self.width;
        let x2 = x * x;
        if x2 >= 1.0 {
            0.0
        } else {
            (1.0 + 1.0 / (x2 - 1.0)).exp()
        }
    }
}
