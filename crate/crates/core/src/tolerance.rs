use serde::{Deserialize, Serialize};

/// Relative tolerance for the exact vanishing conditions on jet coefficients.
///
/// `X = 0` holds iff `|X| ≤ tol · scale`, where callers pass
/// `scale = 1 + max |coefficient|` of the jets involved.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance(pub f64);

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance(1e-9)
    }
}

impl Tolerance {
    pub fn band(self, scale: f64) -> f64 {
        self.0 * scale
    }

    pub fn is_zero(self, x: f64, scale: f64) -> bool {
        x.abs() <= self.band(scale)
    }

    pub fn is_nonzero(self, x: f64, scale: f64) -> bool {
        !self.is_zero(x, scale)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn band_is_relative() {
        let t = Tolerance(1e-9);
        assert!(t.is_zero(1e-9, 1.0));
        assert!(t.is_nonzero(2e-9, 1.0));
        assert!(t.is_zero(2e-9, 3.0));
    }
}
