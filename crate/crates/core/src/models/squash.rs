use crate::error::{Error, Result};

/// Action squashing function `g` for continuous-time greedy policies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Squash {
    /// `g(z) = tanh(z / c)` onto `(-1, 1)`.
    Tanh { c: f64 },
    /// `g(z) = ½(tanh(z / c) + 1)` onto `(0, 1)`.
    Unit { c: f64 },
}

/// `u tanh u - ln cosh u`, arranged so the two large terms cancel analytically.
fn tanh_minus_ln_cosh(u: f64) -> f64 {
    let a = u.abs();
    let e = (-2.0 * a).exp();
    -2.0 * a * e / (1.0 + e) + std::f64::consts::LN_2 - e.ln_1p()
}

/// `sech² u` without overflow.
fn sech2(u: f64) -> f64 {
    let e = (-2.0 * u.abs()).exp();
    4.0 * e / ((1.0 + e) * (1.0 + e))
}

impl Squash {
    pub fn c(&self) -> f64 {
        match *self {
            Squash::Tanh { c } | Squash::Unit { c } => c,
        }
    }

    pub fn range(&self) -> (f64, f64) {
        match self {
            Squash::Tanh { .. } => (-1.0, 1.0),
            Squash::Unit { .. } => (0.0, 1.0),
        }
    }

    pub fn midpoint(&self) -> f64 {
        let (lo, hi) = self.range();
        0.5 * (lo + hi)
    }

    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Squash::Tanh { c } => (z / c).tanh(),
            Squash::Unit { c } => 0.5 * ((z / c).tanh() + 1.0),
        }
    }

    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Squash::Tanh { c } => sech2(z / c) / c,
            Squash::Unit { c } => 0.5 * sech2(z / c) / c,
        }
    }

    /// `ln g'(z)`, finite even where `g'(z)` underflows to zero.
    pub fn log_derivative(&self, z: f64) -> f64 {
        let c = self.c();
        let a = (z / c).abs();
        // ln sech² u = ln 4 - 2|u| - 2 ln(1 + e^{-2|u|})
        let ln_sech2 = 4f64.ln() - 2.0 * a - 2.0 * (-2.0 * a).exp().ln_1p();
        match self {
            Squash::Tanh { .. } => ln_sech2 - c.ln(),
            Squash::Unit { .. } => ln_sech2 - (2.0 * c).ln(),
        }
    }

    fn check_open(&self, a: f64) -> Result<()> {
        let (lo, hi) = self.range();
        if !(a > lo && a < hi) {
            return Err(Error::Domain(format!("action {a} is not inside ({lo}, {hi})")));
        }
        Ok(())
    }

    pub fn inverse(&self, a: f64) -> Result<f64> {
        self.check_open(a)?;
        Ok(match *self {
            Squash::Tanh { c } => c * a.atanh(),
            Squash::Unit { c } => c * (2.0 * a - 1.0).atanh(),
        })
    }

    /// Action cost `r̄ᶜ(a) = -∫_{mid}^{a} g⁻¹(y) dy` and its derivative `-g⁻¹(a)`.
    pub fn action_cost(&self, a: f64) -> Result<(f64, f64)> {
        let inv = self.inverse(a)?;
        let rc = match *self {
            Squash::Tanh { c } => -c * (a * a.atanh() + 0.5 * (1.0 - a * a).ln()),
            Squash::Unit { c } => {
                let z = 2.0 * a - 1.0;
                -(c / 2.0) * (z * z.atanh() + 0.5 * (1.0 - z * z).ln())
            }
        };
        // the bracket is ≥ 0 analytically; clamp round-off near the midpoint
        Ok((rc.min(0.0), -inv))
    }

    /// Action cost evaluated through the pre-activation `z` with `a = g(z)`.
    ///
    /// Stays finite when `a` rounds onto the edge of the range, where
    /// [`Squash::action_cost`] would fail. Returns `(r̄ᶜ, dr̄ᶜ/da = -z)`.
    pub fn action_cost_at_pre(&self, z: f64) -> (f64, f64) {
        let c = self.c();
        let u = z / c;
        let body = tanh_minus_ln_cosh(u);
        let rc = match self {
            Squash::Tanh { .. } => -c * body,
            Squash::Unit { .. } => -0.5 * c * body,
        };
        (rc.min(0.0), -z)
    }
}
