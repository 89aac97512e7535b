//! Maki-Thompson rumor dynamics.
//!
//! The population splits into ignorants `i`, spreaders `s` and stiflers
//! `r = 1 - i - s`. Only `(i, s)` are carried as state; `r` is always derived.
//! All rates are aggregate rates (contact count already folded in).

use crate::error::{Error, Result};

/// Time profile of the aggregate spreading rate `beta(t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SpreadingProfile {
    Constant {
        beta: f64,
    },
    /// `beta_min + (beta_max - beta_min) / (1 + exp(-steepness (t - midpoint)))`
    LogisticIncreasing {
        beta_min: f64,
        beta_max: f64,
        steepness: f64,
        midpoint: f64,
    },
    /// `(beta_max - beta_min) (1 - 1 / (1 + exp(-steepness (t - midpoint))))`
    ///
    /// Note the floor rate only enters through the amplitude: the profile
    /// decays towards zero, not towards `beta_min`.
    LogisticDecreasing {
        beta_min: f64,
        beta_max: f64,
        steepness: f64,
        midpoint: f64,
    },
}

impl SpreadingProfile {
    pub fn constant(beta: f64) -> Result<Self> {
        let p = SpreadingProfile::Constant { beta };
        p.validate()?;
        Ok(p)
    }

    pub fn logistic_increasing(beta_min: f64, beta_max: f64, steepness: f64, midpoint: f64) -> Result<Self> {
        let p = SpreadingProfile::LogisticIncreasing {
            beta_min,
            beta_max,
            steepness,
            midpoint,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn logistic_decreasing(beta_min: f64, beta_max: f64, steepness: f64, midpoint: f64) -> Result<Self> {
        let p = SpreadingProfile::LogisticDecreasing {
            beta_min,
            beta_max,
            steepness,
            midpoint,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpreadingProfile::Constant { beta } => {
                if !(beta.is_finite() && beta >= 0.0) {
                    return Err(Error::param("beta", format!("must be finite and >= 0, got {beta}")));
                }
            }
            SpreadingProfile::LogisticIncreasing {
                beta_min,
                beta_max,
                steepness,
                midpoint,
            }
            | SpreadingProfile::LogisticDecreasing {
                beta_min,
                beta_max,
                steepness,
                midpoint,
            } => {
                let (a_key, c_key) = match self {
                    SpreadingProfile::LogisticIncreasing { .. } => ("a1", "c1"),
                    _ => ("a2", "c2"),
                };
                if !(beta_min.is_finite() && beta_min >= 0.0) {
                    return Err(Error::param(
                        "beta_m",
                        format!("must be finite and >= 0, got {beta_min}"),
                    ));
                }
                if !(beta_max.is_finite() && beta_max > beta_min) {
                    return Err(Error::param(
                        "beta_M",
                        format!("must be finite and > beta_m = {beta_min}, got {beta_max}"),
                    ));
                }
                if !(steepness.is_finite() && steepness > 0.0) {
                    return Err(Error::param(a_key, format!("must be finite and > 0, got {steepness}")));
                }
                if !midpoint.is_finite() {
                    return Err(Error::param(c_key, format!("must be finite, got {midpoint}")));
                }
            }
        }
        Ok(())
    }

    /// Spreading rate at time `t`.
    pub fn rate(&self, t: f64) -> f64 {
        match *self {
            SpreadingProfile::Constant { beta } => beta,
            SpreadingProfile::LogisticIncreasing {
                beta_min,
                beta_max,
                steepness,
                midpoint,
            } => beta_min + (beta_max - beta_min) * logistic(steepness * (t - midpoint)),
            SpreadingProfile::LogisticDecreasing {
                beta_min,
                beta_max,
                steepness,
                midpoint,
            } => (beta_max - beta_min) * (1.0 - logistic(steepness * (t - midpoint))),
        }
    }

    /// Upper bound of `rate` over all times.
    pub fn peak_rate(&self) -> f64 {
        match *self {
            SpreadingProfile::Constant { beta } => beta,
            SpreadingProfile::LogisticIncreasing { beta_max, .. } => beta_max,
            SpreadingProfile::LogisticDecreasing { beta_min, beta_max, .. } => beta_max - beta_min,
        }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Free function form of [`SpreadingProfile::rate`].
pub fn eval_spreading_rate(profile: &SpreadingProfile, t: f64) -> f64 {
    profile.rate(t)
}

/// Epidemic parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpidemicParams {
    pub profile: SpreadingProfile,
    /// Recovery rate.
    pub gamma: f64,
    /// Control effectiveness on stiflers relative to ignorants.
    pub alpha: f64,
    /// Initial spreader fraction.
    pub s0: f64,
    /// Campaign horizon.
    pub horizon: f64,
}

impl EpidemicParams {
    pub fn new(profile: SpreadingProfile, gamma: f64, alpha: f64, s0: f64, horizon: f64) -> Result<Self> {
        let p = EpidemicParams {
            profile,
            gamma,
            alpha,
            s0,
            horizon,
        };
        p.validate()?;
        Ok(p)
    }

    /// `s0` in {0, 1} is rejected: either nothing spreads or nobody is left to reach.
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::param(
                "gamma",
                format!("must be finite and >= 0, got {}", self.gamma),
            ));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(Error::param(
                "alpha",
                format!("must be finite and >= 0, got {}", self.alpha),
            ));
        }
        if !(self.s0 > 0.0 && self.s0 < 1.0) {
            return Err(Error::param("s0", format!("must lie in (0, 1), got {}", self.s0)));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::param(
                "T",
                format!("must be finite and > 0, got {}", self.horizon),
            ));
        }
        Ok(())
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.profile.rate(t)
    }

    pub fn initial_state(&self) -> State {
        State {
            i: 1.0 - self.s0,
            s: self.s0,
        }
    }
}

/// Ignorant and spreader fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub i: f64,
    pub s: f64,
}

impl State {
    pub fn new(i: f64, s: f64) -> Result<Self> {
        if !(i >= 0.0 && s >= 0.0 && i + s <= 1.0) {
            return Err(Error::param(
                "state",
                format!("need i, s >= 0 and i + s <= 1, got ({i}, {s})"),
            ));
        }
        Ok(State { i, s })
    }

    /// Stifler fraction.
    pub fn r(&self) -> f64 {
        1.0 - self.i - self.s
    }
}

/// Right-hand side of the controlled system: `(di/dt, ds/dt)`.
#[inline]
pub fn controlled_rhs(x: State, t: f64, u: f64, p: &EpidemicParams) -> (f64, f64) {
    let beta = p.beta(t);
    let is = x.i * x.s;
    let di = -beta * is - u * x.i;
    let ds = (beta + p.gamma) * is - p.gamma * x.s + u * x.i + p.alpha * u * (1.0 - x.i - x.s);
    (di, ds)
}

/// Right-hand side with no campaign.
#[inline]
pub fn uncontrolled_rhs(x: State, t: f64, p: &EpidemicParams) -> (f64, f64) {
    controlled_rhs(x, t, 0.0, p)
}

/// The uncontrolled system written with all three compartments, `(di, ds, dr)`.
///
/// Used to check conservation independently of the reduced form.
#[inline]
pub fn uncontrolled_rhs_full(i: f64, s: f64, r: f64, t: f64, p: &EpidemicParams) -> (f64, f64, f64) {
    let beta = p.beta(t);
    let recover = p.gamma * s * (s + r);
    (-beta * i * s, beta * i * s - recover, recover)
}
