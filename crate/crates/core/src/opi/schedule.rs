//! Step-size schedules.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("scale {0} must lie in (0, 1]")]
    Scale(f64),
    #[error("exponent {0} must lie in (0.5, 1]")]
    Exponent(f64),
    #[error("cannot parse step family {0:?}; expected harmonic:C or power:C,R")]
    Syntax(String),
}

/// `β(k) = c / (k+1)^ρ`.
///
/// Both families are nonincreasing, with `Σβ = ∞` and `Σβ² < ∞` because
/// `ρ > 1/2`, and `c ≤ 1` keeps every step in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepFamily {
    Harmonic { scale: f64 },
    PowerLaw { scale: f64, exponent: f64 },
}

impl StepFamily {
    pub fn harmonic(scale: f64) -> Result<Self, ScheduleError> {
        let f = StepFamily::Harmonic { scale };
        f.validate()?;
        Ok(f)
    }

    pub fn power_law(scale: f64, exponent: f64) -> Result<Self, ScheduleError> {
        let f = StepFamily::PowerLaw { scale, exponent };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let (scale, exponent) = match *self {
            StepFamily::Harmonic { scale } => (scale, 1.0),
            StepFamily::PowerLaw { scale, exponent } => (scale, exponent),
        };
        if !(scale > 0.0 && scale <= 1.0) {
            return Err(ScheduleError::Scale(scale));
        }
        if !(exponent > 0.5 && exponent <= 1.0) {
            return Err(ScheduleError::Exponent(exponent));
        }
        Ok(())
    }

    #[inline]
    pub fn beta(&self, k: usize) -> f64 {
        match *self {
            StepFamily::Harmonic { scale } => scale / (k as f64 + 1.0),
            StepFamily::PowerLaw { scale, exponent } => scale / (k as f64 + 1.0).powf(exponent),
        }
    }
}

impl FromStr for StepFamily {
    type Err = ScheduleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let syntax = || ScheduleError::Syntax(s.to_string());
        let (kind, args) = s.split_once(':').ok_or_else(syntax)?;
        match kind {
            "harmonic" => StepFamily::harmonic(args.trim().parse().map_err(|_| syntax())?),
            "power" => {
                let (c, r) = args.split_once(',').ok_or_else(syntax)?;
                StepFamily::power_law(
                    c.trim().parse().map_err(|_| syntax())?,
                    r.trim().parse().map_err(|_| syntax())?,
                )
            }
            _ => Err(syntax()),
        }
    }
}

impl fmt::Display for StepFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepFamily::Harmonic { scale } => write!(f, "harmonic:{scale}"),
            StepFamily::PowerLaw { scale, exponent } => write!(f, "power:{scale},{exponent}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleMode {
    /// `γ_t(i) = β(t)`
    TimeBased,
    /// `γ_t(i) = β(n_t(i))`, with `n_t(i)` the number of earlier updates of i
    VisitBased,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub mode: ScheduleMode,
    pub family: StepFamily,
}

impl StepSchedule {
    pub fn new(mode: ScheduleMode, family: StepFamily) -> Result<Self, ScheduleError> {
        family.validate()?;
        Ok(StepSchedule { mode, family })
    }

    /// `1/(n_t(i)+1)`.
    pub fn visit_harmonic() -> Self {
        StepSchedule {
            mode: ScheduleMode::VisitBased,
            family: StepFamily::Harmonic { scale: 1.0 },
        }
    }

    /// `1/(t+1)`.
    pub fn time_harmonic() -> Self {
        StepSchedule {
            mode: ScheduleMode::TimeBased,
            family: StepFamily::Harmonic { scale: 1.0 },
        }
    }

    pub fn beta(&self, k: usize) -> f64 {
        self.family.beta(k)
    }

    /// Step for a parameter updated at iteration `t` after `visits` earlier
    /// updates.
    #[inline]
    pub fn step_size(&self, t: usize, visits: usize) -> f64 {
        match self.mode {
            ScheduleMode::TimeBased => self.family.beta(t),
            ScheduleMode::VisitBased => self.family.beta(visits),
        }
    }

    pub fn label(&self) -> String {
        let mode = match self.mode {
            ScheduleMode::TimeBased => "time",
            ScheduleMode::VisitBased => "visit",
        };
        format!("{mode}-{}", self.family)
    }
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::visit_harmonic()
    }
}
