use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ExpertError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Style {
    Conservative,
    Neutral,
    Aggressive,
    Custom(String),
}

impl Style {
    pub fn name(&self) -> &str {
        match self {
            Style::Conservative => "conservative",
            Style::Neutral => "neutral",
            Style::Aggressive => "aggressive",
            Style::Custom(name) => name,
        }
    }
}

impl fmt::Display for Style {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Style {
    type Err = ExpertError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "conservative" => Ok(Style::Conservative),
            "neutral" => Ok(Style::Neutral),
            "aggressive" => Ok(Style::Aggressive),
            _ => Err(ExpertError::UnknownStyle(s.to_string())),
        }
    }
}

/// One driving style: the preferences an expert (and the ego's low-level
/// controller) applies when merging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub style: Style,
    /// Minimum acceptable time gap to both neighbors of a merge gap, seconds.
    pub min_gap: f64,
    /// Upper acceleration limit, m/s^2.
    pub max_accel: f64,
    /// Lower acceleration limit (negative), m/s^2.
    pub min_accel: f64,
    /// Preferred cruising speed, m/s.
    pub target_speed: f64,
    /// Steps of constant-speed lookahead over which a merge gap must stay
    /// acceptable before the expert commits to it.
    pub commit_patience: u32,
}

impl TaskSpec {
    pub fn conservative() -> Self {
        Self {
            style: Style::Conservative,
            min_gap: 2.0,
            max_accel: 2.0,
            min_accel: -2.0,
            target_speed: 26.0,
            commit_patience: 10,
        }
    }

    pub fn neutral() -> Self {
        Self {
            style: Style::Neutral,
            min_gap: 1.2,
            max_accel: 3.0,
            min_accel: -3.0,
            target_speed: 30.0,
            commit_patience: 6,
        }
    }

    pub fn aggressive() -> Self {
        Self {
            style: Style::Aggressive,
            min_gap: 0.6,
            max_accel: 4.5,
            min_accel: -4.5,
            target_speed: 34.0,
            commit_patience: 2,
        }
    }

    /// Built-in style by name.
    pub fn builtin(name: &str) -> Result<Self, ExpertError> {
        Ok(match name.parse::<Style>()? {
            Style::Conservative => Self::conservative(),
            Style::Neutral => Self::neutral(),
            Style::Aggressive => Self::aggressive(),
            Style::Custom(_) => unreachable!("FromStr never yields custom styles"),
        })
    }

    pub fn name(&self) -> &str {
        self.style.name()
    }

    pub fn validate(&self) -> Result<(), ExpertError> {
        let ok = self.min_gap > 0.0
            && self.max_accel > 0.0
            && self.min_accel < 0.0
            && self.target_speed > 0.0
            && [self.min_gap, self.max_accel, self.min_accel, self.target_speed]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(ExpertError::InvalidTask(format!("{self:?}")))
        }
    }
}
