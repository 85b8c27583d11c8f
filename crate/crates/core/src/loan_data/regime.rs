use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

pub const FIRST_VINTAGE: u16 = 1999;
pub const LAST_VINTAGE: u16 = 2017;

/// Default-rate regime of an origination vintage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Regime {
    Low,
    Medium,
    High,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Low, Regime::Medium, Regime::High];

    /// Inclusive vintage years covered by the regime.
    pub fn years(self) -> std::ops::RangeInclusive<u16> {
        match self {
            Regime::Medium => 1999..=2004,
            Regime::High => 2005..=2010,
            Regime::Low => 2011..=2017,
        }
    }

    /// Average share of defaulted rows after joining origination and performance rows.
    pub fn joined_default_rate(self) -> f64 {
        match self {
            Regime::Medium => 0.0005,
            Regime::High => 0.0009,
            Regime::Low => 0.0001,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Low => "Low",
            Regime::Medium => "Medium",
            Regime::High => "High",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Regime::Low),
            "medium" => Ok(Regime::Medium),
            "high" => Ok(Regime::High),
            other => Err(format!("unknown regime `{other}`")),
        }
    }
}

/// 1999–2004 Medium, 2005–2010 High, 2011–2017 Low.
pub fn assign_regime(vintage_year: u16) -> Result<Regime, DataError> {
    match vintage_year {
        1999..=2004 => Ok(Regime::Medium),
        2005..=2010 => Ok(Regime::High),
        2011..=2017 => Ok(Regime::Low),
        other => Err(DataError::VintageOutOfRange(other)),
    }
}
