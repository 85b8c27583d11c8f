use std::fmt;
use std::sync::Arc;

use super::regime::Regime;
use super::schema::{FieldRef, ORIGINATION_FIELDS, PERFORMANCE_FIELDS};

/// One parsed cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Num(f64),
    Text(String),
    Missing,
}

impl Value {
    pub fn is_missing(&self) -> bool {
        matches!(self, Value::Missing)
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_text(&self) -> Option<&str> {
        match self {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for Value {
    /// Pipe-file representation: shortest round-trip float, raw text, or blank.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(v) => write!(f, "{v}"),
            Value::Text(s) => f.write_str(s),
            Value::Missing => Ok(()),
        }
    }
}

/// Reason a loan balance reached zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ZeroBalanceCode {
    /// Blank: still active.
    NotApplicable,
    /// 01: prepaid or matured.
    Prepaid,
    /// 03: foreclosure alternative group (short sale, third-party sale, charge off, note sale).
    ForeclosureAlternative,
    /// 06: repurchase prior to property disposition.
    Repurchase,
    /// 09: REO disposition.
    ReoDisposition,
}

impl ZeroBalanceCode {
    /// Parses the raw field. Unknown codes are rejected.
    pub fn parse(raw: &str) -> Option<Self> {
        match raw.trim() {
            "" => Some(Self::NotApplicable),
            "01" => Some(Self::Prepaid),
            "03" => Some(Self::ForeclosureAlternative),
            "06" => Some(Self::Repurchase),
            "09" => Some(Self::ReoDisposition),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NotApplicable => "",
            Self::Prepaid => "01",
            Self::ForeclosureAlternative => "03",
            Self::Repurchase => "06",
            Self::ReoDisposition => "09",
        }
    }

    /// 03, 06 and 09 mark a default.
    pub fn is_default(self) -> bool {
        matches!(self, Self::ForeclosureAlternative | Self::Repurchase | Self::ReoDisposition)
    }

    pub const ALL: [ZeroBalanceCode; 5] =
        [Self::NotApplicable, Self::Prepaid, Self::ForeclosureAlternative, Self::Repurchase, Self::ReoDisposition];
}

#[derive(Debug, Clone, PartialEq)]
pub struct OriginationRecord {
    pub loan_sequence_number: String,
    /// One value per origination field, in layout order.
    pub values: Vec<Value>,
}

impl OriginationRecord {
    pub fn get(&self, name: &str) -> Option<&Value> {
        ORIGINATION_FIELDS.iter().position(|d| d.name == name).map(|i| &self.values[i])
    }

    pub fn to_line(&self) -> String {
        join_line(&self.values)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceRecord {
    pub loan_sequence_number: String,
    pub zero_balance_code: ZeroBalanceCode,
    /// One value per performance field, in layout order.
    pub values: Vec<Value>,
}

impl PerformanceRecord {
    pub fn get(&self, name: &str) -> Option<&Value> {
        PERFORMANCE_FIELDS.iter().position(|d| d.name == name).map(|i| &self.values[i])
    }

    pub fn to_line(&self) -> String {
        join_line(&self.values)
    }
}

fn join_line(values: &[Value]) -> String {
    let mut line = String::new();
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            line.push('|');
        }
        line.push_str(&v.to_string());
    }
    line
}

/// A performance row joined with its origination row, plus the engineered label.
#[derive(Debug, Clone, PartialEq)]
pub struct LoanRecord {
    /// Dense customer index within the vintage (origination file order).
    pub customer: u32,
    pub origination: Arc<OriginationRecord>,
    pub performance: PerformanceRecord,
    pub defaulted: bool,
    pub vintage_year: u16,
    pub regime: Regime,
}

impl LoanRecord {
    pub fn field(&self, field: FieldRef) -> &Value {
        match field {
            FieldRef::Origination(i) => &self.origination.values[i],
            FieldRef::Performance(i) => &self.performance.values[i],
        }
    }

    pub fn loan_sequence_number(&self) -> &str {
        &self.origination.loan_sequence_number
    }
}
