use std::collections::HashSet;

use serde::Serialize;

use super::record::{OriginationRecord, PerformanceRecord, Value};
use super::schema::{FieldDef, FieldKind, NOT_AVAILABLE, ORIGINATION_FIELDS, PERFORMANCE_FIELDS, REQUIRED_FIELDS};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CleanReport {
    /// Loans dropped for a blank required field.
    pub dropped_loans: usize,
    /// Performance rows belonging to dropped loans.
    pub dropped_performance_rows: usize,
    pub imputed_nominal_cells: usize,
    pub imputed_numeric_cells: usize,
}

/// Drops loans missing a required field (and their performance rows), then
/// fills remaining blanks: nominal cells become "Not Available", numeric cells 0.
pub fn clean(
    origination: Vec<OriginationRecord>,
    performance: Vec<PerformanceRecord>,
) -> (Vec<OriginationRecord>, Vec<PerformanceRecord>, CleanReport) {
    let mut report = CleanReport::default();
    let required: Vec<usize> = REQUIRED_FIELDS
        .iter()
        .map(|name| ORIGINATION_FIELDS.iter().position(|d| d.name == *name).expect("required field in layout"))
        .collect();

    let mut dropped = HashSet::new();
    let mut kept_orig = Vec::with_capacity(origination.len());
    for mut record in origination {
        if required.iter().any(|&i| record.values[i].is_missing()) {
            dropped.insert(record.loan_sequence_number);
            continue;
        }
        impute(&ORIGINATION_FIELDS, &mut record.values, &mut report);
        kept_orig.push(record);
    }
    report.dropped_loans = dropped.len();

    let mut kept_perf = Vec::with_capacity(performance.len());
    for mut record in performance {
        if dropped.contains(&record.loan_sequence_number) {
            report.dropped_performance_rows += 1;
            continue;
        }
        impute(&PERFORMANCE_FIELDS, &mut record.values, &mut report);
        kept_perf.push(record);
    }
    (kept_orig, kept_perf, report)
}

fn impute(layout: &[FieldDef], values: &mut [Value], report: &mut CleanReport) {
    for (def, value) in layout.iter().zip(values.iter_mut()) {
        if !value.is_missing() {
            continue;
        }
        match def.kind {
            // The zero-balance code keeps its blank: blank means "not applicable".
            FieldKind::ZeroBalance | FieldKind::Key => {}
            FieldKind::Nominal | FieldKind::Identifier => {
                *value = Value::Text(NOT_AVAILABLE.to_string());
                report.imputed_nominal_cells += 1;
            }
            FieldKind::Numeric | FieldKind::Date => {
                *value = Value::Num(0.0);
                report.imputed_numeric_cells += 1;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loan_data::parse::parse_vintage;

    fn orig(key: &str, credit: &str, property_type: &str) -> String {
        let mut f = vec![""; 27];
        f[0] = credit;
        f[9] = "35";
        f[11] = "80";
        f[12] = "6.5";
        f[17] = property_type;
        f[19] = key;
        f.join("|")
    }

    fn perf(key: &str) -> String {
        let mut f = vec![""; 23];
        f[0] = key;
        f[2] = "1000";
        f.join("|")
    }

    #[test]
    fn blank_credit_score_drops_the_loan_and_its_rows() {
        let o = format!("{}\n{}", orig("A", "", "SF"), orig("B", "700", "SF"));
        let p = format!("{}\n{}\n{}", perf("A"), perf("A"), perf("B"));
        let parsed = parse_vintage(o.as_bytes(), p.as_bytes()).unwrap();
        let (o, p, report) = clean(parsed.origination, parsed.performance);
        assert_eq!(o.len(), 1);
        assert_eq!(o[0].loan_sequence_number, "B");
        assert_eq!(p.len(), 1);
        assert_eq!(report.dropped_loans, 1);
        assert_eq!(report.dropped_performance_rows, 2);
    }

    #[test]
    fn blank_nominal_becomes_not_available() {
        let parsed = parse_vintage(orig("B", "700", "").as_bytes(), &b""[..]).unwrap();
        let (o, _, report) = clean(parsed.origination, parsed.performance);
        assert_eq!(o[0].get("propertyType"), Some(&Value::Text(NOT_AVAILABLE.into())));
        assert!(report.imputed_nominal_cells > 0);
    }

    #[test]
    fn blank_numeric_becomes_zero() {
        let parsed = parse_vintage(orig("B", "700", "SF").as_bytes(), perf("B").as_bytes()).unwrap();
        let (o, p, _) = clean(parsed.origination, parsed.performance);
        assert_eq!(p[0].get("miRecoveries"), Some(&Value::Num(0.0)));
        assert_eq!(p[0].get("zeroBalanceCode"), Some(&Value::Missing));
        assert!(o[0].values.iter().all(|v| !v.is_missing()));
    }
}
