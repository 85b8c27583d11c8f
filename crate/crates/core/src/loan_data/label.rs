use std::collections::HashMap;
use std::sync::Arc;

use serde::Serialize;

use super::record::{LoanRecord, OriginationRecord, PerformanceRecord};
use super::regime::assign_regime;
use super::DataError;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct JoinReport {
    pub joined_rows: usize,
    /// Performance rows without a matching origination row; dropped.
    pub orphan_rows: usize,
    pub defaulted_rows: usize,
    pub customers: usize,
    pub defaulted_customers: usize,
}

/// Concatenates every performance row with its origination row and labels it.
///
/// The label sits on the individual performance row: it is 1 exactly when that
/// row's zero-balance code is 03, 06 or 09. Customer ids follow origination
/// file order; output rows keep performance file order.
pub fn join_and_label(
    origination: Vec<OriginationRecord>,
    performance: Vec<PerformanceRecord>,
    vintage_year: u16,
) -> Result<(Vec<LoanRecord>, JoinReport), DataError> {
    let regime = assign_regime(vintage_year)?;
    let mut report = JoinReport { customers: origination.len(), ..Default::default() };
    let mut by_key: HashMap<String, (u32, Arc<OriginationRecord>)> = HashMap::with_capacity(origination.len());
    for (i, record) in origination.into_iter().enumerate() {
        by_key.insert(record.loan_sequence_number.clone(), (i as u32, Arc::new(record)));
    }

    let mut defaulted_customers = std::collections::HashSet::new();
    let mut joined = Vec::with_capacity(performance.len());
    for row in performance {
        let Some((customer, orig)) = by_key.get(&row.loan_sequence_number) else {
            report.orphan_rows += 1;
            continue;
        };
        let defaulted = row.zero_balance_code.is_default();
        if defaulted {
            report.defaulted_rows += 1;
            defaulted_customers.insert(*customer);
        }
        joined.push(LoanRecord {
            customer: *customer,
            origination: Arc::clone(orig),
            performance: row,
            defaulted,
            vintage_year,
            regime,
        });
    }
    report.joined_rows = joined.len();
    report.defaulted_customers = defaulted_customers.len();
    Ok((joined, report))
}
