//! Field layout of the single-family loan-level files.
//!
//! Column positions follow the published origination (27 fields) and monthly
//! performance (23 fields) layouts in file order.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Join key (`loanSequenceNumber`).
    Key,
    /// Opaque identifier that is never a model feature.
    Identifier,
    Numeric,
    Nominal,
    /// `YYYYMM` date. Dates are never model features.
    Date,
    /// `zeroBalanceCode`: the source of the label, never a feature.
    ZeroBalance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FieldDef {
    pub name: &'static str,
    pub kind: FieldKind,
}

const fn f(name: &'static str, kind: FieldKind) -> FieldDef {
    FieldDef { name, kind }
}

use FieldKind::*;

pub const ORIGINATION_FIELDS: [FieldDef; 27] = [
    f("creditScore", Numeric),
    f("firstPaymentDate", Date),
    f("firstTimeHomeBuyerFlag", Nominal),
    f("maturityDate", Date),
    f("metropolitanDivisionOrMSA", Nominal),
    f("mortgageInsurancePercentage", Numeric),
    f("numberOfUnits", Numeric),
    f("occupancyStatus", Nominal),
    f("originalCombinedLoanToValue", Numeric),
    f("originalDebtToIncomeRatio", Numeric),
    f("originalUPB", Numeric),
    f("originalLoanToValue", Numeric),
    f("originalInterestRate", Numeric),
    f("channel", Nominal),
    f("prepaymentPenaltyMortgageFlag", Nominal),
    f("productType", Nominal),
    f("propertyState", Nominal),
    f("propertyType", Nominal),
    f("postalCode", Nominal),
    f("loanSequenceNumber", Key),
    f("loanPurpose", Nominal),
    f("originalLoanTerm", Numeric),
    f("numberOfBorrowers", Numeric),
    f("sellerName", Nominal),
    f("servicerName", Nominal),
    f("superConformingFlag", Nominal),
    f("preHarpLoanSequenceNumber", Identifier),
];

pub const PERFORMANCE_FIELDS: [FieldDef; 23] = [
    f("loanSequenceNumber", Key),
    f("monthlyReportingPeriod", Date),
    f("currentActualUPB", Numeric),
    f("currentLoanDelinquencyStatus", Nominal),
    f("loanAge", Numeric),
    f("remainingMonthToLegalMaturity", Numeric),
    f("repurchaseFlag", Nominal),
    f("modificationFlag", Nominal),
    f("zeroBalanceCode", ZeroBalance),
    f("zeroBalanceEffectiveDate", Date),
    f("currentInterestRate", Numeric),
    f("currentDeferredUPB", Numeric),
    f("dueDateOfLastPaidInstallment", Date),
    f("miRecoveries", Numeric),
    f("netSalesProceeds", Numeric),
    f("nonMiRecoveries", Numeric),
    f("expenses", Numeric),
    f("legalCosts", Numeric),
    f("maintenanceAndPreservationCosts", Numeric),
    f("taxesAndInsurance", Numeric),
    f("miscellaneousExpenses", Numeric),
    f("actualLossCalculation", Numeric),
    f("modificationCost", Numeric),
];

/// Origination fields whose absence drops the loan during cleaning.
pub const REQUIRED_FIELDS: [&str; 4] =
    ["creditScore", "originalLoanToValue", "originalDebtToIncomeRatio", "originalInterestRate"];

pub(crate) const ORIGINATION_KEY: usize = 19;
pub(crate) const PERFORMANCE_KEY: usize = 0;
pub(crate) const ZERO_BALANCE_CODE: usize = 8;

/// Category that replaces blank nominal cells.
pub const NOT_AVAILABLE: &str = "Not Available";

/// Where a joined-record field lives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRef {
    Origination(usize),
    Performance(usize),
}

impl FieldRef {
    pub fn def(self) -> FieldDef {
        match self {
            FieldRef::Origination(i) => ORIGINATION_FIELDS[i],
            FieldRef::Performance(i) => PERFORMANCE_FIELDS[i],
        }
    }
}

/// Resolves a field name against the joined layout (origination first).
pub fn lookup(name: &str) -> Option<FieldRef> {
    ORIGINATION_FIELDS
        .iter()
        .position(|d| d.name == name)
        .map(FieldRef::Origination)
        .or_else(|| PERFORMANCE_FIELDS.iter().position(|d| d.name == name).map(FieldRef::Performance))
}

/// Every field that may be used as a model feature, in joined-layout order.
pub fn candidate_features() -> Vec<&'static str> {
    ORIGINATION_FIELDS
        .iter()
        .chain(PERFORMANCE_FIELDS.iter())
        .filter(|d| matches!(d.kind, Numeric | Nominal))
        .map(|d| d.name)
        .collect()
}
