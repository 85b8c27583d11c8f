//! Synthetic vintages in the loan-level file layout.
//!
//! Each customer gets one origination line and a run of monthly performance lines.
//! Four origination fields carry the signal: a customer's default propensity is a
//! logistic score of standardized credit score (negative weight), loan-to-value,
//! debt-to-income and interest rate (positive weights). Exactly
//! `round(default_rate * rows)` customers default, drawn without replacement with
//! probability proportional to the exponentiated score (Gumbel top-k).
//!
//! A defaulting customer falls 3 to 8 months behind before the terminal row, which
//! carries zero-balance code 03, 06 or 09. Around 30% of the other customers prepay
//! (code 01 on their last row) and a few go through a short delinquency and cure.
//! Loss and recovery fields stay blank, so after cleaning they carry no signal.

use std::path::Path;

use rand::Rng;
use serde::Serialize;

use super::BenchError;
use crate::loan_data::{
    assign_regime, vintage_paths, OriginationRecord, PerformanceRecord, Regime, Value, ZeroBalanceCode,
    ORIGINATION_FIELDS, PERFORMANCE_FIELDS,
};
use crate::rng::{derive_indexed, rng_from_seed, StageRng};

/// Weights of the standardized credit score, loan-to-value, debt-to-income and rate.
pub const SIGNAL_WEIGHTS: [f64; 4] = [-1.4, 1.0, 0.7, 0.7];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SyntheticSpec {
    pub year: u16,
    pub customers: usize,
    /// Mean performance rows per customer; each customer gets between 2/3 and 4/3 of it.
    pub rows_per_customer: usize,
    /// Share of performance rows that carry a default code.
    pub default_rate: f64,
    /// How many of the four signal fields influence default (0 to 4).
    pub informative_features: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// The regime's average joined-row default rate for `year`.
    pub fn regime_preset(year: u16, customers: usize, seed: u64) -> Result<Self, BenchError> {
        let regime = assign_regime(year).map_err(|e| BenchError::Config(e.to_string()))?;
        Ok(Self {
            year,
            customers,
            rows_per_customer: 45,
            default_rate: regime.joined_default_rate(),
            informative_features: 4,
            seed,
        })
    }

    pub fn regime(&self) -> Result<Regime, BenchError> {
        assign_regime(self.year).map_err(|e| BenchError::Config(e.to_string()))
    }

    fn validate(&self) -> Result<(), BenchError> {
        self.regime()?;
        let bad = |m: String| Err(BenchError::Config(m));
        if self.customers == 0 {
            return bad("customers must be at least 1".into());
        }
        if self.rows_per_customer < 12 {
            return bad("rows_per_customer must be at least 12".into());
        }
        if !(0.0..1.0).contains(&self.default_rate) {
            return bad(format!("default_rate {} is not in [0, 1)", self.default_rate));
        }
        if self.informative_features > 4 {
            return bad("informative_features must be at most 4".into());
        }
        Ok(())
    }
}

/// Box-Muller draw from N(0, 1).
fn standard_normal(rng: &mut StageRng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn pick<'a>(rng: &mut StageRng, options: &[&'a str]) -> &'a str {
    options[rng.gen_range(0..options.len())]
}

fn text(s: &str) -> Value {
    Value::Text(s.to_string())
}

fn round_to(v: f64, step: f64) -> f64 {
    (v / step).round() * step
}

fn month_add(yyyymm: u32, months: u32) -> f64 {
    let (y, m) = (yyyymm / 100, yyyymm % 100 - 1 + months);
    f64::from((y + m / 12) * 100 + m % 12 + 1)
}

struct Customer {
    z: [f64; 4],
    rows: usize,
}

/// Origination and performance records for one synthetic vintage, in file order.
pub fn synthesize(spec: &SyntheticSpec) -> Result<(Vec<OriginationRecord>, Vec<PerformanceRecord>), BenchError> {
    spec.validate()?;
    let mut rng = rng_from_seed(derive_indexed(spec.seed, "synthetic", u64::from(spec.year)));
    let (lo, hi) = (spec.rows_per_customer * 2 / 3, spec.rows_per_customer * 4 / 3);
    let customers: Vec<Customer> = (0..spec.customers)
        .map(|_| Customer {
            z: [standard_normal(&mut rng), standard_normal(&mut rng), standard_normal(&mut rng), standard_normal(&mut rng)],
            rows: rng.gen_range(lo..=hi),
        })
        .collect();
    let total_rows: usize = customers.iter().map(|c| c.rows).sum();
    let n_default = ((spec.default_rate * total_rows as f64).round() as usize).min(spec.customers);

    // Gumbel top-k: sampling without replacement proportional to exp(score).
    let mut keys: Vec<(f64, usize)> = customers
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let score: f64 = c.z.iter().zip(SIGNAL_WEIGHTS).take(spec.informative_features).map(|(z, w)| z * w).sum();
            let u: f64 = 1.0 - rng.gen::<f64>();
            (score - (-u.ln()).ln(), i)
        })
        .collect();
    keys.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut defaults = vec![false; spec.customers];
    for &(_, i) in &keys[..n_default] {
        defaults[i] = true;
    }

    let yy = spec.year % 100;
    let mut origination = Vec::with_capacity(spec.customers);
    let mut performance = Vec::with_capacity(total_rows);
    for (i, (c, &defaults_here)) in customers.iter().zip(&defaults).enumerate() {
        let key = format!("F{yy:02}Q{}{:06}", i % 4 + 1, i);
        let credit = (740.0 + 45.0 * c.z[0]).round().clamp(300.0, 850.0);
        let ltv = (75.0 + 12.0 * c.z[1]).round().clamp(5.0, 100.0);
        let dti = (34.0 + 9.0 * c.z[2]).round().clamp(1.0, 65.0);
        let rate = round_to(6.0 + 0.8 * c.z[3], 0.125).max(1.0);
        let upb = round_to((11.8 + 0.5 * standard_normal(&mut rng)).exp(), 1000.0).max(10_000.0);
        let term = if rng.gen_bool(0.85) { 360u32 } else { 180 };
        let first_payment = u32::from(spec.year) * 100 + rng.gen_range(1..=12);

        let mut o = vec![Value::Missing; ORIGINATION_FIELDS.len()];
        o[0] = Value::Num(credit);
        o[1] = Value::Num(f64::from(first_payment));
        o[2] = text(if rng.gen_bool(0.15) { "Y" } else { "N" });
        o[3] = Value::Num(month_add(first_payment, term - 1));
        if rng.gen_bool(0.9) {
            o[4] = text(pick(&mut rng, &["12060", "16980", "19100", "26420", "31080", "35620"]));
        }
        o[5] = Value::Num(if ltv <= 80.0 {
            0.0
        } else if rng.gen_bool(0.5) {
            25.0
        } else {
            30.0
        });
        o[6] = Value::Num(if rng.gen_bool(0.95) { 1.0 } else { 2.0 });
        o[7] = text(pick(&mut rng, &["P", "P", "P", "P", "P", "P", "P", "P", "I", "S"]));
        o[8] = Value::Num(if rng.gen_bool(0.1) { (ltv + 5.0).min(105.0) } else { ltv });
        o[9] = Value::Num(dti);
        o[10] = Value::Num(upb);
        o[11] = Value::Num(ltv);
        o[12] = Value::Num(rate);
        o[13] = text(pick(&mut rng, &["R", "R", "B", "C", "T"]));
        o[14] = text("N");
        o[15] = text("FRM");
        o[16] = text(pick(&mut rng, &["CA", "TX", "FL", "NY", "IL", "PA", "OH", "GA", "NC", "MI"]));
        o[17] = text(pick(&mut rng, &["SF", "SF", "SF", "PU", "CO", "MH"]));
        o[18] = text(&format!("{}00", rng.gen_range(100..1000)));
        o[19] = text(&key);
        o[20] = text(pick(&mut rng, &["P", "C", "N"]));
        o[21] = Value::Num(f64::from(term));
        o[22] = Value::Num(if rng.gen_bool(0.55) { 2.0 } else { 1.0 });
        o[23] = text(pick(&mut rng, &["Other sellers", "Bank A", "Bank B", "Lender C", "Lender D"]));
        o[24] = text(pick(&mut rng, &["Other servicers", "Servicer A", "Servicer B", "Servicer C"]));
        if rng.gen_bool(0.02) {
            o[25] = text("Y");
        }
        origination.push(OriginationRecord { loan_sequence_number: key.clone(), values: o });

        // Delinquency months per row and the terminal code.
        let mut delinquency = vec![0u32; c.rows];
        let terminal = if defaults_here {
            let behind = rng.gen_range(3..=8usize).min(c.rows - 1);
            for (j, d) in delinquency[c.rows - behind..].iter_mut().enumerate() {
                *d = j as u32 + 1;
            }
            pick(&mut rng, &["03", "06", "09"])
        } else {
            if rng.gen_bool(0.04) {
                let start = rng.gen_range(0..c.rows - 3);
                let len = rng.gen_range(1..=2);
                for (j, d) in delinquency[start..start + len].iter_mut().enumerate() {
                    *d = j as u32 + 1;
                }
            }
            if rng.gen_bool(0.3) {
                "01"
            } else {
                ""
            }
        };
        let code = ZeroBalanceCode::parse(terminal).expect("known code");
        for (t, &behind) in delinquency.iter().enumerate() {
            let last = t + 1 == c.rows;
            let period = month_add(first_payment, t as u32);
            let mut p = vec![Value::Missing; PERFORMANCE_FIELDS.len()];
            p[0] = text(&key);
            p[1] = Value::Num(period);
            let paid = upb * (1.0 - (t as f64 - f64::from(behind)).max(0.0) / f64::from(term));
            p[2] = Value::Num(if last && code == ZeroBalanceCode::Prepaid { 0.0 } else { round_to(paid, 0.01) });
            p[3] = text(&behind.to_string());
            p[4] = Value::Num(t as f64);
            p[5] = Value::Num(f64::from(term) - t as f64);
            let row_code = if last { code } else { ZeroBalanceCode::NotApplicable };
            if row_code != ZeroBalanceCode::NotApplicable {
                p[8] = text(row_code.as_str());
                p[9] = Value::Num(period);
            }
            p[10] = Value::Num(rate);
            p[11] = Value::Num(0.0);
            performance.push(PerformanceRecord { loan_sequence_number: key.clone(), zero_balance_code: row_code, values: p });
        }
    }
    Ok((origination, performance))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratedVintage {
    pub year: u16,
    pub customers: usize,
    pub rows: usize,
    pub defaulted_rows: usize,
}

impl GeneratedVintage {
    pub fn default_rate(&self) -> f64 {
        self.defaulted_rows as f64 / self.rows as f64
    }
}

/// Writes `sample_{year}/sample_orig_{year}.txt` and `sample_svcg_{year}.txt` under `dir`.
pub fn generate_synthetic(spec: &SyntheticSpec, dir: &Path) -> Result<GeneratedVintage, BenchError> {
    let (origination, performance) = synthesize(spec)?;
    let (orig_path, perf_path) = vintage_paths(dir, spec.year);
    let write = |path: &Path, lines: Vec<String>| -> Result<(), BenchError> {
        let out = |source| BenchError::Output { path: path.to_path_buf(), source };
        std::fs::create_dir_all(path.parent().expect("vintage file has a parent")).map_err(out)?;
        let mut body = lines.join("\n");
        body.push('\n');
        std::fs::write(path, body).map_err(out)
    };
    write(&orig_path, origination.iter().map(OriginationRecord::to_line).collect())?;
    write(&perf_path, performance.iter().map(PerformanceRecord::to_line).collect())?;
    Ok(GeneratedVintage {
        year: spec.year,
        customers: origination.len(),
        rows: performance.len(),
        defaulted_rows: performance.iter().filter(|p| p.zero_balance_code.is_default()).count(),
    })
}
