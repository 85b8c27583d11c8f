//! Pipe-delimited parsing of one vintage's origination and performance files.

use std::collections::HashSet;
use std::io::{BufRead, BufReader, Read};

use super::record::{OriginationRecord, PerformanceRecord, Value, ZeroBalanceCode};
use super::schema::{FieldDef, FieldKind, ORIGINATION_FIELDS, ORIGINATION_KEY, PERFORMANCE_FIELDS, PERFORMANCE_KEY, ZERO_BALANCE_CODE};
use super::DataError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FileKind {
    Origination,
    Performance,
}

impl std::fmt::Display for FileKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FileKind::Origination => "origination",
            FileKind::Performance => "performance",
        })
    }
}

/// A line that could not be turned into a record.
#[derive(Debug, Clone, PartialEq)]
pub struct MalformedLine {
    pub file: FileKind,
    /// 1-based.
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Skip malformed lines (reporting them) instead of failing on the first one.
    pub lenient: bool,
}

#[derive(Debug, Clone, Default)]
pub struct ParsedVintage {
    pub origination: Vec<OriginationRecord>,
    pub performance: Vec<PerformanceRecord>,
    pub malformed: Vec<MalformedLine>,
}

/// Parses both files with strict options.
pub fn parse_vintage<O: Read, P: Read>(origination: O, performance: P) -> Result<ParsedVintage, DataError> {
    parse_vintage_with(origination, performance, ParseOptions::default())
}

pub fn parse_vintage_with<O: Read, P: Read>(
    origination: O,
    performance: P,
    options: ParseOptions,
) -> Result<ParsedVintage, DataError> {
    let mut parsed = ParsedVintage::default();
    let mut seen = HashSet::new();
    for_each_line(origination, FileKind::Origination, options, &mut parsed.malformed, |_, fields| {
        let values = parse_fields(&ORIGINATION_FIELDS, &fields)?;
        let key = key_of(&values, ORIGINATION_KEY)?;
        if !seen.insert(key.clone()) {
            return Err(format!("duplicate loanSequenceNumber `{key}`"));
        }
        parsed.origination.push(OriginationRecord { loan_sequence_number: key, values });
        Ok(())
    })?;
    for_each_line(performance, FileKind::Performance, options, &mut parsed.malformed, |_, fields| {
        let code = ZeroBalanceCode::parse(fields[ZERO_BALANCE_CODE])
            .ok_or_else(|| format!("unknown zeroBalanceCode `{}`", fields[ZERO_BALANCE_CODE].trim()))?;
        let values = parse_fields(&PERFORMANCE_FIELDS, &fields)?;
        let key = key_of(&values, PERFORMANCE_KEY)?;
        parsed.performance.push(PerformanceRecord { loan_sequence_number: key, zero_balance_code: code, values });
        Ok(())
    })?;
    Ok(parsed)
}

fn for_each_line<R: Read>(
    reader: R,
    file: FileKind,
    options: ParseOptions,
    malformed: &mut Vec<MalformedLine>,
    mut handle: impl FnMut(usize, Vec<&str>) -> Result<(), String>,
) -> Result<(), DataError> {
    let expected = match file {
        FileKind::Origination => ORIGINATION_FIELDS.len(),
        FileKind::Performance => PERFORMANCE_FIELDS.len(),
    };
    let mut reader = BufReader::new(reader);
    let mut buf = String::new();
    let mut line_no = 0;
    loop {
        buf.clear();
        let read = reader.read_line(&mut buf).map_err(|source| DataError::Io { file: file.to_string(), source })?;
        if read == 0 {
            break;
        }
        line_no += 1;
        let line = buf.trim_end_matches(['\n', '\r']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').collect();
        let outcome = if fields.len() != expected {
            Err(format!("expected {expected} fields, found {}", fields.len()))
        } else {
            handle(line_no, fields)
        };
        if let Err(reason) = outcome {
            if !options.lenient {
                return Err(DataError::Malformed { file: file.to_string(), line: line_no, reason });
            }
            malformed.push(MalformedLine { file, line: line_no, reason });
        }
    }
    Ok(())
}

fn parse_fields(layout: &[FieldDef], fields: &[&str]) -> Result<Vec<Value>, String> {
    layout
        .iter()
        .zip(fields)
        .map(|(def, raw)| {
            let raw = raw.trim();
            if raw.is_empty() {
                return Ok(Value::Missing);
            }
            match def.kind {
                FieldKind::Numeric | FieldKind::Date => match raw.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(Value::Num(v)),
                    // Net sales proceeds may be "C" (covered) or "U" (unknown).
                    _ if def.name == "netSalesProceeds" && matches!(raw, "C" | "U") => Ok(Value::Missing),
                    _ => Err(format!("unparseable numeric `{raw}` in field {}", def.name)),
                },
                _ => Ok(Value::Text(raw.to_string())),
            }
        })
        .collect()
}

fn key_of(values: &[Value], position: usize) -> Result<String, String> {
    match &values[position] {
        Value::Text(k) => Ok(k.clone()),
        _ => Err("empty loanSequenceNumber".to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn orig_line(key: &str, credit: &str) -> String {
        let mut f = vec![""; 27];
        f[0] = credit;
        f[1] = "200302";
        f[2] = "N";
        f[9] = "35";
        f[11] = "80";
        f[12] = "6.5";
        f[17] = "SF";
        f[19] = key;
        f.join("|")
    }

    fn perf_line(key: &str, code: &str) -> String {
        let mut f = vec![""; 23];
        f[0] = key;
        f[1] = "200305";
        f[2] = "150000";
        f[3] = "0";
        f[8] = code;
        f.join("|")
    }

    #[test]
    fn parses_zero_balance_code() {
        let orig = orig_line("F103Q1000001", "700");
        let perf = perf_line("F103Q1000001", "03");
        let parsed = parse_vintage(orig.as_bytes(), perf.as_bytes()).unwrap();
        assert_eq!(parsed.origination.len(), 1);
        assert_eq!(parsed.performance[0].zero_balance_code, ZeroBalanceCode::ForeclosureAlternative);
        assert_eq!(parsed.performance[0].zero_balance_code.as_str(), "03");
        assert_eq!(parsed.origination[0].get("creditScore"), Some(&Value::Num(700.0)));
        assert_eq!(parsed.origination[0].get("propertyType"), Some(&Value::Text("SF".into())));
        assert_eq!(parsed.origination[0].get("postalCode"), Some(&Value::Missing));
    }

    #[test]
    fn empty_files_are_fine() {
        let parsed = parse_vintage(&b""[..], &b""[..]).unwrap();
        assert!(parsed.origination.is_empty() && parsed.performance.is_empty() && parsed.malformed.is_empty());
    }

    #[test]
    fn short_line_names_its_line_number() {
        let good = perf_line("A", "");
        let short = vec![""; 22].join("|");
        let perf = format!("{good}\n{short}\n");
        let err = parse_vintage(orig_line("A", "700").as_bytes(), perf.as_bytes()).unwrap_err();
        match err {
            DataError::Malformed { file, line, reason } => {
                assert_eq!(file, "performance");
                assert_eq!(line, 2);
                assert!(reason.contains("expected 23 fields, found 22"), "{reason}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lenient_mode_reports_and_continues() {
        let perf = format!("{}\n{}\n{}\n", perf_line("A", "01"), perf_line("A", "77"), perf_line("A", ""));
        let parsed = parse_vintage_with(orig_line("A", "x1").as_bytes(), perf.as_bytes(), ParseOptions { lenient: true }).unwrap();
        assert_eq!(parsed.performance.len(), 2);
        assert_eq!(parsed.origination.len(), 0);
        let lines: Vec<_> = parsed.malformed.iter().map(|m| (m.file, m.line)).collect();
        assert_eq!(lines, vec![(FileKind::Origination, 1), (FileKind::Performance, 2)]);
    }

    #[test]
    fn unknown_code_and_bad_numeric_are_errors() {
        assert!(parse_vintage(&b""[..], perf_line("A", "15").as_bytes()).is_err());
        assert!(parse_vintage(orig_line("A", "seven").as_bytes(), &b""[..]).is_err());
        let dup = format!("{}\n{}", orig_line("A", "700"), orig_line("A", "710"));
        assert!(parse_vintage(dup.as_bytes(), &b""[..]).is_err());
    }

    #[test]
    fn lines_round_trip() {
        let line = orig_line("F103Q1000001", "712");
        let parsed = parse_vintage(line.as_bytes(), &b""[..]).unwrap();
        assert_eq!(parsed.origination[0].to_line(), line);
    }
}
