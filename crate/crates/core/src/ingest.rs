//! CSV readers for OIS rate tables and government bond yield lists.
//!
//! OIS tables: header `Term,<date>,<date>,...`, terms in days (thousands
//! separators allowed), rates in percent. Bond lists: header
//! `Cusip,Coupon,MaturityDate,BidYield,MidYield,IssueDate`, yields in percent.
//! Dates are ISO-8601. Rates are converted to decimals and tenors to ACT/365
//! years when building term structures.

use std::io::{Read, Write};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::Tenor;
use crate::objective::{TermStructure, TermStructureError};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("input is empty")]
    Empty,
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },
    #[error("bond {cusip} matures on {maturity}, not after {as_of}")]
    Matured {
        cusip: String,
        maturity: NaiveDate,
        as_of: NaiveDate,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Structure(#[from] TermStructureError),
}

fn parse_error(line: u64, column: usize, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn parse_date(cell: &str, line: u64, column: usize) -> Result<NaiveDate, IngestError> {
    NaiveDate::parse_from_str(cell.trim(), "%Y-%m-%d")
        .map_err(|e| parse_error(line, column, format!("bad date `{cell}`: {e}")))
}

fn parse_number(cell: &str, line: u64, column: usize) -> Result<f64, IngestError> {
    cell.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(line, column, format!("bad number `{cell}`")))
}

/// Rates by term (rows) and date (columns), as published.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OisTable {
    pub dates: Vec<NaiveDate>,
    pub terms_days: Vec<u32>,
    /// `rates_percent[term][date]`.
    pub rates_percent: Vec<Vec<f64>>,
}

impl OisTable {
    pub fn date_index(&self, date: NaiveDate) -> Option<usize> {
        self.dates.iter().position(|&d| d == date)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), IngestError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["Term".to_string()];
        header.extend(self.dates.iter().map(|d| d.to_string()));
        w.write_record(&header)?;
        for (term, row) in self.terms_days.iter().zip(&self.rates_percent) {
            let mut record = vec![term.to_string()];
            record.extend(row.iter().map(|r| r.to_string()));
            w.write_record(&record)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

pub fn parse_ois_csv<R: Read>(input: R) -> Result<OisTable, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::Empty);
    }
    if !header[0].eq_ignore_ascii_case("term") {
        return Err(parse_error(
            1,
            1,
            format!("expected `Term`, found `{}`", &header[0]),
        ));
    }
    if header.len() < 2 {
        return Err(parse_error(1, 2, "no date columns"));
    }
    let dates = header
        .iter()
        .enumerate()
        .skip(1)
        .map(|(col, cell)| parse_date(cell, 1, col + 1))
        .collect::<Result<Vec<_>, _>>()?;

    let mut terms_days: Vec<u32> = Vec::new();
    let mut rates_percent = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(parse_error(
                line,
                record.len().min(header.len()) + 1,
                format!("expected {} cells, found {}", header.len(), record.len()),
            ));
        }
        let term_cell = record[0].replace([',', '_'], "");
        let term: u32 = term_cell
            .parse()
            .ok()
            .filter(|&t| t > 0)
            .ok_or_else(|| parse_error(line, 1, format!("bad term `{}`", &record[0])))?;
        if let Some(&prev) = terms_days.last() {
            if term <= prev {
                return Err(parse_error(
                    line,
                    1,
                    format!("term {term} does not increase on {prev}"),
                ));
            }
        }
        let row = record
            .iter()
            .enumerate()
            .skip(1)
            .map(|(col, cell)| parse_number(cell, line, col + 1))
            .collect::<Result<Vec<_>, _>>()?;
        terms_days.push(term);
        rates_percent.push(row);
    }
    if terms_days.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(OisTable {
        dates,
        terms_days,
        rates_percent,
    })
}

/// One term structure per date column, in column order.
pub fn ois_to_term_structures(table: &OisTable) -> Vec<TermStructure> {
    table
        .dates
        .iter()
        .enumerate()
        .map(|(col, &date)| {
            let points = table
                .terms_days
                .iter()
                .zip(&table.rates_percent)
                .map(|(&days, row)| (Tenor::from_days(days), row[col] / 100.0))
                .collect();
            TermStructure::new(date, points).expect("validated table yields a valid curve")
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BondRecord {
    pub cusip: String,
    pub coupon_percent: f64,
    pub maturity: NaiveDate,
    pub bid_yield_percent: f64,
    pub mid_yield_percent: f64,
    pub issue: NaiveDate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YieldSide {
    Bid,
    #[default]
    Mid,
}

impl BondRecord {
    pub fn yield_percent(&self, side: YieldSide) -> f64 {
        match side {
            YieldSide::Bid => self.bid_yield_percent,
            YieldSide::Mid => self.mid_yield_percent,
        }
    }
}

const BOND_COLUMNS: [&str; 6] = [
    "Cusip",
    "Coupon",
    "MaturityDate",
    "BidYield",
    "MidYield",
    "IssueDate",
];

pub fn parse_bonds_csv<R: Read>(input: R) -> Result<Vec<BondRecord>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(IngestError::Empty);
    }
    for (col, expected) in BOND_COLUMNS.iter().enumerate() {
        match header.get(col) {
            Some(h) if h.eq_ignore_ascii_case(expected) => {}
            found => {
                return Err(parse_error(
                    1,
                    col + 1,
                    format!("expected `{expected}`, found `{}`", found.unwrap_or("")),
                ))
            }
        }
    }
    let mut bonds = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != BOND_COLUMNS.len() {
            return Err(parse_error(
                line,
                record.len().min(BOND_COLUMNS.len()) + 1,
                format!("expected 6 cells, found {}", record.len()),
            ));
        }
        let cusip = record[0].to_string();
        if cusip.is_empty() {
            return Err(parse_error(line, 1, "empty cusip"));
        }
        let bond = BondRecord {
            cusip,
            coupon_percent: parse_number(&record[1], line, 2)?,
            maturity: parse_date(&record[2], line, 3)?,
            bid_yield_percent: parse_number(&record[3], line, 4)?,
            mid_yield_percent: parse_number(&record[4], line, 5)?,
            issue: parse_date(&record[5], line, 6)?,
        };
        if bond.coupon_percent < 0.0 {
            return Err(parse_error(line, 2, "negative coupon"));
        }
        if bond.maturity <= bond.issue {
            return Err(parse_error(line, 3, "maturity is not after issue date"));
        }
        bonds.push(bond);
    }
    if bonds.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(bonds)
}

/// `(cusip, tenor, decimal yield)` per bond, ordered by tenor. Bonds sharing
/// a maturity keep their input order.
pub fn bond_points(
    bonds: &[BondRecord],
    as_of: NaiveDate,
    side: YieldSide,
) -> Result<Vec<(String, Tenor, f64)>, IngestError> {
    let mut points = bonds
        .iter()
        .map(|b| {
            let days = (b.maturity - as_of).num_days();
            if days <= 0 {
                return Err(IngestError::Matured {
                    cusip: b.cusip.clone(),
                    maturity: b.maturity,
                    as_of,
                });
            }
            let tenor = Tenor::new(days as f64 / 365.0).expect("positive day count");
            Ok((b.cusip.clone(), tenor, b.yield_percent(side) / 100.0))
        })
        .collect::<Result<Vec<_>, _>>()?;
    points.sort_by(|a, b| a.1.years().total_cmp(&b.1.years()));
    Ok(points)
}

pub fn bonds_to_term_structure(
    bonds: &[BondRecord],
    as_of: NaiveDate,
    side: YieldSide,
) -> Result<TermStructure, IngestError> {
    let points = bond_points(bonds, as_of, side)?
        .into_iter()
        .map(|(_, t, r)| (t, r))
        .collect();
    Ok(TermStructure::new(as_of, points)?)
}

/// The bundled data sets.
pub mod fixtures {
    use super::*;

    /// EUR OIS curves, 22-30 September 2011, 45 terms by 7 dates.
    pub const EUR_OIS_2011_09: &str = include_str!("../data/eur_ois_2011-09.csv");
    /// 31 US Treasury bills, notes and bonds priced on 28 July 2020.
    pub const USD_BONDS_2020_07_28: &str = include_str!("../data/usd_bonds_2020-07-28.csv");

    pub fn usd_as_of() -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 7, 28).expect("valid date")
    }

    pub fn eur_ois_table() -> OisTable {
        parse_ois_csv(EUR_OIS_2011_09.as_bytes()).expect("bundled OIS table parses")
    }

    pub fn eur_ois_curves() -> Vec<TermStructure> {
        ois_to_term_structures(&eur_ois_table())
    }

    pub fn usd_bonds() -> Vec<BondRecord> {
        parse_bonds_csv(USD_BONDS_2020_07_28.as_bytes()).expect("bundled bond list parses")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(y: i32, m: u32, day: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, day).unwrap()
    }

    #[test]
    fn parses_thousands_separators() {
        let text = "Term,2011-09-22,2011-09-23\n30,0.9231,0.8910\n\"1,000\",0.7786,0.7710\n";
        let t = parse_ois_csv(text.as_bytes()).unwrap();
        assert_eq!(t.terms_days, vec![30, 1000]);
        assert_eq!(t.dates, vec![d(2011, 9, 22), d(2011, 9, 23)]);
        assert_eq!(t.rates_percent[1], vec![0.7786, 0.7710]);
    }

    #[test]
    fn ois_errors_carry_locations() {
        assert!(matches!(parse_ois_csv(&b""[..]), Err(IngestError::Empty)));
        assert!(matches!(
            parse_ois_csv(&b"Term,2011-09-22\n"[..]),
            Err(IngestError::Empty)
        ));
        let ragged = "Term,2011-09-22,2011-09-23\n30,0.92\n";
        assert!(matches!(
            parse_ois_csv(ragged.as_bytes()),
            Err(IngestError::Parse {
                line: 2,
                column: 3,
                ..
            })
        ));
        let bad_cell = "Term,2011-09-22\n30,0.92\n60,abc\n";
        assert!(matches!(
            parse_ois_csv(bad_cell.as_bytes()),
            Err(IngestError::Parse {
                line: 3,
                column: 2,
                ..
            })
        ));
        let not_increasing = "Term,2011-09-22\n60,0.92\n30,0.91\n";
        assert!(matches!(
            parse_ois_csv(not_increasing.as_bytes()),
            Err(IngestError::Parse {
                line: 3,
                column: 1,
                ..
            })
        ));
        let bad_date = "Term,2011-13-22\n30,0.92\n";
        assert!(matches!(
            parse_ois_csv(bad_date.as_bytes()),
            Err(IngestError::Parse {
                line: 1,
                column: 2,
                ..
            })
        ));
    }

    #[test]
    fn unit_conversion() {
        let text = "Term,2011-09-22\n365,0.9231\n18250,2.4092\n";
        let curves = ois_to_term_structures(&parse_ois_csv(text.as_bytes()).unwrap());
        assert_eq!(curves.len(), 1);
        let p = curves[0].points();
        assert_eq!(p[0].0.years(), 1.0);
        assert!((p[0].1 - 0.009231).abs() < 1e-15);
        assert_eq!(p[1].0.years(), 50.0);
    }

    #[test]
    fn bond_tenor_is_act_365() {
        let text = "Cusip,Coupon,MaturityDate,BidYield,MidYield,IssueDate\n\
                    9127963S6,0,2021-07-15,0.13447065,0.129391733,2020-07-16\n\
                    X,1,2021-07-28,0.2,0.1,2020-07-28\n";
        let bonds = parse_bonds_csv(text.as_bytes()).unwrap();
        let pts = bond_points(&bonds, d(2020, 7, 28), YieldSide::Mid).unwrap();
        assert!((pts[0].1.years() - 352.0 / 365.0).abs() < 1e-15);
        assert_eq!(pts[1].1.years(), 1.0);
        assert!((pts[0].2 - 0.00129391733).abs() < 1e-18);
        let bid = bond_points(&bonds, d(2020, 7, 28), YieldSide::Bid).unwrap();
        assert!((bid[0].2 - 0.0013447065).abs() < 1e-18);
    }

    #[test]
    fn matured_bond_is_named() {
        let text = "Cusip,Coupon,MaturityDate,BidYield,MidYield,IssueDate\n\
                    OLD1,0,2020-07-01,0.1,0.1,2020-01-01\n";
        let bonds = parse_bonds_csv(text.as_bytes()).unwrap();
        match bonds_to_term_structure(&bonds, d(2020, 7, 28), YieldSide::Mid) {
            Err(IngestError::Matured { cusip, .. }) => assert_eq!(cusip, "OLD1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bond_errors() {
        let header = "Cusip,Coupon,MaturityDate,BidYield,MidYield,IssueDate\n";
        assert!(matches!(
            parse_bonds_csv(header.as_bytes()),
            Err(IngestError::Empty)
        ));
        assert!(matches!(parse_bonds_csv(&b""[..]), Err(IngestError::Empty)));
        let bad = format!("{header}A,0,2021-02-30,0.1,0.1,2020-01-01\n");
        assert!(matches!(
            parse_bonds_csv(bad.as_bytes()),
            Err(IngestError::Parse {
                line: 2,
                column: 3,
                ..
            })
        ));
        let bad = format!("{header}A,0,2021-02-01,x,0.1,2020-01-01\n");
        assert!(matches!(
            parse_bonds_csv(bad.as_bytes()),
            Err(IngestError::Parse {
                line: 2,
                column: 4,
                ..
            })
        ));
        let dup = format!(
            "{header}A,0,2021-02-01,0.1,0.1,2020-01-01\nA,0,2022-02-01,0.1,0.1,2020-01-01\n"
        );
        assert_eq!(parse_bonds_csv(dup.as_bytes()).unwrap().len(), 2);
    }
}
