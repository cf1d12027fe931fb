//! Bids, wholesale and USDA price files.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, WriterBuilder};
use serde::de::DeserializeOwned;
use serde::Serialize;

use setaside_core::econometrics::{UsdaPrice, WholesalePrice};
use setaside_core::simulation::BidRecord;

use crate::error::CliError;

/// Canonical bids-file columns, in order.
pub const BID_COLUMNS: [&str; 20] = [
    "auction_id",
    "date",
    "solicitation_id",
    "product_code",
    "package_class",
    "item_id",
    "quantity_lbs",
    "destination_state",
    "window_start",
    "window_end",
    "vendor_id",
    "vendor_type",
    "sdvosb",
    "price_per_lb",
    "won",
    "set_aside",
    "demand_mlbs",
    "n_bidders_item",
    "wholesale_price",
    "usda_ref_price",
];

/// How unknown columns and malformed rows are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Schema {
    /// Unknown columns and malformed rows are errors.
    #[default]
    Strict,
    /// Unknown columns are carried along; malformed rows are reported and skipped.
    Lax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RowError {
    pub line: u64,
    pub message: String,
}

/// Loaded bids plus any non-canonical columns kept under [`Schema::Lax`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct BidTable {
    pub records: Vec<BidRecord>,
    pub extra_columns: Vec<String>,
    /// One row per record, aligned with `extra_columns`.
    pub extra_values: Vec<Vec<String>>,
    pub skipped: Vec<RowError>,
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    File::open(path).map(BufReader::new).map_err(|e| CliError::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    if !matches!(e.kind(), csv::ErrorKind::Io(_)) {
        return CliError::validation(format!("{}: {e}", path.display()));
    }
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        _ => unreachable!("checked above"),
    }
}

fn report(path: &Path, errors: &[RowError]) -> String {
    const SHOWN: usize = 10;
    let mut msg = format!("{}: {} malformed row(s)", path.display(), errors.len());
    for e in errors.iter().take(SHOWN) {
        msg.push_str(&format!("\n  line {}: {}", e.line, e.message));
    }
    if errors.len() > SHOWN {
        msg.push_str(&format!("\n  ... {} more", errors.len() - SHOWN));
    }
    msg
}

pub fn load_bids_csv(path: &Path, schema: Schema) -> Result<BidTable, CliError> {
    let mut rdr = ReaderBuilder::new().flexible(true).from_reader(open(path)?);
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(CliError::validation(format!("{}: duplicate column `{n}`", path.display())));
        }
    }
    let mut positions = Vec::with_capacity(BID_COLUMNS.len());
    for col in BID_COLUMNS {
        let pos = names.iter().position(|n| *n == col);
        positions.push(pos.ok_or_else(|| {
            CliError::validation(format!("{}: missing required column `{col}`", path.display()))
        })?);
    }
    let extra: Vec<usize> = (0..names.len()).filter(|i| !BID_COLUMNS.contains(&names[*i])).collect();
    if schema == Schema::Strict && !extra.is_empty() {
        let list: Vec<&str> = extra.iter().map(|&i| names[i]).collect();
        return Err(CliError::validation(format!("{}: unknown column(s) {}", path.display(), list.join(", "))));
    }

    let canonical = StringRecord::from(BID_COLUMNS.to_vec());
    let mut table = BidTable { extra_columns: extra.iter().map(|&i| names[i].to_string()).collect(), ..Default::default() };
    let mut row = StringRecord::new();
    let mut canon = StringRecord::new();
    let mut errors = Vec::new();
    loop {
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) if matches!(e.kind(), csv::ErrorKind::Io(_)) => return Err(csv_error(path, e)),
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                errors.push(RowError { line, message: e.to_string() });
                continue;
            }
        }
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != names.len() {
            errors.push(RowError { line, message: format!("expected {} fields, found {}", names.len(), row.len()) });
            continue;
        }
        canon.clear();
        for &p in &positions {
            canon.push_field(row[p].trim());
        }
        match canon.deserialize::<BidRecord>(Some(&canonical)) {
            Ok(r) => match check_record(&r) {
                Ok(()) => {
                    table.records.push(r);
                    if !extra.is_empty() {
                        table.extra_values.push(extra.iter().map(|&i| row[i].to_string()).collect());
                    }
                }
                Err(message) => errors.push(RowError { line, message }),
            },
            Err(e) => errors.push(RowError { line, message: e.to_string() }),
        }
    }
    if !errors.is_empty() {
        if schema == Schema::Strict {
            return Err(CliError::validation(report(path, &errors)));
        }
        log::warn!("{}", report(path, &errors));
    }
    table.skipped = errors;
    Ok(table)
}

fn check_record(r: &BidRecord) -> Result<(), String> {
    let finite = [r.set_aside, r.demand_mlbs, r.wholesale_price, r.usda_ref_price];
    if finite.iter().any(|x| !x.is_finite()) {
        return Err("non-finite numeric field".into());
    }
    if !(0.0..=1.0).contains(&r.set_aside) {
        return Err(format!("set_aside {} outside [0, 1]", r.set_aside));
    }
    if r.quantity_lbs == 0 {
        return Err("quantity_lbs must be positive".into());
    }
    if r.window_end < r.window_start {
        return Err("window_end precedes window_start".into());
    }
    Ok(())
}

fn record_fields(r: &BidRecord) -> [String; 20] {
    [
        r.auction_id.clone(),
        r.date.to_string(),
        r.solicitation_id.to_string(),
        r.product_code.to_string(),
        r.package_class.to_string(),
        r.item_id.to_string(),
        r.quantity_lbs.to_string(),
        r.destination_state.clone(),
        r.window_start.to_string(),
        r.window_end.to_string(),
        r.vendor_id.to_string(),
        r.vendor_type.as_str().to_string(),
        r.sdvosb.to_string(),
        r.price_per_lb.to_string(),
        r.won.to_string(),
        r.set_aside.to_string(),
        r.demand_mlbs.to_string(),
        r.n_bidders_item.to_string(),
        r.wholesale_price.to_string(),
        r.usda_ref_price.to_string(),
    ]
}

/// Writes canonical columns followed by the table's extra columns.
pub fn write_bids<W: Write>(out: W, table: &BidTable) -> Result<(), csv::Error> {
    let mut w = WriterBuilder::new().from_writer(out);
    let header: Vec<&str> = BID_COLUMNS.iter().copied().chain(table.extra_columns.iter().map(String::as_str)).collect();
    w.write_record(&header)?;
    for (i, r) in table.records.iter().enumerate() {
        let extras = table.extra_values.get(i).map(Vec::as_slice).unwrap_or(&[]);
        w.write_record(record_fields(r).iter().map(String::as_str).chain(extras.iter().map(String::as_str)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bids_csv(path: &Path, records: &[BidRecord]) -> Result<(), CliError> {
    let table = BidTable { records: records.to_vec(), ..Default::default() };
    write_table(path, &table)
}

pub fn write_table(path: &Path, table: &BidTable) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    write_bids(BufWriter::new(file), table).map_err(|e| csv_error(path, e))
}

fn load_rows<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut rdr = ReaderBuilder::new().trim(csv::Trim::All).from_reader(open(path)?);
    rdr.deserialize().collect::<Result<Vec<T>, _>>().map_err(|e| csv_error(path, e))
}

pub fn write_rows<T: Serialize, W: Write>(out: W, rows: &[T]) -> Result<(), csv::Error> {
    let mut w = WriterBuilder::new().from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `year, month, price_per_lb`.
pub fn load_wholesale_csv(path: &Path) -> Result<Vec<WholesalePrice>, CliError> {
    let rows: Vec<WholesalePrice> = load_rows(path)?;
    if let Some(r) = rows.iter().find(|r| !(1..=12).contains(&r.month)) {
        return Err(CliError::validation(format!("{}: month {} out of range", path.display(), r.month)));
    }
    Ok(rows)
}

/// `product_code, year, price_per_lb`.
pub fn load_usda_csv(path: &Path) -> Result<Vec<UsdaPrice>, CliError> {
    load_rows(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOLDEN: &str = "\
auction_id,date,solicitation_id,product_code,package_class,item_id,quantity_lbs,destination_state,window_start,window_end,vendor_id,vendor_type,sdvosb,price_per_lb,won,set_aside,demand_mlbs,n_bidders_item,wholesale_price,usda_ref_price
A0001,2019-03-05,SOL0001,BEEF FINE GROUND FRZ CTN-40 LB,CTN-40,01-001,40000,IA,2019-04-04,2019-04-17,L01,LARGE,false,2.4100,false,0.5,0.08,2,2.13,2.55
A0001,2019-03-05,SOL0001,BEEF FINE GROUND FRZ CTN-40 LB,CTN-40,01-001,40000,IA,2019-04-04,2019-04-17,S01,SMALL,true,2.3875,true,0.5,0.08,2,2.13,2.55
";

    fn load_str(text: &str, schema: Schema) -> Result<BidTable, CliError> {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bids.csv");
        std::fs::write(&path, text).unwrap();
        load_bids_csv(&path, schema)
    }

    #[test]
    fn golden_rows_load_field_exact() {
        let t = load_str(GOLDEN, Schema::Strict).unwrap();
        assert_eq!(t.records.len(), 2);
        let r = &t.records[1];
        assert_eq!(r.auction_id, "A0001");
        assert_eq!(r.date.to_string(), "2019-03-05");
        assert_eq!(r.product_code.as_str(), "BEEF FINE GROUND FRZ CTN-40 LB");
        assert_eq!(r.vendor_type, setaside_core::domain::SizeClass::Small);
        assert!(r.sdvosb && r.won);
        assert_eq!(r.price_per_lb.ten_thousandths(), 23_875);
        assert_eq!((r.set_aside, r.demand_mlbs, r.n_bidders_item), (0.5, 0.08, 2));
        assert_eq!((r.wholesale_price, r.usda_ref_price), (2.13, 2.55));
        assert_eq!(t.records[0].price_per_lb.to_string(), "2.4100");
    }

    #[test]
    fn negative_price_is_rejected_with_its_line() {
        let bad = GOLDEN.replace("2.3875", "-2.3875");
        let err = load_str(&bad, Schema::Strict).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        let lax = load_str(&bad, Schema::Lax).unwrap();
        assert_eq!(lax.records.len(), 1);
        assert_eq!(lax.skipped[0].line, 3);
    }

    #[test]
    fn missing_column_is_named() {
        let text = GOLDEN.replace(",usda_ref_price", "");
        let err = load_str(&text, Schema::Lax).unwrap_err();
        assert_eq!(err.exit_code(), 1);
        assert!(err.to_string().contains("missing required column `usda_ref_price`"));
    }

    #[test]
    fn unknown_columns_are_strict_errors_and_lax_passengers() {
        let mut text = String::new();
        for (i, line) in GOLDEN.lines().enumerate() {
            text.push_str(line);
            text.push_str(if i == 0 { ",note\n" } else { ",x\n" });
        }
        let err = load_str(&text, Schema::Strict).unwrap_err().to_string();
        assert!(err.contains("unknown column(s) note"), "{err}");
        let t = load_str(&text, Schema::Lax).unwrap();
        assert_eq!(t.extra_columns, vec!["note"]);
        let mut out = Vec::new();
        write_bids(&mut out, &t).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
    }

    #[test]
    fn columns_may_come_in_any_order() {
        let mut lines: Vec<Vec<&str>> = GOLDEN.lines().map(|l| l.split(',').collect()).collect();
        for l in &mut lines {
            l.swap(0, 13);
        }
        let text: String = lines.iter().map(|l| l.join(",") + "\n").collect();
        assert_eq!(load_str(&text, Schema::Strict).unwrap(), load_str(GOLDEN, Schema::Strict).unwrap());
    }

    #[test]
    fn written_golden_rows_match_the_fixture() {
        let t = load_str(GOLDEN, Schema::Strict).unwrap();
        let mut out = Vec::new();
        write_bids(&mut out, &t).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), GOLDEN);
    }
}
