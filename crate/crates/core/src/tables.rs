//! The exceptional lists E1 and E2 with class numbers, shipped as a CSV
//! data file guarded by a SHA-256 checksum, and their recomputation.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::classgroup;
use crate::error::{Error, Result};

pub const APPENDIX_CSV: &str = include_str!("../data/appendix.csv");
pub const APPENDIX_SHA256: &str = "46e59d2d0cfdca9c9188138c06ead22f13508a60c15af06898ebeb8291d4b6a3";

/// Values of `d` for which the cuspidal cohomology of the Bianchi group vanishes.
pub const VANISHING_CUSPIDAL: [u64; 14] = [1, 2, 3, 5, 6, 7, 11, 15, 19, 23, 31, 39, 47, 71];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ListTag {
    E1,
    E2,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AppendixRow {
    pub d: u64,
    pub list: ListTag,
    /// Class number, given for E1 rows.
    pub h: Option<u64>,
    /// `Z6xZ2`-style structure, given for E1 rows with `4 | h`.
    pub structure: Option<String>,
}

#[derive(Debug, Deserialize)]
struct RawRow {
    d: u64,
    list: String,
    h: Option<u64>,
    structure: Option<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Parse an appendix table in the shipped CSV layout.
pub fn parse_appendix(text: &str) -> Result<Vec<AppendixRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for rec in rdr.deserialize::<RawRow>() {
        let raw = rec.map_err(|e| Error::Parse(format!("appendix table: {e}")))?;
        let list = match raw.list.as_str() {
            "E1" => ListTag::E1,
            "E2" => ListTag::E2,
            other => return Err(Error::Parse(format!("unknown list tag {other:?}"))),
        };
        rows.push(AppendixRow {
            d: raw.d,
            list,
            h: raw.h,
            structure: raw.structure.filter(|s| !s.is_empty()),
        });
    }
    Ok(rows)
}

/// The shipped table, after checking its checksum.
pub fn appendix() -> Result<Vec<AppendixRow>> {
    let got = sha256_hex(APPENDIX_CSV.as_bytes());
    if got != APPENDIX_SHA256 {
        return Err(Error::Inconsistent(format!("appendix checksum {got} != {APPENDIX_SHA256}")));
    }
    parse_appendix(APPENDIX_CSV)
}

pub fn load_appendix(path: &Path) -> Result<Vec<AppendixRow>> {
    parse_appendix(&std::fs::read_to_string(path)?)
}

pub fn list_members(rows: &[AppendixRow], tag: ListTag) -> BTreeSet<u64> {
    rows.iter().filter(|r| r.list == tag).map(|r| r.d).collect()
}

pub fn e1() -> Result<BTreeSet<u64>> {
    Ok(list_members(&appendix()?, ListTag::E1))
}

pub fn e2() -> Result<BTreeSet<u64>> {
    Ok(list_members(&appendix()?, ListTag::E2))
}

/// `E1 ∪ E2`.
pub fn exceptional() -> Result<BTreeSet<u64>> {
    Ok(appendix()?.iter().map(|r| r.d).collect())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDiff {
    pub d: u64,
    pub field: String,
    pub expected: String,
    pub computed: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TablesReport {
    pub rows_checked: usize,
    pub diffs: Vec<TableDiff>,
    /// Every `d` in [`VANISHING_CUSPIDAL`] belongs to `E1 ∪ E2`.
    pub cuspidal_subset: bool,
}

/// Recompute class numbers, structures (where listed) and the presence of
/// order-4 classes for every row. E1 rows must have no order-4 class, E2
/// rows must have one.
pub fn check_tables(rows: &[AppendixRow]) -> Result<TablesReport> {
    let mut diffs = Vec::new();
    let mut push = |d: u64, field: &str, expected: String, computed: String| {
        if expected != computed {
            diffs.push(TableDiff { d, field: field.into(), expected, computed });
        }
    };
    for row in rows {
        let di = i64::try_from(row.d).map_err(|_| Error::InvalidArgument(format!("{} out of range", row.d)))?;
        let cg = classgroup::class_group_structure(di)?;
        if let Some(h) = row.h {
            push(row.d, "h", h.to_string(), cg.class_number().to_string());
        }
        if let Some(s) = &row.structure {
            push(row.d, "structure", s.clone(), cg.structure_string());
        }
        let four = cg.orders.iter().any(|o| o % 4 == 0);
        let want = matches!(row.list, ListTag::E2);
        push(row.d, "order_four", want.to_string(), four.to_string());
    }
    let all: BTreeSet<u64> = rows.iter().map(|r| r.d).collect();
    let cuspidal_subset = VANISHING_CUSPIDAL.iter().all(|d| all.contains(d));
    Ok(TablesReport { rows_checked: rows.len(), diffs, cuspidal_subset })
}
