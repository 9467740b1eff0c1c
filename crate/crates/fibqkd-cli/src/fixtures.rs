//! Reference matrices embedded from a checked-in data file.
//!
//! The seven integer matrices and their printed prefactor denominators are
//! transcribed once into `fixtures/appendix_b.json`; a SHA-256 checksum over
//! a canonical rendering guards the transcription. `verify` never
//! regenerates these.

use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::sync::OnceLock;

/// Canonical checksum of the transcribed fixture file.
pub const TRANSCRIPTION_SHA256: &str =
    "6f2d6ea5fbf07138e334bc1f0f475cd08ca6c3954399b42191530d67f508945a";

const RAW: &str = include_str!("../fixtures/appendix_b.json");

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Debug)]
pub enum FixtureName {
    L0,
    C0,
    D0,
    Lp,
    Cp,
    Dp,
    Fp,
}

impl FixtureName {
    pub const ALL: [FixtureName; 7] = [
        FixtureName::L0,
        FixtureName::C0,
        FixtureName::D0,
        FixtureName::Lp,
        FixtureName::Cp,
        FixtureName::Dp,
        FixtureName::Fp,
    ];

    pub fn key(self) -> &'static str {
        match self {
            FixtureName::L0 => "L0",
            FixtureName::C0 => "C0",
            FixtureName::D0 => "D0",
            FixtureName::Lp => "Lp",
            FixtureName::Cp => "Cp",
            FixtureName::Dp => "Dp",
            FixtureName::Fp => "Fp",
        }
    }

    /// Display form using the prime convention.
    pub fn label(self) -> &'static str {
        match self {
            FixtureName::L0 => "L0",
            FixtureName::C0 => "C0",
            FixtureName::D0 => "D0",
            FixtureName::Lp => "L'",
            FixtureName::Cp => "C'",
            FixtureName::Dp => "D'",
            FixtureName::Fp => "F'",
        }
    }

    /// True for the no-eavesdropper matrices.
    pub fn is_unprimed(self) -> bool {
        matches!(self, FixtureName::L0 | FixtureName::C0 | FixtureName::D0)
    }
}

/// One transcribed reference matrix.
#[derive(Clone, Debug, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PaperFixture {
    pub prefactor_denominator: u64,
    pub entries: Vec<Vec<i64>>,
}

impl PaperFixture {
    pub fn shape(&self) -> (usize, usize) {
        (self.entries.len(), self.entries.first().map_or(0, Vec::len))
    }

    pub fn sum(&self) -> i64 {
        self.entries.iter().flatten().sum()
    }
}

fn table() -> &'static BTreeMap<String, PaperFixture> {
    static TABLE: OnceLock<BTreeMap<String, PaperFixture>> = OnceLock::new();
    TABLE.get_or_init(|| serde_json::from_str(RAW).expect("embedded fixture file parses"))
}

pub fn fixture(name: FixtureName) -> &'static PaperFixture {
    table()
        .get(name.key())
        .expect("all seven fixtures are embedded")
}

/// Canonical rendering hashed by [`transcription_checksum`]: names sorted,
/// one line each as `name:denominator:rows` with `,` inside and `;` between
/// rows.
fn canonical() -> String {
    let mut out = String::new();
    for (name, f) in table() {
        out.push_str(name);
        out.push(':');
        out.push_str(&f.prefactor_denominator.to_string());
        out.push(':');
        let rows: Vec<String> = f
            .entries
            .iter()
            .map(|row| {
                row.iter()
                    .map(|v| v.to_string())
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect();
        out.push_str(&rows.join(";"));
        out.push('\n');
    }
    out
}

pub fn transcription_checksum() -> String {
    let mut hasher = Sha256::new();
    hasher.update(canonical().as_bytes());
    format!("{:x}", hasher.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn checksum_matches_transcription() {
        assert_eq!(transcription_checksum(), TRANSCRIPTION_SHA256);
    }

    #[test]
    fn shapes_and_denominators() {
        let expect = [
            (FixtureName::L0, (9, 9), 16),
            (FixtureName::C0, (9, 17), 72),
            (FixtureName::D0, (17, 17), 196),
            (FixtureName::Lp, (9, 9), 122),
            (FixtureName::Cp, (9, 17), 664),
            (FixtureName::Dp, (17, 17), 4294),
            (FixtureName::Fp, (19, 9), 1380),
        ];
        for (name, shape, den) in expect {
            let f = fixture(name);
            assert_eq!(f.shape(), shape, "{name:?}");
            assert_eq!(f.prefactor_denominator, den, "{name:?}");
        }
    }

    /// The printed F' carries 19 rows where the layout implies 17; the two
    /// extras duplicate rows 14 and 15 verbatim.
    #[test]
    fn fp_trailing_rows_duplicate_14_and_15() {
        let fp = &fixture(FixtureName::Fp).entries;
        assert_eq!(fp[17], fp[13]);
        assert_eq!(fp[18], fp[14]);
    }

    #[test]
    fn entries_are_nonnegative() {
        for name in FixtureName::ALL {
            assert!(fixture(name).entries.iter().flatten().all(|&v| v >= 0));
        }
    }
}
