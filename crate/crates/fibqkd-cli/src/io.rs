//! File formats: matrix CSV/JSON, metrics CSV, sweep CSV, and the
//! line-delimited trial log.
//!
//! CSV numbers are written with 17 significant digits so that parsing a
//! written matrix reproduces the in-memory values exactly; JSON goes through
//! shortest-round-trip float rendering and is bit-exact by construction.

use anyhow::{bail, Context, Result};
use fibqkd::montecarlo::TrialRecord;
use fibqkd::{outcome_labels, Block, DeltaMatrix, JointProbabilityMatrix, ProtocolConfig, SecurityMetrics};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// 17 significant digits; round-trips f64 exactly.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Matrix rows with their labels, as written to CSV.
fn matrix_csv_string(data: &[f64], dim: usize, labels: &[String]) -> String {
    let mut out = String::new();
    out.push_str("outcome");
    for l in labels {
        out.push(',');
        out.push_str(l);
    }
    out.push('\n');
    for (r, label) in labels.iter().enumerate() {
        out.push_str(label);
        for c in 0..dim {
            out.push(',');
            out.push_str(&format_f64(data[r * dim + c]));
        }
        out.push('\n');
    }
    out
}

pub fn write_matrix_csv(
    path: &Path,
    m: &JointProbabilityMatrix,
    cfg: &ProtocolConfig,
) -> Result<()> {
    let labels = outcome_labels(cfg);
    write_file(path, &matrix_csv_string(m.data(), m.dim(), &labels))
}

pub fn write_delta_csv(path: &Path, m: &DeltaMatrix, cfg: &ProtocolConfig) -> Result<()> {
    let labels = outcome_labels(cfg);
    write_file(path, &matrix_csv_string(m.data(), m.dim(), &labels))
}

/// Parses a matrix CSV back into (labels, row-major data).
pub fn parse_matrix_csv(text: &str) -> Result<(Vec<String>, Vec<f64>)> {
    let mut lines = text.lines();
    let header = lines.next().context("empty matrix file")?;
    let labels: Vec<String> = header.split(',').skip(1).map(str::to_string).collect();
    let dim = labels.len();
    let mut data = Vec::with_capacity(dim * dim);
    for (r, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let mut cells = line.split(',');
        let row_label = cells.next().context("missing row label")?;
        if row_label != labels[r] {
            bail!("row label {row_label} does not match column order");
        }
        for cell in cells {
            data.push(cell.parse::<f64>().context("bad matrix cell")?);
        }
    }
    if data.len() != dim * dim {
        bail!("expected {dim}x{dim} matrix, got {} cells", data.len());
    }
    Ok((labels, data))
}

/// JSON matrix document with the four named blocks.
#[derive(Serialize, Deserialize)]
pub struct MatrixJson {
    pub n: u32,
    pub m0: u32,
    pub blocks: MatrixBlocks,
}

#[derive(Serialize, Deserialize)]
pub struct MatrixBlocks {
    #[serde(rename = "L")]
    pub l: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(rename = "F")]
    pub f: Vec<Vec<f64>>,
    #[serde(rename = "D")]
    pub d: Vec<Vec<f64>>,
}

pub fn matrix_to_json(m: &JointProbabilityMatrix) -> MatrixJson {
    MatrixJson {
        n: m.alphabet_size(),
        m0: m.m0(),
        blocks: MatrixBlocks {
            l: m.block(Block::L),
            c: m.block(Block::C),
            f: m.block(Block::F),
            d: m.block(Block::D),
        },
    }
}

/// Rebuilds the row-major data from a block document.
pub fn matrix_from_json(doc: &MatrixJson) -> Result<(u32, u32, Vec<f64>)> {
    let n = doc.n as usize;
    let dim = 3 * n + 2;
    let split = n + 1;
    let mut data = vec![0.0; dim * dim];
    let place = |data: &mut Vec<f64>, rows: &[Vec<f64>], r0: usize, c0: usize| -> Result<()> {
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                let (rr, cc) = (r0 + r, c0 + c);
                if rr >= dim || cc >= dim {
                    bail!("block exceeds matrix bounds");
                }
                data[rr * dim + cc] = *v;
            }
        }
        Ok(())
    };
    place(&mut data, &doc.blocks.l, 0, 0)?;
    place(&mut data, &doc.blocks.c, 0, split)?;
    place(&mut data, &doc.blocks.f, split, 0)?;
    place(&mut data, &doc.blocks.d, split, split)?;
    Ok((doc.n, doc.m0, data))
}

pub fn write_matrix_json(path: &Path, m: &JointProbabilityMatrix) -> Result<()> {
    let doc = matrix_to_json(m);
    write_file(path, &(serde_json::to_string_pretty(&doc)? + "\n"))
}

/// Sweep/metrics CSV header, one row per η.
pub const METRICS_HEADER: &str = "eta,disturbance,hA,hB,hAB,iAB,iAE,retained,keyRate";

pub fn metrics_csv(rows: &[SecurityMetrics]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let cols = [
            r.eta,
            r.disturbance,
            r.h_a,
            r.h_b,
            r.h_ab,
            r.i_ab,
            r.i_ae,
            r.retained,
            r.key_rate,
        ];
        let line: Vec<String> = cols.iter().map(|v| format_f64(*v)).collect();
        let _ = writeln!(out, "{}", line.join(","));
    }
    out
}

pub fn write_metrics_csv(path: &Path, rows: &[SecurityMetrics]) -> Result<()> {
    write_file(path, &metrics_csv(rows))
}

pub fn write_trial_log(path: &Path, trials: &[TrialRecord]) -> Result<()> {
    let mut out = String::new();
    for t in trials {
        out.push_str(&serde_json::to_string(t)?);
        out.push('\n');
    }
    write_file(path, &out)
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)
            .with_context(|| format!("creating directory {}", parent.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use fibqkd::{joint_prob_no_eve, EveModel};

    #[test]
    fn matrix_csv_roundtrip_exact() {
        let cfg = ProtocolConfig::new(8, 2);
        let m = joint_prob_no_eve(&cfg).unwrap();
        let text = matrix_csv_string(m.data(), m.dim(), &outcome_labels(&cfg));
        let (labels, data) = parse_matrix_csv(&text).unwrap();
        assert_eq!(labels, outcome_labels(&cfg));
        assert_eq!(data.len(), m.data().len());
        for (a, b) in data.iter().zip(m.data()) {
            assert_eq!(a.to_bits(), b.to_bits(), "CSV must round-trip bit-exactly");
        }
    }

    #[test]
    fn matrix_json_roundtrip_bit_exact() {
        let cfg = ProtocolConfig::new(8, 2).with_eta(1.0);
        let m = fibqkd::joint_prob_with_eve(&cfg, &EveModel::default()).unwrap();
        let doc = matrix_to_json(&m);
        let text = serde_json::to_string(&doc).unwrap();
        let parsed: MatrixJson = serde_json::from_str(&text).unwrap();
        let (n, m0, data) = matrix_from_json(&parsed).unwrap();
        assert_eq!((n, m0), (8, 2));
        for (a, b) in data.iter().zip(m.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn metrics_csv_has_exact_header() {
        let rows = fibqkd::sweep(&ProtocolConfig::new(8, 2), 3).unwrap();
        let text = metrics_csv(&rows);
        assert!(text.starts_with("eta,disturbance,hA,hB,hAB,iAB,iAE,retained,keyRate\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
