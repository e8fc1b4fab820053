//! Closed-form resource sweep over the dense-mode group size.

use crate::metrics::fmt_sig;
use bb84aes::crypto::TagLength;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("group size range {lo}..={hi} outside 2..=20")]
    BadRange { lo: u8, hi: u8 },
    #[error("unsupported tag width {0}")]
    BadTag(u32),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub xi: u8,
    pub tag_bits: u32,
    /// Announcement-direction classical load per qubit: tag_bits / xi.
    pub classical_bits_per_qubit: f64,
    /// Lookup-table digest payload: 2^xi entries of tag_bits/8 bytes.
    pub table_bytes: u64,
    /// Binary-search comparison ceiling: xi + 1.
    pub max_comparisons: u32,
    /// Classical channel rate needed at the given qubit clock.
    pub classical_rate_bits_per_s: f64,
}

pub fn sweep_xi(
    xi_lo: u8,
    xi_hi: u8,
    tag_bits: &[u32],
    clock_hz: f64,
) -> Result<Vec<SweepRow>, SweepError> {
    if !(2..=20).contains(&xi_lo) || !(2..=20).contains(&xi_hi) || xi_lo > xi_hi {
        return Err(SweepError::BadRange {
            lo: xi_lo,
            hi: xi_hi,
        });
    }
    let mut rows = Vec::new();
    for &bits in tag_bits {
        let tag = TagLength::from_bits(bits).ok_or(SweepError::BadTag(bits))?;
        for xi in xi_lo..=xi_hi {
            let bits_per_qubit = tag.bits() as f64 / xi as f64;
            rows.push(SweepRow {
                xi,
                tag_bits: tag.bits(),
                classical_bits_per_qubit: bits_per_qubit,
                table_bytes: (1u64 << xi) * tag.bytes() as u64,
                max_comparisons: xi as u32 + 1,
                classical_rate_bits_per_s: bits_per_qubit * clock_hz,
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "xi_bases_per_tag,tag_bits,classical_bits_per_qubit_bits,table_bytes_bytes,max_comparisons_comparisons,classical_rate_bits_per_s";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.xi,
            r.tag_bits,
            fmt_sig(r.classical_bits_per_qubit),
            r.table_bytes,
            r.max_comparisons,
            fmt_sig(r.classical_rate_bits_per_s)
        ));
    }
    out
}

pub fn sweep_to_json(rows: &[SweepRow]) -> String {
    let body: Vec<String> = rows
        .iter()
        .map(|r| {
            format!(
                "  {{\"xi\": {}, \"tag_bits\": {}, \"classical_bits_per_qubit\": {}, \"table_bytes\": {}, \"max_comparisons\": {}, \"classical_rate_bits_per_s\": {}}}",
                r.xi,
                r.tag_bits,
                fmt_sig(r.classical_bits_per_qubit),
                r.table_bytes,
                r.max_comparisons,
                fmt_sig(r.classical_rate_bits_per_s)
            )
        })
        .collect();
    format!("[\n{}\n]\n", body.join(",\n"))
}
