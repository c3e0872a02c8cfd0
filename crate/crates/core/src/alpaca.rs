//! Instruction/input/output records for instruction-tuning exports.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::codegraph::SourceUnit;

/// The fixed prompt put in every record's instruction field.
pub const INSTRUCTION: &str = "Find potential security issues in the following code. If it has a vulnerability, output: Vulnerabilities Detected: type of vulnerability. otherwise output<no vulnerability detected>:";

/// Verdict text for labeled-vulnerable units. Binary labels carry no CWE
/// type, so the generic phrase stands in for the type slot.
pub const OUTPUT_VULNERABLE: &str = "Vulnerabilities Detected: potential vulnerability";
pub const OUTPUT_CLEAN: &str = "no vulnerability detected";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlpacaRecord {
    pub instruction: String,
    pub input: String,
    pub output: String,
}

impl AlpacaRecord {
    pub fn from_unit(unit: &SourceUnit) -> Option<AlpacaRecord> {
        let vulnerable = unit.label?;
        Some(AlpacaRecord {
            instruction: INSTRUCTION.to_string(),
            input: unit.code.clone(),
            output: if vulnerable {
                OUTPUT_VULNERABLE.to_string()
            } else {
                OUTPUT_CLEAN.to_string()
            },
        })
    }
}

/// One JSON object per line; skips unlabeled units and returns the record
/// count. Byte-deterministic for a fixed input order.
pub fn export_jsonl(units: &[SourceUnit], mut w: impl Write) -> std::io::Result<usize> {
    let mut n = 0;
    for unit in units {
        if let Some(rec) = AlpacaRecord::from_unit(unit) {
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
            n += 1;
        }
    }
    Ok(n)
}
