//! Energy CSV files and binary snapshot dumps.
//!
//! Dump layout: the 8 bytes `PHYSVAC1`, a little-endian `u64` byte length
//! `L`, `L` bytes of UTF-8 JSON metadata, then for each field listed in the
//! metadata `n_nodes` little-endian `f64` values in row-major node order (the
//! vertical axis varies fastest).

use crate::diagnostics::EnergyReport;
use crate::geometry::FlowState;
use crate::grid::DiscreteDomain;
use serde::{Deserialize, Serialize};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::HarnessError;

pub const DUMP_MAGIC: &[u8; 8] = b"PHYSVAC1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DumpMeta {
    pub format_version: u32,
    pub dim: usize,
    pub shape: Vec<usize>,
    pub n_nodes: usize,
    pub time: f64,
    pub step: usize,
    pub fields: Vec<String>,
}

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_csv<W: Write>(mut w: W, header: &str, rows: &[Vec<f64>]) -> std::io::Result<()> {
    writeln!(w, "{header}")?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|x| format_float(*x)).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_energy_csv(path: &Path, reports: &[EnergyReport]) -> Result<(), HarnessError> {
    let rows: Vec<Vec<f64>> = reports.iter().map(EnergyReport::csv_values).collect();
    let f = BufWriter::new(std::fs::File::create(path)?);
    write_csv(f, &EnergyReport::csv_header(), &rows)?;
    Ok(())
}

/// Header and rows of a numeric CSV file.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Format("empty CSV".into()))?
        .split(',')
        .map(str::to_string)
        .collect();
    let rows = lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(',')
                .map(|v| {
                    v.parse::<f64>()
                        .map_err(|e| HarnessError::Format(format!("bad number `{v}`: {e}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    Ok((header, rows))
}

pub fn write_dump(
    path: &Path,
    domain: &DiscreteDomain,
    time: f64,
    step: usize,
    fields: &[(&str, &[f64])],
) -> Result<(), HarnessError> {
    for (name, values) in fields {
        if values.len() != domain.len() {
            return Err(HarnessError::Format(format!(
                "field `{name}` has {} values for {} nodes",
                values.len(),
                domain.len()
            )));
        }
    }
    let meta = DumpMeta {
        format_version: 1,
        dim: domain.dim(),
        shape: domain.shape().to_vec(),
        n_nodes: domain.len(),
        time,
        step,
        fields: fields.iter().map(|(n, _)| n.to_string()).collect(),
    };
    let header = serde_json::to_vec(&meta).map_err(|e| HarnessError::Format(e.to_string()))?;
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&(header.len() as u64).to_le_bytes())?;
    w.write_all(&header)?;
    for (_, values) in fields {
        for v in *values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_dump(path: &Path) -> Result<(DumpMeta, Vec<Vec<f64>>), HarnessError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |m: &str| HarnessError::Format(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != DUMP_MAGIC {
        return Err(fail("missing dump magic"));
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes.get(16..16 + len).ok_or_else(|| fail("truncated header"))?;
    let meta: DumpMeta = serde_json::from_slice(body).map_err(|e| fail(&e.to_string()))?;
    let data = &bytes[16 + len..];
    if data.len() != meta.fields.len() * meta.n_nodes * 8 {
        return Err(fail("payload size does not match metadata"));
    }
    let fields = data
        .chunks_exact(meta.n_nodes * 8)
        .map(|c| {
            c.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
                .collect()
        })
        .collect();
    Ok((meta, fields))
}

/// Dumps `eta_*` and `v_*` components of a state.
pub fn write_state_dump(
    path: &Path,
    domain: &DiscreteDomain,
    state: &FlowState,
    step: usize,
) -> Result<(), HarnessError> {
    const AXES: [&str; 3] = ["x", "y", "z"];
    let dim = domain.dim();
    let names: Vec<String> = (0..dim)
        .map(|r| format!("eta_{}", AXES[r]))
        .chain((0..dim).map(|r| format!("v_{}", AXES[r])))
        .collect();
    let fields: Vec<(&str, &[f64])> = names
        .iter()
        .zip(state.eta.comps[..dim].iter().chain(&state.v.comps[..dim]))
        .map(|(n, c)| (n.as_str(), c.as_slice()))
        .collect();
    write_dump(path, domain, state.time, step, &fields)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.bin");
        let d = DiscreteDomain::new(2, 4, 5).unwrap();
        let a: Vec<f64> = (0..d.len()).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = (0..d.len()).map(|i| -(i as f64)).collect();
        write_dump(&p, &d, 0.25, 3, &[("a", &a), ("b", &b)]).unwrap();
        let (meta, fields) = read_dump(&p).unwrap();
        assert_eq!(meta.shape, vec![4, 5]);
        assert_eq!(meta.fields, vec!["a", "b"]);
        assert_eq!(fields, vec![a, b]);
        let bytes = std::fs::read(&p).unwrap();
        assert_eq!(&bytes[..8], DUMP_MAGIC);
    }

    #[test]
    fn csv_keeps_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.csv");
        let x = 0.1 + 0.2;
        write_csv(std::fs::File::create(&p).unwrap(), "a,b", &[vec![x, -1e-300]]).unwrap();
        let (h, rows) = read_csv(&p).unwrap();
        assert_eq!(h, vec!["a", "b"]);
        assert_eq!(rows[0], vec![x, -1e-300]);
    }
}
