//! File formats: field CSV (17 significant digits, node order), plain P2
//! PGM for 2D fields, free-boundary CSV, and JSON-lines episode logs.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use crate::domain::GridDomain;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::game::EpisodeRecord;

/// 17 significant digits round-trips any f64 exactly.
pub fn fmt_g17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Header `x,value` (1D) or `x,y,value` (2D), one row per node in node order.
pub fn write_field_csv<W: Write>(field: &ScalarField, out: &mut W) -> Result<()> {
    let grid = field.domain();
    if grid.dim() == 1 {
        writeln!(out, "x,value")?;
        for id in 0..grid.node_count() {
            let p = grid.coords(id);
            writeln!(out, "{},{}", fmt_g17(p[0]), fmt_g17(field.get(id)))?;
        }
    } else {
        writeln!(out, "x,y,value")?;
        for id in 0..grid.node_count() {
            let p = grid.coords(id);
            writeln!(out, "{},{},{}", fmt_g17(p[0]), fmt_g17(p[1]), fmt_g17(field.get(id)))?;
        }
    }
    Ok(())
}

pub fn save_field_csv(field: &ScalarField, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    write_field_csv(field, &mut out)
}

/// Reads a field CSV written by [`write_field_csv`] back onto its grid.
pub fn read_field_csv<R: BufRead>(domain: &Arc<GridDomain>, input: R) -> Result<ScalarField> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty field CSV".into()))??;
    let expect = if domain.dim() == 1 { "x,value" } else { "x,y,value" };
    if header.trim() != expect {
        return Err(Error::Parse(format!("field CSV header {header:?}, expected {expect:?}")));
    }
    let coord_cols = domain.dim();
    let mut values = Vec::with_capacity(domain.node_count());
    for (row, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != coord_cols + 1 {
            return Err(Error::Parse(format!("row {}: expected {} columns", row + 2, coord_cols + 1)));
        }
        let id = values.len();
        if id >= domain.node_count() {
            return Err(Error::Parse("field CSV has more rows than grid nodes".into()));
        }
        let p = domain.coords(id);
        for (c, want) in fields[..coord_cols].iter().zip(p.iter()) {
            let got: f64 = c
                .trim()
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad coordinate {c:?}", row + 2)))?;
            if (got - want).abs() > 1e-9 * domain.spacing() {
                return Err(Error::Parse(format!(
                    "row {} coordinate {got} does not match node at {want}",
                    row + 2
                )));
            }
        }
        let v: f64 = fields[coord_cols]
            .trim()
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad value", row + 2)))?;
        values.push(v);
    }
    if values.len() != domain.node_count() {
        return Err(Error::Parse(format!(
            "field CSV has {} rows for {} nodes",
            values.len(),
            domain.node_count()
        )));
    }
    ScalarField::new(Arc::clone(domain), values)
}

pub fn load_field_csv(domain: &Arc<GridDomain>, path: &Path) -> Result<ScalarField> {
    let file = std::fs::File::open(path)?;
    read_field_csv(domain, std::io::BufReader::new(file))
}

/// Plain (ASCII) P2 PGM of a 2D field: values affinely mapped [min, max] →
/// [0, 255], rows top-to-bottom in y, background pixels (bounding-box cells
/// without a node) at 0. 1D fields are a usage error.
pub fn write_field_pgm<W: Write>(field: &ScalarField, out: &mut W) -> Result<()> {
    let grid = field.domain();
    if grid.dim() != 2 {
        return Err(Error::Contract("PGM export is defined for 2D fields only".into()));
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in field.values() {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let (mut i_lo, mut i_hi, mut j_lo, mut j_hi) = (i64::MAX, i64::MIN, i64::MAX, i64::MIN);
    for id in 0..grid.node_count() {
        let [i, j] = grid.lattice_coords(id);
        i_lo = i_lo.min(i);
        i_hi = i_hi.max(i);
        j_lo = j_lo.min(j);
        j_hi = j_hi.max(j);
    }
    let width = (i_hi - i_lo + 1) as usize;
    let height = (j_hi - j_lo + 1) as usize;
    writeln!(out, "P2")?;
    writeln!(out, "{width} {height}")?;
    writeln!(out, "255")?;
    let span = hi - lo;
    for j in (j_lo..=j_hi).rev() {
        let mut row = Vec::with_capacity(width);
        for i in i_lo..=i_hi {
            let pix = match grid.node_at([i, j]) {
                Some(id) if span > 0.0 => ((field.get(id) - lo) / span * 255.0).round() as u8,
                Some(_) => 0,
                None => 0,
            };
            row.push(pix.to_string());
        }
        writeln!(out, "{}", row.join(" "))?;
    }
    Ok(())
}

pub fn save_field_pgm(field: &ScalarField, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    write_field_pgm(field, &mut out)
}

/// Free-boundary point cloud as CSV `x` or `x,y`.
pub fn write_points_csv<W: Write>(points: &[[f64; 2]], dim: usize, out: &mut W) -> Result<()> {
    writeln!(out, "{}", if dim == 1 { "x" } else { "x,y" })?;
    for p in points {
        if dim == 1 {
            writeln!(out, "{}", fmt_g17(p[0]))?;
        } else {
            writeln!(out, "{},{}", fmt_g17(p[0]), fmt_g17(p[1]))?;
        }
    }
    Ok(())
}

/// One EpisodeRecord per line, JSON.
pub fn write_episodes_jsonl<W: Write>(records: &[EpisodeRecord], out: &mut W) -> Result<()> {
    for rec in records {
        let line = serde_json::to_string(rec)
            .map_err(|e| Error::Parse(format!("episode serialization: {e}")))?;
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Raw `x[,y],value` rows for table boundary data.
pub fn read_table_csv<R: BufRead>(input: R) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut rows = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || n == 0 && t.chars().any(|c| c.is_alphabetic()) {
            continue; // optional header
        }
        let cols: Vec<&str> = t.split(',').collect();
        if cols.len() < 2 || cols.len() > 3 {
            return Err(Error::Parse(format!("table row {}: expected 2 or 3 columns", n + 1)));
        }
        let mut nums = Vec::with_capacity(cols.len());
        for c in &cols {
            nums.push(
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("table row {}: bad number {c:?}", n + 1)))?,
            );
        }
        let value = nums.pop().unwrap();
        rows.push((nums, value));
    }
    Ok(rows)
}
