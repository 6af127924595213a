//! Artifact files: grid files (one JSON metadata line, then
//! `cell_index,value…` rows) and the JSON form of effective coefficients.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::ergodic::{CorrectorField, CorrectorKind, EffectiveCoefficients, OccupationGrid, Provenance};
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::lattice::SupportMask;

/// First line of a grid file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub n: usize,
    pub d: usize,
    /// `occupation`, `mask`, `corrector_vector` or `corrector_scalar`.
    pub kind: String,
    pub seed: u64,
    pub counts_total: u64,
    /// Kind-specific settings (corrector horizon, mask threshold, …).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub info: serde_json::Value,
    /// Resolved run configuration that produced the file.
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub config: serde_json::Value,
}

fn write_rows<W: Write>(mut w: W, meta: &GridMeta, header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    writeln!(w, "{}", serde_json::to_string(meta)?)?;
    writeln!(w, "{}", header.join(","))?;
    for (i, row) in rows.enumerate() {
        writeln!(w, "{i},{}", row.join(","))?;
    }
    Ok(())
}

/// Metadata and the value columns of each row, checked against the grid size.
fn read_rows<R: BufRead>(r: R) -> Result<(GridMeta, Vec<Vec<String>>)> {
    let mut lines = r.lines();
    let meta: GridMeta = serde_json::from_str(&lines.next().ok_or_else(|| Error::invalid("empty grid file"))??)?;
    lines.next().ok_or_else(|| Error::invalid("grid file lacks a header"))??;
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(str::to_string);
        let idx: usize = fields
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::invalid(format!("bad cell index on row {i}")))?;
        if idx != i {
            return Err(Error::invalid(format!("row {i} has cell index {idx}")));
        }
        rows.push(fields.collect());
    }
    if rows.len() != Grid::new(meta.n, meta.d).len() {
        return Err(Error::invalid("row count does not match n^d"));
    }
    Ok((meta, rows))
}

fn parse<T: std::str::FromStr>(s: &str) -> Result<T> {
    s.trim().parse().map_err(|_| Error::invalid(format!("bad number {s:?}")))
}

pub fn write_occupation<W: Write>(occ: &OccupationGrid, seed: u64, config: serde_json::Value, w: W) -> Result<()> {
    let meta = GridMeta {
        n: occ.grid.n,
        d: occ.grid.d,
        kind: "occupation".into(),
        seed,
        counts_total: occ.total,
        info: serde_json::Value::Null,
        config,
    };
    let header = vec!["cell_index".into(), "count".into(), "probability".into()];
    let p = occ.probabilities();
    write_rows(w, &meta, &header, occ.counts.iter().zip(p).map(|(c, p)| vec![c.to_string(), p.to_string()]))
}

pub fn read_occupation<R: BufRead>(r: R) -> Result<OccupationGrid> {
    let (meta, rows) = read_rows(r)?;
    if meta.kind != "occupation" {
        return Err(Error::invalid(format!("expected an occupation file, found {:?}", meta.kind)));
    }
    let counts = rows
        .iter()
        .map(|r| parse::<u64>(r.first().map_or("", String::as_str)))
        .collect::<Result<Vec<_>>>()?;
    OccupationGrid::from_counts(Grid::new(meta.n, meta.d), counts)
}

pub fn write_mask<W: Write>(mask: &SupportMask, seed: u64, config: serde_json::Value, w: W) -> Result<()> {
    let meta = GridMeta {
        n: mask.grid.n,
        d: mask.grid.d,
        kind: "mask".into(),
        seed,
        counts_total: mask.count() as u64,
        info: serde_json::json!({ "theta": mask.theta, "clean_iters": mask.clean_iters }),
        config,
    };
    let header = vec!["cell_index".into(), "in_support".into(), "component".into()];
    let rows = mask.mask.iter().zip(&mask.labels).map(|(m, l)| {
        vec![
            (*m as u8).to_string(),
            l.map_or_else(|| "-1".to_string(), |c| c.to_string()),
        ]
    });
    write_rows(w, &meta, &header, rows)
}

pub fn read_mask<R: BufRead>(r: R) -> Result<SupportMask> {
    let (meta, rows) = read_rows(r)?;
    if meta.kind != "mask" {
        return Err(Error::invalid(format!("expected a mask file, found {:?}", meta.kind)));
    }
    let cells = rows
        .iter()
        .map(|r| parse::<u8>(r.first().map_or("", String::as_str)).map(|v| v != 0))
        .collect::<Result<Vec<_>>>()?;
    SupportMask::from_cells(Grid::new(meta.n, meta.d), cells)
}

#[derive(Serialize, Deserialize)]
struct CorrectorInfo {
    components: usize,
    agreement: f64,
    gradient_flag: bool,
    t_corr: f64,
    n_paths: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    jackknife: Vec<Vec<f64>>,
}

/// Rows hold `r` values, `r·d` gradient entries, then their standard errors.
pub fn write_corrector<W: Write>(field: &CorrectorField, config: serde_json::Value, w: W) -> Result<()> {
    let (r, d) = (field.components, field.grid.d);
    let kind = match field.kind {
        CorrectorKind::Vector => "corrector_vector",
        CorrectorKind::Scalar => "corrector_scalar",
    };
    let info = CorrectorInfo {
        components: r,
        agreement: field.agreement,
        gradient_flag: field.gradient_flag,
        // JSON has no infinity
        t_corr: if field.t_corr.is_finite() { field.t_corr } else { -1.0 },
        n_paths: field.n_paths,
        jackknife: field.jackknife.clone(),
    };
    let meta = GridMeta {
        n: field.grid.n,
        d,
        kind: kind.into(),
        seed: field.seed,
        counts_total: field.n_paths as u64,
        info: serde_json::to_value(info)?,
        config,
    };
    let mut header = vec!["cell_index".to_string()];
    header.extend((1..=r).map(|l| format!("v{l}")));
    header.extend((1..=r).flat_map(|l| (1..=d).map(move |k| format!("g{l}_{k}"))));
    header.extend((1..=r).map(|l| format!("se_v{l}")));
    header.extend((1..=r).flat_map(|l| (1..=d).map(move |k| format!("se_g{l}_{k}"))));
    let rows = (0..field.grid.len()).map(|c| {
        let mut row: Vec<String> = field.values[c * r..(c + 1) * r].iter().map(f64::to_string).collect();
        row.extend(field.gradients[c * r * d..(c + 1) * r * d].iter().map(f64::to_string));
        row.extend(field.value_stderr[c * r..(c + 1) * r].iter().map(f64::to_string));
        row.extend(field.gradient_stderr[c * r * d..(c + 1) * r * d].iter().map(f64::to_string));
        row
    });
    write_rows(w, &meta, &header, rows)
}

pub fn read_corrector<R: BufRead>(r: R) -> Result<CorrectorField> {
    let (meta, rows) = read_rows(r)?;
    let kind = match meta.kind.as_str() {
        "corrector_vector" => CorrectorKind::Vector,
        "corrector_scalar" => CorrectorKind::Scalar,
        other => return Err(Error::invalid(format!("expected a corrector file, found {other:?}"))),
    };
    let info: CorrectorInfo = serde_json::from_value(meta.info.clone())?;
    let (rc, d) = (info.components, meta.d);
    let width = 2 * (rc + rc * d);
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); 4];
    for row in &rows {
        if row.len() != width {
            return Err(Error::invalid("corrector row has the wrong number of columns"));
        }
        let v = row.iter().map(|s| parse::<f64>(s)).collect::<Result<Vec<_>>>()?;
        let mut at = 0;
        for (slot, len) in [rc, rc * d, rc, rc * d].into_iter().enumerate() {
            cols[slot].extend_from_slice(&v[at..at + len]);
            at += len;
        }
    }
    let grid = Grid::new(meta.n, d);
    let mut field = CorrectorField::exact(grid, kind, cols[0].clone(), cols[1].clone());
    field.value_stderr = cols[2].clone();
    field.gradient_stderr = cols[3].clone();
    field.agreement = info.agreement;
    field.gradient_flag = info.gradient_flag;
    field.t_corr = if info.t_corr < 0.0 { f64::INFINITY } else { info.t_corr };
    field.n_paths = info.n_paths;
    field.seed = meta.seed;
    field.jackknife = info.jackknife;
    Ok(field)
}

/// `{A, C, stderr_A, stderr_C, provenance}` with matrices as nested rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDocument {
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    pub c: Vec<f64>,
    #[serde(rename = "stderr_A")]
    pub stderr_a: Vec<Vec<f64>>,
    #[serde(rename = "stderr_C")]
    pub stderr_c: Vec<f64>,
    #[serde(rename = "D0", default, skip_serializing_if = "Option::is_none")]
    pub d0: Option<f64>,
    #[serde(rename = "stderr_D0", default, skip_serializing_if = "Option::is_none")]
    pub stderr_d0: Option<f64>,
    pub provenance: Provenance,
}

impl From<&EffectiveCoefficients> for EffectiveDocument {
    fn from(e: &EffectiveCoefficients) -> Self {
        let rows = |v: &[f64]| v.chunks(e.d).map(<[f64]>::to_vec).collect();
        EffectiveDocument {
            a: rows(&e.a),
            c: e.c.clone(),
            stderr_a: rows(&e.a_stderr),
            stderr_c: e.c_stderr.clone(),
            d0: e.d0,
            stderr_d0: e.d0_stderr,
            provenance: e.provenance.clone(),
        }
    }
}

impl TryFrom<EffectiveDocument> for EffectiveCoefficients {
    type Error = Error;

    fn try_from(doc: EffectiveDocument) -> Result<Self> {
        let d = doc.c.len();
        let square = |m: &[Vec<f64>]| m.len() == d && m.iter().all(|r| r.len() == d);
        if !square(&doc.a) || !square(&doc.stderr_a) || doc.stderr_c.len() != d {
            return Err(Error::invalid("effective coefficients: A must be d × d and C of length d"));
        }
        Ok(EffectiveCoefficients {
            d,
            a: doc.a.concat(),
            a_stderr: doc.stderr_a.concat(),
            c: doc.c,
            c_stderr: doc.stderr_c,
            d0: doc.d0,
            d0_stderr: doc.stderr_d0,
            provenance: doc.provenance,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn occupation_round_trip() {
        let occ = OccupationGrid::from_counts(Grid::new(4, 2), (0..16).collect()).unwrap();
        let mut buf = Vec::new();
        write_occupation(&occ, 3, serde_json::Value::Null, &mut buf).unwrap();
        assert_eq!(read_occupation(&buf[..]).unwrap(), occ);
        let first = std::str::from_utf8(&buf).unwrap().lines().next().unwrap();
        let meta: GridMeta = serde_json::from_str(first).unwrap();
        assert_eq!((meta.kind.as_str(), meta.counts_total), ("occupation", 120));
    }

    #[test]
    fn mask_round_trip() {
        let cells: Vec<bool> = (0..64).map(|i| i % 8 < 3).collect();
        let mask = SupportMask::from_cells(Grid::new(8, 2), cells).unwrap();
        let mut buf = Vec::new();
        write_mask(&mask, 0, serde_json::json!({"task": "lattice"}), &mut buf).unwrap();
        assert_eq!(read_mask(&buf[..]).unwrap().mask, mask.mask);
    }

    #[test]
    fn corrector_round_trip() {
        let grid = Grid::new(4, 2);
        let mut f = CorrectorField::exact(
            grid,
            CorrectorKind::Vector,
            (0..32).map(|i| i as f64 * 0.1).collect(),
            (0..64).map(|i| -(i as f64) / 7.0).collect(),
        );
        f.value_stderr[3] = 0.25;
        f.n_paths = 12;
        let mut buf = Vec::new();
        write_corrector(&f, serde_json::Value::Null, &mut buf).unwrap();
        assert_eq!(read_corrector(&buf[..]).unwrap(), f);
    }

    #[test]
    fn effective_round_trip() {
        let e = EffectiveCoefficients {
            d: 2,
            a: vec![1.0, 0.1, 0.1, 2.0],
            a_stderr: vec![0.01; 4],
            c: vec![0.0, 0.5],
            c_stderr: vec![0.0; 2],
            d0: Some(0.3),
            d0_stderr: Some(0.01),
            provenance: Provenance::default(),
        };
        let doc = EffectiveDocument::from(&e);
        let text = serde_json::to_string(&doc).unwrap();
        assert!(text.contains("\"A\":[[1.0,0.1],[0.1,2.0]]"));
        let back: EffectiveDocument = serde_json::from_str(&text).unwrap();
        assert_eq!(EffectiveCoefficients::try_from(back).unwrap(), e);
    }
}
