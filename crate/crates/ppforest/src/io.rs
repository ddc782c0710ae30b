//! CSV input and the on-disk export formats.

use std::io::{Read, Write};
use std::path::Path;

use ppforest_core::diagnostics::{ImportanceSection, MdsEmbedding, RocCurve, SimplexCoords};
use ppforest_core::{Dataset, Matrix, PPTreeModel, ProximityMatrix};

use crate::error::{Error, Result};

/// Loads a headed CSV file; `label_column` names the class column and every
/// other column must be numeric.
///
/// Classes are numbered in order of first appearance.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| Error::ReadFile { path: path.into(), source })?;
    read_csv(file, label_column)
}

pub fn read_csv<R: Read>(reader: R, label_column: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h == label_column)
        .ok_or_else(|| Error::Data(format!("label column `{label_column}` not found")))?;
    let var_names: Vec<String> =
        headers.iter().enumerate().filter(|(i, _)| *i != label_idx).map(|(_, h)| h.to_string()).collect();
    let p = var_names.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        // header is line 1
        let row = r + 2;
        for (i, cell) in record.iter().enumerate() {
            if i == label_idx {
                if cell.is_empty() {
                    return Err(Error::Cell { row, column: label_column.into(), message: "missing label".into() });
                }
                labels.push(cell.to_string());
                continue;
            }
            let column = &headers[i];
            let v: f64 = cell.parse().map_err(|_| Error::Cell {
                row,
                column: column.into(),
                message: if cell.is_empty() { "missing value".into() } else { format!("`{cell}` is not numeric") },
            })?;
            if !v.is_finite() {
                return Err(Error::Cell { row, column: column.into(), message: format!("`{cell}` is not finite") });
            }
            values.push(v);
        }
    }
    let n = labels.len();
    let mut distinct = labels.clone();
    distinct.sort();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::Data(format!("need at least 2 classes in `{label_column}`, found {}", distinct.len())));
    }
    let features = Matrix::from_vec(n, p, values)?;
    Ok(Dataset::from_labels(features, &labels, var_names)?)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

/// `n × G` vote proportions with class names as header; unvoted rows are empty.
pub fn write_votes_csv<W: Write>(w: W, class_names: &[String], votes: &[Option<Vec<f64>>]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(class_names)?;
    for row in votes {
        match row {
            Some(r) => out.write_record(r.iter().map(f64::to_string))?,
            None => out.write_record(class_names.iter().map(|_| ""))?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Dense `n × n` proximities, one CSV row per case, no header.
pub fn write_proximity_csv<W: Write>(w: W, pm: &ProximityMatrix) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..pm.n() {
        out.write_record((0..pm.n()).map(|j| pm.get(i, j).to_string()))?;
    }
    out.flush()?;
    Ok(())
}

/// Binary proximities: `n` as little-endian u64, then `n²` little-endian f64 row-major.
pub fn write_proximity_bin<W: Write>(mut w: W, pm: &ProximityMatrix) -> Result<()> {
    w.write_all(&(pm.n() as u64).to_le_bytes())?;
    for i in 0..pm.n() {
        for j in 0..pm.n() {
            w.write_all(&pm.get(i, j).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_proximity_bin<R: Read>(mut r: R) -> Result<Matrix> {
    let mut word = [0u8; 8];
    r.read_exact(&mut word)?;
    let n = u64::from_le_bytes(word) as usize;
    let mut data = Vec::with_capacity(n * n);
    for _ in 0..n * n {
        r.read_exact(&mut word)?;
        data.push(f64::from_le_bytes(word));
    }
    Ok(Matrix::from_vec(n, n, data)?)
}

pub fn write_mds_csv<W: Write>(w: W, mds: &MdsEmbedding) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record((1..=mds.dims).map(|d| format!("dim{d}")))?;
    for row in &mds.coords {
        out.write_record(row.iter().map(f64::to_string))?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_simplex_csv<W: Write>(w: W, simplex: &SimplexCoords) -> Result<()> {
    let dims = simplex.vertices.first().map_or(0, Vec::len);
    let mut out = csv::Writer::from_writer(w);
    out.write_record((1..=dims).map(|d| format!("axis{d}")))?;
    for row in &simplex.coords {
        match row {
            Some(r) => out.write_record(r.iter().map(f64::to_string))?,
            None => out.write_record((0..dims).map(|_| ""))?,
        }
    }
    out.flush()?;
    Ok(())
}

/// Global importance per variable, one column per measure.
pub fn write_importance_csv<W: Write>(w: W, var_names: &[String], imp: &ImportanceSection) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["variable", "permuted", "ppforest1", "ppforest2"])?;
    for (j, name) in var_names.iter().enumerate() {
        out.write_record([
            name.clone(),
            imp.permuted.global[j].to_string(),
            fmt_opt(imp.ppforest1.as_ref().map(|t| t.global[j])),
            fmt_opt(imp.ppforest2.as_ref().map(|t| t.global[j])),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn write_roc_csv<W: Write>(w: W, class_names: &[String], roc: &[RocCurve]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["class", "class_name", "fpr", "tpr", "auc"])?;
    for curve in roc {
        for pt in &curve.points {
            out.write_record([
                curve.class.to_string(),
                class_names[curve.class].clone(),
                pt.fpr.to_string(),
                pt.tpr.to_string(),
                curve.auc.to_string(),
            ])?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One row per (tree, node, sampled variable).
pub fn write_trees_csv<W: Write>(w: W, trees: &[PPTreeModel]) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["tree_id", "node_id", "var_id", "coeff", "split_value", "index_value", "left", "right"])?;
    for t in trees {
        for node in &t.nodes {
            for (j, c) in node.projection.var_ids.iter().zip(&node.projection.coeffs) {
                out.write_record([
                    t.tree_id.to_string(),
                    node.id.to_string(),
                    j.to_string(),
                    c.to_string(),
                    node.split_value.to_string(),
                    node.index_value.value().to_string(),
                    node.left.to_string(),
                    node.right.to_string(),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_minimal_file() {
        let d = read_csv("x,y\n1.5,a\n2,b\n".as_bytes(), "y").unwrap();
        assert_eq!((d.n(), d.p(), d.n_classes()), (2, 1, 2));
        assert_eq!(d.var_names(), ["x"]);
    }

    #[test]
    fn label_column_can_be_anywhere() {
        let d = read_csv("cls,a,b\nu,1,2\nv,3,4\nu,5,6\n".as_bytes(), "cls").unwrap();
        assert_eq!(d.var_names(), ["a", "b"]);
        assert_eq!(d.labels(), [0, 1, 0]);
        assert_eq!(d.row(2), [5.0, 6.0]);
    }

    #[test]
    fn non_numeric_cell_reports_position() {
        let err = read_csv("x,z,y\n1,2,a\n2,oops,b\n".as_bytes(), "y").unwrap_err();
        match err {
            Error::Cell { row, column, .. } => assert_eq!((row, column.as_str()), (3, "z")),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn missing_value_is_rejected() {
        assert!(matches!(read_csv("x,y\n,a\n2,b\n".as_bytes(), "y"), Err(Error::Cell { .. })));
    }

    #[test]
    fn single_class_and_missing_label_column() {
        assert!(matches!(read_csv("x,y\n1,a\n2,a\n".as_bytes(), "y"), Err(Error::Data(_))));
        assert!(matches!(read_csv("x,y\n1,a\n2,b\n".as_bytes(), "class"), Err(Error::Data(_))));
    }

    #[test]
    fn missing_file_is_a_data_error() {
        let err = load_csv("/nonexistent/file.csv", "y").unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}
