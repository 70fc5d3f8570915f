//! CSV dumps and heatmap images.
//!
//! Snapshot files hold one row per grid node and one column per time, with
//! a header row of time stamps. Values are written with Rust's shortest
//! round-trip float formatting so files reload bit-exactly.

use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::metrics::RunStats;
use crate::opinf::ReducedModel;
use crate::pod::PodBasis;
use crate::schwarz::CoupledRun;

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn join<T: ToString>(values: impl IntoIterator<Item = T>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

fn matrix_rows(m: &DMatrix<f64>) -> String {
    let mut out = String::with_capacity(m.nrows() * m.ncols() * 20);
    for row in m.row_iter() {
        out.push_str(&join(row.iter()));
        out.push('\n');
    }
    out
}

/// Full-nodal snapshot matrix, `n_nodes` rows by `times.len()` columns.
pub fn write_snapshot_csv(path: &Path, times: &[f64], full: &DMatrix<f64>) -> Result<()> {
    if full.ncols() != times.len() {
        return Err(Error::InvalidArgument(format!(
            "{} columns but {} time stamps",
            full.ncols(),
            times.len()
        )));
    }
    let mut text = join(times.iter());
    text.push('\n');
    text.push_str(&matrix_rows(full));
    write_text(path, &text)
}

pub fn read_snapshot_csv(path: &Path) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::format(path, "empty snapshot file"))?;
    let times = parse_row(path, header, 1)?;
    let mut values = Vec::new();
    let mut rows = 0;
    for (k, line) in lines.enumerate() {
        let row = parse_row(path, line, k + 2)?;
        if row.len() != times.len() {
            return Err(Error::format(
                path,
                format!("line {} has {} values, header has {}", k + 2, row.len(), times.len()),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    Ok((times.clone(), DMatrix::from_row_slice(rows, times.len(), &values)))
}

fn parse_row(path: &Path, line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::format(path, format!("line {lineno}: invalid number `{}`", s.trim())))
        })
        .collect()
}

/// Boundary history: `node,<times...>` then one row per boundary node.
pub fn write_boundary_csv(path: &Path, times: &[f64], nodes: &[usize], values: &DMatrix<f64>) -> Result<()> {
    let mut text = format!("node,{}\n", join(times.iter()));
    for (row, node) in values.row_iter().zip(nodes) {
        text.push_str(&format!("{node},{}\n", join(row.iter())));
    }
    write_text(path, &text)
}

/// Basis matrix (`N` rows by `r` columns) and its singular values.
pub fn write_basis_csv(basis_path: &Path, sigma_path: &Path, basis: &PodBasis) -> Result<()> {
    write_text(basis_path, &matrix_rows(&basis.psi))?;
    let mut text = String::from("index,singular_value\n");
    for (k, s) in basis.singular_values.iter().enumerate() {
        text.push_str(&format!("{},{s}\n", k + 1));
    }
    write_text(sigma_path, &text)
}

/// Operator dump: `K̂` rows, then `B̂` rows, each preceded by a comment header.
pub fn write_operators_csv(path: &Path, model: &ReducedModel) -> Result<()> {
    let r = model.rank();
    let m = model.n_boundary();
    let mut text = format!("# r={r} m={m} lambda={}\n# K_hat ({r}x{r})\n", model.lambda);
    text.push_str(&matrix_rows(&model.k_hat));
    text.push_str(&format!("# B_hat ({r}x{m})\n"));
    text.push_str(&matrix_rows(&model.b_hat));
    write_text(path, &text)
}

/// Per-step table: `step,t,sweeps,eps_abs,eps_rel`.
pub fn write_steps_csv(path: &Path, run: &CoupledRun) -> Result<()> {
    let mut text = String::from("step,t,sweeps,eps_abs,eps_rel\n");
    for (k, (sweeps, (ea, er))) in run.sweeps.iter().zip(&run.final_eps).enumerate() {
        text.push_str(&format!("{},{},{sweeps},{ea:e},{er:e}\n", k + 1, run.times[k + 1]));
    }
    write_text(path, &text)
}

/// Appends one row to a stats table, writing the header on first use.
pub fn append_stats_row(path: &Path, row: &str) -> Result<()> {
    let fresh = !path.exists();
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    if !fresh {
        let existing = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if existing.lines().next() != Some(RunStats::CSV_HEADER) {
            return Err(Error::format(path, "existing stats file has a different header"));
        }
    }
    let mut file = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(RunStats::CSV_HEADER);
        text.push('\n');
    }
    text.push_str(row);
    text.push('\n');
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Binary grayscale pixmap (P6, equal RGB channels) of a nodal field on an
/// `(nx+1) x (ny+1)` grid, top row = largest y. Linear min-max scaling;
/// a constant field maps to 0.
pub fn render_ppm(nx: usize, ny: usize, values: &[f64]) -> Result<Vec<u8>> {
    let (w, h) = (nx + 1, ny + 1);
    if values.len() != w * h {
        return Err(Error::InvalidArgument(format!(
            "field has {} values, grid has {}",
            values.len(),
            w * h
        )));
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let mut out = format!("P6\n{w} {h}\n255\n").into_bytes();
    out.reserve(3 * w * h);
    for j in (0..h).rev() {
        for i in 0..w {
            let v = values[j * w + i];
            let level = if span > 0.0 && span.is_finite() {
                ((v - lo) / span * 255.0).round().clamp(0.0, 255.0) as u8
            } else {
                0
            };
            out.extend_from_slice(&[level; 3]);
        }
    }
    Ok(out)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn snapshot_csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        let m = DMatrix::from_row_slice(2, 3, &[0.0, 0.5, 1.0, 2.0, 2.5, 3.0]);
        write_snapshot_csv(&path, &[0.0, 0.1, 0.2], &m).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "0,0.1,0.2\n0,0.5,1\n2,2.5,3\n");
        let (times, back) = read_snapshot_csv(&path).unwrap();
        assert_eq!(times, vec![0.0, 0.1, 0.2]);
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_snapshot_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "0,1\n1,2,3\n").unwrap();
        assert!(matches!(read_snapshot_csv(&path), Err(Error::Format { .. })));
        fs::write(&path, "0,x\n").unwrap();
        assert!(matches!(read_snapshot_csv(&path), Err(Error::Format { .. })));
        assert!(matches!(
            read_snapshot_csv(&dir.path().join("missing.csv")),
            Err(Error::Io { .. })
        ));
    }

    proptest! {
        #[test]
        fn snapshot_values_reload_bit_exactly(values in proptest::collection::vec(-1e6f64..1e6, 6)) {
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("s.csv");
            let m = DMatrix::from_row_slice(3, 2, &values);
            write_snapshot_csv(&path, &[0.0, 0.01], &m).unwrap();
            let (_, back) = read_snapshot_csv(&path).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn render_degenerate_and_ramp() {
        let zero = render_ppm(2, 1, &[0.0; 6]).unwrap();
        let header = b"P6\n3 2\n255\n";
        assert_eq!(&zero[..header.len()], header);
        assert!(zero[header.len()..].iter().all(|&b| b == 0));

        let constant = render_ppm(2, 1, &[3.0; 6]).unwrap();
        let px = &constant[header.len()..];
        assert!(px.iter().all(|&b| b == px[0]));

        let ramp = render_ppm(1, 1, &[0.0, 1.0, 2.0, 3.0]).unwrap();
        // top row first: nodes 2, 3 then 0, 1
        assert_eq!(&ramp[header.len() - 1..], &[b'\n', 170, 170, 170, 255, 255, 255, 0, 0, 0, 85, 85, 85][..]);
        assert!(render_ppm(1, 1, &[0.0; 3]).is_err());
    }

    #[test]
    fn stats_header_is_written_once() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stats.csv");
        append_stats_row(&path, "a").unwrap();
        append_stats_row(&path, "b").unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, format!("{}\na\nb\n", RunStats::CSV_HEADER));
        fs::write(&path, "other\n").unwrap();
        assert!(append_stats_row(&path, "c").is_err());
    }
}
