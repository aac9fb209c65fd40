//! File formats: CSV tables at round-trip precision and pretty JSON.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use coag_core::diagnostics::MomentRow;
use coag_core::kernels::TabulatedKernel;
use coag_core::sizedomain::NumberDensity;
use serde::Serialize;

use crate::experiments::DistanceTable;

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))
}

/// Writes `header` and numeric rows.
pub fn write_table(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|x| fmt_f64(*x)))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_snapshot_csv(path: &Path, density: &NumberDensity) -> Result<()> {
    let g = &density.grid;
    write_table(
        path,
        &["x_center", "width", "zeta"],
        g.centers()
            .iter()
            .zip(g.widths())
            .zip(&density.values)
            .map(|((x, w), z)| vec![*x, *w, *z]),
    )
}

pub fn write_moments_csv(path: &Path, rows: &[MomentRow]) -> Result<()> {
    write_table(
        path,
        &["t", "M_neg2sigma", "M_negsigma", "M0", "M1", "Psi1", "Psi2int"],
        rows.iter()
            .map(|r| vec![r.t, r.m_neg2sigma, r.m_negsigma, r.m0, r.m1, r.psi1, r.psi2int]),
    )
}

/// Failed members are written with an empty distance.
pub fn write_distance_csv(path: &Path, table: &DistanceTable) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["eps", "n", "time", "distance"])?;
    for r in &table.rows {
        let d = r.distance.map(fmt_f64).unwrap_or_default();
        w.write_record([fmt_f64(r.eps), fmt_f64(r.n), fmt_f64(r.time), d])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Reads a kernel table with header `mu,nu,lambda`.
pub fn read_kernel_table(path: &Path) -> Result<TabulatedKernel> {
    let mut r = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != ["mu", "nu", "lambda"] {
        bail!("expected header mu,nu,lambda, found {}", header.join(","));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let field = |k: usize| -> Result<f64> {
            rec[k]
                .parse::<f64>()
                .with_context(|| format!("row {}: column {} is not a number", line + 2, header[k]))
        };
        rows.push((field(0)?, field(1)?, field(2)?));
    }
    Ok(TabulatedKernel::from_triples(&rows)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use coag_core::kernels::Kernel;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02214076e23, -2.5e-300, 1.0 + f64::EPSILON] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn kernel_table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.csv");
        let nodes = [0.1, 1.0, 10.0];
        let mut rows = Vec::new();
        for mu in nodes {
            for nu in nodes {
                rows.push(vec![mu, nu, mu + nu]);
            }
        }
        write_table(&path, &["mu", "nu", "lambda"], rows).unwrap();
        let table = read_kernel_table(&path).unwrap();
        let k = Kernel::tabulated(table, 2.0, 0.0, 0.0).unwrap();
        assert!((k.eval(1.0, 10.0).unwrap() - 11.0).abs() < 1e-12);

        fs::write(&path, "a,b,c\n1,1,1\n").unwrap();
        assert!(read_kernel_table(&path).unwrap_err().to_string().contains("mu,nu,lambda"));
        fs::write(&path, "mu,nu,lambda\n1,x,1\n").unwrap();
        let err = format!("{:#}", read_kernel_table(&path).unwrap_err());
        assert!(err.contains("row 2"), "{err}");
    }
}
