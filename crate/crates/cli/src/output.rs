//! Tables written as CSV or JSON, plus the observables recorded per snapshot.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use wqed::geometry::CollectiveOps;
use wqed::operator::StateDM;

use crate::scenario::Observable;
use crate::Format;

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

pub fn write_table(dir: &Path, stem: &str, format: Format, table: &Table) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(format!("{stem}.{}", match format {
        Format::Csv => "csv",
        Format::Json => "json",
    }));
    let mut w = BufWriter::new(File::create(&path)?);
    match format {
        Format::Csv => wqed::io::write_csv(&mut w, &table.header, &table.rows)?,
        Format::Json => {
            let v = serde_json::json!({ "columns": table.header, "rows": table.rows });
            serde_json::to_writer_pretty(&mut w, &v)?;
            writeln!(w)?;
        }
    }
    w.flush()?;
    Ok(path)
}

pub fn observable_header(co: &CollectiveOps, outputs: &[Observable]) -> Vec<String> {
    let n = co.n_emitters();
    let mut h = Vec::new();
    for o in outputs {
        match o {
            Observable::Populations => h.extend((0..n).map(|i| format!("pop_{i}"))),
            Observable::Correlations => {
                for i in 0..n {
                    for j in i + 1..n {
                        h.push(format!("corr_{i}_{j}_re"));
                        h.push(format!("corr_{i}_{j}_im"));
                    }
                }
            }
            Observable::Purity => h.push("purity".into()),
        }
    }
    h
}

pub fn observables(co: &CollectiveOps, outputs: &[Observable], rho: &StateDM) -> Vec<f64> {
    let n = co.n_emitters();
    let mut v = Vec::new();
    for o in outputs {
        match o {
            Observable::Populations => {
                v.extend(co.local.iter().map(|a| rho.expect(&(&a.adjoint() * a)).re));
            }
            Observable::Correlations => {
                for i in 0..n {
                    for j in i + 1..n {
                        let c = rho.expect(&(&co.local[i].adjoint() * &co.local[j]));
                        v.push(c.re);
                        v.push(c.im);
                    }
                }
            }
            Observable::Purity => v.push(rho.purity()),
        }
    }
    v
}
