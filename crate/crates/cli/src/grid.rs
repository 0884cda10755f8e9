//! CSV sample grids: one row per plan point with the field value and every
//! pairwise Flex.

use std::io::Write;
use std::path::{Path, PathBuf};

use geoweb_core::field::ScalarField;
use geoweb_core::sampling::SamplePlan;
use geoweb_core::webcheck::flex_at;

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = (1..=n).map(|k| format!("x{k}")).collect();
    h.push("f".into());
    for i in 1..=n {
        for j in i + 1..=n {
            h.push(format!("Flex_{i}{j}"));
        }
    }
    h
}

/// Writes the grid of `field` over `plan` as CSV. Rows follow plan order;
/// cells that fail to evaluate are left empty.
pub fn write_grid<W: Write>(field: &dyn ScalarField, plan: &SamplePlan, out: W) -> csv::Result<()> {
    let n = field.dimension();
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(n))?;
    for p in plan.points() {
        let mut row: Vec<String> = p.iter().map(|x| num(*x)).collect();
        match field.jet(&p) {
            Ok(jet) => {
                row.push(num(jet.value));
                for i in 0..n {
                    for j in i + 1..n {
                        row.push(num(flex_at(&jet, i, j)));
                    }
                }
            }
            Err(_) => row.extend(std::iter::repeat_n(String::new(), 1 + n * (n - 1) / 2)),
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_grid(field: &dyn ScalarField, plan: &SamplePlan, path: &Path) -> csv::Result<()> {
    let file = std::fs::File::create(path)?;
    write_grid(field, plan, std::io::BufWriter::new(file))
}

/// Output path for the `index`-th of `count` fields: the path itself when
/// there is one field, otherwise `stem-name.ext`.
pub fn grid_path(base: &Path, name: &str, count: usize) -> PathBuf {
    if count <= 1 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let file = match base.extension() {
        Some(ext) => format!("{stem}-{name}.{}", ext.to_string_lossy()),
        None => format!("{stem}-{name}"),
    };
    base.with_file_name(file)
}
