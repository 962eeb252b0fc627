//! Output files. Every file is written to a temporary sibling and renamed
//! into place, so readers never see a partial file.
//!
//! Summary CSV columns:
//!
//! | column | meaning |
//! |---|---|
//! | `t` | grid node |
//! | `mean_y` | mean of `Y` over all paths |
//! | `std_y` | sample standard deviation of `Y` |
//! | `mean_abs_z` | mean of `|Z|` (Euclidean norm) |
//! | `max_residual` | max absolute discrete residual at the node |
//!
//! Ladder CSVs prefix the same columns with `rung,index`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use bdsde_core::solver::{DiscreteSolution, NodeSummary};
use serde::Serialize;

use crate::CliError;

pub const SUMMARY_HEADER: &str = "t,mean_y,std_y,mean_abs_z,max_residual";

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let name = path.file_name().ok_or_else(|| CliError::Usage(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = std::fs::remove_file(&tmp);
        return Err(CliError::io(path, e));
    }
    Ok(())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

fn summary_row(out: &mut String, s: &NodeSummary) {
    let _ = writeln!(out, "{},{},{},{},{}", s.t, s.mean_y, s.std_y, s.mean_abs_z, s.max_residual);
}

pub fn summary_csv(solution: &DiscreteSolution) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for row in solution.summary() {
        summary_row(&mut out, &row);
    }
    out
}

pub fn ladder_csv(indices: &[f64], iterates: &[DiscreteSolution]) -> String {
    let mut out = format!("rung,index,{SUMMARY_HEADER}\n");
    for (k, (n, sol)) in indices.iter().zip(iterates).enumerate() {
        for row in sol.summary() {
            let _ = write!(out, "{k},{n},");
            summary_row(&mut out, &row);
        }
    }
    out
}

/// Full paths: `outer,inner,node,t,y,z1..zd`.
pub fn paths_csv(solution: &DiscreteSolution) -> String {
    let mut out = String::from("outer,inner,node,t,y");
    for k in 1..=solution.d() {
        let _ = write!(out, ",z{k}");
    }
    out.push('\n');
    let grid = solution.grid();
    for o in 0..solution.outer() {
        for j in 0..solution.inner() {
            for i in 0..solution.nodes() {
                let _ = write!(out, "{o},{j},{i},{},{}", grid.node(i), solution.y(o, j, i));
                for z in solution.z(o, j, i) {
                    let _ = write!(out, ",{z}");
                }
                out.push('\n');
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/out.txt");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "two");
        let leftovers = std::fs::read_dir(path.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }
}
