//! CSV output. Every float is written with 17 significant digits.

use std::path::Path;

use crate::error::{CliError, CliResult};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Builds the whole file in memory and writes it in one go.
pub fn write(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> CliResult<()> {
    let failed = |source| CliError::Write { path: path.display().to_string(), source };
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    let io = |e: csv::Error| std::io::Error::other(e.to_string());
    w.write_record(header).map_err(io).map_err(failed)?;
    for row in rows {
        w.write_record(row.into_iter().map(float)).map_err(io).map_err(failed)?;
    }
    let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string())).map_err(failed)?;
    std::fs::write(path, bytes).map_err(failed)
}

/// `prefix1..prefixn`.
pub fn numbered(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, -1.0 / 3.0, 1e-300, 6.02214076e23, 0.0] {
            assert_eq!(float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
        assert_eq!(float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn writes_unix_newlines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write(&path, &["a".into(), "b".into()], [vec![1.0, 2.0]]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "a,b\n1.0000000000000000e0,2.0000000000000000e0\n");
    }
}
