//! System files: one `key = value` entry per line, `#` comments.
//!
//! ```text
//! dof = 2
//! lagrangian = "0.5*v1^2 + q1*v2"
//! constraints = ["p2 - q1"]
//! X = ["0", "0"]
//! grid.1 = "-1:1:5"
//! grid.2 = "-1:1:5"
//! ```
//!
//! Each line is read as a one-entry TOML document, so strings use TOML
//! quoting. `dof` must come before any expression.

use std::collections::BTreeMap;
use std::path::Path;

use evolk_core::hj::parse_alpha;
use evolk_core::{parse, Axis, Expr, LagrangianSystem, SampleGrid, SectionX};
use toml::Value;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug)]
pub struct SystemFile {
    pub system: LagrangianSystem,
    pub x: Option<SectionX>,
    pub alpha: Option<Vec<Expr>>,
    pub grid: Option<SampleGrid>,
}

/// Points per axis of the projectability self-check.
fn check_points(dof: usize) -> usize {
    if dof <= 2 {
        5
    } else {
        3
    }
}

pub fn read(path: &Path) -> CliResult<SystemFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read system file {}: {e}", path.display())))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let mut file = parse_text(&text, &path.display().to_string())?;
    file.system = file.system.named(name);
    Ok(file)
}

struct Reader<'a> {
    file: &'a str,
}

impl Reader<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> CliError {
        CliError::File { file: self.file.to_string(), line, message: message.into() }
    }

    fn string<'v>(&self, line: usize, key: &str, value: &'v Value) -> CliResult<&'v str> {
        value.as_str().ok_or_else(|| self.err(line, format!("`{key}` must be a quoted string")))
    }

    fn list<'v>(&self, line: usize, key: &str, value: &'v Value) -> CliResult<Vec<&'v str>> {
        let bad = || self.err(line, format!("`{key}` must be a list of quoted strings"));
        value.as_array().ok_or_else(bad)?.iter().map(|v| v.as_str().ok_or_else(bad)).collect()
    }

    fn expr(&self, line: usize, key: &str, text: &str, dof: usize) -> CliResult<Expr> {
        parse(text, dof).map_err(|e| self.err(line, format!("{key}: {e}")))
    }
}

/// Splits a one-line document into its key and value, joining a dotted key
/// such as `grid.1`.
fn single_entry(table: toml::Table) -> Option<(String, Value)> {
    if table.len() != 1 {
        return None;
    }
    let (key, value) = table.into_iter().next()?;
    match value {
        Value::Table(inner) => {
            let (sub, value) = single_entry(inner)?;
            Some((format!("{key}.{sub}"), value))
        }
        value => Some((key, value)),
    }
}

pub fn parse_text(text: &str, file: &str) -> CliResult<SystemFile> {
    let r = Reader { file };
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    let mut dof: Option<usize> = None;
    let mut lagrangian: Option<Expr> = None;
    let mut hamiltonian: Option<(Expr, usize)> = None;
    let mut x: Option<SectionX> = None;
    let mut alpha: Option<Vec<Expr>> = None;
    let mut constraints: Option<(Vec<Expr>, usize)> = None;
    let mut axes: BTreeMap<usize, (Axis, usize)> = BTreeMap::new();

    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let table: toml::Table = trimmed.parse().map_err(|e: toml::de::Error| r.err(line, e.message().trim().to_string()))?;
        let (key, value) = single_entry(table).ok_or_else(|| r.err(line, "expected a single `key = value`"))?;
        if let Some(first) = seen.insert(key.clone(), line) {
            return Err(r.err(line, format!("`{key}` already set on line {first}")));
        }
        if key == "dof" {
            let n = value.as_integer().filter(|n| *n >= 1).ok_or_else(|| r.err(line, "`dof` must be a positive integer"))?;
            dof = Some(n as usize);
            continue;
        }
        let n = dof.ok_or_else(|| r.err(line, format!("`dof` must be declared before `{key}`")))?;
        match key.as_str() {
            "lagrangian" => lagrangian = Some(r.expr(line, &key, r.string(line, &key, &value)?, n)?),
            "hamiltonian" => hamiltonian = Some((r.expr(line, &key, r.string(line, &key, &value)?, n)?, line)),
            "X" => {
                let texts = r.list(line, &key, &value)?;
                x = Some(SectionX::parse(&texts, n).map_err(|e| r.err(line, format!("X: {e}")))?);
            }
            "alpha" => {
                let texts = r.list(line, &key, &value)?;
                alpha = Some(parse_alpha(&texts, n).map_err(|e| r.err(line, format!("alpha: {e}")))?);
            }
            "constraints" => {
                let exprs = r
                    .list(line, &key, &value)?
                    .into_iter()
                    .map(|t| r.expr(line, &key, t, n))
                    .collect::<CliResult<Vec<_>>>()?;
                constraints = Some((exprs, line));
            }
            _ => {
                let Some(index) = key.strip_prefix("grid.") else {
                    return Err(r.err(line, format!("unknown key `{key}`")));
                };
                let i: usize = index
                    .parse()
                    .ok()
                    .filter(|i| (1..=n).contains(i))
                    .ok_or_else(|| r.err(line, format!("grid coordinate must be in 1..={n}, got `{index}`")))?;
                let axis: Axis = r.string(line, &key, &value)?.parse().map_err(|e| r.err(line, format!("{key}: {e}")))?;
                axes.insert(i, (axis, line));
            }
        }
    }

    let n = dof.ok_or_else(|| r.err(0, "missing required key `dof`"))?;
    let l = lagrangian.ok_or_else(|| r.err(0, "missing required key `lagrangian`"))?;
    let mut system = LagrangianSystem::new(n, l).map_err(|e| r.err(seen["lagrangian"], e.to_string()))?;
    if let Some((cs, line)) = constraints {
        system = system.with_constraints(cs).map_err(|e| r.err(line, e.to_string()))?;
    }
    let grid = match axes.first_key_value() {
        None => None,
        Some((_, &(_, line))) if axes.len() != n => {
            return Err(r.err(line, format!("grid needs all {n} coordinates, got {}", axes.len())));
        }
        Some(_) => Some(SampleGrid::new(axes.values().map(|(a, _)| *a).collect())?),
    };
    if let Some((h, line)) = hamiltonian {
        system = system.with_hamiltonian(h).map_err(|e| r.err(line, e.to_string()))?;
        let m = check_points(n);
        let q_axes: Vec<Axis> = match &grid {
            Some(g) => g.axes.iter().map(|a| Axis::new(a.lo, a.hi, m)).collect::<Result<_, _>>()?,
            None => vec![Axis::new(-1.0, 1.0, m)?; n],
        };
        let tq = SampleGrid::new(q_axes.into_iter().chain(vec![Axis::new(-1.0, 1.0, m)?; n]).collect())?;
        system.check_projectability(&tq, 1e-8).map_err(|e| r.err(line, e.to_string()))?;
    }
    Ok(SystemFile { system, x, alpha, grid })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn message(text: &str) -> String {
        parse_text(text, "sys.txt").unwrap_err().to_string()
    }

    #[test]
    fn reads_every_key() {
        let f = parse_text(
            "# affine\ndof = 2\nlagrangian = \"0.5*v1^2 + q1*v2\"  # singular\n\nconstraints = [\"p2 - q1\"]\n\
             X = [\"0\", \"q1\"]\nalpha = ['q1', 'q2']\ngrid.1 = \"-1:1:5\"\ngrid.2 = \"0:2:3\"\n",
            "sys.txt",
        )
        .unwrap();
        assert_eq!(f.system.dof(), 2);
        assert_eq!(f.system.constraints().len(), 1);
        assert_eq!(f.x.unwrap().components().len(), 2);
        assert_eq!(f.alpha.unwrap().len(), 2);
        let g = f.grid.unwrap();
        assert_eq!(g.len(), 15);
        assert_eq!(g.axes[1].hi, 2.0);
    }

    #[test]
    fn errors_carry_file_and_line() {
        assert_eq!(message("lagrangian = \"v1\"\n"), "sys.txt:1: `dof` must be declared before `lagrangian`");
        assert!(message("dof = 1\nlagrangian = \"v1 +\"\n").starts_with("sys.txt:2: lagrangian: syntax error"));
        assert!(message("dof = 1\nlagrangian = \"v1\"\nhamiltonian = \"v1\"\n").starts_with("sys.txt:3:"));
        assert_eq!(message("dof = 1\n"), "sys.txt: missing required key `lagrangian`");
        assert_eq!(message("dof = 1\ndof = 2\n"), "sys.txt:2: `dof` already set on line 1");
        assert!(message("dof = 2\nlagrangian = \"v1\"\ngrid.1 = \"0:1:3\"\n").starts_with("sys.txt:3: grid needs all 2"));
        assert!(message("dof = 1\nlagrangian = \"v1\"\nX = [\"q1\", \"q1\"]\n").starts_with("sys.txt:3: X:"));
        assert!(message("dof = 1\nspeed = 3\n").starts_with("sys.txt:2: unknown key"));
        assert!(message("dof = 1\nlagrangian = v1\n").starts_with("sys.txt:2:"));
    }

    #[test]
    fn wrong_hamiltonian_is_rejected() {
        let m = message("dof = 1\nlagrangian = \"0.5*v1^2\"\nhamiltonian = \"p1^2\"\n");
        assert!(m.starts_with("sys.txt:3: Hamiltonian is not FL-projectable"), "{m}");
    }
}
