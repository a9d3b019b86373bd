//! Text draw store.
//!
//! ```text
//! # fscd-draws 1
//! # key=value            metadata, any number of lines
//! name_1<TAB>name_2 ...  column header
//! v_1<TAB>v_2 ...        one row per retained sweep
//! ```
//!
//! Values are written with the shortest representation that parses back to
//! the same `f64`, so a store reloads bit for bit.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const DRAWS_MAGIC: &str = "# fscd-draws 1";
pub const CLASSIFICATION_MAGIC: &str = "# fscd-classification 1";

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DrawTable {
    pub meta: Vec<(String, String)>,
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl DrawTable {
    pub fn new(names: Vec<String>) -> Self {
        Self {
            names,
            ..Self::default()
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.names.len() {
            return Err(Error::DimensionMismatch {
                expected: self.names.len(),
                got: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.index_of(name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Columns whose names start with `prefix`, as per-draw vectors.
    pub fn group(&self, prefix: &str) -> Vec<Vec<f64>> {
        let idx: Vec<usize> = self
            .names
            .iter()
            .enumerate()
            .filter(|(_, n)| n.starts_with(prefix))
            .map(|(k, _)| k)
            .collect();
        self.rows.iter().map(|r| idx.iter().map(|&k| r[k]).collect()).collect()
    }

    pub fn meta_value(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{DRAWS_MAGIC}")?;
        for (k, v) in &self.meta {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "{}", self.names.join("\t"))?;
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(out, "{}", line.join("\t"))?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let magic = lines.next().map(|(_, l)| l).transpose()?;
        if magic.as_deref() != Some(DRAWS_MAGIC) {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected `{DRAWS_MAGIC}`"),
            });
        }
        let mut table = DrawTable::default();
        let mut have_header = false;
        for (k, line) in lines {
            let line = line?;
            let lineno = k + 1;
            if !have_header {
                if let Some(rest) = line.strip_prefix("# ") {
                    let (key, value) = rest.split_once('=').ok_or_else(|| Error::Parse {
                        line: lineno,
                        message: "metadata line without `=`".into(),
                    })?;
                    table.meta.push((key.to_string(), value.to_string()));
                } else {
                    table.names = line.split('\t').map(str::to_string).collect();
                    have_header = true;
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let row = line
                .split('\t')
                .map(|f| {
                    f.parse::<f64>().map_err(|e| Error::Parse {
                        line: lineno,
                        message: format!("`{f}`: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != table.names.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!("{} fields, header has {}", row.len(), table.names.len()),
                });
            }
            table.rows.push(row);
        }
        if !have_header {
            return Err(Error::Parse {
                line: 1,
                message: "missing column header".into(),
            });
        }
        Ok(table)
    }
}

/// Per-duration count of retained draws in which the duration was regular.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ClassificationTable {
    pub draws: u64,
    /// `(day, index, duration, regular draws)`.
    pub rows: Vec<(usize, usize, f64, u64)>,
}

impl ClassificationTable {
    pub fn write<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{CLASSIFICATION_MAGIC}")?;
        writeln!(out, "# draws={}", self.draws)?;
        writeln!(out, "day\tindex\ty\tregular")?;
        for (d, i, y, h) in &self.rows {
            writeln!(out, "{d}\t{i}\t{y:?}\t{h}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(input: R) -> Result<Self> {
        let mut table = ClassificationTable::default();
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            let lineno = k + 1;
            let bad = |message: String| Error::Parse { line: lineno, message };
            match k {
                0 if line != CLASSIFICATION_MAGIC => return Err(bad(format!("expected `{CLASSIFICATION_MAGIC}`"))),
                0 | 2 => {}
                1 => {
                    let v = line
                        .strip_prefix("# draws=")
                        .ok_or_else(|| bad("expected `# draws=`".into()))?;
                    table.draws = v.parse().map_err(|e| bad(format!("{e}")))?;
                }
                _ if line.is_empty() => {}
                _ => {
                    let f: Vec<&str> = line.split('\t').collect();
                    if f.len() != 4 {
                        return Err(bad(format!("{} fields, expected 4", f.len())));
                    }
                    let e = |e: &dyn std::fmt::Display| bad(format!("{e}"));
                    table.rows.push((
                        f[0].parse().map_err(|x| e(&x))?,
                        f[1].parse().map_err(|x| e(&x))?,
                        f[2].parse().map_err(|x| e(&x))?,
                        f[3].parse().map_err(|x| e(&x))?,
                    ));
                }
            }
        }
        Ok(table)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_round_trip_bit_exactly() {
        let mut t = DrawTable::new(vec!["a".into(), "b".into()]);
        t.meta.push(("seed".into(), "7".into()));
        t.push(vec![0.1 + 0.2, -1e-300]).unwrap();
        t.push(vec![std::f64::consts::PI, 12345.678901234567]).unwrap();
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        let back = DrawTable::read(buf.as_slice()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.meta_value("seed"), Some("7"));
        assert_eq!(back.column("b").unwrap()[1].to_bits(), 12345.678901234567f64.to_bits());
    }

    #[test]
    fn rejects_wrong_width() {
        let text = format!("{DRAWS_MAGIC}\na\tb\n1.0\n");
        assert!(matches!(DrawTable::read(text.as_bytes()), Err(Error::Parse { line: 3, .. })));
        assert!(DrawTable::new(vec!["a".into()]).push(vec![]).is_err());
    }

    #[test]
    fn classification_round_trip() {
        let t = ClassificationTable {
            draws: 10,
            rows: vec![(0, 0, 0.0, 3), (1, 4, 2.0, 10)],
        };
        let mut buf = Vec::new();
        t.write(&mut buf).unwrap();
        assert_eq!(ClassificationTable::read(buf.as_slice()).unwrap(), t);
    }
}
