//! Report, table, plot and manifest files. Every write goes to a temporary
//! file in the target directory and is renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

fn io(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io(dir))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp-{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp).map_err(io(&tmp))?;
        f.write_all(bytes).map_err(io(&tmp))?;
        f.sync_all().map_err(io(&tmp))?;
    }
    fs::rename(&tmp, path).map_err(io(path))
}

/// Seventeen significant digits, enough to round-trip any double.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_vec(v: &[f64]) -> String {
    v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ")
}

/// A CSV table whose first lines are `#` comments.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub enum Cell<'a> {
    Num(f64),
    Vec(&'a [f64]),
    Bool(bool),
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, cells: &[Cell]) {
        self.rows.push(
            cells
                .iter()
                .map(|c| match c {
                    Cell::Num(x) => fmt_num(*x),
                    Cell::Vec(v) => fmt_vec(v),
                    Cell::Bool(b) => b.to_string(),
                })
                .collect(),
        );
    }

    pub fn render(&self, hash: &str, schema: u32) -> Result<Vec<u8>> {
        let mut out = format!("# config_hash: {hash}\n# schema_version: {schema}\n").into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for r in &self.rows {
                w.write_record(r)?;
            }
            w.flush().map_err(|source| Error::Io {
                path: PathBuf::from("table.csv"),
                source,
            })?;
        }
        Ok(out)
    }
}

/// Two-column series, one block per curve, blocks separated by blank lines.
#[derive(Debug, Clone, Default)]
pub struct Plot {
    pub curves: Vec<(String, Vec<(f64, f64)>)>,
}

impl Plot {
    pub fn curve(&mut self, name: &str, points: Vec<(f64, f64)>) {
        self.curves.push((name.to_string(), points));
    }

    pub fn render(&self, hash: &str) -> Vec<u8> {
        let mut out = format!("# config_hash: {hash}\n");
        for (k, (name, pts)) in self.curves.iter().enumerate() {
            if k > 0 {
                out.push_str("\n\n");
            }
            out.push_str(&format!("# curve: {name}\n"));
            for (x, y) in pts {
                out.push_str(&format!("{} {}\n", fmt_num(*x), fmt_num(*y)));
            }
        }
        out.into_bytes()
    }
}

/// `{"config_hash": ..., "schema_version": ..., <rest>}` with the hash first.
pub fn json_document<T: Serialize>(hash: &str, schema: u32, body: &T) -> Result<Vec<u8>> {
    #[derive(Serialize)]
    struct Doc<'a, T> {
        config_hash: &'a str,
        schema_version: u32,
        #[serde(flatten)]
        body: &'a T,
    }
    let mut bytes = serde_json::to_vec_pretty(&Doc {
        config_hash: hash,
        schema_version: schema,
        body,
    })?;
    bytes.push(b'\n');
    Ok(bytes)
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub experiment: String,
    pub status: String,
    pub wall_time_s: f64,
    pub warnings: Vec<String>,
    pub artifacts: Vec<String>,
    /// Set when the run failed after writing some artifacts.
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ErrorReport {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for ErrorReport {
    fn from(e: &Error) -> Self {
        ErrorReport {
            kind: e.kind().to_string(),
            message: e.to_string(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn table_has_header_comment() {
        let mut t = Table::new(&["eps", "c_value", "flag"]);
        t.push(&[Cell::Num(0.5), Cell::Vec(&[1.0, 2.0]), Cell::Bool(true)]);
        let text = String::from_utf8(t.render("abc", 1).unwrap()).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("# config_hash: abc"));
        assert_eq!(lines.next(), Some("# schema_version: 1"));
        assert_eq!(lines.next(), Some("eps,c_value,flag"));
        assert!(lines.next().unwrap().starts_with("5.0000000000000000e-1,"));
    }

    #[test]
    fn json_puts_hash_first() {
        let doc = json_document("h", 1, &serde_json::json!({"a": 1})).unwrap();
        let text = String::from_utf8(doc).unwrap();
        assert!(text.trim_start_matches("{\n").trim_start().starts_with("\"config_hash\": \"h\""));
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
