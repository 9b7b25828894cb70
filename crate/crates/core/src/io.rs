//! Artifact files: CSV tables and JSON documents written atomically, each
//! headed by the hash of the configuration that produced it.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::ControlField;
use crate::oct::OctTrace;
use crate::units;

/// Lines written as `# key: value` above every CSV table.
#[derive(Debug, Clone, Default)]
pub struct Header {
    entries: Vec<(String, String)>,
}

impl Header {
    pub fn new(config_hash: &str) -> Self {
        Header {
            entries: vec![("config_hash".into(), config_hash.into())],
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Hex SHA-256 digest.
pub fn hash_bytes(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// 17 significant digits: round-trips every f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write via a temporary file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} is not a file path", path.display())))?;
    let tmp: PathBuf = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes)
        .and_then(|_| f.sync_all())
        .map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// CSV table of numbers.
pub fn write_csv(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut buf = Vec::new();
    for (k, v) in &header.entries {
        writeln!(buf, "# {k}: {v}").expect("writing to memory");
    }
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let fail = |e: csv::Error| Error::invalid(format!("csv encoding failed: {e}"));
        w.write_record(columns).map_err(fail)?;
        for row in rows {
            if row.len() != columns.len() {
                return Err(Error::invalid(format!(
                    "row of {} values for {} columns",
                    row.len(),
                    columns.len()
                )));
            }
            w.write_record(row.iter().map(|&x| fmt_f64(x))).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    write_atomic(path, &buf)
}

#[derive(Serialize)]
struct Document<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(flatten)]
    body: &'a T,
}

pub fn write_json<T: Serialize>(path: &Path, config_hash: &str, value: &T) -> Result<()> {
    let doc = Document {
        config_hash,
        body: value,
    };
    let mut text =
        serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(format!("json encoding failed: {e}")))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Parsed CSV: header comments, column names and numeric rows.
pub struct Table {
    pub header: Header,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }
}

pub fn read_csv(path: &Path) -> Result<Table> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |message: String| Error::Parse {
        path: path.into(),
        message,
    };
    let mut header = Header::default();
    for line in text.lines().take_while(|l| l.starts_with('#')) {
        if let Some((k, v)) = line.trim_start_matches('#').split_once(':') {
            header.entries.push((k.trim().into(), v.trim().into()));
        }
    }
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let columns: Vec<String> = rdr
        .headers()
        .map_err(|e| parse_err(e.to_string()))?
        .iter()
        .map(str::to_owned)
        .collect();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| parse_err(format!("row {}: {e}", i + 1)))?;
        rows.push(row);
    }
    Ok(Table { header, columns, rows })
}

/// Field table: `t_au, E_au, t_s, E_Vpm`.
pub fn write_field(path: &Path, field: &ControlField, header: &Header) -> Result<()> {
    let rows: Vec<Vec<f64>> = field
        .samples()
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            let t = field.time(i);
            vec![t, e, units::au_to_seconds(t), units::au_to_vpm(e)]
        })
        .collect();
    write_csv(path, header, &["t_au", "E_au", "t_s", "E_Vpm"], &rows)
}

/// Read a field table; the sampling must be uniform.
pub fn read_field(path: &Path) -> Result<(ControlField, Header)> {
    let table = read_csv(path)?;
    let parse_err = |message: &str| Error::Parse {
        path: path.into(),
        message: message.into(),
    };
    let t = table.column("t_au").ok_or_else(|| parse_err("missing column t_au"))?;
    let e = table.column("E_au").ok_or_else(|| parse_err("missing column E_au"))?;
    if t.len() < 2 {
        return Err(parse_err("a field needs at least two samples"));
    }
    let dt = (t[t.len() - 1] - t[0]) / (t.len() - 1) as f64;
    if t.iter()
        .enumerate()
        .any(|(i, &ti)| (ti - t[0] - i as f64 * dt).abs() > 1e-9 * dt)
    {
        return Err(parse_err("field samples are not uniformly spaced"));
    }
    if t[0].abs() > 1e-9 * dt {
        return Err(parse_err("field must start at t = 0"));
    }
    Ok((ControlField::new(e, dt)?, table.header))
}

/// Optimization trace: `iteration, J, F, fluence`.
pub fn write_trace(path: &Path, trace: &OctTrace, header: &Header) -> Result<()> {
    let rows: Vec<Vec<f64>> = trace
        .records
        .iter()
        .map(|r| vec![r.iteration as f64, r.objective, r.fidelity, r.fluence])
        .collect();
    write_csv(path, header, &["iteration", "J", "F", "fluence"], &rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.csv");
        let f = ControlField::from_fn(50, 3.7e3, |t| 1.3e-13 * (t * 1e-4).sin()).unwrap();
        write_field(&path, &f, &Header::new("abc").with("iteration", 7)).unwrap();
        let (g, h) = read_field(&path).unwrap();
        assert_eq!(g.samples(), f.samples());
        assert!((g.dt() - f.dt()).abs() < 1e-12 * f.dt());
        assert_eq!(h.get("iteration"), Some("7"));
        assert_eq!(h.get("config_hash"), Some("abc"));
        assert!(!dir.path().join(".f.csv.tmp").exists());
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "t_au,E_au\n0,1\n1,x\n").unwrap();
        assert!(matches!(read_field(&path), Err(Error::Parse { .. })));
        assert!(matches!(
            read_field(&dir.path().join("none.csv")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(
            hash_bytes(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
