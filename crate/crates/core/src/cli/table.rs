use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::CliError;

pub const SCHEMA_VERSION: u32 = 1;
pub const UNITS_NOTE: &str = "all rates in units of gamma_rd";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// A column-named numeric table with ordered `key: value` metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub meta: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Self {
            meta: vec![
                ("schema_version".into(), SCHEMA_VERSION.to_string()),
                ("units".into(), UNITS_NOTE.into()),
            ],
            columns,
            rows: Vec::new(),
        }
    }

    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.push((key.into(), value.to_string()));
        self
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn meta(&self, key: &str) -> Option<&str> {
        self.meta.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        self.column_index(name).map(|i| self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write(&self, out: &mut dyn Write, format: Format) -> Result<(), CliError> {
        match format {
            Format::Csv => self.write_csv(out),
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &JsonTable::from(self)).map_err(io_like)?;
                writeln!(out).map_err(io_like)
            }
        }
    }

    fn write_csv(&self, out: &mut dyn Write) -> Result<(), CliError> {
        for (k, v) in &self.meta {
            writeln!(out, "# {k}: {v}").map_err(io_like)?;
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.columns).map_err(io_like)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|x| x.to_string())).map_err(io_like)?;
        }
        w.flush().map_err(io_like)
    }

    pub fn save(&self, path: &Path, format: Format) -> Result<(), CliError> {
        let mut file = std::io::BufWriter::new(
            std::fs::File::create(path).map_err(|e| CliError::Config(format!("cannot create {}: {e}", path.display())))?,
        );
        self.write(&mut file, format)?;
        file.flush().map_err(io_like)
    }

    /// Reads a table written by [`Table::save`]; the format follows from the content.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        if text.trim_start().starts_with('{') {
            let json: JsonTable = serde_json::from_str(text).map_err(|e| e.to_string())?;
            return json.try_into();
        }
        let meta = text
            .lines()
            .take_while(|l| l.starts_with('#'))
            .map(|l| {
                let body = l.trim_start_matches('#').trim();
                match body.split_once(':') {
                    Some((k, v)) => (k.trim().to_string(), v.trim().to_string()),
                    None => (body.to_string(), String::new()),
                }
            })
            .collect();
        let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        let columns: Vec<String> = reader.headers().map_err(|e| e.to_string())?.iter().map(String::from).collect();
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| e.to_string())?;
            let row = record.iter().map(|f| f.parse::<f64>().map_err(|e| format!("{f:?}: {e}"))).collect::<Result<_, _>>()?;
            rows.push(row);
        }
        Ok(Self { meta, columns, rows })
    }
}

fn io_like(e: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("write failed: {e}"))
}

/// Column-major JSON layout.
#[derive(Serialize, Deserialize)]
struct JsonTable {
    meta: serde_json::Map<String, serde_json::Value>,
    columns: Vec<String>,
    data: Vec<Vec<f64>>,
}

impl From<&Table> for JsonTable {
    fn from(t: &Table) -> Self {
        Self {
            meta: t.meta.iter().map(|(k, v)| (k.clone(), serde_json::Value::String(v.clone()))).collect(),
            columns: t.columns.clone(),
            data: (0..t.columns.len()).map(|c| t.rows.iter().map(|r| r[c]).collect()).collect(),
        }
    }
}

impl TryFrom<JsonTable> for Table {
    type Error = String;

    fn try_from(j: JsonTable) -> Result<Self, String> {
        if j.data.len() != j.columns.len() {
            return Err(format!("{} columns named, {} present", j.columns.len(), j.data.len()));
        }
        let n = j.data.first().map_or(0, Vec::len);
        if j.data.iter().any(|c| c.len() != n) {
            return Err("columns have different lengths".into());
        }
        let meta = j.meta.into_iter().map(|(k, v)| (k, v.as_str().map_or_else(|| v.to_string(), String::from))).collect();
        Ok(Self { meta, columns: j.columns, rows: (0..n).map(|r| j.data.iter().map(|c| c[r]).collect()).collect() })
    }
}

/// `run.csv` → `run.manifest.json`
pub fn manifest_path(data: &Path) -> PathBuf {
    data.with_extension("manifest.json")
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub schema_version: u32,
    pub units: String,
    pub config: super::ScenarioConfig,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(vec!["t".into(), "p_0".into()]).with_meta("model", "ladder");
        t.push(vec![0.0, 1.0]);
        t.push(vec![0.1, 1.0 / 3.0]);
        t.push(vec![1e-300, -2.5e10]);
        t
    }

    #[test]
    fn csv_and_json_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        for (name, format) in [("a.csv", Format::Csv), ("a.json", Format::Json)] {
            let path = dir.path().join(name);
            sample().save(&path, format).unwrap();
            assert_eq!(Table::load(&path).unwrap(), sample());
        }
    }

    #[test]
    fn csv_header_block() {
        let mut buf = Vec::new();
        sample().write(&mut buf, Format::Csv).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("# schema_version: 1\n# units: all rates in units of gamma_rd\n# model: ladder\nt,p_0\n"));
    }

    #[test]
    fn rejects_garbage() {
        assert!(Table::parse("a,b\n1,x\n").is_err());
        assert!(Table::parse("{\"meta\":{},\"columns\":[\"a\"],\"data\":[]}").is_err());
    }

    #[test]
    fn manifest_sits_next_to_data() {
        assert_eq!(manifest_path(Path::new("out/fig3.csv")), PathBuf::from("out/fig3.manifest.json"));
    }
}
