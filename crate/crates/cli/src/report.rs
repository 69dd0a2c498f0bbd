//! Report assembly and JSON/CSV emission. Reports carry the config hash and
//! library version and nothing run-dependent, so equal inputs give equal bytes.

use std::io::Write;

use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::config::Format;
use crate::error::CliResult;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push<I: IntoIterator<Item = V>, V: Into<Value>>(&mut self, row: I) {
        let row: Vec<Value> = row.into_iter().map(Into::into).collect();
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub command: &'static str,
    pub config_hash: String,
    pub seed: Option<u64>,
    pub options: Value,
    pub result: Value,
    pub table: Option<Table>,
}

impl Report {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("tool".into(), json!("saddle"));
        m.insert("version".into(), json!(VERSION));
        m.insert("command".into(), json!(self.command));
        m.insert("config_hash".into(), json!(self.config_hash));
        m.insert("seed".into(), json!(self.seed));
        m.insert("options".into(), self.options.clone());
        m.insert("result".into(), self.result.clone());
        if let Some(t) = &self.table {
            m.insert("table".into(), serde_json::to_value(t).expect("table serializes"));
        }
        Value::Object(m)
    }

    pub fn write<W: Write>(&self, mut out: W, format: Format) -> CliResult<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut out, &self.to_json()).map_err(std::io::Error::from)?;
                writeln!(out)?;
            }
            Format::Csv => {
                writeln!(out, "# saddle {VERSION} {} config_hash={}", self.command, self.config_hash)?;
                let table = match &self.table {
                    Some(t) => t.clone(),
                    None => {
                        let mut t = Table::new(&["key", "value"]);
                        flatten("", &self.result, &mut t);
                        t
                    }
                };
                let mut w = csv::Writer::from_writer(&mut out);
                w.write_record(&table.columns).map_err(csv_err)?;
                for row in &table.rows {
                    w.write_record(row.iter().map(cell)).map_err(csv_err)?;
                }
                w.flush()?;
            }
        }
        Ok(())
    }
}

fn csv_err(e: csv::Error) -> std::io::Error {
    std::io::Error::other(e)
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, t: &mut Table) {
    let key = |k: &str| if prefix.is_empty() { k.to_string() } else { format!("{prefix}.{k}") };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, t)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, v)| flatten(&key(&i.to_string()), v, t)),
        other => t.push([Value::String(prefix.to_string()), other.clone()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut table = Table::new(&["n", "mass"]);
        table.push([json!(1), json!(0.5)]);
        Report {
            command: "tail",
            config_hash: "ab".into(),
            seed: Some(3),
            options: json!({}),
            result: json!({"fit": {"beta_hat": 0.75}, "d": [1.0, 2.0]}),
            table: Some(table),
        }
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut buf = Vec::new();
        sample().write(&mut buf, Format::Csv).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, format!("# saddle {VERSION} tail config_hash=ab\nn,mass\n1,0.5\n"));
    }

    #[test]
    fn csv_without_table_flattens_the_result() {
        let mut r = sample();
        r.table = None;
        let mut buf = Vec::new();
        r.write(&mut buf, Format::Csv).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.contains("d.1,2.0\n") && s.contains("fit.beta_hat,0.75\n"), "{s}");
    }

    #[test]
    fn json_embeds_hash_and_version() {
        let v = sample().to_json();
        assert_eq!(v["config_hash"], "ab");
        assert_eq!(v["version"], VERSION);
        assert_eq!(v["table"]["columns"][1], "mass");
    }
}
