use std::io::Write;

use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// A report: the JSON document plus a flat table for CSV output.
pub struct Report {
    pub json: Value,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Report {
    pub fn new(json: Value, header: &[&str], rows: Vec<Vec<String>>) -> Self {
        Report { json, header: header.iter().map(|s| s.to_string()).collect(), rows }
    }

    /// Key/value table built from the top-level fields of `json`.
    pub fn fields(json: Value) -> Self {
        let rows = match &json {
            Value::Object(m) => m.iter().map(|(k, v)| vec![k.clone(), scalar(v)]).collect(),
            v => vec![vec!["value".into(), scalar(v)]],
        };
        Report::new(json, &["field", "value"], rows)
    }

    pub fn write(&self, format: Format, out: &mut impl Write) -> std::io::Result<()> {
        match format {
            Format::Json => {
                serde_json::to_writer_pretty(&mut *out, &self.json)?;
                writeln!(out)
            }
            Format::Csv => {
                let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
                w.write_record(&self.header)?;
                for r in &self.rows {
                    w.write_record(r)?;
                }
                w.flush()
            }
            Format::Text => write_text(&self.json, 0, out),
        }
    }
}

pub fn scalar(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn write_text(v: &Value, indent: usize, out: &mut impl Write) -> std::io::Result<()> {
    let pad = " ".repeat(indent);
    match v {
        Value::Object(m) => {
            for (k, x) in m {
                match x {
                    Value::Object(_) => {
                        writeln!(out, "{pad}{k}:")?;
                        write_text(x, indent + 2, out)?;
                    }
                    Value::Array(a) if a.iter().any(|e| e.is_object()) => {
                        writeln!(out, "{pad}{k}:")?;
                        for e in a {
                            writeln!(out, "{pad}  -")?;
                            write_text(e, indent + 4, out)?;
                        }
                    }
                    _ => writeln!(out, "{pad}{k}: {}", scalar(x))?,
                }
            }
            Ok(())
        }
        other => writeln!(out, "{pad}{}", scalar(other)),
    }
}
