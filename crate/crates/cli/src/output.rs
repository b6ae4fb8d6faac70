//! Rendering of command results as JSON, CSV or an aligned text table.
//!
//! CSV and table output flatten nested fields into dotted column names
//! (`dgor_ci.0`). A result holding a list of records (coordinate points, a
//! policy trace) is written one record per row.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::api::render_json;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
    Table,
}

pub fn render<T: Serialize>(value: &T, format: Format) -> Result<String> {
    match format {
        Format::Json => render_json(value),
        Format::Csv => render_csv(&serde_json::to_value(value)?),
        Format::Table => Ok(render_table(&serde_json::to_value(value)?)),
    }
}

fn scalar(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten_into(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(map) => {
            for (k, v) in map {
                flatten_into(&key(k), v, out);
            }
        }
        Value::Array(items) => {
            for (i, v) in items.iter().enumerate() {
                flatten_into(&key(&i.to_string()), v, out);
            }
        }
        other => out.push((prefix.to_string(), scalar(other))),
    }
}

fn flatten(v: &Value) -> Vec<(String, String)> {
    let mut out = Vec::new();
    flatten_into("", v, &mut out);
    out
}

/// The first field holding a non-empty list of objects, if any.
fn record_list(map: &Map<String, Value>) -> Option<&Vec<Value>> {
    map.values().find_map(|v| match v {
        Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_object) => {
            Some(items)
        }
        _ => None,
    })
}

fn rows(v: &Value) -> Vec<Vec<(String, String)>> {
    match v {
        Value::Object(map) => match record_list(map) {
            Some(items) => items.iter().map(flatten).collect(),
            None => vec![flatten(v)],
        },
        Value::Array(items) => items.iter().map(flatten).collect(),
        other => vec![vec![("value".into(), scalar(other))]],
    }
}

fn render_csv(v: &Value) -> Result<String> {
    let rows = rows(v);
    let mut wtr = csv::Writer::from_writer(Vec::new());
    if let Some(first) = rows.first() {
        wtr.write_record(first.iter().map(|(k, _)| k))?;
    }
    for row in &rows {
        wtr.write_record(row.iter().map(|(_, v)| v))?;
    }
    let bytes = wtr.into_inner().map_err(|e| csv::Error::from(e.into_error()))?;
    Ok(String::from_utf8_lossy(&bytes).into_owned())
}

fn render_table(v: &Value) -> String {
    let rows = rows(v);
    let mut out = String::new();
    if rows.len() == 1 {
        let width = rows[0].iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in &rows[0] {
            out.push_str(&format!("{k:<width$}  {v}\n"));
        }
        return out;
    }
    let Some(first) = rows.first() else {
        return out;
    };
    let headers: Vec<&str> = first.iter().map(|(k, _)| k.as_str()).collect();
    let widths: Vec<usize> = headers
        .iter()
        .enumerate()
        .map(|(i, h)| {
            rows.iter()
                .filter_map(|r| r.get(i).map(|(_, v)| v.len()))
                .chain([h.len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: Vec<&str>| {
        let mut s = cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ");
        s.truncate(s.trim_end().len());
        s.push('\n');
        s
    };
    out.push_str(&line(headers));
    for row in &rows {
        out.push_str(&line(row.iter().map(|(_, v)| v.as_str()).collect()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_flattens_nested_fields() {
        let v = json!({"dgor": 1.5, "ci": [0.1, 0.2], "warnings": []});
        let out = render(&v, Format::Csv).unwrap();
        assert_eq!(out, "ci.0,ci.1,dgor\n0.1,0.2,1.5\n");
    }

    #[test]
    fn record_lists_become_rows() {
        let v = json!({"points": [{"label": "a", "x": 0.0, "y": 1.0}, {"label": "b", "x": 0.5, "y": 0.25}]});
        let out = render(&v, Format::Csv).unwrap();
        assert_eq!(out, "label,x,y\na,0.0,1.0\nb,0.5,0.25\n");
        let table = render(&v, Format::Table).unwrap();
        assert_eq!(table, "label  x    y\na      0.0  1.0\nb      0.5  0.25\n");
    }

    #[test]
    fn null_is_blank() {
        let v = json!({"dgor": null, "n": 3});
        assert_eq!(render(&v, Format::Table).unwrap(), "dgor  \nn     3\n");
    }
}
