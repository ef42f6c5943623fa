//! Report envelope and the three output renderers.

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Human,
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub quantity: String,
    pub source: String,
    pub formula: String,
}

pub fn prov(quantity: &str, source: &str, formula: &str) -> Provenance {
    Provenance {
        quantity: quantity.into(),
        source: source.into(),
        formula: formula.into(),
    }
}

#[derive(Clone, Debug)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.into())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Row-oriented view used for CSV output.
#[derive(Clone, Debug, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|c| match c {
                        Cell::Num(x) => json!(x),
                        Cell::Int(i) => json!(i),
                        Cell::Text(s) => json!(s),
                        Cell::Bool(b) => json!(b),
                    })
                    .collect()
            })
            .collect();
        json!({ "columns": self.columns, "rows": rows })
    }
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub config: Value,
    pub results: Value,
    pub provenance: Vec<Provenance>,
    pub table: Option<Table>,
    /// Human output shows the table instead of the flattened results.
    pub human_table: bool,
    /// Nonzero when the command ran but its checks failed.
    pub exit_code: i32,
}

impl Report {
    pub fn new(command: &str, config: Value, results: impl Serialize) -> Self {
        Self {
            command: command.into(),
            config,
            results: serde_json::to_value(results).expect("results serialize"),
            provenance: Vec::new(),
            table: None,
            human_table: false,
            exit_code: 0,
        }
    }

    pub fn provenance(mut self, p: Vec<Provenance>) -> Self {
        self.provenance = p;
        self
    }

    pub fn table(mut self, t: Table) -> Self {
        self.table = Some(t);
        self
    }

    pub fn schema_id(&self) -> String {
        format!("mbqc/{}/v1", self.command)
    }

    pub fn envelope(&self) -> Value {
        json!({
            "schema": self.schema_id(),
            "command": self.command,
            "config": self.config,
            "results": self.results,
            "provenance": self.provenance,
        })
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(&self.envelope()).expect("json value");
                s.push('\n');
                s
            }
            Format::Csv => self.render_csv(),
            Format::Human => self.render_human(),
        }
    }

    fn render_csv(&self) -> String {
        let table = match &self.table {
            Some(t) => t.clone(),
            None => flat_table(&self.results),
        };
        let mut out = String::new();
        out.push_str(&table.columns.join(","));
        out.push('\n');
        for row in &table.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    fn render_human(&self) -> String {
        let mut lines = vec![format!("# {}", self.command)];
        if let (true, Some(t)) = (self.human_table, &self.table) {
            lines.extend(aligned(t));
            lines.push(String::new());
            return lines.join("\n");
        }
        flatten("", &self.results, &mut |k, v| {
            lines.push(format!("{k}: {}", human_value(v)))
        });
        if !self.provenance.is_empty() {
            lines.push("provenance:".into());
            for p in &self.provenance {
                lines.push(format!("  {} <- {} [{}]", p.quantity, p.source, p.formula));
            }
        }
        lines.push(String::new());
        lines.join("\n")
    }
}

/// 17 significant digits, enough to round-trip any f64.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{x:.16e}")
    }
}

fn csv_cell(c: &Cell) -> String {
    match c {
        Cell::Num(x) => fmt_float(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Bool(b) => b.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

fn aligned(t: &Table) -> Vec<String> {
    let cells: Vec<Vec<String>> = t
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .map(|c| match c {
                    Cell::Num(x) => format!("{x}"),
                    Cell::Int(i) => i.to_string(),
                    Cell::Bool(b) => b.to_string(),
                    Cell::Text(s) => s.clone(),
                })
                .collect()
        })
        .collect();
    let widths: Vec<usize> = (0..t.columns.len())
        .map(|j| {
            cells
                .iter()
                .map(|r| r[j].chars().count())
                .chain([t.columns[j].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |r: &[String]| {
        r.iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect::<Vec<_>>()
            .join("  ")
            .trim_end()
            .to_string()
    };
    std::iter::once(line(&t.columns))
        .chain(cells.iter().map(|r| line(r)))
        .collect()
}

fn human_value(v: &Value) -> String {
    match v {
        Value::Null => "null".into(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn flatten(prefix: &str, v: &Value, emit: &mut dyn FnMut(&str, &Value)) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => m.iter().for_each(|(k, v)| flatten(&key(k), v, emit)),
        Value::Array(a) if a.iter().any(|x| x.is_object() || x.is_array()) => a
            .iter()
            .enumerate()
            .for_each(|(i, v)| flatten(&key(&i.to_string()), v, emit)),
        _ => emit(prefix, v),
    }
}

/// Fallback CSV: a single row of flattened scalar fields.
fn flat_table(results: &Value) -> Table {
    let mut names = Vec::new();
    let mut row = Vec::new();
    flatten("", results, &mut |k, v| {
        names.push(k.to_string());
        row.push(match v {
            Value::Number(n) if n.is_i64() => Cell::Int(n.as_i64().unwrap_or_default()),
            Value::Number(n) => Cell::Num(n.as_f64().unwrap_or(f64::NAN)),
            Value::Bool(b) => Cell::Bool(*b),
            Value::String(s) => Cell::Text(s.clone()),
            Value::Null => Cell::Text(String::new()),
            other => Cell::Text(other.to_string()),
        });
    });
    Table {
        columns: names,
        rows: vec![row],
    }
}
