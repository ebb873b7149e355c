//! Metrics records and their CSV / JSON-lines writers. Floats are printed
//! with fixed precision so that equal runs give equal bytes.

use std::io::{self, Write};
use std::path::Path;

use hive_core::AgentId;
use serde::Serialize;

const DECIMALS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct AgentMetrics {
    pub id: AgentId,
    pub x_m: f64,
    pub y_m: f64,
    pub heading_rad: f64,
    pub leader_distance_m: Option<f64>,
    pub loc_error_m: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub time_s: f64,
    pub collisions: u64,
    /// Radio bytes carried during the window that ends at `time_s`.
    pub radio_bytes: u64,
    pub drops: u64,
    pub agents: Vec<AgentMetrics>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricsFormat {
    Csv,
    JsonLines,
}

impl MetricsFormat {
    /// `.jsonl` and `.ndjson` select JSON lines; anything else is CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("jsonl" | "ndjson") => MetricsFormat::JsonLines,
            _ => MetricsFormat::Csv,
        }
    }
}

fn fixed(v: f64) -> String {
    let s = format!("{v:.DECIMALS$}");
    // avoid "-0.0000"
    if s.trim_start_matches('-').chars().all(|c| c == '0' || c == '.') {
        s.trim_start_matches('-').to_string()
    } else {
        s
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fixed).unwrap_or_default()
}

/// A JSON number that serializes from its fixed-precision text.
struct Fixed(Option<f64>);

impl Serialize for Fixed {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self.0 {
            None => s.serialize_none(),
            Some(v) => {
                let n: serde_json::Number = fixed(v).parse().map_err(serde::ser::Error::custom)?;
                n.serialize(s)
            }
        }
    }
}

#[derive(Serialize)]
struct JsonAgent {
    id: AgentId,
    x_m: Fixed,
    y_m: Fixed,
    heading_rad: Fixed,
    leader_distance_m: Fixed,
    loc_error_m: Fixed,
}

#[derive(Serialize)]
struct JsonRow {
    time_s: Fixed,
    collisions: u64,
    radio_bytes: u64,
    drops: u64,
    agents: Vec<JsonAgent>,
}

pub struct MetricsWriter<W: Write> {
    out: W,
    format: MetricsFormat,
    header_done: bool,
}

impl<W: Write> MetricsWriter<W> {
    pub fn new(out: W, format: MetricsFormat) -> Self {
        Self {
            out,
            format,
            header_done: false,
        }
    }

    pub fn write_row(&mut self, row: &MetricsRow) -> io::Result<()> {
        match self.format {
            MetricsFormat::Csv => self.write_csv(row),
            MetricsFormat::JsonLines => self.write_json(row),
        }
    }

    fn write_csv(&mut self, row: &MetricsRow) -> io::Result<()> {
        if !self.header_done {
            let mut cols = vec![
                "time_s".to_string(),
                "collisions".into(),
                "radio_bytes".into(),
                "drops".into(),
            ];
            for a in &row.agents {
                for field in ["x_m", "y_m", "heading_rad", "leader_distance_m", "loc_error_m"] {
                    cols.push(format!("a{}_{field}", a.id));
                }
            }
            writeln!(self.out, "{}", cols.join(","))?;
            self.header_done = true;
        }
        let mut cells = vec![
            fixed(row.time_s),
            row.collisions.to_string(),
            row.radio_bytes.to_string(),
            row.drops.to_string(),
        ];
        for a in &row.agents {
            cells.extend([
                fixed(a.x_m),
                fixed(a.y_m),
                fixed(a.heading_rad),
                opt(a.leader_distance_m),
                opt(a.loc_error_m),
            ]);
        }
        writeln!(self.out, "{}", cells.join(","))
    }

    fn write_json(&mut self, row: &MetricsRow) -> io::Result<()> {
        let r = JsonRow {
            time_s: Fixed(Some(row.time_s)),
            collisions: row.collisions,
            radio_bytes: row.radio_bytes,
            drops: row.drops,
            agents: row
                .agents
                .iter()
                .map(|a| JsonAgent {
                    id: a.id,
                    x_m: Fixed(Some(a.x_m)),
                    y_m: Fixed(Some(a.y_m)),
                    heading_rad: Fixed(Some(a.heading_rad)),
                    leader_distance_m: Fixed(a.leader_distance_m),
                    loc_error_m: Fixed(a.loc_error_m),
                })
                .collect(),
        };
        serde_json::to_writer(&mut self.out, &r)?;
        writeln!(self.out)
    }

    pub fn flush(&mut self) -> io::Result<()> {
        self.out.flush()
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            time_s: 0.1,
            collisions: 0,
            radio_bytes: 42,
            drops: 1,
            agents: vec![AgentMetrics {
                id: 3,
                x_m: 1.0,
                y_m: -0.00001,
                heading_rad: std::f64::consts::PI,
                leader_distance_m: None,
                loc_error_m: Some(0.25),
            }],
        }
    }

    #[test]
    fn csv_has_header_and_fixed_precision() {
        let mut w = MetricsWriter::new(Vec::new(), MetricsFormat::Csv);
        w.write_row(&row()).unwrap();
        w.write_row(&row()).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("time_s,collisions,radio_bytes,drops,a3_x_m"));
        assert_eq!(lines[1], "0.1000,0,42,1,1.0000,0.0000,3.1416,,0.2500");
    }

    #[test]
    fn json_lines_round_to_the_same_precision() {
        let mut w = MetricsWriter::new(Vec::new(), MetricsFormat::JsonLines);
        w.write_row(&row()).unwrap();
        let text = String::from_utf8(w.into_inner()).unwrap();
        let v: serde_json::Value = serde_json::from_str(text.trim()).unwrap();
        assert_eq!(v["agents"][0]["heading_rad"].to_string(), "3.1416");
        assert!(v["agents"][0]["leader_distance_m"].is_null());
        assert_eq!(v["radio_bytes"], 42);
    }

    #[test]
    fn format_follows_extension() {
        assert_eq!(MetricsFormat::from_path(Path::new("a.jsonl")), MetricsFormat::JsonLines);
        assert_eq!(MetricsFormat::from_path(Path::new("a.csv")), MetricsFormat::Csv);
    }
}
