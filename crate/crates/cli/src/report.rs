//! Report layout and its JSON and CSV encodings.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::CliError;

/// Row-major matrix with an explicit shape.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Mat {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

impl From<&DMatrix<f64>> for Mat {
    fn from(m: &DMatrix<f64>) -> Self {
        let (r, c) = m.shape();
        Self {
            shape: [r, c],
            data: (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect(),
        }
    }
}

impl From<&DVector<f64>> for Mat {
    fn from(v: &DVector<f64>) -> Self {
        Self {
            shape: [v.len(), 1],
            data: v.as_slice().to_vec(),
        }
    }
}

/// A pass/fail check with the tolerance it was judged against. Failed
/// `assumption` verdicts make the run exit with code 4.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub passes: bool,
    pub value: f64,
    pub tolerance: f64,
    pub assumption: bool,
}

impl Verdict {
    pub fn new(name: &str, passes: bool, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passes,
            value,
            tolerance,
            assumption: false,
        }
    }

    /// `|value| ≤ tolerance`.
    pub fn within(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passes: value.abs() <= tolerance,
            value,
            tolerance,
            assumption: false,
        }
    }

    /// `value ≥ −tolerance`.
    pub fn at_least_zero(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passes: value >= -tolerance,
            value,
            tolerance,
            assumption: false,
        }
    }

    pub fn flag(name: &str, passes: bool) -> Self {
        Self {
            name: name.into(),
            passes,
            value: f64::from(u8::from(passes)),
            tolerance: 0.0,
            assumption: false,
        }
    }

    pub fn assumption(mut self) -> Self {
        self.assumption = true;
        self
    }
}

/// One grid point's output: named values plus verdicts.
#[derive(Debug, Clone, Default)]
pub struct Record {
    pub values: Map<String, Value>,
    pub verdicts: Vec<Verdict>,
}

impl Record {
    pub fn put<T: Serialize>(&mut self, key: &str, value: T) -> &mut Self {
        let v = serde_json::to_value(value).expect("report values serialize");
        self.values.insert(key.into(), v);
        self
    }

    pub fn mat(&mut self, key: &str, m: &DMatrix<f64>) -> &mut Self {
        self.put(key, Mat::from(m))
    }

    pub fn verdict(&mut self, v: Verdict) -> &mut Self {
        self.verdicts.push(v);
        self
    }

    fn into_value(self, index: usize, theta: Option<&[f64]>) -> Value {
        let mut m = Map::new();
        m.insert("index".into(), Value::from(index));
        if let Some(t) = theta {
            m.insert("theta".into(), serde_json::to_value(t).expect("theta serializes"));
        }
        m.insert("values".into(), Value::Object(self.values));
        m.insert("verdicts".into(), serde_json::to_value(self.verdicts).expect("verdicts serialize"));
        Value::Object(m)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub records: usize,
    pub all_pass: bool,
    pub failed_verdicts: Vec<String>,
    pub assumption_violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub records: Vec<Value>,
    pub summary: Summary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Map<String, Value>>,
}

impl Report {
    /// Assemble a report from records already in grid order.
    pub fn new(command: &str, config: RunConfig, records: Vec<(Option<Vec<f64>>, Record)>) -> Self {
        let mut failed_verdicts = Vec::new();
        let mut assumption_violations = 0;
        let n = records.len();
        let values = records
            .into_iter()
            .enumerate()
            .map(|(i, (theta, r))| {
                for v in r.verdicts.iter().filter(|v| !v.passes) {
                    failed_verdicts.push(format!("{i}:{}", v.name));
                    if v.assumption {
                        assumption_violations += 1;
                    }
                }
                r.into_value(i, theta.as_deref())
            })
            .collect();
        Self {
            tool: "crpred",
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            config,
            records: values,
            summary: Summary {
                records: n,
                all_pass: failed_verdicts.is_empty(),
                failed_verdicts,
                assumption_violations,
            },
            timings_ms: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One row per record; nested values flattened to dotted column names,
    /// matrices to `name[i,j]`. Numbers are written with the JSON encoder so
    /// both files carry the same digits.
    pub fn to_csv(&self) -> Result<String, CliError> {
        let rows: Vec<Vec<(String, String)>> = self
            .records
            .iter()
            .map(|r| {
                let mut cells = Vec::new();
                flatten("", r, &mut cells);
                cells
            })
            .collect();
        let mut header: Vec<String> = Vec::new();
        for row in &rows {
            for (k, _) in row {
                if !header.contains(k) {
                    header.push(k.clone());
                }
            }
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&header).map_err(|e| CliError::Output(e.to_string()))?;
        for row in &rows {
            let line: Vec<&str> = header
                .iter()
                .map(|h| row.iter().find(|(k, _)| k == h).map_or("", |(_, v)| v.as_str()))
                .collect();
            w.write_record(&line).map_err(|e| CliError::Output(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn as_matrix(v: &Map<String, Value>) -> Option<([usize; 2], &Vec<Value>)> {
    if v.len() != 2 {
        return None;
    }
    let shape = v.get("shape")?.as_array()?;
    let data = v.get("data")?.as_array()?;
    let r = shape.first()?.as_u64()? as usize;
    let c = shape.get(1)?.as_u64()? as usize;
    (r * c == data.len()).then_some(([r, c], data))
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            if let Some(([_, c], data)) = as_matrix(m) {
                for (i, x) in data.iter().enumerate() {
                    out.push((format!("{prefix}[{},{}]", i / c, i % c), scalar_text(x)));
                }
                return;
            }
            if prefix.ends_with("verdicts") {
                return;
            }
            for (k, x) in m {
                flatten(&join(prefix, k), x, out);
            }
        }
        Value::Array(a) => {
            // Verdicts become `verdict.<name>` pass flags.
            if prefix == "verdicts" {
                for x in a {
                    if let (Some(name), Some(p)) = (x.get("name").and_then(Value::as_str), x.get("passes")) {
                        out.push((format!("verdict.{name}"), scalar_text(p)));
                    }
                }
                return;
            }
            for (i, x) in a.iter().enumerate() {
                flatten(&format!("{prefix}[{i}]"), x, out);
            }
        }
        other => out.push((prefix.to_string(), scalar_text(other))),
    }
}

fn scalar_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrices_are_row_major() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let mat = Mat::from(&m);
        assert_eq!(mat.shape, [2, 3]);
        assert_eq!(mat.data, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn csv_and_json_carry_the_same_digits() {
        let mut r = Record::default();
        r.put("x", 0.1 + 0.2).mat("m", &DMatrix::from_row_slice(1, 2, &[1.0 / 3.0, 2.5]));
        r.verdict(Verdict::within("small", 1e-9, 1e-6));
        let cfg = RunConfig::parse("{}").unwrap();
        let rep = Report::new("qep", cfg, vec![(Some(vec![0.5]), r)]);
        let json = rep.to_json();
        let csv = rep.to_csv().unwrap();
        let mut rd = csv::Reader::from_reader(csv.as_bytes());
        let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
        let row: Vec<String> = rd.records().next().unwrap().unwrap().iter().map(String::from).collect();
        let col = |name: &str| row[header.iter().position(|h| h == name).unwrap()].as_str();
        assert_eq!(col("values.x"), "0.30000000000000004");
        assert_eq!(col("values.m[0,0]"), "0.3333333333333333");
        assert_eq!(col("theta[0]"), "0.5");
        assert_eq!(col("verdict.small"), "true");
        assert!(json.contains("0.30000000000000004"));
        assert!(json.contains("0.3333333333333333"));
    }

    #[test]
    fn summary_counts_assumption_failures() {
        let mut r = Record::default();
        r.verdict(Verdict::flag("ok", true));
        r.verdict(Verdict::flag("cond", false).assumption());
        r.verdict(Verdict::within("loose", 2.0, 1.0));
        let rep = Report::new("l2diag", RunConfig::parse("{}").unwrap(), vec![(None, r)]);
        assert!(!rep.summary.all_pass);
        assert_eq!(rep.summary.assumption_violations, 1);
        assert_eq!(rep.summary.failed_verdicts, vec!["0:cond", "0:loose"]);
    }
}
