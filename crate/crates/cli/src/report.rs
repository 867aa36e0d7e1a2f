//! Training, validation and testing tables with one row per model.
//!
//! Rows come from the final record of each run log and, optionally, from an
//! external CSV with header `model,split,accuracy,auc,recall,loss`. External
//! rates may be fractions (`0.8413`) or percentages (`84.13%` or `84.13`);
//! any rate above 1 is read as a percentage.

use std::collections::HashSet;
use std::fmt::Write as _;

use lungcnn::metrics::MetricSummary;
use serde::Deserialize;

use crate::error::{CliError, Result};
use crate::runlog::RunRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Table {
    Training,
    Validation,
    Testing,
}

impl Table {
    pub const ALL: [Table; 3] = [Table::Training, Table::Validation, Table::Testing];

    pub fn name(self) -> &'static str {
        match self {
            Table::Training => "training",
            Table::Validation => "validation",
            Table::Testing => "testing",
        }
    }

    fn title(self) -> &'static str {
        match self {
            Table::Training => "Training results",
            Table::Validation => "Validation results",
            Table::Testing => "Testing results",
        }
    }

    fn column_prefix(self) -> &'static str {
        match self {
            Table::Training => "Training",
            Table::Validation => "Val.",
            Table::Testing => "Testing",
        }
    }

    fn index(self) -> usize {
        self as usize
    }

    fn parse(s: &str) -> Option<Table> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" | "training" => Some(Table::Training),
            "val" | "valid" | "validation" => Some(Table::Validation),
            "test" | "testing" => Some(Table::Testing),
            _ => None,
        }
    }
}

/// The four reported numbers. Rates are fractions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scores {
    pub accuracy: f64,
    pub auc: f64,
    pub recall: f64,
    pub loss: f64,
}

impl From<&MetricSummary> for Scores {
    fn from(m: &MetricSummary) -> Self {
        Scores {
            accuracy: m.accuracy,
            auc: m.auc,
            recall: m.recall,
            loss: m.loss,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelEntry {
    pub model: String,
    /// Indexed by [`Table`].
    pub scores: [Option<Scores>; 3],
}

impl ModelEntry {
    pub fn from_runlog(records: &[RunRecord]) -> Result<Self> {
        let last = records
            .last()
            .ok_or_else(|| CliError::Data("run log has no records".into()))?;
        Ok(ModelEntry {
            model: last.model.clone(),
            scores: [
                Some((&last.train).into()),
                Some((&last.validation).into()),
                last.test.as_ref().map(Scores::from),
            ],
        })
    }

    pub fn get(&self, table: Table) -> Option<Scores> {
        self.scores[table.index()]
    }
}

#[derive(Debug, Deserialize)]
struct ExternRow {
    model: String,
    split: String,
    accuracy: String,
    auc: String,
    recall: String,
    loss: String,
}

fn parse_rate(field: &str, value: &str) -> std::result::Result<f64, String> {
    let v = value.trim();
    let (num, percent) = match v.strip_suffix('%') {
        Some(n) => (n.trim(), true),
        None => (v, false),
    };
    let x: f64 = num.parse().map_err(|_| format!("{field} `{value}` is not a number"))?;
    // reparse with a shifted exponent so "84.13" becomes the f64 nearest 0.8413
    let x = if percent || x > 1.0 {
        format!("{num}e-2").parse().map_err(|_| format!("{field} `{value}` is not a number"))?
    } else {
        x
    };
    if !(0.0..=1.0).contains(&x) {
        return Err(format!("{field} `{value}` is outside 0..100%"));
    }
    Ok(x)
}

fn parse_loss(value: &str) -> std::result::Result<f64, String> {
    let x: f64 = value
        .trim()
        .parse()
        .map_err(|_| format!("loss `{value}` is not a number"))?;
    if !(x >= 0.0 && x.is_finite()) {
        return Err(format!("loss `{value}` must be a non-negative number"));
    }
    Ok(x)
}

/// Reads external metric rows, merging rows of one model across splits. A
/// repeated (model, split) pair starts a new entry under the same name.
pub fn parse_extern(text: &str, origin: &str) -> Result<Vec<ModelEntry>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut entries: Vec<ModelEntry> = Vec::new();
    for (i, row) in reader.deserialize::<ExternRow>().enumerate() {
        let line = i + 2;
        let named = |msg: String| CliError::Data(format!("{origin} line {line}: {msg}"));
        let row = row.map_err(|e| named(e.to_string()))?;
        if row.model.is_empty() {
            return Err(named("empty model name".into()));
        }
        let table = Table::parse(&row.split)
            .ok_or_else(|| named(format!("split `{}` is not train, val or test", row.split)))?;
        let scores = Scores {
            accuracy: parse_rate("accuracy", &row.accuracy).map_err(named)?,
            auc: parse_rate("auc", &row.auc).map_err(named)?,
            recall: parse_rate("recall", &row.recall).map_err(named)?,
            loss: parse_loss(&row.loss).map_err(named)?,
        };
        let slot = entries
            .iter_mut()
            .rev()
            .find(|e| e.model == row.model)
            .filter(|e| e.get(table).is_none());
        match slot {
            Some(e) => e.scores[table.index()] = Some(scores),
            None => {
                let mut e = ModelEntry {
                    model: row.model,
                    scores: [None; 3],
                };
                e.scores[table.index()] = Some(scores);
                entries.push(e);
            }
        }
    }
    Ok(entries)
}

/// Appends ` (2)`, ` (3)`, … to repeated model names, keeping the first as is.
pub fn disambiguate(entries: &mut [ModelEntry]) {
    let mut used: HashSet<String> = entries.iter().map(|e| e.model.clone()).collect();
    let mut seen: HashSet<String> = HashSet::new();
    for e in entries.iter_mut() {
        if seen.insert(e.model.clone()) {
            continue;
        }
        let mut k = 2;
        while used.contains(&format!("{} ({k})", e.model)) {
            k += 1;
        }
        e.model = format!("{} ({k})", e.model);
        used.insert(e.model.clone());
    }
}

fn percent(x: f64) -> String {
    format!("{:.2}%", x * 100.0)
}

pub fn render_text(entries: &[ModelEntry]) -> String {
    let mut out = String::new();
    for table in Table::ALL {
        let p = table.column_prefix();
        let header = [
            "Models".to_string(),
            format!("{p} Accuracy"),
            format!("{p} AUC"),
            format!("{p} Recall"),
            format!("{p} Loss"),
        ];
        let rows: Vec<[String; 5]> = entries
            .iter()
            .map(|e| match e.get(table) {
                Some(s) => [
                    e.model.clone(),
                    percent(s.accuracy),
                    percent(s.auc),
                    percent(s.recall),
                    format!("{:.3}", s.loss),
                ],
                None => [e.model.clone(), "-".into(), "-".into(), "-".into(), "-".into()],
            })
            .collect();
        let mut widths = header.clone().map(|h| h.len());
        for r in &rows {
            for (w, cell) in widths.iter_mut().zip(r) {
                *w = (*w).max(cell.chars().count());
            }
        }
        let line = |cells: &[String; 5]| {
            cells
                .iter()
                .zip(&widths)
                .map(|(c, &w)| format!("{c:<w$}"))
                .collect::<Vec<_>>()
                .join(" | ")
                .trim_end()
                .to_string()
        };
        let _ = writeln!(out, "{}", table.title());
        let _ = writeln!(out, "{}", line(&header));
        let _ = writeln!(
            out,
            "{}",
            widths.iter().map(|&w| "-".repeat(w)).collect::<Vec<_>>().join("-|-")
        );
        for r in &rows {
            let _ = writeln!(out, "{}", line(r));
        }
        out.push('\n');
    }
    out
}

/// Long-form CSV: `table,model,accuracy,auc,recall,loss`, fractions written
/// at full precision, empty cells where a model has no entry.
pub fn render_csv(entries: &[ModelEntry]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["table", "model", "accuracy", "auc", "recall", "loss"])
        .expect("in-memory write");
    for table in Table::ALL {
        for e in entries {
            let cells = match e.get(table) {
                Some(s) => [s.accuracy, s.auc, s.recall, s.loss].map(|v| v.to_string()),
                None => Default::default(),
            };
            let mut rec = vec![table.name().to_string(), e.model.clone()];
            rec.extend(cells);
            w.write_record(&rec).expect("in-memory write");
        }
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_accept_both_forms() {
        assert_eq!(parse_rate("a", "84.13%").unwrap(), 0.8413);
        assert_eq!(parse_rate("a", "84.13").unwrap(), 0.8413);
        assert_eq!(parse_rate("a", "0.8413").unwrap(), 0.8413);
        assert_eq!(parse_rate("a", "100%").unwrap(), 1.0);
        assert!(parse_rate("a", "abc").is_err());
        assert!(parse_rate("a", "140%").is_err());
    }

    #[test]
    fn extern_rows_merge_then_split_on_repeat() {
        let text = "model,split,accuracy,auc,recall,loss\n\
                    X,test,0.5,0.5,0.5,1\n\
                    X,train,0.9,0.9,0.9,0.1\n\
                    X,test,0.6,0.6,0.6,1\n";
        let e = parse_extern(text, "x.csv").unwrap();
        assert_eq!(e.len(), 2);
        assert!(e[0].get(Table::Training).is_some());
        assert_eq!(e[1].get(Table::Testing).unwrap().accuracy, 0.6);
    }

    #[test]
    fn bad_row_names_line() {
        let text = "model,split,accuracy,auc,recall,loss\nX,test,0.5,0.5,0.5,1\nY,holdout,1,1,1,1\n";
        let err = parse_extern(text, "x.csv").unwrap_err().to_string();
        assert!(err.contains("x.csv line 3"), "{err}");
    }

    #[test]
    fn duplicate_names_suffixed() {
        let entry = |m: &str| ModelEntry {
            model: m.into(),
            scores: [None; 3],
        };
        let mut e = vec![entry("CNN"), entry("CNN"), entry("CNN (2)"), entry("CNN")];
        disambiguate(&mut e);
        let names: Vec<&str> = e.iter().map(|e| e.model.as_str()).collect();
        assert_eq!(names, ["CNN", "CNN (3)", "CNN (2)", "CNN (4)"]);
    }

    #[test]
    fn csv_round_trips_values() {
        let s = Scores {
            accuracy: 0.1 + 0.2,
            auc: 1.0 / 3.0,
            recall: 0.5,
            loss: 0.328,
        };
        let e = [ModelEntry {
            model: "CNN".into(),
            scores: [Some(s), None, Some(s)],
        }];
        let csv = render_csv(&e);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "table,model,accuracy,auc,recall,loss");
        assert_eq!(lines[2], "validation,CNN,,,,");
        let f: Vec<f64> = lines[3].split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert_eq!(f, [s.accuracy, s.auc, s.recall, s.loss]);
    }
}
