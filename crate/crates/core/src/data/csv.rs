use std::collections::BTreeSet;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Trim, WriterBuilder};

use super::{Dataset, Label};
use crate::error::{MknnError, Result};

/// Which CSV column holds the class label.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub enum LabelColumn {
    #[default]
    Last,
    Index(usize),
    /// Header name; forces the first line to be read as a header.
    Name(String),
}

impl std::str::FromStr for LabelColumn {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "last" => LabelColumn::Last,
            _ => match s.parse::<usize>() {
                Ok(i) => LabelColumn::Index(i),
                Err(_) => LabelColumn::Name(s.to_string()),
            },
        })
    }
}

#[derive(Clone, Debug)]
pub struct CsvOptions {
    pub label_column: LabelColumn,
    /// Label tokens meaning "no label".
    pub unlabeled_markers: Vec<String>,
    /// `None` detects a header from non-numeric feature fields.
    pub has_header: Option<bool>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: LabelColumn::Last,
            unlabeled_markers: vec![String::new(), "?".to_string()],
            has_header: None,
        }
    }
}

pub fn load_csv(path: impl AsRef<Path>, opts: &CsvOptions) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| MknnError::io(path, e))?;
    read_csv(file, opts)
}

pub fn read_csv<R: Read>(reader: R, opts: &CsvOptions) -> Result<Dataset> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let mut records: Vec<(usize, StringRecord)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| MknnError::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec
            .position()
            .map_or(records.len() + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        records.push((line, rec));
    }
    let Some((_, first)) = records.first() else {
        return Err(MknnError::EmptyDataset);
    };
    let width = first.len();
    if width < 2 {
        return Err(MknnError::Parse {
            row: records[0].0,
            message: "need at least one feature column and a label column".into(),
        });
    }

    let header_given = matches!(opts.label_column, LabelColumn::Name(_));
    let label_idx = match &opts.label_column {
        LabelColumn::Last => width - 1,
        LabelColumn::Index(i) if *i < width => *i,
        LabelColumn::Index(i) => {
            return Err(MknnError::param(
                "label_column",
                format!("index {i} out of range for {width} columns"),
            ))
        }
        LabelColumn::Name(name) => first
            .iter()
            .position(|f| f == name)
            .ok_or_else(|| MknnError::param("label_column", format!("no column named `{name}`")))?,
    };
    let has_header = opts.has_header.unwrap_or_else(|| {
        header_given
            || first
                .iter()
                .enumerate()
                .any(|(j, f)| j != label_idx && f.parse::<f64>().is_err())
    });
    let body = if has_header {
        &records[1..]
    } else {
        &records[..]
    };
    if body.is_empty() {
        return Err(MknnError::EmptyDataset);
    }

    let dim = width - 1;
    let mut samples = Vec::with_capacity(body.len() * dim);
    let mut tokens: Vec<Option<&str>> = Vec::with_capacity(body.len());
    for (line, rec) in body {
        if rec.len() != width {
            return Err(MknnError::Parse {
                row: *line,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (j, field) in rec.iter().enumerate() {
            if j == label_idx {
                continue;
            }
            let v: f64 = field.parse().map_err(|_| MknnError::Parse {
                row: *line,
                message: format!("non-numeric feature `{field}` in column {}", j + 1),
            })?;
            if !v.is_finite() {
                return Err(MknnError::Parse {
                    row: *line,
                    message: format!("non-finite feature `{field}` in column {}", j + 1),
                });
            }
            samples.push(v);
        }
        let token = &rec[label_idx];
        tokens.push((!opts.unlabeled_markers.iter().any(|m| m == token)).then_some(token));
    }

    let class_names = ordered_class_names(tokens.iter().flatten().copied());
    if class_names.is_empty() {
        return Err(MknnError::NoLabeledSamples);
    }
    let labels = tokens
        .iter()
        .map(|t| t.map(|t| class_names.iter().position(|c| c == t).unwrap() as Label + 1))
        .collect();
    Dataset::with_class_names(samples, dim, labels, class_names)
}

/// Reads unlabeled feature rows (every field numeric). A first line with a
/// non-numeric field is taken as a header.
pub fn read_points<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (pos, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| MknnError::Parse {
            row: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = rec.position().map_or(pos + 1, |p| p.line() as usize);
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if pos == 0 => continue,
            Err(_) => {
                return Err(MknnError::Parse {
                    row: line,
                    message: "non-numeric field".into(),
                })
            }
        };
        if row.iter().any(|v| !v.is_finite()) {
            return Err(MknnError::Parse {
                row: line,
                message: "non-finite field".into(),
            });
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(MknnError::Parse {
                    row: line,
                    message: format!("expected {} fields, found {}", first.len(), row.len()),
                });
            }
        }
        rows.push(row);
    }
    Ok(rows)
}

/// Distinct label tokens, ordered numerically when every token is a number
/// and lexicographically otherwise. Class `c` is `names[c - 1]`.
fn ordered_class_names<'a>(tokens: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = tokens.collect();
    let mut names: Vec<&str> = distinct.into_iter().collect();
    if names.iter().all(|t| t.parse::<f64>().is_ok()) {
        names.sort_by(|a, b| {
            let (x, y) = (a.parse::<f64>().unwrap(), b.parse::<f64>().unwrap());
            x.total_cmp(&y).then_with(|| a.cmp(b))
        });
    }
    names.into_iter().map(str::to_string).collect()
}

/// Writes `x1..xd,label`; unlabeled rows get `?`. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_csv<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut wtr = WriterBuilder::new().from_writer(writer);
    let to_err = |e: csv::Error| MknnError::Format(e.to_string());
    let mut header: Vec<String> = (1..=ds.dim()).map(|j| format!("x{j}")).collect();
    header.push("label".into());
    wtr.write_record(&header).map_err(to_err)?;
    let mut record = Vec::with_capacity(ds.dim() + 1);
    for i in 0..ds.n() {
        record.clear();
        record.extend(ds.row(i).iter().map(|v| format!("{v:?}")));
        record.push(match ds.label(i) {
            Some(c) => ds.class_names()[c as usize - 1].clone(),
            None => "?".into(),
        });
        wtr.write_record(&record).map_err(to_err)?;
    }
    wtr.flush()
        .map_err(|e| MknnError::Format(format!("flush failed: {e}")))
}

pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| MknnError::io(path, e))?;
    write_csv(ds, std::io::BufWriter::new(file))
}
