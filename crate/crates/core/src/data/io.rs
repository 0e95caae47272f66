//! Logit CSV files: `client_id,split,label,logit_0,...,logit_{c-1}`.
//!
//! `client_id` and `split` are optional on ingest. Paths ending in `.gz` are
//! gzip-compressed. Floats are written in the shortest form that parses back
//! to the same value.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use super::{ClientDataset, LogitRecord, Split};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Parsed logit file, grouped by client. Files without a `client_id`
/// column yield a single client 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitTable<T> {
    pub clients: Vec<ClientDataset<T>>,
    pub has_client_ids: bool,
    pub has_splits: bool,
}

impl<T: Scalar> LogitTable<T> {
    pub fn records(&self) -> Vec<LogitRecord<T>> {
        self.clients.iter().flat_map(|c| c.records.iter().cloned()).collect()
    }
}

fn is_gz(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("gz"))
}

pub fn write_logits<T: Scalar, W: Write>(clients: &[ClientDataset<T>], out: W) -> Result<()> {
    write_table(clients, true, out)
}

/// Writes only `label,logit_0,...` columns.
pub fn write_plain_logits<T: Scalar, W: Write>(records: &[LogitRecord<T>], out: W) -> Result<()> {
    write_table(&[ClientDataset::new(0, records.to_vec())], false, out)
}

fn write_table<T: Scalar, W: Write>(clients: &[ClientDataset<T>], with_meta: bool, out: W) -> Result<()> {
    let c = super::common_class_count(clients.iter().flat_map(|c| c.records.iter()))?.unwrap_or(2);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = if with_meta {
        vec!["client_id".into(), "split".into()]
    } else {
        Vec::new()
    };
    header.push("label".into());
    header.extend((0..c).map(|j| format!("logit_{j}")));
    w.write_record(&header)?;
    for client in clients {
        for r in &client.records {
            let mut row = if with_meta {
                vec![client.client_id.to_string(), r.split.as_str().to_string()]
            } else {
                Vec::new()
            };
            row.push(r.label.to_string());
            // Shortest representation that parses back to the same value.
            row.extend(r.logits.iter().map(|z| z.to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

fn write_file(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut file = BufWriter::new(File::create(path)?);
    if is_gz(path) {
        let mut enc = GzEncoder::new(&mut file, Compression::default());
        body(&mut enc)?;
        enc.finish()?;
    } else {
        body(&mut file)?;
    }
    file.flush()?;
    Ok(())
}

/// Writes partitioned data with `client_id` and `split` columns; a `.gz`
/// extension selects gzip.
pub fn export_logits_file<T: Scalar>(clients: &[ClientDataset<T>], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| write_logits(clients, w))
}

/// Writes un-partitioned records without client or split columns.
pub fn export_records<T: Scalar>(records: &[LogitRecord<T>], path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), |w| write_plain_logits(records, w))
}

struct Layout {
    client_col: Option<usize>,
    split_col: Option<usize>,
    label_col: usize,
    first_logit: usize,
    n_classes: usize,
}

fn parse_header(header: &csv::StringRecord) -> Result<Layout> {
    let names: Vec<&str> = header.iter().map(str::trim).collect();
    let mut pos = 0;
    let client_col = (names.first() == Some(&"client_id")).then(|| {
        pos += 1;
        0
    });
    let split_col = (names.get(pos) == Some(&"split")).then(|| {
        pos += 1;
        pos - 1
    });
    if names.get(pos) != Some(&"label") {
        return Err(Error::Parse {
            line: 1,
            message: "header must be [client_id,][split,]label,logit_0,...".into(),
        });
    }
    let label_col = pos;
    let first_logit = pos + 1;
    let n_classes = names.len() - first_logit;
    for (j, name) in names[first_logit..].iter().enumerate() {
        if *name != format!("logit_{j}") {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected column logit_{j}, found {name:?}"),
            });
        }
    }
    if n_classes < 2 {
        return Err(Error::Parse {
            line: 1,
            message: "at least two logit columns are required".into(),
        });
    }
    Ok(Layout {
        client_col,
        split_col,
        label_col,
        first_logit,
        n_classes,
    })
}

pub fn read_logits<T: Scalar, R: Read>(input: R) -> Result<LogitTable<T>> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let layout = parse_header(rdr.headers()?)?;
    let mut rows: Vec<(usize, LogitRecord<T>)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let fail = |message: String| Error::Parse { line, message };
        if rec.len() != layout.first_logit + layout.n_classes {
            return Err(fail(format!(
                "expected {} logits, found {} fields",
                layout.n_classes,
                rec.len()
            )));
        }
        let client = match layout.client_col {
            Some(i) => rec[i]
                .trim()
                .parse::<usize>()
                .map_err(|e| fail(format!("bad client_id: {e}")))?,
            None => 0,
        };
        let split = match layout.split_col {
            Some(i) => Split::parse(&rec[i]).ok_or_else(|| fail(format!("unknown split {:?}", &rec[i])))?,
            None => Split::Train,
        };
        let label = rec[layout.label_col]
            .trim()
            .parse::<usize>()
            .map_err(|e| fail(format!("bad label: {e}")))?;
        if label >= layout.n_classes {
            return Err(fail(format!(
                "label {label} out of range for {} classes",
                layout.n_classes
            )));
        }
        let logits = rec
            .iter()
            .skip(layout.first_logit)
            .map(|s| {
                let v: f64 = s.trim().parse().map_err(|e| fail(format!("bad logit {s:?}: {e}")))?;
                if !v.is_finite() {
                    return Err(fail(format!("non-finite logit {s:?}")));
                }
                Ok(T::lit(v))
            })
            .collect::<Result<Vec<T>>>()?;
        rows.push((client, LogitRecord { label, logits, split }));
    }
    let n_clients = rows.iter().map(|(k, _)| k + 1).max().unwrap_or(1);
    let mut clients: Vec<ClientDataset<T>> = (0..n_clients).map(|k| ClientDataset::new(k, Vec::new())).collect();
    for (k, r) in rows {
        clients[k].records.push(r);
    }
    Ok(LogitTable {
        clients,
        has_client_ids: layout.client_col.is_some(),
        has_splits: layout.split_col.is_some(),
    })
}

pub fn ingest_logits_file<T: Scalar>(path: impl AsRef<Path>) -> Result<LogitTable<T>> {
    let path = path.as_ref();
    let file = BufReader::new(File::open(path)?);
    if is_gz(path) {
        read_logits(GzDecoder::new(file))
    } else {
        read_logits(file)
    }
}
