//! Client-partitioned logit datasets.

mod io;
mod partition;
mod synthetic;

pub use io::{
    export_logits_file, export_records, ingest_logits_file, read_logits, write_logits, write_plain_logits, LogitTable,
};
pub use partition::{
    dirichlet_label_skew_partition, split_local, split_sizes, PartitionSpec, SplitFractions,
};
pub use synthetic::{synthetic_miscalibrated_generate, SyntheticSpec};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::PredictionSet;
use crate::scalar::Scalar;

/// Which local split a record belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Calibration,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Calibration => "calibration",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim() {
            "train" => Some(Split::Train),
            "calibration" | "cal" => Some(Split::Calibration),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

/// A single example: its label, the model's logits and the split tag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord<T> {
    pub label: usize,
    pub logits: Vec<T>,
    pub split: Split,
}

impl<T: Scalar> LogitRecord<T> {
    pub fn new(label: usize, logits: Vec<T>, split: Split) -> Result<Self> {
        if logits.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        if label >= logits.len() {
            return Err(Error::invalid(format!(
                "label {label} out of range for {} classes",
                logits.len()
            )));
        }
        Ok(Self {
            label,
            logits,
            split,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.logits.len()
    }
}

/// One client's local data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientDataset<T> {
    pub client_id: usize,
    pub records: Vec<LogitRecord<T>>,
}

impl<T: Scalar> ClientDataset<T> {
    pub fn new(client_id: usize, records: Vec<LogitRecord<T>>) -> Self {
        Self { client_id, records }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &LogitRecord<T>> + '_ {
        self.records.iter().filter(move |r| r.split == split)
    }

    /// Logits and labels of one split, in record order.
    pub fn split_arrays(&self, split: Split) -> (Vec<Vec<T>>, Vec<usize>) {
        self.split(split)
            .map(|r| (r.logits.clone(), r.label))
            .unzip()
    }
}

/// Number of classes shared by all records, or an error if they disagree.
pub fn common_class_count<'a, T: Scalar + 'a>(
    records: impl IntoIterator<Item = &'a LogitRecord<T>>,
) -> Result<Option<usize>> {
    let mut c = None;
    for r in records {
        match c {
            None => c = Some(r.n_classes()),
            Some(k) if k != r.n_classes() => {
                return Err(Error::ShapeMismatch {
                    expected: k,
                    found: r.n_classes(),
                })
            }
            _ => {}
        }
    }
    Ok(c)
}

/// Pools one split across clients in client order.
pub fn pooled_split<T: Scalar>(clients: &[ClientDataset<T>], split: Split) -> (Vec<Vec<T>>, Vec<usize>) {
    clients
        .iter()
        .flat_map(|c| c.split(split))
        .map(|r| (r.logits.clone(), r.label))
        .unzip()
}

/// Softmax predictions for the pooled split.
pub fn pooled_predictions<T: Scalar>(
    clients: &[ClientDataset<T>],
    split: Split,
) -> Result<PredictionSet<T>> {
    let (logits, labels) = pooled_split(clients, split);
    let c = common_class_count(clients.iter().flat_map(|c| c.records.iter()))?.unwrap_or(2);
    if logits.is_empty() {
        return PredictionSet::from_flat(c, Vec::new(), Vec::new());
    }
    PredictionSet::from_logits(&logits, labels)
}
