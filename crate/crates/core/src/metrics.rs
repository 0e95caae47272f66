//! Calibration and accuracy metrics over prediction sets.
//!
//! Bins are fixed-width over `[0, 1]`: bin `m` (zero-based) covers
//! `[m/M, (m+1)/M)`, except the last bin which also contains `1.0`.
//! Empty bins contribute nothing to either ECE variant.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{argmax, log_softmax_at, softmax, Scalar};

/// Default number of evaluation bins for reported metrics.
pub const DEFAULT_EVAL_BINS: usize = 15;

/// `N x c` matrix of per-class confidences with one label per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet<T> {
    n_classes: usize,
    probs: Vec<T>,
    labels: Vec<usize>,
}

impl<T: Scalar> PredictionSet<T> {
    /// Builds a validated prediction set. Every row must be a distribution
    /// (entries in `[0, 1]`, row sum 1 within tolerance) and every label a
    /// valid class index.
    pub fn new(n_classes: usize, rows: Vec<Vec<T>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::ShapeMismatch {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        let mut probs = Vec::with_capacity(rows.len() * n_classes);
        for row in rows {
            if row.len() != n_classes {
                return Err(Error::ShapeMismatch {
                    expected: n_classes,
                    found: row.len(),
                });
            }
            probs.extend(row);
        }
        Self::from_flat(n_classes, probs, labels)
    }

    pub fn from_flat(n_classes: usize, probs: Vec<T>, labels: Vec<usize>) -> Result<Self> {
        if n_classes < 2 {
            return Err(Error::invalid("at least two classes are required"));
        }
        if probs.len() != labels.len() * n_classes {
            return Err(Error::ShapeMismatch {
                expected: labels.len() * n_classes,
                found: probs.len(),
            });
        }
        let tol = T::simplex_tolerance(n_classes);
        for (i, row) in probs.chunks(n_classes).enumerate() {
            if row
                .iter()
                .any(|&p| !p.is_finite() || p < T::zero() || p > T::one())
            {
                return Err(Error::InvalidPredictions(format!(
                    "row {i} has an entry outside [0, 1]"
                )));
            }
            let total: T = row.iter().copied().sum();
            if (total - T::one()).abs() > tol {
                return Err(Error::InvalidPredictions(format!(
                    "row {i} sums to {total}"
                )));
            }
        }
        if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= n_classes) {
            return Err(Error::InvalidPredictions(format!(
                "label {y} at row {i} is not a class index below {n_classes}"
            )));
        }
        Ok(Self {
            n_classes,
            probs,
            labels,
        })
    }

    /// Softmax of each logit row.
    pub fn from_logits(logits: &[Vec<T>], labels: Vec<usize>) -> Result<Self> {
        let n_classes = logits.first().map_or(2, Vec::len);
        let mut probs = Vec::with_capacity(logits.len() * n_classes);
        for row in logits {
            if row.iter().any(|z| !z.is_finite()) {
                return Err(Error::NonFinite("logits"));
            }
            probs.extend(softmax(row));
        }
        Self::from_flat(n_classes, probs, labels)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.probs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> + '_ {
        self.probs.chunks(self.n_classes)
    }

    fn non_empty(&self) -> Result<()> {
        if self.is_empty() {
            Err(Error::EmptyInput)
        } else {
            Ok(())
        }
    }
}

/// Fixed-width partition of `[0, 1]` into `bins` intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinPartition {
    bins: usize,
}

impl BinPartition {
    pub fn new(bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::invalid("bin count must be at least 1"));
        }
        Ok(Self { bins })
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    /// Zero-based bin containing `p`. Values are clamped into `[0, 1]`; the
    /// last bin is closed at 1.
    pub fn index<T: Scalar>(&self, p: T) -> usize {
        bin_index(p, self.bins)
    }
}

impl Default for BinPartition {
    fn default() -> Self {
        Self {
            bins: DEFAULT_EVAL_BINS,
        }
    }
}

pub(crate) fn bin_index<T: Scalar>(p: T, bins: usize) -> usize {
    if !(p > T::zero()) {
        return 0;
    }
    let scaled = (p * T::from_usize_lossy(bins)).floor();
    scaled.to_usize().unwrap_or(bins).min(bins - 1)
}

/// Mean over classes of the one-vs-all expected calibration error.
pub fn classwise_ece<T: Scalar>(preds: &PredictionSet<T>, bins: BinPartition) -> Result<T> {
    preds.non_empty()?;
    let c = preds.n_classes();
    let m = bins.bins();
    // per (class, bin): confidence sum and positive count
    let mut conf = vec![T::zero(); c * m];
    let mut pos = vec![T::zero(); c * m];
    for (row, &y) in preds.rows().zip(preds.labels()) {
        for (j, &p) in row.iter().enumerate() {
            let b = bins.index(p);
            conf[j * m + b] = conf[j * m + b] + p;
            if y == j {
                pos[j * m + b] = pos[j * m + b] + T::one();
            }
        }
    }
    let n = T::from_usize_lossy(preds.len());
    let total: T = conf
        .iter()
        .zip(&pos)
        .map(|(&s, &k)| (s - k).abs())
        .sum();
    Ok(total / n / T::from_usize_lossy(c))
}

/// Expected calibration error of the top-label confidence.
pub fn top_label_ece<T: Scalar>(preds: &PredictionSet<T>, bins: BinPartition) -> Result<T> {
    preds.non_empty()?;
    let m = bins.bins();
    let mut conf = vec![T::zero(); m];
    let mut hits = vec![T::zero(); m];
    for (row, &y) in preds.rows().zip(preds.labels()) {
        let top = argmax(row);
        let b = bins.index(row[top]);
        conf[b] = conf[b] + row[top];
        if top == y {
            hits[b] = hits[b] + T::one();
        }
    }
    let n = T::from_usize_lossy(preds.len());
    let total: T = conf.iter().zip(&hits).map(|(&s, &k)| (s - k).abs()).sum();
    Ok(total / n)
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy<T: Scalar>(preds: &PredictionSet<T>) -> Result<T> {
    preds.non_empty()?;
    let hits = preds
        .rows()
        .zip(preds.labels())
        .filter(|(row, &y)| argmax(row) == y)
        .count();
    Ok(T::from_usize_lossy(hits) / T::from_usize_lossy(preds.len()))
}

/// Mean negative log-likelihood of the true class under `softmax(logits)`.
pub fn nll<T: Scalar>(logits: &[Vec<T>], labels: &[usize]) -> Result<T> {
    if logits.is_empty() {
        return Err(Error::EmptyInput);
    }
    if logits.len() != labels.len() {
        return Err(Error::ShapeMismatch {
            expected: logits.len(),
            found: labels.len(),
        });
    }
    let mut total = T::zero();
    for (row, &y) in logits.iter().zip(labels) {
        if row.iter().any(|z| !z.is_finite()) {
            return Err(Error::NonFinite("logits"));
        }
        if y >= row.len() {
            return Err(Error::invalid(format!("label {y} out of range")));
        }
        total = total - log_softmax_at(row, y);
    }
    Ok(total / T::from_usize_lossy(logits.len()))
}

/// One row of a per-class reliability table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRow<T> {
    pub class: usize,
    pub bin: usize,
    pub count: usize,
    pub mean_conf: T,
    pub emp_freq: T,
}

/// Per-class, per-bin `(count, mean confidence, empirical frequency)`,
/// ordered by `(class, bin)`. Empty bins are emitted with zeros.
pub fn reliability_table<T: Scalar>(
    preds: &PredictionSet<T>,
    bins: BinPartition,
) -> Result<Vec<ReliabilityRow<T>>> {
    preds.non_empty()?;
    let c = preds.n_classes();
    let m = bins.bins();
    let mut count = vec![0usize; c * m];
    let mut conf = vec![T::zero(); c * m];
    let mut pos = vec![0usize; c * m];
    for (row, &y) in preds.rows().zip(preds.labels()) {
        for (j, &p) in row.iter().enumerate() {
            let k = j * m + bins.index(p);
            count[k] += 1;
            conf[k] = conf[k] + p;
            if y == j {
                pos[k] += 1;
            }
        }
    }
    Ok((0..c * m)
        .map(|k| {
            let (mean_conf, emp_freq) = if count[k] == 0 {
                (T::zero(), T::zero())
            } else {
                let n = T::from_usize_lossy(count[k]);
                (conf[k] / n, T::from_usize_lossy(pos[k]) / n)
            };
            ReliabilityRow {
                class: k / m,
                bin: k % m,
                count: count[k],
                mean_conf,
                emp_freq,
            }
        })
        .collect())
}

/// Classwise-ECE recomputed from reliability rows over `n_samples` samples.
pub fn classwise_ece_from_table<T: Scalar>(rows: &[ReliabilityRow<T>], n_samples: usize) -> Result<T> {
    if rows.is_empty() || n_samples == 0 {
        return Err(Error::EmptyInput);
    }
    let n_classes = rows.iter().map(|r| r.class).max().unwrap_or(0) + 1;
    let n = T::from_usize_lossy(n_samples);
    let total: T = rows
        .iter()
        .map(|r| T::from_usize_lossy(r.count) / n * (r.mean_conf - r.emp_freq).abs())
        .sum();
    Ok(total / T::from_usize_lossy(n_classes))
}

/// Writes reliability rows as CSV with header `class,bin,count,mean_conf,emp_freq`.
pub fn write_reliability_csv<T: Scalar, W: Write>(rows: &[ReliabilityRow<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["class", "bin", "count", "mean_conf", "emp_freq"])?;
    for r in rows {
        w.write_record([
            r.class.to_string(),
            r.bin.to_string(),
            r.count.to_string(),
            r.mean_conf.to_string(),
            r.emp_freq.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Summary metrics reported for every evaluated model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub cwece: f64,
    pub ece: f64,
    pub accuracy: f64,
}

impl MetricSummary {
    pub fn evaluate<T: Scalar>(preds: &PredictionSet<T>, bins: BinPartition) -> Result<Self> {
        Ok(Self {
            cwece: classwise_ece(preds, bins)?.as_f64(),
            ece: top_label_ece(preds, bins)?.as_f64(),
            accuracy: accuracy(preds)?.as_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn set(rows: Vec<Vec<f64>>, labels: Vec<usize>) -> PredictionSet<f64> {
        let c = rows[0].len();
        PredictionSet::new(c, rows, labels).unwrap()
    }

    fn ten() -> BinPartition {
        BinPartition::new(10).unwrap()
    }

    fn three_sample() -> PredictionSet<f64> {
        set(
            vec![vec![0.7, 0.3], vec![0.6, 0.4], vec![0.2, 0.8]],
            vec![0, 1, 1],
        )
    }

    /// Direct enumeration: for every class and every bin, collect the
    /// members by interval comparison and evaluate the definition.
    fn enumerate_cwece(preds: &PredictionSet<f64>, m: usize) -> f64 {
        let n = preds.len() as f64;
        let c = preds.n_classes();
        let mut total = 0.0;
        for j in 0..c {
            for b in 0..m {
                let lo = b as f64 / m as f64;
                let hi = (b + 1) as f64 / m as f64;
                let members: Vec<usize> = (0..preds.len())
                    .filter(|&i| {
                        let p = preds.row(i)[j];
                        p >= lo && (p < hi || (b == m - 1 && p <= 1.0))
                    })
                    .collect();
                if members.is_empty() {
                    continue;
                }
                let k = members.len() as f64;
                let mean: f64 = members.iter().map(|&i| preds.row(i)[j]).sum::<f64>() / k;
                let freq = members.iter().filter(|&&i| preds.labels()[i] == j).count() as f64 / k;
                total += k / n * (mean - freq).abs();
            }
        }
        total / c as f64
    }

    #[test]
    fn classwise_ece_trivial_cases() {
        let perfect = set(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(classwise_ece(&perfect, ten()).unwrap(), 0.0);
        let wrong = set(vec![vec![1.0, 0.0]], vec![1]);
        assert_eq!(classwise_ece(&wrong, ten()).unwrap(), 1.0);
    }

    #[test]
    fn classwise_ece_three_sample_enumeration() {
        let preds = three_sample();
        let oracle = enumerate_cwece(&preds, 10);
        // hand value: each class contributes (0.3 + 0.6 + 0.2) / 3
        assert_abs_diff_eq!(oracle, 1.1 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(classwise_ece(&preds, ten()).unwrap(), oracle, epsilon = 1e-12);
    }

    #[test]
    fn top_label_ece_cases() {
        let perfect = set(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0, 1]);
        assert_eq!(top_label_ece(&perfect, ten()).unwrap(), 0.0);
        let wrong = set(vec![vec![1.0, 0.0]], vec![1]);
        assert_eq!(top_label_ece(&wrong, ten()).unwrap(), 1.0);
        // bins 7, 6, 8 hold one sample each: |0.7-1|, |0.6-0|, |0.8-1|
        assert_abs_diff_eq!(
            top_label_ece(&three_sample(), ten()).unwrap(),
            (0.3 + 0.6 + 0.2) / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&set(vec![vec![0.9, 0.1]], vec![0])).unwrap(), 1.0);
        assert_eq!(accuracy(&set(vec![vec![0.5, 0.5]], vec![0])).unwrap(), 1.0);
        let half = set(vec![vec![0.2, 0.8], vec![0.6, 0.4]], vec![0, 0]);
        assert_eq!(accuracy(&half).unwrap(), 0.5);
    }

    #[test]
    fn empty_input_is_rejected() {
        let empty = PredictionSet::<f64>::from_flat(2, vec![], vec![]).unwrap();
        assert!(matches!(classwise_ece(&empty, ten()), Err(Error::EmptyInput)));
        assert!(matches!(top_label_ece(&empty, ten()), Err(Error::EmptyInput)));
        assert!(matches!(accuracy(&empty), Err(Error::EmptyInput)));
        assert!(matches!(reliability_table(&empty, ten()), Err(Error::EmptyInput)));
        assert!(matches!(nll::<f64>(&[], &[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn invalid_rows_are_rejected() {
        assert!(PredictionSet::new(2, vec![vec![0.7, 0.7]], vec![0]).is_err());
        assert!(PredictionSet::new(2, vec![vec![1.2, -0.2]], vec![0]).is_err());
        assert!(PredictionSet::new(2, vec![vec![0.5, 0.5]], vec![2]).is_err());
    }

    #[test]
    fn nll_cases() {
        assert_abs_diff_eq!(nll(&[vec![0.0, 0.0]], &[0]).unwrap(), 2f64.ln(), epsilon = 1e-15);
        // -ln sigmoid(20) = ln(1 + e^-20)
        let expected = (-20f64).exp().ln_1p();
        let got = nll(&[vec![10.0, -10.0]], &[0]).unwrap();
        assert!((got - expected).abs() / expected < 1e-6, "{got} vs {expected}");
        assert!((got - 2.061e-9).abs() < 1e-11);
        assert!(matches!(nll(&[vec![f64::NAN, 0.0]], &[0]), Err(Error::NonFinite(_))));
    }

    #[test]
    fn reliability_table_single_sample() {
        let rows = reliability_table(&set(vec![vec![1.0, 0.0]], vec![0]), ten()).unwrap();
        assert_eq!(rows.len(), 20);
        let top = &rows[9];
        assert_eq!((top.class, top.bin, top.count), (0, 9, 1));
        assert_eq!((top.mean_conf, top.emp_freq), (1.0, 1.0));
        let empty = &rows[3];
        assert_eq!((empty.count, empty.mean_conf, empty.emp_freq), (0, 0.0, 0.0));
        // class 1 sample sits in bin 0 as a negative
        assert_eq!((rows[10].count, rows[10].emp_freq), (1, 0.0));
    }

    #[test]
    fn reliability_table_three_sample() {
        let preds = three_sample();
        let rows = reliability_table(&preds, ten()).unwrap();
        let nonempty: Vec<_> = rows
            .iter()
            .filter(|r| r.count > 0)
            .map(|r| (r.class, r.bin, r.count, r.mean_conf, r.emp_freq))
            .collect();
        assert_eq!(
            nonempty,
            vec![
                (0, 2, 1, 0.2, 0.0),
                (0, 6, 1, 0.6, 0.0),
                (0, 7, 1, 0.7, 1.0),
                (1, 3, 1, 0.3, 0.0),
                (1, 4, 1, 0.4, 1.0),
                (1, 8, 1, 0.8, 1.0),
            ]
        );
        assert_abs_diff_eq!(
            classwise_ece_from_table(&rows, 3).unwrap(),
            classwise_ece(&preds, ten()).unwrap(),
            epsilon = 1e-12
        );
    }

    #[test]
    fn reliability_csv_header() {
        let rows = reliability_table(&three_sample(), ten()).unwrap();
        let mut buf = Vec::new();
        write_reliability_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("class,bin,count,mean_conf,emp_freq\n"));
        assert_eq!(text.lines().count(), 21);
    }

    #[test]
    fn zero_cwece_for_calibrated_fixture() {
        // in each bin, mean confidence equals the empirical frequency
        let preds = set(
            vec![
                vec![0.25, 0.75],
                vec![0.25, 0.75],
                vec![0.25, 0.75],
                vec![0.25, 0.75],
            ],
            vec![0, 1, 1, 1],
        );
        assert_abs_diff_eq!(classwise_ece(&preds, ten()).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn last_bin_is_closed() {
        let b = ten();
        assert_eq!(b.index(1.0_f64), 9);
        assert_eq!(b.index(0.0_f64), 0);
        assert_eq!(b.index(0.1_f64), 1);
        assert_eq!(b.index(0.0999_f64), 0);
    }

    fn arb_predictions() -> impl Strategy<Value = PredictionSet<f64>> {
        (2usize..5, 1usize..40).prop_flat_map(|(c, n)| {
            (
                proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, c), n),
                proptest::collection::vec(0..c, n),
            )
                .prop_map(move |(raw, labels)| {
                    let rows = raw
                        .into_iter()
                        .map(|r| {
                            let s: f64 = r.iter().sum::<f64>() + 1e-9;
                            r.iter().map(|x| (x + 1e-9 / c as f64) / s).collect()
                        })
                        .collect();
                    PredictionSet::new(c, rows, labels).unwrap()
                })
        })
    }

    proptest! {
        #[test]
        fn metrics_are_fractions(preds in arb_predictions(), m in 1usize..20) {
            let bins = BinPartition::new(m).unwrap();
            let cw = classwise_ece(&preds, bins).unwrap();
            let top = top_label_ece(&preds, bins).unwrap();
            prop_assert!((0.0..=1.0).contains(&cw));
            prop_assert!((0.0..=1.0).contains(&top));
            let table = reliability_table(&preds, bins).unwrap();
            let from_table = classwise_ece_from_table(&table, preds.len()).unwrap();
            prop_assert!((from_table - cw).abs() < 1e-12);
            prop_assert!((enumerate_cwece(&preds, m) - cw).abs() < 1e-12);
        }

        #[test]
        fn metrics_ignore_row_order(preds in arb_predictions(), shift in 0usize..40) {
            let n = preds.len();
            let c = preds.n_classes();
            let order: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
            let rows = order.iter().map(|&i| preds.row(i).to_vec()).collect();
            let labels = order.iter().map(|&i| preds.labels()[i]).collect();
            let permuted = PredictionSet::new(c, rows, labels).unwrap();
            let bins = BinPartition::default();
            prop_assert!((classwise_ece(&preds, bins).unwrap() - classwise_ece(&permuted, bins).unwrap()).abs() < 1e-12);
            prop_assert!((top_label_ece(&preds, bins).unwrap() - top_label_ece(&permuted, bins).unwrap()).abs() < 1e-12);
        }
    }
}
