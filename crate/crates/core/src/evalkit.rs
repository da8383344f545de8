//! Confusion matrices, classification metrics, McNemar's exact test and
//! Monte Carlo random baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn new(tp: u64, fp: u64, fn_: u64, tn: u64) -> Self {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, actual: bool, predicted: bool) {
        match (actual, predicted) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    pub fn from_predictions(actual: &[bool], predicted: &[bool]) -> Self {
        let mut m = ConfusionMatrix::default();
        for (&a, &p) in actual.iter().zip(predicted) {
            m.record(a, p);
        }
        m
    }
}

/// Which metrics hit a zero denominator.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Degenerate {
    pub precision: bool,
    pub recall: bool,
    pub accuracy: bool,
    pub f1: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub f1: f64,
    pub degenerate: Degenerate,
}

fn ratio(num: f64, den: f64) -> (f64, bool) {
    if den > 0.0 {
        (num / den, false)
    } else {
        (0.0, true)
    }
}

pub fn metrics(m: &ConfusionMatrix) -> Result<MetricSet> {
    if m.total() == 0 {
        return Err(Error::Eval("confusion matrix is empty".into()));
    }
    let (tp, fp, fn_, tn) = (m.tp as f64, m.fp as f64, m.fn_ as f64, m.tn as f64);
    let (precision, dp) = ratio(tp, tp + fp);
    let (recall, dr) = ratio(tp, tp + fn_);
    let (accuracy, da) = ratio(tp + tn, m.total() as f64);
    let (f1, df) = if dp || dr { (0.0, true) } else { ratio(2.0 * precision * recall, precision + recall) };
    Ok(MetricSet { precision, recall, accuracy, f1, degenerate: Degenerate { precision: dp, recall: dr, accuracy: da, f1: df } })
}

/// Exact two-sided McNemar test on discordant counts `b` and `c`.
pub fn mcnemar_exact(b: u64, c: u64) -> f64 {
    let n = b + c;
    if n == 0 {
        return 1.0;
    }
    let k_max = b.min(c);
    // Binomial(n, 1/2) tail summed in log space so large n does not underflow.
    let mut log_pmf = -(n as f64) * std::f64::consts::LN_2;
    let mut tail = 0.0;
    for k in 0..=k_max {
        tail += log_pmf.exp();
        log_pmf += ((n - k) as f64).ln() - ((k + 1) as f64).ln();
    }
    (2.0 * tail).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    CoinFlip,
    Calibrated,
}

/// Metric samples from a random classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub kind: BaselineKind,
    pub p_pos: f64,
    pub seed: u64,
    pub f1: Vec<f64>,
    pub accuracy: Vec<f64>,
}

impl Distribution {
    pub fn iterations(&self) -> usize {
        self.f1.len()
    }

    pub fn mean_accuracy(&self) -> f64 {
        self.accuracy.iter().sum::<f64>() / self.accuracy.len() as f64
    }

    pub fn mean_f1(&self) -> f64 {
        self.f1.iter().sum::<f64>() / self.f1.len() as f64
    }
}

/// Iteration `i` draws from its own ChaCha stream, so results do not depend
/// on how iterations are spread over threads.
pub fn simulate_baseline(kind: BaselineKind, labels: &[bool], p_pos: f64, iterations: usize, seed: u64) -> Result<Distribution> {
    if labels.is_empty() {
        return Err(Error::Eval("no labels to score against".into()));
    }
    if iterations == 0 {
        return Err(Error::Eval("iterations must be positive".into()));
    }
    let p_pos = match kind {
        BaselineKind::CoinFlip => 0.5,
        BaselineKind::Calibrated => p_pos,
    };
    if !(0.0..=1.0).contains(&p_pos) {
        return Err(Error::Eval(format!("positive rate {p_pos} outside [0, 1]")));
    }
    let samples: Vec<(f64, f64)> = (0..iterations as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let mut m = ConfusionMatrix::default();
            for &actual in labels {
                m.record(actual, rng.random_bool(p_pos));
            }
            let ms = metrics(&m).expect("labels are non-empty");
            (ms.f1, ms.accuracy)
        })
        .collect();
    let (f1, accuracy) = samples.into_iter().unzip();
    Ok(Distribution { kind, p_pos, seed, f1, accuracy })
}

/// Share of samples at least as good as `observed`, with add-one smoothing.
pub fn empirical_pvalue(samples: &[f64], observed: f64) -> f64 {
    let at_least = samples.iter().filter(|&&s| s >= observed).count();
    (at_least + 1) as f64 / (samples.len() + 1) as f64
}
