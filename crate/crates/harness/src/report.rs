//! Error analysis over a list of predictions: inputs that collapse onto one
//! wrong form, and near-identical inputs whose predictions diverge.

use std::fmt::Write as _;

use gpsr_core::metrics::edit_distance;
use gpsr_core::text::tokenize_command;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

/// Distinct inputs sharing one incorrect prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapseCluster {
    pub prediction: String,
    pub inputs: Vec<String>,
    pub golds: Vec<String>,
}

/// Two inputs one word apart with different predictions, at least one of
/// them wrong.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPair {
    pub first: String,
    pub second: String,
    pub first_prediction: String,
    pub second_prediction: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ErrorReport {
    pub total: usize,
    pub incorrect: usize,
    pub collapses: Vec<CollapseCluster>,
    pub sensitivity: Vec<SensitivityPair>,
}

pub const MIN_CLUSTER: usize = 3;

/// `inputs`, `predictions` and `gold` are aligned. A prediction counts as
/// wrong when it differs from its gold string.
pub fn error_report(inputs: &[String], predictions: &[String], gold: &[String]) -> ErrorReport {
    assert!(
        inputs.len() == predictions.len() && predictions.len() == gold.len(),
        "error_report needs aligned lists"
    );
    let mut wrong: IndexMap<&str, Vec<usize>> = IndexMap::new();
    let mut incorrect = 0;
    for i in 0..inputs.len() {
        if predictions[i] != gold[i] {
            incorrect += 1;
            wrong.entry(predictions[i].as_str()).or_default().push(i);
        }
    }
    let mut collapses = Vec::new();
    for (pred, idx) in wrong {
        let mut seen = Vec::new();
        let mut golds = Vec::new();
        for &i in &idx {
            if !seen.contains(&inputs[i]) {
                seen.push(inputs[i].clone());
                golds.push(gold[i].clone());
            }
        }
        if seen.len() >= MIN_CLUSTER {
            collapses.push(CollapseCluster {
                prediction: pred.to_string(),
                inputs: seen,
                golds,
            });
        }
    }

    let words: Vec<Vec<String>> = inputs.iter().map(|s| tokenize_command(s)).collect();
    let mut sensitivity = Vec::new();
    for i in 0..inputs.len() {
        for j in i + 1..inputs.len() {
            let any_wrong = predictions[i] != gold[i] || predictions[j] != gold[j];
            if any_wrong && predictions[i] != predictions[j] && edit_distance(&words[i], &words[j]) == 1 {
                sensitivity.push(SensitivityPair {
                    first: inputs[i].clone(),
                    second: inputs[j].clone(),
                    first_prediction: predictions[i].clone(),
                    second_prediction: predictions[j].clone(),
                });
            }
        }
    }
    ErrorReport {
        total: inputs.len(),
        incorrect,
        collapses,
        sensitivity,
    }
}

impl ErrorReport {
    pub fn is_empty(&self) -> bool {
        self.collapses.is_empty() && self.sensitivity.is_empty()
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{} of {} predictions incorrect", self.incorrect, self.total);
        let _ = writeln!(out, "\ncollapsed predictions ({}):", self.collapses.len());
        for c in &self.collapses {
            let _ = writeln!(out, "  {} <- {} inputs", c.prediction, c.inputs.len());
            for (x, g) in c.inputs.iter().zip(&c.golds) {
                let _ = writeln!(out, "    {x}\n      gold {g}");
            }
        }
        let _ = writeln!(out, "\none-word sensitivity ({}):", self.sensitivity.len());
        for s in &self.sensitivity {
            let _ = writeln!(out, "  {}\n    -> {}", s.first, s.first_prediction);
            let _ = writeln!(out, "  {}\n    -> {}", s.second, s.second_prediction);
        }
        out
    }
}
