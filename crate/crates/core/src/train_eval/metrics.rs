use serde::{Deserialize, Serialize};

use super::{checkpoint::TrainedModel, TrainError};
use crate::corpus::{Label, LabeledStatement};
use crate::exec::{map_ordered, ExecMode};
use crate::models::{classify, predict, ModelError, DEFAULT_THRESHOLD};
use crate::text_repr::EncodedStatement;

/// Confusion counts with Biased as the positive class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fneg: u64,
}

impl Confusion {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fneg
    }

    pub fn record(&mut self, predicted: Label, gold: Label) {
        match (predicted, gold) {
            (Label::Biased, Label::Biased) => self.tp += 1,
            (Label::Biased, Label::Neutral) => self.fp += 1,
            (Label::Neutral, Label::Neutral) => self.tn += 1,
            (Label::Neutral, Label::Biased) => self.fneg += 1,
        }
    }
}

/// Metrics for the biased class. Undefined ratios (empty denominators) are
/// reported as `None`, not silently coerced to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub f1: Option<f64>,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_confusion(confusion: Confusion) -> Metrics {
        let ratio = |num: u64, den: u64| {
            if den == 0 {
                None
            } else {
                Some(num as f64 / den as f64)
            }
        };
        let precision = ratio(confusion.tp, confusion.tp + confusion.fp);
        let recall = ratio(confusion.tp, confusion.tp + confusion.fneg);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        Metrics {
            accuracy: (confusion.tp + confusion.tn) as f64 / confusion.total() as f64,
            precision,
            recall,
            f1,
            confusion,
        }
    }
}

/// Evaluate already-encoded statements against gold labels at the default
/// threshold.
pub fn evaluate_encoded(
    params: &crate::models::ModelParams,
    data: &[(EncodedStatement, Label)],
    mode: ExecMode,
) -> Result<Metrics, TrainError> {
    if data.is_empty() {
        return Err(TrainError::Degenerate {
            what: "evaluate on an empty statement list".into(),
        });
    }
    let outcomes = map_ordered(mode, data, |(enc, gold)| {
        predict(params, enc).map(|pred| (classify(pred.probability, DEFAULT_THRESHOLD), *gold))
    });
    let mut confusion = Confusion::default();
    for outcome in outcomes {
        let (predicted, gold) = outcome.map_err(ModelError::from)?;
        confusion.record(predicted, gold);
    }
    Ok(Metrics::from_confusion(confusion))
}

/// Encode and evaluate labeled statements with the model's own pipeline.
pub fn evaluate(
    model: &TrainedModel,
    statements: &[LabeledStatement],
    mode: ExecMode,
) -> Result<Metrics, TrainError> {
    if statements.is_empty() {
        return Err(TrainError::Degenerate {
            what: "evaluate on an empty statement list".into(),
        });
    }
    let mut data = Vec::with_capacity(statements.len());
    for s in statements {
        let enc = model.pipeline.encode(&s.text, s.pos.as_deref())?;
        if enc.length == 0 {
            return Err(TrainError::EmptyStatement { id: s.id.clone() });
        }
        data.push((enc, s.label));
    }
    evaluate_encoded(&model.params, &data, mode)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_tallied_confusion() {
        // tp=3 fp=1 fn=1 tn=5 -> P=R=F1=0.75, Acc=0.8.
        let c = Confusion {
            tp: 3,
            fp: 1,
            tn: 5,
            fneg: 1,
        };
        let m = Metrics::from_confusion(c);
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.recall, Some(0.75));
        assert_eq!(m.f1, Some(0.75));
        assert_eq!(m.accuracy, 0.8);
    }

    #[test]
    fn all_correct_is_all_ones() {
        let c = Confusion {
            tp: 4,
            fp: 0,
            tn: 6,
            fneg: 0,
        };
        let m = Metrics::from_confusion(c);
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.precision, Some(1.0));
        assert_eq!(m.recall, Some(1.0));
        assert_eq!(m.f1, Some(1.0));
    }

    #[test]
    fn no_positive_predictions_leaves_precision_undefined() {
        let c = Confusion {
            tp: 0,
            fp: 0,
            tn: 5,
            fneg: 3,
        };
        let m = Metrics::from_confusion(c);
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, Some(0.0));
        assert_eq!(m.f1, None);
        let json = serde_json::to_string(&m).unwrap();
        assert!(json.contains("\"precision\":null"));
        assert!(json.contains("\"fn\":3"));
    }

    #[test]
    fn confusion_recording_covers_all_four_cells() {
        let mut c = Confusion::default();
        c.record(Label::Biased, Label::Biased);
        c.record(Label::Biased, Label::Neutral);
        c.record(Label::Neutral, Label::Neutral);
        c.record(Label::Neutral, Label::Biased);
        assert_eq!(
            c,
            Confusion {
                tp: 1,
                fp: 1,
                tn: 1,
                fneg: 1
            }
        );
        assert_eq!(c.total(), 4);
    }
}
