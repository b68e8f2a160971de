//! Binary classification metrics with UAV as the positive class.

use alloc::format;
use alloc::vec::Vec;
use core::fmt;

use crate::data::Label;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn record(&mut self, truth: Label, predicted: Label) {
        match (truth, predicted) {
            (Label::Uav, Label::Uav) => self.tp += 1,
            (Label::FalseAlarm, Label::Uav) => self.fp += 1,
            (Label::Uav, Label::FalseAlarm) => self.fn_ += 1,
            (Label::FalseAlarm, Label::FalseAlarm) => self.tn += 1,
        }
    }
}

/// Rows are ground truth, columns predictions, false alarms first.
impl fmt::Display for ConfusionMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>10}{:>10}{:>10}", "", "FA(0)", "UAV(1)")?;
        writeln!(f, "{:>10}{:>10}{:>10}", "FA (0)", self.tn, self.fp)?;
        write!(f, "{:>10}{:>10}{:>10}", "UAV (1)", self.fn_, self.tp)
    }
}

/// Confusion counts where a sample is predicted UAV iff `p > threshold`.
pub fn confusion_at_threshold(
    labels: &[Label],
    probabilities: &[f64],
    threshold: f64,
) -> Result<ConfusionMatrix> {
    if labels.len() != probabilities.len() {
        return Err(Error::Shape {
            context: "confusion matrix",
            detail: format!(
                "{} labels but {} probabilities",
                labels.len(),
                probabilities.len()
            ),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&truth, &p) in labels.iter().zip(probabilities) {
        cm.record(
            truth,
            if p > threshold {
                Label::Uav
            } else {
                Label::FalseAlarm
            },
        );
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Harmonic mean, zero when both inputs are zero.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

impl ClassMetrics {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
            support: tp + fn_,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassificationReport {
    pub uav: ClassMetrics,
    pub false_alarm: ClassMetrics,
    /// Support-weighted averages; `support` is the total.
    pub weighted: ClassMetrics,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
}

/// Per-class and support-weighted precision, recall and F1. Metrics with a
/// zero denominator are 0.
pub fn classification_report(cm: &ConfusionMatrix) -> Result<ClassificationReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::UndefinedMetric("confusion matrix is empty".into()));
    }
    let uav = ClassMetrics::from_counts(cm.tp, cm.fp, cm.fn_);
    let false_alarm = ClassMetrics::from_counts(cm.tn, cm.fn_, cm.fp);
    let n = total as f64;
    let w = |pick: fn(&ClassMetrics) -> f64| {
        (uav.support as f64 * pick(&uav) + false_alarm.support as f64 * pick(&false_alarm)) / n
    };
    let weighted = ClassMetrics {
        precision: w(|m| m.precision),
        recall: w(|m| m.recall),
        f1: w(|m| m.f1),
        support: total,
    };
    Ok(ClassificationReport {
        uav,
        false_alarm,
        weighted,
        accuracy: (cm.tp + cm.tn) as f64 / n,
        confusion: *cm,
    })
}

impl fmt::Display for ClassificationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let row = |f: &mut fmt::Formatter<'_>, name: &str, m: &ClassMetrics| {
            writeln!(
                f,
                "{:>12}{:>11.2}{:>10.2}{:>10.2}{:>10}",
                name, m.precision, m.recall, m.f1, m.support
            )
        };
        writeln!(
            f,
            "{:>12}{:>11}{:>10}{:>10}{:>10}",
            "", "precision", "recall", "f1-score", "support"
        )?;
        row(f, "FA (0)", &self.false_alarm)?;
        row(f, "UAV (1)", &self.uav)?;
        writeln!(
            f,
            "{:>12}{:>11}{:>10}{:>10.2}{:>10}",
            "accuracy", "", "", self.accuracy, self.weighted.support
        )?;
        write!(
            f,
            "{:>12}{:>11.2}{:>10.2}{:>10.2}{:>10}",
            "weighted avg",
            self.weighted.precision,
            self.weighted.recall,
            self.weighted.f1,
            self.weighted.support
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RocCurve {
    /// `(false positive rate, true positive rate)` from `(0, 0)` to `(1, 1)`.
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// ROC curve by sweeping the threshold over every distinct score, highest
/// first; samples with equal scores switch together. AUC by the trapezoidal
/// rule.
pub fn roc_curve(labels: &[Label], scores: &[f64]) -> Result<RocCurve> {
    if labels.len() != scores.len() {
        return Err(Error::Shape {
            context: "roc curve",
            detail: format!("{} labels but {} scores", labels.len(), scores.len()),
        });
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::UndefinedMetric("scores contain NaN".into()));
    }
    let positives = labels.iter().filter(|&&l| l == Label::Uav).count() as f64;
    let negatives = labels.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(Error::UndefinedMetric(
            "ROC needs both classes present".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));

    let mut points = alloc::vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut k = 0;
    while k < order.len() {
        let s = scores[order[k]];
        while k < order.len() && scores[order[k]] == s {
            match labels[order[k]] {
                Label::Uav => tp += 1,
                Label::FalseAlarm => fp += 1,
            }
            k += 1;
        }
        points.push((fp as f64 / negatives, tp as f64 / positives));
    }
    if points.last() != Some(&(1.0, 1.0)) {
        points.push((1.0, 1.0));
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    Ok(RocCurve { points, auc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use alloc::vec;
    use proptest::prelude::*;

    const U: Label = Label::Uav;
    const F: Label = Label::FalseAlarm;

    fn round2(x: f64) -> f64 {
        libm::round(x * 100.0) / 100.0
    }

    #[test]
    fn threshold_cases() {
        let cm = confusion_at_threshold(&[U, F, U], &[0.9, 0.1, 0.7], 0.5).unwrap();
        assert_eq!((cm.fp, cm.fn_), (0, 0));
        let cm = confusion_at_threshold(&[U], &[0.5], 0.5).unwrap();
        assert_eq!(cm.fn_, 1);
        let cm = confusion_at_threshold(&[U, U, F, F], &[0.9, 0.3, 0.6, 0.1], 0.5).unwrap();
        assert_eq!(
            cm,
            ConfusionMatrix {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        assert!(confusion_at_threshold(&[U], &[0.1, 0.2], 0.5).is_err());
    }

    #[test]
    fn published_confusion_matrix() {
        let cm = ConfusionMatrix {
            tn: 1429,
            fp: 92,
            fn_: 13,
            tp: 422,
        };
        let r = classification_report(&cm).unwrap();
        assert_eq!(
            [
                round2(r.uav.precision),
                round2(r.uav.recall),
                round2(r.uav.f1)
            ],
            [0.82, 0.97, 0.89]
        );
        assert_eq!(
            [
                round2(r.false_alarm.precision),
                round2(r.false_alarm.recall),
                round2(r.false_alarm.f1)
            ],
            [0.99, 0.94, 0.96]
        );
        assert!((r.weighted.f1 - 0.9478).abs() < 5e-5);
        assert!((r.weighted.precision - 0.9532).abs() < 5e-5);
        assert_eq!((r.uav.support, r.false_alarm.support), (435, 1521));
    }

    #[test]
    fn degenerate_one_class() {
        let r = classification_report(&ConfusionMatrix {
            tn: 7,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(r.uav, ClassMetrics::default());
        assert_eq!(r.accuracy, 1.0);
        assert!(classification_report(&ConfusionMatrix::default()).is_err());
    }

    #[test]
    fn roc_hand_sweep() {
        let roc = roc_curve(&[U, F, U, F], &[0.8, 0.7, 0.6, 0.1]).unwrap();
        assert_eq!(
            roc.points,
            vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
        assert_eq!(roc.auc, 0.75);
    }

    #[test]
    fn roc_extremes_and_ties() {
        assert_eq!(
            roc_curve(&[U, U, F, F], &[0.9, 0.8, 0.2, 0.1]).unwrap().auc,
            1.0
        );
        assert_eq!(
            roc_curve(&[F, F, U, U], &[0.9, 0.8, 0.2, 0.1]).unwrap().auc,
            0.0
        );
        // all scores tied: a single diagonal step
        let roc = roc_curve(&[U, F, U, F], &[0.5; 4]).unwrap();
        assert_eq!(roc.points, vec![(0.0, 0.0), (1.0, 1.0)]);
        assert_eq!(roc.auc, 0.5);
        assert!(roc_curve(&[U, U], &[0.1, 0.2]).is_err());
    }

    #[test]
    fn roc_null_scores() {
        let mut rng = Rng::seed_from(12);
        let labels: Vec<Label> = (0..10_000)
            .map(|_| if rng.bernoulli(0.4) { U } else { F })
            .collect();
        let scores: Vec<f64> = (0..10_000).map(|_| rng.uniform()).collect();
        let auc = roc_curve(&labels, &scores).unwrap().auc;
        assert!((0.45..=0.55).contains(&auc), "{auc}");
    }

    fn arb_labels_scores() -> impl Strategy<Value = (Vec<Label>, Vec<f64>)> {
        prop::collection::vec((any::<bool>(), 0u8..20), 2..60).prop_map(|v| {
            let mut labels: Vec<Label> = v.iter().map(|(b, _)| if *b { U } else { F }).collect();
            labels[0] = U;
            labels[1] = F;
            (labels, v.iter().map(|(_, s)| *s as f64 / 20.0).collect())
        })
    }

    proptest! {
        #[test]
        fn report_invariants(tp in 0u64..500, fp in 0u64..500, fn_ in 0u64..500, tn in 0u64..500) {
            let cm = ConfusionMatrix { tp, fp, fn_, tn };
            prop_assume!(cm.total() > 0);
            let r = classification_report(&cm).unwrap();
            for m in [r.uav, r.false_alarm, r.weighted] {
                for v in [m.precision, m.recall, m.f1] {
                    prop_assert!((0.0..=1.0).contains(&v));
                }
            }
            for m in [r.uav, r.false_alarm] {
                if m.precision + m.recall > 0.0 {
                    let h = 2.0 * m.precision * m.recall / (m.precision + m.recall);
                    prop_assert!((m.f1 - h).abs() < 1e-12);
                }
            }
            prop_assert!((r.weighted.recall - r.accuracy).abs() < 1e-12);
            prop_assert_eq!(r.uav.support + r.false_alarm.support, cm.total());
        }

        #[test]
        fn auc_invariant_under_monotone_maps((labels, scores) in arb_labels_scores()) {
            let base = roc_curve(&labels, &scores).unwrap();
            let mapped: Vec<f64> = scores.iter().map(|s| libm::exp(3.0 * s) - 7.0).collect();
            let other = roc_curve(&labels, &mapped).unwrap();
            prop_assert!((base.auc - other.auc).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&base.auc));
            for w in base.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
            }
            prop_assert_eq!(base.points.first(), Some(&(0.0, 0.0)));
            prop_assert_eq!(base.points.last(), Some(&(1.0, 1.0)));
        }
    }
}
