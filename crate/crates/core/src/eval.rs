//! Evaluation: per-class precision/recall/F1, micro and macro averages over
//! the punctuation classes, accuracy, and row-normalized confusion matrices.

use std::fmt::Write as _;

use crate::corpus::{PunctClass, NUM_CLASSES};
use crate::{Error, Result};

/// 5x5 count grid, rows = gold class, columns = predicted class, both in
/// [`PunctClass::index`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

/// Scores for one class.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

/// Aggregate precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct OverallScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// The full evaluation of one (gold, predicted) labeling.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: [ClassScores; NUM_CLASSES],
    /// Micro average over the four punctuation classes, O excluded.
    pub overall_micro: OverallScores,
    /// Macro average over the four punctuation classes, O excluded.
    pub overall_macro: OverallScores,
    /// Trace over total, all five classes counted.
    pub accuracy: f64,
    /// True when the matrix was empty and accuracy is reported as 0.
    pub empty: bool,
}

/// Tallies gold/predicted label pairs into a confusion matrix.
pub fn confusion(gold: &[PunctClass], pred: &[PunctClass]) -> Result<ConfusionMatrix> {
    if gold.len() != pred.len() {
        return Err(Error::Data(format!(
            "gold and predicted label sequences differ in length: {} vs {}",
            gold.len(),
            pred.len()
        )));
    }
    let mut cm = ConfusionMatrix::default();
    for (&g, &p) in gold.iter().zip(pred) {
        cm.counts[g.index()][p.index()] += 1;
    }
    Ok(cm)
}

impl ConfusionMatrix {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    /// Gold support of a class (row sum).
    pub fn support(&self, class: PunctClass) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    /// Times a class was predicted (column sum).
    pub fn predicted(&self, class: PunctClass) -> u64 {
        self.counts.iter().map(|row| row[class.index()]).sum()
    }

    /// Row-normalized percentages; rows with zero support stay all-zero.
    pub fn row_percentages(&self) -> [[f64; NUM_CLASSES]; NUM_CLASSES] {
        let mut out = [[0.0; NUM_CLASSES]; NUM_CLASSES];
        for (i, row) in self.counts.iter().enumerate() {
            let sum: u64 = row.iter().sum();
            if sum == 0 {
                continue;
            }
            for (o, &c) in out[i].iter_mut().zip(row) {
                *o = 100.0 * c as f64 / sum as f64;
            }
        }
        out
    }

    /// Plain-text rendering: raw counts and row-normalized percentages.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "confusion matrix (rows = gold, columns = predicted)");
        let _ = write!(out, "{:>12}", "");
        for class in PunctClass::ALL {
            let _ = write!(out, "{:>12}", class.name());
        }
        out.push('\n');
        for (i, class) in PunctClass::ALL.iter().enumerate() {
            let _ = write!(out, "{:>12}", class.name());
            for j in 0..NUM_CLASSES {
                let _ = write!(out, "{:>12}", self.counts[i][j]);
            }
            out.push('\n');
        }
        let _ = writeln!(out, "row-normalized (%)");
        let pct = self.row_percentages();
        for (i, class) in PunctClass::ALL.iter().enumerate() {
            let _ = write!(out, "{:>12}", class.name());
            for cell in &pct[i] {
                let _ = write!(out, "{:>12.2}", cell);
            }
            out.push('\n');
        }
        out
    }
}

/// Precision, recall, and F1 for one class; zero denominators score 0.
pub fn prf(cm: &ConfusionMatrix, class: PunctClass) -> (f64, f64, f64) {
    let i = class.index();
    let tp = cm.counts[i][i];
    let fp = cm.predicted(class) - tp;
    let fal_neg = cm.support(class) - tp;
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fal_neg);
    let f1 = harmonic(precision, recall);
    (precision, recall, f1)
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

/// The four punctuation classes, O excluded.
pub const PUNCT_CLASSES: [PunctClass; 4] = [
    PunctClass::Period,
    PunctClass::Comma,
    PunctClass::Question,
    PunctClass::Exclamation,
];

/// Assembles the full report from a confusion matrix.
pub fn report(cm: &ConfusionMatrix) -> EvalReport {
    let mut per_class = [ClassScores::default(); NUM_CLASSES];
    for class in PunctClass::ALL {
        let (precision, recall, f1) = prf(cm, class);
        per_class[class.index()] = ClassScores {
            precision,
            recall,
            f1,
            support: cm.support(class),
        };
    }

    let (mut tp, mut fp, mut fal_neg) = (0u64, 0u64, 0u64);
    for class in PUNCT_CLASSES {
        let i = class.index();
        tp += cm.counts[i][i];
        fp += cm.predicted(class) - cm.counts[i][i];
        fal_neg += cm.support(class) - cm.counts[i][i];
    }
    let micro_p = ratio(tp, tp + fp);
    let micro_r = ratio(tp, tp + fal_neg);
    let overall_micro = OverallScores {
        precision: micro_p,
        recall: micro_r,
        f1: harmonic(micro_p, micro_r),
    };

    let k = PUNCT_CLASSES.len() as f64;
    let overall_macro = OverallScores {
        precision: PUNCT_CLASSES
            .iter()
            .map(|c| per_class[c.index()].precision)
            .sum::<f64>()
            / k,
        recall: PUNCT_CLASSES
            .iter()
            .map(|c| per_class[c.index()].recall)
            .sum::<f64>()
            / k,
        f1: PUNCT_CLASSES
            .iter()
            .map(|c| per_class[c.index()].f1)
            .sum::<f64>()
            / k,
    };

    let total = cm.total();
    EvalReport {
        confusion: *cm,
        per_class,
        overall_micro,
        overall_macro,
        accuracy: ratio(cm.trace(), total),
        empty: total == 0,
    }
}

impl EvalReport {
    /// Builds the report straight from label sequences.
    pub fn from_labels(gold: &[PunctClass], pred: &[PunctClass]) -> Result<EvalReport> {
        Ok(report(&confusion(gold, pred)?))
    }

    /// Aligned plain-text rendering.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{:>12} {:>9} {:>9} {:>9} {:>9}",
            "class", "P", "R", "F1", "support"
        );
        for class in PunctClass::ALL {
            let s = &self.per_class[class.index()];
            let _ = writeln!(
                out,
                "{:>12} {:>9.4} {:>9.4} {:>9.4} {:>9}",
                class.name(),
                s.precision,
                s.recall,
                s.f1,
                s.support
            );
        }
        let _ = writeln!(
            out,
            "{:>12} {:>9.4} {:>9.4} {:>9.4}",
            "overall",
            self.overall_micro.precision,
            self.overall_micro.recall,
            self.overall_micro.f1
        );
        let _ = writeln!(out, "{:>12} {:>9.4}", "accuracy", self.accuracy);
        if self.empty {
            let _ = writeln!(out, "warning: empty evaluation, accuracy reported as 0");
        }
        out.push('\n');
        out.push_str(&self.confusion.render());
        out
    }

    /// Machine-readable rendering: tab-separated `field value` lines with
    /// exact round-trip float formatting.
    pub fn render_tsv(&self) -> String {
        let mut out = String::new();
        for class in PunctClass::ALL {
            let s = &self.per_class[class.index()];
            let n = class.name();
            let _ = writeln!(out, "{n}_precision\t{}", s.precision);
            let _ = writeln!(out, "{n}_recall\t{}", s.recall);
            let _ = writeln!(out, "{n}_f1\t{}", s.f1);
            let _ = writeln!(out, "{n}_support\t{}", s.support);
        }
        for (name, s) in [("micro", self.overall_micro), ("macro", self.overall_macro)] {
            let _ = writeln!(out, "overall_{name}_precision\t{}", s.precision);
            let _ = writeln!(out, "overall_{name}_recall\t{}", s.recall);
            let _ = writeln!(out, "overall_{name}_f1\t{}", s.f1);
        }
        let _ = writeln!(out, "accuracy\t{}", self.accuracy);
        for (i, gold) in PunctClass::ALL.iter().enumerate() {
            for (j, pred) in PunctClass::ALL.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "confusion_{}_{}\t{}",
                    gold.name(),
                    pred.name(),
                    self.confusion.counts[i][j]
                );
            }
        }
        out
    }
}

/// One row of the ablation grid: an augmentation strength (`None` = no
/// augmentation) and a test-set name.
#[derive(Debug, Clone, PartialEq)]
pub struct AblationCell {
    pub alpha: Option<f64>,
    pub test_set: String,
    pub report: EvalReport,
}

fn variant_label(alpha: Option<f64>) -> String {
    match alpha {
        None => "base".to_string(),
        Some(a) => format!("aug-{a:.2}"),
    }
}

// Comparison-report column order: comma, period, question, exclamation,
// then the overall micro scores.
const TABLE_CLASSES: [PunctClass; 4] = [
    PunctClass::Comma,
    PunctClass::Period,
    PunctClass::Question,
    PunctClass::Exclamation,
];

/// Renders the ablation comparison as aligned plain text. One row per
/// (variant, test set), sorted with the unaugmented baseline first.
pub fn ablation_table(cells: &[AblationCell]) -> String {
    let cells = sorted(cells);
    let mut out = String::new();
    let _ = write!(out, "{:<10} {:<10}", "model", "test");
    for class in TABLE_CLASSES {
        for metric in ["P", "R", "F1"] {
            let _ = write!(out, " {:>8}", format!("{}-{}", short(class), metric));
        }
    }
    for metric in ["P", "R", "F1"] {
        let _ = write!(out, " {:>8}", format!("all-{metric}"));
    }
    out.push('\n');
    for cell in &cells {
        let _ = write!(
            out,
            "{:<10} {:<10}",
            variant_label(cell.alpha),
            cell.test_set
        );
        for class in TABLE_CLASSES {
            let s = &cell.report.per_class[class.index()];
            let _ = write!(out, " {:>8.4} {:>8.4} {:>8.4}", s.precision, s.recall, s.f1);
        }
        let o = &cell.report.overall_micro;
        let _ = write!(out, " {:>8.4} {:>8.4} {:>8.4}", o.precision, o.recall, o.f1);
        out.push('\n');
    }
    out
}

/// Machine-readable ablation grid with a header row; floats are formatted
/// so they parse back exactly.
pub fn ablation_table_tsv(cells: &[AblationCell]) -> String {
    let cells = sorted(cells);
    let mut out = String::from("model\ttest");
    for class in TABLE_CLASSES {
        for metric in ["precision", "recall", "f1"] {
            let _ = write!(out, "\t{}_{metric}", class.name());
        }
    }
    for metric in ["precision", "recall", "f1"] {
        let _ = write!(out, "\toverall_{metric}");
    }
    out.push_str("\taccuracy\n");
    for cell in &cells {
        let _ = write!(out, "{}\t{}", variant_label(cell.alpha), cell.test_set);
        for class in TABLE_CLASSES {
            let s = &cell.report.per_class[class.index()];
            let _ = write!(out, "\t{}\t{}\t{}", s.precision, s.recall, s.f1);
        }
        let o = &cell.report.overall_micro;
        let _ = write!(out, "\t{}\t{}\t{}", o.precision, o.recall, o.f1);
        let _ = writeln!(out, "\t{}", cell.report.accuracy);
    }
    out
}

fn sorted(cells: &[AblationCell]) -> Vec<AblationCell> {
    let mut cells = cells.to_vec();
    cells.sort_by(|a, b| {
        let ka = (a.alpha.is_some(), a.alpha.unwrap_or(0.0));
        let kb = (b.alpha.is_some(), b.alpha.unwrap_or(0.0));
        ka.partial_cmp(&kb)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.test_set.cmp(&b.test_set))
    });
    cells
}

fn short(class: PunctClass) -> &'static str {
    match class {
        PunctClass::Period => "per",
        PunctClass::Comma => "com",
        PunctClass::Question => "que",
        PunctClass::Exclamation => "exc",
        PunctClass::O => "o",
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    use PunctClass::*;

    #[test]
    fn diagonal_matrix_for_perfect_predictions() {
        let gold = vec![Period, Comma, O, O, Question];
        let cm = confusion(&gold, &gold).unwrap();
        assert_eq!(cm.trace(), 5);
        assert_eq!(cm.total(), 5);
        let r = report(&cm);
        assert_eq!(r.accuracy, 1.0);
        for class in [Period, Comma, Question] {
            let s = r.per_class[class.index()];
            assert_eq!((s.precision, s.recall, s.f1), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn empty_inputs_give_zero_matrix() {
        let cm = confusion(&[], &[]).unwrap();
        assert_eq!(cm.total(), 0);
        let r = report(&cm);
        assert!(r.empty);
        assert_eq!(r.accuracy, 0.0);
    }

    #[test]
    fn length_mismatch_is_an_error() {
        assert!(confusion(&[O], &[]).is_err());
    }

    #[test]
    fn prf_formula_example() {
        // TP = 3, FP = 1, FN = 2 built directly into the count grid
        let mut cm = ConfusionMatrix::default();
        cm.counts[Period.index()][Period.index()] = 3;
        cm.counts[O.index()][Period.index()] = 1;
        cm.counts[Period.index()][O.index()] = 2;
        let (p, r, f1) = prf(&cm, Period);
        assert!((p - 0.75).abs() < 1e-12);
        assert!((r - 0.6).abs() < 1e-12);
        assert!((f1 - 2.0 * 0.75 * 0.6 / 1.35).abs() < 1e-12);
    }

    #[test]
    fn absent_class_scores_zero() {
        let gold = vec![O, O, Period];
        let pred = vec![O, O, Period];
        let cm = confusion(&gold, &pred).unwrap();
        let (p, r, f1) = prf(&cm, Exclamation);
        assert_eq!((p, r, f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn all_o_gold_and_pred() {
        let gold = vec![O; 10];
        let cm = confusion(&gold, &gold).unwrap();
        let r = report(&cm);
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.overall_micro.f1, 0.0);
    }

    #[test]
    fn micro_over_single_class_equals_class_f1() {
        // only Period appears among the punctuation classes
        let gold = vec![Period, Period, O, O, Period, O];
        let pred = vec![Period, O, Period, O, Period, O];
        let r = EvalReport::from_labels(&gold, &pred).unwrap();
        let period = r.per_class[Period.index()];
        assert!((r.overall_micro.f1 - period.f1).abs() < 1e-12);
        assert!((r.overall_micro.precision - period.precision).abs() < 1e-12);
    }

    #[test]
    fn accuracy_is_trace_over_total() {
        let gold = vec![Period, Comma, O, O];
        let pred = vec![Period, O, O, Comma];
        let r = EvalReport::from_labels(&gold, &pred).unwrap();
        assert!((r.accuracy - 0.5).abs() < 1e-12);
    }

    #[test]
    fn row_percentages_sum_to_100() {
        let gold = vec![Period, Period, Period, Comma, O, O, Question];
        let pred = vec![Period, Comma, O, Comma, O, Period, O];
        let cm = confusion(&gold, &pred).unwrap();
        for (i, row) in cm.row_percentages().iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if cm.counts[i].iter().sum::<u64>() > 0 {
                assert!((sum - 100.0).abs() < 0.05, "row {i} sums to {sum}");
            } else {
                assert_eq!(sum, 0.0);
            }
        }
    }

    #[test]
    fn row_percentages_render_comma_confusion_profile() {
        // a comma row shaped like a heavily confused reference set:
        // 47.60% correct, 26.73% read as period, 21.47% as O
        let mut cm = ConfusionMatrix::default();
        let comma = Comma.index();
        cm.counts[comma][Comma.index()] = 4760;
        cm.counts[comma][Period.index()] = 2673;
        cm.counts[comma][O.index()] = 2147;
        cm.counts[comma][Question.index()] = 280;
        cm.counts[comma][Exclamation.index()] = 140;
        let pct = cm.row_percentages();
        assert!((pct[comma][Comma.index()] - 47.60).abs() < 1e-9);
        assert!((pct[comma][Period.index()] - 26.73).abs() < 1e-9);
        assert!((pct[comma][O.index()] - 21.47).abs() < 1e-9);
        let rendered = cm.render();
        assert!(rendered.contains("47.60"), "{rendered}");
        assert!(rendered.contains("26.73"), "{rendered}");
        assert!(rendered.contains("21.47"), "{rendered}");
    }

    #[test]
    fn report_tsv_values_round_trip() {
        let gold = vec![Period, Comma, O, Question, O, O, Exclamation];
        let pred = vec![Comma, Comma, O, Question, Period, O, O];
        let r = EvalReport::from_labels(&gold, &pred).unwrap();
        let tsv = r.render_tsv();
        for line in tsv.lines() {
            let (key, value) = line.split_once('\t').unwrap();
            let parsed: f64 = value.parse().unwrap();
            if key == "accuracy" {
                assert_eq!(parsed, r.accuracy);
            }
        }
    }

    #[test]
    fn ablation_grid_has_one_row_per_cell() {
        let gold = vec![Period, O, O];
        let r = EvalReport::from_labels(&gold, &gold).unwrap();
        let mut cells = Vec::new();
        for alpha in [None, Some(0.10), Some(0.15), Some(0.20)] {
            for set in ["news", "ref", "asr"] {
                cells.push(AblationCell {
                    alpha,
                    test_set: set.to_string(),
                    report: r.clone(),
                });
            }
        }
        let text = ablation_table(&cells);
        // header + 12 rows
        assert_eq!(text.lines().count(), 13);
        let tsv = ablation_table_tsv(&cells);
        assert_eq!(tsv.lines().count(), 13);
    }

    #[test]
    fn single_cell_table() {
        let gold = vec![Period, O];
        let r = EvalReport::from_labels(&gold, &gold).unwrap();
        let cells = vec![AblationCell {
            alpha: None,
            test_set: "test".to_string(),
            report: r,
        }];
        assert_eq!(ablation_table(&cells).lines().count(), 2);
    }

    #[test]
    fn ablation_tsv_round_trips() {
        let gold = vec![Period, Comma, O, O, Question, Exclamation, O];
        let pred = vec![Period, O, Comma, O, Question, Period, O];
        let report = EvalReport::from_labels(&gold, &pred).unwrap();
        let cells = vec![AblationCell {
            alpha: Some(0.2),
            test_set: "asr".to_string(),
            report: report.clone(),
        }];
        let tsv = ablation_table_tsv(&cells);
        let mut lines = tsv.lines();
        let header: Vec<&str> = lines.next().unwrap().split('\t').collect();
        let row: Vec<&str> = lines.next().unwrap().split('\t').collect();
        assert_eq!(header.len(), row.len());
        let get = |name: &str| -> f64 {
            let idx = header.iter().position(|h| *h == name).unwrap();
            row[idx].parse().unwrap()
        };
        assert_eq!(get("COMMA_f1"), report.per_class[Comma.index()].f1);
        assert_eq!(get("overall_f1"), report.overall_micro.f1);
        assert_eq!(get("accuracy"), report.accuracy);
    }
}
