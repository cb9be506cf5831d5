//! Metric verification against a naive independent recomputation: every
//! report field must match exactly on 1,000 random label pairings.

#![allow(clippy::needless_range_loop)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use dari_core::corpus::{PunctClass, NUM_CLASSES};
use dari_core::eval::{confusion, prf, report, PUNCT_CLASSES};

struct NaiveScores {
    confusion: [[u64; NUM_CLASSES]; NUM_CLASSES],
    per_class: [(f64, f64, f64, u64); NUM_CLASSES],
    micro: (f64, f64, f64),
    macro_avg: (f64, f64, f64),
    accuracy: f64,
}

/// Straight-line recomputation with per-pair scans, no shared code with the
/// library implementation.
fn naive(gold: &[PunctClass], pred: &[PunctClass]) -> NaiveScores {
    let mut matrix = [[0u64; NUM_CLASSES]; NUM_CLASSES];
    for g_class in 0..NUM_CLASSES {
        for p_class in 0..NUM_CLASSES {
            let mut count = 0;
            for (g, p) in gold.iter().zip(pred) {
                if g.index() == g_class && p.index() == p_class {
                    count += 1;
                }
            }
            matrix[g_class][p_class] = count;
        }
    }

    let div = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let mut per_class = [(0.0, 0.0, 0.0, 0u64); NUM_CLASSES];
    for c in 0..NUM_CLASSES {
        let tp = gold
            .iter()
            .zip(pred)
            .filter(|(g, p)| g.index() == c && p.index() == c)
            .count() as u64;
        let pred_c = pred.iter().filter(|p| p.index() == c).count() as u64;
        let gold_c = gold.iter().filter(|g| g.index() == c).count() as u64;
        let p = div(tp, pred_c);
        let r = div(tp, gold_c);
        let f1 = if p + r > 0.0 {
            2.0 * p * r / (p + r)
        } else {
            0.0
        };
        per_class[c] = (p, r, f1, gold_c);
    }

    let (mut tp, mut predicted, mut gold_count) = (0u64, 0u64, 0u64);
    for class in PUNCT_CLASSES {
        let c = class.index();
        tp += matrix[c][c];
        predicted += pred.iter().filter(|p| p.index() == c).count() as u64;
        gold_count += gold.iter().filter(|g| g.index() == c).count() as u64;
    }
    let micro_p = div(tp, predicted);
    let micro_r = div(tp, gold_count);
    let micro_f1 = if micro_p + micro_r > 0.0 {
        2.0 * micro_p * micro_r / (micro_p + micro_r)
    } else {
        0.0
    };

    let mut macro_avg = (0.0, 0.0, 0.0);
    for class in PUNCT_CLASSES {
        let (p, r, f1, _) = per_class[class.index()];
        macro_avg.0 += p;
        macro_avg.1 += r;
        macro_avg.2 += f1;
    }
    let k = PUNCT_CLASSES.len() as f64;
    macro_avg = (macro_avg.0 / k, macro_avg.1 / k, macro_avg.2 / k);

    let correct = gold.iter().zip(pred).filter(|(g, p)| g == p).count() as u64;
    NaiveScores {
        confusion: matrix,
        per_class,
        micro: (micro_p, micro_r, micro_f1),
        macro_avg,
        accuracy: div(correct, gold.len() as u64),
    }
}

fn random_labels(rng: &mut ChaCha12Rng, len: usize, skew: bool) -> Vec<PunctClass> {
    (0..len)
        .map(|_| {
            if skew && rng.random::<f64>() < 0.7 {
                PunctClass::O
            } else {
                PunctClass::from_index(rng.random_range(0..NUM_CLASSES)).unwrap()
            }
        })
        .collect()
}

#[test]
fn report_matches_naive_recount_on_1000_random_instances() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xe7a1);
    for case in 0..1000 {
        let len = rng.random_range(0..=300);
        let skew = rng.random::<bool>();
        let gold = random_labels(&mut rng, len, skew);
        let pred = random_labels(&mut rng, len, skew);

        let cm = confusion(&gold, &pred).unwrap();
        let rep = report(&cm);
        let want = naive(&gold, &pred);

        assert_eq!(cm.counts, want.confusion, "case {case}");
        for class in PunctClass::ALL {
            let got = rep.per_class[class.index()];
            let (p, r, f1, support) = want.per_class[class.index()];
            assert_eq!(got.precision, p, "case {case} {class} precision");
            assert_eq!(got.recall, r, "case {case} {class} recall");
            assert_eq!(got.f1, f1, "case {case} {class} f1");
            assert_eq!(got.support, support, "case {case} {class} support");
            let (p2, r2, f2) = prf(&cm, class);
            assert_eq!((p2, r2, f2), (p, r, f1), "case {case} {class} prf");
        }
        assert_eq!(rep.overall_micro.precision, want.micro.0, "case {case}");
        assert_eq!(rep.overall_micro.recall, want.micro.1, "case {case}");
        assert_eq!(rep.overall_micro.f1, want.micro.2, "case {case}");
        assert_eq!(rep.overall_macro.precision, want.macro_avg.0, "case {case}");
        assert_eq!(rep.overall_macro.recall, want.macro_avg.1, "case {case}");
        assert_eq!(rep.overall_macro.f1, want.macro_avg.2, "case {case}");
        assert_eq!(rep.accuracy, want.accuracy, "case {case}");
    }
}

#[test]
fn confusion_matches_naive_recount_on_dense_case() {
    // a fixed 200-position case exercising every cell
    let mut rng = ChaCha12Rng::seed_from_u64(200);
    let gold = random_labels(&mut rng, 200, false);
    let pred = random_labels(&mut rng, 200, false);
    let cm = confusion(&gold, &pred).unwrap();
    assert_eq!(cm.counts, naive(&gold, &pred).confusion);
    assert_eq!(cm.total(), 200);
}
