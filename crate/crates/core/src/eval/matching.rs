use std::fmt::Write as _;

/// Outcome of matching detections against reference peaks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MatchCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl std::ops::AddAssign for MatchCounts {
    fn add_assign(&mut self, o: Self) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
    }
}

impl MatchCounts {
    pub fn detected(&self) -> usize {
        self.tp + self.fp
    }

    pub fn actual(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn sensitivity(&self) -> Option<f64> {
        sensitivity(self.tp, self.fn_)
    }

    pub fn ppv(&self) -> Option<f64> {
        ppv(self.tp, self.fp)
    }
}

/// One-to-one greedy nearest matching: candidate pairs within the tolerance
/// are taken in order of increasing distance, each peak used at most once.
pub fn match_peaks(detected: &[usize], actual: &[usize], tol_ms: f64, fs: f64) -> MatchCounts {
    let tol = tol_ms * fs / 1000.0;
    let mut det = detected.to_vec();
    let mut act = actual.to_vec();
    det.sort_unstable();
    act.sort_unstable();

    let mut pairs = Vec::new();
    let mut lo = 0;
    for (i, &d) in det.iter().enumerate() {
        while lo < act.len() && (act[lo] as f64) < d as f64 - tol {
            lo += 1;
        }
        for (j, &a) in act.iter().enumerate().skip(lo) {
            let dist = d.abs_diff(a);
            if dist as f64 > tol {
                if a > d {
                    break;
                }
                continue;
            }
            pairs.push((dist, i, j));
        }
    }
    pairs.sort_unstable();
    let mut used_d = vec![false; det.len()];
    let mut used_a = vec![false; act.len()];
    let mut tp = 0;
    for (_, i, j) in pairs {
        if !used_d[i] && !used_a[j] {
            used_d[i] = true;
            used_a[j] = true;
            tp += 1;
        }
    }
    MatchCounts {
        tp,
        fp: det.len() - tp,
        fn_: act.len() - tp,
    }
}

/// `TP / (TP + FN)`; `None` when there are no reference peaks.
pub fn sensitivity(tp: usize, fn_: usize) -> Option<f64> {
    (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64)
}

/// `TP / (TP + FP)`; `None` when nothing was detected.
pub fn ppv(tp: usize, fp: usize) -> Option<f64> {
    (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64)
}

/// Two decimals, or `NA` for an undefined ratio.
pub fn format_metric(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| format!("{v:.2}"))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchRow {
    pub subject: String,
    pub counts: MatchCounts,
}

/// Per-subject detection counts plus a total row.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PeakMatchReport {
    pub rows: Vec<MatchRow>,
}

impl PeakMatchReport {
    pub fn total(&self) -> MatchCounts {
        let mut t = MatchCounts::default();
        for r in &self.rows {
            t += r.counts;
        }
        t
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("subject,detected,actual,tp,fp,fn,se,ppv\n");
        let total = MatchRow {
            subject: "total".into(),
            counts: self.total(),
        };
        for r in self.rows.iter().chain(std::iter::once(&total)) {
            let c = r.counts;
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.subject,
                c.detected(),
                c.actual(),
                c.tp,
                c.fp,
                c.fn_,
                format_metric(c.sensitivity()),
                format_metric(c.ppv())
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn worked_example() {
        let c = match_peaks(&[100, 300], &[105, 600], 90.0, 1000.0);
        assert_eq!(
            c,
            MatchCounts {
                tp: 1,
                fp: 1,
                fn_: 1
            }
        );
    }

    #[test]
    fn identical_sets_match_fully() {
        let p = [10, 200, 450, 700];
        assert_eq!(
            match_peaks(&p, &p, 90.0, 250.0),
            MatchCounts {
                tp: 4,
                fp: 0,
                fn_: 0
            }
        );
    }

    #[test]
    fn nearest_pair_wins() {
        // 100 is closer to 104 than 98 is, so 98 stays unmatched
        let c = match_peaks(&[98, 104], &[100], 90.0, 1000.0);
        assert_eq!(
            c,
            MatchCounts {
                tp: 1,
                fp: 1,
                fn_: 0
            }
        );
    }

    #[test]
    fn undefined_metrics() {
        assert_eq!(sensitivity(0, 0), None);
        assert_eq!(ppv(0, 0), None);
        assert_eq!(format_metric(None), "NA");
        assert_eq!(format_metric(sensitivity(6323, 114)), "0.98");
        assert_eq!(format_metric(ppv(6323, 115)), "0.98");
    }

    #[test]
    fn csv_has_total_row() {
        let r = PeakMatchReport {
            rows: vec![
                MatchRow {
                    subject: "a".into(),
                    counts: MatchCounts {
                        tp: 304,
                        fp: 15,
                        fn_: 19,
                    },
                },
                MatchRow {
                    subject: "b".into(),
                    counts: MatchCounts {
                        tp: 10,
                        fp: 0,
                        fn_: 0,
                    },
                },
            ],
        };
        let csv = r.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[1], "a,319,323,304,15,19,0.94,0.95");
        assert_eq!(lines[3], "total,329,333,314,15,19,0.94,0.95");
    }

    // Exhaustive maximum matching over all injective assignments.
    fn optimal_tp(det: &[usize], act: &[usize], tol: f64) -> usize {
        fn go(i: usize, det: &[usize], act: &[usize], used: &mut Vec<bool>, tol: f64) -> usize {
            if i == det.len() {
                return 0;
            }
            let mut best = go(i + 1, det, act, used, tol);
            for j in 0..act.len() {
                if !used[j] && (det[i].abs_diff(act[j]) as f64) <= tol {
                    used[j] = true;
                    best = best.max(1 + go(i + 1, det, act, used, tol));
                    used[j] = false;
                }
            }
            best
        }
        go(0, det, act, &mut vec![false; act.len()], tol)
    }

    fn spaced(min_gap: usize) -> impl Strategy<Value = Vec<usize>> {
        prop::collection::vec(min_gap..min_gap + 200, 0..6).prop_map(|gaps| {
            let mut p = 0;
            gaps.into_iter()
                .map(|g| {
                    p += g;
                    p
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn accounting_holds(
            det in prop::collection::btree_set(0usize..2000, 0..20),
            act in prop::collection::btree_set(0usize..2000, 0..20),
            tol in 1.0f64..200.0,
        ) {
            let det: Vec<usize> = det.into_iter().collect();
            let act: Vec<usize> = act.into_iter().collect();
            let c = match_peaks(&det, &act, tol, 1000.0);
            prop_assert_eq!(c.detected(), det.len());
            prop_assert_eq!(c.actual(), act.len());
        }

        // With reference peaks more than two tolerances apart, greedy nearest
        // matching is maximum.
        #[test]
        fn greedy_is_optimal_on_separated_peaks(
            act in spaced(181),
            det in prop::collection::btree_set(0usize..1300, 0..10),
        ) {
            let det: Vec<usize> = det.into_iter().collect();
            let c = match_peaks(&det, &act, 90.0, 1000.0);
            prop_assert_eq!(c.tp, optimal_tp(&det, &act, 90.0));
        }

        #[test]
        fn shift_invariant(
            det in prop::collection::btree_set(0usize..2000, 0..15),
            act in prop::collection::btree_set(0usize..2000, 0..15),
            shift in 0usize..5000,
        ) {
            let det: Vec<usize> = det.into_iter().collect();
            let act: Vec<usize> = act.into_iter().collect();
            let a = match_peaks(&det, &act, 90.0, 500.0);
            let sd: Vec<usize> = det.iter().map(|v| v + shift).collect();
            let sa: Vec<usize> = act.iter().map(|v| v + shift).collect();
            prop_assert_eq!(a, match_peaks(&sd, &sa, 90.0, 500.0));
        }
    }
}
