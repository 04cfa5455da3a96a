//! Scoring attacks: threshold accuracy, average precision, closed-form
//! accuracy identities, and differential-privacy ceilings on all of them.
//!
//! Accuracy here is always membership accuracy: each record carries an
//! attack score and the true member bit, and the attack predicts "member"
//! when the score clears a threshold. Both the in-sample peak accuracy
//! and a cross-validated variant are available, since the peak is
//! optimistically biased on small evaluation sets.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackKind, ScoreRecord};
use crate::data::format_float;
use crate::error::{Error, Result};
use crate::numeric::sigmoid;
use crate::rng::RngSeed;

/// Which truth value counts as "positive" when ranking for average
/// precision. Non-member ranking reverses the score order: a good attack
/// puts non-members at the bottom, so low scores are evidence there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositiveClass {
    Member,
    NonMember,
}

/// Evaluation summary for one attack on one scored dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttackReport {
    pub attack: AttackKind,
    /// Threshold achieving `accuracy` under the rule `score >= threshold`.
    pub threshold: f64,
    /// Peak membership accuracy on the evaluated records.
    pub accuracy: f64,
    /// Accuracy with the threshold chosen on held-out folds, when requested.
    pub cv_accuracy: Option<f64>,
    /// Average precision ranking members to the top.
    pub map_train: f64,
    /// Average precision ranking non-members to the bottom.
    pub map_test: f64,
    /// Number of records evaluated.
    pub n: usize,
    /// Seed of the experiment that produced the scores.
    pub seed: u64,
}

fn check_records(records: &[ScoreRecord]) -> Result<(usize, usize)> {
    if records.is_empty() {
        return Err(Error::Evaluation("no records to evaluate".into()));
    }
    let members = records.iter().filter(|r| r.truth).count();
    Ok((members, records.len() - members))
}

/// Best threshold for the rule `score >= threshold => member`, and the
/// membership accuracy it achieves on these records.
///
/// Candidates are the midpoints between consecutive distinct scores,
/// plus one value below the minimum (predict everything member) and one
/// above the maximum (predict nothing); ties pick the smallest
/// threshold. Constant predictors being candidates makes the result at
/// least `max(fraction member, fraction non-member)`. Records must
/// contain both truth values.
pub fn best_threshold_accuracy(records: &[ScoreRecord]) -> Result<(f64, f64)> {
    let (members, non_members) = check_records(records)?;
    if members == 0 || non_members == 0 {
        return Err(Error::Evaluation(
            "all records share one truth value; accuracy is not informative".into(),
        ));
    }
    let mut pooled: Vec<(f64, bool)> = records.iter().map(|r| (r.score, r.truth)).collect();
    pooled.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total = pooled.len() as f64;
    let m_total = members as f64;

    // score >= tau predicts member; counts below the moving boundary flip
    // from "wrongly excluded member" to "rightly excluded non-member"
    let accuracy_at = |members_below: f64, non_members_below: f64| {
        (m_total - members_below + non_members_below) / total
    };

    let lo = pooled[0].0;
    let hi = pooled[pooled.len() - 1].0;
    let mut best_tau = lo - 1.0;
    let mut best_accuracy = accuracy_at(0.0, 0.0);
    if lo == hi {
        // degenerate scores: only the two constant rules exist
        let all_non_member = accuracy_at(m_total, total - m_total);
        if all_non_member > best_accuracy {
            return Ok((hi + 1.0, all_non_member));
        }
        return Ok((best_tau, best_accuracy));
    }
    let mut members_below = 0.0;
    let mut non_members_below = 0.0;
    let mut i = 0;
    while i < pooled.len() {
        let value = pooled[i].0;
        while i < pooled.len() && pooled[i].0 == value {
            if pooled[i].1 {
                members_below += 1.0;
            } else {
                non_members_below += 1.0;
            }
            i += 1;
        }
        let candidate = if i < pooled.len() {
            (value + pooled[i].0) / 2.0
        } else {
            hi + 1.0
        };
        let accuracy = accuracy_at(members_below, non_members_below);
        if accuracy > best_accuracy {
            best_accuracy = accuracy;
            best_tau = candidate;
        }
    }
    Ok((best_tau, best_accuracy))
}

/// Accuracy of the rule `score >= threshold` on the given records.
pub fn threshold_accuracy(records: &[ScoreRecord], threshold: f64) -> Result<f64> {
    check_records(records)?;
    let correct = records
        .iter()
        .filter(|r| (r.score >= threshold) == r.truth)
        .count();
    Ok(correct as f64 / records.len() as f64)
}

/// K-fold cross-validated accuracy: each fold is scored with the best
/// threshold of the remaining folds, removing the in-sample optimism of
/// [`best_threshold_accuracy`]. Fold assignment is a seeded shuffle.
pub fn cross_validated_accuracy(
    records: &[ScoreRecord],
    folds: usize,
    seed: RngSeed,
) -> Result<f64> {
    check_records(records)?;
    if folds < 2 || folds > records.len() {
        return Err(Error::Evaluation(format!(
            "need 2 <= folds <= {} records, got {folds}",
            records.len()
        )));
    }
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.shuffle(&mut seed.rng());
    let mut correct = 0usize;
    for fold in 0..folds {
        let held: Vec<usize> = order
            .iter()
            .copied()
            .skip(fold)
            .step_by(folds)
            .collect();
        let rest: Vec<ScoreRecord> = order
            .iter()
            .filter(|i| !held.contains(i))
            .map(|&i| records[i].clone())
            .collect();
        let (tau, _) = best_threshold_accuracy(&rest)
            .map_err(|e| Error::Evaluation(format!("fold {fold}: {e}")))?;
        correct += held
            .iter()
            .filter(|&&i| (records[i].score >= tau) == records[i].truth)
            .count();
    }
    Ok(correct as f64 / records.len() as f64)
}

/// Average precision of the ranking the scores induce.
///
/// For [`PositiveClass::Member`] records are ranked by descending score;
/// for [`PositiveClass::NonMember`] by ascending score, since a sharp
/// attack pushes non-members to the bottom of the member ranking. Ties
/// break by record index so the value is deterministic.
pub fn mean_average_precision(
    records: &[ScoreRecord],
    positive_class: PositiveClass,
) -> Result<f64> {
    check_records(records)?;
    let positive = |r: &ScoreRecord| match positive_class {
        PositiveClass::Member => r.truth,
        PositiveClass::NonMember => !r.truth,
    };
    let total_positives = records.iter().filter(|r| positive(r)).count();
    if total_positives == 0 {
        return Err(Error::Evaluation(format!(
            "no {} records to rank",
            match positive_class {
                PositiveClass::Member => "member",
                PositiveClass::NonMember => "non-member",
            }
        )));
    }
    let mut ranked: Vec<&ScoreRecord> = records.iter().collect();
    ranked.sort_by(|a, b| {
        let ord = a.score.total_cmp(&b.score);
        match positive_class {
            PositiveClass::Member => ord.reverse(),
            PositiveClass::NonMember => ord,
        }
        .then(a.index.cmp(&b.index))
    });
    let mut positives_seen = 0usize;
    let mut precision_sum = 0.0;
    for (rank0, record) in ranked.iter().enumerate() {
        if positive(record) {
            positives_seen += 1;
            precision_sum += positives_seen as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(precision_sum / total_positives as f64)
}

/// Evaluate one attack's scores into a report. `cv_folds` adds the
/// cross-validated accuracy column when set.
pub fn evaluate_attack(
    attack: AttackKind,
    records: &[ScoreRecord],
    seed: RngSeed,
    cv_folds: Option<usize>,
) -> Result<AttackReport> {
    let (threshold, accuracy) = best_threshold_accuracy(records)?;
    let cv_accuracy = match cv_folds {
        Some(folds) => Some(cross_validated_accuracy(records, folds, seed.child(1))?),
        None => None,
    };
    Ok(AttackReport {
        attack,
        threshold,
        accuracy,
        cv_accuracy,
        map_train: mean_average_precision(records, PositiveClass::Member)?,
        map_test: mean_average_precision(records, PositiveClass::NonMember)?,
        n: records.len(),
        seed: seed.0,
    })
}

fn check_unit(name: &str, x: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::Evaluation(format!(
            "{name} must lie in [0, 1], got {x}"
        )));
    }
    Ok(())
}

/// Membership accuracy of the label-agreement attack, given the model's
/// accuracy on members (`p_train`) and on fresh data (`p_test`):
/// `lambda * p_train + (1 - lambda) * (1 - p_test)`.
pub fn zero_one_accuracy_formula(lambda: f64, p_train: f64, p_test: f64) -> Result<f64> {
    check_unit("lambda", lambda)?;
    check_unit("p_train", p_train)?;
    check_unit("p_test", p_test)?;
    Ok(lambda * p_train + (1.0 - lambda) * (1.0 - p_test))
}

/// Ceiling on any attack's membership accuracy against an
/// epsilon-differentially-private learner: `min(1, lambda + epsilon/4)`.
pub fn dp_membership_bound(epsilon: f64, lambda: f64) -> Result<f64> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::Evaluation(format!(
            "epsilon must be a finite non-negative number, got {epsilon}"
        )));
    }
    check_unit("lambda", lambda)?;
    Ok((lambda + epsilon / 4.0).min(1.0))
}

/// Ceiling on membership accuracy for an (epsilon, delta)-private
/// learner at temperature `t`: `min(1, lambda + epsilon/(4t) + delta)`.
/// Colder posteriors sharpen the likelihood ratio, so the epsilon term
/// scales with `1/t`.
pub fn membership_privacy_bound(epsilon: f64, delta: f64, t: f64, lambda: f64) -> Result<f64> {
    if !epsilon.is_finite() || epsilon < 0.0 {
        return Err(Error::Evaluation(format!(
            "epsilon must be a finite non-negative number, got {epsilon}"
        )));
    }
    if !delta.is_finite() || !(0.0..1.0).contains(&delta) {
        return Err(Error::Evaluation(format!(
            "delta must lie in [0, 1), got {delta}"
        )));
    }
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Evaluation(format!(
            "temperature must be positive and finite, got {t}"
        )));
    }
    check_unit("lambda", lambda)?;
    Ok((lambda + epsilon / (4.0 * t) + delta).min(1.0))
}

/// The 1/4-Lipschitz property of the sigmoid that the privacy bounds
/// rest on: `sigmoid(u) <= sigmoid(v) + max(u - v, 0)/4`, checked with a
/// small slack for rounding.
pub fn sigmoid_lipschitz_check(u: f64, v: f64) -> bool {
    sigmoid(u) <= sigmoid(v) + (u - v).max(0.0) / 4.0 + 1e-12
}

// ---------------------------------------------------------------------------
// Report persistence
// ---------------------------------------------------------------------------

/// Write attack reports as a JSON array.
pub fn write_report_json(path: &Path, reports: &[AttackReport]) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, reports)
        .map_err(|e| Error::format(&display, e.to_string()))?;
    out.write_all(b"\n").map_err(|e| Error::io(&display, e))?;
    Ok(())
}

/// Read back a report written by [`write_report_json`].
pub fn read_report_json(path: &Path) -> Result<Vec<AttackReport>> {
    let display = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(&display, e))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::format(&display, e.to_string()))
}

/// Write the summary table, one row per attack and seed. Floats use the
/// same full-precision format as datasets so reruns are byte-identical.
pub fn write_summary_csv(path: &Path, reports: &[AttackReport]) -> Result<()> {
    let display = path.display().to_string();
    let file = File::create(path).map_err(|e| Error::io(&display, e))?;
    let mut out = BufWriter::new(file);
    let mut emit = |line: String| {
        out.write_all(line.as_bytes())
            .and_then(|()| out.write_all(b"\n"))
            .map_err(|e| Error::io(&display, e))
    };
    emit("attack,seed,n,threshold,accuracy,cv_accuracy,map_train,map_test".into())?;
    for r in reports {
        let cv = r.cv_accuracy.map(format_float).unwrap_or_default();
        emit(format!(
            "{},{},{},{},{},{cv},{},{}",
            r.attack,
            r.seed,
            r.n,
            format_float(r.threshold),
            format_float(r.accuracy),
            format_float(r.map_train),
            format_float(r.map_test),
        ))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn records(scores_truths: &[(f64, bool)]) -> Vec<ScoreRecord> {
        scores_truths
            .iter()
            .enumerate()
            .map(|(i, &(s, t))| ScoreRecord::new(i, s, t).unwrap())
            .collect()
    }

    /// Exhaustive reference: try every score as a cut, every midpoint,
    /// and the two constant rules; 2n+1 distinct decisions at most.
    fn brute_force_best(records: &[ScoreRecord]) -> (f64, f64) {
        let mut scores: Vec<f64> = records.iter().map(|r| r.score).collect();
        scores.sort_by(f64::total_cmp);
        let mut cuts = vec![scores[0] - 1.0, scores[scores.len() - 1] + 1.0];
        for w in scores.windows(2) {
            cuts.push(w[0]);
            cuts.push((w[0] + w[1]) / 2.0);
        }
        cuts.push(scores[scores.len() - 1]);
        cuts.sort_by(f64::total_cmp);
        let mut best = (f64::NAN, -1.0);
        for &tau in &cuts {
            let accuracy = threshold_accuracy(records, tau).unwrap();
            if accuracy > best.1 {
                best = (tau, accuracy);
            }
        }
        best
    }

    #[test]
    fn best_threshold_matches_brute_force() {
        let mut rng = RngSeed(300).rng();
        for _ in 0..40 {
            let recs: Vec<ScoreRecord> = (0..12)
                .map(|i| {
                    // coarse grid of scores forces plenty of ties
                    let score = (rng.random::<f64>() * 8.0).round() / 2.0;
                    ScoreRecord::new(i, score, rng.random::<f64>() < 0.5).unwrap()
                })
                .collect();
            let members = recs.iter().filter(|r| r.truth).count();
            if members == 0 || members == recs.len() {
                continue;
            }
            let (tau, accuracy) = best_threshold_accuracy(&recs).unwrap();
            let (_, oracle_accuracy) = brute_force_best(&recs);
            assert_eq!(accuracy, oracle_accuracy);
            // the reported threshold actually realizes the reported accuracy
            assert_eq!(threshold_accuracy(&recs, tau).unwrap(), accuracy);
        }
    }

    #[test]
    fn best_threshold_prefers_smallest_tie() {
        // any cut classifies at most 2 of 3 correctly; tau below the
        // minimum (predict all member) already does, and is smallest
        let recs = records(&[(0.0, true), (1.0, false), (2.0, true)]);
        let (tau, accuracy) = best_threshold_accuracy(&recs).unwrap();
        assert_abs_diff_eq!(accuracy, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(tau, -1.0);
    }

    #[test]
    fn best_threshold_needs_both_truths() {
        let recs = records(&[(0.1, true), (0.9, true)]);
        let err = best_threshold_accuracy(&recs).unwrap_err();
        assert_eq!(err.stage(), "evaluation");
        assert!(best_threshold_accuracy(&[]).is_err());
    }

    #[test]
    fn best_threshold_handles_constant_scores() {
        let recs = records(&[(1.0, true), (1.0, false), (1.0, false)]);
        let (tau, accuracy) = best_threshold_accuracy(&recs).unwrap();
        assert_abs_diff_eq!(accuracy, 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(threshold_accuracy(&recs, tau).unwrap(), accuracy);
    }

    #[test]
    fn accuracy_never_below_base_rate() {
        let mut rng = RngSeed(301).rng();
        for _ in 0..30 {
            let recs: Vec<ScoreRecord> = (0..20)
                .map(|i| {
                    ScoreRecord::new(i, rng.random::<f64>(), rng.random::<f64>() < 0.3).unwrap()
                })
                .collect();
            let members = recs.iter().filter(|r| r.truth).count();
            if members == 0 || members == recs.len() {
                continue;
            }
            let base = members as f64 / recs.len() as f64;
            let (_, accuracy) = best_threshold_accuracy(&recs).unwrap();
            assert!(accuracy >= base.max(1.0 - base) - 1e-15);
        }
    }

    #[test]
    fn cross_validation_is_deterministic_and_sane() {
        // strongly separated scores survive held-out thresholding
        let recs: Vec<ScoreRecord> = (0..40)
            .map(|i| {
                let member = i % 2 == 0;
                let score = if member { 5.0 + i as f64 } else { -5.0 - i as f64 };
                ScoreRecord::new(i, score, member).unwrap()
            })
            .collect();
        let a = cross_validated_accuracy(&recs, 5, RngSeed(302)).unwrap();
        let b = cross_validated_accuracy(&recs, 5, RngSeed(302)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 1.0);
        assert!(cross_validated_accuracy(&recs, 1, RngSeed(0)).is_err());
        assert!(cross_validated_accuracy(&recs, 41, RngSeed(0)).is_err());
    }

    #[test]
    fn average_precision_single_positive_second_place() {
        let recs = records(&[(3.0, false), (2.0, true)]);
        let ap = mean_average_precision(&recs, PositiveClass::Member).unwrap();
        assert_abs_diff_eq!(ap, 0.5, epsilon = 1e-15);
        // the same records ranked for non-members put the non-member
        // (score 3.0, now sorted ascending -> rank 2) at precision 1/2
        let ap = mean_average_precision(&recs, PositiveClass::NonMember).unwrap();
        assert_abs_diff_eq!(ap, 0.5, epsilon = 1e-15);
    }

    #[test]
    fn average_precision_matches_quadratic_oracle() {
        let mut rng = RngSeed(303).rng();
        for _ in 0..20 {
            let recs: Vec<ScoreRecord> = (0..15)
                .map(|i| {
                    let score = (rng.random::<f64>() * 6.0).round();
                    ScoreRecord::new(i, score, rng.random::<f64>() < 0.5).unwrap()
                })
                .collect();
            let positives = recs.iter().filter(|r| r.truth).count();
            if positives == 0 {
                continue;
            }
            let ap = mean_average_precision(&recs, PositiveClass::Member).unwrap();
            // oracle: sort a copy, then recount precision at each positive
            // with an explicit quadratic scan
            let mut ranked = recs.clone();
            ranked.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
            let mut oracle = 0.0;
            for k in 0..ranked.len() {
                if ranked[k].truth {
                    let hits = ranked[..=k].iter().filter(|r| r.truth).count();
                    oracle += hits as f64 / (k + 1) as f64;
                }
            }
            oracle /= positives as f64;
            assert_abs_diff_eq!(ap, oracle, epsilon = 1e-12);
        }
    }

    #[test]
    fn average_precision_perfect_and_inverted_rankings() {
        let recs = records(&[(4.0, true), (3.0, true), (2.0, false), (1.0, false)]);
        let ap = mean_average_precision(&recs, PositiveClass::Member).unwrap();
        assert_eq!(ap, 1.0);
        let ap = mean_average_precision(&recs, PositiveClass::NonMember).unwrap();
        assert_eq!(ap, 1.0);
        let err =
            mean_average_precision(&records(&[(1.0, false)]), PositiveClass::Member).unwrap_err();
        assert_eq!(err.stage(), "evaluation");
    }

    proptest! {
        #[test]
        fn metrics_invariant_under_monotone_transforms(
            scores in proptest::collection::vec(-50.0f64..50.0, 4..40),
            truth_bits in proptest::collection::vec(proptest::bool::ANY, 40),
        ) {
            let recs: Vec<ScoreRecord> = scores
                .iter()
                .zip(&truth_bits)
                .enumerate()
                .map(|(i, (&s, &t))| ScoreRecord::new(i, s, t).unwrap())
                .collect();
            let members = recs.iter().filter(|r| r.truth).count();
            prop_assume!(members > 0 && members < recs.len());

            let transform = |f: fn(f64) -> f64| -> Vec<ScoreRecord> {
                recs.iter()
                    .map(|r| ScoreRecord::new(r.index, f(r.score), r.truth).unwrap())
                    .collect()
            };
            let affine = transform(|s| 2.0 * s + 1.0);
            let squash = transform(|s| (s / 10.0).tanh());

            let (_, base_acc) = best_threshold_accuracy(&recs).unwrap();
            let base_map = mean_average_precision(&recs, PositiveClass::Member).unwrap();
            let base_map_t = mean_average_precision(&recs, PositiveClass::NonMember).unwrap();
            for variant in [&affine, &squash] {
                let (_, acc) = best_threshold_accuracy(variant).unwrap();
                prop_assert!((acc - base_acc).abs() <= 1e-12);
                let m = mean_average_precision(variant, PositiveClass::Member).unwrap();
                prop_assert!((m - base_map).abs() <= 1e-12);
                let m = mean_average_precision(variant, PositiveClass::NonMember).unwrap();
                prop_assert!((m - base_map_t).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_one_formula_examples() {
        let acc = zero_one_accuracy_formula(0.5, 0.979, 0.938).unwrap();
        assert_abs_diff_eq!(acc, 0.5205, epsilon = 1e-12);
        assert_eq!(zero_one_accuracy_formula(0.5, 1.0, 1.0).unwrap(), 0.5);
        for bad in [
            zero_one_accuracy_formula(-0.1, 0.5, 0.5),
            zero_one_accuracy_formula(0.5, 1.5, 0.5),
            zero_one_accuracy_formula(0.5, 0.5, f64::NAN),
        ] {
            assert_eq!(bad.unwrap_err().stage(), "evaluation");
        }
    }

    #[test]
    fn dp_bound_examples() {
        assert_abs_diff_eq!(
            dp_membership_bound(0.01, 0.5).unwrap(),
            0.5025,
            epsilon = 1e-15
        );
        assert_eq!(dp_membership_bound(10.0, 0.5).unwrap(), 1.0);
        assert_eq!(dp_membership_bound(0.0, 0.25).unwrap(), 0.25);
        assert!(dp_membership_bound(-0.01, 0.5).is_err());
        assert!(dp_membership_bound(0.1, 1.5).is_err());
    }

    #[test]
    fn posterior_bound_examples() {
        // at t = 1 and delta = 0 this is the plain bound
        assert_eq!(
            membership_privacy_bound(0.01, 0.0, 1.0, 0.5).unwrap(),
            dp_membership_bound(0.01, 0.5).unwrap()
        );
        // colder posterior doubles the epsilon term
        assert_abs_diff_eq!(
            membership_privacy_bound(0.01, 0.0, 0.5, 0.5).unwrap(),
            0.505,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            membership_privacy_bound(0.01, 0.001, 1.0, 0.5).unwrap(),
            0.5035,
            epsilon = 1e-15
        );
        assert_eq!(membership_privacy_bound(8.0, 0.1, 1.0, 0.5).unwrap(), 1.0);
        assert!(membership_privacy_bound(0.1, 1.0, 1.0, 0.5).is_err());
        assert!(membership_privacy_bound(0.1, 0.0, 0.0, 0.5).is_err());
        assert!(membership_privacy_bound(f64::INFINITY, 0.0, 1.0, 0.5).is_err());
    }

    #[test]
    fn sigmoid_lipschitz_holds_over_random_pairs() {
        let mut rng = RngSeed(304).rng();
        for _ in 0..100_000 {
            let u = (rng.random::<f64>() - 0.5) * 40.0;
            let v = (rng.random::<f64>() - 0.5) * 40.0;
            assert!(sigmoid_lipschitz_check(u, v), "failed at u={u}, v={v}");
        }
        // equality-ish edge: tiny positive gap right at the steep point
        assert!(sigmoid_lipschitz_check(1e-9, 0.0));
    }

    #[test]
    fn reports_round_trip_through_disk() {
        let recs: Vec<ScoreRecord> = (0..30)
            .map(|i| {
                let member = i % 3 == 0;
                let score = i as f64 * if member { 0.7 } else { -0.3 };
                ScoreRecord::new(i, score, member).unwrap()
            })
            .collect();
        let report = evaluate_attack(AttackKind::Malt, &recs, RngSeed(305), Some(5)).unwrap();
        assert_eq!(report.n, 30);
        assert!(report.cv_accuracy.is_some());

        let dir = tempfile::tempdir().unwrap();
        let json = dir.path().join("report.json");
        write_report_json(&json, std::slice::from_ref(&report)).unwrap();
        let back = read_report_json(&json).unwrap();
        assert_eq!(back, vec![report.clone()]);

        let csv = dir.path().join("summary.csv");
        write_summary_csv(&csv, &[report]).unwrap();
        let text = std::fs::read_to_string(&csv).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "attack,seed,n,threshold,accuracy,cv_accuracy,map_train,map_test"
        );
        assert!(lines.next().unwrap().starts_with("malt,305,30,"));
        assert_eq!(lines.next(), None);
    }
}
