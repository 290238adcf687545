//! Localization, orientation, labeling and verification metrics.
//!
//! Side errors follow the perpendicular construction: every corner of a
//! predicted side is projected onto the line carrying the matching
//! ground-truth side and the two distances are averaged. A side that
//! encloses more of the image than the ground truth has a positive error.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{OrientedBox, Point};

/// Per-side pixel tolerance used for the pass rate.
pub const NIST_TOLERANCE_PX: f64 = 64.0;

/// Signed per-side localization error in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideErrors {
    pub left: f64,
    pub right: f64,
    pub top: f64,
    pub bottom: f64,
}

impl SideErrors {
    pub fn new(left: f64, right: f64, top: f64, bottom: f64) -> Self {
        Self {
            left,
            right,
            top,
            bottom,
        }
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.left, self.right, self.top, self.bottom]
    }
}

/// Sides listed counter-clockwise by outward direction: right, top, left, bottom.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Right,
    Top,
    Left,
    Bottom,
}

const SIDES: [Side; 4] = [Side::Right, Side::Top, Side::Left, Side::Bottom];

/// Outward unit normal of a side and the two corners bounding it.
fn side_geometry(b: &OrientedBox, side: Side) -> (Point, Point, Point) {
    let (u, v) = b.axes();
    // corners: top-left, top-right, bottom-right, bottom-left
    let c = b.corners();
    match side {
        Side::Right => (u, c[1], c[2]),
        Side::Top => (v.scale(-1.0), c[0], c[1]),
        Side::Left => (u.scale(-1.0), c[3], c[0]),
        Side::Bottom => (v, c[2], c[3]),
    }
}

/// Signed perpendicular errors of each predicted side against the ground truth.
///
/// Sides are named in the ground-truth frame. The predicted side paired
/// with a ground-truth side is the one whose outward normal is closest to
/// it, i.e. the prediction's frame is shifted by the nearest multiple of 90°.
pub fn side_errors(pred: &OrientedBox, gt: &OrientedBox) -> SideErrors {
    let relative = (pred.theta() - gt.theta()).to_degrees();
    let shift = (relative / 90.0).round() as i64;

    let mut out = [0.0; 4];
    for (k, &gt_side) in SIDES.iter().enumerate() {
        let (normal, a, b) = side_geometry(gt, gt_side);
        let pred_side = SIDES[(k as i64 - shift).rem_euclid(4) as usize];
        let (_, p, q) = side_geometry(pred, pred_side);
        // a and b lie on the same line; pairing endpoints keeps identical boxes at exactly zero.
        let dp = (p - a).dot(normal);
        let dq = (q - b).dot(normal);
        let magnitude = (dp.abs() + dq.abs()) / 2.0;
        out[k] = if dp + dq < 0.0 { -magnitude } else { magnitude };
    }
    let [right, top, left, bottom] = out;
    SideErrors {
        left,
        right,
        top,
        bottom,
    }
}

/// Mean absolute error and population standard deviation of |error|.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SideStat {
    pub mae: f64,
    pub std: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaeReport {
    pub left: SideStat,
    pub right: SideStat,
    pub top: SideStat,
    pub bottom: SideStat,
    pub n: usize,
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub fn mae(errors: &[SideErrors]) -> Result<MaeReport> {
    if errors.is_empty() {
        return Err(Error::invalid("mae needs at least one set of side errors"));
    }
    let stat = |pick: fn(&SideErrors) -> f64| {
        let abs: Vec<f64> = errors.iter().map(|e| pick(e).abs()).collect();
        let (mae, std) = mean_std(&abs);
        SideStat { mae, std }
    };
    Ok(MaeReport {
        left: stat(|e| e.left),
        right: stat(|e| e.right),
        top: stat(|e| e.top),
        bottom: stat(|e| e.bottom),
        n: errors.len(),
    })
}

/// Mean and standard deviation of |θ − θ*| over paired angles in degrees.
pub fn eap(gt_angles: &[f64], pred_angles: &[f64]) -> Result<(f64, f64)> {
    if gt_angles.len() != pred_angles.len() {
        return Err(Error::invalid(format!(
            "{} ground-truth angles but {} predicted",
            gt_angles.len(),
            pred_angles.len()
        )));
    }
    if gt_angles.is_empty() {
        return Err(Error::invalid("eap needs at least one angle pair"));
    }
    let diffs: Vec<f64> = gt_angles
        .iter()
        .zip(pred_angles)
        .map(|(g, p)| (g - p).abs())
        .collect();
    Ok(mean_std(&diffs))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelAccuracy {
    pub hamming_loss: f64,
    pub accuracy: f64,
}

/// Hamming loss over label slots and `accuracy = 1 − loss`.
///
/// Sample `i` contributes the fraction of its slots where `gt[i]` and
/// `pred[i]` disagree.
pub fn label_accuracy<T: PartialEq>(gt: &[Vec<T>], pred: &[Vec<T>]) -> Result<LabelAccuracy> {
    if gt.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} ground-truth samples but {} predicted",
            gt.len(),
            pred.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::invalid("label accuracy needs at least one sample"));
    }
    let mut total = 0.0;
    for (i, (y, z)) in gt.iter().zip(pred).enumerate() {
        if y.len() != z.len() {
            return Err(Error::invalid(format!(
                "sample {i} has {} ground-truth slots but {} predicted",
                y.len(),
                z.len()
            )));
        }
        if y.is_empty() {
            return Err(Error::invalid(format!("sample {i} has no label slots")));
        }
        let differing = y.iter().zip(z).filter(|(a, b)| a != b).count();
        total += differing as f64 / y.len() as f64;
    }
    let hamming_loss = total / gt.len() as f64;
    Ok(LabelAccuracy {
        hamming_loss,
        accuracy: 1.0 - hamming_loss,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub probe_id: String,
    pub gallery_id: String,
    pub score: f64,
}

/// Mated (genuine) and non-mated (impostor) comparison scores. Higher is a stronger match.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreSet {
    pub genuine: Vec<Comparison>,
    pub impostor: Vec<Comparison>,
}

impl ScoreSet {
    /// Builds a score set from bare scores, with synthetic ids.
    pub fn from_scores(genuine: &[f64], impostor: &[f64]) -> Self {
        let wrap = |scores: &[f64], prefix: &str| {
            scores
                .iter()
                .enumerate()
                .map(|(i, &score)| Comparison {
                    probe_id: format!("{prefix}{i}"),
                    gallery_id: format!("{prefix}{i}"),
                    score,
                })
                .collect()
        };
        Self {
            genuine: wrap(genuine, "g"),
            impostor: wrap(impostor, "i"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub tar: f64,
    pub far: f64,
}

/// Operating points at every distinct score, thresholds strictly decreasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub points: Vec<RocPoint>,
}

impl RocCurve {
    /// Rates when accepting `score ≥ threshold`, read off the curve.
    pub fn operating_point(&self, threshold: f64) -> (f64, f64) {
        self.points
            .iter()
            .take_while(|p| p.threshold >= threshold)
            .last()
            .map_or((0.0, 0.0), |p| (p.tar, p.far))
    }
}

/// Sweeps the acceptance threshold over all distinct scores.
pub fn roc(scores: &ScoreSet) -> Result<RocCurve> {
    if scores.genuine.is_empty() || scores.impostor.is_empty() {
        return Err(Error::invalid(format!(
            "roc needs genuine and impostor scores, got {} and {}",
            scores.genuine.len(),
            scores.impostor.len()
        )));
    }
    let mut all: Vec<(f64, bool)> = scores
        .genuine
        .iter()
        .map(|c| (c.score, true))
        .chain(scores.impostor.iter().map(|c| (c.score, false)))
        .collect();
    if let Some((s, _)) = all.iter().find(|(s, _)| !s.is_finite()) {
        return Err(Error::invalid(format!("score {s} is not finite")));
    }
    all.sort_by(|a, b| b.0.total_cmp(&a.0));

    let n_genuine = scores.genuine.len() as f64;
    let n_impostor = scores.impostor.len() as f64;
    let (mut accepted_genuine, mut accepted_impostor) = (0usize, 0usize);
    let mut points = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let threshold = all[i].0;
        while i < all.len() && all[i].0 == threshold {
            if all[i].1 {
                accepted_genuine += 1;
            } else {
                accepted_impostor += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold,
            tar: accepted_genuine as f64 / n_genuine,
            far: accepted_impostor as f64 / n_impostor,
        });
    }
    Ok(RocCurve { points })
}

/// Highest TAR among operating points with FAR ≤ `target_far`; 0 if none.
pub fn tar_at_far(curve: &RocCurve, target_far: f64) -> f64 {
    curve
        .points
        .iter()
        .take_while(|p| p.far <= target_far)
        .last()
        .map_or(0.0, |p| p.tar)
}

/// Fraction of fingerprints whose four |side errors| are all within `tolerance` pixels.
pub fn nist_tolerance_check(errors: &[SideErrors], tolerance: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::invalid(
            "tolerance check needs at least one fingerprint",
        ));
    }
    let passing = errors
        .iter()
        .filter(|e| within_tolerance(e, tolerance))
        .count();
    Ok(passing as f64 / errors.len() as f64)
}

pub fn within_tolerance(e: &SideErrors, tolerance: f64) -> bool {
    e.to_array().iter().all(|v| v.abs() <= tolerance)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    /// `bins + 1` equally spaced edges from min to max.
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSummary {
    pub histogram: Histogram,
    pub boxplot: BoxStats,
}

/// Linear interpolation between order statistics at `q · (n − 1)`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn summarize_distribution(values: &[f64], bins: usize) -> Result<DistributionSummary> {
    if values.is_empty() {
        return Err(Error::invalid("cannot summarize an empty list"));
    }
    if bins == 0 {
        return Err(Error::invalid("histogram needs at least one bin"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("cannot summarize non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let width = (max - min) / bins as f64;

    let edges: Vec<f64> = (0..=bins).map(|i| min + width * i as f64).collect();
    let mut counts = vec![0usize; bins];
    for &v in values {
        let bin = if width > 0.0 {
            (((v - min) / width) as usize).min(bins - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }

    let (mean, _) = mean_std(values);
    Ok(DistributionSummary {
        histogram: Histogram { edges, counts },
        boxplot: BoxStats {
            min,
            q1: quantile_sorted(&sorted, 0.25),
            median: quantile_sorted(&sorted, 0.5),
            q3: quantile_sorted(&sorted, 0.75),
            max,
            mean,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn bx(cx: f64, cy: f64, w: f64, h: f64, t: f64) -> OrientedBox {
        OrientedBox::new(cx, cy, w, h, t).unwrap()
    }

    fn close(a: SideErrors, b: SideErrors, tol: f64) -> bool {
        a.to_array()
            .iter()
            .zip(b.to_array())
            .all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn side_errors_axis_aligned() {
        let gt = bx(50.0, 50.0, 20.0, 30.0, 0.0);
        assert_eq!(side_errors(&gt, &gt), SideErrors::default());

        let inflated = bx(50.0, 50.0, 30.0, 40.0, 0.0);
        assert!(close(
            side_errors(&inflated, &gt),
            SideErrors::new(5.0, 5.0, 5.0, 5.0),
            1e-12
        ));

        // Top edge moves down from y=35 to y=38.
        let shrunk_top = bx(50.0, 51.5, 20.0, 27.0, 0.0);
        assert!(close(
            side_errors(&shrunk_top, &gt),
            SideErrors::new(0.0, 0.0, -3.0, 0.0),
            1e-12
        ));
    }

    #[test]
    fn side_names_follow_image_axes() {
        // Shifting right by 4: right side encloses more, left side less.
        let gt = bx(50.0, 50.0, 20.0, 30.0, 0.0);
        let shifted = gt.translated(4.0, 0.0);
        assert!(close(
            side_errors(&shifted, &gt),
            SideErrors::new(-4.0, 4.0, 0.0, 0.0),
            1e-12
        ));
        // Shifting down (larger y) grows the bottom.
        let lowered = gt.translated(0.0, 2.0);
        assert!(close(
            side_errors(&lowered, &gt),
            SideErrors::new(0.0, 0.0, -2.0, 2.0),
            1e-12
        ));
    }

    #[test]
    fn side_errors_quarter_turn_representation() {
        // The same rectangle written as (w, h, 0) and (h, w, π/2).
        let gt = bx(50.0, 50.0, 20.0, 30.0, 0.0);
        let same = bx(50.0, 50.0, 30.0, 20.0, PI / 2.0);
        assert!(close(side_errors(&same, &gt), SideErrors::default(), 1e-12));
        let bigger = bx(50.0, 50.0, 36.0, 22.0, PI / 2.0);
        assert!(close(
            side_errors(&bigger, &gt),
            SideErrors::new(1.0, 1.0, 3.0, 3.0),
            1e-12
        ));
    }

    #[test]
    fn side_errors_tilted_prediction() {
        // Pred tilted about the gt center: endpoints on both sides of each
        // gt line; the midpoint sits on the line so the sign defaults to +.
        let gt = bx(0.0, 0.0, 10.0, 10.0, 0.0);
        let tilted = bx(0.0, 0.0, 10.0, 10.0, 0.1);
        let e = side_errors(&tilted, &gt);
        let (s, c) = 0.1f64.sin_cos();
        // Right side endpoints sit at x = 5c ± 5s; the gt line is x = 5.
        let expected = ((5.0 * c + 5.0 * s - 5.0).abs() + (5.0 * c - 5.0 * s - 5.0).abs()) / 2.0;
        for v in e.to_array() {
            assert!((v.abs() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn mae_examples() {
        let zero = mae(&[SideErrors::default(); 3]).unwrap();
        assert_eq!(zero.left.mae, 0.0);
        assert_eq!(zero.n, 3);

        let r = mae(&[
            SideErrors::new(3.0, 0.0, 0.0, 0.0),
            SideErrors::new(-5.0, 0.0, 0.0, 0.0),
        ])
        .unwrap();
        assert_eq!(r.left.mae, 4.0);
        assert_eq!(r.left.std, 1.0);
        assert!(mae(&[]).is_err());
    }

    #[test]
    fn eap_examples() {
        assert_eq!(eap(&[10.0, -3.0], &[10.0, -3.0]).unwrap(), (0.0, 0.0));
        let (mean, std) = eap(&[30.0, -10.0], &[25.0, -4.0]).unwrap();
        assert_eq!(mean, 5.5);
        assert_eq!(std, 0.5);
        assert!(eap(&[1.0], &[]).is_err());
    }

    #[test]
    fn label_accuracy_examples() {
        let gt = vec![vec![1, 2, 3, 4, 5, 6, 7, 8, 9, 10]];
        let perfect = label_accuracy(&gt, &gt).unwrap();
        assert_eq!((perfect.hamming_loss, perfect.accuracy), (0.0, 1.0));

        let mut wrong = gt.clone();
        wrong[0][3] = 0;
        let r = label_accuracy(&gt, &wrong).unwrap();
        assert!((r.hamming_loss - 0.1).abs() < 1e-15);
        assert!((r.accuracy - 0.9).abs() < 1e-15);

        assert!(label_accuracy(&gt, &[vec![1]]).is_err());
        assert!(label_accuracy(&gt, &[]).is_err());
    }

    #[test]
    fn roc_examples() {
        let perfect = roc(&ScoreSet::from_scores(&[1.0, 1.0], &[0.0, 0.0, 0.0])).unwrap();
        assert_eq!(perfect.operating_point(0.5), (1.0, 0.0));
        assert_eq!(tar_at_far(&perfect, 0.001), 1.0);

        let c = roc(&ScoreSet::from_scores(&[0.9, 0.4], &[0.6, 0.1])).unwrap();
        let pts: Vec<(f64, f64, f64)> = c
            .points
            .iter()
            .map(|p| (p.threshold, p.tar, p.far))
            .collect();
        assert_eq!(
            pts,
            vec![
                (0.9, 0.5, 0.0),
                (0.6, 0.5, 0.5),
                (0.4, 1.0, 0.5),
                (0.1, 1.0, 1.0)
            ]
        );
        assert_eq!(c.operating_point(0.6), (0.5, 0.5));
        assert_eq!(c.operating_point(0.4), (1.0, 0.5));
        assert_eq!(tar_at_far(&c, 0.5), 1.0);
        assert_eq!(tar_at_far(&c, 0.0), 0.5);

        let tie = roc(&ScoreSet::from_scores(&[0.7], &[0.7])).unwrap();
        assert_eq!(tie.operating_point(0.7), (1.0, 1.0));
        assert_eq!(tie.points.len(), 1);

        assert!(roc(&ScoreSet::from_scores(&[0.5], &[])).is_err());
        assert!(roc(&ScoreSet::from_scores(&[], &[0.5])).is_err());
    }

    #[test]
    fn tar_at_far_with_no_admissible_point() {
        let c = roc(&ScoreSet::from_scores(&[0.1], &[0.9])).unwrap();
        assert_eq!(tar_at_far(&c, 0.001), 0.0);
    }

    #[test]
    fn nist_examples() {
        assert_eq!(
            nist_tolerance_check(&[SideErrors::default()], NIST_TOLERANCE_PX).unwrap(),
            1.0
        );
        let bottom = SideErrors::new(0.0, 0.0, 0.0, 90.0);
        assert_eq!(
            nist_tolerance_check(&[bottom], NIST_TOLERANCE_PX).unwrap(),
            0.0
        );
        let mixed = [
            SideErrors::new(10.0, 10.0, 10.0, 10.0),
            SideErrors::new(70.0, 0.0, 0.0, 0.0),
        ];
        assert_eq!(
            nist_tolerance_check(&mixed, NIST_TOLERANCE_PX).unwrap(),
            0.5
        );
        // Boundary is inclusive, sign is ignored.
        assert_eq!(
            nist_tolerance_check(&[SideErrors::new(-64.0, 64.0, 0.0, 0.0)], 64.0).unwrap(),
            1.0
        );
        assert!(nist_tolerance_check(&[], 64.0).is_err());
    }

    #[test]
    fn distribution_examples() {
        let s = summarize_distribution(&[1.0, 2.0, 3.0, 4.0, 5.0], 4).unwrap();
        assert_eq!(
            (s.boxplot.q1, s.boxplot.median, s.boxplot.q3),
            (2.0, 3.0, 4.0)
        );
        assert_eq!(s.boxplot.mean, 3.0);
        assert_eq!(s.histogram.counts, vec![1, 1, 1, 2]);
        assert_eq!(s.histogram.edges, vec![1.0, 2.0, 3.0, 4.0, 5.0]);

        let flat = summarize_distribution(&[7.0; 5], 3).unwrap();
        assert_eq!(flat.histogram.counts.iter().filter(|&&c| c > 0).count(), 1);
        assert_eq!(flat.boxplot.q1, flat.boxplot.q3);

        let even = summarize_distribution(&[4.0, 1.0, 3.0, 2.0], 2).unwrap();
        assert_eq!(even.boxplot.median, 2.5);

        assert!(summarize_distribution(&[], 3).is_err());
        assert!(summarize_distribution(&[1.0], 0).is_err());
    }
}
