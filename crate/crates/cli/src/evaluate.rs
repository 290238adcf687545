//! Prediction-vs-ground-truth evaluation over annotation files.
//!
//! Within each image, predictions are paired one-to-one with ground-truth
//! fingers greedily by descending rotated IoU (ties go to the lower gt
//! index, then the lower prediction index). A ground-truth finger with no
//! overlapping prediction is a labeling miss: it counts against label
//! accuracy but is left out of MAE, EAP and the tolerance pass rate.

use std::collections::HashMap;

use orientkit::dataio::{AnnotatedFingerphoto, Finger, FingerLabel};
use orientkit::geom::rotated_iou;
use orientkit::metrics::{self, MaeReport, SideErrors};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

/// One ground-truth fingerprint and whatever it was matched to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetailRow {
    pub image: String,
    pub gt_index: usize,
    pub gt_label: FingerLabel,
    pub pred_index: Option<usize>,
    pub pred_label: Option<FingerLabel>,
    pub iou: Option<f64>,
    pub left: Option<f64>,
    pub right: Option<f64>,
    pub top: Option<f64>,
    pub bottom: Option<f64>,
    pub gt_theta_deg: f64,
    pub pred_theta_deg: Option<f64>,
    pub angle_error_deg: Option<f64>,
}

impl DetailRow {
    pub fn side_errors(&self) -> Option<SideErrors> {
        Some(SideErrors::new(
            self.left?,
            self.right?,
            self.top?,
            self.bottom?,
        ))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub images: usize,
    pub gt_fingerprints: usize,
    pub matched: usize,
    pub unmatched: usize,
    pub mae: MaeReport,
    pub eap_mean_deg: f64,
    pub eap_std_deg: f64,
    pub hamming_loss: f64,
    pub label_accuracy: f64,
    pub tolerance_px: f64,
    pub nist_pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub summary: EvaluationSummary,
    pub rows: Vec<DetailRow>,
}

/// For every gt finger, the matched prediction index and IoU.
pub fn match_fingers(gt: &[Finger], pred: &[Finger]) -> Vec<Option<(usize, f64)>> {
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for (i, g) in gt.iter().enumerate() {
        for (j, p) in pred.iter().enumerate() {
            let iou = rotated_iou(&g.bbox, &p.bbox);
            if iou > 0.0 {
                pairs.push((i, j, iou));
            }
        }
    }
    pairs.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));

    let mut gt_match = vec![None; gt.len()];
    let mut pred_taken = vec![false; pred.len()];
    for (i, j, iou) in pairs {
        if gt_match[i].is_none() && !pred_taken[j] {
            gt_match[i] = Some((j, iou));
            pred_taken[j] = true;
        }
    }
    gt_match
}

fn image_rows(gt: &AnnotatedFingerphoto, pred: &AnnotatedFingerphoto) -> Vec<DetailRow> {
    match_fingers(&gt.fingers, &pred.fingers)
        .into_iter()
        .enumerate()
        .map(|(i, m)| {
            let g = &gt.fingers[i];
            let mut row = DetailRow {
                image: gt.image.clone(),
                gt_index: i,
                gt_label: g.label,
                pred_index: None,
                pred_label: None,
                iou: None,
                left: None,
                right: None,
                top: None,
                bottom: None,
                gt_theta_deg: g.bbox.theta_deg(),
                pred_theta_deg: None,
                angle_error_deg: None,
            };
            if let Some((j, iou)) = m {
                let p = &pred.fingers[j];
                let e = metrics::side_errors(&p.bbox, &g.bbox);
                row.pred_index = Some(j);
                row.pred_label = Some(p.label);
                row.iou = Some(iou);
                row.left = Some(e.left);
                row.right = Some(e.right);
                row.top = Some(e.top);
                row.bottom = Some(e.bottom);
                row.pred_theta_deg = Some(p.bbox.theta_deg());
                row.angle_error_deg = Some((g.bbox.theta_deg() - p.bbox.theta_deg()).abs());
            }
            row
        })
        .collect()
}

/// Recomputes every aggregate from detail rows.
pub fn summarize(rows: &[DetailRow], tolerance: f64) -> CliResult<EvaluationSummary> {
    let matched: Vec<&DetailRow> = rows.iter().filter(|r| r.pred_index.is_some()).collect();
    if matched.is_empty() {
        return Err(CliError::input(
            "no predicted fingerprint overlaps any ground-truth fingerprint",
        ));
    }
    let errors: Vec<SideErrors> = matched.iter().filter_map(|r| r.side_errors()).collect();
    let gt_angles: Vec<f64> = matched.iter().map(|r| r.gt_theta_deg).collect();
    let pred_angles: Vec<f64> = matched.iter().filter_map(|r| r.pred_theta_deg).collect();

    // One label sample per image, one slot per gt finger.
    let mut gt_slots: Vec<Vec<Option<FingerLabel>>> = Vec::new();
    let mut pred_slots: Vec<Vec<Option<FingerLabel>>> = Vec::new();
    let mut images = 0;
    let mut last: Option<&str> = None;
    for r in rows {
        if last != Some(r.image.as_str()) {
            gt_slots.push(Vec::new());
            pred_slots.push(Vec::new());
            images += 1;
            last = Some(&r.image);
        }
        gt_slots
            .last_mut()
            .expect("pushed above")
            .push(Some(r.gt_label));
        pred_slots
            .last_mut()
            .expect("pushed above")
            .push(r.pred_label);
    }

    let mae = metrics::mae(&errors)?;
    let (eap_mean_deg, eap_std_deg) = metrics::eap(&gt_angles, &pred_angles)?;
    let labels = metrics::label_accuracy(&gt_slots, &pred_slots)?;
    let nist_pass_rate = metrics::nist_tolerance_check(&errors, tolerance)?;
    Ok(EvaluationSummary {
        images,
        gt_fingerprints: rows.len(),
        matched: matched.len(),
        unmatched: rows.len() - matched.len(),
        mae,
        eap_mean_deg,
        eap_std_deg,
        hamming_loss: labels.hamming_loss,
        label_accuracy: labels.accuracy,
        tolerance_px: tolerance,
        nist_pass_rate,
    })
}

/// Evaluates predictions image by image in parallel; rows keep gt order.
pub fn evaluate(
    gt: &[AnnotatedFingerphoto],
    pred: &[AnnotatedFingerphoto],
    tolerance: f64,
) -> CliResult<EvaluationReport> {
    let by_id: HashMap<&str, &AnnotatedFingerphoto> = pred.iter().map(|p| (p.id(), p)).collect();
    if by_id.len() != pred.len() {
        return Err(CliError::input(
            "prediction file lists an image more than once",
        ));
    }
    for g in gt {
        if !by_id.contains_key(g.id()) {
            return Err(CliError::input(format!(
                "image `{}` has no prediction record",
                g.id()
            )));
        }
    }
    let gt_ids: std::collections::HashSet<&str> = gt.iter().map(|g| g.id()).collect();
    if gt_ids.len() != gt.len() {
        return Err(CliError::input(
            "ground-truth file lists an image more than once",
        ));
    }
    if let Some(extra) = pred.iter().find(|p| !gt_ids.contains(p.id())) {
        return Err(CliError::input(format!(
            "image `{}` has no ground-truth record",
            extra.id()
        )));
    }

    let rows: Vec<DetailRow> = gt
        .par_iter()
        .map(|g| image_rows(g, by_id[g.id()]))
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect();
    let summary = summarize(&rows, tolerance)?;
    Ok(EvaluationReport { summary, rows })
}
