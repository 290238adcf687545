//! Oriented anchor grids and anchor-to-ground-truth assignment.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{descending_order, rotated_iou, rotated_nms, OrientedBox};

/// Number of proposals kept after suppression unless the caller asks otherwise.
pub const DEFAULT_PROPOSAL_COUNT: usize = 1000;

/// Anchor shapes placed at every feature-map cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnchorConfig {
    /// Radians, each within (−π/2, π/2].
    pub orientations: Vec<f64>,
    /// Height-to-width ratios.
    pub aspect_ratios: Vec<f64>,
    /// Square root of the anchor area, in pixels.
    pub scales: Vec<f64>,
    /// Feature-map cell size in image pixels.
    pub stride: f64,
    pub positive_iou: f64,
    pub negative_iou: f64,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            orientations: vec![
                -PI / 4.0,
                -PI / 6.0,
                -PI / 12.0,
                0.0,
                PI / 12.0,
                PI / 6.0,
                PI / 4.0,
            ],
            // 1:1, 1:2, 2:1 as h:w
            aspect_ratios: vec![1.0, 0.5, 2.0],
            scales: vec![128.0, 256.0, 512.0],
            stride: 16.0,
            positive_iou: 0.7,
            negative_iou: 0.3,
        }
    }
}

impl AnchorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.orientations.is_empty() || self.aspect_ratios.is_empty() || self.scales.is_empty() {
            return Err(Error::invalid(
                "anchor config needs at least one orientation, aspect ratio and scale",
            ));
        }
        if let Some(t) = self
            .orientations
            .iter()
            .find(|t| !t.is_finite() || **t <= -FRAC_PI_2 || **t > FRAC_PI_2)
        {
            return Err(Error::invalid(format!(
                "orientation {t} outside (-pi/2, pi/2]"
            )));
        }
        if let Some(r) = self
            .aspect_ratios
            .iter()
            .find(|r| !r.is_finite() || **r <= 0.0)
        {
            return Err(Error::invalid(format!("aspect ratio {r} must be positive")));
        }
        if let Some(s) = self.scales.iter().find(|s| !s.is_finite() || **s <= 0.0) {
            return Err(Error::invalid(format!("scale {s} must be positive")));
        }
        if !self.stride.is_finite() || self.stride <= 0.0 {
            return Err(Error::invalid(format!(
                "stride {} must be positive",
                self.stride
            )));
        }
        if !(0.0 <= self.negative_iou
            && self.negative_iou < self.positive_iou
            && self.positive_iou <= 1.0)
        {
            return Err(Error::invalid(format!(
                "need 0 <= negative_iou < positive_iou <= 1, got {} and {}",
                self.negative_iou, self.positive_iou
            )));
        }
        Ok(())
    }

    /// Anchors per cell: orientations × scales × ratios.
    pub fn anchors_per_cell(&self) -> usize {
        self.orientations.len() * self.scales.len() * self.aspect_ratios.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Anchor {
    pub bbox: OrientedBox,
    pub row: usize,
    pub col: usize,
    /// `(orientation · n_scales + scale) · n_ratios + ratio`.
    pub config_index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AnchorKind {
    Positive,
    Negative,
    Neutral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorLabel {
    pub kind: AnchorKind,
    /// Best-overlapping ground truth; always set for positives, never for negatives.
    pub matched_gt: Option<usize>,
    pub max_iou: f64,
}

/// Anchor width and height for a scale and an h:w ratio, preserving area = scale².
pub fn anchor_extent(scale: f64, ratio: f64) -> (f64, f64) {
    let root = ratio.sqrt();
    (scale / root, scale * root)
}

/// Lays out `rows × cols × K` anchors in row-major cell order, then
/// orientation, scale and ratio.
pub fn generate_anchors(rows: usize, cols: usize, config: &AnchorConfig) -> Result<Vec<Anchor>> {
    if rows == 0 || cols == 0 {
        return Err(Error::invalid(format!(
            "grid must be at least 1x1, got {rows}x{cols}"
        )));
    }
    config.validate()?;

    let mut shapes = Vec::with_capacity(config.anchors_per_cell());
    for &theta in &config.orientations {
        for &scale in &config.scales {
            for &ratio in &config.aspect_ratios {
                let (w, h) = anchor_extent(scale, ratio);
                shapes.push((w, h, theta));
            }
        }
    }

    let mut anchors = Vec::with_capacity(rows * cols * shapes.len());
    for row in 0..rows {
        for col in 0..cols {
            let cx = (col as f64 + 0.5) * config.stride;
            let cy = (row as f64 + 0.5) * config.stride;
            for (config_index, &(w, h, theta)) in shapes.iter().enumerate() {
                anchors.push(Anchor {
                    bbox: OrientedBox::new(cx, cy, w, h, theta)?,
                    row,
                    col,
                    config_index,
                });
            }
        }
    }
    Ok(anchors)
}

/// Assigns positive / negative / neutral labels by rotated IoU.
///
/// Besides the threshold rule, the best anchor of each ground-truth box is
/// forced positive when it overlaps that box at all.
pub fn label_anchors(
    anchors: &[Anchor],
    gt: &[OrientedBox],
    config: &AnchorConfig,
) -> Result<Vec<AnchorLabel>> {
    config.validate()?;

    // Row-major IoU matrix, one row per anchor.
    let ious: Vec<Vec<f64>> = anchors
        .par_iter()
        .map(|a| gt.iter().map(|g| rotated_iou(&a.bbox, g)).collect())
        .collect();

    let mut labels: Vec<AnchorLabel> = ious
        .iter()
        .map(|row| {
            let best = argmax(row);
            let max_iou = best.map_or(0.0, |j| row[j]);
            let kind = if max_iou >= config.positive_iou {
                AnchorKind::Positive
            } else if max_iou < config.negative_iou {
                AnchorKind::Negative
            } else {
                AnchorKind::Neutral
            };
            AnchorLabel {
                kind,
                matched_gt: match kind {
                    AnchorKind::Negative => None,
                    _ => best,
                },
                max_iou,
            }
        })
        .collect();

    for j in 0..gt.len() {
        let column: Vec<f64> = ious.iter().map(|row| row[j]).collect();
        if let Some(i) = argmax(&column) {
            if column[i] > 0.0 {
                let label = &mut labels[i];
                label.kind = AnchorKind::Positive;
                label.matched_gt = argmax(&ious[i]);
            }
        }
    }
    Ok(labels)
}

/// First index of the maximum value.
fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    /// Position in the input list.
    pub index: usize,
    pub bbox: OrientedBox,
    pub objectness: f64,
}

/// Suppresses overlapping boxes, then keeps the `k` highest-objectness survivors.
pub fn select_top_proposals(
    boxes: &[OrientedBox],
    objectness: &[f64],
    k: usize,
    nms_iou: f64,
) -> Result<Vec<Proposal>> {
    let kept = rotated_nms(boxes, objectness, nms_iou)?;
    let survivor_scores: Vec<f64> = kept.iter().map(|&i| objectness[i]).collect();
    Ok(descending_order(&survivor_scores)
        .into_iter()
        .take(k)
        .map(|pos| {
            let index = kept[pos];
            Proposal {
                index,
                bbox: boxes[index],
                objectness: objectness[index],
            }
        })
        .collect())
}
