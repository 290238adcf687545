//! Oriented-box toolkit for contactless fingertip segmentation.
//!
//! The crate covers everything around a rotated-box segmenter except the
//! network itself:
//!
//! 1. **geom** – oriented rectangles, exact rotated IoU via convex clipping,
//!    rotated non-maximum suppression.
//! 2. **anchors** – oriented anchor grids, positive/negative/neutral anchor
//!    assignment, top-k proposal selection.
//! 3. **coding** – regression target encoding/decoding, smooth-L1 and
//!    cross-entropy losses with hand-written gradients and a finite
//!    difference checker.
//! 4. **metrics** – per-side localization error, MAE, angle error, Hamming
//!    label accuracy, ROC / TAR / FAR and distribution summaries.
//! 5. **dataio** – annotation records, finger label taxonomy, leakage-free
//!    splits and k-fold generation.
//! 6. **augment** – rotation of rasters and their annotations.
//!
//! Coordinates are image pixels: origin at the top-left corner, x to the
//! right, y down. Angles are counter-clockwise as seen on screen.

pub mod anchors;
pub mod augment;
pub mod coding;
pub mod dataio;
pub mod error;
pub mod geom;
pub mod metrics;

pub use error::{Error, Result};
pub use geom::{ConvexPolygon, OrientedBox, Point};
