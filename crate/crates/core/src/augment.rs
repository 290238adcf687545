//! Rotation augmentation of fingerphotos and their annotations.
//!
//! Images are rotated about their center onto a canvas that just holds the
//! rotated frame, so no content is cropped. Boxes go through the same
//! transform, which keeps annotations aligned with pixels.

use std::path::{Path, PathBuf};

use image::{DynamicImage, ExtendedColorType, ImageFormat};
use rayon::prelude::*;

use crate::dataio::{AnnotatedFingerphoto, Finger, Provenance};
use crate::error::{Error, Result};
use crate::geom::{deg_to_rad, rotate_point, sin_cos_deg, OrientedBox, Point};

/// Ten evenly spaced angles covering −90°..90°.
pub const DEFAULT_ANGLES: [f64; 10] = [
    -90.0, -70.0, -50.0, -30.0, -10.0, 10.0, 30.0, 50.0, 70.0, 90.0,
];

/// Mid-gray.
pub const DEFAULT_FILL: u8 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channels {
    Gray,
    Rgb,
}

impl Channels {
    pub fn count(self) -> usize {
        match self {
            Channels::Gray => 1,
            Channels::Rgb => 3,
        }
    }
}

/// 8-bit raster, row-major, channels interleaved.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    channels: Channels,
    data: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, channels: Channels, data: Vec<u8>) -> Result<Self> {
        let expected = width as usize * height as usize * channels.count();
        if data.len() != expected {
            return Err(Error::invalid(format!(
                "{width}x{height} image with {} channel(s) needs {expected} bytes, got {}",
                channels.count(),
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn filled(width: u32, height: u32, channels: Channels, value: u8) -> Self {
        let len = width as usize * height as usize * channels.count();
        Self {
            width,
            height,
            channels,
            data: vec![value; len],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }
    pub fn height(&self) -> u32 {
        self.height
    }
    pub fn channels(&self) -> Channels {
        self.channels
    }
    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: u32, y: u32) -> &[u8] {
        let n = self.channels.count();
        let start = (y as usize * self.width as usize + x as usize) * n;
        &self.data[start..start + n]
    }

    fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [u8] {
        let n = self.channels.count();
        let start = (y as usize * self.width as usize + x as usize) * n;
        &mut self.data[start..start + n]
    }
}

/// Rotation about the source center followed by the shift onto the expanded canvas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationTransform {
    pub sin: f64,
    pub cos: f64,
    pub src_center: Point,
    pub dst_center: Point,
    pub out_width: u32,
    pub out_height: u32,
}

impl RotationTransform {
    pub fn new(width: u32, height: u32, alpha_deg: f64) -> Self {
        let (sin, cos) = sin_cos_deg(alpha_deg);
        let (w, h) = (width as f64, height as f64);
        // Tolerance absorbs roundoff on exact integer extents.
        let extent = |v: f64| ((v - 1e-9).ceil() as u32).max(1);
        let out_width = extent(w * cos.abs() + h * sin.abs());
        let out_height = extent(w * sin.abs() + h * cos.abs());
        Self {
            sin,
            cos,
            src_center: Point::new(w / 2.0, h / 2.0),
            dst_center: Point::new(out_width as f64 / 2.0, out_height as f64 / 2.0),
            out_width,
            out_height,
        }
    }

    pub fn forward(&self, p: Point) -> Point {
        rotate_point(p, self.src_center, self.sin, self.cos) + (self.dst_center - self.src_center)
    }

    pub fn inverse(&self, q: Point) -> Point {
        rotate_point(
            q - (self.dst_center - self.src_center),
            self.src_center,
            -self.sin,
            self.cos,
        )
    }
}

/// Rotates counter-clockwise by `alpha_deg` degrees about the image center.
///
/// Multiples of 90° are exact index permutations; other angles are
/// resampled bilinearly and pixels outside the source take `fill`.
pub fn rotate_image(img: &RasterImage, alpha_deg: f64, fill: u8) -> Result<RasterImage> {
    if !(-180.0..=180.0).contains(&alpha_deg) {
        return Err(Error::invalid(format!(
            "rotation angle {alpha_deg} outside [-180, 180]"
        )));
    }
    let t = RotationTransform::new(img.width, img.height, alpha_deg);
    let (w, h) = (img.width, img.height);
    let mut out = RasterImage::filled(t.out_width, t.out_height, img.channels, fill);

    if alpha_deg % 90.0 == 0.0 {
        for y in 0..h {
            for x in 0..w {
                let (nx, ny) = match (t.sin as i32, t.cos as i32) {
                    (0, 1) => (x, y),
                    (1, 0) => (y, w - 1 - x),
                    (0, -1) => (w - 1 - x, h - 1 - y),
                    _ => (h - 1 - y, x),
                };
                out.pixel_mut(nx, ny).copy_from_slice(img.pixel(x, y));
            }
        }
        return Ok(out);
    }

    let n = img.channels.count();
    for y in 0..t.out_height {
        for x in 0..t.out_width {
            let src = t.inverse(Point::new(x as f64 + 0.5, y as f64 + 0.5));
            if !(0.0..=w as f64).contains(&src.x) || !(0.0..=h as f64).contains(&src.y) {
                continue;
            }
            let sx = (src.x - 0.5).clamp(0.0, (w - 1) as f64);
            let sy = (src.y - 0.5).clamp(0.0, (h - 1) as f64);
            let (x0, y0) = (sx.floor() as u32, sy.floor() as u32);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
            let dst = out.pixel_mut(x, y);
            for (c, d) in dst.iter_mut().enumerate().take(n) {
                let at = |px: u32, py: u32| img.pixel(px, py)[c] as f64;
                let top = at(x0, y0) * (1.0 - fx) + at(x1, y0) * fx;
                let bottom = at(x0, y1) * (1.0 - fx) + at(x1, y1) * fx;
                let v = top * (1.0 - fy) + bottom * fy;
                *d = v.round().clamp(0.0, 255.0) as u8;
            }
        }
    }
    Ok(out)
}

/// Maps a box through the image rotation.
pub fn rotate_box(b: &OrientedBox, t: &RotationTransform, alpha_deg: f64) -> OrientedBox {
    let c = t.forward(b.center());
    OrientedBox::new(c.x, c.y, b.w(), b.h(), b.theta() + deg_to_rad(alpha_deg))
        .expect("rigid motion keeps a valid box valid")
}

/// File name of an augmented copy: `<source_id>_rot<angle>.<ext>`.
pub fn augmented_name(source_id: &str, alpha_deg: f64, extension: &str) -> String {
    format!("{source_id}_rot{alpha_deg}.{extension}")
}

/// Rotates every box of a record and marks it as augmented.
pub fn rotate_annotation(record: &AnnotatedFingerphoto, alpha_deg: f64) -> AnnotatedFingerphoto {
    let t = RotationTransform::new(record.width, record.height, alpha_deg);
    let extension = Path::new(&record.image)
        .extension()
        .and_then(|e| e.to_str())
        .unwrap_or("pgm");
    AnnotatedFingerphoto {
        image: augmented_name(&record.source_id, alpha_deg, extension),
        width: t.out_width,
        height: t.out_height,
        hand: record.hand,
        fingers: record
            .fingers
            .iter()
            .map(|f| Finger {
                label: f.label,
                bbox: rotate_box(&f.bbox, &t, alpha_deg),
            })
            .collect(),
        provenance: Provenance::Augmented,
        source_id: record.source_id.clone(),
        augment_angle: alpha_deg,
    }
}

fn check_angles(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::invalid("augmentation needs at least one angle"));
    }
    if let Some(a) = angles.iter().find(|a| !(-90.0..=90.0).contains(*a)) {
        return Err(Error::invalid(format!(
            "augmentation angle {a} outside [-90, 90]"
        )));
    }
    Ok(())
}

/// One rotated record and raster per angle, in angle order.
pub fn augment_record(
    record: &AnnotatedFingerphoto,
    image: &RasterImage,
    angles: &[f64],
    fill: u8,
) -> Result<Vec<(AnnotatedFingerphoto, RasterImage)>> {
    check_angles(angles)?;
    if record.provenance != Provenance::Bonafide {
        return Err(Error::Validation {
            record: record.image.clone(),
            message: "only bonafide records can be augmented".into(),
        });
    }
    if (image.width, image.height) != (record.width, record.height) {
        return Err(Error::Validation {
            record: record.image.clone(),
            message: format!(
                "annotation says {}x{} but image is {}x{}",
                record.width, record.height, image.width, image.height
            ),
        });
    }
    angles
        .iter()
        .map(|&a| Ok((rotate_annotation(record, a), rotate_image(image, a, fill)?)))
        .collect()
}

/// Rotates every bonafide record by every angle, writing rasters into
/// `out_dir`. Returns the augmented records in input order, then angle order.
pub fn augment_dataset(
    records: &[AnnotatedFingerphoto],
    images_dir: &Path,
    angles: &[f64],
    out_dir: &Path,
    fill: u8,
) -> Result<Vec<AnnotatedFingerphoto>> {
    check_angles(angles)?;
    let per_record: Vec<Result<Vec<AnnotatedFingerphoto>>> = records
        .par_iter()
        .map(|record| {
            let image = read_image(&images_dir.join(&record.image))?;
            augment_record(record, &image, angles, fill)?
                .into_iter()
                .map(|(rec, img)| {
                    write_image(&out_dir.join(&rec.image), &img)?;
                    Ok(rec)
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(records.len() * angles.len());
    for batch in per_record {
        out.extend(batch?);
    }
    Ok(out)
}

pub fn read_image(path: &Path) -> Result<RasterImage> {
    let decoded = image::open(path).map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(path, e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })?;
    let (width, height) = (decoded.width(), decoded.height());
    let (channels, data) = match decoded {
        DynamicImage::ImageLuma8(buf) => (Channels::Gray, buf.into_raw()),
        other => (Channels::Rgb, other.into_rgb8().into_raw()),
    };
    RasterImage::new(width, height, channels, data)
}

/// Writes binary PGM (gray) or PPM (RGB).
pub fn write_image(path: &Path, img: &RasterImage) -> Result<()> {
    let color = match img.channels {
        Channels::Gray => ExtendedColorType::L8,
        Channels::Rgb => ExtendedColorType::Rgb8,
    };
    image::save_buffer_with_format(
        path,
        &img.data,
        img.width,
        img.height,
        color,
        ImageFormat::Pnm,
    )
    .map_err(|source| match source {
        image::ImageError::IoError(e) => Error::io(PathBuf::from(path), e),
        source => Error::Image {
            path: path.to_path_buf(),
            source,
        },
    })
}
