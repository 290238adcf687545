//! Box regression targets and the proposal-stage losses.
//!
//! Gradients are written out by hand and verified against central
//! differences with [`gradient_check`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::OrientedBox;

/// Probabilities are clamped to `[ε, 1 − ε]` before taking logarithms.
pub const PROB_EPSILON: f64 = 1e-12;

pub const DEFAULT_LAMBDA: f64 = 1.0;

pub const DEFAULT_FD_STEP: f64 = 1e-6;

/// Denominator floor for relative gradient error, so that gradients that are
/// zero up to roundoff do not blow the ratio up.
const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

/// Offsets of a box relative to an anchor.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RegressionTarget {
    pub tx: f64,
    pub ty: f64,
    /// log(w / w_a)
    pub tw: f64,
    /// log(h / h_a)
    pub th: f64,
    /// θ − θ_a in radians, not wrapped.
    pub ttheta: f64,
}

impl RegressionTarget {
    pub const ZERO: RegressionTarget = RegressionTarget {
        tx: 0.0,
        ty: 0.0,
        tw: 0.0,
        th: 0.0,
        ttheta: 0.0,
    };

    pub fn new(tx: f64, ty: f64, tw: f64, th: f64, ttheta: f64) -> Self {
        Self {
            tx,
            ty,
            tw,
            th,
            ttheta,
        }
    }

    /// Components in (x, y, w, h, θ) order.
    pub fn to_array(self) -> [f64; 5] {
        [self.tx, self.ty, self.tw, self.th, self.ttheta]
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }
}

/// Foreground/background label of an anchor (u = 1 / u = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnchorClass {
    Background,
    Foreground,
}

impl AnchorClass {
    pub fn u(self) -> f64 {
        match self {
            AnchorClass::Background => 0.0,
            AnchorClass::Foreground => 1.0,
        }
    }
}

/// Encodes raw box parameters `(cx, cy, w, h, θ)` against an anchor.
pub fn encode_params(params: [f64; 5], anchor: &OrientedBox) -> RegressionTarget {
    let [x, y, w, h, theta] = params;
    RegressionTarget {
        tx: (x - anchor.cx()) / anchor.w(),
        ty: (y - anchor.cy()) / anchor.h(),
        tw: (w / anchor.w()).ln(),
        th: (h / anchor.h()).ln(),
        ttheta: theta - anchor.theta(),
    }
}

pub fn encode(bbox: &OrientedBox, anchor: &OrientedBox) -> RegressionTarget {
    encode_params(
        [bbox.cx(), bbox.cy(), bbox.w(), bbox.h(), bbox.theta()],
        anchor,
    )
}

/// Inverse of [`encode`]; the resulting angle is normalized.
pub fn decode(t: &RegressionTarget, anchor: &OrientedBox) -> Result<OrientedBox> {
    let w = anchor.w() * t.tw.exp();
    let h = anchor.h() * t.th.exp();
    if !w.is_finite() || !h.is_finite() || w <= 0.0 || h <= 0.0 {
        return Err(Error::Overflow(format!(
            "decoded extents w={w} h={h} from tw={} th={}",
            t.tw, t.th
        )));
    }
    let cx = anchor.cx() + t.tx * anchor.w();
    let cy = anchor.cy() + t.ty * anchor.h();
    OrientedBox::new(cx, cy, w, h, anchor.theta() + t.ttheta)
        .map_err(|e| Error::Overflow(e.to_string()))
}

pub fn smooth_l1(x: f64) -> f64 {
    let a = x.abs();
    if a < 1.0 {
        0.5 * x * x
    } else {
        a - 0.5
    }
}

pub fn smooth_l1_grad(x: f64) -> f64 {
    if x.abs() < 1.0 {
        x
    } else {
        x.signum()
    }
}

/// `u · Σ smooth_l1(t*_i − t_i)` over the five components.
pub fn regression_loss(t: &RegressionTarget, tstar: &RegressionTarget, u: AnchorClass) -> f64 {
    if u == AnchorClass::Background {
        return 0.0;
    }
    t.to_array()
        .iter()
        .zip(tstar.to_array())
        .map(|(ti, si)| smooth_l1(si - ti))
        .sum()
}

/// Gradient of [`regression_loss`] with respect to the predicted offsets `t`.
pub fn regression_loss_grad(
    t: &RegressionTarget,
    tstar: &RegressionTarget,
    u: AnchorClass,
) -> [f64; 5] {
    let t = t.to_array();
    let s = tstar.to_array();
    std::array::from_fn(|i| -u.u() * smooth_l1_grad(s[i] - t[i]))
}

/// Regression loss of a predicted box against a ground-truth box, both
/// encoded relative to `anchor`. `pred` holds raw `(cx, cy, w, h, θ)`.
pub fn box_regression_loss(pred: [f64; 5], gt: &OrientedBox, anchor: &OrientedBox) -> f64 {
    regression_loss(
        &encode_params(pred, anchor),
        &encode(gt, anchor),
        AnchorClass::Foreground,
    )
}

/// Chain rule through the encoding: ∂L/∂(cx, cy, w, h, θ) of [`box_regression_loss`].
pub fn box_regression_grad(pred: [f64; 5], gt: &OrientedBox, anchor: &OrientedBox) -> [f64; 5] {
    let dt = regression_loss_grad(
        &encode_params(pred, anchor),
        &encode(gt, anchor),
        AnchorClass::Foreground,
    );
    // ∂t/∂params is diagonal.
    let dt_dparam = [
        1.0 / anchor.w(),
        1.0 / anchor.h(),
        1.0 / pred[2],
        1.0 / pred[3],
        1.0,
    ];
    std::array::from_fn(|i| dt[i] * dt_dparam[i])
}

fn clamp_probability(p: f64) -> f64 {
    p.clamp(PROB_EPSILON, 1.0 - PROB_EPSILON)
}

/// Binary cross-entropy `−u·log p − (1−u)·log(1−p)` with clamped `p`.
pub fn classification_loss(p: f64, u: AnchorClass) -> f64 {
    let p = clamp_probability(p);
    match u {
        AnchorClass::Foreground => -p.ln(),
        AnchorClass::Background => -(1.0 - p).ln(),
    }
}

/// ∂/∂p of [`classification_loss`]; zero where the clamp is active.
pub fn classification_loss_grad(p: f64, u: AnchorClass) -> f64 {
    if p <= PROB_EPSILON || p >= 1.0 - PROB_EPSILON {
        return 0.0;
    }
    match u {
        AnchorClass::Foreground => -1.0 / p,
        AnchorClass::Background => 1.0 / (1.0 - p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub cls: f64,
    pub reg: f64,
    /// `cls + lambda · u · reg`
    pub total: f64,
    pub lambda: f64,
    pub u: AnchorClass,
}

pub fn orpn_loss(
    p: f64,
    u: AnchorClass,
    t: &RegressionTarget,
    tstar: &RegressionTarget,
    lambda: f64,
) -> LossBreakdown {
    let cls = classification_loss(p, u);
    let reg = regression_loss(t, tstar, u);
    LossBreakdown {
        cls,
        reg,
        total: cls + lambda * u.u() * reg,
        lambda,
        u,
    }
}

/// Partials of the combined loss with respect to the network outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrpnGradient {
    pub p: f64,
    pub t: [f64; 5],
}

pub fn orpn_loss_grad(
    p: f64,
    u: AnchorClass,
    t: &RegressionTarget,
    tstar: &RegressionTarget,
    lambda: f64,
) -> OrpnGradient {
    let dreg = regression_loss_grad(t, tstar, u);
    OrpnGradient {
        p: classification_loss_grad(p, u),
        t: dreg.map(|d| lambda * u.u() * d),
    }
}

/// True when `residual` is within `10 · step` of the smooth-L1 kink at |x| = 1.
pub fn near_smooth_l1_kink(residual: f64, step: f64) -> bool {
    (residual.abs() - 1.0).abs() < 10.0 * step
}

/// Maximum relative discrepancy between `analytic` and central differences of `loss`.
pub fn gradient_check<F, G>(loss: F, analytic: G, point: &[f64], step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    gradient_check_excluding(loss, analytic, point, step, |_| false)
}

/// Like [`gradient_check`], skipping coordinates for which `exclude(i)` holds.
pub fn gradient_check_excluding<F, G, E>(
    loss: F,
    analytic: G,
    point: &[f64],
    step: f64,
    exclude: E,
) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
    E: Fn(usize) -> bool,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::invalid(format!(
            "finite-difference step {step} must be positive"
        )));
    }
    let grad = analytic(point);
    if grad.len() != point.len() {
        return Err(Error::invalid(format!(
            "analytic gradient has {} components for a {}-dimensional point",
            grad.len(),
            point.len()
        )));
    }
    if let Some(g) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::Domain(format!(
            "analytic gradient component {g} is not finite"
        )));
    }

    let mut probe = point.to_vec();
    let mut worst: f64 = 0.0;
    for i in 0..point.len() {
        if exclude(i) {
            continue;
        }
        probe[i] = point[i] + step;
        let up = loss(&probe);
        probe[i] = point[i] - step;
        let down = loss(&probe);
        probe[i] = point[i];
        if !up.is_finite() || !down.is_finite() {
            return Err(Error::Domain(format!(
                "loss is not finite around coordinate {i} = {}",
                point[i]
            )));
        }
        let numeric = (up - down) / (2.0 * step);
        let denom = grad[i].abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
        worst = worst.max((grad[i] - numeric).abs() / denom);
    }
    Ok(worst)
}

/// Verifies [`orpn_loss_grad`] over `(p, t_x, t_y, t_w, t_h, t_θ)`, skipping
/// components sitting on the smooth-L1 kink or the probability clamp.
pub fn check_orpn_gradient(
    p: f64,
    u: AnchorClass,
    t: &RegressionTarget,
    tstar: &RegressionTarget,
    lambda: f64,
    step: f64,
) -> Result<f64> {
    let mut point = vec![p];
    point.extend(t.to_array());
    let unpack = |x: &[f64]| {
        (
            x[0],
            RegressionTarget::from_array([x[1], x[2], x[3], x[4], x[5]]),
        )
    };
    let residuals: Vec<f64> = tstar
        .to_array()
        .iter()
        .zip(t.to_array())
        .map(|(s, ti)| s - ti)
        .collect();
    gradient_check_excluding(
        |x| {
            let (p, t) = unpack(x);
            orpn_loss(p, u, &t, tstar, lambda).total
        },
        |x| {
            let (p, t) = unpack(x);
            let g = orpn_loss_grad(p, u, &t, tstar, lambda);
            let mut out = vec![g.p];
            out.extend(g.t);
            out
        },
        &point,
        step,
        |i| {
            if i == 0 {
                p - step <= PROB_EPSILON || p + step >= 1.0 - PROB_EPSILON
            } else {
                near_smooth_l1_kink(residuals[i - 1], step)
            }
        },
    )
}
