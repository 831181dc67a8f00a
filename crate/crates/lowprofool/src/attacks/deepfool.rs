//! Iterative linearization baseline for the binary case.
//!
//! Each step treats the logit margin as locally linear and jumps to its
//! zero set; an overshoot factor pushes the candidate strictly across the
//! boundary, since landing exactly on it leaves the prediction at the
//! source class under the argmax tie-break.

use ndarray::{Array1, ArrayView1};

use super::{maybe_clip, AttackOutcome, AttackParams};
use crate::data::FeatureBounds;
use crate::error::{Error, Result};
use crate::importance::ImportanceVector;
use crate::model::Mlp;

/// Run the baseline on one sample. `v` plays no role in the attack
/// itself; it is only used to fill the outcome's perceptibility
/// diagnostic so outcomes are comparable across methods.
pub fn deep_fool(
    mlp: &Mlp,
    x: ArrayView1<f64>,
    t: u8,
    v: &ImportanceVector,
    params: &AttackParams,
    bounds: &FeatureBounds,
) -> Result<AttackOutcome> {
    params.validate()?;
    let s = mlp.predict(x)?;
    if s == t {
        return Err(Error::AlreadyTarget);
    }

    let overshoot = 1.0 + params.deepfool_overshoot;
    let mut r_tot: Array1<f64> = Array1::zeros(x.len());
    // linearization point; starts at the sample, then follows the
    // overshot clipped candidate
    let mut x_i = x.to_owned();

    for i in 1..=params.max_iter {
        let (margin, w) = mlp.logit_margin_gradient(x_i.view(), s, t)?;
        let w_norm_sq: f64 = w.iter().map(|c| c * c).sum();
        if w_norm_sq == 0.0 {
            log::warn!(
                "deepfool: zero margin gradient at iteration {i}; \
                 sample is in a dead gradient region"
            );
            let x_final = maybe_clip(&x + &(overshoot * &r_tot), bounds, params.clip_mode);
            return AttackOutcome::build(x, s, t, x_final, false, i, v, params.norm_p);
        }
        // minimal step onto the linearized boundary: (|m| / ‖w‖²) w,
        // signed toward the target side
        r_tot.scaled_add(margin.abs() / w_norm_sq, &w);

        let candidate = maybe_clip(&x + &(overshoot * &r_tot), bounds, params.clip_mode);
        if mlp.predict(candidate.view())? == t {
            return AttackOutcome::build(x, s, t, candidate, true, i, v, params.norm_p);
        }
        x_i = candidate;
    }

    let x_final = maybe_clip(&x + &(overshoot * &r_tot), bounds, params.clip_mode);
    AttackOutcome::build(x, s, t, x_final, false, params.max_iter, v, params.norm_p)
}
