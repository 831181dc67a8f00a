//! Single-step sign baseline: one fixed-size move along the coordinate
//! signs of the loss gradient toward the target class.

use ndarray::ArrayView1;

use super::{maybe_clip, sign0, AttackOutcome, AttackParams};
use crate::data::FeatureBounds;
use crate::error::{Error, Result};
use crate::importance::ImportanceVector;
use crate::model::Mlp;

/// Run the baseline on one sample: `x' = clip(x - eps * sign(grad))` with
/// the gradient of the loss toward `t`. As for the other methods, `v` only
/// feeds the outcome's perceptibility diagnostic.
pub fn fgsm(
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

    let grad = mlp.input_gradient(x, t)?;
    let step = grad.mapv(|g| -params.fgsm_epsilon * sign0(g));
    let candidate = maybe_clip(&x + &step, bounds, params.clip_mode);
    let succeeded = mlp.predict(candidate.view())? == t;
    AttackOutcome::build(x, s, t, candidate, succeeded, 1, v, params.norm_p)
}
