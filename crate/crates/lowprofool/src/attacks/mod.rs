//! Gradient-based evasion attacks with box-constraint clipping.
//!
//! Three methods share one outcome type: the importance-weighted attack
//! (the main subject of this crate), an iterative linearization baseline
//! and a single-step sign baseline. All operate in scaled feature space
//! against a trained [`Mlp`](crate::model::Mlp).

mod deepfool;
mod fgsm;
mod lowprofool;

pub use deepfool::deep_fool;
pub use fgsm::fgsm;
pub use lowprofool::{low_pro_fool, low_pro_fool_traced, IterateRecord};

use ndarray::{Array1, ArrayView1};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FeatureBounds};
use crate::error::{Error, Result};
use crate::importance::ImportanceVector;
use crate::model::Mlp;

/// Whether iterates are projected into feature bounds after every step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClipMode {
    #[default]
    PerStep,
    None,
}

/// Attack method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LowProFool,
    DeepFool,
    Fgsm,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::LowProFool, Method::DeepFool, Method::Fgsm];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::LowProFool => "lowprofool",
            Method::DeepFool => "deepfool",
            Method::Fgsm => "fgsm",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "lowprofool" => Ok(Method::LowProFool),
            "deepfool" => Ok(Method::DeepFool),
            "fgsm" => Ok(Method::Fgsm),
            other => Err(Error::Param(format!("unknown attack method `{other}`"))),
        }
    }
}

/// Shared attack hyperparameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AttackParams {
    /// Trade-off factor between class change and perceptibility.
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Gradient step scale.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Iteration budget N.
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    /// Norm order p of the weighted perceptibility norm.
    #[serde(default = "default_norm_p")]
    pub norm_p: f64,
    /// Step size of the single-step sign attack; 0 is allowed and yields
    /// the identity perturbation.
    #[serde(default = "default_fgsm_epsilon")]
    pub fgsm_epsilon: f64,
    /// Multiplier (1 + overshoot) applied to the linearization steps so the
    /// iterate strictly crosses the boundary instead of landing on it.
    #[serde(default = "default_overshoot")]
    pub deepfool_overshoot: f64,
    #[serde(default)]
    pub clip_mode: ClipMode,
}

fn default_lambda() -> f64 {
    8.5
}
fn default_alpha() -> f64 {
    0.001
}
fn default_max_iter() -> usize {
    2000
}
fn default_norm_p() -> f64 {
    2.0
}
fn default_fgsm_epsilon() -> f64 {
    0.1
}
fn default_overshoot() -> f64 {
    0.02
}

impl Default for AttackParams {
    fn default() -> AttackParams {
        AttackParams {
            lambda: default_lambda(),
            alpha: default_alpha(),
            max_iter: default_max_iter(),
            norm_p: default_norm_p(),
            fgsm_epsilon: default_fgsm_epsilon(),
            deepfool_overshoot: default_overshoot(),
            clip_mode: ClipMode::default(),
        }
    }
}

impl AttackParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::Param("max_iter must be at least 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::Param("alpha must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Param("lambda must be nonnegative".into()));
        }
        if !(self.norm_p >= 1.0 && self.norm_p.is_finite()) {
            return Err(Error::Param("norm_p must be at least 1".into()));
        }
        if !(self.fgsm_epsilon >= 0.0 && self.fgsm_epsilon.is_finite()) {
            return Err(Error::Param("fgsm_epsilon must be nonnegative".into()));
        }
        if !(self.deepfool_overshoot >= 0.0 && self.deepfool_overshoot.is_finite()) {
            return Err(Error::Param(
                "deepfool_overshoot must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Result of attacking one sample.
#[derive(Debug, Clone)]
pub struct AttackOutcome {
    pub x_orig: Array1<f64>,
    pub source_label: u8,
    pub target_label: u8,
    pub succeeded: bool,
    /// The adversarial point, present only on success.
    pub x_adv: Option<Array1<f64>>,
    /// Effective perturbation: `x_adv - x_orig` on success, the final
    /// iterate's displacement otherwise (diagnostic).
    pub r: Array1<f64>,
    pub iterations_used: usize,
    /// Perceptibility of `r` under the importance weights.
    pub d_v_value: f64,
    pub l2_norm: f64,
}

impl AttackOutcome {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn build(
        x_orig: ArrayView1<f64>,
        source_label: u8,
        target_label: u8,
        x_final: Array1<f64>,
        succeeded: bool,
        iterations_used: usize,
        v: &ImportanceVector,
        norm_p: f64,
    ) -> Result<AttackOutcome> {
        let r = &x_final - &x_orig;
        let d_v_value = perceptibility(r.view(), v, norm_p)?;
        let l2_norm = r.iter().map(|c| c * c).sum::<f64>().sqrt();
        Ok(AttackOutcome {
            x_orig: x_orig.to_owned(),
            source_label,
            target_label,
            succeeded,
            x_adv: succeeded.then_some(x_final),
            r,
            iterations_used,
            d_v_value,
            l2_norm,
        })
    }
}

/// One line of the per-sample outcomes JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub sample_index: usize,
    pub method: Method,
    pub succeeded: bool,
    pub iterations: usize,
    pub l2_norm: f64,
    pub d_v: f64,
    pub x_adv: Option<Vec<f64>>,
}

impl OutcomeRecord {
    pub fn from_outcome(
        sample_index: usize,
        method: Method,
        outcome: &AttackOutcome,
    ) -> OutcomeRecord {
        OutcomeRecord {
            sample_index,
            method,
            succeeded: outcome.succeeded,
            iterations: outcome.iterations_used,
            l2_norm: outcome.l2_norm,
            d_v: outcome.d_v_value,
            x_adv: outcome.x_adv.as_ref().map(|x| x.to_vec()),
        }
    }
}

fn weighted_p_norm(r: ArrayView1<f64>, v: &[f64], p: f64) -> f64 {
    let sum: f64 = r
        .iter()
        .zip(v)
        .map(|(&rj, &vj)| (rj.abs() * vj).powf(p))
        .sum();
    sum.powf(1.0 / p)
}

/// Perceptibility measure: squared p-norm of the importance-weighted
/// perturbation.
pub fn perceptibility(r: ArrayView1<f64>, v: &ImportanceVector, p: f64) -> Result<f64> {
    if r.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: v.len(),
            actual: r.len(),
        });
    }
    let norm = weighted_p_norm(r, &v.v, p);
    Ok(norm * norm)
}

/// Project each coordinate into its `[lo, hi]` interval.
pub fn clip_to_bounds(x: ArrayView1<f64>, bounds: &FeatureBounds) -> Array1<f64> {
    Array1::from_shape_fn(x.len(), |j| {
        let (lo, hi) = bounds.get(j);
        x[j].clamp(lo, hi)
    })
}

fn maybe_clip(x: Array1<f64>, bounds: &FeatureBounds, mode: ClipMode) -> Array1<f64> {
    match mode {
        ClipMode::PerStep => clip_to_bounds(x.view(), bounds),
        ClipMode::None => x,
    }
}

/// Gradient of the weighted p-norm `‖v ⊙ r‖_p` with respect to `r`;
/// subgradient 0 at the origin, where the norm is not differentiable.
pub fn penalty_gradient(r: ArrayView1<f64>, v: &ImportanceVector, p: f64) -> Result<Array1<f64>> {
    if r.len() != v.len() {
        return Err(Error::ShapeMismatch {
            expected: v.len(),
            actual: r.len(),
        });
    }
    let norm = weighted_p_norm(r, &v.v, p);
    if norm == 0.0 {
        return Ok(Array1::zeros(r.len()));
    }
    let scale = norm.powf(p - 1.0);
    Ok(Array1::from_shape_fn(r.len(), |j| {
        let rj = r[j];
        if rj == 0.0 {
            0.0
        } else {
            let vj = v.v[j];
            vj * (vj * rj.abs()).powf(p - 1.0) * rj.signum() / scale
        }
    }))
}

/// Sign convention shared by the attacks: sign(0) = 0, unlike
/// `f64::signum` which maps 0.0 to 1.0.
pub(crate) fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Dispatch one sample to the chosen method.
pub fn run_attack(
    mlp: &Mlp,
    x: ArrayView1<f64>,
    t: u8,
    v: &ImportanceVector,
    params: &AttackParams,
    bounds: &FeatureBounds,
    method: Method,
) -> Result<AttackOutcome> {
    match method {
        Method::LowProFool => low_pro_fool(mlp, x, t, v, params, bounds),
        Method::DeepFool => deep_fool(mlp, x, t, v, params, bounds),
        Method::Fgsm => fgsm(mlp, x, t, v, params, bounds),
    }
}

/// Attack every row of `data` toward the class opposite to the model's
/// prediction. Samples are independent, so they are distributed across
/// worker threads; the returned order matches the row order.
pub fn run_campaign(
    mlp: &Mlp,
    data: &Dataset,
    v: &ImportanceVector,
    params: &AttackParams,
    bounds: &FeatureBounds,
    method: Method,
) -> Result<Vec<AttackOutcome>> {
    params.validate()?;
    (0..data.n_rows())
        .into_par_iter()
        .map(|i| {
            let x = data.x.row(i);
            let t = 1 - mlp.predict(x)?;
            run_attack(mlp, x, t, v, params, bounds, method)
        })
        .collect()
}
