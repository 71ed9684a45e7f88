//! Measuring and modeling multiplicative gradient shrinkage.
//!
//! A low-precision gradient is modeled as `g̃ = q·g + ε`: a multiplicative
//! shrinkage factor `q` plus a zero-mean residual `ε`. This module measures
//! `q` from `(g, g̃)` pairs as the norm ratio `‖g̃‖₂/‖g‖₂`, identifies the
//! affine model from data by orthogonal projection, and samples synthetic
//! shrunk gradients with exactly controlled first and second moments.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::minifloat::Quantizer;

/// One observed shrinkage event: the factor `q`, the residual energy
/// `‖ε‖₂²`, and the source that produced it (a format name or `"synthetic"`).
#[derive(Debug, Clone, PartialEq)]
pub struct ShrinkageObservation {
    /// Realized shrinkage factor. Measured as `‖g̃‖₂/‖g‖₂` for quantized
    /// gradients (which may exceed 1 for adversarial inputs — reported
    /// as-is); the drawn `q_k` for synthetic gradients.
    pub q: f64,
    /// Squared norm of the residual `ε = g̃ − q̂·g` (orthogonal-projection
    /// residual for quantized gradients, the drawn noise for synthetic ones).
    pub eps_norm_sq: f64,
    /// Format identifier, or `"synthetic"`.
    pub format: String,
}

/// Distribution of the shrinkage factor in the synthetic model. Both laws
/// keep `q` inside `(0, 1]` and independent of the gradient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QLaw {
    /// Every step uses the same factor.
    Constant(f64),
    /// Each step draws `q` uniformly from `[q_min, q_max]`.
    Uniform { q_min: f64, q_max: f64 },
}

impl QLaw {
    /// Lower endpoint of the law's support.
    pub fn q_min(&self) -> f64 {
        match *self {
            QLaw::Constant(q) => q,
            QLaw::Uniform { q_min, .. } => q_min,
        }
    }

    /// Upper endpoint of the law's support.
    pub fn q_max(&self) -> f64 {
        match *self {
            QLaw::Constant(q) => q,
            QLaw::Uniform { q_max, .. } => q_max,
        }
    }
}

/// How shrunk gradients are produced: by actually quantizing to a minifloat
/// format, or by sampling the affine model `g̃ = q·g + ε` directly with
/// chosen moments.
#[derive(Debug, Clone, PartialEq)]
pub enum ShrinkageModel {
    /// Quantize elementwise with the given quantizer (possibly the fp32
    /// identity); `q` is then a measurement, not a parameter.
    FormatQuantization(Quantizer),
    /// Draw `q` from `q_law` and `ε` as an isotropic Gaussian with total
    /// variance `E‖ε‖₂² = sigma_eps_sq` (exactly, in distribution).
    Synthetic { q_law: QLaw, sigma_eps_sq: f64 },
}

impl ShrinkageModel {
    /// Builds a synthetic model, validating `0 < q_min ≤ q_max ≤ 1` and
    /// `sigma_eps_sq ≥ 0`.
    pub fn synthetic(q_law: QLaw, sigma_eps_sq: f64) -> Result<Self> {
        let (lo, hi) = (q_law.q_min(), q_law.q_max());
        if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "shrinkage factors must satisfy 0 < q_min <= q_max <= 1, got [{lo}, {hi}]"
            )));
        }
        if !(sigma_eps_sq >= 0.0 && sigma_eps_sq.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "sigma_eps_sq must be finite and nonnegative, got {sigma_eps_sq}"
            )));
        }
        Ok(ShrinkageModel::Synthetic {
            q_law,
            sigma_eps_sq,
        })
    }

    /// A model that quantizes with the given quantizer.
    pub fn format_quantization(quantizer: Quantizer) -> Self {
        ShrinkageModel::FormatQuantization(quantizer)
    }

    /// The exact full-precision model: `q = 1`, `ε = 0`, so `g̃ = g`.
    pub fn full_precision() -> Self {
        ShrinkageModel::Synthetic {
            q_law: QLaw::Constant(1.0),
            sigma_eps_sq: 0.0,
        }
    }
}

/// Measures the shrinkage factor as the norm ratio `‖g̃‖₂/‖g‖₂`.
///
/// # Errors
/// [`Error::DimensionMismatch`] for unequal lengths;
/// [`Error::UndefinedRatio`] when `‖g‖₂ = 0` (the caller decides policy).
pub fn measure_q(g: &DVector<f64>, g_tilde: &DVector<f64>) -> Result<f64> {
    check_dims(g, g_tilde)?;
    let norm_g = g.norm();
    if norm_g == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    Ok(g_tilde.norm() / norm_g)
}

/// Identifies the affine model from data: the least-squares factor
/// `q̂ = ⟨g, g̃⟩/‖g‖₂²` and the residual `ε = g̃ − q̂·g`, which is orthogonal
/// to `g` and reconstructs `g̃ = q̂·g + ε` exactly. This is the unique
/// decomposition minimizing `‖ε‖₂`.
///
/// # Errors
/// [`Error::DimensionMismatch`] and [`Error::UndefinedRatio`] as for
/// [`measure_q`].
pub fn decompose(g: &DVector<f64>, g_tilde: &DVector<f64>) -> Result<(f64, DVector<f64>)> {
    check_dims(g, g_tilde)?;
    let norm_sq = g.norm_squared();
    if norm_sq == 0.0 {
        return Err(Error::UndefinedRatio);
    }
    let q_hat = g.dot(g_tilde) / norm_sq;
    let eps = g_tilde - g * q_hat;
    Ok((q_hat, eps))
}

/// Raw pieces of one shrunk-gradient draw. The optimizer consumes the parts
/// rather than the assembled `g̃` so it can apply the synthetic update in the
/// decomposed form `w − (α·q)·g − α·ε`, which keeps a constant-`q` run
/// bit-identical to a full-precision run with stepsize `α·q`.
#[derive(Debug, Clone)]
pub(crate) enum ShrunkSample {
    Synthetic {
        q: f64,
        /// `None` when `sigma_eps_sq = 0` — no noise is drawn at all, so
        /// noiseless runs consume identical randomness regardless of `q`.
        eps: Option<DVector<f64>>,
        eps_norm_sq: f64,
    },
    Quantized {
        g_tilde: DVector<f64>,
        /// Norm ratio `‖g̃‖₂/‖g‖₂`; 1 when `g = 0` (exact convergence is
        /// treated as unshrunk rather than an error).
        q: f64,
        eps_norm_sq: f64,
    },
}

/// Draws the parts of one shrunk gradient. Randomness is consumed in a fixed
/// documented order — `q` first (one uniform draw, `Uniform` law only), then
/// `ε` (`d` standard normals, only when `sigma_eps_sq > 0`).
pub(crate) fn sample_parts<R: Rng + ?Sized>(
    model: &ShrinkageModel,
    g: &DVector<f64>,
    rng: &mut R,
) -> Result<ShrunkSample> {
    match model {
        ShrinkageModel::FormatQuantization(quantizer) => {
            let g_tilde = DVector::from_vec(quantizer.quantize_vector(g.as_slice())?);
            let (q, eps_norm_sq) = if g.norm() == 0.0 {
                (1.0, 0.0)
            } else {
                let q = g_tilde.norm() / g.norm();
                let (_, eps) = decompose(g, &g_tilde)?;
                (q, eps.norm_squared())
            };
            Ok(ShrunkSample::Quantized {
                g_tilde,
                q,
                eps_norm_sq,
            })
        }
        ShrinkageModel::Synthetic {
            q_law,
            sigma_eps_sq,
        } => {
            let q = match *q_law {
                QLaw::Constant(q) => q,
                QLaw::Uniform { q_min, q_max } => rng.gen_range(q_min..=q_max),
            };
            let (eps, eps_norm_sq) = if *sigma_eps_sq > 0.0 {
                let d = g.len();
                let scale = (sigma_eps_sq / d as f64).sqrt();
                let eps = DVector::from_fn(d, |_, _| {
                    scale * StandardNormal.sample::<_, f64>(rng)
                });
                let norm_sq = eps.norm_squared();
                (Some(eps), norm_sq)
            } else {
                (None, 0.0)
            };
            Ok(ShrunkSample::Synthetic {
                q,
                eps,
                eps_norm_sq,
            })
        }
    }
}

/// Produces one shrunk gradient `g̃` from `g` under the model, together with
/// the observation describing what happened.
///
/// Format mode quantizes elementwise and reports the measured norm-ratio `q`
/// (with `q = 1`, `ε = 0` at `g = 0`, where the ratio is undefined).
/// Synthetic mode draws `q` from the law and `ε` as an isotropic Gaussian
/// with `E[ε] = 0` and `E‖ε‖₂² = sigma_eps_sq`, returning `g̃ = q·g + ε`.
///
/// # Errors
/// Propagates quantizer errors (non-finite entries).
pub fn sample_shrunk_gradient<R: Rng + ?Sized>(
    model: &ShrinkageModel,
    g: &DVector<f64>,
    rng: &mut R,
) -> Result<(DVector<f64>, ShrinkageObservation)> {
    match sample_parts(model, g, rng)? {
        ShrunkSample::Quantized {
            g_tilde,
            q,
            eps_norm_sq,
        } => {
            let label = match model {
                ShrinkageModel::FormatQuantization(quantizer) => quantizer.label().to_owned(),
                ShrinkageModel::Synthetic { .. } => unreachable!("quantized sample from synthetic model"),
            };
            Ok((
                g_tilde,
                ShrinkageObservation {
                    q,
                    eps_norm_sq,
                    format: label,
                },
            ))
        }
        ShrunkSample::Synthetic {
            q,
            eps,
            eps_norm_sq,
        } => {
            let mut g_tilde = g * q;
            if let Some(eps) = &eps {
                g_tilde += eps;
            }
            Ok((
                g_tilde,
                ShrinkageObservation {
                    q,
                    eps_norm_sq,
                    format: "synthetic".to_owned(),
                },
            ))
        }
    }
}

fn check_dims(g: &DVector<f64>, g_tilde: &DVector<f64>) -> Result<()> {
    if g.len() != g_tilde.len() {
        return Err(Error::DimensionMismatch {
            expected: g.len(),
            got: g_tilde.len(),
        });
    }
    Ok(())
}
