//! Moment constants of the shrinkage model and every closed-form convergence
//! bound evaluated from them.
//!
//! The constants describe the first two moments of the shrunk stochastic
//! gradient: descent constants `μ, μ_G`, shrinkage range `[q_min, q_max]`,
//! noise constants `M, M_V` for the unshrunk gradient and `M_ε, M_{ε,V}` for
//! the shrinkage residual, and the composites
//! `M̃ = q_max²·M + M_ε`, `M̃_V = q_max²·M_V + M_{ε,V}`,
//! `M̃_G = M̃_V + q_max²·μ_G²`, and the effective descent constant
//! `μ_q = q_min·μ`. Bound evaluators reject hypothesis-violating inputs
//! rather than clamping them: the guarantees say nothing outside their
//! hypotheses, and silent clamping would fabricate one.

use crate::error::{Error, Result};
use crate::problems::QuadraticProblem;
use crate::shrinkage::ShrinkageModel;

/// All scalars bounding the moments of the (shrunk) stochastic gradient,
/// with the composite fields always equal to their defining formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentConstants {
    /// Descent constant: `⟨∇F, E[g̃|w]⟩ ≥ μ·q_k·‖∇F‖²` with `μ = 1` for an
    /// unbiased oracle.
    pub mu: f64,
    /// Norm-comparability constant: `‖E[g̃|w]‖ ≤ μ_G·q_k·‖∇F‖`, `μ_G ≥ μ`.
    pub mu_g: f64,
    /// Smallest shrinkage factor the model can produce.
    pub q_min: f64,
    /// Largest shrinkage factor the model can produce.
    pub q_max: f64,
    /// Additive second-moment constant of the unshrunk gradient noise.
    pub m: f64,
    /// Multiplicative variance constant of the unshrunk gradient.
    pub m_v: f64,
    /// Additive second-moment constant of the shrinkage residual ε.
    pub m_eps: f64,
    /// Multiplicative variance constant of the shrinkage residual.
    pub m_eps_v: f64,
    /// Composite `M̃ = q_max²·M + M_ε`.
    pub m_tilde: f64,
    /// Composite `M̃_V = q_max²·M_V + M_{ε,V}`.
    pub m_tilde_v: f64,
    /// Composite `M̃_G = M̃_V + q_max²·μ_G²`.
    pub m_tilde_g: f64,
    /// Effective descent constant `μ_q = q_min·μ`.
    pub mu_q: f64,
    /// Gradient Lipschitz constant of the objective.
    pub l: f64,
    /// Strong convexity constant of the objective.
    pub c: f64,
}

impl MomentConstants {
    /// Builds the constant set from its primitive fields, deriving the
    /// composites. Validates `μ_G ≥ μ > 0`, `0 < q_min ≤ q_max ≤ 1`,
    /// nonnegative noise constants, and `0 < c ≤ L`.
    #[allow(clippy::too_many_arguments)]
    pub fn from_primitives(
        mu: f64,
        mu_g: f64,
        q_min: f64,
        q_max: f64,
        m: f64,
        m_v: f64,
        m_eps: f64,
        m_eps_v: f64,
        l: f64,
        c: f64,
    ) -> Result<Self> {
        if !(mu > 0.0 && mu_g >= mu && mu_g.is_finite()) {
            return Err(Error::InvalidHypothesis(format!(
                "descent constants must satisfy mu_G >= mu > 0, got mu = {mu}, mu_G = {mu_g}"
            )));
        }
        if !(q_min > 0.0 && q_min <= q_max && q_max <= 1.0) {
            return Err(Error::InvalidHypothesis(format!(
                "shrinkage range must satisfy 0 < q_min <= q_max <= 1, got [{q_min}, {q_max}]"
            )));
        }
        for (name, value) in [
            ("M", m),
            ("M_V", m_v),
            ("M_eps", m_eps),
            ("M_eps_V", m_eps_v),
        ] {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(Error::InvalidHypothesis(format!(
                    "{name} must be finite and nonnegative, got {value}"
                )));
            }
        }
        if !(c > 0.0 && c <= l && l.is_finite()) {
            return Err(Error::InvalidHypothesis(format!(
                "curvature constants must satisfy 0 < c <= L, got c = {c}, L = {l}"
            )));
        }
        let q_max_sq = q_max * q_max;
        let m_tilde = q_max_sq * m + m_eps;
        let m_tilde_v = q_max_sq * m_v + m_eps_v;
        let m_tilde_g = m_tilde_v + q_max_sq * (mu_g * mu_g);
        let mu_q = q_min * mu;
        debug_assert!(m_tilde_g >= mu_q * mu_q * (1.0 - 1e-12));
        Ok(Self {
            mu,
            mu_g,
            q_min,
            q_max,
            m,
            m_v,
            m_eps,
            m_eps_v,
            m_tilde,
            m_tilde_v,
            m_tilde_g,
            mu_q,
            l,
            c,
        })
    }

    /// The largest admissible fixed stepsize, `μ_q/(L·M̃_G)`. The same
    /// expression gates schedule validation and the bound evaluators, so
    /// boundary values behave identically everywhere.
    pub fn max_fixed_stepsize(&self) -> f64 {
        self.mu_q / (self.l * self.m_tilde_g)
    }

    /// The smallest admissible diminishing-schedule `β`, `1/(c·μ_q)`
    /// (exclusive: the hypothesis requires strict inequality).
    pub fn min_diminishing_beta(&self) -> f64 {
        1.0 / (self.c * self.mu_q)
    }
}

/// Derives the exact moment constants for a synthetic shrinkage model on a
/// quadratic problem: the stochastic oracle is unbiased and `q` is drawn
/// independently of it, so `μ = μ_G = 1`, the Gaussian gradient noise gives
/// `M = sigma²·d` and `M_V = 0`, and the isotropic residual gives
/// `M_ε = sigma_eps_sq` and `M_{ε,V} = 0`. `L` and `c` come from the problem.
///
/// # Errors
/// [`Error::ConstantsNotDerivable`] for format-quantization models, whose
/// shrinkage statistics have no closed form. Calibrate empirically instead:
/// run [`crate::shrinkage::decompose`] over a calibration trajectory, take
/// `q_min`/`q_max` as the smallest and largest measured `q`, bound `M_ε` by
/// the largest observed `eps_norm_sq`, and feed the estimates to
/// [`MomentConstants::from_primitives`] — flagging the results as estimates.
pub fn derive_constants(p: &QuadraticProblem, model: &ShrinkageModel) -> Result<MomentConstants> {
    match model {
        ShrinkageModel::Synthetic {
            q_law,
            sigma_eps_sq,
        } => MomentConstants::from_primitives(
            1.0,
            1.0,
            q_law.q_min(),
            q_law.q_max(),
            p.sigma() * p.sigma() * p.dim() as f64,
            0.0,
            *sigma_eps_sq,
            0.0,
            p.l(),
            p.c(),
        ),
        ShrinkageModel::FormatQuantization(quantizer) => Err(Error::ConstantsNotDerivable(format!(
            "format quantization ({}) has no closed-form moment constants; estimate them \
             empirically from a calibration run: q_min/q_max as the min/max measured q from \
             decompose, M_eps from the largest observed eps_norm_sq, then build the constants \
             with MomentConstants::from_primitives and treat the results as estimates",
            quantizer.label()
        ))),
    }
}

/// Which guarantee a bound curve instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundKind {
    /// Geometric decay to a noise floor under a fixed stepsize.
    FixedStep,
    /// `ν_q/(γ+k)` decay under the diminishing schedule.
    DiminishingStep,
}

/// Per-iteration values of a closed-form bound on the expected optimality
/// gap, `B_k` for `k = 1..=K`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub kind: BoundKind,
    /// `B_k` at index `k − 1`.
    pub values: Vec<f64>,
    /// Fixed-step noise floor `ᾱLM̃/(2cμ_q)` (fixed-step curves only).
    pub asymptote: Option<f64>,
    /// Per-step contraction factor `1 − ᾱcμ_q` (fixed-step curves only).
    pub contraction: Option<f64>,
    /// The constant `ν_q` (diminishing-step curves only).
    pub nu_q: Option<f64>,
}

impl BoundCurve {
    /// `B_k` for `k ≥ 1`.
    pub fn value_at(&self, k: usize) -> f64 {
        self.values[k - 1]
    }
}

/// Fixed-stepsize bound: `B_k` decays geometrically from `initial_gap`
/// toward the asymptote `ᾱLM̃/(2cμ_q)` with contraction factor `1 − ᾱcμ_q`.
/// The curve is built by the recurrence
/// `B_{k+1} = asymptote + contraction·(B_k − asymptote)` with
/// `B_1 = initial_gap`, so the recurrence holds bitwise over the whole curve.
///
/// # Errors
/// [`Error::InvalidHypothesis`] unless `0 < ᾱ ≤ μ_q/(L·M̃_G)`,
/// `initial_gap ≥ 0`, and `K ≥ 1`.
pub fn bound_fixed(
    mc: &MomentConstants,
    alpha_bar: f64,
    initial_gap: f64,
    iterations: usize,
) -> Result<BoundCurve> {
    let alpha_max = mc.max_fixed_stepsize();
    if !(alpha_bar > 0.0 && alpha_bar <= alpha_max) {
        return Err(Error::InvalidHypothesis(format!(
            "fixed stepsize requires 0 < alpha_bar <= mu_q/(L*M_tilde_G) = {alpha_max}, \
             got {alpha_bar}"
        )));
    }
    check_gap_and_len(initial_gap, iterations)?;
    let asymptote = alpha_bar * mc.l * mc.m_tilde / (2.0 * mc.c * mc.mu_q);
    // In exact arithmetic the admissibility chain puts the contraction in
    // [0, 1); clamp the boundary case against round-off.
    let contraction = (1.0 - alpha_bar * mc.c * mc.mu_q).max(0.0);
    let mut values = Vec::with_capacity(iterations);
    let mut b = initial_gap;
    values.push(b);
    for _ in 1..iterations {
        b = asymptote + contraction * (b - asymptote);
        values.push(b);
    }
    Ok(BoundCurve {
        kind: BoundKind::FixedStep,
        values,
        asymptote: Some(asymptote),
        contraction: Some(contraction),
        nu_q: None,
    })
}

/// Diminishing-stepsize bound: `B_k = ν_q/(γ+k)` with
/// `ν_q = max{β²LM̃/(2(βcμ_q − 1)), (γ+1)·initial_gap}`.
///
/// # Errors
/// [`Error::InvalidHypothesis`] unless `β > 1/(c·μ_q)` (strict), the first
/// stepsize `β/(γ+1)` is admissible for the fixed-stepsize condition,
/// `γ > 0`, `initial_gap ≥ 0`, and `K ≥ 1`.
pub fn bound_diminishing(
    mc: &MomentConstants,
    beta: f64,
    gamma: f64,
    initial_gap: f64,
    iterations: usize,
) -> Result<BoundCurve> {
    let beta_min = mc.min_diminishing_beta();
    if !(beta > beta_min) {
        return Err(Error::InvalidHypothesis(format!(
            "diminishing schedule requires beta > 1/(c*mu_q) = {beta_min}, got {beta}"
        )));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidHypothesis(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    let alpha_1 = beta / (gamma + 1.0);
    let alpha_max = mc.max_fixed_stepsize();
    if !(alpha_1 <= alpha_max) {
        return Err(Error::InvalidHypothesis(format!(
            "first stepsize beta/(gamma+1) = {alpha_1} exceeds the admissible maximum {alpha_max}"
        )));
    }
    check_gap_and_len(initial_gap, iterations)?;
    let noise_term = diminishing_noise_term(beta, mc.l, mc.m_tilde, mc.c, mc.mu_q);
    let nu_q = noise_term.max((gamma + 1.0) * initial_gap);
    let values = (1..=iterations)
        .map(|k| nu_q / (gamma + k as f64))
        .collect();
    Ok(BoundCurve {
        kind: BoundKind::DiminishingStep,
        values,
        asymptote: None,
        contraction: None,
        nu_q: Some(nu_q),
    })
}

/// Noise-dominated term of the diminishing bound, `β²LM/(2(βcμ − 1))`.
/// Shared by the shrunk and full-precision evaluations so that equal inputs
/// produce bit-equal outputs.
fn diminishing_noise_term(beta: f64, l: f64, m: f64, c: f64, mu: f64) -> f64 {
    beta * beta * l * m / (2.0 * (beta * c * mu - 1.0))
}

/// Inflation factor `ρ = (M̃/M_full)·(βcμ − 1)/(βcμ_q − 1)`: the multiplier
/// relating the noise-dominated term of the shrunk diminishing bound to its
/// full-precision counterpart.
///
/// # Errors
/// [`Error::InvalidHypothesis`] unless `βcμ > 1`, `βcμ_q > 1`, and
/// `M_full > 0`.
pub fn inflation_factor(mc: &MomentConstants, m_full: f64, beta: f64) -> Result<f64> {
    if !(m_full > 0.0 && m_full.is_finite()) {
        return Err(Error::InvalidHypothesis(format!(
            "full-precision noise constant must be positive and finite, got {m_full}"
        )));
    }
    let full_margin = beta * mc.c * mc.mu - 1.0;
    let shrunk_margin = beta * mc.c * mc.mu_q - 1.0;
    if !(full_margin > 0.0 && shrunk_margin > 0.0) {
        return Err(Error::InvalidHypothesis(format!(
            "inflation factor requires beta*c*mu > 1 and beta*c*mu_q > 1, \
             got margins {full_margin} and {shrunk_margin}"
        )));
    }
    Ok((mc.m_tilde / m_full) * (full_margin / shrunk_margin))
}

/// Side-by-side comparison of the diminishing-bound constants with and
/// without shrinkage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NuComparison {
    /// Full-precision constant `ν = max{A, B}` with
    /// `A = β²LM_full/(2(βcμ − 1))` and `B = (γ+1)·initial_gap`.
    pub nu: f64,
    /// Shrunk constant `ν_q = max{ρ·A, B}`.
    pub nu_q: f64,
    /// The inflation factor ρ.
    pub rho: f64,
}

/// Computes `ν`, `ν_q`, and `ρ` for the same `(β, γ, initial_gap)`. When
/// `ρ = 1` the two constants coincide exactly; when `ρ ≥ 1`, `ν_q ≥ ν`.
///
/// # Errors
/// As [`inflation_factor`], plus `γ > 0` and `initial_gap ≥ 0`.
pub fn nu_comparison(
    mc: &MomentConstants,
    m_full: f64,
    beta: f64,
    gamma: f64,
    initial_gap: f64,
) -> Result<NuComparison> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::InvalidHypothesis(format!(
            "gamma must be positive and finite, got {gamma}"
        )));
    }
    if !(initial_gap >= 0.0 && initial_gap.is_finite()) {
        return Err(Error::InvalidHypothesis(format!(
            "initial_gap must be finite and nonnegative, got {initial_gap}"
        )));
    }
    let rho = inflation_factor(mc, m_full, beta)?;
    let a = diminishing_noise_term(beta, mc.l, m_full, mc.c, mc.mu);
    let b = (gamma + 1.0) * initial_gap;
    Ok(NuComparison {
        nu: a.max(b),
        nu_q: (rho * a).max(b),
        rho,
    })
}

/// Switch iterations for the halving schedule: phase `r` uses stepsize
/// `α_r = α₁·2^(−r)` and lasts `ℓ_r = ceil(ln 3/(α_r·c·μ_q))` iterations —
/// long enough to shrink the phase's transient by a factor of 3 — so the
/// switch points are the cumulative phase lengths and roughly double each
/// phase.
///
/// # Errors
/// [`Error::InvalidHypothesis`] unless `α₁` is admissible for the
/// fixed-stepsize condition; [`Error::InvalidConfig`] if the cumulative
/// schedule overflows a practical iteration count.
pub fn halving_schedule(
    mc: &MomentConstants,
    alpha_1: f64,
    num_phases: usize,
) -> Result<Vec<usize>> {
    let alpha_max = mc.max_fixed_stepsize();
    if !(alpha_1 > 0.0 && alpha_1 <= alpha_max) {
        return Err(Error::InvalidHypothesis(format!(
            "halving schedule requires 0 < alpha_1 <= mu_q/(L*M_tilde_G) = {alpha_max}, \
             got {alpha_1}"
        )));
    }
    let ln3 = 3.0f64.ln();
    let mut switches = Vec::with_capacity(num_phases);
    let mut cumulative = 0.0f64;
    for r in 0..num_phases {
        let alpha_r = alpha_1 * 0.5f64.powi(r as i32);
        let phase_len = (ln3 / (alpha_r * mc.c * mc.mu_q)).ceil();
        cumulative += phase_len;
        if !(cumulative < 1e15) {
            return Err(Error::InvalidConfig(format!(
                "halving schedule overflows after {r} phases"
            )));
        }
        switches.push(cumulative as usize);
    }
    Ok(switches)
}

fn check_gap_and_len(initial_gap: f64, iterations: usize) -> Result<()> {
    if !(initial_gap >= 0.0 && initial_gap.is_finite()) {
        return Err(Error::InvalidHypothesis(format!(
            "initial_gap must be finite and nonnegative, got {initial_gap}"
        )));
    }
    if iterations == 0 {
        return Err(Error::InvalidHypothesis(
            "bound curves need at least one iteration".into(),
        ));
    }
    Ok(())
}
