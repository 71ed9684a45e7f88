//! Synthetic strongly convex quadratic objectives with analytically known
//! constants, plus unbiased stochastic gradient oracles.
//!
//! The objective is `F(w) = ½wᵀAw − bᵀw` with `A` symmetric positive
//! definite, so the gradient Lipschitz constant is `L = λ_max(A)`, the strong
//! convexity constant is `c = λ_min(A)`, the unique minimizer is
//! `w* = A⁻¹b`, and the optimality gap has the exact closed form
//! `F(w) − F* = ½(w−w*)ᵀA(w−w*)`. Keeping every constant exact lets
//! convergence bounds be checked without estimation slack.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// A strongly convex quadratic `F(w) = ½wᵀAw − bᵀw` with Gaussian gradient
/// noise of per-coordinate standard deviation `sigma`. Immutable after
/// construction; all oracles are read-only apart from the caller-owned rng.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticProblem {
    a: DMatrix<f64>,
    b: DVector<f64>,
    sigma: f64,
    w_star: DVector<f64>,
    f_star: f64,
    l: f64,
    c: f64,
}

impl QuadraticProblem {
    /// Dimension `d`.
    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// The quadratic's matrix `A`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// The linear term `b`.
    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    /// Per-coordinate gradient-noise standard deviation.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// The unique minimizer `w* = A⁻¹b` (cached).
    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    /// The minimum value `F(w*)` (cached).
    pub fn f_star(&self) -> f64 {
        self.f_star
    }

    /// Gradient Lipschitz constant `L = λ_max(A)`.
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Strong convexity constant `c = λ_min(A)`.
    pub fn c(&self) -> f64 {
        self.c
    }

    /// Objective value `F(w) = ½wᵀAw − bᵀw`.
    pub fn objective(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_dim(w)?;
        Ok(0.5 * w.dot(&(&self.a * w)) - self.b.dot(w))
    }

    /// Exact gradient `∇F(w) = Aw − b`.
    pub fn full_gradient(&self, w: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(w)?;
        Ok(&self.a * w - &self.b)
    }

    /// Unbiased stochastic gradient `∇F(w) + n`, `n ~ N(0, sigma²·I)`, so
    /// `E‖n‖₂² = sigma²·d`. Draws exactly `d` standard normals when
    /// `sigma > 0` and nothing when `sigma = 0` (the oracle is then exact and
    /// seed-compatible with the noiseless case).
    pub fn stochastic_gradient<R: Rng + ?Sized>(
        &self,
        w: &DVector<f64>,
        rng: &mut R,
    ) -> Result<DVector<f64>> {
        let mut g = self.full_gradient(w)?;
        add_gradient_noise(&mut g, self.sigma, rng);
        Ok(g)
    }

    /// Optimality gap `F(w) − F* = ½(w−w*)ᵀA(w−w*)`, evaluated in the
    /// cancellation-free quadratic form and clamped at zero against
    /// round-off.
    pub fn gap(&self, w: &DVector<f64>) -> Result<f64> {
        self.check_dim(w)?;
        let delta = w - &self.w_star;
        Ok((0.5 * delta.dot(&(&self.a * &delta))).max(0.0))
    }

    fn check_dim(&self, w: &DVector<f64>) -> Result<()> {
        if w.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: w.len(),
            });
        }
        Ok(())
    }
}

/// Adds zero-mean Gaussian noise with per-coordinate standard deviation
/// `sigma` in index order, drawing nothing when `sigma = 0`. Shared by the
/// stochastic oracle and the optimizer's inner loop so both consume
/// randomness identically.
pub(crate) fn add_gradient_noise<R: Rng + ?Sized>(g: &mut DVector<f64>, sigma: f64, rng: &mut R) {
    if sigma > 0.0 {
        for entry in g.iter_mut() {
            *entry += sigma * StandardNormal.sample::<_, f64>(rng);
        }
    }
}

/// Builds a random `d`-dimensional quadratic with spectrum log-spaced from
/// `c` to `L` inclusive: `A = QᵀΛQ` with `Q` the orthogonal factor of a
/// seeded Gaussian matrix, and `b` a seeded standard Gaussian vector. The
/// random stream (ChaCha8 seeded with `seed`) is consumed in a documented
/// order: `d²` normals for `Q`, then `d` for `b`.
///
/// # Errors
/// [`Error::InfeasibleSpectrum`] for `d = 1` with `c ≠ L`;
/// [`Error::InvalidProblem`] for invalid `d`, `c`, `L`, or `sigma`.
pub fn make_quadratic(d: usize, c: f64, l: f64, sigma: f64, seed: u64) -> Result<QuadraticProblem> {
    if d == 0 {
        return Err(Error::InvalidProblem("dimension must be at least 1".into()));
    }
    if !(c > 0.0 && c <= l && l.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "spectrum endpoints must satisfy 0 < c <= L and be finite, got c = {c}, L = {l}"
        )));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    if d == 1 && c != l {
        return Err(Error::InfeasibleSpectrum(format!(
            "a 1-dimensional quadratic has a single eigenvalue; c = {c} and L = {l} cannot both hold"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussian = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample::<_, f64>(&mut rng));
    let q = gaussian.qr().q();

    // Log-spaced eigenvalues with the endpoints pinned exactly at c and L.
    let mut lambdas = vec![0.0; d];
    lambdas[0] = c;
    lambdas[d - 1] = l;
    if d > 2 {
        let (ln_c, ln_l) = (c.ln(), l.ln());
        for (i, lambda) in lambdas.iter_mut().enumerate().take(d - 1).skip(1) {
            let t = i as f64 / (d - 1) as f64;
            *lambda = (ln_c + t * (ln_l - ln_c)).exp().clamp(c, l);
        }
    }

    // A = QᵀΛQ, assembled as Qᵀ·(ΛQ) and symmetrized against round-off.
    let mut lq = q.clone();
    for (i, lambda) in lambdas.iter().enumerate() {
        lq.row_mut(i).scale_mut(*lambda);
    }
    let mut a = q.transpose() * lq;
    let at = a.transpose();
    a = (a + at) * 0.5;

    let b = DVector::from_fn(d, |_, _| StandardNormal.sample::<_, f64>(&mut rng));
    finish_problem(a, b, sigma, c, l)
}

/// Builds a problem from an explicit `(A, b)` pair, deriving `L` and `c`
/// from the spectrum of `A`. Intended for hand-constructed test problems.
///
/// # Errors
/// [`Error::InvalidProblem`] unless `A` is square, finite, symmetric to
/// `10⁻¹²·‖A‖`, positive definite, and conformal with `b`.
pub fn from_parts(a: DMatrix<f64>, b: DVector<f64>, sigma: f64) -> Result<QuadraticProblem> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidProblem(format!(
            "A must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    if a.iter().any(|x| !x.is_finite()) || b.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidProblem("A and b must be finite".into()));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidProblem(format!(
            "sigma must be finite and nonnegative, got {sigma}"
        )));
    }
    let asym = (&a - a.transpose()).norm();
    if asym > 1e-12 * a.norm().max(1.0) {
        return Err(Error::InvalidProblem(format!(
            "A must be symmetric; asymmetry norm {asym:e}"
        )));
    }
    let eigen = a.clone().symmetric_eigen();
    let c = eigen.eigenvalues.min();
    let l = eigen.eigenvalues.max();
    if !(c > 0.0) {
        return Err(Error::InvalidProblem(format!(
            "A must be positive definite; smallest eigenvalue {c:e}"
        )));
    }
    finish_problem(a, b, sigma, c, l)
}

fn finish_problem(
    a: DMatrix<f64>,
    b: DVector<f64>,
    sigma: f64,
    c: f64,
    l: f64,
) -> Result<QuadraticProblem> {
    let chol = a.clone().cholesky().ok_or_else(|| {
        Error::InvalidProblem("A is not positive definite (Cholesky failed)".into())
    })?;
    let w_star = chol.solve(&b);
    let f_star = 0.5 * w_star.dot(&(&a * &w_star)) - b.dot(&w_star);
    Ok(QuadraticProblem {
        a,
        b,
        sigma,
        w_star,
        f_star,
        l,
        c,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn scalar_problem() -> QuadraticProblem {
        // F(w) = w² − 4w: A = (2), b = 4, w* = 2, F* = −4.
        from_parts(
            DMatrix::from_element(1, 1, 2.0),
            DVector::from_element(1, 4.0),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn scalar_quadratic_closed_form() {
        let p = scalar_problem();
        assert_eq!(p.w_star()[0], 2.0);
        assert_eq!(p.f_star(), -4.0);
        assert_eq!((p.c(), p.l()), (2.0, 2.0));
        assert_eq!(p.full_gradient(&DVector::from_element(1, 3.0)).unwrap()[0], 2.0);
        // gap(3) = ½·2·1² = 1.
        assert_eq!(p.gap(&DVector::from_element(1, 3.0)).unwrap(), 1.0);
    }

    #[test]
    fn one_dimensional_spectrum_must_collapse() {
        assert!(matches!(
            make_quadratic(1, 1.0, 10.0, 0.0, 0),
            Err(Error::InfeasibleSpectrum(_))
        ));
        let p = make_quadratic(1, 2.0, 2.0, 0.0, 0).unwrap();
        assert_eq!(p.a()[(0, 0)], 2.0);
    }

    #[test]
    fn spectrum_endpoints_are_exact() {
        for d in [2, 3, 10] {
            let p = make_quadratic(d, 1.0, 10.0, 0.0, 42).unwrap();
            let eigen = p.a().clone().symmetric_eigen();
            assert_relative_eq!(eigen.eigenvalues.min(), 1.0, max_relative = 1e-10);
            assert_relative_eq!(eigen.eigenvalues.max(), 10.0, max_relative = 1e-10);
            assert_eq!((p.c(), p.l()), (1.0, 10.0));
        }
    }

    #[test]
    fn minimizer_is_stationary() {
        let p = make_quadratic(10, 1.0, 10.0, 0.0, 7).unwrap();
        assert!(p.full_gradient(p.w_star()).unwrap().norm() <= 1e-8);
        assert_eq!(p.gap(p.w_star()).unwrap(), 0.0);
        // A·w* = b to relative tolerance.
        let residual = (p.a() * p.w_star() - p.b()).norm();
        assert!(residual <= 1e-10 * p.b().norm().max(1.0));
    }

    #[test]
    fn same_seed_reproduces_the_problem() {
        let p1 = make_quadratic(6, 0.5, 8.0, 0.3, 123).unwrap();
        let p2 = make_quadratic(6, 0.5, 8.0, 0.3, 123).unwrap();
        assert_eq!(p1, p2);
        let p3 = make_quadratic(6, 0.5, 8.0, 0.3, 124).unwrap();
        assert_ne!(p1.a(), p3.a());
    }

    #[test]
    fn gradient_matches_central_differences() {
        let p = make_quadratic(5, 1.0, 4.0, 0.0, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let w = DVector::from_fn(5, |_, _| StandardNormal.sample::<_, f64>(&mut rng));
        let grad = p.full_gradient(&w).unwrap();
        let h = 1e-5;
        for i in 0..5 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[i] += h;
            wm[i] -= h;
            let fd = (p.objective(&wp).unwrap() - p.objective(&wm).unwrap()) / (2.0 * h);
            assert_relative_eq!(grad[i], fd, max_relative = 1e-8, epsilon = 1e-8);
        }
    }

    #[test]
    fn stochastic_gradient_is_unbiased_with_exact_variance() {
        let sigma = 0.3;
        let p = make_quadratic(4, 1.0, 5.0, sigma, 21).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = DVector::from_fn(4, |_, _| StandardNormal.sample::<_, f64>(&mut rng));
        let grad = p.full_gradient(&w).unwrap();
        let n = 100_000;
        let mut mean = DVector::zeros(4);
        let mut energy = 0.0;
        for _ in 0..n {
            let g = p.stochastic_gradient(&w, &mut rng).unwrap();
            energy += (&g - &grad).norm_squared();
            mean += g;
        }
        mean /= n as f64;
        energy /= n as f64;
        let coord_sem = sigma / (n as f64).sqrt();
        for i in 0..4 {
            assert!((mean[i] - grad[i]).abs() <= 5.0 * coord_sem);
        }
        let expected = sigma * sigma * 4.0;
        // Var(‖n‖²) = 2σ⁴d for Gaussian noise.
        let energy_sem = (2.0 * sigma.powi(4) * 4.0 / n as f64).sqrt();
        assert!((energy - expected).abs() <= 5.0 * energy_sem);
    }

    #[test]
    fn noiseless_oracle_is_exact_and_draws_nothing() {
        let p = make_quadratic(3, 1.0, 2.0, 0.0, 8).unwrap();
        let w = DVector::from_element(3, 1.0);
        let mut rng1 = ChaCha8Rng::seed_from_u64(42);
        let g = p.stochastic_gradient(&w, &mut rng1).unwrap();
        assert_eq!(g, p.full_gradient(&w).unwrap());
        // No randomness consumed: the stream equals a fresh one.
        let mut rng2 = ChaCha8Rng::seed_from_u64(42);
        assert_eq!(rng1.gen::<u64>(), rng2.gen::<u64>());
    }

    #[test]
    fn convexity_and_smoothness_witnesses() {
        let p = make_quadratic(8, 0.7, 12.0, 0.0, 17).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..1000 {
            let w = DVector::from_fn(8, |_, _| 3.0 * StandardNormal.sample::<_, f64>(&mut rng));
            let v = DVector::from_fn(8, |_, _| 3.0 * StandardNormal.sample::<_, f64>(&mut rng));
            let fw = p.objective(&w).unwrap();
            let fv = p.objective(&v).unwrap();
            let gw = p.full_gradient(&w).unwrap();
            let lin = fw + gw.dot(&(&v - &w));
            let dist_sq = (&v - &w).norm_squared();
            let slack = 1e-9 * (1.0 + fw.abs() + fv.abs());
            // Strong convexity from below, smoothness from above.
            assert!(fv + slack >= lin + 0.5 * p.c() * dist_sq);
            assert!(fv - slack <= lin + 0.5 * p.l() * dist_sq);
            // Gradient-dominance witness: 2c·gap ≤ ‖∇F‖² ≤ 2L·gap.
            let gap = p.gap(&w).unwrap();
            let gnorm_sq = gw.norm_squared();
            assert!(2.0 * p.c() * gap <= gnorm_sq * (1.0 + 1e-12) + slack);
            assert!(gnorm_sq <= 2.0 * p.l() * gap * (1.0 + 1e-12) + slack);
        }
    }

    #[test]
    fn from_parts_rejects_bad_matrices() {
        // Asymmetric.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(from_parts(a, DVector::zeros(2), 0.0).is_err());
        // Not positive definite.
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(from_parts(a, DVector::zeros(2), 0.0).is_err());
        // Dimension mismatch.
        let a = DMatrix::identity(2, 2);
        assert!(matches!(
            from_parts(a, DVector::zeros(3), 0.0),
            Err(Error::DimensionMismatch { .. })
        ));
    }
}
