//! ADMM for the relaxed minimum-volume problem
//!
//! ```text
//! minimize   -log det(γ γᵀ) + μ ‖W̃ γ‖_h
//! subject to γ 1 = a,  σ_min(γ) ≥ 1/R
//! ```
//!
//! split as `V1 = W̃ γ` and `V2 = γ`. One iteration updates `V1`, `V2`, `γ`
//! and then both duals, in that order.

use std::io::{self, Write};
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::projection::ProjectedDocs;
use crate::proxops;
use crate::scalar::Real;

/// How the `γ` subproblem is solved.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaStep {
    /// Exact minimizer: singular-value prox in `C^{1/2}`-whitened
    /// coordinates, with the linear constraint enforced through its
    /// multiplier by Newton's method.
    #[default]
    Exact,
    /// Closed-form step with the singular vectors of `A = C⁻¹Bᵀ` frozen,
    /// followed by a `C⁻¹`-weighted correction onto `γ 1 = a`. Exact only
    /// when `UᵀCU` is diagonal.
    FrozenBasis,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig<T> {
    /// ADMM penalty.
    pub rho: T,
    /// Weight of the hinge penalty on negative topic proportions.
    pub mu: T,
    /// Spectral radius `R`; `None` means `2 · max_i ‖w̃_i‖`.
    pub radius: Option<T>,
    pub max_iters: usize,
    pub tol_primal: T,
    pub tol_change: T,
    pub gamma_step: GammaStep,
}

impl<T: Real> Default for SolverConfig<T> {
    fn default() -> Self {
        Self {
            rho: T::of(2.0),
            mu: T::of(0.02),
            radius: None,
            max_iters: 2000,
            tol_primal: T::of(1e-4),
            tol_change: T::of(1e-6),
            gamma_step: GammaStep::Exact,
        }
    }
}

impl<T: Real> SolverConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &'static str, x: T| {
            if x > T::zero() && x.is_finite() {
                Ok(())
            } else {
                Err(Error::param(name, format!("must be positive, got {x}")))
            }
        };
        positive("rho", self.rho)?;
        if !(self.mu >= T::zero() && self.mu.is_finite()) {
            return Err(Error::param(
                "mu",
                format!("must be nonnegative, got {}", self.mu),
            ));
        }
        if let Some(r) = self.radius {
            positive("radius", r)?;
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be at least 1"));
        }
        positive("tol_primal", self.tol_primal)?;
        positive("tol_change", self.tol_change)
    }

    /// The configured radius, or twice the largest coordinate-row norm.
    pub fn resolved_radius(&self, w_tilde: &DMatrix<T>) -> T {
        self.radius.unwrap_or_else(|| {
            let max_norm = w_tilde
                .row_iter()
                .map(|r| r.norm())
                .fold(T::zero(), |a, b| a.max(b));
            T::of(2.0) * max_norm
        })
    }
}

/// ADMM iterate plus the quantities cached at initialization.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverState<T: Real> {
    pub gamma: DMatrix<T>,
    pub v1: DMatrix<T>,
    pub v2: DMatrix<T>,
    pub lambda1: DMatrix<T>,
    pub lambda2: DMatrix<T>,
    /// `C = I + W̃ᵀW̃`.
    pub c_mat: DMatrix<T>,
    pub c_inv: DMatrix<T>,
    pub c_sqrt: DMatrix<T>,
    pub c_inv_sqrt: DMatrix<T>,
    /// Least-squares solution of `W̃ a = 1_M`.
    pub a_vec: DVector<T>,
    /// Multiplier of `γ 1 = a` from the last exact `γ` step.
    pub nu: DVector<T>,
    pub radius: T,
    pub iteration: usize,
}

impl<T: Real> SolverState<T> {
    pub fn k(&self) -> usize {
        self.gamma.nrows()
    }

    pub fn zeta(&self) -> T {
        T::one() / self.radius
    }
}

/// Why the iteration stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Both primal residuals and the relative change fell below tolerance.
    Converged,
    MaxIterations,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord<T> {
    pub iter: usize,
    pub objective: T,
    pub r1: T,
    pub r2: T,
    pub sigma_min: T,
    pub rel_change: T,
    pub ms: f64,
}

/// One record per completed iteration.
#[derive(Clone, Debug, PartialEq)]
pub struct FitTrace<T> {
    pub records: Vec<TraceRecord<T>>,
}

impl<T> Default for FitTrace<T> {
    fn default() -> Self {
        Self {
            records: Vec::new(),
        }
    }
}

impl<T: Real> FitTrace<T> {
    pub const HEADER: &'static str = "iter,objective,r1,r2,sigma_min,rel_change,ms";

    /// Writes the trace as CSV. Wall-clock times vary from run to run, so
    /// the `ms` column is left empty unless `timing` is set.
    pub fn write_csv<W: Write>(&self, mut out: W, timing: bool) -> io::Result<()> {
        writeln!(out, "{}", Self::HEADER)?;
        for r in &self.records {
            write!(
                out,
                "{},{},{},{},{},{},",
                r.iter, r.objective, r.r1, r.r2, r.sigma_min, r.rel_change
            )?;
            if timing {
                write!(out, "{:.3}", r.ms)?;
            }
            writeln!(out)?;
        }
        out.flush()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRecord<T>> {
        self.records.last()
    }
}

#[derive(Clone, Debug)]
pub struct FitResult<T: Real> {
    pub gamma_hat: DMatrix<T>,
    pub state: SolverState<T>,
    pub trace: FitTrace<T>,
    pub stop: StopReason,
    /// `|det γ̂|`; values at or below `1e-12` mean the fit is unusable.
    pub abs_det: T,
}

impl<T: Real> FitResult<T> {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::Converged
    }

    pub fn is_singular(&self) -> bool {
        !(self.abs_det > T::of(1e-12))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Objective<T> {
    /// `+∞` when `γ` is numerically singular.
    pub value: T,
    /// Whether `σ_min(γ) ≥ 1/R`.
    pub feasible: bool,
    pub sigma_min: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Residuals<T> {
    /// `‖W̃γ − V1‖_F`
    pub r1: T,
    /// `‖γ − V2‖_F`
    pub r2: T,
    /// `ρ ‖γ_prev − γ‖_F`
    pub dual_change: T,
    /// `‖γ1 − a‖_∞`
    pub constraint: T,
}

/// Intermediate quantities of the frozen-basis `γ` step, exposed for checking.
#[derive(Clone, Debug)]
pub struct FrozenBasisStep<T: Real> {
    pub gamma: DMatrix<T>,
    pub gamma_plus: DMatrix<T>,
    pub d_hat: DVector<T>,
    pub e_diag: DVector<T>,
    pub f_diag: DVector<T>,
}

fn check_shapes<T: Real>(state: &SolverState<T>, w_tilde: &DMatrix<T>) -> Result<()> {
    if w_tilde.ncols() != state.k() || w_tilde.nrows() != state.v1.nrows() {
        return Err(Error::Shape(format!(
            "coordinates are {}x{} but the state expects {}x{}",
            w_tilde.nrows(),
            w_tilde.ncols(),
            state.v1.nrows(),
            state.k()
        )));
    }
    Ok(())
}

/// Builds `γ⁰ = I`, `V1 = W̃`, `V2 = I`, zero duals, and caches `C` and `a`.
pub fn init_state<T: Real>(
    projected: &ProjectedDocs<T>,
    config: &SolverConfig<T>,
) -> Result<SolverState<T>> {
    config.validate()?;
    let w = &projected.coords;
    let (m, k) = w.shape();
    if m < k {
        return Err(Error::RankDeficient {
            rank: m,
            required: k,
            detail: format!("{m} documents for {k} coordinates"),
        });
    }
    let sv = linalg::singular_values(w);
    let rank_tol = T::of(1e-10);
    if !(sv[k - 1] > rank_tol) {
        return Err(Error::RankDeficient {
            rank: sv.iter().filter(|&&s| s > rank_tol).count(),
            required: k,
            detail: format!(
                "smallest singular value of the coordinates is {:e}",
                sv[k - 1]
            ),
        });
    }

    let wtw = w.transpose() * w;
    let rhs = w.transpose() * DVector::from_element(m, T::one());
    let a_vec = wtw
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("W̃ᵀW̃ is not positive definite".into()))?
        .solve(&rhs);
    let c_mat = DMatrix::identity(k, k) + wtw;
    let c_inv = c_mat
        .clone()
        .cholesky()
        .ok_or_else(|| Error::LinearAlgebra("C is not positive definite".into()))?
        .inverse();
    let (c_sqrt, c_inv_sqrt) = linalg::spd_sqrt_pair(&c_mat)?;

    let gamma = DMatrix::identity(k, k);
    Ok(SolverState {
        v1: w * &gamma,
        v2: gamma.clone(),
        lambda1: DMatrix::zeros(m, k),
        lambda2: DMatrix::zeros(k, k),
        gamma,
        c_mat,
        c_inv,
        c_sqrt,
        c_inv_sqrt,
        a_vec,
        nu: DVector::zeros(k),
        radius: config.resolved_radius(w),
        iteration: 0,
    })
}

/// `prox_h(W̃γ + Λ1/ρ, μ/ρ)`; the identity map when `μ = 0`.
pub fn update_v1<T: Real>(
    state: &SolverState<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Result<DMatrix<T>> {
    check_shapes(state, w_tilde)?;
    let arg = w_tilde * &state.gamma + &state.lambda1 / config.rho;
    if config.mu == T::zero() {
        return Ok(arg);
    }
    proxops::prox_hinge(&arg, config.mu / config.rho)
}

/// Projection of `γ + Λ2/ρ` onto `{σ_min ≥ 1/R}`.
pub fn update_v2<T: Real>(state: &SolverState<T>, config: &SolverConfig<T>) -> Result<DMatrix<T>> {
    proxops::project_min_singular(&(&state.gamma + &state.lambda2 / config.rho), state.zeta())
}

/// `A = C⁻¹Bᵀ` with `B = V1ᵀW̃ + V2ᵀ − Λ2ᵀ/ρ − Λ1ᵀW̃/ρ`: the unconstrained
/// minimizer of the quadratic part of the `γ` subproblem.
fn quadratic_center<T: Real>(state: &SolverState<T>, w_tilde: &DMatrix<T>, rho: T) -> DMatrix<T> {
    let b_t = w_tilde.transpose() * &state.v1 + &state.v2
        - &state.lambda2 / rho
        - w_tilde.transpose() * &state.lambda1 / rho;
    &state.c_inv * b_t
}

/// The frozen-basis `γ` step with all intermediate quantities.
pub fn frozen_basis_gamma_step<T: Real>(
    state: &SolverState<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Result<FrozenBasisStep<T>> {
    check_shapes(state, w_tilde)?;
    let k = state.k();
    let rho = config.rho;
    let a = quadratic_center(state, w_tilde, rho);
    let dec = linalg::svd(&a)?;
    let e = dec.u.transpose() * &state.c_mat * &dec.u;
    let f = &e * DMatrix::from_diagonal(&dec.s);
    let e_diag = e.diagonal();
    let f_diag = f.diagonal();
    let two = T::of(2.0);
    let d_hat = DVector::from_fn(k, |i, _| {
        let ratio = f_diag[i] / e_diag[i];
        (ratio + (ratio * ratio + T::of(8.0) / (rho * e_diag[i])).sqrt()) / two
    });
    let gamma_plus = dec.recompose(&d_hat);

    let ones = DVector::from_element(k, T::one());
    let w_row = ones.transpose() * &state.c_inv;
    let denom = w_row.sum();
    let excess = &gamma_plus * &ones - &state.a_vec;
    let gamma = &gamma_plus - excess * (w_row / denom);
    Ok(FrozenBasisStep {
        gamma,
        gamma_plus,
        d_hat,
        e_diag,
        f_diag,
    })
}

/// Minimizer of `-log det(YYᵀ) + (ρ/2)‖Y − Z‖²` over matrices whose
/// determinant has sign `sign`. On the other component the smallest singular
/// direction takes the negative root.
fn logdet_prox<T: Real>(z: &DMatrix<T>, rho: T, sign: T) -> Result<DMatrix<T>> {
    let dec = linalg::svd(z)?;
    let c = T::of(8.0) / rho;
    let two = T::of(2.0);
    let mut d = dec.s.map(|s| (s + (s * s + c).sqrt()) / two);
    let orientation = dec.u.determinant() * dec.v_t.determinant();
    if let Some(last) = d.len().checked_sub(1) {
        if orientation * sign < T::zero() {
            let s = dec.s[last];
            d[last] = (s - (s * s + c).sqrt()) / two;
        }
    }
    Ok(dec.recompose(&d))
}

/// `γ(ν) = C^{-1/2} prox(C^{1/2}A − C^{-1/2}ν1ᵀ/ρ)` on the component with
/// `sign(det γ) = sign`.
fn gamma_of_nu<T: Real>(
    state: &SolverState<T>,
    ca: &DMatrix<T>,
    nu: &DVector<T>,
    rho: T,
    sign: T,
) -> Result<DMatrix<T>> {
    let k = state.k();
    let shift = (&state.c_inv_sqrt * nu) * DVector::from_element(k, T::one() / rho).transpose();
    Ok(&state.c_inv_sqrt * logdet_prox(&(ca - shift), rho, sign)?)
}

/// Newton on `γ(ν)1 = a` within one determinant-sign component.
fn solve_component<T: Real>(
    state: &SolverState<T>,
    ca: &DMatrix<T>,
    rho: T,
    sign: T,
) -> Result<(DMatrix<T>, DVector<T>)> {
    let k = state.k();
    let ones = DVector::from_element(k, T::one());
    let residual = |nu: &DVector<T>| -> Result<(DMatrix<T>, DVector<T>)> {
        let g = gamma_of_nu(state, ca, nu, rho, sign)?;
        let r = &g * &ones - &state.a_vec;
        Ok((g, r))
    };
    let inf_norm = |v: &DVector<T>| v.amax();

    // γ(ν)1 − a is the negated gradient of a concave dual on each component,
    // so Newton with backtracking on the residual norm is well behaved.
    let tol = T::of(1e-13);
    let h = T::of(1e-7);
    let mut nu = state.nu.clone();
    let (mut gamma, mut res) = residual(&nu)?;
    for _ in 0..50 {
        if inf_norm(&res) < tol {
            break;
        }
        let mut jac = DMatrix::zeros(k, k);
        for j in 0..k {
            let mut probe = nu.clone();
            probe[j] += h;
            let (_, rj) = residual(&probe)?;
            jac.set_column(j, &((rj - &res) / h));
        }
        let Some(step) = jac.lu().solve(&res) else {
            break;
        };
        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let cand = &nu - &step * t;
            let (g, r) = residual(&cand)?;
            if inf_norm(&r) < inf_norm(&res) {
                nu = cand;
                gamma = g;
                res = r;
                accepted = true;
                break;
            }
            t *= T::of(0.5);
        }
        if !accepted {
            break;
        }
    }
    // absorb what Newton left over so the constraint holds to rounding
    gamma -= &res * (ones.transpose() / T::from_count(k));
    Ok((gamma, nu))
}

/// `−2 log|det γ| + (ρ/2) tr((γ − A)ᵀC(γ − A))`, the `γ` subproblem up to a
/// constant.
fn gamma_value<T: Real>(state: &SolverState<T>, center: &DMatrix<T>, rho: T, g: &DMatrix<T>) -> T {
    let det = g.determinant().abs();
    if !(det > T::zero()) {
        return T::one() / T::zero();
    }
    let d = g - center;
    let quad = (d.transpose() * &state.c_mat * &d).trace();
    -T::of(2.0) * det.ln() + rho / T::of(2.0) * quad
}

/// Orthonormal basis of `{x : 1ᵀx = 0}` as the columns of a `K × (K−1)` matrix.
fn sum_zero_basis<T: Real>(k: usize) -> DMatrix<T> {
    let centering =
        DMatrix::identity(k, k) - DMatrix::from_element(k, k, T::one() / T::from_count(k));
    let (_, vecs) = linalg::sym_eigen(&centering);
    vecs.columns(0, k - 1).into_owned()
}

/// Damped Newton on `{γ : γ1 = a}` starting from a feasible `γ`. The Hessian
/// is shifted to be positive definite and every step decreases the objective.
fn polish_gamma<T: Real>(
    state: &SolverState<T>,
    center: &DMatrix<T>,
    rho: T,
    mut gamma: DMatrix<T>,
) -> DMatrix<T> {
    let k = state.k();
    if k < 2 {
        return gamma;
    }
    let q = sum_zero_basis::<T>(k);
    let n = k * (k - 1);
    let two = T::of(2.0);
    let mut value = gamma_value(state, center, rho, &gamma);
    for _ in 0..50 {
        let Some(inv) = gamma.clone().try_inverse() else {
            break;
        };
        let inv_t = inv.transpose();
        let grad = (&inv_t * -two + (&state.c_mat * (&gamma - center)) * rho) * &q;
        let g = DVector::from_iterator(n, grad.iter().copied());
        let scale = T::one() + linalg::max_abs(&gamma);
        if g.amax() <= T::of(1e-12) * scale {
            break;
        }
        let mut hess = DMatrix::zeros(n, n);
        for col in 0..n {
            let mut e = DMatrix::zeros(k, k - 1);
            e[col] = T::one();
            let d = &e * q.transpose();
            let hd = (&inv_t * d.transpose() * &inv_t * two + &state.c_mat * &d * rho) * &q;
            hess.set_column(col, &DVector::from_iterator(n, hd.iter().copied()));
        }
        hess = (&hess + hess.transpose()) / two;
        let (vals, vecs) = linalg::sym_eigen(&hess);
        let floor = T::of(1e-8) * (T::one() + vals[0].abs());
        let shifted = vals.map(|l| if l > floor { l } else { l.abs().max(floor) });
        let coeffs = vecs.transpose() * &g;
        let step = &vecs * coeffs.component_div(&shifted);
        let dir = DMatrix::from_column_slice(k, k - 1, step.as_slice()) * q.transpose();
        let slope = -g.dot(&step);

        let mut t = T::one();
        let mut accepted = false;
        for _ in 0..40 {
            let cand = &gamma - &dir * t;
            let v = gamma_value(state, center, rho, &cand);
            if v <= value + T::of(1e-4) * t * slope {
                gamma = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= T::of(0.5);
        }
        if !accepted {
            break;
        }
    }
    gamma
}

/// Exact `γ` step; returns the new `γ` and the constraint multiplier.
///
/// The subproblem splits by the sign of `det γ`. Each component is solved
/// through its dual; the better candidate is then refined by a primal Newton
/// method, since the dual root need not exist when the problem is nonconvex.
pub fn exact_gamma_step<T: Real>(
    state: &SolverState<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Result<(DMatrix<T>, DVector<T>)> {
    check_shapes(state, w_tilde)?;
    let rho = config.rho;
    let center = quadratic_center(state, w_tilde, rho);
    let ca = &state.c_sqrt * &center;
    let current = if state.gamma.determinant() < T::zero() {
        -T::one()
    } else {
        T::one()
    };
    let first = solve_component(state, &ca, rho, current)?;
    let second = solve_component(state, &ca, rho, -current)?;
    let (v1, v2) = (
        gamma_value(state, &center, rho, &first.0),
        gamma_value(state, &center, rho, &second.0),
    );
    let (gamma, nu) = if v2 < v1 { second } else { first };
    if !v1.min(v2).is_finite() {
        return Err(Error::Diverged {
            iteration: state.iteration,
            detail: "γ step produced a singular matrix".into(),
        });
    }
    Ok((polish_gamma(state, &center, rho, gamma), nu))
}

/// Dispatches on [`SolverConfig::gamma_step`]; returns `γ` and the
/// constraint multiplier.
pub fn update_gamma<T: Real>(
    state: &SolverState<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Result<(DMatrix<T>, DVector<T>)> {
    match config.gamma_step {
        GammaStep::Exact => exact_gamma_step(state, w_tilde, config),
        GammaStep::FrozenBasis => Ok((
            frozen_basis_gamma_step(state, w_tilde, config)?.gamma,
            state.nu.clone(),
        )),
    }
}

/// `Λ1 + ρ(W̃γ − V1)`, `Λ2 + ρ(γ − V2)`.
pub fn update_duals<T: Real>(
    state: &SolverState<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    check_shapes(state, w_tilde)?;
    let rho = config.rho;
    let l1 = &state.lambda1 + (w_tilde * &state.gamma - &state.v1) * rho;
    let l2 = &state.lambda2 + (&state.gamma - &state.v2) * rho;
    Ok((l1, l2))
}

/// `-log det(γγᵀ) + μ‖W̃γ‖_h`, evaluated through the singular values of `γ`.
pub fn objective<T: Real>(
    gamma: &DMatrix<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Objective<T> {
    let sv = linalg::singular_values(gamma);
    let sigma_min = sv
        .iter()
        .copied()
        .fold(T::one() / T::zero(), |a, b| a.min(b));
    let radius = config.resolved_radius(w_tilde);
    let feasible = sigma_min >= T::one() / radius;
    if !(sigma_min.as_f64() >= 1e-300) {
        return Objective {
            value: T::one() / T::zero(),
            feasible,
            sigma_min,
        };
    }
    let logdet = sv.iter().fold(T::zero(), |acc, &s| acc + s.ln()) * T::of(2.0);
    let hinge = if config.mu == T::zero() {
        T::zero()
    } else {
        config.mu * proxops::hinge_norm(&(w_tilde * gamma))
    };
    Objective {
        value: -logdet + hinge,
        feasible,
        sigma_min,
    }
}

/// Primal residuals, dual change relative to `gamma_prev`, and the linear
/// constraint violation.
pub fn kkt_residuals<T: Real>(
    state: &SolverState<T>,
    gamma_prev: &DMatrix<T>,
    w_tilde: &DMatrix<T>,
    config: &SolverConfig<T>,
) -> Residuals<T> {
    let ones = DVector::from_element(state.k(), T::one());
    Residuals {
        r1: (w_tilde * &state.gamma - &state.v1).norm(),
        r2: (&state.gamma - &state.v2).norm(),
        dual_change: (gamma_prev - &state.gamma).norm() * config.rho,
        constraint: (&state.gamma * ones - &state.a_vec).amax(),
    }
}

fn all_finite<T: Real>(m: &DMatrix<T>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Step-by-step driver; [`run`] loops it to completion.
pub struct Solver<'a, T: Real> {
    w_tilde: &'a DMatrix<T>,
    config: SolverConfig<T>,
    state: SolverState<T>,
    trace: FitTrace<T>,
    started: Instant,
}

impl<'a, T: Real> Solver<'a, T> {
    pub fn new(projected: &'a ProjectedDocs<T>, config: SolverConfig<T>) -> Result<Self> {
        let state = init_state(projected, &config)?;
        Ok(Self {
            w_tilde: &projected.coords,
            config,
            state,
            trace: FitTrace::default(),
            started: Instant::now(),
        })
    }

    pub fn state(&self) -> &SolverState<T> {
        &self.state
    }

    pub fn trace(&self) -> &FitTrace<T> {
        &self.trace
    }

    pub fn config(&self) -> &SolverConfig<T> {
        &self.config
    }

    /// One full iteration; returns the record appended to the trace.
    pub fn step(&mut self) -> Result<TraceRecord<T>> {
        let w = self.w_tilde;
        let cfg = &self.config;
        let iteration = self.state.iteration + 1;
        let diverged = |what: &str| Error::Diverged {
            iteration,
            detail: format!("non-finite {what}"),
        };

        self.state.v1 = update_v1(&self.state, w, cfg)?;
        self.state.v2 = update_v2(&self.state, cfg).map_err(|_| diverged("V2"))?;
        let gamma_prev = self.state.gamma.clone();
        let (gamma, nu) = update_gamma(&self.state, w, cfg).map_err(|e| match e {
            Error::LinearAlgebra(_) => diverged("gamma"),
            other => other,
        })?;
        self.state.gamma = gamma;
        self.state.nu = nu;
        let (l1, l2) = update_duals(&self.state, w, cfg)?;
        self.state.lambda1 = l1;
        self.state.lambda2 = l2;
        self.state.iteration = iteration;

        for (name, m) in [
            ("gamma", &self.state.gamma),
            ("V1", &self.state.v1),
            ("V2", &self.state.v2),
            ("Lambda1", &self.state.lambda1),
            ("Lambda2", &self.state.lambda2),
        ] {
            if !all_finite(m) {
                return Err(diverged(name));
            }
        }

        let res = kkt_residuals(&self.state, &gamma_prev, w, cfg);
        let obj = objective(&self.state.gamma, w, cfg);
        let prev_norm = gamma_prev.norm();
        let rel_change = (&self.state.gamma - &gamma_prev).norm() / prev_norm;
        let record = TraceRecord {
            iter: iteration,
            objective: obj.value,
            r1: res.r1,
            r2: res.r2,
            sigma_min: obj.sigma_min,
            rel_change,
            ms: self.started.elapsed().as_secs_f64() * 1e3,
        };
        self.trace.records.push(record);
        Ok(record)
    }

    pub fn is_converged(&self, r: &TraceRecord<T>) -> bool {
        r.r1 < self.config.tol_primal
            && r.r2 < self.config.tol_primal
            && r.rel_change < self.config.tol_change
    }

    /// Iterates until convergence or `max_iters`.
    pub fn run(mut self) -> Result<FitResult<T>> {
        let mut stop = StopReason::MaxIterations;
        while self.state.iteration < self.config.max_iters {
            let r = self.step()?;
            if self.is_converged(&r) {
                stop = StopReason::Converged;
                break;
            }
        }
        Ok(self.finish(stop))
    }

    pub fn finish(self, stop: StopReason) -> FitResult<T> {
        let abs_det = self.state.gamma.determinant().abs();
        FitResult {
            gamma_hat: self.state.gamma.clone(),
            state: self.state,
            trace: self.trace,
            stop,
            abs_det,
        }
    }
}

/// Runs ADMM from `γ⁰ = I` to convergence or `max_iters`.
pub fn run<T: Real>(
    projected: &ProjectedDocs<T>,
    config: &SolverConfig<T>,
) -> Result<FitResult<T>> {
    Solver::new(projected, config.clone())?.run()
}
