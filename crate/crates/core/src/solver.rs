//! Fixed-`K` solves of `G(u, w, K) = 0` and natural-parameter continuation
//! in `K`.
//!
//! With `u = A_φ`, `w = φ`, `L = −Δ + 1/r²`:
//!
//! ```text
//!   G_u = u − L⁻¹ j_φ(u, w)
//!   G_w = w − (−Δ)⁻¹ ρ(u, w)
//! ```
//!
//! The Fréchet derivative is `I` minus a compact operator,
//!
//! ```text
//!   J(δu, δw) = ( δu − L⁻¹(M₁δu + M₂δw),  δw − (−Δ)⁻¹(M₃δu + M₄δw) )
//! ```
//!
//! with the multiplier fields from [`crate::moments`]. Newton steps solve
//! `J δ = −G` by restarted GMRES; a condition estimate from the Arnoldi
//! Hessenberg matrix flags near-singular Jacobians.

use crate::distribution::{FamilySpec, MuFunction};
use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::geometry::{MeridianGrid, NodeKind};
use crate::moments::{compute_moments, MomentFields, MomentQuadrature};
use nalgebra::DMatrix;

/// Potentials on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldPair {
    /// Electric potential `φ`.
    pub phi: Vec<f64>,
    /// Azimuthal magnetic potential `A_φ`.
    pub a_phi: Vec<f64>,
    /// Optional fixed external azimuthal potential.
    pub a_ext: Option<Vec<f64>>,
}

impl FieldPair {
    pub fn zeros(grid: &MeridianGrid) -> Self {
        Self {
            phi: grid.zeros(),
            a_phi: grid.zeros(),
            a_ext: None,
        }
    }

    pub fn with_external(mut self, a_ext: Vec<f64>) -> Self {
        self.a_ext = Some(a_ext);
        self
    }

    /// `A_φ + A_ext` at node `k`.
    #[inline]
    pub fn total_a(&self, k: usize) -> f64 {
        self.a_phi[k] + self.a_ext.as_ref().map_or(0.0, |e| e[k])
    }

    pub fn phi_inf(&self) -> f64 {
        self.phi.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn a_inf(&self) -> f64 {
        self.a_phi.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    /// `‖(φ, A_φ)‖_∞`.
    pub fn inf_norm(&self) -> f64 {
        self.phi_inf().max(self.a_inf())
    }

    pub fn min_phi(&self) -> f64 {
        self.phi.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_phi(&self) -> f64 {
        self.phi.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check(&self, grid: &MeridianGrid) -> Result<()> {
        grid.check_len(&self.phi)?;
        grid.check_len(&self.a_phi)?;
        if let Some(e) = &self.a_ext {
            grid.check_len(e)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Picard,
    Newton,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions {
    pub method: Method,
    /// Stop when the discrete `L²` norm of `G` is at most this.
    pub tolerance: f64,
    pub max_newton: usize,
    pub max_picard: usize,
    /// Relative tolerance of the inner elliptic solves.
    pub inner_tolerance: f64,
    pub gmres_restart: usize,
    pub gmres_max_iter: usize,
    /// Condition estimates above this are reported as near-singular.
    pub condition_limit: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Newton,
            tolerance: 1e-8,
            max_newton: 40,
            max_picard: 500,
            inner_tolerance: 1e-12,
            gmres_restart: 60,
            gmres_max_iter: 300,
            condition_limit: 1e10,
        }
    }
}

/// Residual fields and their combined discrete `L²` norm.
#[derive(Debug, Clone, PartialEq)]
pub struct Residual {
    pub g_u: Vec<f64>,
    pub g_w: Vec<f64>,
    pub norm: f64,
}

/// Result of a fixed-`K` solve.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub fields: FieldPair,
    pub residual: f64,
    pub iterations: usize,
    /// Condition estimate of the Jacobian at the solution (Newton only).
    pub jac_cond: f64,
    /// Residual norm after each iteration, starting with the initial guess.
    pub history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationSchedule {
    pub start: f64,
    pub stop: f64,
    pub initial_step: f64,
    pub min_step: f64,
    pub max_step: f64,
    /// Sweep stops once `‖(φ, A_φ)‖_∞` exceeds this.
    pub blow_up: f64,
}

impl ContinuationSchedule {
    pub fn new(start: f64, stop: f64, initial_step: f64) -> Self {
        Self {
            start,
            stop,
            initial_step,
            min_step: initial_step * 1e-3,
            max_step: initial_step * 8.0,
            blow_up: 1e6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start >= 0.0 && self.start.is_finite()) {
            return Err(Error::param("start", format!("must be >= 0, got {}", self.start)));
        }
        if !(self.stop >= self.start && self.stop.is_finite()) {
            return Err(Error::param("stop", format!("must be >= start, got {}", self.stop)));
        }
        if !(self.min_step > 0.0 && self.min_step <= self.initial_step && self.initial_step <= self.max_step) {
            return Err(Error::param(
                "initial_step",
                "need 0 < min_step <= initial_step <= max_step",
            ));
        }
        if !(self.blow_up > 0.0) {
            return Err(Error::param("blow_up", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Completed,
    MinStep,
    BlowUp,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::MinStep => "min_step",
            StopReason::BlowUp => "blow_up",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchEntry {
    pub k: f64,
    pub fields: FieldPair,
    pub residual: f64,
    pub phi_inf: f64,
    pub a_inf: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    pub jac_cond: f64,
    pub iterations: usize,
}

impl BranchEntry {
    fn from_solution(k: f64, s: Solution) -> Self {
        Self {
            k,
            phi_inf: s.fields.phi_inf(),
            a_inf: s.fields.a_inf(),
            min_phi: s.fields.min_phi(),
            max_phi: s.fields.max_phi(),
            residual: s.residual,
            jac_cond: s.jac_cond,
            iterations: s.iterations,
            fields: s.fields,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumBranch {
    pub entries: Vec<BranchEntry>,
    pub stop_reason: StopReason,
}

/// Grid, family, quadrature and options of a run, with cached operators.
#[derive(Debug, Clone)]
pub struct EquilibriumSolver {
    pub grid: MeridianGrid,
    pub spec: FamilySpec,
    pub quad: MomentQuadrature,
    pub options: SolverOptions,
    laplace: EllipticOperator,
    vector: EllipticOperator,
}

/// Volume-weighted inner product on stacked `(u, w)` vectors.
struct Weighted<'a> {
    weights: &'a [f64],
}

impl Weighted<'_> {
    fn dot(&self, a: &[f64], b: &[f64]) -> f64 {
        let n = self.weights.len();
        let mut s = 0.0;
        for k in 0..n {
            s += self.weights[k] * (a[k] * b[k] + a[n + k] * b[n + k]);
        }
        s
    }

    fn norm(&self, a: &[f64]) -> f64 {
        self.dot(a, a).sqrt()
    }
}

struct GmresOutcome {
    x: Vec<f64>,
    relative_residual: f64,
    condition: f64,
}

/// Restarted GMRES in a weighted inner product with a Hessenberg-based
/// condition estimate from the last cycle.
fn gmres(
    ip: &Weighted,
    mut matvec: impl FnMut(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    rel_tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<GmresOutcome> {
    let n = b.len();
    let b_norm = ip.norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return Ok(GmresOutcome {
            x,
            relative_residual: 0.0,
            condition: 1.0,
        });
    }
    let mut total = 0;
    let mut rel;
    let mut condition = 1.0;
    while total < max_iter {
        let ax = matvec(&x)?;
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = ip.norm(&r);
        rel = beta / b_norm;
        if rel <= rel_tol {
            break;
        }
        let m = restart.min(max_iter - total).max(1);
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = DMatrix::<f64>::zeros(m + 1, m);
        let mut cs = vec![0.0; m];
        let mut sn = vec![0.0; m];
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        let mut steps = 0;
        for j in 0..m {
            let mut w = matvec(&v[j])?;
            for i in 0..=j {
                let hij = ip.dot(&w, &v[i]);
                h[(i, j)] = hij;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= hij * vk;
                }
            }
            // Second Gram-Schmidt pass for stability.
            for i in 0..=j {
                let c = ip.dot(&w, &v[i]);
                h[(i, j)] += c;
                for (wk, vk) in w.iter_mut().zip(&v[i]) {
                    *wk -= c * vk;
                }
            }
            let hn = ip.norm(&w);
            h[(j + 1, j)] = hn;
            steps = j + 1;
            total += 1;
            // Apply previous rotations to the new column of a copy.
            let mut col: Vec<f64> = (0..=j + 1).map(|i| h[(i, j)]).collect();
            for i in 0..j {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let den = (col[j] * col[j] + col[j + 1] * col[j + 1]).sqrt();
            if den == 0.0 {
                cs[j] = 1.0;
                sn[j] = 0.0;
            } else {
                cs[j] = col[j] / den;
                sn[j] = col[j + 1] / den;
            }
            g[j + 1] = -sn[j] * g[j];
            g[j] *= cs[j];
            rel = g[j + 1].abs() / b_norm;
            if hn == 0.0 || rel <= rel_tol {
                break;
            }
            v.push(w.iter().map(|x| x / hn).collect());
        }
        // Least squares on the Hessenberg block.
        let hk = h.view((0, 0), (steps + 1, steps)).into_owned();
        let sv = hk.clone().svd(false, false).singular_values;
        let (smax, smin) = sv.iter().fold((0.0f64, f64::INFINITY), |(a, b), &s| (a.max(s), b.min(s)));
        condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
        let mut rhs = nalgebra::DVector::<f64>::zeros(steps + 1);
        rhs[0] = beta;
        let y = hk
            .svd(true, true)
            .solve(&rhs, 1e-300)
            .map_err(|_| Error::NearSingular { condition })?;
        for (i, yi) in y.iter().enumerate() {
            for (xk, vk) in x.iter_mut().zip(&v[i]) {
                *xk += yi * vk;
            }
        }
        if rel <= rel_tol {
            break;
        }
    }
    // True residual for the report.
    let ax = matvec(&x)?;
    let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let true_rel = ip.norm(&r) / b_norm;
    Ok(GmresOutcome {
        x,
        relative_residual: true_rel,
        condition,
    })
}

impl EquilibriumSolver {
    pub fn new(grid: &MeridianGrid, spec: FamilySpec, quad: MomentQuadrature, options: SolverOptions) -> Result<Self> {
        spec.validate()?;
        quad.validate()?;
        if !(options.tolerance > 0.0) {
            return Err(Error::param("tolerance", "must be positive"));
        }
        Ok(Self {
            grid: grid.clone(),
            laplace: EllipticOperator::laplace(grid),
            vector: EllipticOperator::laplace_plus_inv_r2(grid),
            spec,
            quad,
            options,
        })
    }

    pub fn mus_at(&self, k: f64) -> (MuFunction, MuFunction) {
        self.spec.family_at(k)
    }

    fn weights(&self) -> Vec<f64> {
        (0..self.grid.len()).map(|k| self.grid.volume_weight(k)).collect()
    }

    /// Moments for `fields` at `K`.
    pub fn moments(&self, fields: &FieldPair, k: f64) -> Result<MomentFields> {
        let (p, m) = self.mus_at(k);
        compute_moments(&self.grid, fields, (&p, &m), &self.quad)
    }

    fn residual_from(&self, fields: &FieldPair, mom: &MomentFields) -> Result<Residual> {
        let tol = self.options.inner_tolerance;
        let lu = self.vector.solve_with_tolerance(&mom.j_phi, tol)?;
        let lw = self.laplace.solve_with_tolerance(&mom.rho, tol)?;
        let g_u: Vec<f64> = fields.a_phi.iter().zip(&lu).map(|(u, l)| u - l).collect();
        let g_w: Vec<f64> = fields.phi.iter().zip(&lw).map(|(w, l)| w - l).collect();
        let norm = (self.grid.inner(&g_u, &g_u) + self.grid.inner(&g_w, &g_w)).sqrt();
        Ok(Residual { g_u, g_w, norm })
    }

    /// `(G_u, G_w)` at `(fields, K)`.
    pub fn residual(&self, fields: &FieldPair, k: f64) -> Result<Residual> {
        fields.check(&self.grid)?;
        let mom = self.moments(fields, k)?;
        self.residual_from(fields, &mom)
    }

    fn jacobian_apply(&self, mom: &MomentFields, d: &[f64]) -> Result<Vec<f64>> {
        let n = self.grid.len();
        let (du, dw) = d.split_at(n);
        let tu: Vec<f64> = (0..n).map(|k| mom.m1[k] * du[k] + mom.m2[k] * dw[k]).collect();
        let tw: Vec<f64> = (0..n).map(|k| mom.m3[k] * du[k] + mom.m4[k] * dw[k]).collect();
        let tol = self.options.inner_tolerance;
        let lu = self.vector.solve_with_tolerance(&tu, tol)?;
        let lw = self.laplace.solve_with_tolerance(&tw, tol)?;
        let mut out = Vec::with_capacity(2 * n);
        out.extend(du.iter().zip(&lu).map(|(a, b)| a - b));
        out.extend(dw.iter().zip(&lw).map(|(a, b)| a - b));
        Ok(out)
    }

    /// Condition estimate of `J` at the given moments from a short Arnoldi
    /// run started on the unknowns.
    pub fn jacobian_condition(&self, mom: &MomentFields) -> Result<f64> {
        let n = self.grid.len();
        let w = self.weights();
        let ip = Weighted { weights: &w };
        let b: Vec<f64> = (0..2 * n)
            .map(|i| {
                let k = i % n;
                let (r, z) = self.grid.coords(k);
                let live = if i < n { self.vector.is_unknown(k) } else { self.laplace.is_unknown(k) };
                if live {
                    1.0 + 0.3 * (7.0 * r + 3.0 * z).sin()
                } else {
                    0.0
                }
            })
            .collect();
        let out = gmres(&ip, |d| self.jacobian_apply(mom, d), &b, 1e-14, 40, 40)?;
        Ok(out.condition)
    }

    /// Solve at fixed `K` from `guess` with the configured method.
    pub fn solve_at_k(&self, guess: &FieldPair, k: f64) -> Result<Solution> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::param("K", format!("must be finite and >= 0, got {k}")));
        }
        guess.check(&self.grid)?;
        let mut start = guess.clone();
        // Wall values (and A on the axis) are fixed at zero.
        for i in 0..self.grid.len() {
            if !self.laplace.is_unknown(i) {
                start.phi[i] = 0.0;
            }
            if !self.vector.is_unknown(i) {
                start.a_phi[i] = 0.0;
            }
        }
        match self.options.method {
            Method::Newton => self.newton(start, k),
            Method::Picard => self.picard(start, k),
        }
    }

    fn stack(&self, r: &Residual) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * self.grid.len());
        v.extend(r.g_u.iter().map(|x| -x));
        v.extend(r.g_w.iter().map(|x| -x));
        v
    }

    fn shifted(&self, x: &FieldPair, d: &[f64], lambda: f64) -> FieldPair {
        let n = self.grid.len();
        let mut y = x.clone();
        for k in 0..n {
            y.a_phi[k] += lambda * d[k];
            y.phi[k] += lambda * d[n + k];
        }
        y
    }

    fn newton(&self, mut x: FieldPair, k: f64) -> Result<Solution> {
        let opts = &self.options;
        let w = self.weights();
        let ip = Weighted { weights: &w };
        let mut mom = self.moments(&x, k)?;
        let mut res = self.residual_from(&x, &mom)?;
        let mut history = vec![res.norm];
        let mut cond = f64::NAN;
        for it in 0..opts.max_newton {
            if res.norm <= opts.tolerance {
                if cond.is_nan() {
                    cond = self.jacobian_condition(&mom)?;
                }
                return Ok(Solution {
                    fields: x,
                    residual: res.norm,
                    iterations: it,
                    jac_cond: cond,
                    history,
                });
            }
            let eta = res.norm.clamp(1e-13, 1e-3);
            let rhs = self.stack(&res);
            let out = gmres(
                &ip,
                |d| self.jacobian_apply(&mom, d),
                &rhs,
                eta,
                opts.gmres_restart,
                opts.gmres_max_iter,
            )?;
            cond = out.condition;
            if cond > opts.condition_limit || out.relative_residual > 0.5 {
                return Err(Error::NearSingular { condition: cond });
            }
            let mut lambda = 1.0;
            loop {
                let trial = self.shifted(&x, &out.x, lambda);
                let trial_mom = self.moments(&trial, k)?;
                let trial_res = self.residual_from(&trial, &trial_mom)?;
                if trial_res.norm <= (1.0 - 1e-4 * lambda) * res.norm || lambda <= 1.0 / 64.0 {
                    if trial_res.norm > res.norm {
                        return Err(Error::NoConvergence {
                            what: "Newton line search",
                            iterations: it + 1,
                            residual: res.norm,
                        });
                    }
                    x = trial;
                    mom = trial_mom;
                    res = trial_res;
                    break;
                }
                lambda *= 0.5;
            }
            history.push(res.norm);
        }
        if res.norm <= opts.tolerance {
            return Ok(Solution {
                fields: x,
                residual: res.norm,
                iterations: opts.max_newton,
                jac_cond: cond,
                history,
            });
        }
        Err(Error::NoConvergence {
            what: "Newton",
            iterations: opts.max_newton,
            residual: res.norm,
        })
    }

    fn picard(&self, mut x: FieldPair, k: f64) -> Result<Solution> {
        let opts = &self.options;
        let mut res = self.residual(&x, k)?;
        let mut history = vec![res.norm];
        let mut theta: f64 = 1.0;
        for it in 0..opts.max_picard {
            if res.norm <= opts.tolerance {
                return Ok(Solution {
                    fields: x,
                    residual: res.norm,
                    iterations: it,
                    jac_cond: f64::NAN,
                    history,
                });
            }
            let mut step = self.stack(&res);
            step.iter_mut().for_each(|v| *v *= theta);
            let trial = self.shifted(&x, &step, 1.0);
            let trial_res = self.residual(&trial, k)?;
            if trial_res.norm > res.norm && theta > 1.0 / 64.0 {
                theta *= 0.5;
            } else {
                x = trial;
                res = trial_res;
            }
            history.push(res.norm);
        }
        if res.norm <= opts.tolerance {
            return Ok(Solution {
                fields: x,
                residual: res.norm,
                iterations: opts.max_picard,
                jac_cond: f64::NAN,
                history,
            });
        }
        Err(Error::NoConvergence {
            what: "Picard",
            iterations: opts.max_picard,
            residual: res.norm,
        })
    }

    /// Traces the branch from `schedule.start` with warm starts.
    pub fn continue_branch(&self, schedule: &ContinuationSchedule) -> Result<EquilibriumBranch> {
        self.continue_branch_from(&FieldPair::zeros(&self.grid), schedule)
    }

    pub fn continue_branch_from(&self, guess: &FieldPair, schedule: &ContinuationSchedule) -> Result<EquilibriumBranch> {
        schedule.validate()?;
        let first = self.solve_at_k(guess, schedule.start)?;
        let mut entries = vec![BranchEntry::from_solution(schedule.start, first)];
        let mut step = schedule.initial_step;
        let mut successes = 0;
        let stop_reason = loop {
            let last = entries.last().expect("nonempty branch");
            if last.fields.inf_norm() > schedule.blow_up {
                break StopReason::BlowUp;
            }
            if last.k >= schedule.stop {
                break StopReason::Completed;
            }
            let k_next = (last.k + step).min(schedule.stop);
            match self.solve_at_k(&last.fields, k_next) {
                Ok(sol) => {
                    entries.push(BranchEntry::from_solution(k_next, sol));
                    successes += 1;
                    if successes >= 3 {
                        step = (2.0 * step).min(schedule.max_step);
                        successes = 0;
                    }
                }
                Err(_) => {
                    successes = 0;
                    step *= 0.5;
                    if step < schedule.min_step {
                        break StopReason::MinStep;
                    }
                }
            }
        };
        Ok(EquilibriumBranch { entries, stop_reason })
    }

    /// Solves at each of `ks` in turn, warm-starting from the previous
    /// solution. Stops early (with `MinStep`) at the first failure.
    pub fn solve_sequence(&self, guess: &FieldPair, ks: &[f64]) -> Result<EquilibriumBranch> {
        if ks.is_empty() {
            return Err(Error::param("ks", "no parameter values given"));
        }
        let mut entries: Vec<BranchEntry> = Vec::with_capacity(ks.len());
        let mut stop_reason = StopReason::Completed;
        for &k in ks {
            let start = entries.last().map_or(guess, |e| &e.fields);
            match self.solve_at_k(start, k) {
                Ok(sol) => entries.push(BranchEntry::from_solution(k, sol)),
                Err(e) if entries.is_empty() => return Err(e),
                Err(_) => {
                    stop_reason = StopReason::MinStep;
                    break;
                }
            }
        }
        Ok(EquilibriumBranch { entries, stop_reason })
    }
}

/// Nodes where `φ` is an unknown and `(r, z)` is strictly inside.
pub fn interior_nodes(grid: &MeridianGrid) -> impl Iterator<Item = usize> + '_ {
    (0..grid.len()).filter(move |&k| grid.kind(k) == NodeKind::Interior)
}
