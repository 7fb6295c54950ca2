//! Brackets for the quadratic form `⟨A₂⁰h, h⟩` and the explicit
//! large-`K` instability margin.
//!
//! The projection term of `A₂⁰` has no closed form; since it is an
//! orthogonal projection in the `|μ_e|`-weighted space,
//! `0 ≤ ‖P(v̂_φ h)‖² ≤ ‖v̂_φ h‖²`, which gives
//!
//! ```text
//!   q_lower = ∫(|∇h|² + h²/r²) − ∫ M₁ h²,   q_upper = q_lower + ∫ M₅ h²
//! ```
//!
//! with `M₁ = Σ∫ r v̂_φ μ_p dv` and `M₅ = Σ∫ |μ_e| v̂_φ² dv`.

use crate::distribution::{check_decay, check_drift_lower_bound, FamilyKind, FamilySpec, InstabilityParams, MuFunction};
use crate::elliptic::EllipticOperator;
use crate::error::{Error, Result};
use crate::geometry::MeridianGrid;
use crate::moments::{compute_moments, MomentFields, MomentQuadrature};
use crate::solver::{EquilibriumBranch, FieldPair};
use rayon::prelude::*;
use std::f64::consts::PI;

/// A normalized test field `h` with its weighted norms.
#[derive(Debug, Clone, PartialEq)]
pub struct TestFunction {
    pub k: usize,
    pub l: usize,
    pub h: Vec<f64>,
    /// `∫(|∇h|² + h²/r²) dx`, equal to 1 after normalization.
    pub norm_grad: f64,
    /// `∫_{r ≥ 1} r h² dx`.
    pub h1: f64,
    /// `∫ h² dx`.
    pub h2: f64,
}

impl TestFunction {
    /// Normalizes an arbitrary field vanishing on the walls (and the axis).
    pub fn from_field(grid: &MeridianGrid, h: Vec<f64>, k: usize, l: usize) -> Result<Self> {
        grid.check_len(&h)?;
        let op = EllipticOperator::laplace_plus_inv_r2(grid);
        let mut h: Vec<f64> = h
            .into_iter()
            .enumerate()
            .map(|(i, v)| if op.is_unknown(i) { v } else { 0.0 })
            .collect();
        let q = grid.inner(&op.apply(&h)?, &h);
        if !(q > 0.0) {
            return Err(Error::param("h", "test function has zero energy"));
        }
        let s = q.sqrt();
        h.iter_mut().for_each(|v| *v /= s);
        let norm_grad = grid.inner(&op.apply(&h)?, &h);
        let h2 = grid.inner(&h, &h);
        let h1 = (0..grid.len())
            .filter(|&i| grid.coords(i).0 >= 1.0)
            .map(|i| grid.volume_weight(i) * grid.coords(i).0 * h[i] * h[i])
            .sum();
        Ok(Self {
            k,
            l,
            h,
            norm_grad,
            h1,
            h2,
        })
    }

    /// `sin(kπ(r−r₀)/(r₁−r₀)) sin(lπ(z−z₀)/(z₁−z₀))`, normalized.
    pub fn sine_mode(grid: &MeridianGrid, k: usize, l: usize) -> Result<Self> {
        if k == 0 || l == 0 {
            return Err(Error::param("k", "mode numbers start at 1"));
        }
        let d = grid.domain;
        let h = grid.sample_interior(|r, z| {
            (k as f64 * PI * (r - d.r_min) / (d.r_max - d.r_min)).sin()
                * (l as f64 * PI * (z - d.z_min) / (d.z_max - d.z_min)).sin()
        });
        Self::from_field(grid, h, k, l)
    }
}

/// All sine modes with `k, l ≤ max_mode`.
pub fn test_bank(grid: &MeridianGrid, max_mode: usize) -> Result<Vec<TestFunction>> {
    let mut out = Vec::new();
    for k in 1..=max_mode {
        for l in 1..=max_mode {
            out.push(TestFunction::sine_mode(grid, k, l)?);
        }
    }
    Ok(out)
}

/// `(q_lower, q_upper)` from precomputed moments.
pub fn bracket_from_moments(grid: &MeridianGrid, h: &TestFunction, mom: &MomentFields) -> (f64, f64) {
    let mut drift = 0.0;
    let mut proj = 0.0;
    for i in 0..grid.len() {
        let w = grid.volume_weight(i) * h.h[i] * h.h[i];
        drift += w * mom.m1[i];
        proj += w * mom.m5[i];
    }
    let lower = h.norm_grad - drift;
    (lower, lower + proj)
}

/// `(q_lower, q_upper)` for `h` at the given fields and densities.
pub fn a2_bracket(
    h: &TestFunction,
    fields: &FieldPair,
    mus: (&MuFunction, &MuFunction),
    grid: &MeridianGrid,
    quad: &MomentQuadrature,
) -> Result<(f64, f64)> {
    let mom = compute_moments(grid, fields, mus, quad)?;
    Ok(bracket_from_moments(grid, h, &mom))
}

/// Inputs of the instability margin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginConstants {
    pub h1: f64,
    pub h2: f64,
    pub c_p: f64,
    pub c_mu: f64,
    pub c_mu_prime: f64,
    pub c_nu: f64,
    pub m: f64,
    pub eps: f64,
    pub delta: f64,
    pub b: f64,
}

impl MarginConstants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("h1", self.h1),
            ("h2", self.h2),
            ("c_p", self.c_p),
            ("c_mu", self.c_mu),
            ("c_mu_prime", self.c_mu_prime),
            ("c_nu", self.c_nu),
            ("b", self.b),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.m > -1.0 && self.m < 1.0) {
            return Err(Error::param("m", format!("must lie in (-1, 1), got {}", self.m)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0 - self.m.abs()) {
            return Err(Error::param("eps", format!("must lie in (0, 1 - |m|), got {}", self.eps)));
        }
        if !(self.delta > 1.0) {
            return Err(Error::param("delta", format!("must exceed 1, got {}", self.delta)));
        }
        Ok(())
    }

    /// `C₁ = 2^{−1−ε/2} b^{−ε}`.
    pub fn c1(&self) -> f64 {
        2f64.powf(-1.0 - 0.5 * self.eps) * self.b.powf(-self.eps)
    }

    /// `C₂ = 8π/3 + 4π²/(δ−1)`.
    pub fn c2(&self) -> f64 {
        8.0 * PI / 3.0 + 4.0 * PI * PI / (self.delta - 1.0)
    }
}

/// `1 − a K^α + Σ cᵢ K^{βᵢ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginPolynomial {
    pub constant: f64,
    /// `(coefficient, exponent)` pairs; the first is the dominant negative term.
    pub terms: Vec<(f64, f64)>,
}

impl MarginPolynomial {
    pub fn from_constants(c: &MarginConstants) -> Result<Self> {
        c.validate()?;
        let two_d = 2f64.powf(c.delta);
        let m = c.m;
        Ok(Self {
            constant: 1.0,
            terms: vec![
                (-c.h1 * c.c1() * c.c_nu * c.c_mu_prime, 1.0 + m - c.eps),
                (120.0 * two_d * PI * PI * c.b * c.b * (c.h1 + c.h2) * c.c_mu * c.c_mu, 2.0 * m),
                (two_d * c.h2 * c.c2() * c.c_mu, m),
                (256.0 * PI * PI * c.c_p * c.c_mu * c.c_mu * c.h2, 2.0 * m),
            ],
        })
    }

    pub fn terms_at(&self, k: f64) -> Vec<f64> {
        self.terms.iter().map(|(a, e)| a * k.powf(*e)).collect()
    }

    pub fn eval(&self, k: f64) -> f64 {
        self.constant + self.terms_at(k).iter().sum::<f64>()
    }

    pub fn derivative(&self, k: f64) -> f64 {
        self.terms
            .iter()
            .map(|(a, e)| if *e == 0.0 { 0.0 } else { a * e * k.powf(e - 1.0) })
            .sum()
    }

    /// Smallest point of a log grid on `[k_lo, k_hi]` beyond which the
    /// sampled derivative stays negative.
    pub fn monotone_from(&self, k_lo: f64, k_hi: f64, samples: usize) -> Option<f64> {
        let grid = log_grid(k_lo, k_hi, samples);
        let mut start = None;
        for &k in grid.iter().rev() {
            if self.derivative(k) < 0.0 {
                start = Some(k);
            } else {
                break;
            }
        }
        start
    }

    /// Smallest `K ≥ k_lo` on which the margin turns negative and stays
    /// negative up to `k_hi`, located by a log-grid scan and bisection.
    pub fn threshold(&self, k_lo: f64, k_hi: f64) -> Option<f64> {
        let grid = log_grid(k_lo, k_hi, 400);
        if self.eval(k_hi) >= 0.0 {
            return None;
        }
        // Last sign change on the grid.
        let mut idx = grid.len() - 1;
        while idx > 0 && self.eval(grid[idx - 1]) < 0.0 {
            idx -= 1;
        }
        if idx == 0 {
            return Some(grid[0]);
        }
        let (mut a, mut b) = (grid[idx - 1], grid[idx]);
        for _ in 0..200 {
            let mid = (a * b).sqrt();
            if self.eval(mid) < 0.0 {
                b = mid;
            } else {
                a = mid;
            }
            if b / a - 1.0 < 1e-13 {
                break;
            }
        }
        Some(b)
    }
}

fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
}

/// The four terms of the margin at `K` after the leading 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarginTerms {
    pub dominant: f64,
    pub coupling: f64,
    pub potential: f64,
    pub poincare: f64,
}

/// Margin value and its terms.
pub fn instability_margin(k: f64, c: &MarginConstants) -> Result<(f64, MarginTerms)> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::param("K", format!("must be positive, got {k}")));
    }
    let poly = MarginPolynomial::from_constants(c)?;
    let t = poly.terms_at(k);
    Ok((
        poly.eval(k),
        MarginTerms {
            dominant: t[0],
            coupling: t[1],
            potential: t[2],
            poincare: t[3],
        },
    ))
}

/// `8√2 π C_μ K^m`, the operator-norm bound of the coupling term.
pub fn adjoint_coupling_norm_bound(c_mu: f64, k: f64, m: f64) -> f64 {
    8.0 * 2f64.sqrt() * PI * c_mu * k.powf(m)
}

/// Poincaré-constant estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoincareEstimate {
    pub c_p: f64,
    pub lambda_min: f64,
    pub iterations: usize,
}

/// `c_P = 1/λ_min` of the discrete Dirichlet `−Δ` by inverse iteration with
/// a weighted Rayleigh quotient, to relative tolerance `1e-6`.
pub fn c_p_estimate(grid: &MeridianGrid) -> Result<PoincareEstimate> {
    let op = EllipticOperator::laplace(grid);
    let d = grid.domain;
    let mut x = grid.sample_interior(|r, z| {
        (PI * (r - d.r_min) / (d.r_max - d.r_min)).sin().abs().max(1e-3) * (PI * (z - d.z_min) / (d.z_max - d.z_min)).sin()
    });
    for (i, v) in x.iter_mut().enumerate() {
        if !op.is_unknown(i) {
            *v = 0.0;
        }
    }
    let wdot = |a: &[f64], b: &[f64]| -> f64 { (0..a.len()).map(|i| grid.radial_weight(i) * a[i] * b[i]).sum() };
    let mut lambda = f64::NAN;
    let cap = 500;
    for it in 0..cap {
        let n = wdot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= n);
        let ax = op.apply(&x)?;
        let new = wdot(&ax, &x);
        if (new - lambda).abs() <= 1e-6 * new.abs() * 1e-3 {
            return Ok(PoincareEstimate {
                c_p: 1.0 / new,
                lambda_min: new,
                iterations: it,
            });
        }
        lambda = new;
        x = op.solve_with_tolerance(&x, 1e-12)?;
    }
    Err(Error::NoConvergence {
        what: "inverse iteration",
        iterations: cap,
        residual: lambda,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    CertifiedStableAtK0,
    CertifiedUnstable,
    Indeterminate,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::CertifiedStableAtK0 => "certified-stable-at-K0",
            Verdict::CertifiedUnstable => "certified-unstable",
            Verdict::Indeterminate => "indeterminate",
        }
    }
}

/// Per-entry outcome of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub k: f64,
    pub q_lower: Vec<f64>,
    pub q_upper: Vec<f64>,
    /// Smallest margin over the bank, when the instability data is present.
    pub margin: Option<f64>,
    pub margin_terms: Option<MarginTerms>,
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn q_lower_min(&self) -> f64 {
        self.q_lower.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn q_upper_min(&self) -> f64 {
        self.q_upper.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Sampling box for the numeric hypothesis checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HypothesisBox {
    pub e_range: (f64, f64),
    pub p_max: f64,
    pub samples_per_side: usize,
}

impl Default for HypothesisBox {
    fn default() -> Self {
        Self {
            e_range: (1.0, 30.0),
            p_max: 3.0,
            samples_per_side: 60,
        }
    }
}

/// Outcome of the numeric checks of the large-`K` hypotheses.
#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisReport {
    pub params_valid: bool,
    pub inf_r_positive: bool,
    pub d_greater_than_one: bool,
    pub electrons_absent: bool,
    pub mu_e_negative: bool,
    /// Smallest ratio `p μ_p / (C'_μ C_ν |p|⟨p⟩^{−ε} e^{−e})` on `|p| ≥ 1`.
    pub drift_ratio: f64,
    /// Largest decay ratio against `C_μ` on the box.
    pub decay_ratio: f64,
}

impl HypothesisReport {
    pub fn all_pass(&self) -> bool {
        self.params_valid
            && self.inf_r_positive
            && self.d_greater_than_one
            && self.electrons_absent
            && self.mu_e_negative
            && self.drift_ratio >= 1.0 - 1e-9
            && self.decay_ratio <= 1.0
    }
}

/// Checks the instability hypotheses for `spec` on `grid`.
pub fn check_hypotheses(spec: &FamilySpec, grid: &MeridianGrid, bx: &HypothesisBox) -> HypothesisReport {
    let d = grid.domain;
    let mut rep = HypothesisReport {
        params_valid: false,
        inf_r_positive: d.r_min > 0.0,
        d_greater_than_one: d.r_max > 1.0,
        electrons_absent: spec.is_single_ion(),
        mu_e_negative: false,
        drift_ratio: 0.0,
        decay_ratio: f64::INFINITY,
    };
    let Some(params) = spec.instability else {
        return rep;
    };
    rep.params_valid = params.validate().is_ok() && spec.kind != FamilyKind::Custom;
    let mu = &spec.mu_plus;
    let n = bx.samples_per_side.max(2);
    rep.mu_e_negative = (0..n).all(|a| {
        let e = bx.e_range.0 + (bx.e_range.1 - bx.e_range.0) * a as f64 / (n - 1) as f64;
        (0..n).all(|b| {
            let p = -bx.p_max + 2.0 * bx.p_max * b as f64 / (n - 1) as f64;
            mu.d_e(e, p) < 0.0
        })
    });
    rep.drift_ratio = check_drift_lower_bound(mu, &params, bx.e_range, bx.p_max, n);
    let mut bounded = mu.clone();
    bounded.decay_exponent = params.delta;
    bounded.decay_constant = params.c_mu;
    rep.decay_ratio = check_decay(&bounded, bx.e_range, (-bx.p_max, bx.p_max), n * n)
        .map(|r| r.max_ratio)
        .unwrap_or(f64::INFINITY);
    rep
}

/// Margin constants for a test function under the given parameters.
pub fn margin_constants(params: &InstabilityParams, h: &TestFunction, c_p: f64, b: f64) -> MarginConstants {
    MarginConstants {
        h1: h.h1,
        h2: h.h2,
        c_p,
        c_mu: params.c_mu,
        c_mu_prime: params.c_mu_prime,
        c_nu: params.c_nu,
        m: params.m,
        eps: params.eps,
        delta: params.delta,
        b,
    }
}

/// Smallest threshold `K*` over the bank, with `K ≥ 1` required.
pub fn instability_threshold(params: &InstabilityParams, bank: &[TestFunction], c_p: f64, b: f64, k_max: f64) -> Result<Option<f64>> {
    let mut best: Option<f64> = None;
    for h in bank {
        let poly = MarginPolynomial::from_constants(&margin_constants(params, h, c_p, b))?;
        if let Some(k) = poly.threshold(1.0, k_max) {
            best = Some(best.map_or(k, |b: f64| b.min(k)));
        }
    }
    Ok(best)
}

/// Options of a sweep.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOptions {
    pub hypothesis_box: HypothesisBox,
    /// `c_P`; estimated from the grid when `None`.
    pub c_p: Option<f64>,
}

/// Brackets, margin and verdict at every branch entry.
pub fn branch_stability_sweep(
    branch: &EquilibriumBranch,
    spec: &FamilySpec,
    bank: &[TestFunction],
    grid: &MeridianGrid,
    quad: &MomentQuadrature,
    options: &SweepOptions,
) -> Result<Vec<StabilityReport>> {
    if branch.entries.is_empty() {
        return Err(Error::param("branch", "empty branch"));
    }
    if bank.is_empty() {
        return Err(Error::param("test_bank", "empty test bank"));
    }
    let hyp = spec.instability.map(|_| check_hypotheses(spec, grid, &options.hypothesis_box));
    let c_p = match (options.c_p, spec.instability) {
        (Some(c), _) => c,
        (None, Some(_)) => c_p_estimate(grid)?.c_p,
        (None, None) => f64::NAN,
    };
    let b = grid.domain.sup_r();
    branch
        .entries
        .par_iter()
        .map(|entry| {
            let (mp, mm) = spec.family_at(entry.k);
            let mom = compute_moments(grid, &entry.fields, (&mp, &mm), quad)?;
            let (q_lower, q_upper): (Vec<f64>, Vec<f64>) = bank.iter().map(|h| bracket_from_moments(grid, h, &mom)).unzip();
            let mut margin = None;
            let mut margin_terms = None;
            if let (Some(params), true) = (spec.instability, entry.k > 0.0) {
                for h in bank {
                    let (v, t) = instability_margin(entry.k, &margin_constants(&params, h, c_p, b))?;
                    if margin.is_none_or(|m| v < m) {
                        margin = Some(v);
                        margin_terms = Some(t);
                    }
                }
            }
            let stable_k0 = entry.k == 0.0
                && is_p_independent_on_samples(&mp)
                && is_p_independent_on_samples(&mm)
                && mu_e_nonpositive_on_samples(&mp)
                && mu_e_nonpositive_on_samples(&mm)
                && q_lower.iter().all(|&q| q >= 0.0);
            let unstable = hyp.as_ref().is_some_and(|h| h.all_pass()) && entry.k >= 1.0 && margin.is_some_and(|m| m < 0.0);
            let verdict = if stable_k0 {
                Verdict::CertifiedStableAtK0
            } else if unstable {
                Verdict::CertifiedUnstable
            } else {
                Verdict::Indeterminate
            };
            Ok(StabilityReport {
                k: entry.k,
                q_lower,
                q_upper,
                margin,
                margin_terms,
                verdict,
            })
        })
        .collect()
}

fn sample_points() -> impl Iterator<Item = (f64, f64)> {
    (0..40).flat_map(|a| (0..41).map(move |b| (0.5 * a as f64, -10.0 + 0.5 * b as f64)))
}

fn is_p_independent_on_samples(mu: &MuFunction) -> bool {
    mu.is_p_independent() || sample_points().all(|(e, p)| mu.d_p(e, p) == 0.0)
}

fn mu_e_nonpositive_on_samples(mu: &MuFunction) -> bool {
    sample_points().all(|(e, p)| mu.d_e(e, p) <= 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::{instability_family, Amplitude};
    use crate::geometry::MeridianDomain;
    use crate::solver::BranchEntry;
    use crate::solver::StopReason;

    fn torus(n: usize) -> MeridianGrid {
        MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn bank_is_normalized() {
        let g = torus(17);
        let bank = test_bank(&g, 4).unwrap();
        assert_eq!(bank.len(), 16);
        for h in &bank {
            assert!((h.norm_grad - 1.0).abs() < 1e-12);
            assert!(h.h1 > 0.0 && h.h2 > 0.0 && h.h1 >= h.h2);
        }
    }

    #[test]
    fn toy_margin_polynomial() {
        let p = MarginPolynomial {
            constant: 1.0,
            terms: vec![(-1.0, 0.5), (1.0, 0.0), (1.0, 0.0), (1.0, 0.0)],
        };
        assert_eq!(p.eval(16.0), 0.0);
        assert!(p.eval(15.9) > 0.0 && p.eval(16.1) < 0.0);
        let k = p.threshold(1.0, 1e6).unwrap();
        assert!((k - 16.0).abs() < 1e-9);
    }

    #[test]
    fn coupling_bound_value() {
        assert!((adjoint_coupling_norm_bound(1.0, 1.0, 0.3) - 35.543_063_505_266_93).abs() < 1e-12);
    }

    fn constants(c_mu_prime: f64) -> MarginConstants {
        MarginConstants {
            h1: 0.07,
            h2: 0.05,
            c_p: 0.05,
            c_mu: 50.0,
            c_mu_prime,
            c_nu: 1000.0,
            m: -0.9,
            eps: 0.05,
            delta: 4.5,
            b: 2.0,
        }
    }

    #[test]
    fn margin_decreases_and_threshold_shrinks() {
        let c = constants(0.6);
        let p = MarginPolynomial::from_constants(&c).unwrap();
        let k_mono = p.monotone_from(1.0, 1e12, 200).unwrap();
        let grid = log_grid(k_mono, 1e12, 50);
        for w in grid.windows(2) {
            assert!(p.eval(w[1]) < p.eval(w[0]));
        }
        let k1 = p.threshold(1.0, 1e12).unwrap();
        let p10 = MarginPolynomial::from_constants(&constants(6.0)).unwrap();
        let k2 = p10.threshold(1.0, 1e12).unwrap();
        assert!(k2 < k1);
        assert!(p.eval(k1) < 0.0 && p.eval(k1 * 0.999) >= 0.0);
        let (v, t) = instability_margin(k1 * 2.0, &c).unwrap();
        assert!(v < 0.0 && t.dominant < 0.0 && t.coupling > 0.0);
        assert!(instability_margin(1.0, &MarginConstants { eps: 0.2, ..c }).is_err());
    }

    #[test]
    fn poincare_constant() {
        let g = torus(33);
        let est = c_p_estimate(&g).unwrap();
        // Flat-box value 1/(2π²) with a small curvature correction.
        let flat = 1.0 / (2.0 * PI * PI);
        assert!(est.c_p > flat && est.c_p < 1.03 * flat, "{}", est.c_p);
        let g2 = MeridianGrid::new(g.domain.scaled(2.0).unwrap(), 33, 33).unwrap();
        let est2 = c_p_estimate(&g2).unwrap();
        assert!((est2.c_p / est.c_p - 4.0).abs() < 0.05);
    }

    fn entry(k: f64, grid: &MeridianGrid) -> BranchEntry {
        BranchEntry {
            k,
            fields: FieldPair::zeros(grid),
            residual: 0.0,
            phi_inf: 0.0,
            a_inf: 0.0,
            min_phi: 0.0,
            max_phi: 0.0,
            jac_cond: f64::NAN,
            iterations: 0,
        }
    }

    #[test]
    fn zero_density_brackets_collapse() {
        let g = torus(9);
        let bank = test_bank(&g, 2).unwrap();
        let spec = FamilySpec::fixed(MuFunction::zero(), MuFunction::zero());
        let br = EquilibriumBranch {
            entries: vec![entry(0.0, &g), entry(1.0, &g)],
            stop_reason: StopReason::Completed,
        };
        let reps = branch_stability_sweep(&br, &spec, &bank, &g, &MomentQuadrature::default(), &SweepOptions::default()).unwrap();
        for r in &reps {
            for (a, b) in r.q_lower.iter().zip(&r.q_upper) {
                assert!((a - 1.0).abs() < 1e-12 && (b - 1.0).abs() < 1e-12);
            }
        }
        assert_eq!(reps[0].verdict, Verdict::CertifiedStableAtK0);
        assert_eq!(reps[1].verdict, Verdict::Indeterminate);
    }

    #[test]
    fn kinetic_background_is_stable_at_zero() {
        let g = torus(9);
        let bank = test_bank(&g, 2).unwrap();
        let mut spec = FamilySpec::single_ion(FamilyKind::Case1, MuFunction::even(1.0, 5.0).unwrap(), Amplitude::Quadratic);
        spec.gamma = 1.0;
        spec.mu0 = MuFunction::maxwellian(1.0, 5.0).unwrap();
        let br = EquilibriumBranch {
            entries: vec![entry(0.0, &g)],
            stop_reason: StopReason::Completed,
        };
        let reps = branch_stability_sweep(&br, &spec, &bank, &g, &MomentQuadrature::default(), &SweepOptions::default()).unwrap();
        let r = &reps[0];
        assert_eq!(r.verdict, Verdict::CertifiedStableAtK0);
        for (a, b) in r.q_lower.iter().zip(&r.q_upper) {
            assert!((a - 1.0).abs() < 1e-14 && *b >= *a);
        }
    }

    #[test]
    fn hypotheses_for_drifted_family() {
        let g = torus(5);
        let eps = 0.05;
        let params = InstabilityParams {
            m: -0.9,
            eps,
            c_mu_prime: (1.0 - eps) / 2f64.sqrt(),
            c_nu: 1.0,
            c_mu: 70.0,
            delta: 4.5,
        };
        let mut spec = FamilySpec::single_ion(FamilyKind::Case2, instability_family(-0.9, eps, 1.0, 4.5).unwrap(), Amplitude::PowerLaw { m: -0.9 });
        spec.instability = Some(params);
        let rep = check_hypotheses(&spec, &g, &HypothesisBox::default());
        assert!(rep.all_pass(), "{rep:?}");
        spec.instability = Some(InstabilityParams { c_mu: 1.0, ..params });
        assert!(!check_hypotheses(&spec, &g, &HypothesisBox::default()).all_pass());
        let cyl = MeridianGrid::new(MeridianDomain::new(0.0, 2.0, 0.0, 1.0).unwrap(), 5, 5).unwrap();
        spec.instability = Some(params);
        assert!(!check_hypotheses(&spec, &cyl, &HypothesisBox::default()).inf_r_positive);
    }
}
