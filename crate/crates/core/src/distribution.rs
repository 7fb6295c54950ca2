//! Particle density ansätze `μ(e, p)` and the parametrized families
//! `μ^{K,±}`.
//!
//! A [`MuFunction`] is a finite linear combination of base profiles, each
//! possibly evaluated at a rescaled momentum `s·p`. That is exactly the shape
//! of the two special families:
//!
//! * case 1: `μ^{K,±}(e,p) = γ μ⁰(e,p) + a±(K) μ±(e,p)`
//! * case 2: `μ^{K,±}(e,p) = γ μ⁰(e,Kp) + a±(K) μ±(e,Kp)`
//!
//! so derivatives follow from the chain rule term by term.

use crate::error::{Error, Result};
use std::fmt;
use std::sync::Arc;

/// Closure returning `(μ, μ_e, μ_p)` at `(e, p)`.
pub type MuClosure = Arc<dyn Fn(f64, f64) -> (f64, f64, f64) + Send + Sync>;

/// Base density profiles.
#[derive(Clone)]
pub enum BaseMu {
    /// `c / (1 + e⁴)`, independent of `p`.
    Kinetic { c: f64 },
    /// `c / (1 + e⁴ + p⁴)`.
    Confined { c: f64 },
    /// `c e^{-e}`, independent of `p`.
    Maxwellian { c: f64 },
    /// `c e^{-e} / (1 + (p - p0)²)`; even in `p` when `p0 = 0`.
    Shifted { c: f64, p0: f64 },
    /// `c_nu e^{-e} ⟨p⟩^{1-eps}`, increasing in `|p|`.
    Drifted { c_nu: f64, eps: f64 },
    /// User-supplied profile.
    Custom(MuClosure),
}

impl fmt::Debug for BaseMu {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseMu::Kinetic { c } => write!(f, "Kinetic {{ c: {c} }}"),
            BaseMu::Confined { c } => write!(f, "Confined {{ c: {c} }}"),
            BaseMu::Maxwellian { c } => write!(f, "Maxwellian {{ c: {c} }}"),
            BaseMu::Shifted { c, p0 } => write!(f, "Shifted {{ c: {c}, p0: {p0} }}"),
            BaseMu::Drifted { c_nu, eps } => write!(f, "Drifted {{ c_nu: {c_nu}, eps: {eps} }}"),
            BaseMu::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl BaseMu {
    /// `(μ, μ_e, μ_p)`.
    #[inline]
    pub fn eval_all(&self, e: f64, p: f64) -> (f64, f64, f64) {
        match self {
            BaseMu::Kinetic { c } => {
                let e2 = e * e;
                let den = 1.0 + e2 * e2;
                let v = c / den;
                (v, -4.0 * c * e2 * e / (den * den), 0.0)
            }
            BaseMu::Confined { c } => {
                let e2 = e * e;
                let p2 = p * p;
                let den = 1.0 + e2 * e2 + p2 * p2;
                let v = c / den;
                let k = -4.0 * c / (den * den);
                (v, k * e2 * e, k * p2 * p)
            }
            BaseMu::Maxwellian { c } => {
                let v = c * (-e).exp();
                (v, -v, 0.0)
            }
            BaseMu::Shifted { c, p0 } => {
                let q = p - p0;
                let den = 1.0 + q * q;
                let v = c * (-e).exp() / den;
                (v, -v, -2.0 * q * v / den)
            }
            BaseMu::Drifted { c_nu, eps } => {
                let jp2 = 1.0 + p * p;
                let ex = c_nu * (-e).exp();
                let v = ex * jp2.powf(0.5 * (1.0 - eps));
                let dp = ex * (1.0 - eps) * p * jp2.powf(-0.5 * (1.0 + eps));
                (v, -v, dp)
            }
            BaseMu::Custom(f) => f(e, p),
        }
    }

    /// True when `μ_p ≡ 0` for this profile.
    pub fn is_p_independent(&self) -> bool {
        matches!(self, BaseMu::Kinetic { .. } | BaseMu::Maxwellian { .. })
    }

    /// True when `μ(e, -p) = μ(e, p)` for this profile.
    pub fn is_even_in_p(&self) -> bool {
        match self {
            BaseMu::Shifted { p0, .. } => *p0 == 0.0,
            BaseMu::Custom(_) => false,
            _ => true,
        }
    }

    /// A constant `C` with `|μ| + |μ_e| + |μ_p| ≤ C / (1 + |e|^δ)` for all
    /// `e ≥ 0` and all `p`, when one exists in closed form.
    pub fn decay_constant(&self, delta: f64) -> Option<f64> {
        // sup_{e ≥ 0} e^{-e} (1 + e^δ) ≤ 1 + (δ/e)^δ
        let exp_sup = 1.0 + (delta / std::f64::consts::E).powf(delta);
        match self {
            BaseMu::Kinetic { c } if delta <= 4.0 => {
                // 1 + 4|e|³/(1+e⁴) ≤ 1 + 3^{3/4}
                Some(c.abs() * (1.0 + 3f64.powf(0.75)) * 2.0)
            }
            BaseMu::Confined { c } if delta <= 4.0 => {
                // |μ_e| + |μ_p| ≤ 4c(|e|³ + |p|³)/den² and |p|³ ≤ den^{3/4}.
                Some(c.abs() * (1.0 + 3f64.powf(0.75) + 4.0) * 2.0)
            }
            BaseMu::Maxwellian { c } => Some(2.0 * c.abs() * exp_sup),
            // |μ_p| ≤ 2|q|/(1+q²)² · c e^{-e} ≤ 0.65 c e^{-e}
            BaseMu::Shifted { c, .. } => Some(2.65 * c.abs() * exp_sup),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Term {
    weight: f64,
    p_scale: f64,
    base: BaseMu,
}

/// A density `μ(e, p) = Σ w_k b_k(e, s_k p)` together with its decay data.
#[derive(Debug, Clone)]
pub struct MuFunction {
    terms: Vec<Term>,
    /// Exponent `δ` in `|μ| + |μ_p| + |μ_e| ≤ C_μ / (1 + |e|^δ)`.
    pub decay_exponent: f64,
    /// Constant `C_μ` of the same bound.
    pub decay_constant: f64,
}

impl MuFunction {
    pub fn zero() -> Self {
        Self {
            terms: Vec::new(),
            decay_exponent: 4.0,
            decay_constant: 0.0,
        }
    }

    /// Single base profile with the given decay data.
    pub fn new(base: BaseMu, decay_exponent: f64, decay_constant: f64) -> Result<Self> {
        if !(decay_exponent > 3.0) {
            return Err(Error::param(
                "delta",
                format!("decay exponent must exceed 3, got {decay_exponent}"),
            ));
        }
        if !(decay_constant >= 0.0) || !decay_constant.is_finite() {
            return Err(Error::param(
                "c_mu",
                format!("decay constant must be finite and non-negative, got {decay_constant}"),
            ));
        }
        Ok(Self {
            terms: vec![Term {
                weight: 1.0,
                p_scale: 1.0,
                base,
            }],
            decay_exponent,
            decay_constant,
        })
    }

    /// Base profile with the closed-form decay constant for `delta`.
    pub fn builtin(base: BaseMu, delta: f64) -> Result<Self> {
        let c = base.decay_constant(delta).ok_or_else(|| {
            Error::param(
                "delta",
                format!("no closed-form decay constant for {base:?} at delta = {delta}"),
            )
        })?;
        Self::new(base, delta, c)
    }

    /// Custom profile from a closure returning `(μ, μ_e, μ_p)`.
    pub fn from_fn(
        f: impl Fn(f64, f64) -> (f64, f64, f64) + Send + Sync + 'static,
        decay_exponent: f64,
        decay_constant: f64,
    ) -> Result<Self> {
        Self::new(BaseMu::Custom(Arc::new(f)), decay_exponent, decay_constant)
    }

    /// `c e^{-e}` profile, `μ_p ≡ 0`.
    pub fn maxwellian(c: f64, delta: f64) -> Result<Self> {
        Self::builtin(BaseMu::Maxwellian { c }, delta)
    }

    /// `c / (1 + e⁴)` with `μ_p ≡ 0`.
    pub fn kinetic(c: f64) -> Result<Self> {
        Self::builtin(BaseMu::Kinetic { c }, 4.0)
    }

    /// `c e^{-e} / (1 + p²)`, even in `p`.
    pub fn even(c: f64, delta: f64) -> Result<Self> {
        Self::builtin(BaseMu::Shifted { c, p0: 0.0 }, delta)
    }

    /// Multiplies by `weight`.
    pub fn scaled(mut self, weight: f64) -> Self {
        for t in &mut self.terms {
            t.weight *= weight;
        }
        self.decay_constant *= weight.abs();
        self
    }

    /// `μ(e, s p)`; the decay bound is unchanged since it is uniform in `p`.
    pub fn with_p_scale(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.p_scale *= s;
        }
        self
    }

    /// Pointwise sum. The decay data of the sum is the weaker of the two.
    pub fn plus(mut self, other: MuFunction) -> Self {
        if other.is_zero() {
            return self;
        }
        if self.is_zero() {
            return other;
        }
        self.decay_exponent = self.decay_exponent.min(other.decay_exponent);
        self.decay_constant += other.decay_constant;
        self.terms.extend(other.terms);
        self
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.weight == 0.0)
    }

    /// Largest momentum rescaling among the terms.
    pub fn p_scale(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.weight != 0.0)
            .map(|t| t.p_scale.abs())
            .fold(0.0, f64::max)
    }

    /// True when every term is independent of `p` (or evaluated at `0·p`).
    pub fn is_p_independent(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.weight == 0.0 || t.p_scale == 0.0 || t.base.is_p_independent())
    }

    pub fn is_even_in_p(&self) -> bool {
        self.terms
            .iter()
            .all(|t| t.weight == 0.0 || t.p_scale == 0.0 || t.base.is_even_in_p())
    }

    /// `(μ, μ_e, μ_p)` at `(e, p)`.
    #[inline]
    pub fn eval_all(&self, e: f64, p: f64) -> (f64, f64, f64) {
        let mut acc = (0.0, 0.0, 0.0);
        for t in &self.terms {
            if t.weight == 0.0 {
                continue;
            }
            let (v, de, dp) = t.base.eval_all(e, t.p_scale * p);
            acc.0 += t.weight * v;
            acc.1 += t.weight * de;
            acc.2 += t.weight * t.p_scale * dp;
        }
        acc
    }

    pub fn eval(&self, e: f64, p: f64) -> f64 {
        self.eval_all(e, p).0
    }

    pub fn d_e(&self, e: f64, p: f64) -> f64 {
        self.eval_all(e, p).1
    }

    pub fn d_p(&self, e: f64, p: f64) -> f64 {
        self.eval_all(e, p).2
    }
}

/// Amplitude functions `a±(K)`, all vanishing at `K = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Amplitude {
    Zero,
    /// `K²`.
    Quadratic,
    /// `K² / (1 + K^{2-m})`, which behaves like `K^m` for large `K`.
    PowerLaw { m: f64 },
}

impl Amplitude {
    pub fn at(&self, k: f64) -> f64 {
        match *self {
            Amplitude::Zero => 0.0,
            Amplitude::Quadratic => k * k,
            Amplitude::PowerLaw { m } => k * k / (1.0 + k.powf(2.0 - m)),
        }
    }

    pub fn derivative_at_zero(&self) -> f64 {
        0.0
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Amplitude::Zero)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyKind {
    Case1,
    Case2,
    /// `μ^{K,±} = μ±` for every `K`.
    Custom,
}

/// Constants of the large-`K` instability hypotheses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstabilityParams {
    pub m: f64,
    pub eps: f64,
    /// `C'_μ` in `p μ_p ≥ C'_μ |p| ⟨p⟩^{-ε} ν(e)`.
    pub c_mu_prime: f64,
    /// `C_ν` in `ν(e) ≥ C_ν e^{-e}`.
    pub c_nu: f64,
    /// `C_μ` of the decay hypotheses used in the margin.
    pub c_mu: f64,
    pub delta: f64,
}

impl InstabilityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m > -1.0 && self.m < 1.0) {
            return Err(Error::param("m", format!("must lie in (-1, 1), got {}", self.m)));
        }
        if !(self.eps > 0.0 && self.eps < 1.0 - self.m.abs()) {
            return Err(Error::param(
                "eps",
                format!("must lie in (0, 1 - |m|) = (0, {}), got {}", 1.0 - self.m.abs(), self.eps),
            ));
        }
        for (name, v) in [
            ("c_mu_prime", self.c_mu_prime),
            ("c_nu", self.c_nu),
            ("c_mu", self.c_mu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive, got {v}")));
            }
        }
        if !(self.delta > 4.0) {
            return Err(Error::param(
                "delta",
                format!("instability hypotheses need delta > 4, got {}", self.delta),
            ));
        }
        Ok(())
    }
}

/// The built-in instability profile `μ⁺(e,p) = C_ν e^{-e} ⟨p⟩^{1-ε}` with
/// `μ_p = C_ν e^{-e} (1-ε) p ⟨p⟩^{-1-ε}`.
///
/// The decay constant is left at zero; the profile grows in `|p|`, so any
/// decay bound only holds on a bounded momentum box and must be supplied by
/// the caller via [`MuFunction::new`]-style data or checked with
/// [`check_decay`].
pub fn instability_family(m: f64, eps: f64, c_nu: f64, delta: f64) -> Result<MuFunction> {
    if !(m > -1.0 && m < 1.0) {
        return Err(Error::param("m", format!("must lie in (-1, 1), got {m}")));
    }
    if !(eps > 0.0 && eps < 1.0 - m.abs()) {
        return Err(Error::param(
            "eps",
            format!("must lie in (0, 1 - |m|), got {eps}"),
        ));
    }
    if !(c_nu > 0.0) {
        return Err(Error::param("c_nu", format!("must be positive, got {c_nu}")));
    }
    MuFunction::new(BaseMu::Drifted { c_nu, eps }, delta, 0.0)
}

/// A family `K ↦ (μ^{K,+}, μ^{K,-})`.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub kind: FamilyKind,
    pub gamma: f64,
    pub mu0: MuFunction,
    pub mu_plus: MuFunction,
    pub mu_minus: MuFunction,
    pub a_plus: Amplitude,
    pub a_minus: Amplitude,
    pub instability: Option<InstabilityParams>,
}

impl FamilySpec {
    /// Case-1 single-species ion family `μ^{K,+} = a(K) μ⁺`, `μ^{K,-} ≡ 0`.
    pub fn single_ion(kind: FamilyKind, mu_plus: MuFunction, a_plus: Amplitude) -> Self {
        Self {
            kind,
            gamma: 0.0,
            mu0: MuFunction::zero(),
            mu_plus,
            mu_minus: MuFunction::zero(),
            a_plus,
            a_minus: Amplitude::Zero,
            instability: None,
        }
    }

    /// Single-species electron family `μ^{K,-} = a(K) μ⁻`, `μ^{K,+} ≡ 0`.
    pub fn single_electron(kind: FamilyKind, mu_minus: MuFunction, a_minus: Amplitude) -> Self {
        Self {
            kind,
            gamma: 0.0,
            mu0: MuFunction::zero(),
            mu_plus: MuFunction::zero(),
            mu_minus,
            a_plus: Amplitude::Zero,
            a_minus,
            instability: None,
        }
    }

    /// K-independent densities.
    pub fn fixed(mu_plus: MuFunction, mu_minus: MuFunction) -> Self {
        Self {
            kind: FamilyKind::Custom,
            gamma: 0.0,
            mu0: MuFunction::zero(),
            mu_plus,
            mu_minus,
            a_plus: Amplitude::Zero,
            a_minus: Amplitude::Zero,
            instability: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma >= 0.0) {
            return Err(Error::param("gamma", format!("must be >= 0, got {}", self.gamma)));
        }
        if self.kind != FamilyKind::Custom && self.gamma != 0.0 && !self.mu0.is_zero() {
            // μ⁰ must be even in p; only checkable for known profiles.
            if !self.mu0.is_even_in_p() && !self.mu0.terms.iter().any(|t| matches!(t.base, BaseMu::Custom(_))) {
                return Err(Error::param("mu0", "must be even in p"));
            }
        }
        if self.kind == FamilyKind::Case1 {
            for a in [self.a_plus, self.a_minus] {
                if a.derivative_at_zero() != 0.0 {
                    return Err(Error::param("a_plus", "case 1 needs a'(0) = 0"));
                }
            }
        }
        if let Some(p) = &self.instability {
            p.validate()?;
        }
        Ok(())
    }

    /// Single-species with ions only: `μ^{K,-} ≡ 0` for every `K`.
    pub fn is_single_ion(&self) -> bool {
        let minus_zero = self.mu_minus.is_zero() || (self.kind != FamilyKind::Custom && self.a_minus.is_zero());
        let gamma_zero = self.kind == FamilyKind::Custom || self.gamma == 0.0 || self.mu0.is_zero();
        let plus_present = !self.mu_plus.is_zero() && (self.kind == FamilyKind::Custom || !self.a_plus.is_zero());
        minus_zero && gamma_zero && plus_present
    }

    /// Single-species with electrons only.
    pub fn is_single_electron(&self) -> bool {
        let plus_zero = self.mu_plus.is_zero() || (self.kind != FamilyKind::Custom && self.a_plus.is_zero());
        let gamma_zero = self.kind == FamilyKind::Custom || self.gamma == 0.0 || self.mu0.is_zero();
        let minus_present = !self.mu_minus.is_zero() && (self.kind == FamilyKind::Custom || !self.a_minus.is_zero());
        plus_zero && gamma_zero && minus_present
    }

    /// `(μ^{K,+}, μ^{K,-})`.
    pub fn family_at(&self, k: f64) -> (MuFunction, MuFunction) {
        match self.kind {
            FamilyKind::Custom => (self.mu_plus.clone(), self.mu_minus.clone()),
            FamilyKind::Case1 | FamilyKind::Case2 => {
                let s = if self.kind == FamilyKind::Case2 { k } else { 1.0 };
                let base = if self.gamma == 0.0 {
                    MuFunction::zero()
                } else {
                    self.mu0.clone().scaled(self.gamma).with_p_scale(s)
                };
                let build = |a: Amplitude, mu: &MuFunction| {
                    let ak = a.at(k);
                    let extra = if ak == 0.0 {
                        MuFunction::zero()
                    } else {
                        mu.clone().scaled(ak).with_p_scale(s)
                    };
                    base.clone().plus(extra)
                };
                (build(self.a_plus, &self.mu_plus), build(self.a_minus, &self.mu_minus))
            }
        }
    }
}

/// Worst sampled value of `(|μ| + |μ_p| + |μ_e|)(1 + |e|^δ)/C_μ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayReport {
    pub max_ratio: f64,
    pub worst: (f64, f64),
    pub samples: usize,
}

impl DecayReport {
    pub fn holds(&self) -> bool {
        self.max_ratio <= 1.0
    }
}

/// Samples the decay bound on a uniform lattice over the box.
pub fn check_decay(
    mu: &MuFunction,
    e_range: (f64, f64),
    p_range: (f64, f64),
    n_samples: usize,
) -> Result<DecayReport> {
    if n_samples == 0 {
        return Err(Error::param("n_samples", "need at least one sample"));
    }
    let side = (n_samples as f64).sqrt().floor().max(1.0) as usize;
    let lattice = |lo: f64, hi: f64, i: usize| {
        if side == 1 {
            0.5 * (lo + hi)
        } else {
            lo + (hi - lo) * i as f64 / (side - 1) as f64
        }
    };
    let delta = mu.decay_exponent;
    let c = mu.decay_constant;
    let mut report = DecayReport {
        max_ratio: 0.0,
        worst: (lattice(e_range.0, e_range.1, 0), lattice(p_range.0, p_range.1, 0)),
        samples: side * side,
    };
    for a in 0..side {
        let e = lattice(e_range.0, e_range.1, a);
        for b in 0..side {
            let p = lattice(p_range.0, p_range.1, b);
            let (v, de, dp) = mu.eval_all(e, p);
            let lhs = (v.abs() + de.abs() + dp.abs()) * (1.0 + e.abs().powf(delta));
            let ratio = if lhs == 0.0 {
                0.0
            } else if c == 0.0 {
                f64::INFINITY
            } else {
                lhs / c
            };
            if ratio > report.max_ratio {
                report.max_ratio = ratio;
                report.worst = (e, p);
            }
        }
    }
    Ok(report)
}

/// Sampled check of `p μ_p(e, p) ≥ C'_μ C_ν |p| ⟨p⟩^{-ε} e^{-e}` for
/// `|p| ≥ 1`. Returns the smallest ratio of the two sides.
pub fn check_drift_lower_bound(
    mu: &MuFunction,
    params: &InstabilityParams,
    e_range: (f64, f64),
    p_max: f64,
    n_side: usize,
) -> f64 {
    let n_side = n_side.max(2);
    let mut worst = f64::INFINITY;
    for a in 0..n_side {
        let e = e_range.0 + (e_range.1 - e_range.0) * a as f64 / (n_side - 1) as f64;
        for b in 0..n_side {
            let mag = 1.0 + (p_max - 1.0).max(0.0) * b as f64 / (n_side - 1) as f64;
            for p in [mag, -mag] {
                let lhs = p * mu.d_p(e, p);
                let rhs = params.c_mu_prime
                    * params.c_nu
                    * p.abs()
                    * (1.0 + p * p).powf(-0.5 * params.eps)
                    * (-e).exp();
                worst = worst.min(lhs / rhs);
            }
        }
    }
    worst
}
