//! Velocity moments of `μ±(e±, p±)` at each grid node.
//!
//! Integrands depend on `(v_r, v_z)` only through `w = √(v_r² + v_z²)`, so
//! `dv = 2π w dw dv_φ`. Both directions use geometrically graded composite
//! Gauss–Legendre rules; in `v_φ` the panels are centred on the drift point
//! `v_φ = ∓A` where `p±` vanishes, with an inner width shrinking like
//! `1/(s r)` for a momentum rescaling `s`.

use crate::distribution::MuFunction;
use crate::error::{Error, Result};
use crate::geometry::{MeridianGrid, NodeKind};
use crate::quadrature::{graded_half_line, graded_interval, GaussLegendre, Rule};
use crate::solver::FieldPair;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Truncation and resolution of the velocity integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentQuadrature {
    /// Cutoff in `w = √(v_r² + v_z²)`.
    pub w_max: f64,
    /// Cutoff in `|v_φ − centre|`.
    pub vphi_max: f64,
    /// Gauss–Legendre order per `w` panel.
    pub n_w: usize,
    /// Gauss–Legendre order per `v_φ` panel.
    pub n_vphi: usize,
    /// Width of the first `w` panel.
    pub first_w: f64,
    /// Width of the first `v_φ` panel before the `1/(s r)` refinement.
    pub first_vphi: f64,
    pub tail_tolerance: f64,
    /// Choose the cutoffs from the tail bound instead of `w_max`/`vphi_max`.
    pub auto_cutoff: bool,
    /// Smallest cutoff used in auto mode.
    pub min_cutoff: f64,
}

impl Default for MomentQuadrature {
    fn default() -> Self {
        Self {
            w_max: 60.0,
            vphi_max: 60.0,
            n_w: 8,
            n_vphi: 8,
            first_w: 0.5,
            first_vphi: 0.05,
            tail_tolerance: 1e-6,
            auto_cutoff: true,
            min_cutoff: 60.0,
        }
    }
}

/// Largest cutoff the auto mode will pick.
const MAX_CUTOFF: f64 = 1e12;

#[inline]
pub(crate) fn pow_abs(x: f64, delta: f64) -> f64 {
    let a = x.abs();
    if delta == delta.trunc() && delta.abs() < 64.0 {
        a.powi(delta as i32)
    } else {
        a.powf(delta)
    }
}

impl MomentQuadrature {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("w_max", self.w_max),
            ("vphi_max", self.vphi_max),
            ("first_w", self.first_w),
            ("first_vphi", self.first_vphi),
            ("tail_tolerance", self.tail_tolerance),
            ("min_cutoff", self.min_cutoff),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.n_w == 0 || self.n_vphi == 0 {
            return Err(Error::param("n_w", "quadrature orders must be positive"));
        }
        Ok(())
    }

    /// Same truncation with doubled Gauss–Legendre orders.
    pub fn refined(&self) -> Self {
        Self {
            n_w: 2 * self.n_w,
            n_vphi: 2 * self.n_vphi,
            ..self.clone()
        }
    }

    /// Upper bound for the part of `∫(|μ| + |μ_e| + |μ_p|) max(1, d) dv`
    /// outside `|v| ≤ cutoff`, from `|μ| ≤ C_μ/(1+|e|^δ)` and
    /// `1+⟨v⟩^δ ≤ (2 + 2^δ|φ|^δ)(1 + |⟨v⟩ ± φ|^δ)`.
    pub fn tail_bound(mus: (&MuFunction, &MuFunction), phi_max: f64, r_max: f64, cutoff: f64) -> f64 {
        let mut total = 0.0;
        for mu in [mus.0, mus.1] {
            if mu.is_zero() {
                continue;
            }
            let d = mu.decay_exponent;
            let amp = 2.0 + 2f64.powf(d) * pow_abs(phi_max, d);
            total += mu.decay_constant * amp * 4.0 * PI * cutoff.powf(3.0 - d) / (d - 3.0);
        }
        total * r_max.max(1.0)
    }

    /// Cutoff in use for the given fields, and its tail bound.
    pub fn cutoff(&self, mus: (&MuFunction, &MuFunction), phi_max: f64, r_max: f64) -> Result<(f64, f64)> {
        if !self.auto_cutoff {
            let r = self.w_max.min(self.vphi_max);
            let tail = Self::tail_bound(mus, phi_max, r_max, r);
            if tail > self.tail_tolerance {
                return Err(Error::QuadratureTail {
                    estimate: tail,
                    tolerance: self.tail_tolerance,
                });
            }
            return Ok((r, tail));
        }
        let at_one = Self::tail_bound(mus, phi_max, r_max, 1.0);
        let delta = [mus.0, mus.1]
            .iter()
            .filter(|m| !m.is_zero())
            .map(|m| m.decay_exponent)
            .fold(f64::INFINITY, f64::min);
        let floor = self.min_cutoff.max(2.0 * phi_max + 10.0);
        if at_one == 0.0 || !delta.is_finite() {
            return Ok((floor, 0.0));
        }
        // The bound is a sum of powers; solve with the slowest one and verify.
        let mut r = (at_one / self.tail_tolerance).powf(1.0 / (delta - 3.0)).max(floor);
        for _ in 0..60 {
            if Self::tail_bound(mus, phi_max, r_max, r) <= self.tail_tolerance || r >= MAX_CUTOFF {
                break;
            }
            r *= 2.0;
        }
        let r = r.min(MAX_CUTOFF);
        let tail = Self::tail_bound(mus, phi_max, r_max, r);
        if tail > self.tail_tolerance {
            return Err(Error::QuadratureTail {
                estimate: tail,
                tolerance: self.tail_tolerance,
            });
        }
        Ok((r, tail))
    }

    fn w_rule(&self, cutoff: f64) -> Rule {
        let gl = GaussLegendre::new(self.n_w);
        graded_half_line(&gl, cutoff, self.first_w)
    }

    fn vphi_rule(&self, gl: &GaussLegendre, center: f64, cutoff: f64, s_r: f64) -> Rule {
        let first = self.first_vphi / s_r.max(1.0);
        graded_interval(gl, center - cutoff, center + cutoff, center, first)
    }
}

/// Moment fields on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentFields {
    /// `ρ = ∫(μ⁺ − μ⁻) dv`.
    pub rho: Vec<f64>,
    /// `j_φ = ∫ v̂_φ (μ⁺ − μ⁻) dv`.
    pub j_phi: Vec<f64>,
    /// `∫ r v̂_φ (μ⁺_p + μ⁻_p) dv`, the `∂j_φ/∂A` multiplier.
    pub m1: Vec<f64>,
    /// `∫ v̂_φ (μ⁺_e + μ⁻_e) dv`, the `∂j_φ/∂φ` multiplier.
    pub m2: Vec<f64>,
    /// `∫ r (μ⁺_p + μ⁻_p) dv`, the `∂ρ/∂A` multiplier.
    pub m3: Vec<f64>,
    /// `∫ (μ⁺_e + μ⁻_e) dv`, the `∂ρ/∂φ` multiplier.
    pub m4: Vec<f64>,
    /// `Σ± ∫ |μ±_e| v̂_φ² dv`.
    pub m5: Vec<f64>,
    pub cutoff: f64,
    pub tail_estimate: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct NodeMoments {
    rho: f64,
    j_phi: f64,
    m1: f64,
    m2: f64,
    m3: f64,
    m4: f64,
    m5: f64,
}

/// Both species at one point.
fn node_moments(
    phi: f64,
    a_tot: f64,
    r: f64,
    mus: (&MuFunction, &MuFunction),
    quad: &MomentQuadrature,
    w_rule: &Rule,
    gl_vphi: &GaussLegendre,
    cutoff: f64,
) -> NodeMoments {
    let mut out = NodeMoments::default();
    for (sign, mu) in [(1.0, mus.0), (-1.0, mus.1)] {
        if mu.is_zero() {
            continue;
        }
        let center = -sign * a_tot;
        let vr = quad.vphi_rule(gl_vphi, center, cutoff, mu.p_scale() * r);
        for (&vphi, &wv) in vr.nodes.iter().zip(&vr.weights) {
            let p = r * (vphi + sign * a_tot);
            let vphi2 = vphi * vphi;
            let mut acc = [0.0; 7];
            for (&w, &ww) in w_rule.nodes.iter().zip(&w_rule.weights) {
                let gamma = (1.0 + w * w + vphi2).sqrt();
                let (f, fe, fp) = mu.eval_all(gamma + sign * phi, p);
                let wt = ww * w;
                let vh = vphi / gamma;
                acc[0] += wt * f;
                acc[1] += wt * vh * f;
                acc[2] += wt * vh * fp;
                acc[3] += wt * vh * fe;
                acc[4] += wt * fe.abs() * vh * vh;
                acc[5] += wt * fp;
                acc[6] += wt * fe;
            }
            let c = 2.0 * PI * wv;
            out.rho += sign * c * acc[0];
            out.j_phi += sign * c * acc[1];
            out.m1 += c * r * acc[2];
            out.m2 += c * acc[3];
            out.m3 += c * r * acc[5];
            out.m4 += c * acc[6];
            out.m5 += c * acc[4];
        }
    }
    out
}

/// Moments at every node. Values on wall nodes are computed as well (they
/// are finite), but solvers only use unknown nodes.
pub fn compute_moments(
    grid: &MeridianGrid,
    fields: &FieldPair,
    mus: (&MuFunction, &MuFunction),
    quad: &MomentQuadrature,
) -> Result<MomentFields> {
    quad.validate()?;
    grid.check_len(&fields.phi)?;
    grid.check_len(&fields.a_phi)?;
    if let Some(ext) = &fields.a_ext {
        grid.check_len(ext)?;
    }
    let phi_max = fields.phi.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !phi_max.is_finite() {
        return Err(Error::param("phi", "non-finite potential"));
    }
    let (cutoff, tail) = quad.cutoff(mus, phi_max, grid.domain.r_max)?;
    let w_rule = quad.w_rule(cutoff);
    let gl_vphi = GaussLegendre::new(quad.n_vphi);
    let per_node: Vec<NodeMoments> = (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let (r, _) = grid.coords(k);
            let r = if grid.kind(k) == NodeKind::Axis { 0.0 } else { r };
            node_moments(
                fields.phi[k],
                fields.total_a(k),
                r,
                mus,
                quad,
                &w_rule,
                &gl_vphi,
                cutoff,
            )
        })
        .collect();
    let pick = |f: fn(&NodeMoments) -> f64| per_node.iter().map(f).collect::<Vec<_>>();
    Ok(MomentFields {
        rho: pick(|m| m.rho),
        j_phi: pick(|m| m.j_phi),
        m1: pick(|m| m.m1),
        m2: pick(|m| m.m2),
        m3: pick(|m| m.m3),
        m4: pick(|m| m.m4),
        m5: pick(|m| m.m5),
        cutoff,
        tail_estimate: tail,
    })
}

/// Doubles the quadrature orders until `ρ` and `j_φ` change by less than
/// the tail tolerance (at most `max_doublings` times).
pub fn compute_moments_refined(
    grid: &MeridianGrid,
    fields: &FieldPair,
    mus: (&MuFunction, &MuFunction),
    quad: &MomentQuadrature,
    max_doublings: usize,
) -> Result<(MomentFields, MomentQuadrature)> {
    let mut q = quad.clone();
    let mut prev = compute_moments(grid, fields, mus, &q)?;
    for _ in 0..max_doublings {
        let next_q = q.refined();
        let next = compute_moments(grid, fields, mus, &next_q)?;
        let change = prev
            .rho
            .iter()
            .zip(&next.rho)
            .chain(prev.j_phi.iter().zip(&next.j_phi))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        q = next_q;
        prev = next;
        if change < quad.tail_tolerance {
            break;
        }
    }
    Ok((prev, q))
}

/// Point moments from the 3-D tensor-product rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceMoments {
    pub rho: f64,
    pub j_phi: f64,
    pub j_r: f64,
    pub j_z: f64,
}

/// Direct quadrature over `(v_r, v_φ, v_z) ∈ [−R, R]³` with graded
/// Gauss–Legendre panels of order `order`. Oracle for [`compute_moments`].
pub fn brute_force_moments(
    phi: f64,
    a_phi: f64,
    r: f64,
    mus: (&MuFunction, &MuFunction),
    order: usize,
    cutoff: f64,
) -> BruteForceMoments {
    let gl = GaussLegendre::new(order);
    let side = graded_interval(&gl, -cutoff, cutoff, 0.0, 0.25);
    let mut out = BruteForceMoments {
        rho: 0.0,
        j_phi: 0.0,
        j_r: 0.0,
        j_z: 0.0,
    };
    for (sign, mu) in [(1.0, mus.0), (-1.0, mus.1)] {
        if mu.is_zero() {
            continue;
        }
        let center = -sign * a_phi;
        let first = 0.05 / (mu.p_scale() * r).max(1.0);
        let vp_rule = graded_interval(&gl, center - cutoff, center + cutoff, center, first);
        for (&vp, &wp) in vp_rule.nodes.iter().zip(&vp_rule.weights) {
            let p = r * (vp + sign * a_phi);
            for (&vr, &wr) in side.nodes.iter().zip(&side.weights) {
                for (&vz, &wz) in side.nodes.iter().zip(&side.weights) {
                    let gamma = (1.0 + vr * vr + vp * vp + vz * vz).sqrt();
                    let f = sign * mu.eval(gamma + sign * phi, p) * wp * wr * wz;
                    out.rho += f;
                    out.j_phi += f * vp / gamma;
                    out.j_r += f * vr / gamma;
                    out.j_z += f * vz / gamma;
                }
            }
        }
    }
    out
}

/// Outcome of the two-sided integral bound at every node.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralBoundReport {
    pub c_int1: f64,
    /// Smallest `bound/I − 1` for the upper inequality over nodes and signs.
    pub min_upper_margin: f64,
    /// Smallest `I/bound − 1` for the lower inequality.
    pub min_lower_margin: f64,
    /// `(node, sign, which)` for every violated inequality; `which` is
    /// `"upper"` or `"lower"`.
    pub violations: Vec<(usize, i8, &'static str)>,
}

impl IntegralBoundReport {
    pub fn holds(&self) -> bool {
        self.violations.is_empty()
    }
}

fn reduced_integral(
    gl: &GaussLegendre,
    w_rule: &Rule,
    cutoff: f64,
    first_vphi: f64,
    center: f64,
    f: impl Fn(f64, f64) -> f64,
) -> f64 {
    let vr = graded_interval(gl, center - cutoff, center + cutoff, center, first_vphi);
    let mut total = 0.0;
    for (&vp, &wp) in vr.nodes.iter().zip(&vr.weights) {
        let mut inner = 0.0;
        for (&w, &ww) in w_rule.nodes.iter().zip(&w_rule.weights) {
            let gamma = (1.0 + w * w + vp * vp).sqrt();
            inner += ww * w * f(gamma, vp);
        }
        total += wp * inner;
    }
    2.0 * PI * total
}

/// Checks at every non-wall node, for both signs,
/// `I(x) ≤ (2 + 2^δ|φ|^δ) C_int1` and
/// `I(x) ≥ C_int2(r) / (2^δ(1 + |φ|^δ + r^δ|A|^δ))`, where
/// `I(x) = ∫ dv / (1 + |⟨v⟩ ± φ|^δ + |r(v_φ ± A)|^δ)`. All integrals are
/// truncated to the same velocity region.
pub fn integral_bound_check(
    grid: &MeridianGrid,
    fields: &FieldPair,
    delta: f64,
    cutoff: f64,
) -> Result<IntegralBoundReport> {
    if !(delta > 3.0) {
        return Err(Error::param("delta", format!("must exceed 3, got {delta}")));
    }
    grid.check_len(&fields.phi)?;
    grid.check_len(&fields.a_phi)?;
    let gl = GaussLegendre::new(8);
    let w_rule = graded_half_line(&gl, cutoff, 0.5);
    let c_int1 = reduced_integral(&gl, &w_rule, cutoff, 0.05, 0.0, |g, _| 1.0 / (1.0 + pow_abs(g, delta)));
    let two_d = 2f64.powf(delta);
    let results: Vec<Vec<(usize, i8, f64, f64)>> = (0..grid.len())
        .into_par_iter()
        .filter(|&k| grid.kind(k) != NodeKind::Boundary)
        .map(|k| {
            let (r, _) = grid.coords(k);
            let phi = fields.phi[k];
            let a = fields.total_a(k);
            let first = 0.05 / r.max(1.0);
            let c_int2 = reduced_integral(&gl, &w_rule, cutoff, first, 0.0, |g, vp| {
                1.0 / (1.0 + pow_abs(g, delta) + pow_abs(r * vp, delta))
            });
            let upper = (2.0 + two_d * pow_abs(phi, delta)) * c_int1;
            let lower = c_int2 / (two_d * (1.0 + pow_abs(phi, delta) + pow_abs(r * a, delta)));
            [1.0f64, -1.0]
                .iter()
                .map(|&s| {
                    let i = reduced_integral(&gl, &w_rule, cutoff, first, -s * a, |g, vp| {
                        1.0 / (1.0 + pow_abs(g + s * phi, delta) + pow_abs(r * (vp + s * a), delta))
                    });
                    (k, s as i8, upper / i - 1.0, i / lower - 1.0)
                })
                .collect()
        })
        .collect();
    let mut rep = IntegralBoundReport {
        c_int1,
        min_upper_margin: f64::INFINITY,
        min_lower_margin: f64::INFINITY,
        violations: Vec::new(),
    };
    for (k, s, up, lo) in results.into_iter().flatten() {
        rep.min_upper_margin = rep.min_upper_margin.min(up);
        rep.min_lower_margin = rep.min_lower_margin.min(lo);
        if up < 0.0 {
            rep.violations.push((k, s, "upper"));
        }
        if lo < 0.0 {
            rep.violations.push((k, s, "lower"));
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::distribution::BaseMu;
    use crate::geometry::MeridianDomain;

    /// `4π ∫_0^∞ u² / (1 + (1+u²)²) du`.
    const KINETIC_RHO: f64 = 8.983_113_781_392_203;

    fn torus(n: usize) -> MeridianGrid {
        MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), n, n).unwrap()
    }

    fn quad(tol: f64) -> MomentQuadrature {
        MomentQuadrature {
            tail_tolerance: tol,
            ..MomentQuadrature::default()
        }
    }

    #[test]
    fn kinetic_density_constant() {
        let g = torus(5);
        let mu = MuFunction::kinetic(1.0).unwrap();
        let z = MuFunction::zero();
        let m = compute_moments(&g, &FieldPair::zeros(&g), (&mu, &z), &quad(1e-4)).unwrap();
        for k in 0..g.len() {
            assert!((m.rho[k] - KINETIC_RHO).abs() / KINETIC_RHO < 1e-5, "{}", m.rho[k]);
            assert!(m.j_phi[k].abs() < 1e-10);
            assert_eq!(m.m1[k], 0.0);
            assert_eq!(m.m3[k], 0.0);
        }
    }

    #[test]
    fn neutral_cancellation() {
        let g = torus(5);
        let mu = MuFunction::even(1.0, 6.0).unwrap();
        let m = compute_moments(&g, &FieldPair::zeros(&g), (&mu, &mu), &quad(1e-8)).unwrap();
        for k in 0..g.len() {
            assert!(m.rho[k].abs() <= 1e-12 && m.j_phi[k].abs() <= 1e-12);
        }
    }

    #[test]
    fn constant_shift_is_energy_shift() {
        let g = torus(4);
        let c = 0.7;
        let mu = MuFunction::builtin(BaseMu::Shifted { c: 1.0, p0: 0.3 }, 6.0).unwrap();
        let shifted = {
            let m = mu.clone();
            MuFunction::from_fn(move |e, p| m.eval_all(e + c, p), 6.0, mu.decay_constant).unwrap()
        };
        let z = MuFunction::zero();
        let q = MomentQuadrature {
            auto_cutoff: false,
            ..quad(1.0)
        };
        let mut f = FieldPair::zeros(&g);
        f.phi.iter_mut().for_each(|v| *v = c);
        let a = compute_moments(&g, &f, (&mu, &z), &q).unwrap();
        let b = compute_moments(&g, &FieldPair::zeros(&g), (&shifted, &z), &q).unwrap();
        for k in 0..g.len() {
            assert!((a.rho[k] - b.rho[k]).abs() <= 1e-13 * a.rho[k].abs());
        }
    }

    #[test]
    fn fixed_cutoff_reports_tail() {
        let g = torus(4);
        let mu = MuFunction::kinetic(1.0).unwrap();
        let z = MuFunction::zero();
        let q = MomentQuadrature {
            auto_cutoff: false,
            w_max: 10.0,
            vphi_max: 10.0,
            ..quad(1e-6)
        };
        match compute_moments(&g, &FieldPair::zeros(&g), (&mu, &z), &q) {
            Err(Error::QuadratureTail { estimate, .. }) => assert!(estimate > 1e-6),
            other => panic!("expected tail error, got {other:?}"),
        }
    }

    #[test]
    fn multipliers_match_finite_differences() {
        let g = torus(4);
        let mu_p = MuFunction::builtin(BaseMu::Shifted { c: 1.0, p0: 0.4 }, 6.0).unwrap();
        let mu_m = MuFunction::builtin(BaseMu::Confined { c: 0.5 }, 4.0).unwrap();
        let q = quad(1e-3);
        let mut base = FieldPair::zeros(&g);
        for k in 0..g.len() {
            let (r, z) = g.coords(k);
            base.phi[k] = 0.3 * r * z;
            base.a_phi[k] = 0.2 - 0.1 * r;
        }
        let m = compute_moments(&g, &base, (&mu_p, &mu_m), &q).unwrap();
        let h = 1e-5;
        let eval = |dphi: f64, da: f64| {
            let mut f = base.clone();
            f.phi.iter_mut().for_each(|v| *v += dphi);
            f.a_phi.iter_mut().for_each(|v| *v += da);
            compute_moments(&g, &f, (&mu_p, &mu_m), &q).unwrap()
        };
        let (pp, pm) = (eval(h, 0.0), eval(-h, 0.0));
        let (ap, am) = (eval(0.0, h), eval(0.0, -h));
        for k in 0..g.len() {
            let fd = |a: &[f64], b: &[f64]| (a[k] - b[k]) / (2.0 * h);
            let close = |x: f64, y: f64| (x - y).abs() <= 1e-5 * y.abs().max(1.0);
            assert!(close(m.m4[k], fd(&pp.rho, &pm.rho)), "m4 {k}");
            assert!(close(m.m2[k], fd(&pp.j_phi, &pm.j_phi)), "m2 {k}");
            assert!(close(m.m3[k], fd(&ap.rho, &am.rho)), "m3 {k}");
            assert!(close(m.m1[k], fd(&ap.j_phi, &am.j_phi)), "m1 {k}");
        }
    }

    #[test]
    fn brute_force_agrees() {
        let mu = MuFunction::builtin(BaseMu::Shifted { c: 1.0, p0: 0.5 }, 6.0).unwrap();
        let mu_m = MuFunction::maxwellian(0.3, 6.0).unwrap();
        let z = MuFunction::zero();
        let g = MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), 3, 3).unwrap();
        let (phi, a) = (0.4, -0.3);
        let mut f = FieldPair::zeros(&g);
        f.phi[4] = phi;
        f.a_phi[4] = a;
        let r = g.coords(4).0;
        for mus in [(&mu, &z), (&mu, &mu_m)] {
            let m = compute_moments(&g, &f, mus, &quad(1e-8)).unwrap();
            let b = brute_force_moments(phi, a, r, mus, 8, 40.0);
            assert!((m.rho[4] - b.rho).abs() <= 1e-6 * b.rho.abs(), "{} {}", m.rho[4], b.rho);
            assert!((m.j_phi[4] - b.j_phi).abs() <= 1e-6 * b.j_phi.abs().max(1e-3));
            assert!(b.j_r.abs() <= 1e-12 && b.j_z.abs() <= 1e-12);
        }
        let zero = brute_force_moments(phi, a, r, (&z, &z), 4, 10.0);
        assert_eq!((zero.rho, zero.j_phi), (0.0, 0.0));
    }

    #[test]
    fn integral_bounds_at_zero_and_constant_fields() {
        let g = torus(5);
        let rep = integral_bound_check(&g, &FieldPair::zeros(&g), 4.0, 1e5).unwrap();
        assert!(rep.holds());
        assert!(rep.min_upper_margin >= 0.0 && rep.min_lower_margin >= 0.0);
        assert!((rep.c_int1 - KINETIC_RHO).abs() < 1e-3);
        let mut f = FieldPair::zeros(&g);
        f.phi.iter_mut().for_each(|v| *v = 1.0);
        let rep = integral_bound_check(&g, &f, 4.0, 1e5).unwrap();
        assert!(rep.holds(), "{rep:?}");
    }
}
