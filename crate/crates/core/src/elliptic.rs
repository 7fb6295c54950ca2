//! Finite-difference `−Δ` and `−Δ + 1/r²` on the meridian grid, acting on
//! axisymmetric fields, with Dirichlet data on the walls.
//!
//! The radial part uses the conservative form
//! `(r_{i+½}(g_{i+1} − g_i) − r_{i−½}(g_i − g_{i−1})) / (r_i h_r²)`, so
//! `r_i · (op g)_i` is a symmetric M-matrix. On the axis, `−Δ` uses
//! `4(g_0 − g_1)/h_r²` (regularity `∂_r g = 0`), while `A_φ` is pinned to 0.
//! Inverses are computed by preconditioned conjugate gradients in the
//! `r`-weighted inner product.

use crate::error::{Error, Result};
use crate::geometry::{MeridianGrid, NodeKind};
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    /// `−Δ` for `φ`.
    Laplace,
    /// `−Δ + 1/r²` for `A_φ`.
    LaplacePlusInvR2,
}

/// Default relative-residual stop for [`EllipticOperator::solve_dirichlet`].
pub const DEFAULT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub kind: OperatorKind,
    pub grid: MeridianGrid,
    unknown: Vec<bool>,
    diag: Vec<f64>,
    /// Diagonal-block weight `W_k` making the operator symmetric.
    weight: Vec<f64>,
    n_unknowns: usize,
}

impl EllipticOperator {
    pub fn new(kind: OperatorKind, grid: &MeridianGrid) -> Self {
        let n = grid.len();
        let mut unknown = vec![false; n];
        let mut diag = vec![0.0; n];
        let mut weight = vec![0.0; n];
        let hr2 = grid.h_r * grid.h_r;
        let hz2 = grid.h_z * grid.h_z;
        for k in 0..n {
            let (i, _) = grid.ij(k);
            let r = grid.r(i);
            let d = match (grid.kind(k), kind) {
                (NodeKind::Boundary, _) | (NodeKind::Axis, OperatorKind::LaplacePlusInvR2) => None,
                (NodeKind::Axis, OperatorKind::Laplace) => Some(4.0 / hr2 + 2.0 / hz2),
                (NodeKind::Interior, _) => {
                    let mut d = 2.0 / hr2 + 2.0 / hz2;
                    if kind == OperatorKind::LaplacePlusInvR2 {
                        d += 1.0 / (r * r);
                    }
                    Some(d)
                }
            };
            if let Some(d) = d {
                unknown[k] = true;
                diag[k] = d;
                weight[k] = grid.radial_weight(k);
            }
        }
        let n_unknowns = unknown.iter().filter(|&&u| u).count();
        Self {
            kind,
            grid: grid.clone(),
            unknown,
            diag,
            weight,
            n_unknowns,
        }
    }

    pub fn laplace(grid: &MeridianGrid) -> Self {
        Self::new(OperatorKind::Laplace, grid)
    }

    pub fn laplace_plus_inv_r2(grid: &MeridianGrid) -> Self {
        Self::new(OperatorKind::LaplacePlusInvR2, grid)
    }

    /// Whether node `k` carries an unknown of this operator.
    #[inline]
    pub fn is_unknown(&self, k: usize) -> bool {
        self.unknown[k]
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_unknowns
    }

    /// Operator row at node `k`; callers guarantee `k` is an unknown.
    #[inline]
    fn row(&self, g: &[f64], k: usize) -> f64 {
        let grid = &self.grid;
        let (i, _) = grid.ij(k);
        let hr2 = grid.h_r * grid.h_r;
        let hz2 = grid.h_z * grid.h_z;
        let n_r = grid.n_r;
        let gk = g[k];
        let radial = if grid.kind(k) == NodeKind::Axis {
            4.0 * (gk - g[k + 1]) / hr2
        } else {
            let r = grid.r(i);
            let rp = r + 0.5 * grid.h_r;
            let rm = r - 0.5 * grid.h_r;
            -(rp * (g[k + 1] - gk) - rm * (gk - g[k - 1])) / (r * hr2)
        };
        let axial = -(g[k + n_r] - 2.0 * gk + g[k - n_r]) / hz2;
        match self.kind {
            OperatorKind::Laplace => radial + axial,
            OperatorKind::LaplacePlusInvR2 => {
                let r = grid.r(i);
                radial + axial + gk / (r * r)
            }
        }
    }

    fn apply_into(&self, g: &[f64], out: &mut [f64]) {
        let n_r = self.grid.n_r;
        out.par_chunks_mut(n_r).enumerate().for_each(|(j, row)| {
            for (i, o) in row.iter_mut().enumerate() {
                let k = j * n_r + i;
                *o = if self.unknown[k] { self.row(g, k) } else { 0.0 };
            }
        });
    }

    /// Discrete operator at the unknown nodes, 0 elsewhere. Values of `g` at
    /// non-unknown nodes enter as Dirichlet data.
    pub fn apply(&self, g: &[f64]) -> Result<Vec<f64>> {
        self.grid.check_len(g)?;
        let mut out = vec![0.0; g.len()];
        self.apply_into(g, &mut out);
        Ok(out)
    }

    /// Restriction of `−Δ(g e^{iθ})` to `θ = 0`, computed on `n_angles`
    /// azimuthal slices with a spectral angular derivative. Only meaningful
    /// for [`OperatorKind::LaplacePlusInvR2`] fields; the meridian part uses
    /// the `−Δ` stencil on each slice.
    pub fn apply_lifted(&self, g: &[f64], n_angles: usize) -> Result<Vec<f64>> {
        self.grid.check_len(g)?;
        if n_angles < 3 {
            return Err(Error::param("n_angles", "need at least 3 angular slices"));
        }
        let meridian = EllipticOperator {
            kind: OperatorKind::Laplace,
            ..self.clone()
        };
        let n = n_angles;
        let theta = |s: usize| 2.0 * std::f64::consts::PI * s as f64 / n as f64;
        // Slices of Re and Im of g e^{iθ}.
        let mut slices_re = Vec::with_capacity(n);
        let mut slices_im = Vec::with_capacity(n);
        for s in 0..n {
            let (sn, cs) = theta(s).sin_cos();
            slices_re.push(g.iter().map(|v| v * cs).collect::<Vec<_>>());
            slices_im.push(g.iter().map(|v| v * sn).collect::<Vec<_>>());
        }
        // Meridian stencil on the θ = 0 slice.
        let mut out = vec![0.0; g.len()];
        meridian.apply_into(&slices_re[0], &mut out);
        // −(1/r²) ∂²_θ at θ = 0 through a direct DFT over the slices.
        let half = (n / 2) as i64;
        for (k, o) in out.iter_mut().enumerate() {
            if !self.unknown[k] {
                *o = 0.0;
                continue;
            }
            let mut d2 = 0.0;
            for m in -half..=half {
                if n % 2 == 0 && m == half {
                    continue;
                }
                // Real part of the m-th Fourier coefficient, evaluated at θ = 0.
                let mut cr = 0.0;
                for s in 0..n {
                    let (sn, cs) = (m as f64 * theta(s)).sin_cos();
                    cr += slices_re[s][k] * cs + slices_im[s][k] * sn;
                }
                d2 -= (m * m) as f64 * cr / n as f64;
            }
            let r = self.grid.coords(k).0;
            *o -= d2 / (r * r);
        }
        Ok(out)
    }

    fn winner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weight)
            .map(|((x, y), w)| w * x * y)
            .sum()
    }

    /// Solves `op g = rhs` on the unknown nodes with `g = 0` elsewhere, to
    /// the default relative residual.
    pub fn solve_dirichlet(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solve_with_tolerance(rhs, DEFAULT_TOLERANCE)
    }

    /// Jacobi-preconditioned CG in the `W`-weighted inner product.
    pub fn solve_with_tolerance(&self, rhs: &[f64], tol: f64) -> Result<Vec<f64>> {
        self.grid.check_len(rhs)?;
        if let Some(k) = (0..rhs.len()).find(|&k| self.unknown[k] && !rhs[k].is_finite()) {
            let (r, z) = self.grid.coords(k);
            return Err(Error::param("rhs", format!("non-finite value at (r = {r}, z = {z})")));
        }
        let n = rhs.len();
        let b: Vec<f64> = (0..n).map(|k| if self.unknown[k] { rhs[k] } else { 0.0 }).collect();
        let mut x = vec![0.0; n];
        let b_norm = self.winner(&b, &b).sqrt();
        if b_norm == 0.0 {
            return Ok(x);
        }
        let mut r = b.clone();
        let mut z: Vec<f64> = (0..n).map(|k| if self.unknown[k] { r[k] / self.diag[k] } else { 0.0 }).collect();
        let mut p = z.clone();
        let mut ap = vec![0.0; n];
        let mut rz = self.winner(&r, &z);
        let cap = 10 * self.n_unknowns.max(1);
        let mut rel = 1.0;
        for _ in 0..cap {
            self.apply_into(&p, &mut ap);
            let pap = self.winner(&p, &ap);
            let alpha = rz / pap;
            for k in 0..n {
                x[k] += alpha * p[k];
                r[k] -= alpha * ap[k];
            }
            rel = self.winner(&r, &r).sqrt() / b_norm;
            if rel <= tol {
                return Ok(x);
            }
            for k in 0..n {
                if self.unknown[k] {
                    z[k] = r[k] / self.diag[k];
                }
            }
            let rz_new = self.winner(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for k in 0..n {
                p[k] = z[k] + beta * p[k];
            }
        }
        Err(Error::NoConvergence {
            what: "conjugate gradients",
            iterations: cap,
            residual: rel,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeridianDomain;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn torus(n: usize) -> MeridianGrid {
        MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), n, n).unwrap()
    }

    fn cylinder(n: usize) -> MeridianGrid {
        MeridianGrid::new(MeridianDomain::new(0.0, 1.0, 0.0, 1.0).unwrap(), n, n).unwrap()
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = torus(9);
        for op in [EllipticOperator::laplace(&g), EllipticOperator::laplace_plus_inv_r2(&g)] {
            assert!(op.apply(&g.zeros()).unwrap().iter().all(|&v| v == 0.0));
            assert!(op.solve_dirichlet(&g.zeros()).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn quadratic_in_z() {
        let g = torus(11);
        let op = EllipticOperator::laplace(&g);
        let out = op.apply(&g.sample(|_, z| z * z)).unwrap();
        for k in 0..g.len() {
            if g.kind(k) == NodeKind::Interior {
                assert!((out[k] + 2.0).abs() < 1e-9, "{}", out[k]);
            }
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let g = torus(5);
        let op = EllipticOperator::laplace(&g);
        assert!(matches!(op.apply(&[0.0; 3]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn lift_identity() {
        let g = torus(33);
        let op = EllipticOperator::laplace_plus_inv_r2(&g);
        let f = g.sample_interior(|r, z| (r - 1.0) * (2.0 - r) * z * (1.0 - z) * (1.0 + r * z).exp());
        let a = op.apply(&f).unwrap();
        let b = op.apply_lifted(&f, 16).unwrap();
        for k in 0..g.len() {
            if op.is_unknown(k) {
                assert!((a[k] - b[k]).abs() <= 1e-12 * a[k].abs(), "{} vs {}", a[k], b[k]);
            }
        }
    }

    fn manufactured_error(grid: &MeridianGrid, kind: OperatorKind) -> f64 {
        let d = grid.domain;
        let (a, b) = (PI / (d.r_max - d.r_min), PI / (d.z_max - d.z_min));
        let exact = |r: f64, z: f64| (a * (r - d.r_min)).sin() * (b * (z - d.z_min)).sin();
        let rhs = |r: f64, z: f64| {
            let mut v = (a * a + b * b) * exact(r, z)
                - a * (a * (r - d.r_min)).cos() * (b * (z - d.z_min)).sin() / r;
            if kind == OperatorKind::LaplacePlusInvR2 {
                v += exact(r, z) / (r * r);
            }
            v
        };
        let op = EllipticOperator::new(kind, grid);
        let sol = op.solve_with_tolerance(&grid.sample_interior(rhs), 1e-13).unwrap();
        let err: Vec<f64> = (0..grid.len())
            .map(|k| {
                let (r, z) = grid.coords(k);
                sol[k] - exact(r, z)
            })
            .collect();
        grid.l2_norm(&err)
    }

    #[test]
    fn second_order_convergence() {
        for kind in [OperatorKind::Laplace, OperatorKind::LaplacePlusInvR2] {
            let e1 = manufactured_error(&torus(17), kind);
            let e2 = manufactured_error(&torus(33), kind);
            let ratio = e1 / e2;
            assert!((3.6..=4.4).contains(&ratio), "{kind:?}: ratio {ratio}");
        }
    }

    #[test]
    fn axis_solutions_converge() {
        // −Δ[(1−r²) sin πz] = (4 + π²(1−r²)) sin πz
        // (−Δ+1/r²)[r(1−r²) sin πz] = (8r + π² r(1−r²)) sin πz
        let cases: [(OperatorKind, fn(f64, f64) -> f64, fn(f64, f64) -> f64); 2] = [
            (
                OperatorKind::Laplace,
                |r, z| (1.0 - r * r) * (PI * z).sin(),
                |r, z| (4.0 + PI * PI * (1.0 - r * r)) * (PI * z).sin(),
            ),
            (
                OperatorKind::LaplacePlusInvR2,
                |r, z| r * (1.0 - r * r) * (PI * z).sin(),
                |r, z| (8.0 * r + PI * PI * r * (1.0 - r * r)) * (PI * z).sin(),
            ),
        ];
        for (kind, exact, rhs) in cases {
            let mut errs = Vec::new();
            for n in [17, 33] {
                let g = cylinder(n);
                let op = EllipticOperator::new(kind, &g);
                let sol = op.solve_with_tolerance(&g.sample_interior(rhs), 1e-13).unwrap();
                let e = (0..g.len())
                    .map(|k| {
                        let (r, z) = g.coords(k);
                        (sol[k] - exact(r, z)).abs()
                    })
                    .fold(0.0, f64::max);
                errs.push(e);
            }
            let ratio = errs[0] / errs[1];
            assert!(ratio > 3.0, "{kind:?}: {errs:?}");
        }
    }

    #[test]
    fn maximum_principle_and_lower_bound() {
        for g in [torus(33), cylinder(33)] {
            let op = EllipticOperator::laplace(&g);
            let zeta = 2.5;
            let sol = op.solve_dirichlet(&g.sample(|_, _| zeta)).unwrap();
            for k in 0..g.len() {
                assert!(sol[k] >= -1e-12);
                if g.kind(k) == NodeKind::Interior {
                    let (r, z) = g.coords(k);
                    let dist = g.wall_distance(r, z).unwrap();
                    assert!(sol[k] >= 0.95 * zeta * dist * dist / 6.0);
                }
            }
        }
    }

    #[test]
    fn solves_reach_tolerance() {
        let g = torus(21);
        let op = EllipticOperator::laplace_plus_inv_r2(&g);
        let rhs = g.sample_interior(|r, z| r * z + 1.0);
        let sol = op.solve_dirichlet(&rhs).unwrap();
        let back = op.apply(&sol).unwrap();
        let num: f64 = (0..g.len()).map(|k| (back[k] - rhs[k]).powi(2) * g.radial_weight(k)).sum();
        let den: f64 = (0..g.len()).map(|k| rhs[k].powi(2) * g.radial_weight(k)).sum();
        assert!((num / den).sqrt() <= 1e-10);
        assert!(sol.iter().zip(g.kinds()).all(|(v, kd)| *kd != NodeKind::Boundary || *v == 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn operator_is_symmetric(seed in 0u64..1000, axis in proptest::bool::ANY) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g = if axis { cylinder(12) } else { torus(12) };
            for kind in [OperatorKind::Laplace, OperatorKind::LaplacePlusInvR2] {
                let op = EllipticOperator::new(kind, &g);
                let mut f = g.zeros();
                let mut h = g.zeros();
                for k in 0..g.len() {
                    if op.is_unknown(k) {
                        f[k] = rng.gen_range(-1.0..1.0);
                        h[k] = rng.gen_range(-1.0..1.0);
                    }
                }
                let lhs = g.inner(&op.apply(&f).unwrap(), &h);
                let rhs = g.inner(&f, &op.apply(&h).unwrap());
                prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
                prop_assert!(g.inner(&op.apply(&f).unwrap(), &f) > 0.0);
            }
        }
    }
}
