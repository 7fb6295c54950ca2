//! Relativistic particle motion in static axisymmetric equilibrium fields,
//! with specular reflection at the walls.
//!
//! Particles move in Cartesian 3-D. One base step is drift–kick–drift with a
//! relativistic Boris kick; the triple-jump composition of three base steps
//! makes it fourth order, and step doubling controls the local error. Fields
//! come from a C² interpolating cubic spline of `φ` and `A_φ`, with
//! `E = −∇φ` and `B = −∂_z A e_r + (A/r + ∂_r A) e_z` taken from the same
//! interpolant, so `e` and `p` are exact invariants of the interpolated
//! dynamics.

use crate::error::{Error, Result};
use crate::geometry::{Face, MeridianGrid};
use crate::solver::FieldPair;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Species {
    Ion,
    Electron,
}

impl Species {
    /// Charge sign `±1`.
    pub fn sign(self) -> f64 {
        match self {
            Species::Ion => 1.0,
            Species::Electron => -1.0,
        }
    }
}

/// Position and relativistic momentum in Cartesian components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParticleState {
    pub x: [f64; 3],
    pub v: [f64; 3],
    pub species: Species,
}

impl ParticleState {
    /// From cylindrical position `(r, θ, z)` and momentum `(v_r, v_φ, v_z)`.
    pub fn from_cylindrical(pos: [f64; 3], mom: [f64; 3], species: Species) -> Self {
        let [r, th, z] = pos;
        let (s, c) = th.sin_cos();
        let [vr, vp, vz] = mom;
        Self {
            x: [r * c, r * s, z],
            v: [vr * c - vp * s, vr * s + vp * c, vz],
            species,
        }
    }

    pub fn r(&self) -> f64 {
        self.x[0].hypot(self.x[1])
    }

    /// `(r, θ, z)`.
    pub fn position_cyl(&self) -> [f64; 3] {
        [self.r(), self.x[1].atan2(self.x[0]), self.x[2]]
    }

    /// `(v_r, v_φ, v_z)`.
    pub fn momentum_cyl(&self) -> [f64; 3] {
        let r = self.r();
        if r == 0.0 {
            return [self.v[0], self.v[1], self.v[2]];
        }
        let (c, s) = (self.x[0] / r, self.x[1] / r);
        [self.v[0] * c + self.v[1] * s, -self.v[0] * s + self.v[1] * c, self.v[2]]
    }

    /// `⟨v⟩ = √(1 + |v|²)`.
    pub fn gamma(&self) -> f64 {
        (1.0 + dot(&self.v, &self.v)).sqrt()
    }
}

#[inline]
fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Interpolated values at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub phi: f64,
    pub dphi_dr: f64,
    pub dphi_dz: f64,
    pub a: f64,
    pub da_dr: f64,
    pub da_dz: f64,
}

#[inline]
fn bspline(t: f64) -> ([f64; 4], [f64; 4]) {
    let u = 1.0 - t;
    let t2 = t * t;
    let t3 = t2 * t;
    (
        [
            u * u * u / 6.0,
            (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
            (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
            t3 / 6.0,
        ],
        [-0.5 * u * u, 0.5 * (3.0 * t2 - 4.0 * t), 0.5 * (-3.0 * t2 + 2.0 * t + 1.0), 0.5 * t2],
    )
}

/// End condition of a spline line.
#[derive(Clone, Copy)]
enum End {
    /// Zero second derivative.
    Natural,
    /// Mirror symmetry about the end node.
    Even,
    /// Antisymmetry about the end node.
    Odd,
}

/// B-spline coefficients `c_{−1..=n}` interpolating `f` at the nodes
/// `0..n` (`f_i = (c_{i−1} + 4c_i + c_{i+1})/6`).
fn spline_coefficients(f: &[f64], left: End) -> Vec<f64> {
    let n = f.len();
    let mut sub = vec![1.0; n];
    let mut diag = vec![4.0; n];
    let mut sup = vec![1.0; n];
    let mut rhs: Vec<f64> = f.iter().map(|v| 6.0 * v).collect();
    match left {
        End::Natural => (diag[0], sup[0]) = (6.0, 0.0),
        End::Even => sup[0] = 2.0,
        End::Odd => sup[0] = 0.0,
    }
    sub[n - 1] = 0.0;
    diag[n - 1] = 6.0;
    // Thomas algorithm.
    for i in 1..n {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut c = vec![0.0; n + 2];
    c[n] = rhs[n - 1] / diag[n - 1];
    for i in (0..n - 1).rev() {
        c[i + 1] = (rhs[i] - sup[i] * c[i + 2]) / diag[i];
    }
    c[0] = match left {
        End::Natural => 2.0 * c[1] - c[2],
        End::Even => c[2],
        End::Odd => -c[2],
    };
    c[n + 1] = 2.0 * c[n] - c[n - 1];
    c
}

/// Tensor-product coefficients, stored with `(n_r + 2)` entries per row.
fn spline_2d(grid: &MeridianGrid, f: &[f64], axis: End) -> Vec<f64> {
    let (nr, nz) = (grid.n_r, grid.n_z);
    let left = if grid.domain.touches_axis() { axis } else { End::Natural };
    let rows: Vec<Vec<f64>> = (0..nz).map(|j| spline_coefficients(&f[j * nr..(j + 1) * nr], left)).collect();
    let mut out = vec![0.0; (nr + 2) * (nz + 2)];
    let mut col = vec![0.0; nz];
    for i in 0..nr + 2 {
        for j in 0..nz {
            col[j] = rows[j][i];
        }
        for (j, v) in spline_coefficients(&col, End::Natural).into_iter().enumerate() {
            out[j * (nr + 2) + i] = v;
        }
    }
    out
}

/// C² interpolating cubic spline of `φ` and `A_φ + A_ext` on the grid.
#[derive(Debug, Clone)]
pub struct FieldInterpolator {
    grid: MeridianGrid,
    phi: Vec<f64>,
    a: Vec<f64>,
}

impl FieldInterpolator {
    pub fn new(grid: &MeridianGrid, fields: &FieldPair) -> Result<Self> {
        fields.check(grid)?;
        let a: Vec<f64> = (0..grid.len()).map(|k| fields.total_a(k)).collect();
        Ok(Self {
            grid: grid.clone(),
            phi: spline_2d(grid, &fields.phi, End::Even),
            a: spline_2d(grid, &a, End::Odd),
        })
    }

    /// Interpolant of a single scalar grid field (stored as `φ`).
    pub fn scalar(grid: &MeridianGrid, h: &[f64]) -> Result<Self> {
        grid.check_len(h)?;
        Ok(Self {
            grid: grid.clone(),
            phi: spline_2d(grid, h, End::Even),
            a: vec![0.0; (grid.n_r + 2) * (grid.n_z + 2)],
        })
    }

    pub fn grid(&self) -> &MeridianGrid {
        &self.grid
    }

    fn interp(&self, c: &[f64], ci: usize, cj: usize, wr: &([f64; 4], [f64; 4]), wz: &([f64; 4], [f64; 4])) -> (f64, f64, f64) {
        let stride = self.grid.n_r + 2;
        let (mut v, mut dr, mut dz) = (0.0, 0.0, 0.0);
        for b in 0..4 {
            let row = &c[(cj + b) * stride + ci..(cj + b) * stride + ci + 4];
            let mut row_v = 0.0;
            let mut row_d = 0.0;
            for a in 0..4 {
                row_v += wr.0[a] * row[a];
                row_d += wr.1[a] * row[a];
            }
            v += wz.0[b] * row_v;
            dr += wz.0[b] * row_d;
            dz += wz.1[b] * row_v;
        }
        (v, dr / self.grid.h_r, dz / self.grid.h_z)
    }

    /// Fields at `(r, z)`. Points slightly outside (up to half a cell) are
    /// evaluated on the continued interpolant.
    pub fn eval(&self, r: f64, z: f64) -> Result<FieldSample> {
        let g = &self.grid;
        let d = &g.domain;
        let slack = 0.5 * g.h_r.max(g.h_z);
        let r_lo = if d.touches_axis() { 0.0 } else { d.r_min - slack };
        if !(r >= r_lo && r <= d.r_max + slack && z >= d.z_min - slack && z <= d.z_max + slack) {
            return Err(Error::OutsideDomain { r, z });
        }
        let sr = (r - d.r_min) / g.h_r;
        let sz = (z - d.z_min) / g.h_z;
        let ci = (sr.floor() as isize).clamp(0, g.n_r as isize - 2);
        let cj = (sz.floor() as isize).clamp(0, g.n_z as isize - 2);
        let wr = bspline(sr - ci as f64);
        let wz = bspline(sz - cj as f64);
        let (ci, cj) = (ci as usize, cj as usize);
        let (phi, dphi_dr, dphi_dz) = self.interp(&self.phi, ci, cj, &wr, &wz);
        let (a, da_dr, da_dz) = self.interp(&self.a, ci, cj, &wr, &wz);
        Ok(FieldSample {
            phi,
            dphi_dr,
            dphi_dz,
            a,
            da_dr,
            da_dz,
        })
    }

    /// Cartesian `E` and `B` at `x`.
    fn em(&self, x: &[f64; 3]) -> Result<([f64; 3], [f64; 3])> {
        let r = x[0].hypot(x[1]);
        let f = self.eval(r, x[2])?;
        let (c, s) = if r > 0.0 { (x[0] / r, x[1] / r) } else { (1.0, 0.0) };
        let a_over_r = if r > 1e-12 { f.a / r } else { f.da_dr };
        let e_r = -f.dphi_dr;
        let b_r = -f.da_dz;
        let b_z = a_over_r + f.da_dr;
        Ok(([e_r * c, e_r * s, -f.dphi_dz], [b_r * c, b_r * s, b_z]))
    }

    /// `(e, p)` for a state.
    pub fn invariants(&self, st: &ParticleState) -> Result<(f64, f64)> {
        let [r, _, z] = st.position_cyl();
        let f = self.eval(r, z)?;
        let s = st.species.sign();
        let vphi = st.momentum_cyl()[1];
        Ok((st.gamma() + s * f.phi, r * (vphi + s * f.a)))
    }
}

/// Integrator settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PusherOptions {
    /// Local error tolerance per step (absolute, on position and momentum).
    pub tolerance: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Time resolution of the wall-crossing bisection.
    pub wall_time_tolerance: f64,
}

impl Default for PusherOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-11,
            dt_max: 0.05,
            dt_min: 1e-9,
            wall_time_tolerance: 1e-12,
        }
    }
}

/// Triple-jump weights.
const W1: f64 = 1.351_207_191_959_657_6;
const W0: f64 = -1.702_414_383_919_315_3;

#[derive(Debug, Clone)]
pub struct Pusher {
    pub fields: FieldInterpolator,
    pub options: PusherOptions,
}

/// Outcome of one controlled step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub state: ParticleState,
    pub dt_taken: f64,
    pub dt_next: f64,
    pub reflections: usize,
}

/// One per accepted step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InvariantRecord {
    pub t: f64,
    pub pos: [f64; 3],
    pub mom: [f64; 3],
    pub e: f64,
    pub p: f64,
    pub reflections: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub records: Vec<InvariantRecord>,
    pub reflections: usize,
    pub final_state: ParticleState,
}

impl Trajectory {
    /// Largest `|e(t) − e(0)| / max(1, |e(0)|)`.
    pub fn max_energy_drift(&self) -> f64 {
        let e0 = self.records[0].e;
        self.records
            .iter()
            .map(|r| (r.e - e0).abs() / e0.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// Largest `|p(t) − p(0)| / max(1, |p(0)|)`.
    pub fn max_momentum_drift(&self) -> f64 {
        let p0 = self.records[0].p;
        self.records
            .iter()
            .map(|r| (r.p - p0).abs() / p0.abs().max(1.0))
            .fold(0.0, f64::max)
    }
}

/// Specular reflection of a Cartesian momentum off the wall with meridian
/// normal `n = (n_r, n_z)` at azimuthal position `x`.
pub fn reflect_velocity(x: &[f64; 3], v: &[f64; 3], n: [f64; 2]) -> [f64; 3] {
    let r = x[0].hypot(x[1]);
    let (c, s) = if r > 0.0 { (x[0] / r, x[1] / r) } else { (1.0, 0.0) };
    let n3 = [n[0] * c, n[0] * s, n[1]];
    let vn = dot(v, &n3);
    [v[0] - 2.0 * vn * n3[0], v[1] - 2.0 * vn * n3[1], v[2] - 2.0 * vn * n3[2]]
}

/// Reflects a state sitting on `face` (within `tol` of it).
pub fn reflect(state: &ParticleState, grid: &MeridianGrid, face: Face, tol: f64) -> Result<ParticleState> {
    let [r, _, z] = state.position_cyl();
    let d = &grid.domain;
    let gap = match face {
        Face::RMin => (r - d.r_min).abs(),
        Face::RMax => (r - d.r_max).abs(),
        Face::ZMin => (z - d.z_min).abs(),
        Face::ZMax => (z - d.z_max).abs(),
    };
    if gap > tol || (face == Face::RMin && d.touches_axis()) {
        return Err(Error::param("state", format!("(r = {r}, z = {z}) is not on the {face:?} wall")));
    }
    Ok(ParticleState {
        v: reflect_velocity(&state.x, &state.v, face.normal()),
        ..*state
    })
}

impl Pusher {
    pub fn new(fields: FieldInterpolator, options: PusherOptions) -> Self {
        Self { fields, options }
    }

    fn inside(&self, x: &[f64; 3]) -> Option<Vec<Face>> {
        let d = &self.fields.grid().domain;
        let r = x[0].hypot(x[1]);
        let mut out = Vec::new();
        if !d.touches_axis() && r < d.r_min {
            out.push(Face::RMin);
        }
        if r > d.r_max {
            out.push(Face::RMax);
        }
        if x[2] < d.z_min {
            out.push(Face::ZMin);
        }
        if x[2] > d.z_max {
            out.push(Face::ZMax);
        }
        if out.is_empty() {
            None
        } else {
            Some(out)
        }
    }

    /// Symmetric drift–kick–drift step.
    fn base_step(&self, st: &mut ParticleState, dt: f64) -> Result<()> {
        let q = st.species.sign();
        let g = st.gamma();
        for k in 0..3 {
            st.x[k] += 0.5 * dt * st.v[k] / g;
        }
        let (e, b) = self.fields.em(&st.x)?;
        // Boris: half electric kick, magnetic rotation, half electric kick.
        let h = 0.5 * q * dt;
        let vm = [st.v[0] + h * e[0], st.v[1] + h * e[1], st.v[2] + h * e[2]];
        let gm = (1.0 + dot(&vm, &vm)).sqrt();
        let t = [h * b[0] / gm, h * b[1] / gm, h * b[2] / gm];
        let t2 = dot(&t, &t);
        let s = [2.0 * t[0] / (1.0 + t2), 2.0 * t[1] / (1.0 + t2), 2.0 * t[2] / (1.0 + t2)];
        let vxt = cross(&vm, &t);
        let vp = [vm[0] + vxt[0], vm[1] + vxt[1], vm[2] + vxt[2]];
        let vps = cross(&vp, &s);
        let vplus = [vm[0] + vps[0], vm[1] + vps[1], vm[2] + vps[2]];
        st.v = [vplus[0] + h * e[0], vplus[1] + h * e[1], vplus[2] + h * e[2]];
        let g = st.gamma();
        for k in 0..3 {
            st.x[k] += 0.5 * dt * st.v[k] / g;
        }
        Ok(())
    }

    fn composed(&self, st: &ParticleState, dt: f64) -> Result<ParticleState> {
        let mut s = *st;
        self.base_step(&mut s, W1 * dt)?;
        self.base_step(&mut s, W0 * dt)?;
        self.base_step(&mut s, W1 * dt)?;
        Ok(s)
    }

    /// One error-controlled step of at most `dt`, with reflections.
    pub fn step(&self, st: &ParticleState, dt: f64) -> Result<StepOutcome> {
        if !(dt > 0.0) {
            return Err(Error::param("dt", format!("must be positive, got {dt}")));
        }
        let opts = &self.options;
        let mut dt = dt.min(opts.dt_max);
        loop {
            let full = self.composed(st, dt);
            let half = self.composed(st, 0.5 * dt).and_then(|h| self.composed(&h, 0.5 * dt));
            let (full, half) = match (full, half) {
                (Ok(f), Ok(h)) => (f, h),
                _ => {
                    // Trial left the interpolation range: shrink.
                    dt *= 0.25;
                    if dt < opts.dt_min {
                        return Err(Error::param("dt", "step underflow near the wall"));
                    }
                    continue;
                }
            };
            let mut err: f64 = 0.0;
            for k in 0..3 {
                err = err.max((full.x[k] - half.x[k]).abs()).max((full.v[k] - half.v[k]).abs());
            }
            err /= 15.0;
            if err > opts.tolerance && dt > opts.dt_min {
                dt *= (0.9 * (opts.tolerance / err).powf(0.2)).clamp(0.1, 0.5);
                continue;
            }
            let factor = if err == 0.0 { 2.0 } else { (0.9 * (opts.tolerance / err).powf(0.2)).clamp(0.2, 2.0) };
            let dt_next = (dt * factor).min(opts.dt_max);
            let out = half;
            return match self.inside(&out.x) {
                None => Ok(StepOutcome {
                    state: out,
                    dt_taken: dt,
                    dt_next,
                    reflections: 0,
                }),
                Some(_) => self.hit_wall(st, dt, dt_next),
            };
        }
    }

    /// Bisects the step fraction at which the particle reaches the wall,
    /// stops there and reflects.
    fn hit_wall(&self, st: &ParticleState, dt: f64, dt_next: f64) -> Result<StepOutcome> {
        let fine = |h: f64| -> Result<ParticleState> {
            let a = self.composed(st, 0.5 * h)?;
            self.composed(&a, 0.5 * h)
        };
        let (mut lo, mut hi) = (0.0, dt);
        let mut faces = Vec::new();
        while hi - lo > self.options.wall_time_tolerance {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            match fine(mid).map(|s| self.inside(&s.x)) {
                Ok(None) => lo = mid,
                Ok(Some(f)) => {
                    faces = f;
                    hi = mid;
                }
                Err(e) => return Err(e),
            }
        }
        if faces.is_empty() {
            faces = self.inside(&fine(hi)?.x).unwrap_or_default();
        }
        let mut out = if lo > 0.0 { fine(lo)? } else { *st };
        // r-face before z-face at corners.
        faces.sort_by_key(|f| match f {
            Face::RMin | Face::RMax => 0,
            Face::ZMin | Face::ZMax => 1,
        });
        let n = faces.len();
        for f in faces {
            out.v = reflect_velocity(&out.x, &out.v, f.normal());
        }
        Ok(StepOutcome {
            state: out,
            dt_taken: lo,
            dt_next: dt_next.min(dt),
            reflections: n,
        })
    }

    /// Integrates to time `t_end`, recording every accepted step.
    pub fn run(&self, st: &ParticleState, t_end: f64) -> Result<Trajectory> {
        let (e, p) = self.fields.invariants(st)?;
        let rec = |t: f64, s: &ParticleState, e: f64, p: f64, n: usize| InvariantRecord {
            t,
            pos: s.position_cyl(),
            mom: s.momentum_cyl(),
            e,
            p,
            reflections: n,
        };
        let mut records = vec![rec(0.0, st, e, p, 0)];
        let mut state = *st;
        let mut t = 0.0;
        let mut dt = self.options.dt_max;
        let mut reflections = 0;
        let mut stalls = 0;
        while t < t_end {
            let out = self.step(&state, dt.min(t_end - t))?;
            state = out.state;
            t += out.dt_taken;
            reflections += out.reflections;
            dt = out.dt_next.max(self.options.dt_min);
            // Consecutive zero-length steps happen only when sitting on the wall.
            stalls = if out.dt_taken == 0.0 { stalls + 1 } else { 0 };
            if stalls > 8 {
                return Err(Error::NoConvergence {
                    what: "wall reflection",
                    iterations: stalls,
                    residual: 0.0,
                });
            }
            let (e, p) = self.fields.invariants(&state)?;
            records.push(rec(t, &state, e, p, reflections));
        }
        Ok(Trajectory {
            records,
            reflections,
            final_state: state,
        })
    }
}

/// `n` particles uniformly placed in the interior (at least `margin` from
/// each wall) with momentum components uniform in `[−v_max, v_max]`.
pub fn sample_particles(grid: &MeridianGrid, n: usize, seed: u64, species: Species, v_max: f64, margin: f64) -> Vec<ParticleState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = &grid.domain;
    let r_lo = if d.touches_axis() { margin } else { d.r_min + margin };
    (0..n)
        .map(|_| {
            let r = rng.gen_range(r_lo..d.r_max - margin);
            let th = rng.gen_range(0.0..std::f64::consts::TAU);
            let z = rng.gen_range(d.z_min + margin..d.z_max - margin);
            let v = [
                rng.gen_range(-v_max..v_max),
                rng.gen_range(-v_max..v_max),
                rng.gen_range(-v_max..v_max),
            ];
            ParticleState::from_cylindrical([r, th, z], v, species)
        })
        .collect()
}

/// Trajectory average of `v̂_φ h(X)` for one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionSample {
    pub average: f64,
    pub half_average: f64,
    /// `|average − half_average| < 1e-2`.
    pub converged: bool,
}

/// `(1/T)∫₀^T v̂_φ(s) h(X(s)) ds` along each sample's trajectory, with the
/// `T/2` average as a convergence diagnostic. Advisory only.
pub fn estimate_projection(
    h: &[f64],
    fields: &FieldInterpolator,
    samples: &[ParticleState],
    t_end: f64,
    options: PusherOptions,
) -> Result<Vec<ProjectionSample>> {
    let hi = FieldInterpolator::scalar(fields.grid(), h)?;
    let pusher = Pusher::new(fields.clone(), options);
    samples
        .par_iter()
        .map(|st| {
            let traj = pusher.run(st, t_end)?;
            let value = |rec: &InvariantRecord| -> Result<f64> {
                let gamma = (1.0 + rec.mom.iter().map(|m| m * m).sum::<f64>()).sqrt();
                Ok(rec.mom[1] / gamma * hi.eval(rec.pos[0], rec.pos[2])?.phi)
            };
            let mut total = 0.0;
            let mut half = None;
            let mut prev = value(&traj.records[0])?;
            for w in traj.records.windows(2) {
                let cur = value(&w[1])?;
                total += 0.5 * (prev + cur) * (w[1].t - w[0].t);
                prev = cur;
                if half.is_none() && w[1].t >= 0.5 * t_end {
                    half = Some(total / w[1].t.max(f64::MIN_POSITIVE));
                }
            }
            let average = total / t_end;
            let half_average = half.unwrap_or(average);
            Ok(ProjectionSample {
                average,
                half_average,
                converged: (average - half_average).abs() < 1e-2,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::MeridianDomain;

    fn torus(n: usize) -> MeridianGrid {
        MeridianGrid::new(MeridianDomain::new(1.0, 2.0, 0.0, 1.0).unwrap(), n, n).unwrap()
    }

    fn pusher(grid: &MeridianGrid, fields: &FieldPair) -> Pusher {
        Pusher::new(FieldInterpolator::new(grid, fields).unwrap(), PusherOptions::default())
    }

    #[test]
    fn reflection_examples() {
        let g = torus(5);
        let st = ParticleState::from_cylindrical([2.0, 0.0, 0.5], [1.0, 2.0, 3.0], Species::Ion);
        let out = reflect(&st, &g, Face::RMax, 1e-12).unwrap();
        let m = out.momentum_cyl();
        assert_eq!(m, [-1.0, 2.0, 3.0]);
        assert!(reflect(&st, &g, Face::ZMin, 1e-12).is_err());
    }

    #[test]
    fn reflection_preserves_norm_and_vphi() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let th: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let x = [2.0 * th.cos(), 2.0 * th.sin(), rng.gen_range(0.0..1.0)];
            let v = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
            for n in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
                let w = reflect_velocity(&x, &v, n);
                assert!((dot(&w, &w) - dot(&v, &v)).abs() < 1e-12);
                let a = ParticleState { x, v, species: Species::Ion }.momentum_cyl();
                let b = ParticleState { x, v: w, species: Species::Ion }.momentum_cyl();
                assert!((a[1] - b[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn field_free_straight_line() {
        let g = torus(9);
        let p = pusher(&g, &FieldPair::zeros(&g));
        let st = ParticleState::from_cylindrical([1.5, 0.0, 0.5], [0.01, 0.02, 0.01], Species::Ion);
        let t = 3.0;
        let tr = p.run(&st, t).unwrap();
        assert_eq!(tr.reflections, 0);
        let gam = st.gamma();
        for k in 0..3 {
            assert!((tr.final_state.x[k] - (st.x[k] + t * st.v[k] / gam)).abs() < 1e-13);
        }
        assert!(tr.max_energy_drift() < 1e-15 && tr.max_momentum_drift() < 1e-13);
    }

    #[test]
    fn field_free_time_reversal() {
        let g = torus(9);
        let p = pusher(&g, &FieldPair::zeros(&g));
        let st = ParticleState::from_cylindrical([1.3, 0.2, 0.4], [2.0, 1.0, -3.0], Species::Electron);
        let fwd = p.run(&st, 20.0).unwrap();
        assert!(fwd.reflections >= 5);
        let mut back = fwd.final_state;
        back.v = [-back.v[0], -back.v[1], -back.v[2]];
        let bwd = p.run(&back, 20.0).unwrap();
        for k in 0..3 {
            assert!((bwd.final_state.x[k] - st.x[k]).abs() < 1e-10, "{:?} vs {:?}", bwd.final_state.x, st.x);
        }
    }

    #[test]
    fn invariants_in_smooth_fields() {
        let g = torus(17);
        let mut f = FieldPair::zeros(&g);
        f.phi = g.sample_interior(|r, z| 0.8 * ((r - 1.0) * std::f64::consts::PI).sin() * (z * std::f64::consts::PI).sin());
        f.a_phi = g.sample_interior(|r, z| 1.5 * (r - 1.0) * (2.0 - r) * z * (1.0 - z) * 4.0);
        let f = f.with_external(g.sample(|r, _| 0.7 * r));
        let p = pusher(&g, &f);
        for (i, st) in sample_particles(&g, 6, 9, Species::Ion, 1.0, 0.05).iter().enumerate() {
            let tr = p.run(st, 40.0).unwrap();
            assert!(tr.max_energy_drift() <= 1e-7, "{i}: e drift {}", tr.max_energy_drift());
            assert!(tr.max_momentum_drift() <= 1e-7, "{i}: p drift {}", tr.max_momentum_drift());
        }
    }

    #[test]
    fn pure_magnetic_field_conserves_gamma() {
        let g = torus(17);
        let mut f = FieldPair::zeros(&g);
        f.a_phi = g.sample_interior(|r, z| 3.0 * (r - 1.0) * (2.0 - r) * z * (1.0 - z));
        let p = pusher(&g, &f);
        let st = ParticleState::from_cylindrical([1.5, 0.0, 0.5], [0.3, -0.4, 0.2], Species::Ion);
        let tr = p.run(&st, 10.0).unwrap();
        let g0 = st.gamma();
        let g1 = tr.final_state.gamma();
        assert!((g1 - g0).abs() <= 1e-10 * 10.0);
    }

    #[test]
    fn interpolant_is_exact_for_bilinear_fields() {
        let g = torus(9);
        let mut f = FieldPair::zeros(&g);
        f.phi = g.sample(|r, z| 1.0 + 2.0 * r - z + 0.5 * r * z);
        let it = FieldInterpolator::new(&g, &f).unwrap();
        let s = it.eval(1.37, 0.61).unwrap();
        assert!((s.phi - (1.0 + 2.74 - 0.61 + 0.5 * 1.37 * 0.61)).abs() < 1e-13);
        assert!((s.dphi_dr - (2.0 + 0.5 * 0.61)).abs() < 1e-12);
        assert!((s.dphi_dz - (-1.0 + 0.5 * 1.37)).abs() < 1e-12);
        assert!(it.eval(3.0, 0.5).is_err());
    }

    #[test]
    fn projection_of_constant() {
        let g = torus(9);
        let it = FieldInterpolator::new(&g, &FieldPair::zeros(&g)).unwrap();
        let h = g.sample(|_, _| 2.0);
        let samples = sample_particles(&g, 4, 1, Species::Ion, 1.0, 0.05);
        let est = estimate_projection(&h, &it, &samples, 50.0, PusherOptions::default()).unwrap();
        assert_eq!(est.len(), samples.len());
        assert!(est.iter().all(|s| s.average.is_finite() && s.average.abs() <= 2.0));
        // Zero momentum in φ gives zero average.
        let still = vec![ParticleState::from_cylindrical([1.5, 0.0, 0.5], [0.3, 0.0, 0.2], Species::Ion)];
        let est = estimate_projection(&h, &it, &still, 20.0, PusherOptions::default()).unwrap();
        assert!(est[0].average.abs() < 1e-12 && est[0].converged);
    }
}
