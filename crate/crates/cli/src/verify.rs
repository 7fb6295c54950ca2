//! Invariant suite behind `rvmlab verify`, sized from the configured domain.

use crate::commands::random_fields;
use crate::config::RunConfig;
use anyhow::Result;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rvmlab_core::moments::{brute_force_moments, compute_moments, integral_bound_check};
use rvmlab_core::trajectories::{sample_particles, FieldInterpolator, Pusher, PusherOptions};
use rvmlab_core::{
    Amplitude, ContinuationSchedule, EllipticOperator, EquilibriumSolver, FamilyKind, FamilySpec, FieldPair,
    MeridianDomain, MeridianGrid, MomentQuadrature, MuFunction, OperatorKind, SolverOptions, Species,
};
use std::f64::consts::PI;

/// One pass/fail line.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }

    pub fn line(&self) -> String {
        format!("{} {}: {}", if self.passed { "PASS" } else { "FAIL" }, self.name, self.detail)
    }
}

/// `|x − y| / max(|y|, 10⁻³)`.
pub fn rel_err(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs().max(1e-3)
}

pub fn run_all(cfg: &RunConfig, seed: u64) -> Result<Vec<Check>> {
    let grid = cfg.grid()?;
    let dom = grid.domain;
    Ok(vec![
        lift_identity(&grid)?,
        manufactured(dom, OperatorKind::Laplace)?,
        manufactured(dom, OperatorKind::LaplacePlusInvR2)?,
        trivial_branch(&grid)?,
        moment_oracle(&grid, &cfg.family()?, seed)?,
        integral_bounds(&grid, seed)?,
        invariants(&grid, seed)?,
        sign_property(&grid, Species::Ion)?,
        sign_property(&grid, Species::Electron)?,
    ])
}

/// Meridian `(−Δ + 1/r²)` stencil against `−Δ` of the lifted field.
pub fn lift_identity(grid: &MeridianGrid) -> Result<Check> {
    let op = EllipticOperator::laplace_plus_inv_r2(grid);
    let d = grid.domain;
    let g = grid.sample_interior(|r, z| {
        let x = (r - d.r_min) / (d.r_max - d.r_min);
        let y = (z - d.z_min) / (d.z_max - d.z_min);
        r * (1.0 + x * x) * (PI * y).sin() * (1.0 + (3.0 * x).cos())
    });
    let a = op.apply(&g)?;
    let b = op.apply_lifted(&g, 16)?;
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut worst = 0.0f64;
    for k in 0..grid.len() {
        if op.is_unknown(k) {
            worst = worst.max((a[k] - b[k]).abs() / a[k].abs().max(1e-3 * scale));
        }
    }
    Ok(Check::new("lift identity", worst <= 1e-12, format!("max relative error {worst:.2e}")))
}

/// Manufactured solution with its exact right-hand side.
pub fn manufactured_pair(dom: MeridianDomain, kind: OperatorKind) -> (impl Fn(f64, f64) -> f64, impl Fn(f64, f64) -> f64) {
    let (r0, r1, z0, z1) = (dom.r_min, dom.r_max, dom.z_min, dom.z_max);
    let k = PI / (z1 - z0);
    let axis = dom.touches_axis();
    let u = move |r: f64, z: f64| {
        let s = (k * (z - z0)).sin();
        match (axis, kind) {
            (true, OperatorKind::Laplace) => (r1 * r1 - r * r) * s,
            (true, OperatorKind::LaplacePlusInvR2) => r * (r1 * r1 - r * r) * s,
            (false, _) => (r - r0) * (r1 - r) * s,
        }
    };
    let f = move |r: f64, z: f64| {
        let s = (k * (z - z0)).sin();
        match (axis, kind) {
            (true, OperatorKind::Laplace) => (4.0 + k * k * (r1 * r1 - r * r)) * s,
            (true, OperatorKind::LaplacePlusInvR2) => (8.0 * r + k * k * r * (r1 * r1 - r * r)) * s,
            (false, _) => {
                let q = (r - r0) * (r1 - r);
                let base = 2.0 - (r0 + r1 - 2.0 * r) / r + k * k * q;
                let extra = if kind == OperatorKind::LaplacePlusInvR2 { q / (r * r) } else { 0.0 };
                (base + extra) * s
            }
        }
    };
    (u, f)
}

/// `L²` error of the discrete solve on an `n × n` grid.
pub fn manufactured_error(dom: MeridianDomain, kind: OperatorKind, n: usize) -> Result<f64> {
    let g = MeridianGrid::new(dom, n, n)?;
    let op = EllipticOperator::new(kind, &g);
    let (u, f) = manufactured_pair(dom, kind);
    let rhs = g.sample(&f);
    let sol = op.solve_with_tolerance(&rhs, 1e-13)?;
    let exact = g.sample(&u);
    let err: Vec<f64> = sol.iter().zip(&exact).map(|(a, b)| a - b).collect();
    Ok(g.l2_norm(&err))
}

pub fn manufactured(dom: MeridianDomain, kind: OperatorKind) -> Result<Check> {
    let coarse = manufactured_error(dom, kind, 17)?;
    let fine = manufactured_error(dom, kind, 33)?;
    let ratio = coarse / fine;
    let name = match kind {
        OperatorKind::Laplace => "manufactured solution (-Laplace)",
        OperatorKind::LaplacePlusInvR2 => "manufactured solution (-Laplace + 1/r^2)",
    };
    Ok(Check::new(name, (3.6..=4.4).contains(&ratio), format!("error ratio {ratio:.4}")))
}

fn even_ion(kind: FamilyKind, amp: Amplitude) -> FamilySpec {
    FamilySpec::single_ion(kind, MuFunction::even(1.0, 5.0).expect("valid profile"), amp)
}

pub fn trivial_branch(grid: &MeridianGrid) -> Result<Check> {
    let mut spec = even_ion(FamilyKind::Case1, Amplitude::Quadratic);
    spec.gamma = 0.5;
    spec.mu0 = MuFunction::maxwellian(1.0, 5.0)?;
    let s = EquilibriumSolver::new(grid, spec, MomentQuadrature::default(), SolverOptions::default())?;
    let sol = s.solve_at_k(&FieldPair::zeros(grid), 0.0)?;
    let n = sol.fields.inf_norm();
    Ok(Check::new("trivial branch at K = 0", n <= 1e-10, format!("|(phi, A)|_inf = {n:.2e}")))
}

pub fn moment_oracle(grid: &MeridianGrid, spec: &FamilySpec, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mp, mm) = spec.family_at(1.0);
    let quad = MomentQuadrature {
        tail_tolerance: 1e-8,
        ..MomentQuadrature::default()
    };
    let mut worst = 0.0f64;
    let mut worst_odd = 0.0f64;
    for _ in 0..3 {
        let f = random_fields(grid, &mut rng);
        let mom = compute_moments(grid, &f, (&mp, &mm), &quad)?;
        let k = grid.idx(grid.n_r / 2, grid.n_z / 2);
        let b = brute_force_moments(f.phi[k], f.total_a(k), grid.coords(k).0, (&mp, &mm), 8, mom.cutoff);
        worst = worst.max(rel_err(mom.rho[k], b.rho)).max(rel_err(mom.j_phi[k], b.j_phi));
        worst_odd = worst_odd.max(b.j_r.abs()).max(b.j_z.abs());
    }
    Ok(Check::new(
        "moment oracle",
        worst <= 1e-4 && worst_odd <= 1e-12,
        format!("max relative error {worst:.2e}, max |j_r|, |j_z| {worst_odd:.1e}"),
    ))
}

pub fn integral_bounds(grid: &MeridianGrid, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut ok = true;
    let mut margin = f64::INFINITY;
    for _ in 0..3 {
        let f = random_fields(grid, &mut rng);
        let rep = integral_bound_check(grid, &f, 4.0, 1e5)?;
        ok &= rep.holds();
        margin = margin.min(rep.min_upper_margin).min(rep.min_lower_margin);
    }
    Ok(Check::new("integral bounds", ok, format!("smallest relative margin {margin:.3e}")))
}

pub fn invariants(grid: &MeridianGrid, seed: u64) -> Result<Check> {
    let mut f = FieldPair::zeros(grid);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = random_fields(grid, &mut rng);
    f.phi = r.phi;
    f.a_phi = r.a_phi;
    let f = f.with_external(grid.sample(|r, _| 0.7 * r));
    let pusher = Pusher::new(FieldInterpolator::new(grid, &f)?, PusherOptions::default());
    let mut worst = 0.0f64;
    let mut refl = 0;
    for p in sample_particles(grid, 10, seed, Species::Ion, 1.0, 0.05) {
        let tr = pusher.run(&p, 50.0)?;
        worst = worst.max(tr.max_energy_drift()).max(tr.max_momentum_drift());
        refl += tr.reflections;
    }
    Ok(Check::new(
        "invariant conservation",
        worst <= 1e-6,
        format!("max relative drift {worst:.2e} over {refl} reflections"),
    ))
}

pub fn sign_property(grid: &MeridianGrid, species: Species) -> Result<Check> {
    let mu = MuFunction::even(1.0, 5.0)?;
    let spec = match species {
        Species::Ion => FamilySpec::single_ion(FamilyKind::Case1, mu, Amplitude::Quadratic),
        Species::Electron => FamilySpec::single_electron(FamilyKind::Case1, mu, Amplitude::Quadratic),
    };
    let s = EquilibriumSolver::new(grid, spec, MomentQuadrature::default(), SolverOptions::default())?;
    let br = s.continue_branch(&ContinuationSchedule::new(0.0, 1.0, 0.25))?;
    let (ok, detail) = match species {
        Species::Ion => {
            let m = br.entries.iter().map(|e| e.min_phi).fold(f64::INFINITY, f64::min);
            (m >= -1e-8, format!("min phi {m:.3e} over {} entries", br.entries.len()))
        }
        Species::Electron => {
            let m = br.entries.iter().map(|e| e.max_phi).fold(f64::NEG_INFINITY, f64::max);
            (m <= 1e-8, format!("max phi {m:.3e} over {} entries", br.entries.len()))
        }
    };
    let name = match species {
        Species::Ion => "sign property (ions)",
        Species::Electron => "sign property (electrons)",
    };
    Ok(Check::new(name, ok, detail))
}
