use crate::config::RunConfig;
use crate::output;
use crate::verify;
use anyhow::{anyhow, bail, Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rvmlab_core::moments::{brute_force_moments, compute_moments, integral_bound_check};
use rvmlab_core::stability::{
    branch_stability_sweep, c_p_estimate, check_hypotheses, instability_threshold, margin_constants, test_bank,
    HypothesisBox, MarginPolynomial, SweepOptions,
};
use rvmlab_core::trajectories::{sample_particles, FieldInterpolator, Pusher, PusherOptions};
use rvmlab_core::{EquilibriumBranch, EquilibriumSolver, FieldPair, MeridianGrid};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Solve,
    Continue,
    Stability,
    Trajectories,
    MomentsCheck,
    Verify,
}

/// What a command produced.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    /// Human-readable report lines.
    pub report: Vec<String>,
    /// False when a check-type command found a failure.
    pub passed: bool,
}

pub fn run(command: Command, cfg: &RunConfig, out: &Path, seed: Option<u64>) -> Result<Outcome> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let runner = Runner::new(cfg)?;
    let seed = seed.unwrap_or(cfg.trajectories.seed);
    match command {
        Command::Solve => runner.solve(out),
        Command::Continue => runner.continue_(out),
        Command::Stability => runner.stability(out),
        Command::Trajectories => runner.trajectories(out, seed),
        Command::MomentsCheck => runner.moments_check(out, seed),
        Command::Verify => {
            let items = verify::run_all(cfg, seed)?;
            let passed = items.iter().all(|c| c.passed);
            Ok(Outcome {
                files: Vec::new(),
                report: items.iter().map(verify::Check::line).collect(),
                passed,
            })
        }
    }
}

struct Runner<'a> {
    cfg: &'a RunConfig,
    grid: MeridianGrid,
    solver: EquilibriumSolver,
}

impl<'a> Runner<'a> {
    fn new(cfg: &'a RunConfig) -> Result<Self> {
        let grid = cfg.grid()?;
        let solver = EquilibriumSolver::new(&grid, cfg.family()?, cfg.quadrature()?, cfg.solver_options()?)?;
        Ok(Self { cfg, grid, solver })
    }

    /// Zero fields, carrying the external potential when configured.
    fn zero_fields(&self) -> FieldPair {
        let f = FieldPair::zeros(&self.grid);
        match self.cfg.solver.external_bz {
            Some(b) => f.with_external(self.grid.sample(|r, _| 0.5 * b * r)),
            None => f,
        }
    }

    fn branch(&self) -> Result<EquilibriumBranch> {
        let guess = self.zero_fields();
        Ok(match &self.cfg.solver.k_values {
            Some(ks) => self.solver.solve_sequence(&guess, ks)?,
            None => self.solver.continue_branch_from(&guess, &self.cfg.schedule()?)?,
        })
    }

    /// Equilibrium at `k`, reached by the configured continuation.
    fn fields_at(&self, k: f64) -> Result<FieldPair> {
        let guess = self.zero_fields();
        let s = &self.cfg.solver;
        let branch = match &s.k_values {
            Some(ks) => {
                let mut path: Vec<f64> = ks.iter().copied().filter(|&x| x < k).collect();
                path.push(k);
                self.solver.solve_sequence(&guess, &path)?
            }
            None if k <= s.k_start => self.solver.solve_sequence(&guess, &[k])?,
            None => {
                let mut sch = self.cfg.schedule()?;
                sch.stop = k;
                self.solver.continue_branch_from(&guess, &sch)?
            }
        };
        let last = branch.entries.last().expect("nonempty branch");
        if last.k != k {
            bail!("continuation stopped at K = {} ({}) before reaching K = {k}", last.k, branch.stop_reason.as_str());
        }
        Ok(last.fields.clone())
    }

    fn solve(&self, out: &Path) -> Result<Outcome> {
        let s = &self.cfg.solver;
        let k = s.k.unwrap_or(s.k_start);
        let mut guess = match &s.initial_fields {
            Some(p) => output::read_fields(p, &self.grid)?,
            None => FieldPair::zeros(&self.grid),
        };
        guess.a_ext = self.zero_fields().a_ext;
        let branch = self.solver.solve_sequence(&guess, &[k])?;
        let e = &branch.entries[0];
        let files = output::write_branch(out, &self.grid, &branch)?;
        Ok(Outcome {
            files,
            report: vec![format!(
                "K = {k}: residual {:.3e}, |phi|_inf {:.6e}, |A|_inf {:.6e}, {} iterations",
                e.residual, e.phi_inf, e.a_inf, e.iterations
            )],
            passed: true,
        })
    }

    fn continue_(&self, out: &Path) -> Result<Outcome> {
        let branch = self.branch()?;
        let files = output::write_branch(out, &self.grid, &branch)?;
        let last = branch.entries.last().expect("nonempty branch");
        Ok(Outcome {
            files,
            report: vec![format!(
                "{} entries, last K = {} ({}), |(phi, A)|_inf = {:.6e}",
                branch.entries.len(),
                last.k,
                branch.stop_reason.as_str(),
                last.fields.inf_norm()
            )],
            passed: true,
        })
    }

    fn stability(&self, out: &Path) -> Result<Outcome> {
        let branch = self.branch()?;
        let spec = &self.solver.spec;
        let st = &self.cfg.stability;
        let bank = test_bank(&self.grid, st.max_mode)?;
        let c_p = match st.c_p {
            Some(c) => c,
            None => c_p_estimate(&self.grid)?.c_p,
        };
        let opts = SweepOptions {
            hypothesis_box: HypothesisBox::default(),
            c_p: Some(c_p),
        };
        let reports = branch_stability_sweep(&branch, spec, &bank, &self.grid, &self.solver.quad, &opts)?;
        let mut files = output::write_branch(out, &self.grid, &branch)?;
        files.push(output::write_stability(out, &reports)?);
        let mut report = vec![format!("c_P = {c_p:.6e}, {} test functions", bank.len())];
        if let Some(params) = spec.instability {
            let hyp = check_hypotheses(spec, &self.grid, &opts.hypothesis_box);
            report.push(format!("hypotheses {}: {hyp:?}", if hyp.all_pass() { "pass" } else { "fail" }));
            let b = self.grid.domain.sup_r();
            match instability_threshold(&params, &bank, c_p, b, st.k_max)? {
                Some(k) => report.push(format!("K* = {k:.6e}")),
                None => report.push(format!("no threshold below K = {:e}", st.k_max)),
            }
            let k_mono = bank
                .iter()
                .map(|h| MarginPolynomial::from_constants(&margin_constants(&params, h, c_p, b)))
                .collect::<std::result::Result<Vec<_>, _>>()?
                .iter()
                .filter_map(|p| p.monotone_from(1.0, st.k_max, 400))
                .fold(None, |acc: Option<f64>, k| Some(acc.map_or(k, |a| a.max(k))));
            if let Some(k) = k_mono {
                report.push(format!("K_mono = {k:.6e}"));
            }
        }
        for r in &reports {
            report.push(format!("K = {}: {}", r.k, r.verdict.as_str()));
        }
        Ok(Outcome {
            files,
            report,
            passed: true,
        })
    }

    fn trajectory_k(&self) -> f64 {
        let s = &self.cfg.solver;
        self.cfg.trajectories.k.unwrap_or_else(|| match &s.k_values {
            Some(ks) => *ks.last().expect("validated nonempty"),
            None => s.k_stop,
        })
    }

    fn trajectories(&self, out: &Path, seed: u64) -> Result<Outcome> {
        let t = &self.cfg.trajectories;
        let k = self.trajectory_k();
        let fields = self.fields_at(k)?;
        let interp = FieldInterpolator::new(&self.grid, &fields)?;
        let pusher = Pusher::new(
            interp,
            PusherOptions {
                tolerance: t.tolerance,
                ..PusherOptions::default()
            },
        );
        let particles = sample_particles(&self.grid, t.particles, seed, self.cfg.species(), t.v_max, t.margin);
        let runs = particles
            .par_iter()
            .map(|p| pusher.run(p, t.t_end))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let files = output::write_trajectories(out, &runs, t.record_every)?;
        let e = runs.iter().map(|r| r.max_energy_drift()).fold(0.0, f64::max);
        let p = runs.iter().map(|r| r.max_momentum_drift()).fold(0.0, f64::max);
        let refl: usize = runs.iter().map(|r| r.reflections).sum();
        Ok(Outcome {
            files,
            report: vec![format!(
                "K = {k}: {} particles to T = {}, {refl} reflections, max drift e {e:.3e}, p {p:.3e}",
                runs.len(),
                t.t_end
            )],
            passed: true,
        })
    }

    fn moments_check(&self, out: &Path, seed: u64) -> Result<Outcome> {
        let s = &self.cfg.solver;
        let k = s.k.unwrap_or(s.k_stop);
        let (mp, mm) = self.solver.mus_at(k);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let interior: Vec<usize> = rvmlab_core::solver::interior_nodes(&self.grid).collect();
        if interior.is_empty() {
            return Err(anyhow!("grid has no interior nodes"));
        }
        let mut csv = String::from("sample,r,z,phi,a_phi,rho,rho_brute,j_phi,j_phi_brute,j_r_brute,j_z_brute\n");
        let mut report = Vec::new();
        let mut passed = true;
        for sample in 0..5 {
            let mut fields = random_fields(&self.grid, &mut rng);
            fields.a_ext = self.zero_fields().a_ext;
            let node = interior[rng.gen_range(0..interior.len())];
            let mom = compute_moments(&self.grid, &fields, (&mp, &mm), &self.solver.quad)?;
            let (r, z) = self.grid.coords(node);
            let a = fields.total_a(node);
            let b = brute_force_moments(fields.phi[node], a, r, (&mp, &mm), 8, mom.cutoff);
            let rho_err = verify::rel_err(mom.rho[node], b.rho);
            let j_err = verify::rel_err(mom.j_phi[node], b.j_phi);
            let ok = rho_err <= 1e-4 && j_err <= 1e-4 && b.j_r.abs() <= 1e-12 && b.j_z.abs() <= 1e-12;
            passed &= ok;
            let _ = writeln!(
                csv,
                "{sample},{},{},{},{},{},{},{},{},{},{}",
                output::num(r),
                output::num(z),
                output::num(fields.phi[node]),
                output::num(a),
                output::num(mom.rho[node]),
                output::num(b.rho),
                output::num(mom.j_phi[node]),
                output::num(b.j_phi),
                output::num(b.j_r),
                output::num(b.j_z)
            );
            report.push(format!(
                "{} sample {sample}: rel err rho {rho_err:.2e}, j_phi {j_err:.2e}, |j_r| {:.1e}, |j_z| {:.1e}",
                if ok { "PASS" } else { "FAIL" },
                b.j_r.abs(),
                b.j_z.abs()
            ));
            let bounds = integral_bound_check(&self.grid, &fields, 4.0, 1e5)?;
            passed &= bounds.holds();
            report.push(format!(
                "{} sample {sample}: integral bounds, min margins {:.3e} / {:.3e}",
                if bounds.holds() { "PASS" } else { "FAIL" },
                bounds.min_upper_margin,
                bounds.min_lower_margin
            ));
        }
        let path = out.join("moments_check.csv");
        std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
        Ok(Outcome {
            files: vec![path],
            report,
            passed,
        })
    }
}

/// Smooth random fields vanishing on the walls, amplitudes in `[−1, 1]`.
pub fn random_fields(grid: &MeridianGrid, rng: &mut ChaCha8Rng) -> FieldPair {
    let d = grid.domain;
    let mut coef = || -> [f64; 4] { std::array::from_fn(|_| rng.gen_range(-1.0..1.0)) };
    let (cp, ca) = (coef(), coef());
    let shape = |c: [f64; 4], r: f64, z: f64| {
        let x = (r - d.r_min) / (d.r_max - d.r_min);
        let y = (z - d.z_min) / (d.z_max - d.z_min);
        let s = std::f64::consts::PI;
        0.5 * (c[0] * (s * x).sin() * (s * y).sin()
            + c[1] * (2.0 * s * x).sin() * (s * y).sin()
            + c[2] * (s * x).sin() * (2.0 * s * y).sin()
            + c[3] * (2.0 * s * x).sin() * (2.0 * s * y).sin())
    };
    let mut f = FieldPair::zeros(grid);
    f.phi = grid.sample_interior(|r, z| shape(cp, r, z));
    f.a_phi = grid.sample_interior(|r, z| shape(ca, r, z));
    if d.touches_axis() {
        // A vanishes on the axis.
        for k in 0..grid.len() {
            if grid.coords(k).0 == 0.0 {
                f.a_phi[k] = 0.0;
            }
        }
    }
    f
}
