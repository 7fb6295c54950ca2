//! Run configuration: a single JSON document, unknown keys rejected.

use rvmlab_core::distribution::instability_family;
use rvmlab_core::{
    Amplitude, BaseMu, ContinuationSchedule, FamilyKind, FamilySpec, InstabilityParams, MeridianDomain,
    MeridianGrid, Method, MomentQuadrature, MuFunction, SolverOptions, Species,
};
use serde::Deserialize;
use std::path::{Path, PathBuf};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl std::fmt::Display) -> ConfigError {
    ConfigError::Invalid {
        field: field.to_string(),
        reason: reason.to_string(),
    }
}

/// Prefixes the offending parameter of a core validation error with its block.
fn core_err(block: &str, e: rvmlab_core::Error) -> ConfigError {
    match e {
        rvmlab_core::Error::InvalidParameter { name, reason } => invalid(&format!("{block}.{name}"), reason),
        other => invalid(block, other),
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub domain: DomainConfig,
    pub family: FamilyConfig,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub stability: StabilityConfig,
    #[serde(default)]
    pub trajectories: TrajectoryConfig,
    /// Output directory, overridden by `--out`.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub n_r: usize,
    pub n_z: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindName {
    Case1,
    Case2,
    /// `K`-independent densities.
    Fixed,
    /// Case 2 with the drifted ion profile and the large-`K` constants.
    Instability,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Kinetic,
    Confined,
    Maxwellian,
    Even,
    Shifted,
    Drifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeName {
    Zero,
    #[default]
    Quadratic,
    PowerLaw,
}

fn one() -> f64 {
    1.0
}

fn five() -> f64 {
    5.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MuConfig {
    pub profile: ProfileName,
    #[serde(default = "one")]
    pub c: f64,
    #[serde(default = "five")]
    pub delta: f64,
    /// Shift of the `shifted` profile.
    #[serde(default)]
    pub p0: f64,
    #[serde(default)]
    pub amplitude: AmplitudeName,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyConfig {
    pub kind: KindName,
    #[serde(default)]
    pub gamma: f64,
    #[serde(default)]
    pub mu0: Option<MuConfig>,
    #[serde(default)]
    pub ion: Option<MuConfig>,
    #[serde(default)]
    pub electron: Option<MuConfig>,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub eps: Option<f64>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub c_mu: Option<f64>,
    #[serde(default)]
    pub c_nu: Option<f64>,
    #[serde(default)]
    pub c_mu_prime: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureConfig {
    pub n_w: Option<usize>,
    pub n_vphi: Option<usize>,
    pub w_max: Option<f64>,
    pub vphi_max: Option<f64>,
    pub first_w: Option<f64>,
    pub first_vphi: Option<f64>,
    pub tail_tolerance: Option<f64>,
    pub auto_cutoff: Option<bool>,
    pub min_cutoff: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Newton,
    Picard,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default)]
    pub method: MethodName,
    #[serde(default = "SolverConfig::default_tolerance")]
    pub tolerance: f64,
    /// Parameter of a single `solve`; defaults to `k_start`.
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default)]
    pub k_start: f64,
    #[serde(default = "one")]
    pub k_stop: f64,
    #[serde(default = "SolverConfig::default_step")]
    pub k_step: f64,
    /// Explicit parameter list, solved in order instead of adaptive steps.
    #[serde(default)]
    pub k_values: Option<Vec<f64>>,
    #[serde(default = "SolverConfig::default_blow_up")]
    pub blow_up: f64,
    #[serde(default)]
    pub min_step: Option<f64>,
    #[serde(default)]
    pub max_step: Option<f64>,
    /// Starting fields (a `fields_K*.csv` file) for `solve`.
    #[serde(default)]
    pub initial_fields: Option<PathBuf>,
    /// Uniform external `B_z`, entering as `A_ext = B_z r / 2`.
    #[serde(default)]
    pub external_bz: Option<f64>,
}

impl SolverConfig {
    fn default_tolerance() -> f64 {
        1e-8
    }
    fn default_step() -> f64 {
        0.1
    }
    fn default_blow_up() -> f64 {
        1e6
    }
}

impl Default for SolverConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilityConfig {
    #[serde(default = "StabilityConfig::default_modes")]
    pub max_mode: usize,
    #[serde(default)]
    pub c_p: Option<f64>,
    /// Upper end of the threshold search.
    #[serde(default = "StabilityConfig::default_k_max")]
    pub k_max: f64,
}

impl StabilityConfig {
    fn default_modes() -> usize {
        4
    }
    fn default_k_max() -> f64 {
        1e12
    }
}

impl Default for StabilityConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SpeciesName {
    #[default]
    Ion,
    Electron,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryConfig {
    #[serde(default = "TrajectoryConfig::default_particles")]
    pub particles: usize,
    #[serde(default = "TrajectoryConfig::default_t_end")]
    pub t_end: f64,
    #[serde(default = "TrajectoryConfig::default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub species: SpeciesName,
    #[serde(default = "one")]
    pub v_max: f64,
    /// Minimum initial distance from the walls.
    #[serde(default = "TrajectoryConfig::default_margin")]
    pub margin: f64,
    /// Parameter of the equilibrium; defaults to the end of the schedule.
    #[serde(default)]
    pub k: Option<f64>,
    #[serde(default = "TrajectoryConfig::default_tolerance")]
    pub tolerance: f64,
    /// Write every n-th accepted step.
    #[serde(default = "TrajectoryConfig::default_stride")]
    pub record_every: usize,
}

impl TrajectoryConfig {
    fn default_particles() -> usize {
        100
    }
    fn default_t_end() -> f64 {
        200.0
    }
    fn default_seed() -> u64 {
        1
    }
    fn default_margin() -> f64 {
        0.05
    }
    fn default_tolerance() -> f64 {
        1e-11
    }
    fn default_stride() -> usize {
        10
    }
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("defaults deserialize")
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Builds every core object once so that errors surface at parse time.
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.grid()?;
        self.family()?;
        self.quadrature()?;
        self.solver_options()?;
        self.schedule()?;
        let s = &self.solver;
        if let Some(ks) = &s.k_values {
            if ks.is_empty() || ks.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
                return Err(invalid("solver.k_values", "need a nonempty list of finite K >= 0"));
            }
        }
        if let Some(k) = s.k {
            if !(k >= 0.0 && k.is_finite()) {
                return Err(invalid("solver.k", format!("must be finite and >= 0, got {k}")));
            }
        }
        if let Some(b) = s.external_bz {
            if !b.is_finite() {
                return Err(invalid("solver.external_bz", "must be finite"));
            }
        }
        if self.stability.max_mode == 0 {
            return Err(invalid("stability.max_mode", "must be at least 1"));
        }
        if let Some(c) = self.stability.c_p {
            if !(c > 0.0) {
                return Err(invalid("stability.c_p", "must be positive"));
            }
        }
        if !(self.stability.k_max > 1.0) {
            return Err(invalid("stability.k_max", "must exceed 1"));
        }
        let t = &self.trajectories;
        if t.particles == 0 {
            return Err(invalid("trajectories.particles", "must be at least 1"));
        }
        if !(t.t_end > 0.0 && t.t_end.is_finite()) {
            return Err(invalid("trajectories.t_end", "must be positive"));
        }
        if !(t.v_max > 0.0) {
            return Err(invalid("trajectories.v_max", "must be positive"));
        }
        if !(t.tolerance > 0.0) {
            return Err(invalid("trajectories.tolerance", "must be positive"));
        }
        if t.record_every == 0 {
            return Err(invalid("trajectories.record_every", "must be at least 1"));
        }
        let d = &self.domain;
        let room = 0.5 * (d.r_max - d.r_min).min(d.z_max - d.z_min);
        if !(t.margin >= 0.0 && t.margin < room) {
            return Err(invalid("trajectories.margin", format!("must lie in [0, {room})")));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<MeridianGrid, ConfigError> {
        let d = &self.domain;
        let dom = MeridianDomain::new(d.r_min, d.r_max, d.z_min, d.z_max).map_err(|e| core_err("domain", e))?;
        MeridianGrid::new(dom, d.n_r, d.n_z).map_err(|e| core_err("domain", e))
    }

    fn mu(block: &str, c: &MuConfig) -> Result<MuFunction, ConfigError> {
        let base = match c.profile {
            ProfileName::Kinetic => BaseMu::Kinetic { c: c.c },
            ProfileName::Confined => BaseMu::Confined { c: c.c },
            ProfileName::Maxwellian => BaseMu::Maxwellian { c: c.c },
            ProfileName::Even => BaseMu::Shifted { c: c.c, p0: 0.0 },
            ProfileName::Shifted => BaseMu::Shifted { c: c.c, p0: c.p0 },
            ProfileName::Drifted => {
                return Err(invalid(&format!("{block}.profile"), "`drifted` is only available through kind `instability`"))
            }
        };
        if !(c.c >= 0.0 && c.c.is_finite()) {
            return Err(invalid(&format!("{block}.c"), "must be finite and >= 0"));
        }
        MuFunction::builtin(base, c.delta).map_err(|e| core_err(block, e))
    }

    fn amplitude(&self, block: &str, a: AmplitudeName) -> Result<Amplitude, ConfigError> {
        Ok(match a {
            AmplitudeName::Zero => Amplitude::Zero,
            AmplitudeName::Quadratic => Amplitude::Quadratic,
            AmplitudeName::PowerLaw => Amplitude::PowerLaw {
                m: self
                    .family
                    .m
                    .ok_or_else(|| invalid("family.m", format!("required by `{block}.amplitude = power_law`")))?,
            },
        })
    }

    fn require(v: Option<f64>, field: &str) -> Result<f64, ConfigError> {
        v.ok_or_else(|| invalid(field, "required by kind `instability`"))
    }

    pub fn family(&self) -> Result<FamilySpec, ConfigError> {
        let f = &self.family;
        let spec = match f.kind {
            KindName::Instability => {
                let m = Self::require(f.m, "family.m")?;
                let eps = Self::require(f.eps, "family.eps")?;
                let delta = Self::require(f.delta, "family.delta")?;
                let c_nu = Self::require(f.c_nu, "family.c_nu")?;
                let c_mu = Self::require(f.c_mu, "family.c_mu")?;
                let c_mu_prime = f.c_mu_prime.unwrap_or((1.0 - eps) / 2f64.sqrt());
                if f.ion.is_some() || f.electron.is_some() || f.mu0.is_some() {
                    return Err(invalid("family.ion", "kind `instability` fixes the densities"));
                }
                let params = InstabilityParams {
                    m,
                    eps,
                    c_mu_prime,
                    c_nu,
                    c_mu,
                    delta,
                };
                params.validate().map_err(|e| core_err("family", e))?;
                let mu = instability_family(m, eps, c_nu, delta).map_err(|e| core_err("family", e))?;
                let mut spec = FamilySpec::single_ion(FamilyKind::Case2, mu, Amplitude::PowerLaw { m });
                spec.instability = Some(params);
                spec
            }
            kind => {
                let core_kind = match kind {
                    KindName::Case1 => FamilyKind::Case1,
                    KindName::Case2 => FamilyKind::Case2,
                    _ => FamilyKind::Custom,
                };
                if f.ion.is_none() && f.electron.is_none() && f.gamma == 0.0 {
                    return Err(invalid("family.ion", "need at least one of `ion`, `electron` or a background"));
                }
                let side = |name: &str, c: &Option<MuConfig>| -> Result<(MuFunction, Amplitude), ConfigError> {
                    match c {
                        None => Ok((MuFunction::zero(), Amplitude::Zero)),
                        Some(c) => Ok((Self::mu(&format!("family.{name}"), c)?, self.amplitude(&format!("family.{name}"), c.amplitude)?)),
                    }
                };
                let (mu_plus, a_plus) = side("ion", &f.ion)?;
                let (mu_minus, a_minus) = side("electron", &f.electron)?;
                let mu0 = match &f.mu0 {
                    Some(c) => Self::mu("family.mu0", c)?,
                    None if f.gamma != 0.0 => return Err(invalid("family.mu0", "required when gamma > 0")),
                    None => MuFunction::zero(),
                };
                if kind == KindName::Fixed {
                    FamilySpec::fixed(mu_plus, mu_minus)
                } else {
                    FamilySpec {
                        kind: core_kind,
                        gamma: f.gamma,
                        mu0,
                        mu_plus,
                        mu_minus,
                        a_plus,
                        a_minus,
                        instability: None,
                    }
                }
            }
        };
        spec.validate().map_err(|e| core_err("family", e))?;
        Ok(spec)
    }

    pub fn quadrature(&self) -> Result<MomentQuadrature, ConfigError> {
        let q = &self.quadrature;
        let d = MomentQuadrature::default();
        let out = MomentQuadrature {
            w_max: q.w_max.unwrap_or(d.w_max),
            vphi_max: q.vphi_max.unwrap_or(d.vphi_max),
            n_w: q.n_w.unwrap_or(d.n_w),
            n_vphi: q.n_vphi.unwrap_or(d.n_vphi),
            first_w: q.first_w.unwrap_or(d.first_w),
            first_vphi: q.first_vphi.unwrap_or(d.first_vphi),
            tail_tolerance: q.tail_tolerance.unwrap_or(d.tail_tolerance),
            auto_cutoff: q.auto_cutoff.unwrap_or(d.auto_cutoff),
            min_cutoff: q.min_cutoff.unwrap_or(d.min_cutoff),
        };
        out.validate().map_err(|e| core_err("quadrature", e))?;
        Ok(out)
    }

    pub fn solver_options(&self) -> Result<SolverOptions, ConfigError> {
        let s = &self.solver;
        if !(s.tolerance > 0.0) {
            return Err(invalid("solver.tolerance", "must be positive"));
        }
        Ok(SolverOptions {
            method: match s.method {
                MethodName::Newton => Method::Newton,
                MethodName::Picard => Method::Picard,
            },
            tolerance: s.tolerance,
            ..SolverOptions::default()
        })
    }

    pub fn schedule(&self) -> Result<ContinuationSchedule, ConfigError> {
        let s = &self.solver;
        let mut sch = ContinuationSchedule::new(s.k_start, s.k_stop, s.k_step);
        if let Some(v) = s.min_step {
            sch.min_step = v;
        }
        if let Some(v) = s.max_step {
            sch.max_step = v;
        }
        sch.blow_up = s.blow_up;
        sch.validate().map_err(|e| match core_err("solver", e) {
            // The schedule names its fields after the core type.
            ConfigError::Invalid { field, reason } => {
                let field = match field.as_str() {
                    "solver.start" => "solver.k_start".to_string(),
                    "solver.stop" => "solver.k_stop".to_string(),
                    "solver.initial_step" => "solver.k_step".to_string(),
                    _ => field,
                };
                ConfigError::Invalid { field, reason }
            }
            other => other,
        })?;
        Ok(sch)
    }

    pub fn species(&self) -> Species {
        match self.trajectories.species {
            SpeciesName::Ion => Species::Ion,
            SpeciesName::Electron => Species::Electron,
        }
    }

    /// Output directory: `--out`, then the config, then `./out`.
    pub fn out_dir(&self, cli: Option<&Path>) -> PathBuf {
        cli.map(Path::to_path_buf)
            .or_else(|| self.output.clone())
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}
