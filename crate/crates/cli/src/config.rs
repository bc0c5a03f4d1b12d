//! Run configuration: one TOML file with `[problem]`, `[solver]`, `[radial]`,
//! `[morse]` and `[experiment]` tables, plus flag overrides.

use std::path::{Path, PathBuf};

use bopp::concentration::RadialConfig;
use bopp::energy::{Family, Nonlinearity, Potential, Problem};
use bopp::fields::{read_field, GridSpec, ScalarField};
use bopp::morse::EigenConfig;
use bopp::optimizer::SolveConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    pub seed: u64,
    pub threads: usize,
    /// Progress lines on stderr.
    pub verbose: bool,
    pub problem: ProblemConfig,
    pub solver: SolveConfig,
    pub radial: RadialSettings,
    pub morse: MorseSettings,
    pub experiment: ExperimentConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            output: PathBuf::from("out"),
            seed: 0,
            threads: 1,
            verbose: false,
            problem: ProblemConfig::default(),
            solver: SolveConfig::default(),
            radial: RadialSettings::default(),
            morse: MorseSettings::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    pub n: usize,
    pub half_len: f64,
    pub eps: f64,
    pub c: f64,
    pub potential: PotentialConfig,
    pub nonlinearity: NonlinearityConfig,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        ProblemConfig {
            n: 32,
            half_len: 10.0,
            eps: 1.0,
            c: 1.0,
            potential: PotentialConfig::default(),
            nonlinearity: NonlinearityConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PotentialKind {
    Constant,
    MultiWell,
    RadialCoercive,
    Field,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PotentialConfig {
    pub kind: PotentialKind,
    pub v0: f64,
    pub kappa: f64,
    pub centers: Vec<[f64; 3]>,
    /// BPF1 samples of `V` for `kind = "field"`.
    pub file: Option<PathBuf>,
}

impl Default for PotentialConfig {
    fn default() -> Self {
        PotentialConfig { kind: PotentialKind::Constant, v0: 2.0, kappa: 0.25, centers: Vec::new(), file: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NonlinearityConfig {
    pub family: Family,
    pub p: f64,
    pub a: f64,
}

impl Default for NonlinearityConfig {
    fn default() -> Self {
        NonlinearityConfig { family: Family::Zero, p: 3.0, a: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadialSettings {
    pub m: usize,
    pub r_max: f64,
}

impl Default for RadialSettings {
    fn default() -> Self {
        let d = RadialConfig::default();
        RadialSettings { m: d.m, r_max: d.r_max }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorseSettings {
    pub enabled: bool,
    pub k: usize,
    pub max_iter: usize,
    /// In the multiplicity experiment, also index the solutions at every
    /// ε rather than only the smallest.
    pub every_eps: bool,
}

impl Default for MorseSettings {
    fn default() -> Self {
        MorseSettings { enabled: true, k: 8, max_iter: EigenConfig::default().max_iter, every_eps: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Gaussian,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartConfig {
    pub kind: StartKind,
    pub width: f64,
    /// Sign of the Gaussian start.
    pub sign: f64,
    pub center: [f64; 3],
    pub file: Option<PathBuf>,
}

impl Default for StartConfig {
    fn default() -> Self {
        StartConfig { kind: StartKind::Gaussian, width: 1.5, sign: -1.0, center: [0.0; 3], file: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Decreasing ε list for the multiplicity experiment.
    pub eps: Vec<f64>,
    /// Increasing level list for the bifurcation sweep.
    pub c: Vec<f64>,
    /// Cutoff radius `T`; defaults to four half-mass radii of the ground state.
    pub cutoff: Option<f64>,
    /// When set, each ε gets a box of the same spacing reaching `margin`
    /// beyond the farthest well `y_i/ε`.
    pub margin: Option<f64>,
    pub start: StartConfig,
    /// Exploratory starts at the smallest ε.
    pub random_starts: usize,
    /// Iteration cap for each exploratory solve.
    pub explore_max_iter: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            eps: vec![1.0, 0.5, 0.25],
            c: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            cutoff: None,
            margin: None,
            start: StartConfig::default(),
            random_starts: 2,
            explore_max_iter: 400,
        }
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let pr = &self.problem;
        self.grid()?;
        if !(pr.eps > 0.0 && pr.eps.is_finite()) {
            return Err(bad(format!("problem.eps = {} must be positive", pr.eps)));
        }
        if !(pr.c > 0.0 && pr.c.is_finite()) {
            return Err(bad(format!("problem.c = {} must be positive", pr.c)));
        }
        let nl = &pr.nonlinearity;
        if nl.family != Family::Zero && !(nl.p > 2.0 && nl.p < 6.0) {
            return Err(bad(format!("nonlinearity.p = {} must lie in (2, 6)", nl.p)));
        }
        self.nonlinearity()?;
        let pot = &pr.potential;
        if pot.kind != PotentialKind::Field && !(pot.v0 > 0.0 && pot.v0.is_finite()) {
            return Err(bad(format!("potential.v0 = {} must be positive", pot.v0)));
        }
        match pot.kind {
            PotentialKind::MultiWell if pot.centers.is_empty() => {
                return Err(bad("multi_well potential needs at least one center"));
            }
            PotentialKind::Field if pot.file.is_none() => {
                return Err(bad("field potential needs potential.file"));
            }
            _ => {}
        }
        if !(pot.kappa >= 0.0) {
            return Err(bad(format!("potential.kappa = {} must be >= 0", pot.kappa)));
        }
        self.solver.validate().map_err(|e| bad(e.to_string()))?;
        if self.radial.m < 10 || !(self.radial.r_max > 0.0) {
            return Err(bad("radial grid needs m >= 10 and r_max > 0"));
        }
        if self.morse.k == 0 || self.morse.max_iter == 0 {
            return Err(bad("morse.k and morse.max_iter must be positive"));
        }
        if self.threads == 0 {
            return Err(bad("threads must be positive"));
        }
        let ex = &self.experiment;
        if ex.eps.is_empty() || ex.eps.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(bad("experiment.eps must be a nonempty list of positive values"));
        }
        if ex.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(bad("experiment.eps must be strictly decreasing"));
        }
        if ex.c.is_empty() || ex.c.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
            return Err(bad("experiment.c must be a nonempty list of positive values"));
        }
        if ex.c.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("experiment.c must be strictly increasing"));
        }
        if let Some(t) = ex.cutoff {
            if !(t > 0.0) {
                return Err(bad("experiment.cutoff must be positive"));
            }
        }
        if let Some(m) = ex.margin {
            if !(m > 0.0) {
                return Err(bad("experiment.margin must be positive"));
            }
        }
        let st = &ex.start;
        match st.kind {
            StartKind::Gaussian if !(st.width > 0.0) || st.sign == 0.0 => {
                return Err(bad("gaussian start needs width > 0 and a nonzero sign"));
            }
            StartKind::File if st.file.is_none() => return Err(bad("file start needs experiment.start.file")),
            _ => {}
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<GridSpec> {
        GridSpec::new(self.problem.n, self.problem.half_len).map_err(|e| bad(e.to_string()))
    }

    pub fn nonlinearity(&self) -> Result<Nonlinearity> {
        let nl = &self.problem.nonlinearity;
        Nonlinearity::new(nl.family, nl.p, nl.a).map_err(|e| bad(e.to_string()))
    }

    pub fn potential(&self) -> Result<Potential> {
        let pot = &self.problem.potential;
        let v = match pot.kind {
            PotentialKind::Constant => Potential::Constant { v0: pot.v0 },
            PotentialKind::MultiWell => {
                Potential::MultiWell { v0: pot.v0, kappa: pot.kappa, centers: pot.centers.clone() }
            }
            PotentialKind::RadialCoercive => Potential::RadialCoercive { v0: pot.v0, kappa: pot.kappa },
            PotentialKind::Field => {
                let path = pot.file.as_ref().ok_or_else(|| bad("field potential needs potential.file"))?;
                Potential::UserField(read_field(path)?)
            }
        };
        v.validate().map_err(|e| bad(e.to_string()))?;
        Ok(v)
    }

    pub fn radial_config(&self) -> RadialConfig {
        RadialConfig { m: self.radial.m, r_max: self.radial.r_max, solve: self.solver }
    }

    pub fn eigen_config(&self) -> EigenConfig {
        EigenConfig { max_iter: self.morse.max_iter, seed: self.seed, ..EigenConfig::default() }
    }

    /// The problem at the configured ε on the configured grid.
    pub fn build_problem(&self) -> Result<Problem> {
        self.build_problem_at(self.grid()?, self.problem.eps, self.problem.c)
    }

    pub fn build_problem_at(&self, grid: GridSpec, eps: f64, c: f64) -> Result<Problem> {
        Ok(Problem::new(grid, self.potential()?, eps, self.nonlinearity()?, c)?)
    }

    /// The configured start sampled on `grid`.
    pub fn start_field(&self, grid: GridSpec) -> Result<ScalarField> {
        let st = &self.experiment.start;
        match st.kind {
            StartKind::Gaussian => {
                let [cx, cy, cz] = st.center;
                let w2 = st.width * st.width;
                Ok(ScalarField::from_fn(grid, |[x, y, z]| {
                    st.sign * (-((x - cx).powi(2) + (y - cy).powi(2) + (z - cz).powi(2)) / w2).exp()
                }))
            }
            StartKind::File => {
                let path = st.file.as_ref().ok_or_else(|| bad("file start needs experiment.start.file"))?;
                let u = read_field(path)?;
                if u.grid() != &grid {
                    return Err(bad(format!("start field {} does not match the problem grid", path.display())));
                }
                Ok(u)
            }
        }
    }
}
