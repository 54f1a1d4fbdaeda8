//! Experiment configuration (TOML). See the README for the schema.

use serde::{Deserialize, Serialize};

use dimerlab::asymptotics::ZLaw;
use dimerlab::correlations::{QuadSpec, XRule};
use dimerlab::disorder::DisorderLaw;
use dimerlab::spectrum::{theta_grid, Budget, CurveModel};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("{0}")]
    Parse(String),
    #[error("{experiment}: {message}")]
    Schema { experiment: String, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    LyapCurve,
    FreeEnergy,
    PhaseDiagram,
    Correlations,
    ExactTorus,
    PtFit,
    GasFit,
    DhBench,
    EssentialSingularity,
    DeltaProbe,
    Validate,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::LyapCurve => "lyap-curve",
            Experiment::FreeEnergy => "free-energy",
            Experiment::PhaseDiagram => "phase-diagram",
            Experiment::Correlations => "correlations",
            Experiment::ExactTorus => "exact-torus",
            Experiment::PtFit => "pt-fit",
            Experiment::GasFit => "gas-fit",
            Experiment::DhBench => "dh-bench",
            Experiment::EssentialSingularity => "essential-singularity",
            Experiment::DeltaProbe => "delta-probe",
            Experiment::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LawConfig {
    /// `log w2 = ±sigma`.
    TwoPoint {
        sigma: f64,
        #[serde(default = "one")]
        w1: f64,
    },
    /// `log w2` uniform on `[−s, s]`.
    LogUniform {
        s: f64,
        #[serde(default = "one")]
        w1: f64,
    },
    /// Constant weights `w2 = 1`.
    Pure {
        #[serde(default = "one")]
        w1: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ZLawConfig {
    /// `log Z` uniform on `[lo, hi]`.
    LogUniform { lo: f64, hi: f64 },
    /// `log Z` uniform on `[lo, hi]` with `hi` tuned to `E Z^alpha = 1`.
    AlphaTuned { lo: f64, alpha: f64 },
    TwoPoint { a: f64, b: f64, p: f64 },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub theta: Option<Vec<f64>>,
    pub theta_min: Option<f64>,
    pub theta_per_decade: Option<usize>,
    pub theta_uniform: Option<usize>,
    pub h1: Option<Vec<f64>>,
    pub h2: Option<Vec<f64>>,
    pub gamma: Option<f64>,
    /// `γ` as a multiple of `γ_c` (gas-fit).
    pub gamma_over_gamma_c: Option<f64>,
    /// `γ` chosen so that `α(γ)` takes this value (gas-fit).
    pub alpha: Option<f64>,
    pub y: Option<Vec<i64>>,
    /// Abscissa rule for correlations: an integer `x0` (the admissible
    /// `x ∈ {x0, x0+1}`), or absent for `x = 0` with even `y` skipped.
    pub x: Option<i64>,
    pub eps: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_blocks")]
    pub blocks: usize,
    #[serde(default = "default_boost")]
    pub boost_cap: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_vec_tol")]
    pub vec_tol: f64,
    #[serde(default = "default_layers")]
    pub max_layers: usize,
}

fn default_steps() -> usize {
    1_000_000
}
fn default_blocks() -> usize {
    30
}
fn default_boost() -> f64 {
    4.0
}
fn default_rel_tol() -> f64 {
    1e-8
}
fn default_vec_tol() -> f64 {
    1e-10
}
fn default_layers() -> usize {
    10_000
}

impl Default for BudgetConfig {
    fn default() -> Self {
        Self {
            steps: default_steps(),
            blocks: default_blocks(),
            boost_cap: default_boost(),
            rel_tol: default_rel_tol(),
            vec_tol: default_vec_tol(),
            max_layers: default_layers(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TorusConfig {
    pub l: usize,
    pub n: usize,
    #[serde(default)]
    pub h1: f64,
    #[serde(default)]
    pub h2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub window: [f64; 2],
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub experiment: Option<Experiment>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub experimental: bool,
    pub law: Option<LawConfig>,
    pub z_law: Option<ZLawConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    pub torus: Option<TorusConfig>,
    pub fit: Option<FitConfig>,
}

fn default_seed() -> u64 {
    1
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks that everything `experiment` needs is present and sane.
    pub fn validate(&self, experiment: Experiment) -> Result<(), ConfigError> {
        let err = |m: String| Err(ConfigError::Schema { experiment: experiment.name().into(), message: m });
        if let Some(e) = self.experiment {
            if e != experiment {
                return err(format!("config is for `{}`", e.name()));
            }
        }
        let b = &self.budget;
        if b.steps == 0 || b.blocks < 2 || b.steps < 10 * b.blocks || !(b.boost_cap >= 1.0) || !(b.rel_tol > 0.0) || !(b.vec_tol > 0.0) || b.max_layers == 0 {
            return err("budget must be positive (steps >= 10 * blocks, blocks >= 2, boost_cap >= 1)".into());
        }
        let g = &self.grid;
        let need_law = !matches!(experiment, Experiment::DhBench | Experiment::Validate);
        if need_law && self.law.is_none() {
            return err("missing [law]".into());
        }
        let need = |v: bool, what: &str| if v { Ok(()) } else { err(format!("missing {what}")) };
        match experiment {
            Experiment::FreeEnergy | Experiment::PhaseDiagram | Experiment::EssentialSingularity => need(g.h1.as_ref().is_some_and(|v| !v.is_empty()), "grid.h1")?,
            Experiment::Correlations => {
                need(g.y.as_ref().is_some_and(|v| !v.is_empty()), "grid.y")?;
                need(g.h1.as_ref().is_some_and(|v| v.len() == 1), "grid.h1 (one value)")?;
            }
            Experiment::ExactTorus => need(self.torus.is_some(), "[torus]")?,
            Experiment::PtFit | Experiment::GasFit => need(self.fit.is_some(), "[fit]")?,
            Experiment::DhBench => {
                need(self.z_law.is_some(), "[z_law]")?;
                need(g.eps.as_ref().is_some_and(|v| !v.is_empty()), "grid.eps")?;
            }
            Experiment::DeltaProbe => {
                need(g.h2.as_ref().is_some_and(|v| !v.is_empty()), "grid.h2")?;
                if !self.experimental {
                    return err("delta-probe probes a conjecture; set `experimental = true`".into());
                }
            }
            _ => {}
        }
        if experiment == Experiment::GasFit {
            let n = [g.gamma.is_some(), g.gamma_over_gamma_c.is_some(), g.alpha.is_some()].iter().filter(|x| **x).count();
            if n != 1 {
                return err("give exactly one of grid.gamma, grid.gamma_over_gamma_c, grid.alpha".into());
            }
            if matches!(self.law, Some(LawConfig::Pure { .. })) {
                return err("gas-fit needs a disordered law".into());
            }
        }
        if experiment == Experiment::DeltaProbe && matches!(self.law, Some(LawConfig::Pure { .. })) {
            return err("delta-probe needs a disordered law".into());
        }
        if let Some(f) = &self.fit {
            if !(f.window[0] > 0.0 && f.window[1] > f.window[0]) || f.points < 2 {
                return err("fit.window must be 0 < lo < hi with at least 2 points".into());
            }
        }
        if let Some(gm) = g.gamma {
            if !(gm >= 1.0) {
                return err("grid.gamma must be >= 1".into());
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<CurveModel, dimerlab::Error> {
        Ok(match self.law.as_ref().expect("validated") {
            LawConfig::Pure { w1 } => CurveModel::Pure { w1: *w1 },
            _ => CurveModel::Disordered(self.disorder_law()?),
        })
    }

    /// The disordered law; errors for the pure model.
    pub fn disorder_law(&self) -> Result<DisorderLaw, dimerlab::Error> {
        use dimerlab::disorder::W1Law;
        match self.law.as_ref().expect("validated") {
            LawConfig::TwoPoint { sigma, w1 } => DisorderLaw::two_point_symmetric(*sigma)?.with_w1(W1Law::Constant(*w1)),
            LawConfig::LogUniform { s, w1 } => DisorderLaw::log_uniform_symmetric(*s)?.with_w1(W1Law::Constant(*w1)),
            LawConfig::Pure { .. } => Err(dimerlab::Error::InvalidLaw("w2 is deterministic".into())),
        }
    }

    pub fn z_law(&self) -> Result<ZLaw, dimerlab::Error> {
        Ok(match self.z_law.as_ref().expect("validated") {
            ZLawConfig::LogUniform { lo, hi } => ZLaw::LogUniform { lo: *lo, hi: *hi },
            ZLawConfig::AlphaTuned { lo, alpha } => ZLaw::log_uniform_with_alpha(*lo, *alpha)?,
            ZLawConfig::TwoPoint { a, b, p } => ZLaw::TwoPoint { a: *a, b: *b, p: *p },
        })
    }

    pub fn theta_grid(&self) -> Vec<f64> {
        let g = &self.grid;
        match &g.theta {
            Some(t) => t.clone(),
            None => theta_grid(g.theta_min.unwrap_or(1e-8), g.theta_per_decade.unwrap_or(3), g.theta_uniform.unwrap_or(24)),
        }
    }

    pub fn curve_budget(&self) -> Budget {
        Budget { steps: self.budget.steps, blocks: self.budget.blocks, seed: self.seed, boost_cap: self.budget.boost_cap }
    }

    pub fn quad_spec(&self) -> QuadSpec {
        QuadSpec { rel_tol: self.budget.rel_tol, vec_tol: self.budget.vec_tol, max_layers: self.budget.max_layers, ..QuadSpec::default() }
    }

    pub fn x_rule(&self) -> XRule {
        self.grid.x.map_or(XRule::Zero, XRule::Fixed)
    }

    pub fn h2_list(&self) -> Vec<f64> {
        self.grid.h2.clone().unwrap_or_else(|| vec![0.0])
    }

    pub fn gamma(&self) -> f64 {
        self.grid.gamma.unwrap_or(1.0)
    }
}
