//! TOML run configuration.

use std::path::{Path, PathBuf};

use num_complex::Complex;
use serde::Deserialize;

use crate::deform::{Settings, Tolerances};
use crate::error::{Error, Result};
use crate::groups::{sample_evaluable, sample_pairs, GroupContext, GroupElement, MAX_WORD_LENGTH};
use crate::mmv::MAX_DEPTH;
use crate::modforms::CuspForm;
use crate::defalg::MAX_RHO;
use crate::scalar::Real;

/// The configuration shipped with the binary.
pub const DEFAULT_CONFIG: &str = include_str!("../configs/default.toml");

/// Truncations below this are accepted with a warning.
pub const RECOMMENDED_MIN_NQ: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
pub enum Precision {
    #[serde(rename = "f32")]
    F32,
    #[serde(rename = "f64")]
    F64,
    #[serde(rename = "double-double")]
    DoubleDouble,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub level: i64,
    #[serde(default)]
    pub label: Option<String>,
    pub seeds: Vec<[i64; 4]>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormConfig {
    /// `[[m, e], …]` for `Π η(mτ)^e`.
    #[serde(default)]
    pub eta: Option<Vec<(i64, i64)>>,
    #[serde(default)]
    pub coefficient_file: Option<PathBuf>,
    #[serde(default)]
    pub level: Option<i64>,
    #[serde(default)]
    pub label: Option<String>,
}

fn default_nq() -> usize {
    128
}
fn default_two() -> usize {
    2
}
fn default_precision() -> Precision {
    Precision::F64
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(default = "default_nq")]
    pub nq_max: usize,
    #[serde(default = "default_two")]
    pub rho_max: usize,
    #[serde(default = "default_two")]
    pub depth_max: usize,
    #[serde(default = "default_precision")]
    pub precision: Precision,
}

impl Default for NumericsConfig {
    fn default() -> Self {
        NumericsConfig { nq_max: default_nq(), rho_max: 2, depth_max: 2, precision: Precision::F64 }
    }
}

fn default_tau() -> Vec<[f64; 2]> {
    vec![[0.1, 0.9], [-0.2, 1.1], [0.05, 0.75]]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_tau")]
    pub tau: Vec<[f64; 2]>,
    #[serde(default = "SamplingConfig::default_pairs")]
    pub pairs: usize,
    #[serde(default = "SamplingConfig::default_gammas")]
    pub gammas: usize,
    #[serde(default = "SamplingConfig::default_word_length")]
    pub max_word_length: usize,
    #[serde(default = "SamplingConfig::default_max_c")]
    pub max_c: i64,
    #[serde(default = "SamplingConfig::default_min_imag")]
    pub min_imag: f64,
    #[serde(default = "SamplingConfig::default_fit_points")]
    pub fit_points: usize,
    #[serde(default = "SamplingConfig::default_seed")]
    pub seed: u64,
}

impl SamplingConfig {
    fn default_pairs() -> usize {
        20
    }
    fn default_gammas() -> usize {
        10
    }
    fn default_word_length() -> usize {
        6
    }
    fn default_max_c() -> i64 {
        10
    }
    fn default_min_imag() -> f64 {
        0.05
    }
    fn default_fit_points() -> usize {
        8
    }
    fn default_seed() -> u64 {
        1
    }
}

impl Default for SamplingConfig {
    fn default() -> Self {
        toml::from_str("").expect("all sampling fields have defaults")
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeformConfig {
    /// Coefficient file of an extra cusp form to push through the family.
    #[serde(default)]
    pub input_file: Option<PathBuf>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupConfig,
    pub form: Option<FormConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub tolerances: std::collections::BTreeMap<String, f64>,
    #[serde(default)]
    pub deform: DeformConfig,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Directory that relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn cfg_err(field: &str, message: impl Into<String>) -> Error {
    Error::Config { field: field.into(), message: message.into() }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string().trim().replace('\n', " ")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::parse(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("bundled configuration is valid")
    }

    fn validate(&self) -> Result<()> {
        let form = self.form.as_ref().ok_or_else(|| Error::Parse("missing form source: set form.eta or form.coefficient_file".into()))?;
        match (&form.eta, &form.coefficient_file) {
            (None, None) => return Err(Error::Parse("missing form source: set form.eta or form.coefficient_file".into())),
            (Some(_), Some(_)) => return Err(cfg_err("form", "give either eta or coefficient_file, not both")),
            _ => {}
        }
        let n = &self.numerics;
        if n.nq_max == 0 {
            return Err(cfg_err("numerics.nq_max", "must be positive"));
        }
        if n.depth_max == 0 || n.depth_max > MAX_DEPTH {
            return Err(cfg_err("numerics.depth_max", format!("must lie in 1..={MAX_DEPTH}")));
        }
        if n.rho_max == 0 || n.rho_max > MAX_RHO {
            return Err(cfg_err("numerics.rho_max", format!("must lie in 1..={MAX_RHO}")));
        }
        let s = &self.sampling;
        if s.tau.len() < 3 {
            return Err(cfg_err("sampling.tau", "at least 3 points are needed"));
        }
        if let Some(t) = s.tau.iter().find(|t| t[1] < s.min_imag) {
            return Err(cfg_err("sampling.tau", format!("point {}+{}i lies below min_imag {}", t[0], t[1], s.min_imag)));
        }
        if s.gammas < 3 {
            return Err(cfg_err("sampling.gammas", "at least 3 elements are needed"));
        }
        if s.pairs == 0 {
            return Err(cfg_err("sampling.pairs", "must be positive"));
        }
        if s.max_word_length == 0 || s.max_word_length > MAX_WORD_LENGTH {
            return Err(cfg_err("sampling.max_word_length", format!("must lie in 1..={MAX_WORD_LENGTH}")));
        }
        if !(s.min_imag > 0.0) {
            return Err(cfg_err("sampling.min_imag", "must be positive"));
        }
        if s.max_c < 1 || (s.max_c as f64) * s.min_imag > 1.0 {
            return Err(cfg_err("sampling.max_c", format!("must satisfy 1 <= max_c <= 1/min_imag = {}", 1.0 / s.min_imag)));
        }
        if s.fit_points < 6 {
            return Err(cfg_err("sampling.fit_points", "at least 6 points are needed"));
        }
        self.tolerances()?;
        Ok(())
    }

    /// Warnings that do not stop a run.
    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.numerics.nq_max < RECOMMENDED_MIN_NQ {
            w.push(format!(
                "numerics.nq_max = {} is below {RECOMMENDED_MIN_NQ}; truncation errors will dominate the residuals",
                self.numerics.nq_max
            ));
        }
        w
    }

    pub fn tolerances(&self) -> Result<Tolerances> {
        let mut t = Tolerances::default();
        for (name, v) in &self.tolerances {
            t.set(name, *v)?;
        }
        Ok(t)
    }

    pub fn group(&self) -> Result<GroupContext> {
        let seeds = self
            .group
            .seeds
            .iter()
            .map(|[a, b, c, d]| GroupElement::new(*a, *b, *c, *d))
            .collect::<Result<Vec<_>>>()
            .map_err(|e| cfg_err("group.seeds", e.to_string()))?;
        if seeds.is_empty() {
            return Err(cfg_err("group.seeds", "at least one seed is needed"));
        }
        let label = self.group.label.clone().unwrap_or_else(|| format!("Gamma0({})", self.group.level));
        GroupContext::new(self.group.level, seeds, label).map_err(|e| cfg_err("group.seeds", e.to_string()))
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn form<R: Real>(&self) -> Result<CuspForm<R>> {
        let f = self.form.as_ref().expect("validated");
        let level = f.level.unwrap_or(self.group.level);
        let label = f.label.clone().unwrap_or_else(|| "h".into());
        let nq = self.numerics.nq_max;
        let form = if let Some(eta) = &f.eta {
            CuspForm::from_eta(eta, level, nq, label).map_err(|e| cfg_err("form.eta", e.to_string()))?
        } else {
            let path = self.resolve(f.coefficient_file.as_ref().expect("validated"));
            CuspForm::load_coefficient_file(&path).map_err(|e| cfg_err("form.coefficient_file", e.to_string()))?.with_nq(nq)
        };
        if form.level() != self.group.level {
            return Err(cfg_err("form.level", format!("form level {} differs from group level {}", form.level(), self.group.level)));
        }
        Ok(form)
    }

    pub fn extra_input<R: Real>(&self) -> Result<Option<CuspForm<R>>> {
        match &self.deform.input_file {
            None => Ok(None),
            Some(p) => Ok(Some(
                CuspForm::load_coefficient_file(&self.resolve(p)).map_err(|e| cfg_err("deform.input_file", e.to_string()))?.with_nq(self.numerics.nq_max),
            )),
        }
    }

    pub fn tau_samples(&self) -> Vec<Complex<f64>> {
        self.sampling.tau.iter().map(|t| Complex::new(t[0], t[1])).collect()
    }

    /// Sampled elements and pairs under the configured seed.
    pub fn settings(&self) -> Result<Settings> {
        let ctx = self.group()?;
        let s = &self.sampling;
        let gammas = sample_evaluable(&ctx, s.gammas, s.max_word_length, s.max_c, s.seed)?;
        let pairs = sample_pairs(&ctx, s.pairs, s.max_word_length, s.max_c, s.seed)?;
        Ok(Settings {
            gammas,
            pairs,
            tau_samples: self.tau_samples(),
            fit_points: s.fit_points,
            min_imag: s.min_imag,
            seed: s.seed,
            tolerances: self.tolerances()?,
        })
    }
}
