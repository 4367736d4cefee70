//! The TOML run config. See `CONFIG.md` in this crate for the schema.

use std::path::{Path, PathBuf};

use dr_core::analysis::MAX_ENUM_L;
use dr_core::{
    stable_critical_init, truncate_initial, two_point_critical, ConvStrategy, EvolveConfig,
    ModelParams, TiltedLaw, TruncationMode,
};
use serde::{Deserialize, Serialize};

use crate::fail::{Failure, Outcome};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: Model,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Initial>,
    #[serde(default)]
    pub evolve: EvolveSection,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifySection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc: Option<McSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lemma27: Option<Lemma27Section>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Model {
    pub m: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Initial {
    Point {
        k: usize,
    },
    TwoPoint {
        a: usize,
    },
    Raw {
        path: PathBuf,
    },
    Stable {
        alpha: f64,
        k_cap: usize,
    },
    Truncated {
        base: Box<Initial>,
        big_m: usize,
        mode: ModeName,
        /// Required for `mode = "stable"` unless the base is a stable law.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    Stable,
    FiniteVariance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvolveSection {
    pub n_max: usize,
    pub tail_epsilon: f64,
    pub support_cap: usize,
    pub k_derivatives: usize,
    pub conv_strategy: ConvStrategy,
}

impl Default for EvolveSection {
    fn default() -> Self {
        let d = EvolveConfig::default();
        Self {
            n_max: 64,
            tail_epsilon: d.tail_epsilon,
            support_cap: d.support_cap,
            k_derivatives: d.k_derivatives,
            conv_strategy: d.conv_strategy,
        }
    }
}

impl EvolveSection {
    pub fn to_config(&self) -> EvolveConfig {
        EvolveConfig {
            n_max: self.n_max,
            tail_epsilon: self.tail_epsilon,
            support_cap: self.support_cap,
            conv_strategy: self.conv_strategy,
            k_derivatives: self.k_derivatives,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub dir: PathBuf,
    pub plotdata: bool,
}

impl Default for Outputs {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            plotdata: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// `M` in `n v M` for the derivative check.
    pub big_m: usize,
    /// Largest allowed ratio between the biggest and smallest
    /// `r_k^(1/k)`, `k >= 3`; unchecked when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_spread_max: Option<f64>,
    /// Generations at which the lower-tilt bound is compared with `Pi_n`;
    /// empty means dyadic `n` up to `evolve.n_max`.
    pub lemma51_n: Vec<usize>,
    pub dominability_m: Vec<usize>,
    pub dominability_k_max: usize,
    /// Generations per dominability run; 0 uses `evolve.n_max`.
    pub dominability_n_max: usize,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            big_m: 1,
            root_spread_max: None,
            lemma51_n: Vec::new(),
            dominability_m: vec![16, 32, 64, 128, 256],
            dominability_k_max: 8,
            dominability_n_max: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub alphas: Vec<f64>,
    pub k_cap: usize,
    pub n_max: usize,
    pub n_lo: usize,
    pub n_hi: usize,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            alphas: vec![2.5, 3.0, 3.5],
            k_cap: 100_000,
            n_max: 512,
            n_lo: 64,
            n_hi: 512,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSection {
    pub n: u32,
    pub samples: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    /// Also evolve the law exactly and compare.
    #[serde(default = "yes")]
    pub compare: bool,
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Lemma27Section {
    /// Defaults to `model.m`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<u32>,
    pub l_max: u32,
    /// Defaults to `3m, 6m, 12m`.
    pub y: Vec<f64>,
}

impl Default for Lemma27Section {
    fn default() -> Self {
        Self {
            m: None,
            l_max: 14.min(MAX_ENUM_L),
            y: Vec::new(),
        }
    }
}

impl RunConfig {
    /// Reads `path` and resolves relative file references against its
    /// directory.
    pub fn load(path: &Path) -> Outcome<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Failure::Usage(format!("bad config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(init) = &mut cfg.initial {
            init.resolve_paths(base)?;
        }
        Ok(cfg)
    }

    pub fn initial(&self) -> Outcome<&Initial> {
        self.initial
            .as_ref()
            .ok_or_else(|| Failure::Usage("config has no [initial] section".into()))
    }

    pub fn params(&self) -> Outcome<ModelParams> {
        Ok(ModelParams::new(self.model.m)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }
}

impl Initial {
    fn resolve_paths(&mut self, base: &Path) -> Outcome<()> {
        match self {
            Initial::Raw { path } => {
                let full = base.join(&*path);
                *path = full.canonicalize().map_err(|e| {
                    Failure::Usage(format!("initial law file {}: {e}", full.display()))
                })?;
            }
            Initial::Truncated { base: inner, .. } => inner.resolve_paths(base)?,
            _ => {}
        }
        Ok(())
    }

    /// Stable exponent of the law, if it is a stable law or a truncation of
    /// one.
    pub fn alpha(&self) -> Option<f64> {
        match self {
            Initial::Stable { alpha, .. } => Some(*alpha),
            Initial::Truncated { base, alpha, .. } => alpha.or_else(|| base.alpha()),
            _ => None,
        }
    }

    /// The untruncated law underneath.
    pub fn base(&self) -> &Initial {
        match self {
            Initial::Truncated { base, .. } => base.base(),
            other => other,
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Initial::Point { k } => format!("point(k={k})"),
            Initial::TwoPoint { a } => format!("two_point(a={a})"),
            Initial::Raw { path } => format!("raw({})", path.display()),
            Initial::Stable { alpha, k_cap } => format!("stable(alpha={alpha},K={k_cap})"),
            Initial::Truncated {
                base, big_m, mode, ..
            } => format!("truncated({},M={big_m},{mode:?})", base.describe()),
        }
    }

    pub fn build(&self, params: ModelParams) -> Outcome<TiltedLaw> {
        Ok(match self {
            Initial::Point { k } => TiltedLaw::point_mass(*k, params),
            Initial::TwoPoint { a } => two_point_critical(*a, params)?,
            Initial::Raw { path } => TiltedLaw::from_raw(&read_probs(path)?, params)?,
            Initial::Stable { alpha, k_cap } => stable_critical_init(params.m(), *alpha, *k_cap)?.0,
            Initial::Truncated {
                base, big_m, mode, ..
            } => {
                let mode = match mode {
                    ModeName::FiniteVariance => TruncationMode::FiniteVariance,
                    ModeName::Stable => TruncationMode::Stable {
                        alpha: self.alpha().ok_or_else(|| {
                            Failure::Usage(
                                "truncated stable mode needs `alpha` or a stable base".into(),
                            )
                        })?,
                    },
                };
                truncate_initial(&base.build(params)?, *big_m, mode)?.law
            }
        })
    }
}

/// Probabilities separated by commas, whitespace or newlines; `#` starts a
/// comment.
fn read_probs(path: &Path) -> Outcome<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
    text.lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split(|c: char| c == ',' || c.is_whitespace()))
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| Failure::Usage(format!("{}: bad probability {t:?}: {e}", path.display())))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> RunConfig {
        toml::from_str(s).unwrap()
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = parse("[model]\nm = 2\n[initial]\nkind = \"two_point\"\na = 2\n");
        assert_eq!(c.initial, Some(Initial::TwoPoint { a: 2 }));
        assert_eq!(c.evolve, EvolveSection::default());
        assert_eq!(c.outputs.dir, PathBuf::from("out"));
        assert!(c.mc.is_none());
    }

    #[test]
    fn nested_truncation() {
        let c = parse(
            "[model]\nm = 2\n[initial]\nkind = \"truncated\"\nbig_m = 32\nmode = \"stable\"\n\
             [initial.base]\nkind = \"stable\"\nalpha = 3.0\nk_cap = 500\n",
        );
        let init = c.initial().unwrap();
        assert_eq!(init.alpha(), Some(3.0));
        let law = init.build(c.params().unwrap()).unwrap();
        assert_eq!(law.support_max(), 32);
    }

    #[test]
    fn toml_round_trip() {
        let c = parse(
            "[model]\nm = 3\n[initial]\nkind = \"point\"\nk = 1\n[evolve]\ntail_epsilon = 1e-16\n\
             [mc]\nn = 4\nsamples = 10\nseed = 9\n[sweep]\nalphas = [2.5]\n",
        );
        assert_eq!(parse(&c.to_toml()), c);
    }

    #[test]
    fn unknown_keys_and_missing_seed_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[model]\nm = 2\nq = 1\n[initial]\nkind = \"point\"\nk = 0\n").is_err());
        assert!(toml::from_str::<RunConfig>(
            "[model]\nm = 2\n[initial]\nkind = \"point\"\nk = 0\n[mc]\nn = 2\nsamples = 5\n"
        )
        .is_err());
    }

    #[test]
    fn reads_probability_files() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("law.txt");
        std::fs::write(&p, "# sub\n0.9, 0\n0.1\n").unwrap();
        assert_eq!(read_probs(&p).unwrap(), vec![0.9, 0.0, 0.1]);
        std::fs::write(&p, "0.9 x").unwrap();
        assert!(read_probs(&p).is_err());
    }
}
