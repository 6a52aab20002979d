use serde::{Deserialize, Serialize};

use super::{Beta, MLKernelSpec, Profile};
use crate::weights::WeightEntry;
use crate::{Error, Result};

/// Named kernel shapes available to description files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    StandardBump {
        #[serde(default = "one")]
        scale: f64,
    },
    DerivedPsi {
        #[serde(default = "one")]
        scale: f64,
    },
    /// The jump kernel `χ_(0,1) - χ_(-1,0)`.
    Jump {
        #[serde(default = "one")]
        scale: f64,
    },
    Majorant {
        decay: f64,
    },
    /// Jump-kernel multiplier on `χ_(0,1)` times bump factors.
    Ex38,
    /// Smooth multiplier on a Hölder profile times bump factors.
    Ex37 {
        #[serde(default = "half")]
        alpha: f64,
        #[serde(default)]
        beta: BetaChoice,
        #[serde(default = "one")]
        beta_value: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BetaChoice {
    #[default]
    One,
    Constant,
    RoughSign,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormChoice {
    Convolution,
    Product,
}

/// A kernel description file. Key names are documented in
/// `docs/kernel-config.md`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelFile {
    pub m: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub decay: f64,
    pub gamma: f64,
    pub form: FormChoice,
    #[serde(default)]
    pub t_constant: Option<bool>,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub weights: Vec<WeightEntry>,
}

impl KernelFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("kernel description: {}", e.message())))
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        KernelFile::parse(&text)
    }

    fn profile(&self) -> Option<Profile> {
        let n = self.n;
        let scaled = |p: Profile, c: f64| if c == 1.0 { p } else { p.scaled(c) };
        match &self.kernel {
            KernelConfig::StandardBump { scale } => Some(scaled(Profile::Bump { n }, *scale)),
            KernelConfig::DerivedPsi { scale } => Some(scaled(Profile::Psi { n }, *scale)),
            KernelConfig::Jump { scale } => Some(scaled(Profile::Jump, *scale)),
            KernelConfig::Majorant { decay } => Some(Profile::Majorant { n, decay: *decay }),
            KernelConfig::Ex38 | KernelConfig::Ex37 { .. } => None,
        }
    }

    pub fn build(&self) -> Result<MLKernelSpec> {
        let base = match (&self.form, &self.kernel) {
            (FormChoice::Convolution, _) => {
                if self.m != 1 {
                    return Err(Error::Config("a convolution kernel has arity one".into()));
                }
                let p = self
                    .profile()
                    .ok_or_else(|| Error::Config("this built-in is not a convolution profile".into()))?;
                MLKernelSpec::convolution(p, self.decay, self.gamma)?
            }
            (FormChoice::Product, KernelConfig::Ex38) => {
                if self.n != 1 {
                    return Err(Error::Config("the jump-kernel example is one-dimensional".into()));
                }
                MLKernelSpec::ex38(self.m)?
            }
            (FormChoice::Product, KernelConfig::Ex37 { alpha, beta, beta_value }) => {
                let beta = match beta {
                    BetaChoice::One => Beta::One,
                    BetaChoice::Constant => Beta::Constant(*beta_value),
                    BetaChoice::RoughSign => Beta::RoughSign,
                };
                MLKernelSpec::ex37(self.m, self.n, *alpha, beta)?
            }
            (FormChoice::Product, _) => {
                let p = self.profile().expect("profile built-ins");
                MLKernelSpec::product_convolution(1.0, vec![p; self.m], self.decay, self.gamma)?
            }
        };
        let t_constant = self.t_constant.unwrap_or(base.t_constant);
        MLKernelSpec::new(self.m, self.n, self.decay, self.gamma, base.form, t_constant)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_builds_the_documented_example() {
        let text = r#"
m = 2
n = 1
N = 2.0
gamma = 1.0
form = "product"

[kernel]
name = "ex38"

[[weights]]
tag = "power"
a = 0.5
"#;
        let f = KernelFile::parse(text).unwrap();
        let spec = f.build().unwrap();
        assert_eq!(spec.m, 2);
        assert_eq!(f.weights.len(), 1);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(matches!(KernelFile::parse("m = 1"), Err(Error::Config(_))));
        let text = "m = 2\nn = 1\nN = 2.0\ngamma = 1.0\nform = \"convolution\"\n[kernel]\nname = \"jump\"\n";
        assert!(matches!(KernelFile::parse(text).unwrap().build(), Err(Error::Config(_))));
        let text = "m = 1\nn = 1\nN = 0.5\ngamma = 1.0\nform = \"convolution\"\n[kernel]\nname = \"jump\"\n";
        assert!(matches!(KernelFile::parse(text).unwrap().build(), Err(Error::Parameter(_))));
    }
}
