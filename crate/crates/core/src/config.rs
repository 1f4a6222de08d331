//! TOML descriptions of models and test designs.
//!
//! ```toml
//! [model]
//! kind = "breguet"
//! constants = { m_empty = 42600.0, m_pload = 19900.0, g = 9.81, ra = 3000.0 }
//!
//! [design]
//! u = [[3]]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypothesis::TestProblem;
use crate::models::{
    breguet_model, discrete_model, example1, example2, ishigami_model, AnalyticModel, BreguetConstants, DiscreteTable,
};
use crate::sampling::InputDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModelConfig {
    Ishigami {
        #[serde(default)]
        centered: bool,
    },
    Example1 {
        lambda1: f64,
    },
    Example2 {
        lambda1: f64,
    },
    Breguet {
        #[serde(default)]
        constants: BreguetConstants,
        /// Laws of (V, F, SFC); defaults apply when absent.
        #[serde(default)]
        inputs: Option<Vec<InputDistribution>>,
    },
    Discrete {
        probs: Vec<Vec<f64>>,
        values: Vec<f64>,
    },
}

impl ModelConfig {
    pub fn build(&self) -> Result<AnalyticModel> {
        match self {
            ModelConfig::Ishigami { centered } => Ok(ishigami_model(*centered)),
            ModelConfig::Example1 { lambda1 } => example1(*lambda1),
            ModelConfig::Example2 { lambda1 } => example2(*lambda1),
            ModelConfig::Breguet { constants, inputs } => breguet_model(*constants, inputs.clone()),
            ModelConfig::Discrete { probs, values } => discrete_model(&DiscreteTable {
                probs: probs.clone(),
                values: values.clone(),
            }),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DesignConfig {
    pub u: Vec<Vec<usize>>,
    pub v: Vec<Vec<usize>>,
    pub w: Vec<Vec<usize>>,
}

impl DesignConfig {
    pub fn problem(&self) -> Result<TestProblem> {
        TestProblem::new(self.u.clone(), self.v.clone(), self.w.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub model: ModelConfig,
    #[serde(default)]
    pub design: Option<DesignConfig>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.build()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}
