use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{KernConfig, VocabSizes};
use super::network::KernModel;
use super::params::KernParams;
use crate::dataio::Dataset;
use crate::error::{Error, Result};
use crate::knowledge::Taxonomy;

const FORMAT: &str = "trendkern-checkpoint/1";

/// Serialized model: config echo, vocabulary sizes and every weight tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub epoch: usize,
    pub test_mae: f64,
    pub config: KernConfig,
    pub vocab: VocabSizes,
    pub params: KernParams,
}

impl Checkpoint {
    pub fn new(model: &KernModel, epoch: usize, test_mae: f64) -> Self {
        Self {
            format: FORMAT.to_string(),
            epoch,
            test_mae,
            config: model.config.clone(),
            vocab: model.params.vocab(),
            params: model.params.clone(),
        }
    }

    pub fn model(&self) -> Result<KernModel> {
        KernModel::new(self.config.clone(), self.params.clone())
    }

    /// Fails unless the embedding tables fit `dataset` (and `taxonomy` when
    /// external knowledge is on).
    pub fn check_compatible(&self, dataset: &Dataset, taxonomy: Option<&Taxonomy>) -> Result<()> {
        let v = self.vocab;
        if v.element != dataset.element_vocab_size || v.group != dataset.group_vocab_size {
            return Err(Error::Config(format!(
                "checkpoint vocabulary mismatch: checkpoint has {} elements / {} groups, dataset has {} / {}",
                v.element, v.group, dataset.element_vocab_size, dataset.group_vocab_size
            )));
        }
        if self.config.ext_kg {
            let t = taxonomy.ok_or_else(|| Error::Config("checkpoint uses external knowledge; a taxonomy is required".into()))?;
            if Some(t.category_vocab_size()) != v.category {
                return Err(Error::Config(format!(
                    "checkpoint vocabulary mismatch: {:?} categories in checkpoint, {} in taxonomy",
                    v.category,
                    t.category_vocab_size()
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str, context: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: context.to_string(),
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if ck.format != FORMAT {
            return Err(Error::Parse {
                context: context.to_string(),
                location: "format".into(),
                message: format!("unsupported checkpoint format '{}'", ck.format),
            });
        }
        if ck.params.vocab() != ck.vocab {
            return Err(Error::Validation("checkpoint vocab header disagrees with tensors".into()));
        }
        ck.params.check(&ck.config)?;
        Ok(ck)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, &path.display().to_string())
    }
}
