use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::dataio::{Dataset, TrendSample};
use crate::error::{Error, Result};

/// Single-level element -> parent category map.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Taxonomy {
    parent_of: BTreeMap<usize, usize>,
    category_vocab_size: usize,
}

impl Taxonomy {
    pub fn new(parent_of: BTreeMap<usize, usize>, category_vocab_size: usize) -> Result<Self> {
        if category_vocab_size == 0 {
            return Err(Error::Config("category_vocab_size must be >= 1".into()));
        }
        if let Some((e, p)) = parent_of.iter().find(|(_, &p)| p >= category_vocab_size) {
            return Err(Error::Config(format!(
                "element {e} has parent {p}, outside category_vocab_size {category_vocab_size}"
            )));
        }
        Ok(Self {
            parent_of,
            category_vocab_size,
        })
    }

    /// Parent of element `e` is `e % categories`.
    pub fn modulo(element_vocab_size: usize, categories: usize) -> Result<Self> {
        if categories == 0 {
            return Err(Error::Config("category count must be >= 1".into()));
        }
        let parent_of = (0..element_vocab_size).map(|e| (e, e % categories)).collect();
        Self::new(parent_of, categories)
    }

    pub fn category_vocab_size(&self) -> usize {
        self.category_vocab_size
    }

    pub fn parent(&self, element_id: usize) -> Option<usize> {
        self.parent_of.get(&element_id).copied()
    }

    pub fn len(&self) -> usize {
        self.parent_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent_of.is_empty()
    }

    /// Every element of `dataset` must have a parent.
    pub fn check_covers(&self, dataset: &Dataset) -> Result<()> {
        match dataset.series.iter().find(|s| self.parent(s.element_id).is_none()) {
            Some(s) => Err(Error::Config(format!(
                "taxonomy has no parent for element {}",
                s.element_id
            ))),
            None => Ok(()),
        }
    }

    /// `category_vocab_size=<n>` header, then `element_id<TAB>parent_id` lines.
    pub fn parse(text: &str, context: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            context: context.to_string(),
            location: format!("line {line}"),
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty taxonomy file".into()))?;
        let size = header
            .strip_prefix("category_vocab_size=")
            .and_then(|v| v.trim().parse::<usize>().ok())
            .ok_or_else(|| parse_err(hline, format!("expected 'category_vocab_size=<n>', got '{header}'")))?;

        let mut parent_of = BTreeMap::new();
        for (line, l) in lines {
            let mut fields = l.split('\t');
            let (Some(e), Some(p), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(parse_err(line, format!("expected two tab-separated ids, got '{l}'")));
            };
            let e: usize = e.trim().parse().map_err(|_| parse_err(line, format!("bad element id '{e}'")))?;
            let p: usize = p.trim().parse().map_err(|_| parse_err(line, format!("bad parent id '{p}'")))?;
            if parent_of.insert(e, p).is_some() {
                return Err(parse_err(line, format!("element {e} listed twice")));
            }
        }
        Self::new(parent_of, size)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("category_vocab_size={}\n", self.category_vocab_size);
        for (e, p) in &self.parent_of {
            out.push_str(&format!("{e}\t{p}\n"));
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// Categorical ids fed to the embedding tables: `[element, group]`, plus the
/// parent category when external knowledge is on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureIds(Vec<usize>);

impl FeatureIds {
    pub fn element(&self) -> usize {
        self.0[0]
    }

    pub fn group(&self) -> usize {
        self.0[1]
    }

    pub fn parent(&self) -> Option<usize> {
        self.0.get(2).copied()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }
}

pub fn build_feature_ids(sample: &TrendSample, taxonomy: Option<&Taxonomy>, ext_kg: bool) -> Result<FeatureIds> {
    let mut ids = vec![sample.element_id, sample.group_id];
    if ext_kg {
        let taxonomy =
            taxonomy.ok_or_else(|| Error::Config("external knowledge enabled but no taxonomy given".into()))?;
        let parent = taxonomy.parent(sample.element_id).ok_or_else(|| {
            Error::Config(format!("taxonomy has no parent for element {}", sample.element_id))
        })?;
        ids.push(parent);
    }
    Ok(FeatureIds(ids))
}
