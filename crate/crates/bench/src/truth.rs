//! Ground-truth file: a JSON object from image path to expected classes.
//!
//! ```json
//! {"kitchen/001.png": ["cup", "tv"], "kitchen/002.png": [{"class": "book", "bbox": [0.1, 0.1, 0.4, 0.5]}]}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TruthItem {
    Class(String),
    Boxed {
        class: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        bbox: Option<[f64; 4]>,
    },
}

impl TruthItem {
    pub fn class(&self) -> &str {
        match self {
            TruthItem::Class(c) | TruthItem::Boxed { class: c, .. } => c,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroundTruth {
    pub images: BTreeMap<String, Vec<TruthItem>>,
}

/// Corpus-relative key: forward slashes, no leading `./`.
pub fn normalize_key(path: &str) -> String {
    let p = path.replace('\\', "/");
    let mut s = p.as_str();
    while let Some(rest) = s.strip_prefix("./") {
        s = rest;
    }
    s.to_owned()
}

impl GroundTruth {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let raw: BTreeMap<String, Vec<TruthItem>> =
            serde_json::from_str(text).map_err(|e| BenchError::Truth(e.to_string()))?;
        let mut images = BTreeMap::new();
        for (k, v) in raw {
            if v.iter().any(|i| i.class().is_empty()) {
                return Err(BenchError::Truth(format!("`{k}`: empty class name")));
            }
            if images.insert(normalize_key(&k), v).is_some() {
                return Err(BenchError::Truth(format!("`{k}` is listed twice")));
            }
        }
        Ok(GroundTruth { images })
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.display().to_string(), e))?;
        Self::from_json(&text)
    }

    pub fn from_classes<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = (S, Vec<S>)>,
        S: Into<String>,
    {
        GroundTruth {
            images: entries
                .into_iter()
                .map(|(k, v)| (normalize_key(&k.into()), v.into_iter().map(|c| TruthItem::Class(c.into())).collect()))
                .collect(),
        }
    }

    pub fn contains(&self, image: &str) -> bool {
        self.images.contains_key(image)
    }

    /// Expected classes of `image`, `None` if the image is not covered.
    pub fn classes(&self, image: &str) -> Option<BTreeSet<&str>> {
        self.images.get(image).map(|v| v.iter().map(TruthItem::class).collect())
    }

    pub fn all_classes(&self) -> BTreeSet<&str> {
        self.images.values().flatten().map(TruthItem::class).collect()
    }
}
