use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StimulusKind {
    Color,
    Wheel,
    Grating,
    Shape,
}

/// Dominant spatial scale of a stimulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Band {
    Low,
    High,
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Band::Low => "low",
            Band::High => "high",
        })
    }
}

impl FromStr for Band {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(Band::Low),
            "high" => Ok(Band::High),
            other => Err(Error::invalid(format!("unknown band {other:?}"))),
        }
    }
}

/// One stimulus record. Keys this type does not know about are kept in
/// `extra` and written back unchanged.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub kind: StimulusKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hue: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<Band>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor_path: Option<String>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl ManifestEntry {
    pub fn new(id: impl Into<String>, kind: StimulusKind) -> Self {
        let id = id.into();
        Self {
            tensor_path: Some(format!("{id}.lpt")),
            id,
            kind,
            hue: None,
            saturation: None,
            value: None,
            frequency: None,
            orientation: None,
            band: None,
            extra: BTreeMap::new(),
        }
    }

    pub(crate) fn with_extra(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.extra.insert(key.to_owned(), value.into());
        self
    }

    pub fn tensor_path(&self) -> Result<&str> {
        self.tensor_path
            .as_deref()
            .ok_or_else(|| Error::Validation(format!("entry {:?} has no tensor_path", self.id)))
    }

    /// Achromatic color entries (zero saturation) have no defined hue.
    pub fn is_achromatic(&self) -> bool {
        self.saturation == Some(0.0)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StimulusManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl StimulusManifest {
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        Self {
            entries,
            extra: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ManifestEntry> {
        self.entries.iter().find(|e| e.id == id)
    }

    /// Checks id uniqueness, tensor paths and the per-kind required fields.
    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(entry.id.as_str()) {
                return Err(Error::Validation(format!("duplicate id {:?}", entry.id)));
            }
            entry.tensor_path()?;
            match entry.kind {
                StimulusKind::Color => {
                    if entry.hue.is_none() || entry.saturation.is_none() || entry.value.is_none() {
                        return Err(Error::Validation(format!(
                            "color entry {:?} must carry hue, saturation and value",
                            entry.id
                        )));
                    }
                }
                StimulusKind::Grating | StimulusKind::Shape => {
                    if entry.band.is_none() {
                        return Err(Error::Validation(format!(
                            "entry {:?} must carry a band tag",
                            entry.id
                        )));
                    }
                }
                StimulusKind::Wheel => {}
            }
            if let Some(h) = entry.hue {
                if !(0.0..360.0).contains(&h) {
                    return Err(Error::Validation(format!(
                        "entry {:?} hue {h} outside [0, 360)",
                        entry.id
                    )));
                }
            }
            for (name, v) in [("saturation", entry.saturation), ("value", entry.value)] {
                if let Some(v) = v {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::Validation(format!(
                            "entry {:?} {name} {v} outside [0, 1]",
                            entry.id
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
