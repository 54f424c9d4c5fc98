use std::collections::HashSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ItemKind {
    Binary,
    Ordinal,
    Nominal,
}

impl ItemKind {
    /// Binary and ordinal items share the single-latent threshold model.
    pub fn is_ordered(self) -> bool {
        !matches!(self, ItemKind::Nominal)
    }
}

impl fmt::Display for ItemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ItemKind::Binary => "binary",
            ItemKind::Ordinal => "ordinal",
            ItemKind::Nominal => "nominal",
        })
    }
}

/// One survey item. Level `k` (1-based) is `levels[k - 1]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemSpec {
    pub name: String,
    pub kind: ItemKind,
    pub levels: Vec<String>,
}

impl ItemSpec {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Width of this item's block in the latent vector.
    pub fn latent_width(&self) -> usize {
        match self.kind {
            ItemKind::Nominal => self.n_levels() - 1,
            _ => 1,
        }
    }

    pub fn label(&self, level: usize) -> &str {
        &self.levels[level - 1]
    }
}

#[derive(Serialize, Deserialize)]
struct SchemaDoc {
    items: Vec<ItemSpec>,
}

/// Validated schema in canonical order: binary/ordinal items first, then
/// nominal items, each group keeping document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurveySchema {
    items: Vec<ItemSpec>,
    /// `order[c]` is the document position of canonical item `c`.
    order: Vec<usize>,
    n_ordered: usize,
    dim: usize,
}

impl SurveySchema {
    pub fn new(items: Vec<ItemSpec>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::Schema("no items".into()));
        }
        let mut names = HashSet::new();
        for item in &items {
            if item.name.trim().is_empty() {
                return Err(Error::Schema("item with empty name".into()));
            }
            if !names.insert(item.name.as_str()) {
                return Err(Error::Schema(format!("duplicate item name `{}`", item.name)));
            }
            let k = item.n_levels();
            if k < 2 {
                return Err(Error::Schema(format!(
                    "item `{}` has {k} level(s); at least 2 required",
                    item.name
                )));
            }
            if item.kind == ItemKind::Binary && k != 2 {
                return Err(Error::Schema(format!(
                    "binary item `{}` has {k} levels",
                    item.name
                )));
            }
            if k > u16::MAX as usize {
                return Err(Error::Schema(format!("item `{}` has too many levels", item.name)));
            }
            let mut labels = HashSet::new();
            for label in &item.levels {
                if !labels.insert(label.as_str()) {
                    return Err(Error::Schema(format!(
                        "item `{}` repeats level label `{label}`",
                        item.name
                    )));
                }
            }
        }
        let mut order: Vec<usize> = (0..items.len())
            .filter(|&i| items[i].kind.is_ordered())
            .collect();
        let n_ordered = order.len();
        order.extend((0..items.len()).filter(|&i| !items[i].kind.is_ordered()));
        let mut slots: Vec<Option<ItemSpec>> = items.into_iter().map(Some).collect();
        let items: Vec<ItemSpec> = order.iter().map(|&i| slots[i].take().unwrap()).collect();
        let dim = items.iter().map(ItemSpec::latent_width).sum();
        Ok(SurveySchema {
            items,
            order,
            n_ordered,
            dim,
        })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        parse_schema(&text)
    }

    /// Items in canonical order.
    pub fn items(&self) -> &[ItemSpec] {
        &self.items
    }

    pub fn item(&self, j: usize) -> &ItemSpec {
        &self.items[j]
    }

    /// Number of binary plus ordinal items (they occupy positions `0..O`).
    pub fn n_ordered(&self) -> usize {
        self.n_ordered
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Latent dimension D = O + Σ_nominal (K_j − 1).
    pub fn latent_dim(&self) -> usize {
        self.dim
    }

    /// Document positions of the canonical items.
    pub fn permutation(&self) -> &[usize] {
        &self.order
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.items.iter().position(|it| it.name == name)
    }

    /// Items in the order they appeared in the source document.
    pub fn document_items(&self) -> Vec<ItemSpec> {
        let mut out = vec![None; self.items.len()];
        for (c, &d) in self.order.iter().enumerate() {
            out[d] = Some(self.items[c].clone());
        }
        out.into_iter().map(Option::unwrap).collect()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&SchemaDoc {
            items: self.document_items(),
        })
        .expect("schema serializes")
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&SchemaDoc {
            items: self.document_items(),
        })
        .expect("schema serializes")
    }
}

/// Parses a TOML or JSON schema document (JSON when the first non-blank
/// character is `{`).
pub fn parse_schema(text: &str) -> Result<SurveySchema> {
    let doc: SchemaDoc = if text.trim_start().starts_with('{') {
        serde_json::from_str(text)?
    } else {
        toml::from_str(text)?
    };
    SurveySchema::new(doc.items)
}
