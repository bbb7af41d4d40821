use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const SAMPLE_TAXONOMY: &str = include_str!("../../fixtures/taxonomy.csv");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Category {
    pub id: String,
    pub name: String,
    /// Index of the parent node; `None` for children of the synthetic root.
    pub parent: Option<usize>,
}

#[derive(Debug, Deserialize)]
struct TaxonomyRow {
    category_id: String,
    parent_id: String,
    name: String,
}

#[derive(Debug, Serialize)]
struct TaxonomyRowOut<'a> {
    category_id: &'a str,
    parent_id: &'a str,
    name: &'a str,
}

/// Category tree below a synthetic root. Node order follows the source file
/// and fixes the place-type feature order.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryTaxonomy {
    nodes: Vec<Category>,
    index: HashMap<String, usize>,
}

impl CategoryTaxonomy {
    /// Builds a taxonomy from `(id, parent_id, name)` triples; an empty parent
    /// attaches the node to the root.
    pub fn from_entries<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: Into<String>,
    {
        let raw: Vec<(String, String, String)> = entries
            .into_iter()
            .map(|(a, b, c)| (a.into(), b.into(), c.into()))
            .collect();
        let mut index = HashMap::with_capacity(raw.len());
        for (i, (id, _, _)) in raw.iter().enumerate() {
            if id.is_empty() {
                return Err(Error::Integrity(format!("taxonomy row {} has an empty id", i + 1)));
            }
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::Integrity(format!("duplicate category id `{id}`")));
            }
        }
        let mut nodes = Vec::with_capacity(raw.len());
        for (id, parent, name) in raw {
            let parent = if parent.is_empty() {
                None
            } else {
                Some(*index.get(&parent).ok_or_else(|| {
                    Error::Integrity(format!("category `{id}` has unknown parent `{parent}`"))
                })?)
            };
            nodes.push(Category { id, name, parent });
        }
        let taxonomy = CategoryTaxonomy { nodes, index };
        taxonomy.check_acyclic()?;
        Ok(taxonomy)
    }

    pub fn from_reader<R: Read>(reader: R, path: &Path) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut entries = Vec::new();
        for rec in rdr.deserialize::<TaxonomyRow>() {
            let row = rec.map_err(|e| super::csv_error(path, e))?;
            entries.push((row.category_id, row.parent_id, row.name));
        }
        CategoryTaxonomy::from_entries(entries)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        CategoryTaxonomy::from_reader(file, path)
    }

    /// The bundled 298-node sample taxonomy (9 top-level categories).
    pub fn sample() -> Self {
        CategoryTaxonomy::from_reader(SAMPLE_TAXONOMY.as_bytes(), Path::new("taxonomy.csv"))
            .expect("bundled taxonomy is valid")
    }

    pub fn sample_csv() -> &'static str {
        SAMPLE_TAXONOMY
    }

    fn check_acyclic(&self) -> Result<()> {
        for start in 0..self.nodes.len() {
            let mut cur = self.nodes[start].parent;
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > self.nodes.len() {
                    return Err(Error::Integrity(format!(
                        "category `{}` is part of a cycle",
                        self.nodes[start].id
                    )));
                }
                cur = self.nodes[p].parent;
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Category] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &Category {
        &self.nodes[idx]
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, id: &str) -> Option<&Category> {
        self.index_of(id).map(|i| &self.nodes[i])
    }

    pub fn contains(&self, id: &str) -> bool {
        self.index.contains_key(id)
    }

    /// Node indices from `idx` up to its top-level ancestor (root excluded).
    pub fn ancestor_indices(&self, idx: usize) -> Vec<usize> {
        let mut out = vec![idx];
        let mut cur = self.nodes[idx].parent;
        while let Some(p) = cur {
            out.push(p);
            cur = self.nodes[p].parent;
        }
        out
    }

    /// Category ids from `id` up to its top-level ancestor (root excluded).
    pub fn ancestors(&self, id: &str) -> Result<Vec<&str>> {
        let idx = self
            .index_of(id)
            .ok_or_else(|| Error::UnknownCategory(id.to_string()))?;
        Ok(self
            .ancestor_indices(idx)
            .into_iter()
            .map(|i| self.nodes[i].id.as_str())
            .collect())
    }

    /// True when `category` is `id` or one of its ancestors.
    pub fn is_a(&self, id: &str, category: &str) -> bool {
        match (self.index_of(id), self.index_of(category)) {
            (Some(i), Some(c)) => self.ancestor_indices(i).contains(&c),
            _ => false,
        }
    }

    /// Nodes whose name marks a private home, e.g. "Home" or "Home (private)".
    pub fn home_categories(&self) -> Vec<usize> {
        self.nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| {
                let name = n.name.to_ascii_lowercase();
                name == "home" || name.starts_with("home (")
            })
            .map(|(i, _)| i)
            .collect()
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        for n in &self.nodes {
            wtr.serialize(TaxonomyRowOut {
                category_id: &n.id,
                parent_id: n.parent.map(|p| self.nodes[p].id.as_str()).unwrap_or(""),
                name: &n.name,
            })
            .map_err(|e| Error::Data(e.to_string()))?;
        }
        wtr.into_inner().map_err(|e| Error::Data(e.to_string()))
    }
}
