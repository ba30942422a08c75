//! Item and attribute identifier namespaces with dense integer indices.

use std::collections::HashMap;
use std::fmt::Write as _;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Two dense namespaces: item identifiers and attribute identifiers.
///
/// Indices are contiguous from 0 in insertion order. Identifiers are unique
/// within each namespace. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityCatalog {
    items: Vec<String>,
    attributes: Vec<String>,
    item_index: HashMap<String, usize>,
    attr_index: HashMap<String, usize>,
}

impl EntityCatalog {
    pub fn new<I, A, S, T>(items: I, attributes: A) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        A: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        let items: Vec<String> = items.into_iter().map(Into::into).collect();
        let attributes: Vec<String> = attributes.into_iter().map(Into::into).collect();
        let mut item_index = HashMap::with_capacity(items.len());
        for (i, id) in items.iter().enumerate() {
            if item_index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidData(format!("duplicate item id `{id}`")));
            }
        }
        let mut attr_index = HashMap::with_capacity(attributes.len());
        for (i, id) in attributes.iter().enumerate() {
            if attr_index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidData(format!("duplicate attribute id `{id}`")));
            }
        }
        Ok(Self {
            items,
            attributes,
            item_index,
            attr_index,
        })
    }

    /// Number of items, `m`.
    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Number of attributes, `n`.
    pub fn num_attributes(&self) -> usize {
        self.attributes.len()
    }

    pub fn item_id(&self, index: usize) -> &str {
        &self.items[index]
    }

    pub fn attribute_id(&self, index: usize) -> &str {
        &self.attributes[index]
    }

    pub fn item_ids(&self) -> &[String] {
        &self.items
    }

    pub fn attribute_ids(&self) -> &[String] {
        &self.attributes
    }

    pub fn item(&self, id: &str) -> Result<usize> {
        self.item_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownItem(id.to_string()))
    }

    pub fn attribute(&self, id: &str) -> Result<usize> {
        self.attr_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownAttribute(id.to_string()))
    }

    pub fn lookup_item(&self, id: &str) -> Option<usize> {
        self.item_index.get(id).copied()
    }

    pub fn lookup_attribute(&self, id: &str) -> Option<usize> {
        self.attr_index.get(id).copied()
    }

    /// Writes the catalog file: a header line, then one `I<TAB>id` line per
    /// item and one `A<TAB>id` line per attribute, both in index order.
    pub fn write_tsv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "#catalog\titems={}\tattributes={}",
            self.items.len(),
            self.attributes.len()
        )?;
        for id in &self.items {
            writeln!(w, "I\t{id}")?;
        }
        for id in &self.attributes {
            writeln!(w, "A\t{id}")?;
        }
        Ok(())
    }

    pub fn read_tsv<R: std::io::Read>(
        reader: std::io::BufReader<R>,
        source: &str,
    ) -> Result<Self> {
        use std::io::BufRead;
        let mut items = Vec::new();
        let mut attributes = Vec::new();
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::EmptyInput(source.to_string()))??;
        if !header.starts_with("#catalog\t") {
            return Err(Error::Parse {
                path: source.to_string(),
                line: 1,
                msg: "missing #catalog header".to_string(),
            });
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            match line.split_once('\t') {
                Some(("I", id)) => items.push(id.to_string()),
                Some(("A", id)) => attributes.push(id.to_string()),
                _ => {
                    return Err(Error::Parse {
                        path: source.to_string(),
                        line: lineno + 2,
                        msg: format!("bad catalog line `{line}`"),
                    })
                }
            }
        }
        Self::new(items, attributes)
    }

    pub fn load_tsv(path: &std::path::Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_tsv(std::io::BufReader::new(file), &path.display().to_string())
    }

    /// Content hash over both namespaces in index order; identifies the
    /// catalog a checkpoint or benchmark was built against.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(b"items\0");
        for id in &self.items {
            hasher.update(id.as_bytes());
            hasher.update(b"\0");
        }
        hasher.update(b"attributes\0");
        for id in &self.attributes {
            hasher.update(id.as_bytes());
            hasher.update(b"\0");
        }
        let digest = hasher.finalize();
        let mut out = String::with_capacity(64);
        for byte in digest {
            let _ = write!(out, "{byte:02x}");
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_indices_in_insertion_order() {
        let cat = EntityCatalog::new(["m1", "m2"], ["comedy", "romance", "drama"]).unwrap();
        assert_eq!(cat.num_items(), 2);
        assert_eq!(cat.num_attributes(), 3);
        assert_eq!(cat.item("m2").unwrap(), 1);
        assert_eq!(cat.attribute("drama").unwrap(), 2);
        assert_eq!(cat.attribute_id(0), "comedy");
    }

    #[test]
    fn duplicate_ids_rejected() {
        assert!(EntityCatalog::new(["m1", "m1"], ["a"]).is_err());
        assert!(EntityCatalog::new(["m1"], ["a", "a"]).is_err());
    }

    #[test]
    fn unknown_lookup_is_an_error() {
        let cat = EntityCatalog::new(["m1"], ["a"]).unwrap();
        assert!(matches!(
            cat.attribute("nope"),
            Err(Error::UnknownAttribute(s)) if s == "nope"
        ));
    }

    #[test]
    fn tsv_round_trip() {
        let cat = EntityCatalog::new(["m1", "m2"], ["film noir", "comedy"]).unwrap();
        let mut buf = Vec::new();
        cat.write_tsv(&mut buf).unwrap();
        let re = EntityCatalog::read_tsv(
            std::io::BufReader::new(std::io::Cursor::new(&buf[..])),
            "mem",
        )
        .unwrap();
        assert_eq!(re, cat);
        assert_eq!(re.content_hash(), cat.content_hash());
    }

    #[test]
    fn content_hash_depends_on_order_and_content() {
        let a = EntityCatalog::new(["m1", "m2"], ["x"]).unwrap();
        let b = EntityCatalog::new(["m2", "m1"], ["x"]).unwrap();
        let c = EntityCatalog::new(["m1", "m2"], ["x"]).unwrap();
        assert_ne!(a.content_hash(), b.content_hash());
        assert_eq!(a.content_hash(), c.content_hash());
    }
}
