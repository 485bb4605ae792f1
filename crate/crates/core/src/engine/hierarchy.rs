use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use super::EngineError;

/// Tree of terms used for database-lookup beceptivity. Deeper terms are
/// more specific. Depth counts the nodes on the path from the root, so a
/// root has depth 1 and the value of a node is
/// `depth / max_depth * scale_max`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BeceptivityHierarchy {
    depth: BTreeMap<String, u32>,
    max_depth: u32,
}

fn key(s: &str) -> String {
    s.trim().to_lowercase()
}

impl BeceptivityHierarchy {
    /// Builds the tree from (child, parent) edges. Terms that only appear as
    /// parents are roots. Each term may have at most one parent and the
    /// edges must not form a cycle.
    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, EngineError> {
        let mut parent: BTreeMap<String, String> = BTreeMap::new();
        let mut nodes = BTreeSet::new();
        for (i, (child, par)) in edges.into_iter().enumerate() {
            let (c, p) = (key(child), key(par));
            if c.is_empty() || p.is_empty() {
                return Err(EngineError::Hierarchy(format!("edge {}: empty term", i + 1)));
            }
            if c == p {
                return Err(EngineError::Hierarchy(format!("edge {}: '{c}' is its own parent", i + 1)));
            }
            if let Some(prev) = parent.insert(c.clone(), p.clone()) {
                if prev != p {
                    return Err(EngineError::Hierarchy(format!("'{c}' has two parents ('{prev}', '{p}')")));
                }
            }
            nodes.insert(c);
            nodes.insert(p);
        }
        let mut depth = BTreeMap::new();
        for n in &nodes {
            let mut d = 1u32;
            let mut cur = n;
            while let Some(p) = parent.get(cur) {
                d += 1;
                if d as usize > nodes.len() {
                    return Err(EngineError::Hierarchy(format!("cycle through '{n}'")));
                }
                cur = p;
            }
            depth.insert(n.clone(), d);
        }
        let max_depth = depth.values().copied().max().unwrap_or(0);
        Ok(BeceptivityHierarchy { depth, max_depth })
    }

    /// A single term with no edges, e.g. a one-node tree.
    pub fn singleton(term: &str) -> Self {
        BeceptivityHierarchy {
            depth: BTreeMap::from([(key(term), 1)]),
            max_depth: 1,
        }
    }

    /// Parses `child<TAB>parent` lines; blank lines and `#` comments are
    /// skipped.
    pub fn parse(text: &str) -> Result<Self, EngineError> {
        let mut edges = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (c, p) = line
                .split_once('\t')
                .ok_or_else(|| EngineError::Hierarchy(format!("line {}: expected child<TAB>parent", i + 1)))?;
            edges.push((c, p));
        }
        Self::from_edges(edges)
    }

    pub fn from_file(path: &Path) -> crate::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| crate::Error::io(format!("reading {}", path.display()), e))?;
        Ok(Self::parse(&text)?)
    }

    pub fn depth(&self, term: &str) -> Option<u32> {
        self.depth.get(&key(term)).copied()
    }

    pub fn max_depth(&self) -> u32 {
        self.max_depth
    }

    pub fn len(&self) -> usize {
        self.depth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.depth.is_empty()
    }

    pub fn beceptivity(&self, term: &str, scale_max: f64) -> Option<f64> {
        let d = self.depth(term)?;
        Some(f64::from(d) / f64::from(self.max_depth) * scale_max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TREE: &str = "infection\tdisease\nurinary tract infection\tinfection\n# comment\ncystitis\turinary tract infection\n";

    #[test]
    fn depths_count_nodes_from_the_root() {
        let h = BeceptivityHierarchy::parse(TREE).unwrap();
        assert_eq!(h.depth("disease"), Some(1));
        assert_eq!(h.depth("Cystitis"), Some(4));
        assert_eq!(h.max_depth(), 4);
        assert_eq!(h.beceptivity("cystitis", 10.0), Some(10.0));
        assert_eq!(h.beceptivity("infection", 10.0), Some(5.0));
        assert_eq!(h.beceptivity("unknown", 10.0), None);
    }

    #[test]
    fn single_node_is_fully_specific() {
        assert_eq!(BeceptivityHierarchy::singleton("x").beceptivity("x", 10.0), Some(10.0));
    }

    #[test]
    fn rejects_cycles_and_two_parents() {
        assert!(BeceptivityHierarchy::parse("a\tb\nb\ta\n").is_err());
        assert!(BeceptivityHierarchy::parse("a\tb\na\tc\n").is_err());
        assert!(BeceptivityHierarchy::parse("no tab here\n").is_err());
    }
}
