// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// A typed configuration leaf.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LeafValue {
    Bool(bool),
    Int(i64),
    Str(String),
}

impl LeafValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            LeafValue::Int(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            LeafValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            LeafValue::Bool(b) => Some(*b),
            _ => None,
        }
    }
}

impl fmt::Display for LeafValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeafValue::Bool(b) => write!(f, "{b}"),
            LeafValue::Int(i) => write!(f, "{i}"),
            LeafValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for LeafValue {
    fn from(v: i64) -> Self {
        LeafValue::Int(v)
    }
}

impl From<bool> for LeafValue {
    fn from(v: bool) -> Self {
        LeafValue::Bool(v)
    }
}

impl From<&str> for LeafValue {
    fn from(v: &str) -> Self {
        LeafValue::Str(v.to_string())
    }
}

impl From<String> for LeafValue {
    fn from(v: String) -> Self {
        LeafValue::Str(v)
    }
}

/// Hierarchical configuration stored as `/`-separated leaf paths.
///
/// Branches exist only through their leaves, so structural equality is map
/// equality.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ConfigTree {
    leaves: BTreeMap<String, LeafValue>,
}

impl ConfigTree {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, path: &str) -> Option<&LeafValue> {
        self.leaves.get(path)
    }

    pub fn set(&mut self, path: impl Into<String>, value: impl Into<LeafValue>) {
        self.leaves.insert(path.into(), value.into());
    }

    pub fn remove(&mut self, path: &str) -> Option<LeafValue> {
        self.leaves.remove(path)
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LeafValue)> {
        self.leaves.iter()
    }

    /// Leaves under `prefix` (a branch path without trailing slash).
    pub fn subtree<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a String, &'a LeafValue)> + 'a {
        let start = format!("{prefix}/");
        self.leaves
            .range(start.clone()..)
            .take_while(move |(k, _)| k.starts_with(&start))
    }

    /// Names of the direct children of `prefix`.
    pub fn children(&self, prefix: &str) -> Vec<String> {
        let mut out: Vec<String> = self
            .subtree(prefix)
            .filter_map(|(k, _)| k[prefix.len() + 1..].split('/').next().map(str::to_string))
            .collect();
        out.dedup();
        out
    }

    /// Every leaf whose value differs between `self` (old) and `new`.
    pub fn diff(&self, new: &ConfigTree) -> Vec<LeafChange> {
        let mut out = Vec::new();
        for (path, old) in &self.leaves {
            match new.leaves.get(path) {
                Some(v) if v == old => {}
                other => out.push(LeafChange {
                    path: path.clone(),
                    old: Some(old.clone()),
                    new: other.cloned(),
                }),
            }
        }
        for (path, v) in &new.leaves {
            if !self.leaves.contains_key(path) {
                out.push(LeafChange {
                    path: path.clone(),
                    old: None,
                    new: Some(v.clone()),
                });
            }
        }
        out.sort_by(|a, b| a.path.cmp(&b.path));
        out
    }

    /// Applies a batch without any schema check.
    pub fn apply(&mut self, edits: &[Edit]) {
        for e in edits {
            match (&e.op, &e.value) {
                (EditOp::Set, Some(v)) => self.set(e.path.clone(), v.clone()),
                (EditOp::Set, None) => {}
                (EditOp::Delete, _) => {
                    self.remove(&e.path);
                }
            }
        }
    }
}

impl FromIterator<(String, LeafValue)> for ConfigTree {
    fn from_iter<T: IntoIterator<Item = (String, LeafValue)>>(iter: T) -> Self {
        Self {
            leaves: iter.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafChange {
    pub path: String,
    pub old: Option<LeafValue>,
    pub new: Option<LeafValue>,
}

impl LeafChange {
    /// The edit that undoes this change.
    pub fn inverse(&self) -> Edit {
        match &self.old {
            Some(v) => Edit::set(self.path.clone(), v.clone()),
            None => Edit::delete(self.path.clone()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EditOp {
    Set,
    Delete,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub path: String,
    pub op: EditOp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<LeafValue>,
}

impl Edit {
    pub fn set(path: impl Into<String>, value: impl Into<LeafValue>) -> Self {
        Self {
            path: path.into(),
            op: EditOp::Set,
            value: Some(value.into()),
        }
    }

    pub fn delete(path: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            op: EditOp::Delete,
            value: None,
        }
    }
}

/// Edits that turn `from` into `to`: deletes first, then sets, each in path order.
pub fn edits_between(from: &ConfigTree, to: &ConfigTree) -> Vec<Edit> {
    let changes = from.diff(to);
    let deletes = changes.iter().filter(|c| c.new.is_none()).map(|c| Edit::delete(c.path.clone()));
    let sets = changes
        .iter()
        .filter_map(|c| c.new.clone().map(|v| Edit::set(c.path.clone(), v)));
    deletes.chain(sets).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subtree_and_children() {
        let mut t = ConfigTree::new();
        t.set("/interfaces/ge0/vlan", 100);
        t.set("/interfaces/ge0/admin_up", true);
        t.set("/interfaces/ge1/vlan", 200);
        t.set("/interfacesX/foo", 1);
        assert_eq!(t.subtree("/interfaces").count(), 3);
        assert_eq!(t.children("/interfaces"), vec!["ge0", "ge1"]);
    }

    #[test]
    fn diff_and_inverse_restore() {
        let mut a = ConfigTree::new();
        a.set("/a", 1);
        a.set("/b", "x");
        let mut b = a.clone();
        b.set("/a", 2);
        b.remove("/b");
        b.set("/c", true);
        let d = a.diff(&b);
        assert_eq!(d.len(), 3);
        let mut undo = b.clone();
        undo.apply(&d.iter().map(LeafChange::inverse).collect::<Vec<_>>());
        assert_eq!(undo, a);
        let mut redo = a.clone();
        redo.apply(&edits_between(&a, &b));
        assert_eq!(redo, b);
    }

    #[test]
    fn leaf_value_json_shapes() {
        let e: Edit = serde_json::from_str(r#"{"path":"/x","op":"SET","value":"abc"}"#).unwrap();
        assert_eq!(e.value, Some(LeafValue::Str("abc".into())));
        let e: Edit = serde_json::from_str(r#"{"path":"/x","op":"SET","value":100}"#).unwrap();
        assert_eq!(e.value, Some(LeafValue::Int(100)));
    }
}
