//! Hash-consed information trees.
//!
//! A tree is either the leaf `e` or a node `(L, R, a)`: what the observer
//! knew before, what the actor knew before, and the action performed.
//! Nodes are interned, so two ids are equal exactly when the trees are.

use rustc_hash::FxHashMap;

use crate::model::{ActionId, Signature};

/// Interned tree handle. Only meaningful together with its [`TreeStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TreeId(pub u32);

/// An explicit (boxed) tree, for interchange and for checking the
/// interning against structural equality.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Tree {
    Leaf,
    Node(Box<Tree>, Box<Tree>, ActionId),
}

/// The leaf is always id 0.
pub const LEAF: TreeId = TreeId(0);

/// Append-only interning table for trees.
#[derive(Clone, Debug)]
pub struct TreeStore {
    nodes: Vec<(TreeId, TreeId, ActionId)>,
    index: FxHashMap<(TreeId, TreeId, ActionId), TreeId>,
}

impl Default for TreeStore {
    fn default() -> Self {
        Self::new()
    }
}

impl TreeStore {
    pub fn new() -> Self {
        TreeStore {
            // Slot 0 stands for the leaf and is never returned by `node`.
            nodes: vec![(LEAF, LEAF, ActionId(u16::MAX))],
            index: FxHashMap::default(),
        }
    }

    /// The canonical id of `(left, right, action)`.
    pub fn node(&mut self, left: TreeId, right: TreeId, action: ActionId) -> TreeId {
        let key = (left, right, action);
        if let Some(id) = self.index.get(&key) {
            return *id;
        }
        let id = TreeId(self.nodes.len() as u32);
        self.nodes.push(key);
        self.index.insert(key, id);
        id
    }

    /// Children and action of a node; `None` for the leaf.
    pub fn get(&self, id: TreeId) -> Option<(TreeId, TreeId, ActionId)> {
        (id != LEAF).then(|| self.nodes[id.0 as usize])
    }

    /// Number of distinct trees interned so far, including the leaf.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Interns an explicit tree.
    pub fn intern(&mut self, tree: &Tree) -> TreeId {
        match tree {
            Tree::Leaf => LEAF,
            Tree::Node(l, r, a) => {
                let (l, r) = (self.intern(l), self.intern(r));
                self.node(l, r, *a)
            }
        }
    }

    /// The explicit tree behind an id.
    pub fn expand(&self, id: TreeId) -> Tree {
        match self.get(id) {
            None => Tree::Leaf,
            Some((l, r, a)) => Tree::Node(Box::new(self.expand(l)), Box::new(self.expand(r)), a),
        }
    }

    /// Canonical text: `e` for the leaf, `(L,R,a)` for nodes.
    pub fn render(&self, id: TreeId, sig: &Signature) -> String {
        let mut out = String::new();
        self.render_into(id, sig, &mut out);
        out
    }

    fn render_into(&self, id: TreeId, sig: &Signature, out: &mut String) {
        match self.get(id) {
            None => out.push('e'),
            Some((l, r, a)) => {
                out.push('(');
                self.render_into(l, sig, out);
                out.push(',');
                self.render_into(r, sig, out);
                out.push(',');
                out.push_str(sig.action_name(a));
                out.push(')');
            }
        }
    }
}
