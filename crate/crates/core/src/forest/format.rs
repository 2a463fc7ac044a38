//! Binary model format. All integers and floats are little-endian.
//!
//! ```text
//! magic        4 bytes  "HWKF"
//! version      u32      FORMAT_VERSION
//! task         u8       0 = regression, 1 = classification
//! n_classes    u32      0 for regression
//! n_features   u32
//! per feature: u32 byte length, UTF-8 name
//! n_trees      u32      >= 1
//! per tree:    u32 node count (>= 1), then per node 21 bytes:
//!              kind u8 (0 leaf, 1 split), feature u32, value f64
//!              (leaf value or split threshold), left u32, right u32
//! ```
//!
//! Leaves store zero in `feature`, `left` and `right`. Child indices must be
//! greater than their parent's index. Trailing bytes are rejected.

use crate::error::{Error, Result};
use crate::forest::tree::{Node, Tree};
use crate::forest::{ForestModel, Task};

pub const MAGIC: &[u8; 4] = b"HWKF";
pub const FORMAT_VERSION: u32 = 1;

pub(crate) fn encode(model: &ForestModel, out: &mut Vec<u8>) {
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let (task, classes) = match model.task {
        Task::Regression => (0u8, 0u32),
        Task::Classification { n_classes } => (1u8, n_classes as u32),
    };
    out.push(task);
    out.extend_from_slice(&classes.to_le_bytes());
    out.extend_from_slice(&(model.feature_names.len() as u32).to_le_bytes());
    for name in &model.feature_names {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
    }
    out.extend_from_slice(&(model.trees.len() as u32).to_le_bytes());
    for tree in &model.trees {
        out.extend_from_slice(&(tree.nodes.len() as u32).to_le_bytes());
        for node in &tree.nodes {
            let (kind, feature, value, left, right) = match *node {
                Node::Leaf { value } => (0u8, 0, value, 0, 0),
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => (1u8, feature, threshold, left, right),
            };
            out.push(kind);
            out.extend_from_slice(&(feature as u32).to_le_bytes());
            out.extend_from_slice(&value.to_le_bytes());
            out.extend_from_slice(&(left as u32).to_le_bytes());
            out.extend_from_slice(&(right as u32).to_le_bytes());
        }
    }
}

pub(crate) struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    pub fn new(bytes: &'a [u8]) -> Self {
        Reader { bytes, pos: 0 }
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptPayload(format!("truncated at byte {}", self.pos)))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn finished(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

pub(crate) fn decode(r: &mut Reader<'_>) -> Result<ForestModel> {
    if r.take(4)? != MAGIC {
        return Err(Error::CorruptPayload("bad magic".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let task = match (r.u8()?, r.u32()?) {
        (0, 0) => Task::Regression,
        (1, n) if n >= 1 => Task::Classification { n_classes: n as usize },
        (t, n) => return Err(Error::CorruptPayload(format!("bad task {t} with {n} classes"))),
    };
    let n_features = r.u32()? as usize;
    let mut feature_names = Vec::with_capacity(n_features.min(1 << 16));
    for _ in 0..n_features {
        let len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| Error::CorruptPayload("feature name is not UTF-8".into()))?;
        feature_names.push(name.to_owned());
    }
    let n_trees = r.u32()? as usize;
    if n_trees == 0 {
        return Err(Error::CorruptPayload("forest has no trees".into()));
    }
    let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
    for t in 0..n_trees {
        let n_nodes = r.u32()? as usize;
        if n_nodes == 0 {
            return Err(Error::CorruptPayload(format!("tree {t} has no nodes")));
        }
        let mut nodes = Vec::with_capacity(n_nodes.min(1 << 20));
        for i in 0..n_nodes {
            let kind = r.u8()?;
            let feature = r.u32()? as usize;
            let value = r.f64()?;
            let left = r.u32()? as usize;
            let right = r.u32()? as usize;
            if !value.is_finite() {
                return Err(Error::CorruptPayload(format!("tree {t} node {i}: non-finite value")));
            }
            let node = match kind {
                0 => Node::Leaf { value },
                1 => {
                    let ok = feature < n_features && left > i && right > i && left < n_nodes && right < n_nodes;
                    if !ok {
                        return Err(Error::CorruptPayload(format!("tree {t} node {i}: bad split")));
                    }
                    Node::Split {
                        feature,
                        threshold: value,
                        left,
                        right,
                    }
                }
                k => return Err(Error::CorruptPayload(format!("tree {t} node {i}: kind {k}"))),
            };
            nodes.push(node);
        }
        trees.push(Tree { nodes });
    }
    Ok(ForestModel {
        task,
        trees,
        feature_names,
    })
}
