//! Discussion trees: comments joined by reply-to edges, rooted at the
//! initial post.
//!
//! A [`DiscussionGraph`] is validated on construction (single root, no
//! dangling parents, no cycles, unique ids, labels in `0..=4`) and is
//! immutable afterwards. Node indices follow the order comments appear in
//! the thread file; children keep file order as well.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest accepted thread. Attention cost is quadratic in node count.
pub const MAX_NODES: usize = 4096;

/// Highest ordinal label.
pub const MAX_LABEL: u8 = 4;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Comment {
    pub id: String,
    pub parent_id: Option<String>,
    pub text: String,
    pub gold_label: Option<u8>,
    pub author: Option<String>,
}

/// On-disk thread layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreadFile {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub community: Option<String>,
    pub comments: Vec<CommentRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    #[serde(default)]
    pub parent_id: Option<String>,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub author: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Degree {
    pub in_degree: usize,
    pub out_degree: usize,
}

#[derive(Clone, Debug)]
pub struct DiscussionGraph {
    id: String,
    community: Option<String>,
    comments: Vec<Comment>,
    index: HashMap<String, usize>,
    parent: Vec<Option<usize>>,
    children: Vec<Vec<usize>>,
    depth: Vec<usize>,
    root: usize,
}

impl PartialEq for DiscussionGraph {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id && self.community == other.community && self.comments == other.comments
    }
}

/// A graph truncated to the comments at depth `<= horizon`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthSnapshot {
    pub graph: DiscussionGraph,
    pub horizon: usize,
}

/// Parse and validate a thread file.
pub fn parse_thread(bytes: &[u8]) -> Result<DiscussionGraph> {
    let file: ThreadFile =
        serde_json::from_slice(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
    DiscussionGraph::from_thread_file(file)
}

pub fn read_thread(path: &Path) -> Result<DiscussionGraph> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_thread(&bytes).map_err(|e| match e {
        Error::Malformed(m) => Error::Malformed(format!("{}: {m}", path.display())),
        other => other,
    })
}

/// Every `*.json` thread file in `dir` except `manifest.json`, ordered by
/// file name.
pub fn read_thread_dir(dir: &Path) -> Result<Vec<DiscussionGraph>> {
    let entries = std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let is_json = path.extension().is_some_and(|x| x == "json");
        if is_json && path.file_name().is_some_and(|n| n != "manifest.json") {
            paths.push(path);
        }
    }
    paths.sort();
    paths.iter().map(|p| read_thread(p)).collect()
}

impl DiscussionGraph {
    pub fn from_thread_file(file: ThreadFile) -> Result<Self> {
        let mut comments = Vec::with_capacity(file.comments.len());
        for rec in file.comments {
            let gold_label = match rec.label {
                None => None,
                Some(l) if (0..=MAX_LABEL as i64).contains(&l) => Some(l as u8),
                Some(l) => return Err(Error::LabelOutOfRange { id: rec.id, label: l }),
            };
            comments.push(Comment {
                id: rec.id,
                parent_id: rec.parent_id,
                text: rec.text,
                gold_label,
                author: rec.author,
            });
        }
        Self::new(file.id, file.community, comments)
    }

    pub fn new(id: impl Into<String>, community: Option<String>, comments: Vec<Comment>) -> Result<Self> {
        if comments.len() > MAX_NODES {
            return Err(Error::TooLarge(comments.len()));
        }
        let mut index = HashMap::with_capacity(comments.len());
        for (i, c) in comments.iter().enumerate() {
            if c.id.is_empty() {
                return Err(Error::EmptyId);
            }
            if let Some(l) = c.gold_label {
                if l > MAX_LABEL {
                    return Err(Error::LabelOutOfRange {
                        id: c.id.clone(),
                        label: l as i64,
                    });
                }
            }
            if index.insert(c.id.clone(), i).is_some() {
                return Err(Error::DuplicateId(c.id.clone()));
            }
        }

        let mut root = None;
        let mut parent = Vec::with_capacity(comments.len());
        let mut children = vec![Vec::new(); comments.len()];
        for (i, c) in comments.iter().enumerate() {
            match &c.parent_id {
                None => {
                    if let Some(r) = root {
                        let first: &Comment = &comments[r];
                        return Err(Error::MultipleRoots(first.id.clone(), c.id.clone()));
                    }
                    root = Some(i);
                    parent.push(None);
                }
                Some(p) => {
                    let &pi = index.get(p).ok_or_else(|| Error::DanglingParent {
                        id: c.id.clone(),
                        parent: p.clone(),
                    })?;
                    parent.push(Some(pi));
                    children[pi].push(i);
                }
            }
        }
        let root = root.ok_or(Error::NoRoot)?;

        let mut depth = vec![usize::MAX; comments.len()];
        depth[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &c in &children[u] {
                depth[c] = depth[u] + 1;
                queue.push_back(c);
            }
        }
        if let Some(i) = depth.iter().position(|&d| d == usize::MAX) {
            return Err(Error::Cycle(comments[i].id.clone()));
        }

        Ok(Self {
            id: id.into(),
            community,
            comments,
            index,
            parent,
            children,
            depth,
            root,
        })
    }

    pub fn to_thread_file(&self) -> ThreadFile {
        ThreadFile {
            id: self.id.clone(),
            community: self.community.clone(),
            comments: self
                .comments
                .iter()
                .map(|c| CommentRecord {
                    id: c.id.clone(),
                    parent_id: c.parent_id.clone(),
                    text: c.text.clone(),
                    label: c.gold_label.map(i64::from),
                    author: c.author.clone(),
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_thread_file()).expect("thread file serializes")
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn community(&self) -> Option<&str> {
        self.community.as_deref()
    }

    pub fn len(&self) -> usize {
        self.comments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.comments.is_empty()
    }

    pub fn comments(&self) -> &[Comment] {
        &self.comments
    }

    pub fn comment(&self, i: usize) -> &Comment {
        &self.comments[i]
    }

    pub fn root(&self) -> usize {
        self.root
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    fn require(&self, id: &str) -> Result<usize> {
        self.index_of(id).ok_or_else(|| Error::UnknownId(id.to_owned()))
    }

    pub fn parent(&self, i: usize) -> Option<usize> {
        self.parent[i]
    }

    pub fn children(&self, i: usize) -> &[usize] {
        &self.children[i]
    }

    pub fn depth(&self, i: usize) -> usize {
        self.depth[i]
    }

    pub fn depths(&self) -> &[usize] {
        &self.depth
    }

    pub fn max_depth(&self) -> usize {
        self.depth.iter().copied().max().unwrap_or(0)
    }

    pub fn gold_labels(&self) -> Vec<Option<u8>> {
        self.comments.iter().map(|c| c.gold_label).collect()
    }

    /// Parent and children of `i`: the undirected reply adjacency.
    pub fn neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.parent[i].into_iter().chain(self.children[i].iter().copied())
    }

    /// Number of reply edges between two comments, by id.
    pub fn tree_distance(&self, u: &str, v: &str) -> Result<usize> {
        Ok(self.node_distance(self.require(u)?, self.require(v)?))
    }

    /// Number of reply edges between two node indices, via their lowest
    /// common ancestor.
    pub fn node_distance(&self, u: usize, v: usize) -> usize {
        let (mut a, mut b) = (u, v);
        let mut steps = 0;
        while self.depth[a] > self.depth[b] {
            a = self.parent[a].expect("non-root has parent");
            steps += 1;
        }
        while self.depth[b] > self.depth[a] {
            b = self.parent[b].expect("non-root has parent");
            steps += 1;
        }
        while a != b {
            a = self.parent[a].expect("non-root has parent");
            b = self.parent[b].expect("non-root has parent");
            steps += 2;
        }
        steps
    }

    pub fn degrees(&self) -> Vec<Degree> {
        (0..self.len())
            .map(|i| Degree {
                in_degree: usize::from(self.parent[i].is_some()),
                out_degree: self.children[i].len(),
            })
            .collect()
    }

    pub fn snapshot_at_depth(&self, horizon: usize) -> DepthSnapshot {
        let graph = if horizon >= self.max_depth() {
            self.clone()
        } else {
            let kept = self
                .comments
                .iter()
                .zip(&self.depth)
                .filter(|(_, &d)| d <= horizon)
                .map(|(c, _)| c.clone())
                .collect();
            Self::new(self.id.clone(), self.community.clone(), kept)
                .expect("depth truncation of a valid tree is a valid tree")
        };
        DepthSnapshot { graph, horizon }
    }

    /// Pre-order traversal from the root, children in file order.
    pub fn preorder(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.len());
        let mut stack = vec![self.root];
        while let Some(u) = stack.pop() {
            order.push(u);
            stack.extend(self.children[u].iter().rev());
        }
        order
    }
}
