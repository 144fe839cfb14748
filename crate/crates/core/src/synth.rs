//! Synthetic corpora whose trigger labels depend on a token planted in the
//! root, several reply edges away.
//!
//! Each graph is a backbone chain `root -> c1 -> ... -> cD` whose nodes above
//! the last also carry side replies. The root mentions one topic token.
//! Leaves at depth `>= dependence_distance` may become triggers: their text
//! comes from a small set of templates shared by both topics, and each gets
//! one to three hateful replies. A trigger's label is read off the topic and
//! its reply count:
//!
//! | topic     | replies | label                    |
//! |-----------|---------|--------------------------|
//! | `topic_c` | 1       | 3                        |
//! | `topic_c` | 2 or 3  | 4                        |
//! | `topic_b` | any     | 0 or 1 (fixed per text)  |
//!
//! Hateful replies are labeled 2 and every other node 0 or 1 by template.
//! The reply structure is the same under both topics, so nothing within
//! `dependence_distance - 1` hops of a trigger reveals the topic.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::FORMAT_VERSION;
use crate::discussion::{parse_thread, Comment, DiscussionGraph};
use crate::error::{Error, Result};

pub const TOPIC_BENIGN: &str = "topic_b";
pub const TOPIC_CONTENTIOUS: &str = "topic_c";
pub const HATEFUL_LABEL: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Topic {
    #[serde(rename = "topic_b")]
    Benign,
    #[serde(rename = "topic_c")]
    Contentious,
}

impl Topic {
    pub fn token(self) -> &'static str {
        match self {
            Topic::Benign => TOPIC_BENIGN,
            Topic::Contentious => TOPIC_CONTENTIOUS,
        }
    }
}

/// Template text. A filler or trigger template at index `i` carries the
/// benign label `i % 2`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub fillers: Vec<String>,
    pub triggers: Vec<String>,
    pub hateful: Vec<String>,
}

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| (*s).to_owned()).collect()
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self {
            fillers: strings(&[
                "thanks for sharing this",
                "i had no idea about that",
                "what time does it start",
                "that looks great honestly",
                "can someone explain the rules",
                "i agree with the first point",
                "source for this claim please",
                "the weather was perfect today",
                "this made my morning",
                "where did you find that",
                "good luck with the move",
                "i will try this tonight",
            ]),
            triggers: strings(&[
                "well we all know who is behind this",
                "same thing happens every time with them",
                "you know exactly what they are like",
                "this is what happens when they get in",
                "funny how it is always the same group",
                "nobody is surprised by this crowd anymore",
            ]),
            hateful: strings(&[
                "get lost you worthless clowns",
                "people like that are a disease",
                "they should all be thrown out",
                "f*ck every last one of them",
                "disgusting vermin the lot of them",
                "send them all back where they crawled from",
            ]),
        }
    }
}

impl Vocabulary {
    fn validate(&self) -> Result<()> {
        if self.fillers.is_empty() || self.triggers.is_empty() || self.hateful.is_empty() {
            return Err(Error::InvalidConfig("vocabulary lists must be nonempty".into()));
        }
        let mut seen = HashMap::new();
        for (kind, list) in [("filler", &self.fillers), ("trigger", &self.triggers), ("hateful", &self.hateful)] {
            for t in list {
                if t.split_whitespace().any(|w| w == TOPIC_BENIGN || w == TOPIC_CONTENTIOUS) {
                    return Err(Error::InvalidConfig(format!("{kind} template {t:?} contains a topic token")));
                }
                if let Some(other) = seen.insert(t.as_str(), kind) {
                    return Err(Error::InvalidConfig(format!("template {t:?} is both {other} and {kind}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenSpec {
    pub seed: u64,
    pub num_graphs: usize,
    /// Inclusive range of backbone lengths.
    pub depth_range: [usize; 2],
    /// Inclusive range of replies per backbone node (the backbone child
    /// included).
    pub branching_range: [usize; 2],
    pub trigger_rate: f64,
    pub dependence_distance: usize,
    pub vocabulary: Vocabulary,
}

impl Default for GenSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            num_graphs: 100,
            depth_range: [4, 6],
            branching_range: [2, 4],
            trigger_rate: 0.25,
            dependence_distance: 3,
            vocabulary: Vocabulary::default(),
        }
    }
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let [dmin, dmax] = self.depth_range;
        let [bmin, bmax] = self.branching_range;
        if self.num_graphs == 0 {
            return Err(Error::InvalidConfig("num_graphs must be positive".into()));
        }
        if dmin < 4 || dmin > dmax {
            return Err(Error::InvalidConfig(format!("depth_range {:?} needs 4 <= min <= max", self.depth_range)));
        }
        if bmin < 1 || bmin > bmax {
            return Err(Error::InvalidConfig(format!(
                "branching_range {:?} needs 1 <= min <= max",
                self.branching_range
            )));
        }
        if !(0.0..1.0).contains(&self.trigger_rate) {
            return Err(Error::InvalidConfig(format!("trigger_rate {} outside [0, 1)", self.trigger_rate)));
        }
        if self.dependence_distance < 3 {
            return Err(Error::InvalidConfig("dependence_distance must be >= 3".into()));
        }
        if self.dependence_distance > dmin {
            return Err(Error::Unsatisfiable(format!(
                "dependence_distance {} exceeds the shallowest backbone {dmin}",
                self.dependence_distance
            )));
        }
        self.vocabulary.validate()
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(json))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub graph_id: String,
    pub topic: Topic,
    pub trigger_ids: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub spec_hash: String,
    pub spec: GenSpec,
    pub graphs: Vec<ManifestEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub graphs: Vec<DiscussionGraph>,
    pub manifest: Manifest,
}

impl SyntheticCorpus {
    pub fn entry(&self, graph_id: &str) -> Option<&ManifestEntry> {
        self.manifest.graphs.iter().find(|e| e.graph_id == graph_id)
    }

    /// The first `n` graphs and the rest, each with its share of the
    /// manifest.
    pub fn split_at(&self, n: usize) -> (SyntheticCorpus, SyntheticCorpus) {
        let n = n.min(self.graphs.len());
        let part = |range: std::ops::Range<usize>| SyntheticCorpus {
            graphs: self.graphs[range.clone()].to_vec(),
            manifest: Manifest {
                graphs: self.manifest.graphs[range].to_vec(),
                ..self.manifest.clone()
            },
        };
        (part(0..n), part(n..self.graphs.len()))
    }

    /// Writes `{graph_id}.json` per graph plus `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        for g in &self.graphs {
            let path = dir.join(format!("{}.json", g.id()));
            std::fs::write(&path, g.to_json()).map_err(|e| Error::io(&path, e))?;
        }
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(Error::FormatVersion(manifest.format_version));
        }
        if manifest.spec.hash() != manifest.spec_hash {
            return Err(Error::ManifestMismatch("spec_hash does not match the recorded spec".into()));
        }
        let graphs = manifest
            .graphs
            .iter()
            .map(|e| {
                let path = dir.join(format!("{}.json", e.graph_id));
                let bytes = std::fs::read(&path).map_err(|err| Error::io(&path, err))?;
                let g = parse_thread(&bytes)?;
                if g.id() != e.graph_id {
                    return Err(Error::ManifestMismatch(e.graph_id.clone()));
                }
                Ok(g)
            })
            .collect::<Result<_>>()?;
        Ok(Self { graphs, manifest })
    }
}

struct Builder<'a> {
    vocab: &'a Vocabulary,
    comments: Vec<Comment>,
}

impl Builder<'_> {
    fn push(&mut self, parent: Option<usize>, text: String, label: u8) -> usize {
        let i = self.comments.len();
        self.comments.push(Comment {
            id: format!("n{i}"),
            parent_id: parent.map(|p| format!("n{p}")),
            text,
            gold_label: Some(label),
            author: None,
        });
        i
    }

    fn filler(&mut self, parent: usize, rng: &mut impl Rng) -> usize {
        let k = rng.gen_range(0..self.vocab.fillers.len());
        self.push(Some(parent), self.vocab.fillers[k].clone(), (k % 2) as u8)
    }
}

fn generate_graph(spec: &GenSpec, index: usize, rng: &mut ChaCha8Rng) -> (DiscussionGraph, ManifestEntry) {
    let vocab = &spec.vocabulary;
    let topic = if rng.gen_bool(0.5) { Topic::Contentious } else { Topic::Benign };
    let mut b = Builder { vocab, comments: Vec::new() };

    let k = rng.gen_range(0..vocab.fillers.len());
    let mut words: Vec<&str> = vocab.fillers[k].split_whitespace().collect();
    let at = rng.gen_range(0..=words.len());
    words.insert(at, topic.token());
    let root = b.push(None, words.join(" "), (k % 2) as u8);

    let backbone = rng.gen_range(spec.depth_range[0]..=spec.depth_range[1]);
    let mut leaves = Vec::new();
    let mut node = root;
    for depth in 0..backbone {
        let replies = rng.gen_range(spec.branching_range[0]..=spec.branching_range[1]);
        let next = b.filler(node, rng);
        for _ in 1..replies {
            leaves.push((b.filler(node, rng), depth + 1));
        }
        node = next;
    }
    leaves.push((node, backbone));
    leaves.sort_unstable();

    let mut trigger_ids = Vec::new();
    for (leaf, depth) in leaves {
        if depth < spec.dependence_distance || !rng.gen_bool(spec.trigger_rate) {
            continue;
        }
        let t = rng.gen_range(0..vocab.triggers.len());
        let replies = rng.gen_range(1..=3usize);
        let label = match topic {
            Topic::Contentious if replies < 2 => 3,
            Topic::Contentious => 4,
            Topic::Benign => (t % 2) as u8,
        };
        let c = &mut b.comments[leaf];
        c.text = vocab.triggers[t].clone();
        c.gold_label = Some(label);
        trigger_ids.push(c.id.clone());
        for _ in 0..replies {
            let h = vocab.hateful.choose(rng).expect("nonempty").clone();
            b.push(Some(leaf), h, HATEFUL_LABEL);
        }
    }

    let graph_id = format!("g{index:05}");
    let g = DiscussionGraph::new(graph_id.clone(), None, b.comments).expect("generated tree is valid");
    (
        g,
        ManifestEntry {
            graph_id,
            topic,
            trigger_ids,
        },
    )
}

/// Generates `spec.num_graphs` graphs from one seeded stream.
pub fn generate(spec: &GenSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (graphs, entries) = (0..spec.num_graphs).map(|i| generate_graph(spec, i, &mut rng)).unzip();
    Ok(SyntheticCorpus {
        graphs,
        manifest: Manifest {
            format_version: FORMAT_VERSION,
            spec_hash: spec.hash(),
            spec: spec.clone(),
            graphs: entries,
        },
    })
}

fn template_label(list: &[String], text: &str) -> Option<u8> {
    list.iter().position(|t| t == text).map(|k| (k % 2) as u8)
}

/// Recomputes the gold label of `node` from the text, the reply structure
/// and the graph's manifest entry.
pub fn oracle_label(g: &DiscussionGraph, node: usize, entry: &ManifestEntry, vocab: &Vocabulary) -> Result<u8> {
    let mismatch = |why: &str| Error::ManifestMismatch(format!("{}: node {} {why}", g.id(), g.comment(node).id));
    if entry.graph_id != g.id() {
        return Err(Error::ManifestMismatch(format!("entry {} given graph {}", entry.graph_id, g.id())));
    }
    let c = g.comment(node);
    if entry.trigger_ids.contains(&c.id) {
        let t = template_label(&vocab.triggers, &c.text).ok_or_else(|| mismatch("is not a trigger template"))?;
        let hateful = g
            .children(node)
            .iter()
            .filter(|&&k| vocab.hateful.contains(&g.comment(k).text))
            .count();
        return Ok(match entry.topic {
            Topic::Contentious if hateful < 2 => 3,
            Topic::Contentious => 4,
            Topic::Benign => t,
        });
    }
    if vocab.hateful.contains(&c.text) {
        return Ok(HATEFUL_LABEL);
    }
    if node == g.root() {
        let stripped: Vec<&str> = c.text.split_whitespace().filter(|&w| w != entry.topic.token()).collect();
        return template_label(&vocab.fillers, &stripped.join(" ")).ok_or_else(|| mismatch("is not a topic root"));
    }
    template_label(&vocab.fillers, &c.text).ok_or_else(|| mismatch("is not a filler template"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AuditViolation {
    /// (a) a trigger text seen under one topic only.
    SingleTopic { text: String, topic: Topic },
    /// (b) a trigger text whose labels are too concentrated.
    Unbalanced { text: String, distinct_labels: usize, max_share: f64 },
    /// (c) a trigger closer to the root than the dependence distance.
    TooClose { graph_id: String, node_id: String, distance: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub triggers: usize,
    pub trigger_texts: usize,
    /// Largest single-label share within any one trigger text.
    pub max_class_share: f64,
    /// Accuracy on trigger nodes of the best rule that sees only the text:
    /// each text predicts its most frequent label.
    pub text_only_ceiling: f64,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

const MAX_CLASS_SHARE: f64 = 0.6;

pub fn ambiguity_audit(corpus: &SyntheticCorpus) -> Result<AuditReport> {
    audit_graphs(&corpus.graphs, &corpus.manifest.graphs, corpus.manifest.spec.dependence_distance)
}

/// Audits `graphs` against their manifest entries (same order).
pub fn audit_graphs(graphs: &[DiscussionGraph], entries: &[ManifestEntry], dependence_distance: usize) -> Result<AuditReport> {
    if graphs.len() != entries.len() {
        return Err(Error::ManifestMismatch(format!("{} graphs, {} manifest entries", graphs.len(), entries.len())));
    }
    let mut topics: BTreeMap<&str, [bool; 2]> = BTreeMap::new();
    let mut labels: BTreeMap<&str, [usize; 5]> = BTreeMap::new();
    let mut violations = Vec::new();
    let mut triggers = 0;
    for (g, e) in graphs.iter().zip(entries) {
        if g.id() != e.graph_id {
            return Err(Error::ManifestMismatch(format!("entry {} given graph {}", e.graph_id, g.id())));
        }
        for id in &e.trigger_ids {
            let i = g.index_of(id).ok_or_else(|| Error::ManifestMismatch(format!("{}: no node {id}", g.id())))?;
            let c = g.comment(i);
            let label = c.gold_label.ok_or_else(|| Error::MissingLabel(id.clone()))?;
            triggers += 1;
            topics.entry(&c.text).or_default()[usize::from(e.topic == Topic::Contentious)] = true;
            labels.entry(&c.text).or_default()[label as usize] += 1;
            let distance = g.depth(i);
            if distance < dependence_distance {
                violations.push(AuditViolation::TooClose {
                    graph_id: g.id().to_owned(),
                    node_id: id.clone(),
                    distance,
                });
            }
        }
    }
    for (text, seen) in &topics {
        if !(seen[0] && seen[1]) {
            violations.push(AuditViolation::SingleTopic {
                text: (*text).to_owned(),
                topic: if seen[1] { Topic::Contentious } else { Topic::Benign },
            });
        }
    }
    let mut max_class_share: f64 = 0.0;
    let mut best_total = 0;
    for (text, counts) in &labels {
        let total: usize = counts.iter().sum();
        let best = *counts.iter().max().expect("five classes");
        let share = best as f64 / total as f64;
        let distinct = counts.iter().filter(|&&n| n > 0).count();
        max_class_share = max_class_share.max(share);
        best_total += best;
        if distinct < 2 || share > MAX_CLASS_SHARE {
            violations.push(AuditViolation::Unbalanced {
                text: (*text).to_owned(),
                distinct_labels: distinct,
                max_share: share,
            });
        }
    }
    Ok(AuditReport {
        triggers,
        trigger_texts: labels.len(),
        max_class_share,
        text_only_ceiling: if triggers > 0 { best_total as f64 / triggers as f64 } else { 0.0 },
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validation() {
        let ok = GenSpec::default();
        assert!(ok.validate().is_ok());
        let deep = GenSpec { dependence_distance: 7, ..ok.clone() };
        assert!(matches!(deep.validate(), Err(Error::Unsatisfiable(_))));
        assert!(GenSpec { depth_range: [3, 6], ..ok.clone() }.validate().is_err());
        assert!(GenSpec { trigger_rate: 1.0, ..ok.clone() }.validate().is_err());
        let mut v = Vocabulary::default();
        v.triggers.push("i love topic_c".into());
        assert!(GenSpec { vocabulary: v, ..ok }.validate().is_err());
    }

    #[test]
    fn hash_tracks_spec() {
        let a = GenSpec::default();
        let b = GenSpec { seed: 1, ..a.clone() };
        assert_eq!(a.hash(), GenSpec::default().hash());
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
    }
}
