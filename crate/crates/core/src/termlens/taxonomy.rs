//! Hypernym taxonomy loaded from a sectioned tab-separated text file.
//!
//! ```text
//! # comment
//! [synsets]
//! dog.n.01
//! [hypernyms]
//! dog.n.01<TAB>canine.n.02
//! [lemmas]
//! dog<TAB>dog.n.01,frump.n.01
//! ```
//!
//! Lines before any section header are read as hypernym edges. Without a
//! `[synsets]` section the node set is inferred from the edges.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Taxonomy {
    nodes: BTreeSet<String>,
    parents: BTreeMap<String, Vec<String>>,
    lemmas: HashMap<String, Vec<String>>,
}

#[derive(Clone, Copy, PartialEq)]
enum Section {
    Synsets,
    Hypernyms,
    Lemmas,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::TaxonomyParse {
        line,
        message: message.into(),
    }
}

fn split_pair(line: &str, n: usize) -> Result<(&str, &str)> {
    let mut parts = line.split('\t');
    match (parts.next(), parts.next(), parts.next()) {
        (Some(a), Some(b), None) if !a.trim().is_empty() && !b.trim().is_empty() => Ok((a.trim(), b.trim())),
        _ => Err(parse_err(n, format!("expected two tab-separated fields, got {line:?}"))),
    }
}

impl Taxonomy {
    pub fn parse(text: &str) -> Result<Self> {
        let mut section = Section::Hypernyms;
        let mut declared: Option<BTreeSet<String>> = None;
        let mut edges: Vec<(usize, String, String)> = Vec::new();
        let mut lemmas: Vec<(usize, String, Vec<String>)> = Vec::new();

        for (idx, raw) in text.lines().enumerate() {
            let n = idx + 1;
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            match line.trim() {
                "[synsets]" => {
                    section = Section::Synsets;
                    declared.get_or_insert_with(BTreeSet::new);
                    continue;
                }
                "[hypernyms]" => {
                    section = Section::Hypernyms;
                    continue;
                }
                "[lemmas]" => {
                    section = Section::Lemmas;
                    continue;
                }
                s if s.starts_with('[') => return Err(parse_err(n, format!("unknown section {s}"))),
                _ => {}
            }
            match section {
                Section::Synsets => {
                    let id = line.trim();
                    if id.contains('\t') {
                        return Err(parse_err(n, "synset lines hold a single id"));
                    }
                    declared.get_or_insert_with(BTreeSet::new).insert(id.to_string());
                }
                Section::Hypernyms => {
                    let (c, p) = split_pair(line, n)?;
                    edges.push((n, c.to_string(), p.to_string()));
                }
                Section::Lemmas => {
                    let (lemma, senses) = split_pair(line, n)?;
                    let senses: Vec<String> = senses.split(',').map(|s| s.trim().to_string()).collect();
                    if senses.iter().any(String::is_empty) {
                        return Err(parse_err(n, "empty synset in sense list"));
                    }
                    lemmas.push((n, lemma.to_lowercase(), senses));
                }
            }
        }

        let nodes = match declared {
            Some(d) => {
                for (_, c, p) in &edges {
                    for id in [c, p] {
                        if !d.contains(id) {
                            return Err(Error::Dangling(id.clone()));
                        }
                    }
                }
                d
            }
            None => edges.iter().flat_map(|(_, c, p)| [c.clone(), p.clone()]).collect(),
        };

        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (_, c, p) in edges {
            let ps = parents.entry(c).or_default();
            if !ps.contains(&p) {
                ps.push(p);
            }
        }

        let mut lemma_index: HashMap<String, Vec<String>> = HashMap::new();
        for (n, lemma, senses) in lemmas {
            if let Some(s) = senses.iter().find(|s| !nodes.contains(*s)) {
                return Err(Error::Dangling(s.clone()));
            }
            if lemma_index.insert(lemma.clone(), senses).is_some() {
                return Err(parse_err(n, format!("lemma {lemma:?} listed twice")));
            }
        }

        let tax = Taxonomy {
            nodes,
            parents,
            lemmas: lemma_index,
        };
        tax.check_acyclic()?;
        Ok(tax)
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 = unvisited, 1 = on stack, 2 = done. Iterative DFS.
        let mut state: HashMap<&str, u8> = HashMap::new();
        for start in &self.nodes {
            if state.get(start.as_str()).copied().unwrap_or(0) != 0 {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start, 0)];
            state.insert(start, 1);
            while let Some((node, next)) = stack.pop() {
                let ps = self.parents_of(node);
                if next < ps.len() {
                    stack.push((node, next + 1));
                    let p = ps[next].as_str();
                    match state.get(p).copied().unwrap_or(0) {
                        0 => {
                            state.insert(p, 1);
                            stack.push((p, 0));
                        }
                        1 => return Err(Error::Cycle(p.to_string())),
                        _ => {}
                    }
                } else {
                    state.insert(node, 2);
                }
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, synset: &str) -> bool {
        self.nodes.contains(synset)
    }

    pub fn edge_count(&self) -> usize {
        self.parents.values().map(Vec::len).sum()
    }

    pub fn parents_of(&self, synset: &str) -> &[String] {
        self.parents.get(synset).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Senses in priority order.
    pub fn senses(&self, lemma: &str) -> Option<&[String]> {
        self.lemmas.get(lemma).map(Vec::as_slice)
    }

    pub fn has_lemma(&self, lemma: &str) -> bool {
        self.lemmas.contains_key(lemma)
    }

    pub fn first_sense(&self, lemma: &str) -> Option<&str> {
        self.senses(lemma).and_then(|s| s.first()).map(String::as_str)
    }

    /// Breadth-first hypernym closure including `synset` itself at depth 0.
    /// Each node appears once, at its minimum depth.
    pub fn closure(&self, synset: &str) -> Vec<(String, usize)> {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut out = Vec::new();
        let mut queue = VecDeque::from([(synset, 0usize)]);
        seen.insert(synset);
        while let Some((node, depth)) = queue.pop_front() {
            out.push((node.to_string(), depth));
            for p in self.parents_of(node) {
                if seen.insert(p) {
                    queue.push_back((p, depth + 1));
                }
            }
        }
        out
    }
}

/// Named anchors that lemmas are grouped under.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupercategorySet {
    members: Vec<(String, String)>,
}

pub const DEFAULT_SUPERCATEGORIES: [&str; 7] = ["person", "conveyance", "furniture", "animal", "container", "food", "device"];

impl SupercategorySet {
    pub fn new(members: Vec<(String, String)>, taxonomy: &Taxonomy) -> Result<Self> {
        let mut names = BTreeSet::new();
        for (name, anchor) in &members {
            if !names.insert(name.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate supercategory {name:?}")));
            }
            if !taxonomy.contains(anchor) {
                return Err(Error::Dangling(anchor.clone()));
            }
        }
        Ok(SupercategorySet { members })
    }

    /// Anchor each name at the first sense of the same lemma.
    pub fn from_names<S: AsRef<str>>(names: &[S], taxonomy: &Taxonomy) -> Result<Self> {
        let members = names
            .iter()
            .map(|n| {
                let n = n.as_ref();
                taxonomy
                    .first_sense(n)
                    .map(|s| (n.to_string(), s.to_string()))
                    .ok_or_else(|| Error::MissingId(format!("supercategory lemma {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, taxonomy)
    }

    pub fn members(&self) -> &[(String, String)] {
        &self.members
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(|(n, _)| n.as_str())
    }
}

/// Supercategory for a lemma's first sense: the anchor reached at minimum
/// hypernym depth, ties broken by set order.
pub fn supercategory_of<'s>(lemma: &str, taxonomy: &Taxonomy, supercats: &'s SupercategorySet) -> Option<&'s str> {
    let sense = taxonomy.first_sense(lemma)?;
    let closure = taxonomy.closure(sense);
    let depth: HashMap<&str, usize> = closure.iter().map(|(s, d)| (s.as_str(), *d)).collect();
    supercats
        .members
        .iter()
        .filter_map(|(name, anchor)| depth.get(anchor.as_str()).map(|d| (*d, name.as_str())))
        .min_by_key(|(d, _)| *d)
        .map(|(_, name)| name)
}
