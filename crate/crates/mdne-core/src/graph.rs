//! Attributed networks: loading, the canonical on-disk format, and the
//! train/test splits used by the evaluation protocols.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseVec {
    indices: Vec<u32>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn new() -> Self {
        SparseVec::default()
    }

    /// Build from unsorted (index, value) pairs. Zero values are dropped;
    /// duplicate indices are an error.
    pub fn from_pairs(mut pairs: Vec<(u32, f64)>) -> Result<Self> {
        pairs.retain(|(_, v)| *v != 0.0);
        pairs.sort_unstable_by_key(|(i, _)| *i);
        for w in pairs.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidInput(format!(
                    "duplicate sparse index {}",
                    w[0].0
                )));
            }
        }
        Ok(SparseVec {
            indices: pairs.iter().map(|(i, _)| *i).collect(),
            values: pairs.iter().map(|(_, v)| *v).collect(),
        })
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn get(&self, index: u32) -> f64 {
        match self.indices.binary_search(&index) {
            Ok(pos) => self.values[pos],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, f64)> + '_ {
        self.indices.iter().copied().zip(self.values.iter().copied())
    }

    /// Densify into a freshly allocated vector of the given width.
    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for (i, v) in self.iter() {
            out[i as usize] = v;
        }
        out
    }

    fn push(&mut self, index: u32, value: f64) {
        debug_assert!(self.indices.last().map_or(true, |last| *last < index));
        self.indices.push(index);
        self.values.push(value);
    }

    fn remove_indices(&mut self, remove: &[u32]) {
        let mut keep_i = Vec::with_capacity(self.indices.len());
        let mut keep_v = Vec::with_capacity(self.values.len());
        for (i, v) in self.iter() {
            if remove.binary_search(&i).is_err() {
                keep_i.push(i);
                keep_v.push(v);
            }
        }
        self.indices = keep_i;
        self.values = keep_v;
    }
}

/// Counters for lines the loaders had to repair or drop.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub unknown_id_edges_dropped: usize,
    pub self_loops_dropped: usize,
    pub duplicate_edges_collapsed: usize,
}

impl LoadStats {
    pub fn any(&self) -> bool {
        *self != LoadStats::default()
    }
}

/// An undirected graph whose nodes carry sparse attribute vectors and,
/// optionally, a class label.
#[derive(Debug, Clone)]
pub struct AttributedNetwork {
    node_ids: Vec<String>,
    id_index: HashMap<String, usize>,
    attr_count: usize,
    /// Unordered edges (i, j, weight) with i < j and weight > 0.
    edges: Vec<(u32, u32, f64)>,
    /// Symmetric adjacency rows: row i holds (j, weight) for every neighbor.
    adj_rows: Vec<SparseVec>,
    attr_rows: Vec<SparseVec>,
    labels: Option<Vec<u32>>,
    label_names: Vec<String>,
}

impl AttributedNetwork {
    pub fn node_count(&self) -> usize {
        self.node_ids.len()
    }

    pub fn attr_count(&self) -> usize {
        self.attr_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32, f64)] {
        &self.edges
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.id_index.get(id).copied()
    }

    pub fn adjacency_row(&self, i: usize) -> &SparseVec {
        &self.adj_rows[i]
    }

    pub fn attribute_row(&self, i: usize) -> &SparseVec {
        &self.attr_rows[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adj_rows[i].nnz()
    }

    pub fn labels(&self) -> Option<&[u32]> {
        self.labels.as_deref()
    }

    pub fn label_names(&self) -> &[String] {
        &self.label_names
    }

    /// Total number of nonzero attribute values across all nodes.
    pub fn attr_nnz(&self) -> usize {
        self.attr_rows.iter().map(SparseVec::nnz).sum()
    }

    pub fn max_edge_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.2).fold(0.0, f64::max)
    }

    pub fn has_edge(&self, i: u32, j: u32) -> bool {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.adj_rows[a as usize].get(b) != 0.0
    }

    /// Assemble a network from parts, enforcing the structural invariants.
    pub fn from_parts(
        node_ids: Vec<String>,
        attr_count: usize,
        edges: Vec<(u32, u32, f64)>,
        attr_rows: Vec<SparseVec>,
        labels: Option<Vec<u32>>,
        label_names: Vec<String>,
    ) -> Result<Self> {
        let n = node_ids.len();
        if n == 0 {
            return Err(Error::EmptyInput("network has no nodes".into()));
        }
        if attr_rows.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} attribute rows for {n} nodes",
                attr_rows.len()
            )));
        }
        let mut id_index = HashMap::with_capacity(n);
        for (i, id) in node_ids.iter().enumerate() {
            if id_index.insert(id.clone(), i).is_some() {
                return Err(Error::InvalidInput(format!("duplicate node id {id:?}")));
            }
        }
        let mut edges = edges;
        for e in &mut edges {
            if e.0 == e.1 {
                return Err(Error::InvalidInput(format!("self-loop on node {}", e.0)));
            }
            if e.0 > e.1 {
                std::mem::swap(&mut e.0, &mut e.1);
            }
            if e.1 as usize >= n {
                return Err(Error::InvalidInput(format!("edge endpoint {} out of range", e.1)));
            }
            if e.2 <= 0.0 || !e.2.is_finite() {
                return Err(Error::InvalidInput(format!("edge weight {} must be positive", e.2)));
            }
        }
        edges.sort_unstable_by_key(|e| (e.0, e.1));
        for w in edges.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::InvalidInput(format!(
                    "duplicate edge ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }
        for row in &attr_rows {
            if let Some(last) = row.indices.last() {
                if *last as usize >= attr_count {
                    return Err(Error::InvalidInput(format!(
                        "attribute index {last} out of range (m = {attr_count})"
                    )));
                }
            }
        }
        if let Some(ref l) = labels {
            if l.len() != n {
                return Err(Error::InvalidInput(format!("{} labels for {n} nodes", l.len())));
            }
        }
        let adj_rows = build_adjacency_rows(n, &edges);
        Ok(AttributedNetwork {
            node_ids,
            id_index,
            attr_count,
            edges,
            adj_rows,
            attr_rows,
            labels,
            label_names,
        })
    }

    /// Copy of this network with the given edges removed.
    fn without_edges(&self, remove: &[(u32, u32)]) -> AttributedNetwork {
        let mut removed: Vec<(u32, u32)> = remove.to_vec();
        removed.sort_unstable();
        let edges: Vec<(u32, u32, f64)> = self
            .edges
            .iter()
            .filter(|(i, j, _)| removed.binary_search(&(*i, *j)).is_err())
            .copied()
            .collect();
        let adj_rows = build_adjacency_rows(self.node_count(), &edges);
        AttributedNetwork {
            node_ids: self.node_ids.clone(),
            id_index: self.id_index.clone(),
            attr_count: self.attr_count,
            edges,
            adj_rows,
            attr_rows: self.attr_rows.clone(),
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
        }
    }

    /// Copy of this network with the given attribute cells zeroed.
    fn without_attr_cells(&self, hidden: &[HiddenCell]) -> AttributedNetwork {
        let mut by_node: HashMap<u32, Vec<u32>> = HashMap::new();
        for cell in hidden {
            by_node.entry(cell.node).or_default().push(cell.attr);
        }
        let mut attr_rows = self.attr_rows.clone();
        for (node, mut attrs) in by_node {
            attrs.sort_unstable();
            attr_rows[node as usize].remove_indices(&attrs);
        }
        AttributedNetwork {
            node_ids: self.node_ids.clone(),
            id_index: self.id_index.clone(),
            attr_count: self.attr_count,
            edges: self.edges.clone(),
            adj_rows: self.adj_rows.clone(),
            attr_rows,
            labels: self.labels.clone(),
            label_names: self.label_names.clone(),
        }
    }
}

fn build_adjacency_rows(n: usize, edges: &[(u32, u32, f64)]) -> Vec<SparseVec> {
    let mut pairs: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, j, w) in edges {
        pairs[*i as usize].push((*j, *w));
        pairs[*j as usize].push((*i, *w));
    }
    pairs
        .into_iter()
        .map(|mut p| {
            p.sort_unstable_by_key(|(j, _)| *j);
            let mut row = SparseVec::new();
            for (j, w) in p {
                row.push(j, w);
            }
            row
        })
        .collect()
}

fn open_lines(path: &Path) -> Result<impl Iterator<Item = (usize, std::io::Result<String>)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(BufReader::new(file).lines().enumerate())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line: line + 1,
        msg: msg.into(),
    }
}

/// Load the citation-network text format: a `.content` file with one
/// `<id> <bit>×m <label>` line per node and a `.cites` file with one
/// `<cited> <citing>` pair per line. Citations are symmetrized into
/// unweighted undirected edges; duplicates collapse, self-citations and
/// pairs naming unknown ids are dropped and counted.
pub fn load_cora_format(
    content_path: &Path,
    cites_path: &Path,
) -> Result<(AttributedNetwork, LoadStats)> {
    let mut node_ids = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut attr_rows = Vec::new();
    let mut raw_labels = Vec::new();
    let mut attr_count: Option<usize> = None;

    for (lineno, line) in open_lines(content_path)? {
        let line = line.map_err(|e| Error::io(content_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() < 3 {
            return Err(parse_err(
                content_path,
                lineno,
                format!("expected `<id> <bits...> <label>`, got {} fields", fields.len()),
            ));
        }
        let m = fields.len() - 2;
        match attr_count {
            None => attr_count = Some(m),
            Some(expect) if expect != m => {
                return Err(parse_err(
                    content_path,
                    lineno,
                    format!("expected {expect} attribute columns, got {m}"),
                ));
            }
            _ => {}
        }
        let id = fields[0].to_string();
        if id_index.insert(id.clone(), node_ids.len()).is_some() {
            return Err(parse_err(content_path, lineno, format!("duplicate node id {id:?}")));
        }
        let mut row = SparseVec::new();
        for (k, tok) in fields[1..=m].iter().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| parse_err(content_path, lineno, format!("bad attribute value {tok:?}")))?;
            if v != 0.0 {
                row.push(k as u32, 1.0);
            }
        }
        node_ids.push(id);
        attr_rows.push(row);
        raw_labels.push(fields[m + 1].to_string());
    }
    if node_ids.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no nodes", content_path.display())));
    }

    let mut label_names: Vec<String> = raw_labels.clone();
    label_names.sort();
    label_names.dedup();
    let label_index: HashMap<&String, u32> = label_names
        .iter()
        .enumerate()
        .map(|(i, name)| (name, i as u32))
        .collect();
    let labels: Vec<u32> = raw_labels.iter().map(|l| label_index[l]).collect();

    let mut stats = LoadStats::default();
    let mut seen = std::collections::HashSet::new();
    let mut edges = Vec::new();
    for (lineno, line) in open_lines(cites_path)? {
        let line = line.map_err(|e| Error::io(cites_path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(
                cites_path,
                lineno,
                format!("expected `<cited> <citing>`, got {} fields", fields.len()),
            ));
        }
        let (Some(&a), Some(&b)) = (id_index.get(fields[0]), id_index.get(fields[1])) else {
            stats.unknown_id_edges_dropped += 1;
            continue;
        };
        if a == b {
            stats.self_loops_dropped += 1;
            continue;
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        if seen.insert(key) {
            edges.push((key.0, key.1, 1.0));
        } else {
            stats.duplicate_edges_collapsed += 1;
        }
    }

    let m = attr_count.unwrap_or(0);
    let net = AttributedNetwork::from_parts(node_ids, m, edges, attr_rows, Some(labels), label_names)?;
    Ok((net, stats))
}

/// Load the generic pair of files: an edge list (`<src> <dst> [weight]`)
/// and a sparse attribute table (`<id> <k>:<v> ...`), plus an optional
/// label file (`<id> <label>`). Node order is first appearance, attribute
/// table first. With `binarize` on, attribute values are coerced to {0,1}
/// by a nonzero test.
pub fn load_generic(
    edge_path: &Path,
    attr_path: &Path,
    labels_path: Option<&Path>,
    binarize: bool,
) -> Result<(AttributedNetwork, LoadStats)> {
    let mut node_ids: Vec<String> = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let intern = |id: &str, node_ids: &mut Vec<String>, id_index: &mut HashMap<String, usize>| {
        if let Some(&i) = id_index.get(id) {
            i
        } else {
            let i = node_ids.len();
            node_ids.push(id.to_string());
            id_index.insert(id.to_string(), i);
            i
        }
    };

    let mut attr_pairs: Vec<(usize, Vec<(u32, f64)>)> = Vec::new();
    let mut max_attr: Option<u32> = None;
    for (lineno, line) in open_lines(attr_path)? {
        let line = line.map_err(|e| Error::io(attr_path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let id = fields
            .next()
            .ok_or_else(|| parse_err(attr_path, lineno, "missing node id"))?;
        let node = intern(id, &mut node_ids, &mut id_index);
        let mut pairs = Vec::new();
        for tok in fields {
            let (k, v) = tok
                .split_once(':')
                .ok_or_else(|| parse_err(attr_path, lineno, format!("expected `<k>:<v>`, got {tok:?}")))?;
            let k: u32 = k
                .parse()
                .map_err(|_| parse_err(attr_path, lineno, format!("bad attribute index {k:?}")))?;
            let v: f64 = v
                .parse()
                .map_err(|_| parse_err(attr_path, lineno, format!("bad attribute value {v:?}")))?;
            max_attr = Some(max_attr.map_or(k, |m| m.max(k)));
            let v = if binarize {
                if v != 0.0 {
                    1.0
                } else {
                    0.0
                }
            } else {
                v
            };
            pairs.push((k, v));
        }
        attr_pairs.push((node, pairs));
    }

    let mut stats = LoadStats::default();
    let mut seen: HashMap<(u32, u32), f64> = HashMap::new();
    let mut edges = Vec::new();
    for (lineno, line) in open_lines(edge_path)? {
        let line = line.map_err(|e| Error::io(edge_path, e))?;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(parse_err(
                edge_path,
                lineno,
                format!("expected `<src> <dst> [weight]`, got {} fields", fields.len()),
            ));
        }
        let a = intern(fields[0], &mut node_ids, &mut id_index);
        let b = intern(fields[1], &mut node_ids, &mut id_index);
        let w: f64 = match fields.get(2) {
            Some(tok) => tok
                .parse()
                .map_err(|_| parse_err(edge_path, lineno, format!("bad weight {tok:?}")))?,
            None => 1.0,
        };
        if !w.is_finite() || w <= 0.0 {
            return Err(parse_err(edge_path, lineno, format!("weight {w} must be positive")));
        }
        if a == b {
            stats.self_loops_dropped += 1;
            continue;
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        match seen.get(&key) {
            None => {
                seen.insert(key, w);
                edges.push((key.0, key.1, w));
            }
            Some(&prev) if prev == w => stats.duplicate_edges_collapsed += 1,
            Some(&prev) => {
                return Err(parse_err(
                    edge_path,
                    lineno,
                    format!("edge ({}, {}) re-declared with weight {w} (was {prev})", fields[0], fields[1]),
                ));
            }
        }
    }

    let n = node_ids.len();
    if n == 0 {
        return Err(Error::EmptyInput(format!(
            "{} and {}: no nodes",
            edge_path.display(),
            attr_path.display()
        )));
    }
    let m = max_attr.map_or(0, |k| k as usize + 1);
    let mut attr_rows = vec![SparseVec::new(); n];
    for (node, pairs) in attr_pairs {
        attr_rows[node] = SparseVec::from_pairs(pairs)
            .map_err(|e| Error::InvalidInput(format!("node {}: {e}", node_ids[node])))?;
    }

    let (labels, label_names) = match labels_path {
        None => (None, Vec::new()),
        Some(path) => {
            let mut raw: Vec<Option<String>> = vec![None; n];
            for (lineno, line) in open_lines(path)? {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() || line.starts_with('#') {
                    continue;
                }
                let fields: Vec<&str> = line.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(parse_err(path, lineno, "expected `<id> <label>`"));
                }
                let Some(&node) = id_index.get(fields[0]) else {
                    return Err(parse_err(path, lineno, format!("unknown node id {:?}", fields[0])));
                };
                raw[node] = Some(fields[1].to_string());
            }
            let missing = raw.iter().position(|l| l.is_none());
            if let Some(node) = missing {
                return Err(Error::InvalidInput(format!(
                    "node {} has no label in {}",
                    node_ids[node],
                    path.display()
                )));
            }
            let raw: Vec<String> = raw.into_iter().map(Option::unwrap).collect();
            let mut names = raw.clone();
            names.sort();
            names.dedup();
            let index: HashMap<&String, u32> =
                names.iter().enumerate().map(|(i, s)| (s, i as u32)).collect();
            (Some(raw.iter().map(|l| index[l]).collect()), names)
        }
    };

    let net = AttributedNetwork::from_parts(node_ids, m, edges, attr_rows, labels, label_names)?;
    Ok((net, stats))
}

/// Write the canonical sectioned text format.
pub fn save_canonical(net: &AttributedNetwork, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("#mdne-network v1\n[nodes]\n");
    for id in &net.node_ids {
        let _ = writeln!(out, "{id}");
    }
    out.push_str("[edges]\n");
    for (i, j, w) in &net.edges {
        let _ = writeln!(out, "{} {} {}", net.node_ids[*i as usize], net.node_ids[*j as usize], w);
    }
    out.push_str("[attrs]\n");
    let _ = writeln!(out, "#m {}", net.attr_count);
    for (i, row) in net.attr_rows.iter().enumerate() {
        if row.nnz() == 0 {
            continue;
        }
        let _ = write!(out, "{}", net.node_ids[i]);
        for (k, v) in row.iter() {
            let _ = write!(out, " {k}:{v}");
        }
        out.push('\n');
    }
    if let Some(labels) = &net.labels {
        out.push_str("[labels]\n");
        for (i, l) in labels.iter().enumerate() {
            let _ = writeln!(out, "{} {}", net.node_ids[i], net.label_names[*l as usize]);
        }
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Read the canonical sectioned text format back.
pub fn load_canonical(path: &Path) -> Result<AttributedNetwork> {
    #[derive(PartialEq)]
    enum Section {
        Preamble,
        Nodes,
        Edges,
        Attrs,
        Labels,
    }
    let mut section = Section::Preamble;
    let mut node_ids = Vec::new();
    let mut id_index: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    let mut attr_count = 0usize;
    let mut attr_rows_pairs: Vec<(usize, Vec<(u32, f64)>)> = Vec::new();
    let mut raw_labels: Vec<(usize, String)> = Vec::new();

    for (lineno, line) in open_lines(path)? {
        let line = line.map_err(|e| Error::io(path, e))?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        match trimmed {
            "[nodes]" => {
                section = Section::Nodes;
                continue;
            }
            "[edges]" => {
                section = Section::Edges;
                continue;
            }
            "[attrs]" => {
                section = Section::Attrs;
                continue;
            }
            "[labels]" => {
                section = Section::Labels;
                continue;
            }
            _ => {}
        }
        match section {
            Section::Preamble => {
                if !trimmed.starts_with('#') {
                    return Err(parse_err(path, lineno, "expected `#mdne-network v1` header"));
                }
            }
            Section::Nodes => {
                let id = trimmed.to_string();
                if id_index.insert(id.clone(), node_ids.len()).is_some() {
                    return Err(parse_err(path, lineno, format!("duplicate node id {id:?}")));
                }
                node_ids.push(id);
            }
            Section::Edges => {
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                if fields.len() != 3 {
                    return Err(parse_err(path, lineno, "expected `<src> <dst> <weight>`"));
                }
                let a = *id_index
                    .get(fields[0])
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown node id {:?}", fields[0])))?;
                let b = *id_index
                    .get(fields[1])
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown node id {:?}", fields[1])))?;
                let w: f64 = fields[2]
                    .parse()
                    .map_err(|_| parse_err(path, lineno, format!("bad weight {:?}", fields[2])))?;
                edges.push((a as u32, b as u32, w));
            }
            Section::Attrs => {
                if let Some(m) = trimmed.strip_prefix("#m ") {
                    attr_count = m
                        .trim()
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad attribute count {m:?}")))?;
                    continue;
                }
                let mut fields = trimmed.split_whitespace();
                let id = fields.next().unwrap();
                let node = *id_index
                    .get(id)
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown node id {id:?}")))?;
                let mut pairs = Vec::new();
                for tok in fields {
                    let (k, v) = tok
                        .split_once(':')
                        .ok_or_else(|| parse_err(path, lineno, format!("expected `<k>:<v>`, got {tok:?}")))?;
                    let k: u32 = k
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad attribute index {k:?}")))?;
                    let v: f64 = v
                        .parse()
                        .map_err(|_| parse_err(path, lineno, format!("bad attribute value {v:?}")))?;
                    pairs.push((k, v));
                }
                attr_rows_pairs.push((node, pairs));
            }
            Section::Labels => {
                let fields: Vec<&str> = trimmed.split_whitespace().collect();
                if fields.len() != 2 {
                    return Err(parse_err(path, lineno, "expected `<id> <label>`"));
                }
                let node = *id_index
                    .get(fields[0])
                    .ok_or_else(|| parse_err(path, lineno, format!("unknown node id {:?}", fields[0])))?;
                raw_labels.push((node, fields[1].to_string()));
            }
        }
    }

    if node_ids.is_empty() {
        return Err(Error::EmptyInput(format!("{}: no nodes", path.display())));
    }
    let n = node_ids.len();
    let mut attr_rows = vec![SparseVec::new(); n];
    for (node, pairs) in attr_rows_pairs {
        attr_rows[node] = SparseVec::from_pairs(pairs)?;
    }
    let (labels, label_names) = if raw_labels.is_empty() {
        (None, Vec::new())
    } else {
        if raw_labels.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} labels for {n} nodes",
                raw_labels.len()
            )));
        }
        let mut names: Vec<String> = raw_labels.iter().map(|(_, l)| l.clone()).collect();
        names.sort();
        names.dedup();
        let index: HashMap<&String, u32> =
            names.iter().enumerate().map(|(i, s)| (s, i as u32)).collect();
        let mut labels = vec![0u32; n];
        for (node, l) in &raw_labels {
            labels[*node] = index[l];
        }
        (Some(labels), names)
    };
    AttributedNetwork::from_parts(node_ids, attr_count, edges, attr_rows, labels, label_names)
}

/// Link-prediction split: hidden edges are positives, sampled non-edges are
/// negatives, and the train network is the original minus the positives.
#[derive(Debug, Clone)]
pub struct LinkSplit {
    pub train: AttributedNetwork,
    pub positives: Vec<(u32, u32)>,
    pub negatives: Vec<(u32, u32)>,
    pub ratio: f64,
}

/// Attribute-prediction split: hidden attribute cells (with their original
/// values, zeros included) and the train network with those cells zeroed.
#[derive(Debug, Clone)]
pub struct AttributeSplit {
    pub train: AttributedNetwork,
    pub hidden: Vec<HiddenCell>,
    pub ratio: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HiddenCell {
    pub node: u32,
    pub attr: u32,
    pub value: f64,
}

fn check_ratio(ratio: f64) -> Result<()> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("ratio {ratio} must be in (0, 1)")));
    }
    Ok(())
}

/// Hide `round(ratio * edge_count)` edges uniformly at random and sample an
/// equal number of genuinely unconnected node pairs as negatives.
/// Deterministic for a fixed seed. Rejection sampling of negatives is capped
/// at 100 × |positives| attempts.
pub fn split_links(net: &AttributedNetwork, ratio: f64, seed: u64) -> Result<LinkSplit> {
    check_ratio(ratio)?;
    let l = net.edge_count();
    let hide = (ratio * l as f64).round() as usize;
    if hide == 0 {
        return Err(Error::InvalidInput(format!(
            "ratio {ratio} hides no edges of {l}"
        )));
    }
    if hide >= l {
        return Err(Error::InvalidInput(format!(
            "hiding {hide} of {l} edges would leave no training edges"
        )));
    }
    let n = net.node_count();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Partial Fisher-Yates over edge indices.
    let mut order: Vec<u32> = (0..l as u32).collect();
    for pos in 0..hide {
        let pick = rng.gen_range(pos..l);
        order.swap(pos, pick);
    }
    let mut positives: Vec<(u32, u32)> = order[..hide]
        .iter()
        .map(|&e| {
            let (i, j, _) = net.edges()[e as usize];
            (i, j)
        })
        .collect();
    positives.sort_unstable();

    let mut negatives = Vec::with_capacity(hide);
    let mut taken = std::collections::HashSet::new();
    let mut attempts = 0usize;
    let cap = 100 * hide;
    while negatives.len() < hide {
        if attempts >= cap {
            return Err(Error::InvalidInput(format!(
                "could not sample {hide} unconnected pairs in {cap} attempts"
            )));
        }
        attempts += 1;
        let a = rng.gen_range(0..n) as u32;
        let b = rng.gen_range(0..n) as u32;
        if a == b {
            continue;
        }
        let pair = (a.min(b), a.max(b));
        if net.has_edge(pair.0, pair.1) || !taken.insert(pair) {
            continue;
        }
        negatives.push(pair);
    }

    let train = net.without_edges(&positives);
    Ok(LinkSplit {
        train,
        positives,
        negatives,
        ratio,
    })
}

/// Hide `round(ratio * n * m)` attribute cells chosen uniformly over the
/// whole n×m matrix (both one- and zero-valued cells), recording original
/// values. Deterministic for a fixed seed.
pub fn split_attributes(net: &AttributedNetwork, ratio: f64, seed: u64) -> Result<AttributeSplit> {
    check_ratio(ratio)?;
    let n = net.node_count();
    let m = net.attr_count();
    let total = n
        .checked_mul(m)
        .ok_or_else(|| Error::InvalidInput("attribute matrix too large".into()))?;
    if total == 0 {
        return Err(Error::InvalidInput("network has no attributes".into()));
    }
    let hide = (ratio * total as f64).round() as usize;
    if hide == 0 {
        return Err(Error::InvalidInput(format!(
            "ratio {ratio} hides no cells of {total}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<u64> = (0..total as u64).collect();
    for pos in 0..hide {
        let pick = rng.gen_range(pos..total);
        order.swap(pos, pick);
    }
    let mut cells: Vec<u64> = order[..hide].to_vec();
    cells.sort_unstable();
    let hidden: Vec<HiddenCell> = cells
        .iter()
        .map(|&c| {
            let node = (c / m as u64) as u32;
            let attr = (c % m as u64) as u32;
            HiddenCell {
                node,
                attr,
                value: net.attribute_row(node as usize).get(attr),
            }
        })
        .collect();
    let train = net.without_attr_cells(&hidden);
    Ok(AttributeSplit {
        train,
        hidden,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write_temp(name: &str, content: &str) -> PathBuf {
        let dir = std::env::temp_dir().join("mdne-graph-tests");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join(format!("{name}-{}", std::process::id()));
        std::fs::write(&path, content).unwrap();
        path
    }

    fn repo_data(rel: &str) -> PathBuf {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(rel)
    }

    #[test]
    fn cora_matches_published_statistics() {
        let (net, stats) = load_cora_format(
            &repo_data("cora/cora.content"),
            &repo_data("cora/cora.cites"),
        )
        .unwrap();
        assert_eq!(net.node_count(), 2708);
        assert_eq!(net.edge_count(), 5278);
        assert_eq!(net.attr_count(), 1433);
        assert_eq!(net.label_names().len(), 7);
        assert_eq!(net.attr_nnz(), 49216);
        assert_eq!(stats.unknown_id_edges_dropped, 0);
    }

    #[test]
    fn citeseer_matches_published_statistics() {
        let content = repo_data("citeseer/citeseer.content");
        let cites = repo_data("citeseer/citeseer.cites");
        if !content.exists() || !cites.exists() {
            eprintln!("skipping: citeseer data not present under data/citeseer/");
            return;
        }
        let (net, _) = load_cora_format(&content, &cites).unwrap();
        assert_eq!(net.node_count(), 3312);
        assert_eq!(net.edge_count(), 4551);
        assert_eq!(net.attr_count(), 3703);
        assert_eq!(net.label_names().len(), 6);
    }

    #[test]
    fn duplicate_citation_collapses() {
        let content = write_temp(
            "dup.content",
            "a 1 0 ml\nb 0 1 db\nc 1 1 ml\n",
        );
        let cites = write_temp("dup.cites", "a b\nb a\nb c\n");
        let (net, stats) = load_cora_format(&content, &cites).unwrap();
        assert_eq!(net.edge_count(), 2);
        assert_eq!(stats.duplicate_edges_collapsed, 1);
        assert_eq!(net.attr_count(), 2);
        assert_eq!(net.labels().unwrap(), &[1, 0, 1]); // db, ml sorted
    }

    #[test]
    fn unknown_and_self_citations_dropped_with_count() {
        let content = write_temp("unk.content", "a 1 ml\nb 0 db\n");
        let cites = write_temp("unk.cites", "a b\na zzz\nb b\n");
        let (net, stats) = load_cora_format(&content, &cites).unwrap();
        assert_eq!(net.edge_count(), 1);
        assert_eq!(stats.unknown_id_edges_dropped, 1);
        assert_eq!(stats.self_loops_dropped, 1);
    }

    #[test]
    fn malformed_content_line_reports_line_number() {
        let content = write_temp("bad.content", "a 1 0 ml\nb 0\n");
        let cites = write_temp("bad.cites", "");
        let err = load_cora_format(&content, &cites).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn empty_content_is_empty_input_error() {
        let content = write_temp("empty.content", "");
        let cites = write_temp("empty.cites", "");
        assert!(matches!(
            load_cora_format(&content, &cites),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn generic_path_graph_degrees() {
        let edges = write_temp("path.edges", "a b\nb c\nc d\n");
        let attrs = write_temp("path.attrs", "");
        let (net, _) = load_generic(&edges, &attrs, None, true).unwrap();
        assert_eq!(net.edge_count(), 3);
        let degrees: Vec<usize> = (0..4).map(|i| net.degree(i)).collect();
        assert_eq!(degrees, vec![1, 2, 2, 1]);
    }

    #[test]
    fn generic_weighted_edge_symmetric() {
        let edges = write_temp("w.edges", "a b 2.5\n");
        let attrs = write_temp("w.attrs", "a 0:1\nb 1:1\n");
        let (net, _) = load_generic(&edges, &attrs, None, false).unwrap();
        let a = net.node_index("a").unwrap();
        let b = net.node_index("b").unwrap();
        assert_eq!(net.adjacency_row(a).get(b as u32), 2.5);
        assert_eq!(net.adjacency_row(b).get(a as u32), 2.5);
    }

    #[test]
    fn generic_sparse_attr_pair() {
        let edges = write_temp("sp.edges", "x y\n");
        let attrs = write_temp("sp.attrs", "x 3:1\ny 0:1\n");
        let (net, _) = load_generic(&edges, &attrs, None, true).unwrap();
        let x = net.node_index("x").unwrap();
        assert_eq!(net.attribute_row(x).nnz(), 1);
        assert_eq!(net.attribute_row(x).get(3), 1.0);
        assert_eq!(net.attr_count(), 4);
    }

    #[test]
    fn generic_binarize_coerces_values() {
        let edges = write_temp("bin.edges", "a b\n");
        let attrs = write_temp("bin.attrs", "a 0:0.7 2:3\n");
        let (net, _) = load_generic(&edges, &attrs, None, true).unwrap();
        let a = net.node_index("a").unwrap();
        assert_eq!(net.attribute_row(a).get(0), 1.0);
        assert_eq!(net.attribute_row(a).get(2), 1.0);
    }

    #[test]
    fn canonical_round_trip_is_identical() {
        let content = write_temp("rt.content", "a 1 0 ml\nb 0 1 db\nc 1 1 ml\n");
        let cites = write_temp("rt.cites", "a b\nb c\n");
        let (net, _) = load_cora_format(&content, &cites).unwrap();

        let p1 = write_temp("rt1.net", "");
        save_canonical(&net, &p1).unwrap();
        let reloaded = load_canonical(&p1).unwrap();
        let p2 = write_temp("rt2.net", "");
        save_canonical(&reloaded, &p2).unwrap();
        assert_eq!(
            std::fs::read(&p1).unwrap(),
            std::fs::read(&p2).unwrap(),
            "save→load→save must be byte-identical"
        );
        assert_eq!(net.node_ids(), reloaded.node_ids());
        assert_eq!(net.edges(), reloaded.edges());
        assert_eq!(net.labels(), reloaded.labels());
    }

    #[test]
    fn canonical_round_trip_weighted_generic() {
        let edges = write_temp("gw.edges", "a b 2.5\nb c 0.125\n");
        let attrs = write_temp("gw.attrs", "a 0:0.25 7:1\nc 2:1\n");
        let (net, _) = load_generic(&edges, &attrs, None, false).unwrap();
        let p1 = write_temp("gw1.net", "");
        save_canonical(&net, &p1).unwrap();
        let reloaded = load_canonical(&p1).unwrap();
        let p2 = write_temp("gw2.net", "");
        save_canonical(&reloaded, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        assert_eq!(net.attr_count(), reloaded.attr_count());
    }

    // A triangle is complete, so a fourth node provides the unconnected
    // pairs negative sampling needs.
    fn triangle() -> AttributedNetwork {
        AttributedNetwork::from_parts(
            vec!["a".into(), "b".into(), "c".into(), "d".into()],
            2,
            vec![(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)],
            vec![
                SparseVec::from_pairs(vec![(0, 1.0)]).unwrap(),
                SparseVec::from_pairs(vec![(1, 1.0)]).unwrap(),
                SparseVec::new(),
                SparseVec::new(),
            ],
            None,
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn split_links_triangle_counts() {
        let net = triangle();
        let split = split_links(&net, 1.0 / 3.0, 7).unwrap();
        assert_eq!(split.positives.len(), 1);
        assert_eq!(split.negatives.len(), 1);
        assert_eq!(split.train.edge_count(), 2);
    }

    #[test]
    fn split_links_hidden_count_matches_round() {
        let (net, _) = load_cora_format(
            &repo_data("cora/cora.content"),
            &repo_data("cora/cora.cites"),
        )
        .unwrap();
        let split = split_links(&net, 0.45, 3).unwrap();
        assert_eq!(split.positives.len(), (0.45f64 * 5278.0).round() as usize);
        assert_eq!(split.train.edge_count() + split.positives.len(), 5278);
    }

    #[test]
    fn split_links_deterministic() {
        let net = triangle();
        let s1 = split_links(&net, 1.0 / 3.0, 42).unwrap();
        let s2 = split_links(&net, 1.0 / 3.0, 42).unwrap();
        assert_eq!(s1.positives, s2.positives);
        assert_eq!(s1.negatives, s2.negatives);
    }

    #[test]
    fn split_links_partition_invariants() {
        let (net, _) = load_cora_format(
            &repo_data("cora/cora.content"),
            &repo_data("cora/cora.cites"),
        )
        .unwrap();
        let split = split_links(&net, 0.15, 11).unwrap();
        let mut union: Vec<(u32, u32)> = split
            .train
            .edges()
            .iter()
            .map(|(i, j, _)| (*i, *j))
            .chain(split.positives.iter().copied())
            .collect();
        union.sort_unstable();
        let mut original: Vec<(u32, u32)> = net.edges().iter().map(|(i, j, _)| (*i, *j)).collect();
        original.sort_unstable();
        assert_eq!(union, original, "train ∪ positives must equal original edges");
        for p in &split.positives {
            assert!(!split.train.has_edge(p.0, p.1));
        }
        for neg in &split.negatives {
            assert!(!net.has_edge(neg.0, neg.1), "negative {neg:?} collides with an edge");
        }
    }

    #[test]
    fn split_links_negatives_never_collide_exhaustive_toy() {
        // Star graph with plenty of non-edges; every seed must avoid them all.
        let net = AttributedNetwork::from_parts(
            (0..8).map(|i| i.to_string()).collect(),
            1,
            (1..8).map(|j| (0u32, j as u32, 1.0)).collect(),
            vec![SparseVec::new(); 8],
            None,
            Vec::new(),
        )
        .unwrap();
        for seed in 0..50 {
            let split = split_links(&net, 0.3, seed).unwrap();
            for neg in &split.negatives {
                assert!(!net.has_edge(neg.0, neg.1));
            }
        }
    }

    #[test]
    fn split_links_rejects_bad_ratio() {
        let net = triangle();
        assert!(split_links(&net, 0.0, 1).is_err());
        assert!(split_links(&net, 1.0, 1).is_err());
        assert!(split_links(&net, 0.05, 1).is_err(), "rounds to zero hidden edges");
    }

    fn toy_attr_net() -> AttributedNetwork {
        AttributedNetwork::from_parts(
            vec!["a".into(), "b".into()],
            4,
            vec![(0, 1, 1.0)],
            vec![
                SparseVec::from_pairs(vec![(0, 1.0), (2, 1.0)]).unwrap(),
                SparseVec::from_pairs(vec![(1, 1.0)]).unwrap(),
            ],
            None,
            Vec::new(),
        )
        .unwrap()
    }

    #[test]
    fn split_attributes_counts_cells() {
        let net = toy_attr_net();
        let split = split_attributes(&net, 0.25, 5).unwrap();
        assert_eq!(split.hidden.len(), 2); // 0.25 * 2 * 4
    }

    #[test]
    fn split_attributes_restore_round_trips() {
        let net = toy_attr_net();
        let split = split_attributes(&net, 0.4, 9).unwrap();
        for i in 0..net.node_count() {
            for k in 0..net.attr_count() as u32 {
                let hidden_val = split
                    .hidden
                    .iter()
                    .find(|c| c.node == i as u32 && c.attr == k)
                    .map(|c| c.value);
                let train_val = split.train.attribute_row(i).get(k);
                let restored = hidden_val.unwrap_or(train_val);
                assert_eq!(restored, net.attribute_row(i).get(k));
                if hidden_val.is_some() {
                    assert_eq!(train_val, 0.0, "hidden cells must be zeroed in train");
                }
            }
        }
    }

    #[test]
    fn split_attributes_includes_zero_and_one_cells() {
        let (net, _) = load_cora_format(
            &repo_data("cora/cora.content"),
            &repo_data("cora/cora.cites"),
        )
        .unwrap();
        let split = split_attributes(&net, 0.05, 1).unwrap();
        let ones = split.hidden.iter().filter(|c| c.value == 1.0).count();
        let zeros = split.hidden.iter().filter(|c| c.value == 0.0).count();
        assert!(ones > 0 && zeros > 0);
        assert_eq!(ones + zeros, split.hidden.len());
    }

    #[test]
    fn split_attributes_deterministic() {
        let net = toy_attr_net();
        let s1 = split_attributes(&net, 0.25, 123).unwrap();
        let s2 = split_attributes(&net, 0.25, 123).unwrap();
        assert_eq!(s1.hidden, s2.hidden);
    }

    #[test]
    fn sparse_vec_rejects_duplicates() {
        assert!(SparseVec::from_pairs(vec![(1, 1.0), (1, 2.0)]).is_err());
    }
}
