//! Hamming distance graph over class codes, constant-distance cliques and the
//! grouped (class → subclasses) dataset constructions built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write};

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::classgen::{self, FamilyParams, MAX_WIDTH};
use crate::error::{Error, Result};
use crate::seed;

/// Complete graph over all `2^width` class indices weighted by code distance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DistanceGraph {
    width: u32,
}

impl DistanceGraph {
    pub fn new(width: u32) -> Result<Self> {
        if width == 0 || width > 20 {
            return Err(Error::invalid(
                "width",
                format!("distance graphs support widths 1..=20, got {width} (max code width {MAX_WIDTH})"),
            ));
        }
        Ok(DistanceGraph { width })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn num_nodes(&self) -> usize {
        1usize << self.width
    }

    pub fn weight(&self, a: u32, b: u32) -> Result<u32> {
        classgen::class_distance(a, b, self.width)
    }
}

/// Undirected simple graph stored as one bitset row per node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Adjacency {
    n: usize,
    words: usize,
    rows: Vec<u64>,
}

impl Adjacency {
    pub fn empty(n: usize) -> Self {
        let words = n.div_ceil(64).max(1);
        Adjacency {
            n,
            words,
            rows: vec![0; n * words],
        }
    }

    pub fn from_edges(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        let mut adj = Adjacency::empty(n);
        for (a, b) in edges {
            adj.add_edge(a, b)?;
        }
        Ok(adj)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<()> {
        for v in [a, b] {
            if v >= self.n {
                return Err(Error::IndexOutOfRange {
                    index: v as u64,
                    bound: self.n as u64,
                });
            }
        }
        if a == b {
            return Err(Error::invalid("edge", format!("self loop at {a}")));
        }
        self.rows[a * self.words + b / 64] |= 1 << (b % 64);
        self.rows[b * self.words + a / 64] |= 1 << (a % 64);
        Ok(())
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        a < self.n && b < self.n && self.rows[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn degree(&self, v: usize) -> usize {
        self.row(v).iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |a| {
            ((a + 1)..self.n)
                .filter(move |&b| self.has_edge(a, b))
                .map(move |b| (a, b))
        })
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n).map(|v| self.degree(v)).sum::<usize>() / 2
    }

    /// Every pair of `nodes` is adjacent.
    pub fn is_clique(&self, nodes: &[usize]) -> bool {
        nodes
            .iter()
            .enumerate()
            .all(|(i, &a)| nodes[i + 1..].iter().all(|&b| self.has_edge(a, b)))
    }

    fn row(&self, v: usize) -> &[u64] {
        &self.rows[v * self.words..(v + 1) * self.words]
    }
}

/// Subgraph of `graph` keeping only edges of weight exactly `w`.
pub fn subgraph_at_weight(graph: &DistanceGraph, w: u32) -> Result<Adjacency> {
    if w == 0 || w > graph.width {
        return Err(Error::invalid(
            "w",
            format!("weight must be in 1..={}, got {w}", graph.width),
        ));
    }
    let n = graph.num_nodes();
    let mut adj = Adjacency::empty(n);
    for a in 0..n {
        for b in (a + 1)..n {
            if ((a ^ b) as u32).count_ones() == w {
                adj.add_edge(a, b)?;
            }
        }
    }
    Ok(adj)
}

type Bits = Vec<u64>;

fn bits_count(s: &[u64]) -> usize {
    s.iter().map(|w| w.count_ones() as usize).sum()
}

fn bits_iter(s: &[u64]) -> impl Iterator<Item = usize> + '_ {
    s.iter().enumerate().flat_map(|(i, &w)| {
        let mut w = w;
        std::iter::from_fn(move || {
            if w == 0 {
                return None;
            }
            let t = w.trailing_zeros() as usize;
            w &= w - 1;
            Some(i * 64 + t)
        })
    })
}

fn bits_and(a: &[u64], b: &[u64]) -> Bits {
    a.iter().zip(b).map(|(x, y)| x & y).collect()
}

struct CliqueSearch<'a> {
    adj: &'a Adjacency,
    best: Vec<usize>,
}

impl CliqueSearch<'_> {
    // Bron–Kerbosch with Tomita pivoting. A branch is cut only when it cannot
    // reach the current best size, so equal-size cliques still get compared.
    fn expand(&mut self, r: &mut Vec<usize>, p: Bits, x: Bits) {
        let p_count = bits_count(&p);
        if r.len() + p_count < self.best.len() {
            return;
        }
        if p_count == 0 {
            if bits_count(&x) == 0 {
                self.offer(r);
            }
            return;
        }
        let pivot = bits_iter(&p)
            .chain(bits_iter(&x))
            .max_by_key(|&u| {
                let row = self.adj.row(u);
                (
                    p.iter().zip(row).map(|(a, b)| (a & b).count_ones()).sum::<u32>(),
                    std::cmp::Reverse(u),
                )
            })
            .expect("p is non-empty");
        let pivot_row = self.adj.row(pivot);
        let branch: Vec<usize> = bits_iter(&p)
            .filter(|&v| pivot_row[v / 64] >> (v % 64) & 1 == 0)
            .collect();
        let mut p = p;
        let mut x = x;
        for v in branch {
            let row = self.adj.row(v);
            r.push(v);
            self.expand(r, bits_and(&p, row), bits_and(&x, row));
            r.pop();
            p[v / 64] &= !(1 << (v % 64));
            x[v / 64] |= 1 << (v % 64);
        }
    }

    fn offer(&mut self, r: &[usize]) {
        let mut cand = r.to_vec();
        cand.sort_unstable();
        if cand.len() > self.best.len() || (cand.len() == self.best.len() && cand < self.best) {
            self.best = cand;
        }
    }
}

/// Exact maximum clique; among maximum cliques the lexicographically smallest
/// sorted node list is returned.
pub fn max_clique(adj: &Adjacency) -> Vec<usize> {
    if adj.is_empty() {
        return Vec::new();
    }
    let mut p = vec![0u64; adj.words];
    for v in 0..adj.n {
        p[v / 64] |= 1 << (v % 64);
    }
    let mut search = CliqueSearch { adj, best: Vec::new() };
    search.expand(&mut Vec::new(), p, vec![0; adj.words]);
    search.best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Equidistant,
    Equivariant,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "equidistant" => Ok(DatasetKind::Equidistant),
            "equivariant" => Ok(DatasetKind::Equivariant),
            other => Err(Error::invalid(
                "kind",
                format!("expected `equidistant` or `equivariant`, got `{other}`"),
            )),
        }
    }
}

impl std::fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DatasetKind::Equidistant => "equidistant",
            DatasetKind::Equivariant => "equivariant",
        })
    }
}

/// Classes as groups of base-family classes ("subclasses").
///
/// Subclasses are identified by their position in the flattened grouping:
/// class 0's subclasses first, then class 1's, and so on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupedDatasetSpec {
    pub family: FamilyParams,
    pub kind: DatasetKind,
    pub classes: Vec<Vec<u32>>,
}

impl GroupedDatasetSpec {
    pub fn new(family: FamilyParams, kind: DatasetKind, classes: Vec<Vec<u32>>) -> Result<Self> {
        let spec = GroupedDatasetSpec { family, kind, classes };
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn num_subclasses(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    pub fn dim(&self) -> usize {
        self.family.p as usize * self.family.r
    }

    /// `(class, base-family index)` of every subclass, in subclass-id order.
    pub fn subclasses(&self) -> Vec<(usize, u32)> {
        self.classes
            .iter()
            .enumerate()
            .flat_map(|(c, subs)| subs.iter().map(move |&code| (c, code)))
            .collect()
    }

    /// Subclass ids belonging to class `class`.
    pub fn subclass_ids_of(&self, class: usize) -> std::ops::Range<usize> {
        let start: usize = self.classes[..class].iter().map(Vec::len).sum();
        start..start + self.classes[class].len()
    }

    /// Checks disjointness, index ranges and the kind's distance structure.
    pub fn validate(&self) -> Result<()> {
        let p = self.family.p;
        let mut seen = BTreeSet::new();
        for subs in &self.classes {
            if subs.is_empty() {
                return Err(Error::invalid("classes", "every class needs a subclass"));
            }
            for &code in subs {
                classgen::binary_code(code, p)?;
                if !seen.insert(code) {
                    return Err(Error::invalid(
                        "classes",
                        format!("subclass {code} appears more than once"),
                    ));
                }
            }
        }
        let subs = self.subclasses();
        for (i, &(ca, a)) in subs.iter().enumerate() {
            for &(cb, b) in &subs[i + 1..] {
                let d = (a ^ b).count_ones();
                let ok = match self.kind {
                    DatasetKind::Equidistant => d == 2,
                    DatasetKind::Equivariant => {
                        if ca == cb {
                            d <= 2
                        } else {
                            d >= 4
                        }
                    }
                };
                if !ok {
                    return Err(Error::invalid(
                        "classes",
                        format!("{} layout violated by subclasses {a} and {b} (distance {d})", self.kind),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Four classes of two subclasses each, all eight codes pairwise at distance 2.
///
/// The eight smallest members of the maximum weight-2 clique are paired in
/// sorted order.
pub fn build_equidistant_spec(p: u32, r: usize, sigma_scale: f64, seed: u64) -> Result<GroupedDatasetSpec> {
    let family = FamilyParams {
        p,
        r,
        sigma_scale,
        seed,
    };
    family.build()?;
    let graph = DistanceGraph::new(p)?;
    let clique = max_clique(&subgraph_at_weight(&graph, 2)?);
    if clique.len() < 8 {
        return Err(Error::CliqueTooSmall {
            purpose: "equidistant dataset (weight 2)",
            needed: 8,
            found: clique.len(),
        });
    }
    let classes = clique[..8]
        .chunks(2)
        .map(|c| c.iter().map(|&v| v as u32).collect())
        .collect();
    GroupedDatasetSpec::new(family, DatasetKind::Equidistant, classes)
}

/// Four classes, each a weight-6 clique member followed by its distance-1
/// neighbours (ascending, at most nine of them).
pub fn build_equivariant_spec(p: u32, r: usize, sigma_scale: f64, seed: u64) -> Result<GroupedDatasetSpec> {
    let family = FamilyParams {
        p,
        r,
        sigma_scale,
        seed,
    };
    family.build()?;
    let graph = DistanceGraph::new(p)?;
    if p < 6 {
        return Err(Error::CliqueTooSmall {
            purpose: "equivariant dataset (weight 6)",
            needed: 4,
            found: 0,
        });
    }
    let clique = max_clique(&subgraph_at_weight(&graph, 6)?);
    if clique.len() < 4 {
        return Err(Error::CliqueTooSmall {
            purpose: "equivariant dataset (weight 6)",
            needed: 4,
            found: clique.len(),
        });
    }
    let classes = clique[..4]
        .iter()
        .map(|&center| {
            let center = center as u32;
            let mut neighbours: Vec<u32> = (0..p).map(|i| center ^ (1 << i)).collect();
            neighbours.sort_unstable();
            neighbours.truncate(9);
            std::iter::once(center).chain(neighbours).collect()
        })
        .collect();
    GroupedDatasetSpec::new(family, DatasetKind::Equivariant, classes)
}

pub fn build_spec(kind: DatasetKind, p: u32, r: usize, sigma_scale: f64, seed: u64) -> Result<GroupedDatasetSpec> {
    match kind {
        DatasetKind::Equidistant => build_equidistant_spec(p, r, sigma_scale, seed),
        DatasetKind::Equivariant => build_equivariant_spec(p, r, sigma_scale, seed),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub spec: GroupedDatasetSpec,
    pub seed: u64,
    /// Samples per subclass id.
    pub counts: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub points: Array2<f64>,
    pub classes: Vec<usize>,
    pub subclasses: Vec<usize>,
    pub provenance: Provenance,
}

impl LabeledDataset {
    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.provenance.spec.num_classes()
    }

    pub fn num_subclasses(&self) -> usize {
        self.provenance.spec.num_subclasses()
    }

    /// Number of points carrying each subclass label.
    pub fn subclass_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0; self.num_subclasses()];
        for &s in &self.subclasses {
            hist[s] += 1;
        }
        hist
    }

    /// `x0..x{d-1},class,subclass` rows with shortest round-trip float text.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.dim();
        let mut line = String::new();
        for j in 0..d {
            write!(line, "x{j},").unwrap();
        }
        line.push_str("class,subclass\n");
        out.write_all(line.as_bytes())?;
        for (i, row) in self.points.rows().into_iter().enumerate() {
            line.clear();
            for v in row {
                write!(line, "{v},").unwrap();
            }
            writeln!(line, "{},{}", self.classes[i], self.subclasses[i]).unwrap();
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    /// Companion metadata: spec, seed and per-subclass counts.
    pub fn metadata_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.provenance)?)
    }

    pub fn read_csv<R: BufRead>(input: R, provenance: Provenance) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::format("dataset csv", "missing header"))??;
        let d = header.split(',').count().saturating_sub(2);
        if d != provenance.spec.dim() {
            return Err(Error::DimensionMismatch {
                expected: provenance.spec.dim(),
                found: d,
            });
        }
        let mut flat = Vec::new();
        let mut classes = Vec::new();
        let mut subclasses = Vec::new();
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 2 {
                return Err(Error::format(
                    "dataset csv",
                    format!("row {} has {} fields", lineno + 1, fields.len()),
                ));
            }
            for f in &fields[..d] {
                flat.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::format("dataset csv", e.to_string()))?,
                );
            }
            classes.push(
                fields[d]
                    .parse()
                    .map_err(|_| Error::format("dataset csv", "bad class label"))?,
            );
            subclasses.push(
                fields[d + 1]
                    .parse()
                    .map_err(|_| Error::format("dataset csv", "bad subclass label"))?,
            );
        }
        let points = Array2::from_shape_vec((classes.len(), d), flat)
            .map_err(|e| Error::format("dataset csv", e.to_string()))?;
        Ok(LabeledDataset {
            points,
            classes,
            subclasses,
            provenance,
        })
    }
}

/// Draws the requested number of points from each subclass and shuffles them.
///
/// Subclass `k` is sampled from its own stream derived from `seed`, so a count
/// change in one subclass leaves the draws of every other subclass untouched.
pub fn realize(
    spec: &GroupedDatasetSpec,
    per_subclass_counts: &BTreeMap<usize, usize>,
    seed: u64,
) -> Result<LabeledDataset> {
    let subs = spec.subclasses();
    if let Some((&bad, _)) = per_subclass_counts.range(subs.len()..).next() {
        return Err(Error::UnknownSubclass(bad as u32));
    }
    let family = spec.family.build()?;
    let counts: Vec<usize> = (0..subs.len())
        .map(|k| per_subclass_counts.get(&k).copied().unwrap_or(0))
        .collect();
    let total: usize = counts.iter().sum();
    let d = family.dim();
    let mut points = Array2::zeros((total, d));
    let mut classes = Vec::with_capacity(total);
    let mut subclasses = Vec::with_capacity(total);
    let mut offset = 0;
    for (k, (&(class, code), &n)) in subs.iter().zip(&counts).enumerate() {
        let block = classgen::sample_class(&family, code, n, seed::derive(seed, seed::stream::SUBCLASS + k as u64))?;
        points.slice_mut(ndarray::s![offset..offset + n, ..]).assign(&block);
        classes.extend(std::iter::repeat_n(class, n));
        subclasses.extend(std::iter::repeat_n(k, n));
        offset += n;
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut seed::rng(seed::derive(seed, seed::stream::SHUFFLE)));
    let points = points.select(Axis(0), &order);
    let classes = order.iter().map(|&i| classes[i]).collect();
    let subclasses = order.iter().map(|&i| subclasses[i]).collect();
    Ok(LabeledDataset {
        points,
        classes,
        subclasses,
        provenance: Provenance {
            spec: spec.clone(),
            seed,
            counts,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_two_edges_at_p2() {
        let g = DistanceGraph::new(2).unwrap();
        let adj = subgraph_at_weight(&g, 2).unwrap();
        let edges: Vec<_> = adj.edges().collect();
        assert_eq!(edges, vec![(0, 3), (1, 2)]);
        assert!(subgraph_at_weight(&g, 0).is_err());
        assert!(subgraph_at_weight(&g, 3).is_err());
    }

    #[test]
    fn weight_two_degree_at_p9() {
        let adj = subgraph_at_weight(&DistanceGraph::new(9).unwrap(), 2).unwrap();
        assert!((0..512).all(|v| adj.degree(v) == 36));
    }

    #[test]
    fn triangle_clique() {
        let adj = Adjacency::from_edges(3, [(0, 1), (1, 2), (0, 2)]).unwrap();
        assert_eq!(max_clique(&adj), vec![0, 1, 2]);
        assert!(max_clique(&Adjacency::empty(0)).is_empty());
        assert_eq!(max_clique(&Adjacency::empty(3)), vec![0]);
    }

    #[test]
    fn tie_break_is_lexicographic() {
        // two triangles {3,4,5} and {0,1,2} plus a dangling edge
        let adj = Adjacency::from_edges(7, [(3, 4), (4, 5), (3, 5), (0, 1), (1, 2), (0, 2), (5, 6)]).unwrap();
        assert_eq!(max_clique(&adj), vec![0, 1, 2]);
    }

    #[test]
    fn equidistant_layout() {
        let spec = build_equidistant_spec(9, 13, 0.25, 0).unwrap();
        assert_eq!(spec.num_classes(), 4);
        assert!(spec.classes.iter().all(|c| c.len() == 2));
        let subs = spec.subclasses();
        for i in 0..8 {
            for j in (i + 1)..8 {
                assert_eq!((subs[i].1 ^ subs[j].1).count_ones(), 2);
            }
        }
        assert_eq!(spec, build_equidistant_spec(9, 13, 0.25, 0).unwrap());
    }

    #[test]
    fn equivariant_layout() {
        let spec = build_equivariant_spec(9, 13, 0.25, 0).unwrap();
        assert_eq!(spec.num_classes(), 4);
        assert!(spec.classes.iter().all(|c| c.len() == 10));
        spec.validate().unwrap();
        assert!(build_equivariant_spec(5, 13, 0.25, 0).is_err());
    }

    #[test]
    fn small_width_equidistant_fails_with_found_size() {
        match build_equidistant_spec(4, 3, 0.25, 0) {
            Err(Error::CliqueTooSmall { needed: 8, found, .. }) => assert!(found < 8),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn realize_counts_and_labels() {
        let spec = build_equidistant_spec(9, 13, 0.25, 0).unwrap();
        let counts: BTreeMap<usize, usize> = (0..8).map(|k| (k, 500)).collect();
        let ds = realize(&spec, &counts, 9).unwrap();
        assert_eq!(ds.len(), 4000);
        assert_eq!(ds.subclass_histogram(), vec![500; 8]);
        for (c, s) in ds.classes.iter().zip(&ds.subclasses) {
            assert_eq!(*c, s / 2);
        }
        assert!(ds.points.iter().all(|v| v.is_finite()));

        let empty = realize(&spec, &BTreeMap::new(), 9).unwrap();
        assert!(empty.is_empty());
        assert_eq!(empty.provenance.counts, vec![0; 8]);
        assert_eq!(empty.provenance.spec, spec);

        let bad: BTreeMap<usize, usize> = [(8, 1)].into();
        assert!(matches!(realize(&spec, &bad, 9), Err(Error::UnknownSubclass(8))));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let spec = build_equidistant_spec(9, 2, 0.25, 1).unwrap();
        let counts: BTreeMap<usize, usize> = (0..8).map(|k| (k, 3)).collect();
        let ds = realize(&spec, &counts, 4).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x0,x1,"));
        assert!(text.lines().next().unwrap().ends_with("x17,class,subclass"));
        let back = LabeledDataset::read_csv(&buf[..], ds.provenance.clone()).unwrap();
        assert_eq!(back, ds);
    }
}
