use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{histogram_sums, DegreeModel};

/// Leading bytes of the binary graph cache.
pub const CACHE_MAGIC: &[u8; 8] = b"TCSGRAPH";

/// What was thrown away while building the graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CleaningReport {
    /// Non-comment lines holding an edge.
    pub edge_lines: u64,
    pub self_loops_dropped: u64,
    pub duplicates_dropped: u64,
}

/// Directed follower graph with nodes re-indexed densely `0..N`.
///
/// Out-neighbour lists are stored back to back and sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SocialGraph {
    offsets: Vec<usize>,
    neighbors: Vec<u32>,
    /// Original id of each dense index, ascending.
    ids: Vec<u64>,
    cleaning: CleaningReport,
}

impl SocialGraph {
    /// Builds a graph on nodes `0..n` from `(from, to)` pairs of dense ids,
    /// dropping self-loops and repeated edges.
    pub fn from_dense_edges(n: u32, edges: &[(u32, u32)]) -> Result<Self> {
        let ids = (0..u64::from(n)).collect();
        build(ids, edges.to_vec(), CleaningReport::default())
    }

    pub fn node_count(&self) -> usize {
        self.ids.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn out_degree(&self, node: u32) -> u32 {
        let v = node as usize;
        (self.offsets[v + 1] - self.offsets[v]) as u32
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.offsets
            .windows(2)
            .map(|w| (w[1] - w[0]) as u32)
            .collect()
    }

    pub fn out_neighbors(&self, node: u32) -> &[u32] {
        let v = node as usize;
        &self.neighbors[self.offsets[v]..self.offsets[v + 1]]
    }

    pub fn original_id(&self, node: u32) -> u64 {
        self.ids[node as usize]
    }

    pub fn dense_index(&self, original: u64) -> Option<u32> {
        self.ids.binary_search(&original).ok().map(|i| i as u32)
    }

    pub fn cleaning(&self) -> CleaningReport {
        self.cleaning
    }

    /// Graph induced by `k` nodes drawn uniformly without replacement.
    /// Kept nodes retain their original ids.
    pub fn induced_subgraph(&self, k: usize, seed: u64) -> Result<SocialGraph> {
        let n = self.node_count();
        if k == 0 || k > n {
            return Err(Error::param("k", format!("need 1 <= k <= {n}, got {k}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut keep: Vec<u32> = index::sample(&mut rng, n, k)
            .into_iter()
            .map(|i| i as u32)
            .collect();
        keep.sort_unstable();
        let mut new_index = vec![u32::MAX; n];
        for (i, &v) in keep.iter().enumerate() {
            new_index[v as usize] = i as u32;
        }
        let mut edges = Vec::new();
        for (i, &v) in keep.iter().enumerate() {
            for &u in self.out_neighbors(v) {
                let j = new_index[u as usize];
                if j != u32::MAX {
                    edges.push((i as u32, j));
                }
            }
        }
        let ids = keep.iter().map(|&v| self.ids[v as usize]).collect();
        build(ids, edges, CleaningReport::default())
    }
}

fn build(
    ids: Vec<u64>,
    mut edges: Vec<(u32, u32)>,
    mut cleaning: CleaningReport,
) -> Result<SocialGraph> {
    let n = ids.len();
    if n > u32::MAX as usize {
        return Err(Error::param("graph", "more than 2^32 - 1 nodes"));
    }
    if let Some(&(a, b)) = edges
        .iter()
        .find(|&&(a, b)| a as usize >= n || b as usize >= n)
    {
        return Err(Error::param(
            "graph",
            format!("edge ({a}, {b}) outside 0..{n}"),
        ));
    }
    let before = edges.len();
    edges.retain(|&(a, b)| a != b);
    cleaning.self_loops_dropped += (before - edges.len()) as u64;
    edges.sort_unstable();
    let before = edges.len();
    edges.dedup();
    cleaning.duplicates_dropped += (before - edges.len()) as u64;

    let mut offsets = vec![0usize; n + 1];
    for &(a, _) in &edges {
        offsets[a as usize + 1] += 1;
    }
    for v in 0..n {
        offsets[v + 1] += offsets[v];
    }
    let neighbors = edges.into_iter().map(|(_, b)| b).collect();
    Ok(SocialGraph {
        offsets,
        neighbors,
        ids,
        cleaning,
    })
}

/// Reads a SNAP-style edge list: one `from to` pair of integer ids per line,
/// `#` lines and blank lines ignored.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<SocialGraph> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(file), &path.display().to_string())
}

/// Parses an edge list from `reader`; `source` names it in error messages.
pub fn parse_edge_list<R: BufRead>(reader: R, source: &str) -> Result<SocialGraph> {
    let parse_err = |line: usize, message: String| Error::Parse {
        path: source.to_string(),
        line,
        message,
    };
    let mut raw: Vec<(u64, u64)> = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| parse_err(lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut fields = line.split_whitespace();
        let mut id = |what: &str| -> Result<u64> {
            let tok = fields
                .next()
                .ok_or_else(|| parse_err(lineno, format!("missing {what} id")))?;
            tok.parse().map_err(|_| {
                parse_err(
                    lineno,
                    format!("{what} id `{tok}` is not a non-negative integer"),
                )
            })
        };
        let from = id("source")?;
        let to = id("target")?;
        if let Some(extra) = fields.next() {
            return Err(parse_err(
                lineno,
                format!("unexpected trailing field `{extra}`"),
            ));
        }
        raw.push((from, to));
    }
    if raw.is_empty() {
        return Err(parse_err(0, "edge list contains no edges".into()));
    }

    let mut ids: Vec<u64> = raw.iter().flat_map(|&(a, b)| [a, b]).collect();
    ids.sort_unstable();
    ids.dedup();
    let dense = |id: u64| ids.binary_search(&id).expect("id collected above") as u32;
    let edges = raw.iter().map(|&(a, b)| (dense(a), dense(b))).collect();
    let cleaning = CleaningReport {
        edge_lines: raw.len() as u64,
        ..CleaningReport::default()
    };
    build(ids, edges, cleaning)
}

/// Out-degree statistics, computed with exact integer sums.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeStats {
    pub nodes: u64,
    pub edges: u64,
    /// Mean out-degree `m_f = edges / nodes`.
    pub mean: f64,
    pub second_moment: f64,
    pub max: u32,
    /// `histogram[d]` nodes have out-degree `d`.
    pub histogram: Vec<u64>,
    /// Mean degree when every edge is read as an undirected connection.
    pub undirected_mean: f64,
}

impl DegreeStats {
    /// The out-degree histogram as a friend-count model.
    pub fn to_degree_model(&self) -> Result<DegreeModel> {
        DegreeModel::empirical(self.histogram.clone())
    }
}

pub fn degree_stats(graph: &SocialGraph) -> DegreeStats {
    let degrees = graph.degrees();
    let max = degrees.iter().copied().max().unwrap_or(0);
    let mut histogram = vec![0u64; max as usize + 1];
    for &d in &degrees {
        histogram[d as usize] += 1;
    }
    let (n, s1, s2) = histogram_sums(&histogram);

    let mut pairs: Vec<(u32, u32)> = (0..graph.node_count() as u32)
        .flat_map(|v| {
            graph
                .out_neighbors(v)
                .iter()
                .map(move |&u| (v.min(u), v.max(u)))
        })
        .collect();
    pairs.sort_unstable();
    pairs.dedup();

    DegreeStats {
        nodes: n as u64,
        edges: s1 as u64,
        mean: s1 as f64 / n as f64,
        second_moment: s2 as f64 / n as f64,
        max,
        histogram,
        undirected_mean: 2.0 * pairs.len() as f64 / n as f64,
    }
}

/// Writes the flat binary cache: the magic bytes, the node count, the
/// out-degree of every node, then all neighbour lists concatenated; every
/// integer is a little-endian `u32`. Original ids are not stored.
pub fn write_cache(graph: &SocialGraph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        out.write_all(CACHE_MAGIC)?;
        out.write_all(&(graph.node_count() as u32).to_le_bytes())?;
        for d in graph.degrees() {
            out.write_all(&d.to_le_bytes())?;
        }
        for &u in &graph.neighbors {
            out.write_all(&u.to_le_bytes())?;
        }
        out.flush()
    };
    write().map_err(|e| Error::io(path, e))
}

/// Reads a cache written by [`write_cache`]; nodes get ids `0..N`.
pub fn read_cache(path: impl AsRef<Path>) -> Result<SocialGraph> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let corrupt = |why: &str| Error::Parse {
        path: path.display().to_string(),
        line: 0,
        message: format!("corrupt graph cache: {why}"),
    };
    if bytes.len() < 12 || &bytes[..8] != CACHE_MAGIC {
        return Err(corrupt("bad magic"));
    }
    let words: Vec<u32> = bytes[8..]
        .chunks(4)
        .map(|c| c.try_into().map(u32::from_le_bytes))
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| corrupt("length is not a multiple of 4"))?;
    let n = words[0] as usize;
    if words.len() < 1 + n {
        return Err(corrupt("truncated degree array"));
    }
    let degrees = &words[1..1 + n];
    let neighbors = &words[1 + n..];
    let total: u64 = degrees.iter().map(|&d| u64::from(d)).sum();
    if total != neighbors.len() as u64 {
        return Err(corrupt("degree sum does not match neighbour count"));
    }
    let mut offsets = Vec::with_capacity(n + 1);
    offsets.push(0usize);
    for &d in degrees {
        offsets.push(offsets.last().expect("nonempty") + d as usize);
    }
    for v in 0..n {
        let list = &neighbors[offsets[v]..offsets[v + 1]];
        if list.iter().any(|&u| u as usize >= n || u as usize == v)
            || list.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(corrupt(
                "neighbour list out of range or not strictly sorted",
            ));
        }
    }
    Ok(SocialGraph {
        offsets,
        neighbors: neighbors.to_vec(),
        ids: (0..n as u64).collect(),
        cleaning: CleaningReport::default(),
    })
}
