//! Edge-list I/O in the SNAP text convention: '#' comment lines, then one
//! "tail<whitespace>head" integer pair per line. Node ids are remapped to a
//! dense 0..n-1 range; the original ids are returned so callers can persist
//! the mapping.

use super::{GraphError, LabelSet, LabeledGraph};
use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Load an edge list. With a label map, every node present in the map gets
/// its label (nodes missing from the map get the first label); without one,
/// all nodes share a single label. Isolated ids listed only in the label map
/// become isolated nodes.
pub fn load_edge_list(
    path: &Path,
    label_map: Option<&BTreeMap<u64, String>>,
) -> Result<(LabeledGraph, Vec<u64>), GraphError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut raw_edges: Vec<(u64, u64)> = Vec::new();
    let mut ids: BTreeMap<u64, u32> = BTreeMap::new();
    if let Some(map) = label_map {
        for &id in map.keys() {
            let next = ids.len() as u32;
            ids.entry(id).or_insert(next);
        }
    }
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let parse = |tok: Option<&str>| -> Result<u64, GraphError> {
            tok.ok_or(GraphError::Parse {
                line: lineno + 1,
                msg: "expected two integers".into(),
            })?
            .parse()
            .map_err(|e| GraphError::Parse {
                line: lineno + 1,
                msg: format!("{e}"),
            })
        };
        let tail = parse(parts.next())?;
        let head = parse(parts.next())?;
        if parts.next().is_some() {
            return Err(GraphError::Parse {
                line: lineno + 1,
                msg: "trailing tokens".into(),
            });
        }
        for id in [tail, head] {
            let next = ids.len() as u32;
            ids.entry(id).or_insert(next);
        }
        raw_edges.push((tail, head));
    }
    // reindex densely in first-seen order
    let edges: Vec<(u32, u32)> = raw_edges
        .iter()
        .map(|&(t, h)| (ids[&t], ids[&h]))
        .collect();
    let n = ids.len();
    let mut original = vec![0u64; n];
    for (&id, &dense) in &ids {
        original[dense as usize] = id;
    }
    let (labels, label_of) = match label_map {
        None => (LabelSet::single(), vec![0u16; n]),
        Some(map) => {
            let mut names: Vec<String> = map.values().cloned().collect();
            names.sort();
            names.dedup();
            let labels = LabelSet::new(names);
            let label_of = original
                .iter()
                .map(|id| {
                    map.get(id)
                        .and_then(|name| labels.index(name))
                        .unwrap_or(0) as u16
                })
                .collect();
            (labels, label_of)
        }
    };
    Ok((LabeledGraph::from_edges(labels, label_of, &edges), original))
}

/// Write a graph as a SNAP edge list. `ids` maps dense indices back to
/// external ids (defaults to the dense indices themselves).
pub fn write_edge_list(
    g: &LabeledGraph,
    path: &Path,
    ids: Option<&[u64]>,
) -> Result<(), GraphError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# directed multigraph: {} nodes, {} edges", g.n(), g.edge_count())?;
    for v in 0..g.n() {
        let tail = ids.map_or(v as u64, |m| m[v]);
        for &h in g.out_neighbors(v) {
            let head = ids.map_or(h as u64, |m| m[h as usize]);
            writeln!(w, "{tail}\t{head}")?;
        }
    }
    Ok(())
}

/// Read a two-column "node label" text file.
pub fn read_label_map(path: &Path) -> Result<BTreeMap<u64, String>, GraphError> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut map = BTreeMap::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let node: u64 = parts
            .next()
            .ok_or(GraphError::Parse {
                line: lineno + 1,
                msg: "expected node id".into(),
            })?
            .parse()
            .map_err(|e| GraphError::Parse {
                line: lineno + 1,
                msg: format!("{e}"),
            })?;
        let label = parts
            .next()
            .ok_or(GraphError::Parse {
                line: lineno + 1,
                msg: "expected label".into(),
            })?
            .to_string();
        map.insert(node, label);
    }
    Ok(map)
}

/// Write the per-node label assignment as "node label" lines.
pub fn write_label_map(
    g: &LabeledGraph,
    path: &Path,
    ids: Option<&[u64]>,
) -> Result<(), GraphError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    for v in 0..g.n() {
        let id = ids.map_or(v as u64, |m| m[v]);
        writeln!(w, "{id}\t{}", g.labels().name(g.label_of(v)))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_a_two_node_cycle() {
        let f = tmp("# header\n0 1\n1 0\n");
        let (g, ids) = load_edge_list(f.path(), None).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(ids, vec![0, 1]);
        for v in 0..2 {
            assert_eq!(g.in_degree(v), 1);
            assert_eq!(g.out_degree(v), 1);
        }
    }

    #[test]
    fn comments_and_blank_lines_give_an_empty_graph() {
        let f = tmp("# nothing here\n\n# still nothing\n");
        let (g, ids) = load_edge_list(f.path(), None).unwrap();
        assert_eq!(g.n(), 0);
        assert!(ids.is_empty());
    }

    #[test]
    fn parallel_edges_are_preserved() {
        let f = tmp("5 9\n5 9\n");
        let (g, ids) = load_edge_list(f.path(), None).unwrap();
        assert_eq!(g.n(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.out_degree(0), 2);
        assert_eq!(ids, vec![5, 9]);
    }

    #[test]
    fn parse_errors_carry_the_line_number() {
        let f = tmp("0 1\nnot numbers\n");
        match load_edge_list(f.path(), None) {
            Err(GraphError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn trailing_tokens_are_rejected() {
        let f = tmp("0 1 2\n");
        assert!(matches!(
            load_edge_list(f.path(), None),
            Err(GraphError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn edge_list_round_trip() {
        let f = tmp("0 1\n1 2\n2 0\n2 0\n");
        let (g, ids) = load_edge_list(f.path(), None).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_edge_list(&g, out.path(), Some(&ids)).unwrap();
        let (g2, ids2) = load_edge_list(out.path(), None).unwrap();
        assert_eq!(g2.n(), g.n());
        assert_eq!(g2.edge_count(), g.edge_count());
        assert_eq!(ids2, ids);
        for v in 0..g.n() {
            let mut a = g.out_neighbors(v).to_vec();
            let mut b = g2.out_neighbors(v).to_vec();
            a.sort_unstable();
            b.sort_unstable();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn label_maps_assign_classes_and_keep_isolated_nodes() {
        let edges = tmp("10 20\n");
        let labels = tmp("10 left\n20 right\n30 left\n");
        let map = read_label_map(labels.path()).unwrap();
        let (g, ids) = load_edge_list(edges.path(), Some(&map)).unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.edge_count(), 1);
        let name_of = |id: u64| {
            let dense = ids.iter().position(|&x| x == id).unwrap();
            g.labels().name(g.label_of(dense)).to_string()
        };
        assert_eq!(name_of(10), "left");
        assert_eq!(name_of(20), "right");
        assert_eq!(name_of(30), "left");
    }

    #[test]
    fn label_map_round_trip() {
        let edges = tmp("0 1\n");
        let labels = tmp("0 a\n1 b\n");
        let map = read_label_map(labels.path()).unwrap();
        let (g, ids) = load_edge_list(edges.path(), Some(&map)).unwrap();
        let out = tempfile::NamedTempFile::new().unwrap();
        write_label_map(&g, out.path(), Some(&ids)).unwrap();
        assert_eq!(read_label_map(out.path()).unwrap(), map);
    }
}
