//! Coupled generation of the relevant neighborhood of a random node (graph
//! side, stubs sampled without replacement) and the truncated branching
//! process (tree side, stubs sampled with replacement).
//!
//! Both processes consume, per ordered label pair, the same lazily generated
//! sequence of coupled stub draws (L_h, M_h): L_h is uniform over all stub
//! positions; M_h equals L_h whenever that position is still free, otherwise
//! it is uniform over the remaining free positions. While the two structures
//! are provably identical they also share their exploration clocks and their
//! uniform node picks; after divergence the tree continues on independent
//! randomness.

use crate::graph::LabeledGraph;
use crate::rng;
use rand::Rng;
use std::collections::{HashMap, HashSet};

const SUB_COUPLE: u64 = 0xc0;

#[derive(Debug, Clone)]
pub struct CouplingTrace {
    /// No tree stub draw had L != M (sampling orders agreed).
    pub b1: bool,
    /// No two tree nodes mapped to the same graph node and none to the root.
    pub b2: bool,
    /// The two generated structures are isomorphic as rooted labeled trees
    /// with exploration marks.
    pub equal: bool,
    pub graph_nodes: usize,
    pub tree_nodes: usize,
}

/// Per ordered label pair: the in-stub target list and the coupled
/// with/without-replacement draw sequence, generated on demand.
struct PairDraws {
    /// Graph node owning each stub position.
    heads: Vec<u32>,
    /// Partial Fisher-Yates permutation; positions perm[..drawn.len()] are
    /// the ones already taken by the M sequence.
    perm: Vec<u32>,
    /// Index of each position inside perm.
    pos: Vec<u32>,
    used: Vec<bool>,
    /// Coupled (L_h, M_h) stub positions, 0-based.
    drawn: Vec<(u32, u32)>,
    rng: rng::Stream,
}

impl PairDraws {
    fn new(heads: Vec<u32>, rng: rng::Stream) -> Self {
        let l = heads.len();
        PairDraws {
            heads,
            perm: (0..l as u32).collect(),
            pos: (0..l as u32).collect(),
            used: vec![false; l],
            drawn: Vec::new(),
            rng,
        }
    }

    /// The h-th coupled draw (0-based), generating up to it if needed. Once
    /// the without-replacement pool is exhausted (only the tree side can get
    /// this far) M is reported as a sentinel that never equals L.
    fn get(&mut self, h: usize) -> (u32, u32) {
        while self.drawn.len() <= h {
            let i = self.drawn.len();
            if i >= self.heads.len() {
                let l = self.rng.gen_range(0..self.heads.len()) as u32;
                self.drawn.push((l, u32::MAX));
                continue;
            }
            let l = self.rng.gen_range(0..self.heads.len()) as u32;
            let j = if self.used[l as usize] {
                // redraw uniform among the free positions perm[i..]
                self.rng.gen_range(i..self.perm.len())
            } else {
                self.pos[l as usize] as usize
            };
            let m = self.perm[j];
            self.perm.swap(i, j);
            self.pos[self.perm[i] as usize] = i as u32;
            self.pos[self.perm[j] as usize] = j as u32;
            self.used[m as usize] = true;
            self.drawn.push((l, m));
        }
        self.drawn[h]
    }
}

struct TreeShape {
    class: Vec<usize>,
    explored: Vec<bool>,
    children: Vec<Vec<usize>>,
}

impl TreeShape {
    fn new(root_class: usize) -> Self {
        TreeShape {
            class: vec![root_class],
            explored: vec![false],
            children: vec![vec![]],
        }
    }

    fn add_child(&mut self, parent: usize, class: usize) -> usize {
        let id = self.class.len();
        self.class.push(class);
        self.explored.push(false);
        self.children.push(vec![]);
        self.children[parent].push(id);
        id
    }

    /// Canonical form of the subtree at `v`: children sorted by their own
    /// canonical forms, so isomorphic rooted trees get equal strings.
    fn canonical(&self, v: usize) -> String {
        let mut kids: Vec<String> = self.children[v].iter().map(|&c| self.canonical(c)).collect();
        kids.sort();
        format!(
            "({}:{}{})",
            self.class[v],
            u8::from(self.explored[v]),
            kids.concat()
        )
    }
}

fn exp_draw(rng: &mut rng::Stream, rate: usize) -> f64 {
    -rng.gen::<f64>().max(f64::MIN_POSITIVE).ln() / rate as f64
}

pub fn run_coupling(g: &LabeledGraph, t: f64, seed: u64) -> CouplingTrace {
    let na = g.labels().len();
    let mut rng_shared = rng::stream(seed, &[SUB_COUPLE, 0]);
    let mut rng_tree = rng::stream(seed, &[SUB_COUPLE, 1]);

    // in-stub lists: position h of pair (b, a) belongs to the class-a node
    // owning that in-stub from class b
    let mut heads: Vec<Vec<u32>> = vec![Vec::new(); na * na];
    for v in 0..g.n() {
        let a = g.label_of(v);
        let d = g.in_degree_vec(v);
        for b in 0..na {
            for _ in 0..d[b] {
                heads[b * na + a].push(v as u32);
            }
        }
    }
    let mut pairs: Vec<PairDraws> = heads
        .into_iter()
        .enumerate()
        .map(|(i, h)| PairDraws::new(h, rng::stream(seed, &[SUB_COUPLE, 2, i as u64])))
        .collect();

    let root = rng_shared.gen_range(0..g.n());
    let root_class = g.label_of(root);

    // graph side
    let mut g_nodes: Vec<u32> = vec![root as u32];
    let mut g_index: HashMap<u32, usize> = HashMap::from([(root as u32, 0)]);
    let mut g_unexplored: Vec<usize> = vec![0];
    let mut g_counts = vec![0usize; na * na];
    let mut g_shape = TreeShape::new(root_class);
    let mut g_is_tree = true;
    let mut g_time = 0.0f64;
    let mut g_active = true;

    // tree side: node -> mapped graph vertex
    let mut t_map: Vec<u32> = vec![root as u32];
    let mut t_unexplored: Vec<usize> = vec![0];
    let mut t_counts = vec![0usize; na * na];
    let mut t_shape = TreeShape::new(root_class);
    let mut t_time = 0.0f64;
    let mut t_active = true;

    let mut mapped: HashSet<u32> = HashSet::from([root as u32]);
    let mut b1 = true;
    let mut b2 = true;
    let mut aligned = true;

    loop {
        g_active = g_active && !g_unexplored.is_empty();
        t_active = t_active && !t_unexplored.is_empty();
        if !g_active && !t_active {
            break;
        }
        let share_clock = g_active && t_active && g_unexplored.len() == t_unexplored.len();
        if g_active {
            let gamma = exp_draw(&mut rng_shared, g_unexplored.len());
            g_time += gamma;
            if share_clock {
                t_time += gamma;
            }
            if g_time > t {
                g_active = false;
            }
        }
        if t_active && !share_clock {
            t_time += exp_draw(&mut rng_tree, t_unexplored.len());
        }
        if t_active && t_time > t {
            t_active = false;
        }

        let share_pick = g_active && t_active && aligned;
        let g_pick = if g_active {
            Some(rng_shared.gen_range(0..g_unexplored.len()))
        } else {
            None
        };
        let t_pick = if t_active {
            if share_pick {
                g_pick
            } else {
                Some(rng_tree.gen_range(0..t_unexplored.len()))
            }
        } else {
            None
        };

        if let Some(pick) = g_pick {
            let node_idx = g_unexplored.swap_remove(pick);
            g_shape.explored[node_idx] = true;
            let u = g_nodes[node_idx] as usize;
            let b = g.label_of(u);
            let k = g.out_degree_vec(u);
            for a in 0..na {
                for _ in 0..k[a] {
                    let h = g_counts[b * na + a];
                    g_counts[b * na + a] = h + 1;
                    let (_, m) = pairs[b * na + a].get(h);
                    let target = pairs[b * na + a].heads[m as usize];
                    match g_index.get(&target) {
                        Some(_) => {
                            // second edge into an existing node (or the root)
                            g_is_tree = false;
                            aligned = false;
                        }
                        None => {
                            let idx = g_nodes.len();
                            g_index.insert(target, idx);
                            g_nodes.push(target);
                            g_unexplored.push(idx);
                            let sid = g_shape.add_child(node_idx, a);
                            debug_assert_eq!(sid, idx);
                        }
                    }
                }
            }
        }

        if let Some(pick) = t_pick {
            let node_idx = t_unexplored.swap_remove(pick);
            t_shape.explored[node_idx] = true;
            let w = t_map[node_idx] as usize;
            let b = g.label_of(w);
            let k = g.out_degree_vec(w);
            for a in 0..na {
                for _ in 0..k[a] {
                    let h = t_counts[b * na + a];
                    t_counts[b * na + a] = h + 1;
                    let (l, m) = pairs[b * na + a].get(h);
                    if l != m {
                        b1 = false;
                        aligned = false;
                    }
                    let target = pairs[b * na + a].heads[l as usize];
                    if !mapped.insert(target) {
                        b2 = false;
                        aligned = false;
                    }
                    let idx = t_map.len();
                    t_map.push(target);
                    t_unexplored.push(idx);
                    t_shape.add_child(node_idx, a);
                }
            }
        }
    }

    let equal = g_is_tree
        && g_nodes.len() == t_map.len()
        && g_shape.canonical(0) == t_shape.canonical(0);
    CouplingTrace {
        b1,
        b2,
        equal,
        graph_nodes: g_nodes.len(),
        tree_nodes: t_map.len(),
    }
}
