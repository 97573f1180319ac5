//! Cascades spreading through disjoint communities.
//!
//! A cascade starts in a uniformly chosen community. Before each further
//! activation it stays in its current community with probability
//! `1 − cross_community_prob` and otherwise moves to a uniformly chosen other
//! community; the next node is drawn uniformly from that community's nodes
//! that are not yet part of the cascade. Node `c * nodes_per_community + j`
//! belongs to community `c`.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::Rng;

use super::cascade::{Cascade, Vocabulary};
use crate::error::{invalid, Result};
use crate::numerics::{RngState, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub communities: usize,
    pub nodes_per_community: usize,
    pub cross_community_prob: f64,
    pub cascades: usize,
    /// Inclusive bounds on the sampled cascade length.
    pub length_range: (usize, usize),
    pub seed: u64,
    /// Allow a node to be activated more than once per cascade.
    pub revisits: bool,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            communities: 2,
            nodes_per_community: 20,
            cross_community_prob: 0.1,
            cascades: 500,
            length_range: (10, 20),
            seed: 0,
            revisits: false,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.communities == 0 || self.nodes_per_community == 0 || self.cascades == 0 {
            return Err(invalid("communities, nodes per community and cascades must be positive"));
        }
        if !(0.0..=1.0).contains(&self.cross_community_prob) {
            return Err(invalid(format!(
                "cross-community probability must be in [0, 1], got {}",
                self.cross_community_prob
            )));
        }
        let (lo, hi) = self.length_range;
        if lo < 2 || hi < lo {
            return Err(invalid(format!(
                "length range must satisfy 2 <= min <= max, got ({lo}, {hi})"
            )));
        }
        if !self.revisits && self.total_nodes() < 2 {
            return Err(invalid("need at least 2 nodes without revisits"));
        }
        Ok(())
    }

    pub fn total_nodes(&self) -> usize {
        self.communities * self.nodes_per_community
    }

    pub fn community_of(&self, node: usize) -> usize {
        node / self.nodes_per_community
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    /// Node indices equal the global node numbers described in the module docs.
    pub cascades: Vec<Cascade>,
    /// Community of each node, indexed by node number.
    pub labels: Vec<usize>,
    /// Community that produced each activation, per cascade.
    pub trajectories: Vec<Vec<usize>>,
    /// Steps at which the stay-or-jump coin was flipped, and how many jumped.
    pub jump_draws: usize,
    pub jumps: usize,
}

impl SyntheticData {
    /// Vocabulary mapping node number `i` to raw id `"i"`.
    pub fn vocabulary(&self) -> Vocabulary {
        let mut v = Vocabulary::new();
        for i in 0..self.labels.len() {
            v.insert(&i.to_string());
        }
        v
    }

    pub fn average_length(&self) -> f64 {
        let total: usize = self.cascades.iter().map(Cascade::len).sum();
        total as f64 / self.cascades.len().max(1) as f64
    }

    /// Writes `node_id<TAB>community_index` for every node.
    pub fn write_labels<W: Write>(&self, mut w: W) -> Result<()> {
        for (node, c) in self.labels.iter().enumerate() {
            writeln!(w, "{node}\t{c}")?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<SyntheticData> {
    spec.validate()?;
    let mut rng = RngState::for_stream(spec.seed, Stream::Synth);
    let npc = spec.nodes_per_community;
    let labels: Vec<usize> = (0..spec.total_nodes()).map(|v| spec.community_of(v)).collect();
    let mut cascades = Vec::with_capacity(spec.cascades);
    let mut trajectories = Vec::with_capacity(spec.cascades);
    let (mut jump_draws, mut jumps) = (0, 0);

    for _ in 0..spec.cascades {
        let target_len = rng.gen_range(spec.length_range.0..=spec.length_range.1);
        let mut used = vec![false; spec.total_nodes()];
        let mut nodes = Vec::with_capacity(target_len);
        let mut path = Vec::with_capacity(target_len);
        let mut community = rng.gen_range(0..spec.communities);

        while nodes.len() < target_len {
            if !nodes.is_empty() && spec.communities > 1 {
                jump_draws += 1;
                if rng.gen::<f64>() < spec.cross_community_prob {
                    jumps += 1;
                    let offset = rng.gen_range(1..spec.communities);
                    community = (community + offset) % spec.communities;
                }
            }
            let free = |c: usize, used: &[bool]| -> Vec<usize> {
                (c * npc..(c + 1) * npc).filter(|&v| spec.revisits || !used[v]).collect()
            };
            let mut candidates = free(community, &used);
            if candidates.is_empty() {
                // Current community exhausted: move to one that still has
                // uninfected nodes, or end the cascade.
                let open: Vec<usize> = (0..spec.communities)
                    .filter(|&c| !free(c, &used).is_empty())
                    .collect();
                match open.choose(&mut rng) {
                    Some(&c) => {
                        community = c;
                        candidates = free(c, &used);
                    }
                    None => break,
                }
            }
            let node = *candidates.choose(&mut rng).expect("non-empty");
            used[node] = true;
            nodes.push(node);
            path.push(community);
        }
        cascades.push(Cascade::new(nodes));
        trajectories.push(path);
    }

    Ok(SyntheticData {
        cascades,
        labels,
        trajectories,
        jump_draws,
        jumps,
    })
}
