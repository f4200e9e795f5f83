//! Shortest-path tables for the EDF baselines.

use rand::Rng;

use crate::model::ProblemSpec;

/// Hop distances to every destination and shortest-path counts.
#[derive(Debug, Clone)]
pub struct HopTable {
    /// `dist[dest][node]`, `u32::MAX` when unreachable.
    pub dist: Vec<Vec<u32>>,
    /// `paths[dest][node]`: number of distinct shortest paths.
    pub paths: Vec<Vec<f64>>,
    adjacency: Vec<Vec<usize>>,
}

impl HopTable {
    pub fn new(spec: &ProblemSpec) -> Self {
        let n = spec.num_nodes;
        let adjacency = spec.adjacency();
        let mut dist = vec![vec![u32::MAX; n]; n];
        let mut paths = vec![vec![0.0; n]; n];
        for d in 0..n {
            let dd = &mut dist[d];
            dd[d] = 0;
            let mut frontier = vec![d];
            let mut level = 0;
            while !frontier.is_empty() {
                level += 1;
                let mut next = Vec::new();
                for l in &spec.links {
                    if frontier.contains(&l.to.0) && dd[l.from.0] == u32::MAX {
                        dd[l.from.0] = level;
                        next.push(l.from.0);
                    }
                }
                frontier = next;
            }
            let mut order: Vec<usize> = (0..n).filter(|&i| dd[i] != u32::MAX).collect();
            order.sort_by_key(|&i| dd[i]);
            let pd = &mut paths[d];
            pd[d] = 1.0;
            for &i in order.iter().skip(1) {
                pd[i] = adjacency[i]
                    .iter()
                    .map(|&k| spec.links[k].to.0)
                    .filter(|&j| dd[j] != u32::MAX && dd[j] + 1 == dd[i])
                    .map(|j| pd[j])
                    .sum();
            }
        }
        Self { dist, paths, adjacency }
    }

    /// Links of a shortest path from `src` to `dest`, drawn uniformly at
    /// random among all shortest paths.
    pub fn sample_path(&self, spec: &ProblemSpec, src: usize, dest: usize, rng: &mut impl Rng) -> Vec<usize> {
        let dd = &self.dist[dest];
        let pd = &self.paths[dest];
        let mut path = Vec::new();
        let mut i = src;
        if dd[i] == u32::MAX {
            return path;
        }
        while i != dest {
            let mut u = rng.random::<f64>() * pd[i];
            let mut chosen = None;
            for &k in &self.adjacency[i] {
                let j = spec.links[k].to.0;
                if dd[j] != u32::MAX && dd[j] + 1 == dd[i] {
                    chosen = Some(k);
                    if u < pd[j] {
                        break;
                    }
                    u -= pd[j];
                }
            }
            let k = chosen.expect("shortest path continues");
            path.push(k);
            i = spec.links[k].to.0;
        }
        path
    }
}
