use super::{ClusterEngine, Outcome, Partition, RbcError};
use crate::phase::PhaseValue;

/// Connectivity-only engine for the fixed `θ = π/4` protocol.
///
/// Clusters live in a union-find forest. Detaching a site (an `x` measurement
/// on a cluster of size ≥ 2) gives the site a fresh node and leaves its old
/// node behind as an interior "ghost" that still routes finds to the root, so
/// neither merges nor splits touch member lists. Roots store the number of live
/// sites. The forest is rebuilt once ghosts outnumber sites by a fixed factor.
///
/// Bits, phases and outcomes are not tracked: under the `π/4` protocol a
/// cluster's magic is fixed by its size parity, and cluster structure never
/// depends on measurement outcomes.
#[derive(Debug, Clone)]
pub struct ParityState {
    site_node: Vec<u32>,
    parent: Vec<u32>,
    /// live sites below each root (stale for non-roots)
    live: Vec<u32>,
    n_clusters: usize,
}

const COMPACT_FACTOR: usize = 4;

impl ParityState {
    /// All sites in singleton clusters.
    pub fn new(n_sites: usize) -> Self {
        ParityState {
            site_node: (0..n_sites as u32).collect(),
            parent: (0..n_sites as u32).collect(),
            live: vec![1; n_sites],
            n_clusters: n_sites,
        }
    }

    pub fn n_sites(&self) -> usize {
        self.site_node.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    #[inline]
    fn find(&mut self, mut x: u32) -> u32 {
        // path halving
        loop {
            let p = self.parent[x as usize];
            if p == x {
                return x;
            }
            let gp = self.parent[p as usize];
            self.parent[x as usize] = gp;
            x = gp;
        }
    }

    fn find_readonly(&self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            x = self.parent[x as usize];
        }
        x
    }

    fn check(&self, site: usize) -> Result<(), RbcError> {
        if site >= self.n_sites() {
            return Err(RbcError::SiteOutOfRange { site, n_sites: self.n_sites() });
        }
        Ok(())
    }

    /// Size of the cluster containing `site`.
    pub fn cluster_size(&mut self, site: usize) -> usize {
        let r = self.find(self.site_node[site]);
        self.live[r as usize] as usize
    }

    pub fn same_cluster(&mut self, i: usize, j: usize) -> bool {
        self.find(self.site_node[i]) == self.find(self.site_node[j])
    }

    /// Detaches `site` into its own cluster.
    pub fn split(&mut self, site: usize) -> Result<(), RbcError> {
        self.check(site)?;
        let root = self.find(self.site_node[site]);
        if self.live[root as usize] == 1 {
            return Ok(());
        }
        self.live[root as usize] -= 1;
        let fresh = self.parent.len() as u32;
        self.parent.push(fresh);
        self.live.push(1);
        self.site_node[site] = fresh;
        self.n_clusters += 1;
        if self.parent.len() > COMPACT_FACTOR * self.n_sites() + 64 {
            self.compact();
        }
        Ok(())
    }

    /// Merges the clusters of `i` and `j`.
    pub fn merge(&mut self, i: usize, j: usize) -> Result<(), RbcError> {
        self.check(i)?;
        self.check(j)?;
        if i == j {
            return Err(RbcError::SameSite(i));
        }
        let ri = self.find(self.site_node[i]);
        let rj = self.find(self.site_node[j]);
        if ri == rj {
            return Ok(());
        }
        let (big, small) = if self.live[ri as usize] >= self.live[rj as usize] { (ri, rj) } else { (rj, ri) };
        self.parent[small as usize] = big;
        self.live[big as usize] += self.live[small as usize];
        self.n_clusters -= 1;
        Ok(())
    }

    /// Drops ghost nodes: one node per cluster, every site pointing straight at it.
    fn compact(&mut self) {
        let n = self.n_sites();
        let mut remap = vec![u32::MAX; self.parent.len()];
        let mut next = 0u32;
        let mut new_live = Vec::with_capacity(self.n_clusters);
        for site in 0..n {
            let r = self.find(self.site_node[site]) as usize;
            if remap[r] == u32::MAX {
                remap[r] = next;
                new_live.push(self.live[r]);
                next += 1;
            }
            self.site_node[site] = remap[r];
        }
        self.parent = (0..next).collect();
        self.live = new_live;
    }

    /// Root node per site, without path compression.
    pub fn roots(&self) -> Vec<u32> {
        self.site_node.iter().map(|&x| self.find_readonly(x)).collect()
    }
}

impl ClusterEngine for ParityState {
    fn n_sites(&self) -> usize {
        ParityState::n_sites(self)
    }

    fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    fn needs_outcomes(&self) -> bool {
        false
    }

    fn apply_x(&mut self, site: usize, _theta: PhaseValue, _u: f64) -> Result<Option<Outcome>, RbcError> {
        self.split(site).map(|_| None)
    }

    fn apply_zz(&mut self, i: usize, j: usize, _u: f64) -> Result<Option<Outcome>, RbcError> {
        self.merge(i, j).map(|_| None)
    }

    fn partition(&mut self) -> Partition {
        let roots: Vec<u32> = (0..self.n_sites()).map(|s| self.find(self.site_node[s])).collect();
        Partition::from_labels(&roots, |_, size| PhaseValue::exact(i64::from(size % 2)))
    }
}
