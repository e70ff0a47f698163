//! Chains and square lattices with nearest-neighbour edges.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LatticeError {
    #[error("unsupported dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(u8),
    #[error("linear size must be at least 2, got {0}")]
    TooSmall(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Open,
    #[default]
    Periodic,
}

/// A `dimension`-dimensional hypercubic lattice of linear size `l`.
/// Site `(x, y)` of a square lattice has index `y·l + x`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub dimension: u8,
    pub l: usize,
    pub boundary: Boundary,
}

impl LatticeSpec {
    pub fn chain(l: usize, boundary: Boundary) -> Self {
        LatticeSpec { dimension: 1, l, boundary }
    }

    pub fn square(l: usize, boundary: Boundary) -> Self {
        LatticeSpec { dimension: 2, l, boundary }
    }

    pub fn validate(&self) -> Result<(), LatticeError> {
        if !(1..=2).contains(&self.dimension) {
            return Err(LatticeError::UnsupportedDimension(self.dimension));
        }
        if self.l < 2 {
            return Err(LatticeError::TooSmall(self.l));
        }
        Ok(())
    }

    pub fn n_sites(&self) -> usize {
        self.l.pow(u32::from(self.dimension))
    }

    /// `(x, y)` coordinates; `y = 0` on a chain.
    pub fn coords(&self, site: usize) -> (usize, usize) {
        if self.dimension == 1 {
            (site, 0)
        } else {
            (site % self.l, site / self.l)
        }
    }

    /// Default number of time steps: `2L` on a chain, `L` on a square lattice.
    pub fn default_t_max(&self) -> usize {
        if self.dimension == 1 {
            2 * self.l
        } else {
            self.l
        }
    }
}

/// Sites and edges in canonical order: sites ascending; for each site, the
/// `+x` edge then the `+y` edge (periodic edges wrap, open ones are dropped).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    pub spec: LatticeSpec,
    pub edges: Vec<(usize, usize)>,
}

impl Lattice {
    pub fn n_sites(&self) -> usize {
        self.spec.n_sites()
    }
}

pub fn build_lattice(spec: LatticeSpec) -> Result<Lattice, LatticeError> {
    spec.validate()?;
    let l = spec.l;
    let periodic = spec.boundary == Boundary::Periodic;
    let mut edges = Vec::new();
    match spec.dimension {
        1 => {
            for i in 0..l {
                if i + 1 < l {
                    edges.push((i, i + 1));
                } else if periodic {
                    edges.push((i, 0));
                }
            }
        }
        _ => {
            for y in 0..l {
                for x in 0..l {
                    let s = y * l + x;
                    if x + 1 < l {
                        edges.push((s, s + 1));
                    } else if periodic {
                        edges.push((s, y * l));
                    }
                    if y + 1 < l {
                        edges.push((s, s + l));
                    } else if periodic {
                        edges.push((s, x));
                    }
                }
            }
        }
    }
    Ok(Lattice { spec, edges })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_edges() {
        let pbc = build_lattice(LatticeSpec::chain(4, Boundary::Periodic)).unwrap();
        assert_eq!(pbc.edges, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
        let obc = build_lattice(LatticeSpec::chain(4, Boundary::Open)).unwrap();
        assert_eq!(obc.edges.len(), 3);
    }

    #[test]
    fn square_edge_counts() {
        let pbc = build_lattice(LatticeSpec::square(3, Boundary::Periodic)).unwrap();
        assert_eq!(pbc.edges.len(), 18);
        let obc = build_lattice(LatticeSpec::square(3, Boundary::Open)).unwrap();
        assert_eq!(obc.edges.len(), 12);
        for l in 2..7 {
            let e = build_lattice(LatticeSpec::square(l, Boundary::Periodic)).unwrap().edges;
            assert_eq!(e.len(), 2 * l * l);
        }
        assert_eq!(LatticeSpec::square(5, Boundary::Open).coords(7), (2, 1));
    }

    #[test]
    fn rejects_bad_specs() {
        assert_eq!(
            build_lattice(LatticeSpec { dimension: 3, l: 4, boundary: Boundary::Open }),
            Err(LatticeError::UnsupportedDimension(3))
        );
        assert_eq!(build_lattice(LatticeSpec::chain(1, Boundary::Open)), Err(LatticeError::TooSmall(1)));
    }
}
