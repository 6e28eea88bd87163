//! Square-lattice torus with qubits on edges.
//!
//! Edge `h(x, y)` joins vertices `(x, y)` and `(x+1, y)`; edge `v(x, y)` joins
//! `(x, y)` and `(x, y+1)`. Plaquette `(x, y)` is the face whose lower-left
//! corner is vertex `(x, y)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Dir {
    H,
    V,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusLattice {
    pub lx: usize,
    pub ly: usize,
}

impl TorusLattice {
    pub fn new(lx: usize, ly: usize) -> Result<Self> {
        if lx == 0 || ly == 0 {
            return Err(Error::Geometry(format!("empty torus {lx}x{ly}")));
        }
        Ok(Self { lx, ly })
    }

    pub fn n_edges(&self) -> usize {
        2 * self.lx * self.ly
    }

    pub fn n_vertices(&self) -> usize {
        self.lx * self.ly
    }

    pub fn n_plaquettes(&self) -> usize {
        self.lx * self.ly
    }

    fn wrap(&self, x: isize, y: isize) -> (usize, usize) {
        (
            x.rem_euclid(self.lx as isize) as usize,
            y.rem_euclid(self.ly as isize) as usize,
        )
    }

    pub fn edge(&self, dir: Dir, x: isize, y: isize) -> usize {
        let (x, y) = self.wrap(x, y);
        2 * (y * self.lx + x) + usize::from(dir == Dir::V)
    }

    /// Inverse of [`TorusLattice::edge`].
    pub fn edge_coords(&self, e: usize) -> (Dir, usize, usize) {
        let cell = e / 2;
        let dir = if e % 2 == 0 { Dir::H } else { Dir::V };
        (dir, cell % self.lx, cell / self.lx)
    }

    pub fn vertex(&self, x: isize, y: isize) -> usize {
        let (x, y) = self.wrap(x, y);
        y * self.lx + x
    }

    /// Endpoints of an edge as vertex indices.
    pub fn edge_vertices(&self, e: usize) -> (usize, usize) {
        let (dir, x, y) = self.edge_coords(e);
        let (x, y) = (x as isize, y as isize);
        match dir {
            Dir::H => (self.vertex(x, y), self.vertex(x + 1, y)),
            Dir::V => (self.vertex(x, y), self.vertex(x, y + 1)),
        }
    }

    /// The four edges touching vertex `(x, y)`.
    pub fn star(&self, x: isize, y: isize) -> [usize; 4] {
        [
            self.edge(Dir::H, x, y),
            self.edge(Dir::H, x - 1, y),
            self.edge(Dir::V, x, y),
            self.edge(Dir::V, x, y - 1),
        ]
    }

    /// The four edges bounding plaquette `(x, y)`.
    pub fn plaquette(&self, x: isize, y: isize) -> [usize; 4] {
        [
            self.edge(Dir::H, x, y),
            self.edge(Dir::H, x, y + 1),
            self.edge(Dir::V, x, y),
            self.edge(Dir::V, x + 1, y),
        ]
    }

    /// Diagonal half-translation δ: `h(x,y) → v(x+1,y)`, `v(x,y) → h(x,y+1)`.
    ///
    /// It carries stars onto plaquettes and plaquettes onto stars shifted by
    /// (1, 1), so applying it twice is the lattice translation by (1, 1).
    pub fn translate_delta(&self, e: usize) -> usize {
        let (dir, x, y) = self.edge_coords(e);
        let (x, y) = (x as isize, y as isize);
        match dir {
            Dir::H => self.edge(Dir::V, x + 1, y),
            Dir::V => self.edge(Dir::H, x, y + 1),
        }
    }

    /// Translation by an integer vector.
    pub fn translate(&self, e: usize, dx: isize, dy: isize) -> usize {
        let (dir, x, y) = self.edge_coords(e);
        self.edge(dir, x as isize + dx, y as isize + dy)
    }

    /// Edges of a direct-lattice path given as a vertex sequence of
    /// nearest neighbours.
    pub fn direct_path(&self, verts: &[(isize, isize)]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(verts.len().saturating_sub(1));
        for w in verts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let e = match (x1 - x0, y1 - y0) {
                (1, 0) => self.edge(Dir::H, x0, y0),
                (-1, 0) => self.edge(Dir::H, x1, y1),
                (0, 1) => self.edge(Dir::V, x0, y0),
                (0, -1) => self.edge(Dir::V, x1, y1),
                _ => {
                    return Err(Error::Geometry(format!(
                        "non-adjacent step {:?} -> {:?}",
                        w[0], w[1]
                    )))
                }
            };
            out.push(e);
        }
        Ok(out)
    }

    /// Edges crossed by a dual path given as a sequence of adjacent
    /// plaquettes.
    pub fn dual_path(&self, plaqs: &[(isize, isize)]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(plaqs.len().saturating_sub(1));
        for w in plaqs.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            let e = match (x1 - x0, y1 - y0) {
                (1, 0) => self.edge(Dir::V, x1, y0),
                (-1, 0) => self.edge(Dir::V, x0, y0),
                (0, 1) => self.edge(Dir::H, x0, y1),
                (0, -1) => self.edge(Dir::H, x0, y0),
                _ => {
                    return Err(Error::Geometry(format!(
                        "non-adjacent dual step {:?} -> {:?}",
                        w[0], w[1]
                    )))
                }
            };
            out.push(e);
        }
        Ok(out)
    }
}
