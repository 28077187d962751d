//! Two-level discretization of the unit square.
//!
//! The coarse mesh is an `Nc x Nc` grid of squares of side `H = 1/Nc`; the fine
//! mesh splits the unit square into `Nf x Nf` squares of side `h = 1/Nf`, each cut
//! by its lower-left to upper-right diagonal. Fine nodes, fine triangles and
//! coarse cells are all numbered row-major (x fastest).

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Segment `x = const`, oriented bottom to top.
    Vertical,
    /// Segment `y = const`, oriented left to right.
    Horizontal,
}

/// Interior coarse edge shared by two coarse cells.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoarseEdge {
    pub id: usize,
    pub orientation: Orientation,
    /// Lattice position `(I, J)` of the start node.
    pub origin: (usize, usize),
    /// Coarse node ids of the start and end points.
    pub start: usize,
    pub end: usize,
    /// Left/right cells of a vertical edge, lower/upper cells of a horizontal one.
    pub cells: [usize; 2],
}

/// Axis-aligned box of fine lattice nodes, `[i0, i1] x [j0, j1]` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Bounds {
    pub i0: usize,
    pub j0: usize,
    pub i1: usize,
    pub j1: usize,
}

impl Bounds {
    pub fn nx(&self) -> usize {
        self.i1 - self.i0
    }

    pub fn ny(&self) -> usize {
        self.j1 - self.j0
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        (self.i0..=self.i1).contains(&i) && (self.j0..=self.j1).contains(&j)
    }

    pub fn contains_box(&self, other: &Bounds) -> bool {
        self.i0 <= other.i0 && self.j0 <= other.j0 && other.i1 <= self.i1 && other.j1 <= self.j1
    }

    pub fn num_nodes(&self) -> usize {
        (self.nx() + 1) * (self.ny() + 1)
    }
}

/// Union of a rectangular block of coarse cells, described on the fine mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    bounds: Bounds,
    stride: usize,
    nodes: Vec<usize>,
    on_boundary: Vec<bool>,
    on_domain_boundary: Vec<bool>,
    triangles: Vec<usize>,
    cells: Vec<usize>,
}

/// A fine node on the boundary of a region.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceNode {
    pub global: usize,
    pub local: usize,
    pub on_domain_boundary: bool,
}

impl Region {
    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    /// Fine node ids, ascending.
    pub fn nodes(&self) -> &[usize] {
        &self.nodes
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn on_boundary(&self) -> &[bool] {
        &self.on_boundary
    }

    pub fn on_domain_boundary(&self) -> &[bool] {
        &self.on_domain_boundary
    }

    /// Fine triangle ids, ascending.
    pub fn triangles(&self) -> &[usize] {
        &self.triangles
    }

    /// Coarse cell ids, ascending.
    pub fn cells(&self) -> &[usize] {
        &self.cells
    }

    pub fn local_index(&self, global: usize) -> Option<usize> {
        let (i, j) = (global % self.stride, global / self.stride);
        self.local_index_lattice(i, j)
    }

    pub fn local_index_lattice(&self, i: usize, j: usize) -> Option<usize> {
        let b = &self.bounds;
        b.contains(i, j)
            .then(|| (j - b.j0) * (b.nx() + 1) + (i - b.i0))
    }

    pub fn interior_locals(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| !self.on_boundary[k]).collect()
    }

    pub fn boundary_locals(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&k| self.on_boundary[k]).collect()
    }

    /// Boundary nodes in counterclockwise order starting at the lower-left corner.
    pub fn boundary_trace_nodes(&self) -> Vec<TraceNode> {
        let b = self.bounds;
        let mut lattice = Vec::with_capacity(2 * (b.nx() + b.ny()));
        lattice.extend((b.i0..b.i1).map(|i| (i, b.j0)));
        lattice.extend((b.j0..b.j1).map(|j| (b.i1, j)));
        lattice.extend((b.i0 + 1..=b.i1).rev().map(|i| (i, b.j1)));
        lattice.extend((b.j0 + 1..=b.j1).rev().map(|j| (b.i0, j)));
        lattice
            .into_iter()
            .map(|(i, j)| {
                let local = self.local_index_lattice(i, j).expect("on box");
                TraceNode {
                    global: self.nodes[local],
                    local,
                    on_domain_boundary: self.on_domain_boundary[local],
                }
            })
            .collect()
    }
}

/// Coarse square grid plus its conforming fine triangulation over `[0,1]^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoLevelMesh {
    nc: usize,
    nf: usize,
    edges: Vec<CoarseEdge>,
}

impl TwoLevelMesh {
    pub fn new(nc: usize, nf: usize) -> Result<Self> {
        if nc == 0 {
            return Err(Error::EmptyMesh);
        }
        if nf % nc != 0 {
            return Err(Error::InvalidRatio { nc, nf });
        }
        if nf / nc < 2 {
            return Err(Error::TooCoarse { ratio: nf / nc });
        }
        let mut edges = Vec::with_capacity(2 * nc * (nc - 1));
        let cell = |ci: usize, cj: usize| cj * nc + ci;
        let cnode = |i: usize, j: usize| j * (nc + 1) + i;
        for j in 0..nc {
            for i in 1..nc {
                edges.push(CoarseEdge {
                    id: edges.len(),
                    orientation: Orientation::Vertical,
                    origin: (i, j),
                    start: cnode(i, j),
                    end: cnode(i, j + 1),
                    cells: [cell(i - 1, j), cell(i, j)],
                });
            }
        }
        for j in 1..nc {
            for i in 0..nc {
                edges.push(CoarseEdge {
                    id: edges.len(),
                    orientation: Orientation::Horizontal,
                    origin: (i, j),
                    start: cnode(i, j),
                    end: cnode(i + 1, j),
                    cells: [cell(i, j - 1), cell(i, j)],
                });
            }
        }
        Ok(Self { nc, nf, edges })
    }

    pub fn nc(&self) -> usize {
        self.nc
    }

    pub fn nf(&self) -> usize {
        self.nf
    }

    /// Fine squares per coarse cell side.
    pub fn ratio(&self) -> usize {
        self.nf / self.nc
    }

    pub fn coarse_size(&self) -> f64 {
        1.0 / self.nc as f64
    }

    pub fn fine_size(&self) -> f64 {
        1.0 / self.nf as f64
    }

    // ---- fine nodes ----

    pub fn num_nodes(&self) -> usize {
        (self.nf + 1) * (self.nf + 1)
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nf + 1) + i
    }

    pub fn node_lattice(&self, id: usize) -> (usize, usize) {
        (id % (self.nf + 1), id / (self.nf + 1))
    }

    pub fn node_coords(&self, id: usize) -> [f64; 2] {
        let (i, j) = self.node_lattice(id);
        [i as f64 / self.nf as f64, j as f64 / self.nf as f64]
    }

    pub fn is_domain_boundary_node(&self, id: usize) -> bool {
        let (i, j) = self.node_lattice(id);
        i == 0 || j == 0 || i == self.nf || j == self.nf
    }

    // ---- fine triangles ----

    pub fn num_triangles(&self) -> usize {
        2 * self.nf * self.nf
    }

    pub fn triangle_area(&self) -> f64 {
        0.5 * self.fine_size() * self.fine_size()
    }

    /// Vertices of a fine triangle, counterclockwise.
    pub fn triangle_nodes(&self, t: usize) -> [usize; 3] {
        let sq = t / 2;
        let (i, j) = (sq % self.nf, sq / self.nf);
        let n = |a, b| self.node_index(a, b);
        if t % 2 == 0 {
            [n(i, j), n(i + 1, j), n(i + 1, j + 1)]
        } else {
            [n(i, j), n(i + 1, j + 1), n(i, j + 1)]
        }
    }

    pub fn triangle_centroid(&self, t: usize) -> [f64; 2] {
        let sq = t / 2;
        let (i, j) = ((sq % self.nf) as f64, (sq / self.nf) as f64);
        let h = self.fine_size();
        if t % 2 == 0 {
            [(i + 2.0 / 3.0) * h, (j + 1.0 / 3.0) * h]
        } else {
            [(i + 1.0 / 3.0) * h, (j + 2.0 / 3.0) * h]
        }
    }

    pub fn cell_of_triangle(&self, t: usize) -> usize {
        let sq = t / 2;
        let r = self.ratio();
        let (i, j) = (sq % self.nf, sq / self.nf);
        (j / r) * self.nc + i / r
    }

    // ---- coarse cells ----

    pub fn num_cells(&self) -> usize {
        self.nc * self.nc
    }

    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        cj * self.nc + ci
    }

    pub fn cell_lattice(&self, c: usize) -> (usize, usize) {
        (c % self.nc, c / self.nc)
    }

    pub fn cell_area(&self) -> f64 {
        self.coarse_size() * self.coarse_size()
    }

    // ---- coarse nodes ----

    pub fn num_coarse_nodes(&self) -> usize {
        (self.nc + 1) * (self.nc + 1)
    }

    pub fn coarse_node_index(&self, i: usize, j: usize) -> usize {
        j * (self.nc + 1) + i
    }

    pub fn coarse_node_lattice(&self, id: usize) -> (usize, usize) {
        (id % (self.nc + 1), id / (self.nc + 1))
    }

    pub fn coarse_node_is_interior(&self, id: usize) -> bool {
        let (i, j) = self.coarse_node_lattice(id);
        id < self.num_coarse_nodes() && i > 0 && j > 0 && i < self.nc && j < self.nc
    }

    /// Interior coarse node ids, ascending.
    pub fn interior_coarse_nodes(&self) -> Vec<usize> {
        (0..self.num_coarse_nodes())
            .filter(|&n| self.coarse_node_is_interior(n))
            .collect()
    }

    pub fn coarse_node_fine_index(&self, id: usize) -> usize {
        let (i, j) = self.coarse_node_lattice(id);
        let r = self.ratio();
        self.node_index(i * r, j * r)
    }

    // ---- coarse edges ----

    pub fn interior_edges(&self) -> &[CoarseEdge] {
        &self.edges
    }

    pub fn edge(&self, id: usize) -> Result<&CoarseEdge> {
        self.edges.get(id).ok_or(Error::UnknownEdge(id))
    }

    pub fn vertical_edge_id(&self, i: usize, j: usize) -> usize {
        j * (self.nc - 1) + (i - 1)
    }

    pub fn horizontal_edge_id(&self, i: usize, j: usize) -> usize {
        self.nc * (self.nc - 1) + (j - 1) * self.nc + i
    }

    /// Fine nodes along an edge from its start to its end, endpoints included.
    pub fn edge_fine_nodes(&self, edge: &CoarseEdge) -> Vec<usize> {
        let r = self.ratio();
        let (i, j) = (edge.origin.0 * r, edge.origin.1 * r);
        match edge.orientation {
            Orientation::Vertical => (0..=r).map(|k| self.node_index(i, j + k)).collect(),
            Orientation::Horizontal => (0..=r).map(|k| self.node_index(i + k, j)).collect(),
        }
    }

    /// The four interior edges meeting at an interior coarse node, ordered
    /// right, up, left, down.
    pub fn node_incident_edges(&self, node: usize) -> Result<[usize; 4]> {
        if node >= self.num_coarse_nodes() {
            return Err(Error::UnknownNode(node));
        }
        if !self.coarse_node_is_interior(node) {
            return Err(Error::BoundaryNode(node));
        }
        let (i, j) = self.coarse_node_lattice(node);
        Ok([
            self.horizontal_edge_id(i, j),
            self.vertical_edge_id(i, j),
            self.horizontal_edge_id(i - 1, j),
            self.vertical_edge_id(i, j - 1),
        ])
    }

    // ---- regions ----

    /// Block of coarse cells `[cx0, cx1) x [cy0, cy1)`.
    pub fn block_region(&self, cx0: usize, cy0: usize, cx1: usize, cy1: usize) -> Result<Region> {
        if cx0 >= cx1 || cy0 >= cy1 || cx1 > self.nc || cy1 > self.nc {
            return Err(Error::InvalidArgument(format!(
                "coarse block [{cx0},{cx1})x[{cy0},{cy1}) outside a {0}x{0} grid",
                self.nc
            )));
        }
        let r = self.ratio();
        let bounds = Bounds {
            i0: cx0 * r,
            j0: cy0 * r,
            i1: cx1 * r,
            j1: cy1 * r,
        };
        let mut nodes = Vec::with_capacity(bounds.num_nodes());
        let mut on_boundary = Vec::with_capacity(bounds.num_nodes());
        let mut on_domain_boundary = Vec::with_capacity(bounds.num_nodes());
        for j in bounds.j0..=bounds.j1 {
            for i in bounds.i0..=bounds.i1 {
                let id = self.node_index(i, j);
                nodes.push(id);
                on_boundary.push(i == bounds.i0 || i == bounds.i1 || j == bounds.j0 || j == bounds.j1);
                on_domain_boundary.push(self.is_domain_boundary_node(id));
            }
        }
        let mut triangles = Vec::with_capacity(2 * bounds.nx() * bounds.ny());
        for j in bounds.j0..bounds.j1 {
            for i in bounds.i0..bounds.i1 {
                let sq = j * self.nf + i;
                triangles.push(2 * sq);
                triangles.push(2 * sq + 1);
            }
        }
        let cells = (cy0..cy1)
            .flat_map(|cj| (cx0..cx1).map(move |ci| (ci, cj)))
            .map(|(ci, cj)| self.cell_index(ci, cj))
            .collect();
        Ok(Region {
            bounds,
            stride: self.nf + 1,
            nodes,
            on_boundary,
            on_domain_boundary,
            triangles,
            cells,
        })
    }

    pub fn domain_region(&self) -> Region {
        self.block_region(0, 0, self.nc, self.nc).expect("whole grid")
    }

    pub fn cell_region(&self, cell: usize) -> Result<Region> {
        if cell >= self.num_cells() {
            return Err(Error::InvalidArgument(format!("unknown cell {cell}")));
        }
        let (ci, cj) = self.cell_lattice(cell);
        self.block_region(ci, cj, ci + 1, cj + 1)
    }

    /// Oversampling patch of an interior edge: two cells across the edge and
    /// three along it, clipped at the domain boundary.
    pub fn edge_patch(&self, edge: usize) -> Result<Region> {
        let e = *self.edge(edge)?;
        let (i, j) = e.origin;
        let clip_lo = |v: usize| v.saturating_sub(1);
        let clip_hi = |v: usize| (v + 2).min(self.nc);
        match e.orientation {
            Orientation::Vertical => self.block_region(i - 1, clip_lo(j), i + 1, clip_hi(j)),
            Orientation::Horizontal => self.block_region(clip_lo(i), j - 1, clip_hi(i), j + 1),
        }
    }

    /// The two cells adjacent to an interior edge, as one region.
    pub fn edge_support(&self, edge: usize) -> Result<Region> {
        let e = *self.edge(edge)?;
        let (i, j) = e.origin;
        match e.orientation {
            Orientation::Vertical => self.block_region(i - 1, j, i + 1, j + 1),
            Orientation::Horizontal => self.block_region(i, j - 1, i + 1, j + 1),
        }
    }

    /// The four cells around an interior coarse node.
    pub fn node_patch(&self, node: usize) -> Result<Region> {
        if node >= self.num_coarse_nodes() {
            return Err(Error::UnknownNode(node));
        }
        if !self.coarse_node_is_interior(node) {
            return Err(Error::BoundaryNode(node));
        }
        let (i, j) = self.coarse_node_lattice(node);
        self.block_region(i - 1, j - 1, i + 1, j + 1)
    }
}
