//! Dirichlet sub-problems on regions: harmonic extensions, bubbles, the
//! harmonic/bubble split and edge traces.

use nalgebra::DMatrix;

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::fem::{assemble_stiffness, load_vector, FineField, Forcing};
use crate::mesh::{CoarseEdge, Region, TwoLevelMesh};
use crate::sparse::{backward_error, SparseMatrix, SpdSolver, DEFAULT_TOL};

/// Stiffness matrix of a region, split into interior and boundary blocks, with
/// the interior block factored once for reuse.
#[derive(Debug, Clone)]
pub struct LocalProblem {
    region: Region,
    stiffness: SparseMatrix,
    interior: Vec<usize>,
    boundary: Vec<usize>,
    k_ii: SparseMatrix,
    k_ib: SparseMatrix,
    solver: SpdSolver,
}

impl LocalProblem {
    pub fn new(region: Region, mesh: &TwoLevelMesh, a: &CoefficientField) -> Result<Self> {
        let stiffness = assemble_stiffness(&region, mesh, a)?;
        let interior = region.interior_locals();
        let boundary = region.boundary_locals();
        let k_ii = stiffness.submatrix(&interior, &interior);
        let k_ib = stiffness.submatrix(&interior, &boundary);
        let solver = SpdSolver::new(&k_ii)?;
        Ok(Self {
            region,
            stiffness,
            interior,
            boundary,
            k_ii,
            k_ib,
            solver,
        })
    }

    pub fn region(&self) -> &Region {
        &self.region
    }

    pub fn stiffness(&self) -> &SparseMatrix {
        &self.stiffness
    }

    /// Interior region-local indices, ascending.
    pub fn interior(&self) -> &[usize] {
        &self.interior
    }

    /// Boundary region-local indices, ascending.
    pub fn boundary(&self) -> &[usize] {
        &self.boundary
    }

    fn solve_interior(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        self.solver.solve(&self.k_ii, rhs, DEFAULT_TOL)
    }

    /// Discrete a-harmonic field with the given values on the boundary nodes
    /// (ordered as `boundary()`).
    pub fn harmonic_extension(&self, trace: &[f64]) -> Result<FineField> {
        if trace.len() != self.boundary.len() {
            return Err(Error::DimensionMismatch {
                expected: self.boundary.len(),
                got: trace.len(),
            });
        }
        let rhs: Vec<f64> = self.k_ib.mul_vec(trace).iter().map(|v| -v).collect();
        let inner = self.solve_interior(&rhs)?;
        let mut values = vec![0.0; self.region.num_nodes()];
        for (k, &l) in self.boundary.iter().enumerate() {
            values[l] = trace[k];
        }
        for (k, &l) in self.interior.iter().enumerate() {
            values[l] = inner[k];
        }
        FineField::new(&self.region, values)
    }

    /// Harmonic extension of the boundary values of `field`.
    pub fn harmonic_part(&self, field: &FineField) -> Result<FineField> {
        field.check_region(&self.region)?;
        let trace: Vec<f64> = self.boundary.iter().map(|&l| field.values()[l]).collect();
        self.harmonic_extension(&trace)
    }

    /// Harmonic extensions of many traces at once; `traces` is
    /// `#boundary x m` and the result is `#region nodes x m`.
    pub fn harmonic_extension_many(&self, traces: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if traces.nrows() != self.boundary.len() {
            return Err(Error::DimensionMismatch {
                expected: self.boundary.len(),
                got: traces.nrows(),
            });
        }
        let rhs = -self.k_ib.mul_dense(traces);
        let inner = self.solve_interior_many(&rhs)?;
        let mut out = DMatrix::zeros(self.region.num_nodes(), traces.ncols());
        for (k, &l) in self.boundary.iter().enumerate() {
            out.row_mut(l).copy_from(&traces.row(k));
        }
        for (k, &l) in self.interior.iter().enumerate() {
            out.row_mut(l).copy_from(&inner.row(k));
        }
        Ok(out)
    }

    /// Bubble solves for many interior right-hand sides (`#interior x m`),
    /// returned on all region nodes.
    pub fn bubble_many(&self, loads: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let inner = self.solve_interior_many(loads)?;
        let mut out = DMatrix::zeros(self.region.num_nodes(), loads.ncols());
        for (k, &l) in self.interior.iter().enumerate() {
            out.row_mut(l).copy_from(&inner.row(k));
        }
        Ok(out)
    }

    fn solve_interior_many(&self, rhs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let f = self.solver.factor();
        let anorm = self.k_ii.norm_inf();
        let worst = |x: &DMatrix<f64>, r: &DMatrix<f64>| {
            (0..rhs.ncols())
                .filter(|&c| rhs.column(c).norm() > 0.0)
                .map(|c| backward_error(r.column(c).norm(), anorm, x.column(c).norm(), rhs.column(c).norm()))
                .fold(0.0, f64::max)
        };
        let mut x = f.solve_many(rhs);
        for _ in 0..3 {
            let r = rhs - self.k_ii.mul_dense(&x);
            if worst(&x, &r) <= DEFAULT_TOL {
                return Ok(x);
            }
            x += f.solve_many(&r);
        }
        let r = rhs - self.k_ii.mul_dense(&x);
        let eta = worst(&x, &r);
        if eta > DEFAULT_TOL {
            return Err(Error::NonConvergence {
                tol: DEFAULT_TOL,
                residual: eta,
            });
        }
        Ok(x)
    }

    /// Zero-trace solution for a load vector given on all region nodes
    /// (entries at boundary nodes are ignored).
    pub fn bubble_from_load(&self, load: &[f64]) -> Result<FineField> {
        if load.len() != self.region.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: self.region.num_nodes(),
                got: load.len(),
            });
        }
        let rhs: Vec<f64> = self.interior.iter().map(|&l| load[l]).collect();
        let inner = self.solve_interior(&rhs)?;
        let mut values = vec![0.0; self.region.num_nodes()];
        for (k, &l) in self.interior.iter().enumerate() {
            values[l] = inner[k];
        }
        FineField::new(&self.region, values)
    }

    /// Zero-trace solution of `-div(a grad u) = f` on the region.
    pub fn bubble_solve(&self, mesh: &TwoLevelMesh, f: &Forcing) -> Result<FineField> {
        let load = load_vector(&self.region, mesh, f)?;
        self.bubble_from_load(&load)
    }

    pub fn energy(&self, u: &FineField, v: &FineField) -> Result<f64> {
        u.check_region(&self.region)?;
        v.check_region(&self.region)?;
        Ok(self.stiffness.bilinear(u.values(), v.values()))
    }

    /// Split a local solution into its harmonic and bubble parts.
    pub fn split(&self, u: &FineField) -> Result<LocalSplit> {
        let harmonic = self.harmonic_part(u)?;
        let bubble = u.sub(&harmonic)?;
        let cross = self.energy(&harmonic, &bubble)?;
        let scale = self.energy(u, u)?;
        let rel = if scale > 0.0 { cross.abs() / scale } else { cross.abs() };
        if rel > 1e-8 {
            return Err(Error::Inconsistency(rel));
        }
        Ok(LocalSplit { harmonic, bubble })
    }
}

/// Harmonic extension on a region with boundary values ordered as
/// `region.boundary_locals()`.
pub fn harmonic_extension(region: &Region, mesh: &TwoLevelMesh, a: &CoefficientField, trace: &[f64]) -> Result<FineField> {
    LocalProblem::new(region.clone(), mesh, a)?.harmonic_extension(trace)
}

pub fn bubble_solve(region: &Region, mesh: &TwoLevelMesh, a: &CoefficientField, f: &Forcing) -> Result<FineField> {
    LocalProblem::new(region.clone(), mesh, a)?.bubble_solve(mesh, f)
}

/// Harmonic and bubble parts of a local solution.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalSplit {
    pub harmonic: FineField,
    pub bubble: FineField,
}

/// Split `u`, which is expected to solve the equation on `region` with
/// forcing `f`. The forcing is not re-solved; consistency is checked through
/// the orthogonality of the two parts.
pub fn split_local(region: &Region, mesh: &TwoLevelMesh, a: &CoefficientField, u: &FineField, f: &Forcing) -> Result<LocalSplit> {
    f.check_mesh(mesh)?;
    LocalProblem::new(region.clone(), mesh, a)?.split(u)
}

/// Values of a field along a coarse edge, from start to end node inclusive.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeFunction {
    pub edge: usize,
    pub values: Vec<f64>,
}

impl EdgeFunction {
    pub fn zeros(edge: usize, ratio: usize) -> Self {
        Self {
            edge,
            values: vec![0.0; ratio + 1],
        }
    }

    /// From values at the edge's interior nodes, with zero endpoints.
    pub fn from_interior(edge: usize, interior: &[f64]) -> Self {
        let mut values = Vec::with_capacity(interior.len() + 2);
        values.push(0.0);
        values.extend_from_slice(interior);
        values.push(0.0);
        Self { edge, values }
    }

    pub fn start(&self) -> f64 {
        self.values[0]
    }

    pub fn end(&self) -> f64 {
        *self.values.last().expect("nonempty")
    }

    pub fn interior(&self) -> &[f64] {
        &self.values[1..self.values.len() - 1]
    }
}

pub fn edge_trace(field: &FineField, mesh: &TwoLevelMesh, edge: &CoarseEdge) -> Result<EdgeFunction> {
    let values = mesh
        .edge_fine_nodes(edge)
        .into_iter()
        .map(|n| field.at_node(mesh, n))
        .collect::<Option<Vec<f64>>>()
        .ok_or(Error::EdgeNotCovered(edge.id))?;
    Ok(EdgeFunction {
        edge: edge.id,
        values,
    })
}
