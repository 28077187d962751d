//! Multiscale basis functions and the offline trial-space build.

use std::collections::HashMap;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result, ResultExt, Site};
use crate::fem::FineField;
use crate::local::{EdgeFunction, LocalProblem};
use crate::mesh::{Region, TwoLevelMesh};
use crate::oversampling::{linear_endpoint_traces, truncate_edge_basis, EdgeBasisSet, EdgeProblem, InterpKind};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BasisKind {
    /// Interpolation function of an interior coarse node.
    Nodal,
    /// Harmonic extension of an edge function to the edge's two cells.
    Edge,
}

impl BasisKind {
    pub fn code(&self) -> u8 {
        match self {
            BasisKind::Nodal => 0,
            BasisKind::Edge => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BasisKind::Nodal),
            1 => Some(BasisKind::Edge),
            _ => None,
        }
    }
}

/// A basis function stored by its values at the fine nodes inside its support
/// (the support's outer boundary, where it vanishes, is omitted).
#[derive(Debug, Clone, PartialEq)]
pub struct MsBasisFunction {
    pub kind: BasisKind,
    /// Coarse node id or edge id.
    pub anchor: usize,
    /// Coarse cells of the support, ascending.
    pub cells: Vec<usize>,
    /// Global fine node ids, ascending.
    pub nodes: Vec<usize>,
    pub values: Vec<f64>,
}

impl MsBasisFunction {
    pub fn value_at(&self, node: usize) -> f64 {
        match self.nodes.binary_search(&node) {
            Ok(k) => self.values[k],
            Err(_) => 0.0,
        }
    }

    /// Dense field on the whole domain.
    pub fn to_global(&self, mesh: &TwoLevelMesh) -> Vec<f64> {
        let mut out = vec![0.0; mesh.num_nodes()];
        for (&n, &v) in self.nodes.iter().zip(&self.values) {
            out[n] = v;
        }
        out
    }

    /// Field on a region (zero off the support).
    pub fn on_region(&self, region: &Region) -> FineField {
        let values = region.nodes().iter().map(|&n| self.value_at(n)).collect();
        FineField::new(region, values).expect("length matches")
    }

    fn from_field(kind: BasisKind, anchor: usize, support: &Region, field: &FineField) -> Self {
        let mut nodes = Vec::new();
        let mut values = Vec::new();
        for (k, &n) in support.nodes().iter().enumerate() {
            if !support.on_boundary()[k] {
                nodes.push(n);
                values.push(field.values()[k]);
            }
        }
        Self {
            kind,
            anchor,
            cells: support.cells().to_vec(),
            nodes,
            values,
        }
    }
}

/// Factored Dirichlet problems of every coarse cell.
#[derive(Debug, Clone)]
pub struct CellProblems {
    cells: Vec<LocalProblem>,
}

impl CellProblems {
    pub fn new(mesh: &TwoLevelMesh, a: &CoefficientField) -> Result<Self> {
        a.check_mesh(mesh)?;
        let cells = (0..mesh.num_cells())
            .into_par_iter()
            .map(|c| LocalProblem::new(mesh.cell_region(c)?, mesh, a).at(Site::Cell(c)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { cells })
    }

    pub fn get(&self, cell: usize) -> &LocalProblem {
        &self.cells[cell]
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Harmonic extension, cell by cell, of boundary values given on the coarse
/// skeleton (nodes absent from `skeleton` are zero). Returns the patch field.
fn extend_from_skeleton(
    support: &Region,
    cells: &CellProblems,
    skeleton: &HashMap<usize, f64>,
) -> Result<FineField> {
    let mut values = vec![0.0; support.num_nodes()];
    for &c in support.cells() {
        let lp = cells.get(c);
        let region = lp.region();
        let trace: Vec<f64> = lp
            .boundary()
            .iter()
            .map(|&l| skeleton.get(&region.nodes()[l]).copied().unwrap_or(0.0))
            .collect();
        let u = lp.harmonic_extension(&trace).at(Site::Cell(c))?;
        for (k, &n) in region.nodes().iter().enumerate() {
            values[support.local_index(n).expect("cell inside support")] = u.values()[k];
        }
    }
    FineField::new(support, values)
}

/// Nodal interpolation function from the traces on the node's four incident
/// edges (ordered right, up, left, down) and zero on the patch rim.
pub fn assemble_interpolation_basis(
    mesh: &TwoLevelMesh,
    node: usize,
    traces: [&EdgeFunction; 4],
    cells: &CellProblems,
) -> Result<MsBasisFunction> {
    let incident = mesh.node_incident_edges(node)?;
    let mut skeleton = HashMap::new();
    for (k, &e) in incident.iter().enumerate() {
        let edge = mesh.edge(e)?;
        let t = traces[k];
        if t.edge != e || t.values.len() != mesh.ratio() + 1 {
            return Err(Error::PsiConstraint(format!("trace for edge {e} does not belong to it")));
        }
        let (own, far) = if edge.start == node { (t.start(), t.end()) } else { (t.end(), t.start()) };
        if own != 1.0 || far != 0.0 {
            return Err(Error::PsiConstraint(format!(
                "trace on edge {e} has value {own} at node {node} and {far} at the far end"
            )));
        }
        for (&n, &v) in mesh.edge_fine_nodes(edge).iter().zip(&t.values) {
            skeleton.insert(n, v);
        }
    }
    let support = mesh.node_patch(node)?;
    let field = extend_from_skeleton(&support, cells, &skeleton)?;
    Ok(MsBasisFunction::from_field(BasisKind::Nodal, node, &support, &field))
}

/// Nodal function with linear traces on the incident edges.
pub fn linear_interpolation_basis(mesh: &TwoLevelMesh, node: usize, cells: &CellProblems) -> Result<MsBasisFunction> {
    let incident = mesh.node_incident_edges(node)?;
    let traces: Vec<EdgeFunction> = incident
        .iter()
        .map(|&e| {
            let edge = mesh.edge(e).expect("incident edge");
            let [s, t] = linear_endpoint_traces(edge, mesh.ratio());
            if edge.start == node { s } else { t }
        })
        .collect();
    assemble_interpolation_basis(mesh, node, [&traces[0], &traces[1], &traces[2], &traces[3]], cells)
}

/// Harmonic extension of an edge function (vanishing at both endpoints) into
/// the edge's two cells.
pub fn extend_edge_basis(mesh: &TwoLevelMesh, v: &EdgeFunction, cells: &CellProblems) -> Result<MsBasisFunction> {
    let edge = mesh.edge(v.edge)?;
    if v.values.len() != mesh.ratio() + 1 {
        return Err(Error::DimensionMismatch {
            expected: mesh.ratio() + 1,
            got: v.values.len(),
        });
    }
    if v.start() != 0.0 || v.end() != 0.0 {
        return Err(Error::NonzeroEndpoint);
    }
    let skeleton: HashMap<usize, f64> = mesh
        .edge_fine_nodes(edge)
        .into_iter()
        .zip(v.values.iter().copied())
        .collect();
    let support = mesh.edge_support(v.edge)?;
    let field = extend_from_skeleton(&support, cells, &skeleton)?;
    Ok(MsBasisFunction::from_field(BasisKind::Edge, v.edge, &support, &field))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BuildOptions {
    /// Absolute truncation threshold for edge singular values.
    pub eps: f64,
    pub interp_kind: InterpKind,
    pub include_edge_basis: bool,
}

/// Per-edge output of the offline stage.
#[derive(Debug, Clone)]
pub struct EdgeOutcome {
    pub edge: usize,
    /// Full spectrum (empty when no oversampling problem was solved).
    pub sigma: Vec<f64>,
    /// Endpoint traces used for the nodal functions.
    pub psi: [EdgeFunction; 2],
    pub kept: EdgeBasisSet,
}

/// Solve one edge's oversampling problem.
pub fn process_edge(
    mesh: &TwoLevelMesh,
    a: &CoefficientField,
    edge: usize,
    cells: &CellProblems,
    opts: &BuildOptions,
) -> Result<EdgeOutcome> {
    let e = *mesh.edge(edge)?;
    if opts.interp_kind == InterpKind::Linear && !opts.include_edge_basis {
        return Ok(EdgeOutcome {
            edge,
            sigma: Vec::new(),
            psi: linear_endpoint_traces(&e, mesh.ratio()),
            kept: EdgeBasisSet {
                edge,
                sigma: Vec::new(),
                functions: Vec::new(),
            },
        });
    }
    let problem = EdgeProblem::new(mesh, a, edge, [cells.get(e.cells[0]), cells.get(e.cells[1])])?;
    let psi = problem.endpoint_traces(mesh, opts.interp_kind).at(Site::Edge(edge))?;
    let bundle = problem.bundle(mesh, psi).at(Site::Edge(edge))?;
    let kept = truncate_edge_basis(&bundle, opts.eps);
    Ok(EdgeOutcome {
        edge,
        sigma: bundle.svd.sigma.clone(),
        psi: bundle.psi,
        kept,
    })
}

/// Serializable result of the offline stage.
#[derive(Debug, Clone, PartialEq)]
pub struct OfflineArtifact {
    pub nc: usize,
    pub nf: usize,
    pub eps: f64,
    pub coefficient_hash: [u8; 32],
    pub interp_kind: InterpKind,
    pub include_edge_basis: bool,
    pub n_interior_edges: usize,
    /// Nodal functions by node id, then edge functions by edge id.
    pub basis: Vec<MsBasisFunction>,
    /// Coarse stiffness matrix.
    pub stiffness: SparseMatrix,
}

impl OfflineArtifact {
    pub fn n_basis(&self) -> usize {
        self.basis.len()
    }

    pub fn n_nodal(&self) -> usize {
        self.basis.iter().filter(|b| b.kind == BasisKind::Nodal).count()
    }

    /// Number of edge functions per interior edge.
    pub fn edge_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_interior_edges];
        for b in &self.basis {
            if b.kind == BasisKind::Edge {
                counts[b.anchor] += 1;
            }
        }
        counts
    }

    /// Basis index range of each edge's functions.
    pub fn edge_index_map(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = self.n_nodal();
        self.edge_counts()
            .into_iter()
            .map(|k| {
                let r = start..start + k;
                start += k;
                r
            })
            .collect()
    }

    /// Average number of edge functions per interior edge.
    pub fn kbar_e(&self) -> f64 {
        if self.n_interior_edges == 0 {
            return 0.0;
        }
        self.edge_counts().iter().sum::<usize>() as f64 / self.n_interior_edges as f64
    }

    pub fn check_mesh(&self, mesh: &TwoLevelMesh) -> Result<()> {
        if self.nc != mesh.nc() || self.nf != mesh.nf() {
            return Err(Error::InvalidArgument(format!(
                "artifact was built for Nc={}, Nf={}, not Nc={}, Nf={}",
                self.nc,
                self.nf,
                mesh.nc(),
                mesh.nf()
            )));
        }
        let bad_node = self.basis.iter().flat_map(|b| &b.nodes).any(|&n| n >= mesh.num_nodes());
        let bad_cell = self.basis.iter().flat_map(|b| &b.cells).any(|&c| c >= mesh.num_cells());
        if bad_node || bad_cell || self.stiffness.nrows() != self.basis.len() {
            return Err(Error::InvalidArgument("artifact content does not fit its mesh".into()));
        }
        Ok(())
    }
}

/// Offline result plus the per-edge spectra.
#[derive(Debug, Clone)]
pub struct OfflineBuild {
    pub artifact: OfflineArtifact,
    pub edges: Vec<EdgeOutcome>,
}

/// `Phi^T A Phi`, accumulated cell by cell.
pub fn coarse_stiffness(mesh: &TwoLevelMesh, basis: &[MsBasisFunction], cells: &CellProblems) -> SparseMatrix {
    let mut by_cell: Vec<Vec<usize>> = vec![Vec::new(); mesh.num_cells()];
    for (i, b) in basis.iter().enumerate() {
        for &c in &b.cells {
            by_cell[c].push(i);
        }
    }
    let blocks: Vec<Vec<(usize, usize, f64)>> = by_cell
        .par_iter()
        .enumerate()
        .map(|(c, members)| {
            let lp = cells.get(c);
            let nodes = lp.region().nodes();
            let v = DMatrix::from_fn(nodes.len(), members.len(), |r, k| basis[members[k]].value_at(nodes[r]));
            let kv = lp.stiffness().mul_dense(&v);
            let local = v.tr_mul(&kv);
            let mut trip = Vec::with_capacity(members.len() * members.len());
            for p in 0..members.len() {
                for q in 0..members.len() {
                    let val = 0.5 * (local[(p, q)] + local[(q, p)]);
                    trip.push((members[p], members[q], val));
                }
            }
            trip
        })
        .collect();
    let n = basis.len();
    SparseMatrix::from_triplets(n, n, blocks.into_iter().flatten().collect(), true)
}

/// Full offline stage: per-edge oversampling, nodal functions, edge functions,
/// and the coarse stiffness matrix. Runs on the current rayon pool; the result
/// does not depend on the number of threads.
pub fn build_trial_space(mesh: &TwoLevelMesh, a: &CoefficientField, opts: &BuildOptions) -> Result<OfflineBuild> {
    if !(opts.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("epsilon must be positive, got {}", opts.eps)));
    }
    a.check_mesh(mesh)?;
    let cells = CellProblems::new(mesh, a)?;
    let edges: Vec<EdgeOutcome> = (0..mesh.interior_edges().len())
        .into_par_iter()
        .map(|e| process_edge(mesh, a, e, &cells, opts))
        .collect::<Result<_>>()?;

    let nodal: Vec<MsBasisFunction> = mesh
        .interior_coarse_nodes()
        .into_par_iter()
        .map(|node| {
            let incident = mesh.node_incident_edges(node)?;
            let traces: Vec<&EdgeFunction> = incident
                .iter()
                .map(|&e| {
                    let out = &edges[e];
                    if mesh.interior_edges()[e].start == node { &out.psi[0] } else { &out.psi[1] }
                })
                .collect();
            assemble_interpolation_basis(mesh, node, [traces[0], traces[1], traces[2], traces[3]], &cells)
                .at(Site::Node(node))
        })
        .collect::<Result<_>>()?;

    let mut basis = nodal;
    if opts.include_edge_basis {
        let edge_fns: Vec<Vec<MsBasisFunction>> = edges
            .par_iter()
            .map(|out| {
                out.kept
                    .functions
                    .iter()
                    .map(|v| extend_edge_basis(mesh, v, &cells).at(Site::Edge(out.edge)))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        basis.extend(edge_fns.into_iter().flatten());
    }
    let stiffness = coarse_stiffness(mesh, &basis, &cells);
    let artifact = OfflineArtifact {
        nc: mesh.nc(),
        nf: mesh.nf(),
        eps: opts.eps,
        coefficient_hash: a.spec().hash(),
        interp_kind: opts.interp_kind,
        include_edge_basis: opts.include_edge_basis,
        n_interior_edges: mesh.interior_edges().len(),
        basis,
        stiffness,
    };
    Ok(OfflineBuild { artifact, edges })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coefficient::constant_field;

    #[test]
    fn linear_basis_hits_coarse_nodes() {
        let mesh = TwoLevelMesh::new(4, 16).unwrap();
        let a = crate::coefficient::multiscale_field(&mesh);
        let cells = CellProblems::new(&mesh, &a).unwrap();
        let node = mesh.coarse_node_index(2, 2);
        let psi = linear_interpolation_basis(&mesh, node, &cells).unwrap();
        assert_eq!(psi.value_at(mesh.coarse_node_fine_index(node)), 1.0);
        for (i, j) in [(1, 1), (2, 1), (3, 1), (1, 2), (3, 2), (1, 3), (2, 3), (3, 3)] {
            assert_eq!(psi.value_at(mesh.coarse_node_fine_index(mesh.coarse_node_index(i, j))), 0.0);
        }
        assert_eq!(psi.cells.len(), 4);
        assert!(matches!(
            linear_interpolation_basis(&mesh, mesh.coarse_node_index(0, 2), &cells),
            Err(Error::BoundaryNode(_))
        ));
    }

    #[test]
    fn zero_edge_function_extends_to_zero() {
        let mesh = TwoLevelMesh::new(2, 8).unwrap();
        let a = constant_field(&mesh, 1.0).unwrap();
        let cells = CellProblems::new(&mesh, &a).unwrap();
        let phi = extend_edge_basis(&mesh, &EdgeFunction::zeros(0, 4), &cells).unwrap();
        assert!(phi.values.iter().all(|&v| v == 0.0));
        let mut bad = EdgeFunction::zeros(0, 4);
        bad.values[0] = 0.5;
        assert!(matches!(extend_edge_basis(&mesh, &bad, &cells), Err(Error::NonzeroEndpoint)));
    }

    #[test]
    fn small_build_is_spd() {
        let mesh = TwoLevelMesh::new(4, 32).unwrap();
        let a = constant_field(&mesh, 1.0).unwrap();
        let opts = BuildOptions {
            eps: 0.25,
            interp_kind: InterpKind::Linear,
            include_edge_basis: true,
        };
        let b = build_trial_space(&mesh, &a, &opts).unwrap();
        let art = &b.artifact;
        assert_eq!(art.n_nodal(), 9);
        assert_eq!(art.n_basis(), 9 + art.edge_counts().iter().sum::<usize>());
        assert!(crate::sparse::EnvelopeCholesky::factor(&art.stiffness).is_ok());
    }
}
