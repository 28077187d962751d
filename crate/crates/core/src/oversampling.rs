//! Per-edge oversampling problems and their weighted SVD.
//!
//! For an interior coarse edge `e` with patch `W`, local solutions on `W` are
//! parametrized by their trace on `dW` (fine hats, excluding nodes on the domain
//! boundary) and a forcing that is constant on each coarse cell of `W`. The
//! operator maps such a solution to its trace on `e` minus the interpolation of
//! its endpoint values. Singular vectors are taken in the norms given by the
//! domain and range Gram matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result, ResultExt, Site};
use crate::fem::{assemble_mass, triangle_load};
use crate::local::{EdgeFunction, LocalProblem};
use crate::mesh::{CoarseEdge, TraceNode, TwoLevelMesh};

/// How the endpoint interpolation functions on an edge are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum InterpKind {
    /// Linear along the edge.
    Linear,
    /// Minimal domain norm subject to the nodal constraints.
    Optimal,
}

impl InterpKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            InterpKind::Linear => "linear",
            InterpKind::Optimal => "optimal",
        }
    }

    pub fn code(&self) -> u8 {
        match self {
            InterpKind::Linear => 0,
            InterpKind::Optimal => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(InterpKind::Linear),
            1 => Some(InterpKind::Optimal),
            _ => None,
        }
    }
}

impl std::str::FromStr for InterpKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "linear" => Ok(InterpKind::Linear),
            "optimal" => Ok(InterpKind::Optimal),
            _ => Err(format!("interp_kind must be linear or optimal, got {s:?}")),
        }
    }
}

/// Discretized domain of the oversampling operator on one patch.
#[derive(Debug, Clone)]
pub struct DomainSpace {
    /// Trace coordinates: nodes of `dW` off the domain boundary, counterclockwise.
    pub trace_nodes: Vec<TraceNode>,
    /// Forcing coordinates: coarse cells of `W`, ascending.
    pub cells: Vec<usize>,
    /// Values of every coordinate's local solution at the edge's fine nodes
    /// (start to end), `(r+1) x n_X`.
    pub edge_values: DMatrix<f64>,
    /// Domain Gram matrix.
    pub gram: DMatrix<f64>,
}

impl DomainSpace {
    pub fn dim(&self) -> usize {
        self.trace_nodes.len() + self.cells.len()
    }

    pub fn num_trace(&self) -> usize {
        self.trace_nodes.len()
    }
}

/// Build the domain coordinates on the edge patch and their Gram matrix.
pub fn build_domain_space(edge: &CoarseEdge, w: &LocalProblem, mesh: &TwoLevelMesh) -> Result<DomainSpace> {
    domain_parts(edge, w, mesh).map(|(d, _, _)| d)
}

/// As [`build_domain_space`], also returning the local solutions of all
/// coordinates on `W` (`#W nodes x n_X`).
pub fn build_domain_space_full(
    edge: &CoarseEdge,
    w: &LocalProblem,
    mesh: &TwoLevelMesh,
) -> Result<(DomainSpace, DMatrix<f64>)> {
    let (d, ext, bubbles) = domain_parts(edge, w, mesh)?;
    let mut fields = DMatrix::zeros(ext.nrows(), d.dim());
    fields.columns_mut(0, ext.ncols()).copy_from(&ext);
    fields.columns_mut(ext.ncols(), bubbles.ncols()).copy_from(&bubbles);
    Ok((d, fields))
}

fn domain_parts(
    edge: &CoarseEdge,
    w: &LocalProblem,
    mesh: &TwoLevelMesh,
) -> Result<(DomainSpace, DMatrix<f64>, DMatrix<f64>)> {
    let region = w.region();
    let boundary = w.boundary();
    let trace_nodes: Vec<TraceNode> = region
        .boundary_trace_nodes()
        .into_iter()
        .filter(|t| !t.on_domain_boundary)
        .collect();
    let nt = trace_nodes.len();
    let cells = region.cells().to_vec();
    let nx = nt + cells.len();

    let mut hats = DMatrix::zeros(boundary.len(), nt);
    for (k, t) in trace_nodes.iter().enumerate() {
        let pos = boundary.binary_search(&t.local).expect("trace node on boundary");
        hats[(pos, k)] = 1.0;
    }
    let ext = w.harmonic_extension_many(&hats)?;

    let interior = w.interior();
    let mut loads = DMatrix::zeros(interior.len(), cells.len());
    for (k, &c) in cells.iter().enumerate() {
        let load = triangle_load(region, mesh, |t| if mesh.cell_of_triangle(t) == c { 1.0 } else { 0.0 });
        for (r, &l) in interior.iter().enumerate() {
            loads[(r, k)] = load[l];
        }
    }
    let bubbles = w.bubble_many(&loads)?;

    // energy block: a(E g_j, E g_k) = (K E g_k) at trace node j, since E g_k is harmonic
    let stiff = w.stiffness();
    let mut energy = DMatrix::<f64>::zeros(nt, nt);
    for (j, t) in trace_nodes.iter().enumerate() {
        for (c, v) in stiff.row(t.local) {
            for k in 0..nt {
                energy[(j, k)] += v * ext[(c, k)];
            }
        }
    }
    let mass = assemble_mass(region, mesh);
    let l2 = ext.tr_mul(&mass.mul_dense(&ext));

    let mut gram = DMatrix::zeros(nx, nx);
    for j in 0..nt {
        for k in 0..nt {
            gram[(j, k)] = 0.5 * (energy[(j, k)] + energy[(k, j)]) + 0.5 * (l2[(j, k)] + l2[(k, j)]);
        }
    }
    let cell_area = mesh.cell_area();
    for k in 0..cells.len() {
        gram[(nt + k, nt + k)] = cell_area;
    }

    let edge_nodes = mesh.edge_fine_nodes(edge);
    let mut edge_values = DMatrix::zeros(edge_nodes.len(), nx);
    for (r, &n) in edge_nodes.iter().enumerate() {
        let l = region.local_index(n).ok_or(Error::EdgeNotCovered(edge.id))?;
        for k in 0..nt {
            edge_values[(r, k)] = ext[(l, k)];
        }
        for k in 0..cells.len() {
            edge_values[(r, nt + k)] = bubbles[(l, k)];
        }
    }
    Ok((
        DomainSpace {
            trace_nodes,
            cells,
            edge_values,
            gram,
        },
        ext,
        bubbles,
    ))
}

/// Range Gram matrix on the interior fine nodes of an edge, from the problems
/// on its two adjacent cells.
pub fn build_range_gram(edge: &CoarseEdge, mesh: &TwoLevelMesh, cells: [&LocalProblem; 2]) -> Result<DMatrix<f64>> {
    let nodes = mesh.edge_fine_nodes(edge);
    let inner = &nodes[1..nodes.len() - 1];
    let ny = inner.len();
    let mut gram = DMatrix::zeros(ny, ny);
    for cell in cells {
        let region = cell.region();
        let boundary = cell.boundary();
        let locals: Vec<usize> = inner
            .iter()
            .map(|&n| region.local_index(n).ok_or(Error::EdgeNotCovered(edge.id)))
            .collect::<Result<_>>()?;
        let mut hats = DMatrix::zeros(boundary.len(), ny);
        for (k, l) in locals.iter().enumerate() {
            let pos = boundary.binary_search(l).expect("edge node on cell boundary");
            hats[(pos, k)] = 1.0;
        }
        let ext = cell.harmonic_extension_many(&hats)?;
        let stiff = cell.stiffness();
        for (j, &l) in locals.iter().enumerate() {
            for (c, v) in stiff.row(l) {
                for k in 0..ny {
                    gram[(j, k)] += 0.5 * v * ext[(c, k)];
                }
            }
        }
    }
    Ok(0.5 * (&gram + gram.transpose()))
}

/// Linear interpolation functions of the start and end node on an edge.
pub fn linear_endpoint_traces(edge: &CoarseEdge, ratio: usize) -> [EdgeFunction; 2] {
    let r = ratio as f64;
    let start = (0..=ratio).map(|k| 1.0 - k as f64 / r).collect();
    let end = (0..=ratio).map(|k| k as f64 / r).collect();
    [
        EdgeFunction {
            edge: edge.id,
            values: start,
        },
        EdgeFunction {
            edge: edge.id,
            values: end,
        },
    ]
}

/// Operator matrix `n_Y x n_X`: edge-interior values of each coordinate's local
/// solution minus the interpolation of its endpoint values.
pub fn assemble_oversampling_operator(
    mesh: &TwoLevelMesh,
    edge: &CoarseEdge,
    domain: &DomainSpace,
    psi: &[EdgeFunction; 2],
) -> Result<DMatrix<f64>> {
    let r = mesh.ratio();
    let endpoints = [edge.start, edge.end];
    for (k, p) in psi.iter().enumerate() {
        if p.values.len() != r + 1 {
            return Err(Error::DimensionMismatch {
                expected: r + 1,
                got: p.values.len(),
            });
        }
        if !mesh.coarse_node_is_interior(endpoints[k]) {
            continue;
        }
        let (own, other) = if k == 0 { (p.start(), p.end()) } else { (p.end(), p.start()) };
        if (own - 1.0).abs() > 1e-12 || other.abs() > 1e-12 {
            return Err(Error::PsiConstraint(format!(
                "trace of node {} has endpoint values ({}, {})",
                endpoints[k],
                p.start(),
                p.end()
            )));
        }
    }
    let nx = domain.dim();
    let ev = &domain.edge_values;
    let mut p = ev.rows(1, r - 1).into_owned();
    for (k, row) in [0, r].into_iter().enumerate() {
        if !mesh.coarse_node_is_interior(endpoints[k]) {
            continue;
        }
        let inner = psi[k].interior();
        for i in 0..r - 1 {
            for c in 0..nx {
                p[(i, c)] -= inner[i] * ev[(row, c)];
            }
        }
    }
    Ok(p)
}

/// Singular triplets of `P` measured in the `G_X` and `G_Y` norms.
#[derive(Debug, Clone)]
pub struct WeightedSvd {
    /// Descending.
    pub sigma: Vec<f64>,
    /// Left vectors in range coordinates, `G_Y`-orthonormal, one per column.
    pub left: DMatrix<f64>,
}

fn cholesky(g: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    Cholesky::new(g.clone()).ok_or(Error::GramNotSpd(what))
}

pub fn weighted_svd(p: &DMatrix<f64>, gx: &DMatrix<f64>, gy: &DMatrix<f64>) -> Result<WeightedSvd> {
    let lx = cholesky(gx, "domain")?.l();
    let ly = cholesky(gy, "range")?.l();
    weighted_svd_with(p, &lx, &ly)
}

fn weighted_svd_with(p: &DMatrix<f64>, lx: &DMatrix<f64>, ly: &DMatrix<f64>) -> Result<WeightedSvd> {
    if p.ncols() != lx.nrows() || p.nrows() != ly.nrows() {
        return Err(Error::DimensionMismatch {
            expected: lx.nrows(),
            got: p.ncols(),
        });
    }
    // B = Ly^T P Lx^{-T}
    let ct = lx
        .solve_lower_triangular(&p.transpose())
        .ok_or(Error::GramNotSpd("domain"))?;
    let b = ly.tr_mul(&ct.transpose());
    let ny = b.nrows();
    let rank = ny.min(b.ncols());
    if rank == 0 {
        return Ok(WeightedSvd {
            sigma: Vec::new(),
            left: DMatrix::zeros(ny, 0),
        });
    }
    // left vectors of B are eigenvectors of the small side; SVD of the thin form
    let svd = if b.nrows() <= b.ncols() {
        b.transpose().svd(false, true)
    } else {
        b.clone().svd(true, false)
    };
    let u_mat = if b.nrows() <= b.ncols() {
        svd.v_t.expect("requested").transpose()
    } else {
        svd.u.expect("requested")
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| {
        svd.singular_values[j]
            .partial_cmp(&svd.singular_values[i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let mut sigma = Vec::with_capacity(rank);
    let mut left = DMatrix::zeros(ny, rank);
    for (k, &i) in order.iter().enumerate() {
        sigma.push(svd.singular_values[i]);
        let u = u_mat.column(i).into_owned();
        let mut y = ly
            .tr_solve_lower_triangular(&u)
            .ok_or(Error::GramNotSpd("range"))?;
        fix_sign(&mut y);
        left.set_column(k, &y);
    }
    Ok(WeightedSvd { sigma, left })
}

/// Make the largest-magnitude entry positive (first one on ties).
fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v.len() > 0 && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Everything computed for one edge with a fixed choice of endpoint traces.
#[derive(Debug, Clone)]
pub struct OversamplingBundle {
    pub edge: usize,
    pub domain: DomainSpace,
    pub range_gram: DMatrix<f64>,
    pub psi: [EdgeFunction; 2],
    pub operator: DMatrix<f64>,
    pub svd: WeightedSvd,
}

impl OversamplingBundle {
    pub fn n_x(&self) -> usize {
        self.domain.dim()
    }

    pub fn n_y(&self) -> usize {
        self.range_gram.nrows()
    }
}

/// Oversampling data of one edge, before endpoint traces are chosen.
#[derive(Debug, Clone)]
pub struct EdgeProblem {
    pub edge: CoarseEdge,
    pub domain: DomainSpace,
    pub range_gram: DMatrix<f64>,
    ratio: usize,
    lx: DMatrix<f64>,
    ly: DMatrix<f64>,
}

impl EdgeProblem {
    /// `cells` are the local problems of the edge's two adjacent cells.
    pub fn new(
        mesh: &TwoLevelMesh,
        a: &CoefficientField,
        edge: usize,
        cells: [&LocalProblem; 2],
    ) -> Result<Self> {
        let site = Site::Edge(edge);
        let e = *mesh.edge(edge)?;
        let w = LocalProblem::new(mesh.edge_patch(edge)?, mesh, a).at(site)?;
        let domain = build_domain_space(&e, &w, mesh).at(site)?;
        drop(w);
        let range_gram = build_range_gram(&e, mesh, cells).at(site)?;
        Self::from_parts(mesh, e, domain, range_gram).at(site)
    }

    pub fn from_parts(mesh: &TwoLevelMesh, edge: CoarseEdge, domain: DomainSpace, range_gram: DMatrix<f64>) -> Result<Self> {
        let lx = cholesky(&domain.gram, "domain")?.l();
        let ly = cholesky(&range_gram, "range")?.l();
        Ok(Self {
            edge,
            domain,
            range_gram,
            ratio: mesh.ratio(),
            lx,
            ly,
        })
    }

    /// Domain Gram factor `L` with `G_X = L L^T`.
    pub fn domain_factor(&self) -> &DMatrix<f64> {
        &self.lx
    }

    pub fn range_factor(&self) -> &DMatrix<f64> {
        &self.ly
    }

    /// Minimizers of the domain norm subject to the nodal constraints at the
    /// edge endpoints, restricted to the edge. Also returns the minimal squared
    /// norms (zero for endpoints on the domain boundary).
    pub fn optimal_endpoint_traces(&self, mesh: &TwoLevelMesh) -> Result<([EdgeFunction; 2], [f64; 2])> {
        let r = self.ratio;
        let ev = &self.domain.edge_values;
        let endpoints = [self.edge.start, self.edge.end];
        let active: Vec<usize> = (0..2).filter(|&k| mesh.coarse_node_is_interior(endpoints[k])).collect();
        let mut traces = [EdgeFunction::zeros(self.edge.id, r), EdgeFunction::zeros(self.edge.id, r)];
        let mut objective = [0.0; 2];
        if active.is_empty() {
            return Ok((traces, objective));
        }
        let nx = self.domain.dim();
        let mut ct = DMatrix::zeros(nx, active.len());
        for (q, &k) in active.iter().enumerate() {
            let row = if k == 0 { 0 } else { r };
            for c in 0..nx {
                ct[(c, q)] = ev[(row, c)];
            }
        }
        // Z = G_X^{-1} C^T through the factor, S = C Z
        let y = self.lx.solve_lower_triangular(&ct).ok_or(Error::GramNotSpd("domain"))?;
        let z = self.lx.tr_solve_lower_triangular(&y).ok_or(Error::GramNotSpd("domain"))?;
        let s = y.tr_mul(&y);
        let s_chol = Cholesky::new(s.clone()).ok_or(Error::RankDeficient)?;
        let diag_min = (0..s.nrows()).map(|i| s[(i, i)]).fold(f64::INFINITY, f64::min);
        let det_scale: f64 = (0..s.nrows()).map(|i| s[(i, i)]).product();
        if !(diag_min > 0.0) || s.determinant() <= 1e-12 * det_scale {
            return Err(Error::RankDeficient);
        }
        let s_inv = s_chol.inverse();
        for (q, &k) in active.iter().enumerate() {
            let coef = &z * s_inv.column(q);
            let mut values: Vec<f64> = (0..=r).map(|i| (ev.row(i) * &coef)[0]).collect();
            values[0] = if k == 0 { 1.0 } else { 0.0 };
            values[r] = if k == 0 { 0.0 } else { 1.0 };
            if active.len() == 1 {
                // the other endpoint lies on the domain boundary
                let other = if k == 0 { r } else { 0 };
                values[other] = 0.0;
            }
            traces[k] = EdgeFunction {
                edge: self.edge.id,
                values,
            };
            objective[k] = s_inv[(q, q)];
        }
        Ok((traces, objective))
    }

    pub fn endpoint_traces(&self, mesh: &TwoLevelMesh, kind: InterpKind) -> Result<[EdgeFunction; 2]> {
        match kind {
            InterpKind::Linear => Ok(linear_endpoint_traces(&self.edge, self.ratio)),
            InterpKind::Optimal => self.optimal_endpoint_traces(mesh).map(|(t, _)| t),
        }
    }

    pub fn bundle(&self, mesh: &TwoLevelMesh, psi: [EdgeFunction; 2]) -> Result<OversamplingBundle> {
        let operator = assemble_oversampling_operator(mesh, &self.edge, &self.domain, &psi)?;
        let svd = weighted_svd_with(&operator, &self.lx, &self.ly)?;
        Ok(OversamplingBundle {
            edge: self.edge.id,
            domain: self.domain.clone(),
            range_gram: self.range_gram.clone(),
            psi,
            operator,
            svd,
        })
    }
}

/// Kept edge functions of one edge.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeBasisSet {
    pub edge: usize,
    pub sigma: Vec<f64>,
    pub functions: Vec<EdgeFunction>,
}

impl EdgeBasisSet {
    pub fn count(&self) -> usize {
        self.functions.len()
    }
}

/// Keep the singular vectors with `sigma >= eps`.
pub fn truncate_edge_basis(bundle: &OversamplingBundle, eps: f64) -> EdgeBasisSet {
    truncate_svd(bundle.edge, &bundle.svd, eps)
}

pub fn truncate_svd(edge: usize, svd: &WeightedSvd, eps: f64) -> EdgeBasisSet {
    let keep = svd.sigma.iter().take_while(|&&s| s >= eps).count();
    let functions = (0..keep)
        .map(|k| {
            let col: Vec<f64> = svd.left.column(k).iter().copied().collect();
            EdgeFunction::from_interior(edge, &col)
        })
        .collect();
    EdgeBasisSet {
        edge,
        sigma: svd.sigma[..keep].to_vec(),
        functions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_grams() {
        let p = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let i2 = DMatrix::identity(2, 2);
        let s = weighted_svd(&p, &i2, &i2).unwrap();
        assert!((s.sigma[0] - 3.0).abs() < 1e-14 && (s.sigma[1] - 1.0).abs() < 1e-14);
        assert!(s.left[(0, 0)] > 0.0);
    }

    #[test]
    fn domain_scaling() {
        let i2 = DMatrix::identity(2, 2);
        let s = weighted_svd(&i2, &(4.0 * &i2), &i2).unwrap();
        assert!(s.sigma.iter().all(|v| (v - 0.5).abs() < 1e-14));
    }

    #[test]
    fn non_spd_gram_is_reported() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let bad = -&i2;
        assert!(matches!(weighted_svd(&i2, &bad, &i2), Err(Error::GramNotSpd("domain"))));
    }

    #[test]
    fn truncation_is_inclusive() {
        let svd = WeightedSvd {
            sigma: vec![2.0, 1.0, 0.5],
            left: DMatrix::identity(3, 3),
        };
        assert_eq!(truncate_svd(0, &svd, 1.0).count(), 2);
        assert_eq!(truncate_svd(0, &svd, 3.0).count(), 0);
        assert_eq!(truncate_svd(0, &svd, f64::MIN_POSITIVE).count(), 3);
        let f = &truncate_svd(0, &svd, 1.0).functions[0];
        assert_eq!(f.values, vec![0.0, 1.0, 0.0, 0.0, 0.0]);
    }
}
