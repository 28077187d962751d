//! P1 finite elements on the fine triangulation.

use crate::coefficient::CoefficientField;
use crate::error::{Error, Result};
use crate::mesh::{Bounds, Region, TwoLevelMesh};
use crate::sparse::SparseMatrix;

/// Nodal values of a P1 function on a region (or on the whole domain).
#[derive(Debug, Clone, PartialEq)]
pub struct FineField {
    bounds: Bounds,
    values: Vec<f64>,
}

impl FineField {
    pub fn zeros(region: &Region) -> Self {
        Self {
            bounds: region.bounds(),
            values: vec![0.0; region.num_nodes()],
        }
    }

    pub fn new(region: &Region, values: Vec<f64>) -> Result<Self> {
        if values.len() != region.num_nodes() {
            return Err(Error::DimensionMismatch {
                expected: region.num_nodes(),
                got: values.len(),
            });
        }
        Ok(Self {
            bounds: region.bounds(),
            values,
        })
    }

    /// Interpolate `f` at the region's nodes.
    pub fn from_fn(mesh: &TwoLevelMesh, region: &Region, f: impl Fn([f64; 2]) -> f64) -> Self {
        Self {
            bounds: region.bounds(),
            values: region.nodes().iter().map(|&n| f(mesh.node_coords(n))).collect(),
        }
    }

    pub fn bounds(&self) -> Bounds {
        self.bounds
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn check_region(&self, region: &Region) -> Result<()> {
        if self.bounds != region.bounds() || self.values.len() != region.num_nodes() {
            return Err(Error::RegionMismatch);
        }
        Ok(())
    }

    /// Value at a global fine node, if it lies in the field's region.
    pub fn at_node(&self, mesh: &TwoLevelMesh, node: usize) -> Option<f64> {
        let (i, j) = mesh.node_lattice(node);
        let b = self.bounds;
        b.contains(i, j)
            .then(|| self.values[(j - b.j0) * (b.nx() + 1) + (i - b.i0)])
    }

    /// Restriction to a sub-region.
    pub fn restrict(&self, mesh: &TwoLevelMesh, region: &Region) -> Result<FineField> {
        if !self.bounds.contains_box(&region.bounds()) {
            return Err(Error::RegionMismatch);
        }
        let values = region
            .nodes()
            .iter()
            .map(|&n| self.at_node(mesh, n).expect("inside"))
            .collect();
        Ok(FineField {
            bounds: region.bounds(),
            values,
        })
    }

    /// Add `scale * other` where the two regions overlap; `other` must lie inside `self`.
    pub fn add_scaled(&mut self, other: &FineField, scale: f64) -> Result<()> {
        if !self.bounds.contains_box(&other.bounds) {
            return Err(Error::RegionMismatch);
        }
        let ob = other.bounds;
        let sb = self.bounds;
        for j in ob.j0..=ob.j1 {
            for i in ob.i0..=ob.i1 {
                let src = (j - ob.j0) * (ob.nx() + 1) + (i - ob.i0);
                let dst = (j - sb.j0) * (sb.nx() + 1) + (i - sb.i0);
                self.values[dst] += scale * other.values[src];
            }
        }
        Ok(())
    }

    pub fn sub(&self, other: &FineField) -> Result<FineField> {
        if self.bounds != other.bounds {
            return Err(Error::RegionMismatch);
        }
        Ok(FineField {
            bounds: self.bounds,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn add(&self, other: &FineField) -> Result<FineField> {
        if self.bounds != other.bounds {
            return Err(Error::RegionMismatch);
        }
        Ok(FineField {
            bounds: self.bounds,
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        })
    }
}

/// Right-hand side of the elliptic problem.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    /// P1 interpolant, one value per global fine node.
    Nodal(Vec<f64>),
    /// Constant per fine triangle.
    PerTriangle(Vec<f64>),
}

impl Forcing {
    pub fn nodal(mesh: &TwoLevelMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Forcing::Nodal((0..mesh.num_nodes()).map(|n| f(mesh.node_coords(n))).collect())
    }

    /// Sampled at triangle centroids.
    pub fn per_triangle(mesh: &TwoLevelMesh, f: impl Fn([f64; 2]) -> f64) -> Self {
        Forcing::PerTriangle(
            (0..mesh.num_triangles())
                .map(|t| f(mesh.triangle_centroid(t)))
                .collect(),
        )
    }

    pub fn constant(mesh: &TwoLevelMesh, c: f64) -> Self {
        Forcing::Nodal(vec![c; mesh.num_nodes()])
    }

    pub fn check_mesh(&self, mesh: &TwoLevelMesh) -> Result<()> {
        let (expected, got) = match self {
            Forcing::Nodal(v) => (mesh.num_nodes(), v.len()),
            Forcing::PerTriangle(v) => (mesh.num_triangles(), v.len()),
        };
        if expected != got {
            return Err(Error::DimensionMismatch { expected, got });
        }
        Ok(())
    }

    pub fn scaled(&self, s: f64) -> Forcing {
        match self {
            Forcing::Nodal(v) => Forcing::Nodal(v.iter().map(|x| x * s).collect()),
            Forcing::PerTriangle(v) => Forcing::PerTriangle(v.iter().map(|x| x * s).collect()),
        }
    }

    /// `||f||_{L2}` over the whole domain.
    pub fn l2_norm(&self, mesh: &TwoLevelMesh) -> Result<f64> {
        self.check_mesh(mesh)?;
        match self {
            Forcing::Nodal(v) => {
                let omega = mesh.domain_region();
                Ok(assemble_mass(&omega, mesh).quad_form(v).max(0.0).sqrt())
            }
            Forcing::PerTriangle(v) => {
                Ok((v.iter().map(|x| x * x).sum::<f64>() * mesh.triangle_area()).sqrt())
            }
        }
    }
}

/// Unit-coefficient element stiffness of a fine triangle.
pub fn element_stiffness(mesh: &TwoLevelMesh, t: usize) -> [[f64; 3]; 3] {
    let nodes = mesh.triangle_nodes(t);
    let p = nodes.map(|n| mesh.node_coords(n));
    let area2 = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    // gradient of barycentric k is perp of the opposite edge / (2 area)
    let grad = |k: usize| {
        let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
        [(a[1] - b[1]) / area2, (b[0] - a[0]) / area2]
    };
    let g = [grad(0), grad(1), grad(2)];
    let area = 0.5 * area2;
    let mut k = [[0.0; 3]; 3];
    for r in 0..3 {
        for c in 0..3 {
            k[r][c] = area * (g[r][0] * g[c][0] + g[r][1] * g[c][1]);
        }
    }
    k
}

fn region_triangle_locals(region: &Region, mesh: &TwoLevelMesh, t: usize) -> [usize; 3] {
    mesh.triangle_nodes(t)
        .map(|n| region.local_index(n).expect("triangle inside region"))
}

/// Stiffness matrix of `a` on a region, in region-local node numbering.
pub fn assemble_stiffness(region: &Region, mesh: &TwoLevelMesh, a: &CoefficientField) -> Result<SparseMatrix> {
    a.check_mesh(mesh)?;
    let n = region.num_nodes();
    let mut trip = Vec::with_capacity(9 * region.triangles().len());
    // the two triangle shapes have fixed reference matrices
    let ref_even = element_stiffness(mesh, 0);
    let ref_odd = element_stiffness(mesh, 1);
    for &t in region.triangles() {
        let loc = region_triangle_locals(region, mesh, t);
        let ke = if t % 2 == 0 { &ref_even } else { &ref_odd };
        let at = a.value(t);
        for r in 0..3 {
            for c in 0..3 {
                if ke[r][c] != 0.0 {
                    trip.push((loc[r], loc[c], at * ke[r][c]));
                }
            }
        }
    }
    Ok(SparseMatrix::from_triplets(n, n, trip, true))
}

/// Consistent P1 mass matrix on a region.
pub fn assemble_mass(region: &Region, mesh: &TwoLevelMesh) -> SparseMatrix {
    let n = region.num_nodes();
    let w = mesh.triangle_area() / 12.0;
    let mut trip = Vec::with_capacity(9 * region.triangles().len());
    for &t in region.triangles() {
        let loc = region_triangle_locals(region, mesh, t);
        for r in 0..3 {
            for c in 0..3 {
                trip.push((loc[r], loc[c], if r == c { 2.0 * w } else { w }));
            }
        }
    }
    SparseMatrix::from_triplets(n, n, trip, true)
}

/// Load vector `(f, phi_k)` on a region for every region node.
pub fn load_vector(region: &Region, mesh: &TwoLevelMesh, f: &Forcing) -> Result<Vec<f64>> {
    f.check_mesh(mesh)?;
    match f {
        Forcing::Nodal(v) => {
            let local: Vec<f64> = region.nodes().iter().map(|&n| v[n]).collect();
            Ok(assemble_mass(region, mesh).mul_vec(&local))
        }
        Forcing::PerTriangle(v) => Ok(triangle_load(region, mesh, |t| v[t])),
    }
}

/// Load vector of a piecewise-constant forcing given per triangle.
pub fn triangle_load(region: &Region, mesh: &TwoLevelMesh, f: impl Fn(usize) -> f64) -> Vec<f64> {
    let mut out = vec![0.0; region.num_nodes()];
    let w = mesh.triangle_area() / 3.0;
    for &t in region.triangles() {
        let ft = f(t);
        if ft != 0.0 {
            for l in region_triangle_locals(region, mesh, t) {
                out[l] += ft * w;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy)]
pub enum NormKind<'a> {
    Energy(&'a CoefficientField),
    L2,
}

/// Energy or L2 norm of a field over `region`.
pub fn norm(field: &FineField, kind: NormKind<'_>, region: &Region, mesh: &TwoLevelMesh) -> Result<f64> {
    field.check_region(region)?;
    let m = match kind {
        NormKind::Energy(a) => assemble_stiffness(region, mesh, a)?,
        NormKind::L2 => assemble_mass(region, mesh),
    };
    Ok(m.quad_form(field.values()).max(0.0).sqrt())
}
