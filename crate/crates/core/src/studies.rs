//! Diagnostic studies: local solution-operator spectra, the coarse forcing
//! approximation ratio, convergence sweeps and basis counts.

use std::collections::BTreeMap;

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::basis::{build_trial_space, BuildOptions, OfflineArtifact};
use crate::coefficient::{constant_field, CoefficientField, CoefficientSpec};
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, load_vector, triangle_load, FineField, Forcing};
use crate::local::LocalProblem;
use crate::mesh::{Region, TwoLevelMesh};
use crate::oversampling::{weighted_svd, InterpKind};
use crate::solve::{bubble_correction, error_report, online_solve, reference_solve};

/// Singular values of one operator, descending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumTable {
    pub label: String,
    pub sigma: Vec<f64>,
}

impl SpectrumTable {
    /// `sigma_k / sigma_1`.
    pub fn normalized(&self) -> Vec<f64> {
        match self.sigma.first() {
            Some(&s1) if s1 > 0.0 => self.sigma.iter().map(|s| s / s1).collect(),
            _ => vec![0.0; self.sigma.len()],
        }
    }

    /// CSV rows `label,k,sigma` with `k` starting at 1.
    pub fn csv_rows(&self) -> Vec<String> {
        self.sigma
            .iter()
            .enumerate()
            .map(|(k, s)| format!("{},{},{}", self.label, k + 1, s))
            .collect()
    }
}

/// The default study geometry: `W` is the 3x3 block of cells around the
/// domain centre, `D` its middle cell. Needs `Nc >= 4` and even.
pub fn centered_regions(mesh: &TwoLevelMesh) -> Result<(Region, Region)> {
    let nc = mesh.nc();
    if nc < 4 || nc % 2 != 0 {
        return Err(Error::InvalidArgument(format!("the centered study geometry needs an even Nc >= 4, got {nc}")));
    }
    let m = nc / 2;
    let d = mesh.block_region(m - 1, m - 1, m, m)?;
    let w = mesh.block_region(m - 2, m - 2, m + 1, m + 1)?;
    Ok((d, w))
}

/// Spectrum of the map from forcings (L2-normalized indicators of a
/// `grid x grid` partition of the domain) to the harmonic part on `w` of the
/// global solution, restricted to `d` and measured in the unweighted `H1(d)`
/// norm.
pub fn local_operator_svd(
    mesh: &TwoLevelMesh,
    a: &CoefficientField,
    d: &Region,
    w: &Region,
    grid: usize,
    cap: usize,
) -> Result<SpectrumTable> {
    if grid == 0 || grid * grid > cap {
        return Err(Error::ForcingGridTooFine { grid, cap });
    }
    if !w.bounds().contains_box(&d.bounds()) {
        return Err(Error::InvalidArgument("D must lie inside W".into()));
    }
    let omega = mesh.domain_region();
    let global = LocalProblem::new(omega.clone(), mesh, a)?;
    let nf = mesh.nf();
    let block_of = |t: usize| {
        let c = mesh.triangle_centroid(t);
        let bx = ((c[0] * grid as f64) as usize).min(grid - 1);
        let by = ((c[1] * grid as f64) as usize).min(grid - 1);
        by * grid + bx
    };
    let n_forcing = grid * grid;
    let mut counts = vec![0usize; n_forcing];
    for t in 0..mesh.num_triangles() {
        counts[block_of(t)] += 1;
    }
    let interior = global.interior();
    let mut loads = DMatrix::zeros(interior.len(), n_forcing);
    for k in 0..n_forcing {
        if counts[k] == 0 {
            return Err(Error::InvalidArgument(format!("forcing grid {grid} is finer than the mesh (Nf={nf})")));
        }
        let scale = 1.0 / (counts[k] as f64 * mesh.triangle_area()).sqrt();
        let load = triangle_load(&omega, mesh, |t| if block_of(t) == k { scale } else { 0.0 });
        for (r, &l) in interior.iter().enumerate() {
            loads[(r, k)] = load[l];
        }
    }
    let solutions = global.bubble_many(&loads)?;
    drop(global);

    let wp = LocalProblem::new(w.clone(), mesh, a)?;
    let traces = DMatrix::from_fn(wp.boundary().len(), n_forcing, |r, k| {
        solutions[(w.nodes()[wp.boundary()[r]], k)]
    });
    let harmonic = wp.harmonic_extension_many(&traces)?;
    let t = DMatrix::from_fn(d.num_nodes(), n_forcing, |r, k| {
        harmonic[(w.local_index(d.nodes()[r]).expect("D inside W"), k)]
    });
    let unit = constant_field(mesh, 1.0)?;
    let gy = assemble_stiffness(d, mesh, &unit)?.to_dense() + assemble_mass(d, mesh).to_dense();
    let gy = 0.5 * (&gy + gy.transpose());
    let svd = weighted_svd(&t, &DMatrix::identity(n_forcing, n_forcing), &gy)?;
    Ok(SpectrumTable {
        label: a.spec().kind().to_string(),
        sigma: svd.sigma,
    })
}

/// `||u - u_h||_{H1_0} / (H ||f||_{L2})` where `u` solves the Poisson problem
/// with forcing `f` and `u_h` is its `H1_0` projection onto the Poisson
/// solutions of the coarse-cell indicators.
pub fn forcing_ratio(mesh: &TwoLevelMesh, f: &Forcing) -> Result<f64> {
    let fnorm = f.l2_norm(mesh)?;
    if fnorm == 0.0 {
        return Err(Error::InvalidArgument("forcing has zero L2 norm".into()));
    }
    let unit = constant_field(mesh, 1.0)?;
    let omega = mesh.domain_region();
    let global = LocalProblem::new(omega.clone(), mesh, &unit)?;
    let interior = global.interior().to_vec();
    let u = global.bubble_solve(mesh, f)?;
    let b_f = load_vector(&omega, mesh, f)?;

    let ncell = mesh.num_cells();
    let mut loads = DMatrix::zeros(interior.len(), ncell);
    for c in 0..ncell {
        let load = triangle_load(&omega, mesh, |t| if mesh.cell_of_triangle(t) == c { 1.0 } else { 0.0 });
        for (r, &l) in interior.iter().enumerate() {
            loads[(r, c)] = load[l];
        }
    }
    let basis = global.bubble_many(&loads)?;
    // Gram of the energy inner product: u_i^T K u_j = u_i^T load_j
    let basis_int = DMatrix::from_fn(interior.len(), ncell, |r, c| basis[(interior[r], c)]);
    let g = basis_int.tr_mul(&loads);
    let g = 0.5 * (&g + g.transpose());
    let rhs = DVector::from_fn(ncell, |c, _| (0..interior.len()).map(|r| basis_int[(r, c)] * b_f[interior[r]]).sum());
    let coef = Cholesky::new(g).ok_or(Error::GramNotSpd("projection"))?.solve(&rhs);
    let u_h = &basis * coef;
    let diff: Vec<f64> = u.values().iter().zip(u_h.iter()).map(|(a, b)| a - b).collect();
    let err = global.stiffness().quad_form(&diff).max(0.0).sqrt();
    Ok(err / (mesh.coarse_size() * fnorm))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub nc: usize,
    pub h: f64,
    pub n_basis: usize,
    pub kbar_e: f64,
    /// `E_a_ms, E_a, E_l2_ms, E_l2`.
    pub errors: [f64; 4],
}

impl ConvergenceRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.h, self.errors[0], self.errors[1], self.errors[2], self.errors[3], self.kbar_e
        )
    }
}

pub const CONVERGENCE_HEADER: &str = "H,E_a_ms,E_a,E_l2_ms,E_l2,kbar_e";

/// Least-squares slope of `log y` against `log x`; `None` with fewer than two
/// points.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Offline and online runs at every `Nc` in `ncs` on a fixed fine mesh, with
/// `eps = H`.
pub fn convergence_study(
    nf: usize,
    ncs: &[usize],
    spec: &CoefficientSpec,
    forcing: &dyn Fn(&TwoLevelMesh) -> Forcing,
    interp_kind: InterpKind,
    include_edge_basis: bool,
) -> Result<Vec<ConvergenceRow>> {
    let mut rows = Vec::with_capacity(ncs.len());
    let mut reference: Option<FineField> = None;
    for &nc in ncs {
        let mesh = TwoLevelMesh::new(nc, nf)?;
        let a = CoefficientField::from_spec(&mesh, spec)?;
        let f = forcing(&mesh);
        // the sampled coefficient does not depend on Nc, so neither does the reference
        if reference.is_none() {
            reference = Some(reference_solve(&mesh, &a, &f)?);
        }
        let opts = BuildOptions {
            eps: mesh.coarse_size(),
            interp_kind,
            include_edge_basis,
        };
        let art = build_trial_space(&mesh, &a, &opts)?.artifact;
        let sol = online_solve(&art, &mesh, &f)?;
        let mut corrected = bubble_correction(&mesh, &a, &f)?;
        corrected.add_scaled(&sol.field, 1.0)?;
        let errors = error_report(reference.as_ref().expect("set"), &sol.field, &corrected, &mesh, &a)?;
        rows.push(ConvergenceRow {
            nc,
            h: mesh.coarse_size(),
            n_basis: art.n_basis(),
            kbar_e: art.kbar_e(),
            errors,
        });
    }
    Ok(rows)
}

/// `k_bar_e` and a histogram `k -> number of edges with k functions`.
pub fn basis_count_stats(art: &OfflineArtifact) -> (f64, BTreeMap<usize, usize>) {
    let mut hist = BTreeMap::new();
    for k in art.edge_counts() {
        *hist.entry(k).or_insert(0) += 1;
    }
    (art.kbar_e(), hist)
}
