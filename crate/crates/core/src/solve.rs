//! Online stage: coarse Galerkin solve, bubble correction, fine reference
//! solve, and error measurement.

use std::time::Instant;

use rayon::prelude::*;

use crate::basis::{BasisKind, OfflineArtifact};
use crate::coefficient::CoefficientField;
use crate::error::{Error, Result, ResultExt, Site};
use crate::fem::{assemble_mass, assemble_stiffness, load_vector, FineField, Forcing};
use crate::local::LocalProblem;
use crate::mesh::TwoLevelMesh;
use crate::oversampling::InterpKind;
use crate::sparse::SpdSolver;

/// Tolerance of the coarse solve.
pub const COARSE_TOL: f64 = 1e-12;

/// Coarse load vector `b_i = (f, phi_i)`.
pub fn assemble_load(art: &OfflineArtifact, mesh: &TwoLevelMesh, f: &Forcing) -> Result<Vec<f64>> {
    art.check_mesh(mesh)?;
    let omega = mesh.domain_region();
    let fine = load_vector(&omega, mesh, f)?;
    Ok(art
        .basis
        .iter()
        .map(|b| b.nodes.iter().zip(&b.values).map(|(&n, &v)| v * fine[n]).sum())
        .collect())
}

/// Coarse coefficients and the reconstructed fine field.
#[derive(Debug, Clone)]
pub struct OnlineSolution {
    pub coefficients: Vec<f64>,
    pub field: FineField,
}

impl OnlineSolution {
    /// Coefficients of the nodal interpolation functions only, by node id.
    pub fn nodal_coefficients(&self, art: &OfflineArtifact) -> Vec<(usize, f64)> {
        art.basis
            .iter()
            .zip(&self.coefficients)
            .filter(|(b, _)| b.kind == BasisKind::Nodal)
            .map(|(b, &c)| (b.anchor, c))
            .collect()
    }
}

/// Fine field `sum_i c_i phi_i`.
pub fn reconstruct(art: &OfflineArtifact, mesh: &TwoLevelMesh, c: &[f64]) -> Result<FineField> {
    let mut values = vec![0.0; mesh.num_nodes()];
    for (b, &ci) in art.basis.iter().zip(c) {
        for (&n, &v) in b.nodes.iter().zip(&b.values) {
            values[n] += ci * v;
        }
    }
    FineField::new(&mesh.domain_region(), values)
}

pub fn online_solve(art: &OfflineArtifact, mesh: &TwoLevelMesh, f: &Forcing) -> Result<OnlineSolution> {
    let b = assemble_load(art, mesh, f)?;
    let coefficients = if b.is_empty() {
        Vec::new()
    } else {
        let solver = SpdSolver::new(&art.stiffness).map_err(|_| Error::SingularSystem)?;
        solver.solve(&art.stiffness, &b, COARSE_TOL)?
    };
    let field = reconstruct(art, mesh, &coefficients)?;
    Ok(OnlineSolution { coefficients, field })
}

/// Sum of the per-cell zero-trace solutions for `f`.
pub fn bubble_correction(mesh: &TwoLevelMesh, a: &CoefficientField, f: &Forcing) -> Result<FineField> {
    f.check_mesh(mesh)?;
    let omega = mesh.domain_region();
    let parts: Vec<FineField> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let lp = LocalProblem::new(mesh.cell_region(c)?, mesh, a).at(Site::Cell(c))?;
            lp.bubble_solve(mesh, f).at(Site::Cell(c))
        })
        .collect::<Result<_>>()?;
    let mut total = FineField::zeros(&omega);
    for p in &parts {
        total.add_scaled(p, 1.0)?;
    }
    Ok(total)
}

/// Fine-mesh P1 solution with homogeneous Dirichlet data.
pub fn reference_solve(mesh: &TwoLevelMesh, a: &CoefficientField, f: &Forcing) -> Result<FineField> {
    let lp = LocalProblem::new(mesh.domain_region(), mesh, a)?;
    lp.bubble_solve(mesh, f)
}

/// Relative errors against the reference, plus bookkeeping.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub config_id: String,
    pub nc: usize,
    pub nf: usize,
    pub eps: f64,
    pub interp_kind: InterpKind,
    pub n_basis: usize,
    pub kbar_e: f64,
    pub e_a_ms: f64,
    pub e_a: f64,
    pub e_l2_ms: f64,
    pub e_l2: f64,
    pub online_seconds: f64,
}

pub const REPORT_HEADER: &str =
    "config_id,Nc,Nf,eps,interp_kind,n_basis,kbar_e,E_a_ms,E_a,E_l2_ms,E_l2,online_seconds";

impl SolveReport {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            self.config_id,
            self.nc,
            self.nf,
            self.eps,
            self.interp_kind.as_str(),
            self.n_basis,
            self.kbar_e,
            self.e_a_ms,
            self.e_a,
            self.e_l2_ms,
            self.e_l2,
            self.online_seconds
        )
    }
}

/// The four relative errors `(E_a_ms, E_a, E_l2_ms, E_l2)`.
pub fn error_report(
    u_ref: &FineField,
    u_ms: &FineField,
    u_corrected: &FineField,
    mesh: &TwoLevelMesh,
    a: &CoefficientField,
) -> Result<[f64; 4]> {
    let omega = mesh.domain_region();
    for u in [u_ref, u_ms, u_corrected] {
        u.check_region(&omega)?;
    }
    let k = assemble_stiffness(&omega, mesh, a)?;
    let m = assemble_mass(&omega, mesh);
    let ref_a = k.quad_form(u_ref.values()).max(0.0).sqrt();
    let ref_l2 = m.quad_form(u_ref.values()).max(0.0).sqrt();
    if ref_a == 0.0 || ref_l2 == 0.0 {
        return Err(Error::ZeroNormReference);
    }
    let d_ms = u_ref.sub(u_ms)?;
    let d_c = u_ref.sub(u_corrected)?;
    let rel = |mat: &crate::sparse::SparseMatrix, d: &FineField, r: f64| mat.quad_form(d.values()).max(0.0).sqrt() / r;
    Ok([
        rel(&k, &d_ms, ref_a),
        rel(&k, &d_c, ref_a),
        rel(&m, &d_ms, ref_l2),
        rel(&m, &d_c, ref_l2),
    ])
}

/// Everything produced by one online run.
#[derive(Debug, Clone)]
pub struct OnlineRun {
    pub solution: OnlineSolution,
    pub corrected: Option<FineField>,
    pub report: SolveReport,
}

/// Online solve (plus optional bubble correction) timed, then compared with a
/// fine reference solve. Without the correction, `E_a` and `E_l2` repeat the
/// uncorrected errors.
pub fn run_online(
    config_id: &str,
    art: &OfflineArtifact,
    mesh: &TwoLevelMesh,
    a: &CoefficientField,
    f: &Forcing,
    bubble: bool,
    reference: Option<&FineField>,
) -> Result<OnlineRun> {
    let started = Instant::now();
    let solution = online_solve(art, mesh, f)?;
    let corrected = if bubble {
        let mut u = bubble_correction(mesh, a, f)?;
        u.add_scaled(&solution.field, 1.0)?;
        Some(u)
    } else {
        None
    };
    let online_seconds = started.elapsed().as_secs_f64();
    let owned;
    let u_ref = match reference {
        Some(r) => r,
        None => {
            owned = reference_solve(mesh, a, f)?;
            &owned
        }
    };
    let errs = error_report(u_ref, &solution.field, corrected.as_ref().unwrap_or(&solution.field), mesh, a)?;
    let report = SolveReport {
        config_id: config_id.to_string(),
        nc: art.nc,
        nf: art.nf,
        eps: art.eps,
        interp_kind: art.interp_kind,
        n_basis: art.n_basis(),
        kbar_e: art.kbar_e(),
        e_a_ms: errs[0],
        e_a: errs[1],
        e_l2_ms: errs[2],
        e_l2: errs[3],
        online_seconds,
    };
    Ok(OnlineRun {
        solution,
        corrected,
        report,
    })
}
