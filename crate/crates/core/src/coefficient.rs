//! Scalar conductivity fields, sampled piecewise constant per fine triangle at
//! the triangle centroid.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::SplitMix64;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::mesh::TwoLevelMesh;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]` carrying a constant value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inclusion {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
    pub value: f64,
}

impl Inclusion {
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] <= self.x1 && p[1] >= self.y0 && p[1] <= self.y1
    }
}

/// Parameters that fully determine a coefficient field on a given mesh.
#[derive(Debug, Clone, PartialEq)]
pub enum CoefficientSpec {
    Constant { c: f64 },
    Multiscale,
    Random { grid_n: usize, seed: u64 },
    HighContrast { inclusions: Vec<Inclusion> },
}

impl CoefficientSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            CoefficientSpec::Constant { .. } => "constant",
            CoefficientSpec::Multiscale => "multiscale",
            CoefficientSpec::Random { .. } => "random",
            CoefficientSpec::HighContrast { .. } => "high_contrast",
        }
    }

    /// Canonical text form; floats are written as their bit patterns.
    pub fn canonical(&self) -> String {
        let mut s = String::from(self.kind());
        match self {
            CoefficientSpec::Constant { c } => write!(s, " c={:016x}", c.to_bits()).unwrap(),
            CoefficientSpec::Multiscale => {}
            CoefficientSpec::Random { grid_n, seed } => {
                write!(s, " grid_n={grid_n} seed={seed}").unwrap()
            }
            CoefficientSpec::HighContrast { inclusions } => {
                for inc in inclusions {
                    write!(
                        s,
                        " [{:016x},{:016x},{:016x},{:016x},{:016x}]",
                        inc.x0.to_bits(),
                        inc.y0.to_bits(),
                        inc.x1.to_bits(),
                        inc.y1.to_bits(),
                        inc.value.to_bits()
                    )
                    .unwrap();
                }
            }
        }
        s
    }

    /// SHA-256 of the canonical form.
    pub fn hash(&self) -> [u8; 32] {
        let digest = Sha256::digest(self.canonical().as_bytes());
        let mut out = [0u8; 32];
        out.copy_from_slice(&digest);
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    values: Vec<f64>,
    lambda_min: f64,
    lambda_max: f64,
    spec: CoefficientSpec,
}

impl CoefficientField {
    pub fn from_spec(mesh: &TwoLevelMesh, spec: &CoefficientSpec) -> Result<Self> {
        match spec {
            CoefficientSpec::Constant { c } => constant_field(mesh, *c),
            CoefficientSpec::Multiscale => Ok(multiscale_field(mesh)),
            CoefficientSpec::Random { grid_n, seed } => random_field(mesh, *grid_n, *seed),
            CoefficientSpec::HighContrast { inclusions } => high_contrast_field(mesh, inclusions),
        }
    }

    fn from_values(values: Vec<f64>, spec: CoefficientSpec) -> Result<Self> {
        let mut lambda_min = f64::INFINITY;
        let mut lambda_max = f64::NEG_INFINITY;
        for &v in &values {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::NonpositiveValue(v));
            }
            lambda_min = lambda_min.min(v);
            lambda_max = lambda_max.max(v);
        }
        Ok(Self {
            values,
            lambda_min,
            lambda_max,
            spec,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, triangle: usize) -> f64 {
        self.values[triangle]
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn contrast(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    pub fn spec(&self) -> &CoefficientSpec {
        &self.spec
    }

    pub fn check_mesh(&self, mesh: &TwoLevelMesh) -> Result<()> {
        if self.values.len() != mesh.num_triangles() {
            return Err(Error::CoefficientMismatch {
                expected: mesh.num_triangles(),
                got: self.values.len(),
            });
        }
        Ok(())
    }

    /// Same field with every value multiplied by `s > 0`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        Self::from_values(self.values.iter().map(|v| v * s).collect(), self.spec.clone())
    }
}

fn sample(mesh: &TwoLevelMesh, f: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    (0..mesh.num_triangles())
        .map(|t| f(mesh.triangle_centroid(t)))
        .collect()
}

pub fn constant_field(mesh: &TwoLevelMesh, c: f64) -> Result<CoefficientField> {
    if !(c > 0.0) {
        return Err(Error::NonpositiveValue(c));
    }
    CoefficientField::from_values(vec![c; mesh.num_triangles()], CoefficientSpec::Constant { c })
}

const SCALES: [f64; 5] = [1.0 / 5.0, 1.0 / 13.0, 1.0 / 17.0, 1.0 / 31.0, 1.0 / 65.0];

/// Five oscillatory ratios at incommensurate scales plus a smooth background.
pub fn multiscale_value(p: [f64; 2]) -> f64 {
    let [x, y] = p;
    let [e1, e2, e3, e4, e5] = SCALES;
    let s = |t: f64, e: f64| (2.0 * PI * t / e).sin();
    let c = |t: f64, e: f64| (2.0 * PI * t / e).cos();
    let sum = (1.1 + s(x, e1)) / (1.1 + s(y, e1))
        + (1.1 + s(y, e2)) / (1.1 + c(x, e2))
        + (1.1 + c(x, e3)) / (1.1 + s(y, e3))
        + (1.1 + s(y, e4)) / (1.1 + c(x, e4))
        + (1.1 + c(x, e5)) / (1.1 + s(y, e5))
        + (4.0 * x * x * y * y).sin()
        + 1.0;
    sum / 6.0
}

pub fn multiscale_field(mesh: &TwoLevelMesh) -> CoefficientField {
    CoefficientField::from_values(sample(mesh, multiscale_value), CoefficientSpec::Multiscale)
        .expect("multiscale coefficient is positive")
}

/// Standard normals on the `(grid_n + 1)^2` lattice, row-major (x fastest).
///
/// Uniforms come from a SplitMix64 stream as `(next >> 11) * 2^-53`; each pair
/// `(u1, u2)` feeds Box-Muller with `1 - u1` in the logarithm and yields two
/// consecutive lattice values.
pub fn normal_lattice(grid_n: usize, seed: u64) -> Vec<f64> {
    let n = (grid_n + 1) * (grid_n + 1);
    let mut rng = SplitMix64::seed_from_u64(seed);
    let mut uniform = move || (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    let mut out = Vec::with_capacity(n + 1);
    while out.len() < n {
        let u1 = 1.0 - uniform();
        let u2 = uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        out.push(r * (2.0 * PI * u2).cos());
        out.push(r * (2.0 * PI * u2).sin());
    }
    out.truncate(n);
    out
}

pub fn random_field(mesh: &TwoLevelMesh, grid_n: usize, seed: u64) -> Result<CoefficientField> {
    if grid_n == 0 {
        return Err(Error::InvalidArgument("random field grid_n must be >= 1".into()));
    }
    let lattice = normal_lattice(grid_n, seed);
    let g = grid_n as f64;
    let values = sample(mesh, |[x, y]| {
        let (sx, sy) = (x * g, y * g);
        let i = (sx.floor() as usize).min(grid_n - 1);
        let j = (sy.floor() as usize).min(grid_n - 1);
        let (tx, ty) = (sx - i as f64, sy - j as f64);
        let at = |a: usize, b: usize| lattice[b * (grid_n + 1) + a];
        let v = (1.0 - tx) * (1.0 - ty) * at(i, j)
            + tx * (1.0 - ty) * at(i + 1, j)
            + (1.0 - tx) * ty * at(i, j + 1)
            + tx * ty * at(i + 1, j + 1);
        v.abs() + 0.5
    });
    CoefficientField::from_values(values, CoefficientSpec::Random { grid_n, seed })
}

/// Multiscale background overridden inside each rectangle; later rectangles win.
pub fn high_contrast_field(mesh: &TwoLevelMesh, inclusions: &[Inclusion]) -> Result<CoefficientField> {
    if let Some(bad) = inclusions.iter().find(|inc| !(inc.value > 0.0)) {
        return Err(Error::NonpositiveValue(bad.value));
    }
    let values = sample(mesh, |p| {
        inclusions
            .iter()
            .rev()
            .find(|inc| inc.contains(p))
            .map_or_else(|| multiscale_value(p), |inc| inc.value)
    });
    CoefficientField::from_values(
        values,
        CoefficientSpec::HighContrast {
            inclusions: inclusions.to_vec(),
        },
    )
}

const DEFAULT_INCLUSIONS: &str = include_str!("../data/high_contrast_inclusions.csv");

/// Parse `x0,y0,x1,y1,value` rows; `#` starts a comment.
pub fn parse_inclusion_rows(text: &str) -> std::result::Result<Vec<Inclusion>, (usize, String)> {
    let mut out = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        out.push(parse_inclusion(line).map_err(|m| (k + 1, m))?);
    }
    Ok(out)
}

pub(crate) fn parse_inclusion(line: &str) -> std::result::Result<Inclusion, String> {
    let fields: Vec<&str> = line.split(',').map(str::trim).collect();
    if fields.len() != 5 {
        return Err(format!("expected 5 comma-separated values, found {}", fields.len()));
    }
    let mut v = [0.0; 5];
    for (slot, f) in v.iter_mut().zip(&fields) {
        *slot = f
            .parse::<f64>()
            .map_err(|_| format!("not a number: {f:?}"))?;
        if !slot.is_finite() {
            return Err(format!("not finite: {f:?}"));
        }
    }
    let [x0, y0, x1, y1, value] = v;
    if x0 > x1 || y0 > y1 {
        return Err("inclusion corners must satisfy x0 <= x1 and y0 <= y1".into());
    }
    if !(value > 0.0) {
        return Err(format!("inclusion value must be positive, got {value}"));
    }
    Ok(Inclusion { x0, y0, x1, y1, value })
}

/// Channel and patch layout shipped with the crate for high-contrast runs.
pub fn default_inclusions() -> Vec<Inclusion> {
    parse_inclusion_rows(DEFAULT_INCLUSIONS).expect("bundled inclusion table parses")
}
