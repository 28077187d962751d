//! Experiment configuration files.
//!
//! Plain `key = value` lines; `#` starts a comment. Top-level keys come first,
//! followed by optional `[coefficient]`, `[forcing]`, `[studies]` and
//! `[inclusions]` sections. The inclusions section holds bare
//! `x0,y0,x1,y1,value` rows instead of keys.
//!
//! ```text
//! id = demo
//! nc = 4
//! nf = 32
//! epsilon = H
//!
//! [coefficient]
//! kind = constant
//! c = 1
//! ```

use std::collections::HashSet;

use crate::coefficient::{default_inclusions, parse_inclusion, CoefficientSpec, Inclusion};
use crate::error::{Error, Result};
use crate::expr::{parse_expr, Expr};
use crate::fem::Forcing;
use crate::mesh::TwoLevelMesh;
use crate::oversampling::InterpKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    /// The coarse mesh size `1/Nc`.
    CoarseSize,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub nc: usize,
    pub nf: usize,
    pub epsilon: Epsilon,
    pub interp_kind: InterpKind,
    pub include_edge_basis: bool,
    pub coefficient: CoefficientSpec,
    /// Source text of the forcing expression.
    pub forcing: String,
    pub forcing_expr: Expr,
    pub threads: usize,
    pub output: String,
    pub tol: f64,
    /// Coarse sizes of the convergence study.
    pub convergence_nc: Vec<usize>,
    /// Coarse sizes of the forcing-approximation study.
    pub ratio_nc: Vec<usize>,
    /// Forcing of the forcing-approximation study.
    pub ratio_forcing: String,
    pub ratio_forcing_expr: Expr,
    /// Forcing grid of the spectrum study (defaults to `nc`).
    pub svd_grid: Option<usize>,
    pub svd_cap: usize,
}

impl ExperimentConfig {
    pub fn resolved_eps(&self) -> f64 {
        match self.epsilon {
            Epsilon::CoarseSize => 1.0 / self.nc as f64,
            Epsilon::Value(v) => v,
        }
    }

    /// The forcing sampled at the fine nodes of `mesh`.
    pub fn forcing_on(&self, mesh: &TwoLevelMesh) -> Forcing {
        Forcing::nodal(mesh, |p| self.forcing_expr.eval(p[0], p[1]))
    }

    pub fn ratio_forcing_on(&self, mesh: &TwoLevelMesh) -> Forcing {
        Forcing::nodal(mesh, |p| self.ratio_forcing_expr.eval(p[0], p[1]))
    }

    /// Replace the random-field seed (no effect on other coefficient kinds).
    pub fn with_seed(mut self, seed: u64) -> Self {
        if let CoefficientSpec::Random { seed: s, .. } = &mut self.coefficient {
            *s = seed;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    Top,
    Coefficient,
    Forcing,
    Studies,
    Inclusions,
}

fn err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config { line, msg: msg.into() }
}

fn parse_num<T: std::str::FromStr>(line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| err(line, format!("{key}: cannot parse {v:?}")))
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(err(line, format!("{key}: expected true or false, got {v:?}"))),
    }
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<usize>> {
    let items: Vec<usize> = v
        .split(',')
        .map(|s| parse_num(line, key, s.trim()))
        .collect::<Result<_>>()?;
    if items.is_empty() || items.contains(&0) {
        return Err(err(line, format!("{key}: expected a list of positive integers")));
    }
    Ok(items)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut section = Section::Top;
    let mut seen: HashSet<(u8, String)> = HashSet::new();
    let mut seen_sections: HashSet<u8> = HashSet::new();

    let mut id = None;
    let mut nc = None;
    let mut nf = None;
    let mut epsilon = Epsilon::CoarseSize;
    let mut interp_kind = InterpKind::Optimal;
    let mut include_edge_basis = true;
    let mut threads = 1usize;
    let mut output = "out".to_string();
    let mut tol = 1e-10;
    let mut kind: Option<(usize, String)> = None;
    let mut c = None;
    let mut grid_n = None;
    let mut seed = None;
    let mut forcing = ("one".to_string(), 0usize);
    let mut convergence_nc = vec![4, 8, 16];
    let mut ratio_nc = vec![4, 8, 16];
    let mut ratio_forcing = ("cos(3*x)*sin(2*y)".to_string(), 0usize);
    let mut svd_grid = None;
    let mut svd_cap = 1024usize;
    let mut inclusions: Option<Vec<Inclusion>> = None;
    let mut nf_line = 0;

    for (k, raw) in text.lines().enumerate() {
        let ln = k + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| err(ln, "unterminated section header"))?
                .trim();
            section = match name {
                "coefficient" => Section::Coefficient,
                "forcing" => Section::Forcing,
                "studies" => Section::Studies,
                "inclusions" => Section::Inclusions,
                _ => return Err(err(ln, format!("unknown section [{name}]"))),
            };
            if !seen_sections.insert(section as u8) {
                return Err(err(ln, format!("duplicate section [{name}]")));
            }
            if section == Section::Inclusions {
                inclusions.get_or_insert_with(Vec::new);
            }
            continue;
        }
        if section == Section::Inclusions {
            let inc = parse_inclusion(line).map_err(|m| err(ln, m))?;
            inclusions.as_mut().expect("section open").push(inc);
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(ln, format!("expected key = value, got {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(err(ln, "empty key"));
        }
        if !seen.insert((section as u8, key.to_string())) {
            return Err(err(ln, format!("duplicate key {key}")));
        }
        match (section, key) {
            (Section::Top, "id") => {
                if value.is_empty() || value.contains(',') || value.contains(char::is_whitespace) {
                    return Err(err(ln, "id must be non-empty without commas or spaces"));
                }
                id = Some(value.to_string());
            }
            (Section::Top, "nc") => nc = Some((parse_num::<usize>(ln, key, value)?, ln)),
            (Section::Top, "nf") => {
                nf = Some(parse_num::<usize>(ln, key, value)?);
                nf_line = ln;
            }
            (Section::Top, "epsilon") => {
                epsilon = if value == "H" {
                    Epsilon::CoarseSize
                } else {
                    let v: f64 = parse_num(ln, key, value)?;
                    if !(v > 0.0) || !v.is_finite() {
                        return Err(err(ln, format!("epsilon must be positive, got {value}")));
                    }
                    Epsilon::Value(v)
                };
            }
            (Section::Top, "interp_kind") => interp_kind = value.parse().map_err(|m: String| err(ln, m))?,
            (Section::Top, "include_edge_basis") => include_edge_basis = parse_bool(ln, key, value)?,
            (Section::Top, "threads") => {
                threads = parse_num(ln, key, value)?;
                if threads == 0 {
                    return Err(err(ln, "threads must be at least 1"));
                }
            }
            (Section::Top, "output") => {
                if value.is_empty() {
                    return Err(err(ln, "output must not be empty"));
                }
                output = value.to_string();
            }
            (Section::Top, "tol") => {
                tol = parse_num(ln, key, value)?;
                if !(tol > 0.0 && tol < 1.0) {
                    return Err(err(ln, format!("tol must lie in (0, 1), got {value}")));
                }
            }
            (Section::Coefficient, "kind") => kind = Some((ln, value.to_string())),
            (Section::Coefficient, "c") => c = Some((parse_num::<f64>(ln, key, value)?, ln)),
            (Section::Coefficient, "grid_n") => grid_n = Some(parse_num::<usize>(ln, key, value)?),
            (Section::Coefficient, "seed") => seed = Some(parse_num::<u64>(ln, key, value)?),
            (Section::Forcing, "f") => forcing = (value.to_string(), ln),
            (Section::Studies, "convergence_nc") => convergence_nc = parse_list(ln, key, value)?,
            (Section::Studies, "ratio_nc") => ratio_nc = parse_list(ln, key, value)?,
            (Section::Studies, "ratio_f") => ratio_forcing = (value.to_string(), ln),
            (Section::Studies, "svd_grid") => {
                let g: usize = parse_num(ln, key, value)?;
                if g == 0 {
                    return Err(err(ln, "svd_grid must be positive"));
                }
                svd_grid = Some(g);
            }
            (Section::Studies, "svd_cap") => svd_cap = parse_num(ln, key, value)?,
            _ => return Err(err(ln, format!("unknown key {key}"))),
        }
    }

    let end = text.lines().count().max(1);
    let (nc, nc_line) = nc.ok_or_else(|| err(end, "missing required key nc"))?;
    let nf = nf.ok_or_else(|| err(end, "missing required key nf"))?;
    if nc == 0 {
        return Err(err(nc_line, "nc must be at least 1"));
    }
    if nf % nc != 0 {
        return Err(err(nf_line, format!("nf={nf} is not a multiple of nc={nc}")));
    }
    if nf / nc < 2 {
        return Err(err(nf_line, format!("nf={nf} must be at least 2*nc={}", 2 * nc)));
    }
    let (kind_line, kind) = kind.ok_or_else(|| err(end, "missing [coefficient] kind"))?;
    let coefficient = match kind.as_str() {
        "constant" => {
            let (c, c_line) = c.ok_or_else(|| err(kind_line, "constant coefficient needs c"))?;
            if !(c > 0.0) || !c.is_finite() {
                return Err(err(c_line, format!("c must be positive, got {c}")));
            }
            CoefficientSpec::Constant { c }
        }
        "multiscale" => CoefficientSpec::Multiscale,
        "random" => CoefficientSpec::Random {
            grid_n: grid_n.unwrap_or(128),
            seed: seed.unwrap_or(0),
        },
        "high_contrast" => CoefficientSpec::HighContrast {
            inclusions: inclusions.take().unwrap_or_else(default_inclusions),
        },
        other => return Err(err(kind_line, format!("unknown coefficient kind {other:?}"))),
    };
    if matches!(coefficient, CoefficientSpec::Random { grid_n: 0, .. }) {
        return Err(err(kind_line, "grid_n must be at least 1"));
    }
    if inclusions.is_some() {
        return Err(err(kind_line, "[inclusions] given for a coefficient that is not high_contrast"));
    }
    let forcing_expr = parse_expr(&forcing.0).map_err(|e| err(forcing.1, e.to_string()))?;
    let ratio_forcing_expr = parse_expr(&ratio_forcing.0).map_err(|e| err(ratio_forcing.1, e.to_string()))?;
    Ok(ExperimentConfig {
        id: id.unwrap_or_else(|| "run".to_string()),
        nc,
        nf,
        epsilon,
        interp_kind,
        include_edge_basis,
        coefficient,
        forcing: forcing.0,
        forcing_expr,
        threads,
        output,
        tol,
        convergence_nc,
        ratio_nc,
        ratio_forcing: ratio_forcing.0,
        ratio_forcing_expr,
        svd_grid,
        svd_cap,
    })
}
