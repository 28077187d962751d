//! Binary format of the offline artifact.
//!
//! Little-endian throughout:
//!
//! ```text
//! "MSBA" | version u32 = 1
//! Nc u32 | Nf u32 | eps f64 | coefficient hash [u8; 32]
//! interp kind u8 | include edge basis u8 | interior edges u32 | basis count u32
//! per basis: kind u8 | anchor u32 | cell count u8 | cells u32[] | nnz u32 | nodes u32[] | values f64[]
//! stiffness: dim u64 | row_ptr u64[dim+1] | col u32[nnz] | val f64[nnz]
//! CRC-64/XZ of everything above, u64
//! ```

use std::path::Path;

use crc::{Crc, CRC_64_XZ};
use thiserror::Error;

use crate::basis::{BasisKind, MsBasisFunction, OfflineArtifact};
use crate::oversampling::InterpKind;
use crate::sparse::SparseMatrix;

pub const MAGIC: &[u8; 4] = b"MSBA";
pub const VERSION: u32 = 1;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("bad magic bytes")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("file truncated")]
    Truncated,
    #[error("checksum mismatch (stored {stored:016x}, computed {computed:016x})")]
    Checksum { stored: u64, computed: u64 },
    #[error("malformed content: {0}")]
    Malformed(String),
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

struct Writer {
    buf: Vec<u8>,
}

impl Writer {
    fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }
    fn u32(&mut self, v: usize) {
        let v = u32::try_from(v).expect("value fits in u32");
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.buf.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }
}

pub fn to_bytes(art: &OfflineArtifact) -> Vec<u8> {
    let mut w = Writer { buf: Vec::new() };
    w.buf.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(art.nc);
    w.u32(art.nf);
    w.f64(art.eps);
    w.buf.extend_from_slice(&art.coefficient_hash);
    w.u8(art.interp_kind.code());
    w.u8(art.include_edge_basis as u8);
    w.u32(art.n_interior_edges);
    w.u32(art.basis.len());
    for b in &art.basis {
        w.u8(b.kind.code());
        w.u32(b.anchor);
        w.u8(u8::try_from(b.cells.len()).expect("few cells"));
        for &c in &b.cells {
            w.u32(c);
        }
        w.u32(b.nodes.len());
        for &n in &b.nodes {
            w.u32(n);
        }
        for &v in &b.values {
            w.f64(v);
        }
    }
    let m = &art.stiffness;
    w.u64(m.nrows());
    for &p in m.row_ptr() {
        w.u64(p);
    }
    for &c in m.col_idx() {
        w.u32(c);
    }
    for &v in m.values() {
        w.f64(v);
    }
    let crc = CRC64.checksum(&w.buf);
    w.buf.extend_from_slice(&crc.to_le_bytes());
    w.buf
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArtifactError> {
        let end = self.at.checked_add(n).ok_or(ArtifactError::Truncated)?;
        let s = self.buf.get(self.at..end).ok_or(ArtifactError::Truncated)?;
        self.at = end;
        Ok(s)
    }
    fn u8(&mut self) -> Result<u8, ArtifactError> {
        Ok(self.take(1)?[0])
    }
    fn u32(&mut self) -> Result<usize, ArtifactError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")) as usize)
    }
    fn u64(&mut self) -> Result<usize, ArtifactError> {
        let v = u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes"));
        usize::try_from(v).map_err(|_| ArtifactError::Malformed(format!("length {v} too large")))
    }
    fn f64(&mut self) -> Result<f64, ArtifactError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
    /// Guard a count of `size`-byte items against the remaining length.
    fn count(&self, n: usize, size: usize) -> Result<usize, ArtifactError> {
        if n.checked_mul(size).map_or(true, |b| b > self.buf.len() - self.at) {
            return Err(ArtifactError::Truncated);
        }
        Ok(n)
    }
}

fn malformed(msg: impl Into<String>) -> ArtifactError {
    ArtifactError::Malformed(msg.into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<OfflineArtifact, ArtifactError> {
    if bytes.len() < 8 {
        return Err(if bytes.len() >= 4 && &bytes[..4] != MAGIC {
            ArtifactError::BadMagic
        } else {
            ArtifactError::Truncated
        });
    }
    if &bytes[..4] != MAGIC {
        return Err(ArtifactError::BadMagic);
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(ArtifactError::UnsupportedVersion(version));
    }
    if bytes.len() < 16 {
        return Err(ArtifactError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
    let computed = CRC64.checksum(body);
    if stored != computed {
        // a body that ends early is reported as truncation, anything else as corruption
        return Err(match parse_body(body) {
            Err(ArtifactError::Truncated) => ArtifactError::Truncated,
            _ => ArtifactError::Checksum { stored, computed },
        });
    }
    parse_body(body)
}

fn parse_body(body: &[u8]) -> Result<OfflineArtifact, ArtifactError> {
    let mut r = Reader { buf: body, at: 8 };
    let nc = r.u32()?;
    let nf = r.u32()?;
    let eps = r.f64()?;
    let coefficient_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
    let interp_kind = InterpKind::from_code(r.u8()?).ok_or_else(|| malformed("unknown interpolation kind"))?;
    let include_edge_basis = match r.u8()? {
        0 => false,
        1 => true,
        v => return Err(malformed(format!("edge-basis flag {v}"))),
    };
    let n_interior_edges = r.u32()?;
    let n_basis = r.u32()?;
    let n_basis = r.count(n_basis, 10)?;
    let mut basis = Vec::with_capacity(n_basis);
    for _ in 0..n_basis {
        let kind = BasisKind::from_code(r.u8()?).ok_or_else(|| malformed("unknown basis kind"))?;
        let anchor = r.u32()?;
        let ncells = r.u8()? as usize;
        let cells = (0..ncells).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let nnz = r.u32()?;
        let nnz = r.count(nnz, 12)?;
        let nodes = (0..nnz).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
        let values = (0..nnz).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
        if kind == BasisKind::Edge && anchor >= n_interior_edges {
            return Err(malformed(format!("edge anchor {anchor} out of range")));
        }
        if nodes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(malformed("basis nodes not ascending"));
        }
        basis.push(MsBasisFunction {
            kind,
            anchor,
            cells,
            nodes,
            values,
        });
    }
    let dim = r.u64()?;
    if dim != n_basis {
        return Err(malformed(format!("stiffness dimension {dim} for {n_basis} basis functions")));
    }
    let dim = r.count(dim, 8)?;
    let row_ptr = (0..=dim).map(|_| r.u64()).collect::<Result<Vec<_>, _>>()?;
    let nnz = *row_ptr.last().expect("nonempty");
    let nnz = r.count(nnz, 12)?;
    let col = (0..nnz).map(|_| r.u32()).collect::<Result<Vec<_>, _>>()?;
    let val = (0..nnz).map(|_| r.f64()).collect::<Result<Vec<_>, _>>()?;
    if r.at != body.len() {
        return Err(malformed(format!("{} trailing bytes", body.len() - r.at)));
    }
    let stiffness = SparseMatrix::from_csr(dim, dim, row_ptr, col, val, true)
        .map_err(|e| malformed(e.to_string()))?;
    Ok(OfflineArtifact {
        nc,
        nf,
        eps,
        coefficient_hash,
        interp_kind,
        include_edge_basis,
        n_interior_edges,
        basis,
        stiffness,
    })
}

pub fn save_artifact(art: &OfflineArtifact, path: &Path) -> Result<(), ArtifactError> {
    std::fs::write(path, to_bytes(art))?;
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<OfflineArtifact, ArtifactError> {
    from_bytes(&std::fs::read(path)?)
}
