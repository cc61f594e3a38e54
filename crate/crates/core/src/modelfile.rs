//! Self-describing binary container for trained reduced models.
//!
//! Layout: 8-byte magic, little-endian u32 schema version, little-endian
//! u64 header length, JSON header, then the dense blocks as consecutive
//! little-endian f64 arrays in column-major order, in the order listed by
//! the header's block manifest.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::affine::StructureFactorMeta;
use crate::error::{Error, Result};
use crate::model::ModelSpec;
use crate::offline::{GreedyRecord, ReducedBasisModel, ReducedObservable, SamplePoint};
use crate::params::DomainBox;

const MAGIC: &[u8; 8] = b"SPRBMDL\0";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockInfo {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservableHeader {
    pub label: String,
    pub meta: StructureFactorMeta,
}

/// JSON header of a model file; everything except the dense payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelHeader {
    pub schema_version: u32,
    pub model: ModelSpec,
    pub domain: DomainBox,
    pub full_dim: usize,
    pub q_terms: usize,
    pub basis_size: usize,
    pub sigma_ref: f64,
    pub tol_degeneracy: f64,
    pub greedy_tol: f64,
    pub compress_tol: f64,
    pub basis_included: bool,
    pub samples: Vec<SamplePoint>,
    pub history: Vec<GreedyRecord>,
    pub observables: Vec<ObservableHeader>,
    pub blocks: Vec<BlockInfo>,
}

/// Write a trained model. `include_basis = false` drops the Hilbert-space
/// block for scan-only deployments (warm starts and occupation profiles
/// then refuse at load time).
pub fn save(rbm: &ReducedBasisModel, path: &Path, include_basis: bool) -> Result<()> {
    let model = *rbm.model().ok_or(Error::ModelFile(
        "only models with a model descriptor can be saved".into(),
    ))?;
    let include_basis = include_basis && rbm.has_basis();
    let q = rbm.q_terms();
    let n = rbm.basis_size();

    let mut blocks: Vec<(String, &DMatrix<f64>)> = Vec::new();
    blocks.push(("gram".into(), rbm.gram()));
    for qi in 0..q {
        blocks.push((format!("h_{qi}"), &rbm.h_reduced()[qi]));
    }
    for qi in 0..q {
        for qj in 0..q {
            blocks.push((format!("h_{qi}_{qj}"), rbm.h_cross(qi, qj)));
        }
    }
    for (oi, obs) in rbm.observables().iter().enumerate() {
        for (pi, block) in obs.pair_blocks.iter().enumerate() {
            blocks.push((format!("obs{oi}_pair{pi}"), block));
        }
    }
    if include_basis {
        blocks.push(("basis".into(), rbm.basis().expect("checked above")));
    }

    let header = ModelHeader {
        schema_version: SCHEMA_VERSION,
        model,
        domain: rbm.domain().clone(),
        full_dim: rbm.full_dim(),
        q_terms: q,
        basis_size: n,
        sigma_ref: rbm.sigma_ref(),
        tol_degeneracy: rbm.tol_degeneracy(),
        greedy_tol: rbm.greedy_tol(),
        compress_tol: rbm.compress_tol(),
        basis_included: include_basis,
        samples: rbm.samples().to_vec(),
        history: rbm.history().to_vec(),
        observables: rbm
            .observables()
            .iter()
            .map(|o| ObservableHeader {
                label: o.label.clone(),
                meta: o.meta.clone(),
            })
            .collect(),
        blocks: blocks
            .iter()
            .map(|(name, m)| BlockInfo {
                name: name.clone(),
                rows: m.nrows(),
                cols: m.ncols(),
            })
            .collect(),
    };
    let header_json =
        serde_json::to_vec(&header).map_err(|e| Error::ModelFile(format!("header encode: {e}")))?;

    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&SCHEMA_VERSION.to_le_bytes())?;
    w.write_all(&(header_json.len() as u64).to_le_bytes())?;
    w.write_all(&header_json)?;
    for (_, m) in &blocks {
        write_f64s(&mut w, m.as_slice())?;
    }
    w.flush()?;
    Ok(())
}

/// Read only the JSON header (used by `model-info`).
pub fn load_header(path: &Path) -> Result<ModelHeader> {
    let mut r = BufReader::new(File::open(path)?);
    read_header(&mut r)
}

/// Load a full model.
pub fn load(path: &Path) -> Result<ReducedBasisModel> {
    let mut r = BufReader::new(File::open(path)?);
    let header = read_header(&mut r)?;
    let q = header.q_terms;
    let n = header.basis_size;

    let mut blocks = std::collections::HashMap::new();
    for info in &header.blocks {
        let data = read_f64s(&mut r, info.rows * info.cols)?;
        blocks.insert(
            info.name.clone(),
            DMatrix::from_column_slice(info.rows, info.cols, &data),
        );
    }
    let mut take = |name: &str| -> Result<DMatrix<f64>> {
        blocks
            .remove(name)
            .ok_or_else(|| Error::ModelFile(format!("missing block '{name}'")))
    };

    let gram = take("gram")?;
    if gram.nrows() != n {
        return Err(Error::ModelFile("gram block size mismatch".into()));
    }
    let h_red: Vec<DMatrix<f64>> = (0..q).map(|qi| take(&format!("h_{qi}"))).collect::<Result<_>>()?;
    let mut h_cross = Vec::with_capacity(q * q);
    for qi in 0..q {
        for qj in 0..q {
            h_cross.push(take(&format!("h_{qi}_{qj}"))?);
        }
    }
    let mut observables = Vec::with_capacity(header.observables.len());
    for (oi, oh) in header.observables.iter().enumerate() {
        let g = oh.meta.groups();
        let mut pair_blocks = Vec::with_capacity(g * g);
        for pi in 0..g * g {
            pair_blocks.push(take(&format!("obs{oi}_pair{pi}"))?);
        }
        observables.push(ReducedObservable {
            label: oh.label.clone(),
            meta: oh.meta.clone(),
            pair_blocks,
        });
    }
    let basis = if header.basis_included {
        Some(take("basis")?)
    } else {
        None
    };

    Ok(ReducedBasisModel {
        model: Some(header.model),
        domain: header.domain,
        full_dim: header.full_dim,
        basis,
        gram,
        h_red,
        h_cross,
        observables,
        samples: header.samples,
        history: header.history,
        sigma_ref: header.sigma_ref,
        tol_degeneracy: header.tol_degeneracy,
        greedy_tol: header.greedy_tol,
        compress_tol: header.compress_tol,
    })
}

fn read_header(r: &mut impl Read) -> Result<ModelHeader> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::ModelFile(
            "not a reduced-model file (bad magic)".into(),
        ));
    }
    let mut v = [0u8; 4];
    r.read_exact(&mut v)?;
    let version = u32::from_le_bytes(v);
    if version != SCHEMA_VERSION {
        return Err(Error::VersionMismatch {
            expected: SCHEMA_VERSION,
            found: version,
        });
    }
    let mut len = [0u8; 8];
    r.read_exact(&mut len)?;
    let len = u64::from_le_bytes(len) as usize;
    let mut header_json = vec![0u8; len];
    r.read_exact(&mut header_json)?;
    serde_json::from_slice(&header_json).map_err(|e| Error::ModelFile(format!("header decode: {e}")))
}

fn write_f64s(w: &mut impl Write, data: &[f64]) -> Result<()> {
    let mut buf = Vec::with_capacity(8 * 1024);
    for chunk in data.chunks(1024) {
        buf.clear();
        for &x in chunk {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        w.write_all(&buf)?;
    }
    Ok(())
}

fn read_f64s(r: &mut impl Read, count: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; count * 8];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}
