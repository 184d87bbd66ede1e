//! Binary persistence for trained models and exported embeddings.
//!
//! Both formats are a fixed header followed by raw little-endian f64 blocks
//! in declared order, so a save/load round trip is bit-exact and two runs can
//! be compared byte for byte.
//!
//! Model checkpoint (`WGCN`, version 1):
//!
//! ```text
//! magic "WGCN" | version u32 | n_users u64 | n_items u64 | d u64 | n_layers u64
//! variant u8 | leaky_slope f64
//! e0 rows | per layer: w1, w2, bias
//! ```
//!
//! Embedding export (`WEMB`, version 1):
//!
//! ```text
//! magic "WEMB" | version u32 | n_users u64 | n_items u64 | width u64
//! n_users rows of (external id u64, width f64s)
//! n_items rows of (external id u64, width f64s)
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::model::{LayerParams, ModelParams, PropagationVariant};

const MODEL_MAGIC: &[u8; 4] = b"WGCN";
const EMBEDDING_MAGIC: &[u8; 4] = b"WEMB";
const FORMAT_VERSION: u32 = 1;

/// A trained model plus everything needed to rebuild its forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub variant: PropagationVariant,
    pub leaky_slope: f64,
    pub n_users: usize,
    pub n_items: usize,
}

/// An exported E* table with external ids.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingExport {
    pub user_ids: Vec<u64>,
    pub item_ids: Vec<u64>,
    /// One row per user, then one per item, in id order.
    pub embedding: Array2<f64>,
}

fn variant_code(variant: PropagationVariant) -> u8 {
    match variant {
        PropagationVariant::Wigcn => 0,
        PropagationVariant::NgcfLike => 1,
        PropagationVariant::LightgcnLike => 2,
    }
}

fn variant_from_code(code: u8) -> Result<PropagationVariant> {
    match code {
        0 => Ok(PropagationVariant::Wigcn),
        1 => Ok(PropagationVariant::NgcfLike),
        2 => Ok(PropagationVariant::LightgcnLike),
        other => Err(Error::Checkpoint(format!("unknown variant code {other}"))),
    }
}

fn write_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn write_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn read_bytes<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Checkpoint("file ends before the declared content".into())
        } else {
            Error::Io(e)
        }
    })?;
    Ok(buf)
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    Ok(u64::from_le_bytes(read_bytes(r)?))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    Ok(f64::from_le_bytes(read_bytes(r)?))
}

fn read_f64_block(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(read_f64(r)?);
    }
    Ok(out)
}

fn check_magic(r: &mut impl Read, expected: &[u8; 4], what: &str) -> Result<()> {
    let magic: [u8; 4] = read_bytes(r)?;
    if &magic != expected {
        return Err(Error::Checkpoint(format!("not a {what} file (bad magic)")));
    }
    let version = u32::from_le_bytes(read_bytes(r)?);
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported {what} version {version}, expected {FORMAT_VERSION}"
        )));
    }
    Ok(())
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<()> {
    let params = &checkpoint.params;
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MODEL_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    write_u64(&mut w, checkpoint.n_users as u64)?;
    write_u64(&mut w, checkpoint.n_items as u64)?;
    write_u64(&mut w, params.d() as u64)?;
    write_u64(&mut w, params.n_layers() as u64)?;
    w.write_all(&[variant_code(checkpoint.variant)])?;
    write_f64(&mut w, checkpoint.leaky_slope)?;
    for &v in params.e0.iter() {
        write_f64(&mut w, v)?;
    }
    for layer in &params.layers {
        for &v in layer.w1.iter() {
            write_f64(&mut w, v)?;
        }
        for &v in layer.w2.iter() {
            write_f64(&mut w, v)?;
        }
        for &v in layer.bias.iter() {
            write_f64(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, MODEL_MAGIC, "model checkpoint")?;
    let n_users = read_u64(&mut r)? as usize;
    let n_items = read_u64(&mut r)? as usize;
    let d = read_u64(&mut r)? as usize;
    let n_layers = read_u64(&mut r)? as usize;
    if n_users == 0 || n_items == 0 || d == 0 || n_layers == 0 {
        return Err(Error::Checkpoint(format!(
            "degenerate header: {n_users} users, {n_items} items, width {d}, {n_layers} layers"
        )));
    }
    let variant = variant_from_code(read_bytes::<1>(&mut r)?[0])?;
    let leaky_slope = read_f64(&mut r)?;

    let size = n_users + n_items;
    let e0 = Array2::from_shape_vec((size, d), read_f64_block(&mut r, size * d)?)
        .expect("block length matches the declared shape");
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let w1 = Array2::from_shape_vec((d, d), read_f64_block(&mut r, d * d)?)
            .expect("block length matches the declared shape");
        let w2 = Array2::from_shape_vec((d, d), read_f64_block(&mut r, d * d)?)
            .expect("block length matches the declared shape");
        let bias = Array1::from_vec(read_f64_block(&mut r, d)?);
        layers.push(LayerParams { w1, w2, bias });
    }
    Ok(Checkpoint {
        params: ModelParams { e0, layers },
        variant,
        leaky_slope,
        n_users,
        n_items,
    })
}

pub fn export_embeddings(
    path: &Path,
    embedding: &Array2<f64>,
    user_ids: &[u64],
    item_ids: &[u64],
) -> Result<()> {
    if embedding.nrows() != user_ids.len() + item_ids.len() {
        return Err(Error::DimensionMismatch {
            context: "embedding export".into(),
            expected: format!("{} rows", user_ids.len() + item_ids.len()),
            actual: format!("{}", embedding.nrows()),
        });
    }
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(EMBEDDING_MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    write_u64(&mut w, user_ids.len() as u64)?;
    write_u64(&mut w, item_ids.len() as u64)?;
    write_u64(&mut w, embedding.ncols() as u64)?;
    for (row, &id) in user_ids.iter().chain(item_ids).enumerate() {
        write_u64(&mut w, id)?;
        for &v in embedding.row(row).iter() {
            write_f64(&mut w, v)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn import_embeddings(path: &Path) -> Result<EmbeddingExport> {
    let mut r = BufReader::new(File::open(path)?);
    check_magic(&mut r, EMBEDDING_MAGIC, "embedding export")?;
    let n_users = read_u64(&mut r)? as usize;
    let n_items = read_u64(&mut r)? as usize;
    let width = read_u64(&mut r)? as usize;
    let size = n_users + n_items;
    let mut user_ids = Vec::with_capacity(n_users);
    let mut item_ids = Vec::with_capacity(n_items);
    let mut values = Vec::with_capacity(size * width);
    for row in 0..size {
        let id = read_u64(&mut r)?;
        if row < n_users {
            user_ids.push(id);
        } else {
            item_ids.push(id);
        }
        values.extend(read_f64_block(&mut r, width)?);
    }
    let embedding = Array2::from_shape_vec((size, width), values)
        .expect("block length matches the declared shape");
    Ok(EmbeddingExport {
        user_ids,
        item_ids,
        embedding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;
    use std::sync::atomic::{AtomicU64, Ordering};

    static TEMP_COUNTER: AtomicU64 = AtomicU64::new(0);

    fn temp_path(tag: &str) -> std::path::PathBuf {
        let n = TEMP_COUNTER.fetch_add(1, Ordering::Relaxed);
        std::env::temp_dir().join(format!("ckpt-{}-{tag}-{n}.bin", std::process::id()))
    }

    fn sample_checkpoint() -> Checkpoint {
        Checkpoint {
            params: init_params(3, 5, 4, 2, 1234).unwrap(),
            variant: PropagationVariant::NgcfLike,
            leaky_slope: 0.2,
            n_users: 3,
            n_items: 5,
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let path = temp_path("roundtrip");
        let original = sample_checkpoint();
        save_checkpoint(&path, &original).unwrap();
        let loaded = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, original);
        for (a, b) in loaded.params.e0.iter().zip(original.params.e0.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn checkpoint_rejects_bad_magic() {
        let path = temp_path("magic");
        std::fs::write(&path, b"NOPE0000").unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::Checkpoint(_)
        ));
    }

    #[test]
    fn checkpoint_rejects_wrong_version() {
        let path = temp_path("version");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(MODEL_MAGIC);
        bytes.extend_from_slice(&99u32.to_le_bytes());
        std::fs::write(&path, &bytes).unwrap();
        match load_checkpoint(&path).unwrap_err() {
            Error::Checkpoint(message) => assert!(message.contains("version 99")),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn checkpoint_rejects_truncation() {
        let path = temp_path("truncated");
        save_checkpoint(&path, &sample_checkpoint()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_checkpoint(&path).unwrap_err(),
            Error::Checkpoint(_)
        ));
    }

    #[test]
    fn checkpoint_preserves_variant_and_slope() {
        for variant in [
            PropagationVariant::Wigcn,
            PropagationVariant::NgcfLike,
            PropagationVariant::LightgcnLike,
        ] {
            let path = temp_path("variant");
            let ckpt = Checkpoint {
                variant,
                leaky_slope: 0.35,
                ..sample_checkpoint()
            };
            save_checkpoint(&path, &ckpt).unwrap();
            let loaded = load_checkpoint(&path).unwrap();
            assert_eq!(loaded.variant, variant);
            assert_eq!(loaded.leaky_slope, 0.35);
        }
    }

    #[test]
    fn embedding_round_trip_is_bit_exact() {
        let path = temp_path("emb");
        let embedding =
            Array2::from_shape_fn((5, 3), |(i, j)| (i as f64 + 1.0) / (j as f64 + 7.0));
        let user_ids = vec![10, 20];
        let item_ids = vec![5, 6, 7];
        export_embeddings(&path, &embedding, &user_ids, &item_ids).unwrap();
        let imported = import_embeddings(&path).unwrap();
        assert_eq!(imported.user_ids, user_ids);
        assert_eq!(imported.item_ids, item_ids);
        for (a, b) in imported.embedding.iter().zip(embedding.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn embedding_export_validates_row_count() {
        let path = temp_path("embdim");
        let embedding = Array2::zeros((4, 2));
        assert!(export_embeddings(&path, &embedding, &[1], &[2]).is_err());
    }
}
