//! On-disk formats: a binary container for model weights and a small JSON
//! envelope for everything else.
//!
//! A model file is `[u64 LE header length][JSON header][raw f64 LE body]`.
//! The header carries the model config, an optional record of the mask that
//! was zero-applied, an optional record of a hard prune, and a tensor
//! manifest of `(name, shape, dtype, byte offset)` entries laid out
//! contiguously in the body. Floats round-trip bitwise.
//!
//! Sidecar artifacts (importance profiles, masks, reports) are plain JSON
//! tagged with the same `format_version` so stale files fail loudly instead
//! of deserializing into something subtly wrong.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mask::GlobalMask;
use crate::model::{BlockWeights, Linear, ModelConfig, ModelWeights};
use crate::tensor::Matrix;

/// Version stamp written into every file this module produces.
pub const FORMAT_VERSION: u32 = 1;

/// Record of a hard prune: the mask that drove it and the variance scale
/// that was folded into the surviving input-side weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneStamp {
    pub d_original: usize,
    pub d_prime: usize,
    pub alpha: f64,
    pub mask: GlobalMask,
}

/// Header metadata that travels with the weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub format_version: u32,
    /// Mask whose zeros are baked into the stored tensors, if any.
    pub applied_mask: Option<GlobalMask>,
    /// Present when the stored tensors are a compacted model.
    pub prune: Option<PruneStamp>,
}

impl ModelMeta {
    #[must_use]
    pub fn plain() -> Self {
        ModelMeta {
            format_version: FORMAT_VERSION,
            applied_mask: None,
            prune: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
    dtype: String,
    offset: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format_version: u32,
    config: ModelConfig,
    applied_mask: Option<GlobalMask>,
    prune: Option<PruneStamp>,
    tensors: Vec<TensorEntry>,
}

// ── Tensor enumeration ──────────────────────────────────────────────────────

enum TensorRef<'a> {
    Mat(&'a Matrix),
    Vec(&'a [f64]),
}

impl TensorRef<'_> {
    fn shape(&self) -> Vec<usize> {
        match self {
            TensorRef::Mat(m) => vec![m.rows(), m.cols()],
            TensorRef::Vec(v) => vec![v.len()],
        }
    }

    fn data(&self) -> &[f64] {
        match self {
            TensorRef::Mat(m) => m.data(),
            TensorRef::Vec(v) => v,
        }
    }
}

fn push_linear<'a>(out: &mut Vec<(String, TensorRef<'a>)>, prefix: &str, lin: &'a Linear) {
    out.push((format!("{prefix}.weight"), TensorRef::Mat(&lin.weight)));
    if let Some(bias) = &lin.bias {
        out.push((format!("{prefix}.bias"), TensorRef::Vec(bias)));
    }
}

fn enumerate_tensors(weights: &ModelWeights) -> Vec<(String, TensorRef<'_>)> {
    let mut out = Vec::new();
    out.push(("tok_embedding".into(), TensorRef::Mat(&weights.tok_embedding)));
    out.push(("pos_embedding".into(), TensorRef::Mat(&weights.pos_embedding)));
    for (i, b) in weights.blocks.iter().enumerate() {
        out.push((format!("blocks.{i}.norm1_w"), TensorRef::Vec(&b.norm1_w)));
        push_linear(&mut out, &format!("blocks.{i}.attn_q"), &b.attn_q);
        push_linear(&mut out, &format!("blocks.{i}.attn_k"), &b.attn_k);
        push_linear(&mut out, &format!("blocks.{i}.attn_v"), &b.attn_v);
        push_linear(&mut out, &format!("blocks.{i}.attn_o"), &b.attn_o);
        out.push((format!("blocks.{i}.norm2_w"), TensorRef::Vec(&b.norm2_w)));
        push_linear(&mut out, &format!("blocks.{i}.mlp_in"), &b.mlp_in);
        push_linear(&mut out, &format!("blocks.{i}.mlp_out"), &b.mlp_out);
    }
    out.push(("final_norm_w".into(), TensorRef::Vec(&weights.final_norm_w)));
    if let Some(head) = &weights.lm_head {
        push_linear(&mut out, "lm_head", head);
    }
    out
}

// ── Saving ──────────────────────────────────────────────────────────────────

/// Writes a model file. The metadata should describe the tensors as stored:
/// pass the mask actually baked in, or the prune stamp for a compacted model.
pub fn save_model(path: &Path, weights: &ModelWeights, meta: &ModelMeta) -> Result<()> {
    weights.validate()?;
    let tensors = enumerate_tensors(weights);
    let mut manifest = Vec::with_capacity(tensors.len());
    let mut offset = 0u64;
    for (name, t) in &tensors {
        manifest.push(TensorEntry {
            name: name.clone(),
            shape: t.shape(),
            dtype: "f64".into(),
            offset,
        });
        offset += (t.data().len() * 8) as u64;
    }
    let header = Header {
        format_version: meta.format_version,
        config: weights.config.clone(),
        applied_mask: meta.applied_mask.clone(),
        prune: meta.prune.clone(),
        tensors: manifest,
    };
    let header_bytes = serde_json::to_vec(&header)?;

    let file = File::create(path).map_err(|e| Error::io_at(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&(header_bytes.len() as u64).to_le_bytes())?;
    w.write_all(&header_bytes)?;
    for (_, t) in &tensors {
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

// ── Loading ─────────────────────────────────────────────────────────────────

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Format(format!("model file truncated while reading {what}"))
        } else {
            Error::Io(e)
        }
    })
}

struct BodyReader<'a, R: Read> {
    r: &'a mut R,
    pos: u64,
}

impl<R: Read> BodyReader<'_, R> {
    fn take(&mut self, entry: &TensorEntry) -> Result<Vec<f64>> {
        if entry.dtype != "f64" {
            return Err(Error::Format(format!(
                "tensor {} has dtype {}, only f64 is supported",
                entry.name, entry.dtype
            )));
        }
        if entry.offset != self.pos {
            return Err(Error::Format(format!(
                "tensor {} at offset {} but body position is {}; \
                 tensors must be contiguous and in manifest order",
                entry.name, entry.offset, self.pos
            )));
        }
        let n: usize = entry.shape.iter().product();
        let mut data = Vec::with_capacity(n);
        let mut buf = [0u8; 8];
        for _ in 0..n {
            read_exact_or_format(self.r, &mut buf, &entry.name)?;
            data.push(f64::from_le_bytes(buf));
        }
        self.pos += (n * 8) as u64;
        Ok(data)
    }

    fn matrix(&mut self, entry: &TensorEntry) -> Result<Matrix> {
        if entry.shape.len() != 2 {
            return Err(Error::Format(format!(
                "tensor {} has rank {}, expected 2",
                entry.name,
                entry.shape.len()
            )));
        }
        let data = self.take(entry)?;
        Matrix::from_vec(entry.shape[0], entry.shape[1], data)
    }

    fn vector(&mut self, entry: &TensorEntry) -> Result<Vec<f64>> {
        if entry.shape.len() != 1 {
            return Err(Error::Format(format!(
                "tensor {} has rank {}, expected 1",
                entry.name,
                entry.shape.len()
            )));
        }
        self.take(entry)
    }
}

struct Manifest {
    entries: Vec<TensorEntry>,
    cursor: usize,
}

impl Manifest {
    fn expect(&mut self, name: &str) -> Result<&TensorEntry> {
        let entry = self.entries.get(self.cursor).ok_or_else(|| {
            Error::Format(format!("model file manifest is missing tensor {name}"))
        })?;
        if entry.name != name {
            return Err(Error::Format(format!(
                "model file manifest has tensor {} where {name} was expected",
                entry.name
            )));
        }
        self.cursor += 1;
        Ok(entry)
    }

    fn peek_is(&self, name: &str) -> bool {
        self.entries
            .get(self.cursor)
            .is_some_and(|e| e.name == name)
    }
}

fn read_linear<R: Read>(
    manifest: &mut Manifest,
    body: &mut BodyReader<'_, R>,
    prefix: &str,
) -> Result<Linear> {
    let weight = {
        let entry = manifest.expect(&format!("{prefix}.weight"))?.clone();
        body.matrix(&entry)?
    };
    let bias_name = format!("{prefix}.bias");
    let bias = if manifest.peek_is(&bias_name) {
        let entry = manifest.expect(&bias_name)?.clone();
        Some(body.vector(&entry)?)
    } else {
        None
    };
    Ok(Linear { weight, bias })
}

/// Reads a model file back, returning the weights and the stored metadata.
/// The loaded weights are shape-validated against their config.
pub fn load_model(path: &Path) -> Result<(ModelWeights, ModelMeta)> {
    let file = File::open(path).map_err(|e| Error::io_at(path, e))?;
    let mut r = BufReader::new(file);

    let mut len_buf = [0u8; 8];
    read_exact_or_format(&mut r, &mut len_buf, "the header length")?;
    let header_len = u64::from_le_bytes(len_buf);
    if header_len > 1 << 30 {
        return Err(Error::Format(format!(
            "header length {header_len} is implausibly large; not a model file"
        )));
    }
    let mut header_bytes = vec![0u8; header_len as usize];
    read_exact_or_format(&mut r, &mut header_bytes, "the header")?;
    let header: Header = serde_json::from_slice(&header_bytes)
        .map_err(|e| Error::Format(format!("model file header is not valid JSON: {e}")))?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "model file has format_version {}, this build reads {FORMAT_VERSION}",
            header.format_version
        )));
    }

    let config = header.config;
    let mut manifest = Manifest {
        entries: header.tensors,
        cursor: 0,
    };
    let mut body = BodyReader { r: &mut r, pos: 0 };

    let tok_embedding = {
        let entry = manifest.expect("tok_embedding")?.clone();
        body.matrix(&entry)?
    };
    let pos_embedding = {
        let entry = manifest.expect("pos_embedding")?.clone();
        body.matrix(&entry)?
    };
    let mut blocks = Vec::with_capacity(config.n_blocks);
    for i in 0..config.n_blocks {
        let norm1_w = {
            let entry = manifest.expect(&format!("blocks.{i}.norm1_w"))?.clone();
            body.vector(&entry)?
        };
        let attn_q = read_linear(&mut manifest, &mut body, &format!("blocks.{i}.attn_q"))?;
        let attn_k = read_linear(&mut manifest, &mut body, &format!("blocks.{i}.attn_k"))?;
        let attn_v = read_linear(&mut manifest, &mut body, &format!("blocks.{i}.attn_v"))?;
        let attn_o = read_linear(&mut manifest, &mut body, &format!("blocks.{i}.attn_o"))?;
        let norm2_w = {
            let entry = manifest.expect(&format!("blocks.{i}.norm2_w"))?.clone();
            body.vector(&entry)?
        };
        let mlp_in = read_linear(&mut manifest, &mut body, &format!("blocks.{i}.mlp_in"))?;
        let mlp_out = read_linear(&mut manifest, &mut body, &format!("blocks.{i}.mlp_out"))?;
        blocks.push(BlockWeights {
            norm1_w,
            attn_q,
            attn_k,
            attn_v,
            attn_o,
            norm2_w,
            mlp_in,
            mlp_out,
        });
    }
    let final_norm_w = {
        let entry = manifest.expect("final_norm_w")?.clone();
        body.vector(&entry)?
    };
    let lm_head = if manifest.peek_is("lm_head.weight") {
        Some(read_linear(&mut manifest, &mut body, "lm_head")?)
    } else {
        None
    };
    if manifest.cursor != manifest.entries.len() {
        return Err(Error::Format(format!(
            "model file manifest has {} unexpected trailing tensors starting at {}",
            manifest.entries.len() - manifest.cursor,
            manifest.entries[manifest.cursor].name
        )));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::Format(
            "model file body has trailing bytes beyond the manifest".into(),
        ));
    }

    let weights = ModelWeights {
        config,
        tok_embedding,
        pos_embedding,
        blocks,
        final_norm_w,
        lm_head,
    };
    weights.validate()?;
    let meta = ModelMeta {
        format_version: header.format_version,
        applied_mask: header.applied_mask,
        prune: header.prune,
    };
    Ok((weights, meta))
}

// ── JSON sidecars ───────────────────────────────────────────────────────────

#[derive(Serialize, Deserialize)]
struct Envelope<T> {
    format_version: u32,
    #[serde(flatten)]
    payload: T,
}

/// Writes `payload` as pretty JSON under a `format_version` tag.
pub fn save_json<T: Serialize>(path: &Path, payload: &T) -> Result<()> {
    let envelope = Envelope {
        format_version: FORMAT_VERSION,
        payload,
    };
    let mut text = serde_json::to_string_pretty(&envelope)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io_at(path, e))?;
    Ok(())
}

/// Reads a JSON sidecar, rejecting files from other format versions.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
    let envelope: Envelope<T> = serde_json::from_str(&text).map_err(|e| {
        Error::Format(format!("{}: not a valid sidecar file: {e}", path.display()))
    })?;
    if envelope.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "{}: format_version {} but this build reads {FORMAT_VERSION}",
            path.display(),
            envelope.format_version
        )));
    }
    Ok(envelope.payload)
}
