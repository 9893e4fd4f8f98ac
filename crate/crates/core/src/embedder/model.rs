use std::path::Path;

use rayon::prelude::*;

use super::augment::canonicalize;
use super::descriptor::{descriptor_embed, DESCRIPTOR_DIM};
use super::net::{encode, pack_batch, Architecture};
use super::EmbedderError;
use crate::raster::RasterImage;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EmbedderKind {
    Autoencoder,
    Descriptor,
}

impl std::str::FromStr for EmbedderKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "autoencoder" => Ok(Self::Autoencoder),
            "descriptor" => Ok(Self::Descriptor),
            other => Err(format!("unknown embedder {other:?} (expected autoencoder or descriptor)")),
        }
    }
}

/// Latent vector of one candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

impl AsRef<[f64]> for EmbeddingVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbedderModel {
    kind: EmbedderKind,
    arch: Architecture,
    parameters: Vec<f32>,
}

/// Patches encoded per forward pass. Fixed, so results do not depend on
/// how the work is spread over threads.
const EMBED_CHUNK: usize = 64;

impl EmbedderModel {
    pub fn descriptor() -> Self {
        Self {
            kind: EmbedderKind::Descriptor,
            arch: Architecture {
                embed_dim: DESCRIPTOR_DIM,
                ..Architecture::default()
            },
            parameters: Vec::new(),
        }
    }

    /// Autoencoder shell with no weights yet; `embed` refuses it.
    pub fn untrained(arch: Architecture) -> Self {
        Self {
            kind: EmbedderKind::Autoencoder,
            arch,
            parameters: Vec::new(),
        }
    }

    pub fn from_parameters(arch: Architecture, parameters: Vec<f32>) -> Result<Self, EmbedderError> {
        arch.validate().map_err(EmbedderError::InvalidConfig)?;
        if parameters.len() != arch.param_count() {
            return Err(EmbedderError::BadModelFile(format!(
                "expected {} parameters, got {}",
                arch.param_count(),
                parameters.len()
            )));
        }
        if parameters.iter().any(|p| !p.is_finite()) {
            return Err(EmbedderError::BadModelFile("non-finite parameter".into()));
        }
        Ok(Self {
            kind: EmbedderKind::Autoencoder,
            arch,
            parameters,
        })
    }

    pub fn kind(&self) -> EmbedderKind {
        self.kind
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn embed_dim(&self) -> usize {
        self.arch.embed_dim
    }

    pub fn canonical_size(&self) -> usize {
        self.arch.canonical_size
    }

    pub fn parameters(&self) -> &[f32] {
        &self.parameters
    }

    pub fn is_trained(&self) -> bool {
        self.kind == EmbedderKind::Descriptor || !self.parameters.is_empty()
    }

    /// Binary form: magic, kind, sizes, tensor shapes, then little-endian f32 weights.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.push(match self.kind {
            EmbedderKind::Autoencoder => 0,
            EmbedderKind::Descriptor => 1,
        });
        for v in [
            self.arch.canonical_size,
            self.arch.embed_dim,
            self.arch.enc_channels[0],
            self.arch.enc_channels[1],
        ] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        let shapes = if self.parameters.is_empty() {
            Vec::new()
        } else {
            self.arch.tensor_shapes()
        };
        out.extend_from_slice(&(shapes.len() as u32).to_le_bytes());
        for s in &shapes {
            out.extend_from_slice(&(s.rows as u32).to_le_bytes());
            out.extend_from_slice(&(s.cols as u32).to_le_bytes());
        }
        out.extend_from_slice(&(self.parameters.len() as u64).to_le_bytes());
        for p in &self.parameters {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbedderError> {
        let bad = |m: &str| EmbedderError::BadModelFile(m.to_string());
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(MAGIC.len()).ok_or_else(|| bad("truncated header"))? != MAGIC {
            return Err(bad("wrong magic"));
        }
        let kind = match cur.take(1).ok_or_else(|| bad("truncated header"))?[0] {
            0 => EmbedderKind::Autoencoder,
            1 => EmbedderKind::Descriptor,
            k => return Err(EmbedderError::BadModelFile(format!("unknown kind {k}"))),
        };
        let mut dims = [0usize; 4];
        for d in &mut dims {
            *d = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        }
        let arch = Architecture {
            canonical_size: dims[0],
            embed_dim: dims[1],
            enc_channels: [dims[2], dims[3]],
        };
        if kind == EmbedderKind::Descriptor {
            return Ok(Self::descriptor());
        }
        arch.validate().map_err(EmbedderError::BadModelFile)?;
        let n_shapes = cur.u32().ok_or_else(|| bad("truncated header"))? as usize;
        let mut shapes = Vec::with_capacity(n_shapes);
        for _ in 0..n_shapes {
            let r = cur.u32().ok_or_else(|| bad("truncated shapes"))? as usize;
            let c = cur.u32().ok_or_else(|| bad("truncated shapes"))? as usize;
            shapes.push((r, c));
        }
        let n_params = cur.u64().ok_or_else(|| bad("truncated header"))? as usize;
        if n_params == 0 && n_shapes == 0 {
            return Ok(Self::untrained(arch));
        }
        let expected: Vec<_> = arch.tensor_shapes().iter().map(|s| (s.rows, s.cols)).collect();
        if shapes != expected {
            return Err(bad("layer shapes do not match the declared architecture"));
        }
        let raw = cur
            .take(n_params.checked_mul(4).ok_or_else(|| bad("parameter count overflows"))?)
            .ok_or_else(|| bad("truncated parameters"))?;
        if cur.pos != bytes.len() {
            return Err(bad("trailing bytes"));
        }
        let params = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_parameters(arch, params)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), EmbedderError> {
        std::fs::write(path.as_ref(), self.to_bytes())
            .map_err(|e| EmbedderError::Io(format!("{}: {e}", path.as_ref().display())))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, EmbedderError> {
        let bytes =
            std::fs::read(path.as_ref()).map_err(|e| EmbedderError::Io(format!("{}: {e}", path.as_ref().display())))?;
        Self::from_bytes(&bytes)
    }
}

const MAGIC: &[u8; 8] = b"RPTXEMB1";

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Option<&'a [u8]> {
        let end = self.pos.checked_add(n)?;
        let s = self.bytes.get(self.pos..end)?;
        self.pos = end;
        Some(s)
    }

    fn u32(&mut self) -> Option<u32> {
        Some(u32::from_le_bytes(self.take(4)?.try_into().ok()?))
    }

    fn u64(&mut self) -> Option<u64> {
        Some(u64::from_le_bytes(self.take(8)?.try_into().ok()?))
    }
}

/// Planar `[3, size, size]` tensor in `[0, 1]`.
pub(crate) fn to_tensor(img: &RasterImage) -> Vec<f32> {
    let plane = img.width() * img.height();
    let mut out = vec![0.0f32; plane * 3];
    for (i, px) in img.pixels().enumerate() {
        for c in 0..3 {
            out[c * plane + i] = px[c] as f32 / 255.0;
        }
    }
    out
}

pub fn embed(model: &EmbedderModel, patch: &RasterImage) -> Result<EmbeddingVector, EmbedderError> {
    Ok(embed_all(model, &[patch])?.pop().expect("one patch in, one vector out"))
}

/// Embeds many patches. Chunked by a fixed size and safe to run in parallel;
/// the output is identical for any worker count.
pub fn embed_all(model: &EmbedderModel, patches: &[&RasterImage]) -> Result<Vec<EmbeddingVector>, EmbedderError> {
    if !model.is_trained() {
        return Err(EmbedderError::UntrainedModel);
    }
    let out: Vec<EmbeddingVector> = match model.kind {
        EmbedderKind::Descriptor => patches
            .par_iter()
            .map(|p| EmbeddingVector(descriptor_embed(p)))
            .collect(),
        EmbedderKind::Autoencoder => {
            let arch = model.arch;
            patches
                .par_chunks(EMBED_CHUNK)
                .flat_map_iter(|chunk| {
                    let tensors: Vec<Vec<f32>> = chunk
                        .iter()
                        .map(|p| to_tensor(&canonicalize(p, arch.canonical_size)))
                        .collect();
                    let refs: Vec<&[f32]> = tensors.iter().map(Vec::as_slice).collect();
                    let x = pack_batch(&refs, arch.sample_len());
                    encode(&arch, &model.parameters, &x, chunk.len())
                        .into_iter()
                        .map(|z| EmbeddingVector(z.into_iter().map(f64::from).collect()))
                })
                .collect()
        }
    };
    if let Some(i) = out.iter().position(|v| v.0.iter().any(|x| !x.is_finite())) {
        return Err(EmbedderError::NonFiniteEmbedding(i));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedder::net::init_parameters;

    fn small() -> Architecture {
        Architecture {
            canonical_size: 8,
            enc_channels: [3, 4],
            embed_dim: 5,
        }
    }

    fn trained() -> EmbedderModel {
        EmbedderModel::from_parameters(small(), init_parameters(&small(), 9)).unwrap()
    }

    fn patch(seed: u8) -> RasterImage {
        RasterImage::from_fn(20, 20, |x, y| [(x * 11) as u8 ^ seed, (y * 7) as u8, seed])
    }

    #[test]
    fn kind_parses() {
        assert_eq!("autoencoder".parse::<EmbedderKind>().unwrap(), EmbedderKind::Autoencoder);
        assert_eq!("descriptor".parse::<EmbedderKind>().unwrap(), EmbedderKind::Descriptor);
        assert!("pca".parse::<EmbedderKind>().is_err());
    }

    #[test]
    fn untrained_model_refuses_to_embed() {
        let m = EmbedderModel::untrained(small());
        assert!(!m.is_trained());
        assert_eq!(embed(&m, &patch(1)), Err(EmbedderError::UntrainedModel));
    }

    #[test]
    fn wrong_parameter_count_is_rejected() {
        assert!(EmbedderModel::from_parameters(small(), vec![0.0; 3]).is_err());
    }

    #[test]
    fn embeddings_have_model_dimension() {
        let m = trained();
        let e = embed(&m, &patch(3)).unwrap();
        assert_eq!(e.dim(), 5);
        assert!(e.values().iter().all(|v| v.is_finite()));
        let d = embed(&EmbedderModel::descriptor(), &patch(3)).unwrap();
        assert_eq!(d.dim(), EmbedderModel::descriptor().embed_dim());
    }

    #[test]
    fn embed_all_matches_embed() {
        let m = trained();
        let patches: Vec<RasterImage> = (0..150).map(|i| patch(i as u8)).collect();
        let refs: Vec<&RasterImage> = patches.iter().collect();
        let all = embed_all(&m, &refs).unwrap();
        for (p, e) in patches.iter().zip(&all) {
            assert_eq!(&embed(&m, p).unwrap(), e);
        }
    }

    #[test]
    fn bytes_roundtrip() {
        for m in [trained(), EmbedderModel::descriptor()] {
            let back = EmbedderModel::from_bytes(&m.to_bytes()).unwrap();
            assert_eq!(back, m);
        }
    }

    #[test]
    fn corrupt_bytes_are_rejected() {
        let bytes = trained().to_bytes();
        let mut bad = bytes.clone();
        bad[0] ^= 0xff;
        assert!(matches!(EmbedderModel::from_bytes(&bad), Err(EmbedderError::BadModelFile(_))));
        assert!(matches!(
            EmbedderModel::from_bytes(&bytes[..bytes.len() - 1]),
            Err(EmbedderError::BadModelFile(_))
        ));
    }

    #[test]
    fn save_and_load_give_same_embeddings() {
        let m = trained();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        m.save(&path).unwrap();
        let back = EmbedderModel::load(&path).unwrap();
        assert_eq!(embed(&back, &patch(8)).unwrap(), embed(&m, &patch(8)).unwrap());
        assert!(matches!(
            EmbedderModel::load(dir.path().join("missing.bin")),
            Err(EmbedderError::Io(_))
        ));
    }
}
