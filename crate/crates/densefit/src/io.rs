//! On-disk formats: the JSON model file, the `IUVR` raster and JSON documents.

use std::fs;
use std::path::{Path, PathBuf};

use densefit_core::{BodyModel, BodyModelData, Iuv, IuvMap, VertexIuv};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const MODEL_FORMAT_VERSION: u32 = 1;
pub const IUV_MAGIC: &[u8; 4] = b"IUVR";

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error(transparent)]
    Model(#[from] densefit_core::Error),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

/// The model file layout. Arrays are flat and row-major; the root's parent is `-1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    #[serde(rename = "V")]
    pub vertex_count: usize,
    #[serde(rename = "K_total")]
    pub joint_count: usize,
    #[serde(rename = "B")]
    pub shape_dim: usize,
    #[serde(rename = "P")]
    pub part_count: usize,
    pub template_vertices: Vec<f64>,
    pub faces: Vec<usize>,
    pub shape_dirs: Vec<f64>,
    pub joint_regressor: Vec<f64>,
    pub skin_weights: Vec<f64>,
    pub parents: Vec<i64>,
    pub vertex_iuv: Vec<f64>,
}

fn expect_len(field: &'static str, expected: usize, found: usize) -> Result<(), densefit_core::Error> {
    if expected == found {
        Ok(())
    } else {
        Err(densefit_core::Error::DimensionMismatch { field, expected, found })
    }
}

fn bad(field: &'static str, message: &str) -> densefit_core::Error {
    densefit_core::Error::Invariant { field, message: message.to_string() }
}

impl ModelFile {
    pub fn from_model(model: &BodyModel) -> Self {
        let d = model.data();
        Self {
            version: MODEL_FORMAT_VERSION,
            vertex_count: model.vertex_count(),
            joint_count: model.joint_count(),
            shape_dim: model.shape_dim(),
            part_count: model.part_count(),
            template_vertices: d.template_vertices.iter().flatten().copied().collect(),
            faces: d.faces.iter().flatten().copied().collect(),
            shape_dirs: d.shape_dirs.clone(),
            joint_regressor: d.joint_regressor.clone(),
            skin_weights: d.skin_weights.clone(),
            parents: d.parents.iter().map(|p| p.map_or(-1, |p| p as i64)).collect(),
            vertex_iuv: d.vertex_iuv.iter().flat_map(|t| [t.part as f64, t.u, t.v]).collect(),
        }
    }

    /// Checks the declared sizes and builds a validated model.
    pub fn into_model(self) -> Result<BodyModel, densefit_core::Error> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(bad("version", &format!("unsupported model format version {}", self.version)));
        }
        let (v, k, b) = (self.vertex_count, self.joint_count, self.shape_dim);
        expect_len("template_vertices", 3 * v, self.template_vertices.len())?;
        if self.faces.len() % 3 != 0 {
            return Err(bad("faces", "length is not a multiple of 3"));
        }
        expect_len("shape_dirs", 3 * v * b, self.shape_dirs.len())?;
        expect_len("joint_regressor", k * v, self.joint_regressor.len())?;
        expect_len("skin_weights", v * k, self.skin_weights.len())?;
        expect_len("parents", k, self.parents.len())?;
        expect_len("vertex_iuv", 3 * v, self.vertex_iuv.len())?;
        if self.part_count > u8::MAX as usize {
            return Err(bad("P", "at most 255 parts are supported"));
        }

        let parents = self
            .parents
            .iter()
            .map(|&p| match p {
                -1 => Ok(None),
                p if p >= 0 => Ok(Some(p as usize)),
                _ => Err(bad("parents", "negative parent index other than -1")),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let vertex_iuv = self
            .vertex_iuv
            .chunks_exact(3)
            .map(|t| {
                if t[0].fract() != 0.0 || !(0.0..=255.0).contains(&t[0]) {
                    return Err(bad("vertex_iuv", "part id is not an integer in 0..=255"));
                }
                Ok(VertexIuv { part: t[0] as u8, u: t[1], v: t[2] })
            })
            .collect::<Result<Vec<_>, _>>()?;

        BodyModel::new(BodyModelData {
            template_vertices: self.template_vertices.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            faces: self.faces.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect(),
            shape_dim: b,
            shape_dirs: self.shape_dirs,
            joint_regressor: self.joint_regressor,
            skin_weights: self.skin_weights,
            parents,
            part_count: self.part_count,
            vertex_iuv,
        })
    }
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|source| IoError::Json { path: path.to_path_buf(), source })
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|source| IoError::Json { path: path.to_path_buf(), source })?;
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

pub fn model_from_json(text: &str) -> Result<BodyModel, IoError> {
    let file: ModelFile =
        serde_json::from_str(text).map_err(|source| IoError::Json { path: PathBuf::from("<model>"), source })?;
    Ok(file.into_model()?)
}

pub fn load_model(path: &Path) -> Result<BodyModel, IoError> {
    let file: ModelFile = read_json(path)?;
    Ok(file.into_model()?)
}

pub fn save_model(model: &BodyModel, path: &Path) -> Result<(), IoError> {
    write_json(path, &ModelFile::from_model(model))
}

pub fn encode_iuv(map: &IuvMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(12 + 3 * map.pixels().len());
    out.extend_from_slice(IUV_MAGIC);
    out.extend_from_slice(&map.width().to_le_bytes());
    out.extend_from_slice(&map.height().to_le_bytes());
    for p in map.pixels() {
        out.extend_from_slice(&[p.part, p.u, p.v]);
    }
    out
}

pub fn decode_iuv(bytes: &[u8]) -> Result<IuvMap, String> {
    if bytes.len() < 12 || &bytes[..4] != IUV_MAGIC {
        return Err("missing IUVR header".into());
    }
    let width = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    let expected = (width as usize).checked_mul(height as usize).and_then(|n| n.checked_mul(3));
    let body = &bytes[12..];
    if expected != Some(body.len()) {
        return Err(format!("{width}x{height} raster needs {} bytes of pixels, found {}", 3 * width as u64 * height as u64, body.len()));
    }
    let pixels = body.chunks_exact(3).map(|c| Iuv::new(c[0], c[1], c[2])).collect();
    IuvMap::from_pixels(width, height, pixels).map_err(|e| e.to_string())
}

pub fn read_iuv(path: &Path) -> Result<IuvMap, IoError> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    decode_iuv(&bytes).map_err(|message| IoError::Format { path: path.to_path_buf(), message })
}

pub fn write_iuv(path: &Path, map: &IuvMap) -> Result<(), IoError> {
    fs::write(path, encode_iuv(map)).map_err(io_err(path))
}
