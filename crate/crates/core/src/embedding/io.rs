//! `VSM1` model files.
//!
//! Layout (little-endian): magic `VSM1`, u32 version = 1, u32 M, u32 k, u32 J,
//! A as M x k f64 row-major, then per modality u32 D_j and D_j x k f64
//! row-major, then f64 lambda_a, lambda_s, lambda_w, eta, alpha, u32 epochs,
//! u64 seed and the 32-byte vocabulary fingerprint.
//!
//! Modality names, gammas and the step schedule are not part of the binary
//! layout; they go to a `<file>.meta` text sidecar of `key = value` lines.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{EmbeddingModel, Hyperparams, Projection, StepSchedule};
use crate::error::{format_err, Error, Result};

const MAGIC: &[u8; 4] = b"VSM1";
const VERSION: u32 = 1;

fn meta_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

fn put_u32(buf: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| format_err(format!("{v} does not fit in u32")))?;
    buf.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn put_matrix(buf: &mut Vec<u8>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            buf.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
}

/// Serialises the model; the byte stream depends only on the model values.
pub fn model_bytes(model: &EmbeddingModel) -> Result<Vec<u8>> {
    let hp = &model.hyperparams;
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    put_u32(&mut buf, VERSION as usize)?;
    put_u32(&mut buf, model.n_terms())?;
    put_u32(&mut buf, model.k())?;
    put_u32(&mut buf, model.n_modalities())?;
    put_matrix(&mut buf, &model.textual);
    for p in &model.projections {
        put_u32(&mut buf, p.weights.nrows())?;
        put_matrix(&mut buf, &p.weights);
    }
    for v in [hp.lambda_a, hp.lambda_s, hp.lambda_w, hp.eta, hp.alpha] {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    put_u32(&mut buf, hp.epochs)?;
    buf.extend_from_slice(&hp.seed.to_le_bytes());
    buf.extend_from_slice(&model.vocab_fingerprint);
    Ok(buf)
}

fn meta_text(model: &EmbeddingModel) -> String {
    let mut out = String::new();
    for (p, g) in model.projections.iter().zip(&model.gammas) {
        out.push_str(&format!("modality = {}\n", p.modality));
        out.push_str(&format!("gamma = {g:?}\n"));
    }
    match model.hyperparams.schedule {
        StepSchedule::Constant => out.push_str("schedule = constant\n"),
        StepSchedule::InverseDecay { rate } => {
            out.push_str(&format!("schedule = inverse-decay:{rate:?}\n"))
        }
    }
    out
}

pub fn write_model(path: &Path, model: &EmbeddingModel) -> Result<()> {
    model.check()?;
    fs::write(path, model_bytes(model)?)?;
    fs::write(meta_path(path), meta_text(model))?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.at + n > self.bytes.len() {
            return Err(format_err("model file is truncated"));
        }
        let out = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DMatrix<f64>> {
        let mut m = DMatrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m[(r, c)] = self.f64()?;
            }
        }
        Ok(m)
    }
}

pub fn parse_model(bytes: &[u8]) -> Result<EmbeddingModel> {
    let mut cur = Cursor { bytes, at: 0 };
    if cur.take(4)? != MAGIC {
        return Err(format_err("not a VSM1 model file"));
    }
    let version = cur.u32()?;
    if version != VERSION as usize {
        return Err(format_err(format!("unsupported model version {version}")));
    }
    let m = cur.u32()?;
    let k = cur.u32()?;
    let j = cur.u32()?;
    let textual = cur.matrix(m, k)?;
    let mut projections = Vec::with_capacity(j);
    for idx in 0..j {
        let d = cur.u32()?;
        projections.push(Projection {
            modality: format!("modality{idx}"),
            weights: cur.matrix(d, k)?,
        });
    }
    let lambda_a = cur.f64()?;
    let lambda_s = cur.f64()?;
    let lambda_w = cur.f64()?;
    let eta = cur.f64()?;
    let alpha = cur.f64()?;
    let epochs = cur.u32()?;
    let seed = cur.u64()?;
    let fingerprint: [u8; 32] = cur.take(32)?.try_into().unwrap();
    if cur.at != bytes.len() {
        return Err(format_err("trailing bytes after model"));
    }
    Ok(EmbeddingModel {
        textual,
        projections,
        gammas: vec![1.0; j],
        hyperparams: Hyperparams {
            k,
            lambda_a,
            lambda_s,
            lambda_w,
            eta,
            epochs,
            seed,
            schedule: StepSchedule::Constant,
            alpha,
        },
        vocab_fingerprint: fingerprint,
    })
}

fn apply_meta(model: &mut EmbeddingModel, text: &str) -> Result<()> {
    let mut names = Vec::new();
    let mut gammas = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format_err(format!("bad meta line {line:?}")))?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "modality" => names.push(value.to_string()),
            "gamma" => gammas.push(
                value
                    .parse::<f64>()
                    .map_err(|_| format_err(format!("bad gamma {value:?}")))?,
            ),
            "schedule" => {
                model.hyperparams.schedule = if value == "constant" {
                    StepSchedule::Constant
                } else if let Some(rate) = value.strip_prefix("inverse-decay:") {
                    StepSchedule::InverseDecay {
                        rate: rate
                            .parse()
                            .map_err(|_| format_err(format!("bad decay rate {rate:?}")))?,
                    }
                } else {
                    return Err(format_err(format!("unknown schedule {value:?}")));
                }
            }
            _ => return Err(format_err(format!("unknown meta key {key:?}"))),
        }
    }
    if names.len() != model.projections.len() || gammas.len() != model.projections.len() {
        return Err(format_err("meta sidecar does not match the model's modality count"));
    }
    for (p, n) in model.projections.iter_mut().zip(names) {
        p.modality = n;
    }
    model.gammas = gammas;
    Ok(())
}

/// Reads a `VSM1` file and, when present, its `.meta` sidecar.
pub fn read_model(path: &Path) -> Result<EmbeddingModel> {
    let bytes = fs::read(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut model = parse_model(&bytes)?;
    let meta = meta_path(path);
    if meta.exists() {
        apply_meta(&mut model, &fs::read_to_string(meta)?)?;
    }
    model.check()?;
    Ok(model)
}
