//! On-disk formats for descriptions, features, vocabularies and term matrices.
//!
//! A corpus directory holds `vocab.tsv`, `terms.tsv`, `modalities.txt` (one
//! modality name per line, in declaration order) and `features/<name>.vsf`
//! with its `.ids` sidecar.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use super::{Corpus, Description, FeatureMatrix, TermMatrix, TermVocabulary};
use crate::error::{format_err, Error, Result};

const FEATURE_MAGIC: &[u8; 4] = b"VSF1";

fn lines(path: &Path) -> Result<Vec<String>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    BufReader::new(file)
        .lines()
        .map(|l| l.map_err(Error::from))
        .collect()
}

/// `<video_id>\t<free text>` per line; blank lines are skipped.
pub fn read_descriptions(path: &Path) -> Result<Vec<Description>> {
    let mut out = Vec::new();
    for (n, line) in lines(path)?.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        if id.is_empty() {
            return Err(format_err(format!("{}:{}: empty video id", path.display(), n + 1)));
        }
        out.push(Description::new(id, text));
    }
    Ok(out)
}

pub fn write_descriptions(path: &Path, descriptions: &[Description]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for d in descriptions {
        writeln!(w, "{}\t{}", d.video_id, d.text)?;
    }
    w.flush()?;
    Ok(())
}

fn ids_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".ids");
    PathBuf::from(s)
}

/// Writes `VSF1`, u32 D, u32 N, then N rows of D little-endian f32, plus the
/// `<file>.ids` sidecar. Values are narrowed to f32.
pub fn write_features(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    w.write_all(FEATURE_MAGIC)?;
    w.write_all(&(features.dim() as u32).to_le_bytes())?;
    w.write_all(&(features.len() as u32).to_le_bytes())?;
    let values = features.values();
    for i in 0..features.len() {
        for j in 0..features.dim() {
            w.write_all(&(values[(i, j)] as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    let mut ids = BufWriter::new(fs::File::create(ids_path(path))?);
    for id in features.video_ids() {
        writeln!(ids, "{id}")?;
    }
    ids.flush()?;
    Ok(())
}

pub fn read_features(path: &Path, name: &str) -> Result<FeatureMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?
        .read_to_end(&mut bytes)?;
    if bytes.len() < 12 || &bytes[..4] != FEATURE_MAGIC {
        return Err(format_err(format!("{}: not a VSF1 feature file", path.display())));
    }
    let d = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let n = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = 12 + 4 * d * n;
    if bytes.len() != expected {
        return Err(format_err(format!(
            "{}: expected {expected} bytes for {n}x{d} features, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let values = DMatrix::from_fn(n, d, |i, j| {
        let at = 12 + 4 * (i * d + j);
        f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64
    });
    let ids: Vec<String> = lines(&ids_path(path))?
        .into_iter()
        .filter(|l| !l.is_empty())
        .collect();
    if ids.len() != n {
        return Err(Error::IdMismatch(format!(
            "{}: {n} feature rows but {} ids",
            path.display(),
            ids.len()
        )));
    }
    FeatureMatrix::new(name, values, ids)
}

/// `<term>\t<count>` per line; line order is the term index.
pub fn write_vocabulary(path: &Path, vocab: &TermVocabulary) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (t, c) in vocab.terms().iter().zip(vocab.counts()) {
        writeln!(w, "{t}\t{c}")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vocabulary(path: &Path) -> Result<TermVocabulary> {
    let mut terms = Vec::new();
    let mut counts = Vec::new();
    for (n, line) in lines(path)?.into_iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (t, c) = line
            .split_once('\t')
            .ok_or_else(|| format_err(format!("{}:{}: expected term<TAB>count", path.display(), n + 1)))?;
        let c: usize = c
            .trim()
            .parse()
            .map_err(|_| format_err(format!("{}:{}: bad count {c:?}", path.display(), n + 1)))?;
        terms.push(t.to_string());
        counts.push(c);
    }
    TermVocabulary::new(terms, counts)
}

/// `<video_id>\t<space-separated sorted term indices>` per line.
pub fn write_term_matrix(path: &Path, video_ids: &[String], matrix: &TermMatrix) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for (id, col) in video_ids.iter().zip(matrix.columns()) {
        let idx: Vec<String> = col.iter().map(|i| i.to_string()).collect();
        writeln!(w, "{id}\t{}", idx.join(" "))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_term_matrix(path: &Path, n_terms: usize) -> Result<(Vec<String>, TermMatrix)> {
    let mut ids = Vec::new();
    let mut columns = Vec::new();
    for (n, line) in lines(path)?.into_iter().enumerate() {
        if line.is_empty() {
            continue;
        }
        let (id, rest) = line.split_once('\t').unwrap_or((line.as_str(), ""));
        let col = rest
            .split_whitespace()
            .map(|t| {
                t.parse::<u32>()
                    .map_err(|_| format_err(format!("{}:{}: bad term index {t:?}", path.display(), n + 1)))
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(id.to_string());
        columns.push(col);
    }
    Ok((ids, TermMatrix::new(n_terms, columns)?))
}

fn check_modality_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.');
    if ok {
        Ok(())
    } else {
        Err(format_err(format!("modality name {name:?} is not file-name safe")))
    }
}

impl Corpus {
    pub fn save(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("features"))?;
        write_vocabulary(&dir.join("vocab.tsv"), self.vocabulary())?;
        write_term_matrix(&dir.join("terms.tsv"), self.video_ids(), self.term_matrix())?;
        let mut names = String::new();
        for f in self.features() {
            check_modality_name(f.name())?;
            names.push_str(f.name());
            names.push('\n');
            write_features(&dir.join("features").join(format!("{}.vsf", f.name())), f)?;
        }
        fs::write(dir.join("modalities.txt"), names)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let vocab = read_vocabulary(&dir.join("vocab.tsv"))?;
        let (ids, matrix) = read_term_matrix(&dir.join("terms.tsv"), vocab.len())?;
        let mut features = Vec::new();
        for name in lines(&dir.join("modalities.txt"))? {
            let name = name.trim();
            if name.is_empty() {
                continue;
            }
            check_modality_name(name)?;
            features.push(read_features(&dir.join("features").join(format!("{name}.vsf")), name)?);
        }
        Corpus::new(vocab, matrix, ids, features)
    }
}
