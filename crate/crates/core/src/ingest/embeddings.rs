//! Per-video embedding bundles and their binary container.
//!
//! Layout (little-endian):
//! - magic `b"CRVB"`
//! - version: u32 = 1
//! - video_id: u16 byte length followed by UTF-8 bytes
//! - dim: u32, rows: u32
//! - three sections in tag order, each a u8 tag (0 vision, 1 response text,
//!   2 description text) followed by `rows * dim` f32 values, row-major.
//!
//! Rows are stored exactly as produced; nothing is normalized.

use std::fs;
use std::path::Path;
use std::sync::OnceLock;

use crate::clean::{cosine_with_norms, norm};
use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CRVB";
pub const VERSION: u32 = 1;

/// Dense row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::InvalidParameter(format!(
                "matrix data has {} values, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f32>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch(cols, bad.len()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    /// Returns a copy with every entry of row `i` multiplied by `factors[i]`.
    pub fn scale_rows(&self, factors: &[f32]) -> Self {
        let mut out = self.clone();
        for (i, row) in out.data.chunks_exact_mut(self.cols.max(1)).enumerate() {
            for x in row {
                *x *= factors[i];
            }
        }
        out
    }

    /// Returns the rows reordered so that output row `k` is input row `order[k]`.
    pub fn permute_rows(&self, order: &[usize]) -> Self {
        let data = order.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        Self {
            rows: order.len(),
            cols: self.cols,
            data,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Section {
    Vision = 0,
    ResponseText = 1,
    DescriptionText = 2,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Vision, Section::ResponseText, Section::DescriptionText];

    pub fn name(self) -> &'static str {
        match self {
            Section::Vision => "vision",
            Section::ResponseText => "response_text",
            Section::DescriptionText => "description_text",
        }
    }
}

/// Cosine similarity of every vision row against every row of a text
/// section, `M x M` row-major by vision row.
#[derive(Debug, Clone, PartialEq)]
pub struct CosineTable {
    m: usize,
    values: Vec<f64>,
}

impl CosineTable {
    fn between(queries: &Matrix, keys: &Matrix) -> Self {
        let key_norms: Vec<f64> = keys.iter_rows().map(norm).collect();
        let mut values = Vec::with_capacity(queries.rows() * keys.rows());
        for q in queries.iter_rows() {
            let nq = norm(q);
            values.extend(
                keys.iter_rows()
                    .zip(&key_norms)
                    .map(|(k, &nk)| cosine_with_norms(q, k, nq, nk)),
            );
        }
        Self { m: keys.rows(), values }
    }

    #[inline]
    pub fn get(&self, query: usize, key: usize) -> f64 {
        self.values[query * self.m + key]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        &self.values[query * self.m..(query + 1) * self.m]
    }
}

/// Vision, full-response text and description text embeddings of one video,
/// all `M x D` in a shared vision-text space.
#[derive(Debug, Clone)]
pub struct EmbeddingBundle {
    video_id: String,
    vision: Matrix,
    response_text: Matrix,
    description_text: Matrix,
    // Vision against response text and against description text, filled on
    // first use so repeated runs over one bundle pay for them once.
    cosines: [OnceLock<CosineTable>; 2],
}

impl PartialEq for EmbeddingBundle {
    fn eq(&self, other: &Self) -> bool {
        self.video_id == other.video_id
            && self.vision == other.vision
            && self.response_text == other.response_text
            && self.description_text == other.description_text
    }
}

impl EmbeddingBundle {
    pub fn new(
        video_id: impl Into<String>,
        vision: Matrix,
        response_text: Matrix,
        description_text: Matrix,
    ) -> Result<Self> {
        let bundle = Self {
            video_id: video_id.into(),
            vision,
            response_text,
            description_text,
            cosines: Default::default(),
        };
        bundle.check()?;
        Ok(bundle)
    }

    fn check(&self) -> Result<()> {
        let rows = self.vision.rows();
        let dim = self.vision.cols();
        if dim == 0 {
            return Err(Error::BadSection("embedding dimension is zero".into()));
        }
        if self.video_id.len() > u16::MAX as usize {
            return Err(Error::BadSection("video_id longer than 65535 bytes".into()));
        }
        for section in Section::ALL {
            let m = self.section(section);
            if m.rows() != rows {
                return Err(Error::RowCountMismatch {
                    section: section.name(),
                    expected: rows,
                    found: m.rows(),
                });
            }
            if m.cols() != dim {
                return Err(Error::DimensionMismatch(dim, m.cols()));
            }
            for (i, row) in m.iter_rows().enumerate() {
                if row.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFiniteRow {
                        section: section.name(),
                        row: i,
                    });
                }
                if row.iter().all(|&x| x == 0.0) {
                    return Err(Error::ZeroNormRow {
                        section: section.name(),
                        row: i,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn video_id(&self) -> &str {
        &self.video_id
    }

    pub fn dim(&self) -> usize {
        self.vision.cols()
    }

    pub fn num_segments(&self) -> usize {
        self.vision.rows()
    }

    pub fn vision(&self) -> &Matrix {
        &self.vision
    }

    pub fn response_text(&self) -> &Matrix {
        &self.response_text
    }

    pub fn description_text(&self) -> &Matrix {
        &self.description_text
    }

    pub fn section(&self, section: Section) -> &Matrix {
        match section {
            Section::Vision => &self.vision,
            Section::ResponseText => &self.response_text,
            Section::DescriptionText => &self.description_text,
        }
    }

    /// Reorders the segments of all three sections.
    pub fn permute_segments(&self, order: &[usize]) -> Self {
        Self {
            video_id: self.video_id.clone(),
            vision: self.vision.permute_rows(order),
            response_text: self.response_text.permute_rows(order),
            description_text: self.description_text.permute_rows(order),
            cosines: Default::default(),
        }
    }

    /// Cosines between the vision rows and the rows of a text section.
    ///
    /// # Panics
    /// If `against` is [`Section::Vision`].
    pub fn vision_cosines(&self, against: Section) -> &CosineTable {
        let slot = match against {
            Section::Vision => panic!("vision_cosines compares vision against a text section"),
            Section::ResponseText => 0,
            Section::DescriptionText => 1,
        };
        self.cosines[slot].get_or_init(|| CosineTable::between(&self.vision, self.section(against)))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let rows = self.num_segments();
        let dim = self.dim();
        let mut out = Vec::with_capacity(4 + 4 + 2 + self.video_id.len() + 8 + 3 * (1 + rows * dim * 4));
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.video_id.len() as u16).to_le_bytes());
        out.extend_from_slice(self.video_id.as_bytes());
        out.extend_from_slice(&(dim as u32).to_le_bytes());
        out.extend_from_slice(&(rows as u32).to_le_bytes());
        for section in Section::ALL {
            out.push(section as u8);
            for x in self.section(section).as_slice() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        let magic: [u8; 4] = cur.take(4, "magic")?.try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic { found: magic });
        }
        let version = cur.u32("version")?;
        if version != VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: VERSION,
            });
        }
        let id_len = u16::from_le_bytes(cur.take(2, "video_id length")?.try_into().unwrap());
        let video_id = std::str::from_utf8(cur.take(id_len as usize, "video_id")?)
            .map_err(|e| Error::BadSection(format!("video_id is not UTF-8: {e}")))?
            .to_owned();
        let dim = cur.u32("dim")? as usize;
        let rows = cur.u32("rows")? as usize;
        if dim == 0 {
            return Err(Error::BadSection("embedding dimension is zero".into()));
        }
        let row_bytes = dim * 4;
        let mut matrices = Vec::with_capacity(3);
        for expected in Section::ALL {
            if cur.remaining() == 0 {
                return Err(Error::BadSection(format!(
                    "expected 3 sections, found {}",
                    matrices.len()
                )));
            }
            let tag = cur.take(1, "section tag")?[0];
            if tag != expected as u8 {
                return Err(Error::BadSection(format!(
                    "section {} has tag {tag}, expected {}",
                    matrices.len(),
                    expected as u8
                )));
            }
            let need = rows * row_bytes;
            if cur.remaining() < need {
                let have = cur.remaining();
                // A final section that ends on a row boundary is a short matrix,
                // anything else is a cut-off file.
                if expected == Section::DescriptionText && have.is_multiple_of(row_bytes) {
                    return Err(Error::RowCountMismatch {
                        section: expected.name(),
                        expected: rows,
                        found: have / row_bytes,
                    });
                }
                return Err(Error::Truncated(format!(
                    "section {} needs {need} bytes, {have} left",
                    expected.name()
                )));
            }
            let data = cur
                .take(need, expected.name())?
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            matrices.push(Matrix { rows, cols: dim, data });
        }
        if cur.remaining() != 0 {
            return Err(Error::BadSection(format!(
                "{} trailing bytes after the third section",
                cur.remaining()
            )));
        }
        let description_text = matrices.pop().unwrap();
        let response_text = matrices.pop().unwrap();
        let vision = matrices.pop().unwrap();
        Self::new(video_id, vision, response_text, description_text)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn remaining(&self) -> usize {
        self.bytes.len() - self.pos
    }

    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.remaining() < n {
            return Err(Error::Truncated(format!(
                "{what} needs {n} bytes at offset {}, {} left",
                self.pos,
                self.remaining()
            )));
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingBundle> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    EmbeddingBundle::from_bytes(&bytes)
}

pub fn write_embeddings(path: impl AsRef<Path>, bundle: &EmbeddingBundle) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, bundle.to_bytes()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: usize, cols: usize, offset: f32) -> Matrix {
        let data = (0..rows * cols).map(|k| offset + k as f32 * 0.25 + 1.0).collect();
        Matrix::from_vec(rows, cols, data).unwrap()
    }

    fn bundle(rows: usize, cols: usize) -> EmbeddingBundle {
        EmbeddingBundle::new(
            "v1",
            matrix(rows, cols, 0.0),
            matrix(rows, cols, 1.0),
            matrix(rows, cols, -9.0),
        )
        .unwrap()
    }

    #[test]
    fn writer_output_loads_back() {
        let b = bundle(4, 8);
        let loaded = EmbeddingBundle::from_bytes(&b.to_bytes()).unwrap();
        assert_eq!(loaded.num_segments(), 4);
        assert_eq!(loaded.dim(), 8);
        assert_eq!(loaded, b);
    }

    #[test]
    fn header_layout_is_fixed() {
        let bytes = bundle(2, 3).to_bytes();
        assert_eq!(&bytes[..4], b"CRVB");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..10], &2u16.to_le_bytes());
        assert_eq!(&bytes[10..12], b"v1");
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(bytes[20], 0);
        assert_eq!(bytes.len(), 20 + 3 * (1 + 2 * 3 * 4));
    }

    #[test]
    fn short_description_section_is_row_mismatch() {
        let mut bytes = bundle(4, 8).to_bytes();
        bytes.truncate(bytes.len() - 8 * 4);
        match EmbeddingBundle::from_bytes(&bytes).unwrap_err() {
            Error::RowCountMismatch {
                section,
                expected,
                found,
            } => {
                assert_eq!((section, expected, found), ("description_text", 4, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn in_memory_row_mismatch() {
        let err = EmbeddingBundle::new("v", matrix(4, 8, 0.0), matrix(4, 8, 0.0), matrix(3, 8, 0.0)).unwrap_err();
        assert!(matches!(err, Error::RowCountMismatch { found: 3, .. }));
    }

    #[test]
    fn zero_row_rejected() {
        let mut vision = vec![vec![1.0f32; 8]; 4];
        vision[2] = vec![0.0; 8];
        let err = EmbeddingBundle::new(
            "v",
            Matrix::from_rows(&vision).unwrap(),
            matrix(4, 8, 0.0),
            matrix(4, 8, 0.0),
        )
        .unwrap_err();
        assert!(matches!(
            err,
            Error::ZeroNormRow {
                section: "vision",
                row: 2
            }
        ));
    }

    #[test]
    fn zero_row_in_file_rejected() {
        let b = bundle(4, 8);
        let mut bytes = b.to_bytes();
        let header = 20;
        for x in &mut bytes[header + 1..header + 1 + 32] {
            *x = 0;
        }
        assert!(matches!(
            EmbeddingBundle::from_bytes(&bytes).unwrap_err(),
            Error::ZeroNormRow {
                section: "vision",
                row: 0
            }
        ));
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = bundle(1, 2).to_bytes();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingBundle::from_bytes(&bytes).unwrap_err(),
            Error::BadMagic { .. }
        ));
        let mut bytes = bundle(1, 2).to_bytes();
        bytes[4] = 2;
        assert!(matches!(
            EmbeddingBundle::from_bytes(&bytes).unwrap_err(),
            Error::VersionMismatch { found: 2, .. }
        ));
    }

    #[test]
    fn truncation_and_section_count() {
        let bytes = bundle(2, 4).to_bytes();
        assert!(matches!(
            EmbeddingBundle::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err(),
            Error::Truncated(_)
        ));
        // Drop the whole third section: only two sections remain.
        let two = &bytes[..bytes.len() - (1 + 2 * 4 * 4)];
        assert!(matches!(
            EmbeddingBundle::from_bytes(two).unwrap_err(),
            Error::BadSection(_)
        ));
        assert!(matches!(
            EmbeddingBundle::from_bytes(&bytes[..10]).unwrap_err(),
            Error::Truncated(_)
        ));
        let mut extra = bytes.clone();
        extra.push(7);
        assert!(matches!(
            EmbeddingBundle::from_bytes(&extra).unwrap_err(),
            Error::BadSection(_)
        ));
    }

    #[test]
    fn out_of_order_tag_rejected() {
        let mut bytes = bundle(1, 2).to_bytes();
        bytes[20] = 1;
        assert!(matches!(
            EmbeddingBundle::from_bytes(&bytes).unwrap_err(),
            Error::BadSection(_)
        ));
    }
}
