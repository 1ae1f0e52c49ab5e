//! On-disk formats.
//!
//! Tractogram (`.bseg`, little-endian binary):
//!
//! ```text
//! "BSEG"            4 bytes magic
//! version: u32      = 1
//! count: u32        number of streamlines, >= 1
//! count times:
//!   n: u32          number of points, >= 2
//!   3n x f32        x, y, z interleaved, millimetres
//! ```
//!
//! Coordinates are stored as `f32`; reading widens them to the working
//! scalar. No trailing bytes are allowed.
//!
//! ROI mask (text):
//!
//! ```text
//! # lapseg roi v1
//! shape 60 60 60
//! affine
//! 2 0 0 -60
//! 0 2 0 -60
//! 0 0 2 -60
//! 0 0 0 1
//! voxels
//! 31 30 28
//! 32 30 28
//! ```
//!
//! The affine maps voxel indices to mm with voxel `(i, j, k)` spanning
//! `[i, i+1)` in index space, so its center is `affine * (i+.5, j+.5, k+.5, 1)`.
//! A grid file is the same without the `voxels` section. Lines starting with
//! `#` are comments.
//!
//! Bundle labels (text): the bundle name on the first line, then one
//! streamline id per line in strictly increasing order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{Affine, Point3, RoiMask, Streamline, Tractogram, VoxelGrid};
use crate::lap::CostMatrix;
use crate::real::Real;

pub const MAGIC: [u8; 4] = *b"BSEG";
pub const VERSION: u32 = 1;

pub fn encode_tractogram<T: Real>(t: &Tractogram<T>) -> Vec<u8> {
    let points: usize = t.streamlines().iter().map(Streamline::len).sum();
    let mut buf = Vec::with_capacity(12 + 4 * t.len() + 12 * points);
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(&(t.len() as u32).to_le_bytes());
    for s in t.streamlines() {
        buf.extend_from_slice(&(s.len() as u32).to_le_bytes());
        for p in s.points() {
            for c in p.to_array() {
                buf.extend_from_slice(&c.to_f32().unwrap_or(f32::NAN).to_le_bytes());
            }
        }
    }
    buf
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::TruncatedFile);
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }
}

pub fn decode_tractogram<T: Real>(bytes: &[u8]) -> Result<Tractogram<T>> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4)?.try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(Error::BadMagic(magic));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::BadVersion(version));
    }
    let count = r.u32()? as usize;
    if count == 0 {
        return Err(Error::CorruptCount("streamline count is 0".into()));
    }
    // every streamline needs at least 4 + 2 * 12 bytes
    if count > r.remaining() / 28 {
        return Err(Error::TruncatedFile);
    }
    let mut streamlines = Vec::with_capacity(count);
    for idx in 0..count {
        let n = r.u32()? as usize;
        if n < 2 {
            return Err(Error::CorruptCount(format!(
                "streamline {idx} declares {n} points"
            )));
        }
        let raw = r.take(n.checked_mul(12).ok_or(Error::TruncatedFile)?)?;
        let points: Vec<Point3<T>> = raw
            .chunks_exact(12)
            .map(|c| {
                let f = |k: usize| {
                    let v = f32::from_le_bytes(c[4 * k..4 * k + 4].try_into().expect("4 bytes"));
                    T::lit(f64::from(v))
                };
                Point3::new(f(0), f(1), f(2))
            })
            .collect();
        streamlines.push(Streamline::new(points).map_err(|e| match e {
            Error::InvalidStreamline(msg) => Error::InvalidStreamline(format!("streamline {idx}: {msg}")),
            other => other,
        })?);
    }
    if r.remaining() != 0 {
        return Err(Error::CorruptCount(format!(
            "{} bytes after the declared {count} streamlines",
            r.remaining()
        )));
    }
    Tractogram::new(streamlines)
}

pub fn write_tractogram<T: Real>(path: impl AsRef<Path>, t: &Tractogram<T>) -> Result<()> {
    fs::write(path, encode_tractogram(t))?;
    Ok(())
}

pub fn read_tractogram<T: Real>(path: impl AsRef<Path>) -> Result<Tractogram<T>> {
    let path = path.as_ref();
    let t = decode_tractogram(&fs::read(path)?)?;
    Ok(t.with_source(path.display().to_string()))
}

/// Meaningful lines with their 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_num<N: std::str::FromStr>(line: usize, tok: &str) -> Result<N> {
    tok.parse()
        .map_err(|_| Error::parse(line, format!("cannot parse '{tok}'")))
}

fn format_grid<T: Real>(out: &mut String, grid: &VoxelGrid<T>) {
    let s = grid.shape();
    out.push_str(&format!("shape {} {} {}\naffine\n", s[0], s[1], s[2]));
    for row in grid.affine().matrix() {
        let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
}

fn parse_grid<'a, T: Real>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<VoxelGrid<T>> {
    let (ln, shape_line) = lines.next().ok_or_else(|| Error::parse(0, "missing 'shape' line"))?;
    let toks: Vec<&str> = shape_line.split_whitespace().collect();
    if toks.len() != 4 || toks[0] != "shape" {
        return Err(Error::parse(ln, "expected 'shape <nx> <ny> <nz>'"));
    }
    let shape = [
        parse_num(ln, toks[1])?,
        parse_num(ln, toks[2])?,
        parse_num(ln, toks[3])?,
    ];
    let (ln, tag) = lines.next().ok_or_else(|| Error::parse(ln, "missing 'affine' section"))?;
    if tag != "affine" {
        return Err(Error::parse(ln, "expected 'affine'"));
    }
    let mut values = Vec::with_capacity(16);
    let mut last = ln;
    for _ in 0..4 {
        let (ln, row) = lines.next().ok_or_else(|| Error::parse(last, "affine needs 4 rows"))?;
        let toks: Vec<&str> = row.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(Error::parse(ln, "affine rows need 4 values"));
        }
        for t in toks {
            values.push(parse_num::<T>(ln, t)?);
        }
        last = ln;
    }
    let affine = Affine::from_row_major(&values).map_err(|e| match e {
        Error::SingularAffine => Error::parse(last, "affine not invertible"),
        other => Error::parse(last, other.to_string()),
    })?;
    VoxelGrid::new(shape, affine).map_err(|e| Error::parse(last, e.to_string()))
}

pub fn format_grid_file<T: Real>(grid: &VoxelGrid<T>) -> String {
    let mut out = String::from("# lapseg grid v1\n");
    format_grid(&mut out, grid);
    out
}

/// Parses a grid file. A ROI file is accepted too; its voxels are ignored.
pub fn parse_grid_file<T: Real>(text: &str) -> Result<VoxelGrid<T>> {
    let mut lines = content_lines(text);
    let grid = parse_grid(&mut lines)?;
    match lines.next() {
        None => Ok(grid),
        Some((_, "voxels")) => Ok(grid),
        Some((ln, _)) => Err(Error::parse(ln, "unexpected content after affine")),
    }
}

pub fn write_grid<T: Real>(path: impl AsRef<Path>, grid: &VoxelGrid<T>) -> Result<()> {
    fs::write(path, format_grid_file(grid))?;
    Ok(())
}

pub fn read_grid<T: Real>(path: impl AsRef<Path>) -> Result<VoxelGrid<T>> {
    parse_grid_file(&fs::read_to_string(path)?)
}

pub fn format_roi<T: Real>(roi: &RoiMask<T>) -> String {
    let mut out = String::from("# lapseg roi v1\n");
    format_grid(&mut out, roi.grid());
    out.push_str("voxels\n");
    for v in roi.voxels() {
        out.push_str(&format!("{} {} {}\n", v[0], v[1], v[2]));
    }
    out
}

pub fn parse_roi<T: Real>(text: &str) -> Result<RoiMask<T>> {
    let mut lines = content_lines(text);
    let grid = parse_grid(&mut lines)?;
    match lines.next() {
        Some((_, "voxels")) => {}
        Some((ln, _)) => return Err(Error::parse(ln, "expected 'voxels'")),
        None => return Err(Error::parse(0, "missing 'voxels' section")),
    }
    let mut voxels = Vec::new();
    for (ln, l) in lines {
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(ln, "voxel lines need 3 indices"));
        }
        let v = [
            parse_num(ln, toks[0])?,
            parse_num(ln, toks[1])?,
            parse_num(ln, toks[2])?,
        ];
        if !grid.contains(v) {
            return Err(Error::VoxelOutOfShape {
                voxel: v,
                shape: grid.shape(),
            });
        }
        voxels.push(v);
    }
    if voxels.is_empty() {
        return Err(Error::parse(0, "ROI has no voxels"));
    }
    RoiMask::new(grid, voxels)
}

pub fn write_roi<T: Real>(path: impl AsRef<Path>, roi: &RoiMask<T>) -> Result<()> {
    fs::write(path, format_roi(roi))?;
    Ok(())
}

pub fn read_roi<T: Real>(path: impl AsRef<Path>) -> Result<RoiMask<T>> {
    parse_roi(&fs::read_to_string(path)?)
}

/// A bundle name and its sorted member ids, as stored in a label file.
/// Unlike [`crate::geometry::Bundle`] the id list may be empty (a vote can
/// keep nothing).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleLabels {
    pub name: String,
    pub ids: Vec<usize>,
}

impl BundleLabels {
    pub fn new(name: impl Into<String>, ids: impl IntoIterator<Item = usize>) -> Result<Self> {
        let name = name.into();
        if name.trim().is_empty() || name.contains('\n') {
            return Err(Error::InvalidBundle("bundle name must be a non-empty single line".into()));
        }
        let mut ids: Vec<usize> = ids.into_iter().collect();
        ids.sort_unstable();
        if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateId(w[0]));
        }
        Ok(BundleLabels { name, ids })
    }

    pub fn to_bundle<T: Real>(&self) -> Result<crate::geometry::Bundle<T>> {
        crate::geometry::Bundle::from_ids(self.name.clone(), self.ids.iter().copied())
    }
}

pub fn format_labels(labels: &BundleLabels) -> String {
    let mut out = format!("{}\n", labels.name);
    for id in &labels.ids {
        out.push_str(&format!("{id}\n"));
    }
    out
}

pub fn parse_labels(text: &str) -> Result<BundleLabels> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));
    let name = match lines.next() {
        Some((_, l)) if !l.trim().is_empty() => l.trim().to_string(),
        _ => return Err(Error::parse(1, "missing bundle name")),
    };
    let mut ids: Vec<usize> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for (ln, l) in lines {
        let id: usize = parse_num(ln, l.trim())?;
        if !seen.insert(id) {
            return Err(Error::DuplicateId(id));
        }
        if ids.last().is_some_and(|&prev| id < prev) {
            return Err(Error::parse(ln, "ids must be sorted ascending"));
        }
        ids.push(id);
    }
    Ok(BundleLabels { name, ids })
}

pub fn write_bundle_labels(path: impl AsRef<Path>, labels: &BundleLabels) -> Result<()> {
    fs::write(path, format_labels(labels))?;
    Ok(())
}

pub fn read_bundle_labels(path: impl AsRef<Path>) -> Result<BundleLabels> {
    parse_labels(&fs::read_to_string(path)?)
}

/// Comma-separated rows of reals; blank lines are skipped.
pub fn parse_matrix_csv<T: Real>(text: &str) -> Result<CostMatrix<T>> {
    let mut rows: Vec<Vec<T>> = Vec::new();
    for (ln, l) in text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())) {
        if l.is_empty() {
            continue;
        }
        let row = l
            .split(',')
            .map(|tok| parse_num::<T>(ln, tok.trim()))
            .collect::<Result<Vec<T>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(ln, format!("expected {} values, got {}", first.len(), row.len())));
            }
        }
        rows.push(row);
    }
    CostMatrix::from_rows(&rows)
}

pub fn read_matrix_csv<T: Real>(path: impl AsRef<Path>) -> Result<CostMatrix<T>> {
    parse_matrix_csv(&fs::read_to_string(path)?)
}

/// Writes `contents` via a temporary sibling file and rename, so readers
/// never observe a half-written file.
pub fn write_atomic(path: impl AsRef<Path>, contents: &[u8]) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("partial");
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tractogram() -> Tractogram {
        Tractogram::new(vec![
            Streamline::from_arrays(&[[0.0, 0.5, 1.0], [1.25, -2.0, 3.5]]).unwrap(),
            Streamline::from_arrays(&[[10.0, 0.0, 0.0], [11.0, 0.0, 0.0], [12.0, 1.0, 0.0]]).unwrap(),
        ])
        .unwrap()
    }

    #[test]
    fn header_layout() {
        let bytes = encode_tractogram(&tractogram());
        assert_eq!(&bytes[0..4], b"BSEG");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[2, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &0.0f32.to_le_bytes());
        assert_eq!(bytes.len(), 12 + (4 + 24) + (4 + 36));
    }

    #[test]
    fn binary_errors() {
        let good = encode_tractogram(&tractogram());
        let mut bad = good.clone();
        bad[0..4].copy_from_slice(b"XXXX");
        assert!(matches!(decode_tractogram::<f64>(&bad), Err(Error::BadMagic(m)) if &m == b"XXXX"));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_tractogram::<f64>(&bad), Err(Error::BadVersion(2))));

        assert!(matches!(decode_tractogram::<f64>(&good[..good.len() - 12]), Err(Error::TruncatedFile)));
        assert!(matches!(decode_tractogram::<f64>(&good[..6]), Err(Error::TruncatedFile)));

        let mut bad = good.clone();
        bad[8] = 0;
        assert!(matches!(decode_tractogram::<f64>(&bad), Err(Error::CorruptCount(_))));

        let mut bad = good.clone();
        bad.extend_from_slice(&[0, 0]);
        assert!(matches!(decode_tractogram::<f64>(&bad), Err(Error::CorruptCount(_))));

        let mut bad = good;
        bad[12] = 1;
        assert!(matches!(decode_tractogram::<f64>(&bad), Err(Error::CorruptCount(_))));
    }

    #[test]
    fn declared_points_missing() {
        // n = 5 but only 4 points follow
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"BSEG");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&5u32.to_le_bytes());
        for v in 0..12 {
            bytes.extend_from_slice(&(v as f32).to_le_bytes());
        }
        assert!(matches!(decode_tractogram::<f64>(&bytes), Err(Error::TruncatedFile)));
    }

    #[test]
    fn roi_text_roundtrip_and_errors() {
        let affine = Affine::new([
            [1.25, 0.0, 0.0, -90.1],
            [0.0, 1.25, 0.0, -126.0],
            [0.0, 0.0, 1.25, -72.3],
            [0.0, 0.0, 0.0, 1.0],
        ])
        .unwrap();
        let grid = VoxelGrid::new([145, 174, 145], affine).unwrap();
        let roi = RoiMask::new(grid, [[3, 4, 5], [0, 0, 0], [144, 173, 144]]).unwrap();
        let text = format_roi(&roi);
        assert_eq!(parse_roi::<f64>(&text).unwrap(), roi);
        assert_eq!(parse_grid_file::<f64>(&text).unwrap(), grid);
        assert_eq!(parse_grid_file::<f64>(&format_grid_file(&grid)).unwrap(), grid);

        let oob = text.replace("144 173 144", "145 0 0");
        assert!(matches!(parse_roi::<f64>(&oob), Err(Error::VoxelOutOfShape { .. })));

        let singular = text.replace("0 1.25 0 -126", "0 0 0 -126");
        match parse_roi::<f64>(&singular) {
            Err(Error::Parse { msg, .. }) => assert_eq!(msg, "affine not invertible"),
            other => panic!("expected parse error, got {other:?}"),
        }
        assert!(matches!(parse_roi::<f64>("shape 1 2\n"), Err(Error::Parse { .. })));
        let no_voxels = format_grid_file(&grid) + "voxels\n";
        assert!(matches!(parse_roi::<f64>(&no_voxels), Err(Error::Parse { .. })));
    }

    #[test]
    fn label_errors() {
        assert!(matches!(parse_labels(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_labels("uf\n1\n4\n4\n"), Err(Error::DuplicateId(4))));
        assert!(matches!(parse_labels("uf\n5\n2\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse_labels("uf\n1\nx\n"), Err(Error::Parse { .. })));
        let l = parse_labels("uf_left\n0\n3\n17\n").unwrap();
        assert_eq!(l, BundleLabels::new("uf_left", [17, 0, 3]).unwrap());
        assert_eq!(parse_labels(&format_labels(&l)).unwrap(), l);
        assert_eq!(parse_labels("empty\n").unwrap().ids, Vec::<usize>::new());
    }

    #[test]
    fn matrix_csv() {
        let m: CostMatrix = parse_matrix_csv("4,1\n2, 3\n\n").unwrap();
        assert_eq!(m, CostMatrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap());
        assert!(parse_matrix_csv::<f64>("1,2\n3\n").is_err());
        assert!(parse_matrix_csv::<f64>("1,a\n").is_err());
        assert!(matches!(parse_matrix_csv::<f64>(""), Err(Error::EmptyMatrix)));
    }
}
