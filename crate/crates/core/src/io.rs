//! Artifact files: the JSON envelope, CSV tables and atomic writes.
//!
//! Every artifact records the run seed. JSON artifacts other than
//! certificates are wrapped in an [`Artifact`] envelope; certificates are
//! versioned on their own and written bare. CSV files start with one
//! `# toruslock <command> seed=<seed>` comment line.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::curves::CurvePair;
use crate::error::{Error, Result};
use crate::rational::Rational;
use crate::zeroset::{BComponent, Region, Segment, Vertex, ZeroSetArrangement};

pub const ARTIFACT_VERSION: u32 = 1;

/// Cells per side of the sign raster stored with zero-set and curve artifacts.
pub const RASTER: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    Rationalization,
    Lock,
    Zeroset,
    Curves,
    Staircase,
    Plateaus,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub kind: ArtifactKind,
    pub version: u32,
    pub seed: u64,
    pub data: T,
}

impl<T> Artifact<T> {
    pub fn new(kind: ArtifactKind, seed: u64, data: T) -> Self {
        Artifact {
            kind,
            version: ARTIFACT_VERSION,
            seed,
            data,
        }
    }
}

/// Signs of `Phi^q` at cell centres of a `RASTER x RASTER` grid, bottom row
/// first; `-` marks `B-`, `+` marks `B+`.
pub fn sign_raster(arr: &ZeroSetArrangement) -> Vec<String> {
    (0..RASTER)
        .map(|r| {
            let x = (r as f64 + 0.5) / RASTER as f64;
            (0..RASTER)
                .map(|c| {
                    let th = (c as f64 + 0.5) / RASTER as f64;
                    if arr.sign_at(th, x) < 0 {
                        '-'
                    } else {
                        '+'
                    }
                })
                .collect()
        })
        .collect()
}

/// The serializable part of a zero-set arrangement plus a sign raster.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroSetData {
    pub p_over_q: Rational,
    pub m0: i64,
    pub segments: Vec<Segment>,
    pub vertices: Vec<Vertex>,
    pub components: Vec<BComponent>,
    pub regions: Vec<Region>,
    pub max_slope: f64,
    pub component_gap: f64,
    pub empty_sign: i8,
    pub raster: Vec<String>,
}

impl ZeroSetData {
    pub fn new(p_over_q: Rational, m0: i64, arr: &ZeroSetArrangement) -> Self {
        ZeroSetData {
            p_over_q,
            m0,
            segments: arr.segments.clone(),
            vertices: arr.vertices.clone(),
            components: arr.components.clone(),
            regions: arr.regions.clone(),
            max_slope: arr.max_slope,
            component_gap: arr.component_gap,
            empty_sign: arr.empty_sign,
            raster: sign_raster(arr),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurvesData {
    pub p_over_q: Rational,
    pub m0: i64,
    pub pair: CurvePair,
    /// Critical vertices of the arrangement, reduced to `[0,1)^2`.
    pub critical: Vec<[f64; 2]>,
    pub raster: Vec<String>,
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    // temp files are private; artifacts get ordinary permissions
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        tmp.as_file().set_permissions(std::fs::Permissions::from_mode(0o644))?;
    }
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    write_atomic(path, to_json(v)?.as_bytes())
}

/// Read an input file; a missing or unreadable input is a usage error.
pub fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

/// Parse a JSON input file; malformed input is a usage error.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_input(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

/// CSV text with the seed comment line and a header.
pub fn csv_text(command: &str, seed: u64, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("# toruslock {command} seed={seed}\n{}\n", header.join(","));
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Usage(format!("CSV has no column `{name}`")))?;
        Ok(self.rows.iter().map(|r| r[i]).collect())
    }
}

/// Numeric CSV with a header; `#` lines are comments.
pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut rd = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let bad = |e: csv::Error| Error::Usage(format!("CSV: {e}"));
    let header = rd.headers().map_err(bad)?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(bad)?;
        let row = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| Error::Usage(format!("CSV field `{f}`: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    parse_csv(&read_input(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_skips_the_seed_line() {
        let rows = vec![vec!["0.5".to_string(), "0.25".to_string()], vec!["1".into(), "-2e-3".into()]];
        let text = csv_text("demo", 9, &["a", "b"], &rows);
        assert!(text.starts_with("# toruslock demo seed=9\na,b\n"));
        let t = parse_csv(&text).unwrap();
        assert_eq!(t.header, vec!["a", "b"]);
        assert_eq!(t.column("b").unwrap(), vec![0.25, -2e-3]);
        assert!(t.column("c").is_err());
    }

    #[test]
    fn atomic_write_replaces_and_leaves_no_temp() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.json");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "two");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }

    #[test]
    fn malformed_json_is_a_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.json");
        std::fs::write(&p, "{ not json").unwrap();
        let e = read_json::<serde_json::Value>(&p).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
    }
}
