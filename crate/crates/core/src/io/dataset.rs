use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::eval::Split;
use crate::signal::{PpgRecord, SegmentLabel};
use crate::{Error, Result};

pub const MANIFEST_VERSION: &str = "1";

/// Relative tolerance between declared fs and the rate implied by `t`.
pub const FS_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitRole {
    Development,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub record_id: String,
    /// CSV with header `t,ppg`, relative to the manifest directory.
    pub csv: PathBuf,
    /// Sidecar JSON with `fs` and labels, relative to the manifest directory.
    pub metadata: PathBuf,
    pub split: SplitRole,
}

/// Record list with a fixed development/test assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub version: String,
    /// Seed that produced the split; recorded, never used to recompute it.
    pub split_seed: u64,
    pub records: Vec<ManifestEntry>,
}

/// Sidecar metadata for one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordMetadata {
    pub record_id: String,
    pub fs: f64,
    #[serde(default)]
    pub labels: Vec<SegmentLabel>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::schema("version", format!("unsupported manifest version {:?}", self.version)));
        }
        if self.records.is_empty() {
            return Err(Error::schema("records", "manifest lists no records"));
        }
        let mut seen = BTreeSet::new();
        for e in &self.records {
            if e.record_id.is_empty() {
                return Err(Error::schema("records.record_id", "empty record id"));
            }
            if !seen.insert(e.record_id.as_str()) {
                return Err(Error::schema("records.record_id", format!("duplicate record id {:?}", e.record_id)));
            }
        }
        Ok(())
    }

    pub fn split(&self) -> Result<Split> {
        let ids = |role| self.records.iter().filter(move |e| e.split == role).map(|e| e.record_id.clone());
        Split::new(ids(SplitRole::Development), ids(SplitRole::Test))
    }

    /// SHA-256 of the canonical manifest JSON.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(json))
    }
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let bytes = fs::read(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read manifest {}: {e}", path.display())))?;
    let m: DatasetManifest = serde_json::from_slice(&bytes).map_err(|e| Error::schema("manifest", e.to_string()))?;
    m.validate()?;
    Ok(m)
}

/// Records of a manifest together with its split.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub records: Vec<PpgRecord>,
    pub split: Split,
}

impl Dataset {
    pub fn records_in(&self, ids: &BTreeSet<String>) -> Vec<&PpgRecord> {
        self.records.iter().filter(|r| ids.contains(&r.record_id)).collect()
    }
}

/// Loads every record of the manifest at `path`. Relative record paths
/// resolve against the manifest's directory.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let manifest = load_manifest(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let records = manifest
        .records
        .iter()
        .map(|e| load_record(e, dir))
        .collect::<Result<Vec<_>>>()?;
    let split = manifest.split()?;
    Ok(Dataset { manifest, records, split })
}

fn load_record(e: &ManifestEntry, dir: &Path) -> Result<PpgRecord> {
    let id = e.record_id.as_str();
    let meta_path = dir.join(&e.metadata);
    let meta_bytes = fs::read(&meta_path)
        .map_err(|err| Error::ingestion(id, format!("cannot read {}: {err}", meta_path.display())))?;
    let meta: RecordMetadata = serde_json::from_slice(&meta_bytes)
        .map_err(|err| Error::ingestion(id, format!("bad metadata {}: {err}", meta_path.display())))?;
    if meta.record_id != e.record_id {
        return Err(Error::ingestion(id, format!("metadata names record {:?}", meta.record_id)));
    }
    let csv_path = dir.join(&e.csv);
    let (t, samples) = read_csv(id, &csv_path)?;
    check_time_axis(id, &t, meta.fs)?;
    PpgRecord::new(id, meta.fs, samples, meta.labels)
}

fn read_csv(id: &str, path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|err| Error::ingestion(id, format!("cannot read {}: {err}", path.display())))?;
    let headers = rdr.headers().map_err(|err| Error::ingestion(id, err.to_string()))?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (Some(ti), Some(pi)) = (col("t"), col("ppg")) else {
        return Err(Error::ingestion(id, format!("{} must have columns `t,ppg`", path.display())));
    };
    let (mut t, mut x) = (Vec::new(), Vec::new());
    for (line, row) in rdr.records().enumerate() {
        let row = row.map_err(|err| Error::ingestion(id, err.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            let field = row.get(i).unwrap_or("").trim();
            field
                .parse::<f64>()
                .map_err(|_| Error::ingestion(id, format!("row {}: cannot parse {field:?}", line + 2)))
        };
        t.push(parse(ti)?);
        x.push(parse(pi)?);
    }
    if x.is_empty() {
        return Err(Error::ingestion(id, format!("{} has no samples", path.display())));
    }
    Ok((t, x))
}

/// `t` must increase strictly, and its mean spacing must match `1 / fs`
/// within [`FS_TOLERANCE`].
fn check_time_axis(id: &str, t: &[f64], fs: f64) -> Result<()> {
    if let Some(i) = t.windows(2).position(|p| !(p[1] > p[0])) {
        return Err(Error::ingestion(id, format!("t is not strictly increasing at row {}", i + 3)));
    }
    if t.len() >= 2 && fs > 0.0 {
        let implied = (t.len() - 1) as f64 / (t[t.len() - 1] - t[0]);
        if ((implied - fs) / fs).abs() > FS_TOLERANCE {
            return Err(Error::ingestion(id, format!("declared fs {fs} Hz but t implies {implied:.4} Hz")));
        }
    }
    Ok(())
}

/// Writes `bytes` to `path` through a temporary file in the same directory
/// and a rename, so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Writes records as `<id>.csv` + `<id>.json` under `dir` and a
/// `manifest.json` listing them. Returns the manifest path.
pub fn write_dataset(dir: &Path, records: &[PpgRecord], test_ids: &[String], split_seed: u64) -> Result<PathBuf> {
    let test: BTreeSet<&str> = test_ids.iter().map(String::as_str).collect();
    let mut entries = Vec::with_capacity(records.len());
    for r in records {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["t", "ppg"])?;
        for (i, x) in r.samples.iter().enumerate() {
            w.write_record([format!("{}", i as f64 / r.fs), format!("{x}")])?;
        }
        let csv_bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        let csv_name = PathBuf::from(format!("{}.csv", r.record_id));
        let meta_name = PathBuf::from(format!("{}.json", r.record_id));
        write_atomic(&dir.join(&csv_name), &csv_bytes)?;
        let meta = RecordMetadata { record_id: r.record_id.clone(), fs: r.fs, labels: r.labels.clone() };
        write_atomic(&dir.join(&meta_name), serde_json::to_string_pretty(&meta)?.as_bytes())?;
        let split = if test.contains(r.record_id.as_str()) { SplitRole::Test } else { SplitRole::Development };
        entries.push(ManifestEntry { record_id: r.record_id.clone(), csv: csv_name, metadata: meta_name, split });
    }
    let manifest = DatasetManifest { version: MANIFEST_VERSION.into(), split_seed, records: entries };
    manifest.validate()?;
    let path = dir.join("manifest.json");
    write_atomic(&path, serde_json::to_string_pretty(&manifest)?.as_bytes())?;
    Ok(path)
}

/// Per-split record counts, for summaries.
pub fn split_counts(m: &DatasetManifest) -> BTreeMap<SplitRole, usize> {
    let mut c = BTreeMap::new();
    for e in &m.records {
        *c.entry(e.split).or_insert(0) += 1;
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, n: usize) -> PpgRecord {
        let samples = (0..n).map(|i| (i as f64 * 0.25).sin()).collect();
        PpgRecord::new(id, 30.0, samples, vec![SegmentLabel { start: 0, label: false }, SegmentLabel { start: n / 2, label: true }])
            .unwrap()
    }

    #[test]
    fn round_trip_preserves_records_and_split() {
        let dir = tempfile::tempdir().unwrap();
        let recs = vec![record("a", 300), record("b", 200), record("c", 100)];
        let path = write_dataset(dir.path(), &recs, &["b".to_string()], 42).unwrap();
        let ds = load_dataset(&path).unwrap();
        assert_eq!(ds.records.len(), 3);
        for (a, b) in recs.iter().zip(&ds.records) {
            assert_eq!(a.record_id, b.record_id);
            assert_eq!(a.labels, b.labels);
            for (x, y) in a.samples.iter().zip(&b.samples) {
                assert_eq!(x, y);
            }
        }
        assert_eq!(ds.split.test, BTreeSet::from(["b".to_string()]));
        assert_eq!(ds.split.development.len(), 2);
        assert_eq!(ds.manifest.split_seed, 42);
    }

    #[test]
    fn split_sizes_follow_the_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let recs: Vec<PpgRecord> = (0..53).map(|i| record(&format!("r{i:02}"), 64)).collect();
        let test: Vec<String> = (35..53).map(|i| format!("r{i:02}")).collect();
        let ds = load_dataset(&write_dataset(dir.path(), &recs, &test, 42).unwrap()).unwrap();
        assert_eq!(ds.split.development.len(), 35);
        assert_eq!(ds.split.test.len(), 18);
        assert!(ds.split.development.is_disjoint(&ds.split.test));
    }

    fn write_manifest(dir: &Path, m: &DatasetManifest) -> PathBuf {
        let p = dir.join("manifest.json");
        fs::write(&p, serde_json::to_vec(m).unwrap()).unwrap();
        p
    }

    #[test]
    fn duplicate_record_id_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(dir.path(), &[record("a", 64)], &[], 1).unwrap();
        let mut m = load_manifest(&path).unwrap();
        m.records.push(m.records[0].clone());
        let err = load_dataset(&write_manifest(dir.path(), &m)).unwrap_err();
        assert!(matches!(err, Error::Schema { .. }), "{err}");
    }

    #[test]
    fn empty_csv_is_an_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(dir.path(), &[record("a", 64)], &[], 1).unwrap();
        fs::write(dir.path().join("a.csv"), "t,ppg\n").unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn missing_file_is_an_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(dir.path(), &[record("a", 64)], &[], 1).unwrap();
        fs::remove_file(dir.path().join("a.csv")).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn fs_mismatch_beyond_one_percent_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(dir.path(), &[record("a", 300)], &[], 1).unwrap();
        let meta_path = dir.path().join("a.json");
        let mut meta: RecordMetadata = serde_json::from_slice(&fs::read(&meta_path).unwrap()).unwrap();
        meta.fs = 30.2;
        fs::write(&meta_path, serde_json::to_vec(&meta).unwrap()).unwrap();
        assert!(load_dataset(&path).is_ok(), "0.67% deviation is within tolerance");
        meta.fs = 30.5;
        fs::write(&meta_path, serde_json::to_vec(&meta).unwrap()).unwrap();
        assert!(matches!(load_dataset(&path), Err(Error::Ingestion { .. })));
    }

    #[test]
    fn non_monotone_time_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_dataset(dir.path(), &[record("a", 64)], &[], 1).unwrap();
        fs::write(dir.path().join("a.csv"), "t,ppg\n0,1\n0.1,2\n0.05,3\n").unwrap();
        let err = load_dataset(&path).unwrap_err();
        assert!(err.to_string().contains("strictly increasing"), "{err}");
    }

    #[test]
    fn unknown_manifest_field_is_a_schema_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("manifest.json");
        fs::write(&p, r#"{"version":"1","split_seed":1,"records":[],"extra":true}"#).unwrap();
        assert!(matches!(load_manifest(&p), Err(Error::Schema { .. })));
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub").join("x.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(fs::read(&p).unwrap(), b"two");
        assert_eq!(fs::read_dir(p.parent().unwrap()).unwrap().count(), 1);
    }
}
