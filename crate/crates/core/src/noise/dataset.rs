use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::NoiseError;

/// One sequence's aggregated outcomes: `k` "1" results in `n` shots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub sequence_id: u64,
    pub n: u64,
    pub k: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMetadata {
    pub seed: u64,
    pub noise_digest: String,
    pub randomized: bool,
    #[serde(default)]
    pub n_randomizations: Option<u64>,
    #[serde(default)]
    pub interleave_block: Option<u64>,
    #[serde(default)]
    pub ordering: Option<String>,
}

impl DatasetMetadata {
    pub fn synthetic(randomized: bool) -> DatasetMetadata {
        DatasetMetadata {
            seed: 0,
            noise_digest: String::new(),
            randomized,
            n_randomizations: None,
            interleave_block: None,
            ordering: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub metadata: DatasetMetadata,
}

impl Dataset {
    pub fn new(rows: Vec<DatasetRow>, metadata: DatasetMetadata) -> Result<Dataset, NoiseError> {
        let d = Dataset { rows, metadata };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for r in &self.rows {
            if r.k > r.n {
                return Err(NoiseError::MalformedDataset(format!(
                    "sequence {}: k = {} exceeds n = {}",
                    r.sequence_id, r.k, r.n
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn total_shots(&self) -> u64 {
        self.rows.iter().map(|r| r.n).sum()
    }

    pub fn row(&self, sequence_id: u64) -> Option<&DatasetRow> {
        self.rows.iter().find(|r| r.sequence_id == sequence_id)
    }

    /// CSV with header `sequence_id,n,k`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("in-memory CSV write");
        }
        String::from_utf8(w.into_inner().expect("in-memory CSV flush")).expect("CSV is UTF-8")
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<DatasetRow>, NoiseError> {
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let headers = rdr
            .headers()
            .map_err(|e| NoiseError::MalformedDataset(e.to_string()))?
            .clone();
        if headers.iter().collect::<Vec<_>>() != ["sequence_id", "n", "k"] {
            return Err(NoiseError::MalformedDataset(format!(
                "expected header sequence_id,n,k, found {}",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        rdr.deserialize()
            .map(|r| r.map_err(|e| NoiseError::MalformedDataset(e.to_string())))
            .collect()
    }

    pub fn from_parts(csv_text: &str, sidecar_json: &str) -> Result<Dataset, NoiseError> {
        let rows = Dataset::rows_from_csv(csv_text)?;
        let metadata: DatasetMetadata = serde_json::from_str(sidecar_json)
            .map_err(|e| NoiseError::MalformedDataset(format!("sidecar: {e}")))?;
        Dataset::new(rows, metadata)
    }

    /// Sidecar path for a CSV path: `x.csv` → `x.meta.json`.
    pub fn sidecar_path(csv_path: &Path) -> PathBuf {
        csv_path.with_extension("meta.json")
    }

    pub fn write(&self, csv_path: &Path) -> std::io::Result<()> {
        fs::write(csv_path, self.to_csv())?;
        let meta = serde_json::to_string_pretty(&self.metadata).expect("metadata serializes");
        fs::write(Dataset::sidecar_path(csv_path), meta + "\n")
    }

    /// Reads the CSV and its sidecar; a missing sidecar yields default
    /// metadata.
    pub fn read(csv_path: &Path) -> Result<Dataset, NoiseError> {
        let io = |e: std::io::Error| NoiseError::MalformedDataset(format!("{}: {e}", csv_path.display()));
        let text = fs::read_to_string(csv_path).map_err(io)?;
        let side = Dataset::sidecar_path(csv_path);
        match fs::read_to_string(&side) {
            Ok(json) => Dataset::from_parts(&text, &json),
            Err(_) => Dataset::new(Dataset::rows_from_csv(&text)?, DatasetMetadata::synthetic(false)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        let rows = vec![
            DatasetRow { sequence_id: 0, n: 4, k: 2 },
            DatasetRow { sequence_id: 1, n: 4, k: 4 },
        ];
        Dataset::new(rows, DatasetMetadata::synthetic(true)).unwrap()
    }

    #[test]
    fn csv_layout() {
        assert_eq!(sample().to_csv(), "sequence_id,n,k\n0,4,2\n1,4,4\n");
    }

    #[test]
    fn round_trip_through_files() {
        let dir = std::env::temp_dir().join(format!("pfr-dataset-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("d.csv");
        let d = sample();
        d.write(&path).unwrap();
        assert!(dir.join("d.meta.json").exists());
        assert_eq!(Dataset::read(&path).unwrap(), d);
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn rejects_bad_rows_and_headers() {
        let bad = vec![DatasetRow { sequence_id: 0, n: 1, k: 2 }];
        assert!(Dataset::new(bad, DatasetMetadata::synthetic(false)).is_err());
        assert!(Dataset::rows_from_csv("id,n,k\n0,1,1\n").is_err());
        assert!(Dataset::rows_from_csv("sequence_id,n,k\n0,1,x\n").is_err());
    }
}
