//! Image metadata records, the log-ratio score, and dataset I/O.
//!
//! Records are stored one JSON object per line:
//!
//! ```text
//! {"id":"img-1","views":1000,"faves":10,"features":[0.5,-1.25],"latent_score":0.33}
//! ```
//!
//! `latent_score` is optional and only present on synthetic data.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Aesthetic score in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Score(f64);

impl Score {
    pub fn new(value: f64) -> Result<Self> {
        if value.is_finite() && (0.0..=1.0).contains(&value) {
            Ok(Score(value))
        } else {
            Err(Error::RejectedRecord {
                field: "score",
                reason: format!("{value} is outside [0, 1]"),
            })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<Score> for f64 {
    fn from(s: Score) -> f64 {
        s.0
    }
}

/// `ln(faves) / ln(views)`.
///
/// The logarithm base cancels in the ratio, so this is the same for any base.
/// Exponential growth of both counts over time also cancels: raising both
/// counts to the same power leaves the score unchanged.
pub fn compute_score(views: u64, faves: u64) -> Result<Score> {
    if views < 2 {
        return Err(Error::RejectedRecord {
            field: "views",
            reason: format!("must be at least 2, got {views}"),
        });
    }
    if faves < 1 {
        return Err(Error::RejectedRecord {
            field: "faves",
            reason: "must be at least 1, got 0".to_string(),
        });
    }
    if faves > views {
        return Err(Error::RejectedRecord {
            field: "faves",
            reason: format!("{faves} exceeds views {views}"),
        });
    }
    let s = (faves as f64).ln() / (views as f64).ln();
    // faves == views must give exactly 1 regardless of rounding in ln.
    let s = if faves == views {
        1.0
    } else {
        s.clamp(0.0, 1.0)
    };
    Ok(Score(s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub id: String,
    pub views: u64,
    pub faves: u64,
    pub features: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_score: Option<f64>,
}

impl ImageRecord {
    pub fn validate(&self) -> Result<()> {
        compute_score(self.views, self.faves)?;
        if self.features.is_empty() {
            return Err(Error::RejectedRecord {
                field: "features",
                reason: "empty feature vector".to_string(),
            });
        }
        if let Some(i) = self.features.iter().position(|x| !x.is_finite()) {
            return Err(Error::RejectedRecord {
                field: "features",
                reason: format!("entry {i} is not finite"),
            });
        }
        if let Some(s) = self.latent_score {
            if !(s.is_finite() && (0.0..=1.0).contains(&s)) {
                return Err(Error::RejectedRecord {
                    field: "latent_score",
                    reason: format!("{s} is outside [0, 1]"),
                });
            }
        }
        Ok(())
    }

    /// Score of a validated record.
    pub fn score(&self) -> Score {
        compute_score(self.views, self.faves).expect("record was validated on insertion")
    }
}

/// A record line that was skipped during loading.
#[derive(Debug, Clone, PartialEq)]
pub struct Rejection {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    records: Vec<ImageRecord>,
    d_in: Option<usize>,
}

/// Result of [`Dataset::load`]: the accepted records plus per-line diagnostics.
#[derive(Debug)]
pub struct Loaded {
    pub dataset: Dataset,
    pub rejections: Vec<Rejection>,
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    views: i64,
    faves: i64,
    features: Vec<f64>,
    #[serde(default)]
    latent_score: Option<f64>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = ImageRecord>) -> Result<Self> {
        let mut ds = Dataset::new();
        for r in records {
            ds.push(r)?;
        }
        Ok(ds)
    }

    /// Appends a record after checking its invariants, id uniqueness and
    /// feature length.
    pub fn push(&mut self, record: ImageRecord) -> Result<()> {
        record.validate()?;
        if let Some(d) = self.d_in {
            if record.features.len() != d {
                return Err(Error::Shape {
                    expected: d,
                    found: record.features.len(),
                });
            }
        }
        if self.records.iter().any(|r| r.id == record.id) {
            return Err(Error::RejectedRecord {
                field: "id",
                reason: format!("duplicate id {:?}", record.id),
            });
        }
        self.d_in = Some(record.features.len());
        self.records.push(record);
        Ok(())
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    /// Feature dimension; `None` until the first record arrives.
    pub fn d_in(&self) -> Option<usize> {
        self.d_in
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn scores(&self) -> Vec<Score> {
        self.records.iter().map(ImageRecord::score).collect()
    }

    /// Latent scores, if every record carries one.
    pub fn latent_scores(&self) -> Option<Vec<f64>> {
        self.records.iter().map(|r| r.latent_score).collect()
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Loaded> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Loaded> {
        let mut dataset = Dataset::new();
        let mut rejections = Vec::new();
        let mut seen = HashSet::new();
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
            let mut reject = |reason: String| {
                rejections.push(Rejection {
                    line: line_no,
                    reason,
                })
            };
            if raw.views < 0 || raw.faves < 0 {
                let field = if raw.views < 0 { "views" } else { "faves" };
                reject(format!("{field}: negative count"));
                continue;
            }
            let record = ImageRecord {
                id: raw.id,
                views: raw.views as u64,
                faves: raw.faves as u64,
                features: raw.features,
                latent_score: raw.latent_score,
            };
            if let Err(e) = record.validate() {
                reject(e.to_string());
                continue;
            }
            if let Some(d) = dataset.d_in {
                if record.features.len() != d {
                    return Err(Error::FeatureLength {
                        line: line_no,
                        expected: d,
                        found: record.features.len(),
                    });
                }
            }
            if !seen.insert(record.id.clone()) {
                reject(format!("id: duplicate id {:?}", record.id));
                continue;
            }
            dataset.d_in = Some(record.features.len());
            dataset.records.push(record);
        }
        Ok(Loaded {
            dataset,
            rejections,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut *w, r)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }
}

/// A frame of a video sequence: only `id` and `features` are required.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct FrameRecord {
    pub id: String,
    pub features: Vec<f64>,
}

/// Reads frame records in file order. Extra keys (views, faves, ...) are ignored.
pub fn load_frames(path: impl AsRef<Path>) -> Result<Vec<FrameRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut frames: Vec<FrameRecord> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let frame: FrameRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            message: e.to_string(),
        })?;
        if let Some(first) = frames.first() {
            if frame.features.len() != first.features.len() {
                return Err(Error::FeatureLength {
                    line: line_no,
                    expected: first.features.len(),
                    found: frame.features.len(),
                });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

/// Equal-width histogram over `[0, 1]`.
///
/// Bins are `[lo, hi)` except the last, which is closed so that a score of
/// exactly 1.0 is counted.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "bin_lo,bin_hi,count")?;
        for (i, c) in self.counts.iter().enumerate() {
            writeln!(w, "{},{},{}", self.edges[i], self.edges[i + 1], c)?;
        }
        Ok(())
    }
}

pub fn score_histogram(dataset: &Dataset, bins: usize) -> Result<Histogram> {
    histogram(&dataset.scores(), bins)
}

pub fn histogram(scores: &[Score], bins: usize) -> Result<Histogram> {
    if bins == 0 {
        return Err(Error::Config("histogram needs at least one bin".into()));
    }
    if scores.is_empty() {
        return Err(Error::EmptyInput("histogram of an empty dataset"));
    }
    let edges: Vec<f64> = (0..=bins).map(|i| i as f64 / bins as f64).collect();
    let mut counts = vec![0usize; bins];
    for s in scores {
        let v = s.value();
        let mut idx = ((v * bins as f64).floor() as usize).min(bins - 1);
        // Reconcile with the stored edges where v*bins rounds across a boundary.
        while idx + 1 < bins && v >= edges[idx + 1] {
            idx += 1;
        }
        while idx > 0 && v < edges[idx] {
            idx -= 1;
        }
        counts[idx] += 1;
    }
    Ok(Histogram { edges, counts })
}
