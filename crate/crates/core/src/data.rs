//! Dataset construction: CSV ingestion, synthetic blob generation, the
//! smallest-class out-of-distribution protocol, and contamination mixing.
//!
//! All stochastic choices flow from a single 64-bit seed through
//! xoshiro256** (seeded via splitmix64, the `seed_from_u64` expansion), so
//! every constructed dataset is reproducible.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_xoshiro::rand_core::SeedableRng;
use rand_xoshiro::Xoshiro256StarStar;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Which distribution a training sample came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Id,
    Ood,
}

/// Feature matrix plus labels, per-sample provenance tags, and class count.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    /// N x F feature matrix.
    pub features: Matrix,
    /// Class labels in 1..=K.
    pub labels: Vec<usize>,
    pub provenance: Vec<Provenance>,
    pub k: usize,
    /// For contaminated samples, the class index in the source pool.
    pub original_ood_class: Vec<Option<usize>>,
}

impl LabeledDataset {
    pub fn new(features: Matrix, labels: Vec<usize>, k: usize) -> Result<Self> {
        let n = features.rows;
        if labels.len() != n {
            return Err(Error::Shape("label count does not match rows".into()));
        }
        if k < 2 {
            return Err(Error::Usage("dataset needs K >= 2 classes".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y == 0 || y > k) {
            return Err(Error::IndexOutOfRange { index: bad, k });
        }
        Ok(LabeledDataset {
            features,
            labels,
            provenance: vec![Provenance::Id; n],
            k,
            original_ood_class: vec![None; n],
        })
    }

    pub fn len(&self) -> usize {
        self.features.rows
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_features(&self) -> usize {
        self.features.cols
    }

    pub fn has_ood(&self) -> bool {
        self.provenance.iter().any(|&p| p == Provenance::Ood)
    }

    /// Per-class sample counts, indexed by class - 1.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.k];
        for &y in &self.labels {
            counts[y - 1] += 1;
        }
        counts
    }

    /// Subset by row index, preserving order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.n_features());
        for &i in indices {
            data.extend_from_slice(self.features.row(i));
        }
        LabeledDataset {
            features: Matrix {
                rows: indices.len(),
                cols: self.n_features(),
                data,
            },
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            provenance: indices.iter().map(|&i| self.provenance[i]).collect(),
            k: self.k,
            original_ood_class: indices.iter().map(|&i| self.original_ood_class[i]).collect(),
        }
    }
}

/// How contaminated samples receive in-distribution labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OodLabeling {
    /// Every sample of one source class gets the same fixed label:
    /// ((source_class - 1) mod K) + 1.
    Specific,
    /// Each sample draws a label uniformly from 1..=K.
    Random,
}

/// Selects one class-balanced partition of the source pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OodSubset {
    /// 0-based subset index.
    pub index: usize,
    pub n_subsets: usize,
}

/// Contamination recipe.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureSpec {
    /// Proportion of the output that is out-of-distribution, in [0,1].
    pub alpha: f64,
    pub labeling: OodLabeling,
    pub ood_subset: Option<OodSubset>,
    pub seed: u64,
}

impl MixtureSpec {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Usage(format!(
                "alpha must be in [0,1], got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Replace round(alpha * N) uniformly chosen in-distribution samples with
/// samples drawn without replacement from the source pool, relabeled per the
/// labeling scheme. The total size N stays fixed.
pub fn mix(
    id_data: &LabeledDataset,
    ood_pool: &LabeledDataset,
    spec: &MixtureSpec,
) -> Result<LabeledDataset> {
    spec.validate()?;
    let n = id_data.len();
    let n_o = (spec.alpha * n as f64).round() as usize;
    if n_o == 0 {
        return Ok(id_data.clone());
    }
    let pool = match spec.ood_subset {
        Some(sub) => {
            let parts = split_ood_source(ood_pool, sub.n_subsets)?;
            parts
                .into_iter()
                .nth(sub.index)
                .ok_or_else(|| Error::Usage(format!("subset index {} out of range", sub.index)))?
        }
        None => ood_pool.clone(),
    };
    if pool.len() < n_o {
        return Err(Error::Capacity(format!(
            "source pool has {} samples but {} are needed",
            pool.len(),
            n_o
        )));
    }

    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    // Positions to replace: first n_o of a shuffled index list.
    let mut positions: Vec<usize> = (0..n).collect();
    positions.shuffle(&mut rng);
    positions.truncate(n_o);
    // Pool picks, also without replacement.
    let mut picks: Vec<usize> = (0..pool.len()).collect();
    picks.shuffle(&mut rng);
    picks.truncate(n_o);

    let k = id_data.k;
    let f = id_data.n_features();
    if pool.n_features() != f {
        return Err(Error::Shape(
            "source pool feature width does not match in-distribution data".into(),
        ));
    }
    let mut out = id_data.clone();
    for (&pos, &pick) in positions.iter().zip(picks.iter()) {
        let src = pool.features.row(pick);
        out.features.data[pos * f..(pos + 1) * f].copy_from_slice(src);
        let source_class = pool.labels[pick];
        out.labels[pos] = match spec.labeling {
            OodLabeling::Specific => ((source_class - 1) % k) + 1,
            OodLabeling::Random => rng.gen_range(1..=k),
        };
        out.provenance[pos] = Provenance::Ood;
        out.original_ood_class[pos] = Some(source_class);
    }
    Ok(out)
}

/// Partition a pool into class-balanced subsets by class order. Requires the
/// class count to be divisible by `n_subsets`.
pub fn split_ood_source(pool: &LabeledDataset, n_subsets: usize) -> Result<Vec<LabeledDataset>> {
    if n_subsets == 0 {
        return Err(Error::Usage("n_subsets must be positive".into()));
    }
    if pool.k % n_subsets != 0 {
        return Err(Error::Usage(format!(
            "class count {} is not divisible by {} subsets",
            pool.k, n_subsets
        )));
    }
    let per = pool.k / n_subsets;
    let mut out = Vec::with_capacity(n_subsets);
    for s in 0..n_subsets {
        let lo = s * per + 1;
        let hi = (s + 1) * per;
        let indices: Vec<usize> = (0..pool.len())
            .filter(|&i| (lo..=hi).contains(&pool.labels[i]))
            .collect();
        out.push(pool.subset(&indices));
    }
    Ok(out)
}

/// Remove the smallest class (ties broken by lowest class index) and return
/// it as the contamination pool. The remaining labels are re-encoded densely
/// to 1..=K-1, preserving class order.
pub fn make_smallest_class_ood(data: &LabeledDataset) -> Result<(LabeledDataset, LabeledDataset)> {
    if data.k < 3 {
        return Err(Error::Usage(
            "smallest-class protocol needs K >= 3 so the remainder keeps two classes".into(),
        ));
    }
    let counts = data.class_counts();
    let smallest = counts
        .iter()
        .enumerate()
        .min_by_key(|&(i, &c)| (c, i))
        .map(|(i, _)| i + 1)
        .expect("K >= 3");

    let ood_indices: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] == smallest)
        .collect();
    let id_indices: Vec<usize> = (0..data.len())
        .filter(|&i| data.labels[i] != smallest)
        .collect();

    let ood_part = data.subset(&ood_indices);
    let mut id_part = data.subset(&id_indices);
    for y in id_part.labels.iter_mut() {
        if *y > smallest {
            *y -= 1;
        }
    }
    id_part.k = data.k - 1;
    Ok((id_part, ood_part))
}

/// Isotropic Gaussian blobs, one per class, centered on seeded random
/// directions scaled by `centers_scale`.
pub fn gen_blobs(
    n_per_class: usize,
    k: usize,
    n_features: usize,
    centers_scale: f64,
    noise_sd: f64,
    seed: u64,
) -> Result<LabeledDataset> {
    if n_per_class == 0 || k < 2 || n_features == 0 {
        return Err(Error::Usage("blob parameters must be positive, K >= 2".into()));
    }
    if centers_scale <= 0.0 || noise_sd < 0.0 {
        return Err(Error::Usage("centers_scale > 0 and noise_sd >= 0 required".into()));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut centers = Vec::with_capacity(k);
    for _ in 0..k {
        let mut dir: Vec<f64> = (0..n_features).map(|_| gaussian(&mut rng)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        for v in dir.iter_mut() {
            *v *= centers_scale / norm;
        }
        centers.push(dir);
    }
    let n = k * n_per_class;
    let mut data = Vec::with_capacity(n * n_features);
    let mut labels = Vec::with_capacity(n);
    for (ci, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            for &c in center {
                data.push(c + noise_sd * gaussian(&mut rng));
            }
            labels.push(ci + 1);
        }
    }
    LabeledDataset::new(Matrix::from_vec(n, n_features, data)?, labels, k)
}

fn gaussian<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(f64::MIN_POSITIVE);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Seeded stratified split. The test set contains only in-distribution
/// samples; any contaminated samples stay in the training part.
pub fn train_test_split(
    data: &LabeledDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset)> {
    if !(0.0 < test_fraction && test_fraction < 1.0) {
        return Err(Error::Usage("test_fraction must be in (0,1)".into()));
    }
    let mut rng = Xoshiro256StarStar::seed_from_u64(seed);
    let mut train_idx: Vec<usize> = Vec::new();
    let mut test_idx: Vec<usize> = Vec::new();
    for class in 1..=data.k {
        let mut members: Vec<usize> = (0..data.len())
            .filter(|&i| data.labels[i] == class && data.provenance[i] == Provenance::Id)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        let n_test = (test_fraction * members.len() as f64).round() as usize;
        if n_test >= members.len() {
            return Err(Error::Stratification(format!(
                "class {class} would have no training samples"
            )));
        }
        test_idx.extend_from_slice(&members[..n_test]);
        train_idx.extend_from_slice(&members[n_test..]);
    }
    // Contaminated samples always train.
    for i in 0..data.len() {
        if data.provenance[i] == Provenance::Ood {
            train_idx.push(i);
        }
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Stratification("empty split".into()));
    }
    Ok((data.subset(&train_idx), data.subset(&test_idx)))
}

/// Read a CSV file into a dataset. Labels are re-encoded to 1..=K by first
/// appearance order; all provenance is in-distribution.
///
/// `label_column` is a header name when `has_header` is set, otherwise a
/// 0-based column index.
pub fn load_csv(path: &Path, label_column: &str, has_header: bool) -> Result<LabeledDataset> {
    let file = std::fs::File::open(path)?;
    let reader = BufReader::new(file);
    let mut lines = reader.lines().enumerate();

    let label_idx: usize;
    let mut dist_idx: Option<usize> = None;
    let mut n_cols: Option<usize> = None;
    if has_header {
        let (row, header) = lines.next().ok_or(Error::Parse {
            row: 1,
            message: "empty file".into(),
        })?;
        let header = header?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        n_cols = Some(cols.len());
        dist_idx = cols.iter().position(|&c| c == "dist");
        label_idx = cols
            .iter()
            .position(|&c| c == label_column)
            .ok_or_else(|| Error::Parse {
                row: row + 1,
                message: format!("unknown label column '{label_column}'"),
            })?;
    } else {
        label_idx = label_column.parse::<usize>().map_err(|_| Error::Parse {
            row: 0,
            message: format!("label column index '{label_column}' is not a number"),
        })?;
    }

    let mut features: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<String> = Vec::new();
    let mut provenance: Vec<Provenance> = Vec::new();
    let mut n_features = 0usize;
    let mut n_rows = 0usize;
    for (row, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        match n_cols {
            Some(c) if fields.len() != c => {
                return Err(Error::Parse {
                    row: row + 1,
                    message: format!("ragged row: {} fields, expected {}", fields.len(), c),
                })
            }
            None => n_cols = Some(fields.len()),
            _ => {}
        }
        if label_idx >= fields.len() {
            return Err(Error::Parse {
                row: row + 1,
                message: format!("label column {label_idx} out of range"),
            });
        }
        let mut row_features = 0usize;
        let mut tag = Provenance::Id;
        for (i, field) in fields.iter().enumerate() {
            if i == label_idx {
                raw_labels.push(field.to_string());
            } else if Some(i) == dist_idx {
                tag = match *field {
                    "id" => Provenance::Id,
                    "ood" => Provenance::Ood,
                    other => {
                        return Err(Error::Parse {
                            row: row + 1,
                            message: format!("bad dist tag '{other}'"),
                        })
                    }
                };
            } else {
                let v: f64 = field.parse().map_err(|_| Error::Parse {
                    row: row + 1,
                    message: format!("non-numeric feature '{field}' in column {i}"),
                })?;
                features.push(v);
                row_features += 1;
            }
        }
        provenance.push(tag);
        n_features = row_features;
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::Parse {
            row: if has_header { 2 } else { 1 },
            message: "no data rows".into(),
        });
    }

    // First-appearance label encoding.
    let mut seen: Vec<String> = Vec::new();
    let mut labels = Vec::with_capacity(n_rows);
    for raw in &raw_labels {
        let idx = match seen.iter().position(|s| s == raw) {
            Some(i) => i,
            None => {
                seen.push(raw.clone());
                seen.len() - 1
            }
        };
        labels.push(idx + 1);
    }
    let mut data =
        LabeledDataset::new(Matrix::from_vec(n_rows, n_features, features)?, labels, seen.len())?;
    data.provenance = provenance;
    Ok(data)
}

/// Write a dataset as CSV with a `dist` provenance column. Feature values
/// use the shortest decimal form that round-trips in f64.
pub fn save_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    for i in 0..data.n_features() {
        write!(out, "f{i},").expect("string write");
    }
    out.push_str("label,dist\n");
    for i in 0..data.len() {
        for v in data.features.row(i) {
            write!(out, "{v},").expect("string write");
        }
        let tag = match data.provenance[i] {
            Provenance::Id => "id",
            Provenance::Ood => "ood",
        };
        writeln!(out, "{},{}", data.labels[i], tag).expect("string write");
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}
