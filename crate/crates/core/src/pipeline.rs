//! Ingestion, signal windowing, SNR noise corruption, bag composition, and
//! synthetic dataset generation.
//!
//! The external instance format is CSV with numeric columns `f0..f{D-1}`, an
//! optional `label` column in {0,1}, and an optional `run_id` column used for
//! contiguous bag composition. Floats are written with Rust's shortest
//! round-trip formatting, so a re-read table is element-wise identical.
//! All randomness flows from explicit seeds; there is no global RNG.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::types::{Bag, Dataset, Instance, Label};

/// Fixed-width segmentation of a signal into instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowingSpec {
    pub window_size: usize,
    /// Defaults to `window_size` (non-overlapping windows).
    pub stride: usize,
}

impl WindowingSpec {
    pub fn non_overlapping(window_size: usize) -> Self {
        WindowingSpec {
            window_size,
            stride: window_size,
        }
    }
}

/// Cut a signal into `floor((len - window) / stride) + 1` windows; trailing
/// samples that do not fill a window are dropped.
pub fn window_signal(signal: &[f64], spec: &WindowingSpec) -> Result<Vec<Instance>> {
    if spec.window_size == 0 || spec.stride == 0 {
        return Err(Error::Config("window size and stride must be positive".into()));
    }
    if signal.len() < spec.window_size {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            window: spec.window_size,
        });
    }
    let count = (signal.len() - spec.window_size) / spec.stride + 1;
    Ok((0..count)
        .map(|i| {
            let start = i * spec.stride;
            Instance::new(i, signal[start..start + spec.window_size].to_vec())
        })
        .collect())
}

/// Add zero-mean Gaussian noise with variance `signal_power / 10^(snr_db/10)`,
/// where signal power is the mean of squared samples. Deterministic per seed.
pub fn corrupt_snr(signal: &[f64], snr_db: f64, seed: u64) -> Result<Vec<f64>> {
    let power = signal.iter().map(|v| v * v).sum::<f64>() / signal.len().max(1) as f64;
    if power == 0.0 {
        return Err(Error::ZeroPowerSignal);
    }
    let noise_var = power / 10f64.powf(snr_db / 10.0);
    let normal = Normal::new(0.0, noise_var.sqrt()).expect("valid sigma");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(signal.iter().map(|v| v + normal.sample(&mut rng)).collect())
}

/// A flat labeled instance table, the unit of CSV ingestion.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTable {
    pub feature_dim: usize,
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Option<Label>>,
    pub run_ids: Vec<Option<String>>,
}

impl InstanceTable {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

fn csv_error(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Csv {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

/// Load an instance table, checking every value is finite. Row order is
/// preserved; malformed rows are reported with their line number.
pub fn load_feature_csv(path: &Path, expected_dim: Option<usize>) -> Result<InstanceTable> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| csv_error(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| csv_error(path, 1, e.to_string()))?
        .clone();

    let mut feature_cols = Vec::new();
    let mut label_col = None;
    let mut run_col = None;
    for (i, name) in headers.iter().enumerate() {
        match name {
            "label" => label_col = Some(i),
            "run_id" => run_col = Some(i),
            _ => {
                if name != format!("f{}", feature_cols.len()) {
                    return Err(csv_error(
                        path,
                        1,
                        format!(
                            "unexpected column '{name}'; features must be f0..f{{D-1}} \
                             followed by optional label and run_id"
                        ),
                    ));
                }
                feature_cols.push(i);
            }
        }
    }
    if feature_cols.is_empty() {
        return Err(csv_error(path, 1, "no feature columns"));
    }
    if let Some(dim) = expected_dim {
        if feature_cols.len() != dim {
            return Err(csv_error(
                path,
                1,
                format!("expected {dim} feature columns, found {}", feature_cols.len()),
            ));
        }
    }

    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let mut run_ids = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, 0, e.to_string()))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut features = Vec::with_capacity(feature_cols.len());
        for &col in &feature_cols {
            let raw = record.get(col).ok_or_else(|| {
                csv_error(path, line, format!("missing column {}", headers.iter().nth(col).unwrap_or("?")))
            })?;
            let value: f64 = raw.trim().parse().map_err(|_| {
                csv_error(path, line, format!("'{raw}' is not a number"))
            })?;
            if !value.is_finite() {
                return Err(csv_error(path, line, format!("non-finite value '{raw}'")));
            }
            features.push(value);
        }
        let label = match label_col {
            None => None,
            Some(col) => {
                let raw = record.get(col).unwrap_or("").trim();
                match raw {
                    "" => None,
                    "0" => Some(Label::Normal),
                    "1" => Some(Label::Anomalous),
                    other => {
                        return Err(csv_error(
                            path,
                            line,
                            format!("label must be 0 or 1, got '{other}'"),
                        ))
                    }
                }
            }
        };
        let run_id = run_col.and_then(|col| {
            let raw = record.get(col).unwrap_or("").trim();
            if raw.is_empty() {
                None
            } else {
                Some(raw.to_string())
            }
        });
        rows.push(features);
        labels.push(label);
        run_ids.push(run_id);
    }

    Ok(InstanceTable {
        feature_dim: feature_cols.len(),
        rows,
        labels,
        run_ids,
    })
}

/// Emit a table in the same format `load_feature_csv` reads.
pub fn write_feature_csv(table: &InstanceTable, path: &Path) -> Result<()> {
    let has_label = table.labels.iter().any(|l| l.is_some());
    let has_run = table.run_ids.iter().any(|r| r.is_some());
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..table.feature_dim).map(|i| format!("f{i}")).collect();
    if has_label {
        header.push("label".into());
    }
    if has_run {
        header.push("run_id".into());
    }
    w.write_record(&header).map_err(io_err)?;
    for i in 0..table.len() {
        let mut record: Vec<String> = table.rows[i].iter().map(|v| v.to_string()).collect();
        if has_label {
            record.push(match table.labels[i] {
                Some(Label::Anomalous) => "1".into(),
                Some(Label::Normal) => "0".into(),
                None => String::new(),
            });
        }
        if has_run {
            record.push(table.run_ids[i].clone().unwrap_or_default());
        }
        w.write_record(&record).map_err(io_err)?;
    }
    w.flush()?;
    Ok(())
}

fn io_err(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// How anomalous instances are placed into test bags.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyInsertion {
    /// Bags are cut from contiguous runs (grouped by `run_id` and label), so
    /// each anomalous bag's instances come from one anomalous run.
    ContiguousByLabel,
    /// Test bags are built from normal instances; all anomalous instances are
    /// then appended into a randomly chosen half of the test bags.
    RandomIntoHalf,
}

/// Bag composition parameters. Training bags always take the earliest normal
/// instances; the counts are configuration because the source datasets only
/// pin them per experiment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BagCompositionSpec {
    pub normal_bag_size: usize,
    pub anomalous_bag_size: usize,
    pub n_train_bags: usize,
    pub anomaly_insertion: AnomalyInsertion,
    pub seed: u64,
}

/// A composed dataset plus any non-fatal composition warnings.
#[derive(Debug, Clone)]
pub struct Composition {
    pub dataset: Dataset,
    pub warnings: Vec<String>,
}

/// Build training and test bags from a labeled instance table.
///
/// Training bags contain only normal instances; every instance lands in at
/// most one bag; bag labels follow the witness rule (anomalous iff the bag
/// holds at least one anomalous instance). Deterministic per seed.
pub fn compose_bags(table: &InstanceTable, spec: &BagCompositionSpec) -> Result<Composition> {
    if spec.normal_bag_size < 2 || spec.anomalous_bag_size < 2 {
        return Err(Error::Config("bag sizes must be at least 2".into()));
    }
    if spec.n_train_bags == 0 {
        return Err(Error::Config("at least one training bag is required".into()));
    }
    if let Some(i) = table.labels.iter().position(|l| l.is_none()) {
        return Err(Error::Config(format!(
            "row {i} has no label; composition requires a label column"
        )));
    }

    match spec.anomaly_insertion {
        AnomalyInsertion::RandomIntoHalf => compose_random_into_half(table, spec),
        AnomalyInsertion::ContiguousByLabel => compose_contiguous(table, spec),
    }
}

fn compose_random_into_half(table: &InstanceTable, spec: &BagCompositionSpec) -> Result<Composition> {
    let normals: Vec<usize> = (0..table.len())
        .filter(|&i| table.labels[i] == Some(Label::Normal))
        .collect();
    let anomalies: Vec<usize> = (0..table.len())
        .filter(|&i| table.labels[i] == Some(Label::Anomalous))
        .collect();

    let needed = spec.n_train_bags * spec.normal_bag_size;
    if normals.len() < needed {
        return Err(Error::InsufficientInstances {
            kind: "normal",
            needed,
            have: normals.len(),
        });
    }

    let mut warnings = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let train_rows = &normals[..needed];
    let remaining = &normals[needed..];
    let n_test = remaining.len() / spec.normal_bag_size;
    if n_test == 0 {
        return Err(Error::InsufficientInstances {
            kind: "normal test",
            needed: spec.normal_bag_size,
            have: remaining.len(),
        });
    }

    // Contents of each test bag, as table row indices.
    let mut test_rows: Vec<Vec<usize>> = (0..n_test)
        .map(|b| remaining[b * spec.normal_bag_size..(b + 1) * spec.normal_bag_size].to_vec())
        .collect();

    let mut bag_order: Vec<usize> = (0..n_test).collect();
    shuffle(&mut bag_order, &mut rng);
    let chosen = &bag_order[..n_test / 2];

    if anomalies.is_empty() {
        warnings.push("no anomalous instances; all test bags are Normal".to_string());
    } else {
        if anomalies.len() < chosen.len() {
            warnings.push(format!(
                "only {} anomalous instances for {} target bags; some stay Normal",
                anomalies.len(),
                chosen.len()
            ));
        }
        for (i, &row) in anomalies.iter().enumerate() {
            // The first pass deals one anomaly per chosen bag so "half the
            // bags anomalous" holds exactly whenever enough anomalies exist.
            let bag = if i < chosen.len() {
                chosen[i]
            } else {
                chosen[rng.gen_range(0..chosen.len())]
            };
            test_rows[bag].push(row);
        }
    }

    let mut next_instance = 0usize;
    let mut next_bag = 0usize;
    let training_bags = chunk_bags(
        table,
        train_rows.chunks(spec.normal_bag_size),
        Label::Normal,
        &mut next_instance,
        &mut next_bag,
    );
    let mut test_bags = Vec::with_capacity(n_test);
    for rows in &test_rows {
        let label = if rows
            .iter()
            .any(|&r| table.labels[r] == Some(Label::Anomalous))
        {
            Label::Anomalous
        } else {
            Label::Normal
        };
        test_bags.push(build_bag(table, rows, label, &mut next_instance, &mut next_bag));
    }

    Ok(Composition {
        dataset: Dataset::new(training_bags, test_bags, table.feature_dim),
        warnings,
    })
}

fn compose_contiguous(table: &InstanceTable, spec: &BagCompositionSpec) -> Result<Composition> {
    // Consecutive rows with the same run id and label form a run.
    let mut runs: Vec<(Label, Vec<usize>)> = Vec::new();
    for i in 0..table.len() {
        let label = table.labels[i].expect("labels checked");
        let same_run = i > 0
            && table.run_ids[i] == table.run_ids[i - 1]
            && table.labels[i] == table.labels[i - 1];
        if same_run {
            runs.last_mut().expect("run exists").1.push(i);
        } else {
            runs.push((label, vec![i]));
        }
    }

    let mut normal_chunks: Vec<Vec<usize>> = Vec::new();
    let mut anomalous_chunks: Vec<Vec<usize>> = Vec::new();
    for (label, rows) in &runs {
        let size = match label {
            Label::Normal => spec.normal_bag_size,
            Label::Anomalous => spec.anomalous_bag_size,
        };
        for chunk in rows.chunks(size) {
            if chunk.len() < size {
                break; // trailing partial window of the run is dropped
            }
            match label {
                Label::Normal => normal_chunks.push(chunk.to_vec()),
                Label::Anomalous => anomalous_chunks.push(chunk.to_vec()),
            }
        }
    }

    if normal_chunks.len() <= spec.n_train_bags {
        return Err(Error::InsufficientInstances {
            kind: "normal bag",
            needed: spec.n_train_bags + 1,
            have: normal_chunks.len(),
        });
    }

    let mut warnings = Vec::new();
    if anomalous_chunks.is_empty() {
        warnings.push("no anomalous runs; all test bags are Normal".to_string());
    }

    let mut next_instance = 0usize;
    let mut next_bag = 0usize;
    let training_bags = chunk_bags(
        table,
        normal_chunks[..spec.n_train_bags].iter().map(|c| c.as_slice()),
        Label::Normal,
        &mut next_instance,
        &mut next_bag,
    );
    let mut test_bags = Vec::new();
    for rows in &normal_chunks[spec.n_train_bags..] {
        test_bags.push(build_bag(table, rows, Label::Normal, &mut next_instance, &mut next_bag));
    }
    for rows in &anomalous_chunks {
        test_bags.push(build_bag(table, rows, Label::Anomalous, &mut next_instance, &mut next_bag));
    }

    Ok(Composition {
        dataset: Dataset::new(training_bags, test_bags, table.feature_dim),
        warnings,
    })
}

fn chunk_bags<'a>(
    table: &InstanceTable,
    chunks: impl Iterator<Item = &'a [usize]>,
    label: Label,
    next_instance: &mut usize,
    next_bag: &mut usize,
) -> Vec<Bag> {
    chunks
        .map(|rows| build_bag(table, rows, label, next_instance, next_bag))
        .collect()
}

fn build_bag(
    table: &InstanceTable,
    rows: &[usize],
    label: Label,
    next_instance: &mut usize,
    next_bag: &mut usize,
) -> Bag {
    let instances = rows
        .iter()
        .map(|&r| {
            let inst = Instance::new(*next_instance, table.rows[r].clone());
            *next_instance += 1;
            inst
        })
        .collect();
    let bag = Bag::new(*next_bag, instances, Some(label));
    *next_bag += 1;
    bag
}

/// Parameters of the synthetic stand-in generator.
///
/// Normal instances are standard Gaussian; witness instances are shifted by
/// `anomaly_shift` along one fixed random unit direction. In every anomalous
/// bag, `witness_fraction` of the instances are designated witnesses, and a
/// `label_noise` fraction of those are regenerated as plain normals while the
/// bag keeps its anomalous label (the noisy-label regime). The witness count
/// is `max(1, round(witness_fraction * bag_size))` and the regenerated count
/// `floor(label_noise * witness_count)`, so at least one true witness remains
/// for any label noise below 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub feature_dim: usize,
    pub n_train_bags: usize,
    pub n_test_bags_per_class: usize,
    pub bag_size: usize,
    pub anomaly_shift: f64,
    pub witness_fraction: f64,
    pub label_noise: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        if self.feature_dim == 0 {
            return Err(Error::Config("feature_dim must be positive".into()));
        }
        if self.n_train_bags == 0 || self.n_test_bags_per_class == 0 {
            return Err(Error::Config("bag counts must be positive".into()));
        }
        if self.bag_size < 2 {
            return Err(Error::Config("bag_size must be at least 2".into()));
        }
        if !(self.witness_fraction > 0.0 && self.witness_fraction <= 1.0) {
            return Err(Error::Config("witness_fraction must lie in (0, 1]".into()));
        }
        if !(0.0..1.0).contains(&self.label_noise) {
            return Err(Error::Config("label_noise must lie in [0, 1)".into()));
        }
        if !self.anomaly_shift.is_finite() {
            return Err(Error::Config("anomaly_shift must be finite".into()));
        }
        Ok(())
    }

    pub fn witness_count(&self) -> usize {
        ((self.witness_fraction * self.bag_size as f64).round() as usize).max(1)
    }

    pub fn regenerated_count(&self) -> usize {
        (self.label_noise * self.witness_count() as f64).floor() as usize
    }
}

/// Deterministic synthetic dataset per the spec's shift/witness/noise model.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Fixed random unit direction of the anomaly shift.
    let direction = {
        let mut v: Vec<f64>;
        loop {
            v = (0..spec.feature_dim)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                for x in &mut v {
                    *x /= norm;
                }
                break;
            }
        }
        v
    };

    let mut next_id = 0usize;
    let mut bag_id = 0usize;

    let mut training_bags = Vec::with_capacity(spec.n_train_bags);
    for _ in 0..spec.n_train_bags {
        training_bags.push(gaussian_bag(spec, Label::Normal, &mut bag_id, &mut next_id, &mut rng));
    }

    let mut test_bags = Vec::with_capacity(2 * spec.n_test_bags_per_class);
    for _ in 0..spec.n_test_bags_per_class {
        test_bags.push(gaussian_bag(spec, Label::Normal, &mut bag_id, &mut next_id, &mut rng));
    }

    let witness_count = spec.witness_count().min(spec.bag_size);
    let true_witnesses = witness_count - spec.regenerated_count().min(witness_count);
    for _ in 0..spec.n_test_bags_per_class {
        let mut positions: Vec<usize> = (0..spec.bag_size).collect();
        shuffle(&mut positions, &mut rng);
        let witness_positions = &positions[..witness_count];

        let mut instances = Vec::with_capacity(spec.bag_size);
        for pos in 0..spec.bag_size {
            let mut features = sample_gaussian(spec.feature_dim, &mut rng);
            // Positions beyond `true_witnesses` in the shuffled prefix are
            // the regenerated mimics: plain normals in an anomalous bag.
            if witness_positions[..true_witnesses].contains(&pos) {
                for (f, d) in features.iter_mut().zip(&direction) {
                    *f += spec.anomaly_shift * d;
                }
            }
            instances.push(Instance::new(next_id, features));
            next_id += 1;
        }
        test_bags.push(Bag::new(bag_id, instances, Some(Label::Anomalous)));
        bag_id += 1;
    }

    Ok(Dataset::new(training_bags, test_bags, spec.feature_dim))
}

fn sample_gaussian(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

fn gaussian_bag(
    spec: &SyntheticSpec,
    label: Label,
    bag_id: &mut usize,
    next_id: &mut usize,
    rng: &mut ChaCha8Rng,
) -> Bag {
    let instances = (0..spec.bag_size)
        .map(|_| {
            let inst = Instance::new(*next_id, sample_gaussian(spec.feature_dim, rng));
            *next_id += 1;
            inst
        })
        .collect();
    let bag = Bag::new(*bag_id, instances, Some(label));
    *bag_id += 1;
    bag
}

/// Write one split of a dataset: features, the bag label on every row, and
/// the bag id in the `run_id` column.
pub fn write_bags_csv(bags: &[Bag], feature_dim: usize, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = (0..feature_dim).map(|i| format!("f{i}")).collect();
    header.push("label".into());
    header.push("run_id".into());
    w.write_record(&header).map_err(io_err)?;
    for bag in bags {
        let label = match bag.label {
            Some(Label::Anomalous) => "1",
            _ => "0",
        };
        for inst in &bag.instances {
            let mut record: Vec<String> = inst.features.iter().map(|v| v.to_string()).collect();
            record.push(label.to_string());
            record.push(bag.id.0.to_string());
            w.write_record(&record).map_err(io_err)?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a dataset as `train.csv` and `test.csv` in an output directory.
pub fn write_dataset_csv(dataset: &Dataset, train_path: &Path, test_path: &Path) -> Result<()> {
    write_bags_csv(&dataset.training_bags, dataset.feature_dim, train_path)?;
    write_bags_csv(&dataset.test_bags, dataset.feature_dim, test_path)?;
    Ok(())
}

/// Inverse of [`write_dataset_csv`]: rebuild bags by grouping consecutive
/// rows on `run_id`, with instance and bag ids reassigned in canonical
/// (train-then-test) order so a written dataset reads back identical.
pub fn read_dataset_csv(train_path: &Path, test_path: &Path) -> Result<Dataset> {
    let train = load_feature_csv(train_path, None)?;
    let test = load_feature_csv(test_path, Some(train.feature_dim))?;

    let mut next_instance = 0usize;
    let mut next_bag = 0usize;
    let training_bags = table_to_bags(&train, train_path, &mut next_instance, &mut next_bag)?;
    let test_bags = table_to_bags(&test, test_path, &mut next_instance, &mut next_bag)?;
    Ok(Dataset::new(training_bags, test_bags, train.feature_dim))
}

fn table_to_bags(
    table: &InstanceTable,
    path: &Path,
    next_instance: &mut usize,
    next_bag: &mut usize,
) -> Result<Vec<Bag>> {
    let mut bags: Vec<Bag> = Vec::new();
    let mut current_run: Option<&str> = None;
    for i in 0..table.len() {
        let run = table.run_ids[i].as_deref().ok_or_else(|| {
            csv_error(path, 0, format!("row {i} has no run_id; cannot group into bags"))
        })?;
        let anomalous = table.labels[i] == Some(Label::Anomalous);
        if current_run != Some(run) {
            bags.push(Bag::new(*next_bag, Vec::new(), Some(Label::Normal)));
            *next_bag += 1;
            current_run = Some(run);
        }
        let bag = bags.last_mut().expect("bag exists");
        bag.instances.push(Instance::new(*next_instance, table.rows[i].clone()));
        *next_instance += 1;
        if anomalous {
            bag.label = Some(Label::Anomalous);
        }
    }
    Ok(bags)
}

/// Fisher-Yates with the crate's seeded generator.
fn shuffle(values: &mut [usize], rng: &mut ChaCha8Rng) {
    for i in (1..values.len()).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn table(rows: Vec<(Vec<f64>, Label)>) -> InstanceTable {
        InstanceTable {
            feature_dim: rows[0].0.len(),
            labels: rows.iter().map(|(_, l)| Some(*l)).collect(),
            run_ids: vec![None; rows.len()],
            rows: rows.into_iter().map(|(r, _)| r).collect(),
        }
    }

    #[test]
    fn windowing_counts_and_truncation() {
        let spec = WindowingSpec::non_overlapping(400);
        let signal: Vec<f64> = (0..1200).map(|i| i as f64).collect();
        assert_eq!(window_signal(&signal, &spec).unwrap().len(), 3);

        let signal: Vec<f64> = (0..1000).map(|i| i as f64).collect();
        let windows = window_signal(&signal, &spec).unwrap();
        assert_eq!(windows.len(), 2);

        let signal: Vec<f64> = (0..400).map(|i| i as f64).collect();
        let windows = window_signal(&signal, &spec).unwrap();
        assert_eq!(windows.len(), 1);
        assert_eq!(windows[0].features, signal);

        assert!(window_signal(&signal[..399], &spec).is_err());
    }

    #[test]
    fn snr_noise_is_deterministic_and_rejects_zero_power() {
        let signal: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let a = corrupt_snr(&signal, 10.0, 7).unwrap();
        let b = corrupt_snr(&signal, 10.0, 7).unwrap();
        assert_eq!(a, b);
        let c = corrupt_snr(&signal, 10.0, 8).unwrap();
        assert_ne!(a, c);

        assert!(matches!(
            corrupt_snr(&[0.0; 10], 10.0, 1),
            Err(Error::ZeroPowerSignal)
        ));
    }

    #[test]
    fn measured_snr_tracks_the_target() {
        let signal: Vec<f64> = (0..20_000).map(|i| (i as f64 * 0.05).sin()).collect();
        for &target in &[20.0, 10.0, 5.0, 1.0] {
            let noisy = corrupt_snr(&signal, target, 3).unwrap();
            let p_signal = signal.iter().map(|v| v * v).sum::<f64>() / signal.len() as f64;
            let p_noise = signal
                .iter()
                .zip(&noisy)
                .map(|(s, n)| (n - s) * (n - s))
                .sum::<f64>()
                / signal.len() as f64;
            let measured = 10.0 * (p_signal / p_noise).log10();
            assert!(
                (measured - target).abs() <= 0.5,
                "target {target} dB, measured {measured} dB"
            );
        }
    }

    #[test]
    fn random_into_half_hits_exact_bag_counts() {
        // 104 test bags of size 50 from 5200 + 5200 normals; 518 anomalies
        // land in exactly half of them.
        let mut rows = Vec::new();
        for _ in 0..10_400 {
            rows.push((vec![0.0, 0.0], Label::Normal));
        }
        for _ in 0..518 {
            rows.push((vec![1.0, 1.0], Label::Anomalous));
        }
        let spec = BagCompositionSpec {
            normal_bag_size: 50,
            anomalous_bag_size: 50,
            n_train_bags: 104,
            anomaly_insertion: AnomalyInsertion::RandomIntoHalf,
            seed: 5,
        };
        let comp = compose_bags(&table(rows), &spec).unwrap();
        let d = &comp.dataset;
        assert_eq!(d.training_bags.len(), 104);
        assert_eq!(d.test_bags.len(), 104);
        let anomalous = d
            .test_bags
            .iter()
            .filter(|b| b.label == Some(Label::Anomalous))
            .count();
        assert_eq!(anomalous, 52);
        // Bags marked anomalous really contain an inserted instance.
        for bag in &d.test_bags {
            let holds_witness = bag.instances.iter().any(|i| i.features == vec![1.0, 1.0]);
            assert_eq!(bag.label == Some(Label::Anomalous), holds_witness);
        }
    }

    #[test]
    fn no_anomalies_warns_and_keeps_all_bags_normal() {
        let rows = (0..100).map(|_| (vec![0.5], Label::Normal)).collect();
        let spec = BagCompositionSpec {
            normal_bag_size: 10,
            anomalous_bag_size: 10,
            n_train_bags: 5,
            anomaly_insertion: AnomalyInsertion::RandomIntoHalf,
            seed: 1,
        };
        let comp = compose_bags(&table(rows), &spec).unwrap();
        assert!(!comp.warnings.is_empty());
        assert!(comp
            .dataset
            .test_bags
            .iter()
            .all(|b| b.label == Some(Label::Normal)));
    }

    #[test]
    fn contiguous_composition_keeps_runs_intact() {
        let mut t = InstanceTable {
            feature_dim: 1,
            rows: Vec::new(),
            labels: Vec::new(),
            run_ids: Vec::new(),
        };
        // One long normal run, then two damaged-state runs.
        for i in 0..40 {
            t.rows.push(vec![i as f64]);
            t.labels.push(Some(Label::Normal));
            t.run_ids.push(Some("normal".into()));
        }
        for run in ["dmg1", "dmg2"] {
            for i in 0..10 {
                t.rows.push(vec![1000.0 + i as f64]);
                t.labels.push(Some(Label::Anomalous));
                t.run_ids.push(Some(run.into()));
            }
        }
        let spec = BagCompositionSpec {
            normal_bag_size: 10,
            anomalous_bag_size: 5,
            n_train_bags: 2,
            anomaly_insertion: AnomalyInsertion::ContiguousByLabel,
            seed: 0,
        };
        let comp = compose_bags(&t, &spec).unwrap();
        let d = &comp.dataset;
        assert_eq!(d.training_bags.len(), 2);
        // 2 leftover normal bags + 2 bags per damaged run.
        assert_eq!(d.test_bags.len(), 2 + 4);
        for bag in d.test_bags.iter().filter(|b| b.label == Some(Label::Anomalous)) {
            // All instances of an anomalous bag come from one run: values are
            // consecutive within a single damaged block.
            let vals: Vec<f64> = bag.instances.iter().map(|i| i.features[0]).collect();
            let base = vals[0];
            assert!(vals.iter().enumerate().all(|(i, &v)| v == base + i as f64));
        }
    }

    #[test]
    fn every_instance_lands_in_at_most_one_bag() {
        let mut rows = Vec::new();
        for i in 0..200 {
            rows.push((vec![i as f64], Label::Normal));
        }
        for i in 0..30 {
            rows.push((vec![1000.0 + i as f64], Label::Anomalous));
        }
        let spec = BagCompositionSpec {
            normal_bag_size: 10,
            anomalous_bag_size: 10,
            n_train_bags: 8,
            anomaly_insertion: AnomalyInsertion::RandomIntoHalf,
            seed: 11,
        };
        let comp = compose_bags(&table(rows), &spec).unwrap();
        let mut seen = HashSet::new();
        let mut values = HashSet::new();
        for bag in comp
            .dataset
            .training_bags
            .iter()
            .chain(&comp.dataset.test_bags)
        {
            if bag.label == Some(Label::Normal) {
                assert!(bag
                    .instances
                    .iter()
                    .all(|i| i.features[0] < 1000.0));
            }
            for inst in &bag.instances {
                assert!(seen.insert(inst.id), "duplicate instance id {}", inst.id);
                assert!(
                    values.insert(inst.features[0].to_bits()),
                    "source row used twice: {}",
                    inst.features[0]
                );
            }
        }
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let spec = SyntheticSpec {
            feature_dim: 4,
            n_train_bags: 5,
            n_test_bags_per_class: 5,
            bag_size: 10,
            anomaly_shift: 3.0,
            witness_fraction: 0.2,
            label_noise: 0.0,
            seed: 99,
        };
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.training_bags.len(), 5);
        assert_eq!(a.test_bags.len(), 10);
        assert!(crate::types::validate_dataset(&a).is_empty());
    }

    #[test]
    fn witness_counts_follow_the_rounding_rules() {
        let mut spec = SyntheticSpec {
            feature_dim: 2,
            n_train_bags: 1,
            n_test_bags_per_class: 1,
            bag_size: 20,
            anomaly_shift: 1.0,
            witness_fraction: 0.3,
            label_noise: 0.8,
            seed: 0,
        };
        assert_eq!(spec.witness_count(), 6);
        assert_eq!(spec.regenerated_count(), 4);
        spec.label_noise = 0.9;
        assert_eq!(spec.regenerated_count(), 5);
        spec.witness_fraction = 0.01; // rounds to 0, clamped to 1 witness
        assert_eq!(spec.witness_count(), 1);
        assert_eq!(spec.regenerated_count(), 0);
    }

    #[test]
    fn dataset_csv_round_trip_is_exact() {
        let spec = SyntheticSpec {
            feature_dim: 3,
            n_train_bags: 4,
            n_test_bags_per_class: 3,
            bag_size: 5,
            anomaly_shift: 2.5,
            witness_fraction: 0.4,
            label_noise: 0.5,
            seed: 21,
        };
        let d = generate_synthetic(&spec).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let train = dir.path().join("train.csv");
        let test = dir.path().join("test.csv");
        write_dataset_csv(&d, &train, &test).unwrap();
        let restored = read_dataset_csv(&train, &test).unwrap();
        assert_eq!(d, restored);
    }

    #[test]
    fn feature_csv_reports_bad_rows_with_line_numbers() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        std::fs::write(&path, "f0,f1,label\n1.0,2.0,0\nabc,3.0,1\n").unwrap();
        let err = load_feature_csv(&path, None).unwrap_err();
        match err {
            Error::Csv { line, message, .. } => {
                assert_eq!(line, 3);
                assert!(message.contains("abc"));
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn feature_csv_round_trip_preserves_the_table() {
        let t = InstanceTable {
            feature_dim: 2,
            rows: vec![vec![0.1, -2.5], vec![1e-17, 3.25]],
            labels: vec![Some(Label::Normal), Some(Label::Anomalous)],
            run_ids: vec![Some("a".into()), Some("b".into())],
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_feature_csv(&t, &path).unwrap();
        let restored = load_feature_csv(&path, Some(2)).unwrap();
        assert_eq!(t, restored);
    }
}
