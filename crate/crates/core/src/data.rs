//! Synthetic datasets, the Bayes oracle for checkered Gaussian mixtures,
//! and CSV storage.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use ndarray::{Array2, ArrayView1};
use rand::Rng;

use crate::error::{check_len, Error, Result};
use crate::numeric::log_sum_exp_unchecked;
use crate::rng::{stream, BoxMuller};
use crate::simplex::SimplexLaw;

/// Feature rows with integer labels in `0..classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    classes: usize,
    pub generator: String,
    pub seed: Option<u64>,
}

impl LabeledDataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, classes: usize) -> Result<Self> {
        check_len("dataset labels", features.nrows(), labels.len())?;
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        if let Some(bad) = labels.iter().find(|&&y| y >= classes) {
            return Err(Error::InvalidArgument(format!("label {bad} outside 0..{classes}")));
        }
        Ok(Self { features, labels, classes, generator: String::new(), seed: None })
    }

    fn tagged(mut self, generator: &str, seed: Option<u64>) -> Self {
        self.generator = generator.to_string();
        self.seed = seed;
        self
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.features.row(i)
    }

    /// Copy with a constant-1 feature appended, giving linear models a bias.
    pub fn with_bias_column(&self) -> Self {
        let (n, d) = self.features.dim();
        let mut features = Array2::ones((n, d + 1));
        features.slice_mut(ndarray::s![.., ..d]).assign(&self.features);
        Self { features, ..self.clone() }
    }
}

/// Mixture over the lattice `μ0 + Σ_k υ_k μ_k`, `υ ∈ {0..c-1}^m`, where
/// class `y` owns the components with `|υ| ≡ y (mod c)` in equal shares.
/// Each component is `N(mean, scale·I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckeredGmmSpec {
    mean0: Vec<f64>,
    directions: Vec<Vec<f64>>,
    scale: f64,
    classes: usize,
    prior: SimplexLaw,
}

/// Directions count as orthogonal when `|μ_iᵀμ_j| ≤` this.
pub const ORTHOGONALITY_TOL: f64 = 1e-9;

impl CheckeredGmmSpec {
    pub fn new(
        mean0: Vec<f64>,
        directions: Vec<Vec<f64>>,
        scale: f64,
        classes: usize,
        prior: SimplexLaw,
    ) -> Result<Self> {
        let d = mean0.len();
        if d == 0 {
            return Err(Error::Empty("mixture dimension"));
        }
        if directions.is_empty() {
            return Err(Error::Empty("mixture needs m >= 1 directions"));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("covariance scale must be positive, got {scale}")));
        }
        if classes < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 classes, got {classes}")));
        }
        check_len("class prior", classes, prior.len())?;
        for dir in &directions {
            check_len("mixture direction", d, dir.len())?;
        }
        for i in 0..directions.len() {
            for j in i + 1..directions.len() {
                let ip = crate::numeric::dot(&directions[i], &directions[j]);
                if ip.abs() > ORTHOGONALITY_TOL {
                    return Err(Error::InvalidArgument(format!(
                        "directions {i} and {j} are not orthogonal (inner product {ip})"
                    )));
                }
            }
        }
        let total = (classes as f64).powi(directions.len() as i32);
        if total > crate::checkered::ENUMERATION_LIMIT {
            return Err(Error::EnumerationLimit { components: total });
        }
        Ok(Self { mean0, directions, scale, classes, prior })
    }

    /// Two classes of two Gaussians in the plane: class 0 at `(1,1)` and
    /// `(-1,-1)`, class 1 at `(1,-1)` and `(-1,1)`, covariance `0.2·I`.
    pub fn xor_gmm() -> Self {
        Self::new(
            vec![-1.0, -1.0],
            vec![vec![2.0, 0.0], vec![0.0, 2.0]],
            0.2,
            2,
            SimplexLaw::uniform(2).expect("two classes"),
        )
        .expect("valid XOR mixture")
    }

    pub fn mean0(&self) -> &[f64] {
        &self.mean0
    }

    pub fn directions(&self) -> &[Vec<f64>] {
        &self.directions
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn prior(&self) -> &SimplexLaw {
        &self.prior
    }

    pub fn m(&self) -> usize {
        self.directions.len()
    }

    pub fn d(&self) -> usize {
        self.mean0.len()
    }

    /// Same mixture with every mean shifted by `offset`.
    pub fn translated(&self, offset: &[f64]) -> Result<Self> {
        check_len("translation", self.d(), offset.len())?;
        let mut out = self.clone();
        for (m, o) in out.mean0.iter_mut().zip(offset) {
            *m += o;
        }
        Ok(out)
    }

    fn component_mean(&self, upsilon: &[usize]) -> Vec<f64> {
        let mut mean = self.mean0.clone();
        for (&u, dir) in upsilon.iter().zip(&self.directions) {
            for (m, v) in mean.iter_mut().zip(dir) {
                *m += u as f64 * v;
            }
        }
        mean
    }

    /// `-‖x - mean‖² / (2·scale)`, dropping the shared normalizer.
    fn log_kernel(&self, x: &[f64], mean: &[f64]) -> f64 {
        let sq: f64 = x.iter().zip(mean).map(|(a, b)| (a - b).powi(2)).sum();
        -sq / (2.0 * self.scale)
    }
}

fn draw_index<R: Rng + ?Sized>(rng: &mut R, law: &SimplexLaw) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in law.weights().iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    law.weights().iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// `n` draws; row `i` reads ChaCha stream `i` of `seed`, so rows never
/// depend on `n`.
pub fn sample_checkered_gmm(spec: &CheckeredGmmSpec, n: usize, seed: u64) -> Result<LabeledDataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("need n >= 1 samples".into()));
    }
    let (m, c, d) = (spec.m(), spec.classes, spec.d());
    let sd = spec.scale.sqrt();
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let mut rng = stream(seed, i as u64);
        let y = draw_index(&mut rng, &spec.prior);
        let mut upsilon: Vec<usize> = (0..m - 1).map(|_| rng.random_range(0..c)).collect();
        let partial: usize = upsilon.iter().sum();
        upsilon.push((y + c - partial % c) % c);
        let mean = spec.component_mean(&upsilon);
        let noise = BoxMuller::new().vector(&mut rng, d);
        for (j, (mu, e)) in mean.iter().zip(&noise).enumerate() {
            features[[i, j]] = mu + sd * e;
        }
        labels.push(y);
    }
    Ok(LabeledDataset::new(features, labels, c)?.tagged("checkered-gmm", Some(seed)))
}

/// Class posterior at `x` by brute-force Bayes over all `c^m` components,
/// in the log domain.
pub fn bayes_posterior_oracle(spec: &CheckeredGmmSpec, x: &[f64]) -> Result<SimplexLaw> {
    check_len("oracle point", spec.d(), x.len())?;
    let (m, c) = (spec.m(), spec.classes);
    let share = ((m - 1) as f64) * (c as f64).ln();
    let mut per_class = vec![Vec::new(); c];
    let mut upsilon = vec![0usize; m];
    loop {
        let y = upsilon.iter().sum::<usize>() % c;
        let log_prior = spec.prior.weights()[y].ln() - share;
        per_class[y].push(log_prior + spec.log_kernel(x, &spec.component_mean(&upsilon)));
        // Odometer increment over {0..c-1}^m.
        let mut k = 0;
        while k < m {
            upsilon[k] += 1;
            if upsilon[k] < c {
                break;
            }
            upsilon[k] = 0;
            k += 1;
        }
        if k == m {
            break;
        }
    }
    let logs: Vec<f64> = per_class.iter().map(|v| log_sum_exp_unchecked(v)).collect();
    let total = log_sum_exp_unchecked(&logs);
    Ok(SimplexLaw::from_trusted(logs.iter().map(|l| (l - total).exp()).collect()))
}

/// Fraction of rows whose label is the oracle's most probable class.
pub fn oracle_accuracy(spec: &CheckeredGmmSpec, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::Empty("oracle accuracy of an empty dataset"));
    }
    let mut hits = 0usize;
    for (i, &y) in data.labels().iter().enumerate() {
        let x = data.row(i).to_vec();
        if bayes_posterior_oracle(spec, &x)?.argmax() == y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Affine arguments `(W, b)` with `P(Y = 0 | x) = Ξ_m(Wx + b)` for a binary
/// mixture with uniform prior. Each `z_k(x)` is the log-density gap between
/// the base component and the one shifted by `μ_k`; being affine, it is
/// recovered exactly from its values at `x = 0` and `x = e_i`.
pub fn checkoid_affine_posterior(spec: &CheckeredGmmSpec) -> Result<(Array2<f64>, Vec<f64>)> {
    if spec.classes != 2 {
        return Err(Error::InvalidArgument("affine checkoid form needs two classes".into()));
    }
    if spec.prior.weights().iter().any(|&w| (w - 0.5).abs() > 1e-15) {
        return Err(Error::InvalidArgument("affine checkoid form needs a uniform prior".into()));
    }
    let (m, d) = (spec.m(), spec.d());
    let base = spec.mean0.clone();
    let z = |k: usize, x: &[f64]| {
        let mut upsilon = vec![0; m];
        upsilon[k] = 1;
        spec.log_kernel(x, &base) - spec.log_kernel(x, &spec.component_mean(&upsilon))
    };
    let origin = vec![0.0; d];
    let mut w = Array2::zeros((m, d));
    let mut b = vec![0.0; m];
    for k in 0..m {
        b[k] = z(k, &origin);
        for i in 0..d {
            let mut e = origin.clone();
            e[i] = 1.0;
            w[[k, i]] = z(k, &e) - b[k];
        }
    }
    Ok((w, b))
}

pub const ROCK: usize = 0;
pub const PAPER: usize = 1;
pub const SCISSORS: usize = 2;

/// The three rock-paper-scissors duels `(paper, rock)`, `(scissors, paper)`,
/// `(rock, scissors)`, encoded as `e_first - e_second`; label 1 means the
/// first item wins, which it always does.
pub fn rps_dataset() -> LabeledDataset {
    let duels = [(PAPER, ROCK), (SCISSORS, PAPER), (ROCK, SCISSORS)];
    let mut features = Array2::zeros((3, 3));
    for (row, &(winner, loser)) in duels.iter().enumerate() {
        features[[row, winner]] = 1.0;
        features[[row, loser]] = -1.0;
    }
    LabeledDataset::new(features, vec![1; 3], 2).expect("valid duels").tagged("rps", None)
}

/// Shortest decimal that parses back to the same `f64`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-5..1e16).contains(&a) {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

/// Writes `f0,…,f{d-1},label` then one row per example.
pub fn save_csv(data: &LabeledDataset, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(File::create(path)?);
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(&mut out);
    let mut header: Vec<String> = (0..data.dim()).map(|j| format!("f{j}")).collect();
    header.push("label".into());
    writer.write_record(&header).map_err(csv_error)?;
    for (row, y) in data.features.rows().into_iter().zip(&data.labels) {
        let mut record: Vec<String> = row.iter().map(|&v| format_float(v)).collect();
        record.push(y.to_string());
        writer.write_record(&record).map_err(csv_error)?;
    }
    writer.flush()?;
    drop(writer);
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse { line, message: format!("{other:?}") },
    }
}

/// Reads a file written by [`save_csv`]; labels must lie in `0..classes`.
pub fn load_csv(path: &Path, classes: usize) -> Result<LabeledDataset> {
    let mut reader =
        csv::ReaderBuilder::new().has_headers(false).flexible(true).from_path(path).map_err(csv_error)?;
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or(Error::Parse { line: 1, message: "missing header".into() })?
        .map_err(csv_error)?;
    let columns = header.len();
    let well_formed = columns >= 1
        && header.get(columns - 1) == Some("label")
        && (0..columns - 1).all(|j| header.get(j) == Some(format!("f{j}").as_str()));
    if !well_formed {
        return Err(Error::Parse { line: 1, message: "header must be f0,...,f{d-1},label".into() });
    }
    let d = columns - 1;
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != columns {
            return Err(Error::Parse {
                line,
                message: format!("expected {columns} fields, found {}", record.len()),
            });
        }
        for (j, field) in record.iter().take(d).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                line,
                message: format!("column f{j}: not a number: {field:?}"),
            })?;
            values.push(v);
        }
        let raw = &record[d];
        let y: usize = raw.trim().parse().map_err(|_| Error::Parse {
            line,
            message: format!("label is not a non-negative integer: {raw:?}"),
        })?;
        if y >= classes {
            return Err(Error::Parse { line, message: format!("label {y} outside 0..{classes}") });
        }
        labels.push(y);
    }
    let features = Array2::from_shape_vec((labels.len(), d), values).expect("row lengths checked");
    Ok(LabeledDataset::new(features, labels, classes)?.tagged("csv", None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::checkered::checkoid;

    #[test]
    fn xor_gmm_oracle_values() {
        let spec = CheckeredGmmSpec::xor_gmm();
        let p = bayes_posterior_oracle(&spec, &[1.0, 1.0]).unwrap();
        assert!(p.weights()[0] > 0.99);
        let mid = bayes_posterior_oracle(&spec, &[0.0, 0.0]).unwrap();
        assert!((mid.weights()[0] - 0.5).abs() < 1e-15);
        let q = bayes_posterior_oracle(&spec, &[0.8, -1.1]).unwrap();
        assert!(q.weights()[1] > 0.99);
    }

    #[test]
    fn affine_form_for_xor() {
        let spec = CheckeredGmmSpec::xor_gmm();
        let (w, b) = checkoid_affine_posterior(&spec).unwrap();
        // z_k = -2 x_k / 0.2 for the symmetric layout.
        assert!((w[[0, 0]] + 10.0).abs() < 1e-12 && w[[0, 1]].abs() < 1e-12);
        assert!((w[[1, 1]] + 10.0).abs() < 1e-12 && b.iter().all(|v| v.abs() < 1e-12));
        let x = [0.3, -0.05];
        let z = [w[[0, 0]] * x[0], w[[1, 1]] * x[1]];
        let p = bayes_posterior_oracle(&spec, &x).unwrap();
        assert!((checkoid(&z).unwrap() - p.weights()[0]).abs() < 1e-12);
    }

    #[test]
    fn spec_validation() {
        let uni = SimplexLaw::uniform(2).unwrap();
        assert!(CheckeredGmmSpec::new(
            vec![0.0, 0.0],
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            1.0,
            2,
            uni.clone()
        )
        .is_err());
        assert!(CheckeredGmmSpec::new(vec![0.0], vec![vec![1.0]], 0.0, 2, uni.clone()).is_err());
        assert!(CheckeredGmmSpec::new(vec![0.0], vec![vec![1.0]], 1.0, 3, uni).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let spec = CheckeredGmmSpec::xor_gmm();
        let a = sample_checkered_gmm(&spec, 50, 3).unwrap();
        let b = sample_checkered_gmm(&spec, 80, 3).unwrap();
        assert_eq!(a.features().row(10), b.features().row(10));
        assert_eq!(a.labels(), &b.labels()[..50]);
        assert_eq!(a.seed, Some(3));
        assert!(sample_checkered_gmm(&spec, 0, 3).is_err());
    }

    #[test]
    fn rps_rows() {
        let data = rps_dataset();
        assert_eq!(data.features().row(0).to_vec(), vec![-1.0, 1.0, 0.0]);
        assert_eq!(data.features().row(2).to_vec(), vec![1.0, 0.0, -1.0]);
        for row in data.features().rows() {
            assert_eq!(row.sum(), 0.0);
        }
        assert_eq!(data.labels(), &[1, 1, 1]);
    }

    #[test]
    fn float_format_round_trips() {
        for v in [0.1, -2.5e-300, 1e300, 123456.789, f64::MIN_POSITIVE, -0.0, 1.0 / 3.0] {
            let s = format_float(v);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), v.to_bits(), "{s}");
        }
    }

    #[test]
    fn bias_column() {
        let data = rps_dataset().with_bias_column();
        assert_eq!(data.dim(), 4);
        assert_eq!(data.features().column(3).to_vec(), vec![1.0; 3]);
    }
}
