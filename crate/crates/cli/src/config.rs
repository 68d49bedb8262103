//! Flat key-value config files and the spec strings shared with the CLI.
//!
//! The file format is deliberately plain: `[section]` headers, `key = value`
//! lines, `#` comments. Values are the same strings the CLI flags accept,
//! so a config file and a flag line are interchangeable; flags win over the
//! file, the file wins over built-in defaults.

use hitrun_core::{CovarianceSpec, DirectionLaw, Error as CoreError, SecondMomentEstimator};
use nalgebra::{DMatrix, DVector};
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

/// A config-layer failure; exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<CoreError> for ConfigError {
    fn from(e: CoreError) -> Self {
        ConfigError(e.to_string())
    }
}

pub type ConfigResult<T> = Result<T, ConfigError>;

/// Parsed config file: `section -> key -> value`. Keys outside any section
/// land in the empty-string section and apply to every subcommand.
#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> ConfigResult<Self> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[') {
                let name = name
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError(format!("line {}: unterminated section", lineno + 1)))?;
                current = name.trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                ConfigError(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            sections
                .entry(current.clone())
                .or_default()
                .insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { sections })
    }

    pub fn load(path: &Path) -> ConfigResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Value for `key` in `section`, falling back to the global section.
    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .or_else(|| self.sections.get("").and_then(|s| s.get(key)))
            .map(String::as_str)
    }

    /// Reject keys that no subcommand understands (catches typos early; a
    /// malformed config must fail before any output file is created).
    pub fn validate_keys(&self, known_sections: &[&str], known_keys: &[&str]) -> ConfigResult<()> {
        for (section, entries) in &self.sections {
            if !section.is_empty() && !known_sections.contains(&section.as_str()) {
                return Err(ConfigError(format!("unknown section [{section}]")));
            }
            for key in entries.keys() {
                if !known_keys.contains(&key.as_str()) {
                    return Err(ConfigError(format!("unknown key `{key}`")));
                }
            }
        }
        Ok(())
    }
}

/// Parse a comma-separated list of floats.
pub fn parse_f64_list(s: &str) -> ConfigResult<Vec<f64>> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|e| ConfigError(format!("bad number `{t}`: {e}")))
        })
        .collect()
}

/// Covariance spec string: `diag:4,1` or `file:path.csv` (dense CSV matrix).
pub fn parse_covariance(spec: &str) -> ConfigResult<CovarianceSpec> {
    if let Some(rest) = spec.strip_prefix("diag:") {
        let vars = parse_f64_list(rest)?;
        return Ok(CovarianceSpec::diagonal(&vars)?);
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let matrix = read_csv_matrix(Path::new(path))?;
        return Ok(CovarianceSpec::dense(matrix)?);
    }
    Err(ConfigError(format!(
        "covariance must be `diag:v1,v2,...` or `file:path.csv`, got `{spec}`"
    )))
}

/// Direction-law spec string:
/// `uniform` | `axes` | `axes:w1,w2,...` | `rows:matrix.csv` |
/// `support:vectors.csv` (one unit vector per row, optional trailing weight
/// column, uniform weights otherwise).
pub fn parse_direction_law(spec: &str, dim: usize) -> ConfigResult<DirectionLaw> {
    if spec == "uniform" {
        return Ok(DirectionLaw::uniform(dim));
    }
    if spec == "axes" {
        return Ok(DirectionLaw::axes(dim)?);
    }
    if let Some(rest) = spec.strip_prefix("axes:") {
        let weights = parse_f64_list(rest)?;
        if weights.len() != dim {
            return Err(ConfigError(format!(
                "axes weights have length {}, dimension is {dim}",
                weights.len()
            )));
        }
        return Ok(DirectionLaw::axes_weighted(weights)?);
    }
    if let Some(path) = spec.strip_prefix("rows:") {
        let matrix = read_csv_matrix(Path::new(path))?;
        return Ok(DirectionLaw::row_weighted(matrix)?);
    }
    if let Some(path) = spec.strip_prefix("support:") {
        let rows = read_csv_rows(Path::new(path))?;
        let mut vectors = Vec::new();
        let mut weights = Vec::new();
        let with_weight = rows.first().map(|r| r.len() == dim + 1).unwrap_or(false);
        for row in &rows {
            let expect = if with_weight { dim + 1 } else { dim };
            if row.len() != expect {
                return Err(ConfigError(format!(
                    "support row has {} entries, expected {expect}",
                    row.len()
                )));
            }
            vectors.push(DVector::from_vec(row[..dim].to_vec()));
            if with_weight {
                weights.push(row[dim]);
            }
        }
        if !with_weight {
            weights = vec![1.0 / vectors.len() as f64; vectors.len()];
        }
        // user-supplied support lists must declare symmetry themselves;
        // the conservative default is false
        return Ok(DirectionLaw::finite_support(vectors, weights, false)?);
    }
    Err(ConfigError(format!(
        "direction law must be uniform | axes | axes:w,... | rows:file | support:file, got `{spec}`"
    )))
}

/// Estimator spec: `auto` | `exact` | `quad:NODES` | `mc:SAMPLES`.
pub fn parse_estimator(
    spec: &str,
    dim: usize,
    kappa: f64,
    seed: u64,
    workers: usize,
) -> ConfigResult<SecondMomentEstimator> {
    if spec == "auto" {
        return Ok(SecondMomentEstimator::auto(dim, kappa, seed));
    }
    if spec == "exact" {
        return Ok(SecondMomentEstimator::ExactDiscrete);
    }
    if let Some(rest) = spec.strip_prefix("quad:") {
        let nodes = rest
            .parse::<usize>()
            .map_err(|e| ConfigError(format!("bad node count `{rest}`: {e}")))?;
        return Ok(SecondMomentEstimator::SphereQuadrature { nodes });
    }
    if let Some(rest) = spec.strip_prefix("mc:") {
        let samples = rest
            .parse::<usize>()
            .map_err(|e| ConfigError(format!("bad sample count `{rest}`: {e}")))?;
        return Ok(SecondMomentEstimator::MonteCarlo {
            samples,
            seed,
            workers,
        });
    }
    Err(ConfigError(format!(
        "estimator must be auto | exact | quad:N | mc:N, got `{spec}`"
    )))
}

/// Matrix spec for the kaczmarz subcommand: `file:path.csv` or
/// `example:a=0.1`.
pub fn parse_kaczmarz_matrix(spec: &str) -> ConfigResult<DMatrix<f64>> {
    if let Some(path) = spec.strip_prefix("file:") {
        return read_csv_matrix(Path::new(path));
    }
    if let Some(rest) = spec.strip_prefix("example:") {
        let a = rest
            .strip_prefix("a=")
            .ok_or_else(|| ConfigError(format!("expected example:a=VALUE, got `{spec}`")))?
            .parse::<f64>()
            .map_err(|e| ConfigError(format!("bad a: {e}")))?;
        return Ok(hitrun_core::kaczmarz::example_matrix(a)?);
    }
    Err(ConfigError(format!(
        "matrix must be `file:path.csv` or `example:a=VALUE`, got `{spec}`"
    )))
}

/// Right-hand side spec: `zero` (length inferred) or `file:path.csv`.
pub fn parse_rhs(spec: &str, rows: usize) -> ConfigResult<DVector<f64>> {
    if spec == "zero" {
        return Ok(DVector::zeros(rows));
    }
    if let Some(path) = spec.strip_prefix("file:") {
        let rows_data = read_csv_rows(Path::new(path))?;
        let flat: Vec<f64> = rows_data.into_iter().flatten().collect();
        return Ok(DVector::from_vec(flat));
    }
    // allow an inline comma list as well
    Ok(DVector::from_vec(parse_f64_list(spec)?))
}

/// `x0` spec: a comma list, or `target` for an exact stationary draw.
pub enum StartSpec {
    Point(DVector<f64>),
    Target,
}

pub fn parse_start(spec: &str) -> ConfigResult<StartSpec> {
    if spec == "target" {
        return Ok(StartSpec::Target);
    }
    Ok(StartSpec::Point(DVector::from_vec(parse_f64_list(spec)?)))
}

/// Polar grid spec `r:2048,theta:4096`.
pub fn parse_grid(spec: &str) -> ConfigResult<hitrun_core::overlap::PolarGrid> {
    let mut grid = hitrun_core::overlap::PolarGrid::default();
    for part in spec.split(',') {
        let (key, value) = part
            .split_once(':')
            .ok_or_else(|| ConfigError(format!("grid parts look like r:N, got `{part}`")))?;
        let n = value
            .trim()
            .parse::<usize>()
            .map_err(|e| ConfigError(format!("bad grid count `{value}`: {e}")))?;
        match key.trim() {
            "r" => grid.n_r = n,
            "theta" => grid.n_theta = n,
            other => return Err(ConfigError(format!("unknown grid axis `{other}`"))),
        }
    }
    Ok(grid)
}

fn read_csv_rows(path: &Path) -> ConfigResult<Vec<Vec<f64>>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect();
        rows.push(row.map_err(|e| {
            ConfigError(format!("{}:{}: bad number: {e}", path.display(), lineno + 1))
        })?);
    }
    if rows.is_empty() {
        return Err(ConfigError(format!("{}: no data rows", path.display())));
    }
    let width = rows[0].len();
    if rows.iter().any(|r| r.len() != width) {
        return Err(ConfigError(format!("{}: ragged rows", path.display())));
    }
    Ok(rows)
}

fn read_csv_matrix(path: &Path) -> ConfigResult<DMatrix<f64>> {
    let rows = read_csv_rows(path)?;
    let nrows = rows.len();
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        nrows,
        ncols,
        rows.into_iter().flatten(),
    ))
}
