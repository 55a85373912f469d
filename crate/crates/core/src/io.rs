//! Persistence: solution documents, branch files, plot curves and the run
//! configuration embedded in each of them.
//!
//! Reals that must round-trip exactly are stored as C99 hexadecimal float
//! strings next to a decimal shadow kept for readability. On reading the hex
//! string is authoritative and a shadow that disagrees with it is an error.
//! Files are written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::continuation::{
    Branch, ContinuationConfig, GridEvent, PointChecks, StopReason, StopReport,
};
use crate::diagnostics::DiagnosticsSummary;
use crate::model::{BaseParams, BranchPoint, Grid, ModelError, Params, SurfaceTrace, WaveSolution};
use crate::newton::NewtonConfig;
use crate::system::SystemError;

pub const FORMAT_VERSION: u32 = 1;
/// File name of the branch record inside a branch directory.
pub const BRANCH_FILE: &str = "branch.jsonl";
/// Sidecar directory of stored branch solutions.
pub const SOLUTIONS_DIR: &str = "solutions";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("malformed file: {0}")]
    Format(String),
    #[error("format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    System(#[from] SystemError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// C99 `%a` rendering of `x` with the shortest exact mantissa.
pub fn hex_f64(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    let bits = x.to_bits();
    let sign = if bits >> 63 == 1 { "-" } else { "" };
    let exp = ((bits >> 52) & 0x7ff) as i64;
    let mant = bits & ((1_u64 << 52) - 1);
    let (lead, e) = match (exp, mant) {
        (0, 0) => return format!("{sign}0x0p+0"),
        (0, _) => (0, -1022),
        _ => (1, exp - 1023),
    };
    let digits = format!("{mant:013x}");
    let digits = digits.trim_end_matches('0');
    if digits.is_empty() {
        format!("{sign}0x{lead}p{e:+}")
    } else {
        format!("{sign}0x{lead}.{digits}p{e:+}")
    }
}

pub fn parse_hex_f64(s: &str) -> Result<f64, IoError> {
    match s {
        "nan" => Ok(f64::NAN),
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        _ => hexf_parse::parse_hexf64(s, false)
            .map_err(|e| IoError::Format(format!("bad hex float {s:?}: {e}"))),
    }
}

fn shadow_agrees(exact: f64, shadow: Option<f64>) -> bool {
    match shadow {
        Some(d) => d == exact || (d.is_nan() && exact.is_nan()),
        // JSON has no NaN or infinity; those shadows are written as null.
        None => !exact.is_finite(),
    }
}

/// A real stored bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactReal {
    pub hex: String,
    pub decimal: Option<f64>,
}

impl ExactReal {
    pub fn new(x: f64) -> Self {
        Self {
            hex: hex_f64(x),
            decimal: x.is_finite().then_some(x),
        }
    }

    pub fn value(&self) -> Result<f64, IoError> {
        let x = parse_hex_f64(&self.hex)?;
        if !shadow_agrees(x, self.decimal) {
            return Err(IoError::Format(format!(
                "decimal shadow {:?} disagrees with {}",
                self.decimal, self.hex
            )));
        }
        Ok(x)
    }
}

/// An array of reals stored bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactVec {
    pub hex: Vec<String>,
    pub decimal: Vec<Option<f64>>,
}

impl ExactVec {
    pub fn new(v: &[f64]) -> Self {
        Self {
            hex: v.iter().map(|&x| hex_f64(x)).collect(),
            decimal: v.iter().map(|&x| x.is_finite().then_some(x)).collect(),
        }
    }

    pub fn values(&self) -> Result<Vec<f64>, IoError> {
        if self.hex.len() != self.decimal.len() {
            return Err(IoError::Format(format!(
                "{} hex entries but {} decimal shadows",
                self.hex.len(),
                self.decimal.len()
            )));
        }
        self.hex
            .iter()
            .zip(&self.decimal)
            .enumerate()
            .map(|(j, (h, d))| {
                let x = parse_hex_f64(h)?;
                if shadow_agrees(x, *d) {
                    Ok(x)
                } else {
                    Err(IoError::Format(format!(
                        "entry {j}: decimal shadow {d:?} disagrees with {h}"
                    )))
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

/// Everything needed to repeat a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub command: String,
    pub gamma: f64,
    pub eps1: f64,
    pub alpha: Option<f64>,
    pub eps: Option<f64>,
    pub half_length: Option<f64>,
    pub n_points: Option<usize>,
    pub newton: NewtonConfig,
    pub continuation: ContinuationConfig,
    pub out: PathBuf,
    pub format: OutputFormat,
    /// Input file of commands that read one.
    pub input: Option<PathBuf>,
    /// Initial displacements of the phase portrait.
    pub q0: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            command: String::new(),
            gamma: 0.0,
            eps1: 0.5,
            alpha: None,
            eps: None,
            half_length: None,
            n_points: None,
            newton: NewtonConfig::default(),
            continuation: ContinuationConfig::default(),
            out: PathBuf::from("out"),
            format: OutputFormat::Json,
            input: None,
            q0: crate::ode::PORTRAIT_Q0.to_vec(),
        }
    }
}

impl RunConfig {
    pub fn base(&self) -> Result<BaseParams, ModelError> {
        BaseParams::new(self.gamma, self.eps1)
    }

    /// `α`, given directly or as `α_cr − ε`; `None` when neither is set.
    pub fn alpha_value(&self) -> Result<Option<f64>, ModelError> {
        let base = self.base()?;
        match (self.alpha, self.eps) {
            (Some(_), Some(_)) => Err(ModelError::InvalidParameter {
                field: "alpha",
                value: f64::NAN,
                reason: "give alpha or eps, not both",
            }),
            (Some(a), None) => Ok(Some(a)),
            (None, Some(e)) => Ok(Some(base.alpha_cr() - e)),
            (None, None) => Ok(None),
        }
    }

    pub fn params(&self) -> Result<Params, ModelError> {
        let alpha = self.alpha_value()?.ok_or(ModelError::InvalidParameter {
            field: "alpha",
            value: f64::NAN,
            reason: "alpha or eps is required",
        })?;
        self.base()?.with_alpha(alpha)
    }

    /// The grid, with unset fields taken from `default`.
    pub fn grid_or(&self, default: (f64, usize)) -> Result<Grid, ModelError> {
        Grid::new(
            self.half_length.unwrap_or(default.0),
            self.n_points.unwrap_or(default.1),
        )
    }

    pub fn from_json_file(path: &Path) -> Result<Self, IoError> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Writes `bytes` to a temporary sibling of `path`, then renames it.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let name = path
        .file_name()
        .ok_or_else(|| IoError::Format(format!("{} has no file name", path.display())))?;
    let tmp = dir.join(format!(
        ".{}.tmp-{}",
        name.to_string_lossy(),
        std::process::id()
    ));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

fn to_json_pretty<T: Serialize>(v: &T, path: &Path) -> Result<String, IoError> {
    serde_json::to_string_pretty(v).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamsRecord {
    pub gamma: ExactReal,
    pub eps1: ExactReal,
    pub alpha: ExactReal,
    pub alpha_cr: f64,
    pub froude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRecord {
    pub half_length: ExactReal,
    pub n_points: usize,
}

/// A persisted wave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionDocument {
    pub version: u32,
    pub run_config: RunConfig,
    pub params: ParamsRecord,
    pub grid: GridRecord,
    pub t1: ExactVec,
    pub residual_norm: f64,
    pub amplitude: f64,
    pub tail: f64,
    /// The diagnostics summary at writing time, kept as free-form JSON so
    /// that non-finite entries (written as null) do not block reading.
    pub diagnostics: Option<serde_json::Value>,
}

impl SolutionDocument {
    pub fn new(
        sol: &WaveSolution,
        run_config: &RunConfig,
        diagnostics: Option<&DiagnosticsSummary>,
    ) -> Self {
        let p = sol.params();
        Self {
            version: FORMAT_VERSION,
            run_config: run_config.clone(),
            params: ParamsRecord {
                gamma: ExactReal::new(p.gamma()),
                eps1: ExactReal::new(p.eps1()),
                alpha: ExactReal::new(p.alpha()),
                alpha_cr: p.alpha_cr(),
                froude: p.froude(),
            },
            grid: GridRecord {
                half_length: ExactReal::new(sol.grid().half_length()),
                n_points: sol.grid().n_points(),
            },
            t1: ExactVec::new(sol.t1().values()),
            residual_norm: sol.residual_norm(),
            amplitude: sol.amplitude(),
            tail: sol.tail(),
            diagnostics: diagnostics.and_then(|d| serde_json::to_value(d).ok()),
        }
    }

    pub fn params(&self) -> Result<Params, IoError> {
        Ok(Params::new(
            self.params.gamma.value()?,
            self.params.eps1.value()?,
            self.params.alpha.value()?,
        )?)
    }

    pub fn grid(&self) -> Result<Grid, IoError> {
        Ok(Grid::new(self.grid.half_length.value()?, self.grid.n_points)?)
    }

    pub fn t1(&self) -> Result<SurfaceTrace, IoError> {
        Ok(SurfaceTrace::new(self.t1.values()?))
    }

    /// The stored wave with its residual recomputed from `t1`.
    pub fn to_solution(&self) -> Result<WaveSolution, IoError> {
        Ok(WaveSolution::new(self.params()?, self.grid()?, self.t1()?)?)
    }
}

pub fn write_solution(path: &Path, doc: &SolutionDocument) -> Result<(), IoError> {
    atomic_write(path, to_json_pretty(doc, path)?.as_bytes())
}

pub fn read_solution(path: &Path) -> Result<SolutionDocument, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let doc: SolutionDocument = serde_json::from_str(&text).map_err(|source| IoError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    if doc.version != FORMAT_VERSION {
        return Err(IoError::Version { found: doc.version });
    }
    Ok(doc)
}

/// One line of a branch file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum BranchRecord {
    Header {
        version: u32,
        run_config: RunConfig,
        base: BaseParams,
    },
    Point {
        index: usize,
        #[serde(flatten)]
        point: BranchPoint,
        checks: PointChecks,
        /// Sidecar file name relative to the branch directory.
        solution: Option<String>,
    },
    Stop {
        stop_reason: StopReason,
        diagnostic: String,
        classification: StopReport,
        grid_events: Vec<GridEvent>,
        eps_phase_points: usize,
    },
}

/// Contents of a branch file.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFile {
    pub run_config: RunConfig,
    pub base: BaseParams,
    pub points: Vec<BranchPoint>,
    pub checks: Vec<PointChecks>,
    pub solution_files: Vec<Option<String>>,
    pub stop_reason: StopReason,
    pub diagnostic: String,
    pub classification: StopReport,
}

fn sidecar_name(index: usize) -> String {
    format!("{SOLUTIONS_DIR}/point_{index:05}.json")
}

/// Writes `dir/branch.jsonl` and the stored solutions under
/// `dir/solutions/`. Returns the path of the branch file.
pub fn write_branch(
    dir: &Path,
    branch: &Branch,
    report: &StopReport,
    run_config: &RunConfig,
) -> Result<PathBuf, IoError> {
    let mut lines = Vec::with_capacity(branch.points.len() + 2);
    let path = dir.join(BRANCH_FILE);
    let line = |r: &BranchRecord| {
        serde_json::to_string(r).map_err(|source| IoError::Json {
            path: path.clone(),
            source,
        })
    };
    lines.push(line(&BranchRecord::Header {
        version: FORMAT_VERSION,
        run_config: run_config.clone(),
        base: branch.base,
    })?);
    for (index, point) in branch.points.iter().enumerate() {
        let solution = match branch.solutions.get(index) {
            Some(Some(sol)) => {
                let name = sidecar_name(index);
                write_solution(&dir.join(&name), &SolutionDocument::new(sol, run_config, None))?;
                Some(name)
            }
            _ => None,
        };
        lines.push(line(&BranchRecord::Point {
            index,
            point: *point,
            checks: branch.checks[index],
            solution,
        })?);
    }
    lines.push(line(&BranchRecord::Stop {
        stop_reason: branch.stop_reason,
        diagnostic: branch.diagnostic.clone(),
        classification: report.clone(),
        grid_events: branch.grid_events.clone(),
        eps_phase_points: branch.eps_phase_points,
    })?);
    let mut text = lines.join("\n");
    text.push('\n');
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}

pub fn read_branch(path: &Path) -> Result<BranchFile, IoError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut header = None;
    let mut stop = None;
    let mut points = Vec::new();
    let mut checks = Vec::new();
    let mut solution_files = Vec::new();
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let rec: BranchRecord = serde_json::from_str(line).map_err(|source| IoError::Json {
            path: path.to_path_buf(),
            source,
        })?;
        match rec {
            BranchRecord::Header {
                version,
                run_config,
                base,
            } => {
                if version != FORMAT_VERSION {
                    return Err(IoError::Version { found: version });
                }
                header = Some((run_config, base));
            }
            BranchRecord::Point {
                index,
                point,
                checks: c,
                solution,
            } => {
                if index != points.len() {
                    return Err(IoError::Format(format!(
                        "line {}: point index {index} out of order",
                        n + 1
                    )));
                }
                points.push(point);
                checks.push(c);
                solution_files.push(solution);
            }
            BranchRecord::Stop {
                stop_reason,
                diagnostic,
                classification,
                ..
            } => stop = Some((stop_reason, diagnostic, classification)),
        }
    }
    let (run_config, base) =
        header.ok_or_else(|| IoError::Format("branch file has no header record".into()))?;
    let (stop_reason, diagnostic, classification) =
        stop.ok_or_else(|| IoError::Format("branch file has no stop record".into()))?;
    Ok(BranchFile {
        run_config,
        base,
        points,
        checks,
        solution_files,
        stop_reason,
        diagnostic,
        classification,
    })
}

/// Comment lines carrying the format version and the run configuration.
pub fn provenance_header(run_config: &RunConfig) -> String {
    format!(
        "# version {FORMAT_VERSION}\n# run_config {}\n",
        serde_json::to_string(run_config).unwrap_or_else(|_| "{}".into())
    )
}

/// A two-column whitespace-separated curve readable by gnuplot.
pub fn write_curve(
    path: &Path,
    run_config: &RunConfig,
    labels: (&str, &str),
    points: impl IntoIterator<Item = (f64, f64)>,
) -> Result<(), IoError> {
    let mut text = provenance_header(run_config);
    text.push_str(&format!("# {} {}\n", labels.0, labels.1));
    for (x, y) in points {
        text.push_str(&format!("{x:.17e} {y:.17e}\n"));
    }
    atomic_write(path, text.as_bytes())
}

/// A comma-separated table preceded by the provenance comment lines.
pub fn write_csv(
    path: &Path,
    run_config: &RunConfig,
    columns: &[&str],
    rows: impl IntoIterator<Item = Vec<f64>>,
) -> Result<(), IoError> {
    let mut text = provenance_header(run_config);
    text.push_str(&columns.join(","));
    text.push('\n');
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    atomic_write(path, text.as_bytes())
}

/// A JSON report wrapped with the format version and the run configuration.
pub fn write_report<T: Serialize>(
    path: &Path,
    run_config: &RunConfig,
    report: &T,
) -> Result<(), IoError> {
    #[derive(Serialize)]
    struct Wrapped<'a, T> {
        version: u32,
        run_config: &'a RunConfig,
        report: &'a T,
    }
    let w = Wrapped {
        version: FORMAT_VERSION,
        run_config,
        report,
    };
    atomic_write(path, to_json_pretty(&w, path)?.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hex_formatting() {
        assert_eq!(hex_f64(1.0), "0x1p+0");
        assert_eq!(hex_f64(1.5), "0x1.8p+0");
        assert_eq!(hex_f64(-0.1), "-0x1.999999999999ap-4");
        assert_eq!(hex_f64(0.0), "0x0p+0");
        assert_eq!(hex_f64(-0.0), "-0x0p+0");
        assert_eq!(hex_f64(f64::MIN_POSITIVE / 4.0), "0x0.4p-1022");
        assert_eq!(hex_f64(f64::MAX), "0x1.fffffffffffffp+1023");
        for x in [1.0, -0.1, 5e-324, f64::MAX, 1e-310, 3.0e100, -0.0] {
            let y = parse_hex_f64(&hex_f64(x)).unwrap();
            assert_eq!(y.to_bits(), x.to_bits(), "{x}");
        }
        assert!(parse_hex_f64(&hex_f64(f64::NAN)).unwrap().is_nan());
        assert!(parse_hex_f64("1.5").is_err());
    }

    #[test]
    fn shadows_must_agree() {
        let mut r = ExactReal::new(0.3);
        assert_eq!(r.value().unwrap(), 0.3);
        r.decimal = Some(0.30001);
        assert!(r.value().is_err());
        let mut v = ExactVec::new(&[1.0, 2.0]);
        v.decimal[1] = Some(2.5);
        assert!(v.values().is_err());
        assert_eq!(ExactReal::new(f64::INFINITY).value().unwrap(), f64::INFINITY);
    }

    #[test]
    fn run_config_alpha_resolution() {
        let mut c = RunConfig {
            eps: Some(0.1),
            ..RunConfig::default()
        };
        assert!((c.params().unwrap().alpha() - 1.4).abs() < 1e-15);
        c.alpha = Some(1.0);
        assert!(c.params().is_err());
        c.eps = None;
        assert_eq!(c.params().unwrap().alpha(), 1.0);
        let c: RunConfig = serde_json::from_str(r#"{"gamma": 0.2}"#).unwrap();
        assert_eq!(c.eps1, 0.5);
        assert!(c.params().is_err());
    }
}
