//! Experiment configuration: a versioned TOML document with one section per
//! module. Errors carry the line of the offending key or section.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentInitial};
use crate::error::{Error, Result};
use crate::fpe::{Boundary, CoefficientSpec, Drift, FpeRunConfig, GridSpec, InitialDensity, TimeSpec};
use crate::lorenz_core::Domain;
use crate::lorenz_solver::{InitialCurve, LorenzControls, LorenzRunConfig, RightBoundary};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Fpe,
    Lorenz,
    Agents,
    Analytic,
    Compare,
    ScaleMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    Both,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn json(self) -> bool {
        matches!(self, OutputFormat::Json | OutputFormat::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            format: OutputFormat::default(),
        }
    }
}

/// Lorenz-side settings. `initial` may be omitted for `compare`, which
/// derives the curve from the density section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LorenzSection {
    pub f_count: usize,
    #[serde(default = "default_domain")]
    pub domain: Domain,
    #[serde(default)]
    pub initial: Option<InitialCurve>,
    #[serde(default)]
    pub right_boundary: Option<RightBoundary>,
    #[serde(default)]
    pub controls: LorenzControls,
}

fn default_domain() -> Domain {
    Domain::RealLine
}

/// Agent ensemble settings; the seed is top-level and times come from
/// the `[time]` section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub agents: usize,
    pub gamma: f64,
    pub replicas: usize,
    pub initial: AgentInitial,
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
    /// Also run the mean-field PDE on `[grid]` and fit the time scale.
    #[serde(default)]
    pub fit_time_scale: bool,
}

fn default_time_scale() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnalyticFamily {
    Heat,
    OrnsteinUhlenbeck,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyticSection {
    pub family: AnalyticFamily,
    pub diffusion: f64,
    /// Initial point mass location `a`.
    pub initial: f64,
    #[serde(default)]
    pub rate: Option<f64>,
    #[serde(default)]
    pub target: Option<f64>,
    pub f_count: usize,
    pub times: Vec<f64>,
    /// Extra `f` values evaluated at every time and reported in the summary.
    #[serde(default)]
    pub points: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleMapSection {
    pub f_count: usize,
    /// Heat times to map.
    pub times: Vec<f64>,
    #[serde(default)]
    pub initial: f64,
    #[serde(default = "default_ds")]
    pub ds: f64,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_ds() -> f64 {
    1e-4
}

fn default_window() -> [f64; 2] {
    [0.05, 0.95]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    pub f_count: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_window")]
    pub window: [f64; 2],
}

fn default_tolerance() -> f64 {
    1e-2
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            f_count: 513,
            tolerance: default_tolerance(),
            window: default_window(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub kind: ExperimentKind,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub grid: Option<GridSpec>,
    #[serde(default)]
    pub time: Option<TimeSpec>,
    #[serde(default)]
    pub coefficients: Option<CoefficientSpec>,
    #[serde(default)]
    pub initial: Option<InitialDensity>,
    #[serde(default)]
    pub boundary: Option<Boundary>,
    #[serde(default)]
    pub lorenz: Option<LorenzSection>,
    #[serde(default)]
    pub agents: Option<AgentSection>,
    #[serde(default)]
    pub analytic: Option<AnalyticSection>,
    #[serde(default)]
    pub scale_map: Option<ScaleMapSection>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
}

/// A validation failure tied to a config section.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigIssue {
    pub section: &'static str,
    pub message: String,
}

impl ConfigIssue {
    fn new(section: &'static str, message: impl Into<String>) -> Self {
        Self {
            section,
            message: message.into(),
        }
    }
}

fn need<'a, T>(value: &'a Option<T>, section: &'static str, kind: ExperimentKind) -> Result<&'a T, ConfigIssue> {
    value
        .as_ref()
        .ok_or_else(|| ConfigIssue::new(section, format!("[{section}] is required for kind {kind:?}")))
}

fn in_section<T>(section: &'static str, r: Result<T>) -> Result<T, ConfigIssue> {
    r.map_err(|e| ConfigIssue::new(section, e.to_string()))
}

fn check_times(section: &'static str, times: &[f64]) -> Result<(), ConfigIssue> {
    if times.is_empty() {
        return Err(ConfigIssue::new(section, "times must not be empty"));
    }
    if let Some(t) = times.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(ConfigIssue::new(section, format!("time {t} must be finite and >= 0")));
    }
    Ok(())
}

fn check_window(section: &'static str, w: [f64; 2]) -> Result<(), ConfigIssue> {
    if !(0.0 <= w[0] && w[0] < w[1] && w[1] <= 1.0) {
        return Err(ConfigIssue::new(
            section,
            format!("window {w:?} must satisfy 0 <= lo < hi <= 1"),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    /// Checks the schema version and that the sections needed by `kind`
    /// exist and validate under their module's rules.
    pub fn validate(&self) -> Result<(), ConfigIssue> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigIssue::new(
                "schema_version",
                format!(
                    "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                    self.schema_version
                ),
            ));
        }
        match self.kind {
            ExperimentKind::Fpe => self.validate_fpe_sections()?,
            ExperimentKind::Lorenz => {
                let lorenz = need(&self.lorenz, "lorenz", self.kind)?;
                need(&lorenz.initial, "lorenz", self.kind)?;
                need(&self.time, "time", self.kind)?;
                need(&self.coefficients, "coefficients", self.kind)?;
                in_section("lorenz", self.lorenz_config().map(|_| ()))?;
            }
            ExperimentKind::Agents => {
                let agents = need(&self.agents, "agents", self.kind)?;
                need(&self.time, "time", self.kind)?;
                in_section("agents", self.agent_config().and_then(|c| c.validate()))?;
                if agents.fit_time_scale {
                    let grid = need(&self.grid, "grid", self.kind)?;
                    if grid.domain != Domain::PositiveHalfLine {
                        return Err(ConfigIssue::new("grid", "the mean-field fit needs a wealth grid"));
                    }
                    in_section("grid", grid.build().map(|_| ()))?;
                }
            }
            ExperimentKind::Analytic => {
                let a = need(&self.analytic, "analytic", self.kind)?;
                check_times("analytic", &a.times)?;
                if a.f_count < 3 {
                    return Err(ConfigIssue::new("analytic", "f_count must be at least 3"));
                }
                if let Some(f) = a.points.iter().find(|f| !(0.0..=1.0).contains(*f)) {
                    return Err(ConfigIssue::new("analytic", format!("point {f} outside [0, 1]")));
                }
                in_section("analytic", self.ou_params().map(|_| ()))?;
            }
            ExperimentKind::ScaleMap => {
                let m = need(&self.scale_map, "scale_map", self.kind)?;
                check_times("scale_map", &m.times)?;
                check_window("scale_map", m.window)?;
                if m.f_count < 3 {
                    return Err(ConfigIssue::new("scale_map", "f_count must be at least 3"));
                }
                if !(m.ds > 0.0) || !m.initial.is_finite() {
                    return Err(ConfigIssue::new("scale_map", "ds must be positive and initial finite"));
                }
            }
            ExperimentKind::Compare => {
                self.validate_fpe_sections()?;
                let c = self.compare.clone().unwrap_or_default();
                check_window("compare", c.window)?;
                if !(c.tolerance > 0.0) {
                    return Err(ConfigIssue::new("compare", "tolerance must be positive"));
                }
                in_section("compare", self.compare_lorenz_config().map(|_| ()))?;
            }
        }
        Ok(())
    }

    fn validate_fpe_sections(&self) -> Result<(), ConfigIssue> {
        let grid = need(&self.grid, "grid", self.kind)?;
        let built = in_section("grid", grid.build())?;
        in_section("time", need(&self.time, "time", self.kind)?.validate())?;
        in_section(
            "coefficients",
            need(&self.coefficients, "coefficients", self.kind)?.validate(),
        )?;
        in_section(
            "initial",
            need(&self.initial, "initial", self.kind)?.build(&built).map(|_| ()),
        )?;
        in_section("grid", self.fpe_config().map(|_| ()))
    }

    pub fn fpe_config(&self) -> Result<FpeRunConfig> {
        let missing = |s: &str| Error::invalid(format!("[{s}] is required for kind {:?}", self.kind));
        let config = FpeRunConfig {
            grid: self.grid.ok_or_else(|| missing("grid"))?,
            initial: self.initial.clone().ok_or_else(|| missing("initial"))?,
            time: self.time.ok_or_else(|| missing("time"))?,
            coefficients: self.coefficients.ok_or_else(|| missing("coefficients"))?,
            boundary: self.boundary.unwrap_or_default(),
        };
        config.validate()?;
        Ok(config)
    }

    pub fn lorenz_config(&self) -> Result<LorenzRunConfig> {
        let section = self
            .lorenz
            .as_ref()
            .ok_or_else(|| Error::invalid("[lorenz] is required"))?;
        let coefficients = self
            .coefficients
            .ok_or_else(|| Error::invalid("[coefficients] is required"))?;
        let config = LorenzRunConfig {
            f_count: section.f_count,
            domain: section.domain,
            initial: section
                .initial
                .clone()
                .ok_or_else(|| Error::invalid("[lorenz.initial] is required"))?,
            time: self.time.ok_or_else(|| Error::invalid("[time] is required"))?,
            coefficients,
            right_boundary: section.right_boundary.unwrap_or(RightBoundary::Conserved),
            controls: section.controls,
        };
        config.validate()?;
        Ok(config)
    }

    /// Lorenz run matching the FPE setup: the initial curve is the transform
    /// of the initial density and the right boundary follows the known mean.
    pub fn compare_lorenz_config(&self) -> Result<LorenzRunConfig> {
        let fpe = self.fpe_config()?;
        let f_count = self.compare.clone().unwrap_or_default().f_count;
        let right_boundary = match fpe.coefficients.drift {
            Drift::Zero => RightBoundary::Conserved,
            Drift::OrnsteinUhlenbeck { rate, target } => {
                let d0 = fpe.initial.build(&fpe.grid.build()?)?;
                RightBoundary::OuMean {
                    initial: d0.mean(),
                    rate,
                    target,
                }
            }
        };
        let controls = self.lorenz.as_ref().map(|l| l.controls).unwrap_or_default();
        let config = LorenzRunConfig {
            f_count,
            domain: fpe.grid.domain,
            initial: InitialCurve::FromDensity {
                grid: fpe.grid,
                density: fpe.initial.clone(),
            },
            time: fpe.time,
            coefficients: fpe.coefficients,
            right_boundary,
            controls,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        let a = self
            .agents
            .as_ref()
            .ok_or_else(|| Error::invalid("[agents] is required"))?;
        let time = self.time.as_ref().ok_or_else(|| Error::invalid("[time] is required"))?;
        let record_interval = time.record_interval.unwrap_or(time.t_end.max(f64::MIN_POSITIVE));
        Ok(AgentConfig {
            agents: a.agents,
            gamma: a.gamma,
            replicas: a.replicas,
            seed: self.seed.unwrap_or(0),
            initial: a.initial.clone(),
            t_end: time.t_end,
            record_interval,
            time_scale: a.time_scale,
        })
    }

    pub fn ou_params(&self) -> Result<Option<crate::analytic::OuParams>> {
        let a = self
            .analytic
            .as_ref()
            .ok_or_else(|| Error::invalid("[analytic] is required"))?;
        match a.family {
            AnalyticFamily::Heat => {
                if !(a.diffusion > 0.0) || !a.initial.is_finite() {
                    return Err(Error::invalid("heat needs diffusion > 0 and a finite initial point"));
                }
                Ok(None)
            }
            AnalyticFamily::OrnsteinUhlenbeck => {
                let p = crate::analytic::OuParams {
                    diffusion: a.diffusion,
                    rate: a.rate.ok_or_else(|| Error::invalid("OU needs a rate"))?,
                    target: a.target.ok_or_else(|| Error::invalid("OU needs a target"))?,
                    initial: a.initial,
                };
                p.validate()?;
                Ok(Some(p))
            }
        }
    }
}

/// 1-based line of `byte` in `text`.
fn line_of_offset(text: &str, byte: usize) -> usize {
    text[..byte.min(text.len())].matches('\n').count() + 1
}

/// Line of the `[section]` header, or of a top-level `section =` key.
/// Falls back to line 1.
pub fn line_of_section(text: &str, section: &str) -> usize {
    let header = format!("[{section}");
    for (k, line) in text.lines().enumerate() {
        let t = line.trim_start();
        let is_header = t.starts_with(&header) && matches!(t[header.len()..].chars().next(), Some(']') | Some('.'));
        let is_key = t
            .strip_prefix(section)
            .is_some_and(|rest| rest.trim_start().starts_with('='));
        if is_header || is_key {
            return k + 1;
        }
    }
    1
}

/// Parses and validates config text. `path` only labels errors.
pub fn parse_config(text: &str, path: &Path) -> Result<ExperimentConfig> {
    let config: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of_offset(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    config.validate().map_err(|issue| Error::Config {
        path: path.to_path_buf(),
        line: line_of_section(text, issue.section),
        message: issue.message,
    })?;
    Ok(config)
}

/// Reads, parses and validates a config file. An unreadable file is a
/// config error at line 0.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        line: 0,
        message: format!("cannot read config: {e}"),
    })?;
    parse_config(&text, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEAT: &str = r#"
schema_version = 1
kind = "fpe"

[grid]
lo = -8.0
hi = 8.0
count = 257
domain = "real-line"

[time]
t_end = 0.1
record_interval = 0.05

[coefficients]
drift = { kind = "zero" }
diffusion = { kind = "constant", value = 1.0 }

[initial]
kind = "gaussian"
mean = 1.0
std = 0.05
"#;

    #[test]
    fn parses_a_heat_run() {
        let c = parse_config(HEAT, Path::new("heat.toml")).unwrap();
        assert_eq!(c.kind, ExperimentKind::Fpe);
        assert_eq!(c.output, OutputSpec::default());
        let fpe = c.fpe_config().unwrap();
        assert_eq!(fpe.grid.count, 257);
        assert_eq!(fpe.boundary, Boundary::Reflecting);
    }

    #[test]
    fn syntax_errors_point_at_their_line() {
        let bad = HEAT.replace("count = 257", "count = two");
        match parse_config(&bad, Path::new("x.toml")).unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 8),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = HEAT.replace("t_end = 0.1", "t_end = 0.1\ntend = 3");
        match parse_config(&bad, Path::new("x.toml")).unwrap_err() {
            Error::Config { line, message, .. } => {
                assert_eq!(line, 13);
                assert!(message.contains("tend"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn validation_errors_point_at_the_section() {
        let bad = HEAT.replace("value = 1.0", "value = -1.0");
        match parse_config(&bad, Path::new("x.toml")).unwrap_err() {
            Error::Config { line, message, .. } => {
                assert_eq!(line, 15, "{message}");
            }
            e => panic!("{e}"),
        }
        let bad = HEAT.replace("schema_version = 1", "schema_version = 9");
        match parse_config(&bad, Path::new("x.toml")).unwrap_err() {
            Error::Config { line, .. } => assert_eq!(line, 2),
            e => panic!("{e}"),
        }
        let missing = HEAT.replace("kind = \"fpe\"", "kind = \"agents\"");
        assert!(matches!(
            parse_config(&missing, Path::new("x.toml")),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn unreadable_file_is_a_config_error() {
        let e = load_config(Path::new("/nonexistent/lorenz.toml")).unwrap_err();
        assert!(matches!(e, Error::Config { line: 0, .. }));
        assert!(!e.is_numerical());
    }

    #[test]
    fn section_lookup() {
        let text = "a = 1\n[lorenz]\nf_count = 3\n[lorenz.controls]\n";
        assert_eq!(line_of_section(text, "lorenz"), 2);
        assert_eq!(line_of_section(text, "a"), 1);
        assert_eq!(line_of_section(text, "grid"), 1);
    }
}
