//! Configuration documents, run manifests and CSV/JSON emitters.
//!
//! A configuration document is JSON or TOML with the keys
//! `n, m, S, incomes | incomes_rule, tau_min, tau_max | tau, theta_ev,
//! sector_shares, ic.*, integ.*`. Numbers may be written as literals or as
//! `"a/b"` strings. In JSON, dotted keys such as `"ic.mode"` are accepted as
//! an alternative to nested objects.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::{ModelConfig, TaxSchedule};
use crate::error::{Error, Result};
use crate::experiments::{InitialConditionSpec, SweepRow};
use crate::integrator::IntegrationOptions;
use crate::state::PopulationState;

pub const ENGINE_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Upper bound on `n` when incomes are expanded from a rule.
pub const MAX_RULE_CLASSES: usize = 100_000;

/// A number given either as a literal or as a string like `"1/3"` or `"0.25"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Number {
    Literal(f64),
    Expr(String),
}

impl Number {
    pub fn value(&self, key: &str) -> Result<f64> {
        match self {
            Number::Literal(v) => Ok(*v),
            Number::Expr(s) => parse_number_expr(s).map_err(|message| Error::Parse {
                location: format!("key `{key}`"),
                message,
            }),
        }
    }
}

impl From<f64> for Number {
    fn from(v: f64) -> Self {
        Number::Literal(v)
    }
}

/// Parses `"x"` or `"x/y"` with decimal `x`, `y`.
pub fn parse_number_expr(text: &str) -> std::result::Result<f64, String> {
    let text = text.trim();
    let parse = |s: &str| -> std::result::Result<f64, String> {
        let s = s.trim();
        s.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| format!("`{s}` is not a finite number"))
    };
    match text.split_once('/') {
        None => parse(text),
        Some((num, den)) => {
            let (num, den) = (parse(num)?, parse(den)?);
            if den == 0.0 {
                return Err(format!("`{text}` divides by zero"));
            }
            Ok(num / den)
        }
    }
}

/// Expands an income rule such as `"10*j"` or `"5*j+20"` over `j = 1..=n`.
pub fn parse_income_rule(rule: &str, n: usize) -> std::result::Result<Vec<f64>, String> {
    let compact: String = rule.chars().filter(|c| !c.is_whitespace()).collect();
    let sign = compact
        .find('j')
        .and_then(|at| compact[at..].find(['+', '-']).map(|p| p + at));
    let (linear, offset) = match sign {
        None => (compact.as_str(), 0.0),
        Some(pos) => {
            let off = compact[pos..]
                .parse::<f64>()
                .map_err(|_| format!("bad offset in income rule `{rule}`"))?;
            (&compact[..pos], off)
        }
    };
    let coefficient = if linear == "j" {
        1.0
    } else if let Some(c) = linear.strip_suffix("*j") {
        c.parse::<f64>()
            .map_err(|_| format!("bad coefficient in income rule `{rule}`"))?
    } else if let Some(c) = linear.strip_prefix("j*") {
        c.parse::<f64>()
            .map_err(|_| format!("bad coefficient in income rule `{rule}`"))?
    } else {
        return Err(format!(
            "income rule `{rule}` is not of the form `a*j` or `a*j+b`"
        ));
    };
    if !(coefficient.is_finite() && offset.is_finite()) {
        return Err(format!("income rule `{rule}` has non-finite terms"));
    }
    Ok((1..=n).map(|j| coefficient * j as f64 + offset).collect())
}

/// Parses a comma-separated list of percentages (`"5,10,12.5"`) into fractions.
pub fn parse_percent_list(text: &str) -> std::result::Result<Vec<f64>, String> {
    text.split(',')
        .map(|item| {
            let item = item.trim();
            item.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(|v| v / 100.0)
                .ok_or_else(|| format!("`{item}` is not a percentage"))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcDocument {
    #[serde(default = "default_ic_mode")]
    pub mode: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub profile: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_mu: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<Vec<Number>>>,
}

fn default_ic_mode() -> String {
    "uniform".into()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_time: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationarity_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift_tol: Option<f64>,
}

/// Raw configuration document, before resolution and validation.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "S", default, skip_serializing_if = "Option::is_none")]
    pub exchange_amount: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incomes: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub incomes_rule: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_min: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_max: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta_ev: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sector_shares: Option<Vec<Number>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ic: Option<IcDocument>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integ: Option<IntegDocument>,
}

/// A validated configuration with all defaults applied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadedConfig {
    pub model: ModelConfig,
    pub integration: IntegrationOptions,
    pub initial: InitialConditionSpec,
}

impl LoadedConfig {
    pub fn reference() -> Self {
        LoadedConfig {
            model: ModelConfig::reference(),
            integration: IntegrationOptions::default(),
            initial: InitialConditionSpec::Uniform,
        }
    }
}

fn numbers(values: &[Number], key: &str) -> Result<Vec<f64>> {
    values.iter().map(|v| v.value(key)).collect()
}

fn missing(key: &str) -> Error {
    Error::Parse {
        location: format!("key `{key}`"),
        message: "required key is missing".into(),
    }
}

impl ConfigDocument {
    /// Applies defaults and the precedence rules, then validates everything.
    pub fn resolve(&self) -> Result<LoadedConfig> {
        let incomes = match (&self.incomes, &self.incomes_rule) {
            (Some(list), rule) => {
                if rule.is_some() {
                    log::warn!("both `incomes` and `incomes_rule` given; using the explicit list");
                }
                numbers(list, "incomes")?
            }
            (None, Some(rule)) => {
                let n = self.n.ok_or_else(|| missing("n"))?;
                if n > MAX_RULE_CLASSES {
                    return Err(Error::config(
                        format!("n <= {MAX_RULE_CLASSES} with an income rule"),
                        n,
                    ));
                }
                parse_income_rule(rule, n).map_err(|message| Error::Parse {
                    location: "key `incomes_rule`".into(),
                    message,
                })?
            }
            (None, None) => return Err(missing("incomes")),
        };
        let n = self.n.unwrap_or(incomes.len());

        let tax = match (&self.tau, &self.tau_min, &self.tau_max) {
            (Some(tau), lo, hi) => {
                if lo.is_some() || hi.is_some() {
                    log::warn!("both `tau` and `tau_min`/`tau_max` given; using the explicit list");
                }
                TaxSchedule::Explicit(numbers(tau, "tau")?)
            }
            (None, Some(lo), Some(hi)) => TaxSchedule::Linear {
                tau_min: lo.value("tau_min")?,
                tau_max: hi.value("tau_max")?,
            },
            (None, None, _) => return Err(missing("tau_min")),
            (None, _, None) => return Err(missing("tau_max")),
        };

        let theta_ev = numbers(
            self.theta_ev.as_ref().ok_or_else(|| missing("theta_ev"))?,
            "theta_ev",
        )?;
        let m = self.m.unwrap_or(theta_ev.len());
        let sector_shares = numbers(
            self.sector_shares
                .as_ref()
                .ok_or_else(|| missing("sector_shares"))?,
            "sector_shares",
        )?;
        let exchange_amount = self
            .exchange_amount
            .as_ref()
            .ok_or_else(|| missing("S"))?
            .value("S")?;

        let model = ModelConfig {
            n,
            m,
            incomes,
            exchange_amount,
            tax,
            theta_ev,
            sector_shares,
        };
        model.validate()?;

        let defaults = IntegrationOptions::default();
        let integ = self.integ.clone().unwrap_or_default();
        let integration = IntegrationOptions {
            dt: integ.dt.unwrap_or(defaults.dt),
            max_time: integ.max_time.unwrap_or(defaults.max_time),
            stationarity_tol: integ.stationarity_tol.unwrap_or(defaults.stationarity_tol),
            drift_tol: integ.drift_tol.unwrap_or(defaults.drift_tol),
        };
        integration.validate()?;

        let initial = match &self.ic {
            None => InitialConditionSpec::Uniform,
            Some(ic) => resolve_ic(ic)?,
        };
        let x0 = initial.build(&model)?;
        crate::integrator::check_simplex(&x0).map_err(|e| Error::config("ic on the simplex", e))?;

        Ok(LoadedConfig {
            model,
            integration,
            initial,
        })
    }

    /// The document that resolves to exactly `loaded`.
    pub fn from_resolved(loaded: &LoadedConfig) -> Self {
        let list = |v: &[f64]| Some(v.iter().copied().map(Number::from).collect());
        let model = &loaded.model;
        let (tau_min, tau_max, tau) = match &model.tax {
            TaxSchedule::Linear { tau_min, tau_max } => {
                (Some((*tau_min).into()), Some((*tau_max).into()), None)
            }
            TaxSchedule::Explicit(t) => (None, None, list(t)),
        };
        let ic = match &loaded.initial {
            InitialConditionSpec::Uniform => IcDocument {
                mode: "uniform".into(),
                ..Default::default()
            },
            InitialConditionSpec::Explicit { x } => IcDocument {
                mode: "explicit".into(),
                x: Some(
                    x.iter()
                        .map(|row| row.iter().copied().map(Number::from).collect())
                        .collect(),
                ),
                ..Default::default()
            },
            InitialConditionSpec::ClassProfile { profile, target_mu } => IcDocument {
                mode: "class-profile".into(),
                profile: list(profile),
                target_mu: target_mu.map(Number::from),
                ..Default::default()
            },
        };
        let o = &loaded.integration;
        ConfigDocument {
            n: Some(model.n),
            m: Some(model.m),
            exchange_amount: Some(model.exchange_amount.into()),
            incomes: list(&model.incomes),
            incomes_rule: None,
            tau_min,
            tau_max,
            tau,
            theta_ev: list(&model.theta_ev),
            sector_shares: list(&model.sector_shares),
            ic: Some(ic),
            integ: Some(IntegDocument {
                dt: Some(o.dt),
                max_time: Some(o.max_time),
                stationarity_tol: Some(o.stationarity_tol),
                drift_tol: Some(o.drift_tol),
            }),
        }
    }
}

fn resolve_ic(ic: &IcDocument) -> Result<InitialConditionSpec> {
    match ic.mode.as_str() {
        "uniform" => Ok(InitialConditionSpec::Uniform),
        "explicit" => {
            let rows = ic.x.as_ref().ok_or_else(|| missing("ic.x"))?;
            let x = rows
                .iter()
                .map(|row| numbers(row, "ic.x"))
                .collect::<Result<_>>()?;
            Ok(InitialConditionSpec::Explicit { x })
        }
        "class-profile" => {
            let profile = numbers(
                ic.profile.as_ref().ok_or_else(|| missing("ic.profile"))?,
                "ic.profile",
            )?;
            let target_mu = ic
                .target_mu
                .as_ref()
                .map(|v| v.value("ic.target_mu"))
                .transpose()?;
            Ok(InitialConditionSpec::ClassProfile { profile, target_mu })
        }
        other => Err(Error::Parse {
            location: "key `ic.mode`".into(),
            message: format!(
                "unknown mode `{other}` (expected uniform, explicit or class-profile)"
            ),
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DocumentFormat {
    Json,
    Toml,
}

impl DocumentFormat {
    /// By extension; otherwise JSON if the text opens with `{`, else TOML.
    pub fn detect(path: &Path, text: &str) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DocumentFormat::Json,
            Some(e) if e.eq_ignore_ascii_case("toml") => DocumentFormat::Toml,
            _ if text.trim_start().starts_with('{') => DocumentFormat::Json,
            _ => DocumentFormat::Toml,
        }
    }
}

/// Moves `"a.b": v` entries of a JSON object into nested objects.
fn nest_dotted_keys(value: serde_json::Value) -> std::result::Result<serde_json::Value, String> {
    let serde_json::Value::Object(map) = value else {
        return Ok(value);
    };
    let mut out = serde_json::Map::new();
    for (key, v) in map {
        match key.split_once('.') {
            None => {
                if out.contains_key(&key) {
                    return Err(format!("key `{key}` given twice"));
                }
                out.insert(key, v);
            }
            Some((outer, inner)) => {
                let entry = out
                    .entry(outer.to_string())
                    .or_insert_with(|| serde_json::Value::Object(Default::default()));
                let serde_json::Value::Object(table) = entry else {
                    return Err(format!("key `{key}` conflicts with non-table `{outer}`"));
                };
                if table.insert(inner.to_string(), v).is_some() {
                    return Err(format!("key `{key}` given twice"));
                }
            }
        }
    }
    Ok(serde_json::Value::Object(out))
}

fn parse_json_value(text: &str, origin: &str) -> Result<serde_json::Value> {
    serde_json::from_str(text).map_err(|e| Error::Parse {
        location: format!("{origin} line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })
}

fn document_from_json(value: serde_json::Value, origin: &str) -> Result<ConfigDocument> {
    let value = nest_dotted_keys(value).map_err(|message| Error::Parse {
        location: origin.into(),
        message,
    })?;
    serde_json::from_value(value).map_err(|e| Error::Parse {
        location: origin.into(),
        message: e.to_string(),
    })
}

/// Parses a configuration or manifest document without touching the filesystem.
pub fn parse_document(text: &str, format: DocumentFormat, origin: &str) -> Result<ConfigDocument> {
    match format {
        DocumentFormat::Json => {
            let value = parse_json_value(text, origin)?;
            match value.get("config") {
                Some(inner) if value.get("engine_version").is_some() => {
                    document_from_json(inner.clone(), origin)
                }
                _ => document_from_json(value, origin),
            }
        }
        DocumentFormat::Toml => toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].lines().count().max(1));
            Error::Parse {
                location: match line {
                    Some(l) => format!("{origin} line {l}"),
                    None => origin.into(),
                },
                message: e.message().to_string(),
            }
        }),
    }
}

/// Parses and validates a configuration from text.
pub fn parse_config(text: &str, format: DocumentFormat, origin: &str) -> Result<LoadedConfig> {
    parse_document(text, format, origin)?.resolve()
}

/// Loads a configuration file (or a run manifest, whose embedded config is used).
pub fn load_config(path: &Path) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config(
        &text,
        DocumentFormat::detect(path, &text),
        &path.display().to_string(),
    )
}

/// Everything needed to reproduce one CLI invocation's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub engine_version: String,
    pub command: String,
    pub timestamp_unix: u64,
    pub outputs: Vec<PathBuf>,
    /// Sweep grid as fractions, for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_trajectory: Option<u64>,
    pub config: ConfigDocument,
    /// Command-specific results (fit coefficients, Gini pair).
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub summary: serde_json::Value,
}

impl RunManifest {
    pub fn new(command: &str, loaded: &LoadedConfig) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunManifest {
            engine_version: ENGINE_VERSION.into(),
            command: command.into(),
            timestamp_unix,
            outputs: Vec::new(),
            eta: None,
            dump_trajectory: None,
            config: ConfigDocument::from_resolved(loaded),
            summary: serde_json::Value::Null,
        }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let value = parse_json_value(&text, &path.display().to_string())?;
        serde_json::from_value(value).map_err(|e| Error::Parse {
            location: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }
}

/// Formats with four significant digits, in fixed notation for moderate magnitudes.
pub fn format_sig4(value: f64) -> String {
    if value == 0.0 || !value.is_finite() {
        return format!("{value}");
    }
    let magnitude = value.abs().log10().floor() as i32;
    if (-3..6).contains(&magnitude) {
        let decimals = (3 - magnitude).max(0) as usize;
        format!("{value:.decimals$}")
    } else {
        format!("{value:.3e}")
    }
}

/// `j,alpha,x` rows with 1-based labels and round-trip precision.
pub fn state_csv(x: &PopulationState) -> String {
    let mut out = String::from("j,alpha,x\n");
    for j in 0..x.n() {
        for a in 0..x.m() {
            let _ = writeln!(out, "{},{},{}", j + 1, a + 1, x.get(j, a));
        }
    }
    out
}

/// Reads back a `state.csv`.
pub fn parse_state_csv(text: &str) -> Result<PopulationState> {
    let err = |line: usize, message: String| Error::Parse {
        location: format!("state csv line {line}"),
        message,
    };
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(err(
                i + 1,
                format!("expected 3 fields, got {}", fields.len()),
            ));
        }
        let j: usize = fields[0]
            .parse()
            .map_err(|_| err(i + 1, "bad class".into()))?;
        let a: usize = fields[1]
            .parse()
            .map_err(|_| err(i + 1, "bad sector".into()))?;
        let x: f64 = fields[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(i + 1, "bad value".into()))?;
        if j == 0 || a == 0 {
            return Err(err(i + 1, "labels are 1-based".into()));
        }
        entries.push((j - 1, a - 1, x));
    }
    let n = entries.iter().map(|e| e.0 + 1).max().unwrap_or(0);
    let m = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
    if n == 0 || n.checked_mul(m) != Some(entries.len()) {
        return Err(err(
            1,
            format!("{} entries do not fill an n x m table", entries.len()),
        ));
    }
    let mut x = PopulationState::zeros(n, m);
    let mut seen = vec![false; n * m];
    for (j, a, v) in entries {
        if std::mem::replace(&mut seen[j * m + a], true) {
            return Err(err(1, format!("duplicate entry ({}, {})", j + 1, a + 1)));
        }
        x.set(j, a, v);
    }
    Ok(x)
}

pub const SWEEP_CSV_HEADER: &str =
    "eta_pct,theta1_pct,theta2_pct,theta3_pct,gap_pct,gini,converged,residual";

/// Sweep table with percentages rendered at four significant digits.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let pct = |v: f64| format_sig4(100.0 * v);
    let mut out = format!("{SWEEP_CSV_HEADER}\n");
    for row in rows {
        let theta = |i: usize| row.theta_ev.get(i).map(|t| pct(*t)).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.3e}",
            pct(row.eta),
            theta(0),
            theta(1),
            theta(2),
            row.income_gap.map(pct).unwrap_or_else(|| "NaN".into()),
            format_sig4(row.gini),
            row.converged,
            row.residual
        );
    }
    out
}

/// `class,delta_fraction` rows, 1-based classes.
pub fn compare_csv(delta: &[f64]) -> String {
    let mut out = String::from("class,delta_fraction\n");
    for (j, d) in delta.iter().enumerate() {
        let _ = writeln!(out, "{},{}", j + 1, d);
    }
    out
}

/// Header for a trajectory dump: `t`, every `x_j_alpha`, then `sum` and `mu`.
pub fn trajectory_header(n: usize, m: usize) -> String {
    let mut out = String::from("t");
    for j in 1..=n {
        for a in 1..=m {
            let _ = write!(out, ",x_{j}_{a}");
        }
    }
    out.push_str(",sum,mu");
    out
}

pub fn trajectory_row(t: f64, x: &PopulationState, incomes: &[f64]) -> String {
    let mut out = format!("{t}");
    for v in x.as_slice() {
        let _ = write!(out, ",{v}");
    }
    let _ = write!(out, ",{},{}", x.total(), x.mean_income(incomes));
    out
}
