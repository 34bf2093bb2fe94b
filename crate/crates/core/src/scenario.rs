//! Scenario files: a TOML document describing the level system, grid, guess
//! pulse, constraints, transfer target and run settings.
//!
//! Parsing never stops at the first problem; every issue is collected with a
//! dotted locator (`constraint.filters[2].sigma`) and reported together.

use std::f64::consts::PI;
use std::path::Path;

use toml::{Table, Value};

use crate::constraints::{check_psd, AmplitudeConstraint, GaussianComponent, SpectralKernel};
use crate::dynamics::{LevelSystem, TargetSpec, TimeGrid};
use crate::error::{ConfigIssue, Error, Result};
use crate::krotov::{ControlField, FredholmSettings, OptimizationConfig, RefinementSettings};

#[derive(Debug, Clone, PartialEq)]
pub enum Envelope {
    /// `sin^2(pi t / T)` over the whole grid.
    Sin2,
    /// `exp(-(t - center)^2 / (2 width^2))`.
    Gaussian { width: f64, center: f64 },
}

impl Envelope {
    pub fn value(&self, t: f64, duration: f64) -> f64 {
        match self {
            Envelope::Sin2 => (PI * t / duration).sin().powi(2),
            Envelope::Gaussian { width, center } => (-(t - center).powi(2) / (2.0 * width * width)).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Amplitude {
    Peak(f64),
    /// Fraction of the pulse area of a two-photon pi pulse; the peak field
    /// scales with its square root.
    FractionOfTwoPhotonPi(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GuessSpec {
    pub envelope: Envelope,
    pub carrier: f64,
    pub amplitude: Amplitude,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSpec {
    pub lambda0: f64,
    pub ramp_fraction: f64,
    pub lambda_a: f64,
    pub filters: Vec<GaussianComponent>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub max_iterations: usize,
    pub stop_error: f64,
    pub fredholm_order: Option<usize>,
    pub banded: bool,
    pub refinement_passes: usize,
    pub refinement_tol: Option<f64>,
    pub sigma_t: f64,
    pub deterministic: bool,
}

/// A fully validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub labels: Vec<String>,
    pub energies: Vec<f64>,
    pub dipoles: Vec<(usize, usize, f64)>,
    pub duration: f64,
    pub samples: usize,
    pub guess: GuessSpec,
    pub constraint: ConstraintSpec,
    pub initial: usize,
    pub target: usize,
    pub run: RunSpec,
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ScenarioConfig> {
    parse_with(text, true)
}

/// Parses without the positive-semi-definiteness pre-check on frequency
/// passes, so an indefinite kernel can still be inspected.
pub fn parse_config_unchecked(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_with(&text, false)
}

fn parse_with(text: &str, psd_precheck: bool) -> Result<ScenarioConfig> {
    let root: Table = text.parse().map_err(|e: toml::de::Error| {
        Error::Config(vec![ConfigIssue {
            locator: "<document>".into(),
            message: e.to_string().trim().to_string(),
        }])
    })?;
    let mut c = Checker {
        issues: Vec::new(),
        psd_precheck,
    };
    let config = c.scenario(&root);
    match config {
        Some(cfg) if c.issues.is_empty() => Ok(cfg),
        _ => Err(Error::Config(c.issues)),
    }
}

struct Checker {
    issues: Vec<ConfigIssue>,
    psd_precheck: bool,
}

impl Checker {
    fn issue(&mut self, locator: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            locator: locator.into(),
            message: message.into(),
        });
    }

    fn allowed(&mut self, t: &Table, path: &str, keys: &[&str]) {
        for k in t.keys() {
            if !keys.contains(&k.as_str()) {
                self.issue(join(path, k), "unknown key");
            }
        }
    }

    fn table<'a>(&mut self, t: &'a Table, path: &str, key: &str) -> Option<&'a Table> {
        match t.get(key) {
            Some(Value::Table(inner)) => Some(inner),
            Some(_) => {
                self.issue(join(path, key), "expected a table");
                None
            }
            None => {
                self.issue(join(path, key), "missing section");
                None
            }
        }
    }

    fn number(&mut self, t: &Table, path: &str, key: &str) -> Option<Option<f64>> {
        match t.get(key) {
            None => Some(None),
            Some(v) => match as_f64(v) {
                Some(x) if x.is_finite() => Some(Some(x)),
                Some(x) => {
                    self.issue(join(path, key), format!("must be finite, got {x}"));
                    None
                }
                None => {
                    self.issue(join(path, key), "expected a number");
                    None
                }
            },
        }
    }

    fn required(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        match self.number(t, path, key) {
            Some(Some(x)) => Some(x),
            Some(None) => {
                self.issue(join(path, key), "missing field");
                None
            }
            None => None,
        }
    }

    fn positive(&mut self, t: &Table, path: &str, key: &str) -> Option<f64> {
        let x = self.required(t, path, key)?;
        if x > 0.0 {
            Some(x)
        } else {
            self.issue(join(path, key), format!("must be positive, got {x}"));
            None
        }
    }

    fn optional_or(&mut self, t: &Table, path: &str, key: &str, default: f64) -> Option<f64> {
        self.number(t, path, key).map(|v| v.unwrap_or(default))
    }

    fn integer(&mut self, t: &Table, path: &str, key: &str) -> Option<Option<usize>> {
        match t.get(key) {
            None => Some(None),
            Some(Value::Integer(i)) if *i >= 0 => Some(Some(*i as usize)),
            Some(_) => {
                self.issue(join(path, key), "expected a non-negative integer");
                None
            }
        }
    }

    fn boolean(&mut self, t: &Table, path: &str, key: &str, default: bool) -> Option<bool> {
        match t.get(key) {
            None => Some(default),
            Some(Value::Boolean(b)) => Some(*b),
            Some(_) => {
                self.issue(join(path, key), "expected true or false");
                None
            }
        }
    }

    fn label(&mut self, labels: &[String], v: Option<&Value>, locator: String) -> Option<usize> {
        match v {
            Some(Value::String(s)) => match labels.iter().position(|l| l == s) {
                Some(i) => Some(i),
                None => {
                    self.issue(locator, format!("unknown level label '{s}'"));
                    None
                }
            },
            Some(_) => {
                self.issue(locator, "expected a level label");
                None
            }
            None => {
                self.issue(locator, "missing field");
                None
            }
        }
    }

    fn scenario(&mut self, root: &Table) -> Option<ScenarioConfig> {
        self.allowed(root, "", &["system", "grid", "guess", "constraint", "target", "run"]);
        let system = self.table(root, "", "system");
        let grid = self.table(root, "", "grid");
        let guess = self.table(root, "", "guess");
        let constraint = self.table(root, "", "constraint");
        let target = self.table(root, "", "target");
        let run = root.get("run");

        let sys = system.and_then(|t| self.system(t));
        let labels: Vec<String> = sys.as_ref().map(|s| s.0.clone()).unwrap_or_default();
        let grid = grid.and_then(|t| self.grid(t));
        let (initial, target_idx) = match target {
            Some(t) => {
                self.allowed(t, "target", &["initial", "target"]);
                if labels.is_empty() {
                    (None, None)
                } else {
                    (
                        self.label(&labels, t.get("initial"), "target.initial".into()),
                        self.label(&labels, t.get("target"), "target.target".into()),
                    )
                }
            }
            None => (None, None),
        };
        let guess = guess.and_then(|t| self.guess(t, &labels, grid.map(|g| g.0)));
        let constraint = constraint.and_then(|t| self.constraint(t, &labels, sys.as_ref().map(|s| s.1.as_slice())));
        let run = match run {
            None => Some(RunSpec::default()),
            Some(Value::Table(t)) => self.run(t),
            Some(_) => {
                self.issue("run", "expected a table");
                None
            }
        };

        let (labels, energies, dipoles) = sys?;
        let (duration, samples) = grid?;
        Some(ScenarioConfig {
            labels,
            energies,
            dipoles,
            duration,
            samples,
            guess: guess?,
            constraint: constraint?,
            initial: initial?,
            target: target_idx?,
            run: run?,
        })
    }

    #[allow(clippy::type_complexity)]
    fn system(&mut self, t: &Table) -> Option<(Vec<String>, Vec<f64>, Vec<(usize, usize, f64)>)> {
        self.allowed(t, "system", &["levels", "energies", "dipoles"]);
        let labels: Option<Vec<String>> = match t.get("levels") {
            Some(Value::Array(a)) => {
                let mut out = Vec::new();
                let mut ok = true;
                for (i, v) in a.iter().enumerate() {
                    match v {
                        Value::String(s) => {
                            if out.contains(s) {
                                self.issue(format!("system.levels[{i}]"), format!("duplicate label '{s}'"));
                                ok = false;
                            }
                            out.push(s.clone());
                        }
                        _ => {
                            self.issue(format!("system.levels[{i}]"), "expected a string");
                            ok = false;
                        }
                    }
                }
                if out.len() < 2 {
                    self.issue("system.levels", "need at least two levels");
                    ok = false;
                }
                ok.then_some(out)
            }
            Some(_) => {
                self.issue("system.levels", "expected an array of labels");
                None
            }
            None => {
                self.issue("system.levels", "missing field");
                None
            }
        };
        let energies = self.number_array(t.get("energies"), "system.energies");
        if let (Some(l), Some(e)) = (&labels, &energies) {
            if l.len() != e.len() {
                self.issue(
                    "system.energies",
                    format!("has {} entries but {} levels are declared", e.len(), l.len()),
                );
            }
        }
        let mut dipoles = Vec::new();
        match t.get("dipoles") {
            Some(Value::Array(a)) => {
                for (i, entry) in a.iter().enumerate() {
                    let loc = format!("system.dipoles[{i}]");
                    let Value::Array(parts) = entry else {
                        self.issue(loc, "expected [label, label, value]");
                        continue;
                    };
                    if parts.len() != 3 {
                        self.issue(loc, "expected [label, label, value]");
                        continue;
                    }
                    let Some(labels) = &labels else { continue };
                    let a = self.label(labels, parts.first(), format!("{loc}[0]"));
                    let b = self.label(labels, parts.get(1), format!("{loc}[1]"));
                    let v = match parts.get(2).and_then(as_f64) {
                        Some(x) if x.is_finite() => Some(x),
                        _ => {
                            self.issue(format!("{loc}[2]"), "expected a finite number");
                            None
                        }
                    };
                    if let (Some(a), Some(b), Some(v)) = (a, b, v) {
                        if a == b {
                            self.issue(loc, "a level cannot couple to itself");
                        } else if dipoles.iter().any(|&(x, y, _)| (x, y) == (a, b) || (x, y) == (b, a)) {
                            self.issue(loc, "coupling given twice");
                        } else {
                            dipoles.push((a, b, v));
                        }
                    }
                }
            }
            Some(_) => self.issue("system.dipoles", "expected an array of [label, label, value]"),
            None => self.issue("system.dipoles", "missing field"),
        }
        let (labels, energies) = (labels?, energies?);
        (labels.len() == energies.len()).then_some((labels, energies, dipoles))
    }

    fn number_array(&mut self, v: Option<&Value>, loc: &str) -> Option<Vec<f64>> {
        match v {
            Some(Value::Array(a)) => {
                let mut out = Vec::new();
                let mut ok = true;
                for (i, x) in a.iter().enumerate() {
                    match as_f64(x) {
                        Some(x) if x.is_finite() => out.push(x),
                        _ => {
                            self.issue(format!("{loc}[{i}]"), "expected a finite number");
                            ok = false;
                        }
                    }
                }
                ok.then_some(out)
            }
            Some(_) => {
                self.issue(loc, "expected an array of numbers");
                None
            }
            None => {
                self.issue(loc, "missing field");
                None
            }
        }
    }

    fn grid(&mut self, t: &Table) -> Option<(f64, usize)> {
        self.allowed(t, "grid", &["duration", "samples"]);
        let duration = self.positive(t, "grid", "duration");
        let samples = match self.integer(t, "grid", "samples") {
            Some(Some(n)) if n >= 2 => Some(n),
            Some(Some(n)) => {
                self.issue("grid.samples", format!("need at least 2 samples, got {n}"));
                None
            }
            Some(None) => {
                self.issue("grid.samples", "missing field");
                None
            }
            None => None,
        };
        Some((duration?, samples?))
    }

    fn guess(&mut self, t: &Table, labels: &[String], duration: Option<f64>) -> Option<GuessSpec> {
        self.allowed(
            t,
            "guess",
            &["envelope", "width", "center", "carrier", "amplitude", "fraction_of_two_photon_pi"],
        );
        let envelope = match t.get("envelope").map(|v| v.as_str()) {
            None | Some(Some("sin2")) => {
                for k in ["width", "center"] {
                    if t.contains_key(k) {
                        self.issue(join("guess", k), "only used with the gaussian envelope");
                    }
                }
                Some(Envelope::Sin2)
            }
            Some(Some("gaussian")) => {
                let width = self.positive(t, "guess", "width");
                let center = match self.number(t, "guess", "center") {
                    Some(Some(c)) => Some(c),
                    Some(None) => duration.map(|d| 0.5 * d),
                    None => None,
                };
                match (width, center) {
                    (Some(width), Some(center)) => Some(Envelope::Gaussian { width, center }),
                    _ => None,
                }
            }
            Some(_) => {
                self.issue("guess.envelope", "expected \"sin2\" or \"gaussian\"");
                None
            }
        };
        let carrier = match t.get("carrier") {
            Some(Value::String(s)) if s == "two_photon" => Some(None),
            Some(v) => match as_f64(v) {
                Some(x) if x.is_finite() && x >= 0.0 => Some(Some(x)),
                _ => {
                    self.issue("guess.carrier", "expected a non-negative number or \"two_photon\"");
                    None
                }
            },
            None => {
                self.issue("guess.carrier", "missing field");
                None
            }
        };
        let amplitude = match (t.get("amplitude"), t.get("fraction_of_two_photon_pi")) {
            (Some(_), Some(_)) => {
                self.issue("guess", "give either amplitude or fraction_of_two_photon_pi, not both");
                None
            }
            (Some(_), None) => self.required(t, "guess", "amplitude").map(Amplitude::Peak),
            (None, Some(_)) => self
                .positive(t, "guess", "fraction_of_two_photon_pi")
                .map(Amplitude::FractionOfTwoPhotonPi),
            (None, None) => {
                self.issue("guess.amplitude", "missing field (or fraction_of_two_photon_pi)");
                None
            }
        };
        let _ = labels;
        // "two_photon" carrier is resolved once the target levels are known.
        Some(GuessSpec {
            envelope: envelope?,
            carrier: carrier?.unwrap_or(f64::NAN),
            amplitude: amplitude?,
        })
    }

    fn constraint(&mut self, t: &Table, labels: &[String], energies: Option<&[f64]>) -> Option<ConstraintSpec> {
        self.allowed(t, "constraint", &["lambda0", "ramp_fraction", "lambda_a", "filters"]);
        let lambda0 = self.positive(t, "constraint", "lambda0");
        let ramp_fraction = self.optional_or(t, "constraint", "ramp_fraction", 0.05).and_then(|r| {
            if r > 0.0 && r <= 0.5 {
                Some(r)
            } else {
                self.issue("constraint.ramp_fraction", format!("must lie in (0, 0.5], got {r}"));
                None
            }
        });
        let lambda_a = self.optional_or(t, "constraint", "lambda_a", 0.0).and_then(|l| {
            if l >= 0.0 {
                Some(l)
            } else {
                self.issue("constraint.lambda_a", format!("must be non-negative, got {l}"));
                None
            }
        });
        let mut filters = Vec::new();
        let mut filters_ok = true;
        match t.get("filters") {
            None => {}
            Some(Value::Array(a)) => {
                for (i, f) in a.iter().enumerate() {
                    let loc = format!("constraint.filters[{i}]");
                    let Value::Table(ft) = f else {
                        self.issue(loc, "expected a table");
                        filters_ok = false;
                        continue;
                    };
                    match self.filter(ft, &loc, labels, energies) {
                        Some(c) => filters.push(c),
                        None => filters_ok = false,
                    }
                }
            }
            Some(_) => {
                self.issue("constraint.filters", "expected an array of tables");
                filters_ok = false;
            }
        }
        let lambda_a = lambda_a?;
        if filters_ok && self.psd_precheck {
            let mut any_pass_violation = false;
            for (i, f) in filters.iter().enumerate() {
                if f.lambda_b > 2.0 * lambda_a {
                    any_pass_violation = true;
                    self.issue(
                        format!("constraint.filters[{i}].lambda_b"),
                        format!(
                            "frequency pass weight {} exceeds the bound lambda_b <= 2 lambda_a = {}",
                            f.lambda_b,
                            2.0 * lambda_a
                        ),
                    );
                }
            }
            if !any_pass_violation && filters.iter().any(|f| f.lambda_b > 0.0) {
                if let Ok(kernel) = SpectralKernel::new(lambda_a, filters.clone()) {
                    let omega_max = kernel.required_coverage() * 1.5;
                    match check_psd(&kernel, omega_max, 20_000) {
                        Ok(r) if !r.is_psd => self.issue(
                            "constraint.filters",
                            format!(
                                "overlapping passes make the kernel indefinite (min {:e} at omega = {:e}); \
                                 each pass needs lambda_b <= 2 lambda_a and the bands must not add up beyond it",
                                r.min_value, r.argmin
                            ),
                        ),
                        Ok(_) => {}
                        Err(e) => self.issue("constraint.filters", e.to_string()),
                    }
                }
            }
        }
        Some(ConstraintSpec {
            lambda0: lambda0?,
            ramp_fraction: ramp_fraction?,
            lambda_a,
            filters: filters_ok.then_some(filters)?,
        })
    }

    fn filter(
        &mut self,
        t: &Table,
        loc: &str,
        labels: &[String],
        energies: Option<&[f64]>,
    ) -> Option<GaussianComponent> {
        self.allowed(t, loc, &["omega", "transition", "sigma", "lambda_b"]);
        let omega = match (t.get("omega"), t.get("transition")) {
            (Some(_), Some(_)) => {
                self.issue(loc, "give either omega or transition, not both");
                None
            }
            (Some(_), None) => self.required(t, loc, "omega").and_then(|w| {
                if w >= 0.0 {
                    Some(w)
                } else {
                    self.issue(join(loc, "omega"), format!("must be non-negative, got {w}"));
                    None
                }
            }),
            (None, Some(Value::Array(pair))) if pair.len() == 2 => {
                let a = self.label(labels, pair.first(), format!("{loc}.transition[0]"));
                let b = self.label(labels, pair.get(1), format!("{loc}.transition[1]"));
                match (a, b, energies) {
                    (Some(a), Some(b), Some(e)) => Some((e[a] - e[b]).abs()),
                    _ => None,
                }
            }
            (None, Some(_)) => {
                self.issue(join(loc, "transition"), "expected [label, label]");
                None
            }
            (None, None) => {
                self.issue(join(loc, "omega"), "missing field (or transition)");
                None
            }
        };
        let sigma = self.positive(t, loc, "sigma");
        let lambda_b = self.required(t, loc, "lambda_b");
        GaussianComponent::new(omega?, sigma?, lambda_b?).ok()
    }

    fn run(&mut self, t: &Table) -> Option<RunSpec> {
        self.allowed(
            t,
            "run",
            &[
                "max_iterations",
                "stop_error",
                "fredholm_order",
                "banded",
                "refinement_passes",
                "refinement_tol",
                "sigma_t",
                "deterministic",
            ],
        );
        let d = RunSpec::default();
        let max_iterations = self.integer(t, "run", "max_iterations").map(|v| v.unwrap_or(d.max_iterations));
        let stop_error = self.optional_or(t, "run", "stop_error", d.stop_error).and_then(|s| {
            if s > 0.0 && s < 1.0 {
                Some(s)
            } else {
                self.issue("run.stop_error", format!("must lie in (0, 1), got {s}"));
                None
            }
        });
        let fredholm_order = match self.integer(t, "run", "fredholm_order") {
            Some(Some(0)) => {
                self.issue("run.fredholm_order", "must be at least 1");
                None
            }
            Some(v) => Some(v),
            None => None,
        };
        let banded = self.boolean(t, "run", "banded", d.banded);
        let refinement_passes = match self.integer(t, "run", "refinement_passes") {
            Some(Some(0)) => {
                self.issue("run.refinement_passes", "must be at least 1");
                None
            }
            Some(v) => Some(v.unwrap_or(d.refinement_passes)),
            None => None,
        };
        let refinement_tol = match self.number(t, "run", "refinement_tol") {
            Some(Some(x)) if x <= 0.0 => {
                self.issue("run.refinement_tol", format!("must be positive, got {x}"));
                None
            }
            other => other,
        };
        let sigma_t = self.optional_or(t, "run", "sigma_t", 0.0);
        let deterministic = self.boolean(t, "run", "deterministic", d.deterministic);
        Some(RunSpec {
            max_iterations: max_iterations?,
            stop_error: stop_error?,
            fredholm_order: fredholm_order?,
            banded: banded?,
            refinement_passes: refinement_passes?,
            refinement_tol: refinement_tol?,
            sigma_t: sigma_t?,
            deterministic: deterministic?,
        })
    }
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            stop_error: 1e-3,
            fredholm_order: None,
            banded: false,
            refinement_passes: 3,
            refinement_tol: None,
            sigma_t: 0.0,
            deterministic: true,
        }
    }
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_f64(v: &Value) -> Option<f64> {
    match v {
        Value::Float(x) => Some(*x),
        Value::Integer(i) => Some(*i as f64),
        _ => None,
    }
}

impl ScenarioConfig {
    pub fn system(&self) -> Result<LevelSystem> {
        LevelSystem::from_couplings(self.energies.clone(), &self.dipoles)
    }

    pub fn grid(&self) -> Result<TimeGrid> {
        TimeGrid::new(self.duration, self.samples)
    }

    pub fn target_spec(&self) -> Result<TargetSpec> {
        TargetSpec::basis_transfer(self.labels.len(), self.initial, self.target)
    }

    pub fn kernel(&self) -> Result<SpectralKernel> {
        SpectralKernel::new(self.constraint.lambda_a, self.constraint.filters.clone())
    }

    /// Carrier frequency; `"two_photon"` resolves to half the
    /// initial-to-target transition frequency.
    pub fn carrier(&self) -> f64 {
        if self.guess.carrier.is_nan() {
            0.5 * (self.energies[self.target] - self.energies[self.initial]).abs()
        } else {
            self.guess.carrier
        }
    }

    pub fn optimization_config(&self) -> Result<OptimizationConfig> {
        let grid = self.grid()?;
        let amplitude = AmplitudeConstraint::sin2_ramp(self.constraint.lambda0, &grid, self.constraint.ramp_fraction)?;
        let mut c = OptimizationConfig::new(amplitude, self.kernel()?);
        c.sigma_t = self.run.sigma_t;
        c.max_iterations = self.run.max_iterations;
        c.stop_error = self.run.stop_error;
        c.refinement = RefinementSettings {
            max_passes: self.run.refinement_passes,
            field_tol: self.run.refinement_tol,
        };
        c.fredholm = FredholmSettings {
            order: self.run.fredholm_order,
            banded: self.run.banded,
            ..FredholmSettings::default()
        };
        c.deterministic = self.run.deterministic;
        Ok(c)
    }

    /// Same scenario with every spectral band removed.
    pub fn without_filters(&self) -> Self {
        let mut c = self.clone();
        c.constraint.filters.clear();
        c
    }

    /// Two-photon Rabi-frequency coefficient `sum_p mu_ip mu_pf / (2 Delta_p)`
    /// with `Delta_p = (E_p - E_i) - omega_c`, so that
    /// `Omega2(t) = coefficient * E(t)^2`.
    pub fn two_photon_coefficient(&self) -> f64 {
        let n = self.labels.len();
        let mut mu = vec![vec![0.0; n]; n];
        for &(a, b, v) in &self.dipoles {
            mu[a][b] = v;
            mu[b][a] = v;
        }
        let (i, f) = (self.initial, self.target);
        let carrier = self.carrier();
        (0..n)
            .filter(|&p| p != i && p != f)
            .map(|p| {
                let detuning = (self.energies[p] - self.energies[i]) - carrier;
                if detuning == 0.0 {
                    0.0
                } else {
                    mu[i][p] * mu[p][f] / (2.0 * detuning)
                }
            })
            .sum()
    }

    /// Peak envelope amplitude of the guess pulse.
    pub fn guess_amplitude(&self) -> Result<f64> {
        match self.guess.amplitude {
            Amplitude::Peak(e0) => Ok(e0),
            Amplitude::FractionOfTwoPhotonPi(fraction) => {
                let coefficient = self.two_photon_coefficient();
                if coefficient == 0.0 || !coefficient.is_finite() {
                    return Err(Error::InvalidInput(
                        "cannot compute a two-photon pi amplitude: no dipole pathway connects the initial and target levels"
                            .into(),
                    ));
                }
                let grid = self.grid()?;
                let w = grid.trapezoid_weights();
                let env_sq: f64 = grid
                    .times()
                    .iter()
                    .zip(&w)
                    .map(|(t, w)| w * self.guess.envelope.value(*t, self.duration).powi(2))
                    .sum();
                let e_pi = (PI / (coefficient.abs() * env_sq)).sqrt();
                Ok(fraction.sqrt() * e_pi)
            }
        }
    }
}

/// `eps(t) = E0 env(t) cos(omega_c t)`.
pub fn build_guess(config: &ScenarioConfig) -> Result<ControlField> {
    let grid = config.grid()?;
    let e0 = config.guess_amplitude()?;
    let carrier = config.carrier();
    let values = grid
        .times()
        .iter()
        .map(|&t| e0 * config.guess.envelope.value(t, config.duration) * (carrier * t).cos())
        .collect();
    ControlField::new(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[system]
levels = ["g", "e"]
energies = [0.0, 1.0]
dipoles = [["g", "e", 1.0]]

[grid]
duration = 100.0
samples = 1001

[guess]
carrier = 1.0
amplitude = 0.01

[constraint]
lambda0 = 2.0

[target]
initial = "g"
target = "e"
"#;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config_str(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config errors, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config_str(MINIMAL).unwrap();
        assert_eq!(c.labels, vec!["g", "e"]);
        assert_eq!(c.guess.envelope, Envelope::Sin2);
        assert_eq!(c.constraint.ramp_fraction, 0.05);
        assert_eq!(c.constraint.lambda_a, 0.0);
        assert!(c.constraint.filters.is_empty());
        assert_eq!(c.run, RunSpec::default());
        let g = build_guess(&c).unwrap();
        let peak = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(peak <= 0.01 && peak > 0.0099, "{peak}");
    }

    #[test]
    fn explicit_amplitude_sets_envelope_peak() {
        let text = MINIMAL.replace("carrier = 1.0", "carrier = 0.0");
        let c = parse_config_str(&text).unwrap();
        let g = build_guess(&c).unwrap();
        // zero carrier: the field is the envelope itself, peaking at T/2
        assert_eq!(g.values()[500], 0.01);
    }

    #[test]
    fn pass_beyond_bound_is_rejected() {
        let text = format!(
            "{MINIMAL}\n[[constraint.filters]]\nomega = 1.0\nsigma = 0.1\nlambda_b = 3.0\n"
        )
        .replace("lambda0 = 2.0", "lambda0 = 2.0\nlambda_a = 1.0");
        let v = issues(&text);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].locator, "constraint.filters[0].lambda_b");
        assert!(v[0].message.contains("2 lambda_a"));
    }

    #[test]
    fn overlapping_passes_are_rejected() {
        let mut text = MINIMAL.replace("lambda0 = 2.0", "lambda0 = 2.0\nlambda_a = 1.0");
        for w in [1.0, 1.1] {
            text.push_str(&format!("\n[[constraint.filters]]\nomega = {w}\nsigma = 0.1\nlambda_b = 2.0\n"));
        }
        let v = issues(&text);
        assert_eq!(v[0].locator, "constraint.filters");
        assert!(v[0].message.contains("2 lambda_a"));
    }

    #[test]
    fn dangling_label_is_named() {
        let v = issues(&MINIMAL.replace("target = \"e\"", "target = \"x\""));
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].locator, "target.target");
        assert!(v[0].message.contains("'x'"));
    }

    #[test]
    fn all_problems_reported_together() {
        let text = MINIMAL
            .replace("samples = 1001", "samples = 1\nstep = 3")
            .replace("lambda0 = 2.0", "lambda0 = -1.0")
            .replace("dipoles = [[\"g\", \"e\", 1.0]]", "dipoles = [[\"g\", \"q\", 1.0]]");
        let v = issues(&text);
        let locs: Vec<&str> = v.iter().map(|i| i.locator.as_str()).collect();
        assert!(locs.contains(&"grid.samples"), "{locs:?}");
        assert!(locs.contains(&"grid.step"), "{locs:?}");
        assert!(locs.contains(&"constraint.lambda0"), "{locs:?}");
        assert!(locs.contains(&"system.dipoles[0][1]"), "{locs:?}");
        assert_eq!(v.len(), 4);
    }

    #[test]
    fn missing_sections_are_reported() {
        let v = issues("[system]\nlevels = [\"a\", \"b\"]\nenergies = [0, 1]\ndipoles = []\n");
        let locs: Vec<&str> = v.iter().map(|i| i.locator.as_str()).collect();
        for l in ["grid", "guess", "constraint", "target"] {
            assert!(locs.contains(&l), "{locs:?}");
        }
    }

    #[test]
    fn transition_filters_resolve_to_level_spacing() {
        let text = format!("{MINIMAL}\n[[constraint.filters]]\ntransition = [\"e\", \"g\"]\nsigma = 0.1\nlambda_b = -5.0\n");
        let c = parse_config_str(&text).unwrap();
        assert_eq!(c.constraint.filters[0].omega, 1.0);
    }

    fn ladder(fraction: f64) -> ScenarioConfig {
        let text = format!(
            r#"
[system]
levels = ["g", "m", "f"]
energies = [0.0, 1.0, 1.6]
dipoles = [["g", "m", 1.0], ["m", "f", 1.0]]

[grid]
duration = 3000.0
samples = 30001

[guess]
carrier = "two_photon"
fraction_of_two_photon_pi = {fraction}

[constraint]
lambda0 = 1.0

[target]
initial = "g"
target = "f"
"#
        );
        parse_config_str(&text).unwrap()
    }

    #[test]
    fn pi_fraction_scales_with_square_root() {
        let full = ladder(1.0).guess_amplitude().unwrap();
        let quarter = ladder(0.25).guess_amplitude().unwrap();
        assert!((full / quarter - 2.0).abs() < 1e-12);
        assert_eq!(ladder(1.0).carrier(), 0.8);
    }

    #[test]
    fn two_photon_pi_pulse_transfers_population() {
        use crate::dynamics::{populations, propagate, Direction};
        let c = ladder(1.0);
        let guess = build_guess(&c).unwrap();
        let traj = propagate(&c.system().unwrap(), &guess, c.target_spec().unwrap().initial(), Direction::Forward)
            .unwrap();
        let p = populations(&traj);
        let last = p.nrows() - 1;
        assert!(p[(last, 2)] > 0.9, "final target population {}", p[(last, 2)]);
    }

    #[test]
    fn missing_pathway_is_an_error() {
        let mut c = ladder(1.0);
        c.dipoles = vec![(0, 1, 1.0)];
        assert!(matches!(c.guess_amplitude(), Err(Error::InvalidInput(_))));
    }
}
