//! Scenario text format.
//!
//! A document is a list of `[section]` blocks holding either `key = value`
//! pairs or `inputs -> output` rows; `#` starts a comment. The full schema
//! is documented in the repository README.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::distribution::{Distribution, Gaussian1D};
use crate::error::{Error, Result};
use crate::problem::{
    FiniteParts, FiniteScenario, LinearGaussianScenario, LinearObservation, LinearParts,
    LinearStep, Plant, QuadraticCost, Scenario, TransitionTable,
};

pub const SCHEMA_VERSION: u32 = 1;

const SECTIONS: [&str; 7] = [
    "meta",
    "spaces",
    "model",
    "actual",
    "observation",
    "primitives",
    "costs",
];

/// A parsed scenario file; the source text is kept for auditing.
#[derive(Debug, Clone)]
pub struct ScenarioFile {
    pub path: PathBuf,
    pub scenario: Scenario,
    pub source: String,
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioFile> {
    let path = path.as_ref();
    let source = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let scenario = parse_scenario(&source)?;
    Ok(ScenarioFile {
        path: path.to_path_buf(),
        scenario,
        source,
    })
}

#[derive(Debug)]
enum Entry {
    Pair(String, String),
    Row(String, String),
}

#[derive(Debug)]
struct Line {
    number: usize,
    entry: Entry,
}

fn parse_error(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn split_sections(text: &str) -> Result<HashMap<String, (usize, Vec<Line>)>> {
    let mut sections: HashMap<String, (usize, Vec<Line>)> = HashMap::new();
    let mut current: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let number = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| parse_error(number, "unterminated section header"))?
                .trim()
                .to_string();
            if !SECTIONS.contains(&name.as_str()) {
                return Err(parse_error(number, format!("unknown section [{name}]")));
            }
            if sections.contains_key(&name) {
                return Err(parse_error(number, format!("duplicate section [{name}]")));
            }
            sections.insert(name.clone(), (number, Vec::new()));
            current = Some(name);
            continue;
        }
        let section = current
            .as_ref()
            .ok_or_else(|| parse_error(number, "entry before the first section header"))?;
        let entry = if let Some((lhs, rhs)) = line.split_once("->") {
            Entry::Row(lhs.trim().to_string(), rhs.trim().to_string())
        } else if let Some((key, value)) = line.split_once('=') {
            Entry::Pair(key.trim().to_string(), value.trim().to_string())
        } else {
            return Err(parse_error(
                number,
                format!("expected `key = value` or `inputs -> output`, got {line:?}"),
            ));
        };
        sections.get_mut(section).unwrap().1.push(Line { number, entry });
    }
    for name in SECTIONS {
        if !sections.contains_key(name) {
            return Err(Error::MissingSection(name.to_string()));
        }
    }
    Ok(sections)
}

struct Sections {
    map: HashMap<String, (usize, Vec<Line>)>,
}

impl Sections {
    fn lines(&self, name: &str) -> &[Line] {
        &self.map[name].1
    }

    fn header_line(&self, name: &str) -> usize {
        self.map[name].0
    }

    /// Key/value pairs of a section; rows are rejected.
    fn pairs(&self, name: &str) -> Result<Vec<(usize, &str, &str)>> {
        let mut out = Vec::new();
        for line in self.lines(name) {
            match &line.entry {
                Entry::Pair(k, v) => {
                    if out.iter().any(|(_, key, _)| key == k) {
                        return Err(parse_error(line.number, format!("duplicate key {k:?}")));
                    }
                    out.push((line.number, k.as_str(), v.as_str()));
                }
                Entry::Row(..) => {
                    return Err(parse_error(
                        line.number,
                        format!("[{name}] takes `key = value` entries"),
                    ))
                }
            }
        }
        Ok(out)
    }

    fn rows(&self, name: &str) -> Result<Vec<(usize, &str, &str)>> {
        self.lines(name)
            .iter()
            .map(|line| match &line.entry {
                Entry::Row(l, r) => Ok((line.number, l.as_str(), r.as_str())),
                Entry::Pair(..) => Err(parse_error(
                    line.number,
                    format!("[{name}] takes `inputs -> output` rows"),
                )),
            })
            .collect()
    }

    fn required<'a>(
        &self,
        pairs: &'a [(usize, &'a str, &'a str)],
        section: &str,
        key: &str,
    ) -> Result<(usize, &'a str)> {
        pairs
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(n, _, v)| (*n, *v))
            .ok_or_else(|| {
                parse_error(
                    self.header_line(section),
                    format!("[{section}] is missing `{key}`"),
                )
            })
    }
}

fn number(line: usize, text: &str) -> Result<f64> {
    text.trim()
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| parse_error(line, format!("expected a finite number, got {text:?}")))
}

fn numbers(line: usize, text: &str, count: usize) -> Result<Vec<f64>> {
    let values = text
        .split(',')
        .map(|v| number(line, v))
        .collect::<Result<Vec<_>>>()?;
    if values.len() != count {
        return Err(parse_error(
            line,
            format!("expected {count} comma-separated numbers, got {}", values.len()),
        ));
    }
    Ok(values)
}

fn list(text: &str) -> Vec<String> {
    text.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

/// Parses a scenario document and validates every invariant.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let sections = Sections {
        map: split_sections(text)?,
    };
    let meta = sections.pairs("meta")?;
    let (line, schema) = sections.required(&meta, "meta", "schema")?;
    match schema.parse::<u32>() {
        Ok(SCHEMA_VERSION) => {}
        _ => {
            return Err(parse_error(
                line,
                format!("unsupported schema version {schema:?} (supported: {SCHEMA_VERSION})"),
            ))
        }
    }
    let name = meta
        .iter()
        .find(|(_, k, _)| *k == "name")
        .map_or("unnamed", |(_, _, v)| *v)
        .to_string();
    let (line, horizon) = sections.required(&meta, "meta", "horizon")?;
    let horizon: usize = horizon
        .parse()
        .map_err(|_| parse_error(line, format!("horizon {horizon:?} is not a count")))?;
    if horizon == 0 {
        return Err(Error::invariant("horizon", "horizon must be at least 1"));
    }
    let (line, beta) = sections.required(&meta, "meta", "beta")?;
    let beta = number(line, beta)?;
    for (line, key, _) in &meta {
        if !["schema", "name", "family", "horizon", "beta"].contains(key) {
            return Err(parse_error(*line, format!("unknown [meta] key {key:?}")));
        }
    }
    let (line, family) = sections.required(&meta, "meta", "family")?;
    match family {
        "finite" => parse_finite(&sections, name, horizon, beta).map(Scenario::Finite),
        "linear_gaussian" => {
            parse_linear(&sections, name, horizon, beta).map(Scenario::LinearGaussian)
        }
        other => Err(parse_error(
            line,
            format!("unknown family {other:?} (expected finite or linear_gaussian)"),
        )),
    }
}

struct LabelSet {
    what: &'static str,
    labels: Vec<String>,
}

impl LabelSet {
    fn index(&self, line: usize, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| parse_error(line, format!("unknown {} label {label:?}", self.what)))
    }
}

fn parse_labeled_law(line: usize, text: &str, set: &LabelSet) -> Result<Distribution<usize>> {
    let mut mass = vec![0.0; set.labels.len()];
    let mut seen = vec![false; set.labels.len()];
    for item in text.split(',') {
        let (label, value) = item
            .split_once(':')
            .ok_or_else(|| parse_error(line, format!("expected `label: mass`, got {item:?}")))?;
        let i = set.index(line, label.trim())?;
        if seen[i] {
            return Err(parse_error(line, format!("label {:?} listed twice", label.trim())));
        }
        seen[i] = true;
        mass[i] = number(line, value)?;
    }
    Distribution::dense(mass)
}

/// Resolves `key` and `key@t` overrides into one value per time step.
fn per_step<T: Clone>(
    pairs: &[(usize, &str, &str)],
    key: &str,
    steps: usize,
    header_line: usize,
    parse: impl Fn(usize, &str) -> Result<T>,
) -> Result<Vec<T>> {
    let mut default = None;
    let mut overrides: Vec<Option<T>> = vec![None; steps];
    for (line, k, v) in pairs {
        if *k == key {
            default = Some(parse(*line, v)?);
        } else if let Some(t) = k.strip_prefix(key).and_then(|r| r.strip_prefix('@')) {
            let t: usize = t
                .parse()
                .map_err(|_| parse_error(*line, format!("bad time index in {k:?}")))?;
            if t >= steps {
                return Err(parse_error(*line, format!("{k:?} beyond the last step {}", steps - 1)));
            }
            overrides[t] = Some(parse(*line, v)?);
        }
    }
    overrides
        .into_iter()
        .enumerate()
        .map(|(t, o)| {
            o.or_else(|| default.clone()).ok_or_else(|| {
                parse_error(header_line, format!("no `{key}` law for t={t}"))
            })
        })
        .collect()
}

fn parse_finite(
    sections: &Sections,
    name: String,
    horizon: usize,
    beta: f64,
) -> Result<FiniteScenario> {
    let spaces = sections.pairs("spaces")?;
    let set = |key: &str, what: &'static str| -> Result<LabelSet> {
        let (_, v) = sections.required(&spaces, "spaces", key)?;
        Ok(LabelSet {
            what,
            labels: list(v),
        })
    };
    let (state_line, state_text) = sections.required(&spaces, "spaces", "states")?;
    let mut states = Vec::new();
    let mut state_values = Vec::new();
    for (i, item) in list(state_text).into_iter().enumerate() {
        match item.split_once('=') {
            Some((label, value)) => {
                states.push(label.trim().to_string());
                state_values.push(number(state_line, value)?);
            }
            None => {
                states.push(item);
                state_values.push(i as f64);
            }
        }
    }
    let states = LabelSet {
        what: "state",
        labels: states,
    };
    let controls = set("controls", "control")?;
    let observations = set("observations", "observation")?;
    let disturbances = set("disturbances", "disturbance")?;
    let noises = set("noises", "noise")?;
    let (nx, nu, nw, nz) = (
        states.labels.len(),
        controls.labels.len(),
        disturbances.labels.len(),
        noises.labels.len(),
    );

    let dynamics = |section: &str| -> Result<TransitionTable> {
        let mut next = vec![None; nx * nu * nw];
        for (line, lhs, rhs) in sections.rows(section)? {
            let inputs = list(lhs);
            if inputs.len() != 3 {
                return Err(parse_error(line, "dynamics rows are `state, control, disturbance -> state`"));
            }
            let x = states.index(line, &inputs[0])?;
            let u = controls.index(line, &inputs[1])?;
            let w = disturbances.index(line, &inputs[2])?;
            let slot = &mut next[(x * nu + u) * nw + w];
            if slot.is_some() {
                return Err(parse_error(line, format!("duplicate row for ({lhs})")));
            }
            *slot = Some(states.index(line, rhs)?);
        }
        let next = next
            .into_iter()
            .enumerate()
            .map(|(i, n)| {
                n.ok_or_else(|| {
                    let (x, rest) = (i / (nu * nw), i % (nu * nw));
                    Error::invariant(
                        "total dynamics",
                        format!(
                            "[{section}] has no row for ({}, {}, {})",
                            states.labels[x],
                            controls.labels[rest / nw],
                            disturbances.labels[rest % nw]
                        ),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        TransitionTable::new(nx, nu, nw, next)
    };
    let model = dynamics("model")?;
    let actual = dynamics("actual")?;

    let mut observation = vec![None; nx * nz];
    for (line, lhs, rhs) in sections.rows("observation")? {
        let inputs = list(lhs);
        if inputs.len() != 2 {
            return Err(parse_error(line, "observation rows are `state, noise -> observation`"));
        }
        let x = states.index(line, &inputs[0])?;
        let z = noises.index(line, &inputs[1])?;
        if observation[x * nz + z].is_some() {
            return Err(parse_error(line, format!("duplicate row for ({lhs})")));
        }
        observation[x * nz + z] = Some(observations.index(line, rhs)?);
    }
    let observation = observation
        .into_iter()
        .enumerate()
        .map(|(i, y)| {
            y.ok_or_else(|| {
                Error::invariant(
                    "observation map",
                    format!(
                        "[observation] has no row for ({}, {})",
                        states.labels[i / nz],
                        noises.labels[i % nz]
                    ),
                )
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let primitives = sections.pairs("primitives")?;
    let header = sections.header_line("primitives");
    for (line, key, _) in &primitives {
        let base = key.split('@').next().unwrap_or("");
        if !["initial", "disturbance", "noise"].contains(&base) {
            return Err(parse_error(*line, format!("unknown [primitives] key {key:?}")));
        }
    }
    let (line, initial) = sections.required(&primitives, "primitives", "initial")?;
    let initial = parse_labeled_law(line, initial, &states)?;
    let disturbance_law = per_step(&primitives, "disturbance", horizon, header, |l, v| {
        parse_labeled_law(l, v, &disturbances)
    })?;
    let noise_law = per_step(&primitives, "noise", horizon + 1, header, |l, v| {
        parse_labeled_law(l, v, &noises)
    })?;

    let mut stage_cost = vec![0.0; nx * nu];
    let mut terminal_cost = vec![0.0; nx];
    for (line, lhs, rhs) in sections.rows("costs")? {
        let value = number(line, rhs)?;
        if let Some(rest) = lhs.strip_prefix("stage") {
            let inputs = list(rest);
            if inputs.len() != 2 {
                return Err(parse_error(line, "stage cost rows are `stage state, control -> cost`"));
            }
            let x = states.index(line, &inputs[0])?;
            let u = controls.index(line, &inputs[1])?;
            stage_cost[x * nu + u] = value;
        } else if let Some(rest) = lhs.strip_prefix("terminal") {
            let x = states.index(line, rest.trim())?;
            terminal_cost[x] = value;
        } else {
            return Err(parse_error(line, "cost rows start with `stage` or `terminal`"));
        }
    }

    FiniteScenario::new(FiniteParts {
        name,
        horizon,
        beta,
        states: states.labels,
        state_values,
        controls: controls.labels,
        observations: observations.labels,
        disturbances: disturbances.labels,
        noises: noises.labels,
        initial,
        disturbance_law,
        noise_law,
        model,
        actual,
        observation,
        stage_cost,
        terminal_cost,
    })
}

/// Rows `t -> values` or `* -> values`, one value set per step.
fn per_step_rows(
    sections: &Sections,
    section: &str,
    prefix: &str,
    steps: usize,
    width: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut default = None;
    let mut out: Vec<Option<Vec<f64>>> = vec![None; steps];
    for (line, lhs, rhs) in sections.rows(section)? {
        let Some(index) = lhs.strip_prefix(prefix) else {
            continue;
        };
        let index = index.trim();
        let values = numbers(line, rhs, width)?;
        if index == "*" {
            default = Some(values);
        } else {
            let t: usize = index
                .parse()
                .map_err(|_| parse_error(line, format!("bad time index {index:?}")))?;
            if t >= steps {
                return Err(parse_error(line, format!("t={t} beyond the last step {}", steps - 1)));
            }
            out[t] = Some(values);
        }
    }
    out.into_iter()
        .enumerate()
        .map(|(t, v)| {
            v.or_else(|| default.clone()).ok_or_else(|| {
                parse_error(
                    sections.header_line(section),
                    format!("[{section}] has no row for t={t}"),
                )
            })
        })
        .collect()
}

fn parse_linear(
    sections: &Sections,
    name: String,
    horizon: usize,
    beta: f64,
) -> Result<LinearGaussianScenario> {
    let spaces = sections.pairs("spaces")?;
    let mut control_bounds = None;
    for (line, key, value) in &spaces {
        match (*key, *value) {
            ("state" | "observation", "real") => {}
            ("control", "real") => {}
            ("control", interval) => {
                let inner = interval
                    .strip_prefix('[')
                    .and_then(|s| s.strip_suffix(']'))
                    .ok_or_else(|| parse_error(*line, "control space is `real` or `[lo, hi]`"))?;
                let bounds = numbers(*line, inner, 2)?;
                control_bounds = Some((bounds[0], bounds[1]));
            }
            _ => {
                return Err(parse_error(
                    *line,
                    format!("unsupported space declaration {key} = {value}"),
                ))
            }
        }
    }
    let steps = |section: &str| -> Result<Vec<LinearStep>> {
        Ok(per_step_rows(sections, section, "", horizon, 3)?
            .into_iter()
            .map(|v| LinearStep::new(v[0], v[1], v[2]))
            .collect())
    };
    let model = steps("model")?;
    let actual = steps("actual")?;
    let observation = per_step_rows(sections, "observation", "", horizon + 1, 2)?
        .into_iter()
        .map(|v| LinearObservation {
            state: v[0],
            noise: v[1],
        })
        .collect();

    let primitives = sections.pairs("primitives")?;
    let header = sections.header_line("primitives");
    for (line, key, _) in &primitives {
        let base = key.split('@').next().unwrap_or("");
        if !["initial", "disturbance", "noise", "initial_disturbance_covariance"].contains(&base) {
            return Err(parse_error(*line, format!("unknown [primitives] key {key:?}")));
        }
    }
    let gaussian = |line: usize, text: &str| -> Result<Gaussian1D> {
        let v = numbers(line, text, 2)?;
        Gaussian1D::new(v[0], v[1])
    };
    let (line, initial) = sections.required(&primitives, "primitives", "initial")?;
    let initial = gaussian(line, initial)?;
    let disturbance = per_step(&primitives, "disturbance", horizon, header, gaussian)?;
    let noise = per_step(&primitives, "noise", horizon + 1, header, gaussian)?;
    let covariance = match primitives
        .iter()
        .find(|(_, k, _)| *k == "initial_disturbance_covariance")
    {
        Some((line, _, v)) => number(*line, v)?,
        None => 0.0,
    };

    let stage_cost = per_step_rows(sections, "costs", "stage", horizon, 2)?
        .into_iter()
        .map(|v| QuadraticCost {
            state: v[0],
            control: v[1],
        })
        .collect();
    let mut terminal_cost = None;
    for (line, lhs, rhs) in sections.rows("costs")? {
        if lhs == "terminal" {
            terminal_cost = Some(number(line, rhs)?);
        } else if !lhs.starts_with("stage") {
            return Err(parse_error(line, "cost rows start with `stage` or `terminal`"));
        }
    }
    let terminal_cost = terminal_cost.ok_or_else(|| {
        parse_error(sections.header_line("costs"), "[costs] has no `terminal -> q` row")
    })?;

    LinearGaussianScenario::new(LinearParts {
        name,
        horizon,
        beta,
        model,
        actual,
        observation,
        stage_cost,
        terminal_cost,
        initial,
        disturbance,
        noise,
        initial_disturbance_covariance: covariance,
        control_bounds,
    })
}

pub fn serialize_scenario(scenario: &Scenario) -> String {
    match scenario {
        Scenario::Finite(s) => serialize_finite(s),
        Scenario::LinearGaussian(s) => serialize_linear(s),
    }
}

fn write_meta(out: &mut String, name: &str, family: &str, horizon: usize, beta: f64) {
    let _ = writeln!(out, "[meta]");
    let _ = writeln!(out, "schema = {SCHEMA_VERSION}");
    let _ = writeln!(out, "name = {name}");
    let _ = writeln!(out, "family = {family}");
    let _ = writeln!(out, "horizon = {horizon}");
    let _ = writeln!(out, "beta = {beta}");
}

fn law_text(law: &Distribution<usize>, labels: &[String]) -> String {
    law.iter()
        .map(|(&i, m)| format!("{}: {m}", labels[i]))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical text of a finite scenario. Every table entry and every per-step
/// law is written out, so parsing the text gives back an equal scenario.
pub fn serialize_finite(s: &FiniteScenario) -> String {
    let mut out = String::new();
    write_meta(&mut out, s.name(), "finite", s.horizon(), s.beta());
    let _ = writeln!(out, "\n[spaces]");
    let states: Vec<String> = s
        .states()
        .iter()
        .zip(s.state_values())
        .map(|(l, v)| format!("{l}={v}"))
        .collect();
    let _ = writeln!(out, "states = {}", states.join(", "));
    let _ = writeln!(out, "controls = {}", s.controls().join(", "));
    let _ = writeln!(out, "observations = {}", s.observations().join(", "));
    let _ = writeln!(out, "disturbances = {}", s.disturbances().join(", "));
    let _ = writeln!(out, "noises = {}", s.noises().join(", "));
    for (section, table) in [("model", s.model_table()), ("actual", s.actual_table())] {
        let _ = writeln!(out, "\n[{section}]");
        for x in 0..s.n_states() {
            for u in 0..s.n_controls() {
                for w in 0..s.disturbances().len() {
                    let _ = writeln!(
                        out,
                        "{}, {}, {} -> {}",
                        s.states()[x],
                        s.controls()[u],
                        s.disturbances()[w],
                        s.states()[table.get(x, u, w)]
                    );
                }
            }
        }
    }
    let _ = writeln!(out, "\n[observation]");
    for x in 0..s.n_states() {
        for z in 0..s.noises().len() {
            let _ = writeln!(
                out,
                "{}, {} -> {}",
                s.states()[x],
                s.noises()[z],
                s.observations()[s.observation_of(x, z)]
            );
        }
    }
    let _ = writeln!(out, "\n[primitives]");
    let _ = writeln!(out, "initial = {}", law_text(s.initial(), s.states()));
    for t in 0..s.horizon() {
        let _ = writeln!(
            out,
            "disturbance@{t} = {}",
            law_text(s.disturbance_law(t), s.disturbances())
        );
    }
    for t in 0..=s.horizon() {
        let _ = writeln!(out, "noise@{t} = {}", law_text(s.noise_law(t), s.noises()));
    }
    let _ = writeln!(out, "\n[costs]");
    for x in 0..s.n_states() {
        for u in 0..s.n_controls() {
            let _ = writeln!(
                out,
                "stage {}, {} -> {}",
                s.states()[x],
                s.controls()[u],
                s.stage_cost_of(x, u)
            );
        }
    }
    for x in 0..s.n_states() {
        let _ = writeln!(out, "terminal {} -> {}", s.states()[x], s.terminal_cost_of(x));
    }
    out
}

/// Canonical text of a linear-Gaussian scenario.
pub fn serialize_linear(s: &LinearGaussianScenario) -> String {
    let mut out = String::new();
    write_meta(&mut out, s.name(), "linear_gaussian", s.horizon(), s.beta());
    let _ = writeln!(out, "\n[spaces]");
    let _ = writeln!(out, "state = real");
    match s.control_bounds() {
        Some((lo, hi)) => {
            let _ = writeln!(out, "control = [{lo}, {hi}]");
        }
        None => {
            let _ = writeln!(out, "control = real");
        }
    }
    let _ = writeln!(out, "observation = real");
    let _ = writeln!(out, "\n[model]");
    let _ = writeln!(out, "# t -> state, control, disturbance coefficients");
    for t in 0..s.horizon() {
        let m = s.model_step(t);
        let _ = writeln!(out, "{t} -> {}, {}, {}", m.state, m.control, m.disturbance);
    }
    let _ = writeln!(out, "\n[actual]");
    for t in 0..s.horizon() {
        let a = s.actual_step(t);
        let _ = writeln!(out, "{t} -> {}, {}, {}", a.state, a.control, a.disturbance);
    }
    let _ = writeln!(out, "\n[observation]");
    let _ = writeln!(out, "# t -> state, noise coefficients");
    for t in 0..=s.horizon() {
        let o = s.observation_map(t);
        let _ = writeln!(out, "{t} -> {}, {}", o.state, o.noise);
    }
    let _ = writeln!(out, "\n[primitives]");
    let _ = writeln!(out, "# mean, variance");
    let g = s.initial();
    let _ = writeln!(out, "initial = {}, {}", g.mean(), g.variance());
    for t in 0..s.horizon() {
        let g = s.disturbance(t);
        let _ = writeln!(out, "disturbance@{t} = {}, {}", g.mean(), g.variance());
    }
    for t in 0..=s.horizon() {
        let g = s.noise(t);
        let _ = writeln!(out, "noise@{t} = {}, {}", g.mean(), g.variance());
    }
    let _ = writeln!(
        out,
        "initial_disturbance_covariance = {}",
        s.initial_disturbance_covariance()
    );
    let _ = writeln!(out, "\n[costs]");
    let _ = writeln!(out, "# stage t -> state weight, control weight");
    for t in 0..s.horizon() {
        let c = s.stage_weights(t);
        let _ = writeln!(out, "stage {t} -> {}, {}", c.state, c.control);
    }
    let _ = writeln!(out, "terminal -> {}", s.terminal_weight());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::{builtin_discrete_toy, builtin_lqg};

    #[test]
    fn builtins_round_trip() {
        for scenario in [
            Scenario::from(builtin_lqg()),
            Scenario::from(builtin_discrete_toy()),
        ] {
            let text = serialize_scenario(&scenario);
            let parsed = parse_scenario(&text).unwrap();
            assert_eq!(parsed, scenario);
            assert_eq!(serialize_scenario(&parsed), text);
        }
    }

    #[test]
    fn mass_not_normalized() {
        let text = serialize_finite(&builtin_discrete_toy())
            .replace("disturbance@0 = calm: 0.8", "disturbance@0 = calm: 0.7");
        let err = parse_scenario(&text).unwrap_err();
        assert!(
            matches!(err, Error::Invariant { invariant: "normalization", .. }),
            "{err}"
        );
    }

    #[test]
    fn missing_actual_section() {
        let text = serialize_finite(&builtin_discrete_toy());
        let start = text.find("[actual]").unwrap();
        let end = text.find("[observation]").unwrap();
        let cut = format!("{}{}", &text[..start], &text[end..]);
        let err = parse_scenario(&cut).unwrap_err();
        assert_eq!(err, Error::MissingSection("actual".into()));
        assert!(err.to_string().contains("[actual]"));
    }

    #[test]
    fn errors_carry_line_numbers() {
        let text = serialize_linear(&builtin_lqg()).replace("0 -> 2, 3, 4", "0 -> 2, x, 4");
        let line = text.lines().position(|l| l.contains("2, x, 4")).unwrap() + 1;
        match parse_scenario(&text).unwrap_err() {
            Error::Parse { line: got, .. } => assert_eq!(got, line),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn schema_version_is_mandatory() {
        let text = serialize_linear(&builtin_lqg()).replace("schema = 1\n", "");
        assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
        let text = serialize_linear(&builtin_lqg()).replace("schema = 1", "schema = 7");
        assert!(matches!(parse_scenario(&text), Err(Error::Parse { .. })));
    }

    #[test]
    fn wildcard_rows_and_default_laws() {
        let text = "\
[meta]
schema = 1
family = linear_gaussian
horizon = 3
beta = 0.5
[spaces]
control = [-1, 1]
[model]
* -> 1, 1, 1
[actual]
* -> 1, 2, 1
[observation]
* -> 1, 0
[primitives]
initial = 0, 1
disturbance = 0, 0.25
noise = 0, 0
[costs]
stage * -> 1, 1
terminal -> 2
";
        let scenario = parse_scenario(text).unwrap();
        let s = scenario.as_linear().unwrap();
        assert_eq!(s.horizon(), 3);
        assert_eq!(s.actual_step(2).control, 2.0);
        assert_eq!(s.disturbance(1).variance(), 0.25);
        assert_eq!(s.control_bounds(), Some((-1.0, 1.0)));
        let again = parse_scenario(&serialize_scenario(&scenario)).unwrap();
        assert_eq!(again, scenario);
    }

    #[test]
    fn incomplete_dynamics_is_rejected() {
        let text = serialize_finite(&builtin_discrete_toy())
            .replacen("ok, idle, calm -> ok\n", "", 1);
        let err = parse_scenario(&text).unwrap_err();
        assert!(matches!(err, Error::Invariant { invariant: "total dynamics", .. }), "{err}");
    }
}
