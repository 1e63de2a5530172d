//! JSON scenario files: schema, parsing with per-key diagnostics, and
//! conversion into the core library's types.

use std::path::Path;

use nalgebra::DVector;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use wqed::collision::{CollisionConfig, Mode, Update};
use wqed::field::{Amplitude, GaussianInput};
use wqed::geometry::{CouplingPoint, EmitterSpec, Layout};
use wqed::Error;

pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_CUTOFF: usize = 3;

/// A complex number written as `[re, im]`.
pub type Complex = [f64; 2];

fn c64(z: Complex) -> C64 {
    C64::new(z[0], z[1])
}

fn is_zero(z: &Complex) -> bool {
    *z == [0.0, 0.0]
}

fn is_zero_f(x: &f64) -> bool {
    *x == 0.0
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitterKindSpec {
    Qubit,
    Boson,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterEntry {
    pub label: String,
    pub kind: EmitterKindSpec,
    /// Fock cutoff, bosons only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointEntry {
    pub emitter: usize,
    #[serde(default)]
    pub leg: usize,
    pub tau: f64,
    pub phi: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub times: Vec<f64>,
    pub values: Vec<Complex>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AmplitudeSpec {
    Constant(Complex),
    Linear(Table),
    Steps(Table),
}

impl Default for AmplitudeSpec {
    fn default() -> Self {
        AmplitudeSpec::Constant([0.0, 0.0])
    }
}

impl AmplitudeSpec {
    fn is_zero_constant(&self) -> bool {
        matches!(self, AmplitudeSpec::Constant(z) if is_zero(z))
    }

    fn to_amplitude(&self) -> Amplitude {
        match self {
            AmplitudeSpec::Constant(z) => Amplitude::Constant(c64(*z)),
            AmplitudeSpec::Linear(t) => Amplitude::Linear { times: t.times.clone(), values: t.values.iter().map(|z| c64(*z)).collect() },
            AmplitudeSpec::Steps(t) => Amplitude::Steps { times: t.times.clone(), values: t.values.iter().map(|z| c64(*z)).collect() },
        }
    }
}

/// Mean amplitude and central moments of the right- and left-going input.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    #[serde(default, skip_serializing_if = "AmplitudeSpec::is_zero_constant")]
    pub alpha: AmplitudeSpec,
    #[serde(default, skip_serializing_if = "is_zero_f")]
    pub n: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub m: Complex,
    #[serde(default, skip_serializing_if = "AmplitudeSpec::is_zero_constant")]
    pub alpha_prime: AmplitudeSpec,
    #[serde(default, skip_serializing_if = "is_zero_f")]
    pub n_prime: f64,
    #[serde(default, skip_serializing_if = "is_zero")]
    pub m_prime: Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    /// One basis level per emitter.
    Levels(Vec<usize>),
    /// Pure state in the product basis (last emitter fastest); normalised on load.
    Amplitudes(Vec<Complex>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Unidirectional,
    Bidirectional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateSpec {
    ExactUnitary,
    SecondOrder,
}

fn default_t_end() -> f64 {
    1.0
}
fn default_dt() -> f64 {
    DEFAULT_DT
}
fn default_cutoff() -> usize {
    DEFAULT_CUTOFF
}
fn default_stride() -> usize {
    100
}
fn default_n_traj() -> usize {
    1000
}
fn default_update() -> UpdateSpec {
    UpdateSpec::ExactUnitary
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simulation {
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_cutoff")]
    pub bin_cutoff: usize,
    /// Inferred from `gamma_prime` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeSpec>,
    #[serde(default = "default_update")]
    pub update: UpdateSpec,
    /// Output every `stride` steps.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_n_traj")]
    pub n_traj: usize,
    /// Also write density matrices in the binary format.
    #[serde(default)]
    pub dump_states: bool,
}

impl Default for Simulation {
    fn default() -> Self {
        Simulation {
            t_end: default_t_end(),
            dt: DEFAULT_DT,
            bin_cutoff: DEFAULT_CUTOFF,
            mode: None,
            update: default_update(),
            stride: default_stride(),
            seed: 0,
            n_traj: default_n_traj(),
            dump_states: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Observable {
    /// Excitation number of every emitter.
    Populations,
    /// `<a_i^dag a_j>` for every pair `i < j`.
    Correlations,
    Purity,
}

fn default_outputs() -> Vec<Observable> {
    vec![Observable::Populations, Observable::Correlations, Observable::Purity]
}

fn default_resolution() -> usize {
    64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DfScanSpec {
    /// Per point, one coefficient per free phase; uniform (`nu * theta`) when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<Vec<f64>>>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
}

impl Default for DfScanSpec {
    fn default() -> Self {
        DfScanSpec { coefficients: None, resolution: default_resolution() }
    }
}

fn default_dts() -> Vec<f64> {
    vec![4e-3, 2e-3, 1e-3]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareSpec {
    #[serde(default = "default_dts")]
    pub dts: Vec<f64>,
    /// Also compare a trajectory ensemble at the smallest step.
    #[serde(default)]
    pub trajectories: bool,
}

impl Default for CompareSpec {
    fn default() -> Self {
        CompareSpec { dts: default_dts(), trajectories: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub emitters: Vec<EmitterEntry>,
    pub coupling_points: Vec<PointEntry>,
    pub gamma: f64,
    #[serde(default)]
    pub gamma_prime: f64,
    #[serde(default)]
    pub field: FieldSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_state: Option<InitialState>,
    #[serde(default)]
    pub simulation: Simulation,
    #[serde(default = "default_outputs")]
    pub outputs: Vec<Observable>,
    #[serde(default)]
    pub df_scan: DfScanSpec,
    #[serde(default)]
    pub compare: CompareSpec,
}

/// 1-based line and column of byte offset `pos`.
fn line_col(text: &str, pos: usize) -> (usize, usize) {
    let before = &text[..pos];
    let line = before.matches('\n').count() + 1;
    let col = before.rfind('\n').map_or(pos, |i| pos - i - 1) + 1;
    (line, col)
}

/// Location of the `occurrence`-th appearance of `"key":` in the text.
fn key_location(text: &str, key: &str, occurrence: usize) -> Option<(usize, usize)> {
    let needle = format!("\"{key}\"");
    let mut seen = 0;
    let mut from = 0;
    while let Some(i) = text[from..].find(&needle) {
        let pos = from + i;
        let rest = text[pos + needle.len()..].trim_start();
        if rest.starts_with(':') {
            if seen == occurrence {
                return Some(line_col(text, pos));
            }
            seen += 1;
        }
        from = pos + needle.len();
    }
    None
}

/// Parse scenario text. Syntax and type errors carry line and column; unknown
/// keys are all reported together, each with its path and location.
pub fn parse_str(text: &str) -> Result<Scenario, Error> {
    let mut unknown = Vec::new();
    let mut de = serde_json::Deserializer::from_str(text);
    let parsed: Result<Scenario, _> = serde_ignored::deserialize(&mut de, |path| unknown.push(path.to_string()));
    let scenario = parsed.and_then(|s| de.end().map(|_| s)).map_err(|e| {
        Error::InvalidArgument(format!("scenario line {} column {}: {e}", e.line(), e.column()))
    })?;
    if !unknown.is_empty() {
        let mut counts = std::collections::HashMap::new();
        let listed: Vec<String> = unknown
            .iter()
            .map(|path| {
                let key = path.rsplit('.').next().unwrap_or(path).to_string();
                let k = counts.entry(key.clone()).or_insert(0usize);
                let loc = key_location(text, &key, *k);
                *k += 1;
                match loc {
                    Some((l, c)) => format!("{path} (line {l} column {c})"),
                    None => path.clone(),
                }
            })
            .collect();
        return Err(Error::InvalidArgument(format!("unknown scenario keys: {}", listed.join(", "))));
    }
    scenario.validate()?;
    Ok(scenario)
}

pub fn parse_file(path: &Path) -> Result<Scenario, Error> {
    let bytes = std::fs::read(path).map_err(|e| Error::InvalidArgument(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes).map_err(|_| Error::InvalidArgument(format!("{} is not UTF-8", path.display())))?;
    parse_str(&text)
}

impl Scenario {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Checks that every section converts into a valid core object.
    pub fn validate(&self) -> Result<(), Error> {
        let layout = self.layout()?;
        self.field()?;
        self.collision_config(&layout, self.simulation.dt)?;
        self.initial_vector(&layout)?;
        let s = &self.simulation;
        if !(s.t_end > 0.0 && s.t_end.is_finite()) {
            return Err(Error::InvalidArgument("simulation.t_end must be positive".into()));
        }
        if s.stride == 0 {
            return Err(Error::InvalidArgument("simulation.stride must be >= 1".into()));
        }
        if self.compare.dts.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument("compare.dts must be positive".into()));
        }
        Ok(())
    }

    pub fn layout(&self) -> Result<Layout, Error> {
        let emitters = self
            .emitters
            .iter()
            .map(|e| match (e.kind, e.cutoff) {
                (EmitterKindSpec::Qubit, None) => Ok(EmitterSpec::qubit(e.label.clone())),
                (EmitterKindSpec::Qubit, Some(_)) => Err(Error::InvalidArgument(format!("emitter {}: cutoff applies to bosons only", e.label))),
                (EmitterKindSpec::Boson, c) => Ok(EmitterSpec::boson(e.label.clone(), c.unwrap_or(4))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let points = self.coupling_points.iter().map(|p| CouplingPoint::new(p.emitter, p.leg, p.tau, p.phi)).collect();
        Layout::new(emitters, points, self.gamma, self.gamma_prime)
    }

    pub fn field(&self) -> Result<GaussianInput, Error> {
        let f = &self.field;
        GaussianInput::new(f.alpha.to_amplitude(), f.n, c64(f.m), f.alpha_prime.to_amplitude(), f.n_prime, c64(f.m_prime))
    }

    pub fn mode(&self) -> Mode {
        match self.simulation.mode {
            Some(ModeSpec::Unidirectional) => Mode::Unidirectional,
            Some(ModeSpec::Bidirectional) => Mode::Bidirectional,
            None if self.gamma_prime > 0.0 => Mode::Bidirectional,
            None => Mode::Unidirectional,
        }
    }

    pub fn n_steps(&self, dt: f64) -> usize {
        ((self.simulation.t_end / dt).round() as usize).max(1)
    }

    pub fn collision_config(&self, layout: &Layout, dt: f64) -> Result<CollisionConfig, Error> {
        let mut cfg = CollisionConfig::new(dt, self.n_steps(dt), self.simulation.bin_cutoff, self.mode());
        cfg.update = match self.simulation.update {
            UpdateSpec::ExactUnitary => Update::ExactUnitary,
            UpdateSpec::SecondOrder => Update::SecondOrder,
        };
        let co = wqed::geometry::CollectiveOps::build(layout)?;
        cfg.validate(&co)?;
        Ok(cfg)
    }

    /// Normalised initial pure state; all emitters in the ground level by default.
    pub fn initial_vector(&self, layout: &Layout) -> Result<DVector<C64>, Error> {
        let dims = layout.emitter_dims()?;
        let total = dims.total();
        match &self.initial_state {
            None => Ok(basis_vector(dims.dims(), &vec![0; dims.len()])),
            Some(InitialState::Levels(levels)) => {
                if levels.len() != dims.len() {
                    return Err(Error::DimensionMismatch { expected: dims.len(), found: levels.len() });
                }
                if let Some((i, l)) = levels.iter().enumerate().find(|(i, l)| **l >= dims.dims()[*i]) {
                    return Err(Error::InvalidArgument(format!("initial level {l} of emitter {i} exceeds its dimension")));
                }
                Ok(basis_vector(dims.dims(), levels))
            }
            Some(InitialState::Amplitudes(a)) => {
                if a.len() != total {
                    return Err(Error::DimensionMismatch { expected: total, found: a.len() });
                }
                let v = DVector::from_iterator(total, a.iter().map(|z| c64(*z)));
                let norm = v.norm();
                if !(norm > 0.0 && norm.is_finite()) {
                    return Err(Error::InvalidArgument("initial amplitudes must have a finite nonzero norm".into()));
                }
                Ok(v / C64::new(norm, 0.0))
            }
        }
    }
}

fn basis_vector(dims: &[usize], levels: &[usize]) -> DVector<C64> {
    let total: usize = dims.iter().product();
    let idx = dims.iter().zip(levels).fold(0, |acc, (d, l)| acc * d + l);
    let mut v = DVector::from_element(total, C64::new(0.0, 0.0));
    v[idx] = C64::new(1.0, 0.0);
    v
}
