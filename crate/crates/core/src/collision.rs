//! Collision-model propagation: the emitters meet one fresh time bin (two for
//! a bidirectional field) per step through `U = exp(-i (Hvac + V_n) dt)`.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::{bin_moments, coherent_bin, gaussian_bin_state, BinMoments, GaussianInput, TimeBinState};
use crate::geometry::CollectiveOps;
use crate::operator::{expm, make_ladder, min_eigenvalue, HilbertDims, LadderKind, Operator, StateDM, I};

/// Top-level Fock population above which a run is flagged.
pub const LEAKAGE_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Unidirectional,
    Bidirectional,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Update {
    ExactUnitary,
    SecondOrder,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CollisionConfig {
    pub dt: f64,
    pub n_steps: usize,
    pub bin_cutoff: usize,
    pub mode: Mode,
    pub update: Update,
}

impl CollisionConfig {
    pub fn new(dt: f64, n_steps: usize, bin_cutoff: usize, mode: Mode) -> Self {
        CollisionConfig { dt, n_steps, bin_cutoff, mode, update: Update::ExactUnitary }
    }

    /// Checks hard limits and returns warnings for soft ones.
    pub fn validate(&self, co: &CollectiveOps) -> Result<Vec<String>> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::invalid(format!("dt = {} must be positive", self.dt)));
        }
        if self.n_steps == 0 {
            return Err(Error::invalid("n_steps must be >= 1"));
        }
        if self.bin_cutoff < 2 {
            return Err(Error::invalid(format!("bin cutoff {} < 2", self.bin_cutoff)));
        }
        if self.mode == Mode::Unidirectional && co.gamma_prime > 0.0 {
            return Err(Error::invalid("unidirectional mode requires gamma_prime = 0"));
        }
        let rate = co.gamma.max(co.gamma_prime);
        let mut warnings = Vec::new();
        if rate * self.dt > 0.1 {
            return Err(Error::invalid(format!("gamma*dt = {} exceeds 0.1", rate * self.dt)));
        }
        if rate * self.dt > 0.01 {
            warnings.push(format!("gamma*dt = {} is above 0.01; collision error may be visible", rate * self.dt));
        }
        let spread = co.tau_spread();
        if spread / self.dt > 0.1 {
            warnings.push(format!(
                "coupling-point spread {spread} is not small against dt = {}; delays are ignored",
                self.dt
            ));
        }
        Ok(warnings)
    }

    pub fn n_bins(&self) -> usize {
        match self.mode {
            Mode::Unidirectional => 1,
            Mode::Bidirectional => 2,
        }
    }
}

/// Joint-space operators for a fixed layout and configuration.
#[derive(Clone, Debug)]
pub struct CollisionEngine {
    config: CollisionConfig,
    sys_dims: HilbertDims,
    joint_dims: HilbertDims,
    hvac: Operator,
    vn: Operator,
    unitary: Operator,
    boson_emitters: Vec<usize>,
    warnings: Vec<String>,
}

/// Lift a system operator to system ⊗ bins.
fn lift(op: &Operator, joint: &HilbertDims, bins_total: usize) -> Result<Operator> {
    Operator::new(joint.clone(), op.data().kronecker(&DMatrix::<C64>::identity(bins_total, bins_total)))
}

/// Ladder of bin `which` (0 right-going, 1 left-going) on system ⊗ bins.
fn bin_ladder(sys_total: usize, cutoff: usize, n_bins: usize, which: usize, joint: &HilbertDims) -> Result<Operator> {
    let b = make_ladder(LadderKind::Boson, cutoff)?;
    let id_c = DMatrix::<C64>::identity(cutoff, cutoff);
    let mut m = DMatrix::<C64>::identity(sys_total, sys_total);
    for k in 0..n_bins {
        m = m.kronecker(if k == which { b.data() } else { &id_c });
    }
    Operator::new(joint.clone(), m)
}

/// `V_n = (sqrt(g) A^dag b + sqrt(g') A'^dag b' + h.c.) / sqrt(dt)` on the joint space.
pub fn build_vn(co: &CollectiveOps, config: &CollisionConfig) -> Result<Operator> {
    let joint = joint_dims(co, config)?;
    let bins_total = config.bin_cutoff.pow(config.n_bins() as u32);
    let sys_total = co.dims.total();
    let b = bin_ladder(sys_total, config.bin_cutoff, config.n_bins(), 0, &joint)?;
    let a = lift(&co.a, &joint, bins_total)?;
    let mut x = (&a.adjoint() * &b).scale_re(co.gamma.sqrt());
    if config.mode == Mode::Bidirectional {
        let bp = bin_ladder(sys_total, config.bin_cutoff, 2, 1, &joint)?;
        let ap = lift(&co.ap, &joint, bins_total)?;
        x = &x + &(&ap.adjoint() * &bp).scale_re(co.gamma_prime.sqrt());
    }
    Ok((&x + &x.adjoint()).scale_re(1.0 / config.dt.sqrt()))
}

fn joint_dims(co: &CollectiveOps, config: &CollisionConfig) -> Result<HilbertDims> {
    let mut dims = co.dims.dims().to_vec();
    dims.extend(std::iter::repeat_n(config.bin_cutoff, config.n_bins()));
    HilbertDims::new(dims)
}

/// `exp(-i (Hvac + V_n) dt)` on system ⊗ bins.
pub fn collision_unitary(co: &CollectiveOps, config: &CollisionConfig) -> Result<Operator> {
    Ok(CollisionEngine::new(co, config)?.unitary)
}

/// Result of a single collision.
#[derive(Clone, Debug)]
pub struct StepOutput {
    pub system: StateDM,
    /// Post-collision state of the bin(s), right-going mode first.
    pub bins: StateDM,
    /// Largest top-level population over bins and bosonic emitters.
    pub leakage: f64,
}

impl CollisionEngine {
    pub fn new(co: &CollectiveOps, config: &CollisionConfig) -> Result<Self> {
        let warnings = config.validate(co)?;
        let joint = joint_dims(co, config)?;
        let bins_total = config.bin_cutoff.pow(config.n_bins() as u32);
        let hvac = lift(&co.hvac, &joint, bins_total)?;
        let vn = build_vn(co, config)?;
        let unitary = expm(&(&hvac + &vn), C64::new(0.0, -config.dt))?;
        // two-level emitters cannot leak; a cutoff-2 boson is a qubit
        let boson_emitters = (0..co.dims.len()).filter(|&j| co.dims.dims()[j] > 2).collect();
        Ok(CollisionEngine {
            config: *config,
            sys_dims: co.dims.clone(),
            joint_dims: joint,
            hvac,
            vn,
            unitary,
            boson_emitters,
            warnings,
        })
    }

    pub fn config(&self) -> &CollisionConfig {
        &self.config
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn system_dims(&self) -> &HilbertDims {
        &self.sys_dims
    }

    pub fn joint_dims(&self) -> &HilbertDims {
        &self.joint_dims
    }

    pub fn unitary(&self) -> &Operator {
        &self.unitary
    }

    pub fn vn(&self) -> &Operator {
        &self.vn
    }

    pub fn hvac_joint(&self) -> &Operator {
        &self.hvac
    }

    fn check_bins(&self, bins: &[TimeBinState]) -> Result<()> {
        if bins.len() != self.config.n_bins() {
            return Err(Error::DimensionMismatch { expected: self.config.n_bins(), found: bins.len() });
        }
        if let Some(b) = bins.iter().find(|b| b.cutoff() != self.config.bin_cutoff) {
            return Err(Error::DimensionMismatch { expected: self.config.bin_cutoff, found: b.cutoff() });
        }
        Ok(())
    }

    /// `rho ⊗ eta (⊗ eta')`.
    pub fn joint_state(&self, rho: &StateDM, bins: &[TimeBinState]) -> Result<DMatrix<C64>> {
        if rho.dims() != &self.sys_dims {
            return Err(Error::DimensionMismatch { expected: self.sys_dims.total(), found: rho.dims().total() });
        }
        self.check_bins(bins)?;
        let mut m = rho.data().clone();
        for b in bins {
            m = m.kronecker(&b.density());
        }
        Ok(m)
    }

    /// Exact unitary conjugation or the second-order update, per configuration.
    pub fn evolve_joint(&self, sigma: &DMatrix<C64>) -> DMatrix<C64> {
        match self.config.update {
            Update::ExactUnitary => {
                let u = self.unitary.data();
                u * sigma * u.adjoint()
            }
            Update::SecondOrder => self.second_order_matrix(sigma),
        }
    }

    fn second_order_matrix(&self, sigma: &DMatrix<C64>) -> DMatrix<C64> {
        let dt = self.config.dt;
        let h = self.hvac.data() + self.vn.data();
        let v = self.vn.data();
        let v2 = v * v;
        let comm = &h * sigma - sigma * &h;
        let diss = v * sigma * v - (&v2 * sigma + sigma * &v2) * C64::new(0.5, 0.0);
        sigma + comm * (-I * dt) + diss * C64::new(dt * dt, 0.0)
    }

    /// Second-order update of a joint state, without positivity checks.
    pub fn second_order_step(&self, sigma: &StateDM) -> Result<StateDM> {
        if sigma.dims() != &self.joint_dims {
            return Err(Error::DimensionMismatch { expected: self.joint_dims.total(), found: sigma.dims().total() });
        }
        StateDM::new_unchecked(self.joint_dims.clone(), self.second_order_matrix(sigma.data()))
    }

    /// One collision with fresh bins; returns the reduced system and bin states.
    pub fn step(&self, rho: &StateDM, bins: &[TimeBinState]) -> Result<StepOutput> {
        let joint = self.joint_state(rho, bins)?;
        let out = self.evolve_joint(&joint);
        let n_sys = self.sys_dims.len();
        let sys_sites: Vec<usize> = (0..n_sys).collect();
        let bin_sites: Vec<usize> = (n_sys..self.joint_dims.len()).collect();
        let full = StateDM::new_unchecked(self.joint_dims.clone(), out)?;
        let system = full.partial_trace(&sys_sites)?;
        let bins_out = full.partial_trace(&bin_sites)?;
        let mut leakage: f64 = 0.0;
        for k in 0..bin_sites.len() {
            leakage = leakage.max(bins_out.top_level_population(k)?);
        }
        for &j in &self.boson_emitters {
            leakage = leakage.max(system.top_level_population(j)?);
        }
        Ok(StepOutput { system, bins: bins_out, leakage })
    }
}

/// Supplies the fresh bins for each collision.
pub trait BinSource {
    /// Bins for step `step` (1-based), which spans `[t_end - dt, t_end]`.
    fn bins(&mut self, step: usize, t_end: f64, dt: f64) -> Result<Vec<TimeBinState>>;
}

/// Pre-built bins, one entry per step.
pub struct VecSource(pub Vec<Vec<TimeBinState>>);

impl BinSource for VecSource {
    fn bins(&mut self, step: usize, _t_end: f64, _dt: f64) -> Result<Vec<TimeBinState>> {
        self.0
            .get(step - 1)
            .cloned()
            .ok_or_else(|| Error::invalid(format!("bin source exhausted at step {step}")))
    }
}

/// The same bins at every step.
pub struct ConstantSource(pub Vec<TimeBinState>);

impl BinSource for ConstantSource {
    fn bins(&mut self, _step: usize, _t_end: f64, _dt: f64) -> Result<Vec<TimeBinState>> {
        Ok(self.0.clone())
    }
}

/// Bins drawn from a white-noise Gaussian input. Noise-free bins are pure
/// coherent states; the last state per direction is reused while the
/// moments are unchanged.
pub struct GaussianSource {
    input: GaussianInput,
    cutoff: usize,
    n_bins: usize,
    cache: Vec<Option<(BinMoments, TimeBinState)>>,
}

impl GaussianSource {
    pub fn new(input: GaussianInput, cutoff: usize, mode: Mode) -> Result<Self> {
        input.validate()?;
        let n_bins = match mode {
            Mode::Unidirectional => 1,
            Mode::Bidirectional => 2,
        };
        Ok(GaussianSource { input, cutoff, n_bins, cache: vec![None; n_bins] })
    }

    fn state_for(moments: &BinMoments, cutoff: usize, dt: f64) -> Result<TimeBinState> {
        if moments.n == 0.0 && moments.m == C64::new(0.0, 0.0) {
            coherent_bin(moments.mean / dt.sqrt(), dt, cutoff)
        } else {
            gaussian_bin_state(moments, cutoff)
        }
    }
}

impl BinSource for GaussianSource {
    fn bins(&mut self, _step: usize, t_end: f64, dt: f64) -> Result<Vec<TimeBinState>> {
        let (r, l) = bin_moments(&self.input, t_end, dt)?;
        let wanted = [r, l];
        let mut out = Vec::with_capacity(self.n_bins);
        for (k, m) in wanted.iter().take(self.n_bins).enumerate() {
            match &self.cache[k] {
                Some((cm, st)) if cm == m => out.push(st.clone()),
                _ => {
                    let st = Self::state_for(m, self.cutoff, dt)?;
                    self.cache[k] = Some((*m, st.clone()));
                    out.push(st);
                }
            }
        }
        Ok(out)
    }
}

/// Output of a conveyor run.
#[derive(Clone, Debug)]
pub struct ConveyorOutput {
    pub times: Vec<f64>,
    pub states: Vec<StateDM>,
    /// `(step, bin input, bin output)` at the output stride, when requested.
    pub bins: Vec<(usize, DMatrix<C64>, StateDM)>,
    pub max_leakage: f64,
    pub leakage_flagged: bool,
    /// Smallest eigenvalue seen over the recorded system states.
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

/// Run `config.n_steps` collisions, recording every `stride`-th state (plus
/// the initial and final ones).
pub fn run_conveyor(
    rho0: &StateDM,
    source: &mut dyn BinSource,
    engine: &CollisionEngine,
    stride: usize,
    keep_bins: bool,
) -> Result<ConveyorOutput> {
    let stride = stride.max(1);
    let cfg = engine.config();
    let mut rho = rho0.clone();
    let mut out = ConveyorOutput {
        times: vec![0.0],
        states: vec![rho.clone()],
        bins: Vec::new(),
        max_leakage: 0.0,
        leakage_flagged: false,
        min_eigenvalue: rho0.min_eigenvalue(),
        warnings: engine.warnings().to_vec(),
    };
    for n in 1..=cfg.n_steps {
        let t = n as f64 * cfg.dt;
        let bins = source.bins(n, t, cfg.dt)?;
        let step = engine.step(&rho, &bins)?;
        out.max_leakage = out.max_leakage.max(step.leakage);
        rho = step.system;
        let record = n % stride == 0 || n == cfg.n_steps;
        if keep_bins && record {
            let mut input = DMatrix::<C64>::identity(1, 1);
            for b in &bins {
                input = input.kronecker(&b.density());
            }
            out.bins.push((n, input, step.bins));
        }
        if record {
            out.min_eigenvalue = out.min_eigenvalue.min(min_eigenvalue(rho.data()));
            out.times.push(t);
            out.states.push(rho.clone());
        }
    }
    if out.max_leakage > LEAKAGE_THRESHOLD {
        out.leakage_flagged = true;
        out.warnings.push(format!(
            "top Fock level population reached {:.3e} (threshold {LEAKAGE_THRESHOLD:e})",
            out.max_leakage
        ));
    }
    if cfg.update == Update::SecondOrder && out.min_eigenvalue < -1e-10 {
        out.warnings.push(format!("second-order update lost positivity (min eigenvalue {:.3e})", out.min_eigenvalue));
    }
    Ok(out)
}
