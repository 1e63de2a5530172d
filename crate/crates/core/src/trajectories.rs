//! Photodetection unravelings: Kraus operators of one collision followed by a
//! projective measurement of the outgoing bin(s), their small-`dt` expansion,
//! the effective Hamiltonian and jump operators, and Monte Carlo sampling.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::collision::{BinSource, CollisionEngine, Mode};
use crate::error::{Error, Result};
use crate::field::{Expansion, TimeBinState};
use crate::geometry::CollectiveOps;
use crate::operator::{hermitian_eigen, HilbertDims, Operator, StateDM, I, ONE, ZERO};

/// Allowed deviation of the summed outcome probabilities from one.
pub const PROBABILITY_TOL: f64 = 1e-8;

/// Trajectories per work unit; the ensemble reduction runs over units in order.
const CHUNK: usize = 32;

/// Measurement basis of the outgoing bin(s); column `k` holds `|k>`.
#[derive(Clone, Debug, PartialEq)]
pub struct DetectionScheme {
    pub name: String,
    right: DMatrix<C64>,
    left: Option<DMatrix<C64>>,
}

fn check_unitary(m: &DMatrix<C64>) -> Result<()> {
    if m.nrows() != m.ncols() || m.nrows() < 2 {
        return Err(Error::invalid("measurement basis must be a square matrix of size >= 2"));
    }
    let n = m.nrows();
    let dev = (m.adjoint() * m - DMatrix::<C64>::identity(n, n)).norm();
    if dev > 1e-10 {
        return Err(Error::invalid(format!("measurement basis is not orthonormal (deviation {dev:.2e})")));
    }
    Ok(())
}

impl DetectionScheme {
    pub fn new(name: impl Into<String>, right: DMatrix<C64>, left: Option<DMatrix<C64>>) -> Result<Self> {
        check_unitary(&right)?;
        if let Some(l) = &left {
            check_unitary(l)?;
        }
        Ok(DetectionScheme { name: name.into(), right, left })
    }

    /// Fock-basis counting on the right-going bin.
    pub fn photon_counting(cutoff: usize) -> Result<Self> {
        Self::new("photon-counting", DMatrix::identity(cutoff, cutoff), None)
    }

    /// Fock-basis counting on both outgoing bins.
    pub fn photon_counting_both(cutoff: usize) -> Result<Self> {
        Self::new("photon-counting", DMatrix::identity(cutoff, cutoff), Some(DMatrix::identity(cutoff, cutoff)))
    }

    pub fn mode(&self) -> Mode {
        if self.left.is_some() {
            Mode::Bidirectional
        } else {
            Mode::Unidirectional
        }
    }

    pub fn cutoff(&self) -> usize {
        self.right.nrows()
    }

    pub fn n_outcomes(&self) -> usize {
        self.joint_basis().ncols()
    }

    /// Outcome labels `(k, k')`; a flattened index is `k * d' + k'`.
    pub fn outcome_label(&self, idx: usize) -> (usize, Option<usize>) {
        match &self.left {
            None => (idx, None),
            Some(l) => (idx / l.nrows(), Some(idx % l.nrows())),
        }
    }

    /// Basis on the joint bin space (right ⊗ left).
    pub fn joint_basis(&self) -> DMatrix<C64> {
        match &self.left {
            None => self.right.clone(),
            Some(l) => self.right.kronecker(l),
        }
    }

    fn check_engine(&self, engine: &CollisionEngine) -> Result<()> {
        let cfg = engine.config();
        if cfg.mode != self.mode() {
            return Err(Error::invalid("detection scheme and collision mode disagree on the number of bins"));
        }
        if cfg.bin_cutoff != self.cutoff() {
            return Err(Error::DimensionMismatch { expected: cfg.bin_cutoff, found: self.cutoff() });
        }
        Ok(())
    }
}

fn pure_joint(bins: &[TimeBinState]) -> Result<DVector<C64>> {
    let mut v = DVector::from_element(1, ONE);
    for b in bins {
        match b.pure_vector() {
            Some(p) => v = v.kronecker(p),
            None => return Err(Error::InvalidState("Kraus operators need pure bin states".into())),
        }
    }
    Ok(v)
}

/// `U` applied to `|chi>` on the bin factor: `(S*B) x S` matrix.
fn apply_to_bin(u: &DMatrix<C64>, s: usize, chi: &DVector<C64>) -> DMatrix<C64> {
    let b = chi.len();
    let mut out = DMatrix::<C64>::zeros(s * b, s);
    for sp in 0..s {
        let block = u.columns(sp * b, b);
        out.set_column(sp, &(block * chi));
    }
    out
}

/// `<k| M` for every basis column: one `S x S` operator per outcome.
fn project_outcomes(m: &DMatrix<C64>, s: usize, basis: &DMatrix<C64>) -> Vec<DMatrix<C64>> {
    let b = basis.nrows();
    (0..basis.ncols())
        .map(|k| {
            let kv = basis.column(k);
            DMatrix::from_fn(s, m.ncols(), |r, c| {
                let mut acc = ZERO;
                for j in 0..b {
                    acc += kv[j].conj() * m[(r * b + j, c)];
                }
                acc
            })
        })
        .collect()
}

/// `K_k = <k| U |chi>` for a joint unitary on system ⊗ bins.
pub fn kraus(u: &Operator, sys_dims: &HilbertDims, bins: &[TimeBinState], scheme: &DetectionScheme) -> Result<Vec<Operator>> {
    let chi = pure_joint(bins)?;
    let basis = scheme.joint_basis();
    let s = sys_dims.total();
    if basis.nrows() != chi.len() || u.data().nrows() != s * chi.len() {
        return Err(Error::DimensionMismatch { expected: u.data().nrows(), found: s * chi.len() });
    }
    let m = apply_to_bin(u.data(), s, &chi);
    project_outcomes(&m, s, &basis).into_iter().map(|k| Operator::new(sys_dims.clone(), k)).collect()
}

/// Kraus family of one collision of `engine`.
pub fn kraus_family(engine: &CollisionEngine, bins: &[TimeBinState], scheme: &DetectionScheme) -> Result<Vec<Operator>> {
    scheme.check_engine(engine)?;
    kraus(engine.unitary(), engine.system_dims(), bins, scheme)
}

/// One member `sqrt(q) <k| U |chi_branch>` of the family for a mixed bin.
#[derive(Clone, Debug)]
pub struct MixedKraus {
    pub outcome: usize,
    pub branch: usize,
    pub weight: f64,
    pub op: Operator,
}

/// Kraus family for a mixed joint bin state `eta`, via its spectral decomposition.
pub fn mixed_bin_kraus(u: &Operator, sys_dims: &HilbertDims, eta: &DMatrix<C64>, scheme: &DetectionScheme) -> Result<Vec<MixedKraus>> {
    let basis = scheme.joint_basis();
    if eta.nrows() != basis.nrows() {
        return Err(Error::DimensionMismatch { expected: basis.nrows(), found: eta.nrows() });
    }
    let s = sys_dims.total();
    let (vals, vecs) = hermitian_eigen(eta);
    let mut out = Vec::new();
    let mut branch = 0;
    for (q, v) in vals.iter().zip(vecs.column_iter()) {
        if *q <= 1e-14 {
            continue;
        }
        let m = apply_to_bin(u.data(), s, &v.into_owned());
        for (k, op) in project_outcomes(&m, s, &basis).into_iter().enumerate() {
            out.push(MixedKraus { outcome: k, branch, weight: *q, op: Operator::new(sys_dims.clone(), op * C64::new(q.sqrt(), 0.0))? });
        }
        branch += 1;
    }
    Ok(out)
}

/// `K = K0 + sqrt(dt) K1 + dt K2` for one outcome.
#[derive(Clone, Debug)]
pub struct KrausTerms {
    pub k0: Operator,
    pub k1: Operator,
    pub k2: Operator,
}

impl KrausTerms {
    pub fn reconstruct(&self, dt: f64) -> Operator {
        &(&self.k0 + &self.k1.scale_re(dt.sqrt())) + &self.k2.scale_re(dt)
    }
}

fn expansions<'a>(bins: &'a [TimeBinState], scheme: &DetectionScheme) -> Result<Vec<&'a Expansion>> {
    let want = match scheme.mode() {
        Mode::Unidirectional => 1,
        Mode::Bidirectional => 2,
    };
    if bins.len() != want {
        return Err(Error::DimensionMismatch { expected: want, found: bins.len() });
    }
    bins.iter()
        .map(|b| {
            if b.cutoff() != scheme.cutoff() {
                return Err(Error::DimensionMismatch { expected: scheme.cutoff(), found: b.cutoff() });
            }
            b.expansion().ok_or_else(|| {
                Error::InvalidState("bin state is not vacuum-leading (thermal or squeezed input); photodetection expansions do not apply".into())
            })
        })
        .collect()
}

fn fock(d: usize, n: usize) -> DVector<C64> {
    let mut v = DVector::zeros(d);
    if n < d {
        v[n] = ONE;
    }
    v
}

fn lower(v: &DVector<C64>) -> DVector<C64> {
    DVector::from_fn(v.len(), |n, _| if n + 1 < v.len() { v[n + 1] * ((n + 1) as f64).sqrt() } else { ZERO })
}

fn raise(v: &DVector<C64>) -> DVector<C64> {
    DVector::from_fn(v.len(), |n, _| if n > 0 { v[n - 1] * (n as f64).sqrt() } else { ZERO })
}

/// Per-outcome expansion coefficients of the Kraus operators.
pub fn kraus_expansion(co: &CollectiveOps, bins: &[TimeBinState], scheme: &DetectionScheme) -> Result<Vec<KrausTerms>> {
    let ex = expansions(bins, scheme)?;
    let d = scheme.cutoff();
    let id = Operator::identity(&co.dims);
    let a = &co.a;
    let ad = a.adjoint();
    let sg = C64::new(co.gamma.sqrt(), 0.0);
    let ata = &ad * a;
    let a2 = a * a;
    let (e0, e1, e2) = (fock(d, 0), fock(d, 1), fock(d, 2));
    let s2 = 2f64.sqrt();
    let right = &scheme.right;
    let proj = |basis: &DMatrix<C64>, k: usize, v: &DVector<C64>| basis.column(k).dotc(v);
    let mut out = Vec::new();
    match scheme.mode() {
        Mode::Unidirectional => {
            let x = ex[0];
            let (bx, bdx) = (lower(&x.chi1), raise(&x.chi1));
            for k in 0..d {
                let z = proj(right, k, &e0);
                let k0 = id.scale(z);
                let k1 = &id.scale(proj(right, k, &x.chi1)) + &a.scale(-I * sg * proj(right, k, &e1));
                let mut k2 = id.scale(proj(right, k, &x.chi2));
                k2 = &k2 + &(&ad.scale(proj(right, k, &bx)) + &a.scale(proj(right, k, &bdx))).scale(-I * sg);
                k2 = &k2 + &co.hvac.scale(-I * z);
                k2 = &k2 + &ata.scale(z * (-0.5 * co.gamma));
                k2 = &k2 + &a2.scale(proj(right, k, &e2) * (-co.gamma / s2));
                out.push(KrausTerms { k0, k1, k2 });
            }
        }
        Mode::Bidirectional => {
            let left = scheme.left.as_ref().expect("bidirectional scheme has a left basis");
            let (x, xp) = (ex[0], ex[1]);
            let ap = &co.ap;
            let apd = ap.adjoint();
            let sgp = C64::new(co.gamma_prime.sqrt(), 0.0);
            let aptap = &apd * ap;
            let ap2 = ap * ap;
            let aap = a * ap;
            let (bx, bdx) = (lower(&x.chi1), raise(&x.chi1));
            let (bxp, bdxp) = (lower(&xp.chi1), raise(&xp.chi1));
            for k in 0..d {
                let r = |v: &DVector<C64>| proj(right, k, v);
                for kp in 0..left.nrows() {
                    let l = |v: &DVector<C64>| proj(left, kp, v);
                    let z = r(&e0) * l(&e0);
                    let k0 = id.scale(z);
                    let k1 = &(&id.scale(r(&x.chi1) * l(&e0) + r(&e0) * l(&xp.chi1)) + &a.scale(-I * sg * r(&e1) * l(&e0)))
                        + &ap.scale(-I * sgp * r(&e0) * l(&e1));
                    let c = r(&x.chi2) * l(&e0) + r(&e0) * l(&xp.chi2) + r(&x.chi1) * l(&xp.chi1);
                    let mut k2 = id.scale(c);
                    let mut inner = &ad.scale(sg * r(&bx) * l(&e0)) + &a.scale(sg * r(&bdx) * l(&e0));
                    inner = &inner + &ap.scale(sgp * r(&x.chi1) * l(&e1));
                    inner = &inner + &a.scale(sg * r(&e1) * l(&xp.chi1));
                    inner = &inner + &(&apd.scale(r(&e0) * l(&bxp)) + &ap.scale(r(&e0) * l(&bdxp))).scale(sgp);
                    k2 = &k2 + &inner.scale(-I);
                    k2 = &k2 + &co.hvac.scale(-I * z);
                    k2 = &k2 + &(&ata.scale(C64::new(-0.5 * co.gamma, 0.0)) + &aptap.scale(C64::new(-0.5 * co.gamma_prime, 0.0))).scale(z);
                    k2 = &k2 + &a2.scale(r(&e2) * l(&e0) * (-co.gamma / s2));
                    k2 = &k2 + &ap2.scale(r(&e0) * l(&e2) * (-co.gamma_prime / s2));
                    k2 = &k2 + &aap.scale(r(&e1) * l(&e1) * (-(co.gamma * co.gamma_prime).sqrt()));
                    out.push(KrausTerms { k0, k1, k2 });
                }
            }
        }
    }
    Ok(out)
}

/// Effective Hamiltonian and jump operators of the continuous-time unraveling.
/// Jumps are the first-order Kraus terms of every outcome, zero ones dropped.
pub fn effective_ops(co: &CollectiveOps, bins: &[TimeBinState], scheme: &DetectionScheme) -> Result<(Operator, Vec<(usize, Operator)>)> {
    let ex = expansions(bins, scheme)?;
    let d = scheme.cutoff();
    let mean = |e: &Expansion| fock(d, 0).dotc(&lower(&e.chi1));
    let mut x = co.a.adjoint().scale(mean(ex[0]) * co.gamma.sqrt());
    if scheme.mode() == Mode::Bidirectional {
        x = &x + &co.ap.adjoint().scale(mean(ex[1]) * co.gamma_prime.sqrt());
    }
    let h = &co.hvac + &(&x + &x.adjoint()).scale_re(0.5);
    let jumps = kraus_expansion(co, bins, scheme)?
        .into_iter()
        .enumerate()
        .filter(|(_, t)| t.k1.norm_fro() > 1e-14)
        .map(|(k, t)| (k, t.k1))
        .collect();
    Ok((h, jumps))
}

/// Detection probability per unit time of one photon in each direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickRate {
    pub right: f64,
    pub left: f64,
}

impl ClickRate {
    pub fn total(&self) -> f64 {
        self.right + self.left
    }
}

/// `|c|^2 + (i sqrt(g) c <A^dag> + c.c.) + g <A^dag A>` with `c = <1|chi1>`,
/// plus the left-going analogue when two bins are given.
pub fn click_rate(rho: &StateDM, co: &CollectiveOps, bins: &[TimeBinState]) -> Result<ClickRate> {
    let one = |b: &TimeBinState| -> Result<C64> {
        let e = b.expansion().ok_or_else(|| Error::InvalidState("bin state is not vacuum-leading".into()))?;
        Ok(e.chi1[1])
    };
    let block = |c: C64, rate: f64, a: &Operator| {
        let ad = a.adjoint();
        let m = rho.expect(&ad);
        let n = rho.expect(&(&ad * a)).re;
        c.norm_sqr() + 2.0 * (I * rate.sqrt() * c * m).re + rate * n
    };
    let right = block(one(&bins[0])?, co.gamma, &co.a);
    let left = match bins.get(1) {
        Some(b) => block(one(b)?, co.gamma_prime, &co.ap),
        None => 0.0,
    };
    Ok(ClickRate { right, left })
}

/// Kraus families for every step of a run, shared between trajectories.
#[derive(Clone, Debug)]
pub struct KrausSchedule {
    pub dt: f64,
    pub n_steps: usize,
    sys_dims: HilbertDims,
    families: Vec<Vec<DMatrix<C64>>>,
    step_family: Vec<usize>,
    n_outcomes: usize,
    vacuum_outcome: usize,
}

impl KrausSchedule {
    /// Pull `n_steps` bins from `source` and build the exact Kraus operators,
    /// reusing a family while the bins repeat.
    pub fn build(engine: &CollisionEngine, source: &mut dyn BinSource, scheme: &DetectionScheme) -> Result<Self> {
        scheme.check_engine(engine)?;
        let cfg = engine.config();
        let mut families: Vec<Vec<DMatrix<C64>>> = Vec::new();
        let mut step_family = Vec::with_capacity(cfg.n_steps);
        let mut last: Option<Vec<TimeBinState>> = None;
        let id = DMatrix::<C64>::identity(engine.system_dims().total(), engine.system_dims().total());
        for n in 1..=cfg.n_steps {
            let bins = source.bins(n, n as f64 * cfg.dt, cfg.dt)?;
            if last.as_ref() != Some(&bins) {
                expansions(&bins, scheme)?;
                let fam: Vec<DMatrix<C64>> = kraus_family(engine, &bins, scheme)?.into_iter().map(Operator::into_data).collect();
                let sum = fam.iter().fold(DMatrix::<C64>::zeros(id.nrows(), id.ncols()), |acc, k| acc + k.adjoint() * k);
                let dev = (sum - &id).norm();
                if dev > PROBABILITY_TOL {
                    return Err(Error::Numerical(format!("Kraus family incomplete at step {n} (deviation {dev:.2e})")));
                }
                families.push(fam);
                last = Some(bins);
            }
            step_family.push(families.len() - 1);
        }
        // outcome whose basis vector is closest to vacuum
        let basis = scheme.joint_basis();
        let vacuum_outcome = (0..basis.ncols()).max_by(|&a, &b| basis[(0, a)].norm().total_cmp(&basis[(0, b)].norm())).unwrap_or(0);
        Ok(KrausSchedule {
            dt: cfg.dt,
            n_steps: cfg.n_steps,
            sys_dims: engine.system_dims().clone(),
            families,
            step_family,
            n_outcomes: scheme.n_outcomes(),
            vacuum_outcome,
        })
    }

    pub fn family(&self, step: usize) -> &[DMatrix<C64>] {
        &self.families[self.step_family[step - 1]]
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn system_dims(&self) -> &HilbertDims {
        &self.sys_dims
    }
}

/// One detection: step index (1-based) and flattened outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Event {
    pub step: usize,
    pub outcome: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecord {
    pub seed: u64,
    pub index: u64,
    /// Non-vacuum outcomes only.
    pub events: Vec<Event>,
    pub times: Vec<f64>,
    pub states: Vec<DVector<C64>>,
    /// Sum of log outcome probabilities.
    pub log_weight: f64,
}

/// Per-trajectory stream: the master seed selects the key, the trajectory
/// index the ChaCha stream.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn check_pure(psi0: &DVector<C64>, dims: &HilbertDims) -> Result<()> {
    if psi0.len() != dims.total() {
        return Err(Error::DimensionMismatch { expected: dims.total(), found: psi0.len() });
    }
    let n = psi0.norm_squared();
    if (n - 1.0).abs() > 1e-10 {
        return Err(Error::InvalidState(format!("initial state has norm^2 {n}")));
    }
    Ok(())
}

/// Core sampler. Calls `snap(step, psi)` at step 0, every `stride` steps and at the end.
fn sample(
    psi0: &DVector<C64>,
    schedule: &KrausSchedule,
    rng: &mut ChaCha8Rng,
    stride: usize,
    mut on_event: impl FnMut(Event),
    mut snap: impl FnMut(usize, &DVector<C64>),
) -> Result<f64> {
    let stride = stride.max(1);
    let mut psi = psi0.clone();
    let mut log_w = 0.0;
    snap(0, &psi);
    let mut cands: Vec<DVector<C64>> = Vec::with_capacity(schedule.n_outcomes);
    for n in 1..=schedule.n_steps {
        cands.clear();
        let fam = schedule.family(n);
        let mut probs = Vec::with_capacity(fam.len());
        for k in fam {
            let v = k * &psi;
            probs.push(v.norm_squared());
            cands.push(v);
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROBABILITY_TOL {
            return Err(Error::Numerical(format!("outcome probabilities sum to {total} at step {n}")));
        }
        let r: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut pick = probs.len() - 1;
        for (k, p) in probs.iter().enumerate() {
            acc += p;
            if r < acc {
                pick = k;
                break;
            }
        }
        // never select a zero-probability branch through rounding
        while probs[pick] == 0.0 {
            pick = pick.saturating_sub(1);
        }
        log_w += probs[pick].ln();
        psi = &cands[pick] / C64::new(probs[pick].sqrt(), 0.0);
        if pick != schedule.vacuum_outcome {
            on_event(Event { step: n, outcome: pick });
        }
        if n % stride == 0 || n == schedule.n_steps {
            snap(n, &psi);
        }
    }
    Ok(log_w)
}

/// A single Monte Carlo trajectory with exact Kraus sampling.
pub fn mc_run(psi0: &DVector<C64>, schedule: &KrausSchedule, seed: u64, index: u64, stride: usize) -> Result<TrajectoryRecord> {
    check_pure(psi0, &schedule.sys_dims)?;
    let mut rng = trajectory_rng(seed, index);
    let mut events = Vec::new();
    let mut times = Vec::new();
    let mut states = Vec::new();
    let dt = schedule.dt;
    let log_weight = sample(psi0, schedule, &mut rng, stride, |e| events.push(e), |n, psi| {
        times.push(n as f64 * dt);
        states.push(psi.clone());
    })?;
    Ok(TrajectoryRecord { seed, index, events, times, states, log_weight })
}

/// Averages over an ensemble of trajectories.
#[derive(Clone, Debug)]
pub struct EnsembleOutput {
    pub n_traj: usize,
    pub times: Vec<f64>,
    pub mean: Vec<StateDM>,
    /// Standard error of each density-matrix entry (real and imaginary parts combined).
    pub stderr: Vec<DMatrix<f64>>,
    /// Mean and standard error of the number of clicks per trajectory.
    pub clicks_mean: f64,
    pub clicks_stderr: f64,
    /// Time of the first click of each trajectory, in trajectory order.
    pub first_click: Vec<Option<f64>>,
}

#[derive(Clone, Debug)]
struct Accumulator {
    sum: Vec<DMatrix<C64>>,
    sum_sq: Vec<DMatrix<f64>>,
    clicks: f64,
    clicks_sq: f64,
    first_click: Vec<Option<f64>>,
}

impl Accumulator {
    fn new(n_snap: usize, d: usize) -> Self {
        Accumulator {
            sum: vec![DMatrix::zeros(d, d); n_snap],
            sum_sq: vec![DMatrix::zeros(d, d); n_snap],
            clicks: 0.0,
            clicks_sq: 0.0,
            first_click: Vec::new(),
        }
    }

    fn merge(&mut self, o: Accumulator) {
        for (a, b) in self.sum.iter_mut().zip(o.sum) {
            *a += b;
        }
        for (a, b) in self.sum_sq.iter_mut().zip(o.sum_sq) {
            *a += b;
        }
        self.clicks += o.clicks;
        self.clicks_sq += o.clicks_sq;
        self.first_click.extend(o.first_click);
    }
}

fn snapshot_steps(n_steps: usize, stride: usize) -> Vec<usize> {
    let stride = stride.max(1);
    let mut v: Vec<usize> = (0..=n_steps).filter(|n| n % stride == 0).collect();
    if *v.last().unwrap() != n_steps {
        v.push(n_steps);
    }
    v
}

/// Average `n_traj` trajectories (indices `0..n_traj`). Work is split into
/// fixed chunks and reduced in chunk order, so the result does not depend on
/// the number of threads.
pub fn ensemble_average(
    psi0: &DVector<C64>,
    schedule: &KrausSchedule,
    n_traj: usize,
    seed: u64,
    stride: usize,
    threads: Option<usize>,
) -> Result<EnsembleOutput> {
    check_pure(psi0, &schedule.sys_dims)?;
    if n_traj == 0 {
        return Err(Error::invalid("n_traj must be >= 1"));
    }
    let steps = snapshot_steps(schedule.n_steps, stride);
    let d = schedule.sys_dims.total();
    let n_chunks = n_traj.div_ceil(CHUNK);
    let run_chunk = |c: usize| -> Result<Accumulator> {
        let mut acc = Accumulator::new(steps.len(), d);
        for idx in (c * CHUNK)..((c + 1) * CHUNK).min(n_traj) {
            let mut rng = trajectory_rng(seed, idx as u64);
            let mut slot = 0;
            let mut clicks = 0usize;
            let mut first = None;
            let (sum, sum_sq) = (&mut acc.sum, &mut acc.sum_sq);
            sample(
                psi0,
                schedule,
                &mut rng,
                stride,
                |e| {
                    clicks += 1;
                    if first.is_none() {
                        first = Some(e.step as f64 * schedule.dt);
                    }
                },
                |_, psi| {
                    let rho = psi * psi.adjoint();
                    sum_sq[slot] += rho.map(|z| z.norm_sqr());
                    sum[slot] += rho;
                    slot += 1;
                },
            )?;
            acc.clicks += clicks as f64;
            acc.clicks_sq += (clicks * clicks) as f64;
            acc.first_click.push(first);
        }
        Ok(acc)
    };
    let chunks: Vec<Result<Accumulator>> = match threads {
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t.max(1))
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
            pool.install(|| (0..n_chunks).into_par_iter().map(run_chunk).collect())
        }
        None => (0..n_chunks).into_par_iter().map(run_chunk).collect(),
    };
    let mut total = Accumulator::new(steps.len(), d);
    for c in chunks {
        total.merge(c?);
    }
    let n = n_traj as f64;
    let mut mean = Vec::with_capacity(steps.len());
    let mut stderr = Vec::with_capacity(steps.len());
    for (s, sq) in total.sum.iter().zip(&total.sum_sq) {
        let m = s / C64::new(n, 0.0);
        let var = DMatrix::from_fn(d, d, |r, c| {
            let v = sq[(r, c)] / n - m[(r, c)].norm_sqr();
            v.max(0.0) * n / (n - 1.0).max(1.0)
        });
        stderr.push(var.map(|v| (v / n).sqrt()));
        mean.push(StateDM::new_unchecked(schedule.sys_dims.clone(), m)?);
    }
    let cm = total.clicks / n;
    let cvar = (total.clicks_sq / n - cm * cm).max(0.0) * n / (n - 1.0).max(1.0);
    Ok(EnsembleOutput {
        n_traj,
        times: steps.iter().map(|&k| k as f64 * schedule.dt).collect(),
        mean,
        stderr,
        clicks_mean: cm,
        clicks_stderr: (cvar / n).sqrt(),
        first_click: total.first_click,
    })
}
