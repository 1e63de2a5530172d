//! Gaussian white-noise master equation in Kossakowski form over the basis
//! `[A, A^dag, A', A'^dag]`, its RK4 integration, and per-emitter coefficient
//! tables.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::field::GaussianInput;
use crate::geometry::CollectiveOps;
use crate::operator::{hermitian_eigen, min_eigenvalue, Operator, StateDM, I, ONE, ZERO};

/// Tolerance below which the smallest Kossakowski eigenvalue still counts as PSD.
pub const CPT_TOL: f64 = 1e-10;

/// `L(rho) = -i[H, rho] + Σ κ_{μν} (C_ν rho C_μ^† - ½{C_μ^† C_ν, rho})`.
#[derive(Clone, Debug)]
pub struct LindbladGenerator {
    pub h: Operator,
    /// `[A, A^dag, A', A'^dag]`.
    pub basis: [Operator; 4],
    pub kossakowski: DMatrix<C64>,
}

fn kossakowski(co: &CollectiveOps, g: &GaussianInput) -> DMatrix<C64> {
    let mut k = DMatrix::<C64>::zeros(4, 4);
    let blocks = [(0, co.gamma, g.n, g.m), (2, co.gamma_prime, g.n_p, g.m_p)];
    for (o, rate, n, m) in blocks {
        k[(o, o)] = C64::new(rate * (n + 1.0), 0.0);
        k[(o + 1, o + 1)] = C64::new(rate * n, 0.0);
        k[(o, o + 1)] = m * rate;
        k[(o + 1, o)] = m.conj() * rate;
    }
    k
}

/// Coherent part of the input: `sqrt(g)(α* A + α A^dag) + sqrt(g')(α'* A' + α' A'^dag)`.
fn drive(co: &CollectiveOps, alpha: C64, alpha_p: C64) -> Operator {
    let mut d = Operator::zeros(&co.dims);
    if alpha != ZERO && co.gamma > 0.0 {
        let x = co.a.scale(alpha.conj() * co.gamma.sqrt());
        d = &d + &(&x + &x.adjoint());
    }
    if alpha_p != ZERO && co.gamma_prime > 0.0 {
        let x = co.ap.scale(alpha_p.conj() * co.gamma_prime.sqrt());
        d = &d + &(&x + &x.adjoint());
    }
    d
}

/// Generator at time `t` for collective operators `co` and input `g`.
pub fn build_generator(co: &CollectiveOps, g: &GaussianInput, t: f64) -> Result<LindbladGenerator> {
    g.validate()?;
    let h = &co.hvac + &drive(co, g.alpha.value_at(t), g.alpha_p.value_at(t));
    Ok(LindbladGenerator {
        h,
        basis: [co.a.clone(), co.a.adjoint(), co.ap.clone(), co.ap.adjoint()],
        kossakowski: kossakowski(co, g),
    })
}

/// Precomputed pieces for `L(rho) = -i(Heff rho - rho Heff^†) + Σ κ C_ν rho C_μ^†`.
#[derive(Clone, Debug)]
struct Compiled {
    heff: DMatrix<C64>,
    heff_dag: DMatrix<C64>,
    sandwich: Vec<(C64, DMatrix<C64>, DMatrix<C64>)>,
}

impl LindbladGenerator {
    fn compile(&self) -> Compiled {
        let mut heff = self.h.data().clone();
        let mut sandwich = Vec::new();
        for mu in 0..4 {
            for nu in 0..4 {
                let k = self.kossakowski[(mu, nu)];
                if k == ZERO {
                    continue;
                }
                let cmu_dag = self.basis[mu].data().adjoint();
                let cnu = self.basis[nu].data();
                heff -= (&cmu_dag * cnu) * (I * 0.5 * k);
                sandwich.push((k, cnu.clone(), cmu_dag));
            }
        }
        Compiled { heff_dag: heff.adjoint(), heff, sandwich }
    }

    /// `L(rho)`.
    pub fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        self.compile().apply(rho)
    }

    /// Matrix of `L` acting on column-stacked density matrices.
    pub fn superoperator_matrix(&self) -> DMatrix<C64> {
        let c = self.compile();
        let d = self.h.data().nrows();
        let mut s = DMatrix::<C64>::zeros(d * d, d * d);
        for col in 0..d {
            for row in 0..d {
                let mut e = DMatrix::<C64>::zeros(d, d);
                e[(row, col)] = ONE;
                let out = c.apply(&e);
                s.column_mut(col * d + row).copy_from_slice(out.as_slice());
            }
        }
        s
    }

    /// Smallest eigenvalue of the Kossakowski matrix and whether it clears `-CPT_TOL`.
    pub fn is_cpt(&self) -> (bool, f64) {
        is_cpt_matrix(&self.kossakowski)
    }
}

impl Compiled {
    fn apply(&self, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = (&self.heff * rho - rho * &self.heff_dag) * (-I);
        for (k, l, r) in &self.sandwich {
            out += (l * rho * r) * *k;
        }
        out
    }
}

/// PSD check of a Hermitian coefficient matrix.
pub fn is_cpt_matrix(kappa: &DMatrix<C64>) -> (bool, f64) {
    let herm = (kappa + kappa.adjoint()) * C64::new(0.5, 0.0);
    let (ev, _) = hermitian_eigen(&herm);
    let lo = ev[0];
    (lo >= -CPT_TOL, lo)
}

/// Column-stacked superoperator of `-i[H, ·] + Σ D[J](·)` built from
/// `vec(A X B) = (B^T ⊗ A) vec(X)`.
pub fn lindblad_superoperator(h: &DMatrix<C64>, jumps: &[DMatrix<C64>]) -> DMatrix<C64> {
    let d = h.nrows();
    let id = DMatrix::<C64>::identity(d, d);
    let mut s = (id.kronecker(h) - h.transpose().kronecker(&id)) * (-I);
    for j in jumps {
        let jd = j.adjoint();
        let jdj = &jd * j;
        s += j.conjugate().kronecker(j);
        s -= (id.kronecker(&jdj) + jdj.transpose().kronecker(&id)) * C64::new(0.5, 0.0);
    }
    s
}

/// Unidirectional generator written term by term, without the Kossakowski
/// machinery: drive, `γ(N+1)D[A]`, `γN D[A^dag]` and the two squeezing terms.
pub fn unidirectional_rhs(co: &CollectiveOps, g: &GaussianInput, t: f64, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let a = co.a.data();
    let ad = a.adjoint();
    let alpha = g.alpha.value_at(t);
    let sg = co.gamma.sqrt();
    let h = co.hvac.data() + (a * alpha.conj() + &ad * alpha) * C64::new(sg, 0.0);
    let dis = |l: &DMatrix<C64>, r: &DMatrix<C64>| {
        // l rho r - ½{r l, rho}
        let rl = r * l;
        l * rho * r - (&rl * rho + rho * &rl) * C64::new(0.5, 0.0)
    };
    let mut out = (&h * rho - rho * &h) * (-I);
    out += dis(a, &ad) * C64::new(co.gamma * (g.n + 1.0), 0.0);
    out += dis(&ad, a) * C64::new(co.gamma * g.n, 0.0);
    out += dis(&ad, &ad) * (g.m * co.gamma);
    out += dis(a, a) * (g.m.conj() * co.gamma);
    out
}

/// Per-emitter coefficients keyed `"H[i][j]"`, `"decay[i][j]"`, `"heat[i][j]"`,
/// `"squeeze[i][j]"`. `H[i][j]` multiplies `A_i^dag A_j`; `decay[i][j]`
/// multiplies `A_i rho A_j^dag - ½{A_j^dag A_i, rho}`; `heat[i][j]` multiplies
/// `A_i^dag rho A_j - ½{A_j A_i^dag, rho}`; `squeeze[i][j]` multiplies
/// `A_i^dag rho A_j^dag - ½{A_j^dag A_i^dag, rho}` (plus its conjugate term).
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub n_emitters: usize,
    pub entries: BTreeMap<String, C64>,
}

impl CoefficientTable {
    pub fn get(&self, kind: &str, i: usize, j: usize) -> C64 {
        self.entries.get(&format!("{kind}[{i}][{j}]")).copied().unwrap_or(ZERO)
    }

    pub fn matrix(&self, kind: &str) -> DMatrix<C64> {
        DMatrix::from_fn(self.n_emitters, self.n_emitters, |i, j| self.get(kind, i, j))
    }
}

pub const TABLE_KINDS: [&str; 4] = ["H", "decay", "heat", "squeeze"];

/// Coefficient table computed directly from point phases and rates.
pub fn coefficient_table(co: &CollectiveOps, g: &GaussianInput) -> Result<CoefficientTable> {
    g.validate()?;
    let ne = co.n_emitters();
    let (gm, gp) = (co.gamma, co.gamma_prime);
    let mut c = vec![ZERO; ne];
    let mut cp = vec![ZERO; ne];
    for (nu, &j) in co.emitter_of.iter().enumerate() {
        c[j] += C64::from_polar(1.0, -co.phis[nu]);
        cp[j] += C64::from_polar(1.0, co.phis[nu]);
    }
    let mut x = DMatrix::<C64>::zeros(ne, ne);
    for nu in 0..co.n_points() {
        for nup in 0..nu {
            let (j, jp) = (co.emitter_of[nu], co.emitter_of[nup]);
            let ph = C64::from_polar(1.0, co.phis[nup] - co.phis[nu]);
            x[(jp, j)] += ph * gm;
            x[(j, jp)] += ph * gp;
        }
    }
    let mut entries = BTreeMap::new();
    for i in 0..ne {
        for j in 0..ne {
            let h = (x[(i, j)] - x[(j, i)].conj()) * (I * 0.5);
            let decay = c[i] * c[j].conj() * (gm * (g.n + 1.0)) + cp[i] * cp[j].conj() * (gp * (g.n_p + 1.0));
            let heat = c[i].conj() * c[j] * (gm * g.n) + cp[i].conj() * cp[j] * (gp * g.n_p);
            let sq = c[i].conj() * c[j].conj() * g.m * gm + cp[i].conj() * cp[j].conj() * g.m_p * gp;
            for (k, v) in TABLE_KINDS.iter().zip([h, decay, heat, sq]) {
                entries.insert(format!("{k}[{i}][{j}]"), v);
            }
        }
    }
    Ok(CoefficientTable { n_emitters: ne, entries })
}

/// Rebuild the generator's action from a coefficient table and the local
/// ladder operators (drive excluded).
pub fn table_rhs(table: &CoefficientTable, local: &[Operator], rho: &DMatrix<C64>) -> DMatrix<C64> {
    let half = C64::new(0.5, 0.0);
    let mut h = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
    let mut out = DMatrix::<C64>::zeros(rho.nrows(), rho.ncols());
    for (i, ai) in local.iter().enumerate() {
        let ai = ai.data();
        let aid = ai.adjoint();
        for (j, aj) in local.iter().enumerate() {
            let aj = aj.data();
            let ajd = aj.adjoint();
            h += (&aid * aj) * table.get("H", i, j);
            let term = |l: &DMatrix<C64>, r: &DMatrix<C64>| {
                let rl = r * l;
                l * rho * r - (&rl * rho + rho * &rl) * half
            };
            out += term(ai, &ajd) * table.get("decay", i, j);
            out += term(&aid, aj) * table.get("heat", i, j);
            let s = table.get("squeeze", i, j);
            out += term(&aid, &ajd) * s + term(aj, ai) * s.conj();
        }
    }
    out + (&h * rho - rho * &h) * (-I)
}

/// Integration output.
#[derive(Clone, Debug)]
pub struct MeOutput {
    pub times: Vec<f64>,
    pub states: Vec<StateDM>,
    pub max_trace_drift: f64,
    pub min_eigenvalue: f64,
    pub warnings: Vec<String>,
}

/// Master equation with a possibly time-dependent coherent drive.
#[derive(Clone, Debug)]
pub struct MasterEquation {
    co: CollectiveOps,
    input: GaussianInput,
    base: Compiled,
    static_generator: LindbladGenerator,
}

impl MasterEquation {
    pub fn new(co: &CollectiveOps, input: &GaussianInput) -> Result<Self> {
        let zero_drive = GaussianInput {
            alpha: crate::field::Amplitude::zero(),
            alpha_p: crate::field::Amplitude::zero(),
            ..input.clone()
        };
        let static_generator = build_generator(co, &zero_drive, 0.0)?;
        Ok(MasterEquation { base: static_generator.compile(), co: co.clone(), input: input.clone(), static_generator })
    }

    pub fn generator_at(&self, t: f64) -> Result<LindbladGenerator> {
        build_generator(&self.co, &self.input, t)
    }

    /// Part of the generator that does not depend on time.
    pub fn static_generator(&self) -> &LindbladGenerator {
        &self.static_generator
    }

    /// Largest admissible integration step.
    pub fn max_step(&self) -> f64 {
        let drive = self.co.gamma.sqrt() * self.input.alpha.max_abs()
            + self.co.gamma_prime.sqrt() * self.input.alpha_p.max_abs();
        0.01 / self.co.gamma.max(self.co.gamma_prime).max(drive)
    }

    pub fn rhs(&self, t: f64, rho: &DMatrix<C64>) -> DMatrix<C64> {
        let mut out = self.base.apply(rho);
        let alpha = self.input.alpha.value_at(t);
        let alpha_p = self.input.alpha_p.value_at(t);
        if alpha != ZERO || alpha_p != ZERO {
            let d = drive(&self.co, alpha, alpha_p);
            out -= (d.data() * rho - rho * d.data()) * I;
        }
        out
    }

    /// Fixed-step RK4 from 0 to `t_end` with step at most `dt_int`, recording
    /// every `stride`-th state and the last one.
    pub fn integrate(&self, rho0: &StateDM, t_end: f64, dt_int: f64, stride: usize) -> Result<MeOutput> {
        if rho0.dims() != &self.co.dims {
            return Err(Error::DimensionMismatch { expected: self.co.dims.total(), found: rho0.dims().total() });
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            return Err(Error::invalid(format!("end time {t_end} must be finite and >= 0")));
        }
        let limit = self.max_step();
        if !(dt_int > 0.0) || dt_int > limit * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("integration step {dt_int} must lie in (0, {limit:.3e}]")));
        }
        let n = (t_end / dt_int).ceil() as usize;
        let h = if n == 0 { 0.0 } else { t_end / n as f64 };
        let stride = stride.max(1);
        let mut rho = rho0.data().clone();
        let mut out = MeOutput {
            times: vec![0.0],
            states: vec![rho0.clone()],
            max_trace_drift: 0.0,
            min_eigenvalue: min_eigenvalue(&rho),
            warnings: Vec::new(),
        };
        let c = |x: f64| C64::new(x, 0.0);
        for s in 0..n {
            let t = s as f64 * h;
            let k1 = self.rhs(t, &rho);
            let k2 = self.rhs(t + h / 2.0, &(&rho + &k1 * c(h / 2.0)));
            let k3 = self.rhs(t + h / 2.0, &(&rho + &k2 * c(h / 2.0)));
            let k4 = self.rhs(t + h, &(&rho + &k3 * c(h)));
            rho += (k1 + (k2 + k3) * c(2.0) + k4) * c(h / 6.0);
            let drift = (rho.trace() - ONE).norm();
            out.max_trace_drift = out.max_trace_drift.max(drift);
            if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Numerical(format!("non-finite state at t = {}", t + h)));
            }
            if (s + 1) % stride == 0 || s + 1 == n {
                out.min_eigenvalue = out.min_eigenvalue.min(min_eigenvalue(&rho));
                out.times.push((s + 1) as f64 * h);
                out.states.push(StateDM::new_unchecked(self.co.dims.clone(), rho.clone())?);
            }
        }
        if out.max_trace_drift > 1e-9 {
            out.warnings.push(format!("trace drifted by {:.3e}", out.max_trace_drift));
        }
        if out.min_eigenvalue < -1e-7 {
            out.warnings.push(format!("state lost positivity (min eigenvalue {:.3e})", out.min_eigenvalue));
        }
        Ok(out)
    }
}
