//! Non-negligible delays: each coupling point talks to the bin that passed the
//! first point `m` steps earlier (right-going) or will pass it `m` steps later
//! (left-going). Full propagation is limited to the single-excitation sector.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::geometry::Layout;
use crate::operator::{expm_matrix, I, ZERO};

/// Largest number of distinct bins one step may address.
pub const MAX_ACTIVE_BINS: usize = 12;

const COMMENSURATE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Right,
    Left,
}

/// One term `coupling * A_j^dag b_bin + h.c.` of the step-`n` interaction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DelayedTerm {
    /// Index of the coupling point in tau order.
    pub point: usize,
    pub emitter: usize,
    pub direction: Direction,
    pub bin: i64,
    pub coupling: C64,
}

/// Integer delays `m_nu = (tau_nu - tau_1) / dt`, with `m_1 = 0`.
pub fn delay_offsets(layout: &Layout, dt: f64) -> Result<Vec<i64>> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::invalid(format!("dt = {dt} must be positive")));
    }
    let tau0 = layout.points()[0].tau;
    layout
        .points()
        .iter()
        .map(|p| {
            let x = (p.tau - tau0) / dt;
            let m = x.round();
            if (x - m).abs() > COMMENSURATE_TOL * x.abs().max(1.0) {
                Err(Error::invalid(format!("delay {} is not a multiple of dt = {dt}", p.tau - tau0)))
            } else {
                Ok(m as i64)
            }
        })
        .collect()
}

/// Terms of the step-`n` interaction. Right-going terms address bin `n - m`,
/// left-going ones bin `n + m`; directions with zero rate are omitted.
pub fn delayed_coupling_h(layout: &Layout, n: i64, dt: f64) -> Result<Vec<DelayedTerm>> {
    let m = delay_offsets(layout, dt)?;
    let (g, gp) = ((layout.gamma() / dt).sqrt(), (layout.gamma_prime() / dt).sqrt());
    let mut terms = Vec::new();
    for (nu, p) in layout.points().iter().enumerate() {
        if g > 0.0 {
            terms.push(DelayedTerm {
                point: nu,
                emitter: p.emitter,
                direction: Direction::Right,
                bin: n - m[nu],
                coupling: C64::from_polar(g, p.phi),
            });
        }
        if gp > 0.0 {
            terms.push(DelayedTerm {
                point: nu,
                emitter: p.emitter,
                direction: Direction::Left,
                bin: n + m[nu],
                coupling: C64::from_polar(gp, -p.phi),
            });
        }
    }
    Ok(terms)
}

/// Single-excitation chiral exchange among emitters, keeping only point pairs
/// that share a delay (they meet the same bin within one step).
pub fn same_bin_exchange(layout: &Layout, m: &[i64]) -> DMatrix<C64> {
    let ne = layout.emitters().len();
    let pts = layout.points();
    let mut x = DMatrix::<C64>::zeros(ne, ne);
    for nu in 0..pts.len() {
        for nup in 0..nu {
            if m[nu] != m[nup] {
                continue;
            }
            let (j, jp) = (pts[nu].emitter, pts[nup].emitter);
            let ph = C64::from_polar(1.0, pts[nup].phi - pts[nu].phi);
            x[(jp, j)] += ph * layout.gamma();
            x[(j, jp)] += ph * layout.gamma_prime();
        }
    }
    (&x - x.adjoint()) * (I * 0.5)
}

/// State-vector evolution with at most one excitation shared between the
/// emitters and the field bins. Bins start in vacuum.
#[derive(Clone, Debug)]
pub struct SingleExcitationPropagator {
    layout: Layout,
    dt: f64,
    offsets: Vec<i64>,
    exchange: DMatrix<C64>,
    emitters: DVector<C64>,
    right: BTreeMap<i64, C64>,
    left: BTreeMap<i64, C64>,
    step: i64,
}

impl SingleExcitationPropagator {
    pub fn new(layout: &Layout, dt: f64, emitter_amplitudes: &[C64]) -> Result<Self> {
        let offsets = delay_offsets(layout, dt)?;
        let ne = layout.emitters().len();
        if emitter_amplitudes.len() != ne {
            return Err(Error::DimensionMismatch { expected: ne, found: emitter_amplitudes.len() });
        }
        let norm: f64 = emitter_amplitudes.iter().map(|c| c.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("emitter amplitudes have norm^2 {norm}")));
        }
        let rate = layout.gamma().max(layout.gamma_prime());
        if rate * dt > 0.1 {
            return Err(Error::invalid(format!("gamma*dt = {} exceeds 0.1", rate * dt)));
        }
        Ok(SingleExcitationPropagator {
            exchange: same_bin_exchange(layout, &offsets),
            layout: layout.clone(),
            dt,
            offsets,
            emitters: DVector::from_column_slice(emitter_amplitudes),
            right: BTreeMap::new(),
            left: BTreeMap::new(),
            step: 0,
        })
    }

    pub fn offsets(&self) -> &[i64] {
        &self.offsets
    }

    pub fn steps_done(&self) -> i64 {
        self.step
    }

    pub fn emitter_amplitudes(&self) -> &DVector<C64> {
        &self.emitters
    }

    /// Photon amplitudes of right-going bins, keyed by bin index.
    pub fn right_bins(&self) -> &BTreeMap<i64, C64> {
        &self.right
    }

    pub fn left_bins(&self) -> &BTreeMap<i64, C64> {
        &self.left
    }

    /// Total squared norm over emitters and bins.
    pub fn norm_sqr(&self) -> f64 {
        self.emitters.norm_squared()
            + self.right.values().map(|c| c.norm_sqr()).sum::<f64>()
            + self.left.values().map(|c| c.norm_sqr()).sum::<f64>()
    }

    /// Reduced emitter density matrix in the basis {ground, e_1, ..., e_N}.
    pub fn emitter_density(&self) -> DMatrix<C64> {
        let ne = self.emitters.len();
        let mut rho = DMatrix::<C64>::zeros(ne + 1, ne + 1);
        rho[(0, 0)] = C64::new(1.0 - self.emitters.norm_squared(), 0.0);
        for i in 0..ne {
            for j in 0..ne {
                rho[(i + 1, j + 1)] = self.emitters[i] * self.emitters[j].conj();
            }
        }
        rho
    }

    /// Advance one collision.
    pub fn step(&mut self) -> Result<()> {
        let n = self.step + 1;
        let terms = delayed_coupling_h(&self.layout, n, self.dt)?;
        let mut slots: Vec<(Direction, i64)> = terms.iter().map(|t| (t.direction, t.bin)).collect();
        slots.sort();
        slots.dedup();
        if slots.len() > MAX_ACTIVE_BINS {
            return Err(Error::invalid(format!(
                "{} active bins exceed the limit of {MAX_ACTIVE_BINS}",
                slots.len()
            )));
        }
        let ne = self.emitters.len();
        let dim = ne + slots.len();
        let mut h = DMatrix::<C64>::zeros(dim, dim);
        h.view_mut((0, 0), (ne, ne)).copy_from(&self.exchange);
        for t in &terms {
            let s = ne + slots.binary_search(&(t.direction, t.bin)).expect("slot listed");
            h[(t.emitter, s)] += t.coupling;
            h[(s, t.emitter)] += t.coupling.conj();
        }
        let u = expm_matrix(&(h * C64::new(0.0, -self.dt)));
        let mut v = DVector::<C64>::zeros(dim);
        v.rows_mut(0, ne).copy_from(&self.emitters);
        for (k, (d, b)) in slots.iter().enumerate() {
            v[ne + k] = *self.bins(*d).get(b).unwrap_or(&ZERO);
        }
        let w = u * v;
        self.emitters.copy_from(&w.rows(0, ne));
        for (k, (d, b)) in slots.iter().enumerate() {
            self.bins_mut(*d).insert(*b, w[ne + k]);
        }
        if !self.norm_sqr().is_finite() {
            return Err(Error::Numerical("non-finite amplitude in delayed propagation".into()));
        }
        self.step = n;
        Ok(())
    }

    pub fn run(&mut self, n_steps: usize) -> Result<()> {
        for _ in 0..n_steps {
            self.step()?;
        }
        Ok(())
    }

    fn bins(&self, d: Direction) -> &BTreeMap<i64, C64> {
        match d {
            Direction::Right => &self.right,
            Direction::Left => &self.left,
        }
    }

    fn bins_mut(&mut self, d: Direction) -> &mut BTreeMap<i64, C64> {
        match d {
            Direction::Right => &mut self.right,
            Direction::Left => &mut self.left,
        }
    }
}
