//! Decoherence-free layouts: both collective operators vanish, so the emitters
//! only feel the exchange Hamiltonian.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{CollectiveOps, Layout};
use crate::operator::Operator;

pub const DEFAULT_TOL: f64 = 1e-10;

/// Largest number of independently scanned phases.
pub const MAX_FREE_PHASES: usize = 3;

/// Smallest grid resolution per free phase.
pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DfReport {
    pub df: bool,
    pub norm_a: f64,
    pub norm_ap: f64,
}

/// Largest local ladder norm; sets the scale of the tolerance.
fn ladder_scale(co: &CollectiveOps) -> f64 {
    co.local.iter().map(Operator::op_norm).fold(0.0, f64::max).max(1.0)
}

/// Tests `A = 0` (and `A' = 0` when the left-going rate is nonzero) in
/// operator norm, relative to the largest single-emitter ladder norm.
pub fn is_decoherence_free(co: &CollectiveOps, tol: f64) -> DfReport {
    let scaled = tol * ladder_scale(co);
    let norm_a = co.a.op_norm();
    let norm_ap = co.ap.op_norm();
    let right_ok = co.gamma == 0.0 || norm_a <= scaled;
    let left_ok = co.gamma_prime == 0.0 || norm_ap <= scaled;
    DfReport { df: right_ok && left_ok, norm_a, norm_ap }
}

#[derive(Clone, Debug, PartialEq)]
pub enum DfHamiltonian {
    Zero,
    Exchange(Operator),
}

/// The Hamiltonian that survives in a decoherence-free layout.
pub fn df_hamiltonian(co: &CollectiveOps, tol: f64) -> Result<DfHamiltonian> {
    let r = is_decoherence_free(co, tol);
    if !r.df {
        return Err(Error::InvalidState(format!(
            "layout is not decoherence-free (|A| = {:.3e}, |A'| = {:.3e})",
            r.norm_a, r.norm_ap
        )));
    }
    if co.hvac.op_norm() <= DEFAULT_TOL * ladder_scale(co).powi(2) {
        Ok(DfHamiltonian::Zero)
    } else {
        Ok(DfHamiltonian::Exchange(co.hvac.clone()))
    }
}

/// A layout whose point phases are `base_phi + Σ_f coefficients[ν][f] θ_f`.
#[derive(Clone, Debug)]
pub struct PhaseTemplate {
    pub layout: Layout,
    pub coefficients: Vec<Vec<f64>>,
}

impl PhaseTemplate {
    pub fn new(layout: Layout, coefficients: Vec<Vec<f64>>) -> Result<Self> {
        if coefficients.len() != layout.points().len() {
            return Err(Error::DimensionMismatch { expected: layout.points().len(), found: coefficients.len() });
        }
        let nf = coefficients.first().map_or(0, Vec::len);
        if nf == 0 || coefficients.iter().any(|c| c.len() != nf) {
            return Err(Error::invalid("every point needs one coefficient per free phase"));
        }
        if coefficients.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::invalid("phase coefficients must be finite"));
        }
        Ok(PhaseTemplate { layout, coefficients })
    }

    /// One free phase with point `ν` at `ν * θ` (points in tau order).
    pub fn uniform(layout: Layout) -> Self {
        let n = layout.points().len();
        PhaseTemplate { layout, coefficients: (0..n).map(|nu| vec![nu as f64]).collect() }
    }

    pub fn n_free(&self) -> usize {
        self.coefficients[0].len()
    }

    pub fn layout_at(&self, thetas: &[f64]) -> Result<Layout> {
        let phis: Vec<f64> = self
            .layout
            .points()
            .iter()
            .zip(&self.coefficients)
            .map(|(p, c)| p.phi + c.iter().zip(thetas).map(|(a, t)| a * t).sum::<f64>())
            .collect();
        self.layout.with_phases(&phis)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScanPoint {
    pub phases: Vec<f64>,
    pub df: bool,
    pub hvac_norm: f64,
    pub hvac_zero: bool,
}

/// Evaluate every point of a `resolution^n_free` grid over `[0, 2π)`.
pub fn phase_scan(template: &PhaseTemplate, resolution: usize, tol: f64) -> Result<Vec<ScanPoint>> {
    let nf = template.n_free();
    if nf > MAX_FREE_PHASES {
        return Err(Error::invalid(format!("{nf} free phases exceed the limit of {MAX_FREE_PHASES}")));
    }
    if resolution < MIN_RESOLUTION {
        return Err(Error::invalid(format!("resolution {resolution} is below {MIN_RESOLUTION} points per 2π")));
    }
    let total = resolution.pow(nf as u32);
    let step = 2.0 * std::f64::consts::PI / resolution as f64;
    (0..total)
        .into_par_iter()
        .map(|mut idx| {
            let mut thetas = vec![0.0; nf];
            for t in thetas.iter_mut().rev() {
                *t = (idx % resolution) as f64 * step;
                idx /= resolution;
            }
            let co = CollectiveOps::build(&template.layout_at(&thetas)?)?;
            let r = is_decoherence_free(&co, tol);
            let hvac_norm = co.hvac.op_norm();
            let hvac_zero = hvac_norm <= DEFAULT_TOL * ladder_scale(&co).powi(2);
            Ok(ScanPoint { phases: thetas, df: r.df, hvac_norm, hvac_zero })
        })
        .collect()
}

/// Grid points where the layout is decoherence-free.
pub fn df_points(scan: &[ScanPoint]) -> Vec<&ScanPoint> {
    scan.iter().filter(|p| p.df).collect()
}
