//! Emitters, coupling points and the collective operators built from them.
//!
//! Coupling points are labelled left to right by a single index `nu`. Each
//! point belongs to emitter `emitter_of[nu]` and is that emitter's leg
//! `leg_of[nu]`. All indices are 0-based.

use std::collections::{HashMap, HashSet};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{embed, make_ladder, HilbertDims, LadderKind, Operator, I};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitterKind {
    Qubit,
    Boson { cutoff: usize },
}

impl EmitterKind {
    pub fn dim(&self) -> usize {
        match *self {
            EmitterKind::Qubit => 2,
            EmitterKind::Boson { cutoff } => cutoff,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmitterSpec {
    pub kind: EmitterKind,
    pub label: String,
}

impl EmitterSpec {
    pub fn qubit(label: impl Into<String>) -> Self {
        EmitterSpec { kind: EmitterKind::Qubit, label: label.into() }
    }

    pub fn boson(label: impl Into<String>, cutoff: usize) -> Self {
        EmitterSpec { kind: EmitterKind::Boson { cutoff }, label: label.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingPoint {
    pub emitter: usize,
    pub leg: usize,
    /// Time coordinate of the point, in units of 1/gamma.
    pub tau: f64,
    /// Propagation phase `k0 * x`, independent of `tau`.
    pub phi: f64,
}

impl CouplingPoint {
    pub fn new(emitter: usize, leg: usize, tau: f64, phi: f64) -> Self {
        CouplingPoint { emitter, leg, tau, phi }
    }
}

/// A validated set of emitters and coupling points, points sorted by `tau`.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    emitters: Vec<EmitterSpec>,
    points: Vec<CouplingPoint>,
    gamma: f64,
    gamma_prime: f64,
}

impl Layout {
    pub fn new(
        emitters: Vec<EmitterSpec>,
        mut points: Vec<CouplingPoint>,
        gamma: f64,
        gamma_prime: f64,
    ) -> Result<Self> {
        let bad = |m: String| Err(Error::InvalidLayout(m));
        if emitters.is_empty() {
            return bad("no emitters".into());
        }
        if !(gamma.is_finite() && gamma_prime.is_finite()) || gamma < 0.0 || gamma_prime < 0.0 {
            return bad(format!("rates must be finite and non-negative (gamma={gamma}, gamma_prime={gamma_prime})"));
        }
        if gamma + gamma_prime <= 0.0 {
            return bad("gamma + gamma_prime must be positive".into());
        }
        let mut labels = HashSet::new();
        for e in &emitters {
            if !labels.insert(e.label.as_str()) {
                return bad(format!("duplicate emitter label '{}'", e.label));
            }
            if let EmitterKind::Boson { cutoff } = e.kind {
                if cutoff < 2 {
                    return bad(format!("emitter '{}' has boson cutoff {cutoff} < 2", e.label));
                }
            }
        }
        let mut legs = HashSet::new();
        for p in &points {
            if p.emitter >= emitters.len() {
                return bad(format!("point references emitter {} of {}", p.emitter, emitters.len()));
            }
            if !p.tau.is_finite() || p.tau < 0.0 {
                return bad(format!("tau {} must be finite and >= 0", p.tau));
            }
            if !p.phi.is_finite() {
                return bad(format!("phi {} must be finite", p.phi));
            }
            if !legs.insert((p.emitter, p.leg)) {
                return bad(format!("duplicate leg ({}, {})", p.emitter, p.leg));
            }
        }
        if let Some(j) = (0..emitters.len()).find(|j| !points.iter().any(|p| p.emitter == *j)) {
            return bad(format!("emitter '{}' has no coupling point", emitters[j].label));
        }
        points.sort_by(|a, b| a.tau.total_cmp(&b.tau));
        if let Some(w) = points.windows(2).find(|w| w[0].tau == w[1].tau) {
            return bad(format!("coincident coupling points at tau = {}", w[0].tau));
        }
        Ok(Layout { emitters, points, gamma, gamma_prime })
    }

    pub fn emitters(&self) -> &[EmitterSpec] {
        &self.emitters
    }

    /// Coupling points in left-to-right order.
    pub fn points(&self) -> &[CouplingPoint] {
        &self.points
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn gamma_prime(&self) -> f64 {
        self.gamma_prime
    }

    pub fn is_bidirectional(&self) -> bool {
        self.gamma_prime > 0.0
    }

    pub fn emitter_dims(&self) -> Result<HilbertDims> {
        HilbertDims::new(self.emitters.iter().map(|e| e.kind.dim()).collect())
    }

    /// Same layout with the phases replaced (given in left-to-right order).
    pub fn with_phases(&self, phis: &[f64]) -> Result<Layout> {
        if phis.len() != self.points.len() {
            return Err(Error::DimensionMismatch { expected: self.points.len(), found: phis.len() });
        }
        let points = self
            .points
            .iter()
            .zip(phis)
            .map(|(p, &phi)| CouplingPoint { phi, ..*p })
            .collect();
        Layout::new(self.emitters.clone(), points, self.gamma, self.gamma_prime)
    }

    pub fn with_rates(&self, gamma: f64, gamma_prime: f64) -> Result<Layout> {
        Layout::new(self.emitters.clone(), self.points.clone(), gamma, gamma_prime)
    }

    /// One giant qubit with legs at phases `phis` (taus spaced by 1e-6).
    pub fn giant_atom(phis: &[f64], gamma: f64, gamma_prime: f64) -> Result<Layout> {
        let points = phis
            .iter()
            .enumerate()
            .map(|(l, &phi)| CouplingPoint::new(0, l, 1e-6 * l as f64, phi))
            .collect();
        Layout::new(vec![EmitterSpec::qubit("a")], points, gamma, gamma_prime)
    }

    /// Qubits with one leg each, point `i` at phase `phis[i]`.
    pub fn normal_emitters(phis: &[f64], gamma: f64, gamma_prime: f64) -> Result<Layout> {
        let emitters = (0..phis.len()).map(|i| EmitterSpec::qubit(format!("q{i}"))).collect();
        let points = phis
            .iter()
            .enumerate()
            .map(|(i, &phi)| CouplingPoint::new(i, 0, 1e-6 * i as f64, phi))
            .collect();
        Layout::new(emitters, points, gamma, gamma_prime)
    }

    /// Qubits attached in the order given by `owners`, point `nu`
    /// at phase `phis[nu]`.
    pub fn from_owner_sequence(owners: &[usize], phis: &[f64], gamma: f64, gamma_prime: f64) -> Result<Layout> {
        if owners.len() != phis.len() {
            return Err(Error::DimensionMismatch { expected: owners.len(), found: phis.len() });
        }
        let n_emitters = owners.iter().max().map_or(0, |m| m + 1);
        let emitters = (0..n_emitters).map(|i| EmitterSpec::qubit(format!("q{i}"))).collect();
        let mut next_leg = vec![0usize; n_emitters];
        let points = owners
            .iter()
            .zip(phis)
            .enumerate()
            .map(|(nu, (&j, &phi))| {
                let l = next_leg[j];
                next_leg[j] += 1;
                CouplingPoint::new(j, l, 1e-6 * nu as f64, phi)
            })
            .collect();
        Layout::new(emitters, points, gamma, gamma_prime)
    }
}

/// Left-to-right labelling of coupling points.
#[derive(Clone, Debug, PartialEq)]
pub struct PointOrder {
    pub emitter_of: Vec<usize>,
    pub leg_of: Vec<usize>,
    pub index_of: HashMap<(usize, usize), usize>,
}

pub fn order_points(layout: &Layout) -> PointOrder {
    let emitter_of: Vec<usize> = layout.points.iter().map(|p| p.emitter).collect();
    let leg_of: Vec<usize> = layout.points.iter().map(|p| p.leg).collect();
    let index_of = emitter_of
        .iter()
        .zip(&leg_of)
        .enumerate()
        .map(|(nu, (&j, &l))| ((j, l), nu))
        .collect();
    PointOrder { emitter_of, leg_of, index_of }
}

/// Two-emitter coupling pattern.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Serial,
    Nested,
    Braided,
    Other,
}

/// Classify the emitter sequence of a layout after relabelling emitters in
/// order of first appearance.
pub fn classify_topology(emitter_sequence: &[usize]) -> Topology {
    let mut relabel = HashMap::new();
    let canon: Vec<usize> = emitter_sequence
        .iter()
        .map(|j| {
            let next = relabel.len();
            *relabel.entry(*j).or_insert(next)
        })
        .collect();
    match canon.as_slice() {
        [0, 0, 1, 1] => Topology::Serial,
        [0, 1, 1, 0] => Topology::Nested,
        [0, 1, 0, 1] => Topology::Braided,
        _ => Topology::Other,
    }
}

/// Phase-dressed and collective operators of a layout on the emitter space.
#[derive(Clone, Debug)]
pub struct CollectiveOps {
    pub dims: HilbertDims,
    /// Annihilation operator of each emitter, embedded.
    pub local: Vec<Operator>,
    pub a_nu: Vec<Operator>,
    pub ap_nu: Vec<Operator>,
    pub a: Operator,
    pub ap: Operator,
    pub hvac: Operator,
    pub gamma: f64,
    pub gamma_prime: f64,
    pub emitter_of: Vec<usize>,
    pub phis: Vec<f64>,
    pub taus: Vec<f64>,
}

impl CollectiveOps {
    pub fn build(layout: &Layout) -> Result<Self> {
        let dims = layout.emitter_dims()?;
        let local = layout
            .emitters
            .iter()
            .enumerate()
            .map(|(j, e)| {
                let kind = match e.kind {
                    EmitterKind::Qubit => LadderKind::Qubit,
                    EmitterKind::Boson { .. } => LadderKind::Boson,
                };
                embed(&make_ladder(kind, e.kind.dim())?, j, &dims)
            })
            .collect::<Result<Vec<_>>>()?;
        let order = order_points(layout);
        let phis: Vec<f64> = layout.points.iter().map(|p| p.phi).collect();
        let a_nu: Vec<Operator> = order
            .emitter_of
            .iter()
            .zip(&phis)
            .map(|(&j, &phi)| local[j].scale(C64::from_polar(1.0, -phi)))
            .collect();
        let ap_nu: Vec<Operator> = order
            .emitter_of
            .iter()
            .zip(&phis)
            .map(|(&j, &phi)| local[j].scale(C64::from_polar(1.0, phi)))
            .collect();
        let zero = Operator::zeros(&dims);
        let a = a_nu.iter().fold(zero.clone(), |acc, x| &acc + x);
        let ap = ap_nu.iter().fold(zero, |acc, x| &acc + x);
        let hvac = build_hvac(&a_nu, &ap_nu, layout.gamma, layout.gamma_prime, &dims);
        Ok(CollectiveOps {
            dims,
            local,
            a_nu,
            ap_nu,
            a,
            ap,
            hvac,
            gamma: layout.gamma,
            gamma_prime: layout.gamma_prime,
            emitter_of: order.emitter_of,
            phis,
            taus: layout.points.iter().map(|p| p.tau).collect(),
        })
    }

    pub fn n_points(&self) -> usize {
        self.a_nu.len()
    }

    pub fn n_emitters(&self) -> usize {
        self.local.len()
    }

    /// `tau_last - tau_first`.
    pub fn tau_spread(&self) -> f64 {
        match (self.taus.first(), self.taus.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        }
    }
}

/// `(i/2) sum_{nu > nu'} (g A_{nu'}^dag A_nu + g' A'_nu^dag A'_{nu'} - h.c.)`.
pub fn build_hvac(
    a_nu: &[Operator],
    ap_nu: &[Operator],
    gamma: f64,
    gamma_prime: f64,
    dims: &HilbertDims,
) -> Operator {
    let mut x = Operator::zeros(dims);
    for nu in 0..a_nu.len() {
        for nup in 0..nu {
            if gamma != 0.0 {
                x = &x + &(&a_nu[nup].adjoint() * &a_nu[nu]).scale_re(gamma);
            }
            if gamma_prime != 0.0 {
                x = &x + &(&ap_nu[nu].adjoint() * &ap_nu[nup]).scale_re(gamma_prime);
            }
        }
    }
    (&x - &x.adjoint()).scale(I * 0.5)
}
