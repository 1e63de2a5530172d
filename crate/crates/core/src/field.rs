//! Field input: white-noise Gaussian moments and their per-bin Fock-space states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::operator::{expm_matrix, ONE, ZERO};

/// Extra Fock levels used when building Gaussian bin states before truncation.
const WORKING_MARGIN: usize = 32;
const MOMENT_TOL: f64 = 1e-4;
const EXPANSION_TOL: f64 = 1e-10;

/// Complex amplitude as a function of time.
#[derive(Clone, Debug, PartialEq)]
pub enum Amplitude {
    Constant(C64),
    /// Linear interpolation between samples, held constant outside.
    Linear { times: Vec<f64>, values: Vec<C64> },
    /// `values[i]` on `[times[i], times[i+1])`; first value before, last value after.
    Steps { times: Vec<f64>, values: Vec<C64> },
}

impl Default for Amplitude {
    fn default() -> Self {
        Amplitude::Constant(ZERO)
    }
}

impl Amplitude {
    pub fn zero() -> Self {
        Amplitude::Constant(ZERO)
    }

    pub fn validate(&self) -> Result<()> {
        let (times, values) = match self {
            Amplitude::Constant(v) => {
                return if v.re.is_finite() && v.im.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("non-finite amplitude"))
                };
            }
            Amplitude::Linear { times, values } | Amplitude::Steps { times, values } => (times, values),
        };
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::invalid("tabulated amplitude needs equal, nonzero numbers of times and values"));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("tabulated amplitude times must be strictly increasing"));
        }
        if times.iter().any(|t| !t.is_finite()) || values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::invalid("non-finite tabulated amplitude"));
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> C64 {
        match self {
            Amplitude::Constant(v) => *v,
            Amplitude::Linear { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    values[k - 1]
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    values[k - 1] * (1.0 - w) + values[k] * w
                }
            }
            Amplitude::Steps { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                values[k.saturating_sub(1)]
            }
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, Amplitude::Constant(_))
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Amplitude::Constant(v) => *v == ZERO,
            Amplitude::Linear { values, .. } | Amplitude::Steps { values, .. } => values.iter().all(|v| *v == ZERO),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Amplitude::Constant(v) => v.norm(),
            Amplitude::Linear { values, .. } | Amplitude::Steps { values, .. } => {
                values.iter().map(|v| v.norm()).fold(0.0, f64::max)
            }
        }
    }

    /// Exact mean of the amplitude over `[a, b]`.
    pub fn mean_over(&self, a: f64, b: f64) -> C64 {
        if b <= a {
            return self.value_at(a);
        }
        let times = match self {
            Amplitude::Constant(v) => return *v,
            Amplitude::Linear { times, .. } | Amplitude::Steps { times, .. } => times,
        };
        let mut cuts = vec![a];
        cuts.extend(times.iter().copied().filter(|&t| t > a && t < b));
        cuts.push(b);
        let integral: C64 = cuts
            .windows(2)
            .map(|w| {
                let h = w[1] - w[0];
                match self {
                    Amplitude::Linear { .. } => (self.value_at(w[0]) + self.value_at(w[1])) * (0.5 * h),
                    _ => self.value_at(0.5 * (w[0] + w[1])) * h,
                }
            })
            .sum();
        integral / (b - a)
    }
}

/// White-noise Gaussian field: mean amplitudes and central second moments per direction.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianInput {
    pub alpha: Amplitude,
    pub n: f64,
    pub m: C64,
    pub alpha_p: Amplitude,
    pub n_p: f64,
    pub m_p: C64,
}

impl Default for GaussianInput {
    fn default() -> Self {
        GaussianInput::vacuum()
    }
}

/// `N >= 0` and `|M|^2 <= N(N+1)`, with a relative slack of 1e-12 for rounding.
pub fn check_admissible(n: f64, m: C64, which: &str) -> Result<()> {
    if !n.is_finite() || !m.re.is_finite() || !m.im.is_finite() {
        return Err(Error::Inadmissible(format!("{which}: non-finite moments")));
    }
    if n < 0.0 {
        return Err(Error::Inadmissible(format!("{which}: N = {n} must be >= 0")));
    }
    let bound = n * (n + 1.0);
    if m.norm_sqr() > bound * (1.0 + 1e-12) + 1e-15 {
        return Err(Error::Inadmissible(format!(
            "{which}: |M|² ≤ N(N+1) violated (|M|² = {}, N(N+1) = {bound})",
            m.norm_sqr()
        )));
    }
    Ok(())
}

impl GaussianInput {
    pub fn new(alpha: Amplitude, n: f64, m: C64, alpha_p: Amplitude, n_p: f64, m_p: C64) -> Result<Self> {
        let g = GaussianInput { alpha, n, m, alpha_p, n_p, m_p };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        self.alpha_p.validate()?;
        check_admissible(self.n, self.m, "right-going")?;
        check_admissible(self.n_p, self.m_p, "left-going")
    }

    pub fn vacuum() -> Self {
        GaussianInput {
            alpha: Amplitude::zero(),
            n: 0.0,
            m: ZERO,
            alpha_p: Amplitude::zero(),
            n_p: 0.0,
            m_p: ZERO,
        }
    }

    /// Coherent drive of the right-going field only.
    pub fn coherent(alpha: Amplitude) -> Self {
        GaussianInput { alpha, ..Self::vacuum() }
    }

    /// Same thermal occupation in both directions.
    pub fn thermal(n: f64) -> Result<Self> {
        Self::new(Amplitude::zero(), n, ZERO, Amplitude::zero(), n, ZERO)
    }

    /// Squeezed vacuum in both directions, `xi = r e^{-i theta}`.
    pub fn squeezed(r: f64, theta: f64) -> Result<Self> {
        let n = r.sinh().powi(2);
        let m = C64::from_polar(r.sinh() * r.cosh(), -theta);
        Self::new(Amplitude::zero(), n, m, Amplitude::zero(), n, m)
    }

    pub fn is_vacuum(&self) -> bool {
        self.alpha.is_zero() && self.alpha_p.is_zero() && self.is_pure_coherent()
    }

    /// True when both directions carry zero noise (vacuum or coherent drive).
    pub fn is_pure_coherent(&self) -> bool {
        self.n == 0.0 && self.m == ZERO && self.n_p == 0.0 && self.m_p == ZERO
    }
}

/// Mean and central second moments of one bin mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BinMoments {
    pub mean: C64,
    pub n: f64,
    pub m: C64,
}

impl BinMoments {
    pub const VACUUM: BinMoments = BinMoments { mean: ZERO, n: 0.0, m: ZERO };
}

/// Moments of the bin ending at `t_end` (spanning `[t_end - dt, t_end]`) for
/// the right- and left-going fields. The mean is the bin-averaged amplitude
/// times `sqrt(dt)`.
pub fn bin_moments(g: &GaussianInput, t_end: f64, dt: f64) -> Result<(BinMoments, BinMoments)> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be positive")));
    }
    let s = dt.sqrt();
    let right = BinMoments { mean: g.alpha.mean_over(t_end - dt, t_end) * s, n: g.n, m: g.m };
    let left = BinMoments { mean: g.alpha_p.mean_over(t_end - dt, t_end) * s, n: g.n_p, m: g.m_p };
    Ok((right, left))
}

/// Order-`sqrt(dt)` and order-`dt` corrections of a vacuum-leading bin state.
#[derive(Clone, Debug, PartialEq)]
pub struct Expansion {
    pub chi1: DVector<C64>,
    pub chi2: DVector<C64>,
}

impl Expansion {
    pub fn vacuum(cutoff: usize) -> Self {
        Expansion { chi1: DVector::zeros(cutoff), chi2: DVector::zeros(cutoff) }
    }

    /// Coherent amplitude `xi` per unit sqrt-time.
    pub fn coherent(xi: C64, cutoff: usize) -> Self {
        let mut e = Self::vacuum(cutoff);
        e.chi1[1] = xi;
        e.chi2[0] = C64::new(-0.5 * xi.norm_sqr(), 0.0);
        if cutoff > 2 {
            e.chi2[2] = xi * xi / 2f64.sqrt();
        }
        e
    }

    /// `Re<0|chi1> = 0` and `<chi1|chi1> + 2 Re<0|chi2> = 0`.
    pub fn constraint_residuals(&self) -> (f64, f64) {
        (self.chi1[0].re, self.chi1.norm_squared() + 2.0 * self.chi2[0].re)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BinState {
    Pure(DVector<C64>),
    Mixed(DMatrix<C64>),
}

/// State of a single time-bin mode at a Fock cutoff.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeBinState {
    cutoff: usize,
    state: BinState,
    expansion: Option<Expansion>,
}

impl TimeBinState {
    pub fn new(state: BinState, expansion: Option<Expansion>) -> Result<Self> {
        let cutoff = match &state {
            BinState::Pure(v) => v.len(),
            BinState::Mixed(m) => {
                if m.nrows() != m.ncols() {
                    return Err(Error::invalid("bin density matrix must be square"));
                }
                m.nrows()
            }
        };
        if cutoff < 2 {
            return Err(Error::invalid(format!("bin cutoff {cutoff} < 2")));
        }
        let norm = match &state {
            BinState::Pure(v) => v.norm_squared(),
            BinState::Mixed(m) => m.trace().re,
        };
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidState(format!("bin state has norm {norm}")));
        }
        if let Some(e) = &expansion {
            if e.chi1.len() != cutoff || e.chi2.len() != cutoff {
                return Err(Error::DimensionMismatch { expected: cutoff, found: e.chi1.len() });
            }
            let (r1, r2) = e.constraint_residuals();
            if r1.abs() > EXPANSION_TOL || r2.abs() > EXPANSION_TOL {
                return Err(Error::InvalidState(format!(
                    "bin expansion violates normalisation constraints ({r1:e}, {r2:e})"
                )));
            }
        }
        Ok(TimeBinState { cutoff, state, expansion })
    }

    pub fn vacuum(cutoff: usize) -> Result<Self> {
        let mut v = DVector::zeros(cutoff.max(1));
        v[0] = ONE;
        Self::new(BinState::Pure(v), Some(Expansion::vacuum(cutoff.max(1))))
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn state(&self) -> &BinState {
        &self.state
    }

    pub fn expansion(&self) -> Option<&Expansion> {
        self.expansion.as_ref()
    }

    pub fn density(&self) -> DMatrix<C64> {
        match &self.state {
            BinState::Pure(v) => v * v.adjoint(),
            BinState::Mixed(m) => m.clone(),
        }
    }

    pub fn pure_vector(&self) -> Option<&DVector<C64>> {
        match &self.state {
            BinState::Pure(v) => Some(v),
            BinState::Mixed(_) => None,
        }
    }

    /// `(<b>, <b^dag b> - |<b>|^2, <b b> - <b>^2)` at this cutoff.
    pub fn moments(&self) -> BinMoments {
        let rho = self.density();
        let d = self.cutoff;
        let mut mean = ZERO;
        let mut nn = 0.0;
        let mut bb = ZERO;
        for k in 1..d {
            let s = (k as f64).sqrt();
            mean += rho[(k, k - 1)] * s;
            nn += rho[(k, k)].re * k as f64;
            if k + 1 < d {
                bb += rho[(k + 1, k - 1)] * (s * ((k + 1) as f64).sqrt());
            }
        }
        BinMoments { mean, n: nn - mean.norm_sqr(), m: bb - mean * mean }
    }
}

fn ladder_matrix(d: usize) -> DMatrix<C64> {
    let mut b = DMatrix::zeros(d, d);
    for k in 1..d {
        b[(k - 1, k)] = C64::new((k as f64).sqrt(), 0.0);
    }
    b
}

/// Displaced squeezed thermal state with the given first and central second
/// moments, truncated to `cutoff` levels and renormalised.
pub fn gaussian_bin_state(moments: &BinMoments, cutoff: usize) -> Result<TimeBinState> {
    if cutoff < 2 {
        return Err(Error::invalid(format!("bin cutoff {cutoff} < 2")));
    }
    check_admissible(moments.n, moments.m, "bin")?;
    if moments.n == 0.0 && moments.m == ZERO && moments.mean == ZERO {
        return TimeBinState::vacuum(cutoff);
    }
    let w = cutoff + WORKING_MARGIN;
    let b = ladder_matrix(w);
    let bd = b.adjoint();

    let half = moments.n + 0.5;
    let abs_m = moments.m.norm();
    let n_th = ((half * half - abs_m * abs_m).max(0.25).sqrt() - 0.5).max(0.0);
    let mut rho = DMatrix::<C64>::zeros(w, w);
    let ratio = n_th / (n_th + 1.0);
    let mut p = 1.0 / (n_th + 1.0);
    for k in 0..w {
        rho[(k, k)] = C64::new(p, 0.0);
        p *= ratio;
    }
    if abs_m > 0.0 {
        let r = 0.5 * (abs_m / half).atanh();
        let phase = -moments.m / abs_m;
        // S = exp((zeta^* b^2 - zeta b^dag^2) / 2), zeta = r e^{i theta}
        let zeta = phase * r;
        let gen = (&b * &b * zeta.conj() - &bd * &bd * zeta) * C64::new(0.5, 0.0);
        let s = expm_matrix(&gen);
        rho = &s * rho * s.adjoint();
    }
    if moments.mean != ZERO {
        let beta = moments.mean;
        let d = expm_matrix(&(&bd * beta - &b * beta.conj()));
        rho = &d * rho * d.adjoint();
    }
    let mut trunc = rho.view((0, 0), (cutoff, cutoff)).into_owned();
    let tr = trunc.trace();
    trunc /= tr;
    trunc = (&trunc + trunc.adjoint()) * C64::new(0.5, 0.0);

    let state = TimeBinState::new(BinState::Mixed(trunc), None)?;
    let got = state.moments();
    let dev = (got.mean - moments.mean)
        .norm()
        .max((got.n - moments.n).abs())
        .max((got.m - moments.m).norm());
    if dev > MOMENT_TOL {
        return Err(Error::CutoffTooSmall(format!(
            "cutoff {cutoff} reproduces the bin moments only to {dev:.2e}"
        )));
    }
    Ok(state)
}

/// Pure coherent bin state of amplitude `xi_n * sqrt(dt)`, truncated and
/// renormalised, carrying its small-`dt` expansion.
pub fn coherent_bin(xi_n: C64, dt: f64, cutoff: usize) -> Result<TimeBinState> {
    if !(dt > 0.0) {
        return Err(Error::invalid(format!("dt = {dt} must be positive")));
    }
    if cutoff < 2 {
        return Err(Error::invalid(format!("bin cutoff {cutoff} < 2")));
    }
    let beta = xi_n * dt.sqrt();
    let mut v = DVector::zeros(cutoff);
    let mut c = ONE;
    for k in 0..cutoff {
        if k > 0 {
            c *= beta / (k as f64).sqrt();
        }
        v[k] = c;
    }
    let nrm = v.norm();
    v /= C64::new(nrm, 0.0);
    TimeBinState::new(BinState::Pure(v), Some(Expansion::coherent(xi_n, cutoff)))
}

/// Coherent bins for a wavepacket `xi(t)`; bin `n` (0-based) spans
/// `[n dt, (n+1) dt]` and uses the bin average of `xi`.
pub fn coherent_bins(xi: &Amplitude, dt: f64, n_bins: usize, cutoff: usize) -> Result<Vec<TimeBinState>> {
    xi.validate()?;
    (0..n_bins)
        .map(|n| {
            let t0 = n as f64 * dt;
            coherent_bin(xi.mean_over(t0, t0 + dt), dt, cutoff)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn vacuum_moments() {
        let (r, l) = bin_moments(&GaussianInput::vacuum(), 1.0, 0.01).unwrap();
        assert_eq!(r, BinMoments::VACUUM);
        assert_eq!(l, BinMoments::VACUUM);
    }

    #[test]
    fn constant_drive_moment() {
        let g = GaussianInput::coherent(Amplitude::Constant(c(2.0, 0.0)));
        let (r, _) = bin_moments(&g, 0.5, 0.01).unwrap();
        assert!((r.mean - c(0.2, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn admissibility_boundary() {
        let n = 1.0;
        let m = C64::from_polar(2f64.sqrt(), -0.3);
        assert!(check_admissible(n, m, "x").is_ok());
        assert!(check_admissible(n, m * (1.0 + 1e-6), "x").is_err());
        assert!(check_admissible(n, m * (1.0 - 1e-6), "x").is_ok());
        assert!(check_admissible(-0.1, ZERO, "x").is_err());
        let err = check_admissible(1.0, c(2.0, 0.0), "x").unwrap_err().to_string();
        assert!(err.contains("|M|² ≤ N(N+1)"), "{err}");
    }

    #[test]
    fn squeezed_input_saturates_bound() {
        let g = GaussianInput::squeezed(0.7, 0.4).unwrap();
        assert!((g.m.norm_sqr() - g.n * (g.n + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn vacuum_bin_state() {
        let s = gaussian_bin_state(&BinMoments::VACUUM, 4).unwrap();
        let mut expected = DMatrix::zeros(4, 4);
        expected[(0, 0)] = ONE;
        assert_eq!(s.density(), expected);
    }

    #[test]
    fn coherent_bin_state_matches_displacement_series() {
        let beta = c(0.2, 0.0);
        let s = gaussian_bin_state(&BinMoments { mean: beta, n: 0.0, m: ZERO }, 6).unwrap();
        assert!((s.moments().mean - beta).norm() < 1e-6);
        // coherent amplitudes e^{-|b|^2/2} b^k / sqrt(k!)
        let mut amp = vec![C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0)];
        for k in 1..6 {
            let prev = amp[k - 1];
            amp.push(prev * beta / (k as f64).sqrt());
        }
        let norm: f64 = amp.iter().map(|a| a.norm_sqr()).sum();
        let rho = s.density();
        for i in 0..6 {
            for j in 0..6 {
                let expected = amp[i] * amp[j].conj() / norm;
                assert!((rho[(i, j)] - expected).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn thermal_bin_state_is_geometric() {
        let n = 0.5;
        let target = BinMoments { mean: ZERO, n, m: ZERO };
        let s = gaussian_bin_state(&target, 12).unwrap();
        let rho = s.density();
        let q = n / (n + 1.0);
        let norm: f64 = (0..12).map(|k| q.powi(k)).sum();
        for k in 0..12 {
            assert!((rho[(k, k)].re - q.powi(k as i32) / norm).abs() < 1e-14);
        }
        assert!((s.moments().n - n).abs() < 1e-4);
        // eight levels lose about 1.2e-3 of the occupation
        assert!(matches!(gaussian_bin_state(&target, 8), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn gaussian_cutoff_too_small() {
        let m = BinMoments { mean: ZERO, n: 1.0, m: c(2f64.sqrt(), 0.0) };
        assert!(matches!(gaussian_bin_state(&m, 4), Err(Error::CutoffTooSmall(_))));
    }

    #[test]
    fn coherent_bins_expansion() {
        let bins = coherent_bins(&Amplitude::Constant(ONE), 0.01, 3, 3).unwrap();
        for b in &bins {
            let v = b.pure_vector().unwrap();
            assert!((v.norm() - 1.0).abs() < 1e-12);
            let e = b.expansion().unwrap();
            assert_eq!(e.chi1[1], ONE);
            let (r1, r2) = e.constraint_residuals();
            assert!(r1.abs() < 1e-12 && r2.abs() < 1e-12);
            // amplitude 0.1 on |1>, up to normalisation
            assert!((v[1] / v[0] - c(0.1, 0.0)).norm() < 1e-14);
        }
        let zero = coherent_bins(&Amplitude::zero(), 0.01, 2, 3).unwrap();
        assert_eq!(zero[0], TimeBinState::vacuum(3).unwrap());
    }

    #[test]
    fn coherent_expansion_matches_exponential_series() {
        // |chi> = exp(xi s b^dag - xi^* s b)|0>; compare order-s and order-dt coefficients
        let xi = c(0.4, -0.3);
        let d = 5;
        let b = ladder_matrix(d);
        let g = b.adjoint() * xi - &b * xi.conj();
        let e = Expansion::coherent(xi, d);
        let vac = DVector::from_fn(d, |k, _| if k == 0 { ONE } else { ZERO });
        assert!((&g * &vac - &e.chi1).norm() < 1e-15);
        assert!((&g * &g * &vac * C64::new(0.5, 0.0) - &e.chi2).norm() < 1e-15);
    }

    #[test]
    fn piecewise_constant_bins_sample_exact_values() {
        let xi = Amplitude::Steps { times: vec![0.0, 0.02, 0.05], values: vec![c(0.1, 0.0), c(0.0, 0.3), c(-0.2, 0.0)] };
        let dt = 0.01;
        for n in 0..8 {
            let t0 = n as f64 * dt;
            assert!((xi.mean_over(t0, t0 + dt) - xi.value_at(t0 + 0.5 * dt)).norm() < 1e-15);
        }
    }

    #[test]
    fn linear_amplitude_average_is_exact() {
        let xi = Amplitude::Linear { times: vec![0.0, 1.0, 2.0], values: vec![ZERO, c(2.0, 0.0), c(2.0, 2.0)] };
        // over [0.5, 1.5]: integral of 2t on [0.5,1] is 0.75, of 2 + 2i(t-1) on [1,1.5] is 1 + 0.25i
        assert!((xi.mean_over(0.5, 1.5) - c(1.75, 0.25)).norm() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn gaussian_moments_round_trip(
            mean_abs in 0.0f64..0.3, mean_arg in -3.2f64..3.2,
            n in 0.0f64..1.0, frac in 0.0f64..1.0, m_arg in -3.2f64..3.2,
        ) {
            let m = C64::from_polar(frac * (n * (n + 1.0)).sqrt(), m_arg);
            let target = BinMoments { mean: C64::from_polar(mean_abs, mean_arg), n, m };
            match gaussian_bin_state(&target, 56) {
                Ok(s) => {
                    let got = s.moments();
                    prop_assert!((got.mean - target.mean).norm() < 1e-6);
                    prop_assert!((got.n - target.n).abs() < 1e-6);
                    prop_assert!((got.m - target.m).norm() < 1e-6);
                }
                Err(e) => prop_assert!(false, "{e}"),
            }
        }
    }
}
