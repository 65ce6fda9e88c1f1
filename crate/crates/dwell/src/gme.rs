//! Non-Markovian propagation of the coupled master equations
//!
//! ```text
//! d/dt rho_nn(t) = I_n(t,t0) + sum_m int_{t0}^{t} dt' H_nm(t,t') rho_mm(t')
//! ```
//!
//! on a uniform grid with trapezoidal memory quadrature and a second-order
//! predictor-corrector, plus the time-local Markovian reference dynamics and
//! exponential decay fits.
//!
//! The kernel factorizes into lag tables and per-time drive phases,
//!
//! ```text
//! H(t_k, t_j) = E[k-j] (c_k c_j + s_k s_j) - D[k-j] (s_k c_j - c_k s_j),
//! ```
//!
//! so one propagation step costs one fused sweep over the memory window per
//! state pair.

use std::io::Write;

use crate::dvr::{left_population, InitialState};
use crate::kernels::KernelSet;
use crate::rates::{instantaneous_rates, RateError};

#[derive(Debug, Clone, thiserror::Error)]
pub enum GmeError {
    #[error("bad propagation spec: {0}")]
    BadSpec(String),
    #[error(
        "tolerance breach at t = {t:.3}: trace drift {drift:.3e} or population excursion {excursion:.3e} (retried with halved step: {retried})"
    )]
    ToleranceBreach {
        t: f64,
        drift: f64,
        excursion: f64,
        retried: bool,
    },
    #[error("rate evaluation failed: {0}")]
    Rate(#[from] RateError),
    #[error("decay fit needs a usable signal: {0}")]
    UnusableSignal(String),
}

/// Numerical controls for one propagation.
#[derive(Debug, Clone, Copy)]
pub struct PropagationSpec {
    /// Grid step h.
    pub step: f64,
    /// Final time (grid starts at t0 = 0).
    pub t_end: f64,
    /// Memory truncation lag; None picks the lag where every kernel envelope
    /// has fallen below 1e-8 of its peak.
    pub t_mem: Option<f64>,
    /// Abort threshold on |trace - 1| and population excursions.
    pub tolerance: f64,
}

impl PropagationSpec {
    pub fn new(step: f64, t_end: f64) -> Self {
        Self {
            step,
            t_end,
            t_mem: None,
            tolerance: 1e-6,
        }
    }

    pub fn with_memory(mut self, t_mem: f64) -> Self {
        self.t_mem = Some(t_mem);
        self
    }

    fn validate(&self, ks: &KernelSet) -> Result<(), GmeError> {
        if !(self.step > 0.0) || !(self.t_end > self.step) {
            return Err(GmeError::BadSpec(format!(
                "need 0 < step < t_end, got step={} t_end={}",
                self.step, self.t_end
            )));
        }
        if let Some(tm) = self.t_mem {
            if tm > self.t_end + 1e-12 {
                return Err(GmeError::BadSpec(format!(
                    "t_mem = {tm} exceeds t_end = {}",
                    self.t_end
                )));
            }
        }
        if !ks.drive.is_static() {
            let period = 2.0 * std::f64::consts::PI / ks.drive.omega;
            if self.step > period / 50.0 {
                return Err(GmeError::BadSpec(format!(
                    "step {} does not resolve the drive period {period} (need <= period/50)",
                    self.step
                )));
            }
        }
        let gap = ks.max_f_diff();
        if gap > 0.0 && self.step > 0.1 / gap {
            return Err(GmeError::BadSpec(format!(
                "step {} does not resolve the level gap {gap} (need <= {})",
                self.step,
                0.1 / gap
            )));
        }
        Ok(())
    }
}

/// Propagated diagonal populations.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Flat populations, row k holds rho_mumu(t_k).
    rho: Vec<f64>,
    pub n_states: usize,
    pub p_left: Vec<f64>,
    /// Largest |trace - 1| seen along the run.
    pub trace_drift: f64,
    /// Set when the run only succeeded after halving the step.
    pub step_halved: bool,
}

impl Trajectory {
    pub fn populations(&self, k: usize) -> &[f64] {
        &self.rho[k * self.n_states..(k + 1) * self.n_states]
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV export: `t, rho_1 ... rho_N, P_L`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let names: Vec<String> = (1..=self.n_states).map(|i| format!("rho_{i}")).collect();
        writeln!(out, "t,{},P_L", names.join(","))?;
        for k in 0..self.len() {
            let row: Vec<String> = self
                .populations(k)
                .iter()
                .map(|v| format!("{:.11e}", v))
                .collect();
            writeln!(
                out,
                "{:.11e},{},{:.11e}",
                self.times[k],
                row.join(","),
                self.p_left[k]
            )?;
        }
        Ok(())
    }
}

/// Relative envelope threshold that sets the automatic memory cutoff.
const MEMORY_THRESHOLD: f64 = 1e-8;

/// Directed kernel tables for one unordered state pair.
struct PairEngine {
    a: usize,
    b: usize,
    /// lag tables, dest = a, src = b
    e_ab: Vec<f64>,
    d_ab: Vec<f64>,
    /// lag tables, dest = b, src = a
    e_ba: Vec<f64>,
    d_ba: Vec<f64>,
    /// drive phase factors cos/sin(g cos(W t_k + phase)), g = (l_b - l_a) s/W
    c: Vec<f64>,
    s: Vec<f64>,
    /// Delta^2/2
    pref: f64,
}

fn build_engines(ks: &KernelSet, h: f64, n_steps: usize, m_max: usize) -> Vec<PairEngine> {
    let n = ks.n_states();
    let mut engines = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let delta = ks.basis.delta[(a, b)];
            if delta == 0.0 {
                continue;
            }
            let pref = 0.5 * delta * delta;
            let xi2 = ks.xi(a, b).powi(2);
            let fd_ab = ks.f_diff(a, b); // F_b - F_a (src b, dest a)
            let mut e_ab = Vec::with_capacity(m_max + 1);
            let mut d_ab = Vec::with_capacity(m_max + 1);
            let mut e_ba = Vec::with_capacity(m_max + 1);
            let mut d_ba = Vec::with_capacity(m_max + 1);
            for l in 0..=m_max {
                let tau = l as f64 * h;
                let (qr, qi) = ks.q.eval(tau);
                let env = pref * (-xi2 * qr).exp();
                let arg_ab = fd_ab * tau - xi2 * qi;
                e_ab.push(env * arg_ab.cos());
                d_ab.push(env * arg_ab.sin());
                let arg_ba = -fd_ab * tau - xi2 * qi;
                e_ba.push(env * arg_ba.cos());
                d_ba.push(env * arg_ba.sin());
            }
            let (c, s) = if ks.drive.is_static() {
                (Vec::new(), Vec::new())
            } else {
                let g = (ks.basis.lambda[b] - ks.basis.lambda[a]) * ks.drive.amplitude
                    / ks.drive.omega;
                let mut c = Vec::with_capacity(n_steps + 1);
                let mut s = Vec::with_capacity(n_steps + 1);
                for k in 0..=n_steps {
                    let x = (ks.drive.omega * (k as f64 * h) + ks.drive.phase).cos();
                    c.push((g * x).cos());
                    s.push((g * x).sin());
                }
                (c, s)
            };
            engines.push(PairEngine {
                a,
                b,
                e_ab,
                d_ab,
                e_ba,
                d_ba,
                c,
                s,
                pref,
            });
        }
    }
    engines
}

impl PairEngine {
    /// Convolution of the directed kernel against one population history at
    /// target step `k`, over lags 1..=lag_max with trapezoid edge weights.
    /// `sigma` = +1 for the (a <- b) direction, -1 for (b <- a).
    #[allow(clippy::too_many_arguments)]
    fn convolve(
        &self,
        e: &[f64],
        d: &[f64],
        sigma: f64,
        k: usize,
        lag_max: usize,
        h: f64,
        rho: &[f64],
        n: usize,
        src: usize,
    ) -> f64 {
        if lag_max == 0 {
            return 0.0;
        }
        let driven = !self.c.is_empty();
        let mut acc_c = 0.0;
        let mut acc_s = 0.0;
        if driven {
            for l in 1..=lag_max {
                let j = k - l;
                let w = if l == lag_max { 0.5 } else { 1.0 };
                let r = w * rho[j * n + src];
                let (cj, sj) = (self.c[j], self.s[j]);
                acc_c += r * (e[l] * cj + sigma * d[l] * sj);
                acc_s += r * (e[l] * sj - sigma * d[l] * cj);
            }
            let (ck, sk) = (self.c[k], self.s[k]);
            h * (ck * acc_c + sk * acc_s)
        } else {
            for l in 1..=lag_max {
                let j = k - l;
                let w = if l == lag_max { 0.5 } else { 1.0 };
                acc_c += w * rho[j * n + src] * e[l];
            }
            h * acc_c
        }
    }
}

/// Propagate the generalized master equation.
///
/// On a tolerance breach (trace drift or population excursion beyond the
/// spec tolerance) the run is retried once with a halved step.
pub fn propagate_gme(
    ks: &KernelSet,
    init: &InitialState,
    pspec: &PropagationSpec,
) -> Result<Trajectory, GmeError> {
    pspec.validate(ks)?;
    match propagate_gme_once(ks, init, pspec) {
        Ok(t) => Ok(t),
        Err(GmeError::ToleranceBreach { .. }) => {
            let halved = PropagationSpec {
                step: 0.5 * pspec.step,
                ..*pspec
            };
            let mut traj = propagate_gme_once(ks, init, &halved)?;
            traj.step_halved = true;
            Ok(traj)
        }
        Err(e) => Err(e),
    }
}

fn auto_memory(ks: &KernelSet, pspec: &PropagationSpec) -> f64 {
    match pspec.t_mem {
        Some(tm) => tm.min(pspec.t_end),
        None => ks
            .memory_cutoff(MEMORY_THRESHOLD)
            .map_or(pspec.t_end, |tm| tm.min(pspec.t_end)),
    }
}

fn propagate_gme_once(
    ks: &KernelSet,
    init: &InitialState,
    pspec: &PropagationSpec,
) -> Result<Trajectory, GmeError> {
    let n = ks.n_states();
    let h = pspec.step;
    let n_steps = (pspec.t_end / h).ceil() as usize;
    let t_mem = auto_memory(ks, pspec);
    let m_max = ((t_mem / h).ceil() as usize).min(n_steps).max(1);

    let engines = build_engines(ks, h, n_steps, m_max);

    let mut rho = vec![0.0_f64; (n_steps + 1) * n];
    rho[..n].copy_from_slice(&init.populations);
    let mut times = Vec::with_capacity(n_steps + 1);
    times.push(0.0);
    let mut p_left = Vec::with_capacity(n_steps + 1);
    p_left.push(left_population(&init.populations, &ks.basis));

    // self-term map K0(rho): pair-symmetric instantaneous kernel
    let k0 = |state: &[f64], out: &mut [f64]| {
        out.fill(0.0);
        for eng in &engines {
            let v = eng.pref * (state[eng.b] - state[eng.a]);
            out[eng.a] += v;
            out[eng.b] -= v;
        }
    };

    let inhom = |t: f64, out: &mut [f64]| {
        for (nu, o) in out.iter_mut().enumerate() {
            *o = ks.inhomogeneity(nu, t, 0.0, init);
        }
    };

    let mut rhs_prev = vec![0.0_f64; n]; // rhs at t_0 vanishes (empty memory, I(0) = 0)
    inhom(0.0, &mut rhs_prev);

    let mut trace_drift = 0.0_f64;
    let mut scratch_hist = vec![0.0_f64; n];
    let mut scratch_i = vec![0.0_f64; n];
    let mut scratch_k0 = vec![0.0_f64; n];
    let mut pred = vec![0.0_f64; n];
    let mut corr = vec![0.0_f64; n];

    for k1 in 1..=n_steps {
        let t1 = k1 as f64 * h;
        let lag_max = k1.min(m_max);

        // history part of the memory integral at t_{k1}
        scratch_hist.fill(0.0);
        for eng in &engines {
            let v_ab = eng.convolve(&eng.e_ab, &eng.d_ab, 1.0, k1, lag_max, h, &rho, n, eng.b);
            scratch_hist[eng.a] += v_ab;
            scratch_hist[eng.b] -= v_ab;
            let v_ba = eng.convolve(&eng.e_ba, &eng.d_ba, -1.0, k1, lag_max, h, &rho, n, eng.a);
            scratch_hist[eng.b] += v_ba;
            scratch_hist[eng.a] -= v_ba;
        }
        inhom(t1, &mut scratch_i);

        // predictor (Euler) with the previous right-hand side
        let rho_k = k1 - 1;
        for nu in 0..n {
            pred[nu] = rho[rho_k * n + nu] + h * rhs_prev[nu];
        }
        // corrector right-hand side at t1 using the predicted self-term
        k0(&pred, &mut scratch_k0);
        for nu in 0..n {
            corr[nu] = scratch_i[nu] + scratch_hist[nu] + 0.5 * h * scratch_k0[nu];
        }
        for nu in 0..n {
            let new = rho[rho_k * n + nu] + 0.5 * h * (rhs_prev[nu] + corr[nu]);
            rho[k1 * n + nu] = new;
        }
        // refresh the stored rhs with the corrected self-term
        let (head, tail) = rho.split_at(k1 * n);
        let _ = head;
        let newrow = &tail[..n];
        let diff: Vec<f64> = (0..n).map(|nu| newrow[nu] - pred[nu]).collect();
        k0(&diff, &mut scratch_k0);
        for nu in 0..n {
            rhs_prev[nu] = corr[nu] + 0.5 * h * scratch_k0[nu];
        }

        // conservation monitoring
        let trace: f64 = newrow.iter().sum();
        let drift = (trace - 1.0).abs();
        trace_drift = trace_drift.max(drift);
        let excursion = newrow
            .iter()
            .map(|&p| (-p).max(p - 1.0).max(0.0))
            .fold(0.0, f64::max);
        if drift > pspec.tolerance || excursion > pspec.tolerance {
            return Err(GmeError::ToleranceBreach {
                t: t1,
                drift,
                excursion,
                retried: false,
            });
        }

        times.push(t1);
        p_left.push(left_population(newrow, &ks.basis));
    }

    Ok(Trajectory {
        times,
        rho,
        n_states: n,
        p_left,
        trace_drift,
        step_halved: false,
    })
}

/// Number of instantaneous-rate samples per drive period for the Markovian
/// reference propagation.
const MARKOV_PHASE_SAMPLES: usize = 128;

/// Time-local Markovian reference dynamics built on the instantaneous rates;
/// the inhomogeneity is omitted by definition.
///
/// Strong intermediate driving can make this time-local equation genuinely
/// unstable (the instantaneous rates have growth windows along the cycle);
/// such runs abort with a tolerance breach rather than returning unphysical
/// populations.
pub fn markov_reference(
    ks: &KernelSet,
    init: &InitialState,
    pspec: &PropagationSpec,
) -> Result<Trajectory, GmeError> {
    pspec.validate(ks)?;
    let n = ks.n_states();
    let h = pspec.step;
    let n_steps = (pspec.t_end / h).ceil() as usize;

    // periodic rate table (a single matrix when undriven)
    let samples: Vec<nalgebra::DMatrix<f64>> = if ks.drive.is_static() {
        vec![instantaneous_rates(ks, 0.0, None)?.matrix]
    } else {
        let period = 2.0 * std::f64::consts::PI / ks.drive.omega;
        (0..MARKOV_PHASE_SAMPLES)
            .map(|i| {
                instantaneous_rates(ks, i as f64 * period / MARKOV_PHASE_SAMPLES as f64, None)
                    .map(|r| r.matrix)
            })
            .collect::<Result<_, _>>()?
    };
    let period = ks
        .drive
        .period()
        .unwrap_or(f64::INFINITY);

    let gamma_at = |t: f64, out: &mut nalgebra::DMatrix<f64>| {
        if samples.len() == 1 {
            out.copy_from(&samples[0]);
            return;
        }
        let m = samples.len();
        let phase = (t / period).rem_euclid(1.0) * m as f64;
        let i1 = (phase.floor() as usize) % m;
        let frac = phase - phase.floor();
        let i0 = (i1 + m - 1) % m;
        let i2 = (i1 + 1) % m;
        let i3 = (i1 + 2) % m;
        // Catmull-Rom in the phase coordinate
        let (f0, f1, f2, f3) = (
            -0.5 * frac + frac * frac - 0.5 * frac * frac * frac,
            1.0 - 2.5 * frac * frac + 1.5 * frac * frac * frac,
            0.5 * frac + 2.0 * frac * frac - 1.5 * frac * frac * frac,
            -0.5 * frac * frac + 0.5 * frac * frac * frac,
        );
        for r in 0..out.nrows() {
            for c in 0..out.ncols() {
                out[(r, c)] = f0 * samples[i0][(r, c)]
                    + f1 * samples[i1][(r, c)]
                    + f2 * samples[i2][(r, c)]
                    + f3 * samples[i3][(r, c)];
            }
        }
    };

    let mut g0 = nalgebra::DMatrix::zeros(n, n);
    let mut g1 = nalgebra::DMatrix::zeros(n, n);
    let mut rho = vec![0.0_f64; (n_steps + 1) * n];
    rho[..n].copy_from_slice(&init.populations);
    let mut times = vec![0.0];
    let mut p_left = vec![left_population(&init.populations, &ks.basis)];
    let mut trace_drift = 0.0_f64;

    for k1 in 1..=n_steps {
        let t0 = (k1 - 1) as f64 * h;
        let t1 = k1 as f64 * h;
        gamma_at(t0, &mut g0);
        gamma_at(t1, &mut g1);
        let prev = &rho[(k1 - 1) * n..k1 * n];
        // Heun step
        let mut f0 = vec![0.0; n];
        apply(&g0, prev, &mut f0);
        let pred: Vec<f64> = (0..n).map(|i| prev[i] + h * f0[i]).collect();
        let mut f1 = vec![0.0; n];
        apply(&g1, &pred, &mut f1);
        let prev_owned: Vec<f64> = prev.to_vec();
        for i in 0..n {
            rho[k1 * n + i] = prev_owned[i] + 0.5 * h * (f0[i] + f1[i]);
        }
        let row = &rho[k1 * n..(k1 + 1) * n];
        let drift = (row.iter().sum::<f64>() - 1.0).abs();
        trace_drift = trace_drift.max(drift);
        let excursion = row
            .iter()
            .map(|&p| (-p).max(p - 1.0).max(0.0))
            .fold(0.0, f64::max);
        if drift > pspec.tolerance || excursion > pspec.tolerance {
            return Err(GmeError::ToleranceBreach {
                t: t1,
                drift,
                excursion,
                retried: false,
            });
        }
        times.push(t1);
        p_left.push(left_population(row, &ks.basis));
    }

    Ok(Trajectory {
        times,
        rho,
        n_states: n,
        p_left,
        trace_drift,
        step_halved: false,
    })
}

fn apply(m: &nalgebra::DMatrix<f64>, x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for r in 0..n {
        let mut acc = 0.0;
        for c in 0..n {
            acc += m[(r, c)] * x[c];
        }
        out[r] = acc;
    }
}

/// Exponential decay fit of |P_L - P_inf|.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub rate: f64,
    /// RMS residual of ln|P_L - P_inf| against the linear fit.
    pub residual: f64,
    /// Insufficient decay span or non-exponential signal.
    pub flagged: bool,
}

/// Fit with the symmetric-system defaults: P_inf = 1/2, burn-in 15% of the
/// horizon.
pub fn fit_decay_rate(traj: &Trajectory) -> Result<DecayFit, GmeError> {
    let t_burn = 0.15 * traj.times.last().copied().unwrap_or(0.0);
    fit_decay_rate_windowed(traj, 0.5, t_burn)
}

/// Least-squares slope of ln|P_L(t) - p_inf| over [t_burn, t_end].
pub fn fit_decay_rate_windowed(
    traj: &Trajectory,
    p_inf: f64,
    t_burn: f64,
) -> Result<DecayFit, GmeError> {
    let mut ts = Vec::new();
    let mut ys = Vec::new();
    for (k, &t) in traj.times.iter().enumerate() {
        if t < t_burn {
            continue;
        }
        let dev = (traj.p_left[k] - p_inf).abs();
        if dev > 1e-12 {
            ts.push(t);
            ys.push(dev.ln());
        }
    }
    if ts.len() < 8 {
        // fully relaxed (or constant at p_inf): no decay left to fit
        return Ok(DecayFit {
            rate: 0.0,
            residual: 0.0,
            flagged: true,
        });
    }
    let n = ts.len() as f64;
    let tm = ts.iter().sum::<f64>() / n;
    let ym = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        sxx += (t - tm) * (t - tm);
        sxy += (t - tm) * (y - ym);
    }
    if sxx == 0.0 {
        return Err(GmeError::UnusableSignal("degenerate time window".into()));
    }
    let slope = sxy / sxx;
    let intercept = ym - slope * tm;
    let mut ss = 0.0;
    for (t, y) in ts.iter().zip(&ys) {
        let r = y - (slope * t + intercept);
        ss += r * r;
    }
    let residual = (ss / n).sqrt();
    let span = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let rate = -slope;
    let flagged = span < 0.1 || rate <= 0.0;
    Ok(DecayFit {
        rate,
        residual,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathModel, QSource, QTable};
    use crate::dvr::{dvr_from_spectrum, localized_initial_state, DvrBasis, InitialState};
    use crate::kernels::{DriveSpec, KernelSet};
    use crate::spectrum::{solve_spectrum, GridSpec, PotentialSpec};
    use approx::assert_relative_eq;

    fn undamped_two_level(splitting: f64) -> KernelSet {
        let basis = DvrBasis::two_level(1.54, splitting);
        let bath = BathModel::new(0.0, 10.0, 1.0).unwrap();
        let table = QTable::build(&bath, 0.01, 10.0);
        KernelSet::new(basis, DriveSpec::none(), QSource::Tabulated(table))
    }

    fn damped_two_level(gamma: f64, temp: f64) -> KernelSet {
        let basis = DvrBasis::two_level(1.54, 0.1);
        let bath = BathModel::new(gamma, 10.0, temp).unwrap();
        let table = QTable::auto(&bath, (2.0 * 1.54_f64).powi(2));
        KernelSet::new(basis, DriveSpec::none(), QSource::Tabulated(table))
    }

    #[test]
    fn zero_generator_keeps_populations() {
        let mut basis = DvrBasis::two_level(1.54, 0.0);
        basis.delta[(0, 1)] = 0.0;
        basis.delta[(1, 0)] = 0.0;
        let bath = BathModel::new(0.1, 10.0, 0.5).unwrap();
        let ks = KernelSet::new(
            basis,
            DriveSpec::none(),
            QSource::Tabulated(QTable::build(&bath, 0.01, 20.0)),
        );
        let init = InitialState::diagonal(vec![0.7, 0.3]);
        let traj = propagate_gme(&ks, &init, &PropagationSpec::new(0.05, 10.0)).unwrap();
        for k in 0..traj.len() {
            assert_relative_eq!(traj.populations(k)[0], 0.7, epsilon = 1e-14);
            assert_relative_eq!(traj.populations(k)[1], 0.3, epsilon = 1e-14);
        }
    }

    #[test]
    fn undamped_coherent_oscillation() {
        // analytic Volterra solution: P_L(t) = (1 + cos(Delta t))/2
        let d1 = 0.2;
        let ks = undamped_two_level(d1);
        let init = localized_initial_state(&ks.basis);
        let period = 2.0 * std::f64::consts::PI / d1;
        let pspec = PropagationSpec::new(period / 1500.0, 3.0 * period);
        let traj = propagate_gme(&ks, &init, &pspec).unwrap();
        let mut worst = 0.0_f64;
        for (k, &t) in traj.times.iter().enumerate() {
            let exact = 0.5 * (1.0 + (d1 * t).cos());
            worst = worst.max((traj.p_left[k] - exact).abs());
        }
        assert!(worst < 1e-4, "worst deviation {worst}");
        assert!(traj.trace_drift < 1e-10);
    }

    #[test]
    fn trace_is_conserved_in_damped_runs() {
        let ks = damped_two_level(0.2, 1.0);
        let init = localized_initial_state(&ks.basis);
        let traj = propagate_gme(&ks, &init, &PropagationSpec::new(0.02, 100.0)).unwrap();
        assert!(traj.trace_drift < 1e-8, "trace drift {}", traj.trace_drift);
        // populations stay physical
        for k in 0..traj.len() {
            for &p in traj.populations(k) {
                assert!(p > -1e-6 && p < 1.0 + 1e-6);
            }
        }
    }

    #[test]
    fn step_refinement_converges() {
        let ks = damped_two_level(0.2, 1.0);
        let init = localized_initial_state(&ks.basis);
        let run = |h: f64| propagate_gme(&ks, &init, &PropagationSpec::new(h, 60.0)).unwrap();
        let coarse = run(0.04);
        let fine = run(0.02);
        let finest = run(0.01);
        let dev = |a: &Trajectory, b: &Trajectory, stride: usize| {
            let mut worst = 0.0_f64;
            for k in 0..a.len() {
                worst = worst.max((a.p_left[k] - b.p_left[stride * k]).abs());
            }
            worst
        };
        let e1 = dev(&coarse, &fine, 2);
        let e2 = dev(&fine, &finest, 2);
        assert!(e1 < 1e-4, "h-refinement change {e1}");
        // second-order scheme: halving the step cuts the change ~4x
        let order_ratio = e1 / e2;
        assert!(
            order_ratio > 2.5 && order_ratio < 6.5,
            "refinement ratio {order_ratio}"
        );
    }

    #[test]
    fn memory_horizon_is_sufficient() {
        let ks = damped_two_level(0.2, 1.0);
        let init = localized_initial_state(&ks.basis);
        let base = auto_memory(&ks, &PropagationSpec::new(0.02, 60.0));
        let t1 = propagate_gme(
            &ks,
            &init,
            &PropagationSpec::new(0.02, 60.0).with_memory(base.min(60.0)),
        )
        .unwrap();
        let t2 = propagate_gme(
            &ks,
            &init,
            &PropagationSpec::new(0.02, 60.0).with_memory((2.0 * base).min(60.0)),
        )
        .unwrap();
        let mut worst = 0.0_f64;
        for k in 0..t1.len() {
            worst = worst.max((t1.p_left[k] - t2.p_left[k]).abs());
        }
        assert!(worst < 1e-5, "t_mem sensitivity {worst}");
    }

    #[test]
    fn symmetric_system_relaxes_to_half() {
        // fast-relaxing configuration so the endpoint is reachable quickly
        let ks = damped_two_level(0.4, 1.5);
        let init = localized_initial_state(&ks.basis);
        let traj = propagate_gme(&ks, &init, &PropagationSpec::new(0.02, 9000.0)).unwrap();
        let p_end = *traj.p_left.last().unwrap();
        assert!((p_end - 0.5).abs() < 1e-3, "endpoint {p_end}");
        assert!(traj.trace_drift < 1e-8);
    }

    #[test]
    fn markov_limits() {
        // zero generator: populations constant
        let mut basis = DvrBasis::two_level(1.54, 0.0);
        basis.delta[(0, 1)] = 0.0;
        basis.delta[(1, 0)] = 0.0;
        let bath = BathModel::new(0.1, 10.0, 0.5).unwrap();
        let ks = KernelSet::new(
            basis,
            DriveSpec::none(),
            QSource::Tabulated(QTable::build(&bath, 0.01, 20.0)),
        );
        let init = InitialState::diagonal(vec![0.4, 0.6]);
        let traj = markov_reference(&ks, &init, &PropagationSpec::new(0.05, 5.0)).unwrap();
        assert_relative_eq!(traj.populations(traj.len() - 1)[0], 0.4, epsilon = 1e-13);

        // damped symmetric long-time limit is 1/2
        let ks2 = damped_two_level(0.4, 1.5);
        let init2 = localized_initial_state(&ks2.basis);
        let traj2 = markov_reference(&ks2, &init2, &PropagationSpec::new(0.02, 9000.0)).unwrap();
        assert!((traj2.p_left.last().unwrap() - 0.5).abs() < 1e-3);
        assert!(traj2.trace_drift < 1e-9);
    }

    #[test]
    fn fit_recovers_synthetic_rates() {
        // exact single exponential
        let times: Vec<f64> = (0..2000).map(|k| k as f64).collect();
        let p_left: Vec<f64> = times.iter().map(|t| 0.5 + 0.5 * (-0.01 * t).exp()).collect();
        let n = times.len();
        let traj = Trajectory {
            times,
            rho: vec![0.0; n],
            n_states: 1,
            p_left,
            trace_drift: 0.0,
            step_halved: false,
        };
        let fit = fit_decay_rate(&traj).unwrap();
        assert_relative_eq!(fit.rate, 0.01, max_relative = 1e-6);
        assert!(fit.residual < 1e-6);
        assert!(!fit.flagged);

        // two exponentials with a 10x rate split: the slow one survives the fit
        let times: Vec<f64> = (0..40000).map(|k| 0.5 * k as f64).collect();
        let p_left: Vec<f64> = times
            .iter()
            .map(|t| 0.5 + 0.3 * (-0.001 * t).exp() + 0.2 * (-0.01 * t).exp())
            .collect();
        let n = times.len();
        let traj2 = Trajectory {
            times,
            rho: vec![0.0; n],
            n_states: 1,
            p_left,
            trace_drift: 0.0,
            step_halved: false,
        };
        let fit2 = fit_decay_rate_windowed(&traj2, 0.5, 1500.0).unwrap();
        assert_relative_eq!(fit2.rate, 0.001, max_relative = 0.01);

        // constant signal: zero rate, flagged
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let p_left = vec![0.75; 100];
        let traj3 = Trajectory {
            times,
            rho: vec![0.0; 100],
            n_states: 1,
            p_left,
            trace_drift: 0.0,
            step_halved: false,
        };
        let fit3 = fit_decay_rate(&traj3).unwrap();
        assert_eq!(fit3.rate, 0.0);
        assert!(fit3.flagged);
    }

    #[test]
    fn rejects_bad_specs() {
        let ks = damped_two_level(0.2, 1.0);
        let init = localized_initial_state(&ks.basis);
        assert!(propagate_gme(&ks, &init, &PropagationSpec::new(0.0, 10.0)).is_err());
        let bad_mem = PropagationSpec::new(0.02, 10.0).with_memory(20.0);
        assert!(propagate_gme(&ks, &init, &bad_mem).is_err());
        // driven: step must resolve the period
        let spec = PotentialSpec::new(1.4).unwrap();
        let s = solve_spectrum(&spec, &GridSpec::default_for(&spec), 4).unwrap();
        let basis = dvr_from_spectrum(&s).unwrap();
        let bath = BathModel::new(0.1, 10.0, 0.1).unwrap();
        let ks2 = KernelSet::new(
            basis,
            DriveSpec::sinusoidal(1.0, 0.815).unwrap(),
            QSource::Tabulated(QTable::build(&bath, 0.005, 30.0)),
        );
        let init2 = localized_initial_state(&ks2.basis);
        assert!(propagate_gme(&ks2, &init2, &PropagationSpec::new(0.5, 10.0)).is_err());
    }

    #[test]
    fn csv_roundtrip_shape() {
        let ks = damped_two_level(0.2, 1.0);
        let init = localized_initial_state(&ks.basis);
        let traj = propagate_gme(&ks, &init, &PropagationSpec::new(0.05, 5.0)).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,rho_1,rho_2,P_L");
        assert_eq!(text.lines().count(), traj.len() + 1);
    }
}
