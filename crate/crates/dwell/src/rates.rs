//! Markovian rate theory: instantaneous rates, period-averaged rates with
//! the Bessel-dressed drive, the decay eigenvalue, and the high-temperature
//! cluster-path series beyond the sequential order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;
use std::io::Write;

use crate::bath::{high_temp_valid, BathModel};
use crate::dvr::DvrBasis;
use crate::kernels::KernelSet;
use crate::numeric::quad;

#[derive(Debug, Clone, thiserror::Error)]
pub enum RateError {
    #[error(
        "kernel envelope never decays for gamma = 0; use gamma > 0 or the undamped GME instead"
    )]
    UndampedKernel,
    #[error("lag integral did not converge: {0}")]
    Quadrature(#[from] quad::QuadError),
    #[error("series order must be even and >= 2, got {0}")]
    BadOrder(usize),
    #[error("rate series produced an imaginary residue {residue:.3e} on entry ({nu},{mu})")]
    ResidueBreach { nu: usize, mu: usize, residue: f64 },
    #[error(
        "return-path diagonal disagrees with the column-sum rule on column {mu}: {dev:.3e}"
    )]
    ConservationMismatch { mu: usize, dev: f64 },
    #[error("degenerate neutral sub-path: f_j diverges (a_j = b_j = 0)")]
    DegenerateSubPath,
    #[error("no nonzero relaxation mode found")]
    NoRelaxationMode,
}

/// Provenance of a rate matrix.
#[derive(Debug, Clone, Copy)]
pub struct RateMeta {
    /// Period-averaged (true) or instantaneous (false).
    pub averaged: bool,
    /// Order of the generating theory: 2 for sequential, higher for the
    /// cluster series.
    pub order: usize,
    pub amplitude: f64,
    pub omega: f64,
    /// Whether the high-temperature form backing the series is inside its
    /// validity window (only meaningful for the cluster series).
    pub high_temp_valid: bool,
    /// Some off-diagonal entry came out negative (beyond the 1e-14 floor);
    /// the values are kept as computed, this only flags them.
    pub negative_off_diagonal: bool,
}

/// N x N Markovian generator with zero column sums.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    pub matrix: DMatrix<f64>,
    pub meta: RateMeta,
}

impl RateMatrix {
    /// Assemble from off-diagonal entries, diagonal fixed by conservation.
    fn from_off_diagonals(mut m: DMatrix<f64>, mut meta: RateMeta) -> Self {
        let n = m.nrows();
        let scale = m.iter().fold(1.0_f64, |a, &v| a.max(v.abs()));
        for mu in 0..n {
            let mut col = 0.0;
            for nu in 0..n {
                if nu != mu {
                    col += m[(nu, mu)];
                    if m[(nu, mu)] < -1e-14 * scale {
                        meta.negative_off_diagonal = true;
                    }
                }
            }
            m[(mu, mu)] = -col;
        }
        Self { matrix: m, meta }
    }

    pub fn n_states(&self) -> usize {
        self.matrix.nrows()
    }

    /// Largest column-sum deviation from zero.
    pub fn column_sum_deviation(&self) -> f64 {
        let n = self.n_states();
        (0..n)
            .map(|mu| (0..n).map(|nu| self.matrix[(nu, mu)]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    /// Row-major CSV dump with a metadata header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# rate matrix: n={} averaged={} order={} s={:.6} omega={:.6}",
            self.n_states(),
            self.meta.averaged,
            self.meta.order,
            self.meta.amplitude,
            self.meta.omega
        )?;
        for nu in 0..self.n_states() {
            let row: Vec<String> = (0..self.n_states())
                .map(|mu| format!("{:.11e}", self.matrix[(nu, mu)]))
                .collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Improper lag integral int_0^inf f(tau) dtau for a kernel-type integrand
/// with envelope bound `env` (nonincreasing beyond the quantum regime),
/// asymptotic envelope decay rate `tail_slope`, and deterministic
/// oscillation frequency `osc` that can be credited against the tail.
fn lag_integral<F, E>(
    f: &F,
    env: &E,
    tail_slope: f64,
    osc: f64,
    window: f64,
    rel_tol: f64,
    abs_floor: f64,
) -> Result<f64, RateError>
where
    F: Fn(f64) -> f64,
    E: Fn(f64) -> f64,
{
    debug_assert!(tail_slope > 0.0);
    let credit = if osc > 1e-9 {
        (1.0 / osc).min(1.0 / tail_slope)
    } else {
        1.0 / tail_slope
    };
    let mut acc = 0.0_f64;
    let mut tau = 0.0;
    for _ in 0..200_000 {
        // the per-window absolute target stays an order above the f64 noise
        // floor of the accumulated value
        let abs_win = (0.1 * abs_floor).max(1e-15 * acc.abs());
        let val = quad::integrate_budget(f, tau, tau + window, rel_tol, abs_win, 16384)
            .map_err(RateError::Quadrature)?;
        acc += val;
        tau += window;
        let bound = env(tau) * credit;
        if bound <= rel_tol * acc.abs() + abs_floor {
            return Ok(acc);
        }
    }
    Err(RateError::Quadrature(quad::QuadError {
        achieved: env(tau),
        target: abs_floor,
        value: acc,
    }))
}

fn require_damped(ks: &KernelSet) -> Result<(), RateError> {
    let bath = ks.q.bath();
    if bath.gamma == 0.0 {
        return Err(RateError::UndampedKernel);
    }
    Ok(())
}

/// Instantaneous Markovian rates Gamma_nm(t) = int_0^inf H_nm(t, t-tau) dtau.
///
/// `tau_max`, when given, truncates the lag integral; it must lie beyond the
/// kernel-envelope cutoff.
pub fn instantaneous_rates(
    ks: &KernelSet,
    t: f64,
    tau_max: Option<f64>,
) -> Result<RateMatrix, RateError> {
    require_damped(ks)?;
    let n = ks.n_states();
    let bath = *ks.q.bath();
    let mut m = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            if nu == mu || ks.basis.delta[(nu, mu)] == 0.0 {
                continue;
            }
            let xi2 = ks.xi(nu, mu).powi(2);
            let fd = ks.f_diff(nu, mu).abs();
            let pref = 0.5 * ks.basis.delta[(nu, mu)].powi(2);
            let tail_slope = xi2 * bath.gamma * bath.temperature;
            let osc = fd.max(if ks.drive.is_static() {
                0.0
            } else {
                ks.drive.omega
            });
            let window = window_width(osc, tail_slope);
            let f = |tau: f64| ks.kernel_h(nu, mu, t, t - tau) / pref;
            let env = |tau: f64| (-xi2 * ks.q.eval(tau).0).exp();
            let val = match tau_max {
                Some(tm) => {
                    quad_lag_truncated(&f, &env, osc, tail_slope, window, tm)?
                }
                None => lag_integral(&f, &env, tail_slope, osc, window, 1e-9, 1e-14)?,
            };
            m[(nu, mu)] = pref * val;
        }
    }
    Ok(RateMatrix::from_off_diagonals(
        m,
        RateMeta {
            averaged: false,
            order: 2,
            amplitude: ks.drive.amplitude,
            omega: ks.drive.omega,
            high_temp_valid: high_temp_valid(&bath),
            negative_off_diagonal: false,
        },
    ))
}

fn quad_lag_truncated<F, E>(
    f: &F,
    env: &E,
    osc: f64,
    tail_slope: f64,
    window: f64,
    tau_max: f64,
) -> Result<f64, RateError>
where
    F: Fn(f64) -> f64,
    E: Fn(f64) -> f64,
{
    // the cutoff must sit beyond the kernel envelope decay
    if env(tau_max) > 1e-6 {
        return Err(RateError::UndampedKernel);
    }
    let _ = (osc, tail_slope);
    let mut acc = 0.0;
    let mut tau = 0.0;
    while tau < tau_max {
        let hi = (tau + window).min(tau_max);
        acc += quad::integrate_budget(f, tau, hi, 1e-9, 1e-17, 16384)
            .map_err(RateError::Quadrature)?;
        tau = hi;
    }
    Ok(acc)
}

fn window_width(osc: f64, tail_slope: f64) -> f64 {
    let by_osc = if osc > 1e-9 {
        2.0 * PI / osc
    } else {
        f64::INFINITY
    };
    by_osc.min(4.0 / tail_slope).clamp(0.05, 500.0)
}

/// Period-averaged rates: the Bessel-dressed lag integral
///
/// ```text
/// Gamma_nm = (Delta_nm^2/2) Int_0^inf dtau e^{-Q'_nm(tau)}
///            J0(zeta_mn (2s/W) sin(W tau/2)) cos[(F_m - F_n) tau - Q''_nm(tau)]
/// ```
pub fn averaged_rates(ks: &KernelSet) -> Result<RateMatrix, RateError> {
    require_damped(ks)?;
    let n = ks.n_states();
    let bath = *ks.q.bath();
    let drive_amp = if ks.drive.is_static() {
        0.0
    } else {
        2.0 * ks.drive.amplitude / ks.drive.omega
    };
    let mut m = DMatrix::zeros(n, n);
    for mu in 0..n {
        for nu in 0..n {
            if nu == mu || ks.basis.delta[(nu, mu)] == 0.0 {
                continue;
            }
            let xi = ks.xi(nu, mu);
            let xi2 = xi * xi;
            let fd = ks.f_diff(nu, mu);
            let pref = 0.5 * ks.basis.delta[(nu, mu)].powi(2);
            let tail_slope = xi2 * bath.gamma * bath.temperature;
            let osc = fd.abs().max(if drive_amp == 0.0 { 0.0 } else { ks.drive.omega });
            let window = window_width(osc, tail_slope);
            let omega = ks.drive.omega;
            let f = |tau: f64| {
                let (qr, qi) = ks.q.eval(tau);
                let bessel = if drive_amp == 0.0 {
                    1.0
                } else {
                    libm::j0(xi * drive_amp * (0.5 * omega * tau).sin())
                };
                (-xi2 * qr).exp() * bessel * (fd * tau - xi2 * qi).cos()
            };
            let env = |tau: f64| (-xi2 * ks.q.eval(tau).0).exp();
            // oscillation credit only comes from the cos factor
            let val = lag_integral(&f, &env, tail_slope, fd.abs(), window, 1e-9, 1e-14)?;
            m[(nu, mu)] = pref * val;
        }
    }
    Ok(RateMatrix::from_off_diagonals(
        m,
        RateMeta {
            averaged: true,
            order: 2,
            amplitude: ks.drive.amplitude,
            omega: ks.drive.omega,
            high_temp_valid: high_temp_valid(&bath),
            negative_off_diagonal: false,
        },
    ))
}

/// Relaxation rate extracted from a rate matrix.
#[derive(Debug, Clone, Copy)]
pub struct DecayRate {
    /// Negated real part of the smallest-magnitude nonzero eigenvalue.
    pub rate: f64,
    /// Imaginary part left on that eigenvalue.
    pub imag_residue: f64,
    /// Imaginary residue exceeded 1e-8 of the magnitude.
    pub complex_flag: bool,
    /// More than one eigenvalue fell inside the zero-mode tolerance.
    pub degenerate: bool,
}

/// Smallest-magnitude nonzero eigenvalue of the generator, negated.
pub fn decay_rate(rm: &RateMatrix) -> Result<DecayRate, RateError> {
    let n = rm.n_states();
    let scale = rm
        .matrix
        .iter()
        .fold(0.0_f64, |acc, &v| acc.max(v.abs()));
    if scale == 0.0 {
        return Err(RateError::NoRelaxationMode);
    }
    let tol0 = 1e-10 * scale;
    let eigs = rm.matrix.clone().complex_eigenvalues();
    let mut zero_modes = 0;
    let mut best: Option<Complex64> = None;
    for k in 0..n {
        let e = eigs[k];
        if e.norm() < tol0 {
            zero_modes += 1;
            continue;
        }
        if best.map_or(true, |b| e.norm() < b.norm()) {
            best = Some(e);
        }
    }
    let e = best.ok_or(RateError::NoRelaxationMode)?;
    let imag_residue = e.im.abs();
    Ok(DecayRate {
        rate: -e.re,
        imag_residue,
        complex_flag: imag_residue > 1e-8 * e.norm().max(tol0),
        degenerate: zero_modes != 1,
    })
}

/// One jump on the N^2 lattice of RDM states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    /// mu-index change (vibrational column move), delta_j = 0.
    Vertical,
    /// nu-index change, delta_j = 1.
    Horizontal,
}

#[derive(Debug, Clone, Copy)]
pub struct Jump {
    pub kind: JumpKind,
    /// RDM state (mu_j, nu_j) after the jump.
    pub to: (usize, usize),
    /// Charge xi_j picked up by the jump.
    pub xi: f64,
    /// Cumulative charge p_j = lambda_mu_j - lambda_nu_j.
    pub p_cum: f64,
    /// DVR transition element Delta~ for the jump.
    pub amplitude: f64,
}

/// A cluster: an off-diagonal excursion between two diagonal RDM states.
#[derive(Debug, Clone)]
pub struct ClusterPath {
    pub start: usize,
    pub end: usize,
    pub jumps: Vec<Jump>,
}

/// All clusters of exactly `n_jumps` jumps starting from the diagonal state
/// (start, start): every jump changes one index to any other value, no
/// intermediate state is diagonal, and the walk ends on the diagonal.
pub fn enumerate_cluster_paths(
    n_jumps: usize,
    basis: &DvrBasis,
    start: usize,
) -> Vec<ClusterPath> {
    let n = basis.len();
    let mut out = Vec::new();
    let mut jumps: Vec<Jump> = Vec::with_capacity(n_jumps);
    walk(basis, n, start, (start, start), n_jumps, &mut jumps, &mut out);
    out
}

fn walk(
    basis: &DvrBasis,
    n: usize,
    start: usize,
    at: (usize, usize),
    remaining: usize,
    jumps: &mut Vec<Jump>,
    out: &mut Vec<ClusterPath>,
) {
    if remaining == 0 {
        if at.0 == at.1 {
            out.push(ClusterPath {
                start,
                end: at.0,
                jumps: jumps.clone(),
            });
        }
        return;
    }
    let p_prev = basis.lambda[at.0] - basis.lambda[at.1];
    for kind in [JumpKind::Vertical, JumpKind::Horizontal] {
        let moving = match kind {
            JumpKind::Vertical => at.0,
            JumpKind::Horizontal => at.1,
        };
        for target in 0..n {
            if target == moving {
                continue;
            }
            let next = match kind {
                JumpKind::Vertical => (target, at.1),
                JumpKind::Horizontal => (at.0, target),
            };
            let diagonal = next.0 == next.1;
            // intermediate states must stay off-diagonal; the last jump must
            // land on the diagonal
            if (remaining > 1 && diagonal) || (remaining == 1 && !diagonal) {
                continue;
            }
            let p_cum = if diagonal {
                0.0
            } else {
                basis.lambda[next.0] - basis.lambda[next.1]
            };
            jumps.push(Jump {
                kind,
                to: next,
                xi: p_cum - p_prev,
                p_cum,
                amplitude: basis.delta[(target, moving)],
            });
            walk(basis, n, start, next, remaining - 1, jumps, out);
            jumps.pop();
        }
    }
}

/// High-temperature cluster-series rates, summing all path orders
/// n = 2..=n_max (odd orders appear for N >= 3). The interval integrals f_j
/// use the closed form 1/(a_j + i b_j) when undriven and period-resummed
/// quadrature under sinusoidal driving.
pub fn higher_order_rates(ks: &KernelSet, n_max: usize) -> Result<RateMatrix, RateError> {
    if n_max < 2 || n_max % 2 != 0 {
        return Err(RateError::BadOrder(n_max));
    }
    require_damped(ks)?;
    let n = ks.n_states();
    let bath = *ks.q.bath();

    let f_table = interval_integral_table(ks, &bath)?;

    // complex accumulation per (end, start), including return paths
    let mut acc = vec![Complex64::new(0.0, 0.0); n * n];
    for order in 2..=n_max {
        for start in 0..n {
            for path in enumerate_cluster_paths(order, &ks.basis, start) {
                let amp = path_amplitude(&path, ks, &bath, &f_table)?;
                acc[path.end * n + start] += amp;
            }
        }
    }

    // reality check and assembly
    let mut m = DMatrix::zeros(n, n);
    for nu in 0..n {
        for mu in 0..n {
            if nu == mu {
                continue;
            }
            let z = acc[nu * n + mu];
            if z.im.abs() > 1e-8 * z.norm().max(1e-300) {
                return Err(RateError::ResidueBreach {
                    nu,
                    mu,
                    residue: z.im.abs(),
                });
            }
            m[(nu, mu)] = z.re;
        }
    }
    let rm = RateMatrix::from_off_diagonals(
        m,
        RateMeta {
            averaged: true,
            order: n_max,
            amplitude: ks.drive.amplitude,
            omega: ks.drive.omega,
            high_temp_valid: high_temp_valid(&bath),
            negative_off_diagonal: false,
        },
    );
    // the directly summed return paths must reproduce the column-sum diagonal
    let scale = rm
        .matrix
        .iter()
        .fold(1e-300_f64, |a, &v| a.max(v.abs()));
    for mu in 0..n {
        let direct = acc[mu * n + mu].re;
        let dev = (direct - rm.matrix[(mu, mu)]).abs();
        if dev > 1e-10 * scale {
            return Err(RateError::ConservationMismatch { mu, dev });
        }
    }
    Ok(rm)
}

/// Grow the cluster series until one more order shifts the decay rate by
/// less than `rel_tol` (or the hard cap is reached); returns the converged
/// matrix and the order it stopped at.
pub fn higher_order_rates_converged(
    ks: &KernelSet,
    rel_tol: f64,
    order_cap: usize,
) -> Result<(RateMatrix, usize), RateError> {
    if order_cap < 4 || order_cap % 2 != 0 {
        return Err(RateError::BadOrder(order_cap));
    }
    let mut prev = higher_order_rates(ks, 2)?;
    let mut prev_rate = decay_rate(&prev)?.rate;
    let mut order = 4;
    while order <= order_cap {
        let next = higher_order_rates(ks, order)?;
        let rate = decay_rate(&next)?.rate;
        let shift = ((rate - prev_rate) / prev_rate).abs();
        prev = next;
        prev_rate = rate;
        if shift < rel_tol {
            return Ok((prev, order));
        }
        order += 2;
    }
    Ok((prev, order_cap))
}

/// Interval integral f_j for every off-diagonal RDM state (mu, nu).
fn interval_integral_table(
    ks: &KernelSet,
    bath: &BathModel,
) -> Result<Vec<Option<Complex64>>, RateError> {
    let n = ks.n_states();
    let beta = bath.beta();
    let mut table = vec![None; n * n];
    for mu in 0..n {
        for nu in 0..n {
            if mu == nu {
                continue;
            }
            let p = ks.basis.lambda[mu] - ks.basis.lambda[nu];
            let alpha_over_xi2 = bath.gamma / (2.0 * PI);
            let a = 2.0 * PI * alpha_over_xi2 * p * p / beta; // gamma p^2 T
            let b = ks.basis.onsite[mu] - ks.basis.onsite[nu];
            let val = if ks.drive.is_static() {
                if a == 0.0 && b == 0.0 {
                    return Err(RateError::DegenerateSubPath);
                }
                Complex64::new(1.0, 0.0) / Complex64::new(a, b)
            } else {
                driven_interval_integral(a, b, p, &ks.drive)?
            };
            table[mu * n + nu] = Some(val);
        }
    }
    Ok(table)
}

/// f = int_0^inf e^{-(a+ib)tau} J0(p (2s/W) sin(W tau/2)) dtau, done exactly
/// as a geometric resummation of one drive period.
fn driven_interval_integral(
    a: f64,
    b: f64,
    p: f64,
    drive: &crate::kernels::DriveSpec,
) -> Result<Complex64, RateError> {
    if a <= 0.0 {
        return Err(RateError::DegenerateSubPath);
    }
    let omega = drive.omega;
    let period = 2.0 * PI / omega;
    let z = Complex64::new(a, b);
    let arg_amp = p * 2.0 * drive.amplitude / omega;
    let f = |tau: f64| (-(z * tau)).exp() * libm::j0(arg_amp * (0.5 * omega * tau).sin());
    let base: Complex64 =
        quad::integrate_budget(&f, 0.0, period, 1e-11, 1e-16, 16384).map_err(RateError::Quadrature)?;
    let ratio = (-(z * period)).exp();
    Ok(base / (Complex64::new(1.0, 0.0) - ratio))
}

/// Complex amplitude of one cluster path in the high-temperature series.
fn path_amplitude(
    path: &ClusterPath,
    ks: &KernelSet,
    bath: &BathModel,
    f_table: &[Option<Complex64>],
) -> Result<Complex64, RateError> {
    let n = ks.n_states();
    let beta = bath.beta();
    let cutoff_factor = 2.0 * PI / (beta * bath.omega_c);
    let n_jumps = path.jumps.len();
    let mut amp = Complex64::new(1.0, 0.0);
    for (j, jump) in path.jumps.iter().enumerate() {
        // a zero-charge jump between distinct states only happens for exactly
        // degenerate position eigenvalues; such paths are excluded
        if jump.xi.abs() < 1e-12 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let sign = match jump.kind {
            JumpKind::Vertical => 1.0,
            JumpKind::Horizontal => -1.0,
        };
        let alpha_j = bath.gamma * jump.xi * jump.xi / (2.0 * PI);
        // (-1)^{delta_j} (i/2) Delta~ (2 pi / beta w_c)^{alpha_j}
        amp *= Complex64::new(0.0, 0.5) * sign * jump.amplitude * cutoff_factor.powf(alpha_j);
        // e^{-i pi (-1)^{delta_j} alpha_j p_j / xi_j}
        let phase = -PI * sign * alpha_j * jump.p_cum / jump.xi;
        amp *= Complex64::new(0.0, phase).exp();
        // interval integral for every stay in an off-diagonal state
        if j + 1 < n_jumps {
            let (mu, nu) = jump.to;
            let f = f_table[mu * n + nu].ok_or(RateError::DegenerateSubPath)?;
            amp *= f;
        }
    }
    Ok(amp)
}
