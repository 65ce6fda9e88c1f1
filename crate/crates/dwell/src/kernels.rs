//! Memory kernels of the generalized master equation, the inhomogeneity from
//! nondiagonal preparations, and the driving phase.
//!
//! For a pair of DVR states the lowest-order kernel reads
//!
//! ```text
//! H_nm(t,t') = (Delta_nm^2/2) e^{-Q'_nm(t-t')} cos[phi_nm(t,t') - Q''_nm(t-t')]
//! ```
//!
//! with Q_nm = (lambda_n - lambda_m)^2 Q and the driving phase
//! phi_nm(t,t') = (F_m - F_n)(t-t') + (lambda_m - lambda_n)(s/W)[cos Wt - cos Wt'].
//! Probability conservation fixes the diagonal, H_mm = -sum_{n != m} H_nm.

use crate::bath::QSource;
use crate::dvr::{DvrBasis, InitialState};

#[derive(Debug, Clone, thiserror::Error)]
pub enum KernelError {
    #[error("drive amplitude must be >= 0, got {0}")]
    BadAmplitude(f64),
    #[error("sinusoidal drive needs a positive frequency, got {0}")]
    BadFrequency(f64),
}

/// External driving protocol s(t).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DriveProtocol {
    /// No drive (s identically zero).
    Static,
    /// s(t) = s sin(W t + phase).
    Sinusoidal,
}

/// Driving field specification. Amplitude is in units s0 = hbar*omega_0/x0,
/// which is 1 in internal units.
#[derive(Debug, Clone, Copy)]
pub struct DriveSpec {
    pub amplitude: f64,
    pub omega: f64,
    pub phase: f64,
    pub protocol: DriveProtocol,
}

impl DriveSpec {
    pub fn none() -> Self {
        Self {
            amplitude: 0.0,
            omega: 1.0,
            phase: 0.0,
            protocol: DriveProtocol::Static,
        }
    }

    pub fn sinusoidal(amplitude: f64, omega: f64) -> Result<Self, KernelError> {
        if !(amplitude >= 0.0) {
            return Err(KernelError::BadAmplitude(amplitude));
        }
        if !(omega > 0.0) {
            return Err(KernelError::BadFrequency(omega));
        }
        Ok(Self {
            amplitude,
            omega,
            phase: 0.0,
            protocol: DriveProtocol::Sinusoidal,
        })
    }

    pub fn is_static(&self) -> bool {
        matches!(self.protocol, DriveProtocol::Static) || self.amplitude == 0.0
    }

    /// Field value s(t).
    pub fn value(&self, t: f64) -> f64 {
        match self.protocol {
            DriveProtocol::Static => 0.0,
            DriveProtocol::Sinusoidal => self.amplitude * (self.omega * t + self.phase).sin(),
        }
    }

    /// Closed-form integral of s over [t0, t1].
    pub fn integral(&self, t0: f64, t1: f64) -> f64 {
        match self.protocol {
            DriveProtocol::Static => 0.0,
            DriveProtocol::Sinusoidal => {
                -(self.amplitude / self.omega)
                    * ((self.omega * t1 + self.phase).cos() - (self.omega * t0 + self.phase).cos())
            }
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self.protocol {
            DriveProtocol::Static => None,
            DriveProtocol::Sinusoidal => Some(2.0 * std::f64::consts::PI / self.omega),
        }
    }
}

/// Evaluable kernel set: DVR basis + bath correlation + drive, with the
/// pairwise charges and energy differences precomputed.
#[derive(Debug, Clone)]
pub struct KernelSet {
    pub basis: DvrBasis,
    pub drive: DriveSpec,
    pub q: QSource,
    /// (lambda_nu - lambda_mu)^2 per ordered pair.
    xi2: nalgebra::DMatrix<f64>,
    /// F_mu - F_nu per ordered pair (nu, mu): source minus destination.
    fdiff: nalgebra::DMatrix<f64>,
}

impl KernelSet {
    pub fn new(basis: DvrBasis, drive: DriveSpec, q: QSource) -> Self {
        let n = basis.len();
        let mut xi2 = nalgebra::DMatrix::zeros(n, n);
        let mut fdiff = nalgebra::DMatrix::zeros(n, n);
        for nu in 0..n {
            for mu in 0..n {
                xi2[(nu, mu)] = (basis.lambda[nu] - basis.lambda[mu]).powi(2);
                fdiff[(nu, mu)] = basis.onsite[mu] - basis.onsite[nu];
            }
        }
        Self {
            basis,
            drive,
            q,
            xi2,
            fdiff,
        }
    }

    pub fn n_states(&self) -> usize {
        self.basis.len()
    }

    /// Charge xi = lambda_nu - lambda_mu of the (nu, mu) transition.
    pub fn xi(&self, nu: usize, mu: usize) -> f64 {
        self.basis.lambda[nu] - self.basis.lambda[mu]
    }

    /// F_mu - F_nu: source-minus-destination on-site energy difference, the
    /// frequency of the kernel oscillation.
    pub fn f_diff(&self, nu: usize, mu: usize) -> f64 {
        self.fdiff[(nu, mu)]
    }

    /// Driving phase phi_nm(t,t') = int_{t'}^{t} [eps_mu - eps_nu] dt''.
    pub fn driving_phase(&self, nu: usize, mu: usize, t: f64, tp: f64) -> f64 {
        self.f_diff(nu, mu) * (t - tp) - (self.basis.lambda[mu] - self.basis.lambda[nu]) * self.drive.integral(tp, t)
    }

    /// Lowest-order kernel H_nm(t, t'). For nu == mu the column-sum rule is
    /// applied.
    pub fn kernel_h(&self, nu: usize, mu: usize, t: f64, tp: f64) -> f64 {
        debug_assert!(t >= tp);
        if nu == mu {
            return -(0..self.n_states())
                .filter(|&k| k != mu)
                .map(|k| self.kernel_h(k, mu, t, tp))
                .sum::<f64>();
        }
        let delta = self.basis.delta[(nu, mu)];
        if delta == 0.0 {
            return 0.0;
        }
        let xi2 = self.xi2[(nu, mu)];
        let (qr, qi) = self.q.eval(t - tp);
        let phi = self.driving_phase(nu, mu, t, tp);
        0.5 * delta * delta * (-xi2 * qr).exp() * (phi - xi2 * qi).cos()
    }

    /// Full N x N kernel matrix at (t, t'), diagonal fixed by conservation.
    pub fn kernel_matrix(&self, t: f64, tp: f64) -> nalgebra::DMatrix<f64> {
        let n = self.n_states();
        let mut h = nalgebra::DMatrix::zeros(n, n);
        for mu in 0..n {
            let mut col_sum = 0.0;
            for nu in 0..n {
                if nu != mu {
                    let v = self.kernel_h(nu, mu, t, tp);
                    h[(nu, mu)] = v;
                    col_sum += v;
                }
            }
            h[(mu, mu)] = -col_sum;
        }
        h
    }

    /// Inhomogeneity I_nu(t, t0) from the initially prepared off-diagonal
    /// pairs, generalized as a superposition over all stored pairs.
    pub fn inhomogeneity(&self, nu: usize, t: f64, t0: f64, init: &InitialState) -> f64 {
        debug_assert!(t >= t0);
        let mut acc = 0.0;
        for &(a, b, re_rho) in &init.coherences {
            let sign = if nu == b {
                1.0
            } else if nu == a {
                -1.0
            } else {
                continue;
            };
            let delta = self.basis.delta[(a, b)];
            let xi = self.xi(a, b);
            let xi2 = xi * xi;
            let (qr, qi) = self.q.eval(t - t0);
            let phi = self.driving_phase(a, b, t, t0);
            acc += sign * re_rho * delta * (-xi2 * qr).exp() * (phi - xi2 * qi).sin();
        }
        acc
    }

    /// Smallest nonzero squared charge among coupled pairs; sets the slowest
    /// kernel envelope.
    pub fn min_xi2(&self) -> f64 {
        let n = self.n_states();
        let mut best = f64::INFINITY;
        for mu in 0..n {
            for nu in 0..n {
                if nu != mu && self.basis.delta[(nu, mu)] != 0.0 {
                    let xi2 = self.xi(nu, mu).powi(2);
                    if xi2 > 1e-24 {
                        best = best.min(xi2);
                    }
                }
            }
        }
        best
    }

    /// Largest on-site energy difference (gap scale for step-size limits).
    pub fn max_f_diff(&self) -> f64 {
        let n = self.n_states();
        let mut best = 0.0_f64;
        for mu in 0..n {
            for nu in 0..n {
                best = best.max(self.f_diff(nu, mu).abs());
            }
        }
        best
    }

    /// Lag beyond which every kernel envelope has fallen below `threshold`
    /// relative to its peak; None when the bath never damps (gamma = 0).
    pub fn memory_cutoff(&self, threshold: f64) -> Option<f64> {
        if self.q.bath().gamma == 0.0 {
            return None;
        }
        let target = -threshold.ln() / self.min_xi2();
        // bisection on Q'(t) >= target
        let mut hi = 1.0;
        while self.q.eval(hi).0 < target {
            hi *= 2.0;
            if hi > 1e9 {
                return None;
            }
        }
        let mut lo = 0.0;
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.q.eval(mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(hi)
    }
}
