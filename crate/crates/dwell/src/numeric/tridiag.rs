//! Lowest eigenpairs of a symmetric tridiagonal matrix by Sturm-sequence
//! bisection and inverse iteration.
//!
//! This is the workhorse behind the grid Schrödinger solver: the
//! finite-difference Hamiltonian is tridiagonal, and only a handful of the
//! lowest states are ever needed, so bisection beats dense methods by orders
//! of magnitude.

/// Symmetric tridiagonal matrix: diagonal `d` (length n) and off-diagonal `e`
/// (length n-1).
#[derive(Debug, Clone)]
pub struct SymTridiag {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

impl SymTridiag {
    pub fn new(d: Vec<f64>, e: Vec<f64>) -> Self {
        assert_eq!(e.len() + 1, d.len(), "off-diagonal must have length n-1");
        Self { d, e }
    }

    pub fn len(&self) -> usize {
        self.d.len()
    }

    pub fn is_empty(&self) -> bool {
        self.d.is_empty()
    }

    /// Number of eigenvalues strictly below `x` (Sturm count via LDL^T).
    fn count_below(&self, x: f64) -> usize {
        let n = self.len();
        let mut count = 0;
        let mut t = self.d[0] - x;
        if t < 0.0 {
            count += 1;
        }
        for i in 1..n {
            if t == 0.0 {
                t = f64::MIN_POSITIVE;
            }
            t = self.d[i] - x - self.e[i - 1] * self.e[i - 1] / t;
            if t < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// Gershgorin bounds on the spectrum.
    fn bounds(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let r = if i > 0 { self.e[i - 1].abs() } else { 0.0 }
                + if i + 1 < n { self.e[i].abs() } else { 0.0 };
            lo = lo.min(self.d[i] - r);
            hi = hi.max(self.d[i] + r);
        }
        (lo, hi)
    }

    /// The `k` smallest eigenvalues, ascending, each resolved to machine
    /// precision by bisection.
    pub fn lowest_eigenvalues(&self, k: usize) -> Vec<f64> {
        assert!(k <= self.len());
        let (mut glo, ghi) = self.bounds();
        let mut out = Vec::with_capacity(k);
        for j in 0..k {
            let (mut lo, mut hi) = (glo, ghi);
            // invariant: count_below(lo) <= j < count_below(hi)
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()) || mid <= lo || mid >= hi {
                    break;
                }
                if self.count_below(mid) <= j {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let ev = 0.5 * (lo + hi);
            out.push(ev);
            // later eigenvalues cannot lie below this one
            glo = lo;
        }
        out
    }

    /// Solve (T - lambda I) x = b in place by LU with partial pivoting.
    /// `du2` is scratch for the second superdiagonal fill-in.
    fn shifted_solve(&self, lambda: f64, b: &mut [f64]) {
        let n = self.len();
        let mut dl: Vec<f64> = self.e.clone();
        let mut dd: Vec<f64> = self.d.iter().map(|&v| v - lambda).collect();
        let mut du: Vec<f64> = self.e.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut pivoted = vec![false; n.saturating_sub(1)];

        // factorization (dgttrf-style)
        for i in 0..n - 1 {
            if dd[i].abs() >= dl[i].abs() {
                // no row swap
                let dpiv = if dd[i] != 0.0 { dd[i] } else { f64::MIN_POSITIVE };
                let fact = dl[i] / dpiv;
                dl[i] = fact;
                dd[i + 1] -= fact * du[i];
            } else {
                // swap rows i and i+1
                pivoted[i] = true;
                let fact = dd[i] / dl[i];
                dd[i] = dl[i];
                dl[i] = fact;
                let tmp = du[i];
                du[i] = dd[i + 1];
                dd[i + 1] = tmp - fact * dd[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
            }
        }

        // forward substitution with the recorded pivoting
        for i in 0..n - 1 {
            if pivoted[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= dl[i] * b[i];
        }
        // back substitution
        if dd[n - 1] == 0.0 {
            dd[n - 1] = f64::MIN_POSITIVE;
        }
        b[n - 1] /= dd[n - 1];
        if n >= 2 {
            let i = n - 2;
            if dd[i] == 0.0 {
                dd[i] = f64::MIN_POSITIVE;
            }
            b[i] = (b[i] - du[i] * b[i + 1]) / dd[i];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            if dd[i] == 0.0 {
                dd[i] = f64::MIN_POSITIVE;
            }
            b[i] = (b[i] - du[i] * b[i + 1] - du2[i] * b[i + 2]) / dd[i];
        }
    }

    /// Eigenvector for an isolated eigenvalue by inverse iteration.
    ///
    /// `orthogonalize_against` handles near-degenerate clusters: the iterate is
    /// re-orthogonalized against those vectors every sweep.
    pub fn eigenvector(&self, lambda: f64, orthogonalize_against: &[&[f64]]) -> Vec<f64> {
        let n = self.len();
        // deterministic pseudo-random start (xorshift)
        let mut state = 0x9e3779b97f4a7c15_u64;
        let mut x: Vec<f64> = (0..n)
            .map(|_| {
                state ^= state << 13;
                state ^= state >> 7;
                state ^= state << 17;
                (state >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut x);
        for _ in 0..4 {
            self.shifted_solve(lambda, &mut x);
            for v in orthogonalize_against {
                let p = dot(&x, v);
                for (xi, vi) in x.iter_mut().zip(v.iter()) {
                    *xi -= p * vi;
                }
            }
            normalize(&mut x);
        }
        x
    }

    /// Rayleigh quotient x^T T x for a normalized vector.
    pub fn rayleigh(&self, x: &[f64]) -> f64 {
        let n = self.len();
        let mut acc = 0.0;
        for i in 0..n {
            let mut r = self.d[i] * x[i];
            if i > 0 {
                r += self.e[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                r += self.e[i] * x[i + 1];
            }
            acc += x[i] * r;
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(x: &mut [f64]) {
    let nrm = dot(x, x).sqrt();
    if nrm > 0.0 {
        for v in x.iter_mut() {
            *v /= nrm;
        }
    }
}
