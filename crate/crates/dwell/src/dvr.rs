//! Discrete variable representation of the truncated double well.
//!
//! The DVR basis diagonalizes the position operator within the lowest N
//! energy eigenstates. In this basis the system-bath coupling is diagonal,
//! tunneling and intrawell relaxation appear as off-diagonal transition
//! elements Delta_mu_nu, and the free Hamiltonian contributes on-site
//! energies F_mu:
//!
//! ```text
//! U^T diag(E) U  =  diag(F)  -  (hbar/2) Delta      (Delta has zero diagonal)
//! ```
//!
//! States are ordered by ascending position eigenvalue lambda, so for a
//! four-level system the order is (alpha_1, alpha_2, beta_2, beta_1).

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::spectrum::Spectrum;

#[derive(Debug, Clone, thiserror::Error)]
pub enum DvrError {
    #[error("position matrix must be symmetric: |q_{i}{j} - q_{j}{i}| = {dev:.3e}")]
    NotSymmetric { i: usize, j: usize, dev: f64 },
    #[error("dimension mismatch: position matrix is {n}x{n} but {m} energies given")]
    DimensionMismatch { n: usize, m: usize },
    #[error("energies must be ascending")]
    EnergiesNotSorted,
    #[error("degenerate doublet mixing: a12 = 0")]
    DegenerateMixing,
}

/// Position-operator eigenbasis of the truncated level set.
#[derive(Debug, Clone)]
pub struct DvrBasis {
    /// Position eigenvalues lambda_mu, ascending.
    pub lambda: Vec<f64>,
    /// Orthogonal transform from the energy basis: column mu holds the DVR
    /// state |mu> expanded over energy eigenstates, q U = U diag(lambda).
    pub transform: DMatrix<f64>,
    /// Transition elements Delta_mu_nu (angular frequency), symmetric with
    /// zero diagonal.
    pub delta: DMatrix<f64>,
    /// On-site energies F_mu.
    pub onsite: Vec<f64>,
}

impl DvrBasis {
    pub fn len(&self) -> usize {
        self.lambda.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambda.is_empty()
    }

    /// True when state `mu` sits in the left well (lambda < 0).
    pub fn is_left(&self, mu: usize) -> bool {
        self.lambda[mu] < 0.0
    }

    /// Bare two-level basis from a position element `a = <1|q|2>` and a
    /// tunneling splitting; useful for NIBA-limit studies and tests.
    pub fn two_level(a: f64, splitting: f64) -> Self {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let transform = DMatrix::from_row_slice(2, 2, &[s, s, -s, s]);
        let mut delta = DMatrix::zeros(2, 2);
        delta[(0, 1)] = splitting;
        delta[(1, 0)] = splitting;
        Self {
            lambda: vec![-a.abs(), a.abs()],
            transform,
            delta,
            onsite: vec![0.0, 0.0],
        }
    }
}

/// Build the DVR basis from a truncated position matrix and its energies.
///
/// The position matrix is diagonalized; near-degenerate position eigenvalues
/// (gap below 1e-10) are ordered deterministically by their dominant
/// energy-basis component.
pub fn build_dvr(qmat: &DMatrix<f64>, energies: &[f64]) -> Result<DvrBasis, DvrError> {
    let n = qmat.nrows();
    if n != qmat.ncols() || n != energies.len() {
        return Err(DvrError::DimensionMismatch {
            n,
            m: energies.len(),
        });
    }
    if energies.windows(2).any(|w| w[1] < w[0]) {
        return Err(DvrError::EnergiesNotSorted);
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let dev = (qmat[(i, j)] - qmat[(j, i)]).abs();
            if dev > 1e-10 {
                return Err(DvrError::NotSymmetric { i, j, dev });
            }
        }
    }

    let sym = SymmetricEigen::new(qmat.clone());
    // sort eigenpairs by ascending lambda; tie-break by dominant overlap index
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let la = sym.eigenvalues[a];
        let lb = sym.eigenvalues[b];
        if (la - lb).abs() < 1e-10 {
            let da = sym.eigenvectors.column(a).iamax();
            let db = sym.eigenvectors.column(b).iamax();
            da.cmp(&db)
        } else {
            la.partial_cmp(&lb).unwrap()
        }
    });

    let mut lambda = Vec::with_capacity(n);
    let mut transform = DMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        lambda.push(sym.eigenvalues[k]);
        let mut v = sym.eigenvectors.column(k).clone_owned();
        // fix the overall sign: largest-magnitude component positive
        if v[v.iamax()] < 0.0 {
            v.neg_mut();
        }
        transform.set_column(col, &v);
    }

    let e = DVector::from_row_slice(energies);
    let h_dvr = transform.transpose() * DMatrix::from_diagonal(&e) * &transform;

    let mut delta = DMatrix::zeros(n, n);
    let mut onsite = Vec::with_capacity(n);
    for mu in 0..n {
        onsite.push(h_dvr[(mu, mu)]);
        for nu in 0..n {
            if nu != mu {
                delta[(mu, nu)] = -2.0 * h_dvr[(mu, nu)];
            }
        }
    }

    Ok(DvrBasis {
        lambda,
        transform,
        delta,
        onsite,
    })
}

/// Closed-form four-level DVR from the doublet data, valid for b = 0.
///
/// Returns states in ascending-lambda order (alpha_1, alpha_2, beta_2,
/// beta_1). On-site energies are measured from the lower doublet center
/// (E1 + E2)/2.
pub fn four_level_closed_form(
    a11: f64,
    a22: f64,
    a12: f64,
    delta1: f64,
    delta2: f64,
    gap: f64,
) -> Result<DvrBasis, DvrError> {
    if a12 == 0.0 {
        return Err(DvrError::DegenerateMixing);
    }
    let rad = ((a11 - a22) * (a11 - a22) + 4.0 * a12 * a12).sqrt();
    let lam_a1 = 0.5 * (-(a11 + a22) - rad);
    let lam_a2 = 0.5 * (-(a11 + a22) + rad);
    let u = (a11 + lam_a1) / a12;
    let v2 = 1.0 / (1.0 + u * u);

    // ascending lambda: (alpha_1, alpha_2, beta_2, beta_1)
    let lambda = vec![lam_a1, lam_a2, -lam_a2, -lam_a1];

    let d_a1b1 = v2 * (delta1 + u * u * delta2);
    let d_a2b2 = v2 * (u * u * delta1 + delta2);
    let d_a1b2 = v2 * u * (delta1 - delta2);
    let d_intra = 2.0 * v2 * u * gap;

    // index map: 0 = alpha1, 1 = alpha2, 2 = beta2, 3 = beta1
    let mut delta = DMatrix::zeros(4, 4);
    let mut set = |i: usize, j: usize, val: f64| {
        delta[(i, j)] = val;
        delta[(j, i)] = val;
    };
    set(0, 3, d_a1b1); // alpha1-beta1
    set(1, 2, d_a2b2); // alpha2-beta2
    set(0, 2, d_a1b2); // alpha1-beta2
    set(1, 3, d_a1b2); // alpha2-beta1
    set(0, 1, d_intra); // alpha1-alpha2
    set(2, 3, d_intra); // beta2-beta1

    let f1 = u * u * v2 * gap;
    let f2 = v2 * gap;
    let onsite = vec![f1, f2, f2, f1];

    // energy-basis expansion of the DVR vectors (localized combinations of
    // the lowest four eigenstates), columns ordered as lambda
    let v = v2.sqrt();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // |L1> = (|1>-|2>)/sqrt2 etc.; |alpha1> = v(|L1> - u|L2>), ...
    let col = |c_l1: f64, c_l2: f64, c_r1: f64, c_r2: f64| {
        [
            s * (c_r1 + c_l1),
            s * (c_r1 - c_l1),
            s * (c_r2 + c_l2),
            s * (c_r2 - c_l2),
        ]
    };
    let a1 = col(v, -u * v, 0.0, 0.0);
    let a2 = col(u * v, v, 0.0, 0.0);
    let b2 = col(0.0, 0.0, u * v, v);
    let b1 = col(0.0, 0.0, v, -u * v);
    let mut transform = DMatrix::zeros(4, 4);
    for (c, colv) in [a1, a2, b2, b1].iter().enumerate() {
        for r in 0..4 {
            transform[(r, c)] = colv[r];
        }
    }
    // match the build_dvr sign convention (largest component positive)
    for c in 0..4 {
        let mut v = transform.column_mut(c);
        if v[v.iamax()] < 0.0 {
            v.neg_mut();
        }
    }

    Ok(DvrBasis {
        lambda,
        transform,
        delta,
        onsite,
    })
}

/// Initial condition rho(t0) = |L1><L1| projected on the DVR basis.
#[derive(Debug, Clone)]
pub struct InitialState {
    /// Diagonal populations rho_mumu(t0).
    pub populations: Vec<f64>,
    /// Real parts of the initially prepared off-diagonals, stored as
    /// (mu, nu, Re rho_munu) with mu < nu, both in the same well.
    pub coherences: Vec<(usize, usize, f64)>,
    /// Weight of |L1> captured inside the truncated basis.
    pub projection_norm: f64,
    /// Set when the projection norm drops below 0.999.
    pub truncation_warning: bool,
}

impl InitialState {
    /// A purely diagonal preparation (no inhomogeneity).
    pub fn diagonal(populations: Vec<f64>) -> Self {
        let norm = populations.iter().sum();
        Self {
            populations,
            coherences: Vec::new(),
            projection_norm: norm,
            truncation_warning: false,
        }
    }
}

/// Expand the left-localized ground combination |L1> = (|1> - |2>)/sqrt(2)
/// over the DVR basis.
pub fn localized_initial_state(basis: &DvrBasis) -> InitialState {
    let n = basis.len();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // c_mu = <mu|L1>
    let c: Vec<f64> = (0..n)
        .map(|mu| s * (basis.transform[(0, mu)] - basis.transform[(1, mu)]))
        .collect();
    let populations: Vec<f64> = c.iter().map(|x| x * x).collect();
    let mut coherences = Vec::new();
    for mu in 0..n {
        for nu in (mu + 1)..n {
            if basis.is_left(mu) && basis.is_left(nu) {
                let re = c[mu] * c[nu];
                if re.abs() > 1e-14 {
                    coherences.push((mu, nu, re));
                }
            }
        }
    }
    let projection_norm: f64 = populations.iter().sum();
    InitialState {
        populations,
        coherences,
        truncation_warning: projection_norm < 0.999,
        projection_norm,
    }
}

/// Total population of left-well (lambda < 0) states.
pub fn left_population(rho_diag: &[f64], basis: &DvrBasis) -> f64 {
    rho_diag
        .iter()
        .enumerate()
        .filter(|(mu, _)| basis.is_left(*mu))
        .map(|(_, p)| p)
        .sum()
}

/// Convenience: solve the DVR pipeline straight from a spectrum.
pub fn dvr_from_spectrum(spectrum: &Spectrum) -> Result<DvrBasis, DvrError> {
    build_dvr(&spectrum.q_matrix, &spectrum.energies)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{solve_spectrum, GridSpec, PotentialSpec};
    use approx::assert_relative_eq;

    fn eb14_spectrum(n: usize) -> Spectrum {
        let spec = PotentialSpec::new(1.4).unwrap();
        solve_spectrum(&spec, &GridSpec::default_for(&spec), n).unwrap()
    }

    #[test]
    fn two_level_dvr_is_localized_basis() {
        let a = 3.08;
        let (e1, e2) = (-0.9272, -0.9235);
        let qmat = DMatrix::from_row_slice(2, 2, &[0.0, a, a, 0.0]);
        let basis = build_dvr(&qmat, &[e1, e2]).unwrap();
        assert_relative_eq!(basis.lambda[0], -a, epsilon = 1e-12);
        assert_relative_eq!(basis.lambda[1], a, epsilon = 1e-12);
        assert_relative_eq!(basis.delta[(0, 1)], e2 - e1, epsilon = 1e-12);
        assert_relative_eq!(basis.onsite[0], 0.5 * (e1 + e2), epsilon = 1e-12);
        assert_relative_eq!(basis.onsite[1], 0.5 * (e1 + e2), epsilon = 1e-12);
    }

    #[test]
    fn closed_form_mixing_consistency() {
        // u from (a11 + lambda_a1)/a12 equals -(a22 + lambda_a2)/a12
        let (a11, a22, a12) = (3.0800738_f64, 2.2484186_f64, -0.7398695_f64);
        let rad = ((a11 - a22) * (a11 - a22) + 4.0 * a12 * a12).sqrt();
        let lam_a1 = 0.5 * (-(a11 + a22) - rad);
        let lam_a2 = 0.5 * (-(a11 + a22) + rad);
        let u1 = (a11 + lam_a1) / a12;
        let u2 = -(a22 + lam_a2) / a12;
        assert_relative_eq!(u1, u2, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_symmetric_doublet_limit() {
        let basis = four_level_closed_form(2.0, 2.0, 0.5, 0.01, 0.1, 0.8).unwrap();
        // lambda_{a1,a2} = -a11 -+ a12
        assert_relative_eq!(basis.lambda[0], -2.5, epsilon = 1e-12);
        assert_relative_eq!(basis.lambda[1], -1.5, epsilon = 1e-12);
        // u = +-1, v^2 = 1/2: on-site energies both gap/2
        assert_relative_eq!(basis.onsite[0], 0.4, epsilon = 1e-12);
        assert_relative_eq!(basis.onsite[1], 0.4, epsilon = 1e-12);
    }

    #[test]
    fn closed_form_rejects_degenerate() {
        assert!(four_level_closed_form(2.0, 2.0, 0.0, 0.01, 0.1, 0.8).is_err());
    }

    #[test]
    fn closed_form_matches_numeric_dvr_without_b() {
        let s = eb14_spectrum(4);
        let q = &s.q_matrix;
        let a11 = q[(0, 1)];
        let a22 = q[(2, 3)];
        let a12 = 0.5 * (q[(0, 3)] + q[(1, 2)]);
        // synthetic q matrix with b forced to zero
        let mut q0 = q.clone();
        q0[(0, 3)] = a12;
        q0[(3, 0)] = a12;
        q0[(1, 2)] = a12;
        q0[(2, 1)] = a12;
        let numeric = build_dvr(&q0, &s.energies).unwrap();
        let spl = s.splittings();
        let cf = four_level_closed_form(a11, a22, a12, spl[0], spl[1], s.mean_doublet_gap())
            .unwrap();
        let offset = 0.5 * (s.energies[0] + s.energies[1]);
        for mu in 0..4 {
            assert_relative_eq!(numeric.lambda[mu], cf.lambda[mu], epsilon = 1e-10);
            assert_relative_eq!(numeric.onsite[mu], cf.onsite[mu] + offset, epsilon = 1e-10);
            for nu in 0..4 {
                assert_relative_eq!(
                    numeric.delta[(mu, nu)].abs(),
                    cf.delta[(mu, nu)].abs(),
                    epsilon = 1e-10
                );
            }
        }
    }

    #[test]
    fn numeric_dvr_with_b_matches_closed_form_to_first_order() {
        let s = eb14_spectrum(4);
        let q = &s.q_matrix;
        let a11 = q[(0, 1)];
        let a22 = q[(2, 3)];
        let a12 = 0.5 * (q[(0, 3)] + q[(1, 2)]);
        let b = 0.5 * (q[(0, 3)] - q[(1, 2)]);
        let spl = s.splittings();
        let cf = four_level_closed_form(a11, a22, a12, spl[0], spl[1], s.mean_doublet_gap())
            .unwrap();

        let dev = |bb: f64| -> f64 {
            let mut qb = q.clone();
            qb[(0, 3)] = a12 + bb;
            qb[(3, 0)] = a12 + bb;
            qb[(1, 2)] = a12 - bb;
            qb[(2, 1)] = a12 - bb;
            let numeric = build_dvr(&qb, &s.energies).unwrap();
            let mut worst = 0.0_f64;
            for mu in 0..4 {
                for nu in 0..4 {
                    worst = worst
                        .max((numeric.delta[(mu, nu)].abs() - cf.delta[(mu, nu)].abs()).abs());
                }
            }
            worst
        };

        let d_full = dev(b);
        let d_half = dev(0.5 * b);
        // difference must shrink at least linearly in b
        assert!(d_full < 0.05, "b-induced deviation too large: {d_full}");
        assert!(d_half <= 0.6 * d_full + 1e-12);
    }

    #[test]
    fn reconstruction_and_trace_invariance() {
        let s = eb14_spectrum(4);
        let basis = dvr_from_spectrum(&s).unwrap();
        // U orthogonal
        let n = basis.len();
        let id = basis.transform.transpose() * &basis.transform;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((id[(i, j)] - expect).abs() < 1e-10);
            }
        }
        // U diagonalizes q
        let qd = basis.transform.transpose() * &s.q_matrix * &basis.transform;
        for i in 0..n {
            assert_relative_eq!(qd[(i, i)], basis.lambda[i], epsilon = 1e-9);
            for j in 0..n {
                if i != j {
                    assert!(qd[(i, j)].abs() < 1e-9);
                }
            }
        }
        // H reconstruction: diag(F) - Delta/2 equals U^T diag(E) U
        let e = DVector::from_row_slice(&s.energies);
        let h = basis.transform.transpose() * DMatrix::from_diagonal(&e) * &basis.transform;
        for i in 0..n {
            for j in 0..n {
                let expect = if i == j {
                    basis.onsite[i]
                } else {
                    -0.5 * basis.delta[(i, j)]
                };
                assert!((h[(i, j)] - expect).abs() < 1e-10);
            }
        }
        // trace invariance
        let sum_f: f64 = basis.onsite.iter().sum();
        let sum_e: f64 = s.energies.iter().sum();
        assert_relative_eq!(sum_f, sum_e, epsilon = 1e-10);
    }

    #[test]
    fn lambda_reflection_symmetry() {
        for n in [4usize, 6, 8] {
            let s = eb14_spectrum(n);
            let basis = dvr_from_spectrum(&s).unwrap();
            for mu in 0..n {
                assert_relative_eq!(
                    basis.lambda[mu],
                    -basis.lambda[n - 1 - mu],
                    epsilon = 1e-9
                );
            }
            // reflection leaves the transition-element magnitudes invariant
            for mu in 0..n {
                assert_relative_eq!(
                    basis.onsite[mu],
                    basis.onsite[n - 1 - mu],
                    epsilon = 1e-8
                );
                for nu in 0..n {
                    assert_relative_eq!(
                        basis.delta[(mu, nu)].abs(),
                        basis.delta[(n - 1 - mu, n - 1 - nu)].abs(),
                        epsilon = 1e-8
                    );
                }
            }
        }
    }

    #[test]
    fn transition_element_ordering() {
        // alpha1-beta2 and alpha1-beta1 are the slow tunneling channels,
        // alpha2-beta2 is faster, intrawell relaxation fastest
        let s = eb14_spectrum(4);
        let basis = dvr_from_spectrum(&s).unwrap();
        let d_a1b1 = basis.delta[(0, 3)].abs();
        let d_a1b2 = basis.delta[(0, 2)].abs();
        let d_a2b2 = basis.delta[(1, 2)].abs();
        let d_intra = basis.delta[(0, 1)].abs();
        assert!(d_a1b2 < 2.0 * d_a1b1 && d_a1b1 < 2.0 * d_a1b2);
        assert!(d_a1b1 <= d_a2b2);
        assert!(d_a1b2 <= d_a2b2);
        assert!(d_a2b2 < d_intra);
    }

    #[test]
    fn initial_state_two_level() {
        let basis = DvrBasis::two_level(3.08, 0.0037);
        let init = localized_initial_state(&basis);
        assert_relative_eq!(init.populations[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(init.populations[1], 0.0, epsilon = 1e-12);
        assert!(init.coherences.is_empty());
        assert!(!init.truncation_warning);
    }

    #[test]
    fn initial_state_four_level_expansion() {
        let s = eb14_spectrum(4);
        let basis = dvr_from_spectrum(&s).unwrap();
        let init = localized_initial_state(&basis);
        // recover u, v from the closed-form mixing
        let q = &s.q_matrix;
        let a11 = q[(0, 1)];
        let a22 = q[(2, 3)];
        let a12 = 0.5 * (q[(0, 3)] + q[(1, 2)]);
        let rad = ((a11 - a22) * (a11 - a22) + 4.0 * a12 * a12).sqrt();
        let lam_a1 = 0.5 * (-(a11 + a22) - rad);
        let u = (a11 + lam_a1) / a12;
        let v2 = 1.0 / (1.0 + u * u);
        // diagonal (v^2, u^2 v^2, 0, 0) and Re rho_{a1,a2} = u v^2, up to the
        // small b correction
        assert_relative_eq!(init.populations[0], v2, epsilon = 2e-3);
        assert_relative_eq!(init.populations[1], u * u * v2, epsilon = 2e-3);
        assert!(init.populations[2] < 2e-3 && init.populations[3] < 2e-3);
        assert_eq!(init.coherences.len(), 1);
        let (mu, nu, re) = init.coherences[0];
        assert_eq!((mu, nu), (0, 1));
        assert_relative_eq!(re.abs(), (u * v2).abs(), epsilon = 2e-3);
        // normalization identity v^2 (1 + u^2) = 1
        assert_relative_eq!(v2 * (1.0 + u * u), 1.0, epsilon = 1e-12);
        assert_relative_eq!(init.projection_norm, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn left_population_basics() {
        let s = eb14_spectrum(4);
        let basis = dvr_from_spectrum(&s).unwrap();
        let init = localized_initial_state(&basis);
        // with b != 0 the left preparation leaks ~3e-5 into the right well
        assert_relative_eq!(left_population(&init.populations, &basis), 1.0, epsilon = 1e-3);
        let two = DvrBasis::two_level(3.08, 0.0037);
        let init2 = localized_initial_state(&two);
        assert_relative_eq!(left_population(&init2.populations, &two), 1.0, epsilon = 1e-12);
        let uniform = vec![0.25; 4];
        assert_relative_eq!(left_population(&uniform, &basis), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn rejects_asymmetric_input() {
        let mut q = DMatrix::zeros(2, 2);
        q[(0, 1)] = 1.0;
        q[(1, 0)] = 1.0 + 1e-6;
        assert!(build_dvr(&q, &[0.0, 0.1]).is_err());
        let q2 = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        assert!(build_dvr(&q2, &[0.1, 0.0]).is_err());
    }
}
