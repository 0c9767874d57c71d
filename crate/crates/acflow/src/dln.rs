//! The variable-step DLN one-leg family: coefficients, weighted averages,
//! the G(θ) pair norm, and the G-stability identity used by the energy
//! monitor.
//!
//! For θ = 1 the scheme is the implicit midpoint rule on `[t_n, t_{n+1}]`;
//! for θ = 0 with equal steps it is the midpoint rule on `[t_{n-1}, t_{n+1}]`.

use crate::fem::CsrMatrix;
use crate::{Error, Result};

/// Coefficients of one DLN step, for step sizes `k_n` (new) and `k_{n-1}`.
///
/// `alpha` and `beta` are indexed `[0, 1, 2]` for levels `n-1, n, n+1`.
/// `a` holds the dissipation coefficients of the G-stability identity.
#[derive(Clone, Copy, Debug)]
pub struct DlnCoeffs {
    pub theta: f64,
    pub eps: f64,
    pub alpha: [f64; 3],
    pub beta: [f64; 3],
    pub k_hat: f64,
    pub a: [f64; 3],
}

pub fn compute_coeffs(theta: f64, k_n: f64, k_prev: f64) -> Result<DlnCoeffs> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::invalid(format!("theta = {theta} outside [0, 1]")));
    }
    if !(k_n > 0.0) || !(k_prev > 0.0) {
        return Err(Error::invalid(format!(
            "step sizes must be positive, got k_n = {k_n}, k_prev = {k_prev}"
        )));
    }
    let eps = (k_n - k_prev) / (k_n + k_prev);
    let alpha = [0.5 * (theta - 1.0), -theta, 0.5 * (theta + 1.0)];
    let d = (1.0 + eps * theta) * (1.0 + eps * theta);
    let r = (1.0 - theta * theta) / d;
    let s = eps * eps * theta * (1.0 - theta * theta) / d;
    let beta = [
        0.25 * (1.0 + r - s - theta),
        0.5 * (1.0 - r),
        0.25 * (1.0 + r + s + theta),
    ];
    let k_hat = alpha[2] * k_n - alpha[0] * k_prev;
    let a1 = -(theta * (1.0 - theta * theta)).sqrt() / (2.0_f64.sqrt() * (1.0 + eps * theta));
    let a = [-0.5 * (1.0 + eps) * a1, a1, -0.5 * (1.0 - eps) * a1];
    Ok(DlnCoeffs {
        theta,
        eps,
        alpha,
        beta,
        k_hat,
        a,
    })
}

/// Σ c_ℓ z_{n-1+ℓ} for a 3-coefficient set over equally sized vectors.
pub fn combine3(c: &[f64; 3], z_prev: &[f64], z_curr: &[f64], z_next: &[f64]) -> Result<Vec<f64>> {
    if z_prev.len() != z_curr.len() || z_curr.len() != z_next.len() {
        return Err(Error::invalid("combine3: length mismatch"));
    }
    Ok(z_prev
        .iter()
        .zip(z_curr)
        .zip(z_next)
        .map(|((&a, &b), &c2)| c[0] * a + c[1] * b + c[2] * c2)
        .collect())
}

pub fn combine3_into(
    c: &[f64; 3],
    z_prev: &[f64],
    z_curr: &[f64],
    z_next: &[f64],
    out: &mut [f64],
) {
    for i in 0..out.len() {
        out[i] = c[0] * z_prev[i] + c[1] * z_curr[i] + c[2] * z_next[i];
    }
}

pub fn combine_alpha(
    coeffs: &DlnCoeffs,
    z_prev: &[f64],
    z_curr: &[f64],
    z_next: &[f64],
) -> Result<Vec<f64>> {
    combine3(&coeffs.alpha, z_prev, z_curr, z_next)
}

pub fn combine_beta(
    coeffs: &DlnCoeffs,
    z_prev: &[f64],
    z_curr: &[f64],
    z_next: &[f64],
) -> Result<Vec<f64>> {
    combine3(&coeffs.beta, z_prev, z_curr, z_next)
}

/// z_{n,θ} = (1+θ)/2 z_n + (1-θ)/2 z_{n-1}
pub fn combine_theta(theta: f64, z_prev: &[f64], z_curr: &[f64]) -> Result<Vec<f64>> {
    if z_prev.len() != z_curr.len() {
        return Err(Error::invalid("combine_theta: length mismatch"));
    }
    let cp = 0.5 * (1.0 - theta);
    let cc = 0.5 * (1.0 + theta);
    Ok(z_prev
        .iter()
        .zip(z_curr)
        .map(|(&a, &b)| cp * a + cc * b)
        .collect())
}

/// Squared G(θ) pair norm: 1/4 (1+θ)(M x, x) + 1/4 (1-θ)(M y, y).
pub fn g_norm_pair_sq(theta: f64, mass: &CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    0.25 * (1.0 + theta) * mass.bilinear(x, x) + 0.25 * (1.0 - theta) * mass.bilinear(y, y)
}

/// Absolute defect of the G-stability identity
/// (v_α, v_β)_M = ||(v_{n+1}, v_n)||²_G − ||(v_n, v_{n-1})||²_G + ||Σ a_ℓ v||²_M.
///
/// Exact algebra: this vanishes identically up to rounding for any inputs.
pub fn g_stability_residual(
    coeffs: &DlnCoeffs,
    mass: &CsrMatrix,
    v_prev: &[f64],
    v_curr: &[f64],
    v_next: &[f64],
) -> f64 {
    let va = combine3(&coeffs.alpha, v_prev, v_curr, v_next).unwrap();
    let vb = combine3(&coeffs.beta, v_prev, v_curr, v_next).unwrap();
    let lhs = mass.bilinear(&va, &vb);
    let g_new = g_norm_pair_sq(coeffs.theta, mass, v_next, v_curr);
    let g_old = g_norm_pair_sq(coeffs.theta, mass, v_curr, v_prev);
    let av = combine3(&coeffs.a, v_prev, v_curr, v_next).unwrap();
    let diss = mass.bilinear(&av, &av);
    (lhs - (g_new - g_old + diss)).abs()
}

/// One DLN step for the linear ODE system y' = L y + g(t):
/// solves (α₂ I − k̂ β₂ L) y_{n+1} = −α₁ y_n − α₀ y_{n-1}
///        + k̂ [L (β₁ y_n + β₀ y_{n-1}) + g(t_β)].
pub fn one_leg_linear_step(
    l: &nalgebra::DMatrix<f64>,
    coeffs: &DlnCoeffs,
    t_curr: f64,
    k_n: f64,
    k_prev: f64,
    y_prev: &nalgebra::DVector<f64>,
    y_curr: &nalgebra::DVector<f64>,
    forcing: impl Fn(f64) -> nalgebra::DVector<f64>,
) -> Result<nalgebra::DVector<f64>> {
    let n = l.nrows();
    let t_next = t_curr + k_n;
    let t_prev = t_curr - k_prev;
    let tb = coeffs.beta[2] * t_next + coeffs.beta[1] * t_curr + coeffs.beta[0] * t_prev;
    let lhs = nalgebra::DMatrix::<f64>::identity(n, n) * coeffs.alpha[2]
        - l * (coeffs.k_hat * coeffs.beta[2]);
    let known = y_curr * coeffs.beta[1] + y_prev * coeffs.beta[0];
    let rhs = -(y_curr * coeffs.alpha[1]) - y_prev * coeffs.alpha[0]
        + (l * known + forcing(tb)) * coeffs.k_hat;
    lhs.lu()
        .solve(&rhs)
        .ok_or_else(|| Error::LinearSolve("singular one-leg system".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::Coo;
    use proptest::prelude::*;

    fn identity_mass(n: usize) -> CsrMatrix {
        let mut coo = Coo::new(n, n);
        for i in 0..n {
            coo.add(i, i, 1.0);
        }
        coo.to_csr()
    }

    #[test]
    fn midpoint_limits() {
        let c = compute_coeffs(1.0, 0.7, 0.2).unwrap();
        assert_eq!(c.alpha, [0.0, -1.0, 1.0]);
        for (got, want) in c.beta.iter().zip([0.0, 0.5, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        assert!((c.k_hat - 0.7).abs() < 1e-15);
        assert!(c.a.iter().all(|&x| x.abs() < 1e-15));

        let c = compute_coeffs(0.0, 0.5, 0.5).unwrap();
        for (got, want) in c.alpha.iter().zip([-0.5, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
        for (got, want) in c.beta.iter().zip([0.5, 0.0, 0.5]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn frozen_coefficients_theta_03() {
        // Regression values computed directly from the coefficient formulas
        // for theta = 0.3, k_n = 2, k_prev = 1.
        let c = compute_coeffs(0.3, 2.0, 1.0).unwrap();
        assert!((c.eps - 1.0 / 3.0).abs() < 1e-15);
        let alpha_want = [-0.35, -0.3, 0.65];
        let beta_want = [0.35674931129476584, 0.12396694214876036, 0.5192837465564738];
        let a_want = [0.22391458426558988, -0.33587187639838484, 0.11195729213279496];
        for i in 0..3 {
            assert!((c.alpha[i] - alpha_want[i]).abs() < 1e-15);
            assert!((c.beta[i] - beta_want[i]).abs() < 1e-15);
            assert!((c.a[i] - a_want[i]).abs() < 1e-15);
        }
        assert!((c.k_hat - 1.65).abs() < 1e-15);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(compute_coeffs(-0.1, 1.0, 1.0).is_err());
        assert!(compute_coeffs(0.5, 0.0, 1.0).is_err());
        assert!(compute_coeffs(0.5, 1.0, -1.0).is_err());
    }

    #[test]
    fn combiner_examples() {
        let c = compute_coeffs(0.3, 0.02, 0.01).unwrap();
        let z = vec![3.7; 5];
        let za = combine_alpha(&c, &z, &z, &z).unwrap();
        let zb = combine_beta(&c, &z, &z, &z).unwrap();
        assert!(za.iter().all(|&x| x.abs() < 1e-14));
        assert!(zb.iter().all(|&x| (x - 3.7).abs() < 1e-14));

        // linear-in-time sequence: combine_alpha gives k_hat
        let (k_n, k_prev) = (0.02, 0.01);
        let t = 1.3;
        let zs: Vec<Vec<f64>> = [t - k_prev, t, t + k_n]
            .iter()
            .map(|&tv| vec![tv; 3])
            .collect();
        let za = combine_alpha(&c, &zs[0], &zs[1], &zs[2]).unwrap();
        assert!(za.iter().all(|&x| (x - c.k_hat).abs() < 1e-14));
    }

    #[test]
    fn g_norm_examples() {
        let m = identity_mass(4);
        assert_eq!(g_norm_pair_sq(0.3, &m, &[0.0; 4], &[0.0; 4]), 0.0);
        // theta = 1: only the first argument contributes.
        let x = [1.0, 2.0, -1.0, 0.5];
        let y = [9.0, -3.0, 2.0, 7.0];
        let g = g_norm_pair_sq(1.0, &m, &x, &y);
        let x2: f64 = x.iter().map(|v| v * v).sum();
        assert!((g - 0.5 * x2).abs() < 1e-14);
        // theta = 0.3 plug-in arithmetic: 0.325 |x|^2 + 0.175 |y|^2
        let y2: f64 = y.iter().map(|v| v * v).sum();
        let g = g_norm_pair_sq(0.3, &m, &x, &y);
        assert!((g - (0.325 * x2 + 0.175 * y2)).abs() < 1e-12);
    }

    #[test]
    fn theta_one_identity_reduces_to_midpoint_telescope() {
        let c = compute_coeffs(1.0, 0.4, 0.9).unwrap();
        let m = identity_mass(3);
        let vp = [0.3, -1.0, 2.0];
        let v0 = [1.4, 0.2, -0.7];
        let vn = [0.9, 2.2, 0.1];
        let va = combine3(&c.alpha, &vp, &v0, &vn).unwrap();
        let vb = combine3(&c.beta, &vp, &v0, &vn).unwrap();
        let lhs = m.bilinear(&va, &vb);
        let n2: f64 = vn.iter().map(|x| x * x).sum();
        let c2: f64 = v0.iter().map(|x| x * x).sum();
        assert!((lhs - 0.5 * (n2 - c2)).abs() < 1e-13);
    }

    #[test]
    fn second_order_on_scalar_ode() {
        // y' = lambda y with smooth variable steps; Richardson on k, k/2, k/4.
        let lambda = -1.3;
        let l = nalgebra::DMatrix::from_element(1, 1, lambda);
        let run = |k0: f64| -> f64 {
            let theta = 0.3;
            let mut t = 0.0;
            let mut y_prev = nalgebra::DVector::from_element(1, 1.0);
            // exact bootstrap for the second level
            let steps = |t: f64| k0 * (1.0 + 0.4 * (5.0 * t).sin());
            let k_first = steps(0.0);
            let mut y_curr = nalgebra::DVector::from_element(1, (lambda * k_first).exp());
            let mut k_prev = k_first;
            t += k_first;
            while t < 1.0 - 1e-12 {
                let k_n = steps(t).min(1.0 - t);
                let c = compute_coeffs(theta, k_n, k_prev).unwrap();
                let y_next = one_leg_linear_step(&l, &c, t, k_n, k_prev, &y_prev, &y_curr, |_| {
                    nalgebra::DVector::zeros(1)
                })
                .unwrap();
                y_prev = y_curr;
                y_curr = y_next;
                t += k_n;
                k_prev = k_n;
            }
            (y_curr[0] - (lambda * 1.0_f64).exp()).abs()
        };
        let e1 = run(0.02);
        let e2 = run(0.01);
        let e4 = run(0.005);
        let rate12 = (e1 / e2).log2();
        let rate24 = (e2 / e4).log2();
        assert!(
            (1.7..2.6).contains(&rate12) && (1.7..2.6).contains(&rate24),
            "observed rates {rate12:.2}, {rate24:.2} (errors {e1:.2e}, {e2:.2e}, {e4:.2e})"
        );
    }

    proptest! {
        #[test]
        fn coefficient_invariants(theta in 0.0..=1.0f64, eps in -0.99..0.99f64) {
            // realize eps through a step pair
            let k_prev = 1.0;
            let k_n = k_prev * (1.0 + eps) / (1.0 - eps);
            let c = compute_coeffs(theta, k_n, k_prev).unwrap();
            prop_assert!((c.eps - eps).abs() < 1e-12);
            let sa: f64 = c.alpha.iter().sum();
            let sb: f64 = c.beta.iter().sum();
            prop_assert!(sa.abs() < 1e-14);
            prop_assert!((sb - 1.0).abs() < 1e-14);
            // alpha applied to the time levels reproduces k_hat
            let t = 0.37;
            let comb = c.alpha[2] * (t + k_n) + c.alpha[1] * t + c.alpha[0] * (t - k_prev);
            prop_assert!((comb - c.k_hat).abs() < 1e-14 * (1.0 + c.k_hat.abs()));
            prop_assert!(c.k_hat > 0.0);
            // dissipation coefficient relations
            prop_assert!((c.a[2] + 0.5 * (1.0 - eps) * c.a[1]).abs() < 1e-14);
            prop_assert!((c.a[0] + 0.5 * (1.0 + eps) * c.a[1]).abs() < 1e-14);
        }

        #[test]
        fn alpha_is_theta_difference(theta in 0.0..=1.0f64, eps in -0.9..0.9f64,
                                     zp in -10.0..10.0f64, zc in -10.0..10.0f64, zn in -10.0..10.0f64) {
            let k_prev = 0.5;
            let k_n = k_prev * (1.0 + eps) / (1.0 - eps);
            let c = compute_coeffs(theta, k_n, k_prev).unwrap();
            let za = combine3(&c.alpha, &[zp], &[zc], &[zn]).unwrap()[0];
            let t_new = combine_theta(theta, &[zc], &[zn]).unwrap()[0];
            let t_old = combine_theta(theta, &[zp], &[zc]).unwrap()[0];
            prop_assert!((za - (t_new - t_old)).abs() < 1e-12);
        }

        #[test]
        fn g_stability_identity_random(theta in 0.0..=1.0f64, eps in -0.95..0.95f64, seed in 0u64..1000) {
            let k_prev = 1.0;
            let k_n = k_prev * (1.0 + eps) / (1.0 - eps);
            let c = compute_coeffs(theta, k_n, k_prev).unwrap();
            let m = identity_mass(6);
            let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
            let mut rnd = || {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 33) as f64) / (u32::MAX as f64) * 6.0 - 3.0
            };
            let vp: Vec<f64> = (0..6).map(|_| rnd()).collect();
            let v0: Vec<f64> = (0..6).map(|_| rnd()).collect();
            let vn: Vec<f64> = (0..6).map(|_| rnd()).collect();
            let scale: f64 = [&vp, &v0, &vn]
                .iter()
                .map(|v| v.iter().map(|x| x * x).sum::<f64>())
                .sum::<f64>()
                .max(1e-30);
            let res = g_stability_residual(&c, &m, &vp, &v0, &vn);
            prop_assert!(res <= 1e-12 * scale, "residual {res:.3e} at scale {scale:.3e}");
        }
    }
}
