//! Triangle quadrature, exact to total degree 8.
//!
//! Built as a 5x5 Gauss-Legendre rule mapped through the Duffy transform
//! `(x, y) = (s, t(1-s))`. A total-degree-d polynomial becomes degree <= d+1
//! in `s` (after the Jacobian factor `1-s`) and <= d in `t`, so five Gauss
//! points per direction integrate degree 8 exactly. This covers the worst
//! integrand in the scheme, the quartic velocity term with four P2 factors.

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Points on the reference triangle {x,y >= 0, x+y <= 1}.
    pub points: Vec<(f64, f64)>,
    /// Weights summing to the reference-triangle area 1/2.
    pub weights: Vec<f64>,
    pub degree: usize,
}

/// 5-point Gauss-Legendre nodes and weights on [-1, 1], in closed form.
fn gauss5() -> ([f64; 5], [f64; 5]) {
    let a = (1.0 / 3.0) * (5.0 - 2.0 * (10.0_f64 / 7.0).sqrt()).sqrt();
    let b = (1.0 / 3.0) * (5.0 + 2.0 * (10.0_f64 / 7.0).sqrt()).sqrt();
    let w0 = 128.0 / 225.0;
    let wa = (322.0 + 13.0 * 70.0_f64.sqrt()) / 900.0;
    let wb = (322.0 - 13.0 * 70.0_f64.sqrt()) / 900.0;
    ([0.0, -a, a, -b, b], [w0, wa, wa, wb, wb])
}

impl QuadratureRule {
    pub fn triangle_degree8() -> Self {
        let (x, w) = gauss5();
        // Map to [0,1].
        let n = |t: f64| 0.5 * (t + 1.0);
        let mut points = Vec::with_capacity(25);
        let mut weights = Vec::with_capacity(25);
        for i in 0..5 {
            let s = n(x[i]);
            let ws = 0.5 * w[i];
            for j in 0..5 {
                let t = n(x[j]);
                let wt = 0.5 * w[j];
                points.push((s, t * (1.0 - s)));
                weights.push(ws * wt * (1.0 - s));
            }
        }
        QuadratureRule {
            points,
            weights,
            degree: 8,
        }
    }

    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&(x, y), &w)| w * f(x, y))
            .sum()
    }
}
