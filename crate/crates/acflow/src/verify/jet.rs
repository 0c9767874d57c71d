//! Second-order Taylor jets in two variables.
//!
//! A `Jet2` carries a value with its first and second derivatives in (x, y),
//! propagated through arithmetic by truncated Taylor products. The
//! manufactured-solution module evaluates the printed exact fields as jets to
//! obtain gradients and Laplacians without hand-expanded formulas; an
//! independent finite-difference oracle cross-checks those derivatives in the
//! test suite.

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet2 {
    pub v: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxx: f64,
    pub dxy: f64,
    pub dyy: f64,
}

impl Jet2 {
    pub const fn c(v: f64) -> Self {
        Jet2 {
            v,
            dx: 0.0,
            dy: 0.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    pub const fn var_x(x: f64) -> Self {
        Jet2 {
            v: x,
            dx: 1.0,
            dy: 0.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    pub const fn var_y(y: f64) -> Self {
        Jet2 {
            v: y,
            dx: 0.0,
            dy: 1.0,
            dxx: 0.0,
            dxy: 0.0,
            dyy: 0.0,
        }
    }

    pub fn grad(&self) -> [f64; 2] {
        [self.dx, self.dy]
    }

    pub fn laplacian(&self) -> f64 {
        self.dxx + self.dyy
    }

    /// Chain rule through a scalar function given its value and first two
    /// derivatives at `self.v`.
    fn chain(&self, f: f64, f1: f64, f2: f64) -> Jet2 {
        Jet2 {
            v: f,
            dx: f1 * self.dx,
            dy: f1 * self.dy,
            dxx: f2 * self.dx * self.dx + f1 * self.dxx,
            dxy: f2 * self.dx * self.dy + f1 * self.dxy,
            dyy: f2 * self.dy * self.dy + f1 * self.dyy,
        }
    }

    pub fn sin(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Jet2 {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn tanh(self) -> Jet2 {
        let t = self.v.tanh();
        let sech2 = 1.0 - t * t;
        self.chain(t, sech2, -2.0 * t * sech2)
    }

    pub fn sqrt(self) -> Jet2 {
        let r = self.v.sqrt();
        self.chain(r, 0.5 / r, -0.25 / (r * r * r))
    }

    pub fn powi(self, n: i32) -> Jet2 {
        let mut acc = Jet2::c(1.0);
        for _ in 0..n {
            acc = acc * self;
        }
        acc
    }
}

impl std::ops::Add for Jet2 {
    type Output = Jet2;
    fn add(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v + o.v,
            dx: self.dx + o.dx,
            dy: self.dy + o.dy,
            dxx: self.dxx + o.dxx,
            dxy: self.dxy + o.dxy,
            dyy: self.dyy + o.dyy,
        }
    }
}

impl std::ops::Sub for Jet2 {
    type Output = Jet2;
    fn sub(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v - o.v,
            dx: self.dx - o.dx,
            dy: self.dy - o.dy,
            dxx: self.dxx - o.dxx,
            dxy: self.dxy - o.dxy,
            dyy: self.dyy - o.dyy,
        }
    }
}

impl std::ops::Mul for Jet2 {
    type Output = Jet2;
    fn mul(self, o: Jet2) -> Jet2 {
        Jet2 {
            v: self.v * o.v,
            dx: self.dx * o.v + self.v * o.dx,
            dy: self.dy * o.v + self.v * o.dy,
            dxx: self.dxx * o.v + 2.0 * self.dx * o.dx + self.v * o.dxx,
            dxy: self.dxy * o.v + self.dx * o.dy + self.dy * o.dx + self.v * o.dxy,
            dyy: self.dyy * o.v + 2.0 * self.dy * o.dy + self.v * o.dyy,
        }
    }
}

impl std::ops::Mul<f64> for Jet2 {
    type Output = Jet2;
    fn mul(self, s: f64) -> Jet2 {
        Jet2 {
            v: self.v * s,
            dx: self.dx * s,
            dy: self.dy * s,
            dxx: self.dxx * s,
            dxy: self.dxy * s,
            dyy: self.dyy * s,
        }
    }
}

impl std::ops::Neg for Jet2 {
    type Output = Jet2;
    fn neg(self) -> Jet2 {
        self * -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd2(f: impl Fn(f64, f64) -> f64, x: f64, y: f64) -> Jet2 {
        let h = 1e-5;
        Jet2 {
            v: f(x, y),
            dx: (f(x + h, y) - f(x - h, y)) / (2.0 * h),
            dy: (f(x, y + h) - f(x, y - h)) / (2.0 * h),
            dxx: (f(x + h, y) - 2.0 * f(x, y) + f(x - h, y)) / (h * h),
            dxy: (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h))
                / (4.0 * h * h),
            dyy: (f(x, y + h) - 2.0 * f(x, y) + f(x, y - h)) / (h * h),
        }
    }

    #[test]
    fn jets_match_finite_differences() {
        let f_jet = |x: f64, y: f64| {
            let xj = Jet2::var_x(x);
            let yj = Jet2::var_y(y);
            (xj * 2.1).sin() * (yj * 1.3).cos() + xj.powi(3) * yj - (xj * yj * 0.7).tanh()
        };
        let f_val =
            |x: f64, y: f64| (2.1 * x).sin() * (1.3 * y).cos() + x.powi(3) * y - (0.7 * x * y).tanh();
        for &(x, y) in &[(0.3, 0.8), (-1.1, 0.4), (2.0, -0.5)] {
            let j = f_jet(x, y);
            let fd = fd2(f_val, x, y);
            assert!((j.v - fd.v).abs() < 1e-12);
            assert!((j.dx - fd.dx).abs() < 1e-7);
            assert!((j.dy - fd.dy).abs() < 1e-7);
            assert!((j.dxx - fd.dxx).abs() < 1e-4);
            assert!((j.dxy - fd.dxy).abs() < 1e-4);
            assert!((j.dyy - fd.dyy).abs() < 1e-4);
        }
    }

    #[test]
    fn sqrt_jet() {
        let x = 1.7;
        let j = (Jet2::var_x(x) * Jet2::var_x(x) + Jet2::c(1.0)).sqrt();
        let want = (x * x + 1.0).sqrt();
        assert!((j.v - want).abs() < 1e-14);
        assert!((j.dx - x / want).abs() < 1e-12);
    }
}
