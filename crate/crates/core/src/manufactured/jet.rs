//! Second-order forward-mode automatic differentiation in `(x, y, t)`.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Value, gradient and Hessian of a scalar function of `(x, y, t)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub v: f64,
    pub g: [f64; 3],
    pub h: [[f64; 3]; 3],
}

impl Jet {
    pub fn constant(v: f64) -> Self {
        Self { v, g: [0.0; 3], h: [[0.0; 3]; 3] }
    }

    /// Independent variable number `i` (0 = x, 1 = y, 2 = t) at value `v`.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut j = Self::constant(v);
        j.g[i] = 1.0;
        j
    }

    /// The three independent variables at a point.
    pub fn point(x: [f64; 2], t: f64) -> [Self; 3] {
        [Self::variable(x[0], 0), Self::variable(x[1], 1), Self::variable(t, 2)]
    }

    /// Compose with a scalar function given its first two derivatives.
    pub fn chain(self, f: f64, df: f64, ddf: f64) -> Self {
        let mut out = Self::constant(f);
        for i in 0..3 {
            out.g[i] = df * self.g[i];
            for j in 0..3 {
                out.h[i][j] = ddf * self.g[i] * self.g[j] + df * self.h[i][j];
            }
        }
        out
    }

    pub fn sin(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(s, c, -s)
    }

    pub fn cos(self) -> Self {
        let (s, c) = self.v.sin_cos();
        self.chain(c, -s, -c)
    }

    pub fn exp(self) -> Self {
        let e = self.v.exp();
        self.chain(e, e, e)
    }

    pub fn powi(self, n: i32) -> Self {
        let nf = f64::from(n);
        let d1 = if n == 0 { 0.0 } else { nf * self.v.powi(n - 1) };
        let d2 = if (0..2).contains(&n) { 0.0 } else { nf * (nf - 1.0) * self.v.powi(n - 2) };
        self.chain(self.v.powi(n), d1, d2)
    }

    pub fn recip(self) -> Self {
        let r = 1.0 / self.v;
        self.chain(r, -r * r, 2.0 * r * r * r)
    }

    /// `d^2 / dx_i^2` summed over the two spatial variables.
    pub fn laplacian(&self) -> f64 {
        self.h[0][0] + self.h[1][1]
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, o: Jet) -> Jet {
        self.v += o.v;
        for i in 0..3 {
            self.g[i] += o.g[i];
            for j in 0..3 {
                self.h[i][j] += o.h[i][j];
            }
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(self, o: Jet) -> Jet {
        self + (-o)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self * -1.0
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, o: Jet) -> Jet {
        let mut out = Jet::constant(self.v * o.v);
        for i in 0..3 {
            out.g[i] = self.v * o.g[i] + o.v * self.g[i];
            for j in 0..3 {
                out.h[i][j] = self.v * o.h[i][j]
                    + o.v * self.h[i][j]
                    + self.g[i] * o.g[j]
                    + o.g[i] * self.g[j];
            }
        }
        out
    }
}

impl Div for Jet {
    type Output = Jet;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, o: Jet) -> Jet {
        self * o.recip()
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, c: f64) -> Jet {
        self.v += c;
        self
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, c: f64) -> Jet {
        self + (-c)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, c: f64) -> Jet {
        self.v *= c;
        for i in 0..3 {
            self.g[i] *= c;
            for j in 0..3 {
                self.h[i][j] *= c;
            }
        }
        self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, j: Jet) -> Jet {
        j + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, j: Jet) -> Jet {
        -j + self
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, j: Jet) -> Jet {
        j * self
    }
}
