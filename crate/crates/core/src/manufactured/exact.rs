//! Closed-form fields and the data they induce through the model equations.

use super::jet::Jet;
use crate::forms::MaterialParams;
use crate::mesh::Subdomain;

/// `(x, y, t) -> [u_x, u_y, p]`. The pressure is only read on the
/// poroelastic subdomain.
pub type FieldFn = fn(Jet, Jet, Jet) -> [Jet; 3];

/// Exact fields at one point of one subdomain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExactSample {
    pub u: [f64; 2],
    /// `grad_u[c][d] = d u_c / d x_d`.
    pub grad_u: [[f64; 2]; 2],
    pub div_u: f64,
    pub p: f64,
    pub grad_p: [f64; 2],
    pub psi: f64,
}

/// Displacement and pressure in closed form together with the material
/// coefficients needed to derive total pressure, forcing and boundary data.
#[derive(Debug, Clone, Copy)]
pub struct ExactFields {
    pub fields: FieldFn,
    pub params: MaterialParams,
    /// Drop the time derivatives from the pressure equation.
    pub stationary: bool,
}

struct Jets {
    ux: Jet,
    uy: Jet,
    p: Jet,
}

impl ExactFields {
    pub fn new(fields: FieldFn, params: MaterialParams, stationary: bool) -> Self {
        Self { fields, params, stationary }
    }

    fn jets(&self, x: [f64; 2], t: f64) -> Jets {
        let [jx, jy, jt] = Jet::point(x, t);
        let [ux, uy, p] = (self.fields)(jx, jy, jt);
        Jets { ux, uy, p }
    }

    pub fn sample(&self, x: [f64; 2], t: f64, sub: Subdomain) -> ExactSample {
        let j = self.jets(x, t);
        let div_u = j.ux.g[0] + j.uy.g[1];
        let lambda = self.params.lame(sub).lambda;
        let psi = match sub {
            Subdomain::Poro => self.params.alpha * j.p.v - lambda * div_u,
            Subdomain::Elastic => -lambda * div_u,
        };
        ExactSample {
            u: [j.ux.v, j.uy.v],
            grad_u: [[j.ux.g[0], j.ux.g[1]], [j.uy.g[0], j.uy.g[1]]],
            div_u,
            p: j.p.v,
            grad_p: [j.p.g[0], j.p.g[1]],
            psi,
        }
    }

    /// Total stress `2 mu eps(u) - psi I` as `[xx, yy, xy]`.
    pub fn stress(&self, x: [f64; 2], t: f64, sub: Subdomain) -> [f64; 3] {
        let s = self.sample(x, t, sub);
        let mu = self.params.lame(sub).mu;
        let g = s.grad_u;
        [
            2.0 * mu * g[0][0] - s.psi,
            2.0 * mu * g[1][1] - s.psi,
            mu * (g[0][1] + g[1][0]),
        ]
    }

    pub fn traction(&self, x: [f64; 2], t: f64, n: [f64; 2], sub: Subdomain) -> [f64; 2] {
        let s = self.stress(x, t, sub);
        [s[0] * n[0] + s[2] * n[1], s[2] * n[0] + s[1] * n[1]]
    }

    /// `(sigma^P - sigma^E) n` with `n` pointing out of the poroelastic side.
    pub fn traction_jump(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> [f64; 2] {
        let a = self.traction(x, t, n, Subdomain::Poro);
        let b = self.traction(x, t, n, Subdomain::Elastic);
        [a[0] - b[0], a[1] - b[1]]
    }

    /// `(kappa / eta) grad p . n`.
    pub fn flux(&self, x: [f64; 2], t: f64, n: [f64; 2]) -> f64 {
        let g = self.jets(x, t).p.g;
        self.params.mobility() * (g[0] * n[0] + g[1] * n[1])
    }

    /// Body force `-div(2 mu eps(u) - psi I)`.
    pub fn body_force(&self, x: [f64; 2], t: f64, sub: Subdomain) -> [f64; 2] {
        let j = self.jets(x, t);
        let Jets { ux, uy, p } = j;
        let lame = self.params.lame(sub);
        let grad_div = [ux.h[0][0] + uy.h[1][0], ux.h[0][1] + uy.h[1][1]];
        let lap = [ux.laplacian(), uy.laplacian()];
        let alpha = match sub {
            Subdomain::Poro => self.params.alpha,
            Subdomain::Elastic => 0.0,
        };
        std::array::from_fn(|i| {
            let grad_psi = alpha * p.g[i] - lame.lambda * grad_div[i];
            -lame.mu * (lap[i] + grad_div[i]) + grad_psi
        })
    }

    /// Fluid source of the pressure equation on the poroelastic subdomain.
    pub fn source(&self, x: [f64; 2], t: f64) -> f64 {
        let Jets { ux, uy, p } = self.jets(x, t);
        let diffusion = -self.params.mobility() * p.laplacian();
        if self.stationary {
            return diffusion;
        }
        let prm = &self.params;
        let lambda = prm.poro.lambda;
        let dt_p = p.g[2];
        let dt_div = ux.h[0][2] + uy.h[1][2];
        let dt_psi = prm.alpha * dt_p - lambda * dt_div;
        prm.storage() * dt_p - prm.alpha / lambda * dt_psi + diffusion
    }
}
