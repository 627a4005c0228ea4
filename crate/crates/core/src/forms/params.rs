use serde::{Deserialize, Serialize};

use crate::error::{Result, VemError};
use crate::mesh::Subdomain;

/// Lamé pair of one subdomain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lame {
    pub mu: f64,
    pub lambda: f64,
}

impl Lame {
    /// From Young's modulus and Poisson ratio.
    pub fn from_young_poisson(young: f64, nu: f64) -> Result<Self> {
        if !(young > 0.0) || !(nu > -1.0 && nu < 0.5) {
            return Err(VemError::InvalidArgument(format!(
                "need E > 0 and -1 < nu < 1/2 (got E = {young}, nu = {nu})"
            )));
        }
        Ok(Self {
            mu: young / (2.0 + 2.0 * nu),
            lambda: young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu)),
        })
    }
}

/// Physical coefficients of the coupled problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaterialParams {
    pub poro: Lame,
    pub elastic: Lame,
    /// Permeability.
    pub kappa: f64,
    /// Fluid viscosity.
    pub eta: f64,
    /// Biot-Willis coefficient.
    pub alpha: f64,
    /// Storativity.
    pub c0: f64,
}

impl MaterialParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| {
            Err(VemError::InvalidArgument(format!("material parameter {what} = {v}")))
        };
        for (name, l) in [("poro", self.poro), ("elastic", self.elastic)] {
            if !(l.mu > 0.0 && l.mu.is_finite()) {
                return bad(&format!("mu ({name})"), l.mu);
            }
            if !(l.lambda > 0.0 && l.lambda.is_finite()) {
                return bad(&format!("lambda ({name})"), l.lambda);
            }
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return bad("kappa", self.kappa);
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta", self.eta);
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha", self.alpha);
        }
        if !(self.c0 >= 0.0 && self.c0.is_finite()) {
            return bad("c0", self.c0);
        }
        Ok(())
    }

    pub fn lame(&self, sub: Subdomain) -> Lame {
        match sub {
            Subdomain::Poro => self.poro,
            Subdomain::Elastic => self.elastic,
        }
    }

    /// `c0 + alpha^2 / lambda^P`, the weight of the pressure mass form.
    pub fn storage(&self) -> f64 {
        self.c0 + self.alpha * self.alpha / self.poro.lambda
    }

    /// `kappa / eta`.
    pub fn mobility(&self) -> f64 {
        self.kappa / self.eta
    }
}
