//! Hidden-layer nonlinearities.
//!
//! `Softplus { beta }` is `(1/β)·ln(1 + e^{βx})`; its derivative is the
//! logistic `σ_β(x) = 1/(1 + e^{−βx})` and its second derivative is
//! `β·σ_β(x)·(1 − σ_β(x))`. As β grows the softplus approaches the relu.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Softplus { beta: f64 },
}

impl Activation {
    pub fn softplus(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::Config(format!("softplus beta must be positive, got {beta}")));
        }
        Ok(Activation::Softplus { beta })
    }

    pub fn is_smooth(&self) -> bool {
        matches!(self, Activation::Softplus { .. })
    }

    pub fn beta(&self) -> Option<f64> {
        match self {
            Activation::Relu => None,
            Activation::Softplus { beta } => Some(*beta),
        }
    }

    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => z.max(0.0),
            Activation::Softplus { beta } => softplus(z, beta),
        }
    }

    /// First derivative. The relu derivative at exactly zero is 0.
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus { beta } => sigmoid(z, beta),
        }
    }

    pub fn second_derivative(&self, z: f64) -> f64 {
        match *self {
            Activation::Relu => 0.0,
            Activation::Softplus { beta } => sigmoid_prime(z, beta),
        }
    }
}

/// `(1/β)·ln(1 + e^{βx})` without overflow for large `βx`.
pub fn softplus(x: f64, beta: f64) -> f64 {
    let bx = beta * x;
    if bx > 30.0 {
        x + (-bx).exp().ln_1p() / beta
    } else {
        bx.exp().ln_1p() / beta
    }
}

/// Logistic `σ_β(x) = 1/(1 + e^{−βx})`.
pub fn sigmoid(x: f64, beta: f64) -> f64 {
    let bx = beta * x;
    if bx >= 0.0 {
        1.0 / (1.0 + (-bx).exp())
    } else {
        let e = bx.exp();
        e / (1.0 + e)
    }
}

/// `d/dx σ_β(x) = β·σ_β(x)·(1 − σ_β(x))`.
pub fn sigmoid_prime(x: f64, beta: f64) -> f64 {
    let s = sigmoid(x, beta);
    beta * s * (1.0 - s)
}
