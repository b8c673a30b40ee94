//! Discrete-time leaky integrate-and-fire dynamics.
//!
//! The membrane update is
//!
//! ```text
//! u[k] = u[k-1] * alpha * (1 - theta[k-1]) + I[k]
//! theta[k] = 1 if u[k] >= u_th else 0
//! ```
//!
//! with `alpha = exp(-1/tau)`. The spike nonlinearity is replaced by a fast
//! sigmoid when gradients are needed.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 1.0;
pub const DEFAULT_BETA: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NeuronConfig {
    /// Firing threshold.
    pub u_th: f64,
    /// Membrane time constant at initialisation, in timesteps.
    pub tau_init: f64,
}

impl Default for NeuronConfig {
    fn default() -> Self {
        Self {
            u_th: DEFAULT_THRESHOLD,
            tau_init: 5.0,
        }
    }
}

impl NeuronConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.u_th > 0.0 && self.u_th.is_finite()) {
            return Err(Error::Config(format!(
                "threshold must be positive, got {}",
                self.u_th
            )));
        }
        if !(self.tau_init > 0.0 && self.tau_init.is_finite()) {
            return Err(Error::Config(format!(
                "tau_init must be positive, got {}",
                self.tau_init
            )));
        }
        Ok(())
    }

    /// Unconstrained decay parameter giving `alpha = exp(-1/tau_init)`.
    pub fn initial_decay_param(&self) -> f64 {
        decay_param_from_tau(self.tau_init)
    }
}

/// Whether the forward pass emits binary spikes or the smooth relaxation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpikeMode {
    /// Heaviside forward, surrogate derivative backward.
    #[default]
    Hard,
    /// Fast sigmoid in both directions, so gradients are exact.
    Soft,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub beta: f64,
    pub mode: SpikeMode,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            beta: DEFAULT_BETA,
            mode: SpikeMode::Hard,
        }
    }
}

impl SurrogateConfig {
    pub fn soft(beta: f64) -> Self {
        Self {
            beta,
            mode: SpikeMode::Soft,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "surrogate slope must be positive, got {}",
                self.beta
            )));
        }
        Ok(())
    }

    /// Spike value for a single membrane potential.
    #[inline]
    pub fn spike(&self, u: f64, u_th: f64) -> f64 {
        match self.mode {
            SpikeMode::Hard => {
                if u >= u_th {
                    1.0
                } else {
                    0.0
                }
            }
            SpikeMode::Soft => fast_sigmoid(u - u_th, self.beta),
        }
    }

    #[inline]
    pub fn grad(&self, u: f64, u_th: f64) -> f64 {
        surrogate_grad(u, u_th, self.beta)
    }
}

/// `0.5 * (1 + beta*x / (1 + beta*|x|))`, a sigmoid with range (0, 1).
#[inline]
pub fn fast_sigmoid(x: f64, beta: f64) -> f64 {
    let bx = beta * x;
    0.5 * (1.0 + bx / (1.0 + bx.abs()))
}

/// Derivative of [`fast_sigmoid`] evaluated at `u - u_th`.
#[inline]
pub fn surrogate_grad(u: f64, u_th: f64, beta: f64) -> f64 {
    let denom = 1.0 + beta * (u - u_th).abs();
    beta / (2.0 * denom * denom)
}

/// Logistic map from the trainable parameter to the decay factor.
#[inline]
pub fn decay_from_param(p: f64) -> f64 {
    1.0 / (1.0 + (-p).exp())
}

/// `d alpha / d p` for [`decay_from_param`].
#[inline]
pub fn decay_param_grad(p: f64) -> f64 {
    let a = decay_from_param(p);
    a * (1.0 - a)
}

pub fn decay_param_from_tau(tau: f64) -> f64 {
    let alpha = (-1.0 / tau).exp();
    (alpha / (1.0 - alpha)).ln()
}

pub fn tau_from_decay(alpha: f64) -> f64 {
    -1.0 / alpha.ln()
}

/// One membrane update for a vector of neurons.
pub fn lif_step(u_prev: &[f64], theta_prev: &[f64], input: &[f64], alpha: &[f64]) -> Result<Vec<f64>> {
    let n = u_prev.len();
    check_len("lif_step spikes", n, theta_prev.len())?;
    check_len("lif_step input", n, input.len())?;
    check_len("lif_step decay", n, alpha.len())?;
    Ok(u_prev
        .iter()
        .zip(theta_prev)
        .zip(input)
        .zip(alpha)
        .map(|(((&u, &th), &i), &a)| u * a * (1.0 - th) + i)
        .collect())
}

/// Spike generation for a vector of potentials.
pub fn threshold(u: &[f64], u_th: f64, surrogate: &SurrogateConfig) -> Vec<f64> {
    u.iter().map(|&v| surrogate.spike(v, u_th)).collect()
}
