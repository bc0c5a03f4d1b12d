//! Constrained critical points of the Schrödinger–Bopp–Podolsky energy
//!
//! `I_ε(u) = ½∫|∇u|² + ½∫V(εx)u² + ∫F(u)` on `{ ∫φ_u u² = c }`, where
//! `φ_u = K * u²` with `K(r) = (1 − e^{−r})/r`. Critical points solve
//! `−Δu + V(εx)u + λφ_u u + f(u) = 0` with a negative multiplier `λ`.

pub mod concentration;
pub mod energy;
pub mod error;
mod fft;
pub mod fields;
pub mod morse;
pub mod optimizer;
pub mod potential;

pub use error::{Error, Result};
