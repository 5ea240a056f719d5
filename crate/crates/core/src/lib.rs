//! Reduced-order modeling and control workbench.
//!
//! Linear (DMDc, LAROM) and nonlinear (DeepROM) autoencoding reduced-order
//! models, a Lyapunov-constrained latent controller (DeepROC) with an LQR
//! baseline, and the Newell–Whitehead–Segel reaction–diffusion testbed
//! they are evaluated on.

pub mod linalg;
pub mod autodiff;
pub mod io;
pub mod pde;
pub mod linear_rom;
pub mod deeprom;
pub mod control;
