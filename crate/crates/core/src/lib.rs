//! Construction, certification and spectral analysis of traveling pulses in a
//! generalized Keller–Segel chemotaxis model with small cell diffusion ε:
//!
//! ```text
//! u_t  = (ε u_x − χ u φ(v_x))_x
//! ε v_t = v_xx + u − g(v)
//! ```

pub mod driver;
pub mod error;
pub mod model;
pub mod numerics;
pub mod orbit;
pub mod pde;
pub mod phase_plane;
pub mod resolvent;
pub mod spectrum;
pub mod speed_window;
pub mod trap;

pub use error::{Error, Result};
pub use model::{build_model, Branch, ModelFamily, ModelSpec, WaveParams};
