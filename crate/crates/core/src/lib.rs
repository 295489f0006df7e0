//! Most probable transition paths between coexisting attractors of a
//! two-dimensional stochastic carbon-cycle model.

pub mod action;
pub mod dual;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod model;
pub mod nn;
pub mod pinn;
pub mod rng;
pub mod scalar;
pub mod sde;
pub mod shooting;
pub mod toys;

pub use error::{Error, Result};
pub use model::{CarbonParams, CarbonSystem, State, System};
pub use scalar::Real;

pub type State64 = model::State<f64>;
pub type State32 = model::State<f32>;
pub type Path64 = dynamics::Path<f64>;
pub type Path32 = dynamics::Path<f32>;
pub type Dual64 = dual::Dual<f64>;
pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
