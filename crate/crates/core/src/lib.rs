//! Sublinear Markovian convolution semigroups on the torus.
//!
//! A finite family of Levy generators `A_lambda` defines the one-step envelope
//! `J_t f = sup_lambda S_lambda(t) f`. Composing envelopes along refining time
//! partitions increases monotonically towards the nonlinear semigroup
//! `S(t) f`, which solves `u_t = sup_lambda A_lambda u`. The crate computes
//! that limit ([`nisio`]), checks it against independent references
//! ([`oracles`]) and against a Monte Carlo sup over piecewise-constant feedback
//! controls ([`mc`]).

pub mod error;
pub mod exec;
pub mod grid;
pub mod levy;
pub mod mc;
pub mod nisio;
pub mod oracles;
pub mod shipped;
pub mod table;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{GridFunction, InitialFunction, Spectrum, TorusGrid, TorusPoint};
pub use levy::{GeneratorFamily, LevyQuadruple, SymbolScheme, SymbolTable};
pub use nisio::{NisioOptions, NisioResult, Partition};
