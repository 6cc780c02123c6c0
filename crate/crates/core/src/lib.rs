//! Difference matrices over `Z_g` as returns of a lattice random walk.
//!
//! A `(g, k; λ)`-difference matrix is a `k × λg` matrix over `Z_g` in which every
//! pair of rows realizes each difference exactly `λ` times. Embedding each column
//! as a centered indicator vector turns such matrices into returns to the origin
//! of a random walk on `Z^d`, so that
//!
//! ```text
//! #matrices = g^{kt} · P(X_t = 0),   t = λg,   d = C(k,2)(g-1).
//! ```
//!
//! The crate provides exact counting (brute force and DFT inversion), Monte Carlo
//! estimation, the characteristic function and its moment structure, the lattice
//! of unit-modulus frequencies, the asymptotic formula with rigorous two-sided
//! bounds, and numerical checks of the analytic estimates behind them.

pub mod bounds;
pub mod budget;
pub mod charfn;
pub mod error;
pub mod exact;
pub mod lattice;
pub mod params;
pub mod quad;
pub mod sum;
pub mod verify;
pub mod walk;

pub use budget::Budget;
pub use error::{Error, Result};
pub use params::{make_params, Pair, Params};
