//! Numerical primitives behind the closed forms: the exponential integral,
//! the real Lambert W branches, semi-infinite adaptive quadrature and
//! bracketed root finding.

mod expint;
mod lambert;
mod quad;
mod roots;

pub use expint::{exp_integral_e1, exp_integral_e1_scaled};
pub(crate) use expint::exp_e1;
pub use lambert::{lambert_w, lambert_w_of_neg_exp, Branch};
pub use quad::{integrate, integrate_semi_infinite, integrate_semi_infinite_scaled, QuadratureSpec};
pub use roots::{brent, expand_bracket_geometric, Root, RootTolerance};
