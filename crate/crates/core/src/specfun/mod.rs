//! Special functions, adaptive quadrature and the i/j integral family.

mod gamma;
mod hyper;
mod integrals;
mod quad;

pub use gamma::{digamma, ln_gamma, ln_gamma_signed, EULER_GAMMA};
pub(crate) use gamma::cot_pi;
pub use hyper::{gauss_2f1_neg1, gauss_2f1_neg1_with, hyper_4f3_unit, hyper_4f3_unit_with, SeriesOptions};
pub use integrals::{
    i_integral, j_integral, relative_disagreement, IKind, IntegralFamilyParams, JKind, Method,
};
pub(crate) use integrals::{pow1p_m1, sym_second_diff};
pub use quad::{quad_improper, quad_segments, Endpoint, Endpoints, QuadOptions, QuadratureResult};
