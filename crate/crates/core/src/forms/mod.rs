//! Quadrature of the regional, full and complement fractional Dirichlet forms.

pub mod form;
pub mod kernel;

pub use form::{
    complement_form, full_form, lp_norm, regional_form, rho_norm_sq, FormMode, NonlocalForm,
};
pub use kernel::KernelTable;
