//! Internal numerical building blocks shared by the estimation modules.

pub(crate) mod hessian;
pub(crate) mod optim;
pub(crate) mod quad;
pub(crate) mod root;
pub(crate) mod special;
