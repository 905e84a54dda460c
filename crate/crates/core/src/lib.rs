//! Conjugate heat kernels, pointed entropies and a check catalog on
//! closed-form ancient Ricci flows.

pub mod error;
pub mod geometry;
pub mod entropy;
pub mod kernels;
pub mod pdesolver;
pub mod quad;
pub mod scenario;
pub mod tridiag;
pub mod verify;

pub use error::{Error, Result};
pub use geometry::{FlatTorus, GridSpec, Isometry, ModelFlow, Point, ReducedGrid};
pub use kernels::{KernelField, KernelMethod, KernelSlice};
pub use scenario::ScenarioConfig;

/// Library version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Maps `f` over `items`, in parallel when the `parallel` feature is on.
#[cfg(feature = "parallel")]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
pub(crate) fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}
