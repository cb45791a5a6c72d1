//! Reweighted sparse-system assembly, the Jacobi-preconditioned CG solver
//! and the IRLS outer loop.

mod context;
mod irls;
mod pcg;
mod system;

pub use context::{half_window, GuidedContext, Offset, Scales};
pub use irls::{irls_filter, irls_filter_channel, irls_step, IrlsTrace};
pub use pcg::{pcg_solve, PcgOutcome};
pub use system::{assemble_system, assemble_with, energy_with, SparseSystem};

pub(crate) use context::neighbor;
