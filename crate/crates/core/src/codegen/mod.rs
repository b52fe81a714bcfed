//! C code generation.
//!
//! [`plan_memory`] places every intermediate activation in one static arena,
//! [`emit`] instantiates a loop nest per node and writes the weights as
//! constant tables. The [`host`] helpers build the emitted sources together
//! with a bench or conformance harness using the host C compiler.

mod approx;
mod emit;
mod footprint;
mod harness;
pub mod host;
mod memory;

pub use approx::{sigmoid_approx, tanh_approx};
pub use emit::{emit, emit_graph, EmitOptions, EmittedProgram};
pub use footprint::{estimate_footprint, FootprintModel};
pub use harness::{instantiate_harness, template, HarnessKind, HarnessParams};
pub use host::HostCompiler;
pub use memory::{plan_memory, ArenaBuffer, MemoryPlan, Storage};
