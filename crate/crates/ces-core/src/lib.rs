//! Compiler Enhanced Scheduling (CES) toolkit for asymmetric multicore
//! processors.
//!
//! The crate analyzes a small C-with-pragmas input language, estimates
//! per-core workloads with a linear cost model, rewrites OpenMP-style
//! work-sharing constructs into hardware-aware worklist / section-dispatch /
//! thread-switching code, and quantifies the benefit over an HMP-style
//! baseline in a deterministic big.LITTLE simulator.
//!
//! Pipeline, end to end:
//!
//! ```text
//! source (.comp.c)
//!     │  frontend: lex / parse / validate / inline / segment
//!     ▼
//! Ast + parallel segments
//!     │  workload: operation counts + per-core-type time estimates
//!     ▼
//! SchedulePlan (divisions, chunks, section maps, migration pairs)
//!     │  transform: worklist / section-for / thread-switch rewrites
//!     ▼
//! transformed source (.ces.c)        sim: HMP vs CES reports
//! ```
//!
//! The `runtime` module is the executable worklist-stealing protocol; it runs
//! both under real host threads and as a callback library inside the
//! simulator's single-threaded event loop.

pub mod corpus;
pub mod frontend;
pub mod machine;
pub mod plan;
pub mod runtime;
pub mod scheduler;
pub mod sim;
pub mod transform;
pub mod workload;

pub use frontend::{parse, SourceProgram};
pub use machine::MachineConfig;
pub use plan::analyze_program;
