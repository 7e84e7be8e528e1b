//! Translate BPMN 2.0 process diagrams into fully observable non-deterministic
//! PDDL, and check the result with a grounded AND-OR reachability solver.
//!
//! The pipeline is:
//!
//! 1. [`bpmn::parse_bpmn`] reads the XML into a [`bpmn::BpmnModel`].
//! 2. [`graph::build_graph`] validates the control flow and adds synthetic
//!    sequence flows for task/event message interactions.
//! 3. [`encode::emit_domain`] and [`encode::emit_problems`] produce the PDDL
//!    abstract syntax, rendered by [`pddl::render_domain`] /
//!    [`pddl::render_problem`].
//! 4. [`fond`] grounds the PDDL, explores its state space, solves it in strong
//!    or strong-cyclic mode and enumerates execution traces.

pub mod bpmn;
pub mod encode;
pub mod fond;
pub mod graph;
pub mod naming;
pub mod pddl;

pub use bpmn::{parse_bpmn, BpmnModel, ParseError};
pub use encode::{emit_domain, emit_problems, EncodeError, EncodeOptions, Translation};
pub use graph::{build_graph, validate_graph, GraphError, MessageStrategy, ProcessGraph};
