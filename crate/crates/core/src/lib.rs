//! Finite-element library for incompressible flow through rigid porous
//! media with a pressure-dependent drag coefficient.
//!
//! The discretization is a stabilized mixed formulation with equal-order
//! continuous interpolation for velocity and pressure on Q4/T3 meshes; the
//! nonlinear system is solved by a consistent Newton-Raphson procedure with
//! a direct sparse solver. Built-in verification: 1D closed-form solutions,
//! a 2D manufactured solution with h-convergence studies, the quarter
//! five-spot benchmark and a gravity-driven reservoir case.

pub mod assembly;
pub mod cases;
pub mod drag;
pub mod error;
pub mod mesh;
pub mod ref_elem;
pub mod solver;
pub mod verification;

pub use drag::{DragModel, DragVariant};
pub use error::{Error, Result};
pub use mesh::{BoundaryFacet, Element, ElemKind, Mesh, Node, Rect};
pub use solver::{NewtonConfig, SolutionField};
