//! Eulerian spectral sparsification and graphical spectral sketches.
//!
//! The crate is organised bottom-up: [`graph`] holds the directed-graph
//! carrier and Laplacian operators, [`dense`] is an `O(n^3)` reference
//! oracle used to certify results at small scale, [`solver`] applies
//! approximate Laplacian pseudoinverses, [`resistance`] and
//! [`decomposition`] build effective-resistance and expander
//! decompositions, [`projection`] implements the circulation projection
//! and tree rounding, and [`sparsify`] / [`sketch`] are the user-facing
//! algorithms. [`apps`] has an Eulerian solver and stationary
//! distributions built on top.

pub mod apps;
pub mod decomposition;
pub mod dense;
pub mod error;
pub mod graph;
pub mod projection;
pub mod report;
pub mod resistance;
pub mod rng;
pub mod sketch;
pub mod solver;
pub mod sparsify;

pub use error::{Error, Result};
pub use graph::{build_graph, DirectedGraph, SpanningTree, UndirectedGraph, WeightVector};
