//! Multiparameter Bernoulli factories with exact rational oracles.

pub mod bounds;
pub mod coin;
pub mod combinators;
pub mod domain;
pub mod error;
pub mod faces;
pub mod harness;
pub mod linalg;
pub mod lattice;
pub mod lp;
pub mod polytope;
pub mod program;
pub mod rational;
pub mod sampford;
pub mod target;

pub use coin::{CoinBank, CoinSource, FlipBudget, Interrupt, KnownCoin};
pub use domain::AffineCubeDomain;
pub use error::{FactoryError, Result};
pub use faces::{BoundCertificate, FacePartition};
pub use lattice::{LatticeGeometry, LevelOracle, LevelSchedule};
pub use program::{Draw, FactoryProgram, FiniteTree, Outcome};
pub use target::TargetFunction;
