//! Contact Hamilton-Jacobi equations on the circle: contact flows, Lax-Oleinik
//! semigroups, weak KAM solutions, Mather measures and stability criteria.

pub mod error;
pub mod experiments;
pub mod flow;
pub mod grid;
pub mod hamiltonians;
pub mod mather;
pub mod scalar;
pub mod semigroup;
pub mod weakkam;

pub use error::{Error, Result};
pub use scalar::Real;

pub type ContactState64 = flow::ContactState<f64>;
pub type OrbitSample64 = flow::OrbitSample<f64>;
pub type GridFunction64 = grid::GridFunction<f64>;
pub type TrigPoly64 = hamiltonians::TrigPoly<f64>;
pub type Model64 = hamiltonians::Model<f64>;
pub type StepScheme64 = semigroup::StepScheme<f64>;
pub type GraphSample64 = weakkam::GraphSample<f64>;
pub type StationaryResult64 = weakkam::StationaryResult<f64>;
pub type OccupationMeasure64 = mather::OccupationMeasure<f64>;
