//! Hardware-aware circuit cutting and knitting.

pub mod bench;
pub mod circuit;
pub mod cost;
pub mod cutter;
pub mod knit;
pub mod plan;
pub mod qasm;
pub mod qpd;
pub mod router;
pub mod seed;
pub mod sim;
pub mod topo;

/// Scalar type of the simulator and the recombination engine.
pub trait Real: num_traits::Float + Send + Sync + std::fmt::Debug + 'static {}

impl<T: num_traits::Float + Send + Sync + std::fmt::Debug + 'static> Real for T {}

pub type State = sim::StateVector<f64>;
pub type Tensor = knit::ResultTensor<f64>;
pub type Outcome = sim::TermOutcome<f64>;
