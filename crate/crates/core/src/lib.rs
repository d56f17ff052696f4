pub mod autodiff;
pub mod loss;
pub mod metrics;
pub mod model;
pub mod network;
pub mod optimize;
pub mod problems;
pub mod rng;
pub mod sum;
