pub mod algorithms;
pub mod building;
pub mod cosim;
pub mod env;
pub mod nn;
pub mod problem;
pub mod rng;
pub mod trainer;
