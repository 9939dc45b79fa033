pub mod channel;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod geo;
pub mod ml;
pub mod raytracer;
pub mod rng;
pub mod scene;
