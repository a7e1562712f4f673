pub mod solver;
pub mod model;
pub mod metrics;
pub mod sweep;
pub mod io;
