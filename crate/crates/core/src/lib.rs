pub mod estimation;
pub mod gst_design;
pub mod metrics;
pub mod noise;
pub mod optim;
pub mod pauli_algebra;
pub mod pfr;
