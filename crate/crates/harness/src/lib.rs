pub mod config;
pub mod experiment;
pub mod report;
pub mod svg;
