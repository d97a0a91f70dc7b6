pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod dataset;
pub mod play;
pub mod reports;
pub mod teleop;
