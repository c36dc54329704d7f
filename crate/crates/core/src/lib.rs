pub mod cli;
pub mod entourage;
mod flow;
pub mod forest;
pub mod graph;
pub mod hall;
pub mod matcher;
pub mod wobble;
