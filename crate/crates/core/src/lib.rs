pub mod config;
pub mod cost;
pub mod linear;
pub mod model;
pub mod opt;
pub mod par;
pub mod schedule;
pub mod sets;
pub mod ocp;
pub mod cases;
pub mod nominal;
pub mod filter;
pub mod sim;
