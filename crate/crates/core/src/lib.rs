//! CAN-bus intrusion detection toolkit.

pub mod baselines;
pub mod canbus;
pub mod ingest;
pub mod nn;
pub mod plenet;
