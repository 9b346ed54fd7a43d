pub mod charfun;
pub mod levy;
pub mod mcengine;
pub mod pricing;
pub mod replication;
pub mod specfun;
