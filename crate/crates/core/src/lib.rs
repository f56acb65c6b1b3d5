//! Power-flow geometry and convexified optimal power flow on radial networks.

pub mod conic;
pub mod flowspace;
pub mod geometry;
pub mod network;
pub mod opf;
pub mod oracle;
