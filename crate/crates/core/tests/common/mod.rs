//! Generators shared by the integration and acceptance tests.
#![allow(dead_code)]

pub mod golden;
pub mod instances;
