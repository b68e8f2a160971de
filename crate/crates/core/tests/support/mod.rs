#![allow(dead_code)]

pub mod gradient_suite;
pub mod match_oracle;
