#![allow(dead_code)]

pub mod review_model;
pub mod shift;
pub mod unit_exprs;
