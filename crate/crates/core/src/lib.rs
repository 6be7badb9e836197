pub mod assembly;
pub mod engine;
pub mod generation;
pub mod plan;
pub mod review;
pub mod script;
pub mod sync;
pub mod units;
pub mod validation;
