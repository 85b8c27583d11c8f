pub mod bench;
pub mod dataset;
pub mod evaluation;
pub mod feature_selection;
pub mod loan_data;
pub mod models;
pub mod resampling;
pub mod rng;
