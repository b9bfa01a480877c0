mod binio;
pub mod corpus;
pub mod dsp;
pub mod numcore;
pub mod captioner;
pub mod metrics;
pub mod trainer;
pub mod cli;
