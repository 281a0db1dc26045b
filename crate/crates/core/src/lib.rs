pub mod corpus;
pub mod error;
pub mod evalharness;
pub mod feedbackprops;
pub mod nrpsolver;
pub mod priority;
pub mod requiresminer;
pub mod textkit;
pub mod topicmodel;

pub use error::{Error, ErrorClass, Result};
