pub mod adversary;
pub mod analytics;
pub mod bitcore;
pub mod error;
pub mod schemes;
pub mod sim;
