pub mod channel;
pub mod metrics;
pub mod pdu;
pub mod sim;
pub mod stack;
