pub mod airl;
pub mod eval;
pub mod expert;
pub mod meta;
pub mod numerics;
pub mod persist;
pub mod seeds;
pub mod sim;
