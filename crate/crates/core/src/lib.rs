pub mod legendre;
pub mod marks;
pub mod numerics;
pub mod scenarios;
pub mod simkit;
pub mod staffing;
pub mod stationary;
