pub mod bench;
pub mod expr;
pub mod gp;
pub mod kernels;
pub mod mpc;
pub mod protocol;
pub mod ring;
pub mod sharing;
