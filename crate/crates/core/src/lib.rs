pub mod commit;
pub mod events;
pub mod harness;
pub mod mpc;
pub mod quantum;
pub mod rng;
pub mod sharing;
pub mod structures;
