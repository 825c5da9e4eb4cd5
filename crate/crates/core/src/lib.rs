//! Trace-driven static-stress simulator for BTI aging studies.
//!
//! A trace of retired operations drives an execution-unit model, rotating
//! register files and a swap-shift cache hierarchy. Every tracked storage
//! cell records how long it sat at each logic value; cells written at most
//! once are reported as statically stressed.

pub mod cache;
pub mod exec;
pub mod netsim;
pub mod prbs;
pub mod regfile;
pub mod sim;
pub mod stress;
pub mod trace;

/// Cache line size in bytes, shared by every level.
pub const LINE_BYTES: u64 = 64;

/// SplitMix64 finalizer; used for deterministic operand patterns.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
