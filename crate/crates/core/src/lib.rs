//! Pushdown control-flow analysis for an S-expression, Dalvik-style
//! object-oriented bytecode, with precise exception flows, entry-point
//! saturation, taint tracking and least-permission inference.
//!
//! The crate is `no_std` (it needs `alloc`). The `std` feature adds the
//! wall-clock analysis budget.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod concrete;
pub mod eps;
pub mod glob;
pub mod ir;
pub mod machine;
pub mod permissions;
pub mod reach;
pub mod report;
pub mod taint;
