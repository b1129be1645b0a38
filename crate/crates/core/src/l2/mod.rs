//! Programs with nested loops, analysed as strings of loop powers.

mod fpp;
mod power;

pub use fpp::{
    align_and_reduce, check_l2, fpp, related_sets, strip_outer_infinite, unfold, Fpp, FppSnapshot,
    FppStep, L2Analysis, Reduction, RelatedSet, SetAction, SetStep, StripOutcome, StripReport,
};
pub use power::{
    counts, flatten, normalize, render_power, render_string, size, to_power_string, to_statements, Body,
    Power, PowerString,
};
