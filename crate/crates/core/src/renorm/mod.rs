//! Multi-scale renormalization: scale ladders, the induction arithmetic and
//! the deterministic path constructions on renormalized lattices.

pub mod ladder;
pub mod path;

pub use ladder::{
    kappa_bracket, min_l0_for_condition_b, select_top_scale, sprinkle_ladder, verify_recursion_bound, FpForm, FsForm,
    LadderParams, RecursionReport, RegularityProfile, ScaleLadder, SprinkleReport,
};
pub use path::{
    construct_short_path, descend_path, glue_level0, glue_level0_with, large_component, short_path_window, Certificate,
    HStatus, LatticePath, Ratio, ShortPath,
};
