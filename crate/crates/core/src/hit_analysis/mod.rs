//! Hitting probabilities of the solution, the exponents of the Hausdorff
//! and capacity bounds, and the polarity of points.

mod exponents;
mod hitting;
mod sandwich;

pub use exponents::{
    critical_dimension, default_rho, exponent_report, gaussian_order, lower_bound_capacity_order,
    polarity_classify, upper_bound_order, within_c1, BoundCase, ExponentReport, Polarity, Variant,
};
pub use hitting::{mc_hitting_probability, scan_paths, HitEstimate, PathScan, SpaceTimeWindow};
pub use sandwich::{sandwich_report, write_sandwich_csv, SandwichOptions, SandwichReport, SandwichRow};
