//! Finite-stage circular symbolic systems and untwisted AbC approximants on the 2-torus.
//!
//! - [`params`]: exact parameter recursion and `j_i` tables.
//! - [`symbolic`]: words, the circular operator, readability and uniformity checks.
//! - [`transect`]: rotation itineraries read off as symbolic names.
//! - [`abc`]: grid permutations from word tuples, towers, names, Requirements 1-3.
//! - [`blockslide`]: exact slide maps and the permutation gadgets.
//! - [`analytic`]: trigonometric approximants, analytic shears and strip distances.
//! - [`tabulated`]: table-driven evaluation for Monte Carlo statistics and plots.

pub mod abc;
pub mod analytic;
pub mod blockslide;
pub mod par;
pub mod params;
pub mod symbolic;
pub mod tabulated;
pub mod transect;
