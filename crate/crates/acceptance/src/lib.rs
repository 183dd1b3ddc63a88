//! Acceptance runs for `elpower`, one pass/fail line per criterion.
//! Run with `cargo test -p elpower-validation --test acceptance`.
