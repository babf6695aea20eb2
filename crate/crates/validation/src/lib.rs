//! Holds the `acceptance` test target. It sits in its own package, whose name
//! sorts after every other workspace member, so a failing criterion cannot
//! stop `cargo test --workspace` before the remaining suites have run.
