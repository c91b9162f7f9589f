//! Holds the workspace acceptance suite in `tests/acceptance.rs`. It lives
//! in its own package so it runs after the per-crate suites.
