//! Holds the `acceptance` test target (`tests/acceptance.rs`). It lives in its
//! own package so that it runs after the unit and integration tests of the
//! other crates.
