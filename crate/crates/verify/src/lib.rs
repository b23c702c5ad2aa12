//! Holds the `acceptance` test target. Run it alone with
//! `cargo test -p aida-verify --test acceptance`.
