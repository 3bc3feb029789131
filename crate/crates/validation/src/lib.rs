//! Holds the `acceptance` test target, which checks the simulator
//! end to end against its target figures. Run with
//! `cargo test -p cqkd-validation --test acceptance`.
