//! Runs the guide's code listings as doc-tests so `book/` and the crate
//! cannot drift apart. `cargo test --doc` picks these up; mdbook renders the
//! same files.

#[cfg(doctest)]
mod chapters {
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            pub struct $name;
        };
    }

    chapter!(Introduction, "../../../book/src/introduction.md");
    chapter!(Modulation, "../../../book/src/modulation.md");
    chapter!(Backend, "../../../book/src/backend.md");
    chapter!(Circuit, "../../../book/src/circuit.md");
    chapter!(Metrics, "../../../book/src/metrics.md");
    chapter!(Scenarios, "../../../book/src/scenarios.md");
}
