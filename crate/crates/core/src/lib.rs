//! Certified two-sided bounds for the limiting coexact 1-form spectral gap
//! of families of hyperbolic rational homology spheres built from
//! reverse-palindromic mapping classes.
//!
//! The crate is organised bottom-up:
//!
//! * [`words`]: signed words in the chain Dehn-twist generators.
//! * [`homology`]: exact action on `H_1`, torsion, unit-circle screen.
//! * [`spectra`]: complex-length spectrum datasets and their expansion into
//!   trace-formula terms.
//! * [`tracekit`]: test functions with closed-form Fourier pairs, both sides
//!   of the twisted trace formula, and the exactly solvable circle model.
//! * [`certify`]: the `J` majorant, sweeps, gap and existence certificates.
//! * [`selftest`]: the built-in consistency suite used by the CLI.

pub mod certify;
pub mod homology;
pub mod selftest;
pub mod spectra;
pub mod tracekit;
pub mod words;
