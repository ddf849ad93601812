//! Twist-sign and composition-order conventions for the homology action.
//!
//! Neither choice is fixed by the drawings the curve system comes from. The
//! pair below was calibrated against the known torsion orders of five
//! mapping tori (13, 5, 15, 5 and 2 x 10); every one of the four sign/order
//! combinations reproduces them, so the pinned pair is a convention, not a
//! claim about how the words compose as diffeomorphisms.

/// Order in which the letters of a word act on homology.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum Composition {
    /// The first letter is applied first: `phi_* = T_k ... T_1`.
    LeftmostFirst,
    /// The last letter is applied first: `phi_* = T_1 ... T_k`.
    RightmostFirst,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct TwistConvention {
    /// Multiplier in the transvection `x -> x + sign * <c, x> c` of a positive twist.
    pub sign: i64,
    pub composition: Composition,
}

/// With `sign = 1` the positive twist along `c_1 = x_1` sends `y_1` to `y_1 + x_1`.
pub const TWIST_CONVENTION: TwistConvention =
    TwistConvention { sign: 1, composition: Composition::LeftmostFirst };
