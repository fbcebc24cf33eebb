//! Symmetric quadrature on triangles.

/// Six-point rule exact for polynomials of total degree 4, given as
/// barycentric coordinates and weights normalized to sum to one.
pub const DEGREE4: [([f64; 3], f64); 6] = {
    const A: f64 = 0.445_948_490_915_964_886_32;
    const B: f64 = 0.108_103_018_168_070_227_36;
    const C: f64 = 0.091_576_213_509_770_743_46;
    const D: f64 = 0.816_847_572_980_458_513_08;
    const WA: f64 = 0.223_381_589_678_011_465_70;
    const WC: f64 = 0.109_951_743_655_321_867_64;
    [
        ([B, A, A], WA),
        ([A, B, A], WA),
        ([A, A, B], WA),
        ([D, C, C], WC),
        ([C, D, C], WC),
        ([C, C, D], WC),
    ]
};
