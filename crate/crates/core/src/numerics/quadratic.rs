use num_complex::Complex64;

/// Roots of `λ² + aλ + b = 0` via the cancellation-free form: the root of
/// larger magnitude comes from `q = -(a + sgn·√(a²-4b))/2`, the other from `b/q`.
pub fn monic_roots(a: Complex64, b: Complex64) -> (Complex64, Complex64) {
    let disc = (a * a - 4.0 * b).sqrt();
    // Choose the sign that avoids cancellation between a and the square root.
    let sum = if (a.conj() * disc).re >= 0.0 { a + disc } else { a - disc };
    if sum == Complex64::new(0.0, 0.0) {
        return (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
    }
    let q = -0.5 * sum;
    (q, b / q)
}
