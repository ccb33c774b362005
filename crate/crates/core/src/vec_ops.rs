//! Small dense-vector helpers shared by every model module.
//!
//! Everything operates on plain `&[f64]` slices; dimensions are the caller's
//! responsibility (public entry points validate them once at the boundary).

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

pub fn scaled(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

/// a += s * b
pub fn axpy(a: &mut [f64], s: f64, b: &[f64]) {
    debug_assert_eq!(a.len(), b.len());
    for (x, y) in a.iter_mut().zip(b) {
        *x += s * y;
    }
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn is_finite(a: &[f64]) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Angle between `w` and `u` in radians, computed from the parallel and
/// orthogonal components of `w` relative to `u`. This is the same value as
/// `acos(w·u / (|w||u|))` but stays well-conditioned near 0 and pi.
pub fn angle(w: &[f64], u: &[f64]) -> f64 {
    debug_assert_eq!(w.len(), u.len());
    let nu = norm(u);
    let par = dot(w, u) / nu;
    // Explicit residual vector instead of norm_sq(w) - par^2: the latter
    // cancels catastrophically for nearly parallel vectors.
    let perp = w
        .iter()
        .zip(u)
        .map(|(wi, ui)| {
            let r = wi - par * ui / nu;
            r * r
        })
        .sum::<f64>()
        .sqrt();
    perp.atan2(par)
}
