use std::cmp::Ordering;

use super::{abs_tol, OptError, Solution};

/// Orders two solutions by their host vectors (hosts listed in demand order,
/// compared by the topology's global host order).
pub fn lex_cmp(a: &Solution, b: &Solution) -> Ordering {
    a.allocation.iter().cmp(b.allocation.iter())
}

/// Picks the representative of a set of objective-equal optima: the one with
/// the lexicographically smallest host vector.
pub fn canonicalize(candidates: Vec<Solution>, tolerance: f64) -> Result<Solution, OptError> {
    let lo = candidates.iter().map(|s| s.objective).fold(f64::INFINITY, f64::min);
    let hi = candidates.iter().map(|s| s.objective).fold(f64::NEG_INFINITY, f64::max);
    if candidates.is_empty() {
        return Err(OptError::Empty);
    }
    if hi - lo > abs_tol(tolerance, lo) {
        return Err(OptError::NotATie { difference: hi - lo });
    }
    Ok(candidates.into_iter().min_by(lex_cmp).expect("non-empty"))
}
