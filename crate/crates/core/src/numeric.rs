//! Small numeric helpers shared across modules.

/// Correctly rounded sum of `values`, independent of their order.
///
/// Shewchuk's running non-overlapping partials: every partial is exact, so
/// the final rounding sees the true sum. Non-finite inputs fall back to the
/// IEEE result of a naive sum.
pub fn exact_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut partials: Vec<f64> = Vec::new();
    let mut special = 0.0;
    for mut x in values {
        if !x.is_finite() {
            special += x;
            continue;
        }
        let mut i = 0;
        for j in 0..partials.len() {
            let mut y = partials[j];
            if x.abs() < y.abs() {
                std::mem::swap(&mut x, &mut y);
            }
            let hi = x + y;
            let lo = y - (hi - x);
            if lo != 0.0 {
                partials[i] = lo;
                i += 1;
            }
            x = hi;
        }
        if !x.is_finite() {
            // Overflow of an intermediate sum.
            special += x;
            partials.clear();
            continue;
        }
        partials.truncate(i);
        partials.push(x);
    }
    if special != 0.0 || special.is_nan() {
        return special;
    }
    round_partials(&partials)
}

fn round_partials(partials: &[f64]) -> f64 {
    let Some((&top, rest)) = partials.split_last() else {
        return 0.0;
    };
    let mut hi = top;
    let mut lo = 0.0;
    let mut idx = rest.len();
    while idx > 0 {
        idx -= 1;
        let x = hi;
        let y = rest[idx];
        hi = x + y;
        let yr = hi - x;
        lo = y - yr;
        if lo != 0.0 {
            break;
        }
    }
    // Half-way case: nudge when the remaining partials push past the tie.
    if idx > 0 && ((lo < 0.0 && rest[idx - 1] < 0.0) || (lo > 0.0 && rest[idx - 1] > 0.0)) {
        let y = lo * 2.0;
        let x = hi + y;
        if y == x - hi {
            hi = x;
        }
    }
    hi
}
