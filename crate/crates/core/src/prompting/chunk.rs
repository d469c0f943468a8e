//! Greedy first-fit batching of context snippets under a token budget.

use std::ops::Range;

/// Splits items (given by their token estimates) into contiguous batches so
/// that `overhead + sum(batch) <= budget`. A new batch starts whenever the
/// next item would overflow the current one. Returns the offending item's
/// position when a single item cannot fit on its own.
pub fn pack_greedy(
    estimates: &[usize],
    budget: usize,
    overhead: usize,
) -> Result<Vec<Range<usize>>, usize> {
    let mut batches = Vec::new();
    let mut start = 0;
    let mut used = overhead;
    for (i, &est) in estimates.iter().enumerate() {
        if overhead.saturating_add(est) > budget {
            return Err(i);
        }
        if i > start && used.saturating_add(est) > budget {
            batches.push(start..i);
            start = i;
            used = overhead;
        }
        used += est;
    }
    if start < estimates.len() {
        batches.push(start..estimates.len());
    }
    Ok(batches)
}
