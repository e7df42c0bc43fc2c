/// Splits a batch of `b` rows between new-class samples and replayed rows in
/// proportion to the number of new (`n_new`) and old (`n_old`) classes.
///
/// `N_new = round(b * n_new / (n_new + n_old))` rounded half away from zero
/// and at least one; `N_old = b - N_new`, so the batch size is exact.
///
/// Panics if `b == 0` or `n_new == 0`.
pub fn compose_batch(b: usize, n_new: usize, n_old: usize) -> (usize, usize) {
    assert!(b >= 1, "batch size must be >= 1");
    assert!(n_new >= 1, "a task has at least one new class");
    let total = (n_new + n_old) as u128;
    // floor(x + 1/2) for x = b * n_new / total, in exact integer arithmetic
    let scaled = 2 * b as u128 * n_new as u128 + total;
    let n_new_rows = ((scaled / (2 * total)) as usize).max(1);
    (n_new_rows, b - n_new_rows)
}
