//! Exact linear assignment by shortest augmenting paths with dual
//! potentials (Jonker–Volgenant style), O(n^3) on square cost matrices.

/// Solves `min_perm sum_i cost[i][perm[i]]` for a square row-major matrix.
/// Returns the optimal column for each row and the total cost.
pub fn solve(n: usize, cost: &[f64]) -> (Vec<usize>, f64) {
    assert_eq!(cost.len(), n * n);
    if n == 0 {
        return (Vec::new(), 0.0);
    }

    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n];
    let mut col4row = vec![usize::MAX; n];
    let mut row4col = vec![usize::MAX; n];

    let mut shortest = vec![0.0f64; n];
    let mut path = vec![0usize; n];
    let mut scanned_rows = vec![false; n];
    let mut scanned_cols = vec![false; n];
    let mut remaining = vec![0usize; n];

    for cur_row in 0..n {
        shortest.fill(f64::INFINITY);
        scanned_rows.fill(false);
        scanned_cols.fill(false);
        for (k, r) in remaining.iter_mut().enumerate() {
            *r = k;
        }
        let mut num_remaining = n;
        let mut min_val = 0.0f64;
        let mut sink = usize::MAX;
        let mut i = cur_row;

        while sink == usize::MAX {
            scanned_rows[i] = true;
            let mut lowest = f64::INFINITY;
            let mut index = usize::MAX;
            for it in 0..num_remaining {
                let j = remaining[it];
                let r = min_val + cost[i * n + j] - u[i] - v[j];
                if r < shortest[j] {
                    path[j] = i;
                    shortest[j] = r;
                }
                if shortest[j] < lowest
                    || (shortest[j] == lowest && row4col[j] == usize::MAX)
                {
                    lowest = shortest[j];
                    index = it;
                }
            }
            min_val = lowest;
            debug_assert!(min_val.is_finite(), "infeasible assignment instance");
            let j = remaining[index];
            if row4col[j] == usize::MAX {
                sink = j;
            } else {
                i = row4col[j];
            }
            scanned_cols[j] = true;
            num_remaining -= 1;
            remaining[index] = remaining[num_remaining];
        }

        // dual updates
        u[cur_row] += min_val;
        for r in 0..n {
            if scanned_rows[r] && r != cur_row {
                u[r] += min_val - shortest[col4row[r]];
            }
        }
        for j in 0..n {
            if scanned_cols[j] {
                v[j] -= min_val - shortest[j];
            }
        }

        // augment along the alternating path ending at the sink
        let mut j = sink;
        loop {
            let r = path[j];
            row4col[j] = r;
            std::mem::swap(&mut col4row[r], &mut j);
            if r == cur_row {
                break;
            }
        }
    }

    let total = (0..n).map(|i| cost[i * n + col4row[i]]).sum();
    (col4row, total)
}
