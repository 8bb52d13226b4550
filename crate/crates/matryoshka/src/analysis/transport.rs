//! Exact solver for the balanced transportation problem.
//!
//! Standard transportation simplex (network simplex on the bipartite supply/
//! demand graph): northwest-corner initial basis, u/v duals from the basis
//! tree, most-negative-reduced-cost entering rule, leaving variable from the
//! unique basis cycle. No structure of the cost matrix is assumed, which
//! keeps this an independent oracle for the 1D closed form.

use crate::{Error, Result};

/// Minimal total cost of transporting `supply` onto `demand` under the given
/// per-pair cost. Both marginals must have equal total mass (the normalized
/// histogram case).
pub fn min_cost_transport<C: Fn(usize, usize) -> f64>(
    supply: &[f64],
    demand: &[f64],
    cost: C,
) -> Result<f64> {
    let n = supply.len();
    let m = demand.len();
    if n == 0 || m == 0 {
        return Err(Error::InvalidArgument("empty marginals".into()));
    }
    let total_s: f64 = supply.iter().sum();
    let total_d: f64 = demand.iter().sum();
    if (total_s - total_d).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "unbalanced transport: supply {total_s} vs demand {total_d}"
        )));
    }

    // Northwest-corner initial basic feasible solution: exactly n + m - 1
    // basic cells, possibly degenerate (zero-flow).
    let mut basis: Vec<(usize, usize, f64)> = Vec::with_capacity(n + m - 1);
    let mut ra = supply.to_vec();
    let mut rb = demand.to_vec();
    let (mut i, mut j) = (0usize, 0usize);
    loop {
        let q = ra[i].min(rb[j]);
        basis.push((i, j, q));
        ra[i] -= q;
        rb[j] -= q;
        if i == n - 1 && j == m - 1 {
            break;
        }
        if j == m - 1 || (ra[i] <= rb[j] && i < n - 1) {
            i += 1;
        } else {
            j += 1;
        }
    }
    debug_assert_eq!(basis.len(), n + m - 1);

    let max_pivots = 200 * (n + m) + 20_000;
    for _ in 0..max_pivots {
        // Duals u, v with u[0] = 0, from u[i] + v[j] = c[i][j] on the basis
        // tree (nodes: rows 0..n, cols n..n+m).
        let mut u = vec![f64::NAN; n];
        let mut v = vec![f64::NAN; m];
        let mut row_adj: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut col_adj: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (e, &(bi, bj, _)) in basis.iter().enumerate() {
            row_adj[bi].push(e);
            col_adj[bj].push(e);
        }
        u[0] = 0.0;
        let mut stack = vec![(0usize, true)]; // (node index, is_row)
        while let Some((node, is_row)) = stack.pop() {
            let edges = if is_row {
                &row_adj[node]
            } else {
                &col_adj[node]
            };
            for &e in edges {
                let (bi, bj, _) = basis[e];
                if is_row {
                    if v[bj].is_nan() {
                        v[bj] = cost(bi, bj) - u[bi];
                        stack.push((bj, false));
                    }
                } else if u[bi].is_nan() {
                    u[bi] = cost(bi, bj) - v[bj];
                    stack.push((bi, true));
                }
            }
        }
        if u.iter().any(|x| x.is_nan()) || v.iter().any(|x| x.is_nan()) {
            return Err(Error::NumericalFailure(
                "transportation basis is not a spanning tree".into(),
            ));
        }

        // Entering cell: most negative reduced cost.
        let mut best = (-1e-12, usize::MAX, usize::MAX);
        for r in 0..n {
            for c_ in 0..m {
                let rc = cost(r, c_) - u[r] - v[c_];
                if rc < best.0 {
                    best = (rc, r, c_);
                }
            }
        }
        if best.1 == usize::MAX {
            break; // optimal
        }
        let (ei, ej) = (best.1, best.2);

        // Unique cycle: path from row `ei` to col `ej` inside the basis
        // tree, closed by the entering cell. BFS over tree nodes.
        let path = tree_path(n, m, &basis, ei, ej).ok_or_else(|| {
            Error::NumericalFailure("no cycle found in transportation basis".into())
        })?;
        // Entering cell gains flow; path edges alternate -, +, -, ...
        // starting from the edge leaving row `ei`.
        let mut theta = f64::INFINITY;
        let mut leave = usize::MAX;
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                let flow = basis[e].2;
                if flow < theta {
                    theta = flow;
                    leave = e;
                }
            }
        }
        for (pos, &e) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis[e].2 -= theta;
            } else {
                basis[e].2 += theta;
            }
        }
        basis[leave] = (ei, ej, theta);
    }

    let mut value = 0.0;
    for &(bi, bj, x) in &basis {
        value += x * cost(bi, bj);
    }
    Ok(value)
}

/// Path of basis-edge indices from row node `from_row` to col node `to_col`
/// through the basis spanning tree.
fn tree_path(
    n: usize,
    m: usize,
    basis: &[(usize, usize, f64)],
    from_row: usize,
    to_col: usize,
) -> Option<Vec<usize>> {
    // Node ids: 0..n rows, n..n+m cols.
    let total = n + m;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); total]; // (neighbor, edge)
    for (e, &(bi, bj, _)) in basis.iter().enumerate() {
        adj[bi].push((n + bj, e));
        adj[n + bj].push((bi, e));
    }
    let start = from_row;
    let goal = n + to_col;
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; total]; // (prev node, edge)
    let mut visited = vec![false; total];
    visited[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == goal {
            let mut path = Vec::new();
            let mut cur = goal;
            while cur != start {
                let (prev, e) = parent[cur]?;
                path.push(e);
                cur = prev;
            }
            path.reverse();
            return Some(path);
        }
        for &(next, e) in &adj[node] {
            if !visited[next] {
                visited[next] = true;
                parent[next] = Some((node, e));
                queue.push_back(next);
            }
        }
    }
    None
}
