//! Brute-force lattice development of an interval in 1+1 Minkowski space.

/// `D+` of `{0} x (a0, a1)` on a `(t, x)` lattice with `dt = dx`: a node is in
/// the development when its three past lattice neighbours are.
pub fn lattice_development(xs: &[f64], rows: usize, a: (f64, f64)) -> Vec<Vec<bool>> {
    let mut good = vec![xs.iter().map(|&x| a.0 < x && x < a.1).collect::<Vec<bool>>()];
    for t in 1..rows {
        let prev = &good[t - 1];
        let row = (0..xs.len()).map(|i| i > 0 && i + 1 < xs.len() && prev[i - 1] && prev[i] && prev[i + 1]).collect();
        good.push(row);
    }
    good
}

/// Set members with a 4-neighbour outside the set or the lattice.
pub fn boundary(set: &[Vec<bool>]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for t in 0..set.len() {
        for i in 0..set[t].len() {
            if !set[t][i] {
                continue;
            }
            let inner = t > 0
                && t + 1 < set.len()
                && i > 0
                && i + 1 < set[t].len()
                && set[t - 1][i]
                && set[t + 1][i]
                && set[t][i - 1]
                && set[t][i + 1];
            if !inner {
                out.push((t, i));
            }
        }
    }
    out
}

/// Hausdorff distance between two index sets, in lattice cells.
pub fn set_hausdorff(a: &[(usize, usize)], b: &[(usize, usize)]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return if a.len() == b.len() { 0.0 } else { f64::INFINITY };
    }
    let directed = |p: &[(usize, usize)], q: &[(usize, usize)]| {
        p.iter()
            .map(|&(i, j)| q.iter().map(|&(k, l)| (i as f64 - k as f64).hypot(j as f64 - l as f64)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}
