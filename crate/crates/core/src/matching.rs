//! Optimal matchings between planar point sets.
//!
//! `MinCostSum` minimizes the total Euclidean displacement over injections
//! of the smaller set into the larger (shortest augmenting paths with
//! potentials). `MinBottleneck` minimizes the largest displacement by a
//! binary search over candidate radii with Hopcroft–Karp as the feasibility
//! test.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::C64;

#[allow(unused_imports)]
use num_traits::Float;

/// Default cap on the larger point count.
pub const DEFAULT_MATCH_CAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum MatchMode {
    MinCostSum,
    MinBottleneck,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatchError {
    #[error("both point lists must be nonempty")]
    Empty,
    #[error("{points} points exceed the matching cap {cap}")]
    TooLarge { points: usize, cap: usize },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MatchingResult {
    /// `(index into A, index into B)`, sorted by the A index.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_a: Vec<usize>,
    pub unmatched_b: Vec<usize>,
    /// `b - a` for each pair, in the order of `pairs`.
    pub displacements: Vec<C64>,
    /// Sum (`MinCostSum`) or maximum (`MinBottleneck`) of `|ξ|`.
    pub total_cost: f64,
    pub mean_cost: f64,
    pub algorithm: MatchMode,
}

impl MatchingResult {
    fn build(a: &[C64], b: &[C64], assign: &[Option<usize>], algorithm: MatchMode) -> Self {
        let mut pairs = Vec::new();
        let mut used_b = vec![false; b.len()];
        let mut unmatched_a = Vec::new();
        for (i, m) in assign.iter().enumerate() {
            match m {
                Some(j) => {
                    pairs.push((i, *j));
                    used_b[*j] = true;
                }
                None => unmatched_a.push(i),
            }
        }
        let unmatched_b = (0..b.len()).filter(|&j| !used_b[j]).collect();
        let displacements: Vec<C64> = pairs.iter().map(|&(i, j)| b[j] - a[i]).collect();
        let lengths = displacements.iter().map(|d| d.norm());
        let sum: f64 = lengths.clone().sum();
        let total_cost = match algorithm {
            MatchMode::MinCostSum => sum,
            MatchMode::MinBottleneck => lengths.fold(0.0, f64::max),
        };
        let mean_cost = if pairs.is_empty() {
            0.0
        } else {
            sum / pairs.len() as f64
        };
        Self {
            pairs,
            unmatched_a,
            unmatched_b,
            displacements,
            total_cost,
            mean_cost,
            algorithm,
        }
    }

    pub fn max_displacement(&self) -> f64 {
        self.displacements
            .iter()
            .map(|d| d.norm())
            .fold(0.0, f64::max)
    }
}

/// Optimal matching of `a` against `b`.
pub fn match_points(
    a: &[C64],
    b: &[C64],
    mode: MatchMode,
    cap: usize,
) -> Result<MatchingResult, MatchError> {
    if a.is_empty() || b.is_empty() {
        return Err(MatchError::Empty);
    }
    let points = a.len().max(b.len());
    if points > cap {
        return Err(MatchError::TooLarge { points, cap });
    }
    let assign = match mode {
        MatchMode::MinCostSum => min_cost_assignment(a, b),
        MatchMode::MinBottleneck => bottleneck_assignment(a, b),
    };
    Ok(MatchingResult::build(a, b, &assign, mode))
}

/// For each point of `a`, its partner in `b` under a minimum total distance
/// matching of size `min(|a|, |b|)`.
pub fn min_cost_assignment(a: &[C64], b: &[C64]) -> Vec<Option<usize>> {
    if a.len() <= b.len() {
        hungarian(a, b).into_iter().map(Some).collect()
    } else {
        let rows = hungarian(b, a);
        let mut out = vec![None; a.len()];
        for (j, i) in rows.into_iter().enumerate() {
            out[i] = Some(j);
        }
        out
    }
}

/// Shortest augmenting path assignment with `rows.len() <= cols.len()`;
/// returns the column of each row. `O(n^2 m)`.
fn hungarian(rows: &[C64], cols: &[C64]) -> Vec<usize> {
    let n = rows.len();
    let m = cols.len();
    debug_assert!(n <= m);
    const NONE: usize = usize::MAX;
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; m];
    // Row matched to each column.
    let mut owner = vec![NONE; m];
    let mut way = vec![NONE; m];
    let mut minv = vec![0.0f64; m];
    let mut used = vec![false; m];
    let cx: Vec<f64> = cols.iter().map(|c| c.re).collect();
    let cy: Vec<f64> = cols.iter().map(|c| c.im).collect();
    for i in 0..n {
        minv.iter_mut().for_each(|x| *x = f64::INFINITY);
        used.iter_mut().for_each(|x| *x = false);
        way.iter_mut().for_each(|x| *x = NONE);
        // Virtual column `NONE` holds the new row.
        let mut row = i;
        let mut col = NONE;
        loop {
            if col != NONE {
                used[col] = true;
            }
            let (px, py) = (rows[row].re, rows[row].im);
            let ur = u[row];
            let mut delta = f64::INFINITY;
            let mut next = NONE;
            for j in 0..m {
                if used[j] {
                    continue;
                }
                let dx = px - cx[j];
                let dy = py - cy[j];
                let cur = (dx * dx + dy * dy).sqrt() - ur - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = col;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    next = j;
                }
            }
            // Dual update over the tree.
            u[i] += delta;
            for j in 0..m {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            col = next;
            if owner[col] == NONE {
                break;
            }
            row = owner[col];
        }
        // Augment along the alternating path.
        loop {
            let prev = way[col];
            owner[col] = if prev == NONE { i } else { owner[prev] };
            if prev == NONE {
                break;
            }
            col = prev;
        }
    }
    let mut out = vec![0usize; n];
    for (j, &r) in owner.iter().enumerate() {
        if r != NONE {
            out[r] = j;
        }
    }
    out
}

/// Minimum over maximum cardinality matchings of the largest distance.
pub fn bottleneck_assignment(a: &[C64], b: &[C64]) -> Vec<Option<usize>> {
    let target = a.len().min(b.len());
    let mut radii: Vec<f64> = a
        .iter()
        .flat_map(|p| b.iter().map(move |q| (q - p).norm()))
        .collect();
    radii.sort_unstable_by(f64::total_cmp);
    radii.dedup();
    let (mut lo, mut hi) = (0usize, radii.len() - 1);
    let mut best = hopcroft_karp(a, b, radii[hi]).1;
    while lo < hi {
        let mid = (lo + hi) / 2;
        let (size, assign) = hopcroft_karp(a, b, radii[mid]);
        if size == target {
            hi = mid;
            best = assign;
        } else {
            lo = mid + 1;
        }
    }
    best
}

/// Maximum matching in the graph `|a_i - b_j| <= r`.
pub fn hopcroft_karp(a: &[C64], b: &[C64], r: f64) -> (usize, Vec<Option<usize>>) {
    let n = a.len();
    let adj: Vec<Vec<usize>> = a
        .iter()
        .map(|p| (0..b.len()).filter(|&j| (b[j] - p).norm() <= r).collect())
        .collect();
    let mut match_a: Vec<Option<usize>> = vec![None; n];
    let mut match_b: Vec<Option<usize>> = vec![None; b.len()];
    let mut dist = vec![usize::MAX; n];
    let mut size = 0;
    loop {
        // Layered BFS from free left vertices.
        let mut queue = VecDeque::new();
        for i in 0..n {
            if match_a[i].is_none() {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                match match_b[j] {
                    None => found = true,
                    Some(k) if dist[k] == usize::MAX => {
                        dist[k] = dist[i] + 1;
                        queue.push_back(k);
                    }
                    _ => {}
                }
            }
        }
        if !found {
            break;
        }
        let mut cursor = vec![0usize; n];
        for i in 0..n {
            if match_a[i].is_none()
                && augment(i, &adj, &mut match_a, &mut match_b, &mut dist, &mut cursor)
            {
                size += 1;
            }
        }
    }
    (size, match_a)
}

/// Iterative layered DFS so deep augmenting paths cannot overflow the stack.
fn augment(
    root: usize,
    adj: &[Vec<usize>],
    match_a: &mut [Option<usize>],
    match_b: &mut [Option<usize>],
    dist: &mut [usize],
    cursor: &mut [usize],
) -> bool {
    let mut stack = vec![root];
    while let Some(&i) = stack.last() {
        if cursor[i] == adj[i].len() {
            dist[i] = usize::MAX;
            stack.pop();
            continue;
        }
        let j = adj[i][cursor[i]];
        match match_b[j] {
            None => {
                // Flip the path recorded on the stack.
                for &x in stack.iter().rev() {
                    let y = adj[x][cursor[x]];
                    match_a[x] = Some(y);
                    match_b[y] = Some(x);
                }
                return true;
            }
            Some(k) if dist[k] == dist[i].wrapping_add(1) => stack.push(k),
            _ => cursor[i] += 1,
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{CounterRng, Purpose};

    fn cloud(n: usize, seed: u64, trial: u64) -> Vec<C64> {
        let mut rng = CounterRng::new(seed, Purpose::Uniform, trial);
        (0..n)
            .map(|_| C64::new(rng.uniform() * 4.0, rng.uniform() * 4.0))
            .collect()
    }

    /// Exhaustive minimum over injections of the smaller set, summing in
    /// the index order of `a` as `MatchingResult` does.
    fn brute_force(a: &[C64], b: &[C64]) -> f64 {
        fn rec(a: &[C64], b: &[C64], i: usize, used: &mut Vec<bool>, acc: &mut Vec<f64>) -> f64 {
            if i == a.len() {
                return acc.iter().sum();
            }
            let mut best = f64::INFINITY;
            for j in 0..b.len() {
                if !used[j] {
                    used[j] = true;
                    acc.push((b[j] - a[i]).norm());
                    best = best.min(rec(a, b, i + 1, used, acc));
                    acc.pop();
                    used[j] = false;
                }
            }
            best
        }
        if a.len() <= b.len() {
            rec(a, b, 0, &mut vec![false; b.len()], &mut Vec::new())
        } else {
            // Sum in the order of the larger set's matched indices.
            let mut best = f64::INFINITY;
            let k = b.len();
            let mut idx: Vec<usize> = (0..k).collect();
            // Enumerate injections b -> a, then sum in increasing a index.
            fn walk(a: &[C64], b: &[C64], t: usize, idx: &mut Vec<usize>, best: &mut f64) {
                if t == b.len() {
                    let mut pairs: Vec<(usize, usize)> =
                        idx.iter().enumerate().map(|(j, &i)| (i, j)).collect();
                    pairs.sort_unstable();
                    let s: f64 = pairs.iter().map(|&(i, j)| (b[j] - a[i]).norm()).sum();
                    *best = best.min(s);
                    return;
                }
                for i in 0..a.len() {
                    if !idx[..t].contains(&i) {
                        idx[t] = i;
                        walk(a, b, t + 1, idx, best);
                    }
                }
            }
            walk(a, b, 0, &mut idx, &mut best);
            best
        }
    }

    fn brute_bottleneck(a: &[C64], b: &[C64]) -> f64 {
        let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
        fn rec(s: &[C64], l: &[C64], i: usize, used: &mut Vec<bool>, cur: f64) -> f64 {
            if i == s.len() {
                return cur;
            }
            let mut best = f64::INFINITY;
            for j in 0..l.len() {
                if !used[j] {
                    used[j] = true;
                    best = best.min(rec(s, l, i + 1, used, cur.max((l[j] - s[i]).norm())));
                    used[j] = false;
                }
            }
            best
        }
        rec(small, large, 0, &mut vec![false; large.len()], 0.0)
    }

    #[test]
    fn identical_sets_match_to_themselves() {
        let a = cloud(30, 1, 0);
        let r = match_points(&a, &a, MatchMode::MinCostSum, 100).unwrap();
        assert_eq!(r.total_cost, 0.0);
        assert!(r.pairs.iter().all(|&(i, j)| i == j));
        let r = match_points(&a, &a, MatchMode::MinBottleneck, 100).unwrap();
        assert_eq!(r.total_cost, 0.0);
    }

    #[test]
    fn nearest_choice() {
        let a = [C64::new(0.0, 0.0)];
        let b = [C64::new(1.0, 0.0), C64::new(10.0, 0.0)];
        let r = match_points(&a, &b, MatchMode::MinCostSum, 10).unwrap();
        assert_eq!(r.pairs, vec![(0, 0)]);
        assert_eq!(r.total_cost, 1.0);
        assert_eq!(r.unmatched_b, vec![1]);
        let r = match_points(&b, &a, MatchMode::MinCostSum, 10).unwrap();
        assert_eq!(r.pairs, vec![(0, 0)]);
        assert_eq!(r.unmatched_a, vec![1]);
    }

    #[test]
    fn rejects_empty_and_oversized() {
        let a = cloud(5, 2, 0);
        assert_eq!(
            match_points(&[], &a, MatchMode::MinCostSum, 10),
            Err(MatchError::Empty)
        );
        assert_eq!(
            match_points(&a, &a, MatchMode::MinCostSum, 4),
            Err(MatchError::TooLarge { points: 5, cap: 4 })
        );
    }

    #[test]
    fn hungarian_equals_brute_force_on_small_instances() {
        for t in 0..300u64 {
            let n = 1 + (t % 8) as usize;
            let m = 1 + ((t / 8) % 8) as usize;
            let a = cloud(n, 3, t);
            let b = cloud(m, 4, t);
            let r = match_points(&a, &b, MatchMode::MinCostSum, 100).unwrap();
            assert_eq!(r.pairs.len(), n.min(m));
            assert_eq!(r.total_cost, brute_force(&a, &b), "trial {t}");
        }
    }

    #[test]
    fn bottleneck_equals_brute_force_and_is_dominated() {
        for t in 0..200u64 {
            let n = 1 + (t % 7) as usize;
            let m = 1 + ((t / 7) % 7) as usize;
            let a = cloud(n, 5, t);
            let b = cloud(m, 6, t);
            let bn = match_points(&a, &b, MatchMode::MinBottleneck, 100).unwrap();
            assert_eq!(bn.pairs.len(), n.min(m));
            assert_eq!(bn.total_cost, brute_bottleneck(&a, &b), "trial {t}");
            let cs = match_points(&a, &b, MatchMode::MinCostSum, 100).unwrap();
            assert!(bn.total_cost <= cs.max_displacement());
        }
    }

    #[test]
    fn translation_invariance_is_exact_on_dyadic_points() {
        let a: Vec<C64> = cloud(40, 7, 0)
            .iter()
            .map(|z| C64::new((z.re * 64.0).floor() / 64.0, (z.im * 64.0).floor() / 64.0))
            .collect();
        let b: Vec<C64> = cloud(50, 8, 0)
            .iter()
            .map(|z| C64::new((z.re * 64.0).floor() / 64.0, (z.im * 64.0).floor() / 64.0))
            .collect();
        let shift = C64::new(3.0, -5.0);
        let a2: Vec<C64> = a.iter().map(|z| z + shift).collect();
        let b2: Vec<C64> = b.iter().map(|z| z + shift).collect();
        for mode in [MatchMode::MinCostSum, MatchMode::MinBottleneck] {
            let r1 = match_points(&a, &b, mode, 100).unwrap();
            let r2 = match_points(&a2, &b2, mode, 100).unwrap();
            assert_eq!(r1.total_cost, r2.total_cost);
        }
    }

    #[test]
    fn hopcroft_karp_finds_perfect_matching_on_chain() {
        // a_i adjacent to b_i and b_{i+1}; greedy from the wrong end fails.
        let a: Vec<C64> = (0..50).map(|i| C64::new(i as f64 + 0.5, 0.0)).collect();
        let b: Vec<C64> = (0..51).map(|i| C64::new(i as f64, 0.0)).collect();
        let (size, m) = hopcroft_karp(&a, &b, 0.5);
        assert_eq!(size, 50);
        let mut seen = [false; 51];
        for j in m.into_iter().flatten() {
            assert!(!seen[j]);
            seen[j] = true;
        }
    }
}
