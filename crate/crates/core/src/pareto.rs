//! Pareto dominance and dominated hypervolume (all objectives minimized).

/// `a` dominates `b`: no worse in every objective and strictly better in one.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Indices of the non-dominated vectors, in input order. Identical vectors
/// do not dominate each other and are all kept.
pub fn non_dominated_indices(ys: &[Vec<f64>]) -> Vec<usize> {
    if ys.is_empty() {
        return Vec::new();
    }
    if ys[0].len() == 2 {
        return non_dominated_2d(ys);
    }
    (0..ys.len())
        .filter(|&i| !ys.iter().any(|other| dominates(other, &ys[i])))
        .collect()
}

fn non_dominated_2d(ys: &[Vec<f64>]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| {
        ys[a][0]
            .total_cmp(&ys[b][0])
            .then(ys[a][1].total_cmp(&ys[b][1]))
    });
    let mut keep = vec![false; ys.len()];
    // best second objective among strictly smaller first objectives
    let mut best_prev = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let x = ys[order[i]][0];
        let mut j = i;
        while j < order.len() && ys[order[j]][0] == x {
            j += 1;
        }
        // group sharing the first objective: only its minimal second
        // objective survives, and only if nothing to the left is at least as
        // good in the second objective
        let group_min = ys[order[i]][1];
        for &k in &order[i..j] {
            let y = ys[k][1];
            keep[k] = y == group_min && y < best_prev;
        }
        best_prev = best_prev.min(group_min);
        i = j;
    }
    (0..ys.len()).filter(|&k| keep[k]).collect()
}

/// Hypervolume dominated by `points` and bounded by `reference`. Points that
/// do not strictly dominate the reference point contribute nothing.
pub fn hypervolume(points: &[Vec<f64>], reference: &[f64]) -> f64 {
    let pts: Vec<&[f64]> = points
        .iter()
        .map(Vec::as_slice)
        .filter(|p| p.iter().zip(reference).all(|(x, r)| x < r))
        .collect();
    if pts.is_empty() {
        return 0.0;
    }
    match reference.len() {
        1 => reference[0] - pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min),
        2 => hv2(pts, reference),
        _ => hv_slices(pts, reference),
    }
}

/// Sweep along the first objective.
fn hv2(mut pts: Vec<&[f64]>, reference: &[f64]) -> f64 {
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let mut area = 0.0;
    let mut ceiling = reference[1];
    for p in pts {
        if p[1] < ceiling {
            area += (reference[0] - p[0]) * (ceiling - p[1]);
            ceiling = p[1];
        }
    }
    area
}

/// Slices along the last objective and recurses on the remaining ones.
fn hv_slices(mut pts: Vec<&[f64]>, reference: &[f64]) -> f64 {
    let d = reference.len();
    pts.sort_by(|a, b| a[d - 1].total_cmp(&b[d - 1]));
    let mut volume = 0.0;
    for i in 0..pts.len() {
        let top = if i + 1 < pts.len() {
            pts[i + 1][d - 1]
        } else {
            reference[d - 1]
        };
        let depth = top - pts[i][d - 1];
        if depth <= 0.0 {
            continue;
        }
        let slab: Vec<Vec<f64>> = pts[..=i].iter().map(|p| p[..d - 1].to_vec()).collect();
        volume += hypervolume(&slab, &reference[..d - 1]) * depth;
    }
    volume
}

/// Hypervolume gained by adding `candidate` to `front`.
pub fn hypervolume_improvement(front: &[Vec<f64>], candidate: &[f64], reference: &[f64]) -> f64 {
    let base = hypervolume(front, reference);
    let mut with = front.to_vec();
    with.push(candidate.to_vec());
    hypervolume(&with, reference) - base
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn front_of_small_set() {
        let ys = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![2.0, 2.0]];
        assert_eq!(non_dominated_indices(&ys), vec![0, 1]);
        let same = vec![vec![1.0, 1.0]; 3];
        assert_eq!(non_dominated_indices(&same), vec![0, 1, 2]);
    }

    #[test]
    fn front_matches_quadratic_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for k in [2usize, 3] {
            for n in [1usize, 5, 50, 200] {
                let ys: Vec<Vec<f64>> = (0..n)
                    .map(|_| (0..k).map(|_| (rng.random::<f64>() * 10.0).floor()).collect())
                    .collect();
                let brute: Vec<usize> = (0..n)
                    .filter(|&i| {
                        !(0..n).any(|j| {
                            ys[j].iter().zip(&ys[i]).all(|(a, b)| a <= b)
                                && ys[j].iter().zip(&ys[i]).any(|(a, b)| a < b)
                        })
                    })
                    .collect();
                assert_eq!(non_dominated_indices(&ys), brute);
            }
        }
    }

    #[test]
    fn hypervolume_examples() {
        assert_eq!(hypervolume(&[vec![0.0, 0.0]], &[1.0, 1.0]), 1.0);
        let front = vec![vec![0.2, 0.8], vec![0.8, 0.2]];
        // union of [0.2,1]x[0.8,1] and [0.8,1]x[0.2,1]
        let hv = hypervolume(&front, &[1.0, 1.0]);
        assert!((hv - (0.16 + 0.16 - 0.04)).abs() < 1e-12);
        assert_eq!(hypervolume(&[vec![1.5, 0.0]], &[1.0, 1.0]), 0.0);
        let cube = hypervolume(&[vec![0.0, 0.0, 0.0]], &[1.0, 2.0, 3.0]);
        assert!((cube - 6.0).abs() < 1e-12);
    }

    #[test]
    fn slicing_agrees_with_sweep_in_two_dimensions() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let pts: Vec<Vec<f64>> = (0..20)
                .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
                .collect();
            let refs: Vec<&[f64]> = pts.iter().map(Vec::as_slice).collect();
            let a = hv2(refs.clone(), &[1.1, 1.1]);
            let b = hv_slices(refs, &[1.1, 1.1]);
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn three_d_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let pts: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
            .collect();
        let hv = hypervolume(&pts, &[1.0, 1.0, 1.0]);
        let n = 400_000;
        let hits = (0..n)
            .filter(|_| {
                let z: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
                pts.iter().any(|p| p.iter().zip(&z).all(|(a, b)| a <= b))
            })
            .count();
        let mc = hits as f64 / n as f64;
        assert!((hv - mc).abs() < 4e-3, "hv {hv} mc {mc}");
    }
}
