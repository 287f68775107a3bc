//! Deterministic k-means clustering of 2-D points, with the cluster
//! count chosen at the largest relative drop of the SSE curve.
//!
//! Used to group parentless areas before the graph completion step. Every
//! tie (seeding, assignment, elbow) is broken by the lowest index, so the
//! result depends only on the input order and coordinates.

/// Maximum Lloyd iterations per k; small point sets converge much sooner.
const MAX_ITERS: usize = 20;

fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    dx * dx + dy * dy
}

/// Index of the point minimizing `key`, lowest index on ties.
fn argmin_by<F: Fn(usize) -> f64>(n: usize, key: F) -> usize {
    let mut best = 0;
    let mut best_v = key(0);
    for i in 1..n {
        let v = key(i);
        if v < best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

fn argmax_by<F: Fn(usize) -> f64>(n: usize, key: F) -> usize {
    let mut best = 0;
    let mut best_v = key(0);
    for i in 1..n {
        let v = key(i);
        if v > best_v {
            best = i;
            best_v = v;
        }
    }
    best
}

/// Farthest-point seeding: the first center is the point farthest from the
/// centroid, each further center the point farthest from all chosen ones.
fn seed_centers(points: &[[f64; 2]], k: usize) -> Vec<[f64; 2]> {
    let n = points.len();
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n as f64;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n as f64;
    let first = argmax_by(n, |i| dist2(points[i], [cx, cy]));
    let mut centers = vec![points[first]];
    while centers.len() < k {
        let next = argmax_by(n, |i| {
            centers.iter().map(|c| dist2(points[i], *c)).fold(f64::INFINITY, f64::min)
        });
        centers.push(points[next]);
    }
    centers
}

/// Lloyd iterations for a fixed k. Returns per-point labels plus the sum of
/// squared distances to the assigned centers.
fn kmeans_fixed(points: &[[f64; 2]], k: usize) -> (Vec<usize>, f64) {
    let n = points.len();
    let mut centers = seed_centers(points, k);
    let mut labels = vec![0usize; n];
    for _ in 0..MAX_ITERS {
        let new_labels: Vec<usize> =
            (0..n).map(|i| argmin_by(k, |c| dist2(points[i], centers[c]))).collect();

        // Refill any emptied cluster with the point farthest from its
        // current center; duplicate-point inputs may leave it empty, which
        // is harmless (the label range is still respected).
        let mut counts = vec![0usize; k];
        for &l in &new_labels {
            counts[l] += 1;
        }
        let mut labels_fixed = new_labels.clone();
        for c in 0..k {
            if counts[c] == 0 {
                let far = argmax_by(n, |i| dist2(points[i], centers[labels_fixed[i]]));
                if dist2(points[far], centers[labels_fixed[far]]) > 0.0 {
                    counts[labels_fixed[far]] -= 1;
                    labels_fixed[far] = c;
                    counts[c] += 1;
                }
            }
        }

        let converged = labels_fixed == labels;
        labels = labels_fixed;
        for c in 0..k {
            if counts[c] > 0 {
                let (mut sx, mut sy) = (0.0, 0.0);
                for i in 0..n {
                    if labels[i] == c {
                        sx += points[i][0];
                        sy += points[i][1];
                    }
                }
                centers[c] = [sx / counts[c] as f64, sy / counts[c] as f64];
            }
        }
        if converged {
            break;
        }
    }
    let sse = (0..n).map(|i| dist2(points[i], centers[labels[i]])).sum();
    (labels, sse)
}

/// Clusters points into a count chosen at the elbow of the SSE curve:
/// the k in `2..n` with the largest relative drop `sse(k - 1) / sse(k)`,
/// smallest k on ties. The ratio is scale-free, so tight groups far
/// apart are recovered regardless of how unevenly they are spread. One
/// or two points always form a single cluster.
///
/// Returns one label per point in `0..k`.
pub fn cluster_points(points: &[[f64; 2]]) -> Vec<usize> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    if n <= 2 {
        return vec![0; n];
    }
    let mut sse = vec![0.0; n];
    let mut labels_for_k: Vec<Vec<usize>> = vec![Vec::new(); n];
    for k in 1..n {
        let (labels, s) = kmeans_fixed(points, k);
        sse[k] = s;
        labels_for_k[k] = labels;
    }
    let mut best_k = 2;
    let mut best_ratio = f64::NEG_INFINITY;
    for k in 2..n {
        let ratio = if sse[k] > 0.0 {
            sse[k - 1] / sse[k]
        } else if sse[k - 1] > 0.0 {
            f64::INFINITY
        } else {
            // Both zero: a finer split buys nothing.
            continue;
        };
        if ratio > best_ratio {
            best_ratio = ratio;
            best_k = k;
        }
    }
    labels_for_k[best_k].clone()
}

/// Groups point indices by cluster label, ordered by each group's smallest
/// member index. Empty groups are dropped.
pub fn label_groups(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &l) in labels.iter().enumerate() {
        groups[l].push(i);
    }
    groups.retain(|g| !g.is_empty());
    groups.sort_by_key(|g| g[0]);
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive minimum SSE over every assignment of n points to k
    /// groups, as an independent check on small instances.
    fn oracle_sse(points: &[[f64; 2]], k: usize) -> f64 {
        let n = points.len();
        let mut best = f64::INFINITY;
        let total = k.pow(n as u32);
        for mask in 0..total {
            let mut assign = vec![0usize; n];
            let mut m = mask;
            for a in assign.iter_mut() {
                *a = m % k;
                m /= k;
            }
            let mut sse = 0.0;
            for c in 0..k {
                let members: Vec<usize> = (0..n).filter(|&i| assign[i] == c).collect();
                if members.is_empty() {
                    continue;
                }
                let cx = members.iter().map(|&i| points[i][0]).sum::<f64>() / members.len() as f64;
                let cy = members.iter().map(|&i| points[i][1]).sum::<f64>() / members.len() as f64;
                sse += members.iter().map(|&i| dist2(points[i], [cx, cy])).sum::<f64>();
            }
            best = best.min(sse);
        }
        best
    }

    #[test]
    fn single_point_is_one_cluster() {
        assert_eq!(cluster_points(&[[5.0, 5.0]]), vec![0]);
    }

    #[test]
    fn two_identical_points_are_one_cluster() {
        assert_eq!(cluster_points(&[[5.0, 5.0], [5.0, 5.0]]), vec![0; 2]);
    }

    #[test]
    fn two_tight_pairs_far_apart_form_two_clusters() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [500.0, 500.0], [501.0, 499.0]];
        let labels = cluster_points(&pts);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_ne!(labels[0], labels[2]);
        // The chosen partition is SSE-optimal for its k.
        let (_, sse) = kmeans_fixed(&pts, 2);
        assert!((sse - oracle_sse(&pts, 2)).abs() < 1e-9);
    }

    #[test]
    fn three_groups_are_recovered() {
        let pts = [
            [0.0, 0.0],
            [2.0, 1.0],
            [300.0, 10.0],
            [302.0, 12.0],
            [20.0, 400.0],
            [22.0, 401.0],
        ];
        let labels = cluster_points(&pts);
        assert_eq!(labels[0], labels[1]);
        assert_eq!(labels[2], labels[3]);
        assert_eq!(labels[4], labels[5]);
        let distinct: std::collections::BTreeSet<usize> = labels.iter().copied().collect();
        assert_eq!(distinct.len(), 3);
        let (_, sse) = kmeans_fixed(&pts, 3);
        assert!((sse - oracle_sse(&pts, 3)).abs() < 1e-9);
    }

    #[test]
    fn groups_are_ordered_by_first_member() {
        let labels = vec![1, 0, 1, 2];
        let groups = label_groups(&labels);
        assert_eq!(groups, vec![vec![0, 2], vec![1], vec![3]]);
    }

    proptest! {
        #[test]
        fn labels_are_deterministic_and_in_range(
            pts in proptest::collection::vec((0.0..640.0f64, 0.0..480.0f64), 1..12)
        ) {
            let points: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
            let a = cluster_points(&points);
            let b = cluster_points(&points);
            prop_assert_eq!(&a, &b);
            prop_assert_eq!(a.len(), points.len());
            let k = a.iter().copied().max().unwrap_or(0) + 1;
            prop_assert!(k <= points.len());
            for &l in &a {
                prop_assert!(l < k);
            }
        }
    }
}
