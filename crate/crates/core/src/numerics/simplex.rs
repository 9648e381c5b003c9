//! Helpers for the probability simplex.

/// Euclidean projection onto `{w >= 0, sum w = 1}`.
pub fn project(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (i, ui) in u.iter().enumerate() {
        cumsum += ui;
        let t = (cumsum - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// All points of the simplex in `dim` coordinates whose entries are multiples
/// of `1 / resolution`, in lexicographic order of the integer numerators.
pub fn lattice(dim: usize, resolution: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    if dim == 0 {
        return out;
    }
    let mut counts = vec![0usize; dim];
    fn rec(pos: usize, left: usize, counts: &mut Vec<usize>, res: usize, out: &mut Vec<Vec<f64>>) {
        if pos + 1 == counts.len() {
            counts[pos] = left;
            out.push(counts.iter().map(|&c| c as f64 / res as f64).collect());
            return;
        }
        for c in 0..=left {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, res, out);
        }
    }
    rec(0, resolution, &mut counts, resolution, &mut out);
    out
}

pub fn uniform(dim: usize) -> Vec<f64> {
    vec![1.0 / dim as f64; dim]
}

/// Convex combination `sum_k w_k points_k`.
pub fn combine(weights: &[f64], points: &[Vec<f64>]) -> Vec<f64> {
    let n = points[0].len();
    let mut out = vec![0.0; n];
    for (w, p) in weights.iter().zip(points) {
        if *w != 0.0 {
            for (o, x) in out.iter_mut().zip(p) {
                *o += w * x;
            }
        }
    }
    out
}
