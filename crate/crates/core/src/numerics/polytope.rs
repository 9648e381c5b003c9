//! Vertex enumeration for polytopes in standard form `{z >= 0, E z = e}`.

use crate::{Error, Result};

const PIVOT_TOL: f64 = 1e-10;
const DEDUP_TOL: f64 = 1e-9;

/// Row-reduces `[E | e]`, dropping dependent rows.
///
/// Returns `None` when the system is inconsistent.
fn reduce_rows(eq: &[Vec<f64>], rhs: &[f64], n: usize) -> Option<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut a: Vec<Vec<f64>> = eq
        .iter()
        .zip(rhs)
        .map(|(row, &b)| {
            let mut r = row.clone();
            r.push(b);
            r
        })
        .collect();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(1.0f64, |m, v| m.max(v.abs()));
    let mut rank = 0;
    for col in 0..n {
        if rank == a.len() {
            break;
        }
        let (best, best_abs) = (rank..a.len())
            .map(|i| (i, a[i][col].abs()))
            .fold((rank, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if best_abs <= PIVOT_TOL * scale {
            continue;
        }
        a.swap(rank, best);
        let p = a[rank][col];
        for v in a[rank].iter_mut() {
            *v /= p;
        }
        for i in 0..a.len() {
            if i != rank {
                let f = a[i][col];
                if f != 0.0 {
                    let pivot_row = a[rank].clone();
                    for (x, y) in a[i].iter_mut().zip(&pivot_row) {
                        *x -= f * y;
                    }
                }
            }
        }
        rank += 1;
    }
    if a[rank..].iter().any(|r| r[n].abs() > 1e-9 * scale) {
        return None;
    }
    a.truncate(rank);
    let b = a.iter().map(|r| r[n]).collect();
    let m = a.into_iter().map(|mut r| {
        r.truncate(n);
        r
    });
    Some((m.collect(), b))
}

/// Solves a square system by Gaussian elimination with partial pivoting.
/// Returns `None` when the matrix is numerically singular.
fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let r = b.len();
    for col in 0..r {
        let piv = (col..r).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[piv][col].abs() <= PIVOT_TOL {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for i in col + 1..r {
            let f = a[i][col] / a[col][col];
            if f != 0.0 {
                for k in col..r {
                    a[i][k] -= f * a[col][k];
                }
                b[i] -= f * b[col];
            }
        }
    }
    let mut z = vec![0.0; r];
    for i in (0..r).rev() {
        let s: f64 = (i + 1..r).map(|k| a[i][k] * z[k]).sum();
        z[i] = (b[i] - s) / a[i][i];
    }
    Some(z)
}

fn binomial(n: usize, k: usize) -> Option<usize> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc.checked_mul(n - i)? / (i + 1);
    }
    Some(acc)
}

/// All vertices of `{z >= 0, E z = e}` as basic feasible solutions.
///
/// Returns `Ok(None)` when the number of candidate bases exceeds `max_bases`,
/// and `Ok(Some(vec![]))` when the polytope is empty. Vertices are
/// deduplicated and sorted lexicographically.
pub fn basic_feasible_solutions(eq: &[Vec<f64>], rhs: &[f64], max_bases: usize) -> Result<Option<Vec<Vec<f64>>>> {
    if eq.len() != rhs.len() {
        return Err(Error::invalid("equality system has mismatched row counts"));
    }
    let n = match eq.first() {
        Some(r) => r.len(),
        None => return Err(Error::invalid("equality system has no rows")),
    };
    if eq.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("equality system is ragged"));
    }
    let Some((a, b)) = reduce_rows(eq, rhs, n) else {
        return Ok(Some(Vec::new()));
    };
    let r = a.len();
    if r == 0 {
        // Only possible when e = 0: the origin is the unique vertex of the cone.
        return Ok(Some(vec![vec![0.0; n]]));
    }
    match binomial(n, r) {
        Some(count) if count <= max_bases => {}
        _ => return Ok(None),
    }

    let mut vertices: Vec<Vec<f64>> = Vec::new();
    let mut subset: Vec<usize> = (0..r).collect();
    loop {
        let square: Vec<Vec<f64>> = a.iter().map(|row| subset.iter().map(|&j| row[j]).collect()).collect();
        if let Some(zb) = solve_square(square, b.clone()) {
            if zb.iter().all(|&v| v >= -DEDUP_TOL) {
                let mut z = vec![0.0; n];
                for (&j, &v) in subset.iter().zip(&zb) {
                    z[j] = v.max(0.0);
                }
                if !vertices
                    .iter()
                    .any(|w| w.iter().zip(&z).all(|(p, q)| (p - q).abs() <= DEDUP_TOL))
                {
                    vertices.push(z);
                }
            }
        }
        // Next r-subset of 0..n in lexicographic order.
        let mut i = r;
        loop {
            if i == 0 {
                vertices.sort_by(|u, v| u.partial_cmp(v).unwrap());
                return Ok(Some(vertices));
            }
            i -= 1;
            if subset[i] < n - r + i {
                subset[i] += 1;
                for k in i + 1..r {
                    subset[k] = subset[k - 1] + 1;
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trinomial_martingale_polytope() {
        // 2 q1 + 0 q2 - q3 = 0, q1 + q2 + q3 = 1
        let eq = vec![vec![2.0, 0.0, -1.0], vec![1.0, 1.0, 1.0]];
        let v = basic_feasible_solutions(&eq, &[0.0, 1.0], 1000).unwrap().unwrap();
        assert_eq!(v.len(), 2);
        assert_eq!(v[0], vec![0.0, 1.0, 0.0]);
        assert!((v[1][0] - 1.0 / 3.0).abs() < 1e-15 && (v[1][2] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn redundant_rows_and_infeasible_systems() {
        let eq = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let v = basic_feasible_solutions(&eq, &[1.0, 2.0], 100).unwrap().unwrap();
        assert_eq!(v, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);

        let eq = vec![vec![1.0, 2.0], vec![1.0, 1.0]];
        // q1 + 2 q2 = 0 with q on the simplex forces q = 0, contradiction.
        let v = basic_feasible_solutions(&eq, &[0.0, 1.0], 100).unwrap().unwrap();
        assert!(v.is_empty());
    }

    #[test]
    fn basis_cap_is_respected() {
        let eq = vec![vec![1.0; 40]];
        assert!(basic_feasible_solutions(&eq, &[1.0], 10).unwrap().is_none());
        assert_eq!(binomial(40, 1), Some(40));
        assert_eq!(binomial(5, 2), Some(10));
    }
}
