use crate::linalg::solve_dense;

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn combine(points: &[Vec<f64>], set: &[usize], lambda: &[f64]) -> Vec<f64> {
    let mut x = vec![0.0; points[0].len()];
    for (&i, &l) in set.iter().zip(lambda) {
        for (xj, &pj) in x.iter_mut().zip(&points[i]) {
            *xj += l * pj;
        }
    }
    x
}

/// Minimizer of `‖Σ μ_i p_i‖` over the affine hull of `points[set]` (weights sum to one).
fn affine_min_norm(points: &[Vec<f64>], set: &[usize]) -> Option<Vec<f64>> {
    let m = set.len();
    let mut a = vec![vec![0.0; m + 1]; m + 1];
    for (r, &i) in set.iter().enumerate() {
        for (c, &j) in set.iter().enumerate() {
            a[r][c] = dotv(&points[i], &points[j]);
        }
        a[r][m] = 1.0;
        a[m][r] = 1.0;
    }
    let mut b = vec![0.0; m + 1];
    b[m] = 1.0;
    let sol = solve_dense(a, b)?;
    Some(sol[..m].to_vec())
}

/// Wolfe's algorithm for the point of minimum Euclidean norm in the convex hull of `points`.
/// Returns the point and its convex weights (indexed like `points`).
pub fn min_norm_point(points: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    assert!(!points.is_empty(), "min_norm_point needs at least one point");
    let max_sq = points.iter().map(|p| dotv(p, p)).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let tol = 1e-12 * max_sq;
    let start = (0..points.len())
        .min_by(|&a, &b| dotv(&points[a], &points[a]).total_cmp(&dotv(&points[b], &points[b])))
        .unwrap();
    let mut set = vec![start];
    let mut lambda = vec![1.0];
    let mut x = points[start].clone();
    for _ in 0..1000 {
        let xx = dotv(&x, &x);
        let (j, best) = (0..points.len())
            .map(|i| (i, dotv(&points[i], &x)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        if xx - best <= tol || set.contains(&j) || xx <= tol {
            break;
        }
        set.push(j);
        lambda.push(0.0);
        loop {
            let Some(mu) = affine_min_norm(points, &set) else {
                set.pop();
                lambda.pop();
                return finish(points, &set, &lambda);
            };
            if mu.iter().all(|&m| m > 1e-14) {
                lambda = mu;
                break;
            }
            let mut theta = 1.0_f64;
            for (l, m) in lambda.iter().zip(&mu) {
                if *m <= 1e-14 && l - m > 0.0 {
                    theta = theta.min(l / (l - m));
                }
            }
            for (l, m) in lambda.iter_mut().zip(&mu) {
                *l += theta * (m - *l);
            }
            let mut k = 0;
            while k < set.len() {
                if lambda[k] <= 1e-14 {
                    set.remove(k);
                    lambda.remove(k);
                } else {
                    k += 1;
                }
            }
            let s: f64 = lambda.iter().sum();
            lambda.iter_mut().for_each(|l| *l /= s);
        }
        x = combine(points, &set, &lambda);
    }
    finish(points, &set, &lambda)
}

fn finish(points: &[Vec<f64>], set: &[usize], lambda: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut weights = vec![0.0; points.len()];
    for (&i, &l) in set.iter().zip(lambda) {
        weights[i] = l;
    }
    (combine(points, set, lambda), weights)
}
