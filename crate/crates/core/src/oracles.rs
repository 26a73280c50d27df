//! Independent reference implementations used by test suites.
//!
//! These are deliberately slow and share no code with the production geometry.

use microlp::{ComparisonOp, OptimizationDirection, Problem};
use rand::Rng;
use rand_distr::StandardNormal;

fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Support function `h(d) = max_w d·w`.
pub fn support(wrenches: &[[f64; 6]], d: &[f64; 6]) -> f64 {
    wrenches.iter().map(|w| dot6(w, d)).fold(f64::NEG_INFINITY, f64::max)
}

/// Distance from the origin to the convex hull by accelerated projected gradient on the simplex.
pub fn hull_distance(wrenches: &[[f64; 6]], iters: usize) -> f64 {
    let n = wrenches.len();
    let mut lip = 0.0;
    for a in wrenches {
        for b in wrenches {
            lip += dot6(a, b).abs();
        }
    }
    let step = 1.0 / lip.max(1e-300);
    let point = |l: &[f64]| {
        let mut x = [0.0; 6];
        for (w, &li) in wrenches.iter().zip(l) {
            for k in 0..6 {
                x[k] += li * w[k];
            }
        }
        x
    };
    let mut lam = vec![1.0 / n as f64; n];
    let mut y = lam.clone();
    let mut t = 1.0_f64;
    for _ in 0..iters {
        let x = point(&y);
        let g: Vec<f64> = wrenches.iter().map(|w| dot6(w, &x)).collect();
        let z: Vec<f64> = y.iter().zip(&g).map(|(a, b)| a - step * b).collect();
        let next = project_simplex(&z);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next.iter().zip(&lam).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        lam = next;
        t = t_next;
    }
    let x = point(&lam);
    dot6(&x, &x).sqrt()
}

fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Vertex of the polar polytope `{y : w·y ≤ 1}` furthest along `d`, or `None` when unbounded.
fn polar_vertex(wrenches: &[[f64; 6]], d: &[f64; 6]) -> Option<[f64; 6]> {
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let vars: Vec<_> = (0..6).map(|k| lp.add_var(d[k], (f64::NEG_INFINITY, f64::INFINITY))).collect();
    for w in wrenches {
        let expr: Vec<_> = vars.iter().zip(w).map(|(&v, &c)| (v, c)).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Le, 1.0);
    }
    let sol = lp.solve().ok()?;
    let mut y = [0.0; 6];
    for (k, &v) in vars.iter().enumerate() {
        y[k] = sol[v];
    }
    Some(y)
}

/// Sampled Ferrari–Canny quality: `min_d h(d)` over `n_dirs` random unit directions, with the
/// best candidates refined by polar-vertex ascent. Negative when the origin is outside the hull.
pub fn sampled_eps<R: Rng>(wrenches: &[[f64; 6]], n_dirs: usize, rng: &mut R) -> f64 {
    let scale = wrenches.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()));
    let dist = hull_distance(wrenches, 20_000);
    if dist > 1e-6 * scale {
        return -dist;
    }
    let mut cands: Vec<(f64, [f64; 6])> = Vec::with_capacity(n_dirs);
    for _ in 0..n_dirs {
        let mut d = [0.0; 6];
        for v in d.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = dot6(&d, &d).sqrt();
        d.iter_mut().for_each(|v| *v /= n);
        cands.push((support(wrenches, &d), d));
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut best = cands[0].0;
    for &(_, start) in cands.iter().take(16) {
        let mut d = start;
        for _ in 0..30 {
            let Some(y) = polar_vertex(wrenches, &d) else {
                return best.min(0.0);
            };
            let n = dot6(&y, &y).sqrt();
            let next = y.map(|v| v / n);
            best = best.min(support(wrenches, &next));
            if next.iter().zip(&d).all(|(a, b)| (a - b).abs() < 1e-12) {
                break;
            }
            d = next;
        }
    }
    best.max(0.0)
}
