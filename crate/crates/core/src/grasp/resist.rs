use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::wrench::WrenchSpace;
use crate::scalar::Real;

/// Whether `target` is a nonnegative combination of the edge wrenches in which each contact's
/// weights sum to at most its cap (unbounded when `caps` is `None`).
pub fn resists_wrench<T: Real>(ws: &WrenchSpace<T>, edges_per_contact: usize, caps: Option<&[T]>, target: &[T; 6]) -> bool {
    if ws.wrenches.is_empty() {
        return target.iter().all(|t| t.abs() <= T::lit(1e-12));
    }
    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = ws.wrenches.iter().map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
    for row in 0..6 {
        let expr: Vec<_> = vars.iter().zip(&ws.wrenches).map(|(&v, w)| (v, w[row].as_f64())).collect();
        lp.add_constraint(expr.as_slice(), ComparisonOp::Eq, target[row].as_f64());
    }
    if let Some(caps) = caps {
        for (c, chunk) in vars.chunks(edges_per_contact).enumerate() {
            let expr: Vec<_> = chunk.iter().map(|&v| (v, 1.0)).collect();
            lp.add_constraint(expr.as_slice(), ComparisonOp::Le, caps[c].as_f64());
        }
    }
    lp.solve().is_ok()
}

/// Checks that each of the 12 signed coordinate wrenches is a nonnegative combination of edge wrenches.
pub fn force_closure_certificate<T: Real>(ws: &WrenchSpace<T>) -> bool {
    (0..6).all(|k| {
        [T::one(), -T::one()].into_iter().all(|s| {
            let mut target = [T::zero(); 6];
            target[k] = s;
            resists_wrench(ws, 1, None, &target)
        })
    })
}
