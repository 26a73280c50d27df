//! Incremental (quickhull) convex hull in arbitrary dimension with simplicial facets.

use std::collections::{HashMap, VecDeque};

/// Hyperplane `normal · x = offset` through `vertices`, with the unit normal pointing outward.
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub vertices: Vec<usize>,
    pub normal: Vec<f64>,
    pub offset: f64,
    outside: Vec<usize>,
    alive: bool,
}

impl Facet {
    pub fn distance(&self, p: &[f64]) -> f64 {
        self.normal.iter().zip(p).map(|(a, b)| a * b).sum::<f64>() - self.offset
    }
}

#[derive(Debug, Clone)]
pub struct Hull {
    pub facets: Vec<Facet>,
    pub interior: Vec<f64>,
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn subv(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Orthogonalizes `v` against an orthonormal `basis` (twice, for stability).
fn reject(mut v: Vec<f64>, basis: &[Vec<f64>]) -> Vec<f64> {
    for _ in 0..2 {
        for q in basis {
            let d = dotv(&v, q);
            v.iter_mut().zip(q).for_each(|(a, b)| *a -= d * b);
        }
    }
    v
}

fn orthonormal_basis(dirs: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(dirs.len());
    for d in dirs {
        let v = reject(d.clone(), &basis);
        let n = dotv(&v, &v).sqrt();
        if n <= 1e-300 {
            return None;
        }
        basis.push(v.into_iter().map(|a| a / n).collect());
    }
    Some(basis)
}

struct Builder<'a> {
    pts: &'a [Vec<f64>],
    tol: f64,
    interior: Vec<f64>,
    facets: Vec<Facet>,
    ridges: HashMap<Vec<usize>, Vec<usize>>,
}

impl<'a> Builder<'a> {
    fn make_facet(&self, vertices: Vec<usize>) -> Option<Facet> {
        let p0 = &self.pts[vertices[0]];
        let dirs: Vec<Vec<f64>> = vertices[1..].iter().map(|&v| subv(&self.pts[v], p0)).collect();
        let basis = orthonormal_basis(&dirs)?;
        let r = reject(subv(p0, &self.interior), &basis);
        let n = dotv(&r, &r).sqrt();
        if n <= self.tol {
            return None;
        }
        let normal: Vec<f64> = r.into_iter().map(|a| a / n).collect();
        let offset = dotv(&normal, p0);
        Some(Facet { vertices, normal, offset, outside: Vec::new(), alive: true })
    }

    fn ridges_of(vertices: &[usize]) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..vertices.len()).map(move |skip| {
            let mut r: Vec<usize> = vertices.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
            r.sort_unstable();
            r
        })
    }

    fn insert(&mut self, facet: Facet) -> usize {
        let id = self.facets.len();
        for r in Self::ridges_of(&facet.vertices) {
            self.ridges.entry(r).or_default().push(id);
        }
        self.facets.push(facet);
        id
    }

    fn remove(&mut self, id: usize) {
        self.facets[id].alive = false;
        let verts = self.facets[id].vertices.clone();
        for r in Self::ridges_of(&verts) {
            if let Some(list) = self.ridges.get_mut(&r) {
                list.retain(|&f| f != id);
                if list.is_empty() {
                    self.ridges.remove(&r);
                }
            }
        }
    }

    fn neighbors(&self, id: usize) -> Vec<(Vec<usize>, Option<usize>)> {
        Self::ridges_of(&self.facets[id].vertices)
            .map(|r| {
                let other = self.ridges.get(&r).and_then(|l| l.iter().copied().find(|&f| f != id));
                (r, other)
            })
            .collect()
    }

    fn assign(&mut self, candidates: &[usize], new_facets: &[usize]) {
        for &p in candidates {
            let mut best: Option<(usize, f64)> = None;
            for &f in new_facets {
                let d = self.facets[f].distance(&self.pts[p]);
                if d > self.tol && best.map_or(true, |(_, b)| d > b) {
                    best = Some((f, d));
                }
            }
            if let Some((f, _)) = best {
                self.facets[f].outside.push(p);
            }
        }
    }
}

/// Picks `dim + 1` affinely independent points greedily by distance from the current affine hull.
fn initial_simplex(pts: &[Vec<f64>], dim: usize, tol: f64) -> Option<Vec<usize>> {
    let first = (0..pts.len()).min_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]))?;
    let mut chosen = vec![first];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for _ in 0..dim {
        let (best, dist, resid) = (0..pts.len())
            .filter(|i| !chosen.contains(i))
            .map(|i| {
                let r = reject(subv(&pts[i], &pts[first]), &basis);
                (i, dotv(&r, &r).sqrt(), r)
            })
            .max_by(|a, b| a.1.total_cmp(&b.1))?;
        if dist <= tol {
            return None;
        }
        chosen.push(best);
        basis.push(resid.into_iter().map(|a| a / dist).collect());
    }
    Some(chosen)
}

/// Convex hull of `pts` (all of dimension `dim`); `None` when the points do not span `dim` dimensions.
pub fn convex_hull(pts: &[Vec<f64>], rel_tol: f64) -> Option<Hull> {
    let dim = pts.first()?.len();
    if pts.len() <= dim {
        return None;
    }
    let scale = pts.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let tol = rel_tol * scale;
    let simplex = initial_simplex(pts, dim, tol)?;
    let mut interior = vec![0.0; dim];
    for &i in &simplex {
        interior.iter_mut().zip(&pts[i]).for_each(|(a, b)| *a += b / (dim + 1) as f64);
    }
    let mut b = Builder { pts, tol, interior, facets: Vec::new(), ridges: HashMap::new() };
    let mut ids = Vec::new();
    for skip in 0..=dim {
        let verts: Vec<usize> = simplex.iter().enumerate().filter(|&(i, _)| i != skip).map(|(_, &v)| v).collect();
        let f = b.make_facet(verts)?;
        ids.push(b.insert(f));
    }
    let rest: Vec<usize> = (0..pts.len()).filter(|i| !simplex.contains(i)).collect();
    b.assign(&rest, &ids);

    let mut queue: VecDeque<usize> = ids.into_iter().collect();
    let mut guard = 0usize;
    while let Some(fid) = queue.pop_front() {
        if !b.facets[fid].alive || b.facets[fid].outside.is_empty() {
            continue;
        }
        guard += 1;
        if guard > 100_000 {
            return None;
        }
        let eye = *b.facets[fid]
            .outside
            .iter()
            .max_by(|&&p, &&q| b.facets[fid].distance(&pts[p]).total_cmp(&b.facets[fid].distance(&pts[q])))
            .unwrap();

        let mut visible = vec![fid];
        let mut seen: HashMap<usize, bool> = HashMap::from([(fid, true)]);
        let mut horizon: Vec<(Vec<usize>, usize)> = Vec::new();
        let mut k = 0;
        while k < visible.len() {
            let cur = visible[k];
            k += 1;
            for (ridge, other) in b.neighbors(cur) {
                let Some(o) = other else { continue };
                let vis = *seen.entry(o).or_insert_with(|| b.facets[o].distance(&pts[eye]) > -tol);
                if vis {
                    if !visible.contains(&o) {
                        visible.push(o);
                    }
                } else {
                    horizon.push((ridge, o));
                }
            }
        }

        let mut orphans: Vec<usize> = Vec::new();
        for &v in &visible {
            orphans.extend(b.facets[v].outside.drain(..).filter(|&p| p != eye));
            b.remove(v);
        }
        let mut created = Vec::with_capacity(horizon.len());
        for (ridge, _) in horizon {
            let mut verts = ridge;
            verts.push(eye);
            let f = b.make_facet(verts)?;
            created.push(b.insert(f));
        }
        orphans.sort_unstable();
        orphans.dedup();
        b.assign(&orphans, &created);
        queue.extend(created);
    }
    let facets = b.facets.into_iter().filter(|f| f.alive).collect();
    Some(Hull { facets, interior: b.interior })
}
