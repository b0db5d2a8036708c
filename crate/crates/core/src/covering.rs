//! Covering numbers `N(A, δ)` through greedy δ-nets, the volumetric ball bound,
//! and the average inverse mass `∫ ρ(B_δ(z))^{−1} ρ(dz)`.
//!
//! Balls here are closed (`|x − z| ≤ δ`) so a center always covers itself.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::costs::CostSpec;
use crate::measures::{distance, DiscreteMeasure, PointCloud};

/// Point counts at or above this use the grid-hash traversal.
pub const GRID_THRESHOLD: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct CoverResult {
    pub count: usize,
    pub centers: PointCloud,
    pub scale: f64,
}

#[derive(Serialize, Deserialize)]
struct CoverRepr {
    delta: f64,
    count: usize,
    centers: Vec<Vec<f64>>,
}

impl Serialize for CoverResult {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        CoverRepr {
            delta: self.scale,
            count: self.count,
            centers: self.centers.to_rows(),
        }
        .serialize(serializer)
    }
}

impl CoverResult {
    /// Every input point lies within `scale` of some center.
    pub fn covers(&self, points: &PointCloud) -> bool {
        points
            .iter()
            .all(|x| self.centers.iter().any(|c| distance(x, c) <= self.scale))
    }
}

/// Farthest-point traversal in a fixed, δ-independent order; stops once every
/// point is within `delta` of a center.
///
/// Centers are input points and pairwise more than `delta` apart, so
/// `N(A, δ) ≤ count ≤ N(A, δ/2)`, and the count is nonincreasing in `delta`.
/// The traversal starts from the point nearest the coordinate-wise mean (ties go
/// to the lexicographically smallest point); later ties go to the lowest index.
pub fn greedy_cover(points: &PointCloud, delta: f64) -> CoverResult {
    assert!(!points.is_empty(), "cannot cover an empty set");
    assert!(delta > 0.0, "scale must be positive");
    let order = if points.len() >= GRID_THRESHOLD {
        traversal_grid(points, delta)
    } else {
        traversal_brute(points, delta)
    };
    let mut centers = PointCloud::empty(points.dim());
    for &k in &order {
        centers.push(points.point(k));
    }
    CoverResult {
        count: order.len(),
        centers,
        scale: delta,
    }
}

fn start_index(points: &PointCloud) -> usize {
    let d = points.dim();
    let n = points.len() as f64;
    let mut mean = vec![0.0; d];
    for x in points.iter() {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v / n;
        }
    }
    let mut best = 0;
    let mut best_dist = f64::INFINITY;
    for (i, x) in points.iter().enumerate() {
        let dist = distance(x, &mean);
        let better = dist < best_dist
            || (dist == best_dist && lexicographic_less(x, points.point(best)));
        if better {
            best = i;
            best_dist = dist;
        }
    }
    best
}

fn lexicographic_less(a: &[f64], b: &[f64]) -> bool {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Less => return true,
            std::cmp::Ordering::Greater => return false,
            std::cmp::Ordering::Equal => {}
        }
    }
    false
}

fn traversal_brute(points: &PointCloud, delta: f64) -> Vec<usize> {
    let start = start_index(points);
    let mut order = vec![start];
    let mut nearest: Vec<f64> = points.iter().map(|x| distance(x, points.point(start))).collect();
    loop {
        let (far, &far_dist) = nearest
            .iter()
            .enumerate()
            .fold((0, &f64::NEG_INFINITY), |acc, cur| if *cur.1 > *acc.1 { cur } else { acc });
        if far_dist <= delta {
            return order;
        }
        order.push(far);
        let c = points.point(far);
        for (i, x) in points.iter().enumerate() {
            let dist = distance(x, c);
            if dist < nearest[i] {
                nearest[i] = dist;
            }
        }
    }
}

struct Grid {
    cell: f64,
    cells: HashMap<Vec<i64>, Vec<usize>>,
}

impl Grid {
    fn new(points: &PointCloud, cell: f64) -> Self {
        let mut cells: HashMap<Vec<i64>, Vec<usize>> = HashMap::new();
        for (i, x) in points.iter().enumerate() {
            cells.entry(Self::key(x, cell)).or_default().push(i);
        }
        Self { cell, cells }
    }

    fn key(x: &[f64], cell: f64) -> Vec<i64> {
        x.iter().map(|v| (v / cell).floor() as i64).collect()
    }

    /// Lower bound on the distance from `x` to any point of the cell.
    fn cell_distance(&self, key: &[i64], x: &[f64]) -> f64 {
        let mut sq = 0.0;
        for (&k, &v) in key.iter().zip(x) {
            let lo = k as f64 * self.cell;
            let hi = lo + self.cell;
            let gap = if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                0.0
            };
            sq += gap * gap;
        }
        sq.sqrt()
    }
}

/// Same traversal as [`traversal_brute`], restricting distance updates to cells
/// that can hold a point closer to the new center than its current nearest one.
fn traversal_grid(points: &PointCloud, delta: f64) -> Vec<usize> {
    let start = start_index(points);
    let grid = Grid::new(points, delta);
    let mut nearest: Vec<f64> = points.iter().map(|x| distance(x, points.point(start))).collect();
    let mut heap: BinaryHeap<(OrderedFloat<f64>, Reverse<usize>)> = nearest
        .iter()
        .enumerate()
        .map(|(i, &d)| (OrderedFloat(d), Reverse(i)))
        .collect();
    let mut order = vec![start];
    loop {
        let (far, radius) = loop {
            let (OrderedFloat(d), Reverse(i)) = *heap.peek().expect("heap holds every point");
            if d == nearest[i] {
                break (i, d);
            }
            heap.pop();
        };
        if radius <= delta {
            return order;
        }
        order.push(far);
        let c = points.point(far).to_vec();
        // only points with nearest > |x − c| change, and nearest ≤ radius
        let mut visit = |members: &Vec<usize>| {
            for &i in members {
                let dist = distance(points.point(i), &c);
                if dist < nearest[i] {
                    nearest[i] = dist;
                    heap.push((OrderedFloat(dist), Reverse(i)));
                }
            }
        };
        let reach = (radius / grid.cell).ceil() as i64;
        let window = (2 * reach + 1) as f64;
        if window.powi(c.len() as i32) < grid.cells.len() as f64 {
            let center = Grid::key(&c, grid.cell);
            let mut offset = vec![-reach; c.len()];
            'cells: loop {
                let key: Vec<i64> = center.iter().zip(&offset).map(|(a, b)| a + b).collect();
                if let Some(members) = grid.cells.get(&key) {
                    if grid.cell_distance(&key, &c) < radius {
                        visit(members);
                    }
                }
                for o in offset.iter_mut() {
                    if *o < reach {
                        *o += 1;
                        continue 'cells;
                    }
                    *o = -reach;
                }
                break;
            }
        } else {
            for (key, members) in &grid.cells {
                if grid.cell_distance(key, &c) < radius {
                    visit(members);
                }
            }
        }
    }
}

/// Volumetric bound `N(B_r, δ) ≤ (1 + 2r/δ)^d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BallCoverBound {
    pub value: f64,
    pub overflowed: bool,
}

pub fn ball_cover_bound(r: f64, delta: f64, d: usize) -> BallCoverBound {
    assert!(r > 0.0 && delta > 0.0, "radius and scale must be positive");
    let value = (1.0 + 2.0 * r / delta).powi(d as i32);
    BallCoverBound {
        value,
        overflowed: value.is_infinite(),
    }
}

/// `Σ_z w_z / m(B_δ(z))` over atoms with positive weight.
pub fn inverse_mass_integral(m: &DiscreteMeasure, delta: f64) -> f64 {
    assert!(delta > 0.0, "scale must be positive");
    let w = m.weights();
    let mut total = 0.0;
    for i in 0..m.len() {
        if w[i] <= 0.0 {
            continue;
        }
        let ball: f64 = (0..m.len())
            .filter(|&k| distance(m.point(i), m.point(k)) <= delta)
            .map(|k| w[k])
            .sum();
        total += w[i] / ball;
    }
    total
}

/// Greedy cover count of the set, zero for an empty set.
pub fn cover_count(points: &PointCloud, delta: f64) -> usize {
    if points.is_empty() {
        0
    } else {
        greedy_cover(points, delta).count
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DensityNormBound {
    /// `ε / (r+s)^{p−1}`.
    pub scale: f64,
    pub counts: (usize, usize),
    /// `e^{8 C_p} · min(counts)`.
    pub bound: f64,
}

/// Covering-number bound on `‖p^{r,s}‖²_{L²(μ⊗ν)}` for marginals supported in
/// `B_r`, `B_s`, with greedy counts standing in for `N`.
pub fn density_norm_bound(
    mu_r: &DiscreteMeasure,
    nu_s: &DiscreteMeasure,
    r: f64,
    s: f64,
    cost: &CostSpec,
    epsilon: f64,
) -> DensityNormBound {
    let scale = epsilon / (r + s).powf(cost.p() - 1.0);
    let counts = (
        cover_count(&mu_r.support(), scale),
        cover_count(&nu_s.support(), scale),
    );
    DensityNormBound {
        scale,
        counts,
        bound: (8.0 * cost.c_p()).exp() * counts.0.min(counts.1) as f64,
    }
}
