//! Bowyer-Watson Delaunay triangulation over landmark sets.
//!
//! Points are inserted in lexicographic `(x, y)` order with ties broken by
//! index, which fixes the result for cocircular configurations. Exact
//! duplicates are skipped and do not appear in the mesh.

use crate::error::{Error, Result};
use crate::sample::LandmarkSet;

/// Index triples into the source point list, counter-clockwise in image
/// coordinates (positive signed area).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TriangleMesh {
    pub triangles: Vec<[usize; 3]>,
}

pub(crate) fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` lies strictly inside the circumcircle of the
/// counter-clockwise triangle `a, b, c`.
pub fn incircle(a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

impl TriangleMesh {
    pub fn area(&self, points: &[[f64; 2]]) -> f64 {
        self.triangles
            .iter()
            .map(|t| 0.5 * orient(points[t[0]], points[t[1]], points[t[2]]).abs())
            .sum()
    }
}

pub fn delaunay(landmarks: &LandmarkSet) -> Result<TriangleMesh> {
    triangulate(&landmarks.points)
}

pub fn triangulate(points: &[[f64; 2]]) -> Result<TriangleMesh> {
    if points.len() < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "need at least 3 points, got {}",
            points.len()
        )));
    }
    if points.iter().any(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::invalid("non-finite landmark coordinate"));
    }

    let (mut min_x, mut min_y, mut max_x, mut max_y) =
        (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in points {
        min_x = min_x.min(p[0]);
        min_y = min_y.min(p[1]);
        max_x = max_x.max(p[0]);
        max_y = max_y.max(p[1]);
    }
    let extent = (max_x - min_x).max(max_y - min_y).max(1e-12);

    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| {
        points[i][0]
            .total_cmp(&points[j][0])
            .then(points[i][1].total_cmp(&points[j][1]))
            .then(i.cmp(&j))
    });
    order.dedup_by(|j, i| points[*i] == points[*j]);

    let p0 = points[order[0]];
    let collinear = order.iter().all(|&i| {
        order
            .iter()
            .all(|&j| orient(p0, points[i], points[j]).abs() <= 1e-12 * extent * extent)
    });
    if collinear {
        return Err(Error::DegenerateGeometry("all points collinear".into()));
    }

    // Working vertex list: originals followed by a far-away super triangle.
    let n = points.len();
    let mut verts: Vec<[f64; 2]> = points.to_vec();
    let (cx, cy) = ((min_x + max_x) / 2.0, (min_y + max_y) / 2.0);
    let big = 1e4 * extent;
    verts.push([cx - big, cy - big]);
    verts.push([cx + big, cy - big]);
    verts.push([cx, cy + big]);
    let mut tris: Vec<[usize; 3]> = vec![ccw(&verts, [n, n + 1, n + 2])];

    let eps = 1e-10 * extent.powi(4);
    for &pi in &order {
        let p = verts[pi];
        let mut bad: Vec<bool> = tris
            .iter()
            .map(|t| incircle(verts[t[0]], verts[t[1]], verts[t[2]], p) > eps)
            .collect();
        // The triangle containing p is always part of the cavity.
        if let Some(k) = tris.iter().position(|t| contains(&verts, *t, p)) {
            bad[k] = true;
        }
        let mut boundary: Vec<[usize; 2]> = Vec::new();
        for (t, _) in tris.iter().zip(&bad).filter(|(_, b)| **b) {
            for e in [[t[0], t[1]], [t[1], t[2]], [t[2], t[0]]] {
                if let Some(pos) = boundary.iter().position(|f| f[0] == e[1] && f[1] == e[0]) {
                    boundary.swap_remove(pos);
                } else {
                    boundary.push(e);
                }
            }
        }
        let mut kept: Vec<[usize; 3]> = tris
            .iter()
            .zip(&bad)
            .filter(|(_, b)| !**b)
            .map(|(t, _)| *t)
            .collect();
        for e in boundary {
            if orient(verts[e[0]], verts[e[1]], p).abs() > 0.0 {
                kept.push(ccw(&verts, [e[0], e[1], pi]));
            }
        }
        tris = kept;
    }

    let area_eps = 1e-12 * extent * extent;
    let triangles: Vec<[usize; 3]> = tris
        .into_iter()
        .filter(|t| t.iter().all(|&v| v < n))
        .filter(|t| orient(verts[t[0]], verts[t[1]], verts[t[2]]) > area_eps)
        .collect();
    if triangles.is_empty() {
        return Err(Error::DegenerateGeometry("no non-degenerate triangle".into()));
    }
    Ok(TriangleMesh { triangles })
}

fn ccw(verts: &[[f64; 2]], t: [usize; 3]) -> [usize; 3] {
    if orient(verts[t[0]], verts[t[1]], verts[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn contains(verts: &[[f64; 2]], t: [usize; 3], p: [f64; 2]) -> bool {
    let (a, b, c) = (verts[t[0]], verts[t[1]], verts[t[2]]);
    orient(a, b, p) >= 0.0 && orient(b, c, p) >= 0.0 && orient(c, a, p) >= 0.0
}

/// Area of the convex hull (monotone chain).
pub fn convex_hull_area(points: &[[f64; 2]]) -> f64 {
    let mut pts: Vec<[f64; 2]> = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return 0.0;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && orient(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    let mut area = 0.0;
    for i in 0..hull.len() {
        let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
        area += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * area.abs()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty_circumcircle(points: &[[f64; 2]], mesh: &TriangleMesh) -> bool {
        mesh.triangles.iter().all(|t| {
            let (a, b, c) = (points[t[0]], points[t[1]], points[t[2]]);
            points.iter().enumerate().all(|(i, &d)| {
                t.contains(&i) || incircle(a, b, c, d) <= 1e-9 * 64f64.powi(4)
            })
        })
    }

    #[test]
    fn square_gives_two_triangles() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        let mesh = triangulate(&pts).unwrap();
        assert_eq!(mesh.triangles.len(), 2);
        assert!((mesh.area(&pts) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn square_with_center_gives_four_triangles() {
        let pts = [[0.0, 0.0], [2.0, 0.0], [2.0, 2.0], [0.0, 2.0], [1.0, 1.0]];
        let mesh = triangulate(&pts).unwrap();
        assert_eq!(mesh.triangles.len(), 4);
        assert!(mesh.triangles.iter().all(|t| t.contains(&4)));
        assert!(empty_circumcircle(&pts, &mesh));
    }

    #[test]
    fn collinear_input_is_degenerate() {
        let pts = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [5.0, 5.0]];
        assert!(matches!(triangulate(&pts), Err(Error::DegenerateGeometry(_))));
        assert!(matches!(
            triangulate(&[[0.0, 0.0], [1.0, 0.0]]),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    #[test]
    fn boundary_points_on_hull_edges_are_covered() {
        let pts = [
            [0.0, 0.0],
            [63.0, 0.0],
            [63.0, 63.0],
            [0.0, 63.0],
            [20.0, 0.0],
            [0.0, 40.0],
            [31.5, 31.5],
            [10.0, 50.0],
        ];
        let mesh = triangulate(&pts).unwrap();
        assert!((mesh.area(&pts) - convex_hull_area(&pts)).abs() < 1e-6);
        assert!(empty_circumcircle(&pts, &mesh));
    }

    #[test]
    fn duplicates_are_skipped() {
        let pts = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 0.0], [4.0, 4.0]];
        let mesh = triangulate(&pts).unwrap();
        assert!((mesh.area(&pts) - 16.0).abs() < 1e-12);
        assert!(mesh.triangles.iter().all(|t| !t.contains(&3)));
    }
}
