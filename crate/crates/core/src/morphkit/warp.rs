//! Piecewise-affine warping and blending on a shared triangle mesh.

use super::delaunay::{orient, triangulate, TriangleMesh};
use crate::error::{Error, Result};
use crate::image::Image;
use crate::sample::LandmarkSet;

/// Per-pixel triangle assignment and barycentric weights for one mesh.
struct PixelMap {
    width: usize,
    entries: Vec<(usize, [f64; 3])>,
}

fn barycentric(a: [f64; 2], b: [f64; 2], c: [f64; 2], p: [f64; 2]) -> [f64; 3] {
    let total = orient(a, b, c);
    let wa = orient(b, c, p) / total;
    let wb = orient(c, a, p) / total;
    [wa, wb, 1.0 - wa - wb]
}

impl PixelMap {
    fn build(mesh: &TriangleMesh, points: &[[f64; 2]], width: usize, height: usize) -> PixelMap {
        let boxes: Vec<[f64; 4]> = mesh
            .triangles
            .iter()
            .map(|t| {
                let xs = t.map(|i| points[i][0]);
                let ys = t.map(|i| points[i][1]);
                [
                    xs.iter().copied().fold(f64::INFINITY, f64::min),
                    ys.iter().copied().fold(f64::INFINITY, f64::min),
                    xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    ys.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ]
            })
            .collect();
        let tol = 1e-9;
        let mut entries = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                let p = [x as f64, y as f64];
                let mut best: Option<(usize, [f64; 3], f64)> = None;
                for (k, t) in mesh.triangles.iter().enumerate() {
                    let bb = boxes[k];
                    if p[0] < bb[0] - tol || p[0] > bb[2] + tol || p[1] < bb[1] - tol || p[1] > bb[3] + tol
                    {
                        continue;
                    }
                    let w = barycentric(points[t[0]], points[t[1]], points[t[2]], p);
                    let worst = w[0].min(w[1]).min(w[2]);
                    if worst >= -tol {
                        best = Some((k, w, worst));
                        break;
                    }
                    if best.is_none_or(|b| worst > b.2) {
                        best = Some((k, w, worst));
                    }
                }
                // Pixels outside the hull (only possible without corner points) fall back
                // to the least-violating triangle, which extrapolates its affine map.
                let (k, w) = match best {
                    Some((k, w, _)) => (k, w),
                    None => {
                        let (k, t) = mesh
                            .triangles
                            .iter()
                            .enumerate()
                            .map(|(k, t)| {
                                let w = barycentric(points[t[0]], points[t[1]], points[t[2]], p);
                                (k, w)
                            })
                            .max_by(|a, b| {
                                let ma = a.1[0].min(a.1[1]).min(a.1[2]);
                                let mb = b.1[0].min(b.1[1]).min(b.1[2]);
                                ma.total_cmp(&mb)
                            })
                            .expect("mesh has at least one triangle");
                        (k, t)
                    }
                };
                entries.push((k, w));
            }
        }
        PixelMap { width, entries }
    }

    /// Resample `src`, whose landmarks are `src_points`, onto the mesh geometry.
    fn warp(&self, mesh: &TriangleMesh, src: &Image, src_points: &[[f64; 2]]) -> Image {
        let height = self.entries.len() / self.width;
        let mut out = Image::new(self.width, height);
        for (idx, (k, w)) in self.entries.iter().enumerate() {
            let t = mesh.triangles[*k];
            let (a, b, c) = (src_points[t[0]], src_points[t[1]], src_points[t[2]]);
            let sx = w[0] * a[0] + w[1] * b[0] + w[2] * c[0];
            let sy = w[0] * a[1] + w[1] * b[1] + w[2] * c[1];
            out.set_pixel(idx % self.width, idx / self.width, src.sample_bilinear(sx, sy));
        }
        out
    }
}

/// Warp `img` from landmarks `from` onto landmarks `to` (piecewise-affine over
/// the Delaunay mesh of `to`).
pub fn warp_to(img: &Image, from: &LandmarkSet, to: &LandmarkSet) -> Result<Image> {
    if from.len() != to.len() {
        return Err(Error::invalid("landmark cardinality mismatch"));
    }
    let mesh = triangulate(&to.points)?;
    let map = PixelMap::build(&mesh, &to.points, img.width(), img.height());
    Ok(map.warp(&mesh, img, &from.points))
}

/// Morph two images: interpolate landmarks with weight `alpha` on `lm_a`, warp
/// both images onto the interpolated geometry, blend with `(alpha, 1 - alpha)`,
/// and clip to `[0, 1]`.
pub fn warp_blend(
    img_a: &Image,
    lm_a: &LandmarkSet,
    img_b: &Image,
    lm_b: &LandmarkSet,
    alpha: f64,
) -> Result<(Image, LandmarkSet)> {
    if !img_a.same_shape(img_b) {
        return Err(Error::invalid(format!(
            "image shape mismatch: {}x{} vs {}x{}",
            img_a.width(),
            img_a.height(),
            img_b.width(),
            img_b.height()
        )));
    }
    if !(alpha.is_finite() && (0.0..=1.0).contains(&alpha)) {
        return Err(Error::invalid(format!("blend weight {alpha} outside [0, 1]")));
    }
    let target = lm_a.interpolate(lm_b, alpha)?;
    let mesh = triangulate(&target.points)?;
    let map = PixelMap::build(&mesh, &target.points, img_a.width(), img_a.height());
    let wa = map.warp(&mesh, img_a, &lm_a.points);
    let wb = map.warp(&mesh, img_b, &lm_b.points);
    let beta = 1.0 - alpha;
    let data: Vec<f64> = wa
        .data()
        .iter()
        .zip(wb.data())
        .map(|(a, b)| (alpha * a + beta * b).clamp(0.0, 1.0))
        .collect();
    let out = Image::from_raw(img_a.width(), img_a.height(), data)?;
    Ok((out, target))
}
