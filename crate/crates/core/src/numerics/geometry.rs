pub type Point = [f64; 2];

fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Resamples a polyline to `n` points equally spaced in arclength.
pub fn resample(poly: &[Point], n: usize) -> Vec<Point> {
    if poly.len() < 2 || n < 2 {
        return vec![poly.first().copied().unwrap_or([0.0, 0.0]); n.max(1)];
    }
    let mut cum = Vec::with_capacity(poly.len());
    cum.push(0.0);
    for w in poly.windows(2) {
        let last = *cum.last().unwrap();
        cum.push(last + dist(w[0], w[1]));
    }
    let total = *cum.last().unwrap();
    if total == 0.0 {
        return vec![poly[0]; n];
    }
    let mut out = Vec::with_capacity(n);
    let mut j = 0;
    for k in 0..n {
        let target = total * k as f64 / (n - 1) as f64;
        while j + 2 < cum.len() && cum[j + 1] < target {
            j += 1;
        }
        let seg = cum[j + 1] - cum[j];
        let w = if seg > 0.0 { ((target - cum[j]) / seg).clamp(0.0, 1.0) } else { 0.0 };
        out.push([
            poly[j][0] + w * (poly[j + 1][0] - poly[j][0]),
            poly[j][1] + w * (poly[j + 1][1] - poly[j][1]),
        ]);
    }
    out
}

/// Distance from `p` to the segment `[a, b]`.
pub fn point_segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1]];
    let len2 = ab[0] * ab[0] + ab[1] * ab[1];
    if len2 == 0.0 {
        return dist(p, a);
    }
    let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / len2).clamp(0.0, 1.0);
    dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn directed(from: &[Point], to: &[Point]) -> f64 {
    from.iter()
        .map(|&p| {
            to.windows(2)
                .map(|w| point_segment_distance(p, w[0], w[1]))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// Symmetric Hausdorff distance between two polylines after resampling each to
/// `nodes` arclength-equidistant points; distances are point-to-segment.
pub fn hausdorff(a: &[Point], b: &[Point], nodes: usize) -> f64 {
    let ra = resample(a, nodes);
    let rb = resample(b, nodes);
    directed(&ra, &rb).max(directed(&rb, &ra))
}

/// Winding-number membership. Points within `tol` of the boundary count as inside.
pub fn contains(polygon: &[Point], p: Point, tol: f64) -> bool {
    let n = polygon.len();
    let mut winding = 0i32;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if point_segment_distance(p, a, b) <= tol {
            return true;
        }
        let cross = (b[0] - a[0]) * (p[1] - a[1]) - (p[0] - a[0]) * (b[1] - a[1]);
        if a[1] <= p[1] {
            if b[1] > p[1] && cross > 0.0 {
                winding += 1;
            }
        } else if b[1] <= p[1] && cross < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Twice the signed area; positive for counter-clockwise polygons.
pub fn signed_area2(polygon: &[Point]) -> f64 {
    let n = polygon.len();
    (0..n)
        .map(|i| {
            let a = polygon[i];
            let b = polygon[(i + 1) % n];
            a[0] * b[1] - b[0] * a[1]
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resample_is_equispaced() {
        let poly = [[0.0, 0.0], [1.0, 0.0], [1.0, 3.0]];
        let r = resample(&poly, 5);
        assert_eq!(r[0], [0.0, 0.0]);
        assert_eq!(r[1], [1.0, 0.0]);
        assert!((r[2][1] - 1.0).abs() < 1e-15);
        assert_eq!(r[4], [1.0, 3.0]);
    }

    #[test]
    fn hausdorff_of_parallel_lines() {
        let a = [[0.0, 0.0], [2.0, 0.0]];
        let b = [[0.0, 0.5], [1.0, 0.5], [2.0, 0.5]];
        assert!((hausdorff(&a, &b, 64) - 0.5).abs() < 1e-15);
        assert_eq!(hausdorff(&a, &a, 64), 0.0);
    }

    #[test]
    fn winding_membership() {
        let sq = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(contains(&sq, [0.5, 0.5], 0.0));
        assert!(!contains(&sq, [1.5, 0.5], 0.0));
        assert!(contains(&sq, [1.0, 0.5], 1e-12));
        assert!(signed_area2(&sq) > 0.0);
    }
}
