//! Shepp-Logan phantom evaluated on the unit square.
//!
//! The classic ten-ellipse head phantom is defined on `[-1, 1]^2`; points on
//! `[0, 1]^2` are mapped affinely before evaluation. Intensities are the
//! original 1974 values (outer shell 2.0), summed over every ellipse that
//! contains the point.

/// `(a, b, x0, y0, angle_deg, intensity)` per ellipse.
const ELLIPSES: [(f64, f64, f64, f64, f64, f64); 10] = [
    (0.69, 0.92, 0.0, 0.0, 0.0, 2.0),
    (0.6624, 0.8740, 0.0, -0.0184, 0.0, -0.98),
    (0.11, 0.31, 0.22, 0.0, -18.0, -0.02),
    (0.16, 0.41, -0.22, 0.0, 18.0, -0.02),
    (0.21, 0.25, 0.0, 0.35, 0.0, 0.01),
    (0.046, 0.046, 0.0, 0.1, 0.0, 0.01),
    (0.046, 0.046, 0.0, -0.1, 0.0, 0.01),
    (0.046, 0.023, -0.08, -0.605, 0.0, 0.01),
    (0.023, 0.023, 0.0, -0.606, 0.0, 0.01),
    (0.023, 0.046, 0.06, -0.605, 0.0, 0.01),
];

/// Phantom intensity at `(x, y)` with both coordinates in `[0, 1]`.
pub fn shepp_logan(x: f64, y: f64) -> f64 {
    // map [0,1]^2 onto the phantom's native [-1,1]^2
    let px = 2.0 * x - 1.0;
    let py = 2.0 * y - 1.0;
    let mut value = 0.0;
    for &(a, b, x0, y0, angle_deg, intensity) in ELLIPSES.iter() {
        let theta = angle_deg.to_radians();
        let (sin_t, cos_t) = theta.sin_cos();
        let dx = px - x0;
        let dy = py - y0;
        let u = dx * cos_t + dy * sin_t;
        let v = -dx * sin_t + dy * cos_t;
        if (u / a).powi(2) + (v / b).powi(2) <= 1.0 {
            value += intensity;
        }
    }
    value
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_are_outside_every_ellipse() {
        for (x, y) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0)] {
            assert_eq!(shepp_logan(x, y), 0.0);
        }
    }

    #[test]
    fn center_matches_independent_evaluation() {
        // Oracle: test (0,0) in phantom coordinates against each ellipse with
        // an explicit rotation matrix.
        let mut expected = 0.0;
        for &(a, b, x0, y0, angle_deg, intensity) in ELLIPSES.iter() {
            let t = angle_deg.to_radians();
            let rot = [[t.cos(), t.sin()], [-t.sin(), t.cos()]];
            let d = [-x0, -y0];
            let local = [
                rot[0][0] * d[0] + rot[0][1] * d[1],
                rot[1][0] * d[0] + rot[1][1] * d[1],
            ];
            if (local[0] / a).powi(2) + (local[1] / b).powi(2) <= 1.0 {
                expected += intensity;
            }
        }
        assert_eq!(shepp_logan(0.5, 0.5), expected);
        // The center sits inside the shell (2.0) and the inner cavity (-0.98):
        assert!((shepp_logan(0.5, 0.5) - 1.02).abs() < 1e-12);
    }

    #[test]
    fn values_bounded_by_total_intensity() {
        let mut grid_max: f64 = f64::NEG_INFINITY;
        let mut grid_min: f64 = f64::INFINITY;
        for i in 0..=40 {
            for j in 0..=40 {
                let v = shepp_logan(i as f64 / 40.0, j as f64 / 40.0);
                grid_max = grid_max.max(v);
                grid_min = grid_min.min(v);
            }
        }
        assert!(grid_max <= 2.0 + 1e-12);
        assert!(grid_min >= 0.0 - 1e-12); // shell minus cavity never goes negative
    }
}
