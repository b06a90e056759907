//! Variable-coefficient elliptic solver on the unit square:
//! `div(sigma grad u) = S` with zero Dirichlet boundary, discretized by the
//! standard five-point scheme with arithmetic face averaging.

use serde::{Deserialize, Serialize};

use crate::error::{HskError, Result};
use crate::rng::SplitMix64;

use super::phantom::shepp_logan;

/// Lower clamp on the media field (uniform ellipticity).
pub const SIGMA_FLOOR: f64 = 0.1;

/// Relative-residual target for the Dirichlet solves.
pub const SOLVE_TOL: f64 = 1e-12;

/// Uniform grid on `[0, 1]^2` with `nodes_per_side` nodes per dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nodes_per_side: usize,
}

impl Grid2D {
    pub fn new(nodes_per_side: usize) -> Result<Self> {
        if nodes_per_side < 3 {
            return Err(HskError::Contract(
                "grid needs at least 3 nodes per side".into(),
            ));
        }
        Ok(Grid2D { nodes_per_side })
    }

    /// Mesh spacing `1 / (nodes_per_side - 1)`.
    pub fn h(&self) -> f64 {
        1.0 / (self.nodes_per_side - 1) as f64
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes_per_side * self.nodes_per_side
    }

    pub fn interior_per_side(&self) -> usize {
        self.nodes_per_side - 2
    }

    #[inline]
    pub fn node_index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nodes_per_side + ix
    }

    #[inline]
    pub fn node_coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nodes_per_side, idx / self.nodes_per_side)
    }

    pub fn node_xy(&self, idx: usize) -> (f64, f64) {
        let (ix, iy) = self.node_coords(idx);
        (ix as f64 * self.h(), iy as f64 * self.h())
    }

    pub fn is_boundary(&self, idx: usize) -> bool {
        let (ix, iy) = self.node_coords(idx);
        ix == 0 || iy == 0 || ix == self.nodes_per_side - 1 || iy == self.nodes_per_side - 1
    }
}

/// Strictly positive coefficient field sampled at the grid nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaField {
    pub sigma: Vec<f64>,
}

impl MediaField {
    pub fn new(grid: &Grid2D, sigma: Vec<f64>) -> Result<Self> {
        if sigma.len() != grid.n_nodes() {
            return Err(HskError::Contract("media length != node count".into()));
        }
        if sigma.iter().any(|&s| !(s >= SIGMA_FLOOR)) {
            return Err(HskError::Contract(format!(
                "media must be >= {SIGMA_FLOOR} everywhere"
            )));
        }
        Ok(MediaField { sigma })
    }

    pub fn constant(grid: &Grid2D, value: f64) -> Result<Self> {
        MediaField::new(grid, vec![value; grid.n_nodes()])
    }
}

/// Ground-truth media: `sigma = 1 + shepp_logan`, clamped below at the floor.
pub fn shepp_logan_media(grid: &Grid2D) -> MediaField {
    let sigma = (0..grid.n_nodes())
        .map(|idx| {
            let (x, y) = grid.node_xy(idx);
            (1.0 + shepp_logan(x, y)).max(SIGMA_FLOOR)
        })
        .collect();
    MediaField { sigma }
}

/// Mollified point source `exp(-0.1 d^2)` with `d` the Euclidean distance to
/// the center in grid-index units, evaluated at every node.
pub fn gaussian_source(grid: &Grid2D, center_node: usize) -> Result<Vec<f64>> {
    if center_node >= grid.n_nodes() {
        return Err(HskError::Contract(format!(
            "source center {center_node} outside grid"
        )));
    }
    let (cx, cy) = grid.node_coords(center_node);
    Ok((0..grid.n_nodes())
        .map(|idx| {
            let (ix, iy) = grid.node_coords(idx);
            let dx = ix as f64 - cx as f64;
            let dy = iy as f64 - cy as f64;
            (-0.1 * (dx * dx + dy * dy)).exp()
        })
        .collect())
}

/// Assembled five-point operator over the interior unknowns, with the
/// Dirichlet rows eliminated. `diag`, `east`, `north` store the divergence
/// form directly (negative diagonal); the conjugate-gradient solve runs on
/// its negation, which is symmetric positive definite.
#[derive(Debug, Clone)]
pub struct EllipticSystem {
    pub grid: Grid2D,
    pub media: MediaField,
    diag: Vec<f64>,
    east: Vec<f64>,
    north: Vec<f64>,
}

impl EllipticSystem {
    pub fn interior_count(&self) -> usize {
        let k = self.grid.interior_per_side();
        k * k
    }

    /// Diagonal entry of the assembled (divergence-form) operator.
    pub fn diag_entry(&self, k: usize) -> f64 {
        self.diag[k]
    }

    /// `y = (-A) x` over interior unknowns; `-A` is SPD.
    fn apply_neg(&self, x: &[f64], y: &mut [f64]) {
        let k = self.grid.interior_per_side();
        for iy in 0..k {
            for ix in 0..k {
                let idx = iy * k + ix;
                let mut acc = -self.diag[idx] * x[idx];
                if ix > 0 {
                    acc -= self.east[idx - 1] * x[idx - 1];
                }
                if ix + 1 < k {
                    acc -= self.east[idx] * x[idx + 1];
                }
                if iy > 0 {
                    acc -= self.north[idx - k] * x[idx - k];
                }
                if iy + 1 < k {
                    acc -= self.north[idx] * x[idx + k];
                }
                y[idx] = acc;
            }
        }
    }
}

/// Assembles the five-point stencil with arithmetic face averages
/// `sigma_face = (sigma_a + sigma_b) / 2`. With `harmonic = true` the face
/// coefficient is the harmonic mean instead.
pub fn assemble_operator(
    grid: &Grid2D,
    media: &MediaField,
    harmonic: bool,
) -> Result<EllipticSystem> {
    if media.sigma.len() != grid.n_nodes() {
        return Err(HskError::Contract("media does not match grid".into()));
    }
    let face = |a: f64, b: f64| {
        if harmonic {
            2.0 * a * b / (a + b)
        } else {
            0.5 * (a + b)
        }
    };
    let k = grid.interior_per_side();
    let h2 = grid.h() * grid.h();
    let mut diag = vec![0.0; k * k];
    let mut east = vec![0.0; k * k];
    let mut north = vec![0.0; k * k];
    for iy in 1..=k {
        for ix in 1..=k {
            let sc = media.sigma[grid.node_index(ix, iy)];
            let se = face(sc, media.sigma[grid.node_index(ix + 1, iy)]);
            let sw = face(sc, media.sigma[grid.node_index(ix - 1, iy)]);
            let sn = face(sc, media.sigma[grid.node_index(ix, iy + 1)]);
            let ss = face(sc, media.sigma[grid.node_index(ix, iy - 1)]);
            let idx = (iy - 1) * k + (ix - 1);
            diag[idx] = -(se + sw + sn + ss) / h2;
            if ix < k {
                east[idx] = se / h2;
            }
            if iy < k {
                north[idx] = sn / h2;
            }
        }
    }
    Ok(EllipticSystem {
        grid: *grid,
        media: media.clone(),
        diag,
        east,
        north,
    })
}

/// Solves `div(sigma grad u) = S`, `u = 0` on the boundary, by Jacobi
/// preconditioned conjugate gradients on the negated (SPD) operator.
/// Returns the solution on all grid nodes with exact zeros on the boundary.
pub fn solve_dirichlet(system: &EllipticSystem, source: &[f64]) -> Result<Vec<f64>> {
    let grid = &system.grid;
    if source.len() != grid.n_nodes() {
        return Err(HskError::Contract("source length != node count".into()));
    }
    let k = grid.interior_per_side();
    let n = k * k;
    // rhs of (-A) u = -S restricted to interior nodes
    let mut b = vec![0.0; n];
    for iy in 1..=k {
        for ix in 1..=k {
            b[(iy - 1) * k + (ix - 1)] = -source[grid.node_index(ix, iy)];
        }
    }
    let b_norm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut u = vec![0.0; n];
    if b_norm > 0.0 {
        cg(system, &b, &mut u, b_norm)?;
    }
    let mut full = vec![0.0; grid.n_nodes()];
    for iy in 1..=k {
        for ix in 1..=k {
            full[grid.node_index(ix, iy)] = u[(iy - 1) * k + (ix - 1)];
        }
    }
    Ok(full)
}

fn cg(system: &EllipticSystem, b: &[f64], x: &mut [f64], b_norm: f64) -> Result<()> {
    let n = b.len();
    let inv_diag: Vec<f64> = system.diag.iter().map(|&d| 1.0 / (-d)).collect();
    let mut r = b.to_vec(); // x starts at zero
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ap = vec![0.0; n];
    let max_iter = 40 * (n as f64).sqrt() as usize + 200;
    for _ in 0..max_iter {
        system.apply_neg(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(HskError::Solver("operator lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= SOLVE_TOL * b_norm {
            return Ok(());
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_next: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_next / rz;
        rz = rz_next;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(HskError::Solver(format!(
        "conjugate gradients stalled at relative residual {:.3e} (target {SOLVE_TOL:.0e})",
        r_norm / b_norm
    )))
}

/// Nodal gradient `(du/dx, du/dy)` in physical units: central differences at
/// interior nodes, one-sided differences on the boundary.
pub fn gradient(grid: &Grid2D, u: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = grid.nodes_per_side;
    let h = grid.h();
    let mut gx = vec![0.0; grid.n_nodes()];
    let mut gy = vec![0.0; grid.n_nodes()];
    for iy in 0..n {
        for ix in 0..n {
            let idx = grid.node_index(ix, iy);
            gx[idx] = if ix == 0 {
                (u[grid.node_index(1, iy)] - u[idx]) / h
            } else if ix == n - 1 {
                (u[idx] - u[grid.node_index(n - 2, iy)]) / h
            } else {
                (u[grid.node_index(ix + 1, iy)] - u[grid.node_index(ix - 1, iy)]) / (2.0 * h)
            };
            gy[idx] = if iy == 0 {
                (u[grid.node_index(ix, 1)] - u[idx]) / h
            } else if iy == n - 1 {
                (u[idx] - u[grid.node_index(ix, n - 2)]) / h
            } else {
                (u[grid.node_index(ix, iy + 1)] - u[grid.node_index(ix, iy - 1)]) / (2.0 * h)
            };
        }
    }
    (gx, gy)
}

/// Draws a deterministic set of distinct node indices from `candidates`.
pub fn sample_nodes(candidates: &[usize], count: usize, seed: u64) -> Vec<usize> {
    let mut rng = SplitMix64::new(seed);
    let picks = rng.sample_without_replacement(candidates.len(), count.min(candidates.len()));
    picks.into_iter().map(|i| candidates[i]).collect()
}
