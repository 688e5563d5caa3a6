//! Lattice sampling of the safe-stable input set and boundary extraction.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::Serialize;

use super::{membership_detail, FilterError, Membership};
use crate::config::Ps2fConfig;
use crate::nominal::NominalSolution;
use crate::par::{map_indexed, Execution};

/// Membership over an `R x R` lattice covering the input box. Row `i`
/// holds `u2 = u2_axis[i]`, column `j` holds `u1 = u1_axis[j]`.
#[derive(Debug, Clone, Serialize)]
pub struct S2Grid {
    pub resolution: usize,
    pub u1_axis: Vec<f64>,
    pub u2_axis: Vec<f64>,
    pub cells: Vec<Membership>,
    /// Minimized performance values, same layout as `cells`.
    #[serde(skip)]
    pub values: Vec<f64>,
    /// Nominal first input, used as the degenerate boundary.
    pub anchor: [f64; 2],
}

impl S2Grid {
    pub fn at(&self, row: usize, col: usize) -> Membership {
        self.cells[row * self.resolution + col]
    }

    pub fn point(&self, row: usize, col: usize) -> DVector<f64> {
        DVector::from_vec(vec![self.u1_axis[col], self.u2_axis[row]])
    }

    pub fn count(&self, kind: Membership) -> usize {
        self.cells.iter().filter(|c| **c == kind).count()
    }

    pub fn indeterminate_rate(&self) -> f64 {
        self.count(Membership::Indeterminate) as f64 / self.cells.len().max(1) as f64
    }

    pub fn members(&self) -> Vec<DVector<f64>> {
        (0..self.cells.len())
            .filter(|&k| self.cells[k].is_member())
            .map(|k| self.point(k / self.resolution, k % self.resolution))
            .collect()
    }

    /// Nearest member lattice point to `u` (first in row-major order on ties).
    pub fn nearest_member(&self, u: &DVector<f64>) -> Option<DVector<f64>> {
        let mut best: Option<(f64, DVector<f64>)> = None;
        for p in self.members() {
            let d = (&p - u).norm_squared();
            if best.as_ref().map_or(true, |(bd, _)| d < *bd) {
                best = Some((d, p));
            }
        }
        best.map(|(_, p)| p)
    }

    /// Row-major CSV, one lattice row per line, `1/0/-1` codes.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for i in 0..self.resolution {
            let row: Vec<String> = (0..self.resolution).map(|j| self.at(i, j).code().to_string()).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Boundary loops; a single point at the nominal input when no cell is a member.
    pub fn boundary(&self) -> Vec<Vec<[f64; 2]>> {
        let loops = boundary_polylines(self);
        if loops.is_empty() {
            vec![vec![self.anchor]]
        } else {
            loops
        }
    }
}

/// Samples membership on the lattice. Requires a 2-input model.
pub fn sample_s2_set(
    cfg: &Ps2fConfig,
    x: &DVector<f64>,
    nominal: &NominalSolution,
    a: f64,
    m: usize,
    resolution: usize,
    exec: Execution,
) -> Result<S2Grid, FilterError> {
    if cfg.input_dim() != 2 {
        return Err(FilterError::Command(cfg.input_dim(), 2));
    }
    super::check_filter_args(cfg, nominal, a, m)?;
    let r = resolution.max(1);
    let u1_axis = cfg.u_set.lattice_axis(0, r);
    let u2_axis = cfg.u_set.lattice_axis(1, r);
    let results = map_indexed(r * r, exec, |k| {
        let u = DVector::from_vec(vec![u1_axis[k % r], u2_axis[k / r]]);
        match membership_detail(cfg, x, &u, nominal, a, m) {
            Ok(d) => (d.membership, d.value),
            Err(_) => (Membership::Indeterminate, f64::NAN),
        }
    });
    let v0 = nominal.first_input();
    Ok(S2Grid {
        resolution: r,
        u1_axis,
        u2_axis,
        cells: results.iter().map(|p| p.0).collect(),
        values: results.iter().map(|p| p.1).collect(),
        anchor: [v0[0], v0[1]],
    })
}

/// Contour segments of a binary field padded with `false` on every side.
///
/// `field[i][j]` is the value at row `i`, column `j`. Each segment joins two
/// lattice edges, identified by their endpoint node pairs in padded indices.
pub fn marching_squares(field: &[Vec<bool>]) -> Vec<((usize, usize, usize, usize), (usize, usize, usize, usize))> {
    let rows = field.len();
    let cols = field.first().map_or(0, |r| r.len());
    let at = |i: usize, j: usize| -> bool {
        // padded coordinates: 0 and rows+1 are the false border
        if i == 0 || j == 0 || i > rows || j > cols {
            false
        } else {
            field[i - 1][j - 1]
        }
    };
    let mut segs = Vec::new();
    for i in 0..=rows {
        for j in 0..=cols {
            // corners: bl (i, j), br (i, j+1), tr (i+1, j+1), tl (i+1, j)
            let (bl, br, tr, tl) = (at(i, j), at(i, j + 1), at(i + 1, j + 1), at(i + 1, j));
            let bottom = (i, j, i, j + 1);
            let right = (i, j + 1, i + 1, j + 1);
            let top = (i + 1, j, i + 1, j + 1);
            let left = (i, j, i + 1, j);
            let code = (bl as u8) | (br as u8) << 1 | (tr as u8) << 2 | (tl as u8) << 3;
            match code {
                0 | 15 => {}
                1 | 14 => segs.push((left, bottom)),
                2 | 13 => segs.push((bottom, right)),
                3 | 12 => segs.push((left, right)),
                4 | 11 => segs.push((right, top)),
                6 | 9 => segs.push((bottom, top)),
                7 | 8 => segs.push((left, top)),
                // saddles: keep diagonal members separated
                5 => {
                    segs.push((left, bottom));
                    segs.push((right, top));
                }
                10 => {
                    segs.push((bottom, right));
                    segs.push((left, top));
                }
                _ => unreachable!(),
            }
        }
    }
    segs
}

/// Closed boundary loops of the member region in input coordinates,
/// clamped to the input box. Loops are ordered by decreasing length.
pub fn boundary_polylines(grid: &S2Grid) -> Vec<Vec<[f64; 2]>> {
    let r = grid.resolution;
    let field: Vec<Vec<bool>> = (0..r).map(|i| (0..r).map(|j| grid.at(i, j).is_member()).collect()).collect();
    let segs = marching_squares(&field);
    if segs.is_empty() {
        return Vec::new();
    }
    let coord = |axis: &[f64], p: usize| -> f64 {
        // padded index p maps to lattice index p - 1
        let (lo, hi) = (axis[0], axis[axis.len() - 1]);
        let step = if axis.len() > 1 { axis[1] - axis[0] } else { 0.0 };
        let v = axis[0] + (p as f64 - 1.0) * step;
        v.clamp(lo, hi)
    };
    let point = |e: (usize, usize, usize, usize)| -> [f64; 2] {
        let u1 = 0.5 * (coord(&grid.u1_axis, e.1) + coord(&grid.u1_axis, e.3));
        let u2 = 0.5 * (coord(&grid.u2_axis, e.0) + coord(&grid.u2_axis, e.2));
        [u1, u2]
    };

    let mut by_edge: HashMap<(usize, usize, usize, usize), Vec<usize>> = HashMap::new();
    for (k, (a, b)) in segs.iter().enumerate() {
        by_edge.entry(*a).or_default().push(k);
        by_edge.entry(*b).or_default().push(k);
    }
    let mut used = vec![false; segs.len()];
    let mut loops = Vec::new();
    for start in 0..segs.len() {
        if used[start] {
            continue;
        }
        used[start] = true;
        let (first, mut cur) = segs[start];
        let mut pts = vec![point(first), point(cur)];
        while cur != first {
            let next = by_edge[&cur].iter().copied().find(|&k| !used[k]);
            let Some(k) = next else { break };
            used[k] = true;
            let (a, b) = segs[k];
            cur = if a == cur { b } else { a };
            pts.push(point(cur));
        }
        loops.push(pts);
    }
    loops.sort_by(|a, b| b.len().cmp(&a.len()));
    loops
}

/// Keeps at most `max` vertices of a closed loop, evenly spaced by index.
pub fn downsample_closed(points: &[[f64; 2]], max: usize) -> Vec<[f64; 2]> {
    if points.len() <= max || max == 0 {
        return points.to_vec();
    }
    let closed = points.len() > 1 && points[0] == points[points.len() - 1];
    let body = if closed { &points[..points.len() - 1] } else { points };
    let keep = if closed { max - 1 } else { max };
    let mut out: Vec<[f64; 2]> = (0..keep).map(|i| body[i * body.len() / keep]).collect();
    if closed {
        out.push(out[0]);
    }
    out
}

/// Largest boundary loop with at most 64 vertices, or the anchor point.
pub fn telemetry_boundary(grid: &S2Grid) -> Vec<[f64; 2]> {
    let loops = grid.boundary();
    downsample_closed(&loops[0], 64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_from(field: &[&str]) -> S2Grid {
        let r = field.len();
        let axis: Vec<f64> = (0..r).map(|i| i as f64).collect();
        let cells = field
            .iter()
            .flat_map(|row| row.chars().map(|c| if c == '#' { Membership::Member } else { Membership::NonMember }))
            .collect();
        S2Grid { resolution: r, u1_axis: axis.clone(), u2_axis: axis, cells, values: vec![], anchor: [0.0, 0.0] }
    }

    #[test]
    fn single_cell_gives_diamond() {
        let g = grid_from(&["...", ".#.", "..."]);
        let loops = boundary_polylines(&g);
        assert_eq!(loops.len(), 1);
        let l = &loops[0];
        assert_eq!(l.len(), 5);
        assert_eq!(l[0], l[4]);
        for p in &l[..4] {
            let d = (p[0] - 1.0).abs() + (p[1] - 1.0).abs();
            assert!((d - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn two_blobs_two_loops() {
        let g = grid_from(&["#...", "....", "..##", "..##"]);
        assert_eq!(boundary_polylines(&g).len(), 2);
    }

    #[test]
    fn empty_grid_falls_back_to_anchor() {
        let mut g = grid_from(&["..", ".."]);
        g.anchor = [0.25, -0.5];
        assert_eq!(g.boundary(), vec![vec![[0.25, -0.5]]]);
        assert_eq!(telemetry_boundary(&g), vec![[0.25, -0.5]]);
        assert_eq!(g.to_csv(), "0,0\n0,0\n");
    }

    #[test]
    fn downsampling_keeps_closure() {
        let pts: Vec<[f64; 2]> = (0..200).map(|i| [i as f64, 0.0]).chain(std::iter::once([0.0, 0.0])).collect();
        let d = downsample_closed(&pts, 64);
        assert_eq!(d.len(), 64);
        assert_eq!(d[0], d[63]);
    }
}
