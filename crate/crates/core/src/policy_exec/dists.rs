use serde::{Deserialize, Serialize};

use crate::geo_mapping::{MapGeometry, ENV_EDGE};
use crate::grid::Grid;
use crate::{Error, Result};

pub const VISITATION_SIZE: usize = 64;
pub const DEFAULT_SIGMA: f64 = 0.2;
/// Stands in for zero reference mass inside the KL divergence.
pub const KL_EPS: f64 = 1e-9;

const SUM_TOL: f64 = 1e-6;

/// A distribution over map cells plus one dummy cell for unobserved space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDistribution {
    pub grid: Grid,
    pub oob: f64,
}

impl CellDistribution {
    /// Normalize `weights` to carry `1 - oob` in total; all-zero weights put
    /// everything on the dummy cell.
    pub fn from_weights(weights: Grid, oob: f64) -> Self {
        let total = weights.sum();
        if total <= 0.0 || oob >= 1.0 {
            let (w, h) = weights.dims();
            return CellDistribution {
                grid: Grid::zeros(w, h),
                oob: 1.0,
            };
        }
        let oob = oob.max(0.0);
        CellDistribution {
            grid: weights.map(|v| v * (1.0 - oob) / total),
            oob,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.oob < 0.0 || !self.oob.is_finite() || self.grid.data().iter().any(|&v| v < 0.0 || !v.is_finite()) {
            return Err(Error::invalid("visitation distribution", "negative or non-finite mass"));
        }
        let total = self.grid.sum() + self.oob;
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::invalid("visitation distribution", format!("total mass {total}")));
        }
        Ok(())
    }

    /// Mass of the cells whose centers lie within `radius` of `(x, y)`.
    pub fn mass_within(&self, geom: &MapGeometry, x: f64, y: f64, radius: f64) -> f64 {
        let mut m = 0.0;
        for iy in 0..geom.size {
            for ix in 0..geom.size {
                let (cx, cy) = geom.cell_center(ix, iy);
                if (cx - x).hypot(cy - y) <= radius {
                    m += self.grid.get(ix, iy);
                }
            }
        }
        m
    }

    pub fn is_degenerate(&self) -> bool {
        self.grid.max_value() <= 0.0
    }
}

/// Path visitation `d^p` and stop visitation `d^g` over the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisitationDistributions {
    pub edge: f64,
    pub path: CellDistribution,
    pub goal: CellDistribution,
}

impl VisitationDistributions {
    pub fn geometry(&self) -> MapGeometry {
        MapGeometry::new(self.path.grid.width(), self.edge)
    }

    pub fn validate(&self) -> Result<()> {
        if self.path.grid.width() != self.path.grid.height() {
            return Err(Error::invalid("visitation distribution", "grid is not square"));
        }
        self.path.grid.ensure_same_dims(&self.goal.grid)?;
        self.path.validate()?;
        self.goal.validate()
    }
}

pub fn visitation_geometry(edge: f64) -> MapGeometry {
    MapGeometry::new(VISITATION_SIZE, edge)
}

/// Separable Gaussian blur with zero padding; `sigma` in cells.
pub fn gaussian_blur(g: &Grid, sigma: f64) -> Grid {
    if sigma <= 0.0 {
        return g.clone();
    }
    let r = (3.0 * sigma).ceil() as isize;
    let kernel: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let (w, h) = g.dims();
    let pass = |src: &Grid, horizontal: bool| {
        Grid::from_fn(w, h, |x, y| {
            let mut acc = 0.0;
            for (k, kv) in kernel.iter().enumerate() {
                let d = k as isize - r;
                let (sx, sy) = if horizontal { (x as isize + d, y as isize) } else { (x as isize, y as isize + d) };
                if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                    acc += kv * src.get(sx as usize, sy as usize);
                }
            }
            acc
        })
    };
    pass(&pass(g, true), false)
}

/// Isotropic Gaussian evaluated at cell centers.
pub fn gaussian_at(geom: &MapGeometry, x: f64, y: f64, sigma: f64) -> Grid {
    Grid::from_fn(geom.size, geom.size, |ix, iy| {
        let (cx, cy) = geom.cell_center(ix, iy);
        (-((cx - x).powi(2) + (cy - y).powi(2)) / (2.0 * sigma * sigma)).exp()
    })
}

/// Mark every cell a polyline passes through (sampled at a quarter cell).
pub fn rasterize(geom: &MapGeometry, points: &[[f64; 2]]) -> Grid {
    let mut g = geom.zeros();
    let step = geom.cell_size() / 4.0;
    let mut mark = |p: [f64; 2]| {
        let (ix, iy) = geom.clamped_cell_of(p[0], p[1]);
        g.set(ix, iy, 1.0);
    };
    if let Some(&p) = points.first() {
        mark(p);
    }
    for w in points.windows(2) {
        let len = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        let n = (len / step).ceil().max(1.0) as usize;
        for i in 1..=n {
            let a = i as f64 / n as f64;
            mark([w[0][0] + a * (w[1][0] - w[0][0]), w[0][1] + a * (w[1][1] - w[0][1])]);
        }
    }
    g
}

/// Gold distributions of a demonstration: smoothed occupancy for `d^p` and
/// a Gaussian at the final position for `d^g`.
pub fn gold_distributions(demo: &[[f64; 2]], sigma: f64, edge: f64) -> Result<VisitationDistributions> {
    let last = *demo.last().ok_or(Error::Empty("demonstration"))?;
    if !(sigma > 0.0) {
        return Err(Error::invalid("smoothing sigma", "must be positive"));
    }
    if demo.iter().flatten().any(|v| !(0.0..=edge).contains(v)) {
        return Err(Error::invalid("demonstration", "leaves the environment"));
    }
    let geom = visitation_geometry(edge);
    let occupancy = rasterize(&geom, demo);
    Ok(VisitationDistributions {
        edge,
        path: CellDistribution::from_weights(gaussian_blur(&occupancy, sigma / geom.cell_size()), 0.0),
        goal: CellDistribution::from_weights(gaussian_at(&geom, last[0], last[1], sigma), 0.0),
    })
}

fn kl_term(p: &CellDistribution, q: &CellDistribution) -> f64 {
    p.grid
        .data()
        .iter()
        .zip(q.grid.data())
        .chain([(&p.oob, &q.oob)])
        .filter(|(pv, _)| **pv > 0.0)
        .map(|(pv, qv)| pv * (pv / if *qv > 0.0 { *qv } else { KL_EPS }).ln())
        .sum()
}

/// `KL(pred || gold)` over all cells and the dummy cell, summed over the
/// path and stop distributions.
pub fn kl_loss(pred: &VisitationDistributions, gold: &VisitationDistributions) -> Result<f64> {
    pred.validate()?;
    gold.validate()?;
    pred.path.grid.ensure_same_dims(&gold.path.grid)?;
    Ok((kl_term(&pred.path, &gold.path) + kl_term(&pred.goal, &gold.goal)).max(0.0))
}

impl Default for VisitationDistributions {
    /// Everything on the dummy cell.
    fn default() -> Self {
        let geom = visitation_geometry(ENV_EDGE);
        let empty = CellDistribution::from_weights(geom.zeros(), 1.0);
        VisitationDistributions {
            edge: ENV_EDGE,
            path: empty.clone(),
            goal: empty,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_point_demo() {
        let d = gold_distributions(&[[1.0, 2.0]], DEFAULT_SIGMA, ENV_EDGE).unwrap();
        d.validate().unwrap();
        let geom = d.geometry();
        assert_eq!(d.goal.grid.argmax(), geom.cell_of(1.0, 2.0).unwrap());
        assert_eq!(d.path.grid.argmax(), geom.cell_of(1.0, 2.0).unwrap());
        assert_eq!(d.goal.oob, 0.0);
    }

    #[test]
    fn straight_line_argmax_chain() {
        let geom = visitation_geometry(ENV_EDGE);
        let y = geom.cell_center(0, 30).1;
        let d = gold_distributions(&[[0.5, y], [4.0, y]], DEFAULT_SIGMA, ENV_EDGE).unwrap();
        let line = rasterize(&geom, &[[0.5, y], [4.0, y]]);
        for ix in 0..geom.size {
            if line.get(ix, 30) == 0.0 {
                continue;
            }
            let best = (0..geom.size).max_by(|&a, &b| d.path.grid.get(ix, a).total_cmp(&d.path.grid.get(ix, b))).unwrap();
            assert_eq!(best, 30, "column {ix}");
        }
    }

    #[test]
    fn empty_demo_rejected() {
        assert!(matches!(gold_distributions(&[], DEFAULT_SIGMA, ENV_EDGE), Err(Error::Empty(_))));
        assert!(gold_distributions(&[[5.0, 1.0]], DEFAULT_SIGMA, ENV_EDGE).is_err());
    }

    fn two_cell(a: f64, oob: f64) -> VisitationDistributions {
        let mut g = Grid::zeros(2, 2);
        g.set(0, 0, a);
        g.set(1, 0, 1.0 - a - oob);
        let c = CellDistribution { grid: g, oob };
        VisitationDistributions {
            edge: 1.0,
            path: c.clone(),
            goal: c,
        }
    }

    #[test]
    fn kl_identity_and_point_mass() {
        let gold = gold_distributions(&[[1.0, 1.0], [3.0, 2.0]], DEFAULT_SIGMA, ENV_EDGE).unwrap();
        assert_eq!(kl_loss(&gold, &gold).unwrap(), 0.0);
        let (ix, iy) = (20, 14);
        let g = gold.path.grid.get(ix, iy);
        let mut point = Grid::zeros(VISITATION_SIZE, VISITATION_SIZE);
        point.set(ix, iy, 1.0);
        let pred = VisitationDistributions {
            path: CellDistribution { grid: point, oob: 0.0 },
            ..gold.clone()
        };
        let kl = kl_loss(&pred, &gold).unwrap();
        assert!((kl + g.ln()).abs() < 1e-12);
    }

    #[test]
    fn kl_asymmetric() {
        // Two-cell hand computation: p = (0.5, 0.5), q = (0.9, 0.1).
        let p = two_cell(0.5, 0.0);
        let q = two_cell(0.9, 0.0);
        let pq = 2.0 * (0.5 * (0.5f64 / 0.9).ln() + 0.5 * (0.5f64 / 0.1).ln());
        let qp = 2.0 * (0.9 * (0.9f64 / 0.5).ln() + 0.1 * (0.1f64 / 0.5).ln());
        assert!((kl_loss(&p, &q).unwrap() - pq).abs() < 1e-12);
        assert!((kl_loss(&q, &p).unwrap() - qp).abs() < 1e-12);
        assert!((pq - qp).abs() > 0.1);
    }

    #[test]
    fn kl_rejects_invalid() {
        let bad = two_cell(0.7, 0.2);
        let mut worse = bad.clone();
        worse.goal.oob = 0.5;
        assert!(kl_loss(&worse, &bad).is_err());
    }

    #[test]
    fn degenerate_weights_go_out_of_bounds() {
        let c = CellDistribution::from_weights(Grid::zeros(4, 4), 0.2);
        c.validate().unwrap();
        assert_eq!(c.oob, 1.0);
        assert!(c.is_degenerate());
    }

    proptest! {
        #[test]
        fn kl_nonnegative(a in proptest::collection::vec(0.001f64..1.0, 17), b in proptest::collection::vec(0.01f64..1.0, 17)) {
            let mk = |v: &[f64]| {
                let total: f64 = v.iter().sum::<f64>().max(1e-12);
                let grid = Grid::from_vec(4, 4, v[..16].to_vec()).unwrap();
                let c = CellDistribution { grid: grid.map(|x| x / total), oob: v[16] / total };
                VisitationDistributions { edge: 1.0, path: c.clone(), goal: c }
            };
            prop_assume!(a.iter().sum::<f64>() > 1e-3);
            let (p, q) = (mk(&a), mk(&b));
            prop_assert!(kl_loss(&p, &q).unwrap() >= 0.0);
            prop_assert!(kl_loss(&p, &p).unwrap().abs() < 1e-12);
        }

        #[test]
        fn gold_is_valid(pts in proptest::collection::vec((0.0f64..4.7, 0.0f64..4.7), 1..6), sigma in 0.05f64..0.5) {
            let demo: Vec<[f64; 2]> = pts.into_iter().map(|(x, y)| [x, y]).collect();
            let d = gold_distributions(&demo, sigma, ENV_EDGE).unwrap();
            prop_assert!(d.validate().is_ok());
        }
    }
}
