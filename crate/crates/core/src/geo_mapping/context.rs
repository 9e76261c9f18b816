use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::grid::Grid;
use crate::util::{f32_from_le_bytes, f32_le_bytes, read_to_string, write_bytes};
use crate::{Error, Result};

/// Context channels of the default map; with the all-object and boundary
/// channels the map has 40 channels.
pub const CONTEXT_CHANNELS: usize = 38;

/// Layered allocentric map: `context_dim` reference channels, then the
/// all-object mask, then the boundary mask. Observability is kept beside it.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextMap {
    pub channels: Vec<Grid>,
    pub observability: Grid,
}

impl ContextMap {
    pub fn context_dim(&self) -> usize {
        self.channels.len() - 2
    }

    pub fn size(&self) -> usize {
        self.observability.width()
    }

    pub fn context(&self) -> &[Grid] {
        &self.channels[..self.context_dim()]
    }

    pub fn all_objects(&self) -> &Grid {
        &self.channels[self.context_dim()]
    }

    pub fn boundary(&self) -> &Grid {
        &self.channels[self.context_dim() + 1]
    }

    /// Channel vector at one cell.
    pub fn feature(&self, x: usize, y: usize) -> Vec<f64> {
        self.channels.iter().map(|c| c.get(x, y)).collect()
    }

    pub fn channel_names(&self) -> Vec<String> {
        let mut names: Vec<String> = (0..self.context_dim()).map(|i| format!("ctx{i}")).collect();
        names.push("objects".into());
        names.push("boundary".into());
        names
    }
}

/// One grounded reference: its context vector and its accumulated map mask.
#[derive(Debug, Clone, Copy)]
pub struct PlacedReference<'a> {
    pub psi: &'a [f64],
    pub mask: &'a Grid,
}

/// Assemble the map: channel `k < D` is `sum_r psi_r[k] * mask_r`.
pub fn build_context_map(
    refs: &[PlacedReference<'_>],
    all_objects: &Grid,
    boundary: &Grid,
    observability: &Grid,
    context_dim: usize,
) -> Result<ContextMap> {
    all_objects.ensure_same_dims(boundary)?;
    all_objects.ensure_same_dims(observability)?;
    let (w, h) = all_objects.dims();
    let mut channels = vec![Grid::zeros(w, h); context_dim];
    for r in refs {
        if r.psi.len() != context_dim {
            return Err(Error::dims(context_dim, r.psi.len()));
        }
        all_objects.ensure_same_dims(r.mask)?;
        if r.psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite context vector".into()));
        }
        for (ch, &p) in channels.iter_mut().zip(r.psi) {
            if p == 0.0 {
                continue;
            }
            for (c, m) in ch.data_mut().iter_mut().zip(r.mask.data()) {
                *c += p * m;
            }
        }
    }
    channels.push(all_objects.clone());
    channels.push(boundary.clone());
    Ok(ContextMap {
        channels,
        observability: observability.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotHeader {
    pub width: usize,
    pub height: usize,
    pub channels: Vec<String>,
    pub timestep: usize,
}

/// Write `<stem>.json` (header) and `<stem>.bin` (f32 LE, channel-major,
/// observability last).
pub fn write_snapshot(map: &ContextMap, timestep: usize, stem: &Path) -> Result<()> {
    let mut names = map.channel_names();
    names.push("observability".into());
    let header = SnapshotHeader {
        width: map.size(),
        height: map.observability.height(),
        channels: names,
        timestep,
    };
    let mut values = Vec::with_capacity(header.width * header.height * header.channels.len());
    for g in map.channels.iter().chain(std::iter::once(&map.observability)) {
        values.extend_from_slice(g.data());
    }
    write_bytes(&stem.with_extension("json"), serde_json::to_string_pretty(&header)?.as_bytes())?;
    write_bytes(&stem.with_extension("bin"), &f32_le_bytes(&values))
}

pub fn read_snapshot(stem: &Path) -> Result<(SnapshotHeader, Vec<Grid>)> {
    let header: SnapshotHeader = serde_json::from_str(&read_to_string(&stem.with_extension("json"))?)?;
    let bin = stem.with_extension("bin");
    let bytes = std::fs::read(&bin).map_err(|e| Error::io(&bin, e))?;
    let values = f32_from_le_bytes(&bytes)?;
    let n = header.width * header.height;
    if values.len() != n * header.channels.len() {
        return Err(Error::dims(n * header.channels.len(), values.len()));
    }
    let grids = values
        .chunks(n)
        .map(|c| Grid::from_vec(header.width, header.height, c.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    Ok((header, grids))
}

/// Pad with zeros or truncate to `dim`.
pub fn fit_context_channels(psi: &[f64], dim: usize) -> Vec<f64> {
    let mut v: Vec<f64> = psi.iter().copied().take(dim).collect();
    v.resize(dim, 0.0);
    v
}

/// Fit a two-part context vector `[before; after]` into `dim` channels by
/// fitting each half to `dim / 2` (an odd `dim` gets one extra zero channel).
pub fn fit_context_halves(psi: &[f64], dim: usize) -> Vec<f64> {
    let half = psi.len() / 2;
    let mut v = fit_context_channels(&psi[..half], dim / 2);
    v.extend(fit_context_channels(&psi[half..], dim / 2));
    v.resize(dim, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_mapping::boundary_mask;
    use proptest::prelude::*;

    fn base(n: usize) -> (Grid, Grid, Grid) {
        (Grid::zeros(n, n), boundary_mask(n), Grid::zeros(n, n))
    }

    #[test]
    fn unit_reference() {
        let (o, b, obs) = base(4);
        let mut m = Grid::zeros(4, 4);
        m.set(2, 1, 1.0);
        let psi = [1.0, 0.0, 0.0];
        let map = build_context_map(&[PlacedReference { psi: &psi, mask: &m }], &o, &b, &obs, 3).unwrap();
        assert_eq!(map.channels.len(), 5);
        assert_eq!(map.context()[0], m);
        assert_eq!(map.context()[1].sum(), 0.0);
        assert_eq!(map.boundary(), &b);
    }

    #[test]
    fn no_references() {
        let (o, b, obs) = base(4);
        let map = build_context_map(&[], &o, &b, &obs, 38).unwrap();
        assert_eq!(map.channels.len(), 40);
        assert!(map.context().iter().all(|c| c.sum() == 0.0));
        assert_eq!(map.boundary().sum(), 12.0);
    }

    #[test]
    fn overlapping_references_sum() {
        let (o, b, obs) = base(3);
        let m1 = Grid::from_fn(3, 3, |x, _| if x < 2 { 0.5 } else { 0.0 });
        let m2 = Grid::from_fn(3, 3, |x, _| if x > 0 { 1.0 } else { 0.0 });
        let (p1, p2) = ([1.0, -2.0], [0.25, 3.0]);
        let refs = [
            PlacedReference { psi: &p1, mask: &m1 },
            PlacedReference { psi: &p2, mask: &m2 },
        ];
        let map = build_context_map(&refs, &o, &b, &obs, 2).unwrap();
        for y in 0..3 {
            for x in 0..3 {
                for k in 0..2 {
                    let want = p1[k] * m1.get(x, y) + p2[k] * m2.get(x, y);
                    assert!((map.context()[k].get(x, y) - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn dimension_errors() {
        let (o, b, obs) = base(3);
        let m = Grid::zeros(4, 4);
        let psi = [1.0];
        assert!(build_context_map(&[PlacedReference { psi: &psi, mask: &m }], &o, &b, &obs, 1).is_err());
        let m = Grid::zeros(3, 3);
        assert!(build_context_map(&[PlacedReference { psi: &psi, mask: &m }], &o, &b, &obs, 2).is_err());
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let (o, b, obs) = base(4);
        let m = Grid::from_fn(4, 4, |x, y| (x + y) as f64 * 0.125);
        let psi = [0.5, 1.5];
        let map = build_context_map(&[PlacedReference { psi: &psi, mask: &m }], &o, &b, &obs, 2).unwrap();
        let stem = dir.path().join("map_0003");
        write_snapshot(&map, 3, &stem).unwrap();
        let (h, grids) = read_snapshot(&stem).unwrap();
        assert_eq!(h.timestep, 3);
        assert_eq!(h.channels.len(), 5);
        assert_eq!(grids[1], map.channels[1]);
        assert_eq!(grids[3], b);
    }

    #[test]
    fn fit_pads_and_truncates() {
        assert_eq!(fit_context_channels(&[1.0, 2.0], 3), vec![1.0, 2.0, 0.0]);
        assert_eq!(fit_context_channels(&[1.0, 2.0, 3.0], 2), vec![1.0, 2.0]);
    }

    #[test]
    fn halves_keep_both_windows() {
        assert_eq!(fit_context_halves(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], 4), vec![1.0, 2.0, 4.0, 5.0]);
        assert_eq!(fit_context_halves(&[1.0, 2.0], 5), vec![1.0, 0.0, 2.0, 0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn additive_in_references(
            a in proptest::collection::vec(0.0f64..1.0, 9),
            c in proptest::collection::vec(0.0f64..1.0, 9),
            pa in proptest::collection::vec(-2.0f64..2.0, 3),
            pc in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            let (o, b, obs) = base(3);
            let ma = Grid::from_vec(3, 3, a).unwrap();
            let mc = Grid::from_vec(3, 3, c).unwrap();
            let ra = PlacedReference { psi: &pa, mask: &ma };
            let rc = PlacedReference { psi: &pc, mask: &mc };
            let both = build_context_map(&[ra, rc], &o, &b, &obs, 3).unwrap();
            let only_a = build_context_map(&[ra], &o, &b, &obs, 3).unwrap();
            let only_c = build_context_map(&[rc], &o, &b, &obs, 3).unwrap();
            for k in 0..3 {
                for (i, v) in both.context()[k].data().iter().enumerate() {
                    let want = only_a.context()[k].data()[i] + only_c.context()[k].data()[i];
                    prop_assert!((v - want).abs() < 1e-12);
                }
            }
        }
    }
}
