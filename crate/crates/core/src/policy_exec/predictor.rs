use serde::{Deserialize, Serialize};

use super::dists::{gaussian_at, gaussian_blur, rasterize, visitation_geometry, CellDistribution, VisitationDistributions, DEFAULT_SIGMA};
use crate::geo_mapping::{ContextMap, MapGeometry, ENV_EDGE};
use crate::grid::Grid;
use crate::instruction_lang::OBJ_REF;
use crate::sim_env::AgentState;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PredictorConfig {
    pub edge: f64,
    pub sigma_goal: f64,
    pub sigma_path: f64,
    /// Shift for left/right/front/behind, meters.
    pub relation_offset: f64,
    /// How far short of the object pass/before/past stop, meters.
    pub short_offset: f64,
    /// Goal candidates score at least this fraction of the best score.
    pub near_ratio: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        PredictorConfig {
            edge: ENV_EDGE,
            sigma_goal: DEFAULT_SIGMA,
            sigma_path: DEFAULT_SIGMA,
            relation_offset: 0.5,
            short_offset: 0.4,
            near_ratio: 0.85,
        }
    }
}

pub const RELATION_KEYWORDS: [&str; 8] = ["left", "right", "front", "behind", "pass", "before", "toward", "past"];

/// Clauses are split at these tokens when looking for the final goal's keywords.
const CLAUSE_BREAKS: [&str; 2] = ["and", "then"];

/// Relation keywords that apply to the last reference: those in its clause
/// and in any later clause that mentions no other reference. Without a
/// reference, every keyword counts.
pub fn goal_keywords(anonymized: &[String]) -> Vec<&'static str> {
    let mut clauses: Vec<&[String]> = Vec::new();
    let mut start = 0;
    for (i, t) in anonymized.iter().enumerate() {
        if CLAUSE_BREAKS.contains(&t.as_str()) {
            clauses.push(&anonymized[start..i]);
            start = i + 1;
        }
    }
    clauses.push(&anonymized[start..]);
    let has_ref = |c: &[String]| c.iter().any(|t| t == OBJ_REF);
    let span: Vec<&String> = match clauses.iter().rposition(|c| has_ref(c)) {
        Some(k) => clauses[k..].iter().enumerate().filter(|(j, c)| *j == 0 || !has_ref(c)).flat_map(|(_, c)| c.iter()).collect(),
        None => anonymized.iter().collect(),
    };
    RELATION_KEYWORDS.iter().copied().filter(|k| span.iter().any(|t| t.as_str() == *k)).collect()
}

/// Offset `(forward, left)` in meters in the anchor frame.
fn keyword_offset(keywords: &[&str], object_anchor: bool, cfg: &PredictorConfig) -> (f64, f64) {
    let (mut f, mut l) = (0.0, 0.0);
    let r = cfg.relation_offset;
    for k in keywords {
        match (*k, object_anchor) {
            ("left", _) => l += r,
            ("right", _) => l -= r,
            // In front of an object is the side facing the agent.
            ("front", true) => f -= r,
            ("behind", true) => f += r,
            ("front", false) => f += r,
            ("behind", false) => f -= r,
            ("pass" | "before" | "past", true) => f -= cfg.short_offset,
            _ => {}
        }
    }
    (f, l)
}

/// Among cells scoring at least `near_ratio` of the best `<context(cell), psi>`,
/// the one nearest the agent; ties go to the higher score, then row-major
/// order. `None` when no cell scores above zero.
pub fn goal_cell(map: &ContextMap, psi: &[f64], geom: &MapGeometry, agent: (f64, f64), near_ratio: f64) -> Result<Option<(usize, usize)>> {
    if psi.len() != map.context_dim() {
        return Err(Error::dims(map.context_dim(), psi.len()));
    }
    let n = map.size();
    let mut score = Grid::zeros(n, n);
    for (ch, &p) in map.context().iter().zip(psi) {
        if p == 0.0 {
            continue;
        }
        for (s, v) in score.data_mut().iter_mut().zip(ch.data()) {
            *s += p * v;
        }
    }
    let top = score.max_value();
    if top <= 0.0 {
        return Ok(None);
    }
    let floor = (near_ratio * top).max(f64::MIN_POSITIVE);
    let mut best: Option<((usize, usize), f64, f64)> = None;
    for iy in 0..n {
        for ix in 0..n {
            let s = score.get(ix, iy);
            if s < floor {
                continue;
            }
            let (cx, cy) = geom.cell_center(ix, iy);
            let d = (cx - agent.0).hypot(cy - agent.1);
            let better = match best {
                None => true,
                Some((_, bs, bd)) => d < bd || (d == bd && s > bs),
            };
            if better {
                best = Some(((ix, iy), s, d));
            }
        }
    }
    Ok(best.map(|(c, _, _)| c))
}

/// Observed cells of the visitation grid, read from the map's observability.
fn observed_weights(map: &ContextMap, map_geom: &MapGeometry, vis: &MapGeometry) -> Grid {
    Grid::from_fn(vis.size, vis.size, |ix, iy| {
        let (x, y) = vis.cell_center(ix, iy);
        let (mx, my) = map_geom.clamped_cell_of(x, y);
        map.observability.get(mx, my).min(1.0)
    })
}

/// Hand-built stage-one predictor: the goal is where the last reference was
/// grounded, shifted by relation keywords; the path is a straight smoothed
/// line from the agent to the goal.
pub fn heuristic_predictor(
    map: &ContextMap,
    refs: &[Vec<f64>],
    anonymized: &[String],
    agent: &AgentState,
    cfg: &PredictorConfig,
) -> Result<VisitationDistributions> {
    let map_geom = MapGeometry::new(map.size(), cfg.edge);
    let vis = visitation_geometry(cfg.edge);
    let keywords = goal_keywords(anonymized);
    let here = agent.position();

    let target = match refs.last() {
        Some(psi) => goal_cell(map, psi, &map_geom, here, cfg.near_ratio)?.map(|c| {
            let (ox, oy) = map_geom.cell_center(c.0, c.1);
            let heading = (oy - here.1).atan2(ox - here.0);
            (ox, oy, heading, true)
        }),
        None if !keywords.is_empty() => Some((here.0, here.1, agent.yaw, false)),
        None => None,
    };

    let Some((ax, ay, heading, object_anchor)) = target else {
        let coverage = map.observability.data().iter().map(|v| v.min(1.0)).sum::<f64>() / (map.size() * map.size()) as f64;
        let observed = observed_weights(map, &map_geom, &vis);
        let stay = gaussian_at(&vis, here.0, here.1, cfg.sigma_path);
        let oob = 1.0 - coverage;
        return Ok(VisitationDistributions {
            edge: cfg.edge,
            path: CellDistribution::from_weights(stay.zip_with(&observed, |a, b| a * b)?, oob),
            goal: CellDistribution::from_weights(observed, oob),
        });
    };

    let (f, l) = keyword_offset(&keywords, object_anchor, cfg);
    let (c, s) = (heading.cos(), heading.sin());
    let gx = (ax + f * c - l * s).clamp(0.0, cfg.edge);
    let gy = (ay + f * s + l * c).clamp(0.0, cfg.edge);
    let line = rasterize(&vis, &[[here.0, here.1], [gx, gy]]);
    Ok(VisitationDistributions {
        edge: cfg.edge,
        path: CellDistribution::from_weights(gaussian_blur(&line, cfg.sigma_path / vis.cell_size()), 0.0),
        goal: CellDistribution::from_weights(gaussian_at(&vis, gx, gy, cfg.sigma_goal), 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo_mapping::{boundary_mask, build_context_map, PlacedReference};

    fn toks(s: &str) -> Vec<String> {
        s.split(' ').map(String::from).collect()
    }

    fn map_with(cells: &[((usize, usize), Vec<f64>)], observed: f64) -> ContextMap {
        let n = 32;
        let masks: Vec<Grid> = cells
            .iter()
            .map(|(c, _)| {
                let mut m = Grid::zeros(n, n);
                m.set(c.0, c.1, 1.0);
                m
            })
            .collect();
        let refs: Vec<PlacedReference> = cells.iter().zip(&masks).map(|((_, p), m)| PlacedReference { psi: p, mask: m }).collect();
        let all = masks.iter().fold(Grid::zeros(n, n), |a, m| a.zip_with(m, f64::max).unwrap());
        build_context_map(&refs, &all, &boundary_mask(n), &Grid::filled(n, n, observed), 4).unwrap()
    }

    fn world_of(c: (usize, usize)) -> (f64, f64) {
        MapGeometry::default().cell_center(c.0, c.1)
    }

    /// Map cell centers sit on visitation cell corners, so the argmax is one
    /// of four cells around the point.
    fn argmax_dist(d: &VisitationDistributions, p: (f64, f64)) -> f64 {
        let (gx, gy) = d.goal.grid.argmax();
        let (x, y) = d.geometry().cell_center(gx, gy);
        (x - p.0).hypot(y - p.1)
    }

    #[test]
    fn goal_at_grounded_reference() {
        let psi = vec![1.0, 0.5, 0.0, -0.2];
        let map = map_with(&[((20, 20), psi.clone())], 1.0);
        let agent = AgentState::new(0.5, 0.5, 0.0);
        let d = heuristic_predictor(&map, &[psi], &toks("go to OBJ_REF"), &agent, &PredictorConfig::default()).unwrap();
        d.validate().unwrap();
        assert!(argmax_dist(&d, world_of((20, 20))) < 0.06);
        assert_eq!(d.goal.oob, 0.0);
    }

    #[test]
    fn last_reference_wins() {
        let a = vec![1.0, 0.0, 0.0, 0.0];
        let b = vec![0.0, 1.0, 0.0, 0.0];
        let map = map_with(&[((5, 25), a.clone()), ((25, 6), b.clone())], 1.0);
        let agent = AgentState::new(2.0, 2.0, 0.0);
        let d = heuristic_predictor(&map, &[a, b], &toks("pass OBJ_REF and go to OBJ_REF"), &agent, &PredictorConfig::default()).unwrap();
        assert!(argmax_dist(&d, world_of((25, 6))) < 0.06);
    }

    #[test]
    fn stop_before_is_short_of_object() {
        let psi = vec![1.0, 0.0, 0.0, 0.0];
        let map = map_with(&[((24, 16), psi.clone())], 1.0);
        let agent = AgentState::new(0.5, 2.4, 0.0);
        let d = heuristic_predictor(&map, &[psi], &toks("stop before reaching OBJ_REF"), &agent, &PredictorConfig::default()).unwrap();
        let geom = d.geometry();
        let (gx, gy) = d.goal.grid.argmax();
        let goal = geom.cell_center(gx, gy);
        let obj = world_of((24, 16));
        let d_obj = |p: (f64, f64)| (p.0 - agent.x).hypot(p.1 - agent.y);
        assert!(d_obj(obj) - d_obj(goal) >= 0.3, "{goal:?} vs {obj:?}");
        assert!((goal.0 - obj.0).hypot(goal.1 - obj.1) >= 0.3);
    }

    #[test]
    fn left_shifts_laterally() {
        let psi = vec![1.0, 0.0, 0.0, 0.0];
        let map = map_with(&[((24, 16), psi.clone())], 1.0);
        let agent = AgentState::new(0.5, world_of((24, 16)).1, 0.0);
        let d = heuristic_predictor(&map, &[psi], &toks("go to the left of OBJ_REF"), &agent, &PredictorConfig::default()).unwrap();
        let geom = d.geometry();
        let (gx, gy) = d.goal.grid.argmax();
        let (x, y) = geom.cell_center(gx, gy);
        let obj = world_of((24, 16));
        assert!((x - obj.0).abs() < 0.1 && (y - obj.1 - 0.5).abs() < 0.1, "{x} {y}");
    }

    #[test]
    fn empty_map_is_out_of_bounds() {
        let map = map_with(&[], 0.0);
        let agent = AgentState::new(1.0, 1.0, 0.0);
        let d = heuristic_predictor(&map, &[vec![1.0, 0.0, 0.0, 0.0]], &toks("go to OBJ_REF"), &agent, &PredictorConfig::default()).unwrap();
        d.validate().unwrap();
        assert_eq!(d.goal.oob, 1.0);
        let half = map_with(&[], 0.5);
        let d = heuristic_predictor(&half, &[], &toks("go"), &agent, &PredictorConfig::default()).unwrap();
        d.validate().unwrap();
        assert!((d.goal.oob - 0.5).abs() < 1e-12);
        let g = d.goal.grid.data();
        assert!(g.iter().all(|&v| (v - g[0]).abs() < 1e-15));
    }

    #[test]
    fn keyword_scope() {
        assert_eq!(goal_keywords(&toks("fly past OBJ_REF on the left and go to OBJ_REF")), Vec::<&str>::new());
        assert_eq!(goal_keywords(&toks("go to OBJ_REF and stop on its left")), vec!["left"]);
        assert_eq!(goal_keywords(&toks("turn right")), vec!["right"]);
        assert_eq!(goal_keywords(&toks("stop before OBJ_REF")), vec!["before"]);
    }

    #[test]
    fn near_cell_of_strong_region_wins() {
        let psi = vec![1.0, 0.0, 0.0, 0.0];
        let geom = MapGeometry::default();
        let field = |near: f64| {
            let mut ch = Grid::zeros(32, 32);
            ch.set(10, 10, near);
            ch.set(14, 10, 1.0);
            ContextMap {
                channels: vec![ch, Grid::zeros(32, 32), Grid::zeros(32, 32), Grid::zeros(32, 32), Grid::zeros(32, 32), boundary_mask(32)],
                observability: Grid::filled(32, 32, 1.0),
            }
        };
        let agent = geom.cell_center(2, 10);
        assert_eq!(goal_cell(&field(0.9), &psi, &geom, agent, 0.85).unwrap(), Some((10, 10)));
        assert_eq!(goal_cell(&field(0.5), &psi, &geom, agent, 0.85).unwrap(), Some((14, 10)));
        assert_eq!(goal_cell(&field(0.9), &psi, &geom, agent, 1.0).unwrap(), Some((14, 10)));
    }

    #[test]
    fn argmax_translation_equivariant() {
        let psi = vec![0.3, -0.1, 0.7, 0.2];
        let geom = MapGeometry::default();
        let agent = (2.0, 2.0);
        for (c, shifted) in [((10, 12), (11, 12)), ((3, 30), (3, 31)), ((20, 5), (19, 5))] {
            let a = goal_cell(&map_with(&[(c, psi.clone())], 1.0), &psi, &geom, agent, 0.5).unwrap();
            let b = goal_cell(&map_with(&[(shifted, psi.clone())], 1.0), &psi, &geom, agent, 0.5).unwrap();
            assert_eq!((a, b), (Some(c), Some(shifted)));
        }
        // Random fields and the agent shifted together by one cell along x;
        // the columns that enter or leave the crop are zero.
        let mut r = crate::util::rng(7);
        for _ in 0..20 {
            use rand::Rng as _;
            let field: Vec<Grid> = (0..4)
                .map(|_| Grid::from_fn(33, 32, |x, _| if x == 0 || x == 32 { 0.0 } else { r.random_range(-1.0..1.0) }))
                .collect();
            let crop = |dx: usize| {
                let channels = field.iter().map(|f| Grid::from_fn(32, 32, |x, y| f.get(x + 1 - dx, y))).chain([Grid::zeros(32, 32), boundary_mask(32)]).collect();
                ContextMap { channels, observability: Grid::filled(32, 32, 1.0) }
            };
            let at = (r.random_range(0.5..4.0), r.random_range(0.5..4.0));
            let moved = (at.0 + geom.cell_size(), at.1);
            for ratio in [0.5, 0.85, 1.0] {
                let a = goal_cell(&crop(0), &psi, &geom, at, ratio).unwrap().unwrap();
                let b = goal_cell(&crop(1), &psi, &geom, moved, ratio).unwrap().unwrap();
                assert_eq!(b, (a.0 + 1, a.1));
            }
        }
        let cfg = PredictorConfig::default();
        let state = AgentState::new(agent.0, agent.1, 0.0);
        let d = heuristic_predictor(&map_with(&[((11, 12), psi.clone())], 1.0), &[psi], &toks("go to OBJ_REF"), &state, &cfg).unwrap();
        assert!(argmax_dist(&d, world_of((11, 12))) < 0.06);
    }

    #[test]
    fn wrong_psi_length() {
        let map = map_with(&[], 1.0);
        let agent = AgentState::new(1.0, 1.0, 0.0);
        assert!(heuristic_predictor(&map, &[vec![1.0]], &[], &agent, &PredictorConfig::default()).is_err());
    }
}
