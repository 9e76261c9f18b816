use crate::{Error, Result};

pub const SUCCESS_THRESHOLD: f64 = 0.47;
pub const EMD_POINTS: usize = 64;

/// Fraction of stop distances within `threshold`.
pub fn success_rate_at(stop_distances: &[f64], threshold: f64) -> Result<f64> {
    if stop_distances.is_empty() {
        return Err(Error::Empty("episode results"));
    }
    Ok(stop_distances.iter().filter(|&&d| d <= threshold).count() as f64 / stop_distances.len() as f64)
}

pub fn success_rate(stop_distances: &[f64]) -> Result<f64> {
    success_rate_at(stop_distances, SUCCESS_THRESHOLD)
}

/// `k` points spaced evenly by arc length, including both endpoints.
pub fn resample(traj: &[[f64; 2]], k: usize) -> Result<Vec<[f64; 2]>> {
    let first = *traj.first().ok_or(Error::Empty("trajectory"))?;
    if k == 0 {
        return Err(Error::invalid("resample count", "must be positive"));
    }
    let mut cum = vec![0.0];
    for w in traj.windows(2) {
        cum.push(cum.last().unwrap() + (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]));
    }
    let total = *cum.last().unwrap();
    if total == 0.0 || k == 1 {
        return Ok(vec![first; k]);
    }
    let mut out = Vec::with_capacity(k);
    let mut seg = 0;
    for i in 0..k {
        let s = total * i as f64 / (k - 1) as f64;
        while seg + 2 < cum.len() && cum[seg + 1] < s {
            seg += 1;
        }
        let len = cum[seg + 1] - cum[seg];
        let a = if len > 0.0 { ((s - cum[seg]) / len).clamp(0.0, 1.0) } else { 0.0 };
        let (p, q) = (traj[seg], traj[seg + 1]);
        out.push([p[0] + a * (q[0] - p[0]), p[1] + a * (q[1] - p[1])]);
    }
    Ok(out)
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method
/// with row and column potentials). Returns the column assigned to each row.
pub fn hungarian(cost: &[Vec<f64>]) -> Result<Vec<usize>> {
    let n = cost.len();
    if cost.iter().any(|r| r.len() != n) {
        return Err(Error::invalid("cost matrix", "not square"));
    }
    if cost.iter().flatten().any(|c| !c.is_finite()) {
        return Err(Error::Numerical("non-finite assignment cost".into()));
    }
    // 1-based arrays; column 0 is the virtual start.
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    Ok(assign)
}

/// Mean matched distance of the optimal assignment between two equal-size
/// point sets.
pub fn emd_points(a: &[[f64; 2]], b: &[[f64; 2]]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::dims(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::Empty("point set"));
    }
    let cost: Vec<Vec<f64>> = a.iter().map(|p| b.iter().map(|q| (p[0] - q[0]).hypot(p[1] - q[1])).collect()).collect();
    let assign = hungarian(&cost)?;
    Ok(assign.iter().enumerate().map(|(i, &j)| cost[i][j]).sum::<f64>() / a.len() as f64)
}

/// Earth mover's distance between two trajectories, each resampled to `k`
/// arc-length-uniform points.
pub fn emd(a: &[[f64; 2]], b: &[[f64; 2]], k: usize) -> Result<f64> {
    emd_points(&resample(a, k)?, &resample(b, k)?)
}
