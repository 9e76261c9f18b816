use std::fmt::Write as _;
use std::path::Path;

use super::experiment::{EpisodeResult, ExperimentSummary, PredictorKind, RolloutRecord};
use super::metrics::{success_rate, SUCCESS_THRESHOLD};
use crate::util::write_bytes;
use crate::{Error, Result};

const PANEL: f64 = 160.0;
const PANELS_PER_ROW: usize = 5;
const MAX_PANELS: usize = 20;

pub fn summarize(predictor: PredictorKind, results: &[EpisodeResult]) -> Result<ExperimentSummary> {
    let stops: Vec<f64> = results.iter().map(|r| r.stop_distance).collect();
    let sr = success_rate(&stops)?;
    let n = results.len() as f64;
    let mean = |f: &dyn Fn(&EpisodeResult) -> f64| results.iter().map(f).sum::<f64>() / n;
    let hashes: std::collections::BTreeSet<&str> = results.iter().map(|r| r.config_hash.as_str()).collect();
    if hashes.len() > 1 {
        return Err(Error::invalid("results", "episodes come from different configs"));
    }
    Ok(ExperimentSummary {
        predictor,
        episodes: results.len(),
        success_rate: sr,
        mean_emd: mean(&|r| r.emd),
        mean_stop_distance: mean(&|r| r.stop_distance),
        mean_return: mean(&|r| r.return_value),
        mean_steps: mean(&|r| r.steps as f64),
        config_hash: results[0].config_hash.clone(),
    })
}

fn summary_csv(s: &ExperimentSummary) -> String {
    let kind = match s.predictor {
        PredictorKind::Oracle => "oracle",
        PredictorKind::Heuristic => "heuristic",
    };
    format!(
        "predictor,episodes,success_rate,mean_emd,mean_stop_distance,mean_return,mean_steps,config_hash\n{kind},{},{:.4},{:.4},{:.4},{:.4},{:.2},{}\n",
        s.episodes, s.success_rate, s.mean_emd, s.mean_stop_distance, s.mean_return, s.mean_steps, s.config_hash
    )
}

fn polyline(points: &[[f64; 2]], ox: f64, oy: f64, scale: f64, color: &str) -> String {
    let pts: Vec<String> = points
        .iter()
        .map(|p| format!("{:.1},{:.1}", ox + p[0] * scale, oy + PANEL - p[1] * scale))
        .collect();
    format!("<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>", pts.join(" "))
}

/// Small multiples of agent (blue) and demonstration (gray) paths, up to 20 episodes.
pub fn trajectories_svg(records: &[RolloutRecord], edge: f64) -> String {
    let n = records.len().min(MAX_PANELS);
    let rows = n.div_ceil(PANELS_PER_ROW).max(1);
    let (w, h) = (PANEL * PANELS_PER_ROW as f64, (PANEL + 20.0) * rows as f64);
    let scale = PANEL / edge;
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"monospace\" font-size=\"10\">\n");
    for (i, r) in records.iter().take(n).enumerate() {
        let ox = (i % PANELS_PER_ROW) as f64 * PANEL;
        let oy = (i / PANELS_PER_ROW) as f64 * (PANEL + 20.0) + 14.0;
        let _ = writeln!(s, "<rect x=\"{ox}\" y=\"{oy}\" width=\"{PANEL}\" height=\"{PANEL}\" fill=\"none\" stroke=\"black\"/>");
        let _ = writeln!(s, "<text x=\"{:.1}\" y=\"{:.1}\">seed {}</text>", ox + 4.0, oy - 3.0, r.seed);
        let _ = writeln!(s, "{}", polyline(&r.demo, ox, oy, scale, "gray"));
        let _ = writeln!(s, "{}", polyline(&r.trajectory, ox, oy, scale, "steelblue"));
        if let Some(e) = r.demo.last() {
            let rad = SUCCESS_THRESHOLD * scale;
            let _ = writeln!(
                s,
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"{rad:.1}\" fill=\"none\" stroke=\"green\" stroke-dasharray=\"2,2\"/>",
                ox + e[0] * scale,
                oy + PANEL - e[1] * scale
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Bar chart of `values` in `bins` equal bins over `[0, max]`, with a marker at `mark`.
pub fn histogram_svg(values: &[f64], bins: usize, max: f64, mark: f64, label: &str) -> String {
    let bins = bins.max(1);
    let mut counts = vec![0usize; bins];
    for &v in values {
        let b = ((v / max) * bins as f64).floor().clamp(0.0, (bins - 1) as f64) as usize;
        counts[b] += 1;
    }
    let top = counts.iter().copied().max().unwrap_or(0).max(1) as f64;
    let (w, h, pad) = (400.0, 200.0, 20.0);
    let bw = (w - 2.0 * pad) / bins as f64;
    let mut s = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"monospace\" font-size=\"10\">\n");
    for (i, &c) in counts.iter().enumerate() {
        let bh = (h - 2.0 * pad) * c as f64 / top;
        let _ = writeln!(
            s,
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{bh:.1}\" fill=\"steelblue\"/>",
            pad + i as f64 * bw,
            h - pad - bh,
            bw - 1.0
        );
    }
    let mx = pad + (mark / max).clamp(0.0, 1.0) * (w - 2.0 * pad);
    let _ = writeln!(s, "<line x1=\"{mx:.1}\" y1=\"{pad}\" x2=\"{mx:.1}\" y2=\"{:.1}\" stroke=\"red\"/>", h - pad);
    let _ = writeln!(s, "<text x=\"{pad}\" y=\"12\">{label} (0 to {max} m, n={})</text>", values.len());
    s.push_str("</svg>\n");
    s
}

fn report_md(s: &ExperimentSummary, results: &[EpisodeResult]) -> String {
    let mut m = String::from("# Experiment report\n\n");
    let _ = writeln!(m, "- predictor: {:?}", s.predictor);
    let _ = writeln!(m, "- episodes: {}", s.episodes);
    let _ = writeln!(m, "- config hash: `{}`", s.config_hash);
    let _ = writeln!(m, "- success rate (stop within {SUCCESS_THRESHOLD} m, 10% of the environment edge): {:.3}", s.success_rate);
    let _ = writeln!(m, "- mean EMD: {:.3} m", s.mean_emd);
    let _ = writeln!(m, "- mean stop distance: {:.3} m", s.mean_stop_distance);
    let _ = writeln!(m, "- mean return: {:.3}", s.mean_return);
    m.push_str("\nHuman ratings are not collected; a Likert column would attach to the per-episode table.\n\n");
    m.push_str("| seed | success | stop distance | EMD | steps | stopped | return |\n|---|---|---|---|---|---|---|\n");
    for r in results {
        let _ = writeln!(
            m,
            "| {} | {} | {:.3} | {:.3} | {} | {} | {:.3} |",
            r.seed, r.success, r.stop_distance, r.emd, r.steps, r.stopped, r.return_value
        );
    }
    m.push_str("\n![trajectories](trajectories.svg)\n\n![stop distances](stop_distances.svg)\n");
    m
}

/// Write `summary.csv`, `report.md`, `trajectories.svg` and `stop_distances.svg`.
pub fn write_report(s: &ExperimentSummary, results: &[EpisodeResult], records: &[RolloutRecord], out: &Path) -> Result<()> {
    write_bytes(&out.join("summary.csv"), summary_csv(s).as_bytes())?;
    write_bytes(&out.join("report.md"), report_md(s, results).as_bytes())?;
    write_bytes(&out.join("trajectories.svg"), trajectories_svg(records, crate::geo_mapping::ENV_EDGE).as_bytes())?;
    let stops: Vec<f64> = results.iter().map(|r| r.stop_distance).collect();
    write_bytes(
        &out.join("stop_distances.svg"),
        histogram_svg(&stops, 20, 2.0, SUCCESS_THRESHOLD, "stop distance").as_bytes(),
    )?;
    Ok(())
}
