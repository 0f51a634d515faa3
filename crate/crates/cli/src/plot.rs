//! SVG figures from a trace: map with trajectories, mode weights over time,
//! mode count over time. Output depends only on the trace.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use m3p_core::trace::{TraceLog, TraceRecord};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

pub fn render(log: &TraceLog, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let figures = [
        ("trajectory.svg", trajectory(log)),
        ("weights.svg", weights(log)),
        ("modes.svg", mode_count(log)),
    ];
    let mut written = Vec::new();
    for (name, svg) in figures {
        let p = out.join(name);
        fs::write(&p, svg).with_context(|| format!("writing {}", p.display()))?;
        written.push(p);
    }
    Ok(written)
}

struct Frame {
    x0: f64,
    y0: f64,
    sx: f64,
    sy: f64,
    h: f64,
}

impl Frame {
    fn new(bounds: [f64; 4], w: f64, h: f64, pad: f64) -> Self {
        let sx = (w - 2.0 * pad) / (bounds[2] - bounds[0]).max(1e-9);
        let sy = (h - 2.0 * pad) / (bounds[3] - bounds[1]).max(1e-9);
        Self {
            x0: bounds[0] - pad / sx,
            y0: bounds[1] - pad / sy,
            sx,
            sy,
            h,
        }
    }

    fn pt(&self, x: f64, y: f64) -> (f64, f64) {
        ((x - self.x0) * self.sx, self.h - (y - self.y0) * self.sy)
    }

    fn points(&self, pts: &[(f64, f64)]) -> String {
        let mut s = String::new();
        for &(x, y) in pts {
            let (px, py) = self.pt(x, y);
            let _ = write!(s, "{px:.2},{py:.2} ");
        }
        s.trim_end().to_string()
    }
}

fn open(w: f64, h: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    )
}

fn trajectory(log: &TraceLog) -> String {
    let header = log.records.iter().find_map(|r| match r {
        TraceRecord::Header {
            bounds,
            obstacles,
            landmarks,
            ..
        } => Some((bounds, obstacles, landmarks)),
        _ => None,
    });
    let Some((bounds, obstacles, landmarks)) = header else {
        return open(400.0, 300.0) + "</svg>\n";
    };
    let w = 800.0;
    let h = w * (bounds[3] - bounds[1]) / (bounds[2] - bounds[0]).max(1e-9) + 40.0;
    let f = Frame::new(*bounds, w, h, 20.0);
    let mut s = open(w, h);
    let (bx0, by0) = f.pt(bounds[0], bounds[3]);
    let (bx1, by1) = f.pt(bounds[2], bounds[1]);
    let _ = writeln!(
        s,
        "<rect x=\"{bx0:.2}\" y=\"{by0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\"/>",
        bx1 - bx0,
        by1 - by0
    );
    for o in obstacles {
        let pts: Vec<(f64, f64)> = o.iter().map(|v| (v[0], v[1])).collect();
        let _ = writeln!(s, "<polygon points=\"{}\" fill=\"#888\"/>", f.points(&pts));
    }
    for &(id, x, y) in landmarks {
        let (px, py) = f.pt(x, y);
        let _ = writeln!(
            s,
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"3\" fill=\"#b8860b\"/><text x=\"{:.2}\" y=\"{:.2}\" font-size=\"8\">{id}</text>",
            px + 3.0,
            py - 3.0
        );
    }
    for r in &log.records {
        if let TraceRecord::Plan { path, .. } = r {
            if path.len() > 1 {
                let pts: Vec<(f64, f64)> = path.iter().map(|p| (p[0], p[1])).collect();
                let _ = writeln!(
                    s,
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"#999\" stroke-dasharray=\"4 3\"/>",
                    f.points(&pts)
                );
            }
        }
    }
    let mut modes: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    let mut truth = Vec::new();
    for r in log.steps() {
        if let TraceRecord::Step {
            truth: t, belief, ..
        } = r
        {
            truth.push((t.x, t.y));
            for m in belief {
                modes.entry(m.id).or_default().push((m.mean.x, m.mean.y));
            }
        }
    }
    for (i, (_, pts)) in modes.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        if pts.len() > 1 {
            let _ = writeln!(
                s,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"1\"/>",
                f.points(pts)
            );
        }
        let (px, py) = f.pt(pts[pts.len() - 1].0, pts[pts.len() - 1].1);
        let _ = writeln!(
            s,
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"2.5\" fill=\"{c}\"/>"
        );
    }
    if truth.len() > 1 {
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"/>",
            f.points(&truth)
        );
    }
    s + "</svg>\n"
}

/// Line chart with axes; y spans `y_range`.
fn chart(
    title: &str,
    series: &[(String, Vec<(f64, f64)>)],
    y_range: (f64, f64),
    step: bool,
) -> String {
    let (w, h) = (800.0, 400.0);
    let mut s = open(w, h);
    let _ = writeln!(
        s,
        "<text x=\"400\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>"
    );
    let t_max = series
        .iter()
        .flat_map(|(_, p)| p.iter().map(|q| q.0))
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let f = Frame::new([0.0, y_range.0, t_max, y_range.1], w, h, 40.0);
    let (ax0, ay0) = f.pt(0.0, y_range.0);
    let (ax1, ay1) = f.pt(t_max, y_range.1);
    let _ = writeln!(
        s,
        "<polyline points=\"{ax0:.2},{ay1:.2} {ax0:.2},{ay0:.2} {ax1:.2},{ay0:.2}\" fill=\"none\" stroke=\"black\"/>"
    );
    let _ = writeln!(s, "<text x=\"{ax1:.2}\" y=\"{:.2}\" font-size=\"10\" text-anchor=\"end\">t = {t_max:.1} s</text>", ay0 + 15.0);
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{ay1:.2}\" font-size=\"10\" text-anchor=\"end\">{:.2}</text>",
        ax0 - 4.0,
        y_range.1
    );
    let _ = writeln!(
        s,
        "<text x=\"{:.2}\" y=\"{ay0:.2}\" font-size=\"10\" text-anchor=\"end\">{:.2}</text>",
        ax0 - 4.0,
        y_range.0
    );
    for (i, (label, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let c = PALETTE[i % PALETTE.len()];
        let drawn: Vec<(f64, f64)> = if step {
            let mut v = Vec::with_capacity(pts.len() * 2);
            for (k, p) in pts.iter().enumerate() {
                if k > 0 {
                    v.push((p.0, pts[k - 1].1));
                }
                v.push(*p);
            }
            v
        } else {
            pts.clone()
        };
        let last = pts[pts.len() - 1].1;
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\"><title>{label}, final {last}</title></polyline>",
            f.points(&drawn)
        );
    }
    s + "</svg>\n"
}

fn weights(log: &TraceLog) -> String {
    let mut by_id: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
    for r in log.steps() {
        if let TraceRecord::Step { t, belief, .. } = r {
            for m in belief {
                by_id.entry(m.id).or_default().push((*t, m.weight));
            }
        }
    }
    let series: Vec<(String, Vec<(f64, f64)>)> = by_id
        .into_iter()
        .map(|(id, p)| (format!("mode {id}"), p))
        .collect();
    chart("mode weights", &series, (0.0, 1.0), false)
}

fn mode_count(log: &TraceLog) -> String {
    let pts: Vec<(f64, f64)> = log
        .steps()
        .filter_map(|r| match r {
            TraceRecord::Step { t, belief, .. } => Some((*t, belief.len() as f64)),
            _ => None,
        })
        .collect();
    let top = pts.iter().map(|p| p.1).fold(1.0f64, f64::max);
    chart(
        "mode count",
        &[("modes".to_string(), pts)],
        (0.0, top),
        true,
    )
}
