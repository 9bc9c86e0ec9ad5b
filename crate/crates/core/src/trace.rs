//! Per-tick trial snapshots as JSON lines, and SVG frames drawn from them.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::BenchError;
use crate::geometry::{Point2, Rect, Segment};
use crate::world::World;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenState {
    pub shape: Rect,
    pub revealed: bool,
}

/// World and plan after one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub tick: u64,
    pub bounds: Rect,
    pub walls: Vec<Rect>,
    pub movers: Vec<Rect>,
    pub hidden: Vec<HiddenState>,
    pub robot: Point2,
    pub goal: Point2,
    /// Remaining path from the robot, empty when it is waiting.
    pub path: Vec<Point2>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tree: Option<Vec<[Point2; 2]>>,
}

impl Snapshot {
    pub fn capture(world: &World, path: &[Point2], tree: Option<Vec<Segment>>) -> Self {
        Self {
            tick: world.clock,
            bounds: world.bounds,
            walls: world.walls.clone(),
            movers: world.movers.iter().map(|m| m.shape).collect(),
            hidden: world.hidden.iter().map(|h| HiddenState { shape: h.shape, revealed: h.revealed }).collect(),
            robot: world.robot_pos,
            goal: world.goal,
            path: path.to_vec(),
            tree: tree.map(|edges| edges.into_iter().map(|s| [s.a, s.b]).collect()),
        }
    }
}

pub fn write_trace<W: Write>(mut out: W, snapshots: &[Snapshot]) -> Result<(), BenchError> {
    for s in snapshots {
        serde_json::to_writer(&mut out, s)?;
        out.write_all(b"\n").map_err(|e| BenchError::io("trace", e))?;
    }
    out.flush().map_err(|e| BenchError::io("trace", e))
}

pub fn export_trace(path: &Path, snapshots: &[Snapshot]) -> Result<(), BenchError> {
    let file = fs::File::create(path).map_err(|e| BenchError::io(path, e))?;
    write_trace(io::BufWriter::new(file), snapshots)
}

pub fn read_trace<R: BufRead>(input: R) -> Result<Vec<Snapshot>, BenchError> {
    let mut out = Vec::new();
    for line in input.lines() {
        let line = line.map_err(|e| BenchError::io("trace", e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

pub fn load_trace(path: &Path) -> Result<Vec<Snapshot>, BenchError> {
    let file = fs::File::open(path).map_err(|e| BenchError::io(path, e))?;
    read_trace(io::BufReader::new(file))
}

const SCALE: f64 = 12.0;

fn rect_svg(svg: &mut String, r: &Rect, height: f64, style: &str) {
    let min = r.min();
    let _ = writeln!(
        svg,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" {style}/>"#,
        min.x * SCALE,
        (height - r.max().y) * SCALE,
        r.width() * SCALE,
        r.height() * SCALE
    );
}

/// One SVG document per snapshot; y points up as in the world.
pub fn render_frame(s: &Snapshot) -> String {
    let (min, max) = (s.bounds.min(), s.bounds.max());
    let h = max.y;
    let px = |p: Point2| ((p.x) * SCALE, (h - p.y) * SCALE);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{:.3} {:.3} {:.3} {:.3}">"#,
        min.x * SCALE,
        (h - max.y) * SCALE,
        s.bounds.width() * SCALE,
        s.bounds.height() * SCALE
    );
    rect_svg(&mut svg, &s.bounds, h, r##"fill="#ffffff" stroke="#000000""##);
    if let Some(tree) = &s.tree {
        for [a, b] in tree {
            let (a, b) = (px(*a), px(*b));
            let _ = writeln!(
                svg,
                r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#9db8d9" stroke-width="1"/>"##,
                a.0, a.1, b.0, b.1
            );
        }
    }
    for w in &s.walls {
        rect_svg(&mut svg, w, h, r##"fill="#444444""##);
    }
    for hd in &s.hidden {
        let style = if hd.revealed { r##"fill="#c0392b""## } else { r##"fill="none" stroke="#c0392b" stroke-dasharray="4 3""## };
        rect_svg(&mut svg, &hd.shape, h, style);
    }
    for m in &s.movers {
        rect_svg(&mut svg, m, h, r##"fill="#e67e22""##);
    }
    if s.path.len() >= 2 {
        let pts: Vec<String> = s.path.iter().map(|&p| px(p)).map(|(x, y)| format!("{x:.3},{y:.3}")).collect();
        let _ = writeln!(svg, r##"<polyline points="{}" fill="none" stroke="#27ae60" stroke-width="2"/>"##, pts.join(" "));
    }
    let (gx, gy) = px(s.goal);
    let _ = writeln!(svg, r##"<circle class="goal" cx="{gx:.3}" cy="{gy:.3}" r="{:.3}" fill="#8e44ad"/>"##, 0.6 * SCALE);
    let (rx, ry) = px(s.robot);
    let _ = writeln!(svg, r##"<circle class="robot" cx="{rx:.3}" cy="{ry:.3}" r="{:.3}" fill="#2980b9"/>"##, 0.5 * SCALE);
    let _ = writeln!(svg, r#"<text x="4" y="14" font-size="12">tick {}</text>"#, s.tick);
    svg.push_str("</svg>\n");
    svg
}

pub fn render_frames(snapshots: &[Snapshot]) -> Vec<String> {
    snapshots.iter().map(render_frame).collect()
}

/// Writes `frame_00000.svg`, `frame_00001.svg`, ... into `dir`.
pub fn write_frames(dir: &Path, snapshots: &[Snapshot]) -> Result<usize, BenchError> {
    fs::create_dir_all(dir).map_err(|e| BenchError::io(dir, e))?;
    for (i, frame) in render_frames(snapshots).iter().enumerate() {
        let path = dir.join(format!("frame_{i:05}.svg"));
        fs::write(&path, frame).map_err(|e| BenchError::io(path, e))?;
    }
    Ok(snapshots.len())
}
