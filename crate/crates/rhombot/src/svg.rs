//! SVG rendering of a single frame. 1 m = 500 px, y up, origin at the lower
//! left of the drawing's bounding box.

use std::fmt::Write as _;

use rhombot_core::kinematics::{center_transform, footprint, outward_edge_frame};
use rhombot_core::{ConnectionKind, EdgeIndex, ModuleFrame, Point2, SimFrame};

pub const PX_PER_M: f64 = 500.0;
const MARGIN_PX: f64 = 40.0;

/// Formats with three decimals and never prints `-0.000`.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

struct View {
    min_x: f64,
    max_y: f64,
}

impl View {
    fn raw(&self, p: Point2) -> (f64, f64) {
        (
            (p.x - self.min_x) * PX_PER_M + MARGIN_PX,
            (self.max_y - p.y) * PX_PER_M + MARGIN_PX,
        )
    }

    fn px(&self, p: Point2) -> (String, String) {
        let (x, y) = self.raw(p);
        (num(x), num(y))
    }
}

fn outline(m: &ModuleFrame) -> Vec<Point2> {
    footprint(&m.state, &m.pose).vertices().to_vec()
}

fn edge_midpoint(m: &ModuleFrame, k: EdgeIndex) -> Point2 {
    m.pose.compose(&outward_edge_frame(&m.state, k)).position()
}

/// Renders `frame` as a standalone SVG document. Output depends only on the
/// frame, so identical frames give identical bytes.
pub fn render_frame(frame: &SimFrame) -> String {
    let all: Vec<Point2> = frame.modules.iter().flat_map(outline).collect();
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    if let Some(first) = all.first() {
        (min_x, min_y, max_x, max_y) = (first.x, first.y, first.x, first.y);
        for p in &all {
            min_x = min_x.min(p.x);
            min_y = min_y.min(p.y);
            max_x = max_x.max(p.x);
            max_y = max_y.max(p.y);
        }
    }
    let view = View { min_x, max_y };
    let w = (max_x - min_x) * PX_PER_M + 2.0 * MARGIN_PX;
    let h = (max_y - min_y) * PX_PER_M + 2.0 * MARGIN_PX;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" viewBox="0 0 {0} {1}">"#,
        num(w),
        num(h)
    );
    let _ = writeln!(
        s,
        r#"<title>t = {} s, {}</title>"#,
        num(frame.time),
        frame.event.as_str()
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    for m in &frame.modules {
        let pts: Vec<String> = outline(m)
            .into_iter()
            .map(|p| {
                let (x, y) = view.px(p);
                format!("{x},{y}")
            })
            .collect();
        let _ = writeln!(
            s,
            r##"<polygon class="module" data-id="{}" points="{}" fill="#dde6f0" stroke="#1f3b5a" stroke-width="2"/>"##,
            m.state.id.0,
            pts.join(" ")
        );
        let c = m.pose.transform_point(center_transform(&m.state).position());
        let (cx, cy) = view.px(c);
        let _ = writeln!(
            s,
            r#"<text x="{cx}" y="{cy}" font-size="16" text-anchor="middle" dominant-baseline="middle">M{}</text>"#,
            m.state.id.0
        );
        for k in 0..4u8 {
            let e = EdgeIndex::new(k).expect("0..4 is a valid edge");
            let mid = edge_midpoint(m, e);
            // pull the label a little toward the center
            let p = Point2::new(mid.x + 0.25 * (c.x - mid.x), mid.y + 0.25 * (c.y - mid.y));
            let (x, y) = view.px(p);
            let _ = writeln!(
                s,
                r##"<text x="{x}" y="{y}" font-size="11" fill="#555" text-anchor="middle" dominant-baseline="middle">E{k}</text>"##
            );
        }
    }

    let by_id = |id| frame.modules.iter().find(|m| m.state.id == id);
    let mut has_parent = Vec::new();
    for c in &frame.connections {
        let (Some(a), Some(b)) = (by_id(c.module_a), by_id(c.module_b)) else {
            continue;
        };
        let pa = edge_midpoint(a, c.edge_a);
        let pb = edge_midpoint(b, c.edge_b);
        let (x, y) = view.px(Point2::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)));
        let (fill, kind) = match c.kind {
            ConnectionKind::Tree => ("#2a9d3f", "tree"),
            ConnectionKind::Loop => ("#d9822b", "loop"),
        };
        if c.kind == ConnectionKind::Tree {
            has_parent.push(c.module_b);
        }
        let _ = writeln!(
            s,
            r#"<circle class="connection {kind}" cx="{x}" cy="{y}" r="5" fill="{fill}"/>"#
        );
    }

    // the root is the one module that is never a tree child
    if let Some(r) = frame.modules.iter().find(|m| !has_parent.contains(&m.state.id)) {
        let (x, y) = view.raw(r.pose.position());
        let _ = writeln!(
            s,
            r##"<rect class="root" x="{}" y="{}" width="10" height="10" fill="#b02a2a"/>"##,
            num(x - 5.0),
            num(y - 5.0)
        );
    }
    s.push_str("</svg>\n");
    s
}
