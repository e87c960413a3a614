mod common;

use common::*;
use rhombot::svg::render_frame;
use rhombot::trajectory::{frames_close, read_frames, write_frames};
use rhombot_core::engine::{execute_morph, run_script};
use rhombot_core::{FrameEvent, SimFrame};

fn triangle_frames() -> Vec<SimFrame> {
    let (_, tree, config) = load("triangle.toml");
    let out = run_script(&tree, &ops("triangle.script.toml", &config), &config);
    assert!(out.failure.is_none());
    out.frames
}

#[test]
fn trajectory_reads_back_within_precision() {
    let frames = triangle_frames();
    let mut buf = Vec::new();
    write_frames(&mut buf, &frames).unwrap();
    assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), frames.len());
    let back = read_frames(&buf[..]).unwrap();
    assert_eq!(back.len(), frames.len());
    for (a, b) in frames.iter().zip(&back) {
        assert!(frames_close(a, b, 1e-9), "t={}", a.time);
    }
}

#[test]
fn trajectory_records_events_and_sigma() {
    let frames = triangle_frames();
    let mut buf = Vec::new();
    write_frames(&mut buf, &frames).unwrap();
    let text = String::from_utf8(buf).unwrap();
    for ev in ["\"morph\"", "\"connect\"", "\"disconnect\"", "\"reparent\""] {
        assert!(text.contains(ev), "{ev}");
    }
    assert!(text.lines().all(|l| l.contains("\"sigma\"") && l.contains("\"time\"")));
}

#[test]
fn bad_trajectory_line_is_located() {
    let err = read_frames("{\"time\": 0}\n".as_bytes()).unwrap_err();
    assert!(matches!(err, rhombot::Error::Syntax { line: 1, .. }), "{err}");
}

#[test]
fn frame_count_matches_morph_output() {
    let (_, tree, config) = load("triangle.toml");
    let out = execute_morph(&tree, &[], config.morph_rate, &config).unwrap();
    let mut buf = Vec::new();
    write_frames(&mut buf, &out.frames).unwrap();
    assert_eq!(read_frames(&buf[..]).unwrap().len(), out.frames.len());
}

#[test]
fn single_module_svg_has_one_rhombus() {
    let (_, tree, _) = load("single.toml");
    let svg = render_frame(&SimFrame::capture(&tree, 0.0, FrameEvent::Morph));
    assert!(svg.starts_with("<svg"));
    assert!(svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<polygon").count(), 1);
    for k in 0..4 {
        assert!(svg.contains(&format!(">E{k}</text>")));
    }
    assert_eq!(svg.matches("class=\"root\"").count(), 1);
}

#[test]
fn square_svg_draws_four_modules_and_four_connections() {
    let (_, tree, _) = load("square.toml");
    let svg = render_frame(&SimFrame::capture(&tree, 0.0, FrameEvent::Morph));
    assert_eq!(svg.matches("<polygon").count(), 4);
    assert_eq!(svg.matches("class=\"connection").count(), 4);
    assert_eq!(svg.matches("connection loop").count(), 1);
}

#[test]
fn svg_is_byte_identical_across_exports() {
    let frames = triangle_frames();
    let a: Vec<String> = frames.iter().map(render_frame).collect();
    let b: Vec<String> = frames.iter().map(render_frame).collect();
    assert_eq!(a, b);
    assert!(a.iter().all(|s| !s.contains("-0.000")));
}

#[test]
fn svg_uses_500_px_per_meter_with_y_up() {
    // a 90 degree module at the origin spans 0.28 m = 140 px each way
    let (_, tree, _) = load("single.toml");
    let svg = render_frame(&SimFrame::capture(&tree, 0.0, FrameEvent::Morph));
    let points = svg.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
    let pts: Vec<(f64, f64)> = points
        .split(' ')
        .map(|p| {
            let (x, y) = p.split_once(',').unwrap();
            (x.parse().unwrap(), y.parse().unwrap())
        })
        .collect();
    // A (-a, 0) is bottom-left, so it has the largest pixel y
    let (ax, ay) = pts[0];
    let (cx, cy) = pts[2];
    assert!((cx - ax - 140.0).abs() < 1e-3);
    assert!((ay - cy - 140.0).abs() < 1e-3);
}
