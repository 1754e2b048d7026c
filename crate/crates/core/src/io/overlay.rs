//! SVG overlays: fire boxes in red, context objects in green, and a red
//! proximity line labeled with its metric distance for every fire/object pair.
//!
//! Lines for alerting pairs are solid and heavy; the rest are thin and dashed.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use super::config::OverlayStyle;
use super::wire::format_real;
use crate::geometry::centroid;
use crate::model::{BBox, FrameRecord, RiskReport};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OverlayError {
    #[error("report for frame {report_frame} does not match frame {frame}")]
    MismatchedReport { frame: u64, report_frame: u64 },
    #[error("pair ({fire_index}, {object_index}) does not exist in frame {frame}")]
    PairOutOfRange {
        frame: u64,
        fire_index: usize,
        object_index: usize,
    },
}

pub fn overlay_file_name(frame_id: u64) -> String {
    format!("overlay_{frame_id}.svg")
}

fn rect(out: &mut String, class: &str, stroke: &str, b: &BBox) {
    let _ = writeln!(
        out,
        r#"<rect class="{class}" x="{}" y="{}" width="{}" height="{}" fill="none" stroke="{stroke}" stroke-width="2"/>"#,
        format_real(b.x),
        format_real(b.y),
        format_real(b.w),
        format_real(b.h),
    );
}

/// Renders one frame's annotations. Output is byte-for-byte deterministic.
pub fn render_overlay(
    frame: &FrameRecord,
    report: &RiskReport,
    style: OverlayStyle,
) -> Result<String, OverlayError> {
    if frame.frame_id != report.frame_id {
        return Err(OverlayError::MismatchedReport {
            frame: frame.frame_id,
            report_frame: report.frame_id,
        });
    }
    let alerting: BTreeSet<(usize, usize)> = report
        .alerts
        .iter()
        .map(|a| (a.fire_index, a.object_index))
        .collect();

    let mut segments = Vec::with_capacity(report.pairs.len());
    for p in &report.pairs {
        let (Some(fire), Some(obj)) = (frame.fires.get(p.fire_index), frame.objects.get(p.object_index))
        else {
            return Err(OverlayError::PairOutOfRange {
                frame: frame.frame_id,
                fire_index: p.fire_index,
                object_index: p.object_index,
            });
        };
        let from = centroid(&fire.bbox);
        let to = centroid(&obj.bbox);
        let to_y = match style {
            OverlayStyle::Direct => to.y,
            OverlayStyle::Horizontal => from.y,
        };
        let alert = alerting.contains(&(p.fire_index, p.object_index));
        segments.push((from.x, from.y, to.x, to_y, alert, p.distance_m));
    }

    let (w, h) = (frame.width_px, frame.height_px);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    for f in &frame.fires {
        rect(&mut out, "fire", "red", &f.bbox);
    }
    for o in &frame.objects {
        rect(&mut out, "object", "green", &o.bbox);
    }
    for &(x1, y1, x2, y2, alert, _) in &segments {
        let stroke = if alert {
            r#"class="proximity alert" stroke="red" stroke-width="3""#
        } else {
            r#"class="proximity" stroke="red" stroke-width="1" stroke-dasharray="6 4""#
        };
        let _ = writeln!(
            out,
            r#"<line {stroke} x1="{}" y1="{}" x2="{}" y2="{}"/>"#,
            format_real(x1),
            format_real(y1),
            format_real(x2),
            format_real(y2),
        );
    }
    for &(x1, y1, x2, y2, _, d_m) in &segments {
        let _ = writeln!(
            out,
            r#"<text class="distance" x="{}" y="{}" fill="red" font-family="sans-serif" font-size="14" text-anchor="middle">{d_m:.2} m</text>"#,
            format_real((x1 + x2) / 2.0),
            format_real((y1 + y2) / 2.0 - 4.0),
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CalibrationScale, ContextObject, FireInstance, RiskParams, ScaleSource};
    use crate::risk::assess_frame;

    fn scene() -> FrameRecord {
        FrameRecord {
            fires: vec![FireInstance {
                bbox: BBox::new(100.0, 200.0, 100.0, 100.0),
                confidence: 0.9,
                mask_area_px: None,
            }],
            objects: vec![ContextObject {
                // Centroid (300, 450): 150 right, 200 down from the fire, 250 px apart.
                bbox: BBox::new(280.0, 400.0, 40.0, 100.0),
                class_label: "person".into(),
                confidence: 0.9,
            }],
            ..FrameRecord::empty(5, 640, 480)
        }
    }

    fn report(frame: &FrameRecord) -> RiskReport {
        let k = CalibrationScale::new(50.0, ScaleSource::Manual).unwrap();
        assess_frame(frame, k, &RiskParams::default()).unwrap()
    }

    #[test]
    fn empty_frame_has_no_shapes() {
        let frame = FrameRecord::empty(0, 320, 240);
        let svg = render_overlay(&frame, &report(&frame), OverlayStyle::Direct).unwrap();
        assert_eq!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"320\" height=\"240\" viewBox=\"0 0 320 240\">\n</svg>\n"
        );
    }

    #[test]
    fn one_pair_one_labeled_line() {
        let frame = scene();
        let svg = render_overlay(&frame, &report(&frame), OverlayStyle::Direct).unwrap();
        assert_eq!(svg.matches("<line").count(), 1);
        assert!(svg.contains(">5.00 m</text>"));
        assert!(svg.contains(r#"x1="150" y1="250" x2="300" y2="450""#));
        let fire_at = svg.find("class=\"fire\"").unwrap();
        let obj_at = svg.find("class=\"object\"").unwrap();
        let line_at = svg.find("<line").unwrap();
        let text_at = svg.find("<text").unwrap();
        assert!(fire_at < obj_at && obj_at < line_at && line_at < text_at);
    }

    #[test]
    fn horizontal_style_keeps_fire_height() {
        let frame = scene();
        let svg = render_overlay(&frame, &report(&frame), OverlayStyle::Horizontal).unwrap();
        assert!(svg.contains(r#"x1="150" y1="250" x2="300" y2="250""#));
    }

    #[test]
    fn mismatched_report_is_rejected() {
        let frame = scene();
        let mut r = report(&frame);
        r.frame_id = 6;
        assert_eq!(
            render_overlay(&frame, &r, OverlayStyle::Direct),
            Err(OverlayError::MismatchedReport {
                frame: 5,
                report_frame: 6
            })
        );
    }

    #[test]
    fn rendering_is_deterministic() {
        let frame = scene();
        let r = report(&frame);
        assert_eq!(
            render_overlay(&frame, &r, OverlayStyle::Direct).unwrap(),
            render_overlay(&frame, &r, OverlayStyle::Direct).unwrap()
        );
    }
}
