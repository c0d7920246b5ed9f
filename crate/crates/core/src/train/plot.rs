use image::{Rgb, RgbImage};
use imageproc::drawing::{draw_hollow_rect_mut, draw_line_segment_mut};
use imageproc::rect::Rect;

use super::log::TrainingLog;

/// Loss and validation-F1 series of a log, `(epoch, value)` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Curves {
    pub loss: Vec<(f64, f64)>,
    pub f1: Vec<(f64, f64)>,
}

pub fn curves(log: &TrainingLog) -> Curves {
    Curves {
        loss: log.records.iter().map(|r| (r.epoch as f64, r.loss)).collect(),
        f1: log
            .records
            .iter()
            .filter_map(|r| r.val.as_ref().map(|v| (r.epoch as f64, v.f1)))
            .collect(),
    }
}

const PANEL_W: u32 = 640;
const PANEL_H: u32 = 240;
const MARGIN: f32 = 20.0;

fn panel(img: &mut RgbImage, top: u32, pts: &[(f64, f64)], y_range: Option<(f64, f64)>, color: Rgb<u8>) {
    let frame = Rect::at(MARGIN as i32, top as i32 + MARGIN as i32)
        .of_size(PANEL_W - 2 * MARGIN as u32, PANEL_H - 2 * MARGIN as u32);
    draw_hollow_rect_mut(img, frame, Rgb([90, 90, 90]));
    if pts.is_empty() {
        return;
    }
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
    let (y0, y1) = y_range.unwrap_or_else(|| {
        pts.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)))
    });
    let sx = |x: f64| {
        let span = if x1 > x0 { x1 - x0 } else { 1.0 };
        MARGIN + ((x - x0) / span) as f32 * (PANEL_W as f32 - 2.0 * MARGIN)
    };
    let sy = |y: f64| {
        let span = if y1 > y0 { y1 - y0 } else { 1.0 };
        top as f32 + PANEL_H as f32 - MARGIN - ((y - y0) / span) as f32 * (PANEL_H as f32 - 2.0 * MARGIN)
    };
    if pts.len() == 1 {
        let (x, y) = (sx(pts[0].0), sy(pts[0].1));
        draw_line_segment_mut(img, (x - 2.0, y), (x + 2.0, y), color);
        return;
    }
    for w in pts.windows(2) {
        draw_line_segment_mut(img, (sx(w[0].0), sy(w[0].1)), (sx(w[1].0), sy(w[1].1)), color);
    }
}

/// Two stacked panels: training loss (top, autoscaled) and validation F1
/// (bottom, 0..1).
pub fn render(c: &Curves) -> RgbImage {
    let mut img = RgbImage::from_pixel(PANEL_W, 2 * PANEL_H, Rgb([255, 255, 255]));
    panel(&mut img, 0, &c.loss, None, Rgb([200, 40, 40]));
    panel(&mut img, PANEL_H, &c.f1, Some((0.0, 1.0)), Rgb([40, 80, 200]));
    img
}
