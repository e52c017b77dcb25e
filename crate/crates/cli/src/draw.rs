//! Minimal line drawing for the diagnostic images.

use omnidensity::raster::Raster;

pub const RED: [f32; 3] = [1.0, 0.15, 0.1];
pub const GREEN: [f32; 3] = [0.1, 0.9, 0.2];
pub const WHITE: [f32; 3] = [1.0, 1.0, 1.0];

pub fn to_rgb(r: &Raster) -> Raster {
    if r.channels == 3 {
        return r.clone();
    }
    let data = r.data.iter().flat_map(|&v| [v, v, v]).collect();
    Raster::from_data(r.width, r.height, 3, data).expect("same pixel count")
}

fn plot(r: &mut Raster, x: f64, y: f64, color: [f32; 3]) {
    let (xi, yi) = (x.round(), y.round());
    if xi < 0.0 || yi < 0.0 || xi >= r.width as f64 || yi >= r.height as f64 {
        return;
    }
    let px = r.pixel_mut(xi as usize, yi as usize);
    for (c, v) in px.iter_mut().zip(color) {
        *c = v;
    }
}

pub fn line(r: &mut Raster, a: (f64, f64), b: (f64, f64), color: [f32; 3]) {
    let steps = (b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil().max(1.0);
    // skip segments that wrap around an image seam
    if !steps.is_finite() || steps > (r.width + r.height) as f64 {
        return;
    }
    for i in 0..=steps as usize {
        let t = i as f64 / steps;
        plot(r, a.0 + t * (b.0 - a.0), a.1 + t * (b.1 - a.1), color);
    }
}

pub fn closed_polyline(r: &mut Raster, pts: &[(f64, f64)], color: [f32; 3]) {
    for (i, &p) in pts.iter().enumerate() {
        line(r, p, pts[(i + 1) % pts.len()], color);
    }
}

pub fn circle(r: &mut Raster, center: (f64, f64), radius: f64, color: [f32; 3]) {
    let n = ((radius * 8.0).ceil() as usize).clamp(16, 720);
    let pts: Vec<_> = (0..n)
        .map(|i| {
            let t = std::f64::consts::TAU * i as f64 / n as f64;
            (center.0 + radius * t.cos(), center.1 + radius * t.sin())
        })
        .collect();
    closed_polyline(r, &pts, color);
}
