//! Static SVG plots for n = 2: a body with an outscribed parallelogram and
//! its support points, or a norm's unit ball with the basis vectors.

use crate::frames::Frame;
use crate::geometry::{BodyOracle, NormOracle};
use crate::parallelotope::{outscribe, ParallelotopeError};
use nalgebra::DVector;
use std::fmt::Write as _;

const CANVAS: f64 = 640.0;

struct Canvas {
    shapes: String,
    min: [f64; 2],
    max: [f64; 2],
}

impl Canvas {
    fn new() -> Self {
        Canvas { shapes: String::new(), min: [f64::INFINITY; 2], max: [f64::NEG_INFINITY; 2] }
    }

    fn cover(&mut self, p: &DVector<f64>) {
        // y is flipped so the mathematical orientation matches the screen
        let (x, y) = (p[0], -p[1]);
        self.min[0] = self.min[0].min(x);
        self.min[1] = self.min[1].min(y);
        self.max[0] = self.max[0].max(x);
        self.max[1] = self.max[1].max(y);
    }

    fn polyline(&mut self, points: &[DVector<f64>], stroke: &str, close: bool, width: f64) {
        let mut path = String::new();
        for (i, p) in points.iter().enumerate() {
            self.cover(p);
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(path, "{cmd}{:.6} {:.6} ", p[0], -p[1]);
        }
        if close {
            path.push('Z');
        }
        let _ = writeln!(
            self.shapes,
            r#"  <path d="{path}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn dot(&mut self, p: &DVector<f64>, fill: &str, r: f64) {
        self.cover(p);
        let _ = writeln!(
            self.shapes,
            r#"  <circle cx="{:.6}" cy="{:.6}" r="{r}" fill="{fill}"/>"#,
            p[0], -p[1]
        );
    }

    fn arrow(&mut self, tip: &DVector<f64>, stroke: &str) {
        self.cover(tip);
        let _ = writeln!(
            self.shapes,
            r#"  <line x1="0" y1="0" x2="{:.6}" y2="{:.6}" stroke="{stroke}" stroke-width="0.02"/>"#,
            tip[0], -tip[1]
        );
        self.dot(tip, stroke, 0.035);
    }

    fn render(self) -> String {
        let margin = 0.1 * (self.max[0] - self.min[0]).max(self.max[1] - self.min[1]).max(1.0);
        let w = self.max[0] - self.min[0] + 2.0 * margin;
        let h = self.max[1] - self.min[1] + 2.0 * margin;
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS}\" height=\"{CANVAS}\" \
             viewBox=\"{:.6} {:.6} {:.6} {:.6}\">\n{}</svg>\n",
            self.min[0] - margin,
            self.min[1] - margin,
            w,
            h,
            self.shapes
        )
    }
}

fn directions(samples: usize) -> impl Iterator<Item = DVector<f64>> {
    (0..samples).map(move |k| {
        let theta = std::f64::consts::TAU * k as f64 / samples as f64;
        DVector::from_column_slice(&[theta.cos(), theta.sin()])
    })
}

/// Body boundary (traced by support points), the outscribed parallelogram,
/// and the four support points.
pub fn parallelotope_svg(
    body: &BodyOracle,
    frame: &Frame,
    samples: usize,
) -> Result<String, ParallelotopeError> {
    let p = outscribe(body, frame)?;
    let mut canvas = Canvas::new();
    let boundary: Vec<DVector<f64>> = directions(samples)
        .map(|d| body.support(&d).map(|e| e.point))
        .collect::<Result<_, _>>()?;
    canvas.polyline(&boundary, "#2266cc", true, 0.02);
    let verts = p.vertices();
    let quad = [verts[0].clone(), verts[1].clone(), verts[3].clone(), verts[2].clone()];
    canvas.polyline(&quad, "#222222", true, 0.02);
    for (p_minus, p_plus) in &p.support_points {
        canvas.dot(p_minus, "#cc3322", 0.04);
        canvas.dot(p_plus, "#cc3322", 0.04);
    }
    Ok(canvas.render())
}

/// Unit ball of the norm with the frame vectors drawn as arrows.
pub fn bj_svg(norm: &NormOracle, frame: &Frame, samples: usize) -> Result<String, crate::bj::BjError> {
    let mut canvas = Canvas::new();
    let boundary: Vec<DVector<f64>> = directions(samples)
        .map(|d| norm.value(&d).map(|len| d / len))
        .collect::<Result<_, _>>()?;
    canvas.polyline(&boundary, "#2266cc", true, 0.02);
    for v in frame.vectors() {
        canvas.arrow(v, "#117733");
    }
    Ok(canvas.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frames::Normalization;
    use crate::geometry::{ConvexBodySpec, NormSpec};
    use std::sync::Arc;

    #[test]
    fn svg_documents_contain_expected_elements() {
        let body = ConvexBodySpec::WeightedPBall { p: 4.0, weights: vec![1.0, 2.0] }
            .build()
            .unwrap();
        let frame = Frame::new(
            vec![
                DVector::from_column_slice(&[1.0, 0.0]),
                DVector::from_column_slice(&[0.0, 1.0]),
            ],
            Normalization::Euclidean,
        )
        .unwrap();
        let svg = parallelotope_svg(&body, &frame, 128).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.matches("<circle").count() == 4);
        assert!(svg.matches("<path").count() == 2);

        let norm = Arc::new(NormSpec::WeightedPNorm { p: 4.0, weights: None }.build().unwrap());
        let nf = Frame::renormalized(
            vec![
                DVector::from_column_slice(&[1.0, 0.0]),
                DVector::from_column_slice(&[0.0, 1.0]),
            ],
            Normalization::Norm(norm.clone()),
        )
        .unwrap();
        let svg = bj_svg(&norm, &nf, 128).unwrap();
        assert!(svg.contains("<line"));
        assert!(svg.ends_with("</svg>\n"));
    }
}
