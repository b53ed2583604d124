//! SVG rendering of planar shape estimates.

use std::fmt::Write;

use perco_core::estimators::ShapeEstimate;

const SIZE: f64 = 480.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Hull, per-direction points with radial error bars and the l1 unit
/// diamond for every planar estimate.
pub fn shape_svg(estimates: &[ShapeEstimate]) -> Option<String> {
    let planar: Vec<&ShapeEstimate> = estimates.iter().filter(|e| e.hull.is_some()).collect();
    if planar.is_empty() {
        return None;
    }
    let reach = planar
        .iter()
        .flat_map(|e| e.boundary.iter().flatten())
        .fold(1.0f64, |m, &c| m.max(c.abs()))
        * 1.15;
    let scale = SIZE / 2.0 / reach;
    let px = |p: [f64; 2]| (SIZE / 2.0 + p[0] * scale, SIZE / 2.0 - p[1] * scale);
    let poly = |pts: &[[f64; 2]]| {
        pts.iter().map(|&p| px(p)).map(|(x, y)| format!("{x:.3},{y:.3}")).collect::<Vec<_>>().join(" ")
    };
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let (cx, cy) = px([0.0, 0.0]);
    let _ = writeln!(s, r##"<line x1="0" y1="{cy}" x2="{SIZE}" y2="{cy}" stroke="#ccc"/>"##);
    let _ = writeln!(s, r##"<line x1="{cx}" y1="0" x2="{cx}" y2="{SIZE}" stroke="#ccc"/>"##);
    let diamond = [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]];
    let _ = writeln!(
        s,
        r##"<polygon points="{}" fill="none" stroke="#888" stroke-dasharray="4 3"/>"##,
        poly(&diamond)
    );
    for (k, e) in planar.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let hull = e.hull.as_ref().expect("planar");
        let _ = writeln!(
            s,
            r#"<polygon points="{}" fill="none" stroke="{color}" stroke-width="1.5"><title>parameter {}</title></polygon>"#,
            poly(hull),
            e.parameter
        );
        for dir in &e.directions {
            let x = [dir.direction[0] as f64, dir.direction[1] as f64];
            let at = |p: f64| px([x[0] / p, x[1] / p]);
            let (mx, my) = at(dir.p_hat);
            let (ax, ay) = at(dir.p_hat + dir.stderr);
            let (bx, by) = if dir.p_hat - dir.stderr > 0.0 { at(dir.p_hat - dir.stderr) } else { (mx, my) };
            let _ = writeln!(s, r#"<line x1="{ax:.3}" y1="{ay:.3}" x2="{bx:.3}" y2="{by:.3}" stroke="{color}"/>"#);
            let _ = writeln!(s, r#"<circle cx="{mx:.3}" cy="{my:.3}" r="2.5" fill="{color}"/>"#);
        }
    }
    s.push_str("</svg>\n");
    Some(s)
}
