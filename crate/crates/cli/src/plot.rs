//! Static SVG rendering of aggregated best-so-far curves.

use std::path::Path;

use plotters::prelude::*;

use seqbo::loops::CurvePoint;

pub fn render_svg(path: &Path, points: &[CurvePoint]) -> Result<(), String> {
    let err = |e: &dyn std::fmt::Display| format!("plotting to {}: {e}", path.display());
    if points.is_empty() {
        return Err(err(&"no points"));
    }
    let x_max = points.iter().map(|p| p.iteration).max().unwrap_or(0).max(1);
    let lo = points.iter().map(|p| p.min).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.max).fold(f64::NEG_INFINITY, f64::max);
    let pad = ((hi - lo) * 0.05).max(1e-6);

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(0..x_max, (lo - pad)..(hi + pad))
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc("iteration")
        .y_desc("best value so far")
        .draw()
        .map_err(|e| err(&e))?;

    type Series = (&'static str, RGBColor, fn(&CurvePoint) -> f64);
    let series: [Series; 3] = [
        ("mean", BLUE, |p| p.mean),
        ("min", GREEN, |p| p.min),
        ("max", RED, |p| p.max),
    ];
    for (label, color, get) in series {
        chart
            .draw_series(LineSeries::new(points.iter().map(|p| (p.iteration, get(p))), color))
            .map_err(|e| err(&e))?
            .label(label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))
}
