//! SVG plots drawn from the CSV files the other commands write.

use std::collections::BTreeMap;
use std::path::Path;

use nnoma_core::experiments::Panel;
use plotters::coord::combinators::LogCoord;
use plotters::coord::ranged1d::ValueFormatter;
use plotters::coord::types::RangedCoordf64;
use plotters::prelude::*;
use serde::Deserialize;

type Lin = RangedCoordf64;
type Log = LogCoord<f64>;
type PlotResult = Result<(), Box<dyn std::error::Error>>;

#[derive(Debug, Deserialize)]
struct FigureCsvRow {
    panel: String,
    series: String,
    x: f64,
    analytic: Option<f64>,
    asymptotic: Option<f64>,
    mc: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct SnapshotCsvRow {
    kind: String,
    rho: f64,
    theta: f64,
    x: f64,
    y: f64,
}

#[derive(Debug, Default)]
struct Series {
    analytic: Vec<(f64, f64)>,
    asymptotic: Vec<(f64, f64)>,
    mc: Vec<(f64, f64)>,
}

fn read_rows<T: for<'de> Deserialize<'de>>(
    path: &Path,
) -> Result<Vec<T>, Box<dyn std::error::Error>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<Vec<T>, _>>()?)
}

/// Smallest value drawn on a log axis; exact zeros are lifted to it.
const LOG_FLOOR: f64 = 1e-6;

fn bounds(values: impl Iterator<Item = f64>, log: bool) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values {
        let v = if log { v.max(LOG_FLOOR) } else { v };
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return if log { (LOG_FLOOR, 1.0) } else { (0.0, 1.0) };
    }
    if log {
        (lo / 1.5, (hi * 1.5).min(1.5))
    } else {
        let pad = ((hi - lo) * 0.05).max(1e-9);
        (lo - pad, hi + pad)
    }
}

pub fn figure_panel(csv_path: &Path, title: &str, panel: &Panel, out: &Path) -> PlotResult {
    let rows: Vec<FigureCsvRow> = read_rows(csv_path)?;
    let mut series: BTreeMap<String, Series> = BTreeMap::new();
    for r in rows.iter().filter(|r| r.panel == panel.name) {
        let s = series.entry(r.series.clone()).or_default();
        let fix = |v: f64| if panel.log_y { v.max(LOG_FLOOR) } else { v };
        if let Some(v) = r.analytic {
            s.analytic.push((r.x, fix(v)));
        }
        if let Some(v) = r.asymptotic {
            s.asymptotic.push((r.x, fix(v)));
        }
        if let Some(v) = r.mc {
            s.mc.push((r.x, fix(v)));
        }
    }
    let xs = series
        .values()
        .flat_map(|s| s.analytic.iter().chain(&s.mc).map(|p| p.0));
    let (x0, x1) = bounds(xs, panel.log_x);
    let ys = series.values().flat_map(|s| {
        s.analytic
            .iter()
            .chain(&s.asymptotic)
            .chain(&s.mc)
            .map(|p| p.1)
    });
    let (y0, y1) = bounds(ys, panel.log_y);

    let root = SVGBackend::new(out, (800, 600)).into_drawing_area();
    root.fill(&WHITE)?;
    let caption = format!("{title} ({})", panel.name);
    match (panel.log_x, panel.log_y) {
        (false, false) => draw::<Lin, Lin>(
            &root,
            &caption,
            panel,
            (x0..x1).into(),
            (y0..y1).into(),
            &series,
        ),
        (false, true) => draw::<Lin, Log>(
            &root,
            &caption,
            panel,
            (x0..x1).into(),
            (y0..y1).log_scale().into(),
            &series,
        ),
        (true, false) => draw::<Log, Lin>(
            &root,
            &caption,
            panel,
            (x0..x1).log_scale().into(),
            (y0..y1).into(),
            &series,
        ),
        (true, true) => draw::<Log, Log>(
            &root,
            &caption,
            panel,
            (x0..x1).log_scale().into(),
            (y0..y1).log_scale().into(),
            &series,
        ),
    }?;
    root.present()?;
    Ok(())
}

fn draw<X, Y>(
    root: &DrawingArea<SVGBackend<'_>, plotters::coord::Shift>,
    caption: &str,
    panel: &Panel,
    x: X,
    y: Y,
    series: &BTreeMap<String, Series>,
) -> PlotResult
where
    X: Ranged<ValueType = f64> + ValueFormatter<f64>,
    Y: Ranged<ValueType = f64> + ValueFormatter<f64>,
{
    let mut chart = ChartBuilder::on(root)
        .caption(caption, ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(45)
        .y_label_area_size(70)
        .build_cartesian_2d(x, y)?;
    chart
        .configure_mesh()
        .x_desc(panel.x_label)
        .y_desc(panel.y_label)
        .draw()?;
    for (i, (name, s)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(
                s.analytic.iter().copied(),
                color.stroke_width(2),
            ))?
            .label(format!("{name} analysis"))
            .legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2))
            });
        if !s.asymptotic.is_empty() {
            chart
                .draw_series(DashedLineSeries::new(
                    s.asymptotic.iter().copied(),
                    6,
                    4,
                    color.stroke_width(1),
                ))?
                .label(format!("{name} asymptotic"))
                .legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(1))
                });
        }
        if !s.mc.is_empty() {
            chart
                .draw_series(
                    s.mc.iter()
                        .map(|&p| Circle::new(p, 4, color.stroke_width(1))),
                )?
                .label(format!("{name} simulation"))
                .legend(move |(x, y)| Circle::new((x + 10, y), 4, color.stroke_width(1)));
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    Ok(())
}

pub fn snapshot(csv_path: &Path, half_width: f64, out: &Path) -> PlotResult {
    let rows: Vec<SnapshotCsvRow> = read_rows(csv_path)?;
    let root = SVGBackend::new(out, (800, 800)).into_drawing_area();
    root.fill(&WHITE)?;
    let w = half_width;
    let mut chart = ChartBuilder::on(&root)
        .caption("Network realization", ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(-w..w, -w..w)?;
    chart
        .configure_mesh()
        .x_desc("x (m)")
        .y_desc("y (m)")
        .draw()?;
    let reach = 3.0 * w;
    for r in rows.iter().filter(|r| r.kind == "line") {
        let (s, c) = r.theta.sin_cos();
        let at = |u: f64| (r.rho * c - u * s, r.rho * s + u * c);
        chart.plotting_area().draw(&PathElement::new(
            vec![at(-reach), at(reach)],
            BLACK.mix(0.4),
        ))?;
    }
    let inside = |r: &&SnapshotCsvRow| r.x.abs() <= w && r.y.abs() <= w;
    chart
        .draw_series(
            rows.iter()
                .filter(|r| r.kind == "bs")
                .filter(inside)
                .map(|r| TriangleMarker::new((r.x, r.y), 5, BLUE.filled())),
        )?
        .label("base station")
        .legend(|(x, y)| TriangleMarker::new((x + 10, y), 5, BLUE.filled()));
    chart
        .draw_series(
            rows.iter()
                .filter(|r| r.kind == "user")
                .filter(inside)
                .map(|r| Circle::new((r.x, r.y), 3, RED.filled())),
        )?
        .label("user")
        .legend(|(x, y)| Circle::new((x + 10, y), 3, RED.filled()));
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(())
}
