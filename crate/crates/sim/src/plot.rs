//! SVG charts of sweep summaries.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Result, SimError};
use crate::sweep::{ClusterResults, LinkResults};

const SIZE: (u32, u32) = (960, 640);

struct Curve {
    label: String,
    points: Vec<(f64, f64)>,
    dashed: bool,
}

fn plot_err(path: &Path, e: impl std::fmt::Display) -> SimError {
    SimError::Plot { path: path.into(), message: e.to_string() }
}

fn color(i: usize) -> RGBColor {
    let c = Palette99::pick(i).to_rgba();
    RGBColor(c.0, c.1, c.2)
}

fn draw_curves(path: &Path, title: &str, y_desc: &str, y_max: f64, curves: &[Curve]) -> Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(64)
        .build_cartesian_2d(0f64..1f64, 0f64..y_max)
        .map_err(|e| plot_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("message arrival probability r")
        .y_desc(y_desc)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    let mut solid = 0;
    for curve in curves {
        let pts = curve.points.clone();
        if curve.dashed {
            let style = BLACK.stroke_width(2);
            chart
                .draw_series(DashedLineSeries::new(pts, 8, 5, style))
                .map_err(|e| plot_err(path, e))?
                .label(&curve.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 24, y)], style));
        } else {
            let style = color(solid).stroke_width(2);
            solid += 1;
            chart
                .draw_series(LineSeries::new(pts, style))
                .map_err(|e| plot_err(path, e))?
                .label(&curve.label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 24, y)], style));
        }
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::UpperLeft)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))?;
    Ok(())
}

/// Throughput and error against r, one curve per series; the entanglement-free
/// baseline is dashed.
pub fn link_plots<R>(dir: &Path, prefix: &str, title: &str, res: &LinkResults<R>) -> Result<Vec<PathBuf>> {
    let curves = |value: &dyn Fn(&crate::sweep::LinkSummary) -> f64| -> Vec<Curve> {
        res.series
            .iter()
            .enumerate()
            .map(|(i, s)| Curve {
                label: s.label(),
                points: res.series_summary(i).map(|(r, sum)| (r, value(sum))).collect(),
                dashed: s.is_classical(),
            })
            .collect()
    };
    let throughput = curves(&|s| s.throughput.mean);
    let y_max = throughput.iter().flat_map(|c| c.points.iter().map(|p| p.1)).fold(0.0, f64::max).max(0.1) * 1.1;
    let tp_path = dir.join(format!("{prefix}_throughput.svg"));
    draw_curves(&tp_path, &format!("{title}: average throughput"), "bits per tick", y_max, &throughput)?;

    let err_path = dir.join(format!("{prefix}_error.svg"));
    draw_curves(
        &err_path,
        &format!("{title}: message error rate"),
        "message error rate",
        1.05,
        &curves(&|s| s.error.mean),
    )?;
    Ok(vec![tp_path, err_path])
}

/// Mean F1 (left axis, solid) and mean transmissions (right axis, dashed)
/// against pairs per iteration, one colour per noise setting.
pub fn cluster_plot(dir: &Path, res: &ClusterResults) -> Result<PathBuf> {
    let path = dir.join("cluster.svg");
    let x_max = res.points.iter().map(|p| p.pairs).max().unwrap_or(1).max(1) as f64;
    let tx_max = res.summary.iter().map(|s| s.transmissions.mean).fold(0.0, f64::max).max(1.0) * 1.1;
    let mut labels: Vec<&str> = Vec::new();
    for p in &res.points {
        if !labels.contains(&p.noise.label.as_str()) {
            labels.push(&p.noise.label);
        }
    }

    let root = SVGBackend::new(&path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(&path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Distributed k-means: F1 and transmissions", ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(48)
        .y_label_area_size(64)
        .right_y_label_area_size(72)
        .build_cartesian_2d(0f64..x_max, 0f64..1.05f64)
        .map_err(|e| plot_err(&path, e))?
        .set_secondary_coord(0f64..x_max, 0f64..tx_max);
    chart.configure_mesh().x_desc("pairs per iteration").y_desc("mean F1").draw().map_err(|e| plot_err(&path, e))?;
    chart.configure_secondary_axes().y_desc("mean total transmissions").draw().map_err(|e| plot_err(&path, e))?;

    for (i, label) in labels.iter().enumerate() {
        let rows: Vec<_> = res.summary.iter().filter(|s| res.points[s.point].noise.label == *label).collect();
        let f1: Vec<(f64, f64)> = rows.iter().map(|s| (res.points[s.point].pairs as f64, s.f1.mean)).collect();
        let tx: Vec<(f64, f64)> =
            rows.iter().map(|s| (res.points[s.point].pairs as f64, s.transmissions.mean)).collect();
        let style = color(i).stroke_width(2);
        chart
            .draw_series(LineSeries::new(f1, style))
            .map_err(|e| plot_err(&path, e))?
            .label(format!("F1, {label}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 24, y)], style));
        chart
            .draw_secondary_series(DashedLineSeries::new(tx, 8, 5, style))
            .map_err(|e| plot_err(&path, e))?
            .label(format!("transmissions, {label}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 10, y)], style));
    }
    chart
        .configure_series_labels()
        .position(SeriesLabelPosition::LowerLeft)
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| plot_err(&path, e))?;
    root.present().map_err(|e| plot_err(&path, e))?;
    drop(chart);
    drop(root);
    Ok(path)
}
