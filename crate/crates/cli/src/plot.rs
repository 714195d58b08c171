//! Static SVG convergence plots.

use std::path::Path;

use anyhow::{anyhow, Result};
use plotters::coord::Shift;
use plotters::prelude::*;
use trajopt::solvers::ConvergenceRecord;

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Iterations,
    OracleCalls,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Objective,
    GradientNorm,
}

impl Quantity {
    fn label(self) -> &'static str {
        match self {
            Self::Objective => "f",
            Self::GradientNorm => "||grad f||",
        }
    }
}

fn series(record: &ConvergenceRecord, x: Axis, y: Quantity) -> Vec<(f64, f64)> {
    record
        .rows
        .iter()
        .map(|r| {
            let xv = match x {
                Axis::Iterations => r.k as f64,
                Axis::OracleCalls => r.oracle_calls as f64,
            };
            let yv = match y {
                Quantity::Objective => r.f,
                Quantity::GradientNorm => r.grad_norm,
            };
            (xv, yv)
        })
        .filter(|(_, y)| y.is_finite() && *y > 0.0)
        .collect()
}

fn draw_panel<DB: DrawingBackend>(
    area: &DrawingArea<DB, Shift>,
    records: &[&ConvergenceRecord],
    x: Axis,
    y: Quantity,
) -> Result<()>
where
    DB::ErrorType: 'static,
{
    let all: Vec<Vec<(f64, f64)>> = records.iter().map(|r| series(r, x, y)).collect();
    let points = all.iter().flatten();
    let x_max = points.clone().map(|p| p.0).fold(1.0, f64::max);
    let (y_min, y_max) = points.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.1), hi.max(p.1)));
    let (y_min, y_max) = if y_min.is_finite() { (y_min, y_max.max(y_min * 1.01)) } else { (1e-12, 1.0) };
    let x_label = match x {
        Axis::Iterations => "iteration",
        Axis::OracleCalls => "oracle calls",
    };
    let mut chart = ChartBuilder::on(area)
        .margin(12)
        .x_label_area_size(35)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..x_max, (y_min * 0.8..y_max * 1.25).log_scale())
        .map_err(|e| anyhow!("{e}"))?;
    chart
        .configure_mesh()
        .x_desc(x_label)
        .y_desc(y.label())
        .y_label_formatter(&|v| format!("{v:.0e}"))
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    for (i, (record, pts)) in records.iter().zip(all).enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        chart
            .draw_series(LineSeries::new(pts, color.stroke_width(2)))
            .map_err(|e| anyhow!("{e}"))?
            .label(record.solver.clone())
            .legend(move |(px, py)| PathElement::new(vec![(px, py), (px + 18, py)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

/// Single-panel plot of one quantity against iterations, log-scale `y`.
pub fn write_trace_plot(path: &Path, record: &ConvergenceRecord, quantity: Quantity) -> Result<()> {
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    draw_panel(&root, &[record], Axis::Iterations, quantity)?;
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}

/// 2x2 grid: `f` and `||grad f||` against iterations and oracle calls.
pub fn write_comparison_plot(path: &Path, records: &[&ConvergenceRecord]) -> Result<()> {
    let root = SVGBackend::new(path, (1280, 960)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| anyhow!("{e}"))?;
    let panels = root.split_evenly((2, 2));
    let layout = [
        (Axis::Iterations, Quantity::Objective),
        (Axis::OracleCalls, Quantity::Objective),
        (Axis::Iterations, Quantity::GradientNorm),
        (Axis::OracleCalls, Quantity::GradientNorm),
    ];
    for (area, (x, y)) in panels.iter().zip(layout) {
        draw_panel(area, records, x, y)?;
    }
    root.present().map_err(|e| anyhow!("{e}"))?;
    Ok(())
}
