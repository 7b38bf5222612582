//! Static SVG bar charts for the reports.

use std::path::Path;

use plotters::prelude::*;
use plotters::style::text_anchor::{HPos, Pos, VPos};

use super::reports::{GroupRatio, ReviewerStats};
use super::AnalyticsError;
use crate::corpus::Group;

fn plot_err<E: std::fmt::Display>(e: E) -> AnalyticsError {
    AnalyticsError::Plot(e.to_string())
}

/// Vertical bars, one per label.
pub fn bar_chart_svg(path: &Path, title: &str, y_label: &str, bars: &[(String, f64)]) -> Result<(), AnalyticsError> {
    let root = SVGBackend::new(path, (900, 520)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let top = bars.iter().map(|(_, v)| *v).fold(0.0, f64::max);
    let y_max = if top > 0.0 { top * 1.1 } else { 1.0 };
    let n = bars.len().max(1);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(70)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..n as f64, 0.0..y_max)
        .map_err(plot_err)?;
    let labels: Vec<String> = bars.iter().map(|(l, _)| l.clone()).collect();
    chart
        .configure_mesh()
        .disable_x_mesh()
        .y_desc(y_label)
        .x_labels(0)
        .draw()
        .map_err(plot_err)?;
    // Bars and labels are drawn in input order so the SVG is byte-stable.
    chart
        .draw_series(bars.iter().enumerate().map(|(i, (_, v))| {
            Rectangle::new([(i as f64 + 0.1, 0.0), (i as f64 + 0.9, *v)], BLUE.mix(0.7).filled())
        }))
        .map_err(plot_err)?;
    let style = TextStyle::from(("sans-serif", 13).into_font()).pos(Pos::new(HPos::Center, VPos::Top));
    for (i, label) in labels.iter().enumerate() {
        let (x, y) = chart.backend_coord(&(i as f64 + 0.5, 0.0));
        root.draw_text(label, &style, (x, y + 8)).map_err(plot_err)?;
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

pub fn ratios_chart(path: &Path, ratios: &[GroupRatio]) -> Result<(), AnalyticsError> {
    let bars: Vec<(String, f64)> = ratios.iter().map(|r| (r.group.to_string(), r.percentage)).collect();
    bar_chart_svg(path, "Predicted comment groups", "share of comments (%)", &bars)
}

/// Functional counts of the first `limit` reviewers of the report.
pub fn reviewers_chart(path: &Path, stats: &[ReviewerStats], limit: usize) -> Result<(), AnalyticsError> {
    let bars: Vec<(String, f64)> =
        stats.iter().take(limit).map(|s| (s.reviewer_id.clone(), s.count(Group::Functional) as f64)).collect();
    bar_chart_svg(path, "Functional comments per reviewer", "comments", &bars)
}
