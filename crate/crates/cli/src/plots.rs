//! Static SVG diagnostics for a finished run.

use coadapt::{Trace, Vector};
use plotters::prelude::*;
use std::path::{Path, PathBuf};

/// Samples kept per series; longer traces are thinned with a fixed stride.
const MAX_POINTS: usize = 4000;
const SIZE: (u32, u32) = (900, 500);

type Series = (String, Vec<(f64, f64)>);

fn plot_error(e: impl std::fmt::Display) -> std::io::Error {
    std::io::Error::other(e.to_string())
}

fn range(series: &[Series], pick: impl Fn(&(f64, f64)) -> f64) -> (f64, f64) {
    let (lo, hi) = series
        .iter()
        .flat_map(|(_, pts)| pts.iter().map(&pick))
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.05 };
    (lo - pad, hi + pad)
}

fn line_chart(path: &Path, title: &str, x_label: &str, y_label: &str, series: &[Series]) -> std::io::Result<()> {
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let (x0, x1) = range(series, |p| p.0);
    let (y0, y1) = range(series, |p| p.1);
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_error)?;
    chart.configure_mesh().x_desc(x_label).y_desc(y_label).draw().map_err(plot_error)?;
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_error)?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)
}

fn thin<T>(items: &[T]) -> impl Iterator<Item = &T> {
    let stride = items.len().div_ceil(MAX_POINTS).max(1);
    let last = items.len().saturating_sub(1);
    items.iter().enumerate().filter(move |(i, _)| i % stride == 0 || *i == last).map(|(_, v)| v)
}

fn component_suffix(n: usize, i: usize) -> String {
    if n == 1 {
        String::new()
    } else {
        format!("[{}]", i + 1)
    }
}

/// Writes `eps_norm.svg`, `costs.svg`, `force.svg` and `position.svg` into
/// `dir`. `desired_position` adds the closed-form target to the position plot.
pub fn emit_plots(trace: &Trace, desired_position: Option<&Vector>, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let n = trace.dim;
    let mut written = Vec::new();

    let eps: Vec<(f64, f64)> = thin(&trace.steps).map(|r| (r.t, r.eps.norm())).collect();
    let path = dir.join("eps_norm.svg");
    line_chart(&path, "Tracking error norm", "t [s]", "|eps|", &[("|eps|".into(), eps)])?;
    written.push(path);

    let costs = &trace.period_costs;
    let per = |name: &str, f: fn(&coadapt::PeriodCosts) -> f64| -> Series {
        (name.to_string(), costs.iter().map(|p| (p.period as f64, f(p))).collect())
    };
    let series = [
        per("J_c", |p| p.j_c),
        per("J_e", |p| p.j_e),
        per("J_r", |p| p.j_r),
        per("J", |p| p.j),
    ];
    let path = dir.join("costs.svg");
    line_chart(&path, "Per-period cost", "period", "cost", &series)?;
    written.push(path);

    let last = trace.period_window(trace.periods - 1);
    let mut series = Vec::new();
    for i in 0..n {
        let s = component_suffix(n, i);
        series.push((format!("f{s}"), thin(last).map(|r| (r.t, r.f[i])).collect()));
        series.push((format!("F_d{s}"), thin(last).map(|r| (r.t, r.f_d[i])).collect()));
    }
    let path = dir.join("force.svg");
    line_chart(&path, "Contact force over the final period", "t [s]", "force [N]", &series)?;
    written.push(path);

    let mut series = Vec::new();
    for i in 0..n {
        let s = component_suffix(n, i);
        series.push((format!("x{s}"), thin(&trace.steps).map(|r| (r.t, r.x[i])).collect()));
        series.push((format!("x_r{s}"), thin(&trace.steps).map(|r| (r.t, r.x_r[i])).collect()));
        if let Some(xd) = desired_position {
            let t_end = trace.steps.last().map_or(0.0, |r| r.t);
            series.push((format!("x_d{s}"), vec![(0.0, xd[i]), (t_end, xd[i])]));
        }
    }
    let path = dir.join("position.svg");
    line_chart(&path, "Position and reference", "t [s]", "position [m]", &series)?;
    written.push(path);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thinning_keeps_endpoints_and_caps_length() {
        let v: Vec<usize> = (0..60001).collect();
        let kept: Vec<usize> = thin(&v).copied().collect();
        assert!(kept.len() <= MAX_POINTS + 1);
        assert_eq!(kept[0], 0);
        assert_eq!(*kept.last().unwrap(), 60000);
        let short: Vec<usize> = thin(&v[..10]).copied().collect();
        assert_eq!(short.len(), 10);
    }

    #[test]
    fn degenerate_range_is_widened() {
        let (lo, hi) = range(&[("a".into(), vec![(0.0, 2.0), (1.0, 2.0)])], |p| p.1);
        assert!(lo < 2.0 && hi > 2.0);
    }
}
