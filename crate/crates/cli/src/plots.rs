//! SVG figures: stacked time-series panels and a 3D manifold projection.

use std::error::Error;
use std::path::Path;

use plotters::prelude::*;
use steamnet::TimeSeries;

pub type PlotResult = Result<bool, Box<dyn Error>>;

/// A named 3D polyline.
pub type Curve = (String, Vec<(f64, f64, f64)>);

pub struct Panel {
    pub ylabel: String,
    pub series: Vec<(String, Vec<f64>)>,
}

fn bounds<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-9 * hi.abs().max(1.0));
    (lo - pad, hi + pad)
}

/// Vertically stacked panels sharing the time axis. Returns `false` (and
/// writes nothing) when there is no data.
pub fn panels(path: &Path, title: &str, t: &[f64], panels: &[Panel]) -> PlotResult {
    if t.len() < 2 || panels.is_empty() {
        log::warn!("nothing to plot for {}", path.display());
        return Ok(false);
    }
    let root = SVGBackend::new(path, (900, 260 * panels.len() as u32)).into_drawing_area();
    root.fill(&WHITE)?;
    let root = root.titled(title, ("sans-serif", 20))?;
    let (t0, t1) = (t[0], t[t.len() - 1]);
    for (area, panel) in root.split_evenly((panels.len(), 1)).iter().zip(panels) {
        let (lo, hi) = bounds(panel.series.iter().flat_map(|(_, ys)| ys.iter()));
        let mut chart = ChartBuilder::on(area)
            .margin(8)
            .x_label_area_size(32)
            .y_label_area_size(80)
            .build_cartesian_2d(t0..t1, lo..hi)?;
        chart
            .configure_mesh()
            .x_desc("t [s]")
            .y_desc(panel.ylabel.as_str())
            .draw()?;
        for (i, (name, ys)) in panel.series.iter().enumerate() {
            let color = Palette99::pick(i).to_rgba();
            chart
                .draw_series(LineSeries::new(t.iter().copied().zip(ys.iter().copied()), color.stroke_width(2)))?
                .label(name.as_str())
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()?;
    }
    root.present()?;
    Ok(true)
}

/// Pressures, velocities and heat outputs of a trajectory in four panels:
/// the first vertex, the remaining vertices, all links, all heat outputs.
pub fn timeseries(path: &Path, title: &str, ts: &TimeSeries) -> PlotResult {
    if ts.is_empty() {
        log::warn!("empty time series, no plot written");
        return Ok(false);
    }
    let kpa = |v: usize| ts.pressure(v).iter().map(|p| p / 1e3).collect::<Vec<_>>();
    let mw = |v: usize| ts.heat_output(v).iter().map(|q| q / 1e6).collect::<Vec<_>>();
    let n = ts.vertex_ids.len();
    let mut list = vec![Panel {
        ylabel: format!("p_{} [kPa]", ts.vertex_ids[0]),
        series: vec![(ts.vertex_ids[0].clone(), kpa(0))],
    }];
    if n > 1 {
        list.push(Panel {
            ylabel: "p [kPa]".into(),
            series: (1..n).map(|v| (ts.vertex_ids[v].clone(), kpa(v))).collect(),
        });
    }
    list.push(Panel {
        ylabel: "u [m/s]".into(),
        series: ts
            .link_ids
            .iter()
            .enumerate()
            .map(|(l, id)| (id.clone(), ts.velocity(l)))
            .collect(),
    });
    if !ts.heat_outputs_w.is_empty() {
        list.push(Panel {
            ylabel: "Q_o [MJ/s]".into(),
            series: (0..n).map(|v| (ts.vertex_ids[v].clone(), mw(v))).collect(),
        });
    }
    panels(path, title, &ts.t_s, &list)
}

/// 3D projection in (mean pressure [kPa], p_tail − p_head [kPa], u [m/s]).
pub fn manifold_projection(
    path: &Path,
    title: &str,
    curves: &[Curve],
    trajectory: &[(f64, f64, f64)],
) -> PlotResult {
    if curves.iter().all(|(_, c)| c.is_empty()) && trajectory.is_empty() {
        log::warn!("nothing to plot for {}", path.display());
        return Ok(false);
    }
    let all = || curves.iter().flat_map(|(_, c)| c.iter()).chain(trajectory.iter());
    let xs: Vec<f64> = all().map(|p| p.0).collect();
    let ys: Vec<f64> = all().map(|p| p.1).collect();
    let zs: Vec<f64> = all().map(|p| p.2).collect();
    let (x0, x1) = bounds(xs.iter());
    let (y0, y1) = bounds(ys.iter());
    let (z0, z1) = bounds(zs.iter());
    let root = SVGBackend::new(path, (900, 800)).into_drawing_area();
    root.fill(&WHITE)?;
    // plotters draws the second coordinate vertically
    let mut chart = ChartBuilder::on(&root)
        .margin(20)
        .caption(
            format!("{title}  (x: mean p [kPa], vertical: u [m/s], depth: p_tail − p_head [kPa])"),
            ("sans-serif", 16),
        )
        .build_cartesian_3d(x0..x1, z0..z1, y0..y1)?;
    chart.with_projection(|mut pb| {
        pb.yaw = 0.7;
        pb.pitch = 0.35;
        pb.scale = 0.85;
        pb.into_matrix()
    });
    chart.configure_axes().draw()?;
    if !trajectory.is_empty() {
        chart
            .draw_series(LineSeries::new(trajectory.iter().map(|p| (p.0, p.2, p.1)), BLUE.mix(0.5)))?
            .label("trajectory")
            .legend(|(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], BLUE));
    }
    for (i, (name, c)) in curves.iter().enumerate() {
        let color = Palette99::pick(i + 1).to_rgba();
        chart
            .draw_series(LineSeries::new(c.iter().map(|p| (p.0, p.2, p.1)), color.stroke_width(3)))?
            .label(name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()?;
    root.present()?;
    Ok(true)
}
