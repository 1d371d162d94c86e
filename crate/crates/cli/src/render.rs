//! SVG charts for the CSV schemas.

use std::collections::BTreeMap;
use std::path::Path;

use naming_lab::io::{ENSEMBLE_HEADER, HEATMAP_HEADER, REALIZATION_HEADER, SWEEP_HEADER, TRAJECTORY_HEADER};
use naming_lab::Error;
use plotters::coord::Shift;
use plotters::prelude::*;

type Res<T> = naming_lab::Result<T>;

fn draw_err<E: std::fmt::Display>(out: &Path) -> impl Fn(E) -> Error + '_ {
    move |e| Error::Io { path: out.to_path_buf(), source: std::io::Error::other(e.to_string()) }
}

struct Table {
    header: String,
    rows: Vec<Vec<String>>,
}

fn read_table(path: &Path) -> Res<Table> {
    let io_err = |e: csv::Error| Error::Io { path: path.to_path_buf(), source: std::io::Error::other(e.to_string()) };
    let mut rdr = csv::Reader::from_path(path).map_err(io_err)?;
    let header = rdr.headers().map_err(io_err)?.iter().collect::<Vec<_>>().join(",");
    let mut rows = Vec::new();
    for rec in rdr.records() {
        rows.push(rec.map_err(io_err)?.iter().map(str::to_string).collect());
    }
    Ok(Table { header, rows })
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or(f64::NAN)
}

/// Padded range over the finite values, `[0, 1]` when there are none.
fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

const PALETTE: [RGBColor; 8] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
];

/// Line chart of named series.
fn lines(
    root: &DrawingArea<SVGBackend, Shift>,
    out: &Path,
    title: &str,
    x_desc: &str,
    y_desc: &str,
    series: &[(String, Vec<(f64, f64)>)],
    markers: bool,
) -> Res<()> {
    let xr = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let yr = range(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut chart = ChartBuilder::on(root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
        .map_err(draw_err(out))?;
    chart.configure_mesh().x_desc(x_desc).y_desc(y_desc).draw().map_err(draw_err(out))?;
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let pts: Vec<(f64, f64)> = pts.iter().copied().filter(|p| p.0.is_finite() && p.1.is_finite()).collect();
        let drawn = chart.draw_series(LineSeries::new(pts.clone(), color.stroke_width(2))).map_err(draw_err(out))?;
        if series.len() <= PALETTE.len() {
            drawn.label(name.clone()).legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
        }
        if markers {
            chart
                .draw_series(pts.iter().map(|&p| Circle::new(p, 3, color.filled())))
                .map_err(draw_err(out))?;
        }
    }
    if !series.is_empty() && series.len() <= PALETTE.len() {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(draw_err(out))?;
    }
    Ok(())
}

/// Critical points coloured by transition type.
fn classified_points(
    root: &DrawingArea<SVGBackend, Shift>,
    out: &Path,
    title: &str,
    x_desc: &str,
    pts: &[(f64, f64, String)],
) -> Res<()> {
    let xr = range(pts.iter().map(|p| p.0));
    let yr = range(pts.iter().map(|p| p.1));
    let mut chart = ChartBuilder::on(root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(xr.0..xr.1, yr.0..yr.1)
        .map_err(draw_err(out))?;
    chart.configure_mesh().x_desc(x_desc).y_desc("P_A^(c)").draw().map_err(draw_err(out))?;
    let finite: Vec<(f64, f64)> =
        pts.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|p| (p.0, p.1)).collect();
    chart.draw_series(LineSeries::new(finite, BLACK.mix(0.3))).map_err(draw_err(out))?;
    for (class, color) in [("discontinuous", BLUE), ("continuous", RED)] {
        chart
            .draw_series(
                pts.iter()
                    .filter(|p| p.2 == class && p.0.is_finite() && p.1.is_finite())
                    .map(|p| Circle::new((p.0, p.1), 4, color.filled())),
            )
            .map_err(draw_err(out))?
            .label(class)
            .legend(move |(x, y)| Circle::new((x + 8, y), 4, color.filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(draw_err(out))?;
    Ok(())
}

fn heat(root: &DrawingArea<SVGBackend, Shift>, out: &Path, title: &str, rows: &[Vec<String>]) -> Res<()> {
    let mut ms: Vec<i64> = rows.iter().map(|r| num(&r[0]) as i64).collect();
    ms.sort_unstable();
    ms.dedup();
    let mut ks: Vec<f64> = rows.iter().map(|r| num(&r[1])).collect();
    ks.sort_by(f64::total_cmp);
    ks.dedup();
    let (lo, hi) = range(rows.iter().map(|r| num(&r[2])));
    let mut chart = ChartBuilder::on(root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(0..ks.len().max(1), 0..ms.len().max(1))
        .map_err(draw_err(out))?;
    let k_labels = ks.clone();
    let m_labels = ms.clone();
    chart
        .configure_mesh()
        .disable_mesh()
        .x_desc("<k>")
        .y_desc("m")
        .x_labels(ks.len().max(1))
        .y_labels(ms.len().max(1))
        .x_label_formatter(&|i| k_labels.get(*i).map(|k| format!("{k}")).unwrap_or_default())
        .y_label_formatter(&|i| m_labels.get(*i).map(|m| m.to_string()).unwrap_or_default())
        .draw()
        .map_err(draw_err(out))?;
    let cells = rows.iter().map(|r| {
        let xi = ks.iter().position(|k| *k == num(&r[1])).expect("collected");
        let yi = ms.iter().position(|m| *m == num(&r[0]) as i64).expect("collected");
        let v = num(&r[2]);
        let color = if v.is_finite() {
            let f = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            RGBColor((40.0 + 215.0 * f) as u8, (60.0 + 80.0 * (1.0 - f)) as u8, (200.0 * (1.0 - f)) as u8)
        } else {
            RGBColor(200, 200, 200)
        };
        Rectangle::new([(xi, yi), (xi + 1, yi + 1)], color.filled())
    });
    chart.draw_series(cells).map_err(draw_err(out))?;
    Ok(())
}

/// Renders `input` to `out`; returns a warning for an empty table.
pub fn render(input: &Path, out: &Path, title: Option<&str>) -> Res<Option<String>> {
    let t = read_table(input)?;
    let known = [TRAJECTORY_HEADER, SWEEP_HEADER, ENSEMBLE_HEADER, REALIZATION_HEADER, HEATMAP_HEADER];
    if !known.contains(&t.header.as_str()) {
        return Err(Error::Config(vec![format!(
            "{}: header {:?} matches no known schema; expected one of {known:?}",
            input.display(),
            t.header
        )]));
    }
    let root = SVGBackend::new(out, (900, 620)).into_drawing_area();
    root.fill(&WHITE).map_err(draw_err(out))?;
    let warning = t.rows.is_empty().then(|| format!("{} has no data rows; drew empty axes", input.display()));
    let title = title.unwrap_or("");
    match t.header.as_str() {
        TRAJECTORY_HEADER => {
            let mut by_state: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            let mut order: Vec<String> = Vec::new();
            for r in &t.rows {
                if !by_state.contains_key(&r[1]) {
                    order.push(r[1].clone());
                }
                by_state.entry(r[1].clone()).or_default().push((num(&r[0]), num(&r[2])));
            }
            let series: Vec<_> = order.into_iter().map(|k| {
                let v = by_state.remove(&k).expect("collected");
                (format!("x_{k}"), v)
            }).collect();
            lines(&root, out, title, "t", "density", &series, false)?;
        }
        SWEEP_HEADER => {
            let curve = t.rows.iter().any(|r| r[0] != "P_A");
            if curve || t.rows.is_empty() {
                let x_desc = t.rows.first().map(|r| r[0].clone()).unwrap_or_else(|| "parameter".into());
                let pts: Vec<(f64, f64, String)> = t
                    .rows
                    .iter()
                    .filter(|r| r[2] == "P_A_c")
                    .map(|r| (num(&r[1]), num(&r[3]), r[4].clone()))
                    .collect();
                classified_points(&root, out, title, &x_desc, &pts)?;
            } else {
                let obs = t.rows.iter().find(|r| r[2] != "P_A_c").map(|r| r[2].clone()).unwrap_or_default();
                let pts: Vec<(f64, f64)> =
                    t.rows.iter().filter(|r| r[2] != "P_A_c").map(|r| (num(&r[1]), num(&r[3]))).collect();
                lines(&root, out, title, "P_A", &obs, &[(obs.clone(), pts)], true)?;
            }
        }
        ENSEMBLE_HEADER => {
            let mut by_op: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
            let mut ra = Vec::new();
            for r in &t.rows {
                by_op.entry(r[1].clone()).or_default().push((num(&r[0]), num(&r[2])));
                if r[1] == "A" {
                    ra.push((num(&r[0]), num(&r[3])));
                }
            }
            let mut series: Vec<_> = by_op.into_iter().map(|(k, v)| (format!("<n_{k}>"), v)).collect();
            series.push(("R_A".into(), ra));
            lines(&root, out, title, "P_A", "<n_i>, R_A", &series, true)?;
        }
        REALIZATION_HEADER => {
            let mut by_run: BTreeMap<u64, Vec<(f64, f64)>> = BTreeMap::new();
            for r in t.rows.iter().filter(|r| r[2] == "A") {
                by_run.entry(num(&r[0]) as u64).or_default().push((num(&r[1]), num(&r[3])));
            }
            let series: Vec<_> = by_run.into_iter().map(|(k, v)| (format!("run {k}"), v)).collect();
            lines(&root, out, title, "T (sweeps)", "n_A", &series, false)?;
        }
        HEATMAP_HEADER => heat(&root, out, title, &t.rows)?,
        _ => unreachable!("header checked above"),
    }
    root.present().map_err(draw_err(out))?;
    Ok(warning)
}
