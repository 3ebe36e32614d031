//! SVG figures from a results directory.
//!
//! - `error_<cond>.svg`: mean training error over seeds with a ±1 stdev band
//! - `gates_<cond>__seed<k>.svg`: gate outputs over one test sequence, on
//!   background spans colored by the active event
//! - `compression_<cond>__seed<k>.svg`: the same for the context LSTM output
//! - `codes_<cond>.svg`: per-seed gate-output centers of each event

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::event_world::EventType;
use crate::numerics::mean_std;

const EVENT_COLORS: [RGBColor; 4] = [
    RGBColor(31, 119, 180),
    RGBColor(255, 127, 14),
    RGBColor(44, 160, 44),
    RGBColor(214, 39, 40),
];

const LINE_COLORS: [RGBColor; 8] = [
    RGBColor(0, 0, 0),
    RGBColor(148, 103, 189),
    RGBColor(140, 86, 75),
    RGBColor(227, 119, 194),
    RGBColor(127, 127, 127),
    RGBColor(188, 189, 34),
    RGBColor(23, 190, 207),
    RGBColor(31, 119, 180),
];

fn plot_err<E: std::fmt::Debug>(e: E) -> Error {
    Error::Plot(format!("{e:?}"))
}

struct Table {
    path: PathBuf,
    header: Vec<String>,
    rows: Vec<csv::StringRecord>,
}

impl Table {
    fn read(path: &Path) -> Result<Table> {
        let mut rdr = csv::Reader::from_path(path)?;
        let header = rdr.headers()?.iter().map(String::from).collect();
        let rows = rdr.records().collect::<std::result::Result<_, _>>()?;
        Ok(Table {
            path: path.to_path_buf(),
            header,
            rows,
        })
    }

    fn col(&self, name: &str) -> Result<usize> {
        self.header.iter().position(|h| h == name).ok_or_else(|| Error::Data {
            path: self.path.clone(),
            msg: format!("missing column `{name}`"),
        })
    }

    fn cols_with_prefix(&self, prefix: &str) -> Vec<usize> {
        (0..self.header.len())
            .filter(|&i| {
                self.header[i]
                    .strip_prefix(prefix)
                    .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
            })
            .collect()
    }

    fn num(&self, row: usize, col: usize) -> Result<f64> {
        let s = self.rows[row].get(col).unwrap_or("");
        s.parse().map_err(|_| Error::Data {
            path: self.path.clone(),
            msg: format!("row {}: `{s}` is not a number", row + 2),
        })
    }

    fn column(&self, col: usize) -> Result<Vec<f64>> {
        (0..self.rows.len()).map(|r| self.num(r, col)).collect()
    }
}

fn value_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

/// Mean and standard deviation across curves, per epoch, over the epochs
/// all curves share.
pub fn curve_band(curves: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let n = curves.iter().map(Vec::len).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let col: Vec<f64> = curves.iter().map(|c| c[i]).collect();
            let (m, s) = mean_std(&col);
            (m, if curves.len() < 2 { 0.0 } else { s })
        })
        .collect()
}

/// Mean error curve with a ±1 stdev band. Epochs are numbered from 1.
pub fn plot_error_curve(curves: &[Vec<f64>], title: &str, path: &Path) -> Result<()> {
    let band = curve_band(curves);
    if band.is_empty() {
        return Err(Error::Plot(format!("{title}: no epochs to plot")));
    }
    let n = band.len() as f64;
    let (_, hi) = value_range(band.iter().map(|(m, s)| m + s));
    let root = SVGBackend::new(path, (900, 450)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(1f64..n.max(2.0), 0f64..hi)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("epoch")
        .y_desc("mean abs. error")
        .draw()
        .map_err(plot_err)?;
    let upper = band.iter().enumerate().map(|(i, (m, s))| (i as f64 + 1.0, m + s));
    let lower = band.iter().enumerate().rev().map(|(i, (m, s))| (i as f64 + 1.0, (m - s).max(0.0)));
    chart
        .draw_series(std::iter::once(Polygon::new(upper.chain(lower).collect::<Vec<_>>(), BLUE.mix(0.25))))
        .map_err(plot_err)?;
    chart
        .draw_series(LineSeries::new(
            band.iter().enumerate().map(|(i, (m, _))| (i as f64 + 1.0, *m)),
            BLUE.stroke_width(2),
        ))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

/// Maximal runs of equal events as `(event, start, end)` step ranges.
pub fn event_spans(events: &[EventType]) -> Vec<(EventType, usize, usize)> {
    let mut spans: Vec<(EventType, usize, usize)> = Vec::new();
    for (t, &e) in events.iter().enumerate() {
        match spans.last_mut() {
            Some(last) if last.0 == e => last.2 = t + 1,
            _ => spans.push((e, t, t + 1)),
        }
    }
    spans
}

/// Line plot of `series` over time on event-colored background spans.
/// Returns the number of spans drawn.
pub fn plot_trajectory(events: &[EventType], series: &[Vec<f64>], title: &str, path: &Path) -> Result<usize> {
    if events.is_empty() {
        return Err(Error::Plot(format!("{title}: empty trajectory")));
    }
    let spans = event_spans(events);
    let (lo, hi) = value_range(series.iter().flatten().copied());
    let root = SVGBackend::new(path, (1000, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(10)
        .x_label_area_size(35)
        .y_label_area_size(55)
        .build_cartesian_2d(0f64..events.len() as f64, lo..hi)
        .map_err(plot_err)?;
    chart
        .draw_series(spans.iter().map(|&(e, a, b)| {
            Rectangle::new([(a as f64, lo), (b as f64, hi)], EVENT_COLORS[e.index()].mix(0.18).filled())
        }))
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc("step").draw().map_err(plot_err)?;
    for (i, s) in series.iter().enumerate() {
        let color = LINE_COLORS[i % LINE_COLORS.len()];
        chart
            .draw_series(LineSeries::new(s.iter().enumerate().map(|(t, &v)| (t as f64 + 0.5, v)), color.stroke_width(2)))
            .map_err(plot_err)?;
    }
    for e in EventType::ALL {
        chart
            .draw_series(std::iter::once(Rectangle::new([(0.0, lo), (0.0, lo)], EVENT_COLORS[e.index()].filled())))
            .map_err(plot_err)?
            .label(e.name())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 12, y + 5)], EVENT_COLORS[e.index()].mix(0.5).filled()));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(spans.len())
}

/// One panel per seed showing each event's center vector as points over
/// the vector's dimensions.
pub fn plot_codes(panels: &[(u64, [Vec<f64>; 4])], title: &str, path: &Path) -> Result<()> {
    if panels.is_empty() {
        return Err(Error::Plot(format!("{title}: no centers")));
    }
    let (lo, hi) = value_range(panels.iter().flat_map(|(_, c)| c.iter().flatten().copied()));
    let dim = panels[0].1[0].len().max(1);
    let cols = panels.len().min(5);
    let rows = panels.len().div_ceil(cols);
    let root = SVGBackend::new(path, (260 * cols as u32, 240 * rows as u32 + 40)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let root = root.titled(title, ("sans-serif", 20)).map_err(plot_err)?;
    for (area, (seed, centers)) in root.split_evenly((rows, cols)).iter().zip(panels) {
        let mut chart = ChartBuilder::on(area)
            .caption(format!("seed {seed}"), ("sans-serif", 14))
            .margin(6)
            .x_label_area_size(20)
            .y_label_area_size(35)
            .build_cartesian_2d(-0.5f64..dim as f64 - 0.5, lo..hi)
            .map_err(plot_err)?;
        chart.configure_mesh().x_labels(dim).draw().map_err(plot_err)?;
        for e in EventType::ALL {
            let c = &centers[e.index()];
            let color = EVENT_COLORS[e.index()];
            chart
                .draw_series(LineSeries::new(c.iter().enumerate().map(|(i, &v)| (i as f64, v)), color.mix(0.5)))
                .map_err(plot_err)?;
            chart
                .draw_series(c.iter().enumerate().map(|(i, &v)| Circle::new((i as f64, v), 3, color.filled())))
                .map_err(plot_err)?;
        }
    }
    root.present().map_err(plot_err)?;
    Ok(())
}

fn stem_condition(stem: &str) -> &str {
    stem.rsplit_once("__seed").map_or(stem, |(c, _)| c)
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    files.sort();
    Ok(files)
}

fn file_stem(p: &Path) -> String {
    p.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

fn parse_event(table: &Table, row: usize, col: usize) -> Result<EventType> {
    let s = table.rows[row].get(col).unwrap_or("");
    s.parse().map_err(|_| Error::Data {
        path: table.path.clone(),
        msg: format!("row {}: unknown event `{s}`", row + 2),
    })
}

fn plot_trace_file(path: &Path, out: &Path, written: &mut Vec<PathBuf>) -> Result<()> {
    let table = Table::read(path)?;
    let t_col = table.col("t")?;
    let ev_col = table.col("event")?;
    let gates = table.cols_with_prefix("gate_h");
    if gates.is_empty() {
        return Err(Error::Data {
            path: path.to_path_buf(),
            msg: "missing column `gate_h0`".into(),
        });
    }
    let comps = table.cols_with_prefix("compression");
    let ts = table.column(t_col)?;
    // First sequence only: stop where t restarts.
    let len = ts.windows(2).position(|w| w[1] <= w[0]).map_or(ts.len(), |i| i + 1);
    let events = (0..len).map(|r| parse_event(&table, r, ev_col)).collect::<Result<Vec<_>>>()?;
    let series = |cols: &[usize]| -> Result<Vec<Vec<f64>>> {
        cols.iter()
            .map(|&c| (0..len).map(|r| table.num(r, c)).collect())
            .collect()
    };
    let stem = file_stem(path);
    let target = out.join(format!("gates_{stem}.svg"));
    plot_trajectory(&events, &series(&gates)?, &format!("gate output, {stem}"), &target)?;
    written.push(target);
    if !comps.is_empty() {
        let target = out.join(format!("compression_{stem}.svg"));
        plot_trajectory(&events, &series(&comps)?, &format!("context compression, {stem}"), &target)?;
        written.push(target);
    }
    Ok(())
}

/// Renders every figure the results directory supports and returns the
/// written paths.
pub fn plot_results(dir: &Path, out: &Path) -> Result<Vec<PathBuf>> {
    let runs = csv_files(&dir.join("runs"))?;
    if runs.is_empty() {
        return Err(Error::Data {
            path: dir.to_path_buf(),
            msg: "no per-run error curves found (expected runs/*.csv)".into(),
        });
    }
    fs::create_dir_all(out)?;
    let mut written = Vec::new();

    let mut groups: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for path in &runs {
        let table = Table::read(path)?;
        table.col("epoch")?;
        let curve = table.column(table.col("mean_error")?)?;
        groups.entry(stem_condition(&file_stem(path)).to_string()).or_default().push(curve);
    }
    for (cond, curves) in &groups {
        let target = out.join(format!("error_{cond}.svg"));
        plot_error_curve(curves, &format!("training error, {cond} ({} seeds)", curves.len()), &target)?;
        written.push(target);
    }

    for path in csv_files(&dir.join("traces"))? {
        plot_trace_file(&path, out, &mut written)?;
    }

    let centers_path = dir.join("centers.csv");
    if centers_path.exists() {
        let table = Table::read(&centers_path)?;
        let (cc, sc, ec) = (table.col("condition")?, table.col("seed")?, table.col("event")?);
        let dims = table.cols_with_prefix("c");
        let mut by_cond: BTreeMap<String, BTreeMap<u64, [Vec<f64>; 4]>> = BTreeMap::new();
        for r in 0..table.rows.len() {
            let cond = table.rows[r].get(cc).unwrap_or("").replace('/', "_");
            let seed = table.num(r, sc)? as u64;
            let e = parse_event(&table, r, ec)?;
            let v = dims.iter().map(|&c| table.num(r, c)).collect::<Result<Vec<_>>>()?;
            by_cond.entry(cond).or_default().entry(seed).or_default()[e.index()] = v;
        }
        for (cond, seeds) in by_cond {
            let panels: Vec<(u64, [Vec<f64>; 4])> = seeds.into_iter().collect();
            let target = out.join(format!("codes_{cond}.svg"));
            plot_codes(&panels, &format!("per-seed event codes, {cond}"), &target)?;
            written.push(target);
        }
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spans_follow_event_runs() {
        use EventType::*;
        let spans = event_spans(&[Add, Add, Sin, Sin, Sin, Add]);
        assert_eq!(spans, vec![(Add, 0, 2), (Sin, 2, 5), (Add, 5, 6)]);
        assert!(event_spans(&[]).is_empty());
    }

    #[test]
    fn band_uses_shared_epochs() {
        let band = curve_band(&[vec![1.0, 2.0, 3.0], vec![3.0, 4.0]]);
        assert_eq!(band.len(), 2);
        assert_eq!(band[0].0, 2.0);
        assert!((band[0].1 - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn empty_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(plot_results(dir.path(), &dir.path().join("plots")).is_err());
    }

    #[test]
    fn missing_column_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir_all(dir.path().join("runs")).unwrap();
        fs::write(dir.path().join("runs/a__seed1.csv"), "epoch,err\n1,0.5\n").unwrap();
        let err = plot_results(dir.path(), &dir.path().join("plots")).unwrap_err().to_string();
        assert!(err.contains("mean_error"), "{err}");
    }
}
