use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use tensegrity_core::metrics::PoseError;
use tensegrity_core::Error;

use crate::commands::Comparison;
use crate::error::{CliError, CliResult};

const SIZE: (u32, u32) = (900, 420);

/// One cable's predicted, measured and true length per frame (meters).
pub struct CableSeries {
    pub cable: (usize, usize),
    pub predicted: Vec<f64>,
    pub measured: Vec<f64>,
    pub truth: Vec<Option<f64>>,
}

pub fn cable_series(cmp: &Comparison) -> Vec<CableSeries> {
    cmp.topology
        .cables
        .iter()
        .enumerate()
        .map(|(k, &(i, j))| CableSeries {
            cable: (i, j),
            predicted: cmp
                .estimate_endcaps
                .iter()
                .map(|q| (q[i] - q[j]).norm())
                .collect(),
            measured: cmp.measured.iter().map(|m| m[k]).collect(),
            truth: cmp
                .truth_endcaps
                .iter()
                .map(|q| q.as_ref().map(|q| (q[i] - q[j]).norm()))
                .collect(),
        })
        .collect()
}

fn io(path: &Path, e: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.into(),
        source: e,
    })
}

fn draw_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Core(Error::Format {
        path: path.into(),
        message: format!("plotting failed: {e}"),
    })
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| {
            (a.min(v), b.max(v))
        });
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.08).max(1e-3);
    (lo - pad, hi + pad)
}

/// Draw named series (with gaps where a value is missing) into one SVG.
fn line_plot(
    path: &Path,
    title: &str,
    y_label: &str,
    series: &[(&str, RGBColor, Vec<Option<f64>>)],
) -> CliResult<()> {
    let frames = series.iter().map(|s| s.2.len()).max().unwrap_or(0).max(2);
    let (lo, hi) = range(series.iter().flat_map(|s| s.2.iter().flatten().copied()));
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw_err(path, e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(60)
        .build_cartesian_2d(0.0..(frames - 1) as f64, lo..hi)
        .map_err(|e| draw_err(path, e))?;
    chart
        .configure_mesh()
        .x_desc("frame")
        .y_desc(y_label)
        .draw()
        .map_err(|e| draw_err(path, e))?;
    for (name, color, values) in series {
        let color = *color;
        let mut first = true;
        let mut run = Vec::new();
        let mut flush = |run: &mut Vec<(f64, f64)>, first: &mut bool| -> CliResult<()> {
            if run.is_empty() {
                return Ok(());
            }
            let drawn = chart
                .draw_series(LineSeries::new(run.drain(..), color.stroke_width(2)))
                .map_err(|e| draw_err(path, e))?;
            if *first {
                drawn.label(*name).legend(move |(x, y)| {
                    PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2))
                });
                *first = false;
            }
            Ok(())
        };
        for (f, v) in values.iter().enumerate() {
            match v {
                Some(v) => run.push((f as f64, *v)),
                None => flush(&mut run, &mut first)?,
            }
        }
        flush(&mut run, &mut first)?;
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw_err(path, e))?;
    root.present().map_err(|e| draw_err(path, e))?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |v| format!("{v:.6}"))
}

/// Cable and rod plots plus the CSV series behind them.
pub fn write_all(cmp: &Comparison, errors: &[PoseError], out: &Path) -> CliResult<Vec<PathBuf>> {
    fs::create_dir_all(out).map_err(|e| io(out, e))?;
    let mut files = Vec::new();

    let cables = cable_series(cmp);
    let mut csv = String::from("frame,cable_i,cable_j,predicted_m,measured_m,truth_m\n");
    for s in &cables {
        for f in 0..s.predicted.len() {
            let _ = writeln!(
                csv,
                "{f},{},{},{:.6},{:.6},{}",
                s.cable.0,
                s.cable.1,
                s.predicted[f],
                s.measured[f],
                opt(s.truth[f])
            );
        }
        let path = out.join(format!("cable_{}_{}.svg", s.cable.0, s.cable.1));
        line_plot(
            &path,
            &format!("cable {}-{}", s.cable.0, s.cable.1),
            "endcap distance (m)",
            &[
                (
                    "measured",
                    RGBColor(150, 150, 150),
                    s.measured.iter().map(|&v| Some(v)).collect(),
                ),
                ("ground truth", RGBColor(20, 20, 20), s.truth.clone()),
                (
                    "predicted",
                    RGBColor(214, 39, 40),
                    s.predicted.iter().map(|&v| Some(v)).collect(),
                ),
            ],
        )?;
        files.push(path);
    }
    let path = out.join("cables.csv");
    fs::write(&path, csv).map_err(|e| io(&path, e))?;
    files.push(path);

    let frames = cmp.estimates.len();
    let mut csv = String::from("frame,rod,translation_m,axis_deg\n");
    for rod in 0..cmp.topology.n_rods {
        let mut trans = vec![None; frames];
        let mut axis = vec![None; frames];
        for e in errors.iter().filter(|e| e.rod == rod && e.gt_available) {
            trans[e.frame] = Some(e.translation * 100.0);
            axis[e.frame] = Some(e.rotation);
        }
        for f in 0..frames {
            let _ = writeln!(
                csv,
                "{f},{rod},{},{}",
                opt(trans[f].map(|v| v / 100.0)),
                opt(axis[f])
            );
        }
        let path = out.join(format!("rod_{rod}.svg"));
        line_plot(
            &path,
            &format!("rod {rod} error"),
            "translation (cm) / axis (deg)",
            &[
                ("translation (cm)", RGBColor(31, 119, 180), trans),
                ("axis (deg)", RGBColor(255, 127, 14), axis),
            ],
        )?;
        files.push(path);
    }
    let path = out.join("rods.csv");
    fs::write(&path, csv).map_err(|e| io(&path, e))?;
    files.push(path);
    Ok(files)
}
