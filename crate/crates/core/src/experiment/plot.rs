use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::ExperimentError;
use crate::datagen::Sample;

/// One controller's run, drawn as one line per vehicle or gap.
#[derive(Debug, Clone, Copy)]
pub struct PlotSeries<'a> {
    pub label: &'a str,
    pub samples: &'a [Sample],
}

impl<'a> PlotSeries<'a> {
    pub fn new(label: &'a str, samples: &'a [Sample]) -> Self {
        Self { label, samples }
    }
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(148, 103, 189),
    RGBColor(255, 127, 14),
    RGBColor(23, 190, 207),
];

/// Series index, line index within the series, label and points.
type Line = (usize, usize, String, Vec<(f64, f64)>);

struct Panel<'a> {
    title: &'a str,
    y_label: &'a str,
    reference: f64,
    lines: Vec<Line>,
}

fn render(panel: &Panel) -> Result<String, ExperimentError> {
    let err = |e: &dyn std::fmt::Display| ExperimentError::Plot(e.to_string());
    let (mut t0, mut t1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        panel.reference,
        panel.reference,
    );
    for (_, _, _, pts) in &panel.lines {
        for &(t, y) in pts {
            t0 = t0.min(t);
            t1 = t1.max(t);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if t1.is_nan() || t1 <= t0 {
        t1 = t0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-3);
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (1000, 500)).into_drawing_area();
        root.fill(&WHITE).map_err(|e| err(&e))?;
        let mut chart = ChartBuilder::on(&root)
            .caption(panel.title, ("sans-serif", 20))
            .margin(10)
            .x_label_area_size(40)
            .y_label_area_size(60)
            .build_cartesian_2d(t0..t1, (y0 - pad)..(y1 + pad))
            .map_err(|e| err(&e))?;
        chart
            .configure_mesh()
            .x_desc("t (s)")
            .y_desc(panel.y_label)
            .draw()
            .map_err(|e| err(&e))?;
        chart
            .draw_series(LineSeries::new(
                [(t0, panel.reference), (t1, panel.reference)],
                BLACK.stroke_width(1),
            ))
            .map_err(|e| err(&e))?
            .label(format!("desired {}", panel.reference))
            .legend(|(x, y)| PathElement::new([(x, y), (x + 20, y)], BLACK));
        for (series, line, label, pts) in &panel.lines {
            let color = PALETTE[line % PALETTE.len()];
            // The first series is drawn solid, later ones faded.
            let style = if *series == 0 {
                color.stroke_width(2)
            } else {
                color.mix(0.45).stroke_width(1)
            };
            chart
                .draw_series(LineSeries::new(pts.iter().copied(), style))
                .map_err(|e| err(&e))?
                .label(label.as_str())
                .legend(move |(x, y)| PathElement::new([(x, y), (x + 20, y)], style));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(|e| err(&e))?;
        root.present().map_err(|e| err(&e))?;
    }
    Ok(svg)
}

/// Writes `velocity_deviation.svg` and `spacing.svg` into `dir`. Nothing
/// is written unless every series is non-empty and both plots render.
pub fn emit_plots(
    series: &[PlotSeries],
    h_star: f64,
    dir: &Path,
) -> Result<Vec<PathBuf>, ExperimentError> {
    if series.is_empty() || series.iter().any(|s| s.samples.is_empty()) {
        return Err(ExperimentError::Plot("no samples to plot".into()));
    }
    let n = series[0].samples[0].states.len();
    if series
        .iter()
        .flat_map(|s| s.samples)
        .any(|s| s.states.len() != n)
    {
        return Err(ExperimentError::Plot(
            "series disagree on the vehicle count".into(),
        ));
    }
    let mut velocity = Panel {
        title: "Velocity deviation",
        y_label: "v - v* (m/s)",
        reference: 0.0,
        lines: Vec::new(),
    };
    let mut spacing = Panel {
        title: "Inter-vehicle distance",
        y_label: "gap (m)",
        reference: h_star,
        lines: Vec::new(),
    };
    for (k, s) in series.iter().enumerate() {
        for i in 0..n {
            let pts = s.samples.iter().map(|x| (x.t, x.errors[i].v_err)).collect();
            velocity
                .lines
                .push((k, i, format!("{} vehicle {}", s.label, i + 1), pts));
        }
        for i in 1..n {
            let pts = s
                .samples
                .iter()
                .map(|x| (x.t, x.states[i - 1].p - x.states[i].p))
                .collect();
            spacing
                .lines
                .push((k, i - 1, format!("{} gap {}-{}", s.label, i, i + 1), pts));
        }
    }
    let rendered = [
        (dir.join("velocity_deviation.svg"), render(&velocity)?),
        (dir.join("spacing.svg"), render(&spacing)?),
    ];
    let mut written = Vec::new();
    for (path, svg) in rendered {
        fs::write(&path, svg)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{ErrorState, VehicleState};

    fn samples() -> Vec<Sample> {
        (0..50)
            .map(|k| {
                let t = k as f64 * 0.1;
                Sample {
                    step: k,
                    t,
                    states: vec![
                        VehicleState::new(40.0 + t, 20.0, 0.0),
                        VehicleState::new(19.0 + t, 20.5, 0.0),
                    ],
                    errors: vec![
                        ErrorState::default(),
                        ErrorState {
                            h_err: 1.0,
                            v_err: 0.5,
                            a: 0.0,
                        },
                    ],
                    u: vec![0.0; 2],
                    w: vec![0.0; 2],
                }
            })
            .collect()
    }

    fn scratch(name: &str) -> PathBuf {
        let d = std::env::temp_dir().join(format!("ddcacc-plot-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        fs::create_dir_all(&d).unwrap();
        d
    }

    #[test]
    fn writes_both_plots_with_reference_line() {
        let dir = scratch("ok");
        let s = samples();
        let files = emit_plots(
            &[PlotSeries::new("CACC", &s), PlotSeries::new("ACC", &s)],
            20.0,
            &dir,
        )
        .unwrap();
        assert_eq!(files.len(), 2);
        let spacing = fs::read_to_string(dir.join("spacing.svg")).unwrap();
        assert!(spacing.contains("desired 20"));
        assert!(spacing.contains("ACC gap 1-2"));
        fs::remove_dir_all(dir).unwrap();
    }

    #[test]
    fn empty_trajectory_writes_nothing() {
        let dir = scratch("empty");
        assert!(emit_plots(&[PlotSeries::new("ACC", &[])], 20.0, &dir).is_err());
        assert_eq!(fs::read_dir(&dir).unwrap().count(), 0);
        fs::remove_dir_all(dir).unwrap();
    }
}
