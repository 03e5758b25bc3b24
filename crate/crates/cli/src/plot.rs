//! Static SVG line plots of summary CSVs.

use std::fs;
use std::path::Path;

use plotters::prelude::*;

use crate::error::{HarnessError, Result};

const COLORS: [RGBColor; 6] = [GREEN, BLUE, RED, MAGENTA, BLACK, CYAN];

struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Self> {
        let mut reader = csv::Reader::from_path(path)?;
        let headers = reader.headers()?.iter().map(str::to_string).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Self { headers, rows })
    }

    fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| HarnessError::MissingColumn {
                name: name.to_string(),
                available: self.headers.clone(),
            })?;
        self.rows
            .iter()
            .map(|row| {
                let cell = row.get(idx).map(String::as_str).unwrap_or("");
                cell.parse::<f64>().map_err(|_| {
                    HarnessError::Plot(format!("column `{name}`: `{cell}` is not a number"))
                })
            })
            .collect()
    }

    fn has(&self, name: &str) -> bool {
        self.headers.iter().any(|h| h == name)
    }
}

struct Series {
    name: String,
    points: Vec<(f64, f64)>,
    band: Option<Vec<(f64, f64, f64)>>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> HarnessError {
    HarnessError::Plot(e.to_string())
}

fn padded(lo: f64, hi: f64) -> std::ops::Range<f64> {
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        (lo - pad)..(hi + pad)
    } else {
        let pad = (hi - lo) * 0.05;
        (lo - pad)..(hi + pad)
    }
}

/// Draws one line per `y_columns` entry against `x_column` and writes a
/// standalone SVG to `output`. A `<name>_se` column next to `<name>_mean`
/// adds a one-standard-error band.
pub fn render_plot(
    summary_csv: &Path,
    x_column: &str,
    y_columns: &[&str],
    output: &Path,
) -> Result<()> {
    let table = Table::read(summary_csv)?;
    let xs = table.column(x_column)?;
    let mut series = Vec::new();
    for &name in y_columns {
        let ys = table.column(name)?;
        let se_name = name.strip_suffix("_mean").map(|base| format!("{base}_se"));
        let band = match se_name {
            Some(se) if table.has(&se) => Some(
                table
                    .column(&se)?
                    .into_iter()
                    .zip(xs.iter().zip(&ys))
                    .map(|(se, (&x, &y))| (x, y - se, y + se))
                    .collect(),
            ),
            _ => None,
        };
        series.push(Series {
            name: name.to_string(),
            points: xs.iter().copied().zip(ys).collect(),
            band,
        });
    }
    if table.rows.is_empty() {
        return Err(HarnessError::EmptyData(summary_csv.to_path_buf()));
    }
    if series.is_empty() {
        return Err(HarnessError::Plot("no y columns given".into()));
    }
    let svg = draw(x_column, &series)?;
    fs::write(output, svg).map_err(|e| HarnessError::io(output, e))
}

fn draw(x_label: &str, series: &[Series]) -> Result<String> {
    let finite = |v: &f64| v.is_finite();
    let xs = series[0].points.iter().map(|p| p.0).filter(finite);
    let (x_lo, x_hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| {
        (lo.min(x), hi.max(x))
    });
    let ys = series.iter().flat_map(|s| {
        s.points.iter().map(|p| p.1).chain(
            s.band
                .iter()
                .flatten()
                .flat_map(|&(_, lo, hi)| [lo, hi]),
        )
    });
    let (y_lo, y_hi) = ys.filter(finite).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), y| {
        (lo.min(y), hi.max(y))
    });
    if !x_lo.is_finite() || !y_lo.is_finite() {
        return Err(HarnessError::Plot("no finite values to plot".into()));
    }

    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, (900, 560)).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(20)
            .x_label_area_size(40)
            .y_label_area_size(70)
            .build_cartesian_2d(padded(x_lo, x_hi), padded(y_lo, y_hi))
            .map_err(plot_err)?;
        chart
            .configure_mesh()
            .x_desc(x_label)
            .draw()
            .map_err(plot_err)?;

        for (k, s) in series.iter().enumerate() {
            let color = COLORS[k % COLORS.len()];
            if let Some(band) = &s.band {
                if band.len() > 1 {
                    let outline: Vec<(f64, f64)> = band
                        .iter()
                        .map(|&(x, _, hi)| (x, hi))
                        .chain(band.iter().rev().map(|&(x, lo, _)| (x, lo)))
                        .collect();
                    chart
                        .draw_series(std::iter::once(Polygon::new(outline, color.mix(0.2))))
                        .map_err(plot_err)?;
                }
            }
            let legend_color = color;
            let anno = if s.points.len() > 1 {
                chart
                    .draw_series(LineSeries::new(s.points.clone(), color.stroke_width(2)))
                    .map_err(plot_err)?
            } else {
                chart
                    .draw_series(
                        s.points
                            .iter()
                            .map(|&p| Circle::new(p, 4, color.filled())),
                    )
                    .map_err(plot_err)?
            };
            anno.label(s.name.clone()).legend(move |(x, y)| {
                PathElement::new(vec![(x, y), (x + 20, y)], legend_color.stroke_width(2))
            });
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    Ok(svg)
}

/// The x column and series a preset's summary is usually plotted with.
pub fn default_columns(preset_name: &str) -> (&'static str, Vec<&'static str>) {
    match preset_name {
        "profit_fig3" => ("M", vec!["controller_profit_mean"]),
        "regret_vs_T_appxI1" => (
            "T",
            vec![
                "overall_regret_mean",
                "avg_individual_regret_mean",
                "ucb_regret_mean",
            ],
        ),
        _ => (
            "M",
            vec![
                "overall_regret_mean",
                "avg_individual_regret_mean",
                "max_raw_individual_regret_mean",
                "max_ir_adjusted_regret_mean",
                "ucb_regret_mean",
            ],
        ),
    }
}
