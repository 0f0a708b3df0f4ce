//! CSV, JSON and SVG artifacts for sweeps and plans.
//!
//! All renderers are pure string builders: identical inputs give identical
//! bytes, so outputs can be diffed and checksummed.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::economy::{Economy, ProductionPlan};
use crate::error::IoError;
use crate::experiments::{AggregateGrid, ExperimentRecord, GridKind, Outcome, RecordStatus};

pub const RECORD_HEADER: [&str; 16] = [
    "replication",
    "economy_seed",
    "depth_requested",
    "depth_achieved",
    "size",
    "gamma",
    "feasible",
    "psi_star",
    "oligarch_baseline",
    "oligarch_optimal",
    "final_gdp",
    "relative_gdp",
    "profit_gain",
    "gdp_loss",
    "inefficiency_ratio",
    "status",
];

/// What was written where.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WrittenFile {
    pub path: PathBuf,
    /// Data rows for CSV, drawn cells or series for SVG.
    pub items: usize,
    pub bytes: usize,
    /// Hex SHA-256 of the file contents.
    pub sha256: String,
}

fn write_file(path: &Path, contents: &str, items: usize) -> Result<WrittenFile, IoError> {
    std::fs::write(path, contents).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    Ok(WrittenFile {
        path: path.to_path_buf(),
        items,
        bytes: contents.len(),
        sha256: hex::encode(Sha256::digest(contents.as_bytes())),
    })
}

fn csv_error(path: &Path) -> impl Fn(csv::Error) -> IoError + '_ {
    move |source| IoError::Csv { path: path.to_path_buf(), source }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Renders records with the fixed header. Floats use the shortest
/// representation that parses back to the same value.
pub fn records_to_csv(records: &[ExperimentRecord]) -> Result<String, IoError> {
    if records.is_empty() {
        return Err(IoError::Empty("no records".into()));
    }
    let here = Path::new("<memory>");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(RECORD_HEADER).map_err(csv_error(here))?;
    for r in records {
        let res = r.result.as_ref();
        let row = [
            r.replication.to_string(),
            r.economy_seed.to_string(),
            r.depth_requested.to_string(),
            opt(r.depth_achieved),
            r.size.to_string(),
            r.gamma.to_string(),
            r.feasible.to_string(),
            opt(res.map(|s| s.psi_star)),
            opt(res.map(|s| s.oligarch_baseline)),
            opt(res.map(|s| s.oligarch_optimal)),
            opt(res.map(|s| s.final_gdp)),
            opt(res.map(|s| s.relative_gdp)),
            opt(res.map(|s| s.profit_gain)),
            opt(res.map(|s| s.gdp_loss)),
            opt(res.and_then(|s| s.inefficiency_ratio)),
            r.status.to_string(),
        ];
        w.write_record(&row).map_err(csv_error(here))?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Format { path: here.into(), message: e.to_string() })?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn emit_csv(records: &[ExperimentRecord], path: &Path) -> Result<WrittenFile, IoError> {
    let text = records_to_csv(records)?;
    write_file(path, &text, records.len())
}

/// Inverse of [`records_to_csv`].
pub fn parse_records_csv(text: &str, path: &Path) -> Result<Vec<ExperimentRecord>, IoError> {
    let bad = |message: String| IoError::Format { path: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(csv_error(path))?;
    if header.iter().ne(RECORD_HEADER) {
        return Err(bad(format!("unexpected header {:?}", header.iter().collect::<Vec<_>>())));
    }
    let mut records = Vec::new();
    for (line, row) in reader.records().enumerate() {
        let row = row.map_err(csv_error(path))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let at = |i: usize, e: &dyn std::fmt::Display| bad(format!("row {}: {}: {e}", line + 1, RECORD_HEADER[i]));
        let req = |i: usize| -> Result<f64, IoError> { field(i).parse().map_err(|e| at(i, &e)) };
        let opt_f = |i: usize| -> Result<Option<f64>, IoError> {
            match field(i) {
                "" => Ok(None),
                s => s.parse().map(Some).map_err(|e| at(i, &e)),
            }
        };
        let int = |i: usize| -> Result<usize, IoError> { field(i).parse().map_err(|e| at(i, &e)) };

        let status: RecordStatus = field(15).parse().expect("status parsing is infallible");
        let result = match opt_f(7)? {
            None => None,
            Some(psi_star) => Some(Outcome {
                psi_star,
                oligarch_baseline: req(8)?,
                oligarch_optimal: req(9)?,
                final_gdp: req(10)?,
                relative_gdp: req(11)?,
                profit_gain: req(12)?,
                gdp_loss: req(13)?,
                inefficiency_ratio: opt_f(14)?,
            }),
        };
        records.push(ExperimentRecord {
            replication: int(0)?,
            economy_seed: field(1).parse().map_err(|e| at(1, &e))?,
            depth_requested: int(2)?,
            depth_achieved: match field(3) {
                "" => None,
                _ => Some(int(3)?),
            },
            size: int(4)?,
            gamma: req(5)?,
            feasible: field(6).parse().map_err(|e| at(6, &e))?,
            result,
            status,
        });
    }
    Ok(records)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<ExperimentRecord>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|source| IoError::Io { path: path.to_path_buf(), source })?;
    parse_records_csv(&text, path)
}

/// One row per cell, with the axis labels spelled out.
pub fn emit_grid_csv(grid: &AggregateGrid, path: &Path) -> Result<WrittenFile, IoError> {
    if grid.cells.is_empty() {
        return Err(IoError::Empty("grid has no cells".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        grid.rows.name.as_str(),
        grid.columns.name.as_str(),
        "column_label",
        "mean",
        "count",
        "std",
        "count_undefined",
        "count_failed",
        "count_infeasible",
    ];
    w.write_record(header).map_err(csv_error(path))?;
    let mut rows = 0;
    for (ri, row) in grid.cells.iter().enumerate() {
        for (ci, c) in row.iter().enumerate() {
            w.write_record([
                grid.rows.values[ri].to_string(),
                grid.columns.values[ci].to_string(),
                grid.columns.labels[ci].clone(),
                opt(c.mean),
                c.count.to_string(),
                opt(c.std),
                c.count_undefined.to_string(),
                c.count_failed.to_string(),
                c.count_infeasible.to_string(),
            ])
            .map_err(csv_error(path))?;
            rows += 1;
        }
    }
    let bytes = w.into_inner().map_err(|e| IoError::Format { path: path.into(), message: e.to_string() })?;
    write_file(path, &String::from_utf8(bytes).expect("utf-8"), rows)
}

/// Nonzero flows of a plan, 1-based like the economy files.
pub fn emit_plan_csv(economy: &Economy, plan: &ProductionPlan, path: &Path) -> Result<WrittenFile, IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["supplier", "consumer", "beta", "flow"]).map_err(csv_error(path))?;
    let mut rows = 0;
    for (k, m, beta) in economy.edges() {
        let flow = plan.flow(k, m);
        w.write_record([(k + 1).to_string(), (m + 1).to_string(), beta.to_string(), flow.to_string()])
            .map_err(csv_error(path))?;
        rows += 1;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Format { path: path.into(), message: e.to_string() })?;
    write_file(path, &String::from_utf8(bytes).expect("utf-8"), rows)
}

pub fn emit_grids_json(grids: &[AggregateGrid], path: &Path) -> Result<WrittenFile, IoError> {
    let text = serde_json::to_string_pretty(grids).map_err(|source| IoError::Json { path: path.into(), source })?;
    write_file(path, &(text + "\n"), grids.len())
}

pub fn read_grids_json(path: &Path) -> Result<Vec<AggregateGrid>, IoError> {
    crate::io::read_json(path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FigureKind {
    Heatmap,
    LineFamily,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FigureSpec {
    pub kind: FigureKind,
    pub title: String,
    /// Overrides the axis names taken from the grid.
    pub x_label: Option<String>,
    pub y_label: Option<String>,
    /// Digits after the decimal point in cell and tick labels.
    pub decimals: usize,
    /// Heatmap colours for the grid minimum and maximum.
    pub low_color: [u8; 3],
    pub high_color: [u8; 3],
}

impl Default for FigureSpec {
    fn default() -> Self {
        Self {
            kind: FigureKind::Heatmap,
            title: String::new(),
            x_label: None,
            y_label: None,
            decimals: 2,
            low_color: [178, 24, 43],
            high_color: [247, 247, 247],
        }
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn hex_color([r, g, b]: [u8; 3]) -> String {
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn mix(low: [u8; 3], high: [u8; 3], t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    std::array::from_fn(|i| (low[i] as f64 + t * (high[i] as f64 - low[i] as f64)).round() as u8)
}

fn metric_label(grid: &AggregateGrid) -> &'static str {
    match grid.kind {
        GridKind::InefficiencyByDepthSize { .. } => "GDP loss per unit of oligarch gain",
        _ => "GDP relative to the optimum",
    }
}

const CELL_W: f64 = 44.0;
const CELL_H: f64 = 30.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_TOP: f64 = 50.0;
const LEGEND_W: f64 = 90.0;

/// Heatmap of one grid: one `rect.cell` per populated cell, hatched
/// `rect.empty` where no record entered the mean.
pub fn render_heatmap_svg(grid: &AggregateGrid, spec: &FigureSpec) -> Result<(String, usize), String> {
    let (n_rows, n_cols) = (grid.rows.values.len(), grid.columns.values.len());
    if n_rows == 0 || n_cols == 0 || grid.cells.len() != n_rows || grid.cells.iter().any(|r| r.len() != n_cols) {
        return Err("grid cells do not match its axes".into());
    }
    let means: Vec<f64> = grid.cells.iter().flatten().filter_map(|c| c.mean).collect();
    let lo = means.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shade = |v: f64| {
        let t = if hi - lo > 1e-12 { (v - lo) / (hi - lo) } else { 0.5 };
        hex_color(mix(spec.low_color, spec.high_color, t))
    };
    let d = spec.decimals;
    let plot_w = n_cols as f64 * CELL_W;
    let plot_h = n_rows as f64 * CELL_H;
    let width = MARGIN_LEFT + plot_w + LEGEND_W;
    let height = MARGIN_TOP + plot_h + 50.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        s,
        "<defs><pattern id=\"hatch\" width=\"6\" height=\"6\" patternUnits=\"userSpaceOnUse\" patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"6\" stroke=\"#888888\" stroke-width=\"1.5\"/></pattern>"
    );
    let _ = writeln!(
        s,
        "<linearGradient id=\"scale\" x1=\"0\" y1=\"1\" x2=\"0\" y2=\"0\"><stop offset=\"0\" stop-color=\"{}\"/><stop offset=\"1\" stop-color=\"{}\"/></linearGradient></defs>",
        hex_color(spec.low_color),
        hex_color(spec.high_color)
    );
    let title = if spec.title.is_empty() { metric_label(grid).to_string() } else { spec.title.clone() };
    let _ = writeln!(s, r#"<text x="{MARGIN_LEFT}" y="20" font-size="14">{}</text>"#, escape(&title));

    let mut drawn = 0;
    for (ri, row) in grid.cells.iter().enumerate() {
        let y = MARGIN_TOP + ri as f64 * CELL_H;
        for (ci, cell) in row.iter().enumerate() {
            let x = MARGIN_LEFT + ci as f64 * CELL_W;
            match cell.mean.filter(|_| cell.count > 0) {
                Some(mean) => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="cell" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="{}" stroke="white" data-count="{}"/>"#,
                        shade(mean),
                        cell.count
                    );
                    let _ = writeln!(
                        s,
                        r#"<text class="label" x="{}" y="{}" text-anchor="middle">{mean:.d$}</text>"#,
                        x + CELL_W / 2.0,
                        y + CELL_H / 2.0 + 4.0
                    );
                    drawn += 1;
                }
                None => {
                    let _ = writeln!(
                        s,
                        r#"<rect class="empty" x="{x}" y="{y}" width="{CELL_W}" height="{CELL_H}" fill="url(#hatch)" stroke="white"/>"#
                    );
                }
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 6.0,
            y + CELL_H / 2.0 + 4.0,
            escape(&grid.rows.labels[ri])
        );
    }
    for (ci, label) in grid.columns.labels.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN_LEFT + (ci as f64 + 0.5) * CELL_W,
            MARGIN_TOP + plot_h + 16.0,
            escape(label)
        );
    }
    let x_label = spec.x_label.clone().unwrap_or_else(|| grid.columns.name.clone());
    let y_label = spec.y_label.clone().unwrap_or_else(|| grid.rows.name.clone());
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        MARGIN_TOP + plot_h + 36.0,
        escape(&x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        escape(&y_label)
    );

    // Legend: gradient bar with the scale end points.
    let lx = MARGIN_LEFT + plot_w + 20.0;
    let _ = writeln!(
        s,
        r##"<rect class="legend" x="{lx}" y="{MARGIN_TOP}" width="16" height="{plot_h}" fill="url(#scale)" stroke="#444444"/>"##
    );
    if !means.is_empty() {
        let _ = writeln!(s, r#"<text x="{}" y="{}">{hi:.d$}</text>"#, lx + 20.0, MARGIN_TOP + 8.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}">{lo:.d$}</text>"#, lx + 20.0, MARGIN_TOP + plot_h);
    }
    s.push_str("</svg>\n");
    Ok((s, drawn))
}

pub fn emit_heatmap_svg(grid: &AggregateGrid, spec: &FigureSpec, path: &Path) -> Result<WrittenFile, IoError> {
    let (svg, drawn) =
        render_heatmap_svg(grid, spec).map_err(|message| IoError::Format { path: path.into(), message })?;
    write_file(path, &svg, drawn)
}

const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 300.0;

/// Line family from size×γ grids, one grid per depth: each (depth, γ) pair
/// is one `path.series` over the shared size axis. Empty cells break the
/// line instead of being bridged. γ = 1 is drawn black, lower capture
/// powers gray; depths are told apart by dash pattern.
pub fn render_lines_svg(grids: &[AggregateGrid], spec: &FigureSpec) -> Result<(String, usize), String> {
    let first = grids.first().ok_or("no grids to draw")?;
    for g in grids {
        if !matches!(g.kind, GridKind::RelativeGdpBySizeGamma { .. }) {
            return Err(format!("line charts need size-by-gamma grids, got {}", g.kind.name()));
        }
        if g.rows.values != first.rows.values {
            return Err("all series must share the size axis".into());
        }
        if g.cells.len() != g.rows.values.len() || g.cells.iter().any(|r| r.len() != g.columns.values.len()) {
            return Err("grid cells do not match its axes".into());
        }
    }
    let sizes = &first.rows.values;
    let means: Vec<f64> = grids.iter().flat_map(|g| g.cells.iter().flatten().filter_map(|c| c.mean)).collect();
    let lo = means.iter().copied().fold(1.0_f64, f64::min);
    let hi = means.iter().copied().fold(1.0_f64, f64::max);
    // Round the value range outwards to tenths.
    let (y0, y1) = ((lo * 10.0).floor() / 10.0, (hi * 10.0).ceil() / 10.0);
    let (y0, y1) = if y1 - y0 < 1e-9 { (y0 - 0.1, y1 + 0.1) } else { (y0, y1) };
    let (x0, x1) = (sizes.first().copied().unwrap_or(0.0), sizes.last().copied().unwrap_or(1.0));
    let px = |size: f64| if x1 > x0 { MARGIN_LEFT + (size - x0) / (x1 - x0) * PLOT_W } else { MARGIN_LEFT + PLOT_W / 2.0 };
    let py = |v: f64| MARGIN_TOP + (y1 - v) / (y1 - y0) * PLOT_H;
    let d = spec.decimals;
    let width = MARGIN_LEFT + PLOT_W + 130.0;
    let height = MARGIN_TOP + PLOT_H + 50.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">"#
    );
    let title = if spec.title.is_empty() { metric_label(first).to_string() } else { spec.title.clone() };
    let _ = writeln!(s, r#"<text x="{MARGIN_LEFT}" y="20" font-size="14">{}</text>"#, escape(&title));
    let _ = writeln!(
        s,
        r##"<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="#444444"/>"##
    );
    for i in 0..=5 {
        let v = y0 + (y1 - y0) * i as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{MARGIN_LEFT}" y1="{y:.2}" x2="{}" y2="{y:.2}" stroke="#dddddd"/><text x="{}" y="{:.2}" text-anchor="end">{v:.d$}</text>"##,
            MARGIN_LEFT + PLOT_W,
            MARGIN_LEFT - 6.0,
            py(v) + 4.0,
            y = py(v)
        );
    }
    for (i, label) in first.rows.labels.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#,
            px(sizes[i]),
            MARGIN_TOP + PLOT_H + 16.0,
            escape(label)
        );
    }
    let x_label = spec.x_label.clone().unwrap_or_else(|| "oligarchization".into());
    let y_label = spec.y_label.clone().unwrap_or_else(|| first.metric.clone());
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + PLOT_W / 2.0,
        MARGIN_TOP + PLOT_H + 36.0,
        escape(&x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        MARGIN_TOP + PLOT_H / 2.0,
        MARGIN_TOP + PLOT_H / 2.0,
        escape(&y_label)
    );

    const DASHES: [&str; 5] = ["none", "6 3", "2 2", "8 3 2 3", "1 3"];
    let mut series = 0;
    for (gi, grid) in grids.iter().enumerate() {
        let GridKind::RelativeGdpBySizeGamma { depth } = grid.kind else { unreachable!() };
        let dash = DASHES[gi % DASHES.len()];
        for (ci, &gamma) in grid.columns.values.iter().enumerate() {
            let full = (gamma - 1.0).abs() < 1e-12;
            let (stroke, width) = if full { ("#000000", 2.0) } else { ("#999999", 1.0) };
            let mut path = String::new();
            let mut pen_down = false;
            let mut points = String::new();
            for (ri, &size) in sizes.iter().enumerate() {
                match grid.cells[ri][ci].mean {
                    Some(v) => {
                        let _ = write!(path, "{}{:.2} {:.2} ", if pen_down { "L" } else { "M" }, px(size), py(v));
                        let _ = writeln!(
                            points,
                            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="{}" fill="{stroke}"/>"#,
                            px(size),
                            py(v),
                            width
                        );
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            let _ = writeln!(
                s,
                r#"<path class="series" data-depth="{depth}" data-gamma="{gamma}" d="{}" fill="none" stroke="{stroke}" stroke-width="{width}" stroke-dasharray="{dash}"/>"#,
                path.trim_end()
            );
            s.push_str(&points);
            series += 1;
        }
        let ly = MARGIN_TOP + 14.0 + gi as f64 * 16.0;
        let lx = MARGIN_LEFT + PLOT_W + 12.0;
        let _ = writeln!(
            s,
            r##"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="#000000" stroke-dasharray="{dash}"/><text x="{}" y="{}">depth {depth}</text>"##,
            lx + 24.0,
            lx + 30.0,
            ly + 4.0
        );
    }
    let ly = MARGIN_TOP + 14.0 + grids.len() as f64 * 16.0 + 8.0;
    let lx = MARGIN_LEFT + PLOT_W + 12.0;
    let _ = writeln!(
        s,
        r#"<text x="{lx}" y="{ly}">black: γ = 1</text><text x="{lx}" y="{}">gray: γ &lt; 1</text>"#,
        ly + 14.0
    );
    s.push_str("</svg>\n");
    Ok((s, series))
}

pub fn emit_lines_svg(grids: &[AggregateGrid], spec: &FigureSpec, path: &Path) -> Result<WrittenFile, IoError> {
    let (svg, series) =
        render_lines_svg(grids, spec).map_err(|message| IoError::Format { path: path.into(), message })?;
    write_file(path, &svg, series)
}

/// Draws `spec.kind` from the given grids; heatmaps take exactly one.
pub fn emit_figure(grids: &[AggregateGrid], spec: &FigureSpec, path: &Path) -> Result<WrittenFile, IoError> {
    match spec.kind {
        FigureKind::Heatmap => match grids {
            [grid] => emit_heatmap_svg(grid, spec, path),
            _ => Err(IoError::Format {
                path: path.into(),
                message: format!("a heatmap draws one grid, got {}", grids.len()),
            }),
        },
        FigureKind::LineFamily => emit_lines_svg(grids, spec, path),
    }
}
