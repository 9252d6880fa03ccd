//! Deterministic CSV and SVG emission for experiment results.
//!
//! Every plot gets a sibling CSV carrying exactly the plotted data, and
//! re-running over the same results overwrites byte-identically. Numeric
//! fields use Rust's shortest round-trip decimal formatting.

use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::eval::experiment::{ExperimentResult, SweepTable};
use crate::eval::scalability::ScalabilityTable;
use crate::trainer::EpisodeMetrics;

/// A named 2-D point cloud for projection plots.
#[derive(Debug, Clone)]
pub struct Projection2D {
    pub name: String,
    pub points: Array2<f64>,
    pub labels: Vec<i64>,
}

/// Everything a report can render. Absent parts are skipped.
#[derive(Debug, Clone, Default)]
pub struct ReportBundle {
    pub experiments: Vec<ExperimentResult>,
    pub metrics: Option<Vec<EpisodeMetrics>>,
    pub sweep: Option<SweepTable>,
    pub scalability: Option<ScalabilityTable>,
    pub projections: Vec<Projection2D>,
}

/// Writes the pre-training metrics table.
pub fn write_metrics_csv(path: &Path, metrics: &[EpisodeMetrics]) -> Result<()> {
    let mut csv = String::from(
        "episode,weighted_loss,recon_loss,mean_weight,active_fraction,lambda1,lambda2\n",
    );
    for m in metrics {
        writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            m.episode,
            m.weighted_loss,
            m.recon_loss,
            m.mean_weight,
            m.active_fraction,
            m.lambda1,
            m.lambda2
        )
        .expect("write to String");
    }
    std::fs::write(path, csv).map_err(|e| Error::io(path, e))
}

/// Renders CSVs and SVG plots for every present part of the bundle.
pub fn emit_report(bundle: &ReportBundle, outdir: &Path) -> Result<()> {
    std::fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;

    // Accuracy table (always written, header-only when empty).
    let mut csv = String::from("label,n_runs,mean,std,accuracies\n");
    for r in &bundle.experiments {
        let accs: Vec<String> = r.runs.iter().map(|o| format!("{}", o.accuracy)).collect();
        writeln!(
            csv,
            "{},{},{},{},{}",
            r.label,
            r.n_runs,
            r.mean,
            r.std.map(|s| format!("{s}")).unwrap_or_else(|| "na".into()),
            accs.join(";")
        )
        .expect("write to String");
    }
    let path = outdir.join("accuracy.csv");
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;

    if let Some(metrics) = &bundle.metrics {
        write_metrics_csv(&outdir.join("metrics.csv"), metrics)?;
        if !metrics.is_empty() {
            let series = vec![
                (
                    "mean_weight".to_string(),
                    metrics.iter().map(|m| (m.episode as f64, m.mean_weight)).collect(),
                ),
                (
                    "active_fraction".to_string(),
                    metrics.iter().map(|m| (m.episode as f64, m.active_fraction)).collect(),
                ),
            ];
            let svg = line_chart_svg(&series, "signal weights per episode", false, false);
            let path = outdir.join("weights.svg");
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            let series = vec![
                (
                    "weighted_loss".to_string(),
                    metrics.iter().map(|m| (m.episode as f64, m.weighted_loss)).collect(),
                ),
                (
                    "recon_loss".to_string(),
                    metrics.iter().map(|m| (m.episode as f64, m.recon_loss)).collect(),
                ),
            ];
            let svg = line_chart_svg(&series, "losses per episode", false, false);
            let path = outdir.join("losses.svg");
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        }
    }

    if let Some(sweep) = &bundle.sweep {
        let mut csv = String::from("lambda1,lambda2,train_acc,test_acc,active_fraction_ep0\n");
        for r in &sweep.rows {
            writeln!(
                csv,
                "{},{},{},{},{}",
                r.lambda1, r.lambda2, r.train_acc, r.test_acc, r.active_fraction_ep0
            )
            .expect("write to String");
        }
        let path = outdir.join("grid.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        if !sweep.rows.is_empty() {
            let svg = sweep_heatmap_svg(sweep, &|r| r.test_acc, "test accuracy");
            let path = outdir.join("sweep_test.svg");
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
            let svg = sweep_heatmap_svg(sweep, &|r| r.train_acc, "train accuracy");
            let path = outdir.join("sweep_train.svg");
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        }
    }

    if let Some(scal) = &bundle.scalability {
        let mut csv = String::from("levels,num_nodes,seconds,error\n");
        for c in &scal.cells {
            writeln!(
                csv,
                "{},{},{},{}",
                c.levels,
                c.num_nodes,
                c.seconds.map(|s| format!("{s}")).unwrap_or_else(|| "na".into()),
                c.error.clone().unwrap_or_default()
            )
            .expect("write to String");
        }
        let mut slope_lines = String::from("levels,slope\n");
        for (l, s) in &scal.slopes {
            writeln!(
                slope_lines,
                "{},{}",
                l,
                s.map(|v| format!("{v}")).unwrap_or_else(|| "na".into())
            )
            .expect("write to String");
        }
        let path = outdir.join("scalability.csv");
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        let path = outdir.join("scalability_slopes.csv");
        std::fs::write(&path, slope_lines).map_err(|e| Error::io(&path, e))?;
        let series: Vec<(String, Vec<(f64, f64)>)> = scal
            .slopes
            .iter()
            .map(|(l, _)| {
                (
                    format!("L={l}"),
                    scal.cells
                        .iter()
                        .filter(|c| c.levels == *l && c.seconds.is_some())
                        .map(|c| (c.num_nodes as f64, c.seconds.unwrap()))
                        .collect(),
                )
            })
            .collect();
        if series.iter().any(|(_, pts)| !pts.is_empty()) {
            let svg = line_chart_svg(&series, "wall time vs target size", true, true);
            let path = outdir.join("scalability.svg");
            std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
        }
    }

    for proj in &bundle.projections {
        let mut csv = String::from("node_id,x,y,label\n");
        for i in 0..proj.points.nrows() {
            writeln!(csv, "{i},{},{},{}", proj.points[[i, 0]], proj.points[[i, 1]], proj.labels[i])
                .expect("write to String");
        }
        let path = outdir.join(format!("{}.csv", proj.name));
        std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
        let svg = scatter_svg(&proj.points, &proj.labels, &proj.name);
        let path = outdir.join(format!("{}.svg", proj.name));
        std::fs::write(&path, svg).map_err(|e| Error::io(&path, e))?;
    }

    Ok(())
}

/// Loads a results directory produced by earlier commands back into a
/// bundle: `result.json`, `metrics.csv`, `grid.csv`, `scalability.csv`
/// (with `scalability_slopes.csv`), and any `*_projection.csv` files.
pub fn collect_bundle(results_dir: &Path) -> Result<ReportBundle> {
    let mut bundle = ReportBundle::default();
    let path = results_dir.join("result.json");
    if path.exists() {
        let raw = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        if let Ok(list) = serde_json::from_str::<Vec<ExperimentResult>>(&raw) {
            bundle.experiments = list;
        }
    }
    let path = results_dir.join("metrics.csv");
    if path.exists() {
        bundle.metrics = Some(read_metrics_csv(&path)?);
    }
    let path = results_dir.join("grid.csv");
    if path.exists() {
        bundle.sweep = Some(read_sweep_csv(&path)?);
    }
    let path = results_dir.join("scalability.csv");
    if path.exists() {
        bundle.scalability = Some(read_scalability_csv(
            &path,
            &results_dir.join("scalability_slopes.csv"),
        )?);
    }
    let mut entries: Vec<_> = std::fs::read_dir(results_dir)
        .map_err(|e| Error::io(results_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    entries.sort();
    for path in entries {
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else { continue };
        if let Some(stem) = name.strip_suffix("_projection.csv") {
            let (points, labels) = read_projection_csv(&path)?;
            bundle.projections.push(Projection2D {
                name: format!("{stem}_projection"),
                points,
                labels,
            });
        }
    }
    Ok(bundle)
}

fn csv_rows(path: &Path, header: &str) -> Result<Vec<Vec<String>>> {
    let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = raw.lines();
    match lines.next() {
        Some(h) if h == header => {}
        other => {
            return Err(Error::Format(format!(
                "{}: expected header {header:?}, found {other:?}",
                path.display()
            )))
        }
    }
    Ok(lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.split(',').map(|s| s.to_string()).collect())
        .collect())
}

fn parse_f64(s: &str, path: &Path) -> Result<f64> {
    s.parse().map_err(|_| Error::Format(format!("{}: bad number {s:?}", path.display())))
}

/// Reads a metrics table written by [`write_metrics_csv`].
pub fn read_metrics_csv(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let rows = csv_rows(
        path,
        "episode,weighted_loss,recon_loss,mean_weight,active_fraction,lambda1,lambda2",
    )?;
    rows.iter()
        .map(|f| {
            if f.len() != 7 {
                return Err(Error::Format(format!("{}: bad row", path.display())));
            }
            Ok(EpisodeMetrics {
                episode: f[0]
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: bad episode", path.display())))?,
                weighted_loss: parse_f64(&f[1], path)?,
                recon_loss: parse_f64(&f[2], path)?,
                mean_weight: parse_f64(&f[3], path)?,
                active_fraction: parse_f64(&f[4], path)?,
                lambda1: parse_f64(&f[5], path)?,
                lambda2: parse_f64(&f[6], path)?,
            })
        })
        .collect()
}

fn read_sweep_csv(path: &Path) -> Result<SweepTable> {
    let rows = csv_rows(path, "lambda1,lambda2,train_acc,test_acc,active_fraction_ep0")?;
    let rows = rows
        .iter()
        .map(|f| {
            Ok(crate::eval::SweepRow {
                lambda1: parse_f64(&f[0], path)?,
                lambda2: parse_f64(&f[1], path)?,
                train_acc: parse_f64(&f[2], path)?,
                test_acc: parse_f64(&f[3], path)?,
                active_fraction_ep0: parse_f64(&f[4], path)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { rows })
}

fn read_scalability_csv(path: &Path, slopes_path: &Path) -> Result<ScalabilityTable> {
    let rows = csv_rows(path, "levels,num_nodes,seconds,error")?;
    let cells = rows
        .iter()
        .map(|f| {
            Ok(crate::eval::ScalabilityCell {
                levels: f[0]
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: bad levels", path.display())))?,
                num_nodes: f[1]
                    .parse()
                    .map_err(|_| Error::Format(format!("{}: bad size", path.display())))?,
                seconds: if f[2] == "na" { None } else { Some(parse_f64(&f[2], path)?) },
                error: if f[3].is_empty() { None } else { Some(f[3].clone()) },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut slopes = Vec::new();
    if slopes_path.exists() {
        for f in csv_rows(slopes_path, "levels,slope")? {
            let l: usize = f[0]
                .parse()
                .map_err(|_| Error::Format(format!("{}: bad levels", slopes_path.display())))?;
            let s = if f[1] == "na" { None } else { Some(parse_f64(&f[1], slopes_path)?) };
            slopes.push((l, s));
        }
    }
    Ok(ScalabilityTable { cells, slopes })
}

fn read_projection_csv(path: &Path) -> Result<(Array2<f64>, Vec<i64>)> {
    let rows = csv_rows(path, "node_id,x,y,label")?;
    let mut points = Array2::zeros((rows.len(), 2));
    let mut labels = Vec::with_capacity(rows.len());
    for (i, f) in rows.iter().enumerate() {
        points[[i, 0]] = parse_f64(&f[1], path)?;
        points[[i, 1]] = parse_f64(&f[2], path)?;
        labels.push(
            f[3].parse()
                .map_err(|_| Error::Format(format!("{}: bad label", path.display())))?,
        );
    }
    Ok((points, labels))
}

/// Projects rows onto their top two principal components (power iteration
/// with deflation on the covariance; deterministic start vectors).
pub fn pca_2d(x: &Array2<f64>) -> Array2<f64> {
    let (n, d) = x.dim();
    let mut centered = x.clone();
    for c in 0..d {
        let mean = centered.column(c).sum() / n as f64;
        centered.column_mut(c).mapv_inplace(|v| v - mean);
    }
    if d == 1 {
        let mut out = Array2::zeros((n, 2));
        out.column_mut(0).assign(&centered.column(0));
        return out;
    }
    let cov = centered.t().dot(&centered) / (n.max(2) - 1) as f64;
    let mut components: Vec<Vec<f64>> = Vec::new();
    for k in 0..2usize {
        let mut v: Vec<f64> = (0..d).map(|i| if i % (k + 1) == 0 { 1.0 } else { 0.5 }).collect();
        orthogonalize(&mut v, &components);
        normalize(&mut v);
        for _ in 0..300 {
            let mut next = vec![0.0f64; d];
            for i in 0..d {
                for j in 0..d {
                    next[i] += cov[[i, j]] * v[j];
                }
            }
            orthogonalize(&mut next, &components);
            if norm(&next) < 1e-12 {
                break;
            }
            normalize(&mut next);
            v = next;
        }
        components.push(v);
    }
    let mut out = Array2::zeros((n, 2));
    for i in 0..n {
        for (k, comp) in components.iter().enumerate() {
            out[[i, k]] = (0..d).map(|c| centered[[i, c]] * comp[c]).sum();
        }
    }
    out
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn orthogonalize(v: &mut [f64], basis: &[Vec<f64>]) {
    for b in basis {
        let dot: f64 = v.iter().zip(b.iter()).map(|(a, c)| a * c).sum();
        for (x, c) in v.iter_mut().zip(b.iter()) {
            *x -= dot * c;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    if n > 0.0 {
        for x in v.iter_mut() {
            *x /= n;
        }
    }
}

const PALETTE: [&str; 8] =
    ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"];

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 56.0;

fn axis_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

/// Scatter plot of 2-D points colored by label.
pub fn scatter_svg(points: &Array2<f64>, labels: &[i64], title: &str) -> String {
    let (x0, x1) = axis_range(points.column(0).iter().copied());
    let (y0, y1) = axis_range(points.column(1).iter().copied());
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut svg = svg_header(title);
    for i in 0..points.nrows() {
        let color = if labels[i] >= 0 {
            PALETTE[(labels[i] as usize) % PALETTE.len()]
        } else {
            "#bbbbbb"
        };
        writeln!(
            svg,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}" fill-opacity="0.8"/>"#,
            sx(points[[i, 0]]),
            sy(points[[i, 1]])
        )
        .expect("write svg");
    }
    svg.push_str("</svg>\n");
    svg
}

/// Polyline chart for one or more series; either axis may be logarithmic.
pub fn line_chart_svg(
    series: &[(String, Vec<(f64, f64)>)],
    title: &str,
    log_x: bool,
    log_y: bool,
) -> String {
    let tx = |v: f64| if log_x { v.max(1e-12).ln() } else { v };
    let ty = |v: f64| if log_y { v.max(1e-12).ln() } else { v };
    let (x0, x1) = axis_range(series.iter().flat_map(|(_, p)| p.iter().map(|&(x, _)| tx(x))));
    let (y0, y1) = axis_range(series.iter().flat_map(|(_, p)| p.iter().map(|&(_, y)| ty(y))));
    let sx = |x: f64| MARGIN + (tx(x) - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (ty(y) - y0) / (y1 - y0) * (H - 2.0 * MARGIN);
    let mut svg = svg_header(title);
    for (k, (name, pts)) in series.iter().enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = PALETTE[k % PALETTE.len()];
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            path.join(" ")
        )
        .expect("write svg");
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="12" fill="{color}">{name}</text>"#,
            W - MARGIN - 120.0,
            MARGIN + 16.0 * (k + 1) as f64
        )
        .expect("write svg");
    }
    svg.push_str("</svg>\n");
    svg
}

fn sweep_heatmap_svg(
    sweep: &SweepTable,
    value: &dyn Fn(&crate::eval::SweepRow) -> f64,
    title: &str,
) -> String {
    let mut l1s: Vec<f64> = sweep.rows.iter().map(|r| r.lambda1).collect();
    let mut l2s: Vec<f64> = sweep.rows.iter().map(|r| r.lambda2).collect();
    l1s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    l1s.dedup();
    l2s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    l2s.dedup();
    let (vmin, vmax) = axis_range(sweep.rows.iter().map(|r| value(r)));
    let cw = (W - 2.0 * MARGIN) / l1s.len() as f64;
    let ch = (H - 2.0 * MARGIN) / l2s.len() as f64;
    let mut svg = svg_header(title);
    for r in &sweep.rows {
        let i = l1s.iter().position(|&v| v == r.lambda1).unwrap();
        let j = l2s.iter().position(|&v| v == r.lambda2).unwrap();
        let t = ((value(r) - vmin) / (vmax - vmin)).clamp(0.0, 1.0);
        let shade = (255.0 * (1.0 - t * 0.85)) as u8;
        writeln!(
            svg,
            r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="rgb({shade},{shade},255)" stroke="#ffffff"/>"##,
            MARGIN + i as f64 * cw,
            H - MARGIN - (j + 1) as f64 * ch,
            cw,
            ch
        )
        .expect("write svg");
        writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="10" text-anchor="middle">{:.3}</text>"#,
            MARGIN + (i as f64 + 0.5) * cw,
            H - MARGIN - (j as f64 + 0.5) * ch,
            value(r)
        )
        .expect("write svg");
    }
    svg.push_str("</svg>\n");
    svg
}

fn svg_header(title: &str) -> String {
    format!(
        concat!(
            r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" "##,
            r##"viewBox="0 0 {w} {h}">{nl}"##,
            r##"<rect width="{w}" height="{h}" fill="#ffffff"/>{nl}"##,
            r##"<text x="{tx}" y="24" font-size="14" text-anchor="middle">{title}</text>{nl}"##
        ),
        w = W,
        h = H,
        tx = W / 2.0,
        title = title,
        nl = "\n"
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::experiment::RunOutcome;
    use tempfile::tempdir;

    #[test]
    fn empty_bundle_writes_header_only_csv_and_no_plots() {
        let dir = tempdir().unwrap();
        emit_report(&ReportBundle::default(), dir.path()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("accuracy.csv")).unwrap();
        assert_eq!(csv, "label,n_runs,mean,std,accuracies\n");
        let svgs: Vec<_> = std::fs::read_dir(dir.path())
            .unwrap()
            .filter(|e| {
                e.as_ref().unwrap().path().extension().map(|x| x == "svg").unwrap_or(false)
            })
            .collect();
        assert!(svgs.is_empty());
    }

    #[test]
    fn rerun_is_byte_identical() {
        let dir = tempdir().unwrap();
        let bundle = ReportBundle {
            experiments: vec![ExperimentResult {
                label: "full".into(),
                runs: vec![
                    RunOutcome { seed: 0, accuracy: 0.75, wall_seconds: 1.0 },
                    RunOutcome { seed: 1, accuracy: 0.8125, wall_seconds: 1.1 },
                ],
                mean: 0.78125,
                std: Some(0.04419417382415922),
                n_runs: 2,
            }],
            metrics: Some(vec![EpisodeMetrics {
                episode: 0,
                weighted_loss: 1.5,
                recon_loss: 0.25,
                mean_weight: 0.5,
                active_fraction: 0.75,
                lambda1: 0.2,
                lambda2: 1.0,
            }]),
            ..ReportBundle::default()
        };
        emit_report(&bundle, dir.path()).unwrap();
        let first = std::fs::read(dir.path().join("accuracy.csv")).unwrap();
        let first_svg = std::fs::read(dir.path().join("weights.svg")).unwrap();
        emit_report(&bundle, dir.path()).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("accuracy.csv")).unwrap());
        assert_eq!(first_svg, std::fs::read(dir.path().join("weights.svg")).unwrap());
    }

    #[test]
    fn every_plot_has_a_sibling_csv() {
        let dir = tempdir().unwrap();
        let mut points = Array2::zeros((4, 2));
        points[[0, 0]] = 1.0;
        points[[1, 1]] = 2.0;
        points[[2, 0]] = -1.0;
        points[[3, 1]] = -2.0;
        let bundle = ReportBundle {
            projections: vec![Projection2D {
                name: "proj".into(),
                points,
                labels: vec![0, 1, 0, 1],
            }],
            ..ReportBundle::default()
        };
        emit_report(&bundle, dir.path()).unwrap();
        for entry in std::fs::read_dir(dir.path()).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().map(|x| x == "svg").unwrap_or(false) {
                let sibling = path.with_extension("csv");
                assert!(sibling.exists(), "no CSV next to {}", path.display());
            }
        }
    }

    #[test]
    fn pca_recovers_a_planted_direction() {
        // Points spread along one direction in 5-D: the first component
        // captures nearly all variance.
        let mut x = Array2::zeros((50, 5));
        for i in 0..50 {
            let t = i as f64 / 10.0;
            for c in 0..5 {
                x[[i, c]] = t * (c as f64 + 1.0);
            }
        }
        let proj = pca_2d(&x);
        let var0: f64 = proj.column(0).iter().map(|v| v * v).sum();
        let var1: f64 = proj.column(1).iter().map(|v| v * v).sum();
        assert!(var0 > 100.0 * var1.max(1e-12), "{var0} vs {var1}");
    }
}
