use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::experiment::ExperimentResult;
use super::metrics::{MetricKind, MetricTable};
use crate::error::{GrdaError, Result};
use crate::graph::DomainGraph;
use crate::model::History;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: String,
    pub runs: usize,
    pub metric: MetricKind,
    pub target_mean: Option<f64>,
    pub target_std: Option<f64>,
    pub levels: [Option<f64>; 3],
    /// Mean over runs of the worst target domain.
    pub worst_domain: Option<f64>,
}

fn mean_std(v: &[f64]) -> (Option<f64>, Option<f64>) {
    if v.is_empty() {
        return (None, None);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    (Some(m), Some(var.sqrt()))
}

/// One row per method, in order of first appearance.
pub fn summarize(tables: &[MetricTable]) -> Vec<SummaryRow> {
    let mut methods: Vec<&str> = Vec::new();
    for t in tables {
        if !methods.contains(&t.method.as_str()) {
            methods.push(&t.method);
        }
    }
    methods
        .into_iter()
        .map(|m| {
            let ts: Vec<&MetricTable> = tables.iter().filter(|t| t.method == m).collect();
            let (target_mean, target_std) =
                mean_std(&ts.iter().filter_map(|t| t.aggregates.target_mean).collect::<Vec<_>>());
            let mut levels = [None; 3];
            for (l, slot) in levels.iter_mut().enumerate() {
                *slot = mean_std(&ts.iter().filter_map(|t| t.aggregates.levels[l]).collect::<Vec<_>>()).0;
            }
            let worst_domain = mean_std(&ts.iter().filter_map(|t| t.worst_target()).collect::<Vec<_>>()).0;
            SummaryRow { method: m.to_string(), runs: ts.len(), metric: ts[0].metric, target_mean, target_std, levels, worst_domain }
        })
        .collect()
}

fn summary_csv(rows: &[SummaryRow]) -> String {
    let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_default();
    let mut s = String::from("method,runs,metric,target_mean,target_std,level_1,level_2,level_3,worst_domain\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.runs,
            r.metric.name(),
            f(r.target_mean),
            f(r.target_std),
            f(r.levels[0]),
            f(r.levels[1]),
            f(r.levels[2]),
            f(r.worst_domain)
        );
    }
    s
}

/// Fruchterman-Reingold positions in the unit square.
fn layout(graph: &DomainGraph, seed: u64) -> Vec<(f64, f64)> {
    let n = graph.n();
    let mut rng = SeededRng::stream(seed, "layout");
    let mut pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.uniform(), rng.uniform())).collect();
    let k = (1.0 / n as f64).sqrt();
    let iters = 300;
    for it in 0..iters {
        let temp = 0.1 * (1.0 - it as f64 / iters as f64) + 1e-3;
        let mut disp = vec![(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (dx, dy) = (pos[i].0 - pos[j].0, pos[i].1 - pos[j].1);
                let d = (dx * dx + dy * dy).sqrt().max(1e-6);
                let mut f = k * k / d;
                if graph.has_edge(i, j) {
                    f -= d * d / k;
                }
                disp[i].0 += dx / d * f;
                disp[i].1 += dy / d * f;
            }
        }
        for i in 0..n {
            let (dx, dy) = disp[i];
            let d = (dx * dx + dy * dy).sqrt().max(1e-9);
            let step = d.min(temp);
            pos[i].0 += dx / d * step;
            pos[i].1 += dy / d * step;
        }
    }
    let (minx, maxx) = pos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.0), a.1.max(p.0)));
    let (miny, maxy) = pos.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |a, p| (a.0.min(p.1), a.1.max(p.1)));
    let sx = (maxx - minx).max(1e-9);
    let sy = (maxy - miny).max(1e-9);
    pos.into_iter().map(|(x, y)| ((x - minx) / sx, (y - miny) / sy)).collect()
}

/// Red for the best value, blue for the worst. Accuracy maps 100 to red
/// and 0 to blue; errors map the range `[lo, hi]` from red to blue.
pub fn metric_color(value: f64, metric: MetricKind, lo: f64, hi: f64) -> String {
    let t = match metric {
        MetricKind::Accuracy => value / 100.0,
        MetricKind::Mse if hi > lo => 1.0 - (value - lo) / (hi - lo),
        MetricKind::Mse => 1.0,
    }
    .clamp(0.0, 1.0);
    format!("#{:02x}00{:02x}", (255.0 * t).round() as u8, (255.0 * (1.0 - t)).round() as u8)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Node-link drawing with one `circle.node` per domain, sources outlined.
pub fn accuracy_map_svg(
    graph: &DomainGraph,
    values: &[Option<f64>],
    metric: MetricKind,
    sources: &[usize],
    labels: Option<&[String]>,
    title: &str,
    seed: u64,
) -> String {
    let (w, h, m) = (640.0, 640.0, 40.0);
    let pos: Vec<(f64, f64)> =
        layout(graph, seed).into_iter().map(|(x, y)| (m + x * (w - 2.0 * m), m + 20.0 + y * (h - 2.0 * m - 20.0))).collect();
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    let lo = present.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = present.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <title>{}</title>\n<text x=\"{m}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        esc(title),
        esc(title)
    );
    for (i, j) in graph.edges() {
        let _ = writeln!(
            s,
            "<line class=\"edge\" x1=\"{:.1}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#999999\" stroke-width=\"1\"/>",
            pos[i].0, pos[i].1, pos[j].0, pos[j].1
        );
    }
    for (u, p) in pos.iter().enumerate() {
        let v = values.get(u).copied().flatten();
        let fill = v.map_or_else(|| "#cccccc".to_string(), |v| metric_color(v, metric, lo, hi));
        let (stroke, sw) = if sources.contains(&u) { ("#000000", 3) } else { ("#555555", 1) };
        let name = labels.and_then(|l| l.get(u)).cloned().unwrap_or_else(|| u.to_string());
        let shown = v.map(|v| format!("{v:.1}")).unwrap_or_else(|| "n/a".into());
        let _ = writeln!(
            s,
            "<circle class=\"node\" data-domain=\"{u}\" cx=\"{:.1}\" cy=\"{:.1}\" r=\"12\" fill=\"{fill}\" stroke=\"{stroke}\" stroke-width=\"{sw}\"><title>{}: {shown}</title></circle>",
            p.0,
            p.1,
            esc(&name)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"9\" text-anchor=\"middle\">{}</text>",
            p.0,
            p.1 + 24.0,
            esc(&name)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Adversary loss per epoch for each series, with the ceiling drawn as a
/// dashed horizontal line.
pub fn convergence_svg(series: &[(String, &History)], ceiling: f64, title: &str) -> String {
    let (w, h, m) = (720.0, 420.0, 56.0);
    let pts: Vec<(String, Vec<(usize, f64)>)> = series
        .iter()
        .map(|(name, hist)| (name.clone(), hist.records.iter().filter_map(|r| r.l_d.map(|v| (r.epoch, v))).collect()))
        .collect();
    let max_epoch = pts.iter().flat_map(|(_, p)| p.iter().map(|q| q.0)).max().unwrap_or(1).max(1) as f64;
    let ys = pts.iter().flat_map(|(_, p)| p.iter().map(|q| q.1)).chain([ceiling]);
    let (mut lo, mut hi) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |a, y| (a.0.min(y), a.1.max(y)));
    let pad = ((hi - lo) * 0.1).max(1e-3);
    lo -= pad;
    hi += pad;
    let px = |e: f64| m + e / max_epoch * (w - 2.0 * m);
    let py = |v: f64| h - m - (v - lo) / (hi - lo) * (h - 2.0 * m);
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n\
         <title>{}</title>\n<text x=\"{m}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">{}</text>\n",
        esc(title),
        esc(title)
    );
    let _ = writeln!(
        s,
        "<line class=\"axis\" x1=\"{m}\" y1=\"{:.1}\" x2=\"{:.1}\" y2=\"{:.1}\" stroke=\"#000000\"/>\n\
         <line class=\"axis\" x1=\"{m}\" y1=\"{m}\" x2=\"{m}\" y2=\"{:.1}\" stroke=\"#000000\"/>",
        h - m,
        w - m,
        h - m,
        h - m
    );
    for k in 0..=4 {
        let v = lo + (hi - lo) * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{v:.3}</text>",
            m - 6.0,
            py(v) + 3.0
        );
        let e = max_epoch * k as f64 / 4.0;
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{e:.0}</text>",
            px(e),
            h - m + 16.0
        );
    }
    let _ = writeln!(
        s,
        "<line class=\"ceiling\" x1=\"{m}\" y1=\"{y:.2}\" x2=\"{:.1}\" y2=\"{y:.2}\" stroke=\"#d62728\" stroke-dasharray=\"6 4\" stroke-width=\"1.5\"/>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#d62728\" text-anchor=\"end\">ceiling {ceiling:.4}</text>",
        w - m,
        w - m,
        py(ceiling) - 4.0,
        y = py(ceiling)
    );
    let palette = ["#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"];
    for (k, (name, p)) in pts.iter().enumerate() {
        if p.is_empty() {
            continue;
        }
        let coords: Vec<String> = p.iter().map(|&(e, v)| format!("{:.1},{:.1}", px(e as f64), py(v))).collect();
        let color = palette[k % palette.len()];
        let _ = writeln!(
            s,
            "<polyline class=\"series\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"><title>{}</title></polyline>",
            coords.join(" "),
            esc(name)
        );
        let _ = writeln!(
            s,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" fill=\"{color}\">{}</text>",
            w - m - 140.0,
            m + 14.0 * (k as f64 + 1.0),
            esc(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn write(path: PathBuf, body: &str, out: &mut Vec<PathBuf>) -> Result<()> {
    std::fs::write(&path, body).map_err(|e| GrdaError::io(&path, e))?;
    out.push(path);
    Ok(())
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    n_domains: usize,
    source_domains: &'a [usize],
    ceiling: f64,
    summary: &'a [SummaryRow],
    tables: &'a [MetricTable],
    histories: Vec<(&'a str, &'a History)>,
}

/// Summary CSV, full JSON detail, one map per method and a convergence
/// figure. Returns the paths written.
pub fn emit_report(
    graph: &DomainGraph,
    sources: &[usize],
    labels: Option<&[String]>,
    tables: &[MetricTable],
    histories: &[(String, History)],
    layout_seed: u64,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    if tables.is_empty() {
        return Err(GrdaError::input("report needs at least one metric table"));
    }
    std::fs::create_dir_all(out).map_err(|e| GrdaError::io(out, e))?;
    let mut written = Vec::new();
    let summary = summarize(tables);
    write(out.join("summary.csv"), &summary_csv(&summary), &mut written)?;
    let doc = ReportDoc {
        n_domains: graph.n(),
        source_domains: sources,
        ceiling: graph.optimum_disc_loss(),
        summary: &summary,
        tables,
        histories: histories.iter().map(|(n, h)| (n.as_str(), h)).collect(),
    };
    write(out.join("report.json"), &serde_json::to_string_pretty(&doc)?, &mut written)?;
    for row in &summary {
        let ts: Vec<&MetricTable> = tables.iter().filter(|t| t.method == row.method).collect();
        let values: Vec<Option<f64>> = (0..graph.n())
            .map(|u| {
                let v: Vec<f64> = ts.iter().filter_map(|t| t.domains.get(u).and_then(|d| d.value)).collect();
                (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
            })
            .collect();
        let title = format!("{} per-domain {} (mean over {} runs)", row.method, row.metric.name(), row.runs);
        let svg = accuracy_map_svg(graph, &values, row.metric, sources, labels, &title, layout_seed);
        write(out.join(format!("map_{}.svg", row.method)), &svg, &mut written)?;
    }
    let series: Vec<(String, &History)> = histories.iter().map(|(n, h)| (n.clone(), h)).collect();
    let svg = convergence_svg(&series, graph.optimum_disc_loss(), "graph discriminator loss against its ceiling");
    write(out.join("convergence.svg"), &svg, &mut written)?;
    Ok(written)
}

impl ExperimentResult {
    /// [`emit_report`] over every finished run; convergence curves show the
    /// graph-discriminator runs.
    pub fn emit_report(&self, out: &Path) -> Result<Vec<PathBuf>> {
        let tables: Vec<MetricTable> = self.runs.iter().map(|r| r.table.clone()).collect();
        let histories: Vec<(String, History)> = self
            .runs
            .iter()
            .filter(|r| r.method == crate::model::Method::Grda)
            .map(|r| (format!("{} seed {}", r.method, r.seed), r.history.clone()))
            .collect();
        let labels = self.dataset.tpt.as_ref().map(|t| t.states.as_slice());
        emit_report(
            &self.dataset.graph,
            &self.dataset.source_domains,
            labels,
            &tables,
            &histories,
            self.dataset.seed,
            out,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::metrics::{DomainMetric, MetricTable};
    use crate::model::EpochRecord;

    fn table(method: &str, seed: u64, vals: &[f64]) -> MetricTable {
        let domains = vals
            .iter()
            .enumerate()
            .map(|(u, &v)| DomainMetric { domain: u, value: Some(v), count: 10, is_source: u == 0, hop_level: u.min(3) })
            .collect();
        MetricTable::new(method, seed, MetricKind::Accuracy, String::new(), domains)
    }

    #[test]
    fn color_endpoints() {
        assert_eq!(metric_color(100.0, MetricKind::Accuracy, 0.0, 0.0), "#ff0000");
        assert_eq!(metric_color(0.0, MetricKind::Accuracy, 0.0, 0.0), "#0000ff");
        assert_eq!(metric_color(1.0, MetricKind::Mse, 1.0, 3.0), "#ff0000");
        assert_eq!(metric_color(3.0, MetricKind::Mse, 1.0, 3.0), "#0000ff");
    }

    #[test]
    fn map_is_well_formed_with_one_node_per_domain() {
        let g = DomainGraph::chain(5).unwrap();
        let svg = accuracy_map_svg(&g, &[Some(90.0), None, Some(50.0), Some(0.0), Some(100.0)], MetricKind::Accuracy, &[0], None, "a < b", 3);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let nodes = doc.descendants().filter(|n| n.has_tag_name("circle") && n.attribute("class") == Some("node")).count();
        assert_eq!(nodes, 5);
        let edges = doc.descendants().filter(|n| n.attribute("class") == Some("edge")).count();
        assert_eq!(edges, 4);
        assert_eq!(svg, accuracy_map_svg(&g, &[Some(90.0), None, Some(50.0), Some(0.0), Some(100.0)], MetricKind::Accuracy, &[0], None, "a < b", 3));
    }

    #[test]
    fn convergence_has_ceiling_line() {
        let hist = History {
            records: (0..5)
                .map(|e| EpochRecord { epoch: e, l_f: 0.5, l_d: Some(0.6 - 0.01 * e as f64), ceiling: 0.65, gap: None, adversary_accuracy: None })
                .collect(),
        };
        let svg = convergence_svg(&[("grda".into(), &hist)], 0.65, "loss");
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let line = doc.descendants().find(|n| n.attribute("class") == Some("ceiling")).unwrap();
        assert_eq!(line.attribute("y1"), line.attribute("y2"));
        assert_eq!(doc.descendants().filter(|n| n.attribute("class") == Some("series")).count(), 1);
    }

    #[test]
    fn report_files_for_three_methods() {
        let g = DomainGraph::chain(4).unwrap();
        let tables: Vec<MetricTable> = ["source_only", "dann_baseline", "grda"]
            .iter()
            .flat_map(|m| (0..3).map(move |s| table(m, s, &[90.0, 60.0 + s as f64, 55.0, 70.0])))
            .collect();
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&g, &[0], None, &tables, &[], 1, dir.path()).unwrap();
        let svgs = files.iter().filter(|p| p.extension().is_some_and(|e| e == "svg")).count();
        assert!(svgs >= 2);
        let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        let rows = summarize(&tables);
        assert_eq!(rows[2].method, "grda");
        assert!((rows[2].target_mean.unwrap() - 62.0).abs() < 1e-9);
        assert!(emit_report(&g, &[0], None, &[], &[], 1, dir.path()).is_err());
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let g = DomainGraph::chain(2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        std::fs::write(&file, "x").unwrap();
        let r = emit_report(&g, &[0], None, &[table("m", 0, &[1.0, 2.0])], &[], 0, &file.join("sub"));
        assert!(matches!(r, Err(GrdaError::Io { .. })));
    }
}
