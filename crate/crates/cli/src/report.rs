//! Text tables, SVG histogram and map export.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use depriv_core::classify::{cumulative_group_sweep, histogram, region_median, Group, SweepPoint};
use depriv_core::model::{Geometry, Geoid, ModelKind, RegionSummary, ScoredBlockGroup};
use depriv_core::stats::Response;
use depriv_core::Result;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::files::{self, fmt3, fmt3_opt};
use crate::pipeline::{self, ClassifyReport, FitOutcome, FitReport, Partitions};

fn table_title(table: &str) -> &'static str {
    match table {
        "hd_positive_places" => "Logistic regression: any high-deprivation block group (places)",
        "pct_hd_places" => "OLS: percent high deprivation (places with %HD > 0)",
        "pct_hd_large_cities" => "OLS: percent high deprivation (large cities)",
        "dispersion_large_cities" => "OLS: dispersion (large cities)",
        _ => "",
    }
}

/// Regression tables: `coef (p)` at 3 decimals, one column per model.
pub fn fit_tables(fits: &[FitReport]) -> String {
    let mut out = String::new();
    out.push_str("%HD enters every model in percent units (0-100).\n");
    let mut tables: Vec<&str> = fits.iter().map(|f| f.table.as_str()).collect();
    tables.dedup();
    for table in tables {
        let cols: Vec<&FitReport> = fits.iter().filter(|f| f.table == table).collect();
        let _ = writeln!(out, "\n{}", table_title(table));
        if let Some(first) = cols.first() {
            let robust = if first.model == ModelKind::OLS { ", robust standard errors" } else { "" };
            let _ = writeln!(out, "response: {}{robust}", response_label(first.response));
        }
        let mut rows: Vec<String> = vec!["intercept".into()];
        for f in &cols {
            for c in &f.columns {
                if !rows.contains(c) {
                    rows.push(c.clone());
                }
            }
        }
        let width = 24;
        let mut line = format!("{:<16}", "");
        for f in &cols {
            let _ = write!(line, "{:>width$}", format!("({})", f.column));
        }
        out.push_str(line.trim_end());
        out.push('\n');
        for row in &rows {
            let mut line = format!("{row:<16}");
            for f in &cols {
                let cell = match f.fit() {
                    Some(d) => d
                        .names
                        .iter()
                        .position(|n| n == row)
                        .map(|k| format!("{} ({})", fmt3(d.coef[k]), fmt3(d.p[k])))
                        .unwrap_or_default(),
                    None => String::new(),
                };
                let _ = write!(line, "{cell:>width$}");
            }
            out.push_str(line.trim_end());
            out.push('\n');
        }
        let is_logit = cols.first().is_some_and(|f| f.model == ModelKind::Logistic);
        let mut line = format!("{:<16}", if is_logit { "Pseudo R2" } else { "R2" });
        for f in &cols {
            let cell = f.fit().and_then(|d| d.r2.or(d.pseudo_r2)).map(fmt3).unwrap_or_default();
            let _ = write!(line, "{cell:>width$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
        let mut line = format!("{:<16}", "N");
        for f in &cols {
            let n = match &f.outcome {
                FitOutcome::Fit(d) => d.n,
                FitOutcome::Failed { n, .. } => *n,
            };
            let _ = write!(line, "{n:>width$}");
        }
        out.push_str(line.trim_end());
        out.push('\n');
        for f in &cols {
            if let FitOutcome::Failed { error, .. } = &f.outcome {
                let _ = writeln!(out, "({}) failed: {error}", f.column);
            }
        }
    }
    out
}

fn response_label(r: Response) -> &'static str {
    match r {
        Response::HdPositive => "HD_POSITIVE",
        Response::PctHd => "PCT_HD",
        Response::Dispersion => "DISPERSION",
    }
}

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 400.0;
const MARGIN: f64 = 40.0;

/// Histogram with one rect per non-empty bin and vertical marker lines.
pub fn histogram_svg(scores: &[f64], bin_width: f64, threshold: Option<f64>) -> Result<String> {
    let bins = histogram(scores, bin_width)?;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SVG_W}" height="{SVG_H}" viewBox="0 0 {SVG_W} {SVG_H}">"#
    );
    if let (Some(first), Some(last)) = (bins.first(), bins.last()) {
        let lo = first.0.min(threshold.unwrap_or(first.0));
        let hi = (last.0 + bin_width).max(threshold.unwrap_or(lo));
        let span = (hi - lo).max(bin_width);
        let max_count = bins.iter().map(|b| b.1).max().unwrap_or(1).max(1) as f64;
        let plot_w = SVG_W - 2.0 * MARGIN;
        let plot_h = SVG_H - 2.0 * MARGIN;
        let x = |v: f64| MARGIN + (v - lo) / span * plot_w;
        for &(start, count) in bins.iter().filter(|b| b.1 > 0) {
            let h = count as f64 / max_count * plot_h;
            let _ = writeln!(
                svg,
                r#"  <rect class="bin" x="{}" y="{}" width="{}" height="{}" data-start="{}" data-count="{count}"/>"#,
                fmt3(x(start)),
                fmt3(SVG_H - MARGIN - h),
                fmt3(bin_width / span * plot_w),
                fmt3(h),
                fmt3(start)
            );
        }
        let mut marker = |class: &str, v: f64, colour: &str| {
            let _ = writeln!(
                svg,
                r#"  <line class="{class}" x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="{colour}" data-value="{3}"/>"#,
                fmt3(x(v)),
                fmt3(MARGIN),
                fmt3(SVG_H - MARGIN),
                fmt3(v)
            );
        };
        if let Ok(m) = region_median(scores) {
            marker("median", m, "black");
        }
        if let Some(t) = threshold {
            marker("threshold", t, "red");
        }
        let _ = writeln!(
            svg,
            r#"  <line class="axis" x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#,
            SVG_H - MARGIN,
            SVG_W - MARGIN
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// FeatureCollection in geoid order with `score` and, when known, `high`.
pub fn scores_geojson(
    geometries: &BTreeMap<Geoid, Geometry>,
    scored: &[ScoredBlockGroup],
    classified: bool,
) -> String {
    let features: Vec<_> = scored
        .iter()
        .filter_map(|s| geometries.get(&s.geoid).map(|g| (s, g)))
        .map(|(s, g)| {
            let polys: Vec<Vec<&Vec<[f64; 2]>>> = g.polygons.iter().map(|p| p.rings().collect()).collect();
            let mut props = json!({ "GEOID": s.geoid.as_str(), "score": s.score });
            if classified {
                props["high"] = json!(s.high_deprivation);
            }
            json!({
                "type": "Feature",
                "properties": props,
                "geometry": { "type": "MultiPolygon", "coordinates": polys },
            })
        })
        .collect();
    let mut text = json!({ "type": "FeatureCollection", "features": features }).to_string();
    text.push('\n');
    text
}

pub const TOP_HEADER: [&str; 5] = ["region_id", "population", "n_bg", "pct_high", "median_score"];

/// Largest places by population among those meeting `keep`.
pub fn top_places(
    places: &[RegionSummary],
    keep: impl Fn(&RegionSummary) -> bool,
    n: usize,
) -> Vec<&RegionSummary> {
    let mut v: Vec<&RegionSummary> = places.iter().filter(|s| keep(s)).collect();
    v.sort_by(|a, b| b.population.cmp(&a.population).then_with(|| a.region_id.cmp(&b.region_id)));
    v.truncate(n);
    v
}

fn top_row(s: &RegionSummary) -> [String; 5] {
    [
        s.region_id.clone(),
        s.population.to_string(),
        s.n_bg.to_string(),
        fmt3(s.pct_high),
        fmt3(s.median_score),
    ]
}

fn top_text(title: &str, rows: &[&RegionSummary]) -> String {
    let mut out = format!("{title}\n{:<12}{:>12}{:>8}{:>10}{:>10}\n", "place", "population", "n_bg", "%HD", "score");
    for s in rows {
        let _ = writeln!(
            out,
            "{:<12}{:>12}{:>8}{:>10}{:>10}",
            s.region_id,
            s.population,
            s.n_bg,
            fmt3(s.pct_high),
            fmt3(s.median_score)
        );
    }
    out
}

fn sweep_rows(points: &[SweepPoint]) -> impl Iterator<Item = [String; 5]> + '_ {
    points.iter().map(|p| {
        [
            fmt3(p.threshold),
            p.n.to_string(),
            fmt3_opt(p.median),
            fmt3_opt(p.sd),
            fmt3(p.population_share),
        ]
    })
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportOutcome {
    pub written: Vec<String>,
    pub skipped: Vec<String>,
}

impl ReportOutcome {
    fn skip(&mut self, name: &str, why: &str) {
        log::warn!("skipping {name}: {why}");
        self.skipped.push(name.to_owned());
    }
}

pub fn cmd_report(cfg: &RunConfig) -> Result<ReportOutcome> {
    let mut out = ReportOutcome::default();
    let data = pipeline::load_dataset(cfg, true)?;
    let records = &data.records;

    let classified_path = cfg.out(files::CLASSIFIED);
    let scores_path = cfg.out(files::SCORES);
    let (scored, classified) = if classified_path.is_file() {
        (Some(files::load_scores(&classified_path, records, true)?), true)
    } else if scores_path.is_file() {
        (Some(files::load_scores(&scores_path, records, false)?), false)
    } else {
        (None, false)
    };
    let Some(scored) = scored else {
        for name in ["histogram.svg", "scores.geojson", "sweeps", "tables"] {
            out.skip(name, "no scores; run `depriv score` first");
        }
        return Ok(out);
    };
    let scores: Vec<f64> = scored.iter().map(|s| s.score).collect();

    let threshold = if cfg.out(files::CLASSIFY_JSON).is_file() {
        let c: ClassifyReport = files::read_json(&cfg.out(files::CLASSIFY_JSON))?;
        Some(c.threshold)
    } else {
        log::warn!("no classification results; histogram drawn without threshold marker");
        None
    };
    files::write_text(&cfg.out("histogram.svg"), &histogram_svg(&scores, cfg.histogram_bin, threshold)?)?;
    out.written.push("histogram.svg".into());

    match &data.geometries {
        Some(g) => {
            if !classified {
                log::warn!("no classification results; scores.geojson has no `high` property");
            }
            files::write_text(&cfg.out("scores.geojson"), &scores_geojson(g, &scored, classified))?;
            out.written.push("scores.geojson".into());
        }
        None => out.skip("scores.geojson", "no geometry file configured"),
    }

    for (group, name) in [(Group::Black, "sweep_black.csv"), (Group::White, "sweep_white.csv")] {
        let points = cumulative_group_sweep(records, &scores, group, cfg.sweep_step, cfg.sweep_direction)?;
        files::write_csv(
            &cfg.out(name),
            &["threshold", "n", "median", "sd", "population_share"],
            sweep_rows(&points),
        )?;
        out.written.push(name.into());
    }

    if !classified {
        for name in ["top_places", "places_scatter.csv", "large_cities.csv"] {
            out.skip(name, "no classification results; run `depriv classify` first");
        }
        return Ok(out);
    }
    let parts = Partitions::new(cfg, records)?;
    let (sums, have_dispersion) = pipeline::summaries_with_dispersion(cfg, &parts, records, &scored)?;

    let half = top_places(&sums.places, |s| s.pct_high >= 50.0, cfg.top_n);
    let full = top_places(&sums.places, |s| s.pct_high >= 100.0, cfg.top_n);
    files::write_csv(&cfg.out("top_places_50.csv"), &TOP_HEADER, half.iter().map(|s| top_row(s)))?;
    files::write_csv(&cfg.out("top_places_100.csv"), &TOP_HEADER, full.iter().map(|s| top_row(s)))?;
    let text = format!(
        "{}\n{}",
        top_text("Places with at least 50% high-deprivation block groups", &half),
        top_text("Places with 100% high-deprivation block groups", &full)
    );
    files::write_text(&cfg.out("top_places.txt"), &text)?;
    out.written.extend(["top_places_50.csv", "top_places_100.csv", "top_places.txt"].map(String::from));

    files::write_csv(
        &cfg.out("places_scatter.csv"),
        &["region_id", "population", "log_population", "pct_high"],
        sums.places
            .iter()
            .filter(|s| s.pct_high > 0.0 && s.population > 0)
            .map(|s| {
                [
                    s.region_id.clone(),
                    s.population.to_string(),
                    fmt3((s.population as f64).ln()),
                    fmt3(s.pct_high),
                ]
            }),
    )?;
    out.written.push("places_scatter.csv".into());

    if !have_dispersion {
        log::warn!("no dispersion results; large_cities.csv has an empty dispersion column");
    }
    let mut large = pipeline::sample(cfg, pipeline::Sample::LargeCities, &sums.places, sums.cities.as_deref());
    large.sort_by(|a, b| {
        b.median_score
            .total_cmp(&a.median_score)
            .then_with(|| a.region_id.cmp(&b.region_id))
    });
    files::write_csv(
        &cfg.out("large_cities.csv"),
        &["region_id", "population", "median_score", "pct_high", "dispersion"],
        large.iter().map(|s| {
            [
                s.region_id.clone(),
                s.population.to_string(),
                fmt3(s.median_score),
                fmt3(s.pct_high),
                fmt3_opt(s.dispersion),
            ]
        }),
    )?;
    out.written.push("large_cities.csv".into());
    Ok(out)
}
