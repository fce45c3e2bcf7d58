//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test -p depriv-cli --test acceptance -- --nocapture`.

mod common;
#[path = "../../core/tests/support/charpoly.rs"]
mod charpoly;
#[path = "../../core/tests/support/dense.rs"]
mod dense;
#[path = "../../core/tests/support/lattice.rs"]
mod lattice;

use std::time::{Duration, Instant};

use depriv_cli::config::RunConfig;
use depriv_cli::{files, pipeline};
use depriv_core::classify::ThresholdSpec;
use depriv_core::index::{compute_sd_stats, pca_weights, raw_scores, rescale_0_100, sd_weights, SdStats};
use depriv_core::model::BlockGroupRecord;
use depriv_core::spatial::{adjacency_oracle, build_adjacency, dispersion, Contiguity, DispersionFlag, NeighborScope, SnapGrid};
use depriv_core::stats::{log_likelihood, logistic_fit, ols_fit, score_vector, DesignMatrix, LogisticOptions, RobustKind};
use depriv_core::synth::{self, SynthConfig};
use depriv_core::Execution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

/// Prints the verdict line and fails the test on FAIL.
fn verdict(n: u32, title: &str, budget: Option<Duration>, run: impl FnOnce() -> Check) {
    let start = Instant::now();
    let mut result = run();
    let elapsed = start.elapsed();
    if let (Ok(()), Some(b)) = (&result, budget) {
        if elapsed > b {
            result = Err(format!("took {elapsed:?}, budget {b:?}"));
        }
    }
    match &result {
        Ok(()) => println!("criterion {n} [{title}]: PASS ({:.3} s)", elapsed.as_secs_f64()),
        Err(e) => println!("criterion {n} [{title}]: FAIL ({:.3} s): {e}", elapsed.as_secs_f64()),
    }
    if let Err(e) = result {
        panic!("criterion {n} failed: {e}");
    }
}

#[test]
fn criterion_1_weight_reproduction() {
    verdict(1, "weights from published deviations", Some(Duration::from_millis(1)), || {
        let w = sd_weights(&SdStats { sds: [13.77, 12.20, 6.23, 11.82], n: 0 });
        let rounded = w.w.map(|v| (v * 1000.0).round() / 1000.0);
        ensure!(rounded == [0.073, 0.082, 0.161, 0.085], "got {rounded:?}");
        Ok(())
    });
}

#[test]
fn criterion_2_adjacency_oracle() {
    verdict(2, "adjacency equals brute force", Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for i in 0..50 {
            let geoms = lattice::fixture(&mut rng, 200);
            ensure!(geoms.len() <= 200, "fixture {i} has {} polygons", geoms.len());
            for contiguity in [Contiguity::Queen, Contiguity::Rook] {
                let fast = build_adjacency(&geoms, SnapGrid::default(), contiguity, Execution::with_workers(4));
                let slow = adjacency_oracle(&geoms, SnapGrid::default(), contiguity);
                ensure!(fast == slow, "fixture {i} {contiguity:?}: edge sets differ");
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_3_dispersion_grid() {
    verdict(3, "3x3 dispersion", Some(Duration::from_secs(1)), || {
        let geoms = synth::grid_geometries(3, 3, 0.01, "26");
        let graph = build_adjacency(&geoms, SnapGrid::default(), Contiguity::Queen, Execution::Sequential);
        let members: Vec<usize> = (0..9).collect();
        let run = |high: &[usize]| {
            let flags: Vec<bool> = (0..9).map(|i| high.contains(&i)).collect();
            dispersion(&members, &flags, &graph, NeighborScope::Dataset).map_err(|e| e.to_string())
        };
        let center = run(&[4])?;
        ensure!(center.value == 1.0, "center-high gave {}", center.value);
        let corner = run(&[0])?;
        ensure!(corner.value == 0.375, "corner-high gave {}", corner.value);
        let none = run(&[])?;
        ensure!(none.value == 0.0, "no-high gave {}", none.value);
        let all = run(&members)?;
        ensure!(
            all.value == 1.0 && all.flag == Some(DispersionFlag::AllHigh),
            "all-high gave {} {:?}",
            all.value,
            all.flag
        );
        Ok(())
    });
}

#[test]
fn criterion_4_pca_oracle() {
    verdict(4, "PCA against characteristic polynomial", Some(Duration::from_secs(5)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for i in 0..100 {
            let records = charpoly::dataset(&mut rng, 50);
            let pca = pca_weights(&records, Execution::Sequential).map_err(|e| e.to_string())?;
            let r = charpoly::correlation(&records);
            let v = charpoly::eigenvector(&r, charpoly::largest_root(&charpoly::char_poly(&r)));
            let dev = (0..4).map(|k| (pca.loadings[k] - v[k]).abs()).fold(0.0, f64::max);
            ensure!(dev < 1e-8, "dataset {i}: loading deviation {dev:e}");
            let norm = pca.loadings.iter().map(|x| x * x).sum::<f64>().sqrt();
            ensure!((norm - 1.0).abs() < 1e-10, "dataset {i}: norm {norm}");
        }
        Ok(())
    });
}

#[test]
fn criterion_5_regression_oracles() {
    verdict(5, "OLS/HC1 and logistic oracles", Some(Duration::from_secs(5)), || {
        let x = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        let y = vec![2.0, 2.0, 4.0, 4.0, 6.0];
        let d = DesignMatrix::with_intercept(y.clone(), &[x.clone()], &["x"]).map_err(|e| e.to_string())?;
        let fit = ols_fit(&d, RobustKind::HC1);
        let (beta, cov) = dense::ols_hc1(&[x], &y);
        ensure!((beta[0] - 0.6).abs() < 1e-12 && (beta[1] - 1.0).abs() < 1e-12, "oracle beta {beta:?}");
        for k in 0..2 {
            ensure!((fit.coef[k] - beta[k]).abs() < 1e-10, "coef {k}: {} vs {}", fit.coef[k], beta[k]);
            let se = cov[k][k].sqrt();
            ensure!((fit.se[k] - se).abs() < 1e-10, "HC1 se {k}: {} vs {se}", fit.se[k]);
        }

        let ones = DesignMatrix::with_intercept(vec![1.0, 1.0, 1.0, 0.0], &[], &[]).map_err(|e| e.to_string())?;
        let f = logistic_fit(&ones, LogisticOptions::default()).map_err(|e| e.to_string())?;
        ensure!((f.coef[0] - 3f64.ln()).abs() < 1e-8, "intercept {} vs ln 3", f.coef[0]);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        for t in 0..20 {
            let n = rng.random_range(10..60);
            let p = rng.random_range(2..5);
            let data: Vec<f64> = (0..n)
                .flat_map(|_| {
                    let mut row = vec![1.0];
                    row.extend((1..p).map(|_| rng.random_range(-2.0..2.0)));
                    row
                })
                .collect();
            let xm = depriv_core::linalg::Matrix::from_row_major(n, p, data);
            let yb: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.random_bool(0.4)))).collect();
            let b: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let g = score_vector(&xm, &yb, &b);
            for k in 0..p {
                let (mut up, mut down) = (b.clone(), b.clone());
                up[k] += h;
                down[k] -= h;
                let fd = (log_likelihood(&xm, &yb, &up) - log_likelihood(&xm, &yb, &down)) / (2.0 * h);
                let rel = (fd - g[k]).abs() / g[k].abs().max(1e-3);
                ensure!(rel < 1e-4, "problem {t} k={k}: relative error {rel:e}");
            }
        }
        Ok(())
    });
}

#[test]
fn criterion_6_monte_carlo_recovery() {
    verdict(6, "simulated logistic recovery, exact OLS", None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(2019);
        let truth = [-3.0, 0.08];
        let x: Vec<f64> = (0..5000).map(|_| rng.random_range(0.0..60.0)).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| f64::from(u8::from(rng.random_bool(1.0 / (1.0 + (-(truth[0] + truth[1] * xi)).exp())))))
            .collect();
        let d = DesignMatrix::with_intercept(y, &[x], &["percpov"]).map_err(|e| e.to_string())?;
        let f = logistic_fit(&d, LogisticOptions::default()).map_err(|e| e.to_string())?;
        for k in 0..2 {
            let z = (f.coef[k] - truth[k]) / f.se[k];
            ensure!(z.abs() < 3.0, "coef {k} = {} is {z:.2} SEs from {}", f.coef[k], truth[k]);
        }
        let xs: Vec<f64> = (0..40).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|v| 4.0 + 2.5 * v).collect();
        let lin = ols_fit(
            &DesignMatrix::with_intercept(ys, &[xs], &["x"]).map_err(|e| e.to_string())?,
            RobustKind::HC1,
        );
        ensure!(lin.r2 == 1.0, "noiseless R2 = {}", lin.r2);
        Ok(())
    });
}

fn run_dir(workers: usize) -> Result<(tempfile::TempDir, RunConfig), String> {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = common::bundled(out.path(), workers);
    depriv_cli::run_all(&cfg).map_err(|e| e.to_string())?;
    Ok((out, cfg))
}

#[test]
fn criterion_7_pipeline_properties() {
    verdict(7, "pipeline on the bundled fixture", Some(Duration::from_secs(5)), || {
        let (a, cfg) = run_dir(1)?;
        let scores = common::read_csv(&cfg.out(files::SCORES));
        ensure!(scores.len() == 200, "{} score rows", scores.len());

        let mut last = usize::MAX;
        let probe_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut probe = cfg.clone();
        for t in [-1.0, 10.0, 25.0, 50.0, 75.0, 100.0] {
            probe.threshold = ThresholdSpec::ExplicitValue { value: t };
            probe.out_dir = probe_dir.path().to_owned();
            probe.validate().map_err(|e| e.to_string())?;
            std::fs::copy(cfg.out(files::SCORES), probe.out(files::SCORES)).map_err(|e| e.to_string())?;
            std::fs::copy(cfg.out(files::WEIGHTS), probe.out(files::WEIGHTS)).map_err(|e| e.to_string())?;
            let c = pipeline::cmd_classify(&probe).map_err(|e| e.to_string())?;
            ensure!(c.n_high <= last, "high count rose to {} at threshold {t}", c.n_high);
            last = c.n_high;
        }

        let classified = common::read_csv(&cfg.out(files::CLASSIFIED));
        let n_high = classified.iter().filter(|r| r["high"] == "1").count();
        let count = |name: &str| -> f64 {
            common::read_csv(&cfg.out(name))
                .iter()
                .map(|r| r["pct_high"].parse::<f64>().unwrap() * r["n_bg"].parse::<f64>().unwrap() / 100.0)
                .sum()
        };
        let by_state = count("regions_state.csv");
        ensure!((by_state - n_high as f64).abs() < 1e-2, "states hold {by_state}, blocks {n_high}");
        let attrs = common::read_csv(&depriv_cli::fixture::bundled_dir().join(depriv_cli::fixture::ATTRIBUTES));
        let outside = attrs
            .iter()
            .zip(&classified)
            .filter(|(a, c)| a["place_id"].is_empty() && c["high"] == "1")
            .count();
        let by_place = count("regions_place.csv");
        ensure!(
            (by_place + outside as f64 - n_high as f64).abs() < 1e-2,
            "places hold {by_place} + {outside} unincorporated, blocks {n_high}"
        );

        let first = common::snapshot(a.path());
        let (b, _) = run_dir(1)?;
        let (c, _) = run_dir(8)?;
        for (label, other) in [("rerun", common::snapshot(b.path())), ("8 workers", common::snapshot(c.path()))] {
            ensure!(first.len() == other.len(), "{label}: file sets differ");
            for (k, v) in &first {
                ensure!(other.get(k) == Some(v), "{label}: {} differs", k.display());
            }
        }
        Ok(())
    });
}

#[cfg(target_os = "linux")]
fn peak_rss_mib() -> Option<f64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kib: f64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kib / 1024.0)
}

#[cfg(not(target_os = "linux"))]
fn peak_rss_mib() -> Option<f64> {
    None
}

#[test]
fn criterion_8_scale_budget() {
    verdict(8, "250k-polygon adjacency and scoring", Some(Duration::from_secs(60)), || {
        let data = synth::generate(&SynthConfig {
            cols: 500,
            rows: 500,
            ..SynthConfig::default()
        });
        ensure!(data.geometries.len() == 250_000, "{} polygons", data.geometries.len());
        let exec = Execution::with_workers(0);
        let graph = build_adjacency(&data.geometries, SnapGrid::default(), Contiguity::Queen, exec);
        // horizontal and vertical pairs plus both diagonals
        let expected = 2 * 499 * 500 + 2 * 499 * 499;
        ensure!(graph.edge_count() == expected, "{} edges, expected {expected}", graph.edge_count());
        let records: &[BlockGroupRecord] = &data.records;
        let w = sd_weights(&compute_sd_stats(records, exec).map_err(|e| e.to_string())?);
        let raw: Vec<f64> = raw_scores(records, &w, exec).into_iter().map(|s| s.1).collect();
        let (scores, _) = rescale_0_100(&raw).map_err(|e| e.to_string())?;
        ensure!(scores.len() == 250_000, "{} scores", scores.len());
        if let Some(mib) = peak_rss_mib() {
            println!("  peak resident memory {mib:.0} MiB");
            ensure!(mib < 4096.0, "peak memory {mib:.0} MiB");
        }
        Ok(())
    });
}

/// Needs network access plus two inputs the Census API does not serve at
/// block-group level: `DEPRIV_CITIES` (membership CSV `region_id,geoid`
/// containing Detroit, 2622000) and `DEPRIV_GEOMETRY` (block-group GeoJSON).
/// `DEPRIV_ACS_DIR` reuses previously fetched attribute CSVs.
#[test]
#[ignore = "downloads the full ACS 2015-2019 block-group tables"]
fn criterion_9_full_acs_run() {
    verdict(9, "national ACS 2015-2019 run", None, || {
        let work = tempfile::tempdir().map_err(|e| e.to_string())?;
        let attributes: Vec<std::path::PathBuf> = match std::env::var_os("DEPRIV_ACS_DIR") {
            Some(dir) => std::fs::read_dir(dir)
                .map_err(|e| e.to_string())?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "csv"))
                .collect(),
            None => {
                let states: Vec<String> = (1..=56)
                    .map(|s| format!("{s:02}"))
                    .filter(|s| depriv_core::model::is_contiguous_state(s))
                    .filter(|s| !["03", "07", "14", "43", "52"].contains(&s.as_str()))
                    .collect();
                let states: Vec<&str> = states.iter().map(String::as_str).collect();
                let opts = depriv_core::ingest::FetchOptions::new(work.path().join("acs"));
                depriv_core::ingest::fetch_acs(
                    "2015-2019",
                    depriv_core::ingest::ACS_2015_2019_VARIABLES,
                    &states,
                    depriv_cli::DEFAULT_ENDPOINT,
                    &opts,
                    Execution::with_workers(4),
                )
                .map_err(|e| e.to_string())?
            }
        };
        let cities = std::env::var_os("DEPRIV_CITIES").ok_or("DEPRIV_CITIES not set")?;
        let geometry = std::env::var_os("DEPRIV_GEOMETRY").ok_or("DEPRIV_GEOMETRY not set")?;
        let schema = work.path().join("schema.json");
        files::write_json(&schema, &depriv_core::ingest::ColumnSchema::acs_2015_2019()).map_err(|e| e.to_string())?;
        let cfg = RunConfig {
            attributes,
            geometry: Some(geometry.into()),
            schema: Some(schema),
            cities: Some(cities.into()),
            out_dir: work.path().join("out"),
            workers: 0,
            ..RunConfig::default()
        };
        cfg.validate().map_err(|e| e.to_string())?;
        let s = pipeline::cmd_score(&cfg).map_err(|e| e.to_string())?;
        let bg = s.n_records as f64;
        ensure!((bg / 214_807.0 - 1.0).abs() <= 0.01, "{bg} block groups");
        let c = pipeline::cmd_classify(&cfg).map_err(|e| e.to_string())?;
        ensure!((c.pct_high - 5.26).abs() <= 0.5, "national share {:.3}%", c.pct_high);
        let d = pipeline::cmd_dispersion(&cfg).map_err(|e| e.to_string())?;
        let detroit = common::read_csv(&cfg.out("regions_city.csv"))
            .into_iter()
            .find(|r| r["region_id"] == "2622000")
            .ok_or("Detroit missing from the city table")?;
        let median: f64 = detroit["median_score"].parse().map_err(|_| "bad median")?;
        ensure!((median - 26.413).abs() <= 1.0, "Detroit median {median}");
        let disp = d.regions.get("2622000").ok_or("Detroit dispersion missing")?.dispersion.value;
        ensure!((disp - 0.872).abs() <= 0.05, "Detroit dispersion {disp}");
        Ok(())
    });
}
