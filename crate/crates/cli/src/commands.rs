use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use uvt::eval::{align, angle_error, metrics};
use uvt::geometry::{fbp, GeometryEstimate, Sinogram};
use uvt::graphinit::{build_similarity, laplacian_embed, SimilarityOptions};
use uvt::pipeline::{self, Method, Reconstruction};
use uvt::simulate::{make_phantom, synthesize, DistortionConfig, GroundTruth, PhantomKind};

use crate::args::{
    EvaluateArgs, PhantomArg, ReconstructArgs, ReportArgs, SelftestArgs, SimulateArgs,
};
use crate::container::{read_image, write_image, Dataset};
use crate::error::{CliError, Result};
use crate::fsutil::{ensure_dir, write_atomic};
use crate::manifest::{parse_kappa, parse_tolerance, parse_window, RunManifest, Settings};
use crate::pgm::write_pgm16;
use crate::tables::{
    append_metrics, geometry_csv, plot_csv, read_metrics, read_trace, scatter_csv, trace_csv,
    MetricsRow,
};

pub fn phantom_kind(args: &SimulateArgs) -> Result<PhantomKind> {
    Ok(match args.phantom {
        PhantomArg::SheppLogan => PhantomKind::SheppLogan,
        PhantomArg::SheppLoganOriginal => PhantomKind::SheppLoganOriginal,
        PhantomArg::Asymmetric => PhantomKind::Asymmetric,
        PhantomArg::Disks => PhantomKind::Disks {
            seed: args.disk_seed,
        },
        PhantomArg::File => PhantomKind::FromFile(
            args.image
                .clone()
                .ok_or_else(|| CliError::usage("--phantom file needs --image"))?,
        ),
    })
}

/// Writes the dataset and returns the report printed to stdout.
pub fn simulate(args: &SimulateArgs) -> Result<String> {
    let image = make_phantom(&phantom_kind(args)?, args.size)?;
    let cfg = DistortionConfig {
        n: args.n,
        max_shift: args.m,
        gamma: args.gamma,
        seed: args.seed,
    };
    let gt = synthesize(&image, &cfg)?;
    // Bundled phantoms and loaded files are all scaled into [0, 1].
    Dataset::from_ground_truth(&gt, true).write(&args.out)?;
    let margin = args.size as f64 / 2.0 - args.m as f64 - 2.0;
    Ok(format!(
        "wrote {}\nS={} N={} M={} gamma={} seed={}\nsigma={}\nsupport radius={:.3} margin={:.3}\n",
        args.out.display(),
        args.size,
        args.n,
        args.m,
        args.gamma,
        args.seed,
        gt.sigma,
        image.support_radius(),
        margin
    ))
}

fn flag_settings(args: &ReconstructArgs) -> Result<Settings> {
    let bad = |flag: &str, v: &str| CliError::usage(format!("invalid --{flag} '{v}'"));
    Ok(Settings {
        method: args
            .method
            .as_deref()
            .map(|m| m.parse::<Method>().map_err(|_| bad("method", m)))
            .transpose()?,
        input: args.input.clone(),
        out_dir: args.out_dir.clone(),
        seed: args.seed,
        kappa: args
            .kappa
            .as_deref()
            .map(|v| parse_kappa(v).ok_or_else(|| bad("kappa", v)))
            .transpose()?,
        knn: args
            .knn
            .as_deref()
            .map(|v| match v {
                "none" => Ok(None),
                _ => v.parse().map(Some).map_err(|_| bad("knn", v)),
            })
            .transpose()?,
        k_max: args.k_max,
        max_iter: args.max_iter,
        delta_deg: args.delta_deg,
        trials: args.trials,
        epsilon: args
            .epsilon
            .as_deref()
            .map(|v| parse_tolerance(v).ok_or_else(|| bad("epsilon", v)))
            .transpose()?,
        fbp_window: args
            .fbp_window
            .as_deref()
            .map(|v| parse_window(v).ok_or_else(|| bad("fbp-window", v)))
            .transpose()?,
        snapshot_every: args.snapshot_every.map(Some),
    })
}

fn out_path(dir: &Path, method: Method, suffix: &str) -> PathBuf {
    dir.join(format!("{method}_{suffix}"))
}

/// Runs one method and writes its outputs; returns the stdout summary.
pub fn reconstruct(args: &ReconstructArgs) -> Result<String> {
    let file = match &args.manifest {
        Some(p) => Settings::read(p)?,
        None => Settings::default(),
    };
    let settings = file.overlay(flag_settings(args)?);
    let input = settings
        .input
        .clone()
        .ok_or_else(|| CliError::usage("no input dataset given (--input or manifest)"))?;
    let data = Dataset::read(&input)?;
    let truth = data.ground_truth()?;
    let manifest = RunManifest::resolve(
        settings,
        data.noisy.size(),
        Some(data.header.max_shift),
        data.header.seed,
    )?;
    let rec = pipeline::run(
        manifest.method,
        &data.noisy,
        &manifest.options,
        truth.as_ref(),
    )?;
    write_outputs(
        &manifest,
        &data.noisy,
        &rec,
        truth.as_ref(),
        args.dump_similarity,
    )
}

fn write_outputs(
    manifest: &RunManifest,
    sino: &Sinogram,
    rec: &Reconstruction,
    truth: Option<&GroundTruth>,
    dump_similarity: bool,
) -> Result<String> {
    let dir = &manifest.out_dir;
    let method = manifest.method;
    ensure_dir(dir)?;
    write_image(&out_path(dir, method, "image.uvti"), &rec.image)?;
    write_atomic(
        &out_path(dir, method, "geometry.csv"),
        &geometry_csv(&rec.geometry),
    )?;
    write_atomic(
        &out_path(dir, method, "trace.csv"),
        &trace_csv(rec.trace.as_ref()),
    )?;
    write_atomic(
        &out_path(dir, method, "manifest.txt"),
        manifest.to_text().as_bytes(),
    )?;

    let mut summary = format!("method={method}\n");
    if let Some(init) = &rec.init {
        let _ = writeln!(
            summary,
            "init kappa={} eigenvalues={:?}",
            init.kappa, init.eigenvalues
        );
        for w in &init.warnings {
            let _ = writeln!(summary, "warning: {w}");
        }
    }
    if let Some(tr) = &rec.trace {
        let _ = writeln!(
            summary,
            "iterations={} converged={}",
            tr.records.len(),
            tr.converged
        );
        for w in &tr.warnings {
            let _ = writeln!(summary, "warning: {w}");
        }
        for (t, img) in &tr.snapshots {
            write_image(&out_path(dir, method, &format!("iter{t:03}.uvti")), img)?;
        }
    }
    if let (Some(m), Some(gt)) = (&rec.moments, truth) {
        write_atomic(
            &out_path(dir, method, "scatter.csv"),
            &scatter_csv(rec.geometry.angles(), &gt.angles, m.phi),
        )?;
        let _ = writeln!(
            summary,
            "clamped={} parity_undecidable={}",
            m.clamped, m.undecidable
        );
    }
    if dump_similarity && matches!(method, Method::Blind | Method::Ours) {
        let k_max = match method {
            Method::Blind => 0,
            _ => manifest.options.altmin.k_max,
        };
        dump_graph(dir, method, sino, &manifest.options, k_max)?;
    }
    Ok(summary)
}

fn dump_graph(
    dir: &Path,
    method: Method,
    sino: &Sinogram,
    opts: &pipeline::PipelineOptions,
    k_max: usize,
) -> Result<()> {
    let sim = build_similarity(
        sino,
        &SimilarityOptions {
            kappa: opts.kappa,
            k_max,
            knn: opts.knn,
        },
    )?;
    let emb = laplacian_embed(&sim)?;
    let mut w = String::from("i,j,weight,aligned_shift\n");
    for ((i, j), &v) in sim.weights.indexed_iter() {
        if v != 0.0 {
            let _ = writeln!(w, "{i},{j},{v},{}", sim.aligned_shift[[i, j]]);
        }
    }
    write_atomic(&out_path(dir, method, "similarity.csv"), w.as_bytes())?;
    let mut e = String::from("index,psi1,psi2\n");
    for i in 0..emb.psi.nrows() {
        let _ = writeln!(e, "{i},{},{}", emb.psi[[i, 0]], emb.psi[[i, 1]]);
    }
    write_atomic(&out_path(dir, method, "embedding.csv"), e.as_bytes())
}

fn default_aligned_path(image: &Path) -> PathBuf {
    let stem = image
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "image".into());
    image.with_file_name(format!("{stem}_aligned.uvti"))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<MetricsRow> {
    let data = Dataset::read(&args.dataset)?;
    let truth = data
        .truth
        .as_ref()
        .ok_or_else(|| uvt::Error::MissingTruth("evaluate requires ground truth".into()))?;
    let recon = read_image(&args.image)?;
    let aligned = align(&recon, &truth.image)?;
    let m = metrics(&aligned.aligned_image, &truth.image)?;
    let angle_err = match &args.geometry {
        Some(p) => {
            let g: GeometryEstimate = crate::tables::read_geometry(p)?;
            Some(angle_error(g.angles(), &truth.angles)?.mean_deg)
        }
        None => None,
    };
    let aligned_path = args
        .aligned
        .clone()
        .unwrap_or_else(|| default_aligned_path(&args.image));
    write_image(&aligned_path, &aligned.aligned_image)?;
    let row = MetricsRow {
        method: args.method.clone(),
        gamma: data.header.gamma,
        max_shift: data.header.max_shift,
        rrmse: m.rrmse,
        ssim: m.ssim,
        cc: m.cc,
        mean_angle_err_deg: angle_err,
    };
    append_metrics(&args.metrics, &row)?;
    Ok(row)
}

fn method_rank(name: &str) -> usize {
    match name.parse::<Method>() {
        Ok(Method::Blind) => 0,
        Ok(Method::Ours) => 1,
        Ok(Method::Oracle) => 2,
        Ok(Method::Moments) => 3,
        Err(_) => 4,
    }
}

/// Text table ordered by noise level, shift bound, then Blind, Ours,
/// Oracle, Moments and any other labels.
pub fn format_table(rows: &[MetricsRow]) -> String {
    let mut rows: Vec<&MetricsRow> = rows.iter().collect();
    rows.sort_by(|a, b| {
        a.gamma
            .total_cmp(&b.gamma)
            .then(a.max_shift.cmp(&b.max_shift))
            .then(method_rank(&a.method).cmp(&method_rank(&b.method)))
            .then(a.method.cmp(&b.method))
    });
    let mut out = format!(
        "{:<10} {:>6} {:>4} {:>8} {:>8} {:>8} {:>10}\n",
        "method", "gamma", "M", "RRMSE", "SSIM", "CC", "angle_err"
    );
    for r in rows {
        let ae = r
            .mean_angle_err_deg
            .map(|v| format!("{v:.2}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<10} {:>6} {:>4} {:>8.3} {:>8.3} {:>8.3} {:>10}",
            r.method, r.gamma, r.max_shift, r.rrmse, r.ssim, r.cc, ae
        );
    }
    out
}

fn stem(p: &Path) -> String {
    p.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into())
}

pub fn report(args: &ReportArgs) -> Result<String> {
    if args.metrics.is_empty() && args.trace.is_empty() && args.image.is_empty() {
        return Err(CliError::usage("no inputs"));
    }
    ensure_dir(&args.out_dir)?;
    let mut out = String::new();
    if !args.metrics.is_empty() {
        let mut rows = Vec::new();
        for p in &args.metrics {
            rows.extend(read_metrics(p)?);
        }
        let table = format_table(&rows);
        write_atomic(&args.out_dir.join("table.txt"), table.as_bytes())?;
        out.push_str(&table);
    }
    for p in &args.trace {
        let rows = read_trace(p)?;
        let dest = args.out_dir.join(format!("{}_plot.csv", stem(p)));
        write_atomic(&dest, &plot_csv(&rows))?;
        let _ = writeln!(out, "wrote {}", dest.display());
    }
    for p in &args.image {
        let img = read_image(p)?;
        let dest = args.out_dir.join(format!("{}.pgm", stem(p)));
        write_pgm16(&dest, &img)?;
        let _ = writeln!(out, "wrote {}", dest.display());
    }
    Ok(out)
}

/// Small end-to-end run. Returns the report and whether every check passed.
pub fn selftest(args: &SelftestArgs) -> Result<(String, bool)> {
    let mut out = String::new();
    let mut ok = true;
    let mut check = |name: &str, pass: bool, detail: String| {
        ok &= pass;
        let _ = writeln!(
            out,
            "{} {name}: {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    };

    let size = 64;
    let image = make_phantom(&PhantomKind::Asymmetric, size)?;
    let dense: Vec<f64> = (0..360)
        .map(|i| i as f64 * std::f64::consts::TAU / 360.0)
        .collect();
    let sino = uvt::geometry::reproject_all(&image, &dense)?;
    let rt = uvt::eval::rrmse(&fbp(&sino, &dense)?, &image)?;
    check(
        "fbp round trip",
        rt <= 0.15,
        format!("rrmse {rt:.4} (<= 0.15)"),
    );

    let gt = synthesize(
        &image,
        &DistortionConfig {
            n: 600,
            max_shift: 2,
            gamma: 0.01,
            seed: args.seed,
        },
    )?;
    let bytes = Dataset::from_ground_truth(&gt, true).to_bytes();
    let back = Dataset::from_bytes(&bytes, Path::new("<memory>"))?;
    check(
        "dataset round trip",
        back.to_bytes() == bytes,
        format!("{} bytes", bytes.len()),
    );

    let opts = pipeline::PipelineOptions::new(size, Some(2));
    let score = |m: Method| -> Result<f64> {
        let r = pipeline::run(m, &gt.noisy, &opts, Some(&gt))?;
        let a = align(&r.image, &gt.image)?;
        Ok(metrics(&a.aligned_image, &gt.image)?.rrmse)
    };
    let blind = score(Method::Blind)?;
    let ours = score(Method::Ours)?;
    let oracle = score(Method::Oracle)?;
    check(
        "ours beats blind",
        ours < blind,
        format!("oracle {oracle:.4}, ours {ours:.4}, blind {blind:.4}"),
    );
    Ok((out, ok))
}
