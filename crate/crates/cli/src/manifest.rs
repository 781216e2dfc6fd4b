//! Flat `key=value` run manifests.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown or repeated
//! keys are errors. Resolution order is flags, then manifest, then built-in
//! defaults.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use uvt::altmin::{AltMinConfig, Tolerance};
use uvt::geometry::RampWindow;
use uvt::graphinit::KappaMode;
use uvt::pipeline::{Method, PipelineOptions};

use crate::error::{CliError, Result};
use crate::fsutil::read_file;

pub const KEYS: [&str; 13] = [
    "method",
    "input",
    "out_dir",
    "seed",
    "kappa",
    "knn",
    "k_max",
    "max_iter",
    "delta_deg",
    "trials",
    "epsilon",
    "fbp_window",
    "snapshot_every",
];

/// Partially specified settings from one source.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    pub method: Option<Method>,
    pub input: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub kappa: Option<KappaMode>,
    pub knn: Option<Option<usize>>,
    pub k_max: Option<usize>,
    pub max_iter: Option<usize>,
    pub delta_deg: Option<f64>,
    pub trials: Option<usize>,
    pub epsilon: Option<Tolerance>,
    pub fbp_window: Option<RampWindow>,
    pub snapshot_every: Option<Option<usize>>,
}

macro_rules! overlay {
    ($lo:expr, $hi:expr, $($f:ident),*) => {
        Settings { $($f: $hi.$f.or($lo.$f)),* }
    };
}

impl Settings {
    /// Fields of `higher` win where set.
    pub fn overlay(self, higher: Settings) -> Settings {
        overlay!(
            self,
            higher,
            method,
            input,
            out_dir,
            seed,
            kappa,
            knn,
            k_max,
            max_iter,
            delta_deg,
            trials,
            epsilon,
            fbp_window,
            snapshot_every
        )
    }

    pub fn parse(text: &str, path: &Path) -> Result<Settings> {
        let mut s = Settings::default();
        let mut seen: Vec<&str> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = (i + 1) as u64;
            let err = |message: String| CliError::Parse {
                path: path.to_path_buf(),
                line,
                message,
            };
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let (key, value) = trimmed
                .split_once('=')
                .ok_or_else(|| err(format!("expected key=value, found '{trimmed}'")))?;
            let (key, value) = (key.trim(), value.trim());
            let Some(&known) = KEYS.iter().find(|k| **k == key) else {
                return Err(err(format!("unknown key '{key}'")));
            };
            if seen.contains(&known) {
                return Err(err(format!("duplicate key '{key}'")));
            }
            seen.push(known);
            let bad = |what: &str| err(format!("invalid {what} '{value}'"));
            match known {
                "method" => s.method = Some(value.parse().map_err(|_| bad("method"))?),
                "input" => s.input = Some(PathBuf::from(value)),
                "out_dir" => s.out_dir = Some(PathBuf::from(value)),
                "seed" => s.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                "kappa" => s.kappa = Some(parse_kappa(value).ok_or_else(|| bad("kappa"))?),
                "knn" => s.knn = Some(parse_optional(value).ok_or_else(|| bad("knn"))?),
                "k_max" => s.k_max = Some(value.parse().map_err(|_| bad("k_max"))?),
                "max_iter" => s.max_iter = Some(value.parse().map_err(|_| bad("max_iter"))?),
                "delta_deg" => s.delta_deg = Some(value.parse().map_err(|_| bad("delta_deg"))?),
                "trials" => s.trials = Some(value.parse().map_err(|_| bad("trials"))?),
                "epsilon" => {
                    s.epsilon = Some(parse_tolerance(value).ok_or_else(|| bad("epsilon"))?)
                }
                "fbp_window" => {
                    s.fbp_window = Some(parse_window(value).ok_or_else(|| bad("fbp_window"))?)
                }
                "snapshot_every" => {
                    s.snapshot_every =
                        Some(parse_optional(value).ok_or_else(|| bad("snapshot_every"))?)
                }
                _ => unreachable!("every key in KEYS is handled"),
            }
        }
        Ok(s)
    }

    pub fn read(path: &Path) -> Result<Settings> {
        let bytes = read_file(path)?;
        let text = String::from_utf8(bytes)
            .map_err(|_| CliError::format(path, "manifest is not UTF-8"))?;
        Settings::parse(&text, path)
    }
}

/// Fully resolved run settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub method: Method,
    pub input: PathBuf,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub options: PipelineOptions,
}

impl RunManifest {
    /// Fills the gaps in `s` from the defaults for a dataset with detector
    /// size `size`, shift bound `max_shift` and seed `seed`.
    pub fn resolve(s: Settings, size: usize, max_shift: Option<i32>, seed: u64) -> Result<Self> {
        let method = s.method.ok_or_else(|| CliError::usage("no method given"))?;
        let input = s
            .input
            .ok_or_else(|| CliError::usage("no input dataset given"))?;
        let out_dir = s.out_dir.unwrap_or_else(|| PathBuf::from("."));
        let mut options = PipelineOptions::new(size, max_shift);
        if let Some(k) = s.kappa {
            options.kappa = k;
        }
        if let Some(k) = s.knn {
            options.knn = k;
        }
        let a: &mut AltMinConfig = &mut options.altmin;
        if let Some(v) = s.k_max {
            a.k_max = v;
        }
        if let Some(v) = s.max_iter {
            a.max_iter = v;
        }
        if let Some(v) = s.delta_deg {
            a.delta = v.to_radians();
        }
        if let Some(v) = s.trials {
            a.trials = v;
        }
        if let Some(v) = s.epsilon {
            a.epsilon = v;
        }
        if let Some(v) = s.fbp_window {
            a.fbp.window = v;
        }
        if let Some(v) = s.snapshot_every {
            a.snapshot_every = v;
        }
        a.validate(size)?;
        Ok(RunManifest {
            method,
            input,
            out_dir,
            seed: s.seed.unwrap_or(seed),
            options,
        })
    }

    pub fn to_text(&self) -> String {
        let a = &self.options.altmin;
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k}={v}");
        };
        kv("method", self.method.to_string());
        kv("input", self.input.display().to_string());
        kv("out_dir", self.out_dir.display().to_string());
        kv("seed", self.seed.to_string());
        kv("kappa", format_kappa(&self.options.kappa));
        kv("knn", format_optional(self.options.knn));
        kv("k_max", a.k_max.to_string());
        kv("max_iter", a.max_iter.to_string());
        kv("delta_deg", a.delta.to_degrees().to_string());
        kv("trials", a.trials.to_string());
        kv("epsilon", format_tolerance(&a.epsilon));
        kv("fbp_window", format_window(a.fbp.window).to_string());
        kv("snapshot_every", format_optional(a.snapshot_every));
        out
    }
}

fn parse_optional(v: &str) -> Option<Option<usize>> {
    if v == "none" {
        Some(None)
    } else {
        v.parse().ok().map(Some)
    }
}

fn format_optional(v: Option<usize>) -> String {
    v.map(|k| k.to_string()).unwrap_or_else(|| "none".into())
}

/// `median`, `fixed:<kappa>`, `local:<neighbors>:<scale>` or
/// `selftuning:<neighbors>`.
pub fn parse_kappa(v: &str) -> Option<KappaMode> {
    let parts: Vec<&str> = v.split(':').collect();
    match parts.as_slice() {
        ["median"] => Some(KappaMode::MedianHeuristic),
        ["fixed", k] => k
            .parse()
            .ok()
            .filter(|k: &f64| *k > 0.0)
            .map(KappaMode::Fixed),
        ["local", n, s] => Some(KappaMode::LocalMedian {
            neighbors: n.parse().ok()?,
            scale: s.parse().ok()?,
        }),
        ["selftuning", n] => Some(KappaMode::SelfTuning {
            neighbors: n.parse().ok()?,
        }),
        _ => None,
    }
}

pub fn format_kappa(k: &KappaMode) -> String {
    match k {
        KappaMode::MedianHeuristic => "median".into(),
        KappaMode::Fixed(v) => format!("fixed:{v}"),
        KappaMode::LocalMedian { neighbors, scale } => format!("local:{neighbors}:{scale}"),
        KappaMode::SelfTuning { neighbors } => format!("selftuning:{neighbors}"),
    }
}

/// `rel:<fraction>` or `abs:<value>`.
pub fn parse_tolerance(v: &str) -> Option<Tolerance> {
    let (kind, x) = v.split_once(':')?;
    let x: f64 = x.parse().ok()?;
    match kind {
        "rel" => Some(Tolerance::Relative(x)),
        "abs" => Some(Tolerance::Absolute(x)),
        _ => None,
    }
}

pub fn format_tolerance(t: &Tolerance) -> String {
    match t {
        Tolerance::Relative(x) => format!("rel:{x}"),
        Tolerance::Absolute(x) => format!("abs:{x}"),
    }
}

pub fn parse_window(v: &str) -> Option<RampWindow> {
    match v {
        "none" => Some(RampWindow::None),
        "hann" => Some(RampWindow::Hann),
        _ => None,
    }
}

pub fn format_window(w: RampWindow) -> &'static str {
    match w {
        RampWindow::None => "none",
        RampWindow::Hann => "hann",
    }
}
