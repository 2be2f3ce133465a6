//! The `key: value` run configuration.
//!
//! One entry per line, dotted namespaces for grouped keys, `#` starts a
//! comment, lists are written `[a, b]` and optional values accept `none`.
//! Unknown keys are rejected so typos never silently fall back to defaults.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::PathBuf;

use sha2::{Digest, Sha256};

use super::PipelineError;
use crate::render::{CueKind, DEFAULT_COC_SCALE, DEFAULT_OCCLUSION_THRESHOLD};
use crate::sampling::{PointStrategy, SamplingConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub enabled: bool,
    pub frames_per_segment: usize,
}

/// Ranges the per-view refocus parameters are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct RefocusConfig {
    pub focus_distance: [f64; 2],
    pub aperture: [f64; 2],
    pub coc_scale: f64,
    pub max_coc_px: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderConfig {
    pub rgb_supersample: bool,
    /// Also write each cue as raw little-endian f32 next to its PNG.
    pub float_dump: bool,
    pub occlusion_threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mesh: Option<PathBuf>,
    pub texture: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
    pub cues: Vec<CueKind>,
    pub seed: u64,
    pub jobs: usize,
    pub resume: bool,
    pub sampling: SamplingConfig,
    pub trajectory: TrajectoryConfig,
    pub refocus: RefocusConfig,
    pub render: RenderConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            mesh: None,
            texture: None,
            output_dir: None,
            cues: vec![
                CueKind::Rgb,
                CueKind::DepthZbuffer,
                CueKind::DepthEuclidean,
                CueKind::Normals,
                CueKind::MaskValid,
            ],
            seed: 0,
            jobs: 1,
            resume: false,
            sampling: SamplingConfig::default(),
            trajectory: TrajectoryConfig {
                enabled: false,
                frames_per_segment: 10,
            },
            refocus: RefocusConfig {
                focus_distance: [1.0, 4.0],
                aperture: [0.0, 0.01],
                coc_scale: DEFAULT_COC_SCALE,
                max_coc_px: Some(16.0),
            },
            render: RenderConfig {
                rgb_supersample: false,
                float_dump: false,
                occlusion_threshold: DEFAULT_OCCLUSION_THRESHOLD,
            },
        }
    }
}

const KEYS: &[&str] = &[
    "mesh",
    "texture",
    "output_dir",
    "cues",
    "seed",
    "jobs",
    "resume",
    "sampling.poisson_radius",
    "sampling.camera_height_range",
    "sampling.clearance_radius",
    "sampling.n_points",
    "sampling.point_strategy",
    "sampling.min_views",
    "sampling.max_views",
    "sampling.min_view_distance",
    "sampling.max_view_distance",
    "sampling.fov_range",
    "sampling.fov_mean",
    "sampling.fov_std",
    "sampling.roll_range",
    "sampling.resolution",
    "trajectory.enabled",
    "trajectory.frames_per_segment",
    "refocus.focus_distance",
    "refocus.aperture",
    "refocus.coc_scale",
    "refocus.max_coc_px",
    "render.rgb_supersample",
    "render.float_dump",
    "render.occlusion_threshold",
];

/// Keys that change how a run executes but not what it produces.
const RUN_ONLY_KEYS: &[&str] = &["output_dir", "jobs", "resume"];

enum Value {
    Scalar(String),
    List(Vec<String>),
}

struct Entry<'a> {
    line: usize,
    key: &'a str,
    value: Value,
}

impl Entry<'_> {
    fn err(&self, msg: impl std::fmt::Display) -> PipelineError {
        PipelineError::Config(format!("line {}: {}: {msg}", self.line, self.key))
    }

    fn scalar(&self) -> Result<&str, PipelineError> {
        match &self.value {
            Value::Scalar(s) => Ok(s),
            Value::List(_) => Err(self.err("expected a single value, got a list")),
        }
    }

    fn list(&self) -> Result<&[String], PipelineError> {
        match &self.value {
            Value::List(l) => Ok(l),
            Value::Scalar(_) => Err(self.err("expected a list like [a, b]")),
        }
    }

    fn is_none(&self) -> bool {
        matches!(&self.value, Value::Scalar(s) if s == "none")
    }

    fn float(&self) -> Result<f64, PipelineError> {
        let s = self.scalar()?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(self.err(format!("expected a number, got '{s}'"))),
        }
    }

    fn int(&self, min: i64) -> Result<i64, PipelineError> {
        let s = self.scalar()?;
        let v: i64 = s
            .parse()
            .map_err(|_| self.err(format!("expected an integer, got '{s}'")))?;
        if v < min {
            return Err(self.err(format!("must be >= {min}, got {v}")));
        }
        Ok(v)
    }

    fn boolean(&self) -> Result<bool, PipelineError> {
        match self.scalar()? {
            "true" => Ok(true),
            "false" => Ok(false),
            s => Err(self.err(format!("expected true or false, got '{s}'"))),
        }
    }

    fn pair(&self) -> Result<[f64; 2], PipelineError> {
        let l = self.list()?;
        if l.len() != 2 {
            return Err(self.err(format!("expected [min, max], got {} values", l.len())));
        }
        let parse = |s: &String| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| self.err(format!("expected a number, got '{s}'")))
        };
        let (a, b) = (parse(&l[0])?, parse(&l[1])?);
        if a > b {
            return Err(self.err(format!("min {a} exceeds max {b}")));
        }
        Ok([a, b])
    }
}

fn unquote(s: &str) -> String {
    let s = s.trim();
    if s.len() >= 2 && ((s.starts_with('"') && s.ends_with('"')) || (s.starts_with('\'') && s.ends_with('\''))) {
        s[1..s.len() - 1].to_string()
    } else {
        s.to_string()
    }
}

fn nearest<'a>(word: &str, options: impl Iterator<Item = &'a str>) -> Option<&'a str> {
    options
        .map(|o| (strsim::levenshtein(word, o), o))
        .min()
        .filter(|(d, _)| *d <= 3.max(word.len() / 3))
        .map(|(_, o)| o)
}

fn parse_entries(text: &str) -> Result<Vec<Entry<'_>>, PipelineError> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once(':')
            .ok_or_else(|| PipelineError::Config(format!("line {line}: expected 'key: value', got '{content}'")))?;
        let key = key.trim();
        let value = value.trim();
        if !KEYS.contains(&key) {
            let hint = nearest(key, KEYS.iter().copied())
                .map(|k| format!(" (did you mean '{k}'?)"))
                .unwrap_or_default();
            return Err(PipelineError::Config(format!("line {line}: unknown key '{key}'{hint}")));
        }
        if !seen.insert(key) {
            return Err(PipelineError::Config(format!("line {line}: duplicate key '{key}'")));
        }
        if value.is_empty() {
            return Err(PipelineError::Config(format!("line {line}: {key}: missing value")));
        }
        let value = if let Some(inner) = value.strip_prefix('[') {
            let inner = inner
                .strip_suffix(']')
                .ok_or_else(|| PipelineError::Config(format!("line {line}: {key}: unterminated list")))?;
            let items: Vec<String> = inner.split(',').map(unquote).filter(|s| !s.is_empty()).collect();
            Value::List(items)
        } else {
            Value::Scalar(unquote(value))
        };
        out.push(Entry { line, key, value });
    }
    Ok(out)
}

pub fn parse_cue_list<S: AsRef<str>>(names: &[S]) -> Result<Vec<CueKind>, PipelineError> {
    let mut cues = Vec::new();
    for n in names {
        let k: CueKind = n
            .as_ref()
            .trim()
            .parse()
            .map_err(|e| PipelineError::Config(format!("{e}")))?;
        if !cues.contains(&k) {
            cues.push(k);
        }
    }
    if cues.is_empty() {
        return Err(PipelineError::Config("at least one cue is required".into()));
    }
    Ok(cues)
}

/// Parses a configuration; omitted keys keep their defaults.
pub fn load_config(text: &str) -> Result<PipelineConfig, PipelineError> {
    let mut c = PipelineConfig::default();
    for e in parse_entries(text)? {
        let s = &mut c.sampling;
        match e.key {
            "mesh" => c.mesh = Some(PathBuf::from(e.scalar()?)),
            "texture" => {
                c.texture = if e.is_none() {
                    None
                } else {
                    Some(PathBuf::from(e.scalar()?))
                }
            }
            "output_dir" => c.output_dir = Some(PathBuf::from(e.scalar()?)),
            "cues" => c.cues = parse_cue_list(e.list()?).map_err(|err| e.err(err))?,
            "seed" => c.seed = e.int(0)? as u64,
            "jobs" => c.jobs = e.int(1)? as usize,
            "resume" => c.resume = e.boolean()?,
            "sampling.poisson_radius" => s.poisson_radius = e.float()?,
            "sampling.camera_height_range" => s.camera_height_range = if e.is_none() { None } else { Some(e.pair()?) },
            "sampling.clearance_radius" => s.clearance_radius = e.float()?,
            "sampling.n_points" => s.n_points = e.int(0)? as usize,
            "sampling.point_strategy" => {
                s.point_strategy = match e.scalar()? {
                    "uniform_face" => PointStrategy::UniformFace,
                    "area_weighted" => PointStrategy::AreaWeighted,
                    other => return Err(e.err(format!("expected uniform_face or area_weighted, got '{other}'"))),
                }
            }
            "sampling.min_views" => s.min_views_per_point = e.int(1)? as usize,
            "sampling.max_views" => s.max_views_per_point = if e.is_none() { None } else { Some(e.int(1)? as usize) },
            "sampling.min_view_distance" => s.min_view_distance = e.float()?,
            "sampling.max_view_distance" => s.max_view_distance = e.float()?,
            "sampling.fov_range" => s.fov_range = e.pair()?,
            "sampling.fov_mean" => s.fov_mean = e.float()?,
            "sampling.fov_std" => s.fov_std = e.float()?,
            "sampling.roll_range" => s.roll_range = e.pair()?,
            "sampling.resolution" => {
                let v = e.int(1)?;
                s.resolution = u32::try_from(v).map_err(|_| e.err("too large"))?;
            }
            "trajectory.enabled" => c.trajectory.enabled = e.boolean()?,
            "trajectory.frames_per_segment" => c.trajectory.frames_per_segment = e.int(1)? as usize,
            "refocus.focus_distance" => c.refocus.focus_distance = e.pair()?,
            "refocus.aperture" => c.refocus.aperture = e.pair()?,
            "refocus.coc_scale" => c.refocus.coc_scale = e.float()?,
            "refocus.max_coc_px" => c.refocus.max_coc_px = if e.is_none() { None } else { Some(e.float()?) },
            "render.rgb_supersample" => c.render.rgb_supersample = e.boolean()?,
            "render.float_dump" => c.render.float_dump = e.boolean()?,
            "render.occlusion_threshold" => c.render.occlusion_threshold = e.float()?,
            _ => unreachable!("key list and match arms agree"),
        }
    }
    c.check_values()?;
    Ok(c)
}

fn fmt_pair(p: [f64; 2]) -> String {
    format!("[{:?}, {:?}]", p[0], p[1])
}

fn fmt_opt<T: std::fmt::Debug>(v: Option<T>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_else(|| "none".into())
}

impl PipelineConfig {
    /// Ranges a parsed or hand-built config must satisfy.
    pub fn check_values(&self) -> Result<(), PipelineError> {
        self.sampling
            .validate()
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        if self.cues.is_empty() {
            return Err(PipelineError::Config("at least one cue is required".into()));
        }
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be >= 1".into()));
        }
        if self.trajectory.frames_per_segment == 0 {
            return Err(PipelineError::Config(
                "trajectory.frames_per_segment must be >= 1".into(),
            ));
        }
        if !(self.refocus.focus_distance[0] > 0.0) {
            return Err(PipelineError::Config("refocus.focus_distance must be > 0".into()));
        }
        if !(self.refocus.aperture[0] >= 0.0) {
            return Err(PipelineError::Config("refocus.aperture must be >= 0".into()));
        }
        if !(self.refocus.coc_scale >= 0.0) {
            return Err(PipelineError::Config("refocus.coc_scale must be >= 0".into()));
        }
        if matches!(self.refocus.max_coc_px, Some(m) if !(m >= 0.0)) {
            return Err(PipelineError::Config("refocus.max_coc_px must be >= 0".into()));
        }
        if !(self.render.occlusion_threshold >= 0.0) {
            return Err(PipelineError::Config("render.occlusion_threshold must be >= 0".into()));
        }
        Ok(())
    }

    /// Every key with its effective value, in a fixed order. The output
    /// parses back to the same config.
    pub fn to_text(&self) -> String {
        self.render_text(true)
    }

    fn render_text(&self, include_run_keys: bool) -> String {
        let s = &self.sampling;
        let path = |p: &Option<PathBuf>| {
            p.as_ref()
                .map(|p| p.display().to_string())
                .unwrap_or_else(|| "none".into())
        };
        let cues: Vec<&str> = self.cues.iter().map(|c| c.name()).collect();
        let values: Vec<(&str, String)> = vec![
            ("mesh", path(&self.mesh)),
            ("texture", path(&self.texture)),
            ("output_dir", path(&self.output_dir)),
            ("cues", format!("[{}]", cues.join(", "))),
            ("seed", self.seed.to_string()),
            ("jobs", self.jobs.to_string()),
            ("resume", self.resume.to_string()),
            ("sampling.poisson_radius", format!("{:?}", s.poisson_radius)),
            (
                "sampling.camera_height_range",
                s.camera_height_range.map(fmt_pair).unwrap_or_else(|| "none".into()),
            ),
            ("sampling.clearance_radius", format!("{:?}", s.clearance_radius)),
            ("sampling.n_points", s.n_points.to_string()),
            (
                "sampling.point_strategy",
                match s.point_strategy {
                    PointStrategy::UniformFace => "uniform_face".into(),
                    PointStrategy::AreaWeighted => "area_weighted".into(),
                },
            ),
            ("sampling.min_views", s.min_views_per_point.to_string()),
            ("sampling.max_views", fmt_opt(s.max_views_per_point)),
            ("sampling.min_view_distance", format!("{:?}", s.min_view_distance)),
            ("sampling.max_view_distance", format!("{:?}", s.max_view_distance)),
            ("sampling.fov_range", fmt_pair(s.fov_range)),
            ("sampling.fov_mean", format!("{:?}", s.fov_mean)),
            ("sampling.fov_std", format!("{:?}", s.fov_std)),
            ("sampling.roll_range", fmt_pair(s.roll_range)),
            ("sampling.resolution", s.resolution.to_string()),
            ("trajectory.enabled", self.trajectory.enabled.to_string()),
            (
                "trajectory.frames_per_segment",
                self.trajectory.frames_per_segment.to_string(),
            ),
            ("refocus.focus_distance", fmt_pair(self.refocus.focus_distance)),
            ("refocus.aperture", fmt_pair(self.refocus.aperture)),
            ("refocus.coc_scale", format!("{:?}", self.refocus.coc_scale)),
            ("refocus.max_coc_px", fmt_opt(self.refocus.max_coc_px)),
            ("render.rgb_supersample", self.render.rgb_supersample.to_string()),
            ("render.float_dump", self.render.float_dump.to_string()),
            (
                "render.occlusion_threshold",
                format!("{:?}", self.render.occlusion_threshold),
            ),
        ];
        debug_assert_eq!(values.len(), KEYS.len());
        let mut out = String::new();
        for (k, v) in values {
            if !include_run_keys && RUN_ONLY_KEYS.contains(&k) {
                continue;
            }
            // Unset paths are omitted so the text stays loadable.
            if v == "none" && matches!(k, "mesh" | "output_dir") {
                continue;
            }
            let _ = writeln!(out, "{k}: {v}");
        }
        out
    }

    /// Hex sha256 of the canonical text minus keys that only affect
    /// execution (output location, worker count, resume flag).
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.render_text(false).as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
