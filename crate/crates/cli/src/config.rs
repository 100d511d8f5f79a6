//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use sigma_flow::flow::FlowConfig;
use sigma_flow::geometry::{Geometry, GeometryKind};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Flow,
    Verify,
    Constants,
    Construct,
    Sweep,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Flow => "flow",
            Command::Verify => "verify",
            Command::Constants => "constants",
            Command::Construct => "construct",
            Command::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "flow" => Command::Flow,
            "verify" => Command::Verify,
            "constants" => Command::Constants,
            "construct" => Command::Construct,
            "sweep" => Command::Sweep,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialProfile {
    Constant,
    Sine,
    CosineBand,
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub k: usize,
    pub l: usize,
    pub amplitude: f64,
    pub grid: usize,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub geometry: GeometryKind,
    pub n: usize,
    pub grid_size: usize,
    pub circle_length: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub flow: FlowConfig,
    pub profile: InitialProfile,
    pub amplitude: f64,
    /// Frequency of the `cosine_band` profile.
    pub band: usize,
    pub output_dir: PathBuf,
    pub seed: u64,
    /// Random fields per inequality suite.
    pub samples: usize,
    pub eps0: f64,
    pub neck_epsilon: f64,
    pub deltas: Vec<f64>,
    pub profile_grid: usize,
    pub sweep_rows: Vec<SweepRow>,
}

const KEYS: &[&str] = &[
    "command",
    "geometry",
    "n",
    "grid_size",
    "circle_length",
    "r_min",
    "r_max",
    "k",
    "l",
    "cfl",
    "tol_residual",
    "max_time",
    "conservation_check_every",
    "trace_stride",
    "initial_profile",
    "amplitude",
    "band",
    "profile_file",
    "output_dir",
    "seed",
    "samples",
    "eps0",
    "neck_epsilon",
    "deltas",
    "profile_grid",
    "sweep_rows",
];

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!("line {}: expected `key = value`, got `{line}`", no + 1)));
        };
        let (k, v) = (k.trim(), v.trim());
        if !KEYS.contains(&k) {
            return Err(CliError::Config(format!("line {}: unknown key `{k}`", no + 1)));
        }
        if out.insert(k.to_string(), v.to_string()).is_some() {
            return Err(CliError::Config(format!("line {}: duplicate key `{k}`", no + 1)));
        }
    }
    Ok(out)
}

fn get<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str, default: T) -> Result<T, CliError> {
    match map.get(key) {
        None => Ok(default),
        Some(v) => v.parse().map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{v}`"))),
    }
}

fn parse_list(key: &str, v: &str) -> Result<Vec<f64>, CliError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| CliError::Config(format!("`{key}`: cannot parse `{s}`"))))
        .collect()
}

/// `k l amplitude grid` rows separated by `;`.
fn parse_rows(v: &str) -> Result<Vec<SweepRow>, CliError> {
    let mut rows = vec![];
    for part in v.split(';').map(str::trim).filter(|s| !s.is_empty()) {
        let f: Vec<&str> = part.split_whitespace().collect();
        let bad = || CliError::Config(format!("`sweep_rows`: expected `k l amplitude grid`, got `{part}`"));
        if f.len() != 4 {
            return Err(bad());
        }
        rows.push(SweepRow {
            k: f[0].parse().map_err(|_| bad())?,
            l: f[1].parse().map_err(|_| bad())?,
            amplitude: f[2].parse().map_err(|_| bad())?,
            grid: f[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(rows)
}

impl RunConfig {
    pub fn from_text(command: Command, text: &str) -> Result<Self, CliError> {
        let map = parse_pairs(text)?;
        if let Some(c) = map.get("command") {
            if Command::parse(c) != Some(command) {
                return Err(CliError::Config(format!("config is for `{c}` but `{}` was requested", command.name())));
            }
        }
        let geometry = match map.get("geometry") {
            None => GeometryKind::ProductCircleSphere,
            Some(g) => GeometryKind::parse(g).ok_or_else(|| CliError::Config(format!("unknown geometry `{g}`")))?,
        };
        let mut flow = FlowConfig::new(get(&map, "k", 2)?, get(&map, "l", 1)?);
        flow.cfl = get(&map, "cfl", flow.cfl)?;
        flow.tol_residual = get(&map, "tol_residual", flow.tol_residual)?;
        flow.max_time = get(&map, "max_time", flow.max_time)?;
        flow.conservation_check_every = get(&map, "conservation_check_every", flow.conservation_check_every)?;
        flow.trace_stride = get(&map, "trace_stride", flow.trace_stride)?;
        let profile = match map.get("initial_profile").map(String::as_str).unwrap_or("sine") {
            "constant" => InitialProfile::Constant,
            "sine" => InitialProfile::Sine,
            "cosine_band" => InitialProfile::CosineBand,
            "file" => InitialProfile::File(
                map.get("profile_file")
                    .map(PathBuf::from)
                    .ok_or_else(|| CliError::Config("`initial_profile = file` needs `profile_file`".into()))?,
            ),
            other => return Err(CliError::Config(format!("unknown initial_profile `{other}`"))),
        };
        let cfg = Self {
            command,
            geometry,
            n: get(&map, "n", 5)?,
            grid_size: get(&map, "grid_size", 256)?,
            circle_length: get(&map, "circle_length", 2.0 * PI)?,
            r_min: get(&map, "r_min", 0.01)?,
            r_max: get(&map, "r_max", 10.0)?,
            flow,
            profile,
            amplitude: get(&map, "amplitude", 0.1)?,
            band: get(&map, "band", 2)?,
            output_dir: PathBuf::from(map.get("output_dir").map(String::as_str).unwrap_or("out")),
            seed: get(&map, "seed", 0)?,
            samples: get(&map, "samples", 100)?,
            eps0: get(&map, "eps0", 0.1)?,
            neck_epsilon: get(&map, "neck_epsilon", 0.1)?,
            deltas: match map.get("deltas") {
                Some(v) => parse_list("deltas", v)?,
                None => vec![0.2, 0.1, 0.05, 0.025],
            },
            profile_grid: get(&map, "profile_grid", 400)?,
            sweep_rows: match map.get("sweep_rows") {
                Some(v) => parse_rows(v)?,
                None => vec![],
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(command: Command, path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_text(command, &text)
    }

    pub fn geometry_with(&self, grid: usize) -> Result<Geometry<f64>, CliError> {
        let g = match self.geometry {
            GeometryKind::RoundSphere => Geometry::round_sphere(self.n, grid),
            GeometryKind::ProductCircleSphere => Geometry::product_circle_sphere(self.n, grid, self.circle_length),
            GeometryKind::RadialEuclidean => Geometry::radial_euclidean(self.n, grid, self.r_min, self.r_max),
        };
        g.map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn build_geometry(&self) -> Result<Geometry<f64>, CliError> {
        self.geometry_with(self.grid_size)
    }

    /// Checks every numeric field the chosen command will use.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        match self.command {
            Command::Flow => {
                self.build_geometry()?;
                self.flow.validate(self.n).map_err(|e| CliError::Config(e.to_string()))?;
                if !self.amplitude.is_finite() {
                    return bad(format!("amplitude must be finite, got {}", self.amplitude));
                }
            }
            Command::Sweep => {
                for (i, r) in self.sweep_rows.iter().enumerate() {
                    let mut f = self.flow.clone();
                    f.k = r.k;
                    f.l = r.l;
                    f.validate(self.n).map_err(|e| CliError::Config(format!("sweep row {i}: {e}")))?;
                    self.geometry_with(r.grid).map_err(|e| CliError::Config(format!("sweep row {i}: {e}")))?;
                }
            }
            Command::Constants => {
                let (n, k, l) = (self.n, self.flow.k, self.flow.l);
                if n < 3 || !(l < k && k <= n) {
                    return bad(format!("constants need n >= 3 and 0 <= l < k <= n, got n={n}, k={k}, l={l}"));
                }
            }
            Command::Construct => {
                let (n, k, l) = (self.n, self.flow.k, self.flow.l);
                if !(k >= 1 && 2 * k < n && l < k) {
                    return bad(format!("construct needs l < k < n/2, got n={n}, k={k}, l={l}"));
                }
                if !(self.eps0 > 0.0 && self.eps0 < 1.0) {
                    return bad(format!("eps0 must lie in (0, 1), got {}", self.eps0));
                }
                if !(self.neck_epsilon > 0.0 && self.neck_epsilon < 0.5) {
                    return bad(format!("neck_epsilon must lie in (0, 1/2), got {}", self.neck_epsilon));
                }
                if self.deltas.is_empty() || self.deltas.iter().any(|d| !(*d > 0.0 && *d < 1.0)) {
                    return bad(format!("deltas must be a nonempty list in (0, 1), got {:?}", self.deltas));
                }
                if self.profile_grid < 2 {
                    return bad("profile_grid must be at least 2".into());
                }
            }
            Command::Verify => {
                if self.samples == 0 {
                    return bad("samples must be positive".into());
                }
            }
        }
        Ok(())
    }

    /// Initial conformal factor on `geom`.
    pub fn initial_u(&self, geom: &Geometry<f64>, amplitude: f64) -> Result<Vec<f64>, CliError> {
        let a = amplitude;
        let x = geom.nodes();
        let unit: Vec<f64> = match geom.kind() {
            GeometryKind::RoundSphere => x.iter().map(|t| t / PI).collect(),
            GeometryKind::ProductCircleSphere => x.iter().map(|t| t / geom.circle_length()).collect(),
            GeometryKind::RadialEuclidean => {
                let (lo, hi) = (self.r_min.ln(), self.r_max.ln());
                x.iter().map(|r| (r.ln() - lo) / (hi - lo)).collect()
            }
        };
        let j = self.band as f64;
        Ok(match &self.profile {
            InitialProfile::Constant => vec![a; x.len()],
            InitialProfile::Sine => match geom.kind() {
                // the first zonal harmonic is the smooth analogue on the sphere
                GeometryKind::RoundSphere => x.iter().map(|t| a * t.cos()).collect(),
                _ => unit.iter().map(|s| a * (2.0 * PI * s).sin()).collect(),
            },
            InitialProfile::CosineBand => match geom.kind() {
                GeometryKind::RoundSphere => x.iter().map(|t| a * (j * t).cos()).collect(),
                _ => unit.iter().map(|s| a * (2.0 * PI * j * s).cos()).collect(),
            },
            InitialProfile::File(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Config(format!("cannot read profile {}: {e}", p.display())))?;
                let v: Vec<f64> = text
                    .lines()
                    .map(|l| l.split('#').next().unwrap_or("").trim())
                    .filter(|l| !l.is_empty())
                    .map(|l| l.parse().map_err(|_| CliError::Config(format!("profile file: cannot parse `{l}`"))))
                    .collect::<Result<_, _>>()?;
                if v.len() != x.len() {
                    return Err(CliError::Config(format!(
                        "profile file has {} values but the grid has {} nodes",
                        v.len(),
                        x.len()
                    )));
                }
                v
            }
        })
    }
}
